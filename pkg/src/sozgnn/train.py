"""Training loop, metrics, cross-validation, random hyperparameter search and ablations."""
from __future__ import annotations

import hashlib
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from . import model as nn
from .data import kfold_split
from .features import GROUP_ORDER, GraphSample, apply_normalizer, fit_normalizer, mask_feature_groups

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    learning_rate: float = 3e-3
    batch_size: int = 16
    patience: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass(frozen=True)
class SearchSpace:
    lr_min: float = 1e-4
    lr_max: float = 1e-2
    hidden_dims: tuple[int, ...] = (32, 64, 128)
    alpha_min: float = 0.1
    alpha_max: float = 0.9
    dropout_min: float = 0.0
    dropout_max: float = 0.5
    n_trials: int = 100
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if not 0 < self.lr_min <= self.lr_max:
            raise ValueError("need 0 < lr_min <= lr_max")
        if not 0 <= self.alpha_min <= self.alpha_max <= 1:
            raise ValueError("need 0 <= alpha_min <= alpha_max <= 1")
        if not 0 <= self.dropout_min <= self.dropout_max < 1:
            raise ValueError("need 0 <= dropout_min <= dropout_max < 1")
        if not self.hidden_dims or min(self.hidden_dims) < 1:
            raise ValueError("hidden_dims must be non-empty and positive")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")


# -- class weights and metrics ----------------------------------------------------

def class_weights(labels, n_classes: int = 2) -> tuple[tuple[float, ...], list[str]]:
    """Inverse-frequency weights total / (n_classes * count), rescaled to mean 1.

    If any class is missing the weights fall back to all ones and a warning is
    returned (and emitted).
    """
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=n_classes)[:n_classes]
    if np.any(counts == 0):
        msg = f"class(es) {np.flatnonzero(counts == 0).tolist()} absent from training labels; using unit weights"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        return tuple([1.0] * n_classes), [msg]
    raw = labels.size / (n_classes * counts)
    return tuple(float(w) for w in raw / raw.mean()), []


@dataclass(frozen=True)
class LevelMetrics:
    accuracy: float
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes: int = 2) -> "LevelMetrics":
        """Support-weighted precision/recall/F1 from the confusion matrix."""
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.size == 0:
            raise ValueError("no predictions to score")
        cm = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(cm, (y_true, y_pred), 1)
        tp = np.diag(cm).astype(float)
        support = cm.sum(axis=1).astype(float)
        predicted = cm.sum(axis=0).astype(float)
        prec = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
        rec = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
        denom = prec + rec
        f1 = np.divide(2 * prec * rec, denom, out=np.zeros_like(tp), where=denom > 0)
        w = support / support.sum()
        return cls(
            accuracy=float(tp.sum() / cm.sum()),
            precision=float(np.dot(w, prec)),
            recall=float(np.dot(w, rec)),
            f1=float(np.dot(w, f1)),
        )


METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class MetricsReport:
    graph: LevelMetrics
    node: LevelMetrics
    n_graphs: int
    n_nodes: int

    def to_dict(self) -> dict:
        return {"graph": asdict(self.graph), "node": asdict(self.node),
                "n_graphs": self.n_graphs, "n_nodes": self.n_nodes}


@dataclass(frozen=True)
class AggregateReport:
    """Mean and population std of each metric across folds."""
    mean: dict
    std: dict
    n_folds: int

    @classmethod
    def from_reports(cls, reports: Sequence[MetricsReport]) -> "AggregateReport":
        mean, std = {}, {}
        for level in ("graph", "node"):
            vals = {m: np.array([getattr(getattr(r, level), m) for r in reports]) for m in METRIC_NAMES}
            mean[level] = {m: float(v.mean()) for m, v in vals.items()}
            std[level] = {m: float(v.std()) for m, v in vals.items()}
        return cls(mean=mean, std=std, n_folds=len(reports))

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std, "n_folds": self.n_folds}

    def table(self) -> str:
        """Plain-text mean +/- std table (rows: metrics, columns: graph/node level)."""
        lines = [f"{'Metric':<10} {'Graph-level':>18} {'Node-level':>18}"]
        for m in METRIC_NAMES:
            cells = [f"{self.mean[lv][m]:.3f} ± {self.std[lv][m]:.3f}" for lv in ("graph", "node")]
            lines.append(f"{m.capitalize():<10} {cells[0]:>18} {cells[1]:>18}")
        return "\n".join(lines)


# -- training -------------------------------------------------------------------

class _Prepared:
    """Samples with their propagation matrices built once."""

    def __init__(self, samples: Sequence[GraphSample]):
        self.samples = list(samples)
        self._props = [nn.gcn_normalize(s.edges) for s in self.samples]

    def batch(self, idx) -> nn.GraphBatch:
        idx = list(idx)
        return nn.make_batch([self.samples[i] for i in idx], [self._props[i] for i in idx])

    def full(self) -> nn.GraphBatch:
        return self.batch(range(len(self.samples)))

    def __len__(self):
        return len(self.samples)


class Adam:
    def __init__(self, size: int, cfg: TrainConfig):
        self.cfg = cfg
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> None:
        c = self.cfg
        self.t += 1
        self.m = c.beta1 * self.m + (1 - c.beta1) * grad
        self.v = c.beta2 * self.v + (1 - c.beta2) * grad * grad
        m_hat = self.m / (1 - c.beta1 ** self.t)
        v_hat = self.v / (1 - c.beta2 ** self.t)
        params -= c.learning_rate * m_hat / (np.sqrt(v_hat) + c.eps)


def _accuracy(out: nn.ForwardOutput, b: nn.GraphBatch) -> tuple[float, float]:
    node_pred, graph_pred = nn.predict(out)
    return float(np.mean(graph_pred == b.graph_labels)), float(np.mean(node_pred == b.node_labels))


@dataclass
class TrainResult:
    params: nn.ModelParams
    history: list[dict]
    best_epoch: int
    best_val_loss: float
    warnings: list[str] = field(default_factory=list)


def train_model(train: Sequence[GraphSample], val: Sequence[GraphSample],
                model_cfg: nn.ModelConfig, train_cfg: TrainConfig) -> TrainResult:
    """Adam on the combined loss; returns the parameters of the best validation epoch.

    Without a validation set the training loss drives model selection.
    """
    if len(train) == 0:
        raise ValueError("empty training split")
    tr = _Prepared(train)
    va = _Prepared(val) if len(val) else None
    full_tr = tr.full()
    full_va = va.full() if va is not None else None

    params = nn.ModelParams.init(model_cfg, seed=train_cfg.seed)
    opt = Adam(params.flat.size, train_cfg)
    rng = np.random.default_rng(train_cfg.seed)
    history: list[dict] = []
    best = (math.inf, -1, params.flat.copy())
    stale = 0
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(len(tr))
        for start in range(0, len(order), train_cfg.batch_size):
            b = tr.batch(order[start:start + train_cfg.batch_size])
            loss, grad, _ = nn.loss_and_grad(params, b, model_cfg, train_mode=True, rng=rng)
            if not (math.isfinite(loss.total) and np.all(np.isfinite(grad))):
                raise TrainingDiverged(
                    f"non-finite loss/gradient at epoch {epoch}, step {start // train_cfg.batch_size} "
                    f"(lr={train_cfg.learning_rate}, loss={loss.total})"
                )
            opt.step(params.flat, grad)
            if not np.all(np.isfinite(params.flat)):
                raise TrainingDiverged(f"non-finite parameters after epoch {epoch}, lr={train_cfg.learning_rate}")

        row = {"epoch": epoch}
        tl, _, out = nn.loss_and_grad(params, full_tr, model_cfg)
        row.update(train_loss=tl.total, train_node_loss=tl.node, train_graph_loss=tl.graph)
        row["train_graph_acc"], row["train_node_acc"] = _accuracy(out, full_tr)
        if full_va is not None:
            vl, _, vout = nn.loss_and_grad(params, full_va, model_cfg)
            row.update(val_loss=vl.total, val_node_loss=vl.node, val_graph_loss=vl.graph)
            row["val_graph_acc"], row["val_node_acc"] = _accuracy(vout, full_va)
            score = vl.total
        else:
            score = tl.total
        if not math.isfinite(score):
            raise TrainingDiverged(f"non-finite epoch loss at epoch {epoch}")
        history.append(row)
        if score < best[0]:
            best = (score, epoch, params.flat.copy())
            stale = 0
        else:
            stale += 1
            if stale >= train_cfg.patience:
                break
    return TrainResult(params=nn.ModelParams(model_cfg, best[2]), history=history,
                       best_epoch=best[1], best_val_loss=float(best[0]))


def evaluate(params: nn.ModelParams, test: Sequence[GraphSample], model_cfg: nn.ModelConfig) -> MetricsReport:
    if len(test) == 0:
        raise ValueError("empty test set")
    b = _Prepared(test).full()
    out = nn.forward(params, b, model_cfg)
    node_pred, graph_pred = nn.predict(out)
    return MetricsReport(
        graph=LevelMetrics.from_predictions(b.graph_labels, graph_pred),
        node=LevelMetrics.from_predictions(b.node_labels, node_pred),
        n_graphs=b.n_graphs,
        n_nodes=int(b.node_labels.size),
    )


# -- fold protocol --------------------------------------------------------------

def sources_digest(samples: Sequence[GraphSample]) -> str:
    h = hashlib.sha256()
    for s in sorted(s.source for s in samples):
        h.update(repr(s).encode())
    return h.hexdigest()


@dataclass
class FoldResult:
    name: str
    report: MetricsReport
    best_epoch: int
    best_val_loss: float
    class_weights_node: tuple
    class_weights_graph: tuple
    normalizer_digest: str
    train_sources: list = field(repr=False, default_factory=list)
    test_sources: list = field(repr=False, default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "fold": self.name,
            "metrics": self.report.to_dict(),
            "best_epoch": self.best_epoch,
            "best_val_loss": self.best_val_loss,
            "class_weights_node": list(self.class_weights_node),
            "class_weights_graph": list(self.class_weights_graph),
            "normalizer_digest": self.normalizer_digest,
            "warnings": list(self.warnings),
        }


def run_fold(name: str, train: Sequence[GraphSample], val: Sequence[GraphSample], test: Sequence[GraphSample],
             model_cfg: nn.ModelConfig, train_cfg: TrainConfig,
             groups: Sequence[str] = GROUP_ORDER, keep_graph_features: bool = True) -> FoldResult:
    """Normalize on the training split only, weight classes, train, and score the test split."""
    norm = fit_normalizer(train)

    def prep(samples):
        return [mask_feature_groups(apply_normalizer(s, norm), groups, keep_graph_features) for s in samples]

    wn, warn_n = class_weights(np.concatenate([s.node_labels for s in train]))
    wg, warn_g = class_weights([s.graph_label for s in train])
    cfg = replace(model_cfg, class_weights_node=wn, class_weights_graph=wg)
    result = train_model(prep(train), prep(val), cfg, train_cfg)
    report = evaluate(result.params, prep(test), cfg)
    return FoldResult(
        name=name, report=report, best_epoch=result.best_epoch, best_val_loss=result.best_val_loss,
        class_weights_node=wn, class_weights_graph=wg, normalizer_digest=sources_digest(train),
        train_sources=[s.source for s in train], test_sources=[s.source for s in test],
        warnings=warn_n + warn_g,
    )


@dataclass
class CVResult:
    mode: str
    folds: list[FoldResult]
    aggregate: AggregateReport

    def to_dict(self) -> dict:
        return {"mode": self.mode, "aggregate": self.aggregate.to_dict(),
                "folds": [f.to_dict() for f in self.folds]}


def _canonical(samples: Sequence[GraphSample]) -> list[GraphSample]:
    return sorted(samples, key=lambda s: s.source)


def _fold_cfg(train_cfg: TrainConfig, fold: int) -> TrainConfig:
    return replace(train_cfg, seed=int(np.random.SeedSequence([train_cfg.seed, fold]).generate_state(1)[0]))


def run_kfold(samples: Sequence[GraphSample], model_cfg: nn.ModelConfig, train_cfg: TrainConfig,
              k: int = 10, train_frac: float = 0.6, split_seed: int = 0, n_folds: int | None = None,
              groups: Sequence[str] = GROUP_ORDER, keep_graph_features: bool = True) -> CVResult:
    samples = _canonical(samples)
    folds = kfold_split(samples, k=k, train_frac=train_frac, seed=split_seed)
    results = []
    for f, (tr, va, te) in enumerate(folds[:n_folds]):
        log.info("k-fold %d/%d: %d train, %d val, %d test windows", f + 1, k, len(tr), len(va), len(te))
        results.append(run_fold(
            f"fold{f}", [samples[i] for i in tr], [samples[i] for i in va], [samples[i] for i in te],
            model_cfg, _fold_cfg(train_cfg, f), groups, keep_graph_features,
        ))
    return CVResult("kfold", results, AggregateReport.from_reports([r.report for r in results]))


def run_loocv(samples: Sequence[GraphSample], model_cfg: nn.ModelConfig, train_cfg: TrainConfig,
              val_frac: float = 0.2, split_seed: int = 0) -> CVResult:
    """Leave one patient out; validation windows are a seeded slice of the training patients."""
    samples = _canonical(samples)
    patients = sorted({s.source[0] for s in samples})
    if len(patients) < 2:
        raise ValueError("leave-one-patient-out needs at least 2 patients")
    results = []
    for f, held in enumerate(patients):
        pool = [s for s in samples if s.source[0] != held]
        test = [s for s in samples if s.source[0] == held]
        rng = np.random.default_rng([split_seed, f])
        perm = rng.permutation(len(pool))
        n_val = int(round(val_frac * len(pool)))
        val_idx = set(perm[:n_val].tolist())
        train = [s for i, s in enumerate(pool) if i not in val_idx]
        val = [s for i, s in enumerate(pool) if i in val_idx]
        log.info("LOOCV %d/%d: holding out %s (%d windows)", f + 1, len(patients), held, len(test))
        results.append(run_fold(held, train, val, test, model_cfg, _fold_cfg(train_cfg, f)))
    return CVResult("loocv", results, AggregateReport.from_reports([r.report for r in results]))


# -- hyperparameter search ------------------------------------------------------

TRIAL_COLUMNS = ("trial", "learning_rate", "hidden_dim", "alpha", "dropout",
                 "best_val_loss", "best_epoch", "val_graph_acc", "val_node_acc")


@dataclass
class SearchResult:
    trials: list[dict]
    best: dict
    best_model_cfg: nn.ModelConfig
    best_train_cfg: TrainConfig


def sample_trial(rng: np.random.Generator, space: SearchSpace) -> dict:
    return {
        "learning_rate": float(np.exp(rng.uniform(np.log(space.lr_min), np.log(space.lr_max)))),
        "hidden_dim": int(space.hidden_dims[rng.integers(len(space.hidden_dims))]),
        "alpha": float(rng.uniform(space.alpha_min, space.alpha_max)),
        "dropout": float(rng.uniform(space.dropout_min, space.dropout_max)),
    }


def hyper_search(samples: Sequence[GraphSample], space: SearchSpace, model_cfg: nn.ModelConfig,
                 train_cfg: TrainConfig, k: int = 10, train_frac: float = 0.6, split_seed: int = 0) -> SearchResult:
    """Seeded random search; every trial trains on fold 0 and is ranked by best validation loss."""
    samples = _canonical(samples)
    tr, va, _ = kfold_split(samples, k=k, train_frac=train_frac, seed=split_seed)[0]
    train = [samples[i] for i in tr]
    val = [samples[i] for i in va]
    norm = fit_normalizer(train)
    train = [apply_normalizer(s, norm) for s in train]
    val = [apply_normalizer(s, norm) for s in val]
    wn, _ = class_weights(np.concatenate([s.node_labels for s in train]))
    wg, _ = class_weights([s.graph_label for s in train])

    rng = np.random.default_rng(space.seed)
    trials = []
    for t in range(space.n_trials):
        hp = sample_trial(rng, space)
        mcfg = replace(model_cfg, hidden_dim=hp["hidden_dim"], alpha=hp["alpha"], dropout=hp["dropout"],
                       class_weights_node=wn, class_weights_graph=wg)
        tcfg = replace(train_cfg, learning_rate=hp["learning_rate"], patience=train_cfg.epochs)
        try:
            res = train_model(train, val, mcfg, tcfg)
            best_row = res.history[res.best_epoch]
            row = dict(trial=t, **hp, best_val_loss=res.best_val_loss, best_epoch=res.best_epoch,
                       val_graph_acc=best_row.get("val_graph_acc", float("nan")),
                       val_node_acc=best_row.get("val_node_acc", float("nan")))
        except TrainingDiverged as exc:
            log.warning("trial %d diverged: %s", t, exc)
            row = dict(trial=t, **hp, best_val_loss=float("inf"), best_epoch=-1,
                       val_graph_acc=float("nan"), val_node_acc=float("nan"))
        trials.append(row)
    best = min(trials, key=lambda r: (r["best_val_loss"], r["trial"]))
    best_model = replace(model_cfg, hidden_dim=best["hidden_dim"], alpha=best["alpha"], dropout=best["dropout"])
    best_train = replace(train_cfg, learning_rate=best["learning_rate"])
    return SearchResult(trials, best, best_model, best_train)


# -- ablations ------------------------------------------------------------------

@dataclass
class ArmResult:
    name: str
    groups: tuple[str, ...]
    graph_features: bool
    cv: CVResult

    def row(self) -> dict:
        m = self.cv.aggregate.mean
        s = self.cv.aggregate.std
        return {
            "arm": self.name,
            "groups": "+".join(self.groups),
            "graph_features": int(self.graph_features),
            "graph_accuracy": m["graph"]["accuracy"],
            "graph_accuracy_std": s["graph"]["accuracy"],
            "node_accuracy": m["node"]["accuracy"],
            "node_accuracy_std": s["node"]["accuracy"],
        }


ARM_COLUMNS = ("arm", "groups", "graph_features", "graph_accuracy", "graph_accuracy_std",
               "node_accuracy", "node_accuracy_std")

_LABELS = {"psd": "PSD", "moments": "Moments", "hjorth": "Hjorth", "wavelet": "Wavelet", "local_graph": "LocalGraph"}


def additive_arms() -> list[tuple[str, tuple[str, ...], bool]]:
    arms = []
    for i in range(1, len(GROUP_ORDER) + 1):
        groups = GROUP_ORDER[:i]
        name = _LABELS[groups[0]] if i == 1 else "+" + _LABELS[groups[-1]]
        arms.append((name, groups, True))
    return arms


def leave_one_out_arms() -> list[tuple[str, tuple[str, ...], bool]]:
    arms = [(f"-{_LABELS[g]}", tuple(x for x in GROUP_ORDER if x != g), True) for g in GROUP_ORDER]
    arms.append(("-G", GROUP_ORDER, False))
    return arms


def _run_arms(arms, samples, model_cfg, train_cfg, **cv_kwargs) -> list[ArmResult]:
    out = []
    for name, groups, keep_g in arms:
        log.info("ablation arm %s", name)
        cv = run_kfold(samples, model_cfg, train_cfg, groups=groups, keep_graph_features=keep_g, **cv_kwargs)
        out.append(ArmResult(name, tuple(groups), keep_g, cv))
    return out


def ablation_additive(samples, model_cfg, train_cfg, **cv_kwargs) -> list[ArmResult]:
    """PSD alone, then Moments, Hjorth, Wavelet and LocalGraph added in that order."""
    return _run_arms(additive_arms(), samples, model_cfg, train_cfg, **cv_kwargs)


def ablation_leave_one_out(samples, model_cfg, train_cfg, **cv_kwargs) -> list[ArmResult]:
    """Each node-feature group removed in turn, plus one arm with the graph vector zeroed."""
    return _run_arms(leave_one_out_arms(), samples, model_cfg, train_cfg, **cv_kwargs)
