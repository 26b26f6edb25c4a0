"""Command-line entry point: ``sozgnn <command> [options]``."""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import shutil
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import data, features, model, netdyn, reports, synth, train
from .config import CONFIG_ENV, ConfigError, RunConfig, dump_toml, load_config

log = logging.getLogger("sozgnn")

EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_INPUT = 3

TABLE1_COLUMNS = ("metric", "graph_mean", "graph_std", "node_mean", "node_std")
PLV_ROW_LABELS = {
    "density": "Density",
    "avg_clustering": "Average Clustering",
    "avg_soz_degree": "Average SOZ degree",
    "avg_soz_plv": "Average SOZ PLV",
}


class InputError(RuntimeError):
    pass


def _require(path: Path, what: str, *members: str) -> Path:
    if not path.exists():
        raise InputError(f"{what} not found: {path}")
    for m in members:
        if not (path / m).exists():
            raise InputError(f"{what} at {path} is missing {m}")
    return path


def cohort_digest(directory: Path) -> str:
    """Digest of cohort.json plus every manifest and payload it lists."""
    h = hashlib.sha256(reports.sha256_file(directory / "cohort.json").encode())
    for m in data.cohort_manifests(directory):
        payload = json.loads(m.read_text())["payload_file"]
        h.update(reports.sha256_file(m).encode())
        h.update(reports.sha256_file(m.parent / payload).encode())
    return h.hexdigest()


def cache_digest(directory: Path) -> str:
    h = hashlib.sha256()
    for name in ("index.json", "windows.bin"):
        h.update(reports.sha256_file(directory / name).encode())
    return h.hexdigest()


def _load_cache(path: Path) -> list[features.GraphSample]:
    _require(path, "feature cache", "index.json", "windows.bin")
    samples, _ = features.load_cache(path)
    if not samples:
        raise InputError(f"feature cache {path} is empty")
    return samples


# -- commands -------------------------------------------------------------------

def cmd_synth(args, cfg: RunConfig) -> tuple[dict, dict]:
    out = Path(args.out)
    stage = reports.staging_dir(out)
    try:
        data.save_cohort(synth.iter_recordings(cfg.synth), stage)
        (stage / "synth_config.json").write_bytes(reports.json_bytes(cfg.synth.to_dict()))
        outputs = {"cohort_sha256": cohort_digest(stage)}
        reports.replace_dir(stage, out)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    n = len(data.cohort_manifests(out))
    print(f"wrote {n} recordings to {out}")
    return {}, outputs


def _featurize_one(job):
    path, spec, tau, seed, n_rand = job
    return features.featurize_recording(data.load_recording(path), spec, tau, seed, n_rand)


def cmd_featurize(args, cfg: RunConfig) -> tuple[dict, dict]:
    cohort = _require(Path(args.cohort), "cohort directory", "cohort.json")
    manifests = data.cohort_manifests(cohort)
    for m in manifests:
        _require(m, "recording manifest")
    f = cfg.features
    jobs = [(m, cfg.window, f.tau, f.seed, f.n_rand) for m in manifests]
    samples: list[features.GraphSample] = []
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            for chunk in pool.map(_featurize_one, jobs):
                samples.extend(chunk)
    else:
        for i, job in enumerate(jobs):
            log.info("featurizing %s (%d/%d)", job[0].name, i + 1, len(jobs))
            samples.extend(_featurize_one(job))
    samples.sort(key=lambda s: s.source)
    meta = {"window": {"length_s": cfg.window.length_s, "overlap_s": cfg.window.overlap_s},
            "features": {"tau": f.tau, "n_rand": f.n_rand, "seed": f.seed}}
    out = Path(args.out)
    stage = reports.staging_dir(out)
    try:
        features.save_cache(samples, stage, meta)
        outputs = {"cache_sha256": cache_digest(stage)}
        reports.replace_dir(stage, out)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    print(f"wrote {len(samples)} graph samples to {out}")
    return {"cohort": cohort_digest(cohort)}, outputs


def cmd_train(args, cfg: RunConfig) -> tuple[dict, dict]:
    cache = Path(args.cache)
    samples = sorted(_load_cache(cache), key=lambda s: s.source)
    tr, va, te = data.kfold_split(samples, k=cfg.cv.k, train_frac=cfg.cv.train_frac, seed=cfg.cv.split_seed)[0]
    trn, val, tst = ([samples[i] for i in idx] for idx in (tr, va, te))
    norm = features.fit_normalizer(trn)
    trn, val, tst = ([features.apply_normalizer(s, norm) for s in part] for part in (trn, val, tst))
    wn, warn_n = train.class_weights(np.concatenate([s.node_labels for s in trn]))
    wg, warn_g = train.class_weights([s.graph_label for s in trn])
    mcfg = replace(cfg.model_config(), class_weights_node=wn, class_weights_graph=wg)
    result = train.train_model(trn, val, mcfg, cfg.train)
    report = train.evaluate(result.params, tst, mcfg)
    extra = {"normalizer": {k: getattr(norm, k).tolist() for k in ("x_mean", "x_std", "g_mean", "g_std")}}
    metrics = {"metrics": report.to_dict(), "best_epoch": result.best_epoch,
               "best_val_loss": result.best_val_loss, "n_train": len(trn), "n_val": len(val),
               "n_test": len(tst), "warnings": warn_n + warn_g}
    history_cols = tuple(result.history[0]) if result.history else ("epoch",)
    outs = reports.OutputSet(args.out)
    outs.add("model.ckpt", model.checkpoint_bytes(result.params, mcfg, extra))
    outs.add("train_metrics.json", reports.json_bytes(metrics))
    outs.add("history.csv", reports.csv_bytes(history_cols, result.history))
    print(f"graph accuracy {report.graph.accuracy:.4f}  node accuracy {report.node.accuracy:.4f}")
    return {"cache": cache_digest(cache)}, outs


def table1_rows(agg: train.AggregateReport) -> list[dict]:
    return [{"metric": m.capitalize() if m != "f1" else "F1",
             "graph_mean": agg.mean["graph"][m], "graph_std": agg.std["graph"][m],
             "node_mean": agg.mean["node"][m], "node_std": agg.std["node"][m]} for m in train.METRIC_NAMES]


def cmd_cv(args, cfg: RunConfig) -> tuple[dict, dict]:
    cache = Path(args.cache)
    samples = _load_cache(cache)
    mcfg = cfg.model_config()
    if args.mode == "kfold":
        res = train.run_kfold(samples, mcfg, cfg.train, k=cfg.cv.k, train_frac=cfg.cv.train_frac,
                              split_seed=cfg.cv.split_seed)
    else:
        res = train.run_loocv(samples, mcfg, cfg.train, val_frac=cfg.cv.val_frac, split_seed=cfg.cv.split_seed)
    outs = reports.OutputSet(args.out)
    outs.add(f"cv_{args.mode}.json", reports.json_bytes(res.to_dict()))
    outs.add(f"table1_{args.mode}.csv", reports.csv_bytes(TABLE1_COLUMNS, table1_rows(res.aggregate)))
    print(res.aggregate.table())
    return {"cache": cache_digest(cache)}, outs


def cmd_search(args, cfg: RunConfig) -> tuple[dict, dict]:
    cache = Path(args.cache)
    samples = _load_cache(cache)
    res = train.hyper_search(samples, cfg.search, cfg.model_config(), cfg.train,
                             k=cfg.cv.k, train_frac=cfg.cv.train_frac, split_seed=cfg.cv.split_seed)
    best_cfg = replace(
        cfg,
        model=replace(cfg.model, hidden_dim=res.best_model_cfg.hidden_dim, alpha=res.best_model_cfg.alpha,
                      dropout=res.best_model_cfg.dropout),
        train=replace(cfg.train, learning_rate=res.best_train_cfg.learning_rate),
    )
    outs = reports.OutputSet(args.out)
    outs.add("trials.csv", reports.csv_bytes(train.TRIAL_COLUMNS, res.trials))
    outs.add("best_config.toml", dump_toml(best_cfg))
    print(f"best trial {res.best['trial']}: val loss {res.best['best_val_loss']:.4f}")
    return {"cache": cache_digest(cache)}, outs


def cmd_ablate(args, cfg: RunConfig) -> tuple[dict, dict]:
    cache = Path(args.cache)
    samples = _load_cache(cache)
    kw = dict(k=cfg.cv.k, train_frac=cfg.cv.train_frac, split_seed=cfg.cv.split_seed,
              n_folds=cfg.ablation.n_folds or None)
    run = train.ablation_additive if args.mode == "additive" else train.ablation_leave_one_out
    arms = run(samples, cfg.model_config(), cfg.train, **kw)
    rows = [a.row() for a in arms]
    chart = reports.svg_bar_chart(
        [r["arm"] for r in rows],
        {"graph": ([r["graph_accuracy"] for r in rows], [r["graph_accuracy_std"] for r in rows]),
         "node": ([r["node_accuracy"] for r in rows], [r["node_accuracy_std"] for r in rows])},
        title=f"Feature ablation ({args.mode})",
    )
    outs = reports.OutputSet(args.out)
    outs.add(f"ablation_{args.mode}.csv", reports.csv_bytes(train.ARM_COLUMNS, rows))
    outs.add(f"ablation_{args.mode}.json",
             reports.json_bytes([{**r, "cv": a.cv.to_dict()} for r, a in zip(rows, arms)]))
    outs.add(f"ablation_{args.mode}.svg", chart)
    for r in rows:
        print(f"{r['arm']:<12} graph {r['graph_accuracy']:.4f}  node {r['node_accuracy']:.4f}")
    return {"cache": cache_digest(cache)}, outs


def plv_table(rows: list[netdyn.DynamicsRow]) -> bytes:
    cols = ["Metric"] + [f"W{r.window_index + 1}" for r in rows]
    table = []
    for key, label in PLV_ROW_LABELS.items():
        line = {"Metric": label}
        line.update({f"W{r.window_index + 1}": getattr(r.metrics, key) for r in rows})
        table.append(line)
    return reports.csv_bytes(cols, table)


def cmd_plv(args, cfg: RunConfig) -> tuple[dict, dict]:
    path = _require(Path(args.recording), "recording manifest")
    rec = data.load_recording(path)
    rows = netdyn.dynamics_report(rec, window_s=cfg.plv.window_s, theta=cfg.plv.theta)
    if not rows:
        raise InputError(f"{path}: recording shorter than one {cfg.plv.window_s} s window")
    outs = reports.OutputSet(args.out)
    outs.add("plv_table.csv", plv_table(rows))
    outs.add("plv_windows.csv", reports.csv_bytes(("window", "start_s") + netdyn.METRIC_COLUMNS,
                                                  [r.as_dict() for r in rows]))
    if args.svg:
        nodes = netdyn.top_degree_subset(rows, rec.soz_mask, cfg.plv.svg_nodes)
        peak = max(range(len(rows)), key=lambda i: (rows[i].metrics.density, -i))
        for i in range(max(0, peak - 1), min(len(rows), peak + 2)):
            net = rows[i].network
            outs.add(f"plv_network_W{i + 1}.svg", reports.svg_network(
                net.plv, net.edges, rec.soz_mask, nodes.tolist(), rec.channels,
                title=f"{rec.patient_id} {rec.seizure_id} W{i + 1} (theta={cfg.plv.theta})"))
    print(f"{len(rows)} windows of {cfg.plv.window_s} s")
    return {"recording": reports.sha256_file(path),
            "payload": reports.sha256_file(path.parent / json.loads(path.read_text())["payload_file"])}, outs


COMMANDS = {
    "synth": cmd_synth,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "cv": cmd_cv,
    "search": cmd_search,
    "ablate": cmd_ablate,
    "plv": cmd_plv,
}


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help=f"TOML run config (falls back to ${CONFIG_ENV}, then built-in defaults)")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config field; value is a TOML literal; repeatable")
    common.add_argument("--threads", type=int, default=1, help="maximum worker processes")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="logging verbosity on stderr")

    p = argparse.ArgumentParser(prog="sozgnn", description="Dual-task GNN pipeline for SOZ and outcome prediction.",
                                formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], formatter_class=fmt, help="generate a synthetic cohort")
    s.add_argument("--out", required=True, help="cohort directory to write")

    s = sub.add_parser("featurize", parents=[common], formatter_class=fmt, help="build the feature cache")
    s.add_argument("--cohort", required=True, help="cohort directory containing cohort.json")
    s.add_argument("--out", required=True, help="feature cache directory to write")

    s = sub.add_parser("train", parents=[common], formatter_class=fmt, help="train one model on fold 0")
    s.add_argument("--cache", required=True, help="feature cache directory")
    s.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("cv", parents=[common], formatter_class=fmt, help="cross-validate")
    s.add_argument("--cache", required=True, help="feature cache directory")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--mode", choices=["kfold", "loocv"], default="kfold", help="split protocol")

    s = sub.add_parser("search", parents=[common], formatter_class=fmt, help="random hyperparameter search")
    s.add_argument("--cache", required=True, help="feature cache directory")
    s.add_argument("--out", required=True, help="output directory")

    s = sub.add_parser("ablate", parents=[common], formatter_class=fmt, help="feature-group ablation")
    s.add_argument("--cache", required=True, help="feature cache directory")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--mode", choices=["additive", "loo"], default="additive", help="ablation scheme")

    s = sub.add_parser("plv", parents=[common], formatter_class=fmt, help="PLV network dynamics of one recording")
    s.add_argument("--recording", required=True, help="recording manifest (JSON)")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--svg", action="store_true", help="also draw networks around the peak-density window")
    return p


def _fail(code: int, payload: dict) -> int:
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        return _fail(EXIT_CONFIG, ConfigError("threads", "must be >= 1").to_dict())
    try:
        cfg = load_config(args.config, args.overrides)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc.to_dict())
    except FileNotFoundError as exc:
        return _fail(EXIT_INPUT, {"error": "missing_input", "message": str(exc)})

    start = time.perf_counter()
    try:
        inputs, outs = COMMANDS[args.command](args, cfg)
    except (InputError, FileNotFoundError, data.DataError) as exc:
        return _fail(EXIT_INPUT, {"error": "missing_input", "message": str(exc)})
    except (ValueError, train.TrainingDiverged, FloatingPointError) as exc:
        return _fail(EXIT_FAILURE, {"error": type(exc).__name__, "message": str(exc)})

    if isinstance(outs, reports.OutputSet):
        outputs = outs.commit()
        out_dir = outs.directory
    else:
        outputs = outs
        out_dir = Path(args.out)
    manifest = reports.run_manifest(args.command, cfg.digest(), cfg.to_dict(), inputs, outputs,
                                    time.perf_counter() - start)
    final = reports.OutputSet(out_dir)
    mode = getattr(args, "mode", None)
    final.add(reports.manifest_name(args.command, mode), manifest)
    final.commit()
    return 0


if __name__ == "__main__":
    sys.exit(main())
