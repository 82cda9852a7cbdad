"""Command-line pipeline: simulate, build-dataset, train, evaluate, ablate, identify.

Every subcommand is deterministic given its config and seed. Manifests
embed the sha256 of the resolved config so artifacts can be traced back
to the exact settings that produced them. Exit codes: 0 success, 1
invalid input or config, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as config_mod
from .ccsim import (
    ALL_ALGORITHMS,
    FlowTrace,
    LinkConfig,
    SimulationStall,
    WirelessConfig,
    file_sha256,
    simulate_flow,
)
from .config import ConfigError
from .evaluation import evaluate_model, majority_vote, run_ablation
from .features import extract_features
from .models import (
    DenseClassifier,
    LstmClassifier,
    TrainConfig,
    load_checkpoint,
    reinit_output,
    save_checkpoint,
)
from .models.losses import softmax
from .preprocess import (
    build_dataset,
    fold_time_steps,
    load_dataset_splits,
    preprocess_series,
    save_dataset_splits,
)
from .report import (
    plot_history,
    write_ablation_report,
    write_evaluation_report,
    write_history_csv,
    write_json,
)

FORMAT_VERSION = 1


def _load_cfg(args, scenario=None):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return config_mod.load_config(getattr(args, "config", None),
                                  scenario=scenario, overrides=overrides)


def _sample_flow_jobs(cfg):
    """Draw per-flow link parameters and seeds, in a fixed order."""
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg["seed"], spawn_key=(5,)))
    wireless = cfg["scenario"] == "wireless"
    jobs = []
    for algo in ALL_ALGORITHMS:
        for k in range(cfg["flows_per_algorithm"]):
            rate = rng.uniform(*cfg["rate_mbps"]) * 1e6
            rtt = rng.uniform(*cfg["rtt_ms"]) / 1e3
            buffer = int(rng.integers(cfg["buffer_pkts"][0], cfg["buffer_pkts"][1] + 1))
            loss = rng.uniform(*cfg["random_loss"])
            link = LinkConfig(rate=rate, prop_rtt=rtt, buffer=buffer, random_loss=loss)
            radio = None
            if wireless:
                cap = int(rng.integers(cfg["rlc_cap_pkts"][0], cfg["rlc_cap_pkts"][1] + 1))
                err = rng.uniform(*cfg["rlc_err_prob"])
                radio = WirelessConfig(err_prob=err, rlc_cap=cap)
            flow_seed = int(rng.integers(0, 2**62))
            jobs.append({
                "stem": f"{algo.label.lower()}_{k:03d}",
                "algo": algo,
                "link": link,
                "radio": radio,
                "seed": flow_seed,
            })
    return jobs


def _run_flow_job(payload):
    algo, link, radio, duration, seed = payload
    return simulate_flow(algo, link, duration, seed, wireless=radio)


def cmd_simulate(args) -> int:
    cfg = _load_cfg(args, scenario=args.scenario)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = _sample_flow_jobs(cfg)
    payloads = [(j["algo"], j["link"], j["radio"], cfg["duration"], j["seed"])
                for j in jobs]
    if cfg["workers"] > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=cfg["workers"]) as pool:
            traces = list(pool.map(_run_flow_job, payloads))
    else:
        traces = [_run_flow_job(p) for p in payloads]

    entries = []
    for job, trace in zip(jobs, traces):
        csv_path, json_path = trace.save(outdir, job["stem"])
        link = job["link"]
        entry = {
            "file": csv_path.name,
            "sidecar": json_path.name,
            "label": int(job["algo"]),
            "algorithm": job["algo"].label,
            "seed": job["seed"],
            "rate_bps": link.rate,
            "prop_rtt": link.prop_rtt,
            "buffer_pkts": link.buffer,
            "random_loss": link.random_loss,
            "records": int(trace.rx_time.shape[0]),
            "sha256": file_sha256(csv_path),
        }
        if job["radio"] is not None:
            entry["rlc_cap_pkts"] = job["radio"].rlc_cap
            entry["rlc_err_prob"] = job["radio"].err_prob
        entries.append(entry)
        if args.verbose:
            print(f"wrote {csv_path.name}: {entry['records']} records", flush=True)

    manifest = {
        "kind": "trace_manifest",
        "version": FORMAT_VERSION,
        "config": cfg,
        "config_sha256": config_mod.config_hash(cfg),
        "traces": entries,
    }
    write_json(outdir / "manifest.json", manifest)
    per_algo = cfg["flows_per_algorithm"]
    print(f"simulated {len(entries)} flows ({per_algo} per algorithm, "
          f"{cfg['scenario']}, {cfg['duration']:g} s) -> {outdir}", flush=True)
    return 0


def _read_manifest(traces_dir: Path) -> dict:
    manifest_path = traces_dir / "manifest.json"
    if not manifest_path.exists():
        raise ValueError(f"{traces_dir}: no manifest.json (run simulate first)")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    if manifest.get("kind") != "trace_manifest":
        raise ValueError(f"{manifest_path}: not a trace manifest")
    if manifest.get("version") != FORMAT_VERSION:
        raise ValueError(f"{manifest_path}: unsupported manifest version "
                         f"{manifest.get('version')!r}")
    if not manifest.get("traces"):
        raise ValueError(f"{manifest_path}: manifest lists no traces")
    return manifest


def cmd_build_dataset(args) -> int:
    traces_dir = Path(args.traces)
    manifest = _read_manifest(traces_dir)
    # preprocessing knobs default to the ones recorded at simulate time
    cfg = dict(manifest["config"])
    if args.config is not None:
        with open(args.config) as fh:
            cfg.update(json.load(fh))
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg = config_mod.validate_config(config_mod.apply_env_overrides(cfg))

    series_list = []
    skipped = 0
    for entry in manifest["traces"]:
        csv_path = traces_dir / entry["file"]
        digest = file_sha256(csv_path)
        if digest != entry["sha256"]:
            raise ValueError(f"{csv_path}: sha256 mismatch against manifest")
        trace = FlowTrace.from_csv(csv_path)
        series = extract_features(trace)
        if series.n_samples < 2:
            skipped += 1
            print(f"skipping {entry['file']}: fewer than two feature samples",
                  file=sys.stderr, flush=True)
            continue
        n_grid = int(np.floor((series.t[-1] - series.t[0]) / cfg["interval"])) + 1
        if n_grid < cfg["window"]:
            skipped += 1
            print(f"skipping {entry['file']}: {n_grid} resampled points "
                  f"< window {cfg['window']}", file=sys.stderr, flush=True)
            continue
        series_list.append(series)
    if not series_list:
        raise ValueError("no trace is long enough for a single window")

    dataset = build_dataset(
        series_list,
        test_frac=cfg["split"][1],
        seed=cfg["seed"],
        interval=cfg["interval"],
        alpha=cfg["alpha"],
        window=cfg["window"],
        train_stride=cfg["train_stride"],
        test_stride=cfg["test_stride"],
        steps=cfg["time_steps"],
        meta={"scenario": cfg["scenario"],
              "config_sha256": config_mod.config_hash(cfg)},
    )
    outdir = Path(args.out)
    paths = save_dataset_splits(dataset, outdir)
    summary = dataset.summary()
    manifest_out = {
        "kind": "dataset_manifest",
        "version": FORMAT_VERSION,
        "config": cfg,
        "config_sha256": config_mod.config_hash(cfg),
        "skipped_traces": skipped,
        "files": {p.name: file_sha256(p) for p in
                  (paths["train"], paths["test"])},
        "summary": summary,
    }
    write_json(outdir / "manifest.json", manifest_out)
    print(f"dataset: {summary['train_windows']} train / {summary['test_windows']} test "
          f"windows from {summary['train_traces']}/{summary['test_traces']} traces "
          f"-> {outdir}", flush=True)
    return 0


def _build_model_from_cfg(cfg, dataset):
    model_cfg = cfg["model"]
    if model_cfg["kind"] == "lstm":
        return LstmClassifier(
            dataset.step_dim, dataset.n_classes,
            lstm_units=tuple(model_cfg["lstm_units"]),
            dense_units=tuple(model_cfg["dense_units"]),
            seed=cfg["seed"],
        )
    return DenseClassifier(
        dataset.steps * dataset.step_dim, dataset.n_classes,
        hidden=tuple(model_cfg["hidden"]),
        seed=cfg["seed"],
    )


def _check_checkpoint_meta(meta, path):
    if meta.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version "
                         f"{meta.get('version')!r}")


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    dataset = load_dataset_splits(Path(args.dataset))
    if args.init_from is not None:
        model, meta, _ = load_checkpoint(args.init_from)
        _check_checkpoint_meta(meta, args.init_from)
        expect = dataset.step_dim if model.kind == "lstm" else (
            dataset.steps * dataset.step_dim)
        if model.input_dim != expect:
            raise ValueError(
                f"{args.init_from}: model input dim {model.input_dim} does not "
                f"match dataset ({expect})")
        if args.reinit_output:
            reinit_output(model, seed=cfg["seed"])
    else:
        model = _build_model_from_cfg(cfg, dataset)

    epochs = cfg["epochs"] if args.epochs is None else args.epochs
    train_cfg = TrainConfig(
        epochs=epochs,
        batch_size=cfg["batch_size"],
        lr=cfg["lr"],
        val_fraction=cfg["val_fraction"],
        seed=cfg["seed"],
        verbose=True,
        log_every=max(1, epochs // 12),
    )
    from .models import train_model

    result = train_model(model, dataset.x_train, dataset.y_train,
                         dataset.trace_train, train_cfg)

    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    preprocess_meta = {k: dataset.meta[k] for k in
                       ("interval", "alpha", "window", "test_stride", "steps")
                       if k in dataset.meta}
    save_checkpoint(
        outdir / "checkpoint.bin", model,
        norm_mean=dataset.norm_mean, norm_std=dataset.norm_std,
        channels=dataset.channels, label_names=dataset.label_names,
        extra_meta={
            "version": FORMAT_VERSION,
            "preprocess": preprocess_meta,
            "config_sha256": config_mod.config_hash(cfg),
            "best_epoch": result.best_epoch,
            "best_val_accuracy": result.best_val_accuracy,
            "epochs": epochs,
        },
    )
    write_history_csv(outdir / "history.csv", result.history)
    plot_history(outdir / "history.png", result.history)
    write_json(outdir / "manifest.json", {
        "kind": "train_manifest",
        "version": FORMAT_VERSION,
        "config": cfg,
        "config_sha256": config_mod.config_hash(cfg),
        "model": model.config(),
        "best_epoch": result.best_epoch,
        "best_val_accuracy": result.best_val_accuracy,
    })
    print(f"trained {model.kind} model: best epoch {result.best_epoch} "
          f"val accuracy {result.best_val_accuracy:.4f} "
          f"({result.wall_seconds:.1f} s) -> {outdir}", flush=True)
    return 0


def _check_compat(model, meta, dataset, source):
    if meta.get("channels") is not None and list(dataset.channels) != meta["channels"]:
        raise ValueError(
            f"{source}: checkpoint channels {meta['channels']} do not match "
            f"dataset channels {list(dataset.channels)}")
    if meta.get("label_names") is not None and (
            list(dataset.label_names) != meta["label_names"]):
        raise ValueError(f"{source}: checkpoint and dataset class labels differ")
    expect = dataset.step_dim if model.kind == "lstm" else (
        dataset.steps * dataset.step_dim)
    if model.input_dim != expect:
        raise ValueError(f"{source}: model input dim {model.input_dim} does not "
                         f"match dataset ({expect})")


def cmd_evaluate(args) -> int:
    model, meta, _ = load_checkpoint(args.checkpoint)
    _check_checkpoint_meta(meta, args.checkpoint)
    dataset = load_dataset_splits(Path(args.dataset))
    _check_compat(model, meta, dataset, args.checkpoint)
    if args.split == "train":
        x, y, tid = dataset.x_train, dataset.y_train, dataset.trace_train
    else:
        x, y, tid = dataset.x_test, dataset.y_test, dataset.trace_test
    metrics = evaluate_model(model, x, y, dataset.n_classes)

    groups, voted = majority_vote(metrics["predictions"], tid, dataset.n_classes)
    true_by_trace = np.array([y[tid == g][0] for g in groups])
    trace_acc = float((voted == true_by_trace).mean()) if groups.size else 0.0

    outdir = Path(args.out)
    extra = {
        "split": args.split,
        "trace_accuracy": trace_acc,
        "n_traces": int(groups.size),
        "checkpoint_meta": {k: meta[k] for k in
                            ("best_epoch", "best_val_accuracy", "config_sha256")
                            if k in meta},
    }
    write_evaluation_report(outdir, metrics, dataset.label_names, extra=extra)
    print(f"{args.split} windows: accuracy {metrics['accuracy']:.4f}  "
          f"macro F1 {metrics['macro_f1']:.4f}  "
          f"trace majority-vote accuracy {trace_acc:.4f} -> {outdir}", flush=True)
    return 0


def _parse_subsets(raw: str, channels):
    subsets = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if part == "all":
            subsets.append(tuple(channels))
            continue
        names = tuple(p.strip() for p in part.split("+"))
        unknown = [n for n in names if n not in channels]
        if unknown:
            raise ValueError(f"unknown channel(s) {unknown}; have {list(channels)}")
        subsets.append(names)
    if not subsets:
        raise ValueError("no channel subsets given")
    return subsets


def cmd_ablate(args) -> int:
    cfg = _load_cfg(args)
    if cfg["model"]["kind"] != "lstm":
        raise ValueError("ablation sweeps use the recurrent model; "
                         "set model.kind to 'lstm'")
    dataset = load_dataset_splits(Path(args.dataset))
    if args.subsets:
        subsets = _parse_subsets(args.subsets, dataset.channels)
    else:
        subsets = [tuple(dataset.channels)]
        subsets += [(c,) for c in dataset.channels]
    epochs = cfg["epochs"] if args.epochs is None else args.epochs
    train_cfg = TrainConfig(
        epochs=epochs,
        batch_size=cfg["batch_size"],
        lr=cfg["lr"],
        val_fraction=cfg["val_fraction"],
        seed=cfg["seed"],
    )
    results = run_ablation(
        dataset, subsets, train_cfg,
        lstm_units=tuple(cfg["model"]["lstm_units"]),
        dense_units=tuple(cfg["model"]["dense_units"]),
        model_seed=cfg["seed"],
        verbose=True,
    )
    outdir = Path(args.out)
    write_ablation_report(outdir, results, dataset.label_names)
    write_json(outdir / "manifest.json", {
        "kind": "ablation_manifest",
        "version": FORMAT_VERSION,
        "config": cfg,
        "config_sha256": config_mod.config_hash(cfg),
        "subsets": [list(s) for s in subsets],
    })
    for res in results:
        print(f"channels {'+'.join(res.channels)}: "
              f"accuracy {res.accuracy:.4f}", flush=True)
    print(f"ablation report -> {outdir}", flush=True)
    return 0


def cmd_identify(args) -> int:
    model, meta, extras = load_checkpoint(args.checkpoint)
    _check_checkpoint_meta(meta, args.checkpoint)
    if "norm_mean" not in extras or "channels" not in meta:
        raise ValueError(f"{args.checkpoint}: checkpoint lacks preprocessing "
                         "context; retrain with the current pipeline")
    pp = meta.get("preprocess", {})
    interval = pp.get("interval", 0.005)
    alpha = pp.get("alpha", 0.3)
    window = pp.get("window", 3000)
    steps = pp.get("steps", 20)
    stride = pp.get("test_stride", window)
    labels = meta["label_names"]

    trace = FlowTrace.from_csv(args.trace)
    series = extract_features(trace)
    missing = [c for c in meta["channels"] if c not in series.channels]
    if missing:
        raise ValueError(f"{args.trace}: trace lacks channel(s) {missing} "
                         f"needed by the checkpoint")
    from .features import FeatureSeries

    values = np.stack([series.channel(c) for c in meta["channels"]])
    reduced = FeatureSeries(t=series.t, channels=tuple(meta["channels"]),
                            values=values, label=series.label,
                            source=series.source)
    windows = preprocess_series(reduced, stride, interval, alpha, window)
    if windows.shape[0] == 0:
        raise ValueError(f"{args.trace}: too short for one {window}-point window")
    windows = (windows - extras["norm_mean"]) / extras["norm_std"]
    x = fold_time_steps(windows, steps).astype(np.float32)

    posteriors = np.empty((x.shape[0], len(labels)), dtype=np.float64)
    for start in range(0, x.shape[0], 256):
        logits = model.forward(x[start:start + 256], train=False)
        posteriors[start:start + 256] = softmax(logits.astype(np.float64))
    window_preds = posteriors.argmax(axis=1)

    counts = np.bincount(window_preds, minlength=len(labels))
    top = counts.max()
    candidates = np.flatnonzero(counts == top)
    if candidates.size > 1:
        sums = posteriors.sum(axis=0)[candidates]
        flow_label = int(candidates[int(sums.argmax())])
    else:
        flow_label = int(candidates[0])
    mean_posterior = posteriors.mean(axis=0)

    for k in range(posteriors.shape[0]):
        probs = " ".join(f"{labels[j]}={posteriors[k, j]:.3f}"
                         for j in range(len(labels)))
        print(f"window {k}: {labels[window_preds[k]]}  [{probs}]", flush=True)
    print(f"flow label: {labels[flow_label]}  "
          f"(mean posterior {mean_posterior[flow_label]:.3f}, "
          f"{posteriors.shape[0]} windows, "
          f"{int(counts[flow_label])} votes)", flush=True)

    if args.out:
        write_json(args.out, {
            "flow_label": labels[flow_label],
            "flow_label_id": flow_label,
            "mean_posterior": mean_posterior.tolist(),
            "window_labels": [labels[int(p)] for p in window_preds],
            "window_posteriors": posteriors.tolist(),
            "labels": list(labels),
        })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcpid",
        description="Identify TCP congestion-control algorithms from "
                    "receiver-side traffic features.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate flow traces over a parameter sweep")
    sim.add_argument("--config", help="JSON config file")
    sim.add_argument("--scenario", choices=("wired", "wireless"), default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--out", required=True, help="output trace directory")
    sim.add_argument("--verbose", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    bd = sub.add_parser("build-dataset", help="turn traces into windowed tensors")
    bd.add_argument("--traces", required=True, help="trace directory with manifest")
    bd.add_argument("--config", help="JSON config overriding the manifest's")
    bd.add_argument("--seed", type=int, default=None)
    bd.add_argument("--out", required=True, help="dataset output directory")
    bd.set_defaults(func=cmd_build_dataset)

    tr = sub.add_parser("train", help="fit a classifier on a dataset")
    tr.add_argument("--dataset", required=True, help="dataset directory")
    tr.add_argument("--config", help="JSON config file")
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--epochs", type=int, default=None, help="override epoch count")
    tr.add_argument("--init-from", default=None, help="warm-start checkpoint")
    tr.add_argument("--reinit-output", action="store_true",
                    help="reset the final layer of the warm-start checkpoint")
    tr.add_argument("--out", required=True, help="checkpoint output directory")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--dataset", required=True)
    ev.add_argument("--split", choices=("test", "train"), default="test")
    ev.add_argument("--out", required=True, help="report output directory")
    ev.set_defaults(func=cmd_evaluate)

    ab = sub.add_parser("ablate", help="retrain across channel subsets")
    ab.add_argument("--dataset", required=True)
    ab.add_argument("--config", help="JSON config file")
    ab.add_argument("--seed", type=int, default=None)
    ab.add_argument("--epochs", type=int, default=None)
    ab.add_argument("--subsets", default=None,
                    help="comma-separated subsets, channels joined by '+', "
                         "'all' for every channel (default: all plus singles)")
    ab.add_argument("--out", required=True)
    ab.set_defaults(func=cmd_ablate)

    ident = sub.add_parser("identify", help="classify one trace CSV")
    ident.add_argument("--checkpoint", required=True)
    ident.add_argument("--trace", required=True, help="trace CSV file")
    ident.add_argument("--out", default=None, help="optional JSON result path")
    ident.set_defaults(func=cmd_identify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError, NotADirectoryError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr, flush=True)
        return 1
    except SimulationStall as exc:
        print(f"simulation failure: {exc}", file=sys.stderr, flush=True)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}",
              file=sys.stderr, flush=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
