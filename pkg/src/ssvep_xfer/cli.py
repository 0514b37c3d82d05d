"""Command-line front end: ``ssvep-xfer {synth,eval,sweep,select-report,bench}``."""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
from pathlib import Path
import statistics
import sys
import time

import numpy as np

from .dataio import DEFAULT_CHANNELS, RunConfig, atomic_write, read_tensor, tensor_bytes
from .evaluation import build_cv_plan, itr, run_eval
from .signal import (GAZE_SHIFT_S, LATENCY_S, BandpassSpec, EpochWindow, FilterBank,
                     FilterBankSpec, default_filterbank, extract_epoch)
from .synth import SynthSpec, gen_dataset
from .transfer import ALGORITHMS, features_prepared, fit_prepared, prepare, source_instances

logger = logging.getLogger("ssvep_xfer")

EXIT_OK, EXIT_FOLD_FAILURES, EXIT_USAGE = 0, 1, 2
SWEEP_AXES = {"d": "d_seconds", "n_channels": "n_channels_used",
              "n_target_blocks": "n_target_blocks", "c_lb": "c_lb"}


class UsageError(Exception):
    pass


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_text(path: Path, text: str) -> None:
    atomic_write(path, text.encode("utf-8"))


# -- data loading ------------------------------------------------------------

def _data_files(data_dir: Path) -> list[Path]:
    manifest = data_dir / "manifest.json"
    if manifest.exists():
        with open(manifest) as fh:
            entries = json.load(fh)["subjects"]
        return [data_dir / e["file"] for e in entries]
    files = sorted(data_dir.glob("*.eegt"))
    if not files:
        raise UsageError(f"no tensor files (*.eegt) in {data_dir}")
    return files


def load_dataset(data_dir, cfg: RunConfig):
    """Read, channel-select and window every subject tensor in ``data_dir``."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise UsageError(f"data directory {data_dir} does not exist")
    tensors, headers = [], []
    for path in _data_files(data_dir):
        t, h = read_tensor(path, cfg.n_channels_used, cfg.channel_order)
        tensors.append(t)
        headers.append(h)
    fs_set = {float(h.get("fs", 0)) for h in headers}
    shapes = {t.shape for t in tensors}
    if len(fs_set) != 1 or len(shapes) != 1:
        raise UsageError(
            f"inconsistent tensors across subjects: fs {sorted(fs_set)}, shapes {sorted(shapes)}")
    fs = fs_set.pop()
    if not fs > 0:
        raise UsageError("tensor header lacks a positive 'fs'")
    onset = cfg.onset_s
    if onset is None:
        onset = float(headers[0].get("onset_s", GAZE_SHIFT_S + LATENCY_S))
    window = EpochWindow(onset, cfg.d_seconds, fs)
    try:
        windowed = [np.moveaxis(extract_epoch(np.moveaxis(t, 2, -1), window), -1, 2)
                    for t in tensors]
    except ValueError as exc:
        raise UsageError(f"d={cfg.d_seconds} s: {exc}") from None
    return windowed, headers, fs


def make_bank(cfg: RunConfig, fs: float) -> FilterBankSpec:
    if cfg.band_edges is not None:
        return FilterBankSpec(tuple(BandpassSpec(float(lo), float(hi), cfg.filter_order,
                                                 cfg.ripple_db) for lo, hi in cfg.band_edges))
    return default_filterbank(fs, cfg.n_subbands, ceiling_hz=cfg.band_ceiling_hz,
                              order=cfg.filter_order, ripple_db=cfg.ripple_db)


def _evaluate(dataset, fs, cfg: RunConfig, algo: str, jobs: int, keep_features=False):
    plan = build_cv_plan(len(dataset), dataset[0].shape[3], cfg.n_target_blocks)
    snapshot = dict(cfg.to_dict(), algorithm=algo, fs=fs)
    return run_eval(dataset, plan, algo, fs=fs, bank=make_bank(cfg, fs),
                    selection=cfg.selection(), zero_phase=cfg.zero_phase,
                    jobs=jobs, keep_features=keep_features, config=snapshot)


def _config_from_args(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.replace(d_seconds=getattr(args, "d", None),
                       n_channels_used=getattr(args, "nc", None),
                       n_target_blocks=getattr(args, "ntb", None),
                       c_lb=getattr(args, "clb", None),
                       gamma=getattr(args, "gamma", None),
                       seed=getattr(args, "seed", None))


# -- subcommands -------------------------------------------------------------

def cmd_synth(args) -> int:
    spec_path = Path(args.spec)
    if not spec_path.exists():
        raise UsageError(f"spec file {spec_path} not found")
    with open(spec_path) as fh:
        spec = SynthSpec.from_dict(json.load(fh))
    if args.seed is not None:
        spec.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = (list(DEFAULT_CHANNELS[:spec.n_channels]) if spec.n_channels <= len(DEFAULT_CHANNELS)
             else [f"Ch{c + 1}" for c in range(spec.n_channels)])
    subjects = []
    for tensor, truth in gen_dataset(spec):
        fname = f"subject_{truth.subject_id:03d}.eegt"
        header = {
            "fs": spec.fs, "frequencies": spec.frequencies, "phases": spec.phases,
            "channel_names": names, "subject_id": truth.subject_id, "onset_s": 0.0,
        }
        blob = tensor_bytes(tensor, header)
        atomic_write(out / fname, blob)
        subjects.append({
            "file": fname, "subject_id": truth.subject_id, "cluster_id": truth.cluster_id,
            "snr_db": "inf" if np.isinf(truth.snr_db) else truth.snr_db,
            "labels": truth.labels.tolist(), "sha256": hashlib.sha256(blob).hexdigest(),
        })
    manifest = {"spec": spec.to_dict(), "subjects": subjects}
    _write_text(out / "manifest.json", _json_dumps(manifest))
    logger.info("wrote %d subject tensors to %s", len(subjects), out)
    return EXIT_OK


def _summary_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subject", "algorithm", "accuracy", "itr_bits_per_min"])
    n_f = report.confusion.shape[0]
    for s, acc in enumerate(report.per_subject_accuracy):
        if acc is None:
            w.writerow([s, report.algorithm, "", ""])
            continue
        w.writerow([s, report.algorithm, f"{acc:.6f}",
                    f"{itr(acc, n_f, report.t_select_s):.6f}"])
    w.writerow(["mean", report.algorithm, f"{report.accuracy:.6f}",
                f"{report.itr_bits_per_min:.6f}"])
    return buf.getvalue()


def cmd_eval(args) -> int:
    cfg = _config_from_args(args)
    algo = args.algo or cfg.algorithm
    dataset, headers, fs = load_dataset(args.data_dir, cfg)
    report = _evaluate(dataset, fs, cfg, algo, args.jobs, keep_features=args.features)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_text(out / "report.json", _json_dumps(report.to_dict()))
    _write_text(out / "summary.csv", _summary_csv(report))
    if args.features:
        feats = report.features
        if feats is not None:
            labels = np.concatenate([f.truth for f in report.folds if f.error is None])
            header = {"kind": "features", "fs": fs, "labels": labels.tolist(),
                      "description": "per-trial filter-bank scores r, stored as "
                                     "(n_stimuli, 1, n_trials, 1)"}
            atomic_write(out / "features.eegt",
                         tensor_bytes(feats.T[:, None, :, None], header))
    print(f"{algo}: accuracy={report.accuracy:.4f} itr={report.itr_bits_per_min:.2f} "
          f"bits/min failures={report.n_failures}")
    return EXIT_OK if report.n_failures == 0 else EXIT_FOLD_FAILURES


def _parse_value(axis: str, v: str):
    return int(v) if axis in ("n_channels", "n_target_blocks") else float(v)


def cmd_sweep(args) -> int:
    if not args.values:
        raise UsageError("sweep needs at least one value")
    base = _config_from_args(args)
    algos = args.algo or ["trca", "itrca", "ss-itrca"]
    field = SWEEP_AXES[args.axis]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["axis", "value", "algorithm", "accuracy", "itr_bits_per_min", "n_failures"])
    failures = 0
    for raw in args.values:
        value = _parse_value(args.axis, raw)
        cfg = base.replace(**{field: value})
        dataset, _, fs = load_dataset(args.data_dir, cfg)
        for algo in algos:
            rep = _evaluate(dataset, fs, cfg, algo, args.jobs)
            failures += rep.n_failures
            w.writerow([args.axis, raw, algo, f"{rep.accuracy:.6f}",
                        f"{rep.itr_bits_per_min:.6f}", rep.n_failures])
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_text(out, buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return EXIT_OK if failures == 0 else EXIT_FOLD_FAILURES


def cmd_select_report(args) -> int:
    """One JSON line per (target, stimulus, sub-band) selection."""
    cfg = _config_from_args(args)
    dataset, headers, fs = load_dataset(args.data_dir, cfg)
    bank = make_bank(cfg, fs)
    fb = FilterBank(bank, fs, cfg.zero_phase)
    prepared = [prepare(x, fb) for x in dataset]
    trcs = [source_instances(p) for p in prepared]
    plan = build_cv_plan(len(dataset), dataset[0].shape[3], cfg.n_target_blocks)
    ids = [h.get("subject_id", k) for k, h in enumerate(headers)]
    lines = []
    for fold in plan.folds:
        if fold.test_block != 0:
            continue
        others = [s for s in range(len(dataset)) if s != fold.target]
        model = fit_prepared(prepared[fold.target][:, :, list(fold.train_blocks)],
                             np.stack([trcs[s] for s in others]), bank, fs,
                             algorithm="ss-itrca", selection=cfg.selection(),
                             zero_phase=cfg.zero_phase)
        for m, row in enumerate(model.per_subband):
            for i, sm in enumerate(row):
                rep = sm.report.to_dict() if sm.report is not None else None
                lines.append(json.dumps({
                    "target": ids[fold.target], "stimulus": i, "subband": m,
                    "train_blocks": list(fold.train_blocks),
                    "sources": [ids[s] for s in others],
                    "selected_subjects": [ids[others[k]] for k in sm.source_ids],
                    "report": rep,
                }, sort_keys=True))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    """Training time per fold and inference time per test block, per algorithm."""
    cfg = _config_from_args(args)
    algos = args.algo or list(ALGORITHMS)
    dataset, _, fs = load_dataset(args.data_dir, cfg)
    bank = make_bank(cfg, fs)
    fb = FilterBank(bank, fs, cfg.zero_phase)
    plan = build_cv_plan(len(dataset), dataset[0].shape[3], cfg.n_target_blocks)
    folds = plan.folds[:args.max_folds + 1] if args.max_folds else plan.folds
    result = {"n_folds_timed": max(0, len(folds) - 1), "block_trials": dataset[0].shape[0],
              "algorithms": {}}
    for algo in algos:
        train_ms, infer_ms = [], []
        for k, fold in enumerate(folds):
            t0 = time.perf_counter()
            target = prepare(dataset[fold.target], fb)
            src = None
            if algo != "trca":
                src = np.stack([source_instances(prepare(dataset[s], fb))
                                for s in range(len(dataset)) if s != fold.target])
            model = fit_prepared(target[:, :, list(fold.train_blocks)], src, bank, fs,
                                 algorithm=algo, selection=cfg.selection(),
                                 zero_phase=cfg.zero_phase)
            t1 = time.perf_counter()
            # model is already in memory: inference excludes any deserialization
            test = dataset[fold.target][..., fold.test_block]
            features_prepared(model, fb.apply(test))
            t2 = time.perf_counter()
            if k == 0:
                continue  # warm-up fold
            train_ms.append((t1 - t0) * 1e3)
            infer_ms.append((t2 - t1) * 1e3)
        result["algorithms"][algo] = {
            "train_ms": train_ms, "infer_ms": infer_ms,
            "train_ms_mean": statistics.fmean(train_ms) if train_ms else None,
            "train_ms_sd": statistics.stdev(train_ms) if len(train_ms) > 1 else 0.0,
            "infer_ms_mean": statistics.fmean(infer_ms) if infer_ms else None,
            "infer_ms_sd": statistics.stdev(infer_ms) if len(infer_ms) > 1 else 0.0,
        }
    text = _json_dumps(result)
    if args.out:
        _write_text(Path(args.out), text)
    sys.stdout.write(text)
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------

def _add_run_flags(p: argparse.ArgumentParser, multi_algo: bool = False) -> None:
    p.add_argument("--config", help="RunConfig JSON file")
    p.add_argument("--d", type=float, help="data length in seconds")
    p.add_argument("--nc", type=int, help="number of channels (first N of channel_order)")
    p.add_argument("--ntb", type=int, help="number of target training blocks")
    p.add_argument("--clb", type=float, help="selection lower boundary c_lb")
    p.add_argument("--gamma", type=float, help="selection trigger gamma")
    if multi_algo:
        p.add_argument("--algo", choices=ALGORITHMS, action="append",
                       help="algorithm (repeatable; default all)")
    else:
        p.add_argument("--algo", choices=ALGORITHMS)
    p.add_argument("--jobs", type=int, default=1, help="parallel folds")
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssvep-xfer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="SynthSpec JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="LOSO/LOBO evaluation of one algorithm")
    p.add_argument("data_dir")
    _add_run_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--features", action="store_true", help="also write features.eegt")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate over one parameter axis")
    p.add_argument("data_dir")
    _add_run_flags(p, multi_algo=True)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", nargs="*", default=[])
    p.add_argument("--out", required=True, help="CSV output path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("select-report", help="subject-selection reports as JSON lines")
    p.add_argument("data_dir")
    _add_run_flags(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_select_report)

    p = sub.add_parser("bench", help="training and inference timing")
    p.add_argument("data_dir")
    _add_run_flags(p, multi_algo=True)
    p.add_argument("--max-folds", type=int, default=0, help="limit timed folds (0 = all)")
    p.add_argument("--out", help="JSON output path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("SSVEP_XFER_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
