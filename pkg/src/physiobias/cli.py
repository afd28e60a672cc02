"""Command-line orchestration: synth -> extract -> evaluate -> report.

Every output embeds the configuration, the seed and the tool version, and
carries no timestamps, so a rerun with the same flags is byte-identical.
Exit codes: 0 success, 1 partial failure (some sessions skipped), 2 fatal.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import Dataset, from_csv
from .eda import DecompParams, dump_components_csv
from .errors import NoSessions, PhysioBiasError
from .evaluation import EvalReport, evaluate
from .features import build_feature_matrix, extract_session_features
from .gbt import GbtParams
from .ingest import MIN_SESSION_SECONDS, assemble_session, load_labels
from .smoothing import final_label, smooth_with_trace
from .synth import SynthParams, generate_corpus


def _meta(command: str, config: dict) -> dict:
    return {
        "tool": "physiobias",
        "version": __version__,
        "command": command,
        "config": config,
    }


def _add_decomp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--knot-spacing", type=float, default=10.0, help="tonic spline knot spacing, s")
    p.add_argument("--decomp-alpha", type=float, default=8e-4, help="l1 weight on the EDA driver")
    p.add_argument("--decomp-gamma", type=float, default=1e-2, help="l2 weight on spline coefficients")
    p.add_argument("--decomp-tol", type=float, default=1e-6)
    p.add_argument("--decomp-max-iter", type=int, default=5000)


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--reg-lambda", type=float, default=1.0)
    p.add_argument("--min-child-weight", type=float, default=1.0)
    p.add_argument("--subsample", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="physiobias",
        description="Wearable-session feature extraction and participant bias classification.",
    )
    parser.add_argument("--version", action="version", version=f"physiobias {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="generate synthetic E4 sessions + labels")
    p_synth.add_argument("--out", required=True, type=Path)
    p_synth.add_argument("--participants-per-class", type=int, default=20)
    p_synth.add_argument("--session-seconds", type=float, default=300.0)
    p_synth.add_argument("--effect-size", type=float, default=3.0)
    p_synth.add_argument("--effect-location", choices=["uniform", "end"], default="uniform")
    p_synth.add_argument("--seed", type=int, default=0)

    p_ext = sub.add_parser("extract", help="sessions -> features.csv")
    p_ext.add_argument("--data-dir", required=True, type=Path)
    p_ext.add_argument("--labels", required=True, type=Path)
    p_ext.add_argument("--out", required=True, type=Path, help="output directory")
    p_ext.add_argument("--window-seconds", type=float, default=5.0)
    p_ext.add_argument("--min-duration", type=float, default=MIN_SESSION_SECONDS)
    p_ext.add_argument("--debug-eda", action="store_true", help="dump per-session decompositions")
    p_ext.add_argument("--seed", type=int, default=0)
    _add_decomp_flags(p_ext)

    p_eval = sub.add_parser("evaluate", help="features.csv -> report.json + tables")
    p_eval.add_argument("--features", required=True, type=Path)
    p_eval.add_argument("--out", required=True, type=Path, help="output directory")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--top-n", type=int, default=20)
    p_eval.add_argument("--importance-threshold", type=float, default=None)
    p_eval.add_argument("--folds-parallel", type=int, default=1)
    _add_model_flags(p_eval)

    p_smooth = sub.add_parser("smooth", help="smooth one 0/1 sequence, print the trace")
    p_smooth.add_argument("--input", type=Path, default=None, help="file with the sequence; default stdin")

    p_rep = sub.add_parser("report", help="print a human-readable summary of report.json")
    p_rep.add_argument("--report", required=True, type=Path)

    return parser


def _cmd_synth(args: argparse.Namespace) -> int:
    params = SynthParams(
        participants_per_class=args.participants_per_class,
        session_seconds=args.session_seconds,
        effect_size=args.effect_size,
        effect_location=args.effect_location,
        seed=args.seed,
    )
    sessions_dir, labels_path = generate_corpus(args.out, params)
    manifest = _meta("synth", dataclasses.asdict(params))
    (args.out / "synth_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {2 * params.participants_per_class} sessions under {sessions_dir}")
    print(f"labels: {labels_path}")
    return 0


def _cmd_extract(args: argparse.Namespace) -> int:
    data_dir: Path = args.data_dir
    if not data_dir.is_dir():
        print(f"error: {data_dir} is not a directory", file=sys.stderr)
        return 2
    session_dirs = sorted(p for p in data_dir.iterdir() if p.is_dir())
    if not session_dirs:
        print(f"error: {NoSessions(f'no session directories in {data_dir}')}", file=sys.stderr)
        return 2

    try:
        labels = load_labels(args.labels)
    except PhysioBiasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    decomp = DecompParams(
        knot_spacing=args.knot_spacing,
        alpha=args.decomp_alpha,
        gamma=args.decomp_gamma,
        tol=args.decomp_tol,
        max_iter=args.decomp_max_iter,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    debug_dir = args.out / "eda_debug"
    config = {
        "data_dir": str(data_dir),
        "labels": str(args.labels),
        "window_seconds": args.window_seconds,
        "min_duration": args.min_duration,
        "decomposition": dataclasses.asdict(decomp),
        "seed": args.seed,
    }
    meta = _meta("extract", config)

    extracted = []
    failures = 0
    for session_dir in session_dirs:
        try:
            session = assemble_session(session_dir, labels, min_duration=args.min_duration)
            vectors, components = extract_session_features(
                session, decomp, window_seconds=args.window_seconds
            )
            extracted.append((session.participant_id, int(session.label.value), vectors))
            if args.debug_eda:
                debug_dir.mkdir(exist_ok=True)
                dump_components_csv(
                    session.eda, components,
                    debug_dir / f"{session.participant_id}.csv",
                    meta=json.dumps(meta, sort_keys=True),
                )
        except PhysioBiasError as exc:
            failures += 1
            print(f"skipping {session_dir.name}: {exc}", file=sys.stderr)

    if not extracted:
        print("error: no usable sessions", file=sys.stderr)
        return 2

    data = build_feature_matrix(extracted)
    data.to_csv(args.out / "features.csv", meta=meta)
    print(f"wrote {data.n_rows} windows x {len(data.column_names)} features "
          f"for {len(extracted)} sessions -> {args.out / 'features.csv'}")
    if failures:
        print(f"{failures} session(s) skipped", file=sys.stderr)
        return 1
    return 0


def _report_to_dict(report: EvalReport, meta: dict) -> dict:
    doc = dataclasses.asdict(report)
    doc["folds"] = [
        {
            "participant": f.participant,
            "truth": f.truth,
            "verdict": f.verdict,
            "location": f.location,
            "n_windows": len(f.predicted),
            "predicted": "".join(map(str, f.predicted)),
            "smoothed": "".join(map(str, f.smoothed)),
            "mean_probability": float(np.mean(f.probabilities)),
        }
        for f in report.folds
    ]
    doc["group_stats"] = [dataclasses.asdict(s) for s in report.group_stats]
    doc["meta"] = meta
    return doc


def _cmd_evaluate(args: argparse.Namespace) -> int:
    try:
        data = from_csv(args.features)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    params = GbtParams(
        depth=args.depth,
        rounds=args.rounds,
        learning_rate=args.learning_rate,
        reg_lambda=args.reg_lambda,
        min_child_weight=args.min_child_weight,
        subsample=args.subsample,
        seed=args.seed,
    )
    try:
        report = evaluate(
            data,
            params,
            seed=args.seed,
            top_n=args.top_n,
            importance_threshold=args.importance_threshold,
            n_jobs=args.folds_parallel,
        )
    except PhysioBiasError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    args.out.mkdir(parents=True, exist_ok=True)
    config = {
        "features": str(args.features),
        "model": dataclasses.asdict(params),
        "top_n": args.top_n,
        "importance_threshold": args.importance_threshold,
        "seed": args.seed,
    }
    meta = _meta("evaluate", config)
    meta_line = "# " + json.dumps(meta, sort_keys=True)
    doc = _report_to_dict(report, meta)
    (args.out / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    lines = [meta_line, "feature,fold_count"]
    lines += [f"{name},{count}" for name, count in report.importance_counts.items()]
    (args.out / "importance_counts.csv").write_text("\n".join(lines) + "\n")

    lines = [meta_line, "feature,u_statistic,p_value,n_biased,n_unbiased,all_tied"]
    for s in report.group_stats:
        lines.append(f"{s.feature},{s.u_statistic!r},{s.p_value!r},{s.n_biased},{s.n_unbiased},{s.all_tied}")
    (args.out / "group_stats.csv").write_text("\n".join(lines) + "\n")

    pm = report.participant_metrics
    print(f"participants: {report.n_participants}  baseline: {report.baseline:.3f}")
    print(f"accuracy: {pm.accuracy:.3f}  "
          f"f1(biased): {pm.per_class[1].f1:.3f}  f1(unbiased): {pm.per_class[0].f1:.3f}")
    print(f"report: {args.out / 'report.json'}")
    return 0


def _cmd_smooth(args: argparse.Namespace) -> int:
    text = args.input.read_text() if args.input else sys.stdin.read()
    tokens = [ch for ch in text if ch in "01"]
    if not tokens:
        print("error: no 0/1 labels found in input", file=sys.stderr)
        return 2
    labels = [int(t) for t in tokens]
    smoothed, trace = smooth_with_trace(labels)
    for line in trace:
        print(line)
    print("smoothed: " + "".join(map(str, smoothed)))
    print(f"final label: {final_label(smoothed)}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    try:
        doc = json.loads(args.report.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    pm = doc["participant_metrics"]
    print(f"participants: {doc['n_participants']}   baseline: {doc['baseline']:.3f}")
    print(f"participant accuracy: {pm['accuracy']:.3f}")
    for cls in ("1", "0"):
        m = pm["per_class"][cls]
        name = "biased" if cls == "1" else "unbiased"
        print(f"  {name:<9} precision {m['precision']:.3f}  recall {m['recall']:.3f}  f1 {m['f1']:.3f}")
    wm = doc["window_metrics"]
    print(f"window accuracy: {wm['accuracy']:.3f}")
    if doc.get("end_fraction") is not None:
        print(f"majority window at end (correct biased): {doc['end_fraction']:.3f}")
    reported = doc.get("importance_reported", [])
    print(f"features above importance threshold ({doc['importance_threshold']:g}): {len(reported)}")
    for name in reported[:15]:
        print(f"  {name} ({doc['importance_counts'][name]} folds)")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "synth": _cmd_synth,
        "extract": _cmd_extract,
        "evaluate": _cmd_evaluate,
        "smooth": _cmd_smooth,
        "report": _cmd_report,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
