"""Batch driver: ``semseq {synth,segment,match,eval,sweep}``.

Every subcommand writes its outputs plus ``config.json`` (effective
configuration) and ``manifest.json`` (inputs, method, timestamps, tool
version) into ``--out``. Failures exit nonzero after printing one JSON
error line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .config import PipelineConfig
from .diffmatrix import write_matrix_csv
from .evaluate import evaluate
from .ingest import load_attributes, load_frame_dir, load_ground_truth, write_report
from .pipeline import (
    METHODS,
    difference_matrix,
    match_and_evaluate,
    normalize_matrix,
    segment_reference,
)
from .search import match_sequence, read_matches_csv, write_matches_csv
from .segmentation import SegmentSet, read_segments_csv, write_segments_csv
from .synth import PRESETS, load_corpus, make_corpus, spec_from_dict, write_corpus

SWEEP_COLUMNS = ("R", "P", "max_f1", "method")


@dataclass
class RunManifest:
    command: str
    config_path: str | None
    inputs: dict[str, str]
    output_dir: str
    method: str | None = None
    started: str = ""
    finished: str = ""
    tool_version: str = __version__
    argv: list[str] = field(default_factory=list)

    def write(self, out_dir: Path) -> None:
        (out_dir / "manifest.json").write_text(json.dumps(asdict(self), indent=2) + "\n")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON file with PipelineConfig fields")
    p.add_argument("--R", type=int, help="normalization window width (frames)")
    p.add_argument("--P", type=int, help="patch normalization window (pixels)")
    p.add_argument("--O", type=int, help="horizontal offset search range (pixels)")
    p.add_argument("--d-s", dest="d_s", type=int, help="sequence length (frames)")
    p.add_argument("--mu", type=float, help="uniqueness threshold for the accepted column")
    p.add_argument("--states", dest="N", type=int, help="number of HMM states")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--restarts", type=int, help="Baum-Welch restarts")
    p.add_argument("--min-segment-len", dest="min_segment_len", type=int)
    p.add_argument("--tol", dest="gt_tolerance", type=int, help="ground-truth tolerance (frames)")


def _load_config(args: argparse.Namespace) -> PipelineConfig:
    base = PipelineConfig.from_json(args.config) if args.config else PipelineConfig()
    keys = ("R", "P", "O", "d_s", "mu", "N", "seed", "restarts", "min_segment_len", "gt_tolerance")
    return base.with_overrides(**{k: getattr(args, k, None) for k in keys})


def _start(args: argparse.Namespace, command: str, inputs: dict[str, Any], method: str | None = None):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=command,
        config_path=getattr(args, "config", None),
        inputs={k: str(v) for k, v in inputs.items() if v is not None},
        output_dir=str(out),
        method=method,
        started=_now(),
        argv=list(getattr(args, "argv", [])),
    )
    return out, manifest


def _finish(out: Path, manifest: RunManifest, cfg: PipelineConfig | None) -> None:
    if cfg is not None:
        cfg.to_json(out / "config.json")
    manifest.finished = _now()
    manifest.write(out)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> None:
    if args.spec:
        with open(args.spec, encoding="utf-8") as fh:
            spec, query = spec_from_dict(json.load(fh))
    else:
        spec, query = PRESETS[args.preset](seed=args.seed)
    out, manifest = _start(args, "synth", {"spec": args.spec, "preset": None if args.spec else args.preset})
    corpus = make_corpus(spec, query)
    write_corpus(corpus, out)
    _finish(out, manifest, None)


def cmd_segment(args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    out, manifest = _start(args, "segment", {"attributes": args.attributes})
    attrs = load_attributes(args.attributes)
    result = segment_reference(attrs, cfg)
    write_segments_csv(result.segments, out / "segments.csv")
    result.params.to_json(out / "model.json")
    np.savetxt(out / "labels.csv", result.labels, fmt="%d")
    _finish(out, manifest, cfg)


def cmd_match(args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    method = args.method
    if method == "semantic" and not args.segments:
        raise ValueError("method 'semantic' requires --segments")
    if method == "vanilla" and args.R is None and not (args.config and _config_has(args.config, "R")):
        raise ValueError("method 'vanilla' requires R (--R or in --config)")
    out, manifest = _start(
        args, "match", {"ref": args.ref, "query": args.query, "segments": args.segments}, method
    )
    segments = read_segments_csv(args.segments) if method == "semantic" else None
    D = difference_matrix(load_frame_dir(args.ref), load_frame_dir(args.query), cfg)
    Dn = normalize_matrix(D, method, cfg, segments)
    matches = match_sequence(Dn, cfg)
    write_matches_csv(matches, out / "matches.csv")
    if args.dump_diff:
        write_matrix_csv(D, out / "diff.csv")
    if args.dump_norm:
        write_matrix_csv(Dn, out / "diff_normalized.csv")
    _finish(out, manifest, cfg)


def _config_has(path: str, key: str) -> bool:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh).get(key) is not None


def cmd_eval(args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    out, manifest = _start(args, "eval", {"matches": args.matches, "ground_truth": args.ground_truth})
    matches = read_matches_csv(args.matches)
    gt = load_ground_truth(args.ground_truth)
    grid = _float_list(args.mu_grid) if args.mu_grid else None
    report = evaluate(matches, gt, cfg, mu_grid=grid)
    write_report(report, out / "report.csv", "csv")
    write_report(report, out / "report.json", "json")
    _finish(out, manifest, cfg)


def _frames_digest(frames, cfg: PipelineConfig, extra: bytes) -> str:
    h = hashlib.sha256()
    for fr in frames:
        h.update(fr.pixels.shape[0].to_bytes(4, "little"))
        h.update(fr.pixels.shape[1].to_bytes(4, "little"))
        h.update(fr.intensities)
    h.update(extra)
    h.update(json.dumps([cfg.S_x, cfg.S_y, cfg.P, cfg.O]).encode())
    return h.hexdigest()[:24]


def _cached_difference_matrix(corpus, cfg: PipelineConfig, cache_dir: Path | None) -> np.ndarray:
    if cache_dir is None:
        return difference_matrix(corpus.ref_frames, corpus.query_frames, cfg)
    key = _frames_digest(corpus.ref_frames, cfg, _frames_digest(corpus.query_frames, cfg, b"").encode())
    path = cache_dir / f"D_{key}.npy"
    if path.exists():
        return np.load(path)
    D = difference_matrix(corpus.ref_frames, corpus.query_frames, cfg)
    cache_dir.mkdir(parents=True, exist_ok=True)
    np.save(path, D)
    return D


def run_sweep(
    corpus,
    cfg: PipelineConfig,
    R_list: Sequence[int],
    P_list: Sequence[int],
    methods: Sequence[str],
    segments: SegmentSet | None = None,
    cache_dir: Path | None = None,
) -> list[tuple[int, int, float, str]]:
    """Max F1 for every (method, P, R); semantic runs once per P and is
    repeated across R, since its windows do not depend on R."""
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if "semantic" in methods and segments is None:
        segments = segment_reference(corpus.attributes, cfg).segments
    rows = []
    for P in P_list:
        cfg_p = cfg.with_overrides(P=P)
        D = _cached_difference_matrix(corpus, cfg_p, cache_dir)
        for method in methods:
            if method == "semantic":
                _, rep = match_and_evaluate(D, corpus.ground_truth, "semantic", cfg_p, segments)
                rows += [(R, P, rep.max_f1, "semantic") for R in R_list]
            else:
                for R in R_list:
                    _, rep = match_and_evaluate(
                        D, corpus.ground_truth, "vanilla", cfg_p.with_overrides(R=R)
                    )
                    rows.append((R, P, rep.max_f1, "vanilla"))
    return rows


def write_sweep_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for R, P, f1, method in rows:
            w.writerow([R, P, repr(float(f1)), method])


def read_sweep_csv(path: str | Path) -> list[tuple[int, int, float, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(int(r["R"]), int(r["P"]), float(r["max_f1"]), r["method"]) for r in csv.DictReader(fh)]


def cmd_sweep(args: argparse.Namespace) -> None:
    cfg = _load_config(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    out, manifest = _start(args, "sweep", {"corpus": args.corpus, "segments": args.segments})
    corpus = load_corpus(args.corpus)
    segments = None
    if args.segments:
        segments = read_segments_csv(args.segments)
    elif "semantic" in methods:
        result = segment_reference(corpus.attributes, cfg)
        segments = result.segments
        write_segments_csv(segments, out / "segments.csv")
    cache = Path(args.cache_dir) if args.cache_dir else None
    rows = run_sweep(corpus, cfg, _int_list(args.R_list), _int_list(args.P_list), methods, segments, cache)
    write_sweep_csv(rows, out / "sweep.csv")
    _finish(out, manifest, cfg)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semseq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=sorted(PRESETS), default="inversion")
    p.add_argument("--spec", help="JSON synth description (overrides --preset)")
    p.add_argument("--seed", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("segment", help="HMM-segment a reference attribute stream")
    p.add_argument("--attributes", required=True)
    p.add_argument("--out", required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("match", help="match a query traversal against a reference")
    p.add_argument("--ref", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--segments", help="segments CSV (semantic method)")
    p.add_argument("--out", required=True)
    p.add_argument("--dump-diff", action="store_true", help="also write the raw difference matrix")
    p.add_argument("--dump-norm", action="store_true", help="also write the normalized matrix")
    _add_config_args(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("eval", help="precision/recall sweep over mu")
    p.add_argument("--matches", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--mu-grid", help="comma-separated ascending thresholds")
    p.add_argument("--out", required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="max F1 over an (R, P, method) grid")
    p.add_argument("--corpus", required=True, help="directory written by 'synth' or laid out alike")
    p.add_argument("--R-list", default="5,10,20,40,80,160,320,640")
    p.add_argument("--P-list", default="2,4,8,16")
    p.add_argument("--methods", default="vanilla,semantic")
    p.add_argument("--segments", help="precomputed segments CSV; otherwise the HMM is run")
    p.add_argument("--cache-dir", help="reuse difference matrices across runs")
    p.add_argument("--out", required=True)
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        args.func(args)
    except (ValueError, OSError, FloatingPointError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
