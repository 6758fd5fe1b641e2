"""Command-line front end: configure, run the convergence study, report.

Writes ``study.csv`` (one row per estimator replication), ``summary.csv``
(relative RMSE and fitted slopes), ``rmse.svg``, ``timings.json`` and a
``manifest.json`` holding the canonical config, seed and versions.  The two
CSV files are byte-reproducible from the manifest at any worker count.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, ProblemConfig, dumps_config, load_config
from .fem import PathError
from .mesh import MeshQualityError
from .mlmc import compute_reference, rmse_study
from .random_field import EmbeddingError
from .sparse_linalg import SolveError
from .streams import RandomStream
from .svgplot import emit_plot

__all__ = ["main", "run"]

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

# top-level stream keys of one run
_REF_KEY = 0
_STUDY_KEY = 1

ENV_THREADS = "JUMPMLMC_THREADS"


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="jumpmlmc",
        description="MLMC convergence study for the jump-coefficient advection-diffusion problem",
    )
    p.add_argument("--config", type=str, default=None, help="config file (defaults if omitted)")
    p.add_argument("--methods", type=str, default=None,
                   help="comma list from adapted, nonadapted, adapted-coupled, nonadapted-coupled")
    p.add_argument("--levels", type=str, default=None, help="level range, e.g. 0..3 or 0,1,2")
    p.add_argument("--reps", type=int, default=None, help="estimator replications per level")
    p.add_argument("--ref-level", type=int, default=None, help="level of the adapted reference run")
    p.add_argument("--seed", type=int, default=None, help="root seed")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker count (env {ENV_THREADS} overrides)")
    p.add_argument("--out", type=str, default="out", help="output directory")
    return p


def _apply_overrides(cfg: ProblemConfig, args) -> ProblemConfig:
    from dataclasses import replace

    from .config import _parse_levels

    updates = {}
    if args.methods is not None:
        updates["methods"] = tuple(v.strip() for v in args.methods.split(",") if v.strip())
    if args.levels is not None:
        updates["levels"] = _parse_levels(args.levels)
    if args.reps is not None:
        updates["reps"] = args.reps
    if args.ref_level is not None:
        updates["ref_level"] = args.ref_level
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.threads is not None:
        updates["workers"] = args.threads
    env_threads = os.environ.get(ENV_THREADS)
    if env_threads:
        updates["workers"] = int(env_threads)
    return replace(cfg, **updates) if updates else cfg


def _write_study_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("method,L,h_L,rep,estimate,reference,rel_error\n")
        for r in rows:
            fh.write(f"{r.method},{r.L},{r.h_L!r},{r.rep},{r.estimate!r},"
                     f"{r.reference!r},{r.rel_error!r}\n")


def _write_summary_csv(path: Path, summary, slopes) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("method,L,h_L,reps,rmse_rel,slope\n")
        for s in summary:
            slope = slopes.get(s.method)
            slope_txt = repr(slope) if slope is not None else ""
            fh.write(f"{s.method},{s.L},{s.h_L!r},{s.reps},{s.rmse_rel!r},{slope_txt}\n")


def run(args) -> int:
    try:
        cfg = load_config(args.config) if args.config else ProblemConfig()
        cfg = _apply_overrides(cfg, args)
        if cfg.ref_level <= max(cfg.levels):
            raise ConfigError("study.ref_level must exceed every studied level")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"output directory not writable: {exc}", file=sys.stderr)
        return EXIT_IO

    root = RandomStream(cfg.seed)
    config_text = dumps_config(cfg)
    fingerprint = hashlib.sha256(config_text.encode()).hexdigest()
    t0 = time.perf_counter()
    try:
        reference = compute_reference(
            cfg, cfg.ref_level, root.child(_REF_KEY),
            cache_path=out / "reference.json", kappa=cfg.kappa, workers=cfg.workers,
        )
        study = rmse_study(
            cfg.levels, cfg.reps, reference, cfg, cfg.methods,
            root_stream=root.child(_STUDY_KEY), kappa=cfg.kappa, workers=cfg.workers,
        )
    except (PathError, SolveError, EmbeddingError, MeshQualityError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    elapsed = time.perf_counter() - t0

    try:
        _write_study_csv(out / "study.csv", study.rows)
        _write_summary_csv(out / "summary.csv", study.summary, study.slopes)
        timings = {
            f"{s.method}:L={s.L}": s.mean_time for s in study.summary
        }
        timings["total_seconds"] = elapsed
        (out / "timings.json").write_text(json.dumps(timings, indent=1, sort_keys=True))
        manifest = {
            "config": config_text,
            "config_fingerprint": fingerprint,
            "seed": cfg.seed,
            "reference": reference,
            "ref_level": cfg.ref_level,
            "versions": {
                "jumpmlmc": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True))
        emit_plot(list(study.summary), out / "rmse.svg")
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return EXIT_IO

    for s in study.summary:
        print(f"{s.method:22s} L={s.L} h_L={s.h_L:.4g} rel-RMSE={s.rmse_rel:.4e}")
    for method, slope in study.slopes.items():
        print(f"{method:22s} fitted RMSE slope {slope:.3f}")
    print(f"reference = {reference!r}  (L_ref={cfg.ref_level}),  outputs in {out}/")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
