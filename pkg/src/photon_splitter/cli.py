"""``photon-splitter`` command line interface."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import traceback
from pathlib import Path

import numpy as np

from . import experiments as exp
from .config import parse_config
from .errors import PhotonSplitterError, UnknownExperiment
from .io import read_samples, write_csv, write_density, write_json, write_report
from .tomography import HomodyneTomography

log = logging.getLogger("photon_splitter")

#: experiment name -> (runner, config keys it consumes)
EXPERIMENTS = {
    "anticoincidence": (
        exp.run_anticoincidence,
        ("eta_c", "eta_d", "n_trials", "input", "cutoff", "squeezing", "herald_efficiency"),
    ),
    "mach_zehnder": (
        exp.run_mach_zehnder,
        ("phases", "n_trials_per_phase", "eta_c", "eta_d", "input", "cutoff", "squeezing",
         "herald_efficiency"),
    ),
    "dual_homodyne": (
        exp.run_dual_homodyne,
        ("relative_phases", "phi_bs", "n_pairs_per_point", "input", "cutoff"),
    ),
    "snr_wavepacket": (
        exp.run_snr_wavepacket,
        ("n_samples", "collection_efficiency", "input", "cutoff", "n_bootstrap"),
    ),
    "qrng": (exp.run_qrng, ("n_bits", "extractor", "cutoff")),
    "tomography": (
        exp.run_tomography,
        ("input", "tomography_phases", "n_per_phase", "n_bins", "cutoff", "max_iters", "tol",
         "wigner_extent", "wigner_points", "squeezing", "herald_efficiency"),
    ),
}


def write_error(out_dir, error):
    record = {
        "code": getattr(error, "code", "internal_error"),
        "message": str(error),
        "type": type(error).__name__,
    }
    for attr in ("key", "line"):
        if getattr(error, attr, None) is not None:
            record[attr] = getattr(error, attr)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "error.json", record)


def run_experiment(config, threads=1):
    """Run the experiment a config names and return its report (config echo attached)."""
    if config.experiment not in EXPERIMENTS:
        raise UnknownExperiment(
            f"unknown experiment {config.experiment!r}; choose from {', '.join(EXPERIMENTS)}"
        )
    runner, keys = EXPERIMENTS[config.experiment]
    kwargs = {key: getattr(config, key) for key in keys}
    report = runner(seed=config.seed, threads=threads, **kwargs)
    report.config_echo = config.echo()
    return report


def dispatch(config, threads=1):
    """Run ``config`` and write its outputs to ``config.out_dir``; returns an exit status."""
    try:
        report = run_experiment(config, threads)
    except UnknownExperiment as err:
        write_error(config.out_dir, err)
        return 2
    except Exception as err:
        log.debug("experiment failed", exc_info=True)
        write_error(config.out_dir, err)
        return 1
    write_report(config.out_dir, report, config_hash=config.digest())
    return 0


def _cmd_run(args):
    out_dir = args.out or "out"
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        config = parse_config(text)
    except (PhotonSplitterError, OSError, UnicodeDecodeError) as err:
        write_error(out_dir, err)
        print(f"error: {err}", file=sys.stderr)
        return 2
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if overrides:
        try:
            config = dataclasses.replace(config, **overrides)
        except PhotonSplitterError as err:
            write_error(out_dir, err)
            print(f"error: {err}", file=sys.stderr)
            return 2
    status = dispatch(config, threads=args.threads)
    if status:
        print(f"error: see {Path(config.out_dir) / 'error.json'}", file=sys.stderr)
    else:
        print(Path(config.out_dir) / "report.json")
    return status


def _cmd_list(args):
    for name, (runner, keys) in EXPERIMENTS.items():
        summary = (runner.__doc__ or "").strip().splitlines()[0].replace("``", "")
        print(f"{name}: {summary}")
        print(f"    parameters: seed, {', '.join(keys)}")
    return 0


def _cmd_reconstruct(args):
    try:
        samples = read_samples(args.samples)
        model = HomodyneTomography(args.cutoff, args.n_bins, args.max_iters, args.tol).fit(samples)
    except (PhotonSplitterError, OSError, ValueError) as err:
        write_error(args.out, err)
        print(f"error: {err}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_density(out / "density_matrix.json", model.density_matrix_)
    axis = np.linspace(-args.wigner_extent, args.wigner_extent, args.wigner_points)
    grid = model.wigner(axis, axis)
    xs, ps = np.meshgrid(axis, axis, indexing="ij")
    write_csv(out / "wigner.csv", {"x": xs.ravel(), "p": ps.ravel(), "W": grid.W.ravel()})
    write_json(
        out / "report.json",
        {
            "experiment": "reconstruct",
            "n_samples": len(samples),
            "n_iter": int(model.n_iter_),
            "converged": int(model.converged_),
            "log_likelihood": float(model.log_likelihood_[-1]),
            "files": ["density_matrix.json", "wigner.csv"],
        },
    )
    print(out / "report.json")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="photon-splitter", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment named in a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, help="override the config seed (64-bit unsigned)")
    run.add_argument("--out", help="output directory (overrides out_dir)")
    run.add_argument("--threads", type=int, default=1, help="worker threads (output is identical)")
    run.set_defaults(func=_cmd_run)

    lst = sub.add_parser("list", help="list experiments and their parameters")
    lst.set_defaults(func=_cmd_list)

    rec = sub.add_parser("reconstruct", help="tomography from a samples.csv file")
    rec.add_argument("--samples", required=True)
    rec.add_argument("--out", default="out")
    rec.add_argument("--cutoff", type=int, default=6)
    rec.add_argument("--n-bins", type=int, default=50)
    rec.add_argument("--max-iters", type=int, default=2000)
    rec.add_argument("--tol", type=float, default=1e-7)
    rec.add_argument("--wigner-extent", type=float, default=3.0)
    rec.add_argument("--wigner-points", type=int, default=61)
    rec.set_defaults(func=_cmd_reconstruct)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except Exception as err:  # last-resort record for unexpected failures
        log.debug("unhandled error", exc_info=True)
        out = getattr(args, "out", None) or "out"
        write_error(out, err)
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
