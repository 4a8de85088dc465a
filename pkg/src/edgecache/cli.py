"""Command-line front end.

Three subcommands: `bounds` sweeps the exact tradeoff curves to CSV,
`simulate` runs Monte-Carlo delivery campaigns, and `verify-converse`
checks the converse's linear-algebra identities against fixed tolerances.
Every subcommand writes a run manifest next to its output recording the
command line, seed, tool version and output digests; re-running the
recorded command reproduces bit-identical data files.

Rationals are serialized as numerator/denominator integer pairs so
downstream tightness checks stay exact.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    CsiMode,
    achievable_points,
    convex_envelope,
    default_mu_grid,
    ndt_lower_bound,
    optimality_regions,
    tradeoff_sweep,
)
from .caching import full_placement, shared_placement, split_placement
from .converse import (
    LOGDET_ORACLE_TOL,
    NOISE_COV_TOL,
    RECONSTRUCTION_TOL,
    report_passes,
    verify_converse,
)
from .errors import (
    ArgumentError,
    DemandError,
    EdgeCacheError,
    FeasibilityError,
    InsufficientDataError,
    RangeError,
    UnsupportedError,
)
from .model import DemandVector, FileLibrary, as_fraction, validate_config
from .phy import (
    DEFAULT_SNR_GRID_DB,
    DEFAULT_TRIALS_PER_SNR,
    Scheme,
    estimate_ndt,
    run_campaign,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_UNSUPPORTED = 3
EXIT_TOLERANCE = 4


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, argv: list[str], config, master_seed,
                    outputs: list[Path]) -> Path:
    manifest = {
        "command": argv,
        "config": {
            "num_ens": config.num_ens,
            "num_users": config.num_users,
            "library_size": config.library_size,
            "frac_cache": str(config.frac_cache),
            "file_bits": config.file_bits,
        },
        "master_seed": master_seed,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "output_digests": {p.name: _sha256(p) for p in outputs},
    }
    path = out.with_name(out.stem + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def replay_manifest(manifest_path, out_path) -> int:
    """Re-run the command recorded in a manifest with a new output path."""
    data = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    argv = list(data["command"])
    if "--out" not in argv:
        raise ArgumentError("manifest command has no --out argument")
    argv[argv.index("--out") + 1] = str(out_path)
    return main(argv)


def _frac_fields(value: Fraction | None) -> tuple:
    if value is None:
        return "", ""
    return value.numerator, value.denominator


def _format_regions(regions) -> str:
    parts = []
    for lo, hi in regions:
        parts.append(f"{{{lo}}}" if lo == hi else f"[{lo}, {hi}]")
    return " u ".join(parts) if parts else "(none)"


def cmd_bounds(args, argv: list[str]) -> int:
    config = validate_config(args.m, args.k, args.n if args.n else args.k,
                             Fraction(1), args.l)
    csi = CsiMode(args.csi)
    step = as_fraction(args.grid_step) if args.grid_step else None
    grid = default_mu_grid(config, step)
    table = tradeoff_sweep(config, grid, csi)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([
            "mu_num", "mu_den", "lower_num", "lower_den",
            "upper_num", "upper_den", "ell_star", "tight",
        ])
        for row in table.rows:
            writer.writerow([
                *_frac_fields(row.mu),
                *_frac_fields(row.lower),
                *_frac_fields(row.upper),
                row.ell_star if row.ell_star is not None else "",
                "" if row.tight is None else int(row.tight),
            ])
    outputs = [out]
    if args.json:
        json_rows = [
            {
                "mu": str(row.mu),
                "lower": str(row.lower) if row.lower is not None else None,
                "upper": str(row.upper),
                "ell_star": row.ell_star,
                "tight": row.tight,
            }
            for row in table.rows
        ]
        json_path = out.with_suffix(".json")
        json_path.write_text(
            json.dumps({"csi": csi.value, "rows": json_rows},
                       indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        outputs.append(json_path)
    _write_manifest(out, argv, config, None, outputs)
    if csi is CsiMode.PERFECT:
        regions = optimality_regions(config)
        print(f"tight regions (lower = upper): {_format_regions(regions)}")
    else:
        print(f"{csi.value} CSI: achievability only, no converse emitted")
    print(f"wrote {len(table.rows)} rows to {out}")
    return EXIT_OK


def _build_allocation(config, library):
    mu = config.frac_cache
    if mu == Fraction(1, config.num_ens):
        return split_placement(library, config)
    if mu == 1:
        return full_placement(library, config)
    return shared_placement(library, config)


_SCHEME_CSI = {
    Scheme.ZERO_FORCING: CsiMode.PERFECT,
    Scheme.IA_XCHANNEL_2X2: CsiMode.PERFECT,
    Scheme.HYBRID_SHARE: CsiMode.PERFECT,
    Scheme.TDMA: CsiMode.NO_CSI,
}


def cmd_simulate(args, argv: list[str]) -> int:
    mu = as_fraction(args.mu)
    config = validate_config(args.m, args.k, args.n if args.n else args.k,
                             mu, args.l)
    library = FileLibrary.random(config, seed=args.seed)
    allocation = _build_allocation(config, library)
    scheme = Scheme(args.scheme)
    demand = DemandVector.worst_case(config)
    snr_grid = [float(s) for s in args.snr_grid.split(",")]
    trials = run_campaign(config, allocation, scheme, demand, snr_grid,
                          args.trials, args.seed, workers=args.workers)
    estimate = estimate_ndt(trials)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["snr_db", "trials", "mean_sum_rate", "mean_delta"])
        for snr in snr_grid:
            at_snr = [t for t in trials if t.snr_db == snr]
            writer.writerow([
                repr(float(snr)),
                len(at_snr),
                repr(float(np.mean([t.achieved_sum_rate for t in at_snr]))),
                repr(float(np.mean([t.delivery_time_per_bit for t in at_snr]))),
            ])

    analytic_lower = ndt_lower_bound(config, mu)[0]
    csi = _SCHEME_CSI[scheme]
    try:
        analytic_upper = convex_envelope(
            achievable_points(config, csi)
        ).value_at(mu)
    except (UnsupportedError, RangeError):
        analytic_upper = None
    summary = {
        "scheme": scheme.value,
        "mu": str(mu),
        "snr_grid_db": snr_grid,
        "trials_per_snr": args.trials,
        "master_seed": args.seed,
        "dof_estimate": estimate.dof_estimate,
        "ndt_estimate": estimate.ndt_estimate,
        "fit_residual": estimate.fit_residual,
        "analytic": {
            "csi_mode": csi.value,
            "ndt_lower_bound": str(analytic_lower),
            "ndt_achievable": str(analytic_upper) if analytic_upper is not None else None,
        },
    }
    summary_path = out.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                            encoding="utf-8")
    _write_manifest(out, argv, config, args.seed, [out, summary_path])
    print(
        f"{scheme.value}: dof estimate {estimate.dof_estimate:.4f}, "
        f"ndt estimate {estimate.ndt_estimate:.4f} "
        f"(analytic achievable {analytic_upper})"
    )
    return EXIT_OK


def cmd_verify_converse(args, argv: list[str]) -> int:
    config = validate_config(args.m, args.k, args.n if args.n else args.k,
                             Fraction(1), args.l)
    if args.ell == "all":
        ells = None
    else:
        ells = [int(args.ell)]
        limit = min(config.num_ens, config.num_users)
        if not 1 <= ells[0] <= limit:
            raise RangeError(f"ell {ells[0]} outside {{1..{limit}}}")
    reports = verify_converse(config, ells, trials=args.trials, seed=args.seed)
    tolerances = {
        "reconstruction": args.tol_reconstruction,
        "logdet_oracle": args.tol_logdet,
        "noise_cov": args.tol_noise_cov,
    }
    entries = []
    all_pass = True
    for rep in reports:
        ok = report_passes(
            rep,
            reconstruction_tol=tolerances["reconstruction"],
            logdet_tol=tolerances["logdet_oracle"],
            noise_tol=tolerances["noise_cov"],
        )
        all_pass = all_pass and ok
        entries.append({
            "ell": rep.ell,
            "trials": rep.trials,
            "lambda_max": rep.lambda_max,
            "max_reconstruction_residual": rep.max_reconstruction_residual,
            "max_logdet": rep.max_logdet,
            "max_logdet_oracle_error": rep.max_logdet_oracle_error,
            "noise_cov_error": rep.noise_cov_error,
            "noise_cov_samples": rep.noise_cov_samples,
            "pass": ok,
        })
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report_doc = {
        "num_ens": config.num_ens,
        "num_users": config.num_users,
        "master_seed": args.seed,
        "tolerances": tolerances,
        "checks": entries,
        "pass": all_pass,
    }
    out.write_text(json.dumps(report_doc, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    _write_manifest(out, argv, config, args.seed, [out])
    for entry in entries:
        status = "pass" if entry["pass"] else "FAIL"
        print(
            f"ell={entry['ell']}: reconstruction "
            f"{entry['max_reconstruction_residual']:.3e}, logdet oracle "
            f"{entry['max_logdet_oracle_error']:.3e}, noise cov "
            f"{entry['noise_cov_error']:.3e} [{status}]"
        )
    return EXIT_OK if all_pass else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgecache",
        description="Latency-storage tradeoffs of cache-aided wireless networks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_bounds = sub.add_parser("bounds", help="sweep the exact tradeoff curves")
    p_bounds.add_argument("--m", type=int, required=True, help="number of ENs")
    p_bounds.add_argument("--k", type=int, required=True, help="number of users")
    p_bounds.add_argument("--n", type=int, default=None,
                          help="library size (default: K)")
    p_bounds.add_argument("--l", type=int, default=1200,
                          help="file size in bits (default: 1200)")
    p_bounds.add_argument("--csi", choices=[m.value for m in CsiMode],
                          default="perfect")
    p_bounds.add_argument("--grid-step", default=None,
                          help="rational step p/q (default: 1/(12*M*K))")
    p_bounds.add_argument("--out", required=True, help="output CSV path")
    p_bounds.add_argument("--json", action="store_true",
                          help="also write a JSON copy of the table")
    p_bounds.set_defaults(handler=cmd_bounds)

    p_sim = sub.add_parser("simulate", help="run a Monte-Carlo delivery campaign")
    p_sim.add_argument("--m", type=int, required=True)
    p_sim.add_argument("--k", type=int, required=True)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--l", type=int, default=1200)
    p_sim.add_argument("--mu", required=True, help="fractional cache size p/q")
    p_sim.add_argument("--scheme", choices=[s.value for s in Scheme],
                       required=True)
    p_sim.add_argument("--snr-grid",
                       default=",".join(f"{s:g}" for s in DEFAULT_SNR_GRID_DB),
                       help="comma-separated dB values")
    p_sim.add_argument("--trials", type=int, default=DEFAULT_TRIALS_PER_SNR,
                       help="trials per SNR point")
    p_sim.add_argument("--seed", type=int, required=True,
                       help="master seed (required for reproducibility)")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.set_defaults(handler=cmd_simulate)

    p_ver = sub.add_parser("verify-converse",
                           help="check the converse identities numerically")
    p_ver.add_argument("--m", type=int, required=True)
    p_ver.add_argument("--k", type=int, required=True)
    p_ver.add_argument("--n", type=int, default=None)
    p_ver.add_argument("--l", type=int, default=1200)
    p_ver.add_argument("--ell", default="all",
                       help="'all' or a single cut parameter")
    p_ver.add_argument("--trials", type=int, default=1000)
    p_ver.add_argument("--seed", type=int, required=True)
    p_ver.add_argument("--tol-reconstruction", type=float,
                       default=RECONSTRUCTION_TOL)
    p_ver.add_argument("--tol-logdet", type=float, default=LOGDET_ORACLE_TOL)
    p_ver.add_argument("--tol-noise-cov", type=float, default=NOISE_COV_TOL)
    p_ver.add_argument("--out", required=True, help="output JSON path")
    p_ver.set_defaults(handler=cmd_verify_converse)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.handler(args, argv)
    except (FeasibilityError, DemandError, UnsupportedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ArgumentError, RangeError, InsufficientDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EdgeCacheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED


if __name__ == "__main__":
    sys.exit(main())
