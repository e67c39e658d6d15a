"""Command-line front door.

One JSON config per run; artifacts are written under an output prefix and
are byte-identical for identical (config, seed). Exit codes: 0 success,
2 validation error, 3 numeric failure; every failure emits a JSON error
record on stderr instead of a stack trace.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .chidensity import (
    WeightedChiSquare,
    weighted_density,
    weighted_norm_tail,
    weighted_shell_probability,
    density_lower_bound,
    density_upper_bound,
)
from .errors import NumericError, ValidationError
from .integraltest import classify, equivalence_report, fluctuation_diagnostic
from .montecarlo import (
    SeededStream,
    empirical_limsup,
    estimate_tail,
    per_rep_limsup_maxima,
    simulate_paths_parallel,
)
from .regularize import (
    derived_constants,
    shell_lower_bound,
    shell_width,
    tail_lower_bound,
    tail_upper_bound,
)
from .sequences import limit_and_convergence_report
from .serialize import (
    dump_json,
    parse_grid,
    parse_matrix,
    parse_phi,
    parse_sequence,
    parse_weights_or_matrix,
    spectrum_csv_rows,
    write_csv,
    write_json,
)
from .spectral import eigh

COMMANDS = (
    "density",
    "tail",
    "bounds-verify",
    "integral-test",
    "sequence-info",
    "simulate",
)


@dataclass(frozen=True)
class RunConfig:
    """One run: a subcommand, its JSON config file, and output settings."""

    command: str
    input: str
    output: str
    seed: int = 0
    format: str = "csv"
    threads: int = 1

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ValidationError(f"format must be csv or json, got {self.format!r}")


def _load_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"config is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    return cfg


def _threads(args) -> int:
    """Thread count from --threads, overridden by GAUSSLIL_THREADS if set."""
    env = os.environ.get("GAUSSLIL_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(
                f"GAUSSLIL_THREADS must be an integer, got {env!r}"
            ) from None
    return max(1, args.threads)


def _spectrum_from_cfg(cfg: dict):
    if "matrix" in cfg:
        return eigh(parse_matrix(cfg["matrix"]))
    if "weights" in cfg:
        w = sorted((float(x) for x in cfg["weights"]), reverse=True)
        return eigh(np.diag(w))
    raise ValidationError("config needs either 'weights' or 'matrix'")


def _emit_table(out: Path, name: str, header: list[str], rows, fmt: str, summary: dict):
    if fmt == "csv":
        path = out.parent / f"{out.name}_{name}.csv"
        write_csv(path, header, rows)
        summary.setdefault("artifacts", []).append(path.name)
    else:
        summary[name] = [dict(zip(header, (_jsonable(v) for v in row))) for row in rows]


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v)
    return v


def _cmd_density(cfg: dict, out: Path, fmt: str, seed: int, threads: int) -> dict:
    w = parse_weights_or_matrix(cfg)
    zs = parse_grid(cfg.get("z", {"min": 0.05, "max": 50.0, "count": 200}), "z")
    vals = weighted_density(w, zs)
    rows = [(float(z), float(v)) for z, v in zip(np.atleast_1d(zs), np.atleast_1d(vals))]
    summary = {"weights": list(w.weights), "count": len(rows)}
    _emit_table(out, "density", ["z", "density"], rows, fmt, summary)
    return summary


def _cmd_tail(cfg: dict, out: Path, fmt: str, seed: int, threads: int) -> dict:
    w = parse_weights_or_matrix(cfg)
    ts = parse_grid(cfg.get("t", {"min": 0.5, "max": 8.0, "count": 40}), "t")
    mc = cfg.get("monte_carlo")
    s = eigh(np.diag(np.asarray(w.weights))) if mc else None
    header = ["t", "tail"]
    rows = []
    for i, t in enumerate(np.atleast_1d(ts)):
        row = [float(t), weighted_norm_tail(w, float(t))]
        if mc:
            est = estimate_tail(
                s, float(t), int(mc.get("samples", 100_000)),
                SeededStream(seed, stream_id=i),
            )
            row.extend([est.p_hat, est.stderr, est.low_count])
        rows.append(tuple(row))
    if mc:
        header.extend(["mc_p_hat", "mc_stderr", "mc_low_count"])
    summary = {"weights": list(w.weights), "count": len(rows)}
    _emit_table(out, "tail", header, rows, fmt, summary)
    return summary


def _cmd_bounds_verify(cfg: dict, out: Path, fmt: str, seed: int, threads: int) -> dict:
    s = _spectrum_from_cfg(cfg)
    w = WeightedChiSquare.from_spectrum(s)
    lam1 = s.lambda1
    dc = derived_constants(s.dim)
    zs = parse_grid(
        cfg.get("z", {"min": 0.05 * lam1**2, "max": 60.0 * lam1**2, "count": 120}),
        "z",
    )
    density_rows = []
    density_viol = 0
    for z in np.atleast_1d(zs):
        z = float(z)
        h = float(weighted_density(w, z))
        ub = density_upper_bound(s, z)
        lb, thresh = density_lower_bound(s, z)
        up_ok = h <= ub * (1.0 + 1e-7)
        lo_ok = True if (z < thresh) else (h >= lb * (1.0 - 1e-7))
        density_viol += (not up_ok) + (not lo_ok)
        density_rows.append((z, h, ub, lb, thresh, up_ok, lo_ok))

    t_default = {"min": dc.C1t * lam1, "max": 12.0 * lam1, "count": 8}
    tail_rows = []
    tail_viol = 0
    skipped = 0
    if dc.C1t * lam1 <= 12.0 * lam1 or "t" in cfg:
        for t in np.atleast_1d(parse_grid(cfg.get("t", t_default), "t")):
            t = float(t)
            if t < dc.C1t * lam1:
                skipped += 1
                continue
            tail = weighted_norm_tail(w, t)
            lo = tail_lower_bound(s, t)
            hi = tail_upper_bound(s, t)
            shell = weighted_shell_probability(w, t, t + shell_width(s, t))
            shell_lo = shell_lower_bound(s, t)
            sandwich_ok = lo * (1.0 - 1e-7) <= tail <= hi * (1.0 + 1e-7)
            shell_ok = shell >= shell_lo * (1.0 - 1e-7)
            tail_viol += (not sandwich_ok) + (not shell_ok)
            tail_rows.append((t, tail, lo, hi, shell, shell_lo, sandwich_ok, shell_ok))
    else:
        skipped = -1  # whole default window empty for this dimension

    summary = {
        "dim": s.dim,
        "d1": s.d1,
        "eigenvalues": [float(x) for x in s.eigenvalues],
        "density_violations": density_viol,
        "tail_violations": tail_viol,
        "skipped_t_below_validity": skipped,
    }
    _emit_table(
        out,
        "density_bounds",
        ["z", "density", "upper_bound", "lower_bound", "lower_threshold", "upper_ok", "lower_ok"],
        density_rows,
        fmt,
        summary,
    )
    _emit_table(
        out,
        "tail_bounds",
        ["t", "tail", "lower_bound", "upper_bound", "shell", "shell_lower_bound", "sandwich_ok", "shell_ok"],
        tail_rows,
        fmt,
        summary,
    )
    return summary


def _cmd_integral_test(cfg: dict, out: Path, fmt: str, seed: int, threads: int) -> dict:
    if "phi" not in cfg or "sequence" not in cfg:
        raise ValidationError("integral-test config needs 'phi' and 'sequence'")
    phi = parse_phi(cfg["phi"])
    seq = parse_sequence(cfg["sequence"])
    d1 = int(cfg.get("d1", seq.limit_spectrum().d1))
    diag = classify(phi, seq, d1, n_terms=int(cfg.get("n_terms", 5000)))
    rows = [
        (int(n), float(t), float(p))
        for n, t, p in zip(diag.ns, diag.terms, diag.partial_sums)
    ]
    summary = {
        "verdict": diag.verdict,
        "method": diag.method,
        "note": diag.note,
        "d1": d1,
        "partial_sum": float(diag.partial_sums[-1]) if diag.partial_sums.size else 0.0,
    }
    if cfg.get("equivalence"):
        eq_cfg = cfg["equivalence"]
        rep = equivalence_report(
            phi,
            seq,
            alpha=float(eq_cfg.get("alpha", 1.0)),
            K=int(eq_cfg.get("K", 200)),
            k_min=int(eq_cfg.get("k_min", 1)),
            d1=d1,
        )
        summary["equivalence"] = {
            "bracketing_low": rep.bracketing_low,
            "bracketing_high": rep.bracketing_high,
            "full_verdict": rep.full_verdict,
            "subseq_verdict": rep.subseq_verdict,
            "verdicts_agree": rep.verdicts_agree,
        }
    _emit_table(out, "terms", ["index", "term", "partial_sum"], rows, fmt, summary)
    return summary


def _cmd_sequence_info(cfg: dict, out: Path, fmt: str, seed: int, threads: int) -> dict:
    if "sequence" not in cfg:
        raise ValidationError("sequence-info config needs 'sequence'")
    seq = parse_sequence(cfg["sequence"])
    conv = limit_and_convergence_report(seq, int(cfg.get("N", 10_000)))
    summary = {
        "kind": seq.kind,
        "dim": seq.dim,
        "limit": conv["limit"],
        "convergence": [
            {
                "n": r["n"],
                "matrix_gap": r["matrix_gap"],
                "eigenvalue_gaps": r["eigenvalue_gaps"],
            }
            for r in conv["checkpoints"]
        ],
    }
    if seq.kind == "truncated":
        ns = [int(x) for x in np.geomspace(1, int(cfg.get("N", 10_000)), 20)]
        summary["cutoff_window"] = seq.cutoff.window_report(sorted(set(ns)))
    if "alpha" in cfg:
        rep = fluctuation_diagnostic(
            seq,
            float(cfg["alpha"]),
            cfg.get("deltas", [0.1, 0.5, 1.0]),
            int(cfg.get("K", 50)),
        )
        summary["fluctuation"] = {
            "alpha": rep.alpha,
            "label": rep.label,
            "delta_k": rep.delta_k_values.tolist(),
            "partial_sums": {str(d): ps[-1] for d, ps in rep.partial_sums.items()},
            "last_decade_fraction": {
                str(d): f for d, f in rep.last_decade_fraction.items()
            },
        }
    s = seq.limit_spectrum()
    _emit_table(
        out,
        "limit_spectrum",
        ["index", "eigenvalue", "group_id"],
        spectrum_csv_rows(s),
        fmt,
        summary,
    )
    return summary


def _cmd_simulate(cfg: dict, out: Path, fmt: str, seed: int, threads: int) -> dict:
    if "sequence" not in cfg:
        raise ValidationError("simulate config needs 'sequence'")
    seq = parse_sequence(cfg["sequence"])
    if "boundaries" in cfg:
        phis = [parse_phi(p) for p in cfg["boundaries"]]
    elif "phi" in cfg:
        phis = [parse_phi(cfg["phi"])]
    else:
        raise ValidationError("simulate config needs 'phi' or 'boundaries'")
    n_max = int(cfg.get("n_max", 100_000))
    reps = int(cfg.get("reps", 16))
    records = simulate_paths_parallel(
        seq, phis[0], n_max, reps, SeededStream(seed), threads=threads
    )
    maxima = per_rep_limsup_maxima(records)
    summary = {
        "n_max": n_max,
        "reps": reps,
        "empirical_limsup": empirical_limsup(records),
        "per_rep_limsup_range": [float(maxima.min()), float(maxima.max())],
    }
    exceedance = []
    for b, phi in enumerate(phis):
        count = 0
        rows = []
        for rec in records:
            for n, ratio, _, _ in rec.checkpoints:
                lam1 = seq.spectrum_at(n).lambda1
                exceeded = ratio > phi.value(n, lam1)
                count += exceeded
                rows.append((rec.rep, n, ratio, exceeded))
        exceedance.append(int(count))
        _emit_table(
            out, f"paths_b{b}", ["rep", "n", "ratio", "exceeded"], rows, fmt, summary
        )
    summary["exceedance_counts"] = exceedance
    return summary


_HANDLERS = {
    "density": _cmd_density,
    "tail": _cmd_tail,
    "bounds-verify": _cmd_bounds_verify,
    "integral-test": _cmd_integral_test,
    "sequence-info": _cmd_sequence_info,
    "simulate": _cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gausslil",
        description="Gaussian norm tails, eigenvalue-product bounds, and "
        "upper-lower class integral tests",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", required=True, help="output path prefix")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--threads", type=int, default=1)
    return parser


def run(config: RunConfig) -> int:
    cfg = _load_config(config.input)
    out = Path(config.output)
    summary = _HANDLERS[config.command](
        cfg, out, config.format, config.seed, config.threads
    )
    payload = {
        "version": __version__,
        "command": config.command,
        "seed": config.seed,
        "format": config.format,
    }
    payload.update(summary)
    write_json(out.parent / f"{out.name}.json", payload)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(
            command=args.command,
            input=args.config,
            output=args.out,
            seed=args.seed,
            format=args.format,
            threads=_threads(args),
        )
        return run(config)
    except ValidationError as e:
        sys.stderr.write(
            dump_json({"version": __version__, "error": {"type": "validation", "message": str(e)}})
        )
        return 2
    except NumericError as e:
        sys.stderr.write(
            dump_json({"version": __version__, "error": {"type": "numeric", "message": str(e)}})
        )
        return 3
    except Exception as e:  # never a bare stack trace
        sys.stderr.write(
            dump_json(
                {
                    "version": __version__,
                    "error": {"type": type(e).__name__, "message": str(e)},
                }
            )
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
