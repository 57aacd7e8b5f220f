"""Command-line entry point: ``msk {solve,phase,covariance,parisi,simulate,verify}``.

Exit status: 0 on success, 1 on a domain error (error class name on stderr),
2 on a usage error or an unreadable model file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .errors import MSKError
from .model import ModelParams, SpeciesStructure
from .parallel import ordered_map

SCHEMA_VERSION = 1
PHASE_COLUMNS = ("beta", "h", "beta_c", "beta_0", "beta_at", "region", "conjectural")


class UsageError(Exception):
    pass


def parse_range(text: str) -> np.ndarray:
    """``a:b:n`` -> n evenly spaced points from a to b inclusive."""
    try:
        a, b, n = text.split(":")
        a, b, n = float(a), float(b), int(n)
    except ValueError as exc:
        raise UsageError(f"range must look like a:b:n, got {text!r}") from exc
    if not (a <= b and n >= 1):
        raise UsageError(f"range needs a <= b and n >= 1, got {text!r}")
    return np.array([a]) if n == 1 else np.linspace(a, b, n)


def _vector(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _clean(obj):
    """JSON-safe copy: numpy to builtins, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("Infinity" if x > 0 else "-Infinity" if x < 0 else "NaN")
    return obj


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_output(text: str, path: str | None) -> None:
    """Write to ``path`` atomically (temp file in the same directory, then rename); else stdout."""
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_doc(args, result) -> str:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output")}
    doc = {"schema_version": SCHEMA_VERSION, "command": args.command,
           "config": config, "result": result}
    return json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n"


def _load_model(args) -> SpeciesStructure:
    path = Path(args.model)
    if not path.is_file():
        raise UsageError(f"model file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read model file {path}: {exc}") from exc
    if not isinstance(data, dict) or "lambda" not in data or "delta2" not in data:
        raise UsageError(f"model file {path} needs keys 'lambda' and 'delta2'")
    return SpeciesStructure.from_dict(data)


def _params(args) -> ModelParams:
    try:
        return ModelParams(args.beta, args.h)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_solve(args) -> str:
    from . import rs_solver

    s, p = _load_model(args), _params(args)
    if args.scan:
        roots = rs_solver.grid_scan_roots(s, p, args.grid, args.tol)
        result = {"roots": [r.to_dict() for r in roots], "n_roots": len(roots)}
    else:
        result = rs_solver.solve(s, p, args.method, args.tol).to_dict()
    return _json_doc(args, result)


def _phase_row(job):
    from .spectral_phase import classify_phase

    s, beta, h = job
    pt = classify_phase(s, ModelParams(beta, h))
    return (pt.beta, pt.h, pt.beta_c, pt.beta_0, pt.beta_at, pt.region.value, pt.conjectural)


def cmd_phase(args) -> str:
    s = _load_model(args)
    betas, hs = parse_range(args.beta_range), parse_range(args.h_range)
    if betas[0] < 0 or hs[0] < 0:
        raise UsageError("beta and h ranges must be nonnegative")
    jobs = [(s, float(b), float(h)) for b in betas for h in hs]
    rows = sorted(ordered_map(_phase_row, jobs, args.threads), key=lambda r: (r[0], r[1]))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PHASE_COLUMNS)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def cmd_covariance(args) -> str:
    from . import covariance, rs_solver, spectral_phase

    s, p = _load_model(args), _params(args)
    sol = rs_solver.solve(s, p)
    r, a = covariance.stability_margins(s, sol, p.beta)
    result = {"solution": sol.to_dict(),
              "stability": {"beta2_rho_gamma": r, "beta2_abscissa_gamma_p": a,
                            "beta_at": spectral_phase.beta_at(s, sol)}}
    result["covariance"] = covariance.sigma_closed_form(s, sol, p.beta).to_dict()
    return _json_doc(args, result)


def cmd_parisi(args) -> str:
    from . import parisi, rs_solver

    s, p = _load_model(args), _params(args)
    sol = rs_solver.solve(s, p)
    if args.q:
        levels = [_vector(x) for x in args.q]
        if any(len(v) != s.m for v in levels):
            raise UsageError(f"each --q level needs {s.m} entries")
        zeta = _vector(args.zeta) if args.zeta else []
        if args.k is not None and len(levels) != args.k + 1:
            raise UsageError(f"--k {args.k} needs {args.k + 1} --q levels")
        if len(zeta) != len(levels) - 1:
            raise UsageError(f"{len(levels)} q levels need {len(levels) - 1} zeta values")
        try:
            seqs = parisi.ParisiSequences.from_inner(zeta, levels)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        if args.k not in (None, 0) or args.zeta:
            raise UsageError("k > 0 needs explicit --q levels")
        seqs = parisi.ParisiSequences.replica_symmetric(sol.q)
    value = parisi.evaluate_parisi(s, p, seqs, args.nodes)
    result = {"k": seqs.k, "zeta": seqs.zeta, "q": seqs.qseq, "value": value,
              "rs_solution": sol.to_dict(), "clt": parisi.rs_value(s, p, sol).to_dict()}
    return _json_doc(args, result)


def cmd_simulate(args) -> str:
    from .simulator import exact_gibbs, mcmc_gibbs, overlap_moments, sample_disorder, sample_seeds

    s, p = _load_model(args), _params(args)
    if args.N < 1 or args.samples < 1:
        raise UsageError("--N and --samples must be positive")
    method = "mcmc" if args.mcmc else "exact"
    kw = {"sweeps": args.sweeps, "n_replicas": args.replicas} if args.mcmc else None
    om = overlap_moments(s, p, None, args.N, args.samples, args.seed, method,
                         args.threads, kw)
    d = sample_disorder(s, args.N, int(sample_seeds(args.seed, 1)[0]))
    first = (mcmc_gibbs(d, p, seed=int(d.seed) % 2 ** 32, **kw) if args.mcmc else exact_gibbs(d, p))
    result = {"overlap_moments": om.to_dict(), "first_sample": first.summary(),
              "N_times_U": [(args.N * u).tolist() for u in om.U]}
    return _json_doc(args, result)


def cmd_verify(args) -> str:
    from .verify import run_all

    if args.model is not None:
        _load_model(args)
    only = {int(x) for x in args.only.split(",")} if args.only else None
    results = run_all(args.quick, only)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("id", "name", "passed", "detail"))
    for r in results:
        w.writerow((r.id, r.name, _fmt(r.passed), r.detail))
    args._all_passed = all(r.passed for r in results)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="msk", description="Multi-species SK model toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, model_required=True, point=True):
        p.add_argument("--model", required=model_required, help="model JSON file")
        p.add_argument("--output", help="write here (atomically) instead of stdout")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $MSK_THREADS or all cores)")
        if point:
            p.add_argument("--beta", type=float, required=True)
            p.add_argument("--h", type=float, default=0.0)

    p = sub.add_parser("solve", help="RS fixed point")
    common(p)
    p.add_argument("--method", choices=("picard", "newton", "auto"), default="auto")
    p.add_argument("--scan", action="store_true", help="grid census of all roots (m <= 3)")
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--tol", type=float, default=1e-12)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("phase", help="phase-diagram sweep as CSV")
    common(p, point=False)
    p.add_argument("--beta-range", required=True, help="a:b:n")
    p.add_argument("--h-range", required=True, help="a:b:n")
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("covariance", help="asymptotic overlap covariance")
    common(p)
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser("parisi", help="Parisi functional and CLT parameters")
    common(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--zeta", help="comma-separated zeta_1..zeta_k")
    p.add_argument("--q", action="append", help="one interior q level (comma-separated per species); repeat")
    p.add_argument("--nodes", type=int, default=None, help="Gauss-Hermite nodes per level")
    p.set_defaults(func=cmd_parisi)

    p = sub.add_parser("simulate", help="finite-N overlap moments")
    common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mcmc", action="store_true")
    p.add_argument("--sweeps", type=int, default=20_000)
    p.add_argument("--replicas", type=int, default=4)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="acceptance battery as pass/fail CSV")
    common(p, model_required=False, point=False)
    p.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p.add_argument("--only", help="comma-separated criterion ids")
    p.set_defaults(func=cmd_verify)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads is not None and args.threads < 1:
        print("msk: error: --threads must be >= 1", file=sys.stderr)
        return 2
    try:
        text = args.func(args)
        write_output(text, args.output)
    except UsageError as exc:
        print(f"msk: error: {exc}", file=sys.stderr)
        return 2
    except MSKError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.command == "verify" and not getattr(args, "_all_passed", True):
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
