"""Command-line interface.

Exit codes: 0 success, 2 invalid input or configuration, 3 accuracy failure
(quadrature or scan non-convergence, failed identity check).  Errors are
reported as one JSON line on stderr.
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

from . import __version__
from .correlations import CorrelationQuery, two_point_bounds, two_point_delta, two_point_exact, two_point_lebesgue
from .growth import GrowthScan, empirical_index, lower_index_bound, pam_exact_index, upper_index_bound
from .identities import verify_identities
from .measures import Atom, ExpDensity, Lebesgue, measure_to_json, parse_measure
from .moments import (
    ModeError,
    ModelParams,
    delta_prime_divergence_check,
    pth_moment_upper,
    second_moment_exact,
    second_moment_lower,
)
from .quadrature import AccuracyError, QuadConfig

OUTPUT_DIR_ENV = "SHE_MOMENTS_OUTPUT_DIR"

# formula identifiers for the `eq` column
EQ = {
    "exact": "E[u^2] = J0^2 + (J0^2 * K) + varsigma^2 H",
    "upper": "||u||_p^2 <= c_p (J0^2 + (J0^2 * K_p)) + vbar^2 H_p",
    "lower": "E[u^2] >= J0^2 + (J0^2 * K_low) + vlow^2 H_low",
    "tp_exact": "E[u u'] = J0 J0' + lam^2 int int (varsigma^2 + E[u^2]) G G'",
    "tp_lebesgue": "E[u u'] = 1 + (1 + varsigma^2) [e^{..} erfc(..) - erfc(..)] (constant data)",
    "tp_delta": "E[u u'] = G G' - varsigma^2 erfc(..) + (lam^2/4nu G_{nu/2} + varsigma^2) e^{..} erfc(..) (point mass)",
    "tp_lower": "E[u u'] >= J0 J0' + I(vlow, lip_lower)",
    "tp_upper": "E[u u'] <= J0 J0' + I(vbar, lip_upper)",
    "growth": "s(t, alpha) = log E|u(t, alpha t)|^p / t",
    "delta_prime": "I(eps) = int_eps^t int G^2 (d/dx G)^2",
    "mc": "mean of u(t,x)^p over replications",
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    text = text.strip()
    if text.count(":") == 2 and "," not in text:
        a, b, n = text.split(":")
        return [float(v) for v in np.linspace(float(a), float(b), int(n))]
    return [float(v) for v in text.split(",") if v.strip()]


def _add_model(p: argparse.ArgumentParser):
    g = p.add_argument_group("model")
    g.add_argument("--model", choices=["pam", "quasi-linear", "bounds"], default="pam")
    g.add_argument("--nu", type=float, default=1.0)
    g.add_argument("--lambda", dest="lam", type=float, default=1.0)
    g.add_argument("--varsigma", type=float, default=0.0)
    g.add_argument("--lip-upper", type=float)
    g.add_argument("--vbar", type=float, default=0.0)
    g.add_argument("--lip-lower", type=float)
    g.add_argument("--vlow", type=float, default=0.0)
    g.add_argument("--p", type=int, default=2)
    g.add_argument("--next-even", action="store_true", help="round an odd p up to the next even order")


def _add_io(p: argparse.ArgumentParser, fmt: str):
    p.add_argument("--output", "-o", help=f"output file (relative paths resolve against ${OUTPUT_DIR_ENV})")
    p.add_argument("--format", choices=["csv", "json"], default=fmt)
    p.add_argument("--manifest", help="manifest path (default: <output>.manifest.json)")
    p.add_argument("--rel-tol", type=float, default=1e-9)
    p.add_argument("--abs-tol", type=float, default=1e-13)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="she-moments", description="Moments of the stochastic heat equation with measure initial data.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("moments", help="second moments (exact or bounds) on a (t, x) grid")
    _add_model(m)
    m.add_argument("--measure", default="delta")
    m.add_argument("--t", required=True, type=_floats)
    m.add_argument("--x", default=[0.0], type=_floats)
    _add_io(m, "csv")

    tp = sub.add_parser("twopoint", help="two-point correlations")
    _add_model(tp)
    tp.add_argument("--measure", default="lebesgue")
    tp.add_argument("--t", required=True, type=_floats)
    tp.add_argument("--tau", type=_floats, help="defaults to t (equal times)")
    tp.add_argument("--x", default=[0.0], type=_floats)
    tp.add_argument("--y", default=[0.0], type=_floats)
    tp.add_argument("--method", choices=["auto", "exact", "lebesgue", "delta", "bounds"], default="auto")
    _add_io(tp, "csv")

    gr = sub.add_parser("growth", help="empirical growth index scan")
    _add_model(gr)
    gr.add_argument("--measure", default="delta")
    gr.add_argument("--t-grid", type=_floats, default=[50.0, 100.0, 150.0, 200.0, 300.0, 400.0, 500.0])
    gr.add_argument("--alpha-range", type=_floats, default=[0.05, 3.0])
    gr.add_argument("--bracket-tol", type=float, default=0.02)
    gr.add_argument("--workers", type=int, default=1)
    _add_io(gr, "json")

    vi = sub.add_parser("verify-identities", help="closed-form integral identities against quadrature")
    vi.add_argument("--suite", choices=["appendix"], default="appendix")
    vi.add_argument("--draws", type=int, default=20)
    vi.add_argument("--seed", type=int, default=20240601)
    vi.add_argument("--tol", type=float, default=1e-6)
    _add_io(vi, "json")

    mc = sub.add_parser("mc-validate", help="Monte Carlo estimate against the exact moment")
    mc.add_argument("--config", help="MCConfig JSON file; flags below are ignored when given")
    mc.add_argument("--nu", type=float, default=1.0)
    mc.add_argument("--lambda", dest="lam", type=float, default=1.0)
    mc.add_argument("--varsigma", type=float, default=0.0)
    mc.add_argument("--measure", default="lebesgue")
    mc.add_argument("--half-width", type=float, default=5.0)
    mc.add_argument("--dx", type=float, default=0.02)
    mc.add_argument("--dt", type=float, default=1e-4)
    mc.add_argument("--t-end", type=float)
    mc.add_argument("--replications", type=int, default=1000)
    mc.add_argument("--seed", type=int, default=1)
    mc.add_argument("--buffer-sigmas", type=float, default=6.0)
    mc.add_argument("--workers", type=int, default=1)
    mc.add_argument("--backend", choices=["compiled", "python"])
    mc.add_argument("--p", type=int, default=2)
    mc.add_argument("--t", type=float, default=0.5)
    mc.add_argument("--x", type=float, default=0.0)
    mc.add_argument("--rel-window", type=float, default=0.05)
    _add_io(mc, "json")

    dp = sub.add_parser("delta-prime-demo", help="divergence of the second moment for derivative-of-delta data")
    dp.add_argument("--nu", type=float, default=1.0)
    dp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    dp.add_argument("--t", type=float, default=1.0)
    dp.add_argument("--x", type=float, default=0.0)
    dp.add_argument("--eps", type=_floats, default=[1e-2, 1e-3, 1e-4, 1e-5])
    _add_io(dp, "json")

    rp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--output", "-o", help="write to this path instead of the recorded one")
    return ap


# ---------------------------------------------------------------------------


def _params(a) -> ModelParams:
    if a.p % 2:
        if not a.next_even:
            raise UsageError(f"p={a.p} is odd; moment formulas need even p (use --next-even)")
        a.p += 1
    if a.model == "pam":
        return ModelParams.pam(a.nu, a.lam, a.p)
    if a.model == "quasi-linear":
        return ModelParams.quasi_linear(a.nu, a.lam, a.varsigma, a.p)
    if a.lip_upper is None:
        raise UsageError("--model bounds needs --lip-upper")
    return ModelParams(a.nu, lip_upper=a.lip_upper, vbar=a.vbar, lip_lower=a.lip_lower, vlow=a.vlow, p=a.p)


def _qcfg(a) -> QuadConfig:
    return QuadConfig(rel_tol=a.rel_tol, abs_tol=a.abs_tol)


def _table(columns, rows) -> dict:
    return {"columns": list(columns), "rows": [list(r) for r in rows]}


def cmd_moments(a) -> dict:
    params = _params(a)
    mu = parse_measure(a.measure)
    cfg = _qcfg(a)
    rows = []
    for t in a.t:
        for x in a.x:
            if params.is_quasi_linear and params.p == 2:
                rows.append([t, x, "E[u^2]", second_moment_exact(params, mu, t, x, cfg), EQ["exact"]])
                continue
            if params.lip_lower is not None and params.p == 2:
                rows.append([t, x, "lower E[u^2]", second_moment_lower(params, mu, t, x, cfg), EQ["lower"]])
            rows.append([t, x, f"upper ||u||_{params.p}^2", pth_moment_upper(params, mu, t, x, cfg), EQ["upper"]])
    return _table(["t", "x", "quantity", "value", "eq"], rows)


def _tp_method(a, params, mu, q) -> str:
    if a.method != "auto":
        return a.method
    if not params.is_quasi_linear:
        return "bounds"
    comps = mu.components
    if len(comps) == 1 and isinstance(comps[0], Lebesgue) and comps[0].scale == 1.0:
        return "lebesgue"
    if len(comps) == 1 and isinstance(comps[0], Atom) and comps[0] == Atom(0.0, 1.0) and q.tau == q.t:
        return "delta"
    return "exact"


def cmd_twopoint(a) -> dict:
    params = _params(a)
    mu = parse_measure(a.measure)
    cfg = _qcfg(a)
    taus = a.tau
    rows = []
    for i, t in enumerate(a.t):
        tau_list = [t] if taus is None else taus
        for tau in tau_list:
            for x in a.x:
                for y in a.y:
                    q = CorrelationQuery(t, x, tau, y)
                    how = _tp_method(a, params, mu, q)
                    if how == "lebesgue":
                        rows.append([t, x, tau, y, "E[uu']", two_point_lebesgue(params, q), EQ["tp_lebesgue"]])
                    elif how == "delta":
                        rows.append([t, x, tau, y, "E[uu']", two_point_delta(params, q), EQ["tp_delta"]])
                    elif how == "exact":
                        rows.append([t, x, tau, y, "E[uu']", two_point_exact(params, mu, q, cfg), EQ["tp_exact"]])
                    else:
                        lo, hi = two_point_bounds(params, mu, q, cfg)
                        rows.append([t, x, tau, y, "lower E[uu']", lo, EQ["tp_lower"]])
                        rows.append([t, x, tau, y, "upper E[uu']", hi, EQ["tp_upper"]])
    return _table(["t", "x", "tau", "y", "quantity", "value", "eq"], rows)


def cmd_growth(a) -> dict:
    params = _params(a)
    mu = parse_measure(a.measure)
    if len(a.alpha_range) != 2:
        raise UsageError("--alpha-range needs two values lo,hi")
    scan = GrowthScan(
        t_grid=a.t_grid, alpha_range=tuple(a.alpha_range), p=params.p, bracket_rel_tol=a.bracket_tol, workers=a.workers
    )
    res = empirical_index(params, mu, scan)
    out = json.loads(res.to_json())
    out["eq"] = EQ["growth"]
    out["lower_bound"] = _finite(lower_index_bound(params)) if params.lip_lower is not None else None
    beta = _decay_rate(mu)
    out["beta"] = beta
    if beta is not None and params.vbar == 0:
        out["upper_bound"] = upper_index_bound(params, beta)
        if params.is_quasi_linear and params.p == 2 and params.varsigma == 0 and beta > 0:
            out["reference_exact"] = pam_exact_index(params.nu, params.lam, beta)
    out["rows"] = [list(r) for r in sorted(res.rows)]
    return out


def _finite(v):
    return v if math.isfinite(v) else "inf"


def _decay_rate(mu):
    """Exponential decay rate beta of the data, if it is a single decaying density or compactly supported."""
    comps = mu.components
    if all(isinstance(c, Atom) for c in comps):
        return math.inf
    if len(comps) == 1 and isinstance(comps[0], ExpDensity) and comps[0].rate < 0:
        return -comps[0].rate
    return None


def cmd_verify(a) -> dict:
    rep = verify_identities(draws=a.draws, seed=a.seed, tol=a.tol)
    out = rep.to_dict()
    out["suite"] = a.suite
    return out


def _mc_config(a):
    from .mc import MCConfig, RhoSpec

    if a.config:
        return MCConfig.from_json(Path(a.config).read_text(), workers=a.workers)
    return MCConfig(
        half_width=a.half_width,
        dx=a.dx,
        dt=a.dt,
        t_end=a.t_end if a.t_end is not None else a.t,
        replications=a.replications,
        master_seed=a.seed,
        nu=a.nu,
        rho=RhoSpec("quasi-linear", a.lam, a.varsigma),
        mu=parse_measure(a.measure),
        buffer_sigmas=a.buffer_sigmas,
        workers=a.workers,
    )


def cmd_mc(a) -> dict:
    from .mc import estimate_moment

    cfg = _mc_config(a)
    est = estimate_moment(cfg, a.p, a.t, a.x, backend=a.backend)
    out = est.to_dict()
    out["config"] = cfg.to_dict()
    out["eq"] = EQ["mc"]
    out["p"] = a.p
    params = cfg.rho.model_params(cfg.nu)
    if params is not None and a.p == 2:
        ts = cfg.step_of(a.t) * cfg.dt
        xs = float(cfg.nodes[cfg.node_of(a.x)])
        target = second_moment_exact(params, cfg.mu, ts, xs)
        out["target"] = target
        out["passed"] = est.within(target, 3.0, a.rel_window)
    return out


def cmd_delta_prime(a) -> dict:
    rep = delta_prime_divergence_check(a.nu, a.lam, a.t, a.x, tuple(a.eps))
    return {
        "eq": EQ["delta_prime"],
        "columns": ["eps", "value", "contrast_value"],
        "rows": [[e, v, c] for e, v, c in zip(rep.eps, rep.values, rep.contrast_values)],
        "exponent": rep.exponent,
        "prefactor": rep.prefactor,
        "monotone": rep.monotone,
        "diverges": rep.diverges,
        "contrast_limit": rep.contrast_limit,
        "contrast_extrapolated": rep.contrast_extrapolated,
        "contrast_converges": rep.contrast_converges,
    }


COMMANDS = {
    "moments": cmd_moments,
    "twopoint": cmd_twopoint,
    "growth": cmd_growth,
    "verify-identities": cmd_verify,
    "mc-validate": cmd_mc,
    "delta-prime-demo": cmd_delta_prime,
}


# ---------------------------------------------------------------------------


def _render(result: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result, sort_keys=True, indent=2, default=_jsonable) + "\n"
    if "columns" in result:
        cols, rows = result["columns"], result["rows"]
    elif "checks" in result:
        cols = list(result["checks"][0]) if result["checks"] else ["identity"]
        rows = [[c[k] for k in cols] for c in result["checks"]]
    elif "rows" in result:
        cols, rows = ["alpha", "t", "s_value"], result["rows"]
    else:
        cols = sorted(k for k, v in result.items() if not isinstance(v, (dict, list)))
        rows = [[result[k] for k in cols]]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"not serializable: {type(v)}")


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _resolve_output(path: str | None) -> Path | None:
    if path is None:
        return None
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _gnuplot_stub(data: Path, result: dict) -> str | None:
    cols = result.get("columns")
    if not cols or "value" not in cols:
        if "rows" in result and "alpha_star" in result:
            return f"set datafile separator ','\nset key autotitle columnhead\nplot '{data.name}' using 2:3 with linespoints\n"
        return None
    xcol = cols.index("x") + 1 if "x" in cols else 1
    ycol = cols.index("value") + 1
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        f"plot '{data.name}' using {xcol}:{ycol} with linespoints\n"
    )


def _manifest(args, argv, params_doc) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("output", "manifest", "func")}
    return {
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "resolved": json.loads(json.dumps(d, default=_jsonable)),
        "params": params_doc,
    }


def _error(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def _run(argv: list[str]) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        doc = json.loads(Path(args.manifest).read_text())
        rerun = list(doc["argv"])
        if args.output:
            rerun = _strip_output(rerun) + ["--output", args.output]
        return _run(rerun)
    result = COMMANDS[args.command](args)
    ok = True
    if args.command == "verify-identities":
        ok = result["passed"]
    params_doc = {}
    if hasattr(args, "measure"):
        params_doc["measure"] = measure_to_json(parse_measure(args.measure))
    text = _render(result, args.format)
    out = _resolve_output(args.output)
    manifest = _manifest(args, argv, params_doc)
    if out is None:
        sys.stdout.write(text)
        if args.manifest:
            _atomic_write(_resolve_output(args.manifest), json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    else:
        _atomic_write(out, text)
        mpath = _resolve_output(args.manifest) if args.manifest else out.with_name(out.name + ".manifest.json")
        manifest["output"] = str(out)
        _atomic_write(mpath, json.dumps(manifest, sort_keys=True, indent=2) + "\n")
        if args.format == "csv":
            stub = _gnuplot_stub(out, result)
            if stub:
                _atomic_write(out.with_name(out.name + ".gp"), stub)
    if not ok:
        return _error("AccuracyError", "identity check failed", 3)
    return 0


def _strip_output(argv: list[str]) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--output", "-o"):
            skip = True
            continue
        if tok.startswith("--output="):
            continue
        out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        return _run(argv)
    except AccuracyError as exc:
        return _error(type(exc).__name__, str(exc), 3)
    except (UsageError, ModeError, ValueError, KeyError, FileNotFoundError, NotImplementedError) as exc:
        return _error(type(exc).__name__, str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
