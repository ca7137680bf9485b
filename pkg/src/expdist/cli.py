"""Command line interface: kernels, energy, solve, sweep, verify, export, bench.

Exit codes: 0 success, 1 numerical failure (with partial artifacts where
meaningful), 2 schema/validation violation (nothing written).
Environment: EXPDIST_OUTDIR overrides the output directory, EXPDIST_THREADS
is recorded in artifact metadata (assembly is deterministic and sequential
regardless), EXPDIST_BACKEND selects the kernel backend.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, kernels, serialize
from ._backend import backend_name
from .functional import IntegrandSpec, energy as energy_fn, inverse_energy
from .grid import weight_eval, wirtinger
from .params import ConfigurationError, DistortionParams, DomainError, NumericalError
from .solver import solve, sweep_p


def _outdir(arg):
    base = arg or os.environ.get("EXPDIST_OUTDIR") or "."
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# kernels


_KERNEL_FNS = {
    "big_k_from_mu": lambda pts, aux, par: _plain(kernels.big_k_from_mu(pts)),
    "big_k_vs_bold_k": lambda pts, aux, par: _plain(kernels.big_k_vs_bold_k(pts)),
    "a_p": lambda pts, aux, par: _with_deriv(
        kernels.a_p(pts, par), kernels.a_p_prime(pts, par)),
    "a_p_inverse": lambda pts, aux, par: kernels.a_p_inverse(pts, par),
    "a_tilde_p": lambda pts, aux, par: _with_deriv(
        kernels.a_tilde_p(pts, par), kernels.a_tilde_p_prime(pts, par)),
    "b_p_inverse": lambda pts, aux, par: kernels.b_p_inverse(pts, par),
    "a_p_lambda": lambda pts, aux, par: _with_deriv(
        kernels.a_p_lambda(pts, par), kernels.a_p_lambda_prime(pts, par)),
    "a_p_lambda_inverse": lambda pts, aux, par: kernels.a_p_lambda_inverse(pts, par),
    "v_lambda": lambda pts, aux, par: kernels.v_lambda(pts, aux, par),
    "uniqueness_kernel": lambda pts, aux, par: kernels.uniqueness_kernel(pts, aux, par),
    "ellipticity_A": lambda pts, aux, par: _plain(kernels.ellipticity_ratio_A(pts, par)),
    "r_p": lambda pts, aux, par: _plain(kernels.r_p(pts, par)),
}


def _plain(values):
    from .params import KernelEval

    v = np.asarray(values, dtype=float)
    return KernelEval(v, np.full_like(v, np.nan), np.zeros_like(v))


def _with_deriv(values, derivs):
    from .params import KernelEval

    v = np.asarray(values, dtype=float)
    return KernelEval(v, np.asarray(derivs, dtype=float), np.zeros_like(v))


def _cmd_kernels(args):
    if args.action == "eval":
        if args.fn not in _KERNEL_FNS:
            print(f"unknown kernel fn {args.fn!r}; choices: {sorted(_KERNEL_FNS)}",
                  file=sys.stderr)
            return 2
        par = DistortionParams(args.p, args.lam)
        pts = np.array([float(t) for t in args.at.split(",") if t.strip()])
        aux = args.aux
        ev = _KERNEL_FNS[args.fn](pts, aux, par)
        sys.stdout.write(serialize.kernel_eval_csv(pts, ev))
        return 0
    return _kernels_check()


def _kernels_check():
    """Fast invariant battery; exits nonzero on any failure."""
    failures = []

    def check(name, ok):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    s_grid = np.logspace(-2, 3, 25)
    for p in (0.1, 0.5, 1.0, 2.0, 5.0, 10.0):
        par = DistortionParams(p)
        rt = kernels.a_p_inverse(kernels.a_p(s_grid, par), par).value
        check(f"A_p roundtrip p={p}", np.max(np.abs(rt - s_grid) / s_grid) < 1e-10)
        rt = kernels.b_p_inverse(kernels.a_tilde_p(s_grid, par), par).value
        check(f"B_p roundtrip p={p}", np.max(np.abs(rt - s_grid) / s_grid) < 1e-10)
    for p in (1.0, 2.0):
        par = DistortionParams(p)
        t = np.array([0.1, 1.0, 10.0])
        gap = np.abs(kernels.b_p_inverse(t * t, par).value - kernels.a_p_inverse(t, par).value)
        check(f"B_p(t^2)=A_p(t) p={p}", np.max(gap) < 1e-10)
    for p in (0.1, 1.0, 10.0):
        full, above = kernels.m_p(DistortionParams(p))
        check(f"m_p>1 p={p}", full > 1.0 and above > 1.0)
    check("m_0.01 in (1, 1.1)", 1.0 < kernels.m_p(DistortionParams(0.01))[0] < 1.1)
    for p in (2.0, 3.0, 4.0):
        check(f"R_p(1)=1 p={p}", kernels.r_p(1.0, DistortionParams(p)) == 1.0)
    mu = np.linspace(0.0, 0.999, 400)
    for p in (0.5, 1.0, 2.0):
        err = np.max(kernels.f_identity_rel_error(mu, DistortionParams(p)))
        check(f"F-identity p={p}", err <= 1e-8)
    lam_par = DistortionParams(1.0, 0.7)
    x = np.logspace(-1, 1, 50)
    v = kernels.v_lambda(x, np.full_like(x, 2.0), lam_par).value
    check("v decreasing in x", bool(np.all(np.diff(v) < 0)))
    k = np.logspace(-3, 3, 50)
    v = kernels.v_lambda(np.full_like(k, 1.0), k, lam_par).value
    check("v increasing in k", bool(np.all(np.diff(v) > 0)))
    if failures:
        print(f"{len(failures)} invariant(s) failed", file=sys.stderr)
        return 1
    print("all kernel invariants hold")
    return 0


# ---------------------------------------------------------------------------
# energy / solve / sweep / verify / export


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise serialize.SchemaError(f"file not found: {path}")
    except json.JSONDecodeError as exc:
        raise serialize.SchemaError(f"not valid JSON: {exc}")


def _cmd_energy(args):
    mf = serialize.map_field_from_dict(_load_json(args.map))
    par = DistortionParams(args.p, args.lam)
    spec = IntegrandSpec(args.integrand, par, args.n_terms)
    weight = weight_eval(args.weight, mf.grid)
    rep = energy_fn(mf, weight, spec)
    out = rep.to_dict()
    if args.inverse:
        out["inverse"] = inverse_energy(mf, weight, spec).to_dict()
    sys.stdout.write(serialize.dumps(out))
    return 0 if rep.admissible else 1


def _cmd_solve(args):
    command, cfg, rng_seed, plot, output = serialize.run_config_from_dict(
        _load_json(args.config), expected_command="solve"
    )
    out = _outdir(args.out or output)
    res = solve(cfg)
    res.diagnostics["threads_env"] = os.environ.get("EXPDIST_THREADS")
    _write(out / "solve_result.json", serialize.dumps(
        serialize.solve_result_to_dict(res, rng_seed=rng_seed)))
    _write(out / "trace.csv", serialize.trace_to_csv(res.continuation_trace))
    _write(out / "map.json", serialize.dumps(
        serialize.map_field_to_dict(res.map, {"rng_seed": rng_seed})))
    print(f"{res.status}: {res.iterations} iterations, "
          f"normalized energy {res.report.normalized:.12g}")
    return 0 if res.status in ("converged", "plateau") else 1


def _cmd_sweep(args):
    command, cfg, rng_seed, plot, output = serialize.run_config_from_dict(
        _load_json(args.config), expected_command="sweep"
    )
    if not cfg.p_schedule:
        raise serialize.SchemaError("sweep requires solve.p_schedule", "$.solve.p_schedule")
    out = _outdir(args.out or output)
    sw = sweep_p(cfg)
    rows = []
    for p, res in zip(sw.p_values, sw.results):
        _write(out / f"solve_p{p:g}.json", serialize.dumps(
            serialize.solve_result_to_dict(res, rng_seed=rng_seed)))
        rows.extend(res.continuation_trace)
    _write(out / "trace.csv", serialize.trace_to_csv(rows))
    summary = {
        "p_values": sw.p_values,
        "normalized": sw.normalized,
        "monotone_nondecreasing": sw.monotone_nondecreasing,
        "statuses": [r.status for r in sw.results],
        "metadata": {"rng_seed": rng_seed, "backend": backend_name()},
    }
    _write(out / "sweep_result.json", serialize.dumps(summary))
    print(serialize.dumps(summary), end="")
    complete = len(sw.results) == len(cfg.p_schedule)
    return 0 if complete else 1


def _cmd_verify(args):
    data = _load_json(args.solution)
    res = serialize.solve_result_from_dict(data)
    cfg_d = res.diagnostics.get("config", {})
    p = float(cfg_d.get("p", 1.0))
    weight_kind = cfg_d.get("weight_kind", "euclidean")
    par = DistortionParams(p)
    weight = weight_eval(weight_kind, res.map.grid)
    seed = int(data.get("metadata", {}).get("rng_seed") or 0)
    bundle = diagnostics.residual_bundle(res.map, weight, par, rng_seed=seed)
    rows = list(bundle.to_dict().items())
    coarser = None
    if args.coarser:
        cdata = _load_json(args.coarser)
        cres = serialize.solve_result_from_dict(cdata)
        coarser = diagnostics.residual_bundle(cres.map, weight_eval(
            weight_kind, cres.map.grid), par, rng_seed=seed).to_dict()
    print(f"{'residual':<22}{'value':>14}{'grid h':>10}" + ("  decay" if coarser else ""))
    for name, value in rows:
        if name == "grid_h":
            continue
        line = f"{name:<22}{value:>14.4e}{bundle.grid_h:>10.4f}"
        if coarser:
            ratio = coarser[name] / value if value > 0 else float("inf")
            line += f"  {ratio:>6.2f}x"
        print(line)
    if args.out:
        out = _outdir(args.out)
        _write(out / "residuals.json", serialize.dumps(
            serialize.residual_bundle_to_dict(bundle, {"rng_seed": seed})))
    return 0


def _cmd_export(args):
    data = _load_json(args.solution)
    out = _outdir(args.out)
    res = serialize.solve_result_from_dict(data)
    cfg_d = res.diagnostics.get("config", {})
    par = DistortionParams(float(cfg_d.get("p", 1.0)))
    weight = weight_eval(cfg_d.get("weight_kind", "euclidean"), res.map.grid)
    df = wirtinger(res.map)
    phi = diagnostics.ahlfors_hopf(res.map, weight, par)
    phi.metadata["rng_seed"] = data.get("metadata", {}).get("rng_seed")
    _write(out / "triangle_fields.csv", serialize.triangle_table_csv(
        res.map.grid,
        {
            "abs_mu": np.abs(df.mu),
            "big_k": df.big_k,
            "jacobian": df.jacobian,
            "abs_phi": np.abs(phi.values),
            "arg_phi": np.angle(phi.values),
        },
    ))
    _write(out / "phi.json", serialize.dumps(serialize.quad_differential_to_dict(phi)))
    written = ["triangle_fields.csv", "phi.json"]
    if args.plot:
        from . import plots

        written += [str(Path(pth).name) for pth in plots.field_plots(
            res.map, phi, str(out / "field"))]
        if args.sweep_summary:
            sw = _load_json(args.sweep_summary)
            plots.energy_curve_plot(
                sw["p_values"], sw["normalized"], str(out / "energy_vs_p.png"))
            written.append("energy_vs_p.png")
    print("wrote " + ", ".join(written))
    return 0


def _cmd_bench(args):
    from . import _kernels_py

    try:
        from . import _kernels_fast
    except ImportError:
        _kernels_fast = None
    rng = np.random.default_rng(0)
    n = args.n
    y = np.exp(rng.uniform(-30, 30, n))
    x = np.exp(rng.uniform(-2, 2, n))
    k = np.exp(rng.uniform(-8, 8, n))
    cases = [
        ("ap_inverse", lambda m: m.ap_inverse(y, 1.0)),
        ("atilde_inverse", lambda m: m.atilde_inverse(y, 1.0)),
        ("ap_lambda_inverse", lambda m: m.ap_lambda_inverse(y, 1.0, 0.7)),
        ("v_solve", lambda m: m.v_solve(x, k, 1.0, 0.7)),
        ("t_solve", lambda m: m.t_solve(k, 1.0)),
    ]
    print(f"batch size {n}, active backend: {backend_name()}")
    print(f"{'kernel':<20}{'numpy [ms]':>12}{'compiled [ms]':>15}{'speedup':>9}")
    for name, fn in cases:
        t0 = time.perf_counter()
        ref = fn(_kernels_py)
        t_py = (time.perf_counter() - t0) * 1e3
        if _kernels_fast is not None:
            t0 = time.perf_counter()
            fast = fn(_kernels_fast)
            t_cy = (time.perf_counter() - t0) * 1e3
            agree = np.max(np.abs(ref - fast) / np.maximum(np.abs(ref), 1e-300))
            print(f"{name:<20}{t_py:>12.1f}{t_cy:>15.1f}{t_py / t_cy:>8.1f}x"
                  f"   (max rel gap {agree:.1e})")
        else:
            print(f"{name:<20}{t_py:>12.1f}{'unavailable':>15}{'-':>9}")
    return 0


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="expdist", description=__doc__)
    ap.add_argument("--version", action="version", version=f"expdist {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernels", help="evaluate scalar kernels / run invariant checks")
    k.add_argument("action", choices=["eval", "check"])
    k.add_argument("--fn", help="kernel name (eval)")
    k.add_argument("--p", type=float, default=1.0)
    k.add_argument("--lambda", dest="lam", type=float, default=1.0)
    k.add_argument("--at", default="", help="comma-separated evaluation points")
    k.add_argument("--aux", type=float, default=1.0,
                   help="second kernel argument (k) for v_lambda / uniqueness_kernel")
    k.set_defaults(func=_cmd_kernels)

    e = sub.add_parser("energy", help="evaluate the energy of a stored map")
    e.add_argument("--map", required=True)
    e.add_argument("--weight", default="euclidean", choices=["euclidean", "hyperbolic"])
    e.add_argument("--integrand", default="exp_p",
                   choices=["exp_p", "exp_p_lambda", "truncated"])
    e.add_argument("--p", type=float, required=True)
    e.add_argument("--lambda", dest="lam", type=float, default=1.0)
    e.add_argument("--n-terms", type=int, default=None)
    e.add_argument("--inverse", action="store_true",
                   help="also report the inverse-side energy")
    e.set_defaults(func=_cmd_energy)

    s = sub.add_parser("solve", help="minimize per a config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=_cmd_solve)

    w = sub.add_parser("sweep", help="warm-started p-sweep per a config file")
    w.add_argument("--config", required=True)
    w.add_argument("--out", default=None)
    w.set_defaults(func=_cmd_sweep)

    v = sub.add_parser("verify", help="stationarity residuals of a stored solution")
    v.add_argument("--solution", required=True)
    v.add_argument("--all", action="store_true", help="(default) full residual bundle")
    v.add_argument("--coarser", default=None,
                   help="coarser-run solution for decay ratios")
    v.add_argument("--out", default=None)
    v.set_defaults(func=_cmd_verify)

    x = sub.add_parser("export", help="CSV/JSON field tables and plots")
    x.add_argument("--solution", required=True)
    x.add_argument("--out", default=None)
    x.add_argument("--plot", action="store_true")
    x.add_argument("--sweep-summary", default=None,
                   help="sweep_result.json for the energy-vs-p curve")
    x.set_defaults(func=_cmd_export)

    b = sub.add_parser("bench", help="compare kernel backends")
    b.add_argument("--n", type=int, default=200000)
    b.set_defaults(func=_cmd_bench)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except serialize.SchemaError as exc:
        print(f"schema violation: {exc}", file=sys.stderr)
        return 2
    except (DomainError, ConfigurationError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
