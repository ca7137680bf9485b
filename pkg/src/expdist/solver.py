"""Minimize the discrete energy over interior node values.

The optimizer is gradient descent with Barzilai-Borwein step initialization
and Armijo backtracking.  Any step producing a non-admissible configuration
(a flipped triangle, or |mu| >= lambda under the regularized integrand)
evaluates to +inf energy and is rejected by the backtracking, so per-element
J > 0 is preserved along the whole accepted trajectory.

Continuation comes in two flavours: a lambda-ladder (solve the regularized
problem on an ascending schedule, warm-starting each rung, with lambda = 1
recovering the target integrand exactly) and p-sweeps (warm-started solves
along a monotone p schedule).

All optimizer arithmetic runs on the shifted integrand exp(log Psi - shift)
with the shift frozen per rung at the seed's maximum log Psi; this is a
constant positive factor (identical minimisers) that keeps values and
gradients representable up to the log-space guard p*maxK ~ 700.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .functional import EnergyReport, IntegrandSpec, energy, log_psi, shifted_value_and_grad
from .grid import MapField, TriGrid, affine_extension, harmonic_extension, weight_eval, wirtinger
from .params import ConfigurationError, DistortionParams, NumericalError

_ARMIJO_C1 = 1e-4
_SHIFT_HEADROOM = 100.0
_PLATEAU_WINDOW = 100


@dataclass
class BoundarySpec:
    """Dirichlet boundary data f0 restricted to the boundary nodes.

    kinds: "identity"; "affine" with f0 = a z + b conj(z) + c;
    "quartic" with f0 = z + eps conj(z - z0)^4 (z0 = domain center), an
    anti-holomorphic perturbation so the minimiser is genuinely
    non-conformal; "provided" with explicit per-boundary-node values.
    """

    kind: str = "identity"
    a: complex = 1.0
    b: complex = 0.0
    c: complex = 0.0
    eps: float = 0.1
    values: np.ndarray | None = None

    def evaluate(self, z, grid):
        if self.kind == "identity":
            return np.asarray(z, dtype=complex)
        if self.kind == "affine":
            return self.a * z + self.b * np.conj(z) + self.c
        if self.kind == "quartic":
            z0 = 0.5 + 0.5j if grid.domain == "unit_square" else 0.0 + 0.0j
            return z + self.eps * np.conj(z - z0) ** 4
        raise ConfigurationError(f"boundary kind {self.kind!r} cannot be evaluated")

    def trace(self, grid):
        if self.kind == "provided":
            vals = np.asarray(self.values, dtype=complex)
            if vals.shape[0] != int(grid.boundary_mask.sum()):
                raise ConfigurationError("provided boundary values have wrong length")
            return vals
        return self.evaluate(grid.nodes[grid.boundary_mask], grid)

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "affine":
            out.update(
                a=[self.a.real, self.a.imag],
                b=[self.b.real, self.b.imag],
                c=[self.c.real, self.c.imag],
            )
        if self.kind == "quartic":
            out["eps"] = self.eps
        return out

    @classmethod
    def from_dict(cls, d):
        kind = d.get("kind", "identity")
        kw = {}
        if kind == "affine":
            for name in ("a", "b", "c"):
                if name in d:
                    re, im = d[name]
                    kw[name] = complex(re, im)
        if kind == "quartic" and "eps" in d:
            kw["eps"] = float(d["eps"])
        return cls(kind=kind, **kw)


@dataclass
class SolveConfig:
    p: float = 1.0
    lam: float = 1.0
    integrand_kind: str = "exp_p"
    n_terms: int | None = None
    weight_kind: str = "euclidean"
    domain: str = "unit_square"
    grid_n: int = 33
    n_theta: int | None = None
    delta: float = 0.05
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    max_iters: int = 20000
    grad_tol: float | None = None        # None: 1e-8 * e^p, compared in log space
    progress_tol: float = 1e-14          # plateau: relative energy decrease per window
    lambda_schedule: list | None = None  # strictly ascending, last rung = target
    p_schedule: list | None = None       # strictly monotone, for sweep_p
    seed_map: str = "harmonic_extension"
    seed_values: np.ndarray | None = None
    rng_seed: int = 0

    def validate(self):
        DistortionParams(self.p, self.lam)
        if self.lambda_schedule is not None:
            sched = list(self.lambda_schedule)
            if any(b <= a for a, b in zip(sched, sched[1:])):
                raise ConfigurationError("lambda_schedule must be strictly ascending")
            if any(not (0.0 < l <= 1.0) for l in sched):
                raise ConfigurationError("lambda_schedule entries must lie in (0, 1]")
            target_lam = 1.0 if self.integrand_kind == "exp_p" else self.lam
            if abs(sched[-1] - target_lam) > 1e-15:
                raise ConfigurationError("lambda_schedule must end at the target lambda")
        if self.p_schedule is not None:
            diffs = np.diff(self.p_schedule)
            if not (np.all(diffs > 0) or np.all(diffs < 0)):
                raise ConfigurationError("p_schedule must be strictly monotone")
        if self.seed_map not in ("harmonic_extension", "affine_extension", "provided"):
            raise ConfigurationError(f"unknown seed_map {self.seed_map!r}")
        return self

    def build_grid(self):
        if self.domain == "unit_square":
            return TriGrid.unit_square(self.grid_n)
        if self.domain == "disk":
            return TriGrid.disk(self.grid_n - 1, self.n_theta or 4 * self.grid_n, self.delta)
        raise ConfigurationError(f"unknown domain {self.domain!r}")

    def integrand(self, p=None, lam=None):
        params = DistortionParams(self.p if p is None else p, self.lam if lam is None else lam)
        return IntegrandSpec(self.integrand_kind, params, self.n_terms)

    def log_grad_tol(self, p=None):
        pp = self.p if p is None else p
        if self.grad_tol is not None:
            return float(np.log(self.grad_tol))
        return float(np.log(1e-8) + pp)

    def to_dict(self):
        return {
            "p": self.p,
            "lambda": self.lam,
            "integrand_kind": self.integrand_kind,
            "n_terms": self.n_terms,
            "weight_kind": self.weight_kind,
            "domain": self.domain,
            "grid_n": self.grid_n,
            "n_theta": self.n_theta,
            "delta": self.delta,
            "boundary": self.boundary.to_dict(),
            "max_iters": self.max_iters,
            "grad_tol": self.grad_tol,
            "lambda_schedule": self.lambda_schedule,
            "p_schedule": self.p_schedule,
            "seed_map": self.seed_map,
            "rng_seed": self.rng_seed,
        }

    @classmethod
    def from_dict(cls, d):
        kw = dict(d)
        kw["lam"] = kw.pop("lambda", kw.pop("lam", 1.0))
        kw["boundary"] = BoundarySpec.from_dict(kw.get("boundary", {}))
        kw.pop("seed_values", None)
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in kw.items() if k in known}).validate()


@dataclass
class SolveResult:
    map: MapField
    report: EnergyReport
    iterations: int
    grad_norm: float
    log_grad_norm: float
    status: str                      # "converged" | "max_iters" | "stalled"
    continuation_trace: list         # rows (rung_param, log_energy, log_grad_norm)
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == "converged"


def _seed_values(cfg, grid, trace):
    if cfg.seed_map == "provided":
        if cfg.seed_values is None:
            raise ConfigurationError("seed_map='provided' requires seed_values")
        vals = np.asarray(cfg.seed_values, dtype=complex).copy()
        vals[grid.boundary_mask] = trace
        return vals
    harmonic = harmonic_extension(grid.nodes, grid.triangles, grid.boundary_mask, trace)
    if cfg.seed_map == "affine_extension":
        vals = affine_extension(grid, trace)
        vals[grid.boundary_mask] = trace
        return vals
    return harmonic


def _admissible(map_field, spec):
    df = wirtinger(map_field)
    if not df.admissible:
        return False
    if spec.kind == "exp_p_lambda":
        return bool(np.all(np.abs(df.mu) < spec.params.lam))
    return True


def _rung_shift(map_field, spec):
    df = wirtinger(map_field)
    top = float(np.max(log_psi(df.big_k, spec)))
    return max(0.0, top - _SHIFT_HEADROOM)


def _minimize_rung(map_field, weight, spec, cfg, rung_param, trace_rows):
    """BB descent on one rung; returns (map, iterations, log_grad_norm, status)."""
    grid = map_field.grid
    interior = ~grid.boundary_mask
    shift = _rung_shift(map_field, spec)
    log_tol = cfg.log_grad_tol(spec.params.p)

    current = map_field
    value, grad = shifted_value_and_grad(current, weight, spec, shift)
    if grad is None:
        raise NumericalError("seed map is not admissible for this rung")
    g_int = grad[interior]
    g_inf = float(np.max(np.abs(g_int))) if g_int.size else 0.0
    h = grid.spacing
    alpha0 = 0.25 * h / g_inf if g_inf > 0 else 1.0
    alpha_floor = alpha0 * 1e-18

    prev_x = None
    prev_g = None
    status = "max_iters"
    it = 0
    window_ref = value
    trace_rows.append((rung_param, float(np.log(value) + shift), _safe_log(g_inf, shift)))
    if g_int.size == 0 or (g_inf > 0 and np.log(g_inf) + shift <= log_tol) or g_inf == 0.0:
        return current, 0, _safe_log(g_inf, shift), "converged"

    for it in range(1, cfg.max_iters + 1):
        x = current.values[interior]
        if prev_x is not None:
            s = x - prev_x
            y = g_int - prev_g
            sy = float(np.sum(s.real * y.real + s.imag * y.imag))
            ss = float(np.sum(s.real * s.real + s.imag * s.imag))
            alpha = ss / sy if sy > 0 else alpha0
        else:
            alpha = alpha0
        alpha = float(np.clip(alpha, alpha_floor, 1e12 * alpha0))
        gsq = float(np.sum(g_int.real**2 + g_int.imag**2))

        accepted = False
        for _ in range(60):
            cand_vals = current.values.copy()
            cand_vals[interior] = x - alpha * g_int
            cand = current.with_values(cand_vals)
            cand_value, cand_grad = shifted_value_and_grad(cand, weight, spec, shift)
            if cand_grad is not None and cand_value <= value - _ARMIJO_C1 * alpha * gsq:
                accepted = True
                break
            alpha *= 0.5
            if alpha < alpha_floor:
                break
        if not accepted:
            status = "stalled"
            break

        prev_x, prev_g = x, g_int
        current, value = cand, cand_value
        grad = cand_grad
        g_int = grad[interior]
        g_inf = float(np.max(np.abs(g_int)))
        trace_rows.append((rung_param, float(np.log(value) + shift), _safe_log(g_inf, shift)))
        if g_inf == 0.0 or np.log(g_inf) + shift <= log_tol:
            status = "converged"
            break
        # plateau: gradient tolerances like 1e-8 e^p sit below attainable
        # precision at large p; stop once a window of accepted steps no
        # longer moves the energy at double precision
        if it % _PLATEAU_WINDOW == 0:
            if window_ref - value <= cfg.progress_tol * abs(window_ref):
                status = "plateau"
                break
            window_ref = value

    return current, it, _safe_log(g_inf, shift), status


def _safe_log(g_inf, shift):
    if g_inf <= 0.0:
        return -np.inf
    return float(np.log(g_inf) + shift)


def solve(cfg, grid=None, weight=None, initial_values=None):
    """Minimize per the config; lambda-ladder rungs warm-start one another."""
    cfg.validate()
    grid = cfg.build_grid() if grid is None else grid
    weight = weight_eval(cfg.weight_kind, grid) if weight is None else weight
    trace = cfg.boundary.trace(grid)
    vals = initial_values.copy() if initial_values is not None else _seed_values(cfg, grid, trace)
    vals = np.asarray(vals, dtype=complex)
    vals[grid.boundary_mask] = trace
    current = MapField(grid, vals, trace)

    if cfg.lambda_schedule is not None:
        rungs = [
            (lam, IntegrandSpec(
                "exp_p_lambda" if lam < 1.0 or cfg.integrand_kind == "exp_p_lambda"
                else cfg.integrand_kind,
                DistortionParams(cfg.p, lam), cfg.n_terms))
            for lam in cfg.lambda_schedule
        ]
    else:
        rungs = [(cfg.lam if cfg.integrand_kind == "exp_p_lambda" else cfg.p, cfg.integrand())]

    first_spec = rungs[0][1]
    if not _admissible(current, first_spec):
        if cfg.seed_map == "harmonic_extension":
            fallback = affine_extension(grid, trace)
            fallback[grid.boundary_mask] = trace
            current = MapField(grid, fallback, trace)
        if not _admissible(current, first_spec):
            raise NumericalError("no admissible seed map (harmonic and affine both fail)")

    trace_rows = []
    total_iters = 0
    status = "converged"
    log_gnorm = -np.inf
    for rung_param, spec in rungs:
        current, iters, log_gnorm, status = _minimize_rung(
            current, weight, spec, cfg, rung_param, trace_rows
        )
        total_iters += iters

    final_spec = rungs[-1][1]
    report = energy(current, weight, final_spec)
    with np.errstate(over="ignore"):
        gnorm = float(np.exp(log_gnorm))
    return SolveResult(
        map=current,
        report=report,
        iterations=total_iters,
        grad_norm=gnorm,
        log_grad_norm=log_gnorm,
        status=status,
        continuation_trace=trace_rows,
        diagnostics={"config": cfg.to_dict(), "shifted": True},
    )


@dataclass
class SweepResult:
    results: list
    p_values: list
    normalized: list
    monotone_nondecreasing: bool


def sweep_p(cfg, grid=None, weight=None, monotone_slack=1e-6):
    """Warm-started solves along cfg.p_schedule.

    Normalized energies are recorded per rung; their monotonicity in p is
    reported (with slack), not enforced.  A rung that raises aborts the
    sweep and returns the partial results.
    """
    cfg.validate()
    if not cfg.p_schedule:
        raise ConfigurationError("sweep_p requires a p_schedule")
    grid = cfg.build_grid() if grid is None else grid
    weight = weight_eval(cfg.weight_kind, grid) if weight is None else weight

    results = []
    p_done = []
    vals = None
    for p in cfg.p_schedule:
        rung_cfg = replace(cfg, p=float(p), p_schedule=None)
        try:
            res = solve(rung_cfg, grid=grid, weight=weight, initial_values=vals)
        except NumericalError:
            break
        results.append(res)
        p_done.append(float(p))
        vals = res.map.values
    normalized = [r.report.normalized for r in results]
    order = np.argsort(p_done)
    sorted_norm = np.asarray(normalized, dtype=float)[order]
    monotone = bool(np.all(np.diff(sorted_norm) >= -monotone_slack)) if len(results) > 1 else True
    return SweepResult(results, p_done, normalized, monotone)


def cap_p_schedule(schedule, max_distortion, guard=600.0):
    """Truncate an ascending p schedule so p * maxK stays inside the guard."""
    out = [p for p in schedule if p * max_distortion <= guard]
    return out if out else [schedule[0]]
