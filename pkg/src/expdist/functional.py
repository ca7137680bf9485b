"""Energy values and integrands for the discrete mapping problem.

Three integrands Psi(K) are supported:

* ``exp_p``          Psi = exp(p K)
* ``exp_p_lambda``   Psi = exp(p K^l), K^l = (l^2 + |mu|^2)/(l^2 - |mu|^2),
                     finite only while |mu| < lambda (the barrier)
* ``truncated``      Psi = sum_{n=0}^{N} (p K)^n / n!

Energies are assembled as sum_T Psi(K_T) eta(centroid_T) area_T and always
carried in log space: ``log_energy`` stays finite-ordered far beyond the
exp overflow point, which is what keeps line searches ranked when p K is
large.  ``energy`` is exp(log_energy) and may legitimately be inf.

Non-admissible configurations (any J <= 0, or |mu| >= lambda under the
regularized integrand) yield +inf energy with ``admissible=False`` rather
than an exception: the barrier is what drives step rejection.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .grid import wirtinger
from .params import ConfigurationError, DistortionParams, NumericalError

_LOG_GUARD = 700.0


@dataclass(frozen=True)
class IntegrandSpec:
    kind: str                       # "exp_p" | "exp_p_lambda" | "truncated"
    params: DistortionParams
    n_terms: int | None = None      # truncated: series order N (terms 0..N)

    def __post_init__(self):
        if self.kind not in ("exp_p", "exp_p_lambda", "truncated"):
            raise ConfigurationError(f"unknown integrand kind {self.kind!r}")
        if self.kind == "truncated" and (self.n_terms is None or self.n_terms < 0):
            raise ConfigurationError("truncated integrand needs n_terms >= 0")

    def to_dict(self):
        out = {"kind": self.kind, "p": self.params.p, "lambda": self.params.lam}
        if self.n_terms is not None:
            out["n_terms"] = self.n_terms
        return out


@dataclass
class EnergyReport:
    energy: float
    log_energy: float
    normalized: float
    max_distortion: float
    weighted_area: float
    admissible: bool
    integrand: dict
    per_element: np.ndarray | None = None

    def to_dict(self):
        out = {
            "energy": self.energy,
            "log_energy": self.log_energy,
            "normalized": self.normalized,
            "max_distortion": self.max_distortion,
            "weighted_area": self.weighted_area,
            "admissible": self.admissible,
            "integrand": self.integrand,
        }
        if self.per_element is not None:
            out["per_element"] = [float(v) for v in self.per_element]
        return out


def _logsumexp(a):
    m = np.max(a)
    if not np.isfinite(m):
        return float(m)
    return float(m + np.log(np.sum(np.exp(a - m))))


def _truncated_log_series(x, n_max):
    """log sum_{n=0}^{n_max} x^n / n!, stable for any x >= 0."""
    x = np.asarray(x, dtype=float)
    n = np.arange(n_max + 1)
    with np.errstate(divide="ignore"):
        logx = np.where(x > 0.0, np.log(x), -np.inf)
    log_terms = n[None, :] * logx[..., None] - gammaln(n + 1.0)[None, :]
    m = np.max(log_terms, axis=-1)
    out = m + np.log(np.sum(np.exp(log_terms - m[..., None]), axis=-1))
    return np.where(x > 0.0, out, 0.0)


def _lambda_distortion(big_k, lam):
    """K^lambda as a function of K; +inf at/beyond the |mu| = lambda barrier."""
    c1 = 1.0 + lam * lam
    c2 = 1.0 - lam * lam
    den = c1 - c2 * big_k
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0.0, (c1 * big_k - c2) / np.where(den > 0.0, den, 1.0), np.inf)
    return out


def log_psi(big_k, spec):
    """log Psi(K) per element."""
    p = spec.params.p
    if spec.kind == "exp_p":
        return p * big_k
    if spec.kind == "exp_p_lambda":
        return p * _lambda_distortion(big_k, spec.params.lam)
    return _truncated_log_series(p * big_k, spec.n_terms)


def log_psi_prime(big_k, spec):
    """log Psi'(K) per element (Psi' > 0 for K >= 1)."""
    p = spec.params.p
    if spec.kind == "exp_p":
        return np.log(p) + p * big_k
    if spec.kind == "exp_p_lambda":
        lam = spec.params.lam
        kl = _lambda_distortion(big_k, lam)
        den = (1.0 + lam * lam) - (1.0 - lam * lam) * big_k
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(
                np.isfinite(kl),
                np.log(p) + p * kl + np.log(4.0 * lam * lam) - 2.0 * np.log(np.abs(den)),
                np.inf,
            )
    if spec.n_terms == 0:
        return np.full(np.shape(big_k), -np.inf)
    return np.log(p) + _truncated_log_series(p * big_k, spec.n_terms - 1)


def _element_state(map_field, weight, spec):
    df = wirtinger(map_field)
    admissible = df.admissible
    if spec.kind == "exp_p_lambda" and admissible:
        admissible = bool(np.all(np.abs(df.mu) < spec.params.lam))
    return df, admissible


def energy(map_field, weight, spec, per_element=False):
    """Weighted energy sum_T Psi(K_T) eta_T area_T with log-space assembly."""
    df, admissible = _element_state(map_field, weight, spec)
    areas = map_field.grid.areas
    log_w = np.log(weight.values) + np.log(areas)
    weighted_area = float(np.sum(weight.values * areas))
    p = spec.params.p
    if not admissible:
        return EnergyReport(
            np.inf, np.inf, np.inf, np.inf, weighted_area, False, spec.to_dict(),
            per_element=None,
        )
    lp = log_psi(df.big_k, spec)
    log_e = _logsumexp(lp + log_w)
    with np.errstate(over="ignore"):
        e = float(np.exp(log_e))
    normalized = (log_e - np.log(weighted_area)) / p
    report = EnergyReport(
        e, log_e, float(normalized), float(np.max(df.big_k)), weighted_area,
        True, spec.to_dict(),
    )
    if per_element:
        with np.errstate(over="ignore"):
            report.per_element = np.exp(lp)
    return report


def energy_gradient(map_field, weight, spec):
    """Exact gradient of the discrete energy w.r.t. free node values.

    Returns a complex array over all nodes with zeros on the boundary
    (interior nodes are the optimization variables).  Raises on
    non-admissible maps, where the gradient is undefined across the barrier.
    """
    value, grad = shifted_value_and_grad(map_field, weight, spec, shift=0.0)
    if grad is None:
        raise NumericalError("gradient undefined: map is not admissible")
    return grad


def shifted_value_and_grad(map_field, weight, spec, shift=0.0):
    """(sum_T Psi e^-shift eta area, its gradient) or (inf, None) at the barrier.

    The shift is a fixed log-space offset: minimizers are unchanged, values
    and gradients stay representable while p*maxK - shift <= ~700.
    """
    grid = map_field.grid
    df, admissible = _element_state(map_field, weight, spec)
    if not admissible:
        return np.inf, None
    areas = grid.areas
    w_t = weight.values * areas
    lp = log_psi(df.big_k, spec)
    with np.errstate(over="ignore"):
        value = float(np.sum(np.exp(lp - shift) * w_t))
        psi_prime_w = np.exp(log_psi_prime(df.big_k, spec) - shift) * w_t
    if not np.isfinite(value):
        return np.inf, None
    geo = grid._geometry()
    tri = grid.triangles
    fz, fzbar, jac = df.fz, df.fzbar, df.jacobian
    norm2 = np.abs(fz) ** 2 + np.abs(fzbar) ** 2
    # dK/d conj(w_local): K = N/J with dN = fz conj(B) + fzbar conj(C),
    # dJ = fz conj(B) - fzbar conj(C)
    coef_b = np.conj(geo["b"]) * fz[:, None]
    coef_c = np.conj(geo["c"]) * fzbar[:, None]
    dk = ((coef_b + coef_c) * jac[:, None] - norm2[:, None] * (coef_b - coef_c)) / (
        jac[:, None] ** 2
    )
    contrib = 2.0 * psi_prime_w[:, None] * dk
    flat = tri.ravel()
    grad = np.zeros(grid.n_nodes, dtype=complex)
    np.add.at(grad, flat, contrib.ravel())
    grad[grid.boundary_mask] = 0.0
    if not np.all(np.isfinite(grad[~grid.boundary_mask].view(float))):
        return value, None
    return value, grad


def inverse_energy(map_field, weight, spec, per_element=False):
    """Energy of the inverse map, pulled back to the f-grid without inverting.

    Computed as sum_T Psi(K_T) eta(f(centroid_T)) J_T area_T, i.e. the
    image-domain integral of Psi(K(w, h)) with the weight evaluated at the
    h-side source point w = f(z) (the J factor is the change of variables).
    Requires a weight that can be evaluated off-grid.
    """
    df, admissible = _element_state(map_field, weight, spec)
    grid = map_field.grid
    p = spec.params.p
    if not admissible:
        return EnergyReport(
            np.inf, np.inf, np.inf, np.inf, np.nan, False, spec.to_dict(),
        )
    image_cent = np.sum(map_field.values[grid.triangles], axis=1) / 3.0
    eta_img = weight.at(image_cent)
    log_w = np.log(eta_img) + np.log(df.jacobian) + np.log(grid.areas)
    image_area = float(np.sum(eta_img * df.jacobian * grid.areas))
    lp = log_psi(df.big_k, spec)
    log_e = _logsumexp(lp + log_w)
    with np.errstate(over="ignore"):
        e = float(np.exp(log_e))
    report = EnergyReport(
        e, log_e, float((log_e - np.log(image_area)) / p),
        float(np.max(df.big_k)), image_area, True, spec.to_dict(),
    )
    if per_element:
        with np.errstate(over="ignore"):
            report.per_element = np.exp(lp)
    return report
