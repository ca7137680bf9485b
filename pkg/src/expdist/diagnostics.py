"""Structure diagnostics: the quadratic-differential field of a computed map
and every residual that should vanish (or decay under refinement) at a
stationary point.

The differential is computed by pullback on the f-grid, never by inverting:
at the image point w = f(z) of a triangle centroid,

    Phi(w) = - exp(p K(z,f)) conj(f_z f_zbar) / J^2 * eta(z),

whose sign and value are pinned by the affine regression test (constant
field -e^{1.25} * 0.1875 for f = 2x + iy, p = 1, eta = 1).  Because pK can
exceed the exp range in high-p sweeps, fields carry a log_scale: stored
values are Phi * exp(-log_scale), with log_scale = 0 in the ordinary range.

All aggregates are L1 means reported together with the grid scale h;
acceptance-style checks are formulated as decay under refinement, except
where constancy makes them exact (constant-mu maps, constant weights).
"""

import numpy as np
from dataclasses import dataclass, field
from scipy.spatial import cKDTree

from . import kernels
from .grid import (
    dbar_residual_scattered,
    fit_complex_affine,
    invert_on_points,
    wirtinger,
)
from .params import ConfigurationError, DomainError, NumericalError

_PHI_LOG_GUARD = 600.0


@dataclass
class QuadDifferentialField:
    support: str                 # "scattered" (image points) | "gridded"
    points: np.ndarray           # complex, where the values live
    values: np.ndarray           # complex, Phi * exp(-log_scale)
    log_scale: float
    l1_norm: float               # integral |Phi| over the image domain
    dbar_residual_l1: float
    dbar_residual_linf: float
    zero_candidates: np.ndarray  # points with |Phi| < threshold * median
    included: np.ndarray         # bool; False where J was near-degenerate
    grid_h: float
    metadata: dict = field(default_factory=dict)


def ahlfors_hopf(map_field, weight, params, zero_threshold=1e-3, j_floor=1e-12, k_fit=8):
    """Scattered differential at image centroids, with holomorphy residual."""
    grid = map_field.grid
    df = wirtinger(map_field)
    if not df.admissible:
        raise NumericalError("differential undefined: map is not admissible")
    p = params.p
    image_pts = np.sum(map_field.values[grid.triangles], axis=1) / 3.0
    j_med = float(np.median(df.jacobian))
    included = df.jacobian > j_floor * j_med

    pk = p * df.big_k
    log_scale = max(0.0, float(np.max(pk)) - _PHI_LOG_GUARD)
    base = -np.conj(df.fz * df.fzbar) / df.jacobian**2 * weight.values
    values = np.exp(pk - log_scale) * base

    w_meas = df.jacobian * grid.areas
    with np.errstate(over="ignore"):
        l1 = float(np.sum(np.abs(values[included]) * w_meas[included]) * np.exp(log_scale))

    # The two triangle orientations carry O(h) biases of opposite sign;
    # pair-averaging per quad cancels them, otherwise the affine-fit dbar
    # estimate saturates at the oscillation level and hides the decay.
    if grid.domain == "unit_square":
        m = grid.n_triangles // 2
        pair_ok = included[:m] & included[m:]
        fit_pts = 0.5 * (image_pts[:m] + image_pts[m:])[pair_ok]
        fit_vals = 0.5 * (values[:m] + values[m:])[pair_ok]
    else:
        fit_pts = image_pts[included]
        fit_vals = values[included]
    rep = dbar_residual_scattered(fit_pts, fit_vals, k=k_fit)
    pts_in = image_pts[included]
    mags = np.abs(values[included])
    med = float(np.median(mags))
    zeros = pts_in[mags < zero_threshold * med] if med > 0 else pts_in
    return QuadDifferentialField(
        support="scattered",
        points=image_pts,
        values=values,
        log_scale=log_scale,
        l1_norm=l1,
        dbar_residual_l1=rep.l1,
        dbar_residual_linf=rep.linf,
        zero_candidates=zeros,
        included=included,
        grid_h=grid.spacing,
        metadata={
            "p": p,
            "weight": weight.kind,
            "zero_threshold": zero_threshold,
            "l1_convention": "image-domain measure J * area on the f-grid",
        },
    )


def ahlfors_hopf_gridded(map_field, weight, params, n_w=None, margin=0.1):
    """Regridded differential: invert the map on a regular w-lattice and
    P1-interpolate the node-recovered field there (the slower optional
    path; the scattered estimator is the one with acceptance weight).

    The lattice dbar residual is truncation-limited: centered differences of
    a holomorphic field leave s^2 |Phi'''| / 6 plus the interpolation-kink
    terms, so treat it as a sanity surface, not a refinement-decay oracle.
    Exact (zero) for constant fields.
    """
    grid = map_field.grid
    df = wirtinger(map_field)
    if not df.admissible:
        raise NumericalError("differential undefined: map is not admissible")
    p = params.p
    n_w = n_w or grid.nx
    img_b = map_field.values[grid.boundary_mask]
    x0, x1 = img_b.real.min(), img_b.real.max()
    y0, y1 = img_b.imag.min(), img_b.imag.max()
    xs = np.linspace(x0 + margin * (x1 - x0), x1 - margin * (x1 - x0), n_w)
    ys = np.linspace(y0 + margin * (y1 - y0), y1 - margin * (y1 - y0), n_w)
    ww = xs[:, None] + 1j * ys[None, :]
    h_vals, found = invert_on_points(map_field, ww)

    pk = p * df.big_k
    log_scale = max(0.0, float(np.max(pk)) - _PHI_LOG_GUARD)
    base = -np.conj(df.fz * df.fzbar) / df.jacobian**2 * weight.values
    tri_vals = np.exp(pk - log_scale) * base
    # a piecewise-constant field staircases under lattice differences;
    # cancel the per-orientation bias (pair average on square grids), then
    # node-average and P1-interpolate at the inverted points
    if grid.domain == "unit_square":
        m = grid.n_triangles // 2
        paired = 0.5 * (tri_vals[:m] + tri_vals[m:])
        tri_vals = np.concatenate([paired, paired])
    node_vals = _node_field_from_triangles(grid, tri_vals)
    values = np.full(ww.shape, np.nan, dtype=complex)
    interp, ok = _interp_p1(grid, node_vals, h_vals[found])
    tmp = np.full(int(found.sum()), np.nan, dtype=complex)
    tmp[ok] = interp[ok]
    values[found] = tmp

    spacing = xs[1] - xs[0]
    fx = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2.0 * spacing)
    fy = (values[1:-1, 2:] - values[1:-1, :-2]) / (2.0 * spacing)
    dbar = 0.5 * (fx + 1j * fy)
    ok = np.isfinite(dbar.real) & np.isfinite(dbar.imag)
    mags = np.abs(dbar[ok])
    cell_area = spacing * (ys[1] - ys[0])
    with np.errstate(over="ignore"):
        l1 = float(np.nansum(np.abs(values)) * cell_area * np.exp(log_scale))
    vals_ok = np.abs(values[found])
    med = float(np.median(vals_ok)) if vals_ok.size else 0.0
    zeros = ww[found][vals_ok < 1e-3 * med] if med > 0 else ww[found]
    return QuadDifferentialField(
        support="gridded",
        points=ww.ravel(),
        values=values.ravel(),
        log_scale=log_scale,
        l1_norm=l1,
        dbar_residual_l1=float(mags.mean()) if mags.size else float("nan"),
        dbar_residual_linf=float(mags.max()) if mags.size else float("nan"),
        zero_candidates=np.asarray(zeros).ravel(),
        included=found.ravel(),
        grid_h=spacing,
        metadata={"p": p, "weight": weight.kind, "n_w": n_w,
                  "l1_convention": "cell area on the regular w-lattice"},
    )


# ---------------------------------------------------------------------------
# test-function battery for the weak stationarity equation


def _bump(z, c, r):
    s = np.abs(z - c) ** 2 / r**2
    with np.errstate(divide="ignore", over="ignore"):
        out = np.where(s < 1.0, np.exp(1.0 / np.where(s < 1.0, s - 1.0, -1.0)), 0.0)
    return out


def _edge_green_integrals(z_tri, c, r, order=10):
    """Exact-per-element integrals of bump derivatives over triangles.

    For the piecewise-constant coefficients of a P1 map, int_T phi_z dA and
    int_T phi_zbar dA reduce to boundary integrals (complex Green identity):
    int_T phi_z = (i/2) oint phi dzbar, int_T phi_zbar = -(i/2) oint phi dz,
    evaluated with Gauss-Legendre on each edge.
    """
    t, wq = np.polynomial.legendre.leggauss(order)
    t = 0.5 * (t + 1.0)
    wq = 0.5 * wq
    oint_dzbar = np.zeros(z_tri.shape[0], dtype=complex)
    oint_dz = np.zeros(z_tri.shape[0], dtype=complex)
    for a, b in ((0, 1), (1, 2), (2, 0)):
        za, zb = z_tri[:, a], z_tri[:, b]
        dz = zb - za
        pts = za[:, None] + np.outer(dz, t)
        vals = _bump(pts, c, r) @ wq
        oint_dz += dz * vals
        oint_dzbar += np.conj(dz) * vals
    return 0.5j * oint_dzbar, -0.5j * oint_dz


# degree-4 symmetric triangle rule (6 points) for the area integral of phi
_TRI6_W = np.array(
    [0.223381589678011, 0.223381589678011, 0.223381589678011,
     0.109951743655322, 0.109951743655322, 0.109951743655322]
)
_TRI6_A = np.array(
    [0.445948490915965, 0.445948490915965, 0.108103018168070,
     0.091576213509771, 0.091576213509771, 0.816847572980459]
)
_TRI6_B = np.array(
    [0.445948490915965, 0.108103018168070, 0.445948490915965,
     0.091576213509771, 0.816847572980459, 0.091576213509771]
)


def _area_integral_bump(z_tri, areas, c, r):
    l1, l2 = _TRI6_A, _TRI6_B
    pts = (
        z_tri[:, 0][:, None] * (1.0 - l1 - l2)[None, :]
        + z_tri[:, 1][:, None] * l1[None, :]
        + z_tri[:, 2][:, None] * l2[None, :]
    )
    return areas * (_bump(pts, c, r) @ _TRI6_W)


def inner_variation_residual(
    map_field, weight, params, n_bumps=16, rng_seed=0, gauss_order=10, return_details=False
):
    """Max normalized weak-form residual of the stationarity equation.

    For each radial C-infinity bump phi (random interior centers/scales from
    the recorded seed), compare

        int exp(pK) (eta phi)_z  against  int exp(pK) 2p conj(mu)/(1-|mu|^2) eta phi_zbar.

    The per-element coefficients of the P1 map are constants, so both sides
    reduce to edge (and one area) integrals of the analytic bump: constant-mu
    maps with constant weight are exact to quadrature precision.  The
    residual is normalized by the L1 mass of the three integrand pieces.
    """
    grid = map_field.grid
    df = wirtinger(map_field)
    if not df.admissible:
        raise NumericalError("inner variation undefined: map is not admissible")
    p = params.p
    z_tri = grid.nodes[grid.triangles]
    pk = p * df.big_k
    scale = float(np.max(pk))
    amp = np.exp(pk - scale)
    mu = df.mu
    kf = 2.0 * p * np.conj(mu) / (1.0 - np.abs(mu) ** 2)
    eta = weight.values
    logg = weight.log_gradient

    rng = np.random.default_rng(rng_seed)
    if grid.domain == "unit_square":
        r_lo, r_hi, pad = 0.08, 0.18, 0.02
        centers, radii = [], []
        for _ in range(n_bumps):
            r = rng.uniform(r_lo, r_hi)
            cx = rng.uniform(r + pad, 1.0 - r - pad)
            cy = rng.uniform(r + pad, 1.0 - r - pad)
            centers.append(cx + 1j * cy)
            radii.append(r)
    else:
        r_out = 1.0 - (grid.delta or 0.05)
        centers, radii = [], []
        for _ in range(n_bumps):
            r = rng.uniform(0.08, 0.18) * r_out
            rho = rng.uniform(0.0, r_out - r - 0.02)
            ang = rng.uniform(0.0, 2.0 * np.pi)
            centers.append(rho * np.exp(1j * ang))
            radii.append(r)

    cent = grid.centroids
    h = grid.spacing
    residuals = []
    skipped = 0
    for c, r in zip(centers, radii):
        near = np.abs(cent - c) < r + 2.0 * h
        if not np.any(near):
            skipped += 1
            continue
        zt = z_tri[near]
        i_z, i_zbar = _edge_green_integrals(zt, c, r, gauss_order)
        i_area = _area_integral_bump(zt, grid.areas[near], c, r)
        lhs = np.sum(amp[near] * eta[near] * (logg[near] * i_area + i_z))
        rhs = np.sum(amp[near] * kf[near] * eta[near] * i_zbar)
        mass = np.sum(
            amp[near] * eta[near] * (np.abs(i_z) + np.abs(kf[near]) * np.abs(i_zbar)
                                     + np.abs(logg[near]) * np.abs(i_area))
        )
        residuals.append(abs(lhs - rhs) / mass if mass > 0 else 0.0)
    if not residuals:
        raise ConfigurationError("every test bump missed the grid interior")
    out = float(np.max(residuals))
    if return_details:
        return out, {"per_bump": residuals, "skipped": skipped, "n_bumps": n_bumps}
    return out


# ---------------------------------------------------------------------------
# the pointwise mu-equation


def mu_equation_residual(map_field, weight, params, k_fit=8):
    """L1 mean of the first-order Beltrami-coefficient equation at centroids.

    mu derivatives come from local least-squares complex-affine fits (exact
    for constant mu), so the residual is defined on any triangulation.
    """
    grid = map_field.grid
    df = wirtinger(map_field)
    if not df.admissible:
        raise NumericalError("mu equation undefined: map is not admissible")
    p = params.p
    mu = df.mu
    mu_z, mu_zbar, valid = fit_complex_affine(grid.centroids, mu, k=k_fit)
    t = np.abs(mu)
    t2 = t * t
    gamma = 1.0 + (4.0 * p - 3.0) * t2 + (4.0 * p * p - 4.0 * p + 3.0) * t2**2 - t2**3
    alpha = (1.0 - t2) ** 3
    beta = 2.0 * p * (1.0 + 2.0 * p * t2 - t2**2)
    phi_term = (
        -((1.0 - t2) ** 2) * (1.0 + (2.0 * p - 1.0) * t2) * mu * weight.log_gradient
        - (1.0 - t2) ** 3 * t2 * np.conj(weight.log_gradient)
    )
    resid = gamma * mu_z - alpha * np.conj(mu) * mu_zbar + beta * mu**2 * np.conj(mu_zbar) - phi_term
    mags = np.abs(resid[valid])
    return float(np.mean(mags))


# ---------------------------------------------------------------------------
# tension equation of the inverse map


def tension_residual(h_values, w_spacing, log_lambda_z_at_h, valid=None):
    """L1 mean of h_wwbar + (log lambda)_z(h) h_w h_wbar on a regular w-grid.

    h_values: complex (nx, ny) lattice samples of the inverse map;
    log_lambda_z_at_h: the z-derivative of log of the metric density,
    evaluated at h(w), same shape.  Only interior points where the full
    centered stencil is valid enter the mean.
    """
    h = np.asarray(h_values, dtype=complex)
    g = np.asarray(log_lambda_z_at_h, dtype=complex)
    s = float(w_spacing)
    hx = (h[2:, 1:-1] - h[:-2, 1:-1]) / (2.0 * s)
    hy = (h[1:-1, 2:] - h[1:-1, :-2]) / (2.0 * s)
    h_w = 0.5 * (hx - 1j * hy)
    h_wbar = 0.5 * (hx + 1j * hy)
    lap = (
        h[2:, 1:-1] + h[:-2, 1:-1] + h[1:-1, 2:] + h[1:-1, :-2] - 4.0 * h[1:-1, 1:-1]
    ) / (s * s)
    h_wwbar = 0.25 * lap
    resid = h_wwbar + g[1:-1, 1:-1] * h_w * h_wbar
    if valid is None:
        ok = np.isfinite(resid.real) & np.isfinite(resid.imag)
    else:
        v = np.asarray(valid, dtype=bool)
        ok = v[1:-1, 1:-1] & v[2:, 1:-1] & v[:-2, 1:-1] & v[1:-1, 2:] & v[1:-1, :-2]
        ok &= np.isfinite(resid.real) & np.isfinite(resid.imag)
    if not np.any(ok):
        raise NumericalError("tension residual: no valid interior stencil points")
    return float(np.mean(np.abs(resid[ok])))


def _node_field_from_triangles(grid, tri_values):
    """Average per-triangle samples onto nodes (simple incidence mean)."""
    counts = np.zeros(grid.n_nodes)
    acc = np.zeros(grid.n_nodes, dtype=complex)
    flat = grid.triangles.ravel()
    np.add.at(acc, flat, np.repeat(np.asarray(tri_values, dtype=complex), 3))
    np.add.at(counts, flat, 1.0)
    return acc / counts


def _lattice_z_derivative(grid, node_values):
    """d/dz of a node field by centered differences; nan on the boundary ring."""
    idx = grid.lattice_index()
    f = np.asarray(node_values, dtype=complex)[idx]
    hx = grid.spacing
    hy = 1.0 / (grid.ny - 1)
    out = np.full(f.shape, np.nan, dtype=complex)
    fx = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * hx)
    fy = (f[1:-1, 2:] - f[1:-1, :-2]) / (2.0 * hy)
    out[1:-1, 1:-1] = 0.5 * (fx - 1j * fy)
    flat = np.full(grid.n_nodes, np.nan, dtype=complex)
    flat[idx.ravel()] = out.ravel()
    return flat


def _interp_p1(grid, node_values, points):
    """P1 interpolation of a node field at points inside the reference grid."""
    tris = grid.triangles
    zv = grid.nodes[tris]
    targets = np.asarray(points, dtype=complex).ravel()
    out = np.full(targets.shape, np.nan, dtype=complex)
    found = np.zeros(targets.shape, dtype=bool)
    f = np.asarray(node_values, dtype=complex)
    cent = zv.mean(axis=1)
    tree = cKDTree(np.column_stack([cent.real, cent.imag]))
    kk = min(8, tris.shape[0])
    _, cand = tree.query(np.column_stack([targets.real, targets.imag]), k=kk)
    if kk == 1:
        cand = cand[:, None]
    tol = -1e-12
    for j in range(kk):
        todo = ~found
        if not np.any(todo):
            break
        t_idx = cand[todo, j]
        z0 = zv[t_idx, 0]
        d1 = zv[t_idx, 1] - z0
        d2 = zv[t_idx, 2] - z0
        rhs = targets[todo] - z0
        det = (np.conj(d1) * d2).imag
        l1 = (np.conj(rhs) * d2).imag / det
        l2 = (np.conj(d1) * rhs).imag / det
        inside = (l1 >= tol) & (l2 >= tol) & (l1 + l2 <= 1.0 - tol)
        if not np.any(inside):
            continue
        sel = np.where(todo)[0][inside]
        ti = t_idx[inside]
        out[sel] = (
            f[tris[ti, 0]] * (1.0 - l1[inside] - l2[inside])
            + f[tris[ti, 1]] * l1[inside]
            + f[tris[ti, 2]] * l2[inside]
        )
        found[sel] = True
    return out.reshape(np.shape(points)), found.reshape(np.shape(points))


def tension_residual_of_map(map_field, weight, params, n_w=None, margin=0.12):
    """Full pipeline: invert the map on a regular w-grid strictly inside the
    image, build the metric density log lambda = p K + log eta on reference
    nodes, and evaluate the tension residual of the inverse.

    Returns (residual, n_valid, n_excluded).
    """
    grid = map_field.grid
    if grid.domain != "unit_square":
        raise ConfigurationError("tension pipeline needs the square node lattice")
    df = wirtinger(map_field)
    if not df.admissible:
        raise NumericalError("tension residual undefined: map is not admissible")
    p = params.p
    n_w = n_w or grid.nx
    img_b = map_field.values[grid.boundary_mask]
    x0, x1 = img_b.real.min(), img_b.real.max()
    y0, y1 = img_b.imag.min(), img_b.imag.max()
    dx, dy = x1 - x0, y1 - y0
    xs = np.linspace(x0 + margin * dx, x1 - margin * dx, n_w)
    ys = np.linspace(y0 + margin * dy, y1 - margin * dy, n_w)
    spacing = xs[1] - xs[0]
    ww = xs[:, None] + 1j * ys[None, :]

    h_vals, found = invert_on_points(map_field, ww)

    big_k_nodes = _node_field_from_triangles(grid, df.big_k).real
    eta_nodes = weight.at(grid.nodes) if weight.kind != "tabulated" else None
    if eta_nodes is None:
        raise ConfigurationError("tension pipeline needs an evaluable weight")
    log_lam_nodes = p * big_k_nodes + np.log(eta_nodes)
    dlog = _lattice_z_derivative(grid, log_lam_nodes)

    g_at_h = np.full(ww.shape, np.nan, dtype=complex)
    the_pts = h_vals[found]
    interp, ok = _interp_p1(grid, dlog, the_pts)
    g_flat = np.full(found.sum(), np.nan, dtype=complex)
    g_flat[ok] = interp[ok]
    g_at_h[found] = g_flat
    valid = found & np.isfinite(g_at_h.real)

    resid = tension_residual(
        np.where(valid, h_vals, np.nan), spacing, np.where(valid, g_at_h, np.nan), valid
    )
    return resid, int(valid.sum()), int((~valid).sum())


# ---------------------------------------------------------------------------
# Teichmueller form of the inverse Beltrami coefficient


def teichmuller_phase_residual(map_field, weight, params, phi=None, zero_threshold=1e-3):
    """(phase residual, k_estimate, k_dispersion) of mu_h against the field.

    mu_h at the image of each centroid is -f_zbar / conj(f_z); at stationary
    points its phase matches conj(Phi)/|Phi|, so the product mu_h * Phi is
    real positive and the residual is the L1 mean of |arg(mu_h Phi)|.
    Elements within two image cells of a zero candidate of Phi (or with
    negligible mu) are excluded; if nothing survives, the phase is undefined
    and a DomainError is raised.
    """
    if phi is None:
        phi = ahlfors_hopf(map_field, weight, params, zero_threshold=zero_threshold)
    df = wirtinger(map_field)
    mu_h = -df.fzbar / np.conj(df.fz)
    vals = phi.values
    mags = np.abs(vals)
    med = float(np.median(mags[phi.included]))
    if med == 0.0 or not np.any(mags[phi.included] >= zero_threshold * med):
        raise DomainError("phase comparison impossible: |Phi| below threshold everywhere")
    ok = phi.included & (mags >= zero_threshold * med)
    if phi.zero_candidates.size:
        img_h = 2.0 * phi.grid_h * np.median(np.abs(df.fz))
        d_zero = np.min(
            np.abs(phi.points[:, None] - phi.zero_candidates[None, :]), axis=1
        )
        ok &= d_zero > img_h
    ok &= np.abs(mu_h) > 1e-14
    if not np.any(ok):
        raise DomainError("phase comparison impossible: no usable elements")
    ang = np.angle(mu_h[ok] * vals[ok])
    k_vals = np.abs(mu_h[ok])
    return float(np.mean(np.abs(ang))), float(np.mean(k_vals)), float(np.std(k_vals))


def f_identity_residual(map_field, params):
    """Max relative deviation of the sigma-free algebraic identity over
    elements; machine-scale for any admissible map (kernel regression)."""
    df = wirtinger(map_field)
    if not df.admissible:
        raise NumericalError("identity undefined: map is not admissible")
    return float(np.max(kernels.f_identity_rel_error(np.abs(df.mu), params)))


# ---------------------------------------------------------------------------
# truncated-series differentials


def hamilton_sequence(map_field, weight, params, n_list):
    """Truncated differentials against the full one, on the fixed map.

    Phi_N uses the N-term exponential series (n = 0..N-1) in place of
    exp(pK).  Returns (records, l1_phi) with one record per N:
    {n, l1, distance, ratio}; distance is the L1 gap of the L1-normalized
    fields over the image measure, ratio = |Phi_N| / |Phi| in L1.
    """
    grid = map_field.grid
    df = wirtinger(map_field)
    if not df.admissible:
        raise NumericalError("differential undefined: map is not admissible")
    p = params.p
    pk = p * df.big_k
    scale = float(np.max(pk))
    base = -np.conj(df.fz * df.fzbar) / df.jacobian**2 * weight.values
    meas = df.jacobian * grid.areas
    phi_full = np.exp(pk - scale) * base
    l1_full = float(np.sum(np.abs(phi_full) * meas))
    unit_full = phi_full / l1_full
    from .functional import _truncated_log_series

    records = []
    for n in n_list:
        if n < 1:
            raise ConfigurationError("series order N must be >= 1")
        log_sn = _truncated_log_series(pk, n - 1)
        phi_n = np.exp(log_sn - scale) * base
        l1_n = float(np.sum(np.abs(phi_n) * meas))
        dist = float(np.sum(np.abs(phi_n / l1_n - unit_full) * meas))
        records.append(
            {"n": int(n), "l1": l1_n * float(np.exp(min(scale, 700.0))),
             "distance": dist, "ratio": l1_n / l1_full}
        )
    with np.errstate(over="ignore"):
        l1_phi = l1_full * float(np.exp(min(scale, 700.0)))
    return records, l1_phi


# ---------------------------------------------------------------------------
# the one-stop bundle


@dataclass
class ResidualBundle:
    inner_variation: float
    ahlfors_hopf_dbar: float
    mu_equation: float
    tension: float
    teichmuller_phase: float
    f_identity: float
    grid_h: float

    def to_dict(self):
        return {
            "inner_variation": self.inner_variation,
            "ahlfors_hopf_dbar": self.ahlfors_hopf_dbar,
            "mu_equation": self.mu_equation,
            "tension": self.tension,
            "teichmuller_phase": self.teichmuller_phase,
            "f_identity": self.f_identity,
            "grid_h": self.grid_h,
        }


def residual_bundle(map_field, weight, params, rng_seed=0):
    """Every stationarity residual of one solved map, normalized as follows:
    inner_variation is mass-normalized (dimensionless), the dbar entry is
    mean |dbar Phi| over mean |Phi| (per unit image length), mu_equation and
    tension are plain L1 means, teichmuller_phase is radians.

    The tension pipeline needs the square node lattice for its inversion
    grid; on disk domains that entry is reported as nan."""
    phi = ahlfors_hopf(map_field, weight, params)
    mean_phi = float(np.mean(np.abs(phi.values[phi.included])))
    dbar_norm = phi.dbar_residual_l1 / mean_phi if mean_phi > 0 else np.inf
    try:
        tension, _, _ = tension_residual_of_map(map_field, weight, params)
    except ConfigurationError:
        tension = float("nan")
    phase, _, _ = teichmuller_phase_residual(map_field, weight, params, phi=phi)
    return ResidualBundle(
        inner_variation=inner_variation_residual(map_field, weight, params, rng_seed=rng_seed),
        ahlfors_hopf_dbar=dbar_norm,
        mu_equation=mu_equation_residual(map_field, weight, params),
        tension=tension,
        teichmuller_phase=phase,
        f_identity=f_identity_residual(map_field, params),
        grid_h=map_field.grid.spacing,
    )
