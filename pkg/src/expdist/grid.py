"""Discrete complex-analytic calculus on triangulated planar grids.

The elements are piecewise affine: Wirtinger derivatives are exact constants
per triangle, so "Jacobian positive on every triangle" is a complete
injectivity surrogate and the energy integrand is exact per element up to
the (centroid) quadrature of the weight.

Two domains are supported: the unit square, gridded nx x ny with each quad
split along the (a, c) diagonal into two positively oriented triangles, and
a polygonalized disk of radius 1 - delta built from rings around a center
fan (the weight blows up at |z| = 1, so the disk is always truncated).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .params import ConfigurationError, DomainError


@dataclass
class TriGrid:
    nodes: np.ndarray               # complex (n,)
    triangles: np.ndarray           # int (m, 3), positively oriented
    boundary_mask: np.ndarray       # bool (n,)
    domain: str                     # "unit_square" | "disk"
    nx: int
    ny: int
    spacing: float
    delta: float | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def unit_square(cls, nx, ny=None):
        """Uniform grid on [0,1]^2 with nx x ny nodes."""
        ny = nx if ny is None else ny
        if nx < 2 or ny < 2:
            raise ConfigurationError("unit_square needs at least 2 nodes per side")
        hx = 1.0 / (nx - 1)
        ii, jj = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        nodes = (ii * hx + 1j * jj / (ny - 1)).ravel()
        idx = np.arange(nx * ny).reshape(nx, ny)
        a = idx[:-1, :-1].ravel()
        b = idx[1:, :-1].ravel()
        c = idx[1:, 1:].ravel()
        d = idx[:-1, 1:].ravel()
        tris = np.concatenate(
            [np.stack([a, b, c], axis=1), np.stack([a, c, d], axis=1)], axis=0
        )
        mask = (ii == 0) | (ii == nx - 1) | (jj == 0) | (jj == ny - 1)
        return cls(nodes, tris, mask.ravel(), "unit_square", nx, ny, hx)

    @classmethod
    def disk(cls, n_rings, n_theta, delta=0.05):
        """Polygonalized disk of radius 1 - delta: center fan plus ring quads."""
        if not (0.0 < delta < 0.5):
            raise ConfigurationError("delta must lie in (0, 0.5)")
        if n_rings < 1 or n_theta < 3:
            raise ConfigurationError("disk needs n_rings >= 1 and n_theta >= 3")
        radius = 1.0 - delta
        angles = 2.0 * np.pi * np.arange(n_theta) / n_theta
        rings = [np.zeros(1, dtype=complex)]
        for i in range(1, n_rings + 1):
            rings.append(radius * i / n_rings * np.exp(1j * angles))
        nodes = np.concatenate(rings)

        def ring_idx(i, j):
            return 1 + (i - 1) * n_theta + (j % n_theta)

        tris = []
        for j in range(n_theta):
            tris.append((0, ring_idx(1, j), ring_idx(1, j + 1)))
        for i in range(1, n_rings):
            for j in range(n_theta):
                aa, bb = ring_idx(i, j), ring_idx(i + 1, j)
                cc, dd = ring_idx(i + 1, j + 1), ring_idx(i, j + 1)
                tris.append((aa, bb, cc))
                tris.append((aa, cc, dd))
        mask = np.zeros(nodes.shape[0], dtype=bool)
        mask[1 + (n_rings - 1) * n_theta :] = True
        return cls(
            nodes, np.asarray(tris, dtype=int), mask, "disk",
            n_rings + 1, n_theta, radius / n_rings, delta,
        )

    # -- cached per-triangle geometry ---------------------------------------

    def _geometry(self):
        geo = self._cache.get("geometry")
        if geo is None:
            z = self.nodes[self.triangles]
            dz1 = z[:, 1] - z[:, 0]
            dz2 = z[:, 2] - z[:, 0]
            det = dz1 * np.conj(dz2) - dz2 * np.conj(dz1)
            area = 0.5 * (np.conj(dz1) * dz2).imag  # signed; positive when CCW
            if np.any(area <= 0.0):
                raise ConfigurationError("degenerate triangle in reference grid")
            # coefficients of node values in f_z and f_zbar (affine fit)
            bcoef = np.stack(
                [(np.conj(dz1) - np.conj(dz2)) / det, np.conj(dz2) / det, -np.conj(dz1) / det],
                axis=1,
            )
            ccoef = np.stack([(dz2 - dz1) / det, -dz2 / det, dz1 / det], axis=1)
            centroid = z.mean(axis=1)
            geo = {"area": area, "b": bcoef, "c": ccoef, "centroid": centroid}
            self._cache["geometry"] = geo
        return geo

    @property
    def areas(self):
        return self._geometry()["area"]

    @property
    def centroids(self):
        return self._geometry()["centroid"]

    @property
    def n_nodes(self):
        return self.nodes.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def lattice_index(self):
        """Node index array of shape (nx, ny); square grids only."""
        if self.domain != "unit_square":
            raise ConfigurationError("node lattice exists only on unit_square grids")
        return np.arange(self.nx * self.ny).reshape(self.nx, self.ny)

    def to_dict(self):
        out = {"nx": self.nx, "ny": self.ny, "spacing": self.spacing, "domain": self.domain}
        if self.delta is not None:
            out["delta"] = self.delta
        return out

    @classmethod
    def from_dict(cls, d):
        if d["domain"] == "unit_square":
            return cls.unit_square(d["nx"], d["ny"])
        return cls.disk(d["nx"] - 1, d["ny"], d.get("delta", 0.05))


@dataclass
class MapField:
    """Discrete orientation-preserving map with fixed Dirichlet boundary trace."""

    grid: TriGrid
    values: np.ndarray          # complex (n,)
    boundary_trace: np.ndarray  # complex, values at boundary nodes

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        self.boundary_trace = np.asarray(self.boundary_trace, dtype=complex)
        bm = self.grid.boundary_mask
        if self.boundary_trace.shape[0] != int(bm.sum()):
            raise ConfigurationError("boundary_trace length does not match boundary size")
        if not np.array_equal(self.values[bm], self.boundary_trace):
            raise ConfigurationError("values on boundary nodes must equal boundary_trace")

    @classmethod
    def from_function(cls, grid, fn):
        vals = np.asarray(fn(grid.nodes), dtype=complex)
        return cls(grid, vals, vals[grid.boundary_mask])

    def with_values(self, values):
        """Same boundary trace, new values; boundary entries are overwritten."""
        v = np.asarray(values, dtype=complex).copy()
        v[self.grid.boundary_mask] = self.boundary_trace
        return MapField(self.grid, v, self.boundary_trace)

    def copy(self):
        return MapField(self.grid, self.values.copy(), self.boundary_trace.copy())


@dataclass
class DerivedField:
    """Per-triangle Wirtinger data of the piecewise-affine interpolant."""

    fz: np.ndarray
    fzbar: np.ndarray
    jacobian: np.ndarray
    mu: np.ndarray
    big_k: np.ndarray
    orientation_ok: np.ndarray  # bool per triangle (J > 0)

    @property
    def admissible(self):
        return bool(np.all(self.orientation_ok))


def wirtinger(map_field):
    """Exact per-triangle f_z, f_zbar, J, mu, K of the affine interpolant."""
    geo = map_field.grid._geometry()
    w = map_field.values[map_field.grid.triangles]
    fz = np.sum(geo["b"] * w, axis=1)
    fzbar = np.sum(geo["c"] * w, axis=1)
    jac = (fz.real**2 + fz.imag**2) - (fzbar.real**2 + fzbar.imag**2)
    ok = jac > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.where(fz != 0.0, fzbar / np.where(fz != 0.0, fz, 1.0), np.inf + 0j)
        norm2 = np.abs(fz) ** 2 + np.abs(fzbar) ** 2
        big_k = np.where(ok, norm2 / np.where(ok, jac, 1.0), np.inf)
    return DerivedField(fz, fzbar, jac, mu, big_k, ok)


# ---------------------------------------------------------------------------
# conformal weights


class WeightSpec:
    """Conformal weight eta > 0 with per-centroid samples and log-gradient.

    kinds: "euclidean" (eta = 1), "hyperbolic" (eta = (1-|z|^2)^-2, truncated
    disk only), "tabulated" (caller-provided samples; no off-grid evaluation).
    """

    def __init__(self, kind, grid, values=None, log_gradient=None):
        self.kind = kind
        self.grid = grid
        c = grid.centroids
        if kind == "euclidean":
            self.values = np.ones(c.shape[0])
            self.log_gradient = np.zeros(c.shape[0], dtype=complex)
        elif kind == "hyperbolic":
            if grid.domain != "disk":
                raise ConfigurationError("hyperbolic weight requires the truncated disk")
            self.values = self._hyper(c)
            self.log_gradient = 2.0 * np.conj(c) / (1.0 - np.abs(c) ** 2)
        elif kind == "tabulated":
            if values is None:
                raise ConfigurationError("tabulated weight needs values per centroid")
            self.values = np.asarray(values, dtype=float)
            if np.any(self.values <= 0.0):
                raise DomainError("weight must be positive")
            self.log_gradient = (
                np.zeros(c.shape[0], dtype=complex)
                if log_gradient is None
                else np.asarray(log_gradient, dtype=complex)
            )
        else:
            raise ConfigurationError(f"unknown weight kind {kind!r}")

    @staticmethod
    def _hyper(z):
        r2 = np.abs(z) ** 2
        if np.any(r2 >= 1.0):
            raise DomainError("hyperbolic weight undefined at |z| >= 1")
        return 1.0 / (1.0 - r2) ** 2

    def at(self, points):
        """Evaluate eta at arbitrary points (euclidean/hyperbolic only)."""
        pts = np.asarray(points, dtype=complex)
        if self.kind == "euclidean":
            return np.ones(pts.shape)
        if self.kind == "hyperbolic":
            return self._hyper(pts)
        raise ConfigurationError("tabulated weight cannot be evaluated off-grid")


def weight_eval(kind, grid, values=None, log_gradient=None):
    return WeightSpec(kind, grid, values, log_gradient)


# ---------------------------------------------------------------------------
# discrete d-bar tests


@dataclass
class DbarReport:
    pointwise: np.ndarray
    l1: float
    linf: float
    n_excluded: int = 0


def dbar_residual_grid(grid, node_values):
    """|d/dzbar field| at interior lattice nodes by centered differences."""
    idx = grid.lattice_index()
    f = np.asarray(node_values, dtype=complex)[idx]
    hx = grid.spacing
    hy = 1.0 / (grid.ny - 1)
    fx = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * hx)
    fy = (f[1:-1, 2:] - f[1:-1, :-2]) / (2.0 * hy)
    dbar = 0.5 * (fx + 1j * fy)
    mag = np.abs(dbar).ravel()
    return DbarReport(mag, float(mag.mean()), float(mag.max()))


def fit_complex_affine(points, values, k=8):
    """Least-squares a + b z + c zbar over k nearest neighbours per point.

    Returns (b, c, valid): the d/dz and d/dzbar estimates and a validity mask
    (False where fewer than 6 distinct neighbours are available or the local
    system is singular).
    """
    pts = np.asarray(points, dtype=complex).ravel()
    vals = np.asarray(values, dtype=complex).ravel()
    n = pts.shape[0]
    kk = min(k + 1, n)  # +1: the query point itself
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    _, idx = tree.query(np.column_stack([pts.real, pts.imag]), k=kk)
    if kk < 7:
        return (
            np.full(n, np.nan, dtype=complex),
            np.full(n, np.nan, dtype=complex),
            np.zeros(n, dtype=bool),
        )
    delta = pts[idx] - pts[:, None]
    rhs = vals[idx]
    ones = np.ones_like(delta)
    cols = np.stack([ones, delta, np.conj(delta)], axis=2)  # (n, k, 3)
    ah = np.conj(np.transpose(cols, (0, 2, 1)))
    ata = ah @ cols
    atb = np.einsum("nij,nj->ni", ah, rhs)
    valid = np.ones(n, dtype=bool)
    coef = np.zeros((n, 3), dtype=complex)
    try:
        coef = np.linalg.solve(ata, atb[..., None])[..., 0]
    except np.linalg.LinAlgError:
        for i in range(n):
            try:
                coef[i] = np.linalg.solve(ata[i], atb[i])
            except np.linalg.LinAlgError:
                valid[i] = False
    return coef[:, 1], coef[:, 2], valid


def dbar_residual_scattered(points, values, k=8):
    """Scattered holomorphy test: |c| of the local complex-affine fit."""
    _, c, valid = fit_complex_affine(points, values, k)
    mag = np.where(valid, np.abs(c), np.nan)
    good = mag[valid]
    if good.size == 0:
        return DbarReport(mag, float("nan"), float("nan"), int((~valid).sum()))
    return DbarReport(mag, float(good.mean()), float(good.max()), int((~valid).sum()))


# ---------------------------------------------------------------------------
# P1 harmonic extension (cotan stiffness), used for solver seeds and as the
# reference harmonic map on image meshes


def harmonic_extension(nodes, triangles, boundary_mask, boundary_values):
    """Solve the P1 Laplace problem with Dirichlet data; complex-valued."""
    nodes = np.asarray(nodes, dtype=complex)
    tris = np.asarray(triangles, dtype=int)
    n = nodes.shape[0]
    z = nodes[tris]
    rows, cols, data = [], [], []
    for a, bb, cc in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        # cotangent at vertex a weights edge (b, c)
        u = z[:, bb] - z[:, a]
        v = z[:, cc] - z[:, a]
        cross = (np.conj(u) * v).imag
        dot = (np.conj(u) * v).real
        w = 0.5 * dot / cross
        rows += [tris[:, bb], tris[:, cc], tris[:, bb], tris[:, cc]]
        cols += [tris[:, cc], tris[:, bb], tris[:, bb], tris[:, cc]]
        data += [-w, -w, w, w]
    a_mat = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    interior = ~np.asarray(boundary_mask)
    vals = np.zeros(n, dtype=complex)
    vals[~interior] = np.asarray(boundary_values, dtype=complex)
    if interior.sum() == 0:
        return vals
    a_ii = a_mat[interior][:, interior]
    a_ib = a_mat[interior][:, ~interior]
    rhs = -a_ib @ vals[~interior]
    vals[interior] = spla.spsolve(a_ii.tocsc(), rhs)
    return vals


def affine_extension(grid, boundary_values):
    """Best-fit w = A z + B zbar + C over the boundary, evaluated everywhere."""
    zb = grid.nodes[grid.boundary_mask]
    design = np.stack([zb, np.conj(zb), np.ones_like(zb)], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.asarray(boundary_values, dtype=complex), rcond=None)
    z = grid.nodes
    return coef[0] * z + coef[1] * np.conj(z) + coef[2]


# ---------------------------------------------------------------------------
# numerical inversion of the piecewise-affine map (test oracle and the
# tension-equation pipeline; the energy itself never inverts)


def invert_on_points(map_field, w_points, n_candidates=16, return_triangles=False):
    """Evaluate h = f^{-1} at given image points; exact per image triangle.

    Returns (values, found): points outside the image triangulation are
    flagged False and carry nan.  With return_triangles=True also returns
    the index of the containing image triangle (-1 where not found).
    """
    grid = map_field.grid
    tris = grid.triangles
    wv = map_field.values[tris]  # image triangle vertices
    zv = grid.nodes[tris]
    targets = np.asarray(w_points, dtype=complex).ravel()
    cent = wv.mean(axis=1)
    tree = cKDTree(np.column_stack([cent.real, cent.imag]))
    kk = min(n_candidates, tris.shape[0])
    _, cand = tree.query(np.column_stack([targets.real, targets.imag]), k=kk)
    if kk == 1:
        cand = cand[:, None]
    out = np.full(targets.shape, np.nan, dtype=complex)
    found = np.zeros(targets.shape, dtype=bool)
    tri_of = np.full(targets.shape, -1, dtype=int)
    tol = -1e-12
    for j in range(kk):
        todo = ~found
        if not np.any(todo):
            break
        t_idx = cand[todo, j]
        w0 = wv[t_idx, 0]
        d1 = wv[t_idx, 1] - w0
        d2 = wv[t_idx, 2] - w0
        rhs = targets[todo] - w0
        det = (np.conj(d1) * d2).imag
        lam1 = (np.conj(rhs) * d2).imag / det
        lam2 = (np.conj(d1) * rhs).imag / det
        inside = (lam1 >= tol) & (lam2 >= tol) & (lam1 + lam2 <= 1.0 - tol)
        if not np.any(inside):
            continue
        sel = np.where(todo)[0][inside]
        ti = t_idx[inside]
        l1, l2 = lam1[inside], lam2[inside]
        out[sel] = zv[ti, 0] * (1.0 - l1 - l2) + zv[ti, 1] * l1 + zv[ti, 2] * l2
        found[sel] = True
        tri_of[sel] = ti
    shape = np.shape(w_points)
    if return_triangles:
        return out.reshape(shape), found.reshape(shape), tri_of.reshape(shape)
    return out.reshape(shape), found.reshape(shape)
