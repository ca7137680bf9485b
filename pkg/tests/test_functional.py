"""Energies: pinned values, gradient-vs-finite-difference oracles, barrier
behaviour, series convergence, and the log-space overflow policy."""

import numpy as np
import pytest

from expdist import functional as F
from expdist import grid as G
from expdist.params import ConfigurationError, DistortionParams, NumericalError


def DP(p, lam=1.0):
    return DistortionParams(p, lam)


@pytest.fixture(scope="module")
def square17():
    g = G.TriGrid.unit_square(17)
    return g, G.weight_eval("euclidean", g)


@pytest.fixture(scope="module")
def perturbed_affine(square17):
    g, _ = square17
    rng = np.random.default_rng(5)
    vals = 1.5 * g.nodes + 0.5 * np.conj(g.nodes)
    inter = ~g.boundary_mask
    vals[inter] += 0.004 * (
        rng.standard_normal(inter.sum()) + 1j * rng.standard_normal(inter.sum())
    )
    return G.MapField(g, vals, vals[g.boundary_mask])


class TestEnergyValues:
    def test_identity_energy(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: z)
        rep = F.energy(mf, w, F.IntegrandSpec("exp_p", DP(1.0)))
        assert rep.energy == pytest.approx(np.e, rel=1e-14)
        assert rep.normalized == pytest.approx(1.0, abs=1e-14)

    def test_affine_energy(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: 2 * z.real + 1j * z.imag)
        rep = F.energy(mf, w, F.IntegrandSpec("exp_p", DP(1.0)))
        assert rep.energy == pytest.approx(np.exp(1.25), rel=1e-14)
        assert rep.max_distortion == pytest.approx(1.25, rel=1e-14)

    def test_truncated_identity(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: z)
        rep = F.energy(mf, w, F.IntegrandSpec("truncated", DP(1.0), n_terms=2))
        assert rep.energy == pytest.approx(2.5, rel=1e-14)

    def test_normalized_identity_any_p_any_weight(self):
        g = G.TriGrid.disk(6, 24, 0.05)
        w = G.weight_eval("hyperbolic", g)
        mf = G.MapField.from_function(g, lambda z: z)
        for p in (0.25, 1.0, 7.0):
            rep = F.energy(mf, w, F.IntegrandSpec("exp_p", DP(p)))
            assert rep.normalized == pytest.approx(1.0, abs=1e-13)

    def test_exp_lower_bound(self, perturbed_affine, square17):
        _, w = square17
        rep = F.energy(perturbed_affine, w, F.IntegrandSpec("exp_p", DP(1.5)))
        assert rep.energy >= np.exp(1.5) * rep.weighted_area
        assert rep.normalized >= 1.0

    def test_truncated_monotone_in_n_and_convergent(self, perturbed_affine, square17):
        _, w = square17
        energies = [
            F.energy(perturbed_affine, w, F.IntegrandSpec("truncated", DP(1.0), n_terms=n)).energy
            for n in range(0, 30)
        ]
        assert np.all(np.diff(energies) >= 0)  # flat once converged to doubles
        assert np.all(np.diff(energies[:10]) > 0)
        full = F.energy(perturbed_affine, w, F.IntegrandSpec("exp_p", DP(1.0))).energy
        assert energies[-1] == pytest.approx(full, rel=1e-12)
        assert np.all(np.asarray(energies) <= full + 1e-12)

    def test_lambda_energy_monotone_in_lambda(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: 2 * z.real + 1j * z.imag)  # |mu| = 1/3
        es = [
            F.energy(mf, w, F.IntegrandSpec("exp_p_lambda", DP(1.0, lam))).energy
            for lam in (0.5, 0.7, 0.9, 1.0)
        ]
        assert np.all(np.diff(es) < 0)

    def test_lambda_barrier(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: 2 * z.real + 1j * z.imag)
        rep = F.energy(mf, w, F.IntegrandSpec("exp_p_lambda", DP(1.0, 0.3)))
        assert rep.energy == np.inf and not rep.admissible

    def test_flipped_triangle_barrier(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: np.conj(z))
        rep = F.energy(mf, w, F.IntegrandSpec("exp_p", DP(1.0)))
        assert rep.energy == np.inf and not rep.admissible

    def test_log_space_overflow_policy(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: 2 * z.real + 1j * z.imag)
        rep = F.energy(mf, w, F.IntegrandSpec("exp_p", DP(800.0)))
        assert rep.energy == np.inf  # beyond double range
        assert rep.log_energy == pytest.approx(1000.0, rel=1e-12)  # 800 * 1.25
        assert rep.normalized == pytest.approx(1.25, rel=1e-12)


class TestGradient:
    def test_zero_at_affine_configuration(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: 2 * z.real + 1j * z.imag)
        grad = F.energy_gradient(mf, w, F.IntegrandSpec("exp_p", DP(1.0)))
        assert np.max(np.abs(grad)) <= 1e-10

    @pytest.mark.parametrize(
        "spec_args",
        [("exp_p", 1.0, 1.0, None), ("exp_p_lambda", 1.0, 0.8, None), ("truncated", 1.0, 1.0, 3)],
    )
    def test_matches_finite_differences(self, perturbed_affine, square17, spec_args):
        kind, p, lam, n_terms = spec_args
        _, w = square17
        spec = F.IntegrandSpec(kind, DP(p, lam), n_terms)
        grad = F.energy_gradient(perturbed_affine, w, spec)
        g = perturbed_affine.grid
        rng = np.random.default_rng(17)
        inter = ~g.boundary_mask
        direction = np.zeros(g.n_nodes, dtype=complex)
        direction[inter] = rng.standard_normal(inter.sum()) + 1j * rng.standard_normal(
            inter.sum()
        )
        eps = 1e-7
        ep = F.energy(
            perturbed_affine.with_values(perturbed_affine.values + eps * direction), w, spec
        ).energy
        em = F.energy(
            perturbed_affine.with_values(perturbed_affine.values - eps * direction), w, spec
        ).energy
        fd = (ep - em) / (2 * eps)
        analytic = float(
            np.sum(grad.real * direction.real + grad.imag * direction.imag)
        )
        assert analytic == pytest.approx(fd, rel=1e-6)

    def test_truncated_gradient_converges_to_exp(self, perturbed_affine, square17):
        _, w = square17
        g_exp = F.energy_gradient(perturbed_affine, w, F.IntegrandSpec("exp_p", DP(1.0)))
        g_tr = F.energy_gradient(
            perturbed_affine, w, F.IntegrandSpec("truncated", DP(1.0), n_terms=40)
        )
        assert np.max(np.abs(g_exp - g_tr)) <= 1e-10

    def test_error_on_inadmissible(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: np.conj(z))
        with pytest.raises(NumericalError):
            F.energy_gradient(mf, w, F.IntegrandSpec("exp_p", DP(1.0)))

    def test_shift_rescales_only(self, perturbed_affine, square17):
        _, w = square17
        spec = F.IntegrandSpec("exp_p", DP(1.0))
        v0, g0 = F.shifted_value_and_grad(perturbed_affine, w, spec, 0.0)
        v1, g1 = F.shifted_value_and_grad(perturbed_affine, w, spec, 2.0)
        assert v0 == pytest.approx(v1 * np.exp(2.0), rel=1e-13)
        np.testing.assert_allclose(g0, g1 * np.exp(2.0), rtol=1e-12)


class TestInverseEnergy:
    def test_identity_matches_direct(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: z)
        spec = F.IntegrandSpec("exp_p", DP(1.0))
        assert F.inverse_energy(mf, w, spec).energy == pytest.approx(
            F.energy(mf, w, spec).energy, rel=1e-14
        )

    def test_affine_jacobian_weighting(self, square17):
        g, w = square17
        mf = G.MapField.from_function(g, lambda z: 2 * z.real + 1j * z.imag)
        rep = F.inverse_energy(mf, w, F.IntegrandSpec("exp_p", DP(1.0)))
        assert rep.energy == pytest.approx(np.exp(1.25) * 2.0, rel=1e-14)

    def test_matches_direct_h_side_quadrature(self):
        # invert numerically onto a w-grid and integrate the h-side energy
        from expdist.grid import invert_on_points
        from expdist.solver import BoundarySpec, SolveConfig, solve

        res = solve(SolveConfig(
            p=1.0, grid_n=65, boundary=BoundarySpec("quartic", eps=0.2), max_iters=60000))
        mf = res.map
        w = G.weight_eval("euclidean", mf.grid)
        spec = F.IntegrandSpec("exp_p", DP(1.0))
        pullback = F.inverse_energy(mf, w, spec)

        img_b = mf.values[mf.grid.boundary_mask]
        pad = 0.001
        xs = np.linspace(img_b.real.min() + pad, img_b.real.max() - pad, 160)
        ys = np.linspace(img_b.imag.min() + pad, img_b.imag.max() - pad, 160)
        ww = (xs[:, None] + 1j * ys[None, :]).ravel()
        hv, found = invert_on_points(mf, ww)
        cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
        # K(w, h) = K(z, f) at z = h(w): interpolate per containing triangle
        from expdist.grid import wirtinger

        df = wirtinger(mf)
        # locate each found w in an image triangle to pick up its K
        tris = mf.grid.triangles
        wv = mf.values[tris]
        from scipy.spatial import cKDTree

        cent = wv.mean(axis=1)
        tree = cKDTree(np.column_stack([cent.real, cent.imag]))
        _, cand = tree.query(np.column_stack([ww.real, ww.imag]), k=12)
        kk_at_w = np.full(ww.shape, np.nan)
        done = np.zeros(ww.shape, dtype=bool)
        for j in range(12):
            todo = ~done
            if not todo.any():
                break
            ti = cand[todo, j]
            w0 = wv[ti, 0]
            d1, d2 = wv[ti, 1] - w0, wv[ti, 2] - w0
            rhs = ww[todo] - w0
            det = (np.conj(d1) * d2).imag
            l1 = (np.conj(rhs) * d2).imag / det
            l2 = (np.conj(d1) * rhs).imag / det
            inside = (l1 >= -1e-12) & (l2 >= -1e-12) & (l1 + l2 <= 1 + 1e-12)
            sel = np.where(todo)[0][inside]
            kk_at_w[sel] = df.big_k[ti[inside]]
            done[sel] = True
        ok = found.ravel() & done
        direct = np.sum(np.exp(1.0 * kk_at_w[ok])) * cell
        assert direct == pytest.approx(pullback.energy, rel=0.01)

    def test_tabulated_weight_rejected(self, square17):
        g, _ = square17
        w = G.weight_eval("tabulated", g, values=np.ones(g.n_triangles))
        mf = G.MapField.from_function(g, lambda z: z)
        with pytest.raises(ConfigurationError):
            F.inverse_energy(mf, w, F.IntegrandSpec("exp_p", DP(1.0)))
