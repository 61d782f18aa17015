import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from polaron_bound.pekar_scf import solve_pekar
from polaron_bound.radial_core import RadialFunction, build_grid
from polaron_bound.sector_operators import (SectorResolvent, _position_kernel, apply_resolvent, coupling_columns,
                                            field_grid, hessian_block, hessian_blocks, schrodinger_block,
                                            translation_profile)


@pytest.fixture(scope="module")
def coarse_sol():
    return solve_pekar(build_grid(1000, 400.0))


def _apply_block(sol, L, f):
    """``(-Delta_L + V - lambda) f`` through the tridiagonal block."""
    block = schrodinger_block(sol, L)
    r = sol.grid.r[:-1]
    u = r * f[:-1]
    hu = block.diag * u
    hu[:-1] += block.off * u[1:]
    hu[1:] += block.off * u[:-1]
    return hu / r


# -- Schrodinger blocks --------------------------------------------------------

def test_schrodinger_l1_gap(sol, default_sol):
    gaps = [schrodinger_block(s, 1).lowest(1)[0] for s in (sol, default_sol)]
    assert gaps[0] > 0 and gaps[1] > 0
    assert gaps[0] == pytest.approx(gaps[1], rel=1e-3)


def test_schrodinger_centrifugal_floor(sol):
    L = 10
    assert schrodinger_block(sol, L).lowest(1)[0] >= L * (L + 1) / sol.grid.r_max**2


def test_schrodinger_blocks_symmetric(sol):
    d = schrodinger_block(sol, 3).dense()
    assert np.max(np.abs(d - d.T)) <= 1e-10 * np.max(np.abs(d))


# -- resolvent -----------------------------------------------------------------

def test_resolvent_annihilates_orbital(sol):
    x = apply_resolvent(sol, 0, sol.psi)
    assert np.max(np.abs(x.values)) < 1e-12


@given(L=st.integers(0, 6), centre=st.floats(1.0, 150.0), width=st.floats(2.0, 40.0))
@settings(max_examples=25, deadline=None)
def test_resolvent_residual(coarse_sol, L, centre, width):
    sol = coarse_sol
    r = sol.grid.r
    rhs = np.exp(-((r - centre) / width) ** 2)
    rhs[-1] = 0.0
    x = apply_resolvent(sol, L, RadialFunction(sol.grid, rhs, L))
    target = rhs.copy()
    if L == 0:
        u0 = r * sol.psi.values
        target -= sol.psi.values * np.dot(r[:-1] * rhs[:-1], u0[:-1]) / np.dot(u0[:-1], u0[:-1])
        assert abs(np.dot(r[:-1] ** 2 * x.values[:-1], sol.psi.values[:-1])) < 1e-10 * np.linalg.norm(x.values)
    res = _apply_block(sol, L, x.values) - target[:-1]
    assert np.linalg.norm(res * r[:-1]) <= 1e-10 * np.linalg.norm(target[:-1] * r[:-1])


def test_resolvent_reproduces_translation(sol):
    """The shifted orbital solves ``h_1 psi' = -V' psi``."""
    r = sol.grid.r
    dv = np.gradient(sol.potential.values, r, edge_order=2)
    dpsi = np.gradient(sol.psi.values, r, edge_order=2)
    x = apply_resolvent(sol, 1, RadialFunction(sol.grid, dv * sol.psi.values, 1))
    bulk = r < 100.0
    assert np.max(np.abs(x.values[bulk] + dpsi[bulk])) <= 1e-5 * np.max(np.abs(dpsi))


def test_resolvent_reuse_matches(sol):
    res = SectorResolvent(sol, 2)
    rhs = RadialFunction(sol.grid, np.exp(-sol.grid.r / 30.0), 2)
    a = apply_resolvent(sol, 2, rhs)
    b = apply_resolvent(sol, 2, rhs, res)
    np.testing.assert_array_equal(a.values, b.values)


# -- coupling columns ------------------------------------------------------------

def test_l0_columns_rebuild_field(coarse_sol):
    sol = coarse_sol
    g = sol.grid
    cols = coupling_columns(sol, 0, np.inf, "position", g)
    # undo the l^2 form sqrt(h) r and integrate with the Simpson weights
    val = (g.dr[:-1] / np.sqrt(g.h)) * g.r[:-1] * sol.psi.values[:-1] @ cols.columns
    bulk = g.r < 100.0
    np.testing.assert_allclose(val[bulk], -sol.phi.values[bulk], rtol=1e-5)


def _bessel_oracle(L, r, s, K):
    f = lambda k: special.spherical_jn(L, k * r) * special.spherical_jn(L, k * s) * k
    return (2 * L + 1) * integrate.quad(f, 0.0, K, limit=400, epsabs=1e-13, epsrel=1e-11)[0]


def test_cutoff_kernel_oracle_pairs(coarse_sol):
    g = coarse_sol.grid
    fg = build_grid(25, 100.0)
    for L, K in [(0, 1.0), (2, 2.0)]:
        ker = _position_kernel(g, fg, L, K)
        for i, j in [(10, 3), (50, 7), (120, 12), (300, 20), (15, 24)]:
            assert ker[i, j] == pytest.approx(_bessel_oracle(L, g.r[i], fg.r[j], K), rel=1e-7, abs=1e-12)


def test_cutoff_columns_converge(coarse_sol):
    sol = coarse_sol
    fg = build_grid(25, 100.0)
    full = coupling_columns(sol, 2, np.inf, "position", fg).columns
    # the uncut kernel is logarithmically singular where r = s; compare away from it
    away = np.abs(sol.grid.r[:-1, None] - fg.r[None, :]) >= 2.0
    errs = [np.linalg.norm((coupling_columns(sol, 2, K, "position", fg).columns - full)[away])
            for K in (0.5, 1.0, 2.0, 4.0, 8.0)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 0.05 * np.linalg.norm(full[away])


def test_column_norms_decay_in_l(coarse_sol):
    fg = build_grid(25, 100.0)
    norms = [np.linalg.norm(coupling_columns(coarse_sol, L, np.inf, "position", fg).columns[:, 5]) for L in range(8)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_momentum_columns_decay_in_l(sol):
    mg = field_grid(sol)
    norms = [np.linalg.norm(coupling_columns(sol, L, np.inf, "momentum", mg).columns[:, 40]) for L in range(8)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_momentum_field_grid_truncates(sol):
    mg = field_grid(sol, 0.05)
    assert mg.k_max == pytest.approx(0.05)
    with pytest.raises(ValueError):
        field_grid(sol, -1.0)


def test_position_basis_needs_subset_nodes(coarse_sol):
    with pytest.raises(ValueError):
        coupling_columns(coarse_sol, 0, np.inf, "position", build_grid(7, 100.0))


# -- Hessian blocks -----------------------------------------------------------

def test_hessian_spectrum_bounds(blocks12):
    for L, b in blocks12.items():
        assert np.max(np.abs(b.matrix - b.matrix.T)) <= 1e-10
        vals = np.linalg.eigvalsh(b.matrix)
        assert vals.min() >= -1e-6, L
        assert vals.max() <= 1.0 + 1e-6, L


def test_l1_translation_direction_under_refinement():
    lows, overlaps = [], []
    for n in (1000, 2000, 4000, 8000):
        s = solve_pekar(build_grid(n, 400.0))
        b = hessian_block(s, 1, np.inf, "momentum", field_grid(s))
        vals, vecs = np.linalg.eigh(b.raw)
        lows.append(vals[0])
        overlaps.append(abs(vecs[:, 0] @ b.zero_mode))
    assert all(b < a for a, b in zip(lows, lows[1:]))
    assert lows[-1] < 1e-6
    assert min(overlaps) >= 0.999


def test_translation_profile_matches_field_gradient(sol):
    mg = field_grid(sol)
    a = translation_profile(sol, mg.k, "momentum", mg.w)
    # q phi_hat(q) is the transform of the radial derivative
    b = np.sqrt(mg.w) * mg.k * sol.phi_hat(mg.k)
    np.testing.assert_allclose(a, b / np.linalg.norm(b), atol=1e-12)


def test_deflated_l1_block(blocks12):
    b = blocks12[1]
    assert np.linalg.norm(b.matrix @ b.zero_mode) < 1e-12
    assert abs(b.diagnostics["raw_zero_mode_rayleigh"]) < 1e-5


def test_gaps_stable_under_refinement(sol, default_sol):
    for L in (0, 2):
        taus = [np.linalg.eigvalsh(hessian_block(s, L).matrix).min() for s in (sol, default_sol)]
        assert taus[0] > 0.1
        assert taus[0] == pytest.approx(taus[1], rel=1e-3)


def test_cutoff_blocks_tend_to_uncut(sol):
    mg = field_grid(sol)
    full = hessian_block(sol, 2, np.inf, "momentum", mg).matrix
    # the field grid already ends below these cutoffs, so the blocks coincide
    cut = hessian_block(sol, 2, 20.0, "momentum", mg).matrix
    np.testing.assert_allclose(cut, full, atol=1e-14)


def test_threaded_blocks_match(sol):
    a = hessian_blocks(sol, 4)
    b = hessian_blocks(sol, 4, workers=2)
    for L in a:
        np.testing.assert_array_equal(a[L].matrix, b[L].matrix)
