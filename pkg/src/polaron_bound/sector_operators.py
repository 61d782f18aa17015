"""Partial-wave blocks of the electron resolvent and of the field Hessian.

The field side is represented on Gauss-Legendre panels in ``|q|``; each
block is a symmetric matrix in the basis ``sqrt(q^2 dq) f(q)``.  The
electron side uses the finite-difference operator of the Pekar solver on
``u = r f``, so that the orbital is an exact null vector for ``L = 0``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded, eigvalsh_tridiagonal

from .kernels import legendre_q_table, spherical_jn_table
from .pekar_scf import PekarSolution, _tridiagonal, density_transform
from .radial_core import (
    MomentumGrid,
    RadialFunction,
    RadialGrid,
    build_momentum_grid,
    _q0_row_integral,
    cutoff_sector,
    harmonic_number,
)


class DeflationError(RuntimeError):
    """A sector Schrodinger block could not be factorised."""


# panel edges in units of the inverse orbital spread
FIELD_EDGES = (0.0, 1.5, 3.0, 6.0, 12.0, 24.0, 40.0, 60.0)


def orbital_spread(sol: PekarSolution) -> float:
    return float(np.sqrt(sol.second_moment))


def field_grid(sol: PekarSolution, k_cut: float = np.inf, nodes_per_panel: int = 32) -> MomentumGrid:
    """Momentum panels for the field, truncated at ``k_cut``."""
    edges = np.asarray(FIELD_EDGES) / orbital_spread(sol)
    if np.isfinite(k_cut):
        if k_cut <= 0:
            raise ValueError("k_cut must be positive")
        edges = np.concatenate([edges[edges < k_cut], [k_cut]]) if k_cut < edges[-1] else edges
    return build_momentum_grid(edges, nodes_per_panel)


@dataclass
class SectorOperator:
    """Symmetric operator restricted to one angular momentum.

    Either ``matrix`` (dense) or the tridiagonal pair ``diag``/``off`` is
    set.  ``cutoff`` is the momentum truncation the block was built with.
    """

    L: int
    kind: str
    matrix: np.ndarray | None = None
    diag: np.ndarray | None = None
    off: np.ndarray | None = None
    cutoff: float = np.inf

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def lowest(self, count: int = 1) -> np.ndarray:
        if self.matrix is not None:
            return np.linalg.eigvalsh(self.matrix)[:count]
        return eigvalsh_tridiagonal(self.diag, self.off, select="i", select_range=(0, count - 1))


def schrodinger_block(sol: PekarSolution, L: int) -> SectorOperator:
    """``-d^2/dr^2 + L(L+1)/r^2 + V - lambda`` on ``u = r f`` (tridiagonal)."""
    diag, off = _tridiagonal(sol.grid, sol.potential.values, L)
    return SectorOperator(L=L, kind="schrodinger", diag=diag - sol.lambda_pek, off=off)


def _to_banded(diag: np.ndarray, off: np.ndarray) -> np.ndarray:
    ab = np.zeros((2, diag.size))
    ab[0, 1:] = off
    ab[1] = diag
    return ab


class SectorResolvent:
    """Factorised inverse of one Schrodinger block.

    Vectors live on the interior nodes in the ``l^2`` form
    ``sqrt(h) r f(r)``, in which the block is a symmetric matrix.  For
    ``L = 0`` the orbital direction is removed: a banded rank-one lift
    ``s e_p e_p^T`` makes the matrix definite, its inverse maps the
    complement of the orbital onto itself, and solutions are projected.
    """

    def __init__(self, sol: PekarSolution, L: int):
        block = schrodinger_block(sol, L)
        diag = block.diag.copy()
        self.L = L
        self.null = None
        if L == 0:
            u0 = sol.grid.r[:-1] * sol.psi.values[:-1]
            u0 = u0 / np.linalg.norm(u0)
            p = int(np.argmax(np.abs(u0)))
            diag[p] += abs(sol.lambda_pek) / u0[p] ** 2
            self.null = u0
        try:
            self.factor = cholesky_banded(_to_banded(diag, block.off))
        except LinAlgError as exc:
            raise DeflationError(f"sector {L} block is not positive definite") from exc

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.null is None:
            return cho_solve_banded((self.factor, False), rhs)
        u0 = self.null
        rhs = rhs - np.outer(u0, u0 @ rhs) if rhs.ndim == 2 else rhs - u0 * (u0 @ rhs)
        x = cho_solve_banded((self.factor, False), rhs)
        return x - np.outer(u0, u0 @ x) if x.ndim == 2 else x - u0 * (u0 @ x)


def apply_resolvent(sol: PekarSolution, L: int, rhs: RadialFunction, resolvent: SectorResolvent | None = None) -> RadialFunction:
    """Solve ``(-Delta_L + V - lambda) f = Q rhs``.

    ``Q`` removes the orbital for ``L = 0`` and is the identity otherwise;
    for ``L = 0`` the solution is orthogonal to the orbital.

    Raises
    ------
    DeflationError
        If the block cannot be factorised.
    """
    grid = sol.grid
    res = resolvent or SectorResolvent(sol, L)
    r = grid.r[:-1]
    x = res.solve(r * rhs.values[:-1])
    return RadialFunction(grid, np.concatenate([x / r, [0.0]]), sector=L)


@dataclass
class CouplingColumn:
    """Radial profiles ``psi(r) k_L(r, s)`` for every field node ``s``.

    ``columns`` holds them on the interior electron nodes in the ``l^2``
    form used by :class:`SectorResolvent`.  ``basis`` is ``"momentum"``
    (field nodes are ``|q|``) or ``"position"`` (field nodes are ``|y|``).
    ``field_weights`` integrate the field measure ``s^2 ds``.
    """

    L: int
    basis: str
    nodes: np.ndarray
    field_weights: np.ndarray
    columns: np.ndarray
    prefactor: float
    cutoff: float = np.inf


def coupling_columns(sol: PekarSolution, L: int, k_cut: float = np.inf, basis: str = "momentum",
                     nodes: MomentumGrid | RadialGrid | None = None) -> CouplingColumn:
    """Electron-side profiles of the sector-``L`` coupling.

    In the momentum basis the column for ``q`` is ``psi(r) j_L(q r)`` and the
    block kernel carries the prefactor ``2/pi``.  In the position basis the
    column for ``s`` is ``psi(r)`` times the sector coefficient of
    ``-1/(2 pi^2 |x-y|^2)`` (or of its truncated version when ``k_cut`` is
    finite), and the prefactor is 1.
    """
    grid = sol.grid
    r = grid.r[:-1]
    h = grid.h
    psi = sol.psi.values[:-1]
    if basis == "momentum":
        mg = nodes if nodes is not None else field_grid(sol, k_cut)
        if not isinstance(mg, MomentumGrid):
            raise TypeError("momentum basis needs a MomentumGrid")
        jl = spherical_jn_table(np.outer(r, mg.k).ravel(), L)[L].reshape(r.size, mg.n)
        cols = (np.sqrt(h) * r * psi)[:, None] * jl
        return CouplingColumn(L, basis, mg.k, mg.w, cols, 2.0 / np.pi, float(k_cut))
    if basis == "position":
        fg = nodes if nodes is not None else grid
        if not isinstance(fg, RadialGrid):
            raise TypeError("position basis needs a RadialGrid")
        ker = _position_kernel(grid, fg, L, k_cut)
        # sector coefficient in the Y_LM basis: 4 pi / (2L+1) times the Legendre one
        cols = (np.sqrt(h) * r * psi)[:, None] * ker[:-1] * (-4.0 * np.pi / (2 * L + 1) / (2.0 * np.pi**2))
        return CouplingColumn(L, basis, fg.r, fg.w, cols, 1.0, float(k_cut))
    raise ValueError(f"unknown basis {basis!r}")


def _position_kernel(grid: RadialGrid, fg: RadialGrid, L: int, k_cut: float) -> np.ndarray:
    """Legendre coefficient between electron nodes (rows) and field nodes."""
    if np.isfinite(k_cut):
        joint = RadialGrid(r=np.concatenate([grid.r, fg.r]), w=np.ones(grid.n + fg.n),
                           dr=np.ones(grid.n + fg.n), r_max=max(grid.r_max, fg.r_max), scheme="joint")
        full = cutoff_sector(joint, L, k_cut)
        return full[:grid.n, grid.n:]
    idx = np.searchsorted(grid.r, fg.r).clip(0, grid.n - 1)
    if not np.allclose(grid.r[idx], fg.r):
        raise ValueError("position field nodes must be a subset of the electron grid")
    return _subset_kernel(grid, fg, L)


def _subset_kernel(grid: RadialGrid, fg: RadialGrid, L: int) -> np.ndarray:
    """Kernel rows on the electron grid against columns on a field grid.

    Field nodes must be electron nodes.  Where they coincide the singular
    value is replaced using the field-grid quadrature, on which the
    integral over ``s`` is taken.
    """

    ri = grid.r[:, None]
    s = fg.r[None, :]
    chi = (ri**2 + s**2) / (2.0 * ri * s)
    off = chi > 1.0
    pref = (2 * L + 1) / (2.0 * ri * s)
    table = legendre_q_table(chi[off], L)
    qL = np.zeros(chi.shape)
    q0 = np.zeros(chi.shape)
    qL[off] = table[L]
    q0[off] = table[0]
    kmat = pref * qL
    smat = pref * q0
    hit_rows, hit_cols = np.nonzero(~off)
    row_integral = (2 * L + 1) / (2.0 * grid.r[hit_rows]) * _q0_row_integral(grid.r[hit_rows], fg.r_max)
    discrete = np.sum(np.where(off[hit_rows], smat[hit_rows] * fg.w[None, :], 0.0), axis=1)
    diag_limit = -(2 * L + 1) * harmonic_number(L) / (2.0 * grid.r[hit_rows] ** 2)
    kmat[hit_rows, hit_cols] = diag_limit + (row_integral - discrete) / fg.w[hit_cols]
    return kmat


@dataclass
class HessianBlock:
    """One angular-momentum block of the field Hessian.

    Attributes
    ----------
    coupling : ndarray
        Symmetric matrix of the second-order electron response (the block
        of ``T``) in the weighted field basis.
    raw : ndarray
        ``1 - 4 T`` before removing the translation direction.
    matrix : ndarray
        The block used downstream; for ``L = 1`` the translation direction
        is projected out and carries eigenvalue zero.
    zero_mode : ndarray or None
        Unit vector of the translation direction (``L = 1`` only).
    """

    L: int
    cutoff: float
    basis: str
    nodes: np.ndarray
    field_weights: np.ndarray
    coupling: np.ndarray
    raw: np.ndarray
    matrix: np.ndarray
    zero_mode: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])


def translation_profile(sol: PekarSolution, nodes: np.ndarray, basis: str, weights: np.ndarray) -> np.ndarray:
    """Unit vector of the radial profile of ``d phi / dz`` in the weighted basis.

    In momentum space the profile is ``q phi_hat(q)``, proportional to the
    density transform; in position space it is ``phi'(r)``.
    """
    if basis == "momentum":
        prof = density_transform(sol.psi, nodes)
    else:
        prof = np.interp(nodes, sol.grid.r, np.gradient(sol.phi.values, sol.grid.r, edge_order=2))
    vec = np.sqrt(weights) * prof
    return vec / np.linalg.norm(vec)


def hessian_block(sol: PekarSolution, L: int, k_cut: float = np.inf, basis: str = "momentum",
                  nodes: MomentumGrid | RadialGrid | None = None,
                  resolvent: SectorResolvent | None = None) -> HessianBlock:
    """Assemble ``1 - 4 T_L`` (with the ``L = 1`` translation removed).

    ``T_L`` is the sector of ``<psi| h(.) R h(.) |psi>`` with ``R`` the
    reduced resolvent of the Pekar operator.
    """
    cols = coupling_columns(sol, L, k_cut, basis, nodes)
    res = resolvent or SectorResolvent(sol, L)
    x = res.solve(cols.columns)
    g = cols.columns.T @ x
    g = 0.5 * (g + g.T)
    sw = np.sqrt(cols.field_weights / (cols.nodes**2 if basis == "momentum" else 1.0))
    coupling = cols.prefactor * sw[:, None] * g * sw[None, :]
    n = coupling.shape[0]
    raw = np.eye(n) - 4.0 * coupling
    matrix = raw
    zero = None
    diagnostics: dict = {}
    if L == 1:
        zero = translation_profile(sol, cols.nodes, basis, cols.field_weights)
        proj = np.eye(n) - np.outer(zero, zero)
        matrix = proj @ raw @ proj
        matrix = 0.5 * (matrix + matrix.T)
        diagnostics["raw_zero_mode_residual"] = float(np.linalg.norm(raw @ zero))
        diagnostics["raw_zero_mode_rayleigh"] = float(zero @ raw @ zero)
    return HessianBlock(L=L, cutoff=float(k_cut), basis=basis, nodes=cols.nodes,
                        field_weights=cols.field_weights, coupling=coupling, raw=raw,
                        matrix=matrix, zero_mode=zero, diagnostics=diagnostics)


def hessian_blocks(sol: PekarSolution, L_max: int, k_cut: float = np.inf, workers: int = 1,
                   nodes: MomentumGrid | None = None) -> dict[int, HessianBlock]:
    """Blocks ``0..L_max`` on a common field grid, optionally in threads."""
    mg = nodes if nodes is not None else field_grid(sol, k_cut)

    def one(L):
        return L, hessian_block(sol, L, k_cut, "momentum", mg)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return dict(pool.map(one, range(L_max + 1)))
    return dict(one(L) for L in range(L_max + 1))


@dataclass
class DirectTrace:
    """Trace of ``T`` over the whole field space, summed over all sectors.

    ``response(q)`` is ``sum_L 4 pi (2L+1) <psi j_L(q.)|R_L|psi j_L(q.)>``;
    ``Tr T_K = (1/2 pi^2) int_0^K response(q) dq``.  Above ``q_switch`` the
    asymptotic form ``1/q^2 + 4 T_kin/(3 q^4)`` is integrated in closed form.
    """

    cutoff: float
    q: np.ndarray
    dq: np.ndarray
    response: np.ndarray
    q_switch: float
    trace_t: float
    trace_q2_t: float
    low_part: float
    tail_part: float


def sector_response(sol: PekarSolution, q: np.ndarray, L_extra: int = 30, chunk: int = 8,
                    resolvents: dict | None = None, weights: np.ndarray | None = None) -> np.ndarray:
    """``sum_L 4 pi (2L+1) <psi j_L(q.)|R_L|psi j_L(q.)>`` at each ``q``.

    Sectors are summed until ``L > q r_psi + L_extra`` with ``r_psi`` the
    radius beyond which the orbital is below ``1e-9`` of its peak.
    """
    grid = sol.grid
    r = grid.r[:-1]
    psi = sol.psi.values[:-1]
    mask = np.abs(psi) > 1e-9 * np.abs(psi).max()
    r_psi = float(r[mask].max())
    base = np.sqrt(grid.h) * r * psi
    resolvents = {} if resolvents is None else resolvents
    out = np.zeros(q.size)
    for a in range(0, q.size, chunk):
        qc = q[a:a + chunk]
        lmax = int(np.ceil(qc.max() * r_psi)) + L_extra
        table = spherical_jn_table(np.outer(r, qc).ravel(), lmax).reshape(lmax + 1, r.size, qc.size)
        tops = np.ceil(qc * r_psi).astype(int) + L_extra
        for L in range(lmax + 1):
            active = tops >= L
            if not active.any():
                break
            if L not in resolvents:
                resolvents[L] = SectorResolvent(sol, L)
            b = base[:, None] * table[L][:, active]
            x = resolvents[L].solve(b)
            vals = np.zeros(qc.size)
            vals[active] = np.sum(b * x, axis=0)
            out[a:a + chunk] += 4.0 * np.pi * (2 * L + 1) * vals
    return out


def direct_trace(sol: PekarSolution, k_cut: float = np.inf, q_switch: float = 1.0, nodes_per_panel: int = 16,
                 resolvents: dict | None = None) -> DirectTrace:
    """``Tr T_K`` and ``Tr(q^2 T_K)`` without a sector cutoff."""
    top = min(k_cut, q_switch)
    length = orbital_spread(sol)
    edges = np.array([0.0, 1.5, 3.0, 6.0, 12.0, 24.0, 40.0]) / length
    edges = np.concatenate([edges[edges < top], [top]])
    mg = build_momentum_grid(edges, nodes_per_panel)
    resp = sector_response(sol, mg.k, resolvents=resolvents)
    c = 1.0 / (2.0 * np.pi**2)
    low = c * float(np.dot(mg.dk, resp))
    low_q2 = c * float(np.dot(mg.dk, resp * mg.k**2))
    tail = tail_q2 = 0.0
    if k_cut > q_switch:
        t4 = 4.0 * sol.kinetic / 3.0
        inv = 0.0 if not np.isfinite(k_cut) else 1.0 / k_cut
        tail = c * ((1.0 / q_switch - inv) + t4 / 3.0 * (1.0 / q_switch**3 - inv**3))
        if np.isfinite(k_cut):
            tail_q2 = c * ((k_cut - q_switch) + t4 * (1.0 / q_switch - inv))
        else:
            tail_q2 = np.inf
    return DirectTrace(cutoff=float(k_cut), q=mg.k, dq=mg.dk, response=resp, q_switch=q_switch,
                       trace_t=low + tail, trace_q2_t=low_q2 + tail_q2, low_part=low, tail_part=tail)
