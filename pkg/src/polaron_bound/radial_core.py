"""Radial grids, partial-wave kernels and radial Fourier transforms.

Everything downstream works with functions of ``|x|`` on a one-dimensional
grid and with the angular-momentum sectors of rotation-invariant kernels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import eval_legendre, roots_legendre

from .kernels import legendre_q_table, spherical_jn_table


class GridError(ValueError):
    """Invalid grid parameters."""


class ResolutionError(RuntimeError):
    """A requested quantity is not resolved by the chosen discretisation."""


def panel_weights(x: np.ndarray) -> np.ndarray:
    """Composite Simpson weights on arbitrary increasing nodes.

    Exact for quadratics on every pair of intervals.  An odd number of
    intervals is closed with the one-interval rule that reuses the last
    three nodes, so the result keeps third-order accuracy throughout.

    Parameters
    ----------
    x : ndarray
        Strictly increasing nodes, at least two.

    Returns
    -------
    ndarray
        Weights ``w`` such that ``sum(w * g(x))`` approximates the integral
        of ``g`` over ``[x[0], x[-1]]``.
    """
    x = np.asarray(x, dtype=float)
    m = x.size - 1
    if m < 1:
        raise GridError("need at least two nodes")
    w = np.zeros_like(x)
    if m == 1:
        h = x[1] - x[0]
        w[:] = 0.5 * h
        return w
    h = np.diff(x)
    pairs = m - (m % 2)
    h0 = h[0:pairs:2]
    h1 = h[1:pairs:2]
    s = h0 + h1
    i0 = np.arange(0, pairs, 2)
    np.add.at(w, i0, s / 6.0 * (2.0 - h1 / h0))
    np.add.at(w, i0 + 1, s**3 / (6.0 * h0 * h1))
    np.add.at(w, i0 + 2, s / 6.0 * (2.0 - h0 / h1))
    if m % 2:
        a, b = h[-2], h[-1]
        w[-3] += -(b**3) / (6.0 * a * (a + b))
        w[-2] += b * (b + 3.0 * a) / (6.0 * a)
        w[-1] += b * (2.0 * b + 3.0 * a) / (6.0 * (a + b))
    return w


@dataclass(frozen=True)
class RadialGrid:
    """Radial nodes with weights for the measure ``r**2 dr``.

    Attributes
    ----------
    r : ndarray
        Nodes, strictly increasing, ``r[0] > 0`` and ``r[-1] == r_max``.
    w : ndarray
        Positive weights, ``sum(w * f)`` approximates ``int f r^2 dr``.
    dr : ndarray
        Weights for the plain measure ``dr`` on the same nodes.
    """

    r: np.ndarray
    w: np.ndarray
    dr: np.ndarray
    r_max: float
    scheme: str

    @property
    def n(self) -> int:
        return int(self.r.size)

    @property
    def h(self) -> float:
        """Node spacing of a uniform grid."""
        if self.scheme != "uniform":
            raise GridError("spacing is only defined for uniform grids")
        return float(self.r_max / self.n)

    def integrate(self, values: np.ndarray) -> float:
        """``int f(r) r^2 dr`` over ``[0, r_max]``."""
        return float(np.dot(self.w, values))

    def volume_integral(self, values: np.ndarray) -> float:
        """Integral over the ball of a radial function."""
        return 4.0 * np.pi * self.integrate(values)


def build_grid(n: int, r_max: float, scheme: str = "uniform", r_min: float | None = None) -> RadialGrid:
    """Build a radial grid.

    Parameters
    ----------
    n : int
        Number of nodes.
    r_max : float
        Outer radius, which is also the last node.
    scheme : {"uniform", "log-uniform"}
        ``uniform`` uses ``r_i = i h`` for ``i = 1..n``; ``log-uniform`` is
        geometric between ``r_min`` and ``r_max``.
    r_min : float, optional
        First node of the log grid, default ``1e-5 * r_max``.
    """
    if n < 4:
        raise GridError("n must be at least 4")
    if not np.isfinite(r_max) or r_max <= 0:
        raise GridError("r_max must be positive")
    if scheme == "uniform":
        h = r_max / n
        r = h * np.arange(1, n + 1, dtype=float)
        r[-1] = r_max
        full = panel_weights(np.concatenate([[0.0], r]))
        dr = full[1:]
    elif scheme == "log-uniform":
        r_min = 1e-5 * r_max if r_min is None else float(r_min)
        if not 0 < r_min < r_max:
            raise GridError("need 0 < r_min < r_max")
        t = np.linspace(np.log(r_min), np.log(r_max), n)
        r = np.exp(t)
        r[-1] = r_max
        # int g dr = int g r d(ln r), plus the small core [0, r_min]
        dr = panel_weights(t) * r
        dr[0] += r_min / 3.0
    else:
        raise GridError(f"unknown grid scheme {scheme!r}")
    w = dr * r**2
    if np.any(w <= 0):
        raise GridError("quadrature weights must be positive")
    return RadialGrid(r=r, w=w, dr=dr, r_max=float(r_max), scheme=scheme)


@dataclass(frozen=True)
class MomentumGrid:
    """Gauss-Legendre panels in ``|k|``.

    ``dk`` integrates against ``dk``; ``w`` against ``k**2 dk``.
    """

    k: np.ndarray
    dk: np.ndarray
    edges: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return self.dk * self.k**2

    @property
    def n(self) -> int:
        return int(self.k.size)

    @property
    def k_max(self) -> float:
        return float(self.edges[-1])

    def truncate(self, k_cut: float) -> "MomentumGrid":
        """Grid restricted to ``k <= k_cut`` with the panels cut at ``k_cut``."""
        if k_cut >= self.k_max:
            return self
        per_panel = self.n // (self.edges.size - 1)
        edges = np.concatenate([self.edges[self.edges < k_cut], [k_cut]])
        return build_momentum_grid(edges, per_panel)


def build_momentum_grid(edges, nodes_per_panel: int = 32) -> MomentumGrid:
    """Composite Gauss-Legendre rule on the given panel edges."""
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0) or edges[0] < 0:
        raise GridError("panel edges must be increasing and non-negative")
    x, wx = roots_legendre(int(nodes_per_panel))
    ks, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        ks.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * wx)
    return MomentumGrid(k=np.concatenate(ks), dk=np.concatenate(ws), edges=edges)


@dataclass
class RadialFunction:
    """Samples of a function of ``|x|`` (or of ``|k|``) on a grid.

    ``sector`` is the angular momentum the radial profile belongs to.
    """

    grid: RadialGrid | MomentumGrid
    values: np.ndarray
    sector: int = 0

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        nodes = self.grid.r if isinstance(self.grid, RadialGrid) else self.grid.k
        if self.values.shape != nodes.shape:
            raise GridError("values do not match the grid")

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.r if isinstance(self.grid, RadialGrid) else self.grid.k

    def norm2(self) -> float:
        """Radial ``L^2`` norm squared, ``int |f|^2 r^2 dr``."""
        return float(np.dot(self.grid.w, self.values**2))


@dataclass
class SectorKernel:
    """Sector-``L`` coefficient of a rotation-invariant two-point kernel.

    ``matrix[i, j]`` samples ``k_L(r_i, r_j)`` where the kernel equals
    ``sum_L k_L(r, s) P_L(cos gamma)``.  For the plain inverse square the
    diagonal holds the singularity-corrected value, so that
    ``matrix @ (grid.w * f)`` approximates ``int k_L(r, s) f(s) s^2 ds``.
    """

    L: int
    kind: str
    matrix: np.ndarray
    grid: RadialGrid
    cutoff: float | None = None
    meta: dict = field(default_factory=dict)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.matrix @ (self.grid.w * f)


def harmonic_number(L: int) -> float:
    return float(np.sum(1.0 / np.arange(1, L + 1))) if L > 0 else 0.0


def _q0_row_integral(r: np.ndarray, R: float) -> np.ndarray:
    """``int_0^R s ln((r+s)/|r-s|) ds`` in closed form."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(r < R, 0.5 * (R**2 - r**2) * np.log((R + r) / (R - r)), 0.0)
    return log_term + r * R


def inverse_square_sector(grid: RadialGrid, L: int, rows: np.ndarray | None = None) -> np.ndarray:
    """Rows of the corrected sector matrix of ``1/|x-y|^2``.

    The coefficient is ``(2L+1) Q_L(chi) / (2 r s)`` with
    ``chi = (r^2+s^2)/(2 r s)``.  The logarithmic diagonal is replaced by the
    value that makes each row integrate the ``Q_0``-type singular part
    exactly (singularity subtraction).
    """
    r = grid.r
    rows = np.arange(r.size) if rows is None else np.asarray(rows)
    ri = r[rows][:, None]
    s = r[None, :]
    chi = (ri**2 + s**2) / (2.0 * ri * s)
    off = chi > 1.0
    pref = (2 * L + 1) / (2.0 * ri * s)
    qL = np.zeros(chi.shape)
    q0 = np.zeros(chi.shape)
    table = legendre_q_table(chi[off], L)
    qL[off] = table[L]
    q0[off] = table[0]
    kmat = pref * qL
    smat = pref * q0
    wrow = grid.w[None, :]
    row_integral = (2 * L + 1) / (2.0 * r[rows]) * _q0_row_integral(r[rows], grid.r_max)
    discrete = np.sum(np.where(off, smat * wrow, 0.0), axis=1)
    diag_limit = -(2 * L + 1) * harmonic_number(L) / (2.0 * r[rows] ** 2)
    diag = diag_limit + (row_integral - discrete) / grid.w[rows]
    kmat[np.arange(rows.size), rows] = diag
    return kmat


def cutoff_sector(grid: RadialGrid, L: int, k_cut: float, n_k: int | None = None) -> np.ndarray:
    """Sector matrix of the momentum-truncated inverse square.

    ``(2L+1) int_0^K j_L(k r) j_L(k s) k dk``, which tends to the plain
    coefficient as ``K`` grows.
    """
    if n_k is None:
        n_k = int(0.8 * k_cut * grid.r_max) + 64
    per_panel = 32
    panels = max(1, int(np.ceil(n_k / per_panel)))
    mg = build_momentum_grid(np.linspace(0.0, k_cut, panels + 1), per_panel)
    jl = spherical_jn_table(np.outer(grid.r, mg.k).ravel(), L)[L].reshape(grid.n, mg.n)
    return (2 * L + 1) * (jl * (mg.dk * mg.k)) @ jl.T


def sector_kernel(grid: RadialGrid, L: int, kind: str = "inverse_square", k_cut: float | None = None) -> SectorKernel:
    """Sector-``L`` matrix of ``1/|x-y|^2`` or of its momentum-truncated version.

    Parameters
    ----------
    grid : RadialGrid
    L : int
        Angular momentum, ``L >= 0``.
    kind : {"inverse_square", "inverse_square_cutoff"}
    k_cut : float, optional
        Momentum cutoff, required for the truncated kind.
    """
    if L < 0:
        raise ValueError("L must be non-negative")
    if kind == "inverse_square":
        return SectorKernel(L=L, kind=kind, matrix=inverse_square_sector(grid, L), grid=grid)
    if kind == "inverse_square_cutoff":
        if k_cut is None or not np.isfinite(k_cut) or k_cut <= 0:
            raise ValueError("a positive finite k_cut is required")
        return SectorKernel(L=L, kind=kind, matrix=cutoff_sector(grid, L, k_cut), grid=grid, cutoff=float(k_cut))
    raise ValueError(f"unknown kernel kind {kind!r}")


def reconstruct_inverse_square(r: float, s: float, t: np.ndarray, L_max: int) -> np.ndarray:
    """Partial-wave sum of ``1/|x-y|^2`` truncated at ``L_max``."""
    chi = (r * r + s * s) / (2.0 * r * s)
    q = legendre_q_table(np.array([chi]), L_max)[:, 0]
    total = np.zeros_like(np.asarray(t, dtype=float))
    for L in range(L_max + 1):
        total += (2 * L + 1) * q[L] / (2.0 * r * s) * eval_legendre(L, t)
    return total


def bessel_matrix(r: np.ndarray, k: np.ndarray, L: int) -> np.ndarray:
    """``j_L(k r)`` with shape ``(r.size, k.size)``."""
    x = np.outer(r, k)
    if L == 0:
        return np.sinc(x / np.pi)
    return spherical_jn_table(x.ravel(), L)[L].reshape(x.shape)


def fourier_radial(f: RadialFunction, L: int, kgrid: MomentumGrid | np.ndarray) -> np.ndarray:
    """Unitary sector-``L`` Hankel transform.

    ``fhat(k) = sqrt(2/pi) int f(r) j_L(k r) r^2 dr``.  The same formula
    inverts the transform, so applying it to a momentum profile (with
    ``f.grid`` a :class:`MomentumGrid`) returns position-space values.
    """
    k = kgrid.k if isinstance(kgrid, MomentumGrid) else np.asarray(kgrid, dtype=float)
    nodes = f.nodes
    out = np.empty(k.size)
    chunk = max(1, int(4e6 // max(nodes.size, 1)))
    weighted = f.grid.w * f.values
    for a in range(0, k.size, chunk):
        out[a:a + chunk] = weighted @ bessel_matrix(nodes, k[a:a + chunk], L)
    return np.sqrt(2.0 / np.pi) * out


def legendre_project(field_fn, grid: RadialGrid, L_max: int, n_angle: int = 64) -> list[RadialFunction]:
    """Legendre coefficients of an axially symmetric field.

    ``field_fn(r, t)`` is evaluated on a broadcast grid of radii and
    ``t = cos(theta)`` and expanded as ``sum_L f_L(r) P_L(t)``.

    Raises
    ------
    ResolutionError
        If ``L_max`` exceeds what ``n_angle`` Gauss nodes can resolve.
    """
    if L_max > n_angle - 1:
        raise ResolutionError(f"L_max={L_max} needs at least {L_max + 1} angular nodes")
    t, wt = roots_legendre(n_angle)
    values = np.asarray(field_fn(grid.r[:, None], t[None, :]), dtype=float)
    out = []
    for L in range(L_max + 1):
        coeff = 0.5 * (2 * L + 1) * values @ (wt * eval_legendre(L, t))
        out.append(RadialFunction(grid, coeff, sector=L))
    return out


def sector_norm2(components: list[RadialFunction]) -> float:
    """``||f||^2`` over the ball from Legendre coefficients."""
    return float(sum(4.0 * np.pi / (2 * c.sector + 1) * c.norm2() for c in components))


def inverse_square_convolution_constant() -> dict:
    """``int dz |u-z|^-2 |v-z|^-2`` at ``|u-v| = 1``, two ways.

    Spherical coordinates centred at ``u`` reduce it to
    ``2 pi int_0^inf ln|(1+r)/(1-r)| dr / r``; prolate spheroidal
    coordinates with foci ``u, v`` give a product of two one-dimensional
    integrals.  The closed form is ``pi**3``.
    """
    def radial(r):
        return np.log(abs((1.0 + r) / (1.0 - r))) / r

    inner, _ = integrate.quad(radial, 0.0, 1.0, limit=200)
    # r -> 1/r maps (1, inf) back onto (0, 1) with the same integrand
    spherical = 2.0 * np.pi * 2.0 * inner

    # foci at distance 2a = 1: |u-z| = a(xi+eta), |v-z| = a(xi-eta),
    # volume a^3 (xi^2 - eta^2) dxi deta dphi
    a = 0.5

    prolate_val, _ = integrate.dblquad(
        lambda eta, xi: 1.0 / (xi * xi - eta * eta), 1.0, np.inf, -1.0, 1.0, epsabs=1e-13, epsrel=1e-12
    )
    prolate = 2.0 * np.pi * a**3 / a**4 * prolate_val
    return {"spherical": spherical, "prolate": prolate, "closed_form": np.pi**3}
