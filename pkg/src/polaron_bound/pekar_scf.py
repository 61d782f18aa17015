"""Radial self-consistent solution of the Pekar problem.

The electron density ``rho = psi^2`` generates the field
``phi = rho * |x|^-2 / (2 pi^2)`` and the potential
``V = -(1/2pi) rho * |x|^-1``; ``psi`` is the ground state of ``-Delta + V``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal
from scipy.special import roots_legendre

from .radial_core import (
    MomentumGrid,
    RadialFunction,
    RadialGrid,
    build_momentum_grid,
    panel_weights,
)


class SCFError(RuntimeError):
    """The fixed-point iteration failed to converge."""

    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


class ConstantConventionError(RuntimeError):
    """Two routes to the same potential disagree."""


GAUSSIAN_WIDTH = 12.0 * np.pi * np.sqrt(np.pi / 2.0)


@dataclass(frozen=True)
class ScfSettings:
    """Fixed-point iteration controls.

    ``tol`` bounds both the sup-norm potential update and the eigenvalue
    increment.  ``mixing`` is the weight of the new potential.
    """

    mixing: float = 0.5
    tol: float = 1e-10
    max_iter: int = 5000
    init_width: float = GAUSSIAN_WIDTH


@dataclass
class PekarSolution:
    """Converged minimiser and the derived scalars.

    Attributes
    ----------
    grid : RadialGrid
        Uniform grid used by the solver.
    psi, phi, potential : RadialFunction
        Electron orbital, induced field and Newton potential.
    momentum : MomentumGrid
        Grid carrying ``density_hat`` (``rho`` transform with value 1 at 0).
    e_pek, lambda_pek : float
        Minimal energy and orbital eigenvalue.
    kinetic : float
        ``||grad psi||^2``.
    phi_norm2, grad_phi_norm2, lap_phi_norm2 : float
        ``||phi||^2``, ``||grad phi||^2`` and ``||Delta phi||^2``.
    """

    grid: RadialGrid
    psi: RadialFunction
    phi: RadialFunction
    potential: RadialFunction
    momentum: MomentumGrid
    density_hat: np.ndarray
    e_pek: float
    lambda_pek: float
    kinetic: float
    phi_norm2: float
    grad_phi_norm2: float
    lap_phi_norm2: float
    iterations: int
    residual: float
    settings: ScfSettings
    history: list = field(default_factory=list, repr=False)

    @property
    def m_lp(self) -> float:
        """Effective mass ``(2/3) ||grad phi||^2``."""
        return 4.0 * self.lambda_gauss

    @property
    def lambda_gauss(self) -> float:
        """Gaussian rate ``||grad phi||^2 / 6``."""
        return self.grad_phi_norm2 / 6.0

    @property
    def second_moment(self) -> float:
        """``<r^2>`` of the density."""
        return self.grid.volume_integral(self.psi.values**2 * self.grid.r**2)

    def virial_residuals(self) -> dict:
        """Relative violations of ``e = -T``, ``lambda = 3 e`` and ``||phi||^2 = -2 e``."""
        e = self.e_pek
        return {
            "energy_kinetic": abs(e + self.kinetic) / abs(e),
            "eigenvalue": abs(self.lambda_pek - 3.0 * e) / abs(e),
            "field_norm": abs(self.phi_norm2 + 2.0 * e) / abs(e),
        }

    def phi_hat(self, k: np.ndarray | None = None) -> np.ndarray:
        """Unitary transform of ``phi`` (a function of ``|k|``)."""
        if k is None:
            return self.density_hat / self.momentum.k / (2.0 * np.pi) ** 1.5
        return density_transform(self.psi, k) / np.asarray(k) / (2.0 * np.pi) ** 1.5

    def psi_spline(self) -> CubicSpline:
        """Even cubic spline of ``psi`` valid on ``[0, r_max]``."""
        return even_spline(self.grid.r, self.psi.values)


def even_spline(r: np.ndarray, values: np.ndarray) -> CubicSpline:
    """Spline of an even radial profile using its mirror image for ``r < 0``."""
    x = np.concatenate([-r[::-1], [0.0], r])
    # the value at the origin from the even quartic through the first nodes
    a = np.polyfit(r[:4] ** 2, values[:4], 2)
    y = np.concatenate([values[::-1], [a[-1]], values])
    return CubicSpline(x, y)


def newton_potential(grid: RadialGrid, density: np.ndarray) -> np.ndarray:
    """``-(1/2pi) int rho(y)/|x-y| dy`` for a radial density."""
    r = grid.r
    rr = np.concatenate([[0.0], r])
    inner = cumulative_simpson(np.concatenate([[0.0], density * r**2]), x=rr, initial=0.0)[1:]
    outer = cumulative_simpson(np.concatenate([[0.0], density * r]), x=rr, initial=0.0)[1:]
    outer = outer[-1] - outer
    return -2.0 * (inner / r + outer)


def _tridiagonal(grid: RadialGrid, potential: np.ndarray, L: int = 0):
    """Finite-difference matrix of ``-d^2/dr^2 + L(L+1)/r^2 + V`` on ``u = r f``.

    Interior nodes ``r_1 .. r_{n-1}``; ``u`` vanishes at 0 and ``r_max``.
    """
    h = grid.h
    r = grid.r[:-1]
    diag = 2.0 / h**2 + L * (L + 1) / r**2 + potential[:-1]
    off = -np.ones(r.size - 1) / h**2
    return diag, off


def _ground_state(grid: RadialGrid, potential: np.ndarray):
    diag, off = _tridiagonal(grid, potential)
    lam, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    u = vec[:, 0]
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    psi = np.concatenate([u / grid.r[:-1], [0.0]])
    psi /= np.sqrt(grid.volume_integral(psi**2))
    return float(lam[0]), psi


def _kinetic(grid: RadialGrid, psi: np.ndarray) -> float:
    u = np.concatenate([[0.0], psi * grid.r])
    return float(4.0 * np.pi * np.sum(np.diff(u) ** 2) / grid.h)


def density_transform(psi: RadialFunction, k: np.ndarray) -> np.ndarray:
    """``int psi^2 e^{-ikx} dx``, normalised to 1 at ``k = 0``."""
    k = np.asarray(k, dtype=float)
    grid = psi.grid
    weighted = 4.0 * np.pi * grid.w * psi.values**2
    out = np.empty(k.size)
    chunk = max(1, int(4e6 // grid.n))
    for a in range(0, k.size, chunk):
        out[a:a + chunk] = weighted @ np.sinc(np.outer(grid.r, k[a:a + chunk]) / np.pi)
    return out


def orbital_transform(psi: RadialFunction, k: np.ndarray) -> np.ndarray:
    """Non-unitary transform ``int psi e^{-ikx} dx``."""
    grid = psi.grid
    weighted = 4.0 * np.pi * grid.w * psi.values
    return weighted @ np.sinc(np.outer(grid.r, np.asarray(k, dtype=float)) / np.pi)


def fine_momentum_grid(grid: RadialGrid, length: float) -> MomentumGrid:
    """Panels in ``|k|`` resolving oscillations out to ``r_max``.

    The upper limit ``100 / length`` sits far into the exponential decay of
    the transforms of a profile with spread ``length``.
    """
    edges = length ** -1 * np.array([0.0, 1.5, 3.0, 6.0, 12.0, 25.0, 50.0, 100.0])
    per_panel = 40
    refined = [edges[0]]
    for a, b in zip(edges[:-1], edges[1:]):
        # average spacing ~ 1 / r_max keeps j_0(k r_max) resolved
        pieces = max(1, int(np.ceil((b - a) * grid.r_max / (0.8 * per_panel))))
        refined.extend(np.linspace(a, b, pieces + 1)[1:])
    return build_momentum_grid(np.array(refined), per_panel)


def _field_from_density(grid: RadialGrid, mg: MomentumGrid, rho_hat: np.ndarray) -> np.ndarray:
    out = np.empty(grid.n)
    weighted = mg.dk * rho_hat * mg.k
    chunk = max(1, int(4e6 // mg.n))
    for a in range(0, grid.n, chunk):
        out[a:a + chunk] = np.sinc(np.outer(grid.r[a:a + chunk], mg.k) / np.pi) @ weighted
    return out / (2.0 * np.pi**2)


def solve_pekar(grid: RadialGrid, settings: ScfSettings | None = None) -> PekarSolution:
    """Solve the radial Pekar problem by damped fixed-point iteration.

    Parameters
    ----------
    grid : RadialGrid
        Uniform grid; the orbital vanishes at ``r_max``.
    settings : ScfSettings, optional

    Returns
    -------
    PekarSolution

    Raises
    ------
    SCFError
        If the iteration does not meet ``settings.tol`` within
        ``settings.max_iter`` steps.  The history is attached.
    """
    settings = settings or ScfSettings()
    if grid.scheme != "uniform":
        raise ValueError("the SCF solver needs a uniform grid")
    if not 0.0 < settings.mixing <= 1.0:
        raise ValueError("mixing must lie in (0, 1]")
    r = grid.r
    psi = np.exp(-(r**2) / (2.0 * settings.init_width**2))
    psi /= np.sqrt(grid.volume_integral(psi**2))
    potential = newton_potential(grid, psi**2)
    lam_prev = np.inf
    history: list[dict] = []
    converged = False
    it = 0
    for it in range(1, settings.max_iter + 1):
        lam, psi = _ground_state(grid, potential)
        new_potential = newton_potential(grid, psi**2)
        residual = float(np.max(np.abs(new_potential - potential)))
        step = abs(lam - lam_prev)
        history.append({"iteration": it, "residual": residual, "eigenvalue": lam})
        if not np.isfinite(residual) or not np.isfinite(lam):
            raise SCFError("non-finite iterate", history)
        potential = (1.0 - settings.mixing) * potential + settings.mixing * new_potential
        lam_prev = lam
        if residual < settings.tol and step < settings.tol:
            converged = True
            break
    if not converged:
        raise SCFError(f"no convergence in {settings.max_iter} iterations", history)

    potential = newton_potential(grid, psi**2)
    lam, psi = _ground_state(grid, potential)
    return _finalise(grid, psi, potential, lam, it, history[-1]["residual"], settings, history)


def _finalise(grid, psi, potential, lam, iterations, residual, settings, history) -> PekarSolution:
    psi_f = RadialFunction(grid, psi)
    length = np.sqrt(grid.volume_integral(psi**2 * grid.r**2))
    mg = fine_momentum_grid(grid, length)
    rho_hat = density_transform(psi_f, mg.k)
    c = 1.0 / (2.0 * np.pi**2)
    phi_norm2 = c * float(np.dot(mg.dk, rho_hat**2))
    grad_phi_norm2 = c * float(np.dot(mg.dk, rho_hat**2 * mg.k**2))
    lap_phi_norm2 = c * float(np.dot(mg.dk, rho_hat**2 * mg.k**4))
    phi = _field_from_density(grid, mg, rho_hat)
    kinetic = _kinetic(grid, psi)
    coulomb = grid.volume_integral(potential * psi**2)
    e_pek = kinetic + coulomb + phi_norm2
    return PekarSolution(
        grid=grid,
        psi=psi_f,
        phi=RadialFunction(grid, phi),
        potential=RadialFunction(grid, potential),
        momentum=mg,
        density_hat=rho_hat,
        e_pek=float(e_pek),
        lambda_pek=float(lam),
        kinetic=kinetic,
        phi_norm2=phi_norm2,
        grad_phi_norm2=grad_phi_norm2,
        lap_phi_norm2=lap_phi_norm2,
        iterations=int(iterations),
        residual=float(residual),
        settings=settings,
        history=history,
    )


def rebuild_solution(grid: RadialGrid, psi: np.ndarray, settings: ScfSettings, iterations: int = 0,
                     residual: float = 0.0) -> PekarSolution:
    """Recompute every derived quantity from a stored orbital.

    One eigen-solve in the potential of the stored density makes the
    orbital an exact discrete eigenvector again.
    """
    potential = newton_potential(grid, np.asarray(psi) ** 2)
    lam, psi_new = _ground_state(grid, potential)
    potential = newton_potential(grid, psi_new**2)
    lam, psi_new = _ground_state(grid, potential)
    return _finalise(grid, psi_new, potential, lam, iterations, residual, settings, [])


def pekar_field(sol: PekarSolution, method: str = "fourier", targets: np.ndarray | None = None) -> RadialFunction | np.ndarray:
    """The field ``phi`` either from its transform or by direct contraction.

    ``method="fourier"`` returns the stored profile.  ``method="kernel"``
    contracts ``rho`` against the sector-0 part of ``|x-y|^-2`` at the node
    indices ``targets`` (all nodes of a thinned grid if omitted) and returns
    an array.
    """
    if method == "fourier":
        return sol.phi
    if method != "kernel":
        raise ValueError(f"unknown method {method!r}")
    sub, idx = thinned_grid(sol.grid, 8)
    rho = sol.psi.values[idx] ** 2
    if targets is None:
        targets = np.arange(sub.n)
    return sector0_contraction(sub, rho, targets) / (2.0 * np.pi**2)


def thinned_grid(grid: RadialGrid, stride: int):
    """Every ``stride``-th node of a uniform grid, ending at ``r_max``."""
    idx = np.arange(stride - 1, grid.n, stride)
    if idx[-1] != grid.n - 1:
        idx = np.concatenate([idx, [grid.n - 1]])
    r = grid.r[idx]
    full = panel_weights(np.concatenate([[0.0], r]))
    dr = full[1:]
    sub = RadialGrid(r=r, w=dr * r**2, dr=dr, r_max=grid.r_max, scheme="uniform-thinned")
    return sub, idx


def sector0_contraction(grid: RadialGrid, f: np.ndarray, targets: np.ndarray,
                        tail_coeffs: tuple[float, ...] = ()) -> np.ndarray:
    """``int f(|y|) |x-y|^-2 dy`` at ``|x| = grid.r[targets]``.

    After the angular integral the kernel is ``2 pi (s/r) ln((r+s)/|r-s|)``.
    Both logarithms are handled by subtracting the first two Taylor terms of
    the odd function ``g(s) = s f(s)`` around ``s = r`` and ``s = -r`` and
    integrating those pieces in closed form.
    ``tail_coeffs`` describe ``f(s) = sum_p c_p s^-(2p+2)`` beyond ``r_max``.
    """
    s = grid.r
    v = grid.dr
    R = grid.r_max
    g = s * f
    dg = np.gradient(g, s, edge_order=2)
    # the subtracted remainder does not vanish at s = 0, so keep that node
    v0 = panel_weights(np.concatenate([[0.0], s]))[0]
    out = np.empty(len(targets))
    for n_t, i in enumerate(targets):
        r = s[i]
        # g is odd, so g(s) ~ -g(r) + g'(r)(s + r) near the mirror point s = -r
        e = s + r
        near = (g + g[i] - dg[i] * e) * np.log(e)
        near0 = (g[i] - dg[i] * r) * np.log(r)
        b0 = (R + r) * np.log(R + r) - R - r * np.log(r)
        b1 = 0.5 * (R + r) ** 2 * np.log(R + r) - 0.25 * (R + r) ** 2 - 0.5 * r * r * np.log(r) + 0.25 * r * r
        log_plus = np.dot(v, near) + v0 * near0 - g[i] * b0 + dg[i] * b1
        d = s - r
        with np.errstate(divide="ignore", invalid="ignore"):
            rem = (g - g[i] - dg[i] * d) * np.log(np.abs(d))
        rem[i] = 0.0
        a0 = (R - r) * np.log(R - r) + r * np.log(r) - R if R > r else r * np.log(r) - R
        a1 = (0.5 * (R - r) ** 2 * np.log(R - r) if R > r else 0.0) - 0.25 * (R - r) ** 2 \
            - 0.5 * r * r * np.log(r) + 0.25 * r * r
        rem0 = (dg[i] * r - g[i]) * np.log(r)
        log_minus = np.dot(v, rem) + v0 * rem0 + g[i] * a0 + dg[i] * a1
        out[n_t] = 2.0 * np.pi / r * (log_plus - log_minus)
    if tail_coeffs:
        u, wu = roots_legendre(64)
        u = 0.5 * (u + 1.0)
        wu = 0.5 * wu
        st = R / u
        jac = R / u**2
        ft = sum(c * st ** -(2 * p + 2) for p, c in enumerate(tail_coeffs))
        r_t = s[np.asarray(targets)][:, None]
        ker = 2.0 * np.pi * st / r_t * np.log((r_t + st) / (st - r_t))
        out += ker @ (wu * jac * ft)
    return out


@dataclass
class PotentialCheck:
    """Newton potential against the double sector-0 contraction."""

    radii: np.ndarray
    newton: np.ndarray
    contraction: np.ndarray
    max_relative_gap: float
    constant_estimate: float


def effective_potential(sol: PekarSolution, stride: int = 8, bulk_fraction: float = 0.25,
                        tol: float = 1e-6) -> tuple[RadialFunction, PotentialCheck]:
    """Return the potential together with an independent reconstruction.

    The second route builds ``phi`` from ``rho`` and then the potential from
    ``phi`` by two sector-0 contractions of ``|x-y|^-2``; agreement with the
    Newton potential confirms the constant ``pi^3`` in
    ``int |x-z|^-2 |z-y|^-2 dz = pi^3/|x-y|``.

    Raises
    ------
    ConstantConventionError
        If the two routes differ by more than ``tol`` (relative) in the bulk.
    """
    sub, idx = thinned_grid(sol.grid, stride)
    rho = sol.psi.values[idx] ** 2
    phi = sector0_contraction(sub, rho, np.arange(sub.n)) / (2.0 * np.pi**2)
    moments = [sol.grid.volume_integral(sol.psi.values**2 * sol.grid.r ** (2 * p)) for p in range(4)]
    c = 1.0 / (2.0 * np.pi**2)
    # multipole tail of phi: (1/2pi^2) sum_p <r^2p>/((2p+1) s^(2p+2))
    tail = tuple(c * moments[p] / (2 * p + 1) for p in range(4))
    targets = np.nonzero(sub.r <= bulk_fraction * sub.r_max)[0]
    contraction = -sector0_contraction(sub, phi, targets, tail) / np.pi**2
    newton = sol.potential.values[idx][targets]
    gap = float(np.max(np.abs(contraction - newton) / np.abs(newton)))
    estimate = float(np.pi**3 * np.median(contraction / newton))
    check = PotentialCheck(sub.r[targets], newton, contraction, gap, estimate)
    if gap > tol:
        raise ConstantConventionError(f"potential routes differ by {gap:.3e} (relative)")
    return sol.potential, check


def psi_autocorrelation(sol: PekarSolution, s: np.ndarray) -> np.ndarray:
    """``H(s) = int psi(x) psi(x + y) dx`` at ``|y| = s``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    mg = sol.momentum
    psi_hat = orbital_transform(sol.psi, mg.k)
    weighted = mg.dk * mg.k**2 * psi_hat**2 / (2.0 * np.pi**2)
    return np.sinc(np.outer(s, mg.k) / np.pi) @ weighted
