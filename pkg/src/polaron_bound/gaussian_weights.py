"""Displacement fields, the Gaussian weight and the classical integrals built on them.

The field displaced by ``y`` is ``w = phi - phi(. - y)`` (real part) and
``xi - xi(. - y)`` with ``xi = (P.grad) phi / (alpha^2 M)`` (imaginary part).
Both are expanded in angular-momentum sectors about the axis ``y`` using the
plane-wave expansion in momentum space, which turns every sector profile into
``phi_hat(q)`` times a spherical Bessel factor of ``q |y|``.  The Hessian
functional calculus then acts sector by sector.

All profile quantities for a unit imaginary prefactor are stored separately
from the real ones, so that a profile for any ``(alpha, P)`` is a cheap
recombination.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.interpolate import CubicSpline

from .bogoliubov import HessianModel, theta
from .fits import PowerFit, fit_power
from .kernels import spherical_jn_table
from .pekar_scf import PekarSolution, density_transform, even_spline, psi_autocorrelation
from .radial_core import ResolutionError, RadialFunction


class IntegrationError(RuntimeError):
    """An integral over displacements cannot be evaluated as requested."""


TRUNCATION_TOL = 1e-4
_SERIES_TERMS = 14
_SERIES_SWITCH = 0.8


# -- stable small-argument combinations of j0 and j1 -------------------------

def _series_coefficients():
    n = range(_SERIES_TERMS)
    j0 = np.array([(-1) ** k / factorial(2 * k + 1) for k in n], dtype=float)
    j1_over = np.array([(-1) ** k * 2 * (k + 1) / factorial(2 * k + 3) for k in n], dtype=float)
    return j0, j1_over


_J0_C, _J1Z_C = _series_coefficients()


def _poly(coeffs: np.ndarray, z2: np.ndarray) -> np.ndarray:
    return np.polynomial.polynomial.polyval(z2, coeffs)


class _Combos:
    """Bessel combinations that vanish at ``z = 0``, evaluated without cancellation."""

    def __init__(self, z: np.ndarray):
        z = np.asarray(z, dtype=float)
        small = z < _SERIES_SWITCH
        zs = np.where(small, z, 1.0)
        zb = np.where(small, 1.0, z)
        z2 = zs**2
        j0 = np.sin(zb) / zb
        j1 = (np.sin(zb) / zb - np.cos(zb)) / zb
        dj1 = j0 - 2.0 * j1 / zb
        d0 = _J0_C.copy()
        d0[0] = 0.0
        one_minus_j0_s = -_poly(d0, z2)
        c1 = _J1Z_C.copy()
        c1[0] = 0.0
        j1_minus_s = zs * _poly(c1, z2)
        # j1' = sum b_n (2n+1) z^2n
        dj1_c = _J1Z_C * (2 * np.arange(_SERIES_TERMS) + 1)
        third_minus_dj1_s = -_poly(np.concatenate([[0.0], dj1_c[1:]]), z2)
        third_minus_j1z_s = -_poly(c1, z2)
        # 1/3 - j0 + 2 j1/z
        m0 = -_J0_C + 2.0 * _J1Z_C
        m0[0] = 0.0
        axial_s = _poly(m0, z2)
        self.one_minus_j0 = np.where(small, one_minus_j0_s, 1.0 - j0)
        self.j1_minus_linear = np.where(small, j1_minus_s, j1 - zb / 3.0)
        self.third_minus_dj1 = np.where(small, third_minus_dj1_s, 1.0 / 3.0 - dj1)
        self.third_minus_j1z = np.where(small, third_minus_j1z_s, 1.0 / 3.0 - j1 / zb)
        self.axial = np.where(small, axial_s, 1.0 / 3.0 - j0 + 2.0 * j1 / zb)


# -- shifted field ---------------------------------------------------------

def field_derivative(sol: PekarSolution, r: np.ndarray) -> np.ndarray:
    """``phi'(r)`` from the density transform on the solver's momentum grid."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    mg = sol.momentum
    weighted = mg.dk * sol.density_hat * mg.k**2 / (2.0 * np.pi**2)
    j1 = spherical_jn_table(np.outer(r, mg.k), 1)[1].reshape(r.size, mg.n)
    return -(j1 @ weighted)


@dataclass(frozen=True)
class ShiftedField:
    """The field together with its momentum-dependent imaginary shift.

    ``xi = (P.grad) phi / (alpha^2 M)``; only the radial profile ``phi'`` and
    the direction of ``P`` are stored.
    """

    phi: RadialFunction
    phi_prime: np.ndarray
    alpha: float
    P: np.ndarray
    m_lp: float
    grad_norm2: float

    @property
    def prefactor(self) -> float:
        return float(np.linalg.norm(self.P) / (self.alpha**2 * self.m_lp))

    @property
    def direction(self) -> np.ndarray:
        n = np.linalg.norm(self.P)
        return self.P / n if n > 0 else np.array([0.0, 0.0, 1.0])

    def xi_norm2(self) -> float:
        """``||xi||^2 = prefactor^2 ||d phi / dz||^2``."""
        return self.prefactor**2 * self.grad_norm2 / 3.0

    def _splines(self):
        r = self.phi.grid.r
        return (CubicSpline(np.concatenate([[0.0], r]), np.concatenate([[self._phi0()], self.phi.values])),
                CubicSpline(np.concatenate([[0.0], r]), np.concatenate([[0.0], self.phi_prime])))

    def _phi0(self) -> float:
        v = self.phi.values
        return float(v[0] + (v[0] - v[1]) / 3.0)

    def displaced(self, y: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Real and imaginary parts of the displaced field at 3-d points."""
        fphi, fdphi = self._splines()
        pts = np.atleast_2d(points)
        u = self.direction
        c = self.prefactor

        def parts(x):
            rr = np.linalg.norm(x, axis=1)
            rs = np.where(rr > 0, rr, 1.0)
            xi = c * fdphi(rr) * (x @ u) / rs
            return fphi(rr), np.where(rr > 0, xi, 0.0)

        a_re, a_im = parts(pts)
        b_re, b_im = parts(pts - np.asarray(y, dtype=float))
        return a_re - b_re, a_im - b_im


def shifted_field(sol: PekarSolution, alpha: float, P) -> ShiftedField:
    P = np.asarray(P, dtype=float)
    if P.ndim == 0:
        P = np.array([0.0, 0.0, float(P)])
    return ShiftedField(phi=sol.phi, phi_prime=field_derivative(sol, sol.grid.r), alpha=float(alpha),
                        P=P, m_lp=sol.m_lp, grad_norm2=sol.grad_phi_norm2)


# -- sector decomposition of the displacement --------------------------------

@dataclass
class NormComponents:
    """Norms of one part of the displacement, per radial node ``s``.

    ``tilde_excess`` is ``||w~||^2 - 2 lambda s^2`` for the real part and
    ``||w~||^2`` for the imaginary parts, computed without cancellation.
    """

    total: np.ndarray
    zero: np.ndarray
    zero_sector: np.ndarray
    perp: np.ndarray
    tilde: np.ndarray
    tilde_excess: np.ndarray
    truncation: np.ndarray


@dataclass
class DisplacementComponents:
    """Real part plus the two imaginary parts (along and across ``y``) for unit prefactor."""

    s: np.ndarray
    real: NormComponents
    axial: NormComponents
    transverse: NormComponents
    lam: float
    grad_norm2: float
    plateau_real: float
    plateau_imag: float
    cutoff: float
    L_max: int


def _explicit_zero_parts(sol: PekarSolution, s: np.ndarray):
    """Translation-direction norms from the field autocorrelation and its derivatives.

    Returns the real part (as the excess over ``2 lambda s^2``) and the axial
    and transverse imaginary parts for unit prefactor.
    """
    mg = sol.momentum
    phat2 = (sol.density_hat / mg.k / (2.0 * np.pi) ** 1.5) ** 2
    g = 4.0 * np.pi * float(np.sum(mg.dk * mg.k**4 * phat2))
    z = np.outer(s, mg.k)
    cb = _Combos(z)
    wk = 4.0 * np.pi * mg.dk * mg.k**4 * phat2
    # C'(s) = -(g/3) s + D(s)
    D = -(cb.j1_minus_linear / mg.k[None, :]) @ (wk)
    real_excess = -2.0 * s * D + 3.0 * D**2 / g
    axial = (cb.third_minus_dj1 @ wk) ** 2 / (g / 3.0)
    transverse = (cb.third_minus_j1z @ wk) ** 2 / (g / 3.0)
    return g, real_excess, axial, transverse


def _closed_totals(q, w, phat2, s):
    cb = _Combos(np.outer(s, q))
    real = 8.0 * np.pi * cb.one_minus_j0 @ (w * phat2)
    # angular integrals of (P.k)^2 (1 - cos k.y) for P along / across y
    axial = 8.0 * np.pi * cb.axial @ (w * q**2 * phat2)
    transverse = 8.0 * np.pi * cb.third_minus_j1z @ (w * q**2 * phat2)
    return real, axial, transverse


def displacement_components(sol: PekarSolution, model: HessianModel, s: np.ndarray,
                            check_truncation: bool = True) -> DisplacementComponents:
    """Sector-resolved norms of the displaced field at radial distances ``s``.

    Nodes at ``s = 0`` are allowed; every norm vanishes there.

    Raises
    ------
    ResolutionError
        If the sectors ``0..L_max`` of the model miss more than
        ``TRUNCATION_TOL`` of the closed-form norm at some node, or if the
        model's field grid stops below the support of ``phi_hat``.
    """
    s_in = np.asarray(s, dtype=float)
    if np.any(s_in < 0):
        raise ValueError("displacement nodes must be non-negative")
    at_origin = s_in == 0.0
    s = np.where(at_origin, 1.0, s_in)
    q = model.nodes
    w = model.field_weights
    u = np.sqrt(w)
    rho = density_transform(sol.psi, q)
    if np.isfinite(model.cutoff) and abs(rho[-1]) > 1e-10:
        raise ResolutionError("field grid is cut where phi_hat is not negligible")
    phat = rho / q / (2.0 * np.pi) ** 1.5
    e = model.zero_mode
    if e is None:
        raise ValueError("model has no translation direction")
    L_max = model.L_max
    z = np.outer(q, s)
    jt = spherical_jn_table(z.ravel(), L_max + 1).reshape(L_max + 2, q.size, s.size)
    cb = _Combos(z)
    base = (u * phat)[:, None]
    kbase = (u * q * phat)[:, None]
    ns = s.size
    acc = {key: {"zero_sector": np.zeros(ns), "perp": np.zeros(ns), "tilde_perp": np.zeros(ns)}
           for key in ("real", "axial", "transverse")}
    inv_theta = lambda v: v**-0.25  # noqa: E731

    def add(key, L, vec, fn):
        sp = model.spectra[L]
        if L == 1:
            comp = e @ vec
            acc[key]["zero_sector"] += comp**2
            vec = vec - np.outer(e, comp)
        acc[key]["perp"] += np.sum(vec**2, axis=0)
        acc[key]["tilde_perp"] += np.sum(sp.apply(fn, vec) ** 2, axis=0)

    for L in range(L_max + 1):
        jl = jt[L]
        djl = jt[L - 1] - (L + 1) * jl / z if L > 0 else -jt[1]
        if L == 0:
            re = np.sqrt(4.0 * np.pi) * base * cb.one_minus_j0
            ax = np.sqrt(4.0 * np.pi) * kbase * jt[1]
        elif L == 1:
            # the linear part of j1 lies along the translation direction
            lin = np.sqrt(12.0 * np.pi) * (e @ (u * q * phat)) * s / 3.0
            re_stable = np.sqrt(12.0 * np.pi) * base * cb.j1_minus_linear
            ax = np.sqrt(4.0 * np.pi / 3.0) * kbase * 3.0 * cb.third_minus_dj1
            tr = np.sqrt(4.0 * np.pi / 3.0) * kbase * 3.0 * cb.third_minus_j1z
            comp = e @ re_stable
            acc["real"]["zero_sector"] += (lin + comp) ** 2
            perp = re_stable - np.outer(e, comp)
            acc["real"]["perp"] += np.sum(perp**2, axis=0)
            acc["real"]["tilde_perp"] += np.sum(model.spectra[1].apply(theta, perp) ** 2, axis=0)
            add("axial", 1, ax, inv_theta)
            add("transverse", 1, tr, inv_theta)
            continue
        else:
            re = np.sqrt(4.0 * np.pi * (2 * L + 1)) * base * jl
            ax = np.sqrt(4.0 * np.pi * (2 * L + 1)) * kbase * djl
            tr = np.sqrt(2.0 * np.pi * L * (L + 1) * (2 * L + 1)) * kbase * jl / z
            add("transverse", L, tr, inv_theta)
        add("real", L, re, theta)
        add("axial", L, ax, inv_theta)

    g, real_excess, ax0, tr0 = _explicit_zero_parts(sol, s)
    lam = g / 6.0
    tot_re, tot_ax, tot_tr = _closed_totals(q, w, phat**2, s)
    zeros = {"real": real_excess + 2.0 * lam * s**2, "axial": ax0, "transverse": tr0}
    totals = {"real": tot_re, "axial": tot_ax, "transverse": tot_tr}
    parts = {}
    for key in ("real", "axial", "transverse"):
        a = acc[key]
        resid = np.abs(totals[key] - a["zero_sector"] - a["perp"]) / np.maximum(totals[key], 1e-300)
        if check_truncation and np.any(resid > TRUNCATION_TOL):
            worst = int(np.argmax(resid))
            raise ResolutionError(f"{key} part: sectors 0..{L_max} miss {resid[worst]:.2e} of the norm at s={s[worst]:.4g}")
        z0 = zeros[key]
        excess = (real_excess if key == "real" else z0) + a["tilde_perp"]
        parts[key] = NormComponents(total=totals[key], zero=z0, zero_sector=a["zero_sector"], perp=a["perp"],
                                    tilde=z0 + a["tilde_perp"], tilde_excess=excess, truncation=resid)
        for arr in vars(parts[key]).values():
            arr[at_origin] = 0.0
    a0 = np.sqrt(4.0 * np.pi) * u * phat
    plateau_real = 2.0 * float(a0 @ model.spectra[0].apply(np.sqrt, a0))
    return DisplacementComponents(s=s_in, real=parts["real"], axial=parts["axial"], transverse=parts["transverse"],
                                  lam=lam, grad_norm2=g, plateau_real=plateau_real,
                                  plateau_imag=2.0 * g / 3.0, cutoff=model.cutoff, L_max=L_max)


# -- weight profiles ----------------------------------------------------------

@dataclass
class WeightProfile:
    """Norms of the displaced field on an ``(s, cos gamma)`` tensor grid.

    Arrays have shape ``(len(s), len(cos_gamma))``.
    """

    s: np.ndarray
    cos_gamma: np.ndarray
    angle_weights: np.ndarray
    w2: np.ndarray
    w0: np.ndarray
    w1: np.ndarray
    wt: np.ndarray
    wt_excess: np.ndarray
    n_values: np.ndarray | None
    alpha: float
    P: float
    K: float
    delta: float = 0.0
    eta: float = 1.0
    lam: float = 0.0
    plateau: float = 0.0
    meta: dict = field(default_factory=dict)

    def csv_rows(self):
        n = self.n_values if self.n_values is not None else np.full_like(self.w2, np.nan)
        for i, s in enumerate(self.s):
            for j, c in enumerate(self.cos_gamma):
                yield (float(s), float(c), float(self.w2[i, j]), float(self.w0[i, j]), float(self.w1[i, j]),
                       float(self.wt[i, j]), float(n[i, j]))


def default_s_grid(sol: PekarSolution, count: int = 80) -> np.ndarray:
    return np.geomspace(1e-3, sol.grid.r_max / 2.0, count)


def angle_grid(P: float, count: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes in ``cos gamma``; a single node when ``P = 0``."""
    if P == 0:
        return np.array([1.0]), np.array([2.0])
    return np.polynomial.legendre.leggauss(count)


def displacement_norms(sol: PekarSolution, model: HessianModel, alpha: float, P: float,
                       s: np.ndarray | None = None, cos_gamma: np.ndarray | None = None,
                       components: DisplacementComponents | None = None,
                       delta: float = 0.0, eta: float = 1.0) -> WeightProfile:
    """Norms of ``w``, its translation part, its remainder and of ``w~``.

    ``P`` is the magnitude of the total momentum (the direction is the axis
    from which ``gamma`` is measured).
    """
    P = float(np.linalg.norm(P))
    if components is None:
        components = displacement_components(sol, model, default_s_grid(sol) if s is None else s)
    c = components
    if cos_gamma is None:
        cos_gamma, aw = angle_grid(P)
    else:
        cos_gamma = np.asarray(cos_gamma, dtype=float)
        aw = np.full(cos_gamma.size, 2.0 / cos_gamma.size)
    pref2 = (P / (alpha**2 * sol.m_lp)) ** 2
    c2 = cos_gamma**2
    s2 = 1.0 - c2

    def mix(attr):
        re = getattr(c.real, attr)[:, None]
        im = getattr(c.axial, attr)[:, None] * c2[None, :] + getattr(c.transverse, attr)[:, None] * s2[None, :]
        return re + pref2 * im

    wt_excess = c.real.tilde_excess[:, None] + pref2 * (
        c.axial.tilde_excess[:, None] * c2[None, :] + c.transverse.tilde_excess[:, None] * s2[None, :])
    prof = WeightProfile(s=c.s, cos_gamma=cos_gamma, angle_weights=aw, w2=mix("total"), w0=mix("zero"),
                         w1=mix("perp"), wt=mix("tilde"), wt_excess=wt_excess, n_values=None,
                         alpha=float(alpha), P=P, K=c.cutoff, lam=c.lam,
                         plateau=c.plateau_real + pref2 * c.plateau_imag,
                         meta={"L_max": c.L_max, "max_truncation": float(max(c.real.truncation.max(),
                                                                             c.axial.truncation.max(),
                                                                             c.transverse.truncation.max()))})
    prof.n_values = weight_function(prof, delta, eta)
    prof.delta, prof.eta = float(delta), float(eta)
    return prof


def weight_function(profile: WeightProfile, delta: float = 0.0, eta: float = 1.0) -> np.ndarray:
    """``exp(-eta alpha^(2(1-delta)) ||w~||^2 / 2)`` at every node."""
    if not (0.0 <= delta < 1.0):
        raise ValueError("delta must lie in [0, 1)")
    if eta <= 0:
        raise ValueError("eta must be positive")
    return np.exp(-eta * profile.alpha ** (2.0 * (1.0 - delta)) * profile.wt / 2.0)


def plateau_weight(profile: WeightProfile) -> float:
    """Limit of the weight as ``|y| -> infinity``."""
    return float(np.exp(-profile.eta * profile.alpha ** (2.0 * (1.0 - profile.delta)) * profile.plateau / 2.0))


# -- integrals over displacements ---------------------------------------------

def composite_s_grid(s_max: float, first: float = 0.025, per_panel: int = 24) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre panels on ``[0, s_max]`` with geometrically growing widths."""
    edges = [0.0]
    b = first
    while b < s_max:
        edges.append(b)
        b *= 2.0
    edges.append(s_max)
    x, wq = np.polynomial.legendre.leggauss(per_panel)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        weights.append(0.5 * (b - a) * wq)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class IntegrationGrid:
    """Nodes for ``int d^3 y`` split at the plateau radius."""

    s: np.ndarray
    weights: np.ndarray
    tail_s: np.ndarray
    tail_weights: np.ndarray
    s_plateau: float


def integration_grid(sol: PekarSolution, per_panel: int = 24) -> IntegrationGrid:
    s_p = sol.grid.r_max / 2.0
    s, w = composite_s_grid(s_p, per_panel=per_panel)
    x, wq = np.polynomial.legendre.leggauss(64)
    # the tail carries the remaining mass of H out to the end of the box
    a, b = s_p, sol.grid.r_max
    ts = 0.5 * (b - a) * x + 0.5 * (a + b)
    tw = 0.5 * (b - a) * wq
    return IntegrationGrid(s, w, ts, tw, s_p)


def _g_values(g, sol: PekarSolution, s: np.ndarray) -> np.ndarray:
    if callable(g):
        return np.asarray(g(s), dtype=float)
    if g == "H":
        return psi_autocorrelation(sol, s)
    if g == "one":
        return np.ones_like(s)
    if g == "zero":
        return np.zeros_like(s)
    raise ValueError(f"unknown weight function {g!r}")


@dataclass
class ComparisonRow:
    alpha: float
    weighted: float
    gaussian: float
    difference: float
    gaussian_closed_form: float


@dataclass
class ComparisonReport:
    g: str
    n_power: int
    delta: float
    eta: float
    rows: list[ComparisonRow]
    fit: PowerFit | None
    lam: float

    def as_dict(self) -> dict:
        return {"g": self.g, "n_power": self.n_power, "delta": self.delta, "eta": self.eta, "lambda": self.lam,
                "rows": [vars(r) for r in self.rows], "fit": None if self.fit is None else self.fit.as_dict()}


def gaussian_comparison(sol: PekarSolution, components: DisplacementComponents, grid: IntegrationGrid,
                        alphas, g="H", n_power: int = 0, delta: float = 0.0, eta: float = 1.0) -> ComparisonReport:
    """Compare ``int |y|^n g n_{delta,eta}`` with the Gaussian replacement over an alpha ladder.

    ``components`` must have been evaluated on ``grid.s``.  Beyond the
    plateau radius the weight is replaced by its limiting constant.

    Raises
    ------
    IntegrationError
        If the plateau tail carries infinite mass (``g`` not decaying).
    """
    if components.s.shape != grid.s.shape or not np.allclose(components.s, grid.s):
        raise ValueError("components were not evaluated on the integration grid")
    gs = _g_values(g, sol, grid.s)
    gt = _g_values(g, sol, grid.tail_s)
    if g == "one":
        raise IntegrationError("the weight tends to a positive constant, so int n dy diverges for g = 1")
    lam = components.lam
    rows = []
    for a in alphas:
        prof = displacement_norms(sol, None, a, 0.0, components=components, delta=delta, eta=eta)  # type: ignore[arg-type]
        n = prof.n_values[:, 0]
        scale = eta * lam * a ** (2.0 * (1.0 - delta))
        gauss = np.exp(-scale * grid.s**2)
        gauss_t = np.exp(-scale * grid.tail_s**2)
        vol = 4.0 * np.pi * grid.weights * grid.s ** (2 + n_power) * gs
        vol_t = 4.0 * np.pi * grid.tail_weights * grid.tail_s ** (2 + n_power) * gt
        n_plat = plateau_weight(prof)
        weighted = float(vol @ n + n_plat * vol_t.sum())
        gaussian = float(vol @ gauss + vol_t @ gauss_t)
        diff = float(vol @ np.abs(n - gauss) + vol_t @ np.abs(n_plat - gauss_t))
        rows.append(ComparisonRow(float(a), weighted, gaussian, diff, float((np.pi / scale) ** 1.5)))
    fit = None
    if len(rows) >= 2 and all(r.difference > 0 for r in rows):
        fit = fit_power([r.alpha for r in rows], [r.difference for r in rows])
    name = g if isinstance(g, str) else getattr(g, "__name__", "custom")
    return ComparisonReport(name, n_power, delta, eta, rows, fit, lam)


@dataclass
class LeadingNormReport:
    alphas: np.ndarray
    norm: np.ndarray
    gaussian: np.ndarray
    deviation: np.ndarray
    deviation_fit: PowerFit | None
    gaussian_fit: PowerFit | None

    @property
    def relative(self) -> np.ndarray:
        return self.deviation / self.gaussian

    def as_dict(self) -> dict:
        return {"alpha": self.alphas.tolist(), "norm": self.norm.tolist(), "gaussian": self.gaussian.tolist(),
                "deviation": self.deviation.tolist(), "relative": self.relative.tolist(),
                "deviation_fit": None if self.deviation_fit is None else self.deviation_fit.as_dict(),
                "gaussian_fit": None if self.gaussian_fit is None else self.gaussian_fit.as_dict()}


def leading_norm(sol: PekarSolution, components: DisplacementComponents, grid: IntegrationGrid, alphas,
                 g="H") -> LeadingNormReport:
    """``int H(y) n_{0,1}(y) dy`` against ``(pi / (lambda alpha^2))^{3/2}``."""
    alphas = np.asarray(alphas, dtype=float)
    gs = _g_values(g, sol, grid.s)
    gt = _g_values(g, sol, grid.tail_s)
    lam = components.lam
    norms, gauss = [], []
    for a in alphas:
        prof = displacement_norms(sol, None, a, 0.0, components=components)  # type: ignore[arg-type]
        vol = 4.0 * np.pi * grid.weights * grid.s**2 * gs
        vol_t = 4.0 * np.pi * grid.tail_weights * grid.tail_s**2 * gt
        norms.append(float(vol @ prof.n_values[:, 0] + plateau_weight(prof) * vol_t.sum()))
        gauss.append(float((np.pi / (lam * a * a)) ** 1.5))
    norms, gauss = np.array(norms), np.array(gauss)
    dev = np.abs(norms - gauss)
    dfit = fit_power(alphas, dev) if np.all(dev > 0) and alphas.size >= 2 else None
    gfit = fit_power(alphas, gauss) if alphas.size >= 2 else None
    return LeadingNormReport(alphas, norms, gauss, dev, dfit, gfit)


def gaussian_integral(lam_alpha2: float, grid: IntegrationGrid, g_values: np.ndarray | None = None) -> float:
    """Quadrature of ``int g e^{-lam_alpha2 y^2} dy`` on the inner grid (``g = 1`` by default)."""
    gs = np.ones_like(grid.s) if g_values is None else g_values
    return float(4.0 * np.pi * np.sum(grid.weights * grid.s**2 * gs * np.exp(-lam_alpha2 * grid.s**2)))


# -- the phase --------------------------------------------------------------

def _cubic_sine_moment(z: np.ndarray) -> np.ndarray:
    """``int_0^1 t^3 sin(z t) dt``."""
    z = np.asarray(z, dtype=float)
    small = z < 1.0
    zs = np.where(small, z, 0.0)
    n = range(12)
    coeff = np.array([(-1) ** k / (factorial(2 * k + 1) * (2 * k + 5)) for k in n])
    series = zs * _poly(coeff, zs**2)
    zb = np.where(small, 1.0, z)
    direct = (-np.cos(zb) / zb + 3 * np.sin(zb) / zb**2 + 6 * np.cos(zb) / zb**3 - 6 * np.sin(zb) / zb**4)
    return np.where(small, series, direct)


def phase_g(sol: PekarSolution, alpha: float, P: float, s: np.ndarray, cos_gamma: np.ndarray,
            method: str = "closed", n_sigma: int = 32, n_t: int = 64) -> np.ndarray:
    """The scalar phase ``g_P(y)`` at ``|y| = s`` and angle ``gamma`` to ``P``.

    ``method="quadrature"`` integrates the interpolation parameter and the
    polar angle with Gauss rules; ``method="closed"`` uses the exact inner
    integrals.  Shape ``(len(s), len(cos_gamma))``.
    """
    del alpha  # the phase depends on P only; kept for a uniform signature
    s = np.atleast_1d(np.asarray(s, dtype=float))
    cos_gamma = np.atleast_1d(np.asarray(cos_gamma, dtype=float))
    mg = sol.momentum
    phat2 = (sol.density_hat / mg.k / (2.0 * np.pi) ** 1.5) ** 2
    wk = mg.dk * mg.k**6 * phat2
    pref = -(2.0 / sol.m_lp) * 2.0 * np.pi * float(P)
    z = np.outer(s, mg.k)
    if method == "closed":
        inner = np.where(z > 0, 2.0 * _cubic_sine_moment(z) / np.where(z > 0, z, 1.0), 0.0)
    elif method == "quadrature":
        xs, ws = np.polynomial.legendre.leggauss(n_sigma)
        sig, wsig = 0.5 * (xs + 1.0), 0.5 * ws
        t, wt = np.polynomial.legendre.leggauss(n_t)
        inner = np.zeros_like(z)
        for a, wa in zip(sig, wsig):
            inner += wa * (np.cos(a * z[..., None] * t) @ (wt * t**4))
    else:
        raise ValueError(f"unknown method {method!r}")
    radial = s**3 * (inner @ wk)
    return pref * radial[:, None] * cos_gamma[None, :]


def phase_identity(sol: PekarSolution, P: np.ndarray, y: np.ndarray, n_t: int = 48, n_phi: int = 48) -> tuple[float, float]:
    """``<phi|(y.grad)(P.grad) phi>`` by angular quadrature, and ``-(P.y) M / 2``."""
    P = np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=float)
    mg = sol.momentum
    phat2 = (sol.density_hat / mg.k / (2.0 * np.pi) ** 1.5) ** 2
    t, wt = np.polynomial.legendre.leggauss(n_t)
    ang = 2.0 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1.0 - t**2)
    dirs = np.stack([np.outer(st, np.cos(ang)), np.outer(st, np.sin(ang)), np.outer(t, np.ones(n_phi))], axis=-1)
    angular = float(np.sum(wt[:, None] * (2.0 * np.pi / n_phi) * (dirs @ y) * (dirs @ P)))
    radial = float(np.sum(mg.dk * mg.k**4 * phat2))
    # (ik.y)(ik.P) = -(k.y)(k.P)
    return -angular * radial, -float(P @ y) * sol.m_lp / 2.0


# -- the -3/2 term ------------------------------------------------------------

@dataclass
class VIntegralReport:
    s: np.ndarray
    v: np.ndarray
    lam: float
    alphas: np.ndarray
    scaled: np.ndarray
    small_fit: PowerFit | None
    meta: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"alpha": self.alphas.tolist(), "scaled_integral": self.scaled.tolist(), "lambda": self.lam,
                "small_y_fit": None if self.small_fit is None else self.small_fit.as_dict(), **self.meta}


def v_profile(sol: PekarSolution, s: np.ndarray, n_t: int = 64, r_panel: float = 2.0,
              per_panel: int = 12) -> np.ndarray:
    """``v(y) = <l_y | w_{0,y}>`` at ``|y| = s``.

    ``v = H(y) q(y) - int psi(z) psi(z + y) [U(z) - U(z - y)] dz`` with
    ``U = -V/2``, evaluated with Gauss rules in ``(|z|, cos)``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    grid = sol.grid
    psi = even_spline(grid.r, sol.psi.values)
    U = even_spline(grid.r, -0.5 * sol.potential.values)
    r_end = grid.r_max

    def psi_at(r):
        return np.where(r <= r_end, psi(np.minimum(r, r_end)), 0.0)

    def u_at(r):
        return np.where(r <= r_end, U(np.minimum(r, r_end)), 1.0 / (4.0 * np.pi * np.maximum(r, 1e-300)))

    edges = np.arange(0.0, r_end + r_panel / 2, r_panel)
    x, wq = np.polynomial.legendre.leggauss(per_panel)
    rn = (0.5 * (edges[1:] - edges[:-1])[:, None] * x + 0.5 * (edges[1:] + edges[:-1])[:, None]).ravel()
    rw = (0.5 * (edges[1:] - edges[:-1])[:, None] * wq).ravel()
    t, wt = np.polynomial.legendre.leggauss(n_t)
    psi_r = psi_at(rn)
    keep = np.abs(psi_r) > 1e-18 * np.abs(psi_r).max()
    rn, rw, psi_r = rn[keep], rw[keep], psi_r[keep]
    u_r = u_at(rn)
    base = 2.0 * np.pi * rw * rn**2 * psi_r
    out = np.empty(s.size)
    for i, si in enumerate(s):
        rr = rn[:, None] ** 2 + si * si
        cross = 2.0 * rn[:, None] * si * t[None, :]
        plus = np.sqrt(rr + cross)
        minus = np.sqrt(np.maximum(rr - cross, 0.0))
        integrand = psi_at(plus) * (u_r[:, None] - u_at(minus))
        out[i] = float(base @ (integrand @ wt))
    H = psi_autocorrelation(sol, s)
    return H * q_function(sol, s) - out


def q_function(sol: PekarSolution, s: np.ndarray) -> np.ndarray:
    """``q(s) = ||phi||^2 - (phi * phi)(s)``."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    mg = sol.momentum
    cb = _Combos(np.outer(s, mg.k))
    return cb.one_minus_j0 @ (mg.dk * sol.density_hat**2) / (2.0 * np.pi**2)


def minus_three_halves(sol: PekarSolution, alphas, s_grid: IntegrationGrid | None = None,
                       small_window: tuple[float, float] = (1.0, 10.0), v_values: np.ndarray | None = None) -> VIntegralReport:
    """Scaled Gaussian average of ``v`` and the small-``y`` envelope of ``v + lambda y^2``."""
    grid = s_grid or integration_grid(sol)
    s = np.concatenate([grid.s, grid.tail_s])
    w = np.concatenate([grid.weights, grid.tail_weights])
    v = v_profile(sol, s) if v_values is None else v_values
    lam = sol.lambda_gauss
    alphas = np.asarray(alphas, dtype=float)
    scaled = []
    for a in alphas:
        la = lam * a * a
        integral = 4.0 * np.pi * np.sum(w * s**2 * v * np.exp(-la * s**2))
        scaled.append((2.0 * a * a / 3.0) * (la / np.pi) ** 1.5 * integral)
    ss = np.geomspace(small_window[0], small_window[1], 12)
    vs = v_profile(sol, ss)
    fit = fit_power(ss, np.abs(vs + lam * ss**2))
    return VIntegralReport(s, v, lam, alphas, np.array(scaled), fit,
                           meta={"v_at_zero_proxy": float(v_profile(sol, np.array([1e-6]))[0]),
                                 "small_window": list(small_window)})


# -- monotonicity of q -------------------------------------------------------

@dataclass
class MonotonicityCertificate:
    s: np.ndarray
    q: np.ndarray
    worst_decrease: float
    c0: float
    limit_gap: float
    passed: bool


def q_monotonicity(sol: PekarSolution, s: np.ndarray | None = None, tol: float = 1e-10,
                   near_zero: float = 1.0) -> MonotonicityCertificate:
    """Certify that ``q`` is non-decreasing and bounded below by ``C0 s^2`` near zero.

    Raises
    ------
    RuntimeError
        If ``q`` decreases by more than ``tol`` (relative to ``||phi||^2``),
        which points at a broken convolution.
    """
    if s is None:
        s = np.concatenate([[0.0], np.geomspace(1e-3, sol.grid.r_max / 2.0, 200)])
    q = q_function(sol, s)
    scale = sol.phi_norm2
    worst = float(max(0.0, -np.min(np.diff(q)))) / scale
    if worst > tol:
        raise RuntimeError(f"q decreases by {worst:.3e} (relative): convolution is inconsistent")
    sel = (s > 0) & (s <= near_zero)
    c0 = float(np.min(q[sel] / s[sel] ** 2)) if sel.any() else float("nan")
    return MonotonicityCertificate(s, q, worst, c0, float(abs(q[-1] - scale) / scale), bool(worst <= tol and c0 > 0))
