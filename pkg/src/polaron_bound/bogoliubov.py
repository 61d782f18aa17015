"""Quadratic-boson diagonalisation built on the Hessian blocks.

For each sector the block ``H_L`` is diagonalised once; ``Theta = H^{1/4}``,
``A = (Theta^-1 + Theta)/2`` and ``B = (Theta^-1 - Theta)/2`` are applied
through that eigendecomposition.  On the translation direction ``A = 1`` and
``B = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import eigsh
from scipy.special import zeta

from .sector_operators import DirectTrace, HessianBlock


class ClampingError(RuntimeError):
    """A block has an eigenvalue below the clamping threshold."""


class TruncationError(RuntimeError):
    """A truncated sum or Fock space did not converge."""


CLAMP = 1e-6


@dataclass
class SectorSpectrum:
    """Eigen-data of one block on the complement of the translation direction."""

    L: int
    values: np.ndarray
    vectors: np.ndarray
    zero_mode: np.ndarray | None
    clamped: int = 0

    def apply(self, fn, x: np.ndarray, zero_value: float | None = None) -> np.ndarray:
        """``fn(H) x``; the translation direction is multiplied by ``zero_value``."""
        coeff = self.vectors.T @ x
        scaled = fn(self.values)
        out = self.vectors @ (scaled[:, None] * coeff if coeff.ndim == 2 else scaled * coeff)
        if self.zero_mode is not None and zero_value is not None:
            e = self.zero_mode
            out = out + zero_value * (np.outer(e, e @ x) if x.ndim == 2 else e * (e @ x))
        return out

    def matrix(self, fn, zero_value: float | None = None) -> np.ndarray:
        out = (self.vectors * fn(self.values)) @ self.vectors.T
        if self.zero_mode is not None and zero_value is not None:
            out = out + zero_value * np.outer(self.zero_mode, self.zero_mode)
        return out


def theta(v):
    return v**0.25


def a_symbol(v):
    return 0.5 * (v**-0.25 + v**0.25)


def b_symbol(v):
    return 0.5 * (v**-0.25 - v**0.25)


@dataclass
class HessianModel:
    """All sector blocks at one cutoff with their functional calculus."""

    blocks: dict[int, HessianBlock]
    spectra: dict[int, SectorSpectrum]
    cutoff: float
    nodes: np.ndarray
    field_weights: np.ndarray

    @property
    def L_max(self) -> int:
        return max(self.blocks)

    @property
    def zero_mode(self) -> np.ndarray | None:
        return self.spectra[1].zero_mode if 1 in self.spectra else None

    def theta(self, L: int) -> np.ndarray:
        return self.spectra[L].matrix(theta)

    def a_op(self, L: int) -> np.ndarray:
        return self.spectra[L].matrix(a_symbol, zero_value=1.0)

    def b_op(self, L: int) -> np.ndarray:
        return self.spectra[L].matrix(b_symbol, zero_value=0.0)

    def sqrt_h(self, L: int) -> np.ndarray:
        return self.spectra[L].matrix(np.sqrt, zero_value=0.0)


def _complement_basis(e: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of a unit vector (Householder)."""
    n = e.size
    v = e.copy()
    v[0] += np.copysign(1.0, e[0])
    v /= np.linalg.norm(v)
    house = np.eye(n) - 2.0 * np.outer(v, v)
    return house[:, 1:]


def spectrum_of(block: HessianBlock, clamp: float = CLAMP) -> SectorSpectrum:
    """Diagonalise a block on its physical part and clamp jitter at zero.

    Raises
    ------
    ClampingError
        If an eigenvalue lies below ``-clamp``, or if a non-translation
        eigenvalue is not strictly positive (the fourth root would not be
        invertible).
    """
    if block.zero_mode is not None:
        basis = _complement_basis(block.zero_mode)
        reduced = basis.T @ block.matrix @ basis
        vals, vecs = np.linalg.eigh(0.5 * (reduced + reduced.T))
        vecs = basis @ vecs
    else:
        vals, vecs = np.linalg.eigh(block.matrix)
    if vals.min() < -clamp:
        raise ClampingError(f"L={block.L}: eigenvalue {vals.min():.3e} below -{clamp:g}")
    if vals.max() > 1.0 + clamp:
        raise ClampingError(f"L={block.L}: eigenvalue {vals.max():.3e} above 1")
    clamped = int(np.sum(vals < 0.0))
    vals = np.clip(vals, 0.0, 1.0)
    if vals.min() <= 1e-12:
        raise ClampingError(f"L={block.L}: vanishing eigenvalue outside the translation direction")
    return SectorSpectrum(L=block.L, values=vals, vectors=vecs, zero_mode=block.zero_mode, clamped=clamped)


def build_model(blocks: dict[int, HessianBlock], clamp: float = CLAMP) -> HessianModel:
    """Assemble the per-sector functional calculus.

    Parameters
    ----------
    blocks : dict
        Hessian blocks ``0..L_max`` on a common field grid and cutoff.
    """
    if not blocks:
        raise ValueError("no blocks supplied")
    cutoffs = {b.cutoff for b in blocks.values()}
    if len(cutoffs) != 1:
        raise ValueError("blocks were built with different cutoffs")
    first = blocks[min(blocks)]
    spectra = {L: spectrum_of(b, clamp) for L, b in sorted(blocks.items())}
    return HessianModel(blocks=dict(sorted(blocks.items())), spectra=spectra, cutoff=cutoffs.pop(),
                        nodes=first.nodes, field_weights=first.field_weights)


def identity_model(sizes: dict[int, int], with_translation: bool = True) -> HessianModel:
    """Model whose physical blocks are identities (only the translation part is non-trivial)."""
    blocks = {}
    for L, n in sizes.items():
        e = None
        mat = np.eye(n)
        if L == 1 and with_translation:
            e = np.zeros(n)
            e[0] = 1.0
            mat = mat - np.outer(e, e)
        blocks[L] = HessianBlock(L=L, cutoff=np.inf, basis="toy", nodes=np.arange(1.0, n + 1),
                                 field_weights=np.ones(n), coupling=(np.eye(n) - mat) / 4.0,
                                 raw=mat, matrix=mat, zero_mode=e)
    return build_model(blocks)


@dataclass
class PowerTail:
    """Fit ``c L^-p`` to the last sectors and the implied remainder of the sum."""

    exponent: float
    amplitude: float
    remainder: float
    accepted: bool

    @classmethod
    def fit(cls, values: np.ndarray, count: int = 4, min_exponent: float = 1.2) -> "PowerTail":
        L = np.arange(values.size)
        top = L[-count:]
        vals = values[-count:]
        if np.any(vals <= 0) or top[0] < 1:
            return cls(np.nan, np.nan, 0.0, False)
        slope, intercept = np.polyfit(np.log(top), np.log(vals), 1)
        p = -slope
        c = float(np.exp(intercept))
        if p <= min_exponent:
            return cls(float(p), c, 0.0, False)
        remainder = c * float(zeta(p, L[-1] + 1))
        return cls(float(p), c, remainder, True)


@dataclass
class TraceReport:
    """Sector-resolved traces at one cutoff.

    ``tr_one_minus_h`` and ``tr_one_minus_sqrt_h`` are full-space values
    (truncated sum plus tail).  The translation direction contributes 1 per
    ``m`` of ``L = 1`` to both sector arrays.
    """

    cutoff: float
    L_max: int
    sector_one_minus_h: np.ndarray
    sector_one_minus_sqrt_h: np.ndarray
    sector_trace_t: np.ndarray
    truncated_one_minus_h: float
    truncated_one_minus_sqrt_h: float
    power_tail: PowerTail
    power_tail_first_order: PowerTail
    tail_one_minus_h: float
    tail_one_minus_sqrt_h: float
    tail_source: str
    tr_one_minus_h: float
    tr_one_minus_sqrt_h: float
    bog_ground_energy: float
    n1_expectation: float
    flags: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "cutoff": self.cutoff if np.isfinite(self.cutoff) else "inf",
            "L_max": self.L_max,
            "tr_one_minus_H": self.tr_one_minus_h,
            "tr_one_minus_sqrtH": self.tr_one_minus_sqrt_h,
            "truncated_one_minus_H": self.truncated_one_minus_h,
            "truncated_one_minus_sqrtH": self.truncated_one_minus_sqrt_h,
            "tail_one_minus_H": self.tail_one_minus_h,
            "tail_one_minus_sqrtH": self.tail_one_minus_sqrt_h,
            "tail_source": self.tail_source,
            "power_tail_exponent": self.power_tail.exponent,
            "power_tail_accepted": self.power_tail.accepted,
            "power_tail_remainder": self.power_tail.remainder,
            "bog_ground_energy": self.bog_ground_energy,
            "trace_correction": -self.tr_one_minus_sqrt_h,
            "n1_expectation": self.n1_expectation,
            "flags": list(self.flags),
        }


def trace_correction(model: HessianModel, direct: DirectTrace | None = None) -> TraceReport:
    """``Tr(1 - H)``, ``Tr(1 - sqrt H)`` and the Bogoliubov ground-state energy.

    The sector sums run over ``L <= L_max``.  The remainder is estimated in
    one of two ways:

    * ``power-law``: fit ``(2L+1) tr(1 - sqrt H_L) ~ c L^-p`` over the last
      four sectors and sum the fit (refused when ``p <= 1.2``);
    * ``direct``: when a :class:`DirectTrace` at the same cutoff is given,
      the missing part of ``Tr T`` (higher sectors and momenta above the
      field grid) is known exactly.  There ``1 - sqrt H`` is
      ``(1 - H)/2`` to first order, and the second-order remainder is
      added from its own power-law fit.

    Raises
    ------
    TruncationError
        If the sector contributions do not decay.
    """
    if model.L_max < 6:
        raise ValueError("trace_correction needs L_max >= 6")
    Ls = np.array(sorted(model.blocks))
    mult = 2 * Ls + 1
    one_h = np.empty(Ls.size)
    one_s = np.empty(Ls.size)
    tr_t = np.empty(Ls.size)
    n1 = 0.0
    for i, L in enumerate(Ls):
        sp = model.spectra[L]
        extra = 1.0 if sp.zero_mode is not None else 0.0
        one_h[i] = np.sum(1.0 - sp.values) + extra
        one_s[i] = np.sum(1.0 - np.sqrt(sp.values)) + extra
        tr_t[i] = np.trace(model.blocks[L].coupling)
        n1 += (2 * L + 1) * float(np.sum(b_symbol(sp.values) ** 2))
    w_h = mult * one_h
    w_s = mult * one_s
    flags = []
    if w_s[-1] > 0.0 and not (w_s[-1] < w_s[-4]):
        raise TruncationError("sector contributions do not decay")
    power = PowerTail.fit(w_s)
    power_first = PowerTail.fit(w_h)
    if not power.accepted:
        flags.append(f"power-law tail refused (p = {power.exponent:.3f} <= 1.2); truncated sum reported")
    if direct is not None:
        if direct.cutoff != model.cutoff:
            raise ValueError("direct trace and model use different cutoffs")
        missing_t = direct.trace_t - float(np.sum(mult * tr_t))
        tail_h = 4.0 * missing_t
        second = mult * (one_s - 0.5 * one_h)
        second_fit = PowerTail.fit(second)
        tail_s = 0.5 * tail_h + (second_fit.remainder if second_fit.accepted else 0.0)
        source = "direct"
    else:
        tail_h = power_first.remainder if power_first.accepted else 0.0
        tail_s = power.remainder if power.accepted else 0.0
        source = "power-law"
    total_h = float(np.sum(w_h)) + tail_h
    total_s = float(np.sum(w_s)) + tail_s
    if not total_s <= total_h:
        flags.append("Tr(1 - sqrt H) exceeds Tr(1 - H)")
    bog = -0.5 * total_s + 1.5
    return TraceReport(
        cutoff=model.cutoff, L_max=int(Ls[-1]), sector_one_minus_h=one_h, sector_one_minus_sqrt_h=one_s,
        sector_trace_t=tr_t, truncated_one_minus_h=float(np.sum(w_h)),
        truncated_one_minus_sqrt_h=float(np.sum(w_s)), power_tail=power, power_tail_first_order=power_first,
        tail_one_minus_h=float(tail_h), tail_one_minus_sqrt_h=float(tail_s), tail_source=source,
        tr_one_minus_h=total_h, tr_one_minus_sqrt_h=total_s, bog_ground_energy=float(bog),
        n1_expectation=float(n1), flags=flags,
    )


def ground_state_identity(h: np.ndarray) -> dict:
    """Check the quadratic-form identities behind the ground-state energy.

    For positive definite ``h`` (no translation direction) with
    ``S = (1 + h)/2`` and ``T = (h - 1)/4`` this returns
    ``<N> = ||B||^2``, the vacuum-transformed energy
    ``Tr(T + B S B + 2 A T B)`` and ``Tr(sqrt h - 1)/2``.
    """
    vals, vecs = np.linalg.eigh(h)
    a = (vecs * a_symbol(vals)) @ vecs.T
    b = (vecs * b_symbol(vals)) @ vecs.T
    n = h.shape[0]
    s_mat = 0.5 * (np.eye(n) + h)
    t_mat = 0.25 * (h - np.eye(n))
    energy = float(np.trace(t_mat + b @ s_mat @ b + 2.0 * a @ t_mat @ b))
    return {
        "number": float(np.sum(b * b)),
        "energy": energy,
        "closed_form": 0.5 * float(np.sum(np.sqrt(vals) - 1.0)),
        "offdiagonal": float(np.max(np.abs(a @ s_mat @ b + a @ t_mat @ a + b @ t_mat @ b))),
        "symplectic": float(np.max(np.abs(a @ a - b @ b - np.eye(n)))),
    }


@dataclass
class FockResult:
    energy: float
    closed_form: float
    change_last_step: float
    dimension: int
    n_occ_max: int


def _fock_ground(s_mat: np.ndarray, t_mat: np.ndarray, n_total: int) -> tuple[float, int]:
    m = s_mat.shape[0]
    states = [c for c in product(range(n_total + 1), repeat=m) if sum(c) <= n_total and sum(c) % 2 == 0]
    index = {c: i for i, c in enumerate(states)}
    rows, cols, vals = [], [], []
    for c, i in index.items():
        occ = np.array(c)
        # number-conserving part
        for a in range(m):
            for b in range(m):
                if s_mat[a, b] == 0.0 or occ[b] == 0:
                    continue
                new = occ.copy()
                amp = np.sqrt(new[b])
                new[b] -= 1
                amp *= np.sqrt(new[a] + 1)
                new[a] += 1
                j = index.get(tuple(new))
                if j is not None:
                    rows.append(j)
                    cols.append(i)
                    vals.append(s_mat[a, b] * amp)
        # pair creation and its adjoint
        for a in range(m):
            for b in range(m):
                if t_mat[a, b] == 0.0:
                    continue
                new = occ.copy()
                amp = np.sqrt(new[b] + 1)
                new[b] += 1
                amp *= np.sqrt(new[a] + 1)
                new[a] += 1
                j = index.get(tuple(new))
                if j is not None:
                    rows += [j, i]
                    cols += [i, j]
                    vals += [t_mat[a, b] * amp, t_mat[a, b] * amp]
    dim = len(states)
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    mat = mat + float(np.trace(t_mat)) * sparse.identity(dim)
    if dim <= 400:
        return float(np.linalg.eigvalsh(mat.toarray())[0]), dim
    val = eigsh(mat, k=1, which="SA", tol=1e-13)[0]
    return float(val[0]), dim


def fock_oracle(s_mat: np.ndarray, t_mat: np.ndarray, n_occ_max: int = 40) -> FockResult:
    """Ground energy of ``sum S a^+ a + sum T (a^+ a^+ + a a) + Tr T`` by brute force.

    The Fock space is truncated at total occupation ``n_occ_max`` (even
    occupations only, since the pair terms preserve parity).  The change
    from ``n_occ_max - 2`` is returned as the truncation diagnostic.

    Parameters
    ----------
    s_mat, t_mat : ndarray
        Symmetric ``m x m`` matrices, ``m <= 3``.
    """
    s_mat = np.atleast_2d(np.asarray(s_mat, dtype=float))
    t_mat = np.atleast_2d(np.asarray(t_mat, dtype=float))
    m = s_mat.shape[0]
    if m > 3:
        raise ValueError("the oracle is limited to three modes")
    if not (np.allclose(s_mat, s_mat.T) and np.allclose(t_mat, t_mat.T)):
        raise ValueError("S and T must be symmetric")
    e_hi, dim = _fock_ground(s_mat, t_mat, n_occ_max)
    e_lo, _ = _fock_ground(s_mat, t_mat, n_occ_max - 2)
    h = 2.0 * s_mat - np.eye(m)
    closed = 0.5 * float(np.sum(np.sqrt(np.clip(np.linalg.eigvalsh(h), 0.0, None)) - 1.0))
    return FockResult(energy=e_hi, closed_form=closed, change_last_step=abs(e_hi - e_lo), dimension=dim,
                      n_occ_max=n_occ_max)


def fock_matrices(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``S = (1 + h)/2`` and ``T = (h - 1)/4``."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    one = np.eye(h.shape[0])
    return 0.5 * (one + h), 0.25 * (h - one)


@dataclass
class MomentumReport:
    """Field-momentum diagnostics at one cutoff."""

    cutoff: float
    pf_second_moment: float
    pf_sector_terms: np.ndarray
    cross_trace: float
    grad_trace: float
    grad_translation_part: float
    translation_bound: float
    grad_sector_part: float
    grad_tail_part: float


def momentum_diagnostics(model: HessianModel, lap_over_grad: float, direct: DirectTrace | None = None) -> MomentumReport:
    """Second moment of the field momentum and ``Tr(grad (1 - H) grad)``.

    ``p`` couples ``(L, m)`` to ``(L +- 1, m)`` through ``cos theta`` (and its
    ``x, y`` companions); summing the squared couplings over ``m`` gives
    ``(L+1)/3`` per component, so
    ``(1/2)||A p B + B p A||^2 = sum_L (L+1) ||A_{L+1} Q B_L + B_{L+1} Q A_L||^2``
    with ``Q = diag(|q|)`` on the common field grid.

    Parameters
    ----------
    lap_over_grad : float
        ``||Delta phi||^2 / ||grad phi||^2`` of the solution.
    direct : DirectTrace, optional
        Supplies the part of ``Tr(q^2 T)`` beyond the sector model.
    """
    q = model.nodes
    Ls = sorted(model.blocks)
    a_ops = {L: model.a_op(L) for L in Ls}
    b_ops = {L: model.b_op(L) for L in Ls}
    terms = []
    for L in Ls[:-1]:
        x = a_ops[L + 1] @ (q[:, None] * b_ops[L]) + b_ops[L + 1] @ (q[:, None] * a_ops[L])
        terms.append((L + 1) * float(np.sum(x * x)))
    terms = np.array(terms)
    grad_sector = 0.0
    translation = 0.0
    sector_t_q2 = 0.0
    for L in Ls:
        sp = model.spectra[L]
        one_minus = np.eye(q.size) - sp.matrix(lambda v: v, zero_value=0.0)
        grad_sector += (2 * L + 1) * float(np.sum(np.diag(one_minus) * q**2))
        sector_t_q2 += (2 * L + 1) * float(np.sum(np.diag(model.blocks[L].coupling) * q**2))
        if sp.zero_mode is not None:
            translation = 3.0 * float(np.sum(sp.zero_mode**2 * q**2))
    tail = 0.0
    if direct is not None:
        if not np.isfinite(direct.trace_q2_t):
            raise ValueError("the gradient trace needs a finite cutoff")
        tail = 4.0 * (direct.trace_q2_t - sector_t_q2)
    return MomentumReport(cutoff=model.cutoff, pf_second_moment=float(terms.sum()), pf_sector_terms=terms,
                          cross_trace=0.0, grad_trace=grad_sector + tail, grad_translation_part=translation,
                          translation_bound=3.0 * lap_over_grad, grad_sector_part=grad_sector,
                          grad_tail_part=tail)


def random_compressions(model: HessianModel, count: int, rng: np.random.Generator,
                        sectors: tuple[int, ...] = (0, 2, 3), max_modes: int = 3, span: int = 6) -> list[dict]:
    """Small compressions ``V^T H_L V`` of real blocks for the Fock oracle.

    ``V`` has 1 to ``max_modes`` orthonormal columns drawn at random from the
    span of the ``span`` softest eigenvectors, so the compressed matrices
    keep eigenvalues well below 1.
    """
    out = []
    for _ in range(count):
        L = int(rng.choice([L for L in sectors if L in model.spectra]))
        m = int(rng.integers(1, max_modes + 1))
        sp = model.spectra[L]
        q, _ = np.linalg.qr(rng.standard_normal((span, m)))
        v = sp.vectors[:, :span] @ q
        h = v.T @ model.blocks[L].matrix @ v
        out.append({"L": L, "modes": m, "h": 0.5 * (h + h.T)})
    return out
