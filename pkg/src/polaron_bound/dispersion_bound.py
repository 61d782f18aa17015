"""Upper bound on the ground-state energy as a function of total momentum."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .artifact import ProvenanceError

__all__ = ["BoundRow", "BoundTable", "EnvelopeReport", "MomentumRangeError", "ProvenanceError",
           "assemble_bound", "bound_table", "scaled_envelope"]


class MomentumRangeError(ValueError):
    """A requested momentum violates ``|P| <= c alpha``."""


ERROR_TERM = {
    "form": "C(c, eps) * alpha**(-5/2 + eps)",
    "exponent": "-5/2 + eps",
    "constant": None,
    "note": "no value is assigned to the constant; it is not computable from the construction",
}


@dataclass(frozen=True)
class BoundRow:
    P: float
    e_upper: float
    quasiparticle_ref: float
    continuum_edge: float


@dataclass
class BoundTable:
    """Upper bound rows at one coupling.

    ``quasiparticle_ref`` is the classical energy plus the kinetic term of a
    particle of mass ``alpha^4 M``; ``continuum_edge`` is ``E_upper(0) + alpha^-2``.
    """

    alpha: float
    rows: list[BoundRow]
    e_pek: float
    trace_correction: float
    m_lp: float
    k_cutoff: float
    provenance: str
    c: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def e_zero(self) -> float:
        return self.e_pek + self.trace_correction / (2.0 * self.alpha**2)

    def energy(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        return self.e_zero + P**2 / (2.0 * self.alpha**4 * self.m_lp)

    def crossing_momentum(self) -> float:
        """``|P|`` at which the bound meets the continuum edge."""
        return float(self.alpha * np.sqrt(2.0 * self.m_lp))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["alpha", "P", "E_upper", "continuum_edge", "quasiparticle_ref"])
        for r in self.rows:
            w.writerow([repr(self.alpha), repr(r.P), repr(r.e_upper), repr(r.continuum_edge), repr(r.quasiparticle_ref)])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {"alpha": self.alpha, "e_pek": self.e_pek, "trace_correction": self.trace_correction,
                "m_lp": self.m_lp, "k_cutoff": self.k_cutoff if np.isfinite(self.k_cutoff) else "inf",
                "source_checksum": self.provenance, "c": self.c, "crossing_momentum": self.crossing_momentum(),
                "error_term": ERROR_TERM, **self.meta}


def assemble_bound(sol, traces, alpha: float, P_list, provenance: str = "",
                   trace_provenance: str | None = None, c: float = 1.0) -> BoundTable:
    """Bound table from a solved field and its trace report.

    ``sol`` needs ``e_pek`` and ``m_lp``; ``traces`` needs
    ``tr_one_minus_sqrt_h`` (full space, translation modes included) and
    ``cutoff``.
    """
    return bound_table(sol.e_pek, sol.m_lp, -traces.tr_one_minus_sqrt_h, alpha, P_list, traces.cutoff,
                       provenance, trace_provenance, c)


def bound_table(e_pek: float, m_lp: float, trace_correction: float, alpha: float, P_list,
                k_cutoff: float = np.inf, provenance: str = "", trace_provenance: str | None = None,
                c: float = 1.0) -> BoundTable:
    """Rows ``E_upper(P) = e + Tr(sqrt(H) - 1)/(2 alpha^2) + P^2/(2 alpha^4 M)``.

    Parameters
    ----------
    trace_correction : float
        ``Tr(sqrt(H) - 1)`` (negative).
    trace_provenance : str, optional
        Checksum of the artifact the traces were computed from; must match
        ``provenance`` when given.

    Raises
    ------
    ProvenanceError
        If the two checksums differ.
    MomentumRangeError
        If some ``|P| > c alpha``.
    """
    if trace_provenance is not None and trace_provenance != provenance:
        raise ProvenanceError("trace report and solver artifact have different checksums")
    if alpha <= 0 or m_lp <= 0:
        raise ValueError("alpha and the mass must be positive")
    P = np.abs(np.asarray(P_list, dtype=float))
    if np.any(P > c * alpha * (1.0 + 1e-15)):
        raise MomentumRangeError(f"|P| must not exceed {c} * alpha = {c * alpha}")
    table = BoundTable(alpha=float(alpha), rows=[], e_pek=float(e_pek), trace_correction=float(trace_correction),
                       m_lp=float(m_lp), k_cutoff=float(k_cutoff), provenance=provenance, c=float(c))
    edge = table.e_zero + alpha**-2.0
    for p in P:
        kin = p**2 / (2.0 * alpha**4 * m_lp)
        table.rows.append(BoundRow(float(p), float(table.e_zero + kin), float(e_pek + kin), float(edge)))
    return table


@dataclass
class EnvelopeReport:
    alpha: float
    P2: np.ndarray
    scaled: np.ndarray
    slope: float
    expected_slope: float
    max_deviation: float


def scaled_envelope(table: BoundTable) -> EnvelopeReport:
    """``alpha^2 (E_upper(alpha P) - e - Tr/(2 alpha^2))`` against ``P^2``.

    Uses the reduced momenta ``P / alpha`` of the rows.
    """
    Pr = np.array([r.P for r in table.rows]) / table.alpha
    scaled = np.array([table.alpha**2 * (table.energy(table.alpha * p) - table.e_zero) for p in Pr])
    P2 = Pr**2
    expected = 1.0 / (2.0 * table.m_lp)
    nz = P2 > 0
    slope = float(np.mean(scaled[nz] / P2[nz])) if nz.any() else expected
    dev = float(np.max(np.abs(scaled - expected * P2))) if P2.size else 0.0
    return EnvelopeReport(table.alpha, P2, scaled, slope, expected, dev)
