"""Invariant suites shared by the command line and the test-suite."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import gaussian_weights as gw
from .bogoliubov import (ClampingError, HessianModel, build_model, fock_matrices, fock_oracle,
                         ground_state_identity, random_compressions, trace_correction)
from .fits import fit_power
from .pekar_scf import ConstantConventionError, GAUSSIAN_WIDTH, PekarSolution, effective_potential
from .radial_core import inverse_square_convolution_constant
from .sector_operators import direct_trace, hessian_blocks

SUITES = ("pekar", "hessian", "bogoliubov", "weights")


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        d["value"] = float(d["value"]) if np.isfinite(d["value"]) else str(d["value"])
        return d


def _le(suite, name, value, tol, detail=""):
    return Check(suite, name, float(value), float(tol), bool(value <= tol), detail)


def gaussian_trial_energy() -> float:
    """Energy of the normalised Gaussian trial state in these units."""
    return -1.0 / (48.0 * np.pi**3)


def pekar_suite(sol: PekarSolution) -> list[Check]:
    out = []
    for key, val in sol.virial_residuals().items():
        out.append(_le("pekar", f"virial_{key}", val, 1e-6, "relative to |e|"))
    out.append(_le("pekar", "below_gaussian_trial", sol.e_pek - gaussian_trial_energy(), 0.0,
                   f"trial width {GAUSSIAN_WIDTH:.6g}"))
    out.append(_le("pekar", "orbital_normalisation", abs(sol.grid.volume_integral(sol.psi.values**2) - 1.0), 1e-10))
    try:
        _, check = effective_potential(sol)
        out.append(_le("pekar", "potential_two_routes", check.max_relative_gap, 1e-6,
                       f"constant estimate {check.constant_estimate:.10g}"))
    except ConstantConventionError as exc:
        out.append(Check("pekar", "potential_two_routes", float("nan"), 1e-6, False, str(exc)))
    const = inverse_square_convolution_constant()
    rel = abs(const["prolate"] - np.pi**3) / np.pi**3
    out.append(_le("pekar", "convolution_constant", rel, 5e-4, f"quadrature {const['prolate']:.10g}"))
    return out


def hessian_suite(sol: PekarSolution, L_max: int = 12, k_cut: float = np.inf,
                  gap_floor: float = 0.1) -> tuple[list[Check], HessianModel | None]:
    blocks = hessian_blocks(sol, L_max, k_cut)
    out = []
    lo, hi = np.inf, -np.inf
    for L, b in blocks.items():
        vals = np.linalg.eigvalsh(b.matrix)
        lo, hi = min(lo, vals.min()), max(hi, vals.max())
    out.append(Check("hessian", "spectrum_lower", lo, -1e-6, bool(lo >= -1e-6), "min over sectors"))
    out.append(_le("hessian", "spectrum_upper", hi - 1.0, 1e-6))
    b1 = blocks[1]
    out.append(_le("hessian", "translation_rayleigh", abs(b1.diagnostics["raw_zero_mode_rayleigh"]), 1e-4,
                   "raw block along the translation profile"))
    for L in (0, 2, 3):
        g = float(np.linalg.eigvalsh(blocks[L].matrix).min())
        out.append(Check("hessian", f"gap_L{L}", g, gap_floor, bool(g >= gap_floor), "minimum eigenvalue"))
    try:
        model = build_model(blocks)
    except ClampingError as exc:
        out.append(Check("hessian", "clamping", float("nan"), 1e-6, False, str(exc)))
        model = None
    return out, model


def bogoliubov_suite(model: HessianModel, sol: PekarSolution, seed: int = 12345,
                     with_direct: bool = True) -> tuple[list[Check], list[dict]]:
    out, rows = [], []
    one = fock_oracle(*fock_matrices(np.array([[0.25]])))
    rows.append({"case": "one_mode_h0.25", "oracle": one.energy, "closed_form": one.closed_form,
                 "truncation": one.change_last_step})
    out.append(_le("bogoliubov", "oracle_one_mode", abs(one.energy + 0.25), 1e-6))
    rng = np.random.default_rng(seed)
    for i, comp in enumerate(random_compressions(model, 5, rng)):
        res = fock_oracle(*fock_matrices(comp["h"]), n_occ_max=30 if comp["modes"] == 3 else 40)
        err = abs(res.energy - res.closed_form)
        tol = max(10.0 * res.change_last_step, 1e-10)
        rows.append({"case": f"compression_{i}", "L": comp["L"], "modes": comp["modes"], "oracle": res.energy,
                     "closed_form": res.closed_form, "truncation": res.change_last_step})
        out.append(_le("bogoliubov", f"oracle_compression_{i}", err, tol))
    ident = ground_state_identity(model.blocks[0].matrix)
    out.append(_le("bogoliubov", "identity_energy", abs(ident["energy"] - ident["closed_form"]), 1e-10))
    out.append(_le("bogoliubov", "identity_offdiagonal", ident["offdiagonal"], 1e-10))
    out.append(_le("bogoliubov", "identity_symplectic", ident["symplectic"], 1e-10))
    direct = direct_trace(sol, model.cutoff) if with_direct else None
    rep = trace_correction(model, direct)
    out.append(_le("bogoliubov", "sqrt_trace_below_trace", rep.tr_one_minus_sqrt_h - rep.tr_one_minus_h, 0.0))
    p = rep.power_tail.exponent
    out.append(Check("bogoliubov", "tail_exponent", p, 1.2, bool(p > 1.2), "power-law fit of the sector tail"))
    out.append(_le("bogoliubov", "correction_negative", -rep.tr_one_minus_sqrt_h, 0.0))
    return out, rows


def weights_suite(sol: PekarSolution, model: HessianModel) -> list[Check]:
    out = []
    cert = gw.q_monotonicity(sol)
    out.append(_le("weights", "q_monotone", cert.worst_decrease, 1e-10))
    out.append(Check("weights", "q_quadratic_floor", cert.c0, 0.0, bool(cert.c0 > 0)))
    val, ref = gw.phase_identity(sol, np.array([0.3, -0.2, 1.0]), np.array([1.5, 0.4, -2.0]))
    out.append(_le("weights", "phase_identity", abs(val - ref) / abs(ref), 1e-8))
    s = gw.default_s_grid(sol)
    cg = np.array([1.0, 0.4, -0.7])
    g1 = gw.phase_g(sol, 10.0, 10.0, s[::8], cg)
    g2 = gw.phase_g(sol, 10.0, 10.0, s[::8], cg, method="quadrature")
    out.append(_le("weights", "phase_two_routes", np.max(np.abs(g1 - g2)) / np.max(np.abs(g1)), 1e-8))
    comp = gw.displacement_components(sol, model, s, check_truncation=False)
    trunc = max(comp.real.truncation.max(), comp.axial.truncation.max(), comp.transverse.truncation.max())
    out.append(_le("weights", "sector_truncation", trunc, gw.TRUNCATION_TOL))
    for part in ("real", "axial", "transverse"):
        x = getattr(comp, part)
        rel = np.max(np.abs(x.zero - x.zero_sector) / np.maximum(x.zero, 1e-300))
        out.append(_le("weights", f"projection_consistency_{part}", rel, 1e-6))
        clo = np.max(np.abs(x.total - x.zero - x.perp) / x.total)
        out.append(_le("weights", f"orthogonal_split_{part}", clo, 1e-8))
    win = (s >= 0.01) & (s <= 0.1)
    f1 = fit_power(s[win], comp.real.perp[win])
    out.append(_le("weights", "perp_exponent", abs(f1.exponent - 4.0), 0.3, f"fitted {f1.exponent:.4f}"))
    f2 = fit_power(s[win], np.abs(comp.real.tilde_excess[win]))
    out.append(Check("weights", "tilde_excess_exponent", f2.exponent, 3.7, bool(f2.exponent >= 3.7),
                     "small-s envelope of ||w~||^2 - 2 lambda s^2"))
    plateau = abs(comp.real.total[-1] - 2.0 * sol.phi_norm2) / (2.0 * sol.phi_norm2)
    out.append(_le("weights", "plateau_at_half_box", plateau, 0.01, f"s = {s[-1]:.4g}"))
    return out
