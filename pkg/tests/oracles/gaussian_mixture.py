"""Independent energy oracle: direct minimisation over Gaussian mixtures.

For ``psi = sum_i c_i exp(-b_i r^2)`` every integral is closed form:
overlaps ``(pi/(a+b))^{3/2}``, kinetic ``6ab/(a+b)`` times the overlap,
and the Coulomb energy of two normalised Gaussian densities with
per-axis variances ``s1, s2`` is ``sqrt(2/pi)/sqrt(s1 + s2)``.  The
energy of a normalised orbital is ``||grad psi||^2 - D(rho, rho)/(4 pi)``.
"""
from __future__ import annotations

import numpy as np
from scipy.optimize import minimize


def mixture_energy(log_b: np.ndarray, c: np.ndarray) -> float:
    b = np.exp(log_b)
    a = b[:, None] + b[None, :]
    ov = (np.pi / a) ** 1.5
    cc = np.outer(c, c)
    norm = float(np.sum(cc * ov))
    kin = float(np.sum(cc * 6.0 * np.outer(b, b) / a * ov)) / norm
    # density pieces: weight cc*ov, variance 1/(2a)
    mass = (cc * ov).ravel() / norm
    var = (1.0 / (2.0 * a)).ravel()
    coul = float(np.sum(np.outer(mass, mass) * np.sqrt(2.0 / np.pi) / np.sqrt(var[:, None] + var[None, :])))
    return kin - coul / (4.0 * np.pi)


def minimise(terms: int = 4, seed: int = 0) -> float:
    """Best mixture energy found by Nelder-Mead from a spread of widths."""
    beta0 = 1.0 / (144.0 * np.pi**3)
    x0 = np.concatenate([np.log(beta0) + np.linspace(-2.5, 2.5, terms), np.ones(terms - 1)])

    def f(x):
        c = np.concatenate([[1.0], x[terms:]])
        return mixture_energy(x[:terms], c)

    best = minimize(f, x0, method="Nelder-Mead", options={"maxiter": 40000, "maxfev": 40000,
                                                          "xatol": 1e-10, "fatol": 1e-16})
    for _ in range(3):
        best = minimize(f, best.x, method="Nelder-Mead", options={"maxiter": 40000, "maxfev": 40000,
                                                                  "xatol": 1e-10, "fatol": 1e-16})
    return float(best.fun)
