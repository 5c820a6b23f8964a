"""Phase-approximation error analysis and pulse-lag verification.

The estimator models the preamble phase as three straight lines.  The ratio of
the energy in the modeling error e(t) = phi(t) - phi_template(t) to the signal
energy over the preamble,

    e_a = (1/(L0*Ts)) * integral_0^T0 |1 - exp(j*e(t))|^2 dt,

quantifies how much that model costs.  For small |e|, |1 - exp(je)|^2 ~ e^2.
This module computes e_a twice: numerically from the modulator's own phase
(approx_error_numeric) and from closed-form piecewise integrands
(approx_error_analytic); the two must agree, which is the main guard on both.

Full-response pulses give an e_a independent of L0; partial-response pulses
deviate only in the start transient and the two preamble sign transitions, so
their e_a falls off as 1/L0.

Time in symbols (Ts = 1) throughout; e_a values are reported raw and
normalized by h^2 (M-1)^2, which collapses all (h, M) onto one curve per
pulse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpm import CpmScheme, lag_time, optimal_preamble, phase_trajectory


@dataclass(frozen=True)
class ApproxErrorReport:
    e_a_numeric: float       # exact integrand |1 - e^{je}|^2
    e_a_surrogate: float     # small-angle e^2 integrand
    e_t_profile: np.ndarray  # e(t) on the quadrature grid
    grid: np.ndarray
    L0: int

    def normalized(self, scheme: CpmScheme) -> float:
        return self.e_a_numeric / (scheme.h_float ** 2 * (scheme.M - 1) ** 2)

    def normalized_surrogate(self, scheme: CpmScheme) -> float:
        return self.e_a_surrogate / (scheme.h_float ** 2 * (scheme.M - 1) ** 2)


def phase_template(scheme: CpmScheme, L0: int, t) -> np.ndarray:
    """Three-segment linear preamble phase model on window time t in [0, L0]."""
    t = np.asarray(t, dtype=np.float64)
    a = np.pi * scheme.h_float * (scheme.M - 1)
    return np.where(
        t <= L0 / 4.0, -a * t,
        np.where(t <= 3.0 * L0 / 4.0, a * (t - L0 / 2.0), -a * (t - L0)))


def error_profile(scheme: CpmScheme, L0: int, R: int = 256):
    """e(t) = true preamble phase (seen from t = T_l) minus the linear template."""
    if L0 % 4 != 0:
        raise ValueError("L0 must be divisible by 4")
    symbols = optimal_preamble(scheme, L0)
    grid = np.linspace(0.0, float(L0), L0 * R + 1)
    phi = phase_trajectory(scheme, symbols, grid + lag_time(scheme))
    return grid, phi - phase_template(scheme, L0, grid)


def approx_error_numeric(scheme: CpmScheme, L0: int, R: int = 256) -> ApproxErrorReport:
    """Trapezoid quadrature of the modeling-error energy ratio on the R-grid."""
    if R < 256:
        raise ValueError("quadrature needs R >= 256 points/symbol")
    grid, e = error_profile(scheme, L0, R)
    exact = np.trapezoid(np.abs(1.0 - np.exp(1j * e)) ** 2, grid) / L0
    surrogate = np.trapezoid(e ** 2, grid) / L0
    return ApproxErrorReport(e_a_numeric=float(exact), e_a_surrogate=float(surrogate),
                             e_t_profile=e, grid=grid, L0=L0)


def _quad(f, lo: float, hi: float, npts: int = 4097) -> float:
    t = np.linspace(lo, hi, npts)
    return float(np.trapezoid(f(t), t))


def start_transient_error(scheme: CpmScheme, t) -> np.ndarray:
    """e_1(t): modeling error over the first (L-1)/2 symbols of the window,
    where the modulator still lacks memory of symbols before the burst."""
    t = np.asarray(t, dtype=np.float64)
    q = scheme.pulse.q
    tl = lag_time(scheme)
    s = np.zeros_like(t)
    for i in range(scheme.L - 1):
        s = s + q(t + tl - i)
    return 2.0 * np.pi * scheme.h_float * (scheme.M - 1) * (t / 2.0 - s)


def transition_error(scheme: CpmScheme, t) -> np.ndarray:
    """e_2(t): modeling error over the first half of a preamble sign transition.

    Local time runs from the start of the transition interval (duration
    (L-1)*Ts, symmetric about its midpoint).  The 2(L-1) symbols in effect are
    -(M-1) then +(M-1); completed earlier symbols and the matching template
    branch reduce to the constant a*(L-1)/2.
    """
    t = np.asarray(t, dtype=np.float64)
    q = scheme.pulse.q
    a = np.pi * scheme.h_float * (scheme.M - 1)
    phi2 = np.zeros_like(t)
    for k in range(scheme.L - 1):
        phi2 = phi2 + q(t - k)
    for j in range(1, scheme.L):
        phi2 = phi2 - q(t + j)
    phi2 = 2.0 * a * phi2
    return phi2 + a * t + a * (scheme.L - 1) / 2.0


def approx_error_analytic(scheme: CpmScheme, L0: int) -> float:
    """Closed-form-integrand e_a (small-angle energy), via numeric quadrature.

    Full response: e_a = 4 pi^2 h^2 (M-1)^2 * int_0^1 (q(t) - t/2)^2 dt,
    independent of L0.  Partial response: the start transient plus the two
    sign transitions are the only nonzero-error regions, so
    e_a = [E1 + 4*E2]/L0 with E1, E2 integrals over (L-1)/2 symbols.
    """
    if scheme.L == 1:
        q = scheme.pulse.q
        val = _quad(lambda t: (q(t) - t / 2.0) ** 2, 0.0, 1.0)
        return 4.0 * np.pi ** 2 * scheme.h_float ** 2 * (scheme.M - 1) ** 2 * val
    half = (scheme.L - 1) / 2.0
    e1 = _quad(lambda t: start_transient_error(scheme, t) ** 2, 0.0, half)
    e2 = _quad(lambda t: transition_error(scheme, t) ** 2, 0.0, half)
    return (e1 + 4.0 * e2) / L0


def measure_lag(scheme: CpmScheme, N: int) -> float:
    """Fit the time shift aligning the all-equal-symbol phase ramp to the 1REC ramp.

    Least squares over symbol boundaries K = L+1 .. L+16 of
    phi(K*Ts) = pi*h*(M-1)*(K - T_l); returns the fitted T_l in Ts units.
    """
    ks = np.arange(scheme.L + 1, scheme.L + 17)
    symbols = np.full(ks[-1] + 1, scheme.M - 1)
    t = ks * N / float(N)  # evaluated on the N-grid; boundaries are exact grid points
    phi = phase_trajectory(scheme, symbols, t)
    a = np.pi * scheme.h_float * (scheme.M - 1)
    return float(np.mean(ks - phi / a))
