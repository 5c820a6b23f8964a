"""Feedforward data-aided joint estimator of frequency, symbol timing, and phase.

The optimized preamble drives the CPM phase up/down in three linear segments,
so the log-likelihood over the preamble window decouples: two spectral
statistics are formed from the quarter windows (lambda1) and the middle half
(lambda2),

    lambda1(nu) = sum_n r1[n] exp(+j*(M-1)*pi*h*n/N) exp(-j*2*pi*n*nu)
    lambda2(nu) = sum_n r2[n] exp(-j*(M-1)*pi*h*n/N) exp(-j*2*pi*n*nu)

and the frequency estimate is the argmax of X(nu) = |lambda1| + |lambda2| on a
zero-padded FFT grid, refined by Gaussian interpolation of the three bins
around the peak.  Timing and phase then follow in closed form:

    eps_hat   = arg(lambda1 * conj(lambda2)) / (2*(M-1)*pi*h)
    theta_hat = arg(exp(-j*(M-1)*pi*h*eps_hat)*lambda1
                    + exp(+j*(M-1)*pi*h*eps_hat)*lambda2)

The window handed to estimate() must be SoS-aligned: integer delay removed and
the first N_l = N*(L-1)/2 samples skipped so the pulse lag of partial-response
schemes is already consumed.

exact_llf() and oracle_estimate() implement the unapproximated likelihood and
its exhaustive grid maximization; they exist purely as test oracles for the
fast path and are deliberately independent of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cpm import CpmScheme, lag_time, optimal_preamble, phase_trajectory


class DegenerateWindowError(ValueError):
    """The window carries no usable spectrum (e.g. all zeros)."""


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


@dataclass(frozen=True)
class EstimatorConfig:
    N: int
    L0: int
    Kf: int = 2
    interpolate: bool = True
    # Final local ascent of the exact likelihood around the fast estimate.
    # The piecewise-linear phase model leaves a small deterministic bias in
    # eps_hat/theta_hat (start transient plus segment-boundary quantization at
    # low N) that the closed forms cannot remove; the bounded polish converges
    # to the exact-LLF argmax the fast search already bracketed.  Disable for
    # the bare FFT + interpolation pipeline.
    refine: bool = True

    def __post_init__(self):
        if self.Kf < 1 or (self.Kf & (self.Kf - 1)):
            raise ValueError("Kf must be a power of two >= 1")

    @property
    def window_len(self) -> int:
        return self.N * self.L0

    @property
    def nfft(self) -> int:
        # Power-of-two transform: non-power-of-two windows are padded up
        # before the Kf zero-padding factor is applied.
        return self.Kf * _next_pow2(self.window_len)


@dataclass(frozen=True)
class SyncEstimate:
    """Estimator output with coarse-search diagnostics."""

    nu_hat: float        # cycles/sample, in [-0.5, 0.5)
    eps_hat: float       # symbols
    theta_hat: float     # rad, in (-pi, pi]
    peak_bin: int
    metric_peak: float
    eps_out_of_range: bool = False

    def __post_init__(self):
        if not (-0.5 <= self.nu_hat < 0.5):
            raise ValueError("nu_hat outside [-0.5, 0.5)")


def build_r1_r2(window: np.ndarray, scheme: CpmScheme, config: EstimatorConfig):
    """Split the window into the outer-quarters and middle-half signals.

    The fourth quarter is rotated by exp(-j*(M-1)*pi*h*L0) and the middle half
    by exp(+j*(M-1)*pi*h*L0/2) so both statistics reduce to a single DFT; for
    the usual (M-1)*h*L0 values these factors are exactly 1.
    """
    window = np.asarray(window)
    n_tot = config.window_len
    if len(window) != n_tot:
        raise ValueError(f"window must have N*L0 = {n_tot} samples, got {len(window)}")
    quarter = n_tot // 4
    a = (scheme.M - 1) * math.pi * scheme.h_float
    r1 = np.zeros(n_tot, dtype=np.complex128)
    r2 = np.zeros(n_tot, dtype=np.complex128)
    r1[:quarter] = window[:quarter]
    r1[3 * quarter:] = np.exp(-1j * a * config.L0) * window[3 * quarter:]
    r2[quarter:3 * quarter] = np.exp(1j * a * config.L0 / 2.0) * window[quarter:3 * quarter]
    return r1, r2


def _ramp(scheme: CpmScheme, config: EstimatorConfig) -> np.ndarray:
    n = np.arange(config.window_len)
    a = (scheme.M - 1) * math.pi * scheme.h_float / config.N
    return np.exp(1j * a * n)


def spectral_metrics(r1: np.ndarray, r2: np.ndarray, scheme: CpmScheme,
                     config: EstimatorConfig):
    """lambda1[k], lambda2[k] on the Kf-zero-padded FFT grid (k = 0..nfft-1)."""
    ramp = _ramp(scheme, config)
    lam1 = np.fft.fft(r1 * ramp, n=config.nfft)
    lam2 = np.fft.fft(r2 * np.conj(ramp), n=config.nfft)
    return lam1, lam2


def _lambdas_at(r1: np.ndarray, r2: np.ndarray, scheme: CpmScheme,
                config: EstimatorConfig, nu: float):
    """Direct O(N*L0) evaluation of lambda1, lambda2 at an arbitrary frequency."""
    n = np.arange(config.window_len)
    ramp = _ramp(scheme, config)
    tw = np.exp(-2j * np.pi * nu * n)
    return np.sum(r1 * ramp * tw), np.sum(r2 * np.conj(ramp) * tw)


def _gaussian_interp(x_m1: float, x_0: float, x_p1: float) -> float:
    """Peak offset in bins from Gaussian interpolation of three spectrum values.

    Natural logs; the base cancels in the ratio.  Returns 0 for degenerate
    (flat or non-concave) triples so the coarse bin survives untouched.
    """
    if x_m1 <= 0.0 or x_0 <= 0.0 or x_p1 <= 0.0:
        return 0.0
    lm, l0, lp = math.log(x_m1), math.log(x_0), math.log(x_p1)
    denom = lm + lp - 2.0 * l0
    if denom >= 0.0:
        return 0.0
    return 0.5 * (lm - lp) / denom


def estimate(window: np.ndarray, scheme: CpmScheme, config: EstimatorConfig) -> SyncEstimate:
    """Joint (nu, eps, theta) estimate over one SoS-aligned preamble window."""
    window = np.asarray(window, dtype=np.complex128)
    if not np.any(window):
        raise DegenerateWindowError("all-zero window: no estimate possible")
    r1, r2 = build_r1_r2(window, scheme, config)
    lam1, lam2 = spectral_metrics(r1, r2, scheme, config)
    x = np.abs(lam1) + np.abs(lam2)
    k0 = int(np.argmax(x))
    nfft = config.nfft

    delta_bins = 0.0
    if config.interpolate:
        delta_bins = _gaussian_interp(x[(k0 - 1) % nfft], x[k0], x[(k0 + 1) % nfft])
    nu_hat = (k0 + delta_bins) / nfft
    nu_hat = (nu_hat + 0.5) % 1.0 - 0.5

    l1, l2 = _lambdas_at(r1, r2, scheme, config, nu_hat)
    a = (scheme.M - 1) * math.pi * scheme.h_float
    eps_hat = float(np.angle(l1 * np.conj(l2))) / (2.0 * a)

    if config.refine:
        nu_hat, eps_hat, theta_hat = _refine_exact(window, scheme, config, nu_hat, eps_hat)
    else:
        theta_hat = float(np.angle(
            np.exp(-1j * a * eps_hat) * l1 + np.exp(1j * a * eps_hat) * l2))
    return SyncEstimate(
        nu_hat=float(nu_hat),
        eps_hat=float(eps_hat),
        theta_hat=float(theta_hat),
        peak_bin=k0,
        metric_peak=float(x[k0]),
        eps_out_of_range=not (-0.5 < eps_hat < 0.5),
    )


def _golden_max(f, lo: float, hi: float, iters: int = 30):
    """Deterministic golden-section maximization on [lo, hi]."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a_, b_ = lo, hi
    x1 = b_ - inv * (b_ - a_)
    x2 = a_ + inv * (b_ - a_)
    f1, f2 = f(x1), f(x2)
    for _ in range(iters):
        if f1 < f2:
            a_, x1, f1 = x1, x2, f2
            x2 = a_ + inv * (b_ - a_)
            f2 = f(x2)
        else:
            b_, x2, f2 = x2, x1, f1
            x1 = b_ - inv * (b_ - a_)
            f1 = f(x1)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _refine_exact(window: np.ndarray, scheme: CpmScheme, config: EstimatorConfig,
                  nu0: float, eps0: float):
    """Bounded coordinate ascent of the exact likelihood |Z(nu, eps)|.

    Z(nu, eps) = sum_n e^{-j*2*pi*nu*n} r[n] s_eps^*[n] with the true CPM
    reference; theta falls out as arg(Z) at the maximizer.  The search stays
    within one fine FFT bin in nu and +-0.1 symbol in eps of the fast
    estimate, so it only removes the phase-model bias; it cannot re-decide the
    coarse peak.
    """
    N, L0 = config.N, config.L0
    n = np.arange(N * L0)

    def z_at(nu: float, ref: np.ndarray) -> complex:
        return complex(np.sum(np.exp(-2j * np.pi * nu * n) * window * np.conj(ref)))

    def ref_for(eps: float) -> np.ndarray:
        return _preamble_reference(scheme, L0, N, eps)

    nu, eps = nu0, eps0
    w_nu = 1.0 / config.nfft
    w_eps = 0.1
    for _ in range(3):
        ref = ref_for(eps)
        nu, _ = _golden_max(lambda v: abs(z_at(v, ref)), nu - w_nu, nu + w_nu)
        eps, _ = _golden_max(lambda e: abs(z_at(nu, ref_for(e))), eps - w_eps, eps + w_eps)
        w_nu /= 8.0
        w_eps /= 8.0
    z = z_at(nu, ref_for(eps))
    nu = (nu + 0.5) % 1.0 - 0.5
    return nu, eps, float(np.angle(z))


# ----------------------------------------------------------------------------
# Exact-likelihood oracle (test-only reference, independent of the fast path)
# ----------------------------------------------------------------------------

def _preamble_reference(scheme: CpmScheme, L0: int, N: int, eps) -> np.ndarray:
    """s_eps[n]: the true CPM preamble, delayed by eps, seen from t = T_l onward.

    eps may be a scalar or a vector (one reference row per eps value).
    """
    symbols = optimal_preamble(scheme, L0)
    tl = lag_time(scheme)
    n = np.arange(N * L0, dtype=np.float64)
    eps = np.atleast_1d(np.asarray(eps, dtype=np.float64))
    t = tl + n[None, :] / N - eps[:, None]
    phi = phase_trajectory(scheme, symbols, t.ravel()).reshape(t.shape)
    ref = np.exp(1j * phi)
    return ref[0] if ref.shape[0] == 1 else ref


def exact_llf(window: np.ndarray, scheme: CpmScheme, L0: int, N: int,
              nu: float, theta: float, eps: float) -> float:
    """Unapproximated discrete log-likelihood Re[sum e^{-j(2 pi nu n + theta)} r s_eps^*]."""
    window = np.asarray(window, dtype=np.complex128)
    if len(window) != N * L0:
        raise ValueError("window must have N*L0 samples")
    s_eps = _preamble_reference(scheme, L0, N, eps)
    n = np.arange(N * L0)
    val = np.sum(np.exp(-1j * (2.0 * np.pi * nu * n + theta)) * window * np.conj(s_eps))
    return float(val.real)


class ExhaustiveOracle:
    """Exhaustive maximization of the exact LLF over a dense (nu, eps) grid.

    For each eps on the grid, the LLF maximized over theta is |Z(nu, eps)|
    with Z = sum_n e^{-j 2 pi nu n} r[n] s_eps^*[n], which over a uniform nu
    grid is one zero-padded FFT.  theta follows in closed form from the
    winning Z.  Grid: nu step <= nu_step (default 1e-4/N cycles/sample), eps
    step eps_step over the open interval (-0.5, 0.5).  References are built
    once so repeated trials only pay for the FFTs.
    """

    def __init__(self, scheme: CpmScheme, L0: int, N: int,
                 nu_step: float | None = None, eps_step: float = 1e-3,
                 eps_chunk: int = 128):
        from scipy.fft import next_fast_len

        if nu_step is None:
            nu_step = 1e-4 / N
        self.L0, self.N = L0, N
        self.nfft = next_fast_len(int(np.ceil(1.0 / nu_step)))
        self.eps_grid = np.arange(-0.5 + eps_step, 0.5, eps_step)
        self.eps_chunk = eps_chunk
        self._refs_conj = np.conj(_preamble_reference(scheme, L0, N, self.eps_grid))

    def estimate(self, window: np.ndarray):
        from scipy.fft import fft as _fft

        window = np.asarray(window, dtype=np.complex128)
        if len(window) != self.N * self.L0:
            raise ValueError("window must have N*L0 samples")
        best = (-np.inf, 0.0, 0.0, 0 + 0j)
        for lo in range(0, len(self.eps_grid), self.eps_chunk):
            refs_c = self._refs_conj[lo:lo + self.eps_chunk]
            z = _fft(window[None, :] * refs_c, n=self.nfft, axis=1, workers=-1)
            mag2 = z.real ** 2 + z.imag ** 2
            flat = int(np.argmax(mag2))
            i, k = divmod(flat, self.nfft)
            if mag2[i, k] > best[0]:
                nu = (k / self.nfft + 0.5) % 1.0 - 0.5
                best = (mag2[i, k], nu, float(self.eps_grid[lo + i]), z[i, k])
        _, nu_hat, eps_hat, z_peak = best
        return nu_hat, eps_hat, float(np.angle(z_peak))


def oracle_estimate(window: np.ndarray, scheme: CpmScheme, L0: int, N: int,
                    nu_step: float | None = None, eps_step: float = 1e-3):
    """One-shot exhaustive exact-LLF grid maximization (see ExhaustiveOracle)."""
    return ExhaustiveOracle(scheme, L0, N, nu_step, eps_step).estimate(window)
