"""Offset + AWGN burst channel.

The receiver stream is

    r[n] = exp(j*(2*pi*nu*n + theta)) * s((n - delta)/N - eps) + w[n]

with nu the frequency offset in cycles per sample, theta the carrier phase,
delta the integer number of noise-only samples before the burst, and eps the
fractional delay in symbols.  The phase ramp is referenced to the first sample
of the stream (n = 0); theta absorbs any reference-point shift.  w[n] is
complex white Gaussian noise with per-sample variance sigma^2 = N / (Es/N0),
split equally between real and imaginary parts.

The fractional delay is realized analytically by evaluating the modulator's
phase function at shifted times, never by resampling a generated waveform, so
estimator benchmarks carry no interpolation error.

All randomness comes from numpy's counter-based Philox generator: the same
seed yields the same stream on every platform, and noise draws are made in
sample order (re, im per sample).  Parallel trials must derive distinct seeds
with trial_seed().
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cpm import ComplexBaseband, CpmScheme, phase_trajectory


@dataclass(frozen=True)
class ChannelParams:
    """True synchronization parameters for one burst."""

    nu: float = 0.0          # frequency offset, cycles/sample (fd*Ts/N)
    theta: float = 0.0       # carrier phase, rad
    eps: float = 0.0         # fractional delay, symbols, -0.5 < eps < 0.5
    delta: int = 0           # noise-only samples before the burst
    esn0_db: float = np.inf  # Es/N0 in dB; +inf means noiseless
    seed: int = 0

    def __post_init__(self):
        if not (-0.5 < self.eps < 0.5):
            raise ValueError("fractional delay eps must lie in (-0.5, 0.5)")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")


def noise_variance(esn0_db: float, N: int) -> float:
    """Per-sample complex noise variance sigma^2 = N/(Es/N0)."""
    if np.isinf(esn0_db):
        return 0.0
    return N / (10.0 ** (esn0_db / 10.0))


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator used for every noise draw in the package."""
    return np.random.Generator(np.random.Philox(seed))


def trial_seed(master_seed: int, experiment_id: str, trial_index: int) -> np.random.SeedSequence:
    """Deterministic per-trial subseed: (master seed, experiment id, trial index).

    The experiment id is folded in through its UTF-8 bytes, so distinct sweeps
    sharing a master seed draw independent streams.
    """
    tag = list(experiment_id.encode("utf-8"))
    return np.random.SeedSequence([master_seed, *tag, trial_index])


def noise_only(length: int, esn0_db: float, N: int, seed) -> ComplexBaseband:
    """i.i.d. complex Gaussian samples with variance N/(Es/N0)."""
    if length < 1:
        raise ValueError("length must be >= 1")
    sigma2 = noise_variance(esn0_db, N)
    if sigma2 == 0.0:
        return ComplexBaseband(np.zeros(length, dtype=np.complex128), N)
    draws = make_rng(seed).standard_normal((length, 2))
    w = (draws[:, 0] + 1j * draws[:, 1]) * np.sqrt(sigma2 / 2.0)
    return ComplexBaseband(w, N)


def apply_channel(scheme: CpmScheme, symbols, N: int, params: ChannelParams,
                  total_len: int | None = None) -> ComplexBaseband:
    """Delay, rotate, and add noise to one modulated burst.

    Samples 0..delta-1 are pure noise; samples delta..delta+N*len(symbols)-1
    carry the offset burst; anything beyond is noise only.  With the same seed,
    the noise stream is bit-identical to noise_only(total_len, ...).
    """
    symbols = np.asarray(symbols, dtype=np.int64)
    burst_len = N * len(symbols)
    if total_len is None:
        total_len = params.delta + burst_len
    if total_len < params.delta + burst_len:
        raise ValueError("total_len too small for the delayed burst")

    clean = np.zeros(total_len, dtype=np.complex128)
    n = np.arange(params.delta, params.delta + burst_len)
    t = (n - params.delta) / N - params.eps
    phi = phase_trajectory(scheme, symbols, t) + 2.0 * np.pi * params.nu * n + params.theta
    clean[n] = np.exp(1j * phi)

    if np.isinf(params.esn0_db):
        return ComplexBaseband(clean, N)
    w = noise_only(total_len, params.esn0_db, N, params.seed).samples
    return ComplexBaseband(clean + w, N)
