"""Frame synchronization: SoS detection (sliding GLRT) and SoS estimation.

Detection slides an Np-sample window over the incoming stream and compares

    L_D'(r_p) = sum_{d=1}^{D'} | sum_{n=0}^{Np-d-1} r*[n] r[n+d] s[n] s*[n+d] |

against a threshold gamma calibrated to a target false-alarm probability.
Every product r*[n] r[n+d] picks up only exp(j*2*pi*d*nu) under a frequency
offset and nothing under a phase offset, and the per-lag magnitude removes
that factor, so the test is invariant to both nuisances.

SoS estimation maximizes the truncated likelihood over candidate delays
delta in [0, Nw-Np]:

    C(delta) * ( sum_{n>=delta} |r[n]|^2
                 + 2 sum_{d=1}^{D} | <preamble double-correlation>
                                     + R_ss(d) * <post-preamble correlation> | )

with the bias-correction factor C(delta) = (Nw-delta)^q; q is a design knob
tied to the truncation depth D (q = 1 suits D = Np-1, smaller D wants smaller
q).  R_ss(d) is the CPM autocorrelation table from cpm.rss_table.

Ties break toward the smallest delta.  The sliding detector and the SoS scan
share most of their arithmetic; both are hot loops served by the selected
kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from .channel import noise_only, trial_seed
from .cpm import CpmScheme


@dataclass(frozen=True)
class DetectorConfig:
    Np: int
    Dp: int
    gamma: float

    def __post_init__(self):
        if not (1 <= self.Dp < self.Np):
            raise ValueError("need 1 <= Dp < Np")


@dataclass(frozen=True)
class SosEstimatorConfig:
    Nw: int
    Np: int
    D: int
    q: float
    rss: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.complex128))

    def __post_init__(self):
        if not (1 <= self.D < self.Np):
            raise ValueError("need 1 <= D < Np")
        if self.Nw <= self.Np:
            raise ValueError("observation window must exceed the preamble")
        if self.q < 0:
            raise ValueError("q must be >= 0")


@dataclass(frozen=True)
class FrameSyncResult:
    detected: bool
    detect_index: int
    delta_hat: int | None
    metric: float


def preamble_products(preamble_ref: np.ndarray, dmax: int) -> np.ndarray:
    """T[d-1, n] = s[n] s*[n+d], zero-padded square table for the kernels."""
    s = np.asarray(preamble_ref, dtype=np.complex128)
    np_ = len(s)
    t = np.zeros((dmax, np_), dtype=np.complex128)
    for d in range(1, dmax + 1):
        t[d - 1, :np_ - d] = s[:np_ - d] * np.conj(s[d:])
    return t


def _rss_vector(rss, dmax: int) -> np.ndarray:
    out = np.zeros(dmax, dtype=np.complex128)
    r = np.asarray(rss, dtype=np.complex128)
    out[:min(dmax, len(r))] = r[:dmax]
    return out


def detect_metric(rp: np.ndarray, preamble_ref: np.ndarray, dp: int) -> float:
    """Truncated GLRT statistic for one candidate window."""
    rp = np.ascontiguousarray(rp, dtype=np.complex128)
    ref = np.asarray(preamble_ref)
    if len(rp) != len(ref):
        raise ValueError("window and preamble reference lengths differ")
    return float(kernels.detect_metric(rp, preamble_products(ref, dp), dp))


def detect_metric_batch(windows: np.ndarray, preamble_ref: np.ndarray, dp: int) -> np.ndarray:
    """Detection statistic for a batch of independent windows (rows)."""
    windows = np.ascontiguousarray(windows, dtype=np.complex128)
    return np.asarray(kernels.detect_metric_batch(
        windows, preamble_products(preamble_ref, dp), dp))


def calibrate_threshold(scheme: CpmScheme, Np: int, dp: int, esn0_db: float,
                        target_pfa: float, trials: int, seed: int, N: int = 1,
                        preamble_ref: np.ndarray | None = None,
                        chunk: int = 20_000) -> float:
    """Empirical (1 - target_pfa) quantile of the H0 (noise-only) statistic.

    Uses the 'higher' empirical quantile so P{metric > gamma} <= target_pfa on
    the calibration sample.  Rejects statistically unreliable requests
    (fewer than 100 expected tail exceedances).
    """
    if trials * target_pfa < 100:
        raise ValueError("need trials >= 100/target_pfa for a stable threshold")
    if preamble_ref is None:
        from .cpm import modulate, optimal_preamble
        sym = optimal_preamble(scheme, Np // N)
        preamble_ref = modulate(scheme, sym, N).samples[:Np]
    tpre = preamble_products(preamble_ref, dp)
    metrics = np.empty(trials)
    done = 0
    ci = 0
    while done < trials:
        nwin = min(chunk, trials - done)
        w = noise_only(nwin * Np, esn0_db, N,
                       trial_seed(seed, "calibrate", ci)).samples.reshape(nwin, Np)
        metrics[done:done + nwin] = kernels.detect_metric_batch(w, tpre, dp)
        done += nwin
        ci += 1
    return float(np.quantile(metrics, 1.0 - target_pfa, method="higher"))


def detect_stream(stream: np.ndarray, preamble_ref: np.ndarray,
                  cfg: DetectorConfig) -> FrameSyncResult:
    """Slide the GLRT one sample at a time; report the first threshold crossing."""
    stream = np.ascontiguousarray(stream, dtype=np.complex128)
    if len(stream) < cfg.Np:
        return FrameSyncResult(False, -1, None, 0.0)
    tpre = preamble_products(preamble_ref, cfg.Dp)
    idx, metric = kernels.detect_scan(stream, tpre, cfg.Dp, cfg.gamma)
    if idx < 0:
        return FrameSyncResult(False, -1, None, 0.0)
    return FrameSyncResult(True, int(idx), None, float(metric))


def sos_metrics(window: np.ndarray, preamble_ref: np.ndarray,
                cfg: SosEstimatorConfig) -> np.ndarray:
    """Likelihood value per candidate delta in [0, Nw - Np]."""
    window = np.ascontiguousarray(window, dtype=np.complex128)
    if len(window) != cfg.Nw:
        raise ValueError(f"window must have Nw = {cfg.Nw} samples")
    if len(preamble_ref) != cfg.Np:
        raise ValueError("preamble reference must have Np samples")
    tpre = preamble_products(preamble_ref, cfg.D)
    rss = _rss_vector(cfg.rss, cfg.D)
    return np.asarray(kernels.sos_metrics(window, tpre, rss, cfg.Np, cfg.D, cfg.q))


def sos_estimate(window: np.ndarray, preamble_ref: np.ndarray,
                 cfg: SosEstimatorConfig) -> int:
    """argmax of the SoS likelihood; ties resolve to the smallest delta."""
    return int(np.argmax(sos_metrics(window, preamble_ref, cfg)))


def sos_op_count(window: np.ndarray, preamble_ref: np.ndarray,
                 cfg: SosEstimatorConfig) -> int:
    """Complex multiplications an instrumented direct evaluation performs.

    Mirrors the kernel's arithmetic one operation at a time; exists to pin the
    linear-in-D complexity property, not for production use.
    """
    nw, np_, dmax = cfg.Nw, cfg.Np, cfg.D
    ops = 0
    for d in range(1, dmax + 1):
        ops += nw - d                      # r*[n] r[n+d] products
        for delta in range(nw - np_ + 1):
            ops += np_ - d                 # preamble double-correlation
        ops += 1                           # R_ss(d) scale
    return ops
