"""Joint ML frequency/timing/phase estimator and its exact-LLF oracle."""

import numpy as np
import pytest

from cpmsync import cpm
from cpmsync.channel import ChannelParams, apply_channel
from cpmsync.cpm import modulate, optimal_preamble
from cpmsync.estimator import (DegenerateWindowError, EstimatorConfig,
                               ExhaustiveOracle, _gaussian_interp, build_r1_r2,
                               estimate, exact_llf, spectral_metrics)

MSK = cpm.msk()
GMSK = cpm.gmsk()


def sync_window(scheme, L0, N, nu=0.0, theta=0.0, eps=0.0, esn0=np.inf, seed=0):
    """Channel output aligned the way the estimator expects (SoS known)."""
    pre = optimal_preamble(scheme, L0)
    p = ChannelParams(nu=nu, theta=theta, eps=eps, esn0_db=esn0, seed=seed)
    nl = scheme.lag_samples(N)
    return apply_channel(scheme, pre, N, p).samples[nl:nl + N * L0]


def wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


# --- r1/r2 split ------------------------------------------------------------

def test_r1_r2_support():
    cfg = EstimatorConfig(N=2, L0=16)
    win = sync_window(MSK, 16, 2)
    r1, r2 = build_r1_r2(win, MSK, cfg)
    q = len(win) // 4
    assert np.all(r1[q:3 * q] == 0)
    assert np.all(r2[:q] == 0) and np.all(r2[3 * q:] == 0)
    assert np.all(r2[q:3 * q] != 0)


def test_r1_r2_scale_factors_unity_for_msk_l0_64():
    # (M-1) pi h L0 = 32 pi: the quarter-4 and middle-half factors are exactly 1
    cfg = EstimatorConfig(N=2, L0=64)
    win = sync_window(MSK, 64, 2)
    r1, r2 = build_r1_r2(win, MSK, cfg)
    assert np.allclose(r1[3 * 32:], win[3 * 32:], atol=1e-12)
    assert np.allclose(r2[32:96], win[32:96], atol=1e-12)


def test_r1_r2_zero_in_zero_out():
    cfg = EstimatorConfig(N=2, L0=16)
    r1, r2 = build_r1_r2(np.zeros(32, dtype=complex), MSK, cfg)
    assert not np.any(r1) and not np.any(r2)


def test_r1_r2_length_check():
    with pytest.raises(ValueError):
        build_r1_r2(np.zeros(31, dtype=complex), MSK, EstimatorConfig(N=2, L0=16))


# --- spectral statistics ----------------------------------------------------

def _lambdas_direct(r1, r2, scheme, cfg):
    """Independent O(n^2) DFT evaluation of the two statistics."""
    n = np.arange(cfg.window_len)
    a = (scheme.M - 1) * np.pi * scheme.h_float / cfg.N
    k = np.arange(cfg.nfft)
    tw = np.exp(-2j * np.pi * np.outer(k, n) / cfg.nfft)
    lam1 = tw @ (r1 * np.exp(1j * a * n))
    lam2 = tw @ (r2 * np.exp(-1j * a * n))
    return lam1, lam2


def test_spectral_metrics_match_direct_dft():
    cfg = EstimatorConfig(N=2, L0=16, Kf=2)
    win = sync_window(GMSK, 16, 2, nu=0.03, theta=0.4, eps=0.1)
    r1, r2 = build_r1_r2(win, GMSK, cfg)
    lam1, lam2 = spectral_metrics(r1, r2, GMSK, cfg)
    d1, d2 = _lambdas_direct(r1, r2, GMSK, cfg)
    assert np.max(np.abs(lam1 - d1)) < 1e-8 * np.max(np.abs(d1))
    assert np.max(np.abs(lam2 - d2)) < 1e-8 * np.max(np.abs(d2))


def test_on_bin_frequency_peaks_at_that_bin():
    cfg = EstimatorConfig(N=2, L0=16, Kf=2)
    b = 5
    nu = b / cfg.nfft
    win = sync_window(MSK, 16, 2, nu=nu)
    r1, r2 = build_r1_r2(win, MSK, cfg)
    lam1, lam2 = spectral_metrics(r1, r2, MSK, cfg)
    assert int(np.argmax(np.abs(lam1) + np.abs(lam2))) == b


def test_impulse_gives_flat_magnitude():
    cfg = EstimatorConfig(N=2, L0=16)
    r1 = np.zeros(32, dtype=complex)
    r1[0] = 1.0
    lam1, _ = spectral_metrics(r1, np.zeros(32, dtype=complex), MSK, cfg)
    assert np.max(np.abs(np.abs(lam1) - 1.0)) < 1e-12


def test_parseval():
    cfg = EstimatorConfig(N=2, L0=16, Kf=2)
    win = sync_window(GMSK, 16, 2, nu=0.01, esn0=10.0, seed=3)
    r1, r2 = build_r1_r2(win, GMSK, cfg)
    lam1, _ = spectral_metrics(r1, r2, GMSK, cfg)
    n = np.arange(cfg.window_len)
    a = (GMSK.M - 1) * np.pi * GMSK.h_float / cfg.N
    energy = np.sum(np.abs(r1 * np.exp(1j * a * n)) ** 2)
    assert np.sum(np.abs(lam1) ** 2) == pytest.approx(cfg.nfft * energy, rel=1e-12)


# --- estimate ---------------------------------------------------------------

def test_gaussian_interp_symmetric_and_degenerate():
    assert _gaussian_interp(3.0, 5.0, 3.0) == 0.0  # symmetric -> center
    assert _gaussian_interp(2.0, 2.0, 2.0) == 0.0  # flat -> center
    assert _gaussian_interp(0.0, 1.0, 2.0) == 0.0  # log-degenerate guard
    assert _gaussian_interp(2.0, 5.0, 3.0) > 0.0   # pulled toward the bigger side


def test_noiseless_estimate_matches_oracle():
    # (fd*Ts, theta, eps) = (0.07, 1.0, 0.2), MSK, L0 = 64, N = 2, Kf = 2
    N, L0 = 2, 64
    win = sync_window(MSK, L0, N, nu=0.07 / N, theta=1.0, eps=0.2)
    est = estimate(win, MSK, EstimatorConfig(N=N, L0=L0, Kf=2))
    nu_o, eps_o, th_o = ExhaustiveOracle(MSK, L0, N).estimate(win)
    assert abs(est.nu_hat - nu_o) <= 1e-4 / N
    assert abs(est.eps_hat - eps_o) <= 1e-3
    assert abs(wrap(est.theta_hat - th_o)) <= 2e-2


def test_real_positive_cross_product_gives_zero_timing():
    win = sync_window(MSK, 64, 2)  # all offsets zero -> lambda1 lambda2* real positive
    est = estimate(win, MSK, EstimatorConfig(N=2, L0=64, refine=False))
    assert abs(est.eps_hat) < 1e-9


def test_degenerate_window_raises():
    with pytest.raises(DegenerateWindowError):
        estimate(np.zeros(256, dtype=complex), MSK, EstimatorConfig(N=2, L0=128))


def test_phase_equivariance():
    # adding a constant phase shifts theta_hat and nothing else (pipeline path)
    cfg = EstimatorConfig(N=2, L0=32, refine=False)
    win = sync_window(GMSK, 32, 2, nu=0.02, theta=0.5, eps=0.1, esn0=15.0, seed=8)
    base = estimate(win, GMSK, cfg)
    for phi0 in (0.7, 2.9, -1.3):
        e = estimate(win * np.exp(1j * phi0), GMSK, cfg)
        assert e.nu_hat == pytest.approx(base.nu_hat, abs=1e-12)
        assert e.eps_hat == pytest.approx(base.eps_hat, abs=1e-9)
        assert wrap(e.theta_hat - base.theta_hat - phi0) == pytest.approx(0.0, abs=1e-9)


def test_frequency_shift_property():
    # multiplying by an exact coarse-bin tone shifts nu_hat, leaves eps_hat alone
    cfg = EstimatorConfig(N=2, L0=32, Kf=2, interpolate=False, refine=False)
    win = sync_window(MSK, 32, 2, nu=0.01, eps=0.2, esn0=25.0, seed=4)
    base = estimate(win, MSK, cfg)
    shift_bins = 9
    nu0 = shift_bins / cfg.nfft
    tone = np.exp(2j * np.pi * nu0 * np.arange(len(win)))
    e = estimate(win * tone, MSK, cfg)
    expected = (base.nu_hat + nu0 + 0.5) % 1.0 - 0.5
    assert e.nu_hat == pytest.approx(expected, abs=1e-12)
    assert e.eps_hat == pytest.approx(base.eps_hat, abs=1e-9)


def test_outputs_in_range_on_noise_only():
    rng = np.random.default_rng(0)
    cfg = EstimatorConfig(N=2, L0=16)
    for i in range(20):
        win = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        e = estimate(win, GMSK, cfg)
        assert -0.5 <= e.nu_hat < 0.5
        assert -np.pi < e.theta_hat <= np.pi + 1e-12
        # arg in (-pi, pi] bounds eps_hat by 1/(2 (M-1) h)
        assert abs(e.eps_hat) <= 1 / (2 * (GMSK.M - 1) * GMSK.h_float) + 1e-9


# --- exact LLF oracle -------------------------------------------------------

def test_exact_llf_matched_peak():
    N, L0 = 2, 16
    win = sync_window(MSK, L0, N)
    assert exact_llf(win, MSK, L0, N, 0.0, 0.0, 0.0) == pytest.approx(N * L0, abs=1e-9)


def test_exact_llf_pi_phase_negates():
    N, L0 = 2, 16
    win = sync_window(GMSK, L0, N, nu=0.01, theta=0.3, eps=0.1)
    v0 = exact_llf(win, GMSK, L0, N, 0.01, 0.3, 0.1)
    v1 = exact_llf(win, GMSK, L0, N, 0.01, 0.3 + np.pi, 0.1)
    assert v1 == pytest.approx(-v0, rel=1e-12)


def test_oracle_recovers_truth_noiseless():
    N, L0 = 2, 16
    truth = (0.021, 1.1, -0.2)
    win = sync_window(GMSK, L0, N, nu=truth[0], theta=truth[1], eps=truth[2])
    nu_o, eps_o, th_o = ExhaustiveOracle(GMSK, L0, N).estimate(win)
    # the window starts N_l samples into the stream; theta references there
    th_ref = truth[1] + 2 * np.pi * truth[0] * GMSK.lag_samples(N)
    assert abs(nu_o - truth[0]) <= 1e-4 / N
    assert abs(eps_o - truth[2]) <= 1e-3
    assert abs(wrap(th_o - th_ref)) < 5e-3
