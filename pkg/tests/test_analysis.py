"""Phase-approximation error analysis and pulse-lag verification."""

import numpy as np
import pytest

from cpmsync import analysis, cpm
from cpmsync.analysis import (approx_error_analytic, approx_error_numeric,
                              error_profile, measure_lag, phase_template,
                              transition_error)
from cpmsync.cpm import make_scheme

MSK = cpm.msk()
RC1 = cpm.rc_scheme(1)
FIG5_FAMILY = {
    "2rec": cpm.rec_scheme(2),
    "3rec": cpm.rec_scheme(3),
    "2rc": cpm.rc_scheme(2),
    "3rc": cpm.rc_scheme(3),
    "gmsk": cpm.gmsk(),
    "1rc": RC1,
}


def norm(scheme):
    return scheme.h_float ** 2 * (scheme.M - 1) ** 2


def test_1rec_error_is_zero():
    for L0 in (16, 64):
        rep = approx_error_numeric(MSK, L0)
        assert rep.e_a_numeric < 1e-12
        assert approx_error_analytic(MSK, L0) < 1e-12


def test_1rc_energy_ratio_closed_form():
    # int_0^Ts (sin(2 pi t/Ts)/(4 pi))^2 dt = Ts/(32 pi^2) gives e_a = h^2 (M-1)^2 / 8
    rep = approx_error_numeric(RC1, 32)
    assert rep.e_a_surrogate / norm(RC1) == pytest.approx(0.125, abs=1e-4)
    assert approx_error_analytic(RC1, 32) / norm(RC1) == pytest.approx(0.125, abs=1e-4)


def test_full_response_independent_of_l0():
    vals = [approx_error_analytic(RC1, L0) for L0 in (16, 32, 64)]
    assert max(vals) - min(vals) < 1e-12


@pytest.mark.parametrize("name", ["2rc", "3rc", "gmsk"])
def test_partial_response_inverse_l0(name):
    sch = FIG5_FAMILY[name]
    vals = np.array([approx_error_numeric(sch, L0).e_a_numeric
                     for L0 in (16, 32, 64)])
    ratios = vals[:-1] / vals[1:]
    assert np.all(np.abs(ratios - 2.0) < 0.1)  # halves when L0 doubles


def test_longer_pulses_worse():
    assert (approx_error_analytic(FIG5_FAMILY["3rc"], 64)
            > approx_error_analytic(FIG5_FAMILY["2rc"], 64))


@pytest.mark.parametrize("name,sch", FIG5_FAMILY.items())
def test_analytic_matches_numeric_within_2pct(name, sch):
    an = approx_error_analytic(sch, 64)
    num = approx_error_numeric(sch, 64).e_a_surrogate
    assert an == pytest.approx(num, rel=0.02)


def test_normalized_collapse_across_h_and_m():
    # e_a / (h^2 (M-1)^2) depends only on the pulse and L0
    a = approx_error_numeric(cpm.rc_scheme(2), 32).e_a_surrogate / norm(cpm.rc_scheme(2))
    b_sch = make_scheme(4, "1/4", "lrc", 2)
    b = approx_error_numeric(b_sch, 32).e_a_surrogate / norm(b_sch)
    c_sch = make_scheme(2, "1/4", "lrc", 2)
    c = approx_error_numeric(c_sch, 32).e_a_surrogate / norm(c_sch)
    assert b == pytest.approx(a, rel=1e-3)
    assert c == pytest.approx(a, rel=1e-3)


def test_small_angle_surrogate_validity():
    for name in ("2rc", "gmsk", "3rc"):
        sch = FIG5_FAMILY[name]
        rep = approx_error_numeric(sch, 64)
        if np.max(np.abs(rep.e_t_profile)) < 0.3:
            assert rep.e_a_numeric == pytest.approx(rep.e_a_surrogate, rel=0.05)


def test_steady_state_error_vanishes_partial_response():
    # away from the start transient and the two transitions, e(t) = 0
    sch = FIG5_FAMILY["2rc"]
    L0 = 32
    grid, e = error_profile(sch, L0)
    half = (sch.L - 1) / 2
    quiet = ((grid > half + sch.L) & (grid < L0 / 4 - sch.L)) | \
            ((grid > L0 / 4 + sch.L) & (grid < 3 * L0 / 4 - sch.L))
    assert np.max(np.abs(e[quiet])) < 1e-9


def test_transition_error_symmetric_about_midpoint():
    # claimed symmetry of the transition-region error; checked on the real
    # profile rather than assumed
    R = 256
    for sch in (FIG5_FAMILY["2rc"], FIG5_FAMILY["gmsk"], FIG5_FAMILY["3rec"]):
        L0 = 32
        grid, e = error_profile(sch, L0, R=R)
        center = L0 // 4
        half = (sch.L - 1) / 2
        tau = np.arange(1, int(half * R))
        left = e[center * R - tau]
        right = e[center * R + tau]
        assert np.max(np.abs(np.abs(left) - np.abs(right))) < 1e-9


def test_transition_error_matches_profile_first_half():
    # the closed-form integrand equals the profile on the transition interval
    for sch in (FIG5_FAMILY["2rc"], FIG5_FAMILY["gmsk"]):
        L0 = 32
        R = 256
        grid, e = error_profile(sch, L0, R=R)
        half = (sch.L - 1) / 2
        start = int((L0 / 4 - half) * R)
        t = grid[: int(half * R) + 1]
        seg = e[start:start + len(t)]
        assert np.max(np.abs(transition_error(sch, t) - seg)) < 1e-9


def test_template_matches_modulator_within_predicted_error():
    # cross-module guard: the preamble phase deviates from the linear template
    # by no more than the analysis module's own profile predicts
    for sch in (MSK, cpm.gmsk(), cpm.rc_scheme(2)):
        L0 = 32
        grid, e = error_profile(sch, L0, R=256)
        peak = np.max(np.abs(e))
        rep_bound = np.sqrt(approx_error_numeric(sch, L0).e_a_surrogate * L0)
        assert peak <= 10 * rep_bound + 1e-9  # same scale, profile is the authority
        sym = cpm.optimal_preamble(sch, L0)
        phi = cpm.phase_trajectory(sch, sym, grid + analysis.lag_time(sch))
        direct = phi - phase_template(sch, L0, grid)
        assert np.max(np.abs(direct - e)) < 1e-12


@pytest.mark.parametrize("sch,expect,tol", [
    (MSK, 0.0, 1e-12),
    (cpm.rec_scheme(2), 0.5, 1e-9),
    (cpm.rc_scheme(2), 0.5, 1e-9),
    (cpm.rc_scheme(3), 1.0, 1e-9),
    (cpm.gmsk(), 1.5, 1e-3),
], ids=["1rec", "2rec", "2rc", "3rc", "gmsk"])
def test_measured_lag(sch, expect, tol):
    assert abs(measure_lag(sch, 2) - expect) < tol
