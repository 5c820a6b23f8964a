"""MLSD Viterbi demodulation of CPM bursts, DD phase tracking, UW alignment.

Trellis: for rational h = k/p the accumulated phase of completed pulses lives
on the grid of multiples of pi*k/p, giving P = p (k even) or 2p (k odd) phase
states; together with the last L-1 symbols that still drive partial pulses the
state count is P * M^(L-1).  Each branch reference is the unit-envelope
segment the modulator would emit for that (state, input) over one symbol, so
the VA metric is the correlation Re<r, ref>.

Timing is corrected on the receiver side: symbol slots are mapped onto the
sample stream through the estimated delay (slot m covers samples with
(n - start)/N - eps in [m, m+1)), and branch references are evaluated at the
resulting fractional sample phases.  No resampling of the noisy signal.

The decision-directed phase tracker is a first-order loop fed by the angle
between each corrected slot and the winning branch reference of the VA's
running best path; with zero input error the stream passes through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .cpm import ComplexBaseband, CpmScheme

VITERBI_MIN_TRACEBACK = 5  # times (L+1); full-path traceback always satisfies it


class UwNotFoundError(RuntimeError):
    """Unique-word correlation has no sufficiently dominant peak."""


@dataclass(frozen=True)
class CpmTrellis:
    scheme: CpmScheme
    N: int
    phase_count: int
    n_states: int
    in_prev: np.ndarray       # (S, M) predecessor state of each incoming branch
    in_branch: np.ndarray     # (S, M) global branch id feeding each state
    branch_sym: np.ndarray    # (B,) input symbol per global branch
    branch_refs: np.ndarray   # (B, N) references at nominal timing (eps = 0)

    @property
    def M(self) -> int:
        return self.scheme.M


def _phase_grid(scheme: CpmScheme) -> int:
    k, p = scheme.h.numerator, scheme.h.denominator
    return p if k % 2 == 0 else 2 * p


def build_trellis(scheme: CpmScheme, N: int) -> CpmTrellis:
    """Enumerate states and branches; references built for eps = 0."""
    if scheme.h.denominator > 64:
        raise ValueError("modulation index denominator too large for a practical trellis")
    P = _phase_grid(scheme)
    M, L = scheme.M, scheme.L
    corr = M ** (L - 1)
    S = P * corr
    B = S * M

    # state = phase_idx * corr + code, code digits little-endian: newest symbol first
    in_prev = np.empty((S, M), dtype=np.int32)
    in_branch = np.empty((S, M), dtype=np.int32)
    branch_sym = np.empty(B, dtype=np.int64)
    next_state = np.empty(B, dtype=np.int32)
    alphabet = scheme.alphabet

    for s in range(S):
        phase_idx, code = divmod(s, corr)
        # history symbols alpha_{m-1} .. alpha_{m-L+1}
        digits = [(code // M ** j) % M for j in range(L - 1)]
        for mi in range(M):
            b = s * M + mi
            branch_sym[b] = alphabet[mi]
            if L > 1:
                oldest = alphabet[digits[-1]]
                new_code = (code * M + mi) % corr
            else:
                oldest = alphabet[mi]
                new_code = 0
            new_phase = (phase_idx + int(oldest)) % P
            next_state[b] = new_phase * corr + new_code

    fill = np.zeros(S, dtype=np.int64)
    for b in range(B):
        s2 = next_state[b]
        in_prev[s2, fill[s2]] = b // M
        in_branch[s2, fill[s2]] = b
        fill[s2] += 1
    if np.any(fill != M):
        raise AssertionError("trellis is not M-in-regular")

    refs = branch_references(scheme, N, P, np.arange(N) / N)
    return CpmTrellis(scheme=scheme, N=N, phase_count=P, n_states=S,
                      in_prev=in_prev, in_branch=in_branch,
                      branch_sym=branch_sym, branch_refs=refs)


def branch_references(scheme: CpmScheme, N: int, P: int,
                      sample_phases: np.ndarray) -> np.ndarray:
    """Unit-envelope reference segment per branch at the given in-slot phases."""
    M, L = scheme.M, scheme.L
    corr = M ** (L - 1)
    S = P * corr
    alphabet = scheme.alphabet
    q = scheme.pulse.q
    t = np.asarray(sample_phases, dtype=np.float64)
    refs = np.empty((S * M, len(t)), dtype=np.complex128)
    qs = [q(t + j) for j in range(L)]
    for s in range(S):
        phase_idx, code = divmod(s, corr)
        digits = [(code // M ** j) % M for j in range(L - 1)]
        base = (math.pi * scheme.h_float) * phase_idx
        hist = np.zeros(len(t))
        for j, dig in enumerate(digits):
            hist = hist + alphabet[dig] * qs[j + 1]
        for mi in range(M):
            phi = base + 2.0 * math.pi * scheme.h_float * (alphabet[mi] * qs[0] + hist)
            refs[s * M + mi] = np.exp(1j * phi)
    return refs


def slot_alignment(N: int, eps: float, start_sample: int = 0):
    """First sample index and in-slot fractional phases for symbol slot 0.

    Slot m covers samples n with (n - start_sample)/N - eps in [m, m+1); the
    returned phases are the same for every slot.
    """
    n0 = start_sample + math.ceil(N * eps - 1e-12)
    phases = (n0 - start_sample + np.arange(N)) / N - eps
    return n0, phases


def derotate(samples: np.ndarray, nu: float, theta: float, ref_index: int = 0) -> np.ndarray:
    """Remove a frequency/phase offset whose ramp is referenced to ref_index."""
    n = np.arange(len(samples))
    return samples * np.exp(-1j * (2.0 * np.pi * nu * (n - ref_index) + theta))


def _as_slots(samples: np.ndarray, n0: int, N: int, n_symbols: int) -> np.ndarray:
    need = n0 + N * n_symbols
    if n0 < 0 or need > len(samples):
        raise ValueError("not enough samples for the requested symbol slots")
    return np.ascontiguousarray(samples[n0:need].reshape(n_symbols, N))


def _init_metric(trellis: CpmTrellis, init_state: int | None) -> np.ndarray:
    init = np.zeros(trellis.n_states)
    if init_state is not None:
        init[:] = -1e12
        init[init_state] = 0.0
    return init


def viterbi_demod(r, trellis: CpmTrellis, n_symbols: int, eps: float = 0.0,
                  start_sample: int = 0, init_state: int | None = None) -> np.ndarray:
    """Maximum-correlation-metric sequence decision over n_symbols slots.

    r must already be de-rotated (derotate()); eps re-times branch references.
    Full-path traceback (depth = n_symbols, far beyond 5*(L+1)).
    """
    samples = r.samples if isinstance(r, ComplexBaseband) else np.asarray(r)
    n0, phases = slot_alignment(trellis.N, eps, start_sample)
    slots = _as_slots(samples, n0, trellis.N, n_symbols)
    refs = (trellis.branch_refs if eps == 0.0 else
            branch_references(trellis.scheme, trellis.N, trellis.phase_count, phases))
    path, _ = kernels.viterbi_path(slots, np.conj(refs), trellis.in_prev,
                                   trellis.in_branch, _init_metric(trellis, init_state))
    return trellis.branch_sym[np.asarray(path)]


def phase_track(r, trellis: CpmTrellis, loop_bw: float, n_symbols: int | None = None,
                eps: float = 0.0, start_sample: int = 0,
                init_state: int | None = None) -> np.ndarray:
    """Decision-directed PI phase tracker; returns the corrected sample stream.

    loop_bw is the loop noise bandwidth normalized to the symbol rate
    (B_L * Ts).  The per-symbol error is the angle between the corrected slot
    and the VA's running best branch; the proportional term handles phase, the
    integrator nulls the constant frequency residual the data-aided estimate
    leaves behind (a plain first-order loop would keep a steady-state error
    proportional to that residual).  Samples outside the tracked slots pass
    through unchanged.
    """
    samples = np.asarray(r.samples if isinstance(r, ComplexBaseband) else r)
    n0, phases = slot_alignment(trellis.N, eps, start_sample)
    if n_symbols is None:
        n_symbols = (len(samples) - n0) // trellis.N
    slots = _as_slots(samples, n0, trellis.N, n_symbols)
    refs = (trellis.branch_refs if eps == 0.0 else
            branch_references(trellis.scheme, trellis.N, trellis.phase_count, phases))
    # critically damped 2nd-order loop: B_L*Ts = wn*(zeta + 1/(4 zeta))/2
    zeta = math.sqrt(0.5)
    wn = 2.0 * loop_bw / (zeta + 1.0 / (4.0 * zeta))
    kp, ki = 2.0 * zeta * wn, wn * wn
    corrected = kernels.phase_track(slots, np.conj(refs), trellis.in_prev,
                                    trellis.in_branch, _init_metric(trellis, init_state),
                                    kp, ki)
    out = samples.copy()
    out[n0:n0 + trellis.N * n_symbols] = np.asarray(corrected).ravel()
    return out


def residual_freq(r, scheme: CpmScheme, N: int, known_symbols: np.ndarray,
                  eps: float = 0.0, start_sample: int = 0,
                  group: int = 4) -> float:
    """Residual frequency left on a derotated stream, from known symbols only.

    Correlates every known burst slot (preamble + unique word) against the
    exact waveform of the known prefix on the burst clock (start_sample, eps)
    and fits a line to the per-slot phases: after derotation the leftover is
    globally linear, exp(j(2 pi dnu n + theta_err)), so the slope is the
    residual and the intercept absorbs the phase-estimate error.  A grouped
    Kay pass first removes enough slope that the least-squares fit never sees
    a phase wrap.  No symbol decisions are involved, so the estimate survives
    arbitrarily bad payload SNR; it exists because the preamble-only
    frequency estimate leaves a drift tail that the symbol-rate tracker
    cannot pull in over a short burst.
    """
    samples = np.asarray(r.samples if isinstance(r, ComplexBaseband) else r)
    n_slots = len(known_symbols)
    n0, _ = slot_alignment(N, eps, start_sample)
    idx = n0 + np.arange(N * n_slots)
    if n0 < 0 or idx[-1] >= len(samples):
        return 0.0
    u = (idx - start_sample) / N - eps
    from .cpm import phase_trajectory
    ref = np.exp(1j * phase_trajectory(scheme, known_symbols, u))
    z = np.sum((samples[idx] * np.conj(ref)).reshape(n_slots, N), axis=1)

    ng = len(z) // group
    if ng < 4:
        return 0.0
    zg = z[:ng * group].reshape(ng, group).sum(axis=1)
    delta = np.angle(zg[1:] * np.conj(zg[:-1]))
    k = len(delta)
    i = np.arange(k)
    w = 1.5 * k / (k * k - 1.0) * (1.0 - ((2.0 * i + 1.0 - k) / k) ** 2)
    nu_coarse = float(np.sum(w * delta)) / (2.0 * np.pi * N * group)

    t = idx.reshape(n_slots, N).mean(axis=1)
    detrended = np.angle(z * np.exp(-2j * np.pi * nu_coarse * t))
    tc = t - t.mean()
    slope = float(np.sum(tc * detrended)) / float(np.sum(tc * tc))
    return nu_coarse + slope / (2.0 * np.pi)


def next_states(trellis: CpmTrellis) -> np.ndarray:
    """next_states[b] = state reached by global branch b."""
    out = np.empty(trellis.n_states * trellis.M, dtype=np.int32)
    out[trellis.in_branch.ravel()] = np.repeat(
        np.arange(trellis.n_states, dtype=np.int32), trellis.M)
    return out


def exhaustive_demod(r, trellis: CpmTrellis, n_symbols: int, eps: float = 0.0,
                     start_sample: int = 0, init_state: int | None = None) -> np.ndarray:
    """Brute-force search over all M^n sequences under the same metric (test oracle)."""
    samples = r.samples if isinstance(r, ComplexBaseband) else np.asarray(r)
    n0, phases = slot_alignment(trellis.N, eps, start_sample)
    slots = _as_slots(samples, n0, trellis.N, n_symbols)
    refs_c = np.conj(trellis.branch_refs if eps == 0.0 else
                     branch_references(trellis.scheme, trellis.N, trellis.phase_count, phases))
    M = trellis.M
    init = _init_metric(trellis, init_state)
    nxt = next_states(trellis)
    corr = (refs_c @ slots.T).real  # (B, K) branch correlation per slot

    best_val = -np.inf
    best_seq = None
    seq = np.zeros(n_symbols, dtype=np.int64)

    def walk(k, state, acc):
        nonlocal best_val, best_seq
        if k == n_symbols:
            if acc > best_val:
                best_val = acc
                best_seq = seq.copy()
            return
        for mi in range(M):
            b = state * M + mi
            seq[k] = trellis.branch_sym[b]
            walk(k + 1, int(nxt[b]), acc + corr[b, k])

    for s0 in range(trellis.n_states):
        if init[s0] < -1e11:
            continue
        walk(0, s0, float(init[s0]))
    return best_seq


def precode_bits(bits: np.ndarray) -> np.ndarray:
    """Adjacent-XOR precoding for binary h=1/2 CPM (b_k XOR b_{k-1}).

    A minimal Viterbi error event flips two consecutive symbols; with this
    precoding and prefix_decode_bits() at the receiver that event costs one
    payload bit instead of two, which is what lets MSK reach the
    Q(sqrt(2 Eb/N0)) bound.
    """
    b = np.asarray(bits, dtype=np.int64)
    return b ^ np.concatenate(([0], b[:-1]))


def prefix_decode_bits(symbol_bits: np.ndarray) -> np.ndarray:
    """Running-XOR inverse of precode_bits (up to one global polarity flip
    when the symbol stream starts mid-burst; resolve it with the UW)."""
    return np.bitwise_xor.accumulate(np.asarray(symbol_bits, dtype=np.int64))


def bits_to_symbols(bits: np.ndarray, M: int) -> np.ndarray:
    """Gray-map bits onto the M-ary CPM alphabet, log2(M) bits per symbol."""
    bits = np.asarray(bits, dtype=np.int64)
    k = int(math.log2(M))
    if len(bits) % k:
        raise ValueError("bit count not a multiple of log2(M)")
    groups = bits.reshape(-1, k)
    idx = np.zeros(len(groups), dtype=np.int64)
    for j in range(k):
        idx = (idx << 1) | groups[:, j]
    gray = idx ^ (idx >> 1)
    alphabet = np.arange(-(M - 1), M, 2)
    return alphabet[gray]


def symbols_to_bits(symbols: np.ndarray, M: int) -> np.ndarray:
    """Inverse of bits_to_symbols."""
    symbols = np.asarray(symbols, dtype=np.int64)
    k = int(math.log2(M))
    binary = (symbols + (M - 1)) // 2  # gray code; prefix-xor inverts it
    shift = 1
    while shift < k:
        binary = binary ^ (binary >> shift)
        shift <<= 1
    out = np.empty((len(symbols), k), dtype=np.int64)
    for j in range(k):
        out[:, j] = (binary >> (k - 1 - j)) & 1
    return out.ravel()


def uw_align(bits: np.ndarray, uw_bits: np.ndarray, min_ratio: float = 2.0,
             max_offset: int | None = None) -> int:
    """Offset of the unique word inside a demodulated bit stream.

    Correlates the +-1 mapped bits at every candidate offset (restricted to
    [0, max_offset] when the caller knows where the UW can be); the winning
    peak must be at least min_ratio times the runner-up, otherwise the UW is
    declared missing.
    """
    bits = np.asarray(bits, dtype=np.int64)
    uw = np.asarray(uw_bits, dtype=np.int64)
    if len(bits) < len(uw):
        raise UwNotFoundError("bit stream shorter than the unique word")
    corr = np.correlate(2.0 * bits - 1.0, 2.0 * uw - 1.0, mode="valid")
    if max_offset is not None:
        corr = corr[:max_offset + 1]
    order = np.argsort(corr)[::-1]
    best = corr[order[0]]
    runner = corr[order[1]] if len(corr) > 1 else 0.0
    if best <= 0 or (runner > 0 and best < min_ratio * runner):
        raise UwNotFoundError(
            f"no dominant UW peak (best {best:.0f}, runner-up {runner:.0f})")
    return int(order[0])
