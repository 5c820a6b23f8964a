"""numba implementations of the hot inner loops.

Same signatures as _kernels_numpy; selected via _backend.  All kernels take
plain contiguous arrays (complex128/float64/int32) and avoid transcendentals
except where the loop itself needs them, so compile times stay small.
"""

import math

import numpy as np
from numba import njit

BACKEND_NAME = "numba"


@njit(cache=True, nogil=True)
def detect_metric(r, tpre, dmax):
    np_ = r.shape[0]
    total = 0.0
    for d in range(1, dmax + 1):
        acc = 0.0 + 0.0j
        for n in range(np_ - d):
            acc += np.conj(r[n]) * r[n + d] * tpre[d - 1, n]
        total += abs(acc)
    return total


@njit(cache=True, nogil=True)
def detect_metric_batch(windows, tpre, dmax):
    nb = windows.shape[0]
    out = np.empty(nb, dtype=np.float64)
    for b in range(nb):
        out[b] = detect_metric(windows[b], tpre, dmax)
    return out


@njit(cache=True, nogil=True)
def detect_scan(stream, tpre, dmax, gamma):
    np_ = tpre.shape[1]
    npos = stream.shape[0] - np_ + 1
    for i in range(npos):
        m = detect_metric(stream[i:i + np_], tpre, dmax)
        if m > gamma:
            return i, m
    return -1, 0.0


@njit(cache=True, nogil=True)
def sos_metrics(r, tpre, rss, np_, dmax, q):
    nw = r.shape[0]
    ncand = nw - np_ + 1

    esuf = np.empty(nw + 1, dtype=np.float64)
    esuf[nw] = 0.0
    for n in range(nw - 1, -1, -1):
        esuf[n] = esuf[n + 1] + (r[n].real * r[n].real + r[n].imag * r[n].imag)

    prod = np.zeros((dmax, nw), dtype=np.complex128)
    psuf = np.zeros((dmax, nw + 1), dtype=np.complex128)
    for d in range(1, dmax + 1):
        for n in range(nw - d):
            prod[d - 1, n] = np.conj(r[n]) * r[n + d]
        for n in range(nw - 1, -1, -1):
            tail = prod[d - 1, n] if n < nw - d else 0.0 + 0.0j
            psuf[d - 1, n] = psuf[d - 1, n + 1] + tail

    out = np.empty(ncand, dtype=np.float64)
    for delta in range(ncand):
        acc_total = 0.0
        for d in range(1, dmax + 1):
            acc = 0.0 + 0.0j
            for n in range(delta, np_ + delta - d):
                acc += prod[d - 1, n] * tpre[d - 1, n - delta]
            if rss[d - 1] != 0:
                start = np_ + delta
                # suffix sum over n in [start, nw-d-1]
                acc += rss[d - 1] * (psuf[d - 1, start] if start <= nw else 0.0 + 0.0j)
            acc_total += abs(acc)
        out[delta] = (nw - delta) ** q * (esuf[delta] + 2.0 * acc_total)
    return out


@njit(cache=True, nogil=True)
def viterbi_path(slots, refs_conj, in_prev, in_branch, init_metric):
    nk, ns_ = slots.shape[0], in_prev.shape[0]
    m_ = in_prev.shape[1]
    nsamp = slots.shape[1]
    metric = init_metric.copy()
    new_metric = np.empty(ns_, dtype=np.float64)
    bp = np.empty((nk, ns_), dtype=np.int8)
    for k in range(nk):
        for s in range(ns_):
            best = -1.0e300
            bb = 0
            for j in range(m_):
                b = in_branch[s, j]
                c = 0.0
                for i in range(nsamp):
                    c += (refs_conj[b, i] * slots[k, i]).real
                v = metric[in_prev[s, j]] + c
                if v > best:
                    best = v
                    bb = j
            new_metric[s] = best
            bp[k, s] = bb
        for s in range(ns_):
            metric[s] = new_metric[s]
    s = int(np.argmax(metric))
    path = np.empty(nk, dtype=np.int64)
    for k in range(nk - 1, -1, -1):
        j = bp[k, s]
        path[k] = in_branch[s, j]
        s = in_prev[s, j]
    return path, metric


@njit(cache=True, nogil=True)
def phase_track(slots, refs_conj, in_prev, in_branch, init_metric, kp, ki):
    nk, nsamp = slots.shape
    ns_, m_ = in_prev.shape
    out = np.empty_like(slots)
    metric = init_metric.copy()
    new_metric = np.empty(ns_, dtype=np.float64)
    phi = 0.0
    acc = 0.0
    for k in range(nk):
        rot = complex(math.cos(-phi), math.sin(-phi))
        for i in range(nsamp):
            out[k, i] = slots[k, i] * rot
        best_v = -1.0e300
        best_s = 0
        best_j = 0
        for s in range(ns_):
            bb = 0
            bv = -1.0e300
            for j in range(m_):
                b = in_branch[s, j]
                c = 0.0
                for i in range(nsamp):
                    c += (refs_conj[b, i] * out[k, i]).real
                v = metric[in_prev[s, j]] + c
                if v > bv:
                    bv = v
                    bb = j
            new_metric[s] = bv
            if bv > best_v:
                best_v = bv
                best_s = s
                best_j = bb
        for s in range(ns_):
            metric[s] = new_metric[s]
        b = in_branch[best_s, best_j]
        zr = 0.0
        zi = 0.0
        for i in range(nsamp):
            z = refs_conj[b, i] * out[k, i]
            zr += z.real
            zi += z.imag
        err = math.atan2(zi, zr)
        acc += ki * err
        phi += kp * err + acc
    return out
