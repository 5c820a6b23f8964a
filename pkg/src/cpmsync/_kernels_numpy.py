"""Pure-numpy fallback implementations of the hot inner loops.

Functionally identical to _kernels_numba (float rounding aside); used when
numba is unavailable or CPMSYNC_BACKEND=numpy.
"""

import numpy as np

BACKEND_NAME = "numpy"


def detect_metric(r, tpre, dmax):
    np_ = r.shape[0]
    total = 0.0
    for d in range(1, dmax + 1):
        acc = np.sum(np.conj(r[:np_ - d]) * r[d:] * tpre[d - 1, :np_ - d])
        total += abs(acc)
    return float(total)


def detect_metric_batch(windows, tpre, dmax):
    np_ = windows.shape[1]
    total = np.zeros(windows.shape[0])
    for d in range(1, dmax + 1):
        acc = (np.conj(windows[:, :np_ - d]) * windows[:, d:]) @ tpre[d - 1, :np_ - d]
        total += np.abs(acc)
    return total


def detect_scan(stream, tpre, dmax, gamma):
    np_ = tpre.shape[1]
    npos = stream.shape[0] - np_ + 1
    for i in range(npos):
        m = detect_metric(stream[i:i + np_], tpre, dmax)
        if m > gamma:
            return i, m
    return -1, 0.0


def sos_metrics(r, tpre, rss, np_, dmax, q):
    nw = r.shape[0]
    ncand = nw - np_ + 1
    esuf = np.concatenate([np.cumsum((np.abs(r) ** 2)[::-1])[::-1], [0.0]])

    acc_total = np.zeros(ncand)
    for d in range(1, dmax + 1):
        prod = np.conj(r[:nw - d]) * r[d:]
        # preamble correlation at every candidate shift in one pass
        pre = np.correlate(prod, np.conj(tpre[d - 1, :np_ - d]), mode="valid")[:ncand]
        if rss[d - 1] != 0:
            psuf = np.concatenate([np.cumsum(prod[::-1])[::-1], [0.0 + 0.0j]])
            idx = np.minimum(np_ + np.arange(ncand), nw - d)
            pre = pre + rss[d - 1] * psuf[idx]
        acc_total += np.abs(pre)
    deltas = np.arange(ncand)
    return (nw - deltas) ** q * (esuf[deltas] + 2.0 * acc_total)


def viterbi_path(slots, refs_conj, in_prev, in_branch, init_metric):
    nk = slots.shape[0]
    ns_ = in_prev.shape[0]
    metric = init_metric.copy()
    bp = np.empty((nk, ns_), dtype=np.int8)
    for k in range(nk):
        corr = (refs_conj @ slots[k]).real
        cand = metric[in_prev] + corr[in_branch]
        bp[k] = np.argmax(cand, axis=1)
        metric = cand[np.arange(ns_), bp[k]]
    s = int(np.argmax(metric))
    path = np.empty(nk, dtype=np.int64)
    for k in range(nk - 1, -1, -1):
        j = bp[k, s]
        path[k] = in_branch[s, j]
        s = in_prev[s, j]
    return path, metric


def phase_track(slots, refs_conj, in_prev, in_branch, init_metric, kp, ki):
    nk = slots.shape[0]
    ns_ = in_prev.shape[0]
    out = np.empty_like(slots)
    metric = init_metric.copy()
    phi = 0.0
    acc = 0.0
    for k in range(nk):
        out[k] = slots[k] * np.exp(-1j * phi)
        corr = (refs_conj @ out[k]).real
        cand = metric[in_prev] + corr[in_branch]
        jbest = np.argmax(cand, axis=1)
        metric = cand[np.arange(ns_), jbest]
        s = int(np.argmax(metric))
        b = in_branch[s, jbest[s]]
        z = np.sum(refs_conj[b] * out[k])
        err = float(np.arctan2(z.imag, z.real))
        acc += ki * err
        phi += kp * err + acc
    return out
