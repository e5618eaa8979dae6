"""Pure-numpy versions of the kernels, vectorized over candidates instead of looped."""

import numpy as np

from .codes import CIRCUIT, CONSTANT, COUNT, CROSS, JOIN, LIMIT, LOG2, SCAN, SORT

_BLOCK = 1 << 22  # max pairwise comparisons materialized at once


def join_pairs(left, right):
    n1, n2 = left.shape[0], right.shape[0]
    if n1 == 0 or n2 == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    rows = max(1, _BLOCK // max(n2, 1))
    lis, ris = [], []
    for start in range(0, n1, rows):
        block = left[start : start + rows]
        eq = (block[:, None, :] == right[None, :, :]).all(axis=2)
        li, ri = np.nonzero(eq)
        lis.append(li + start)
        ris.append(ri)
    return np.concatenate(lis).astype(np.int64), np.concatenate(ris).astype(np.int64)


def compositions(total, parts):
    if parts == 1:
        return np.array([[total]], dtype=np.int16)
    blocks = []
    for first in range(total + 1):
        rest = compositions(total - first, parts - 1)
        head = np.full((rest.shape[0], 1), first, dtype=np.int16)
        blocks.append(np.hstack([head, rest]))
    return np.vstack(blocks)


def _passes(n):
    n = np.asarray(n, dtype=np.float64)
    return np.where(n <= 1.0, 1.0, np.ceil(np.log2(np.maximum(n, 1.0))))


def _unit(code, n):
    n = np.asarray(n, dtype=np.float64)
    if code == CONSTANT:
        return np.ones_like(n)
    lg = np.where(n > 2.0, np.log2(np.maximum(n, 2.0)), 1.0)
    if code == LOG2:
        return lg
    return np.maximum(n, 1.0) * lg * lg


def _circuit(coefs, n_in, gates, n_out):
    return coefs[0] * n_in + coefs[1] * gates + coefs[2] * _passes(n_out) + coefs[3] * n_out


def _op_cost(kind, n1, n2, k, mode, rc, wc, coefs):
    if kind in (JOIN, CROSS):
        m = n1 * n2
        if mode == CIRCUIT:
            return _circuit(coefs, n1 + n2, n1 + 2.0 * m, m)
        return n1 * _unit(rc, n1) + m * _unit(rc, n2) + m * _unit(wc, m)
    if kind == SORT:
        p = _passes(n1)
        if mode == CIRCUIT:
            return _circuit(coefs, n1, 2.0 * n1 * p * p, n1)
        return n1 * p * p * (_unit(rc, n1) + _unit(wc, n1))
    if kind == COUNT:
        w, ws = np.ones_like(n1), n1
    elif kind == LIMIT:
        w = np.minimum(k, n1)
        ws = w
    else:
        w, ws = n1, n1
    if mode == CIRCUIT:
        return _circuit(coefs, n1, n1 + w, n1)
    return n1 * _unit(rc, n1) + w * _unit(wc, ws)


def _resize_cost(padded, noisy, mode, rc, wc, coefs):
    p = _passes(padded)
    if mode == CIRCUIT:
        return _circuit(coefs, padded, 2.0 * padded * p * p, padded) + _circuit(
            coefs, padded, 2.0 * noisy, noisy
        )
    sort = padded * p * p * (_unit(rc, padded) + _unit(wc, padded))
    copy = noisy * _unit(rc, padded) + noisy * _unit(wc, noisy)
    return sort + copy


def plan_costs(kind, c0, c1, param, est, elig, mean_table, profile, coefs, steps):
    n_cand = steps.shape[0]
    mode, rc, wc = int(profile[0]), int(profile[1]), int(profile[2])
    total = np.zeros(n_cand)
    size = [None] * len(kind)
    for i, kd in enumerate(kind):
        if kd == SCAN:
            size[i] = np.full(n_cand, float(param[i]))
            continue
        n1 = size[c0[i]]
        n2 = size[c1[i]] if c1[i] >= 0 else np.zeros(n_cand)
        total += _op_cost(kd, n1, n2, param[i], mode, rc, wc, coefs)
        if kd in (JOIN, CROSS):
            padded = n1 * n2
        elif kd == COUNT:
            padded = np.ones(n_cand)
        elif kd == LIMIT:
            padded = np.minimum(param[i], n1)
        else:
            padded = n1
        j = elig[i]
        if j < 0:
            size[i] = padded
            continue
        s = steps[:, j].astype(np.int64)
        on = s > 0
        noisy = np.minimum(padded, est[i] + mean_table[j, s])
        total += np.where(on, _resize_cost(padded, noisy, mode, rc, wc, coefs), 0.0)
        size[i] = np.where(on, noisy, padded)
    return total
