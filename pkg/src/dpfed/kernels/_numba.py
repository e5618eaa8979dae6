import math

import numpy as np
from numba import njit

from .codes import (
    CIRCUIT,
    CONSTANT,
    LOG2,
    COUNT,
    CROSS,
    JOIN,
    LIMIT,
    SCAN,
    SORT,
)

JIT_OPTIONS = {"nogil": True, "cache": True, "fastmath": False}


@njit(**JIT_OPTIONS)
def join_pairs(left, right):
    """Row-index pairs ``(i, j)`` with equal keys, in ``(i, j)`` order."""
    n1, n2, k = left.shape[0], right.shape[0], left.shape[1]
    total = 0
    for i in range(n1):
        for j in range(n2):
            eq = True
            for c in range(k):
                if left[i, c] != right[j, c]:
                    eq = False
                    break
            if eq:
                total += 1
    li = np.empty(total, dtype=np.int64)
    ri = np.empty(total, dtype=np.int64)
    t = 0
    for i in range(n1):
        for j in range(n2):
            eq = True
            for c in range(k):
                if left[i, c] != right[j, c]:
                    eq = False
                    break
            if eq:
                li[t] = i
                ri[t] = j
                t += 1
    return li, ri


@njit(**JIT_OPTIONS)
def compositions(total, parts):
    """All length-``parts`` non-negative vectors summing to ``total``, lex order."""
    # stars and bars: choose parts-1 bar positions among total+parts-1 slots
    slots = total + parts - 1
    bars = parts - 1
    count = 1
    for i in range(bars):
        count = count * (slots - i) // (i + 1)
    out = np.empty((count, parts), dtype=np.int16)
    pos = np.arange(bars)
    for row in range(count):
        prev = -1
        for b in range(bars):
            out[row, b] = pos[b] - prev - 1
            prev = pos[b]
        out[row, parts - 1] = slots - prev - 1
        # advance to the next combination
        b = bars - 1
        while b >= 0 and pos[b] == slots - bars + b:
            b -= 1
        if b < 0:
            break
        pos[b] += 1
        for c in range(b + 1, bars):
            pos[c] = pos[c - 1] + 1
    return out


@njit(**JIT_OPTIONS)
def _passes(n):
    if n <= 1.0:
        return 1.0
    return float(math.ceil(math.log2(n)))


@njit(**JIT_OPTIONS)
def _unit(code, n):
    if code == CONSTANT:
        return 1.0
    lg = math.log2(n) if n > 2.0 else 1.0
    if code == LOG2:
        return lg
    return max(n, 1.0) * lg * lg


@njit(**JIT_OPTIONS)
def _circuit(coefs, n_in, gates, n_out):
    return coefs[0] * n_in + coefs[1] * gates + coefs[2] * _passes(n_out) + coefs[3] * n_out


@njit(**JIT_OPTIONS)
def _op_cost(kind, n1, n2, k, mode, rc, wc, coefs):
    if kind == JOIN or kind == CROSS:
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
        w = 1.0
        ws = n1
    elif kind == LIMIT:
        w = min(k, n1)
        ws = w
    else:
        w = n1
        ws = n1
    if mode == CIRCUIT:
        return _circuit(coefs, n1, n1 + w, n1)
    return n1 * _unit(rc, n1) + w * _unit(wc, ws)


@njit(**JIT_OPTIONS)
def _resize_cost(padded, noisy, mode, rc, wc, coefs):
    p = _passes(padded)
    if mode == CIRCUIT:
        return _circuit(coefs, padded, 2.0 * padded * p * p, padded) + _circuit(
            coefs, padded, 2.0 * noisy, noisy
        )
    sort = padded * p * p * (_unit(rc, padded) + _unit(wc, padded))
    copy = noisy * _unit(rc, padded) + noisy * _unit(wc, noisy)
    return sort + copy


@njit(**JIT_OPTIONS)
def plan_costs(kind, c0, c1, param, est, elig, mean_table, profile, coefs, steps):
    """Modeled plan cost for every row of ``steps`` (budget steps per eligible op)."""
    n_cand = steps.shape[0]
    n_ops = kind.shape[0]
    mode, rc, wc = profile[0], profile[1], profile[2]
    out = np.empty(n_cand, dtype=np.float64)
    size = np.empty(n_ops, dtype=np.float64)
    for c in range(n_cand):
        total = 0.0
        for i in range(n_ops):
            kd = kind[i]
            if kd == SCAN:
                size[i] = param[i]
                continue
            n1 = size[c0[i]]
            n2 = size[c1[i]] if c1[i] >= 0 else 0.0
            total += _op_cost(kd, n1, n2, param[i], mode, rc, wc, coefs)
            if kd == JOIN or kd == CROSS:
                padded = n1 * n2
            elif kd == COUNT:
                padded = 1.0
            elif kd == LIMIT:
                padded = min(param[i], n1)
            else:
                padded = n1
            j = elig[i]
            s = steps[c, j] if j >= 0 else 0
            if s > 0:
                noisy = min(padded, est[i] + mean_table[j, s])
                total += _resize_cost(padded, noisy, mode, rc, wc, coefs)
                size[i] = noisy
            else:
                size[i] = padded
        out[c] = total
    return out
