"""Compiled inner loops for the held-out-scale estimators.

Each kernel walks its index sets in a fixed order and accumulates in a
fixed order, so results are reproducible bit for bit across runs and
worker counts.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np
from numba import njit

QUAD_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))


def _quad_tables():
    # For the ordered quadruple (i1, i2, i3, i4) the kernel is
    # (g_{i1 i2} . g_{i3 i4}) (g_{i3 i2} . g_{i1 i4}); every sign is looked
    # up among the six unordered pairs with g_vu = -g_uv.
    pos = {pr: i for i, pr in enumerate(QUAD_PAIRS)}

    def ref(u, v):
        return (pos[(u, v)], 1.0) if u < v else (pos[(v, u)], -1.0)

    idx, sgn = [], []
    for i1, i2, i3, i4 in permutations(range(4)):
        (l1, s1), (l2, s2) = ref(i1, i2), ref(i3, i4)
        (r1, s3), (r2, s4) = ref(i3, i2), ref(i1, i4)
        idx.append((l1, l2, r1, r2))
        sgn.append(s1 * s2 * s3 * s4)
    return np.array(idx, dtype=np.int64), np.array(sgn)


QUAD_IDX, QUAD_SGN = _quad_tables()


@njit(cache=True)
def _safe_dot(num, sa, sb):
    if sa <= 0.0 or sb <= 0.0:
        return 0.0
    return num / np.sqrt(sa * sb)


@njit(cache=True)
def tn_between_sums(a, b, pairs1, d1, pairs2, d2, w1, w2):
    """Unordered-pair sums for ``T_n`` and the cross-sample trace estimator.

    For pairs ``{i, j}`` of sample 1 and ``{s, t}`` of sample 2 with scale
    ``w1 d1 + w2 d2``, returns the sums of
    ``U_is.U_jt + U_it.U_js`` and ``(U(a_i - a_j).U(b_s - b_t))^2``.
    """
    m1, m2, p = pairs1.shape[0], pairs2.shape[0], a.shape[1]
    inv = np.empty(p)
    tn = 0.0
    btw = 0.0
    for u in range(m1):
        i, j = pairs1[u, 0], pairs1[u, 1]
        for v in range(m2):
            s, t = pairs2[v, 0], pairs2[v, 1]
            for k in range(p):
                inv[k] = 1.0 / (w1 * d1[u, k] + w2 * d2[v, k])
            is_is = jt_jt = it_it = js_js = 0.0
            is_jt = it_js = ij_ij = st_st = ij_st = 0.0
            for k in range(p):
                w = inv[k]
                e_is = a[i, k] - b[s, k]
                e_jt = a[j, k] - b[t, k]
                e_it = a[i, k] - b[t, k]
                e_js = a[j, k] - b[s, k]
                e_ij = a[i, k] - a[j, k]
                e_st = b[s, k] - b[t, k]
                is_is += w * e_is * e_is
                jt_jt += w * e_jt * e_jt
                it_it += w * e_it * e_it
                js_js += w * e_js * e_js
                is_jt += w * e_is * e_jt
                it_js += w * e_it * e_js
                ij_ij += w * e_ij * e_ij
                st_st += w * e_st * e_st
                ij_st += w * e_ij * e_st
            tn += _safe_dot(is_jt, is_is, jt_jt) + _safe_dot(it_js, it_it, js_js)
            c = _safe_dot(ij_st, ij_ij, st_st)
            btw += c * c
    return tn, btw


@njit(cache=True)
def quad_sum(x, quads, dq, idx, sgn):
    """Sum of the within-sample quartic kernel over all orderings of each quadruple."""
    m, p = quads.shape[0], x.shape[1]
    e = np.empty((6, p))
    h = np.empty((6, 6))
    total = 0.0
    for q in range(m):
        for c in range(6):
            u = quads[q, 0] if c < 3 else (quads[q, 1] if c < 5 else quads[q, 2])
            v = quads[q, 1 + c] if c < 3 else (quads[q, c - 1] if c < 5 else quads[q, 3])
            ss = 0.0
            for k in range(p):
                val = (x[u, k] - x[v, k]) / np.sqrt(dq[q, k])
                e[c, k] = val
                ss += val * val
            nrm = np.sqrt(ss)
            for k in range(p):
                e[c, k] = e[c, k] / nrm if nrm > 0.0 else 0.0
        for c in range(6):
            for r in range(c, 6):
                acc = 0.0
                for k in range(p):
                    acc += e[c, k] * e[r, k]
                h[c, r] = acc
                h[r, c] = acc
        part = 0.0
        for z in range(idx.shape[0]):
            part += sgn[z] * h[idx[z, 0], idx[z, 1]] * h[idx[z, 2], idx[z, 3]]
        total += part
    return total


@njit(cache=True)
def onestep_update(g, d, subs):
    """One recursion step of the diagonal scale on every reduced sample.

    ``g`` is the full-sample sign block under scale ``d``. For held-out set
    ``S`` the kept rank sums are ``A_j - sum_{l in S} g_jl`` with
    ``A_j = sum_l g_jl``; their coordinatewise squares summed over kept
    rows give the rank second moments up to a common factor.
    """
    n, _, p = g.shape
    m, kk = subs.shape
    a = np.zeros((n, p))
    for j in range(n):
        for l in range(n):
            for k in range(p):
                a[j, k] += g[j, l, k]
    out = np.empty((m, p))
    held = np.zeros(n, dtype=np.bool_)
    row = np.empty(p)
    for q in range(m):
        for c in range(kk):
            held[subs[q, c]] = True
        for k in range(p):
            out[q, k] = 0.0
        for j in range(n):
            if held[j]:
                continue
            for k in range(p):
                row[k] = a[j, k]
            for c in range(kk):
                l = subs[q, c]
                for k in range(p):
                    row[k] -= g[j, l, k]
            for k in range(p):
                out[q, k] += row[k] * row[k]
        tot = 0.0
        for k in range(p):
            out[q, k] *= d[k]
            tot += out[q, k]
        for k in range(p):
            out[q, k] *= p / tot
        for c in range(kk):
            held[subs[q, c]] = False
    return out
