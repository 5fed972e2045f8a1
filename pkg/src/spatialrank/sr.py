"""High-dimensional spatial-rank (SR) two-sample location test.

``T_n`` averages ``U(D^{-1/2}(x_1i - x_2s)) . U(D^{-1/2}(x_1j - x_2t))`` over
distinct index quadruples. The modes differ in the diagonal scale ``D``:

``fast`` (default)
    For each kernel term, a scale fitted without the rows entering it,
    obtained by one recursion step from the full-sample fit (see
    :mod:`spatialrank.leaveout`). Cross-sample terms combine the two
    held-out fits with weights ``n1/n`` and ``n2/n``; the within-sample
    trace estimators pool their leave-four-out fit with the other sample's
    full fit in the same way. Samples with fewer than seven rows cannot
    hold four rows out and fall back to the shared scale.
``exact``
    As ``fast``, with every held-out scale refitted to convergence.
``shared``
    One full-sample scale per sample (pooled for cross-sample terms). The
    scale then depends on the kernel rows, which at small ``n`` pushes the
    statistic up and the trace estimates down.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .core import (DiagScale, as_sample, estimate_diag_scale, pairwise_sign_block, pool_scales,
                   unit_geometric)
from .errors import EstimatorBreakdownError, InvalidInputError
from ._kernels import QUAD_IDX, QUAD_SGN, quad_sum, tn_between_sums
from .leaveout import leave_out_scales

MODES = ("fast", "exact", "shared")
_LEAVE_OUT = {"fast": "onestep", "exact": "refit"}
MIN_HELD_OUT_ROWS = 7

_CHUNK_FLOATS = 4_000_000


@dataclass(frozen=True)
class TestResult:
    statistic: float
    z_score: float
    p_value: float
    reject: bool
    alpha: float
    method: str = "sr"
    variance_est: float | None = None
    trace_estimates: tuple | None = None
    mode: str | None = None
    df: int | None = None

    __test__ = False  # keep pytest from collecting it

    def asdict(self):
        return asdict(self)


def _pair(x1, x2, min_rows):
    a = as_sample(x1, "X1", min_rows=min_rows)
    b = as_sample(x2, "X2", min_rows=min_rows)
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError(f"dimension mismatch: X1 has p={a.shape[1]}, X2 has p={b.shape[1]}")
    return a, b


def _check_mode(mode):
    if mode not in MODES:
        raise InvalidInputError(f"mode must be one of {MODES}, got {mode!r}")


def pooled_scale(x1, x2, cfg=None):
    s1 = estimate_diag_scale(x1, cfg)
    s2 = estimate_diag_scale(x2, cfg)
    return DiagScale.pooled(s1, s2, len(x1), len(x2))


def _falling(n, k):
    out = 1
    for i in range(k):
        out *= n - i
    return out


# --- shared-scale kernels ---------------------------------------------------------

def compute_tn_fast(x1, x2, scale=None, cfg=None):
    """``T_n`` with a single shared scale (pooled full-sample fit when omitted).

    The ordered sum over ``i != j, s != t`` of ``g_is . g_jt`` equals
    ``|S|^2 - sum_i |r_i|^2 - sum_s |c_s|^2 + sum_is |g_is|^2`` for the grand
    sum ``S``, row sums ``r_i`` and column sums ``c_s`` of the sign block.
    """
    a, b = _pair(x1, x2, 2)
    n1, n2 = len(a), len(b)
    if scale is None:
        scale = pooled_scale(a, b, cfg)
    g = pairwise_sign_block(a, b, scale)
    rows = g.sum(axis=1)
    cols = g.sum(axis=0)
    total = rows.sum(axis=0)
    s = total @ total - np.sum(rows * rows) - np.sum(cols * cols) + np.sum(g * g)
    return float(s / (n1 * (n1 - 1) * n2 * (n2 - 1)))


def _quartic_sum(g):
    """Sum over distinct (a,b,c,d) of (g_ab.g_cd)(g_cb.g_ad) for a block with zero diagonal.

    Terms with a == b, c == d, c == b or a == d vanish because diagonal
    signs are zero; the coincidences a == c and b == d are removed by
    inclusion-exclusion.
    """
    n, _, p = g.shape
    flat = g.reshape(n * n, p)
    full = sub_ac = sub_bd = 0.0
    ar = np.arange(n)
    for b in range(n):
        k = (g[:, b, :] @ flat.T).reshape(n, n, n)  # k[a, c, d] = g_ab . g_cd
        full += np.sum(k * k.transpose(1, 0, 2))
        diag_ac = k[ar, ar, :]
        sub_ac += np.sum(diag_ac * diag_ac)
        col_b = k[:, :, b]
        sub_bd += np.sum(col_b * col_b)
    both = np.sum(np.einsum("abk,abk->ab", g, g) ** 2)
    return full - sub_ac - sub_bd + both


def _within_shared(x, scale):
    n, p = x.shape
    g = pairwise_sign_block(x, x, scale)
    return float(2.0 * p * p * _quartic_sum(g) / _falling(n, 4))


def _between_shared(a, b, scale):
    n1, n2, p = len(a), len(b), a.shape[1]
    f1 = pairwise_sign_block(a, a, scale).reshape(n1 * n1, p)
    f2 = pairwise_sign_block(b, b, scale).reshape(n2 * n2, p)
    step = max(1, _CHUNK_FLOATS // (n2 * n2))
    s = 0.0
    for start in range(0, n1 * n1, step):
        c = f1[start:start + step] @ f2.T
        s += np.sum(c * c)
    return float(p * p * s / (n1 * (n1 - 1) * n2 * (n2 - 1)))


# --- held-out-scale kernels ---------------------------------------------------------

def _pair_sums(a, b, pairs1, d1, pairs2, d2):
    """``(T_n, tr3)`` where pair ``{i,j}`` x pair ``{s,t}`` uses ``w1 d1[{i,j}] + w2 d2[{s,t}]``.

    Rows of ``d1`` and ``d2`` are brought to geometric mean one first, as in
    :func:`spatialrank.core.pool_scales`.
    """
    n1, n2, p = len(a), len(b), a.shape[1]
    w1, w2 = n1 / (n1 + n2), n2 / (n1 + n2)
    tn, btw = tn_between_sums(a, b, pairs1, unit_geometric(d1), pairs2, unit_geometric(d2), w1, w2)
    # an unordered pair of pairs covers four ordered quadruples: two for each
    # cross term of T_n, and four sign-flipped copies of the squared product
    tn = 2.0 * tn / (n1 * (n1 - 1) * n2 * (n2 - 1))
    btw = 4.0 * p * p * btw / (n1 * (n1 - 1) * n2 * (n2 - 1))
    return float(tn), float(btw)


def _within_quads(x, quads, dq):
    """Quartic estimate where quadruple ``q`` (all 24 orderings) uses scale ``dq[q]``."""
    n, p = x.shape
    return float(2.0 * p * p * quad_sum(x, quads, dq, QUAD_IDX, QUAD_SGN) / _falling(n, 4))


def _held_out(x, k, mode, cfg, full=None, label="sample"):
    return leave_out_scales(x, k, _LEAVE_OUT[mode], cfg, full=full, label=label)


def _pool_with(dq, n_own, other_full, n_other):
    return pool_scales(dq, other_full.d[None, :], n_own, n_other)


def _uses_shared(mode, *ns):
    # Holding four rows out needs n >= 7; below that "fast" uses the shared scale.
    return mode == "shared" or (mode == "fast" and min(ns) < MIN_HELD_OUT_ROWS)


# --- public estimators ------------------------------------------------------------

def compute_tn(x1, x2, mode="fast", cfg=None):
    """``T_n`` in the requested mode."""
    _check_mode(mode)
    a, b = _pair(x1, x2, 2)
    if _uses_shared(mode, len(a), len(b)):
        return compute_tn_fast(a, b, cfg=cfg)
    pr1, d1 = _held_out(a, 2, mode, cfg, label="X1")
    pr2, d2 = _held_out(b, 2, mode, cfg, label="X2")
    return _pair_sums(a, b, pr1, d1, pr2, d2)[0]


def compute_tn_exact(x1, x2, cfg=None):
    """``T_n`` with ``D_(ijst) = (n1 D1_(ij) + n2 D2_(st)) / n`` from refitted leave-two-out scales."""
    return compute_tn(x1, x2, "exact", cfg)


def trace_r2_within(x, mode="fast", cfg=None, scale=None, other=None):
    """Quartic U-statistic estimate of ``tr(R^2)`` from one sample.

    With the held-out modes, quadruple ``q`` uses the scale fitted without
    its four rows. When ``other`` (the second sample) is given, that scale
    is pooled with the full-sample scale of ``other`` using the same
    ``n1/n, n2/n`` weights as ``T_n``. ``scale`` is only used with the
    shared scale (defaults to the full-sample fit).
    """
    _check_mode(mode)
    x = as_sample(x, min_rows=4)
    if other is not None:
        x, other = _pair(x, other, 4)
    ns = (len(x),) if other is None else (len(x), len(other))
    if _uses_shared(mode, *ns):
        if scale is None:
            scale = estimate_diag_scale(x, cfg)
        return _within_shared(x, scale)
    quads, dq = _held_out(x, 4, mode, cfg)
    if other is not None:
        dq = _pool_with(dq, len(x), estimate_diag_scale(other, cfg), len(other))
    return _within_quads(x, quads, dq)


def trace_r2_between(x1, x2, mode="fast", cfg=None, scale=None):
    """Cross-sample estimate: ``p^2`` times the average of ``(g1_{i1 i2} . g2_{i3 i4})^2``.

    The average runs over ``i1 != i2`` and ``i3 != i4``, so the divisor is
    ``n1 (n1 - 1) n2 (n2 - 1)``.
    """
    _check_mode(mode)
    a, b = _pair(x1, x2, 2)
    if _uses_shared(mode, len(a), len(b)):
        if scale is None:
            scale = pooled_scale(a, b, cfg)
        return _between_shared(a, b, scale)
    pr1, d1 = _held_out(a, 2, mode, cfg, label="X1")
    pr2, d2 = _held_out(b, 2, mode, cfg, label="X2")
    return _pair_sums(a, b, pr1, d1, pr2, d2)[1]


# --- variance and decision ------------------------------------------------------

def sigma_hat2(t1, t2, t3, n1, n2, p):
    if min(t1, t2, t3) <= 0:
        raise EstimatorBreakdownError(
            f"non-positive trace estimate (t1={t1:.4g}, t2={t2:.4g}, t3={t3:.4g})")
    pp = float(p) * p
    return (t1 / (2.0 * n1 * (n1 - 1) * pp)
            + t2 / (2.0 * n2 * (n2 - 1) * pp)
            + t3 / (n1 * n2 * pp))


def _canonical(a, b):
    # The statistic is symmetric in the samples; a fixed evaluation order
    # makes the floating-point result identical under a label swap.
    ka = (a.shape[0], a.tobytes())
    kb = (b.shape[0], b.tobytes())
    return (a, b, False) if ka <= kb else (b, a, True)


def _statistics(a, b, mode, cfg):
    f1 = estimate_diag_scale(a, cfg)
    f2 = estimate_diag_scale(b, cfg)
    if _uses_shared(mode, len(a), len(b)):
        pooled = DiagScale.pooled(f1, f2, len(a), len(b))
        return (compute_tn_fast(a, b, pooled), _within_shared(a, f1), _within_shared(b, f2),
                _between_shared(a, b, pooled))
    pr1, d1 = _held_out(a, 2, mode, cfg, full=f1, label="X1")
    pr2, d2 = _held_out(b, 2, mode, cfg, full=f2, label="X2")
    q1, dq1 = _held_out(a, 4, mode, cfg, full=f1, label="X1")
    q2, dq2 = _held_out(b, 4, mode, cfg, full=f2, label="X2")
    tn, t3 = _pair_sums(a, b, pr1, d1, pr2, d2)
    n1, n2 = len(a), len(b)
    t1 = _within_quads(a, q1, _pool_with(dq1, n1, f2, n2))
    t2 = _within_quads(b, q2, _pool_with(dq2, n2, f1, n1))
    return tn, t1, t2, t3


def sr_test(x1, x2, alpha=0.05, mode="fast", cfg=None):
    """One-sided SR test: reject when ``T_n / sigma_hat > z_alpha``."""
    _check_mode(mode)
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    x1, x2 = _pair(x1, x2, 7 if mode == "exact" else 4)
    a, b, swapped = _canonical(x1, x2)
    n1, n2, p = len(a), len(b), a.shape[1]
    tn, t1, t2, t3 = _statistics(a, b, mode, cfg)
    var = sigma_hat2(t1, t2, t3, n1, n2, p)
    if swapped:
        t1, t2 = t2, t1
    z = tn / np.sqrt(var)
    pval = float(norm.sf(z))
    return TestResult(
        statistic=tn, z_score=float(z), p_value=pval, reject=bool(pval < alpha), alpha=alpha,
        method="sr", variance_est=float(var), trace_estimates=(t1, t2, t3), mode=mode,
    )
