"""Affine-invariant spatial-rank test for fixed dimension (``p < n1 + n2``).

Observations are first standardized by a symmetric ``S^{-1/2}`` chosen so
that the covariance of the pooled spatial ranks is proportional to the
identity. The statistic compares the mean standardized rank of each sample
with the pooled rank dispersion and is referred to ``chi^2_p``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .core import _ranks_standardized
from .errors import ConvergenceError, DegenerateInputError, InvalidInputError, UnsupportedRegimeError
from .sr import TestResult, _pair


@dataclass(frozen=True)
class InnerConfig:
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")


def _sym_power(s, power):
    w, v = np.linalg.eigh(s)
    if w.min() <= 0:
        raise DegenerateInputError("standardizing matrix lost positive definiteness")
    return (v * w ** power) @ v.T


def _rank_cov(ranks):
    return ranks.T @ ranks / len(ranks)


def inner_standardization(x, cfg=None):
    """Symmetric ``S`` (trace ``p``) with ``RCOV(x S^{-1/2})`` proportional to ``I``.

    Iterates ``S <- S^{1/2} RCOV S^{1/2}`` renormalized to trace ``p``, starting
    from the sample covariance. Returns ``(S, S^{-1/2}, iterations)``.
    """
    cfg = cfg or InnerConfig()
    n, p = x.shape
    s = np.cov(x, rowvar=False).reshape(p, p)
    s = s * (p / np.trace(s))
    resid = np.inf
    for it in range(1, cfg.max_iter + 1):
        root_inv = _sym_power(s, -0.5)
        c = _rank_cov(_ranks_standardized(x @ root_inv))
        c = c * (p / np.trace(c))
        resid = float(np.max(np.abs(c - np.eye(p))))
        if resid < cfg.tol:
            return s, root_inv, it
        root = _sym_power(s, 0.5)
        s = root @ c @ root
        s = 0.5 * (s + s.T)
        s = s * (p / np.trace(s))
    raise ConvergenceError(
        f"inner standardization did not converge in {cfg.max_iter} iterations (residual {resid:.3g})",
        last=s, residual=resid, iterations=cfg.max_iter)


def _canonical_rows(x):
    # The statistic ignores row order within a sample; sorting the rows fixes
    # the floating-point summation order so permuted inputs agree bit for bit.
    return x[np.lexsort(x.T[::-1])]


def q2_statistic(x1, x2, cfg=None):
    a, b = _pair(x1, x2, 2)
    a, b = _canonical_rows(a), _canonical_rows(b)
    n1, n2, p = len(a), len(b), a.shape[1]
    n = n1 + n2
    if p >= n:
        raise UnsupportedRegimeError(f"rank test needs p < n1 + n2, got p={p}, n={n}")
    pooled = np.vstack([a, b])
    if p == 1:
        z = pooled
    else:
        _, root_inv, _ = inner_standardization(pooled, cfg)
        z = pooled @ root_inv
    ranks = _ranks_standardized(z)  # ranks against the pooled sample
    m1 = ranks[:n1].mean(axis=0)
    m2 = ranks[n1:].mean(axis=0)
    denom = float(np.sum(ranks * ranks))
    if denom <= 0:
        raise DegenerateInputError("all pooled spatial ranks vanish")
    return n * p * (n1 * (m1 @ m1) + n2 * (m2 @ m2)) / denom


def tr_test_q2(x1, x2, alpha=0.05, cfg=None):
    """Q² rank test with the ``chi^2_p`` upper tail as p-value."""
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    q = float(q2_statistic(x1, x2, cfg))
    p = np.asarray(x1, dtype=float).reshape(len(x1), -1).shape[1]
    pval = float(chi2.sf(q, p))
    return TestResult(
        statistic=q, z_score=float(norm.isf(pval)), p_value=pval, reject=bool(pval < alpha),
        alpha=alpha, method="tr", df=p,
    )
