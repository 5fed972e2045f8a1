"""Spatial signs, spatial ranks and the diagonal scale recursion.

Observations are stored row-wise: a sample is an ``(n, p)`` float array.
Scales are variance scales, i.e. ``DiagScale.d[j]`` plays the role of the
squared marginal scale of column ``j`` and observations are standardised by
``x / sqrt(d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateInputError, InvalidInputError

# Above this many floats the rank computation is done in row blocks.
_BLOCK_FLOATS = 4_000_000
_TINY = np.finfo(float).tiny


def as_sample(x, name="sample", min_rows=2):
    """Validate and return a 2-D float sample matrix (rows are observations)."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got ndim={a.ndim}")
    n, p = a.shape
    if n < min_rows:
        raise InvalidInputError(f"{name} needs at least {min_rows} rows, got {n}")
    if p < 1:
        raise InvalidInputError(f"{name} has no columns")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return a


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-8
    max_iter: int = 100
    init: str = "variance"  # "variance" | "unit"

    def __post_init__(self):
        if not self.tol > 0:
            raise InvalidInputError("tol must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        if self.init not in ("variance", "unit"):
            raise InvalidInputError(f"unknown init {self.init!r}")


@dataclass(frozen=True, eq=False)
class DiagScale:
    """Positive diagonal variance scale normalised to ``sum(d) == p``."""

    d: np.ndarray
    iterations: int = 0
    residual: float = 0.0
    sqrt_d: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if d.size < 1 or not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise InvalidInputError("diagonal scale entries must be finite and positive")
        if abs(d.sum() - d.size) > 1e-10 * d.size:
            d = d / (d.sum() / d.size)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "sqrt_d", np.sqrt(d))

    @property
    def p(self):
        return self.d.size

    @classmethod
    def unit(cls, p):
        return cls(np.ones(p))

    @staticmethod
    def pooled(scale1, scale2, n1, n2):
        """Sample-size weighted combination ``(n1*D1 + n2*D2) / (n1 + n2)``.

        See :func:`pool_scales` for how the two scales are put on a common
        footing first.
        """
        return DiagScale(pool_scales(scale1.d, scale2.d, n1, n2))

    def standardize(self, x):
        return np.asarray(x, dtype=float) / self.sqrt_d


def unit_geometric(d):
    """Rescale along the last axis to geometric mean one.

    A diagonal scale is only determined up to a positive factor. Fixing
    that factor through the geometric mean makes it transform as
    ``d -> lam**2 * d * const`` with the same constant for every sample,
    which the sum normalisation does not.
    """
    d = np.asarray(d, dtype=float)
    return d / np.exp(np.mean(np.log(d), axis=-1, keepdims=True))


def pool_scales(d1, d2, n1, n2):
    """``(n1 d1 + n2 d2) / n`` after bringing both scales to geometric mean one.

    Without the common normalisation the mix would change with a
    componentwise rescaling of the data, and so would every statistic
    built on it.
    """
    n = n1 + n2
    return (n1 / n) * unit_geometric(d1) + (n2 / n) * unit_geometric(d2)


def _unit_rows(diff):
    """Spatial sign along the last axis; exact zeros map to zero."""
    sq = np.einsum("...k,...k->...", diff, diff)[..., None]
    norms = np.sqrt(sq)
    out = np.zeros_like(diff)
    np.divide(diff, norms, out=out, where=norms > 0)
    # squared norms can underflow (lose precision) or overflow; rescale those rows
    bad = ((sq < _TINY) & np.any(diff != 0, axis=-1, keepdims=True)) | ~np.isfinite(sq)
    if bad.any():
        flat = out.reshape(-1, diff.shape[-1])
        rows = bad.reshape(-1)
        v = diff.reshape(-1, diff.shape[-1])[rows]
        v = v / np.max(np.abs(v), axis=-1, keepdims=True)
        flat[rows] = v / np.sqrt(np.einsum("ik,ik->i", v, v))[:, None]
        out = flat.reshape(diff.shape)
    return out


def spatial_sign(x):
    """``x / ||x||`` for ``x != 0`` and the zero vector otherwise."""
    v = np.asarray(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("spatial_sign input must be finite")
    return _unit_rows(v)


def _check_scale(scale, p):
    if scale is None:
        return DiagScale.unit(p)
    if scale.p != p:
        raise InvalidInputError(f"scale has length {scale.p}, data has p={p}")
    return scale


def pairwise_sign_block(a, b, scale=None):
    """Signs of all scaled differences: ``out[i, s] = U(D^{-1/2}(a_i - b_s))``.

    Returns an ``(n_a, n_b, p)`` array. Each entry depends only on its own
    pair, so the result does not depend on evaluation order.
    """
    a = as_sample(a, "A", min_rows=1)
    b = as_sample(b, "B", min_rows=1)
    if a.shape[1] != b.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    scale = _check_scale(scale, a.shape[1])
    za, zb = scale.standardize(a), scale.standardize(b)
    return _unit_rows(za[:, None, :] - zb[None, :, :])


def _ranks_standardized(z):
    """Within-sample spatial ranks of already standardised rows."""
    n, p = z.shape
    rows = max(1, _BLOCK_FLOATS // max(1, n * p))
    out = np.empty_like(z)
    for start in range(0, n, rows):
        blk = z[start:start + rows]
        out[start:start + rows] = _unit_rows(blk[:, None, :] - z[None, :, :]).sum(axis=1)
    return out / n


def spatial_ranks(sample, scale=None):
    """All within-sample spatial ranks as an ``(n, p)`` array."""
    x = as_sample(sample)
    scale = _check_scale(scale, x.shape[1])
    return _ranks_standardized(scale.standardize(x))


def spatial_rank(sample, j, scale=None):
    """Spatial rank of row ``j`` (0-based): ``mean_k U(D^{-1/2}(x_j - x_k))``.

    The self term ``k == j`` is the zero vector and is kept in the average.
    """
    x = as_sample(sample)
    n = x.shape[0]
    if not -n <= j < n:
        raise InvalidInputError(f"row index {j} out of range for n={n}")
    scale = _check_scale(scale, x.shape[1])
    z = scale.standardize(x)
    return _unit_rows(z[j] - z).sum(axis=0) / n


def estimate_diag_scale(sample, cfg=None):
    """Fit the diagonal scale by the rank-covariance recursion.

    Iterates ``d <- d * diag(mean_j R_j R_j^T)`` followed by renormalisation
    to ``sum(d) == p`` until the relative change and the spread of the
    rank second moments both fall below ``cfg.tol``.
    """
    cfg = cfg or FixedPointConfig()
    x = as_sample(sample)
    n, p = x.shape
    if n < 3:
        raise DegenerateInputError(f"scale recursion needs n >= 3 rows, got {n}")
    spread = np.ptp(x, axis=0)
    if np.any(spread == 0):
        cols = np.flatnonzero(spread == 0).tolist()
        raise DegenerateInputError(f"columns with zero spread: {cols[:10]}")
    if p == 1:
        return DiagScale(np.ones(1))

    d = x.var(axis=0, ddof=1) if cfg.init == "variance" else np.ones(p)
    d = d / (d.sum() / p)
    residual = np.inf
    for it in range(1, cfg.max_iter + 1):
        r = _ranks_standardized(x / np.sqrt(d))
        m = np.einsum("ij,ij->j", r, r) / n
        mbar = m.mean()
        if not mbar > 0:
            raise DegenerateInputError("all spatial ranks vanish")
        residual = float(np.max(np.abs(m / mbar - 1.0)))
        new = d * m
        new = new / (new.sum() / p)
        change = float(np.max(np.abs(new - d) / d))
        d = new
        if change < cfg.tol and residual < cfg.tol:
            return DiagScale(d, iterations=it, residual=residual)
    raise ConvergenceError(
        f"diagonal scale did not converge in {cfg.max_iter} iterations "
        f"(residual {residual:.3g})",
        last=DiagScale(d, iterations=cfg.max_iter, residual=residual),
        residual=residual,
        iterations=cfg.max_iter,
    )


# --- uniform-sphere moment identities -------------------------------------

def _symmetric(m):
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError("matrix must be square")
    if not np.allclose(a, a.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise InvalidInputError("matrix must be symmetric")
    return a


def sphere_quadform_moment2(m):
    """``E (u^T M u)^2`` for ``u`` uniform on the unit sphere."""
    a = _symmetric(m)
    p = a.shape[0]
    tr = np.trace(a)
    tr2 = np.sum(a * a)
    return float((tr ** 2 + 2.0 * tr2) / (p * p + 2.0 * p))


def sphere_bilinear_moment4(m):
    """``E (u1^T M u2)^4`` for independent ``u1, u2`` uniform on the sphere.

    Conditioning on ``u2`` gives ``3 ||M u2||^4 / (p (p + 2))``, and
    ``||M u2||^2 = u2^T M^2 u2`` is a quadratic form handled by the second
    moment identity.
    """
    a = _symmetric(m)
    p = a.shape[0]
    a2 = a @ a
    return float(3.0 * (np.trace(a2) ** 2 + 2.0 * np.sum(a2 * a2)) / (p * p * (p + 2.0) ** 2))


def sphere_draws(rng, size, p):
    """``size`` independent uniform directions in ``R^p`` (normalised Gaussians)."""
    return _unit_rows(rng.standard_normal((size, p)))


def _mc_mean(fn, n_draws, chunk=200_000):
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_draws:
        k = min(chunk, n_draws - done)
        v = fn(k)
        total += v.sum()
        total_sq += np.dot(v, v)
        done += k
    mean = total / n_draws
    var = max(total_sq / n_draws - mean * mean, 0.0) * n_draws / (n_draws - 1)
    return mean, float(np.sqrt(var / n_draws))


def mc_quadform_moment2(m, n_draws, rng):
    """Monte Carlo ``(mean, standard error)`` of ``(u^T M u)^2``."""
    a = _symmetric(m)
    p = a.shape[0]

    def draw(k):
        u = sphere_draws(rng, k, p)
        return np.einsum("ij,jk,ik->i", u, a, u) ** 2

    return _mc_mean(draw, n_draws)


def mc_bilinear_moment4(m, n_draws, rng):
    """Monte Carlo ``(mean, standard error)`` of ``(u1^T M u2)^4``."""
    a = _symmetric(m)
    p = a.shape[0]

    def draw(k):
        u1 = sphere_draws(rng, k, p)
        u2 = sphere_draws(rng, k, p)
        return np.einsum("ij,jk,ik->i", u1, a, u2) ** 4

    return _mc_mean(draw, n_draws)
