"""Samplers for the simulation scenarios.

Elliptical families (normal, multivariate t, scale mixture of normals) are
generated as ``mu + sqrt(d) * (R^{1/2} z) * radius`` with a symmetric square
root of ``R``. The moving-average family builds each row from a window of
``p + T - 1`` i.i.d. innovations.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidInputError

FAMILIES = ("normal", "student_t", "mixture_normal", "moving_average")
INNOVATIONS = ("normal", "gamma", "t3", "normal_mixture")
DIAG_SCALES = ("unit", "half_3_half_1", "chi2_2_random")


class GeneratorError(InvalidInputError):
    pass


@dataclass(frozen=True)
class CorrelationSpec:
    kind: str = "identity"  # "identity" | "ar1"
    rho: float = 0.0
    p: int = 1

    def __post_init__(self):
        if self.kind not in ("identity", "ar1"):
            raise InvalidInputError(f"unknown correlation kind {self.kind!r}")
        if self.kind == "ar1" and not -1 < self.rho < 1:
            raise InvalidInputError("ar1 rho must lie in (-1, 1)")
        if self.p < 1:
            raise InvalidInputError("p must be >= 1")


def build_correlation(spec):
    if spec.kind == "identity":
        return np.eye(spec.p)
    lag = np.abs(np.subtract.outer(np.arange(spec.p), np.arange(spec.p)))
    return spec.rho ** lag


def trace_r2_exact(r):
    """Sum of squared entries, i.e. ``tr(R^2)`` for symmetric ``R``."""
    a = np.asarray(r, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError("matrix must be square")
    return float(np.sum(a * a))


@lru_cache(maxsize=64)
def _corr_root(kind, rho, p):
    r = build_correlation(CorrelationSpec(kind, rho, p))
    if kind == "identity":
        return None
    w, v = np.linalg.eigh(r)
    if w.min() <= 0:
        raise GeneratorError(f"correlation matrix is not positive definite (min eig {w.min():.3g})")
    root = (v * np.sqrt(w)) @ v.T
    root.setflags(write=False)
    return root


def _frozen_rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """One sampling distribution in dimension ``p``.

    ``constants_seed`` fixes the randomly generated constants of a
    scenario (chi-square diagonal scales, moving-average coefficients) so
    they stay frozen across replications.
    """

    family: str = "normal"
    p: int = 1
    correlation: str = "identity"
    rho: float = 0.5
    diag_scales: str = "unit"
    nu: float = 3.0
    gamma: float = 0.8
    inflation: float = 9.0
    innovation: str = "normal"
    order: int | None = None  # moving-average window T; None means T = p
    rho_coeffs: tuple | None = None
    constants_seed: int = 0
    mean: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidInputError(f"unknown family {self.family!r}")
        if self.p < 1:
            raise InvalidInputError("p must be >= 1")
        if self.diag_scales not in DIAG_SCALES:
            raise InvalidInputError(f"unknown diag_scales {self.diag_scales!r}")
        if self.family == "student_t" and self.nu < 3:
            raise InvalidInputError("student_t requires nu >= 3")
        if self.family == "mixture_normal" and not (0 < self.gamma < 1 and self.inflation > 1):
            raise InvalidInputError("mixture_normal requires gamma in (0,1) and inflation > 1")
        if self.family == "moving_average":
            if self.innovation not in INNOVATIONS:
                raise InvalidInputError(f"unknown innovation {self.innovation!r}")
            if self.order is not None and self.order < 1:
                raise InvalidInputError("moving-average order must be >= 1")
            if self.rho_coeffs is not None and any(c <= 0 for c in self.rho_coeffs):
                raise InvalidInputError("moving-average coefficients must be positive")
        CorrelationSpec(self.correlation, self.rho, self.p)
        if self.mean is not None:
            m = np.asarray(self.mean, dtype=float).reshape(-1)
            if m.size != self.p or not np.all(np.isfinite(m)):
                raise InvalidInputError(f"mean must be a finite length-{self.p} vector")
            m.setflags(write=False)
            object.__setattr__(self, "mean", m)

    def with_mean(self, mean):
        return replace(self, mean=mean)

    @property
    def elliptical(self):
        return self.family != "moving_average"

    @property
    def window(self):
        return self.p if self.order is None else self.order

    def scales(self):
        """Raw diagonal variance scales ``d_j^2`` (not trace-normalised)."""
        p = self.p
        if self.diag_scales == "unit" or not self.elliptical:
            return np.ones(p)
        if self.diag_scales == "half_3_half_1":
            d = np.ones(p)
            d[: p // 2] = 3.0
            return d
        return _frozen_rng(self.constants_seed, 2, p).chisquare(2, size=p)

    def coefficients(self):
        if self.rho_coeffs is not None:
            c = np.asarray(self.rho_coeffs, dtype=float)
            if c.size != self.window:
                raise InvalidInputError(f"expected {self.window} coefficients, got {c.size}")
            return c
        return _frozen_rng(self.constants_seed, 1, self.window).uniform(2.0, 3.0, size=self.window)

    def innovation_variance(self):
        return {"normal": 1.0, "gamma": 1.0, "t3": 3.0, "normal_mixture": 0.8 + 0.2 * 9.0}[self.innovation]

    def correlation_matrix(self):
        """Shape correlation ``R`` of the elliptical scatter, or the MA correlation."""
        if self.elliptical:
            return build_correlation(CorrelationSpec(self.correlation, self.rho, self.p))
        return self.covariance() / self.innovation_variance()

    def scatter_diagonal(self):
        """Diagonal of the scatter matrix (covariance diagonal for MA rows)."""
        if self.elliptical:
            return self.scales()
        return np.full(self.p, self.innovation_variance())

    def covariance(self):
        """Covariance of one row (MA family only; elliptical covariance needs moments)."""
        if self.elliptical:
            d = np.sqrt(self.scales())
            r = build_correlation(CorrelationSpec(self.correlation, self.rho, self.p))
            return self.radial_second_moment() * (d[:, None] * r * d[None, :])
        c = self.coefficients()
        c = c / np.linalg.norm(c)
        t = c.size
        acov = np.array([np.dot(c[: t - h], c[h:]) if h < t else 0.0 for h in range(self.p)])
        lag = np.abs(np.subtract.outer(np.arange(self.p), np.arange(self.p)))
        return self.innovation_variance() * acov[lag]

    def radial_second_moment(self):
        """``E ||eps||^2 / p`` for the standardised elliptical innovation."""
        if self.family == "normal":
            return 1.0
        if self.family == "student_t":
            return self.nu / (self.nu - 2.0)
        if self.family == "mixture_normal":
            return self.gamma + (1.0 - self.gamma) * self.inflation
        raise InvalidInputError("radial moment is defined for elliptical families only")


def radial_draws(spec, n, rng):
    """Per-row radial multipliers of the elliptical family."""
    if spec.family == "normal":
        return np.ones(n)
    if spec.family == "student_t":
        return np.sqrt(spec.nu / rng.chisquare(spec.nu, size=n))
    if spec.family == "mixture_normal":
        heavy = rng.random(n) >= spec.gamma
        return np.where(heavy, np.sqrt(spec.inflation), 1.0)
    raise InvalidInputError("radial draws are defined for elliptical families only")


def standardized_draws(spec, n, rng):
    """Rows of ``Sigma^{-1/2}(X - mu)`` for an elliptical family."""
    z = rng.standard_normal((n, spec.p))
    return z * radial_draws(spec, n, rng)[:, None]


def _innovations(spec, n, rng):
    width = spec.p + spec.window - 1
    kind = spec.innovation
    if kind == "normal":
        return rng.standard_normal((n, width))
    if kind == "t3":
        return rng.standard_t(3, size=(n, width))
    if kind == "normal_mixture":
        z = rng.standard_normal((n, width))
        return np.where(rng.random((n, width)) < 0.8, z, 3.0 * z)
    # centred Gamma(8, 1) on the first p/2 innovations, scaled to unit variance
    z = rng.standard_normal((n, width))
    half = spec.p // 2
    z[:, :half] = (rng.gamma(8.0, 1.0, size=(n, half)) - 8.0) / np.sqrt(8.0)
    return z


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_scenario(spec, n, seed):
    """Draw ``n`` rows from ``spec``. ``seed`` may be an int, SeedSequence or Generator."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = _as_rng(seed)
    p = spec.p
    if spec.elliptical:
        z = standardized_draws(spec, n, rng)
        root = _corr_root(spec.correlation, float(spec.rho), p) if spec.correlation != "identity" else None
        x = z if root is None else z @ root
        if spec.diag_scales != "unit":
            x = x * np.sqrt(spec.scales())
    else:
        c = spec.coefficients()
        c = c / np.linalg.norm(c)
        x = sliding_window_view(_innovations(spec, n, rng), c.size, axis=1) @ c
    if spec.mean is not None:
        x = x + spec.mean
    return x


@dataclass(frozen=True)
class ShiftSpec:
    sparsity: float = 0.5  # fraction of coordinates with zero shift
    eta: float = 0.5
    normalization: str = "scaled"  # "scaled" | "raw"

    def __post_init__(self):
        if not 0 <= self.sparsity < 1:
            raise InvalidInputError("sparsity must lie in [0, 1)")
        if self.eta < 0:
            raise InvalidInputError("eta must be non-negative")
        if self.normalization not in ("scaled", "raw"):
            raise InvalidInputError(f"unknown normalization {self.normalization!r}")

    @property
    def kind(self):
        if self.sparsity >= 0.9:
            return "sparse"
        return "dense"


def zero_count(sparsity, p):
    """Number of unshifted coordinates, rounded half away from zero."""
    return int(np.floor(sparsity * p + 0.5))


def build_shift(spec, p, scales=None, trace_r2=None, cov_traces=None):
    """Mean difference with equal nonzero entries on the leading coordinates.

    ``scaled``: ``sum_nonzero a^2 / d_j = eta * sqrt(trace_r2)``, with ``d``
    the raw variance scales. ``raw``: ``(#nonzero) a^2 = eta * sqrt(sum(cov_traces))``.
    """
    k = zero_count(spec.sparsity, p)
    nz = p - k
    if nz < 1:
        raise InvalidInputError("shift has no nonzero coordinates")
    delta = np.zeros(p)
    if spec.eta == 0:
        return delta
    if spec.normalization == "scaled":
        if trace_r2 is None:
            raise InvalidInputError("scaled normalization needs trace_r2")
        d = np.ones(p) if scales is None else np.asarray(getattr(scales, "d", scales), dtype=float)
        a2 = spec.eta * np.sqrt(trace_r2) / np.sum(1.0 / d[:nz])
    else:
        if cov_traces is None:
            raise InvalidInputError("raw normalization needs cov_traces")
        a2 = spec.eta * np.sqrt(float(np.sum(cov_traces))) / nz
    delta[:nz] = np.sqrt(a2)
    return delta


_PRESETS = {
    "I": dict(family="normal", correlation="ar1", rho=0.5),
    "II": dict(family="normal", correlation="ar1", rho=0.5, diag_scales="half_3_half_1"),
    "III": dict(family="student_t", nu=3.0, correlation="ar1", rho=0.5),
    "IV": dict(family="student_t", nu=3.0, correlation="ar1", rho=0.5, diag_scales="chi2_2_random"),
    "V": dict(family="mixture_normal", gamma=0.8, inflation=9.0, correlation="ar1", rho=0.5),
    "VI": dict(family="moving_average", innovation="normal"),
    "VII": dict(family="moving_average", innovation="gamma"),
    "VIII": dict(family="moving_average", innovation="t3"),
    "IX": dict(family="moving_average", innovation="normal_mixture"),
}
SCENARIO_NAMES = tuple(_PRESETS)


def scenario(name, p, constants_seed=0, **overrides):
    """Named simulation scenario in dimension ``p``.

    I-V are elliptical with shape ``ar1(0.5)``: normal, normal with scales
    3 on the first half of the coordinates, t with 3 degrees of freedom,
    the same t with frozen chi-square(2) scales, and the 0.8/0.2 normal
    mixture with variance inflation 9. VI-IX are moving-average rows with
    normal, half-gamma, t3 and normal-mixture innovations; their window
    defaults to ``p`` and can be overridden with ``order``.
    """
    try:
        base = _PRESETS[name]
    except KeyError:
        raise InvalidInputError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}") from None
    return ScenarioSpec(p=p, constants_seed=constants_seed, **{**base, **overrides})
