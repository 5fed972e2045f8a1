"""Asymptotic power, efficiency and sign-moment constants.

Monte Carlo estimators take an integer ``seed`` and draw in fixed-size
chunks, chunk ``c`` using ``SeedSequence(seed, spawn_key=(c,))``, so results
are reproducible and do not depend on how the work is scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

from .core import _unit_rows
from .errors import InvalidInputError
from .scenarios import ScenarioSpec, sample_scenario, trace_r2_exact

_CHUNK = 20_000
_INNER_FLOATS = 4_000_000


@dataclass(frozen=True)
class MCEstimate:
    value: float
    se: float

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class PowerParams:
    n1: int
    n2: int
    p: int
    c0: float
    delta_quad: float
    trace_r2: float
    alpha: float = 0.05
    eps_norm2: float | None = None

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1 or self.p < 1:
            raise InvalidInputError("n1, n2 and p must be positive")
        if not self.c0 > 0:
            raise InvalidInputError("c0 must be positive")
        if self.delta_quad < 0:
            raise InvalidInputError("delta_quad must be non-negative")
        if not (np.isfinite(self.trace_r2) and self.trace_r2 > 0):
            raise InvalidInputError("trace_r2 must be positive and finite")
        if not 0 < self.alpha < 1:
            raise InvalidInputError("alpha must lie in (0, 1)")
        if self.eps_norm2 is not None and not self.eps_norm2 > 0:
            raise InvalidInputError("eps_norm2 must be positive")

    @property
    def n(self):
        return self.n1 + self.n2

    @property
    def kappa(self):
        return self.n1 / self.n


def _drift_scale(params):
    return params.n * params.p * params.kappa * (1.0 - params.kappa) * params.delta_quad \
        / np.sqrt(2.0 * params.trace_r2)


def theoretical_power_sr(params):
    """``Phi(-z_a + 2 c0^2 p n kappa (1 - kappa) delta / sqrt(2 tr R^2))``."""
    za = norm.isf(params.alpha)
    return float(norm.cdf(-za + 2.0 * params.c0 ** 2 * _drift_scale(params)))


def theoretical_power_pa(params):
    """``Phi(-z_a + n p kappa (1 - kappa) delta / (E|eps|^2 sqrt(2 tr R^2)))``."""
    if params.eps_norm2 is None:
        raise InvalidInputError("eps_norm2 is required for the PA power")
    za = norm.isf(params.alpha)
    return float(norm.cdf(-za + _drift_scale(params) / params.eps_norm2))


def c0_normal_closed_form(p):
    """``E 1/|X - X'|`` for i.i.d. standard normal ``X, X'`` in ``R^p`` (needs ``p >= 2``)."""
    if p < 2:
        raise InvalidInputError("the reciprocal norm has infinite mean for p = 1")
    return float(np.exp(gammaln((p - 1) / 2.0) - gammaln(p / 2.0)) / 2.0)


def eps_norm2(spec):
    """``E |Sigma^{-1/2}(X - mu)|^2``.

    Closed form: ``p`` times the radial second moment for elliptical
    families, ``p`` for the moving-average family (covariance standardized).
    """
    if spec.elliptical:
        return spec.p * spec.radial_second_moment()
    return float(spec.p)


def _spec_at(spec, p):
    if p is None or p == spec.p:
        return spec
    from dataclasses import replace
    return replace(spec, p=int(p))


def _chunked_mean(draw, reps, seed):
    total = total_sq = 0.0
    done, c = 0, 0
    while done < reps:
        k = min(_CHUNK, reps - done)
        v = draw(k, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,))))
        total += float(v.sum())
        total_sq += float(v @ v)
        done += k
        c += 1
    mean = total / reps
    var = max(total_sq / reps - mean * mean, 0.0) * reps / max(reps - 1, 1)
    return MCEstimate(mean, float(np.sqrt(var / reps)))


def estimate_c0(spec, p=None, mc_reps=100_000, seed=0):
    """Monte Carlo ``E |D^{-1/2}(X - X')|^{-1}`` for two independent rows of ``spec``."""
    spec = _spec_at(spec, p)
    if mc_reps < 1000:
        raise InvalidInputError("mc_reps must be >= 1000")
    scale = np.sqrt(spec.scatter_diagonal())

    def draw(k, rng):
        x = sample_scenario(spec.with_mean(None), 2 * k, rng) / scale
        diff = x[:k] - x[k:]
        return 1.0 / np.sqrt(np.einsum("ij,ij->i", diff, diff))

    return _chunked_mean(draw, mc_reps, seed)


def estimate_are(spec, p=None, mc_reps=100_000, seed=0):
    """``2 c0^2 E|eps|^2`` with Monte Carlo ``c0`` and closed-form ``E|eps|^2``.

    The standard error comes from the delta method on ``c0``.
    """
    spec = _spec_at(spec, p)
    if mc_reps < 10_000:
        raise InvalidInputError("mc_reps must be >= 10000")
    c0 = estimate_c0(spec, mc_reps=mc_reps, seed=seed)
    e2 = eps_norm2(spec)
    return MCEstimate(2.0 * c0.value ** 2 * e2, 4.0 * c0.value * e2 * c0.se)


def estimate_tau_f(spec, p=None, outer_reps=2000, inner_reps=2000, seed=0):
    """Nested Monte Carlo ``E |E(U(v1 - v2) | v1)|^2`` with ``v = D^{-1/2}(X - mu)``.

    The squared norm of an inner mean of ``m`` unit vectors overshoots its
    target by the inner variance; ``(m |mean|^2 - 1) / (m - 1)``, the
    average inner product over distinct inner pairs, removes that bias.
    """
    spec = _spec_at(spec, p).with_mean(None)
    if outer_reps < 100 or inner_reps < 100:
        raise InvalidInputError("outer_reps and inner_reps must be >= 100")
    scale = np.sqrt(spec.scatter_diagonal())
    m = inner_reps
    per_chunk = max(1, _INNER_FLOATS // (m * spec.p))
    vals = np.empty(outer_reps)
    done, c = 0, 0
    while done < outer_reps:
        k = min(per_chunk, outer_reps - done)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        v1 = sample_scenario(spec, k, rng) / scale
        v2 = (sample_scenario(spec, k * m, rng) / scale).reshape(k, m, spec.p)
        mean = _unit_rows(v1[:, None, :] - v2).mean(axis=1)
        sq = np.einsum("ij,ij->i", mean, mean)
        vals[done:done + k] = (m * sq - 1.0) / (m - 1.0)
        done += k
        c += 1
    return MCEstimate(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(outer_reps)))


def tau_f_radial_limit(spec, mc_reps=200_000, seed=0):
    """Large-``p`` limit of ``tau_F`` for an elliptical family with identity shape.

    With radii ``r1, r2`` the conditional mean sign tends to
    ``v1 E_{r2}[(r1^2 + r2^2)^{-1/2}] / sqrt(p)``, so the limit is
    ``E_{r1}[r1^2 (E_{r2}(r1^2 + r2^2)^{-1/2})^2]``. The inner expectation
    uses a bank of ``r2`` draws that is redrawn for every chunk.
    """
    from .scenarios import radial_draws

    if not spec.elliptical:
        raise InvalidInputError("radial limit is defined for elliptical families")

    def draw(k, g):
        bank = radial_draws(spec, 2000, g)
        r1 = radial_draws(spec, k, g)
        inner = np.mean(1.0 / np.sqrt(r1[:, None] ** 2 + bank[None, :] ** 2), axis=1)
        return r1 ** 2 * inner ** 2

    return _chunked_mean(draw, mc_reps, seed)


def power_inputs(spec, n1, n2, eta, sparsity=0.5, alpha=0.05, mc_reps=100_000, seed=0):
    """PowerParams for a scaled shift of size ``eta`` on ``spec``, with Monte Carlo ``c0``."""
    from .scenarios import ShiftSpec, build_shift

    tr = trace_r2_exact(spec.correlation_matrix())
    d = spec.scatter_diagonal()
    delta = build_shift(ShiftSpec(sparsity, eta), spec.p, d, tr)
    c0 = estimate_c0(spec, mc_reps=mc_reps, seed=seed)
    return PowerParams(n1, n2, spec.p, c0.value, float(np.sum(delta ** 2 / d)), tr, alpha, eps_norm2(spec))


__all__ = [
    "MCEstimate", "PowerParams", "ScenarioSpec", "c0_normal_closed_form", "eps_norm2",
    "estimate_are", "estimate_c0", "estimate_tau_f", "power_inputs", "tau_f_radial_limit",
    "theoretical_power_pa", "theoretical_power_sr",
]
