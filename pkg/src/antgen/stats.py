"""Behaviour sampling and anomaly scoring.

Every agent behaviour is one normal distribution (mu, sigma).  A behaviour
draw keeps two values: the raw draw feeds the probability machinery, while a
"fuzzed" variant (cubic dead-zone transform blended by a fuzziness
coefficient) feeds motion and rendering, exaggerating rare behaviours
visually without biasing the statistics.

Per-behaviour p-values are combined Fisher-style: the statistic
S = sum(-2 ln p_j) over included behaviours is mapped through the chi-squared
survival function with 2k degrees of freedom.  Rare behaviour combinations
therefore yield a combined likelihood near 0, and an agent is anomalous when
its class-weighted likelihood falls at or below the scene threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .rng import Stream

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class StatsConfig:
    """Scoring knobs shared by every behaviour draw in a scene.

    anomaly_threshold doubles as the half-width of the fuzz transform's
    dead zone (the same normalised quantity serves both roles).
    """

    anomaly_threshold: float = 0.05
    fuzziness: float = 0.0
    tail_mode: str = "two_sided"  # or "lower_tail"
    p_floor: float = 1e-300


@dataclass(frozen=True)
class BehaviourSpec:
    """One normally-distributed behaviour: (mu, sigma) plus inclusion flag."""

    mu: float
    sigma: float
    include_in_anomaly: bool = True

    @property
    def effective_include(self) -> bool:
        """A behaviour only counts toward the score if it actually varies."""
        return self.sigma > 0.0 and self.include_in_anomaly


@dataclass(slots=True)
class BehaviourSample:
    """One realised behaviour draw.

    value_stat (mu + sigma*m) backs the p-value; value_visual
    (mu + sigma*m_tilde) drives motion and rendering.
    """

    m: float
    m_tilde: float
    value_stat: float
    value_visual: float
    p: float


@dataclass(slots=True)
class AnomalyScore:
    r_bar: float
    w_bar: float
    omega: float
    is_anomaly: bool


def sample_standard_normal(rng: Stream) -> float:
    """Draw m ~ N(0, 1) via Box-Muller (cosine branch) from the stream."""
    return rng.normal()


def fuzz_transform(n: float, v: float) -> float:
    """Cubic dead-zone transform: flat within (-v, v), cubic growth outside."""
    if n >= v:
        return (n - v) ** 3
    if n <= -v:
        return (n + v) ** 3
    return 0.0


def blend_fuzz(n: float, v: float, z: float) -> float:
    """Blend raw draw and fuzz transform: z*n + (1-z)*fuzz_transform(n, v)."""
    return z * n + (1.0 - z) * fuzz_transform(n, v)


def behaviour_p_value(m: float, cfg: StatsConfig) -> float:
    """P-value of one standard-normal draw.

    two_sided (default): p = 2*min(Phi(m), 1-Phi(m)) = erfc(|m|/sqrt(2)),
    so both tails are surprising.  lower_tail: p = Phi(m).  Clamped to
    [p_floor, 1] so -2 ln(p) stays finite downstream.
    """
    if cfg.tail_mode == "two_sided":
        p = math.erfc(abs(m) / _SQRT2)
    elif cfg.tail_mode == "lower_tail":
        p = 0.5 * math.erfc(-m / _SQRT2)
    else:
        raise ValueError(f"unknown tail_mode: {cfg.tail_mode!r}")
    return min(1.0, max(cfg.p_floor, p))


def sample_behaviour(spec: BehaviourSpec, cfg: StatsConfig, rng: Stream) -> BehaviourSample:
    """Draw one behaviour: a single m drives both the statistical and visual values."""
    m = rng.normal()
    m_tilde = blend_fuzz(m, cfg.anomaly_threshold, cfg.fuzziness)
    p = behaviour_p_value(m, cfg) if spec.sigma > 0.0 else 1.0
    return BehaviourSample(
        m=m,
        m_tilde=m_tilde,
        value_stat=spec.mu + spec.sigma * m,
        value_visual=spec.mu + spec.sigma * m_tilde,
        p=p,
    )


def combine_p_values(samples: Sequence[BehaviourSample], flags: Sequence[bool]) -> float:
    """Fisher's method over the included behaviours.

    Returns the chi-squared survival function (2k dof) of S = sum(-2 ln p_j),
    so smaller p-values give a smaller combined likelihood.  With no included
    behaviours there is no evidence either way and the result is 1.
    """
    if len(samples) != len(flags):
        raise ValueError("samples and flags must have equal length")
    statistic = 0.0
    k = 0
    for sample, included in zip(samples, flags):
        if not included:
            continue
        if not 0.0 < sample.p <= 1.0:
            raise ValueError(f"p-value out of range (0, 1]: {sample.p}")
        statistic += -2.0 * math.log(sample.p)
        k += 1
    if k == 0:
        return 1.0
    return chi_squared_sf(statistic, 2 * k)


def normalize_class_weights(weights: Sequence[float]) -> list[float]:
    """Normalise raw class weights to probabilities summing to 1."""
    for w in weights:
        if w < 0.0:
            raise ValueError(f"class weight must be >= 0, got {w}")
    total = math.fsum(weights)
    if total <= 0.0:
        raise ValueError("at least one class weight must be positive")
    return [w / total for w in weights]


def overall_likelihood(w_bar: float, r_bar: float) -> float:
    """Overall agent likelihood: class likelihood times behaviour likelihood."""
    return w_bar * r_bar


def label_anomaly(omega: float, threshold: float) -> bool:
    """An agent is anomalous when its overall likelihood is at or below threshold."""
    return omega <= threshold


def score_agent(
    samples: Sequence[BehaviourSample],
    flags: Sequence[bool],
    w_bar: float,
    cfg: StatsConfig,
) -> AnomalyScore:
    """Full scoring chain: combined likelihood, class weight, product, label."""
    r_bar = combine_p_values(samples, flags)
    omega = overall_likelihood(w_bar, r_bar)
    return AnomalyScore(
        r_bar=r_bar,
        w_bar=w_bar,
        omega=omega,
        is_anomaly=label_anomaly(omega, cfg.anomaly_threshold),
    )


# Regularised incomplete gamma, series + continued-fraction split as in
# Numerical Recipes ch. 6.  Double precision gives ~1e-14 relative accuracy,
# comfortably inside the 1e-12 absolute contract for dof <= 64, x <= 1000.

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 600
_GAMMA_TINY = 1e-300


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularised incomplete gamma P(a, x) by series; needs x < a + 1."""
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_cf(a: float, x: float) -> float:
    """Upper regularised incomplete gamma Q(a, x) by modified Lentz continued
    fraction; needs x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _GAMMA_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _GAMMA_TINY:
            d = _GAMMA_TINY
        c = b + an / c
        if abs(c) < _GAMMA_TINY:
            c = _GAMMA_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularised incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a)."""
    if a <= 0.0:
        raise ValueError(f"shape parameter must be positive, got {a}")
    if x < 0.0:
        raise ValueError(f"argument must be non-negative, got {x}")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_p_series(a, x)
    return _gamma_q_cf(a, x)


def chi_squared_sf(x: float, dof: int) -> float:
    """Chi-squared upper-tail probability: Q(dof/2, x/2)."""
    if dof < 1:
        raise ValueError(f"degrees of freedom must be >= 1, got {dof}")
    if x < 0.0:
        raise ValueError(f"chi-squared statistic must be >= 0, got {x}")
    return regularized_gamma_q(0.5 * dof, 0.5 * x)
