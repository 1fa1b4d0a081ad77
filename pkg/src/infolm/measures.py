"""Information measures between discrete probability distributions.

Divergence families (alpha, gamma, alpha-beta, Kullback-Leibler with
Jeffreys symmetrization) and distances (L1, L2, L-infinity, Fisher-Rao)
over probability vectors of a shared vocabulary, plus a dispatching
:func:`evaluate_measure` driven by a :class:`MeasureSpec`.

All logarithms are natural, so divergence values are in nats.  Before any
measure that takes logs or ratios, both operands are clamped to
``[epsilon_floor, 1]`` and renormalized; model outputs are sparse after
temperature scaling and KL-style measures would otherwise be infinite.
Distances and Fisher-Rao see the raw probabilities (a zero overlap must
stay a zero overlap).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, NumericError, ShapeError

__all__ = [
    "DEFAULT_EPSILON_FLOOR",
    "DISTRIBUTION_SUM_ATOL",
    "MeasureKind",
    "MeasureSpec",
    "as_distribution",
    "floor_probabilities",
    "alpha_divergence",
    "kl_divergence",
    "jeffreys_kl",
    "gamma_divergence",
    "ab_divergence",
    "lp_distance",
    "fisher_rao",
    "evaluate_measure",
]

#: Default probability clamp applied before logs and ratios.
DEFAULT_EPSILON_FLOOR = 1e-12

#: Tolerance on sum(p) == 1 for a vector to count as a distribution.
DISTRIBUTION_SUM_ATOL = 1e-9


class MeasureKind(str, Enum):
    """Names of the supported information measures."""

    ALPHA_DIVERGENCE = "alpha"
    GAMMA_DIVERGENCE = "gamma"
    AB_DIVERGENCE = "ab"
    L1 = "l1"
    L2 = "l2"
    LINF = "linf"
    FISHER_RAO = "fisher-rao"
    KL = "kl"
    JEFFREYS_KL = "jeffreys-kl"


#: Kinds for which D(p, q) != D(q, p) in general; Jeffreys averaging applies.
ASYMMETRIC_KINDS = frozenset(
    {
        MeasureKind.ALPHA_DIVERGENCE,
        MeasureKind.GAMMA_DIVERGENCE,
        MeasureKind.AB_DIVERGENCE,
        MeasureKind.KL,
    }
)


@dataclass(frozen=True)
class MeasureSpec:
    """Which measure to evaluate, with its parameters.

    `alpha` is used by the alpha- and alpha-beta divergences, `beta` by the
    gamma- and alpha-beta divergences.  `symmetrize` requests Jeffreys
    averaging 0.5*(D(p,q) + D(q,p)) for the asymmetric divergences and is
    ignored for distances.  `epsilon_floor` is the probability clamp applied
    before logs/ratios.
    """

    kind: MeasureKind
    alpha: float | None = None
    beta: float | None = None
    symmetrize: bool = True
    epsilon_floor: float = DEFAULT_EPSILON_FLOOR

    def __post_init__(self):
        kind = MeasureKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (0.0 < self.epsilon_floor < 1e-3):
            raise DomainError(
                f"epsilon_floor must lie in (0, 1e-3), got {self.epsilon_floor!r}"
            )
        if kind is MeasureKind.ALPHA_DIVERGENCE:
            self._require("alpha")
            if self.alpha in (0.0, 1.0):
                raise DomainError("alpha-divergence requires alpha not in {0, 1}")
        elif kind is MeasureKind.GAMMA_DIVERGENCE:
            self._require("beta")
            if self.beta in (0.0, -1.0):
                raise DomainError("gamma-divergence requires beta not in {0, -1}")
        elif kind is MeasureKind.AB_DIVERGENCE:
            self._require("alpha")
            self._require("beta")
            if self.alpha == 0.0 or self.beta == 0.0 or self.alpha + self.beta == 0.0:
                raise DomainError(
                    "ab-divergence requires alpha != 0, beta != 0, alpha + beta != 0"
                )

    def _require(self, name: str) -> None:
        value = getattr(self, name)
        if value is None:
            raise DomainError(f"{self.kind.value} requires parameter {name!r}")
        if not math.isfinite(value):
            raise DomainError(f"parameter {name!r} must be finite, got {value!r}")

    def warning_flags(self) -> tuple[str, ...]:
        """Flags for parameter choices that void the usual guarantees.

        Negative alpha/beta are accepted but nonnegativity of the divergence
        is no longer guaranteed.
        """
        flags = []
        if self.kind in (MeasureKind.ALPHA_DIVERGENCE, MeasureKind.AB_DIVERGENCE):
            if self.alpha is not None and self.alpha < 0:
                flags.append("negative-alpha")
        if self.kind in (MeasureKind.GAMMA_DIVERGENCE, MeasureKind.AB_DIVERGENCE):
            if self.beta is not None and self.beta < 0:
                flags.append("negative-beta")
        return tuple(flags)

    def label(self) -> str:
        """Stable human-readable tag used in CSV output."""
        kind = self.kind
        if kind is MeasureKind.ALPHA_DIVERGENCE:
            base = f"alpha(alpha={self.alpha:.12g})"
        elif kind is MeasureKind.GAMMA_DIVERGENCE:
            base = f"gamma(beta={self.beta:.12g})"
        elif kind is MeasureKind.AB_DIVERGENCE:
            base = f"ab(alpha={self.alpha:.12g},beta={self.beta:.12g})"
        else:
            base = kind.value
        if self.symmetrize and kind in ASYMMETRIC_KINDS:
            base += "+sym"
        return base


def as_distribution(p, *, atol: float = DISTRIBUTION_SUM_ATOL) -> np.ndarray:
    """Validate `p` as a probability vector and return it as a float array.

    Raises ShapeError for non-vectors, NumericError for non-finite entries,
    DomainError for negative entries or a sum off 1 by more than `atol`.
    """
    v = np.asarray(p, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"expected a nonempty vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericError("distribution contains non-finite entries")
    if np.any(v < 0):
        raise DomainError("distribution contains negative entries")
    total = float(v.sum())
    if abs(total - 1.0) > atol:
        raise DomainError(f"distribution sums to {total!r}, expected 1 within {atol}")
    return v


def floor_probabilities(p, eps: float = DEFAULT_EPSILON_FLOOR) -> np.ndarray:
    """Clamp entries of `p` to [eps, 1] and renormalize to sum 1."""
    if not (0.0 < eps < 1e-3):
        raise DomainError(f"epsilon floor must lie in (0, 1e-3), got {eps!r}")
    v = np.clip(np.asarray(p, dtype=float), eps, 1.0)
    return v / v.sum()


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.ndim != 1 or q.ndim != 1:
        raise ShapeError("measures expect 1-d probability vectors")
    if p.shape != q.shape:
        raise ShapeError(f"length mismatch: {p.shape[0]} vs {q.shape[0]}")
    return p, q


def alpha_divergence(p, q, alpha: float, eps: float = DEFAULT_EPSILON_FLOOR) -> float:
    """Alpha-divergence D_alpha(p || q) = (sum p^a q^(1-a) - 1) / (a (a-1)).

    Nonnegative for every alpha outside {0, 1}, zero iff p == q.  Recovers
    KL(p || q) as alpha -> 1 and 4 * (1 - sum sqrt(p q)) (squared Hellinger
    scale) at alpha = 0.5.  `alpha` weights the influence of the ratio p/q.
    """
    if alpha == 0.0 or alpha == 1.0:
        raise DomainError("alpha-divergence is undefined for alpha in {0, 1}")
    p, q = _pair(p, q)
    p = floor_probabilities(p, eps)
    q = floor_probabilities(q, eps)
    s = float(np.exp(logsumexp(alpha * np.log(p) + (1.0 - alpha) * np.log(q))))
    return (s - 1.0) / (alpha * (alpha - 1.0))


def kl_divergence(p, q, eps: float = DEFAULT_EPSILON_FLOOR) -> float:
    """Kullback-Leibler divergence sum p * ln(p / q), in nats.

    Both operands are floored and renormalized first, so the result is
    finite even for disjoint supports (bounded by ln(1/eps)).
    """
    p, q = _pair(p, q)
    p = floor_probabilities(p, eps)
    q = floor_probabilities(q, eps)
    return float(np.sum(p * (np.log(p) - np.log(q))))


def jeffreys_kl(p, q, eps: float = DEFAULT_EPSILON_FLOOR) -> float:
    """Jeffreys-symmetrized KL: 0.5 * (KL(p || q) + KL(q || p))."""
    return 0.5 * (kl_divergence(p, q, eps) + kl_divergence(q, p, eps))


def gamma_divergence(p, q, beta: float, eps: float = DEFAULT_EPSILON_FLOOR) -> float:
    """Gamma-divergence with robustness parameter `beta`.

    D = ln(sum p^(b+1)) / (b (b+1)) + ln(sum q^(b+1)) / (b+1)
        - ln(sum p q^b) / b

    Zero when p == q; nonnegative for beta > 0 (Hoelder).  `beta` controls
    the weight given to low-probability tokens.
    """
    if beta == 0.0 or beta == -1.0:
        raise DomainError("gamma-divergence is undefined for beta in {0, -1}")
    p, q = _pair(p, q)
    lp = np.log(floor_probabilities(p, eps))
    lq = np.log(floor_probabilities(q, eps))
    t1 = logsumexp((beta + 1.0) * lp) / (beta * (beta + 1.0))
    t2 = logsumexp((beta + 1.0) * lq) / (beta + 1.0)
    t3 = logsumexp(lp + beta * lq) / beta
    return float(t1 + t2 - t3)


def ab_divergence(
    p, q, alpha: float, beta: float, eps: float = DEFAULT_EPSILON_FLOOR
) -> float:
    """Scale-invariant alpha-beta divergence.

    D = ln(sum p^(a+b)) / (b (a+b)) + ln(sum q^(a+b)) / (a (a+b))
        - ln(sum p^a q^b) / (a b)

    `alpha` tunes mass coverage and `beta` robustness, independently.
    Zero when p == q; nonnegative for alpha > 0, beta > 0; reduces exactly
    to the gamma-divergence at alpha = 1.
    """
    if alpha == 0.0 or beta == 0.0 or alpha + beta == 0.0:
        raise DomainError(
            "ab-divergence is undefined for alpha = 0, beta = 0 or alpha + beta = 0"
        )
    p, q = _pair(p, q)
    lp = np.log(floor_probabilities(p, eps))
    lq = np.log(floor_probabilities(q, eps))
    t1 = logsumexp((alpha + beta) * lp) / (beta * (alpha + beta))
    t2 = logsumexp((alpha + beta) * lq) / (alpha * (alpha + beta))
    t3 = logsumexp(alpha * lp + beta * lq) / (alpha * beta)
    return float(t1 + t2 - t3)


def lp_distance(p, q, order) -> float:
    """L1, L2 or L-infinity distance between probability vectors.

    `order` is 1, 2 or math.inf.  No probability floor is applied.
    """
    p, q = _pair(p, q)
    diff = np.abs(p - q)
    if order == 1:
        return float(diff.sum())
    if order == 2:
        return float(np.sqrt(np.sum(diff * diff)))
    if order == math.inf:
        return float(diff.max())
    raise DomainError(f"order must be 1, 2 or inf, got {order!r}")


def fisher_rao(p, q) -> float:
    """Fisher-Rao geodesic distance (2/pi) * arccos(sum sqrt(p q)), in [0, 1].

    Returns exactly 0 for identical inputs (arccos is infinitely sensitive
    at 1, so the Bhattacharyya sum is never trusted to round back to 1) and
    exactly 1 when the supports are disjoint.  No probability floor is
    applied.
    """
    p, q = _pair(p, q)
    if np.array_equal(p, q):
        return 0.0
    bc = float(np.sum(np.sqrt(np.maximum(p * q, 0.0))))
    bc = min(max(bc, 0.0), 1.0)
    return 2.0 * math.acos(bc) / math.pi


def _directed(spec: MeasureSpec, p, q) -> float:
    kind = spec.kind
    if kind is MeasureKind.ALPHA_DIVERGENCE:
        return alpha_divergence(p, q, spec.alpha, spec.epsilon_floor)
    if kind is MeasureKind.GAMMA_DIVERGENCE:
        return gamma_divergence(p, q, spec.beta, spec.epsilon_floor)
    if kind is MeasureKind.AB_DIVERGENCE:
        return ab_divergence(p, q, spec.alpha, spec.beta, spec.epsilon_floor)
    if kind is MeasureKind.KL:
        return kl_divergence(p, q, spec.epsilon_floor)
    raise DomainError(f"unhandled measure kind {kind!r}")  # pragma: no cover


def evaluate_measure(spec: MeasureSpec, p, q) -> float:
    """Evaluate the measure named by `spec` on the pair (p, q).

    Asymmetric divergences are Jeffreys-averaged when `spec.symmetrize` is
    set; distances and Fisher-Rao are returned unchanged.
    """
    kind = spec.kind
    if kind is MeasureKind.L1:
        return lp_distance(p, q, 1)
    if kind is MeasureKind.L2:
        return lp_distance(p, q, 2)
    if kind is MeasureKind.LINF:
        return lp_distance(p, q, math.inf)
    if kind is MeasureKind.FISHER_RAO:
        return fisher_rao(p, q)
    if kind is MeasureKind.JEFFREYS_KL:
        return jeffreys_kl(p, q, spec.epsilon_floor)
    value = _directed(spec, p, q)
    if spec.symmetrize:
        return 0.5 * (value + _directed(spec, q, p))
    return value
