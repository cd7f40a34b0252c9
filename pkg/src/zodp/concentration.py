"""Beta tail bounds, the coupling failure probability, and feasibility limits.

The accountant only ever uses the closed-form exponential tail bound;
exact Beta CDFs appear solely in test oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import NoFeasibleK, ValidationError
from .params import ConvexityClass, ProblemParams


@dataclass(frozen=True)
class TailBoundInputs:
    """Inputs of the union-bounded high-probability Lipschitz event.

    steps is the number of events (iterations past the switch time).
    """

    K: int
    d: int
    theta: float
    steps: int

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValidationError(f"K must be >= 1, got {self.K}")
        if self.d < 2 * self.K:
            raise ValidationError(f"d >= 2K required, got d={self.d}, K={self.K}")
        if self.theta < 0:
            raise ValidationError(f"theta must be >= 0, got {self.theta}")
        if self.steps < 0:
            raise ValidationError(f"steps must be >= 0, got {self.steps}")


def _tail_exponent(K: int, d: int, eps: float) -> float:
    """Exponent 3 eps^2 K d / (12(d-K) + 8(d-2K) eps) of the Beta tail bound."""
    return 3.0 * eps * eps * K * d / (12.0 * (d - K) + 8.0 * (d - 2 * K) * eps)


def beta_tail(K: int, d: int, eps: float, side: str) -> float:
    """Bernstein-type bound on P(X > (1+eps)K/d), resp. P(X < (1-eps)K/d).

    X ~ Beta(K/2, (d-K)/2) with d >= 2K so the second shape parameter
    dominates; the same exponential bounds both sides.
    """
    if side not in ("upper", "lower"):
        raise ValidationError(f"side must be 'upper' or 'lower', got {side!r}")
    if K < 1 or d < 2 * K:
        raise ValidationError(f"beta_tail requires 1 <= K and d >= 2K, got K={K}, d={d}")
    if eps < 0:
        raise ValidationError(f"eps must be >= 0, got {eps}")
    return math.exp(-_tail_exponent(K, d, eps))


def delta_f(inputs: TailBoundInputs) -> float:
    """Failure probability 2 * steps * exp(-3 theta^2 d K / (12(d-K) + 8 theta(d-2K))).

    Raw value; clamping to <= 1 is the reporting layer's business.
    """
    if inputs.steps == 0:
        return 0.0
    return 2.0 * inputs.steps * math.exp(-_tail_exponent(inputs.K, inputs.d, inputs.theta))


def _exact_ceil_sqrt_term(M: float, R: float, n: int, Delta: float, d: int) -> int:
    """ceil(M R n sqrt(2d) / Delta) without float boundary errors.

    Floats are binary rationals, so the squared target is formed exactly
    with Fraction arithmetic and compared against integer squares.
    """
    coeff = Fraction(M) * Fraction(R) * n / Fraction(Delta)
    if coeff <= 0:
        raise ValidationError("M R n / Delta must be positive")
    target = coeff * coeff * 2 * d  # = x^2 as an exact rational
    k = math.isqrt(target.numerator // target.denominator)
    while Fraction(k * k) < target:
        k += 1
    while k >= 1 and Fraction((k - 1) * (k - 1)) >= target:
        k -= 1
    return k


def min_K(params: ProblemParams, delta: float) -> int:
    """Smallest direction count K admissible for the closed-form guarantee.

    Evaluates max(20 (1+c^2)^2 / (3 (1-c^2)^2) * log((4/delta) ceil(M R n sqrt(2d)/Delta)), 1)
    with c = 1 - m/M; errors when the bound exceeds d/2.
    """
    if params.convexity is not ConvexityClass.STRONGLY_CONVEX:
        raise ValidationError("min_K is defined for strongly convex losses only")
    if not 0.0 < delta < 1.0:
        raise ValidationError(f"delta must be in (0, 1), got {delta}")
    c = 1.0 - params.m / params.M
    if not c < 1.0:
        raise ValidationError("min_K requires c = 1 - m/M < 1")
    ceil_term = _exact_ceil_sqrt_term(params.M, params.R, params.n, params.Delta, params.d)
    one_p = 1.0 + c * c
    one_m = 1.0 - c * c
    lower = (20.0 * one_p * one_p) / (3.0 * one_m * one_m) * (
        math.log(4.0 / delta) + math.log(ceil_term)
    )
    k = max(math.ceil(lower), 1)
    if k > params.d / 2:
        raise NoFeasibleK(
            f"required K >= {k} exceeds d/2 = {params.d / 2} (c={c}, delta={delta})"
        )
    return k


def xi_max(params: ProblemParams) -> float:
    """Largest perturbation scale the closed-form branch tolerates."""
    if params.eta <= 0:
        raise ValidationError("xi_max requires eta > 0")
    return 2.0 * params.Delta / (params.n * params.eta * params.M * math.sqrt(2.0 * params.d))
