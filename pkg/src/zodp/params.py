"""Problem parameters and the contraction constants derived from them.

All scalar knobs of the noisy zeroth-order update live in
:class:`ProblemParams`.  Validation is eager and total: out-of-domain
values raise a typed error at construction or at the first operation
that needs them, never NaN.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import (
    CNotContractive,
    NegativeRadicand,
    StepSizeTooLarge,
    ValidationError,
)


class ConvexityClass(enum.Enum):
    """Loss regularity regime; fixes the base Lipschitz constant branch."""

    NONCONVEX = "nonconvex"
    CONVEX = "convex"
    STRONGLY_CONVEX = "strongly_convex"

    @classmethod
    def from_str(cls, tag: str) -> "ConvexityClass":
        try:
            return cls(tag)
        except ValueError:
            raise ValidationError(
                f"unknown convexity class {tag!r}; expected one of "
                f"{[c.value for c in cls]}"
            ) from None


@dataclass(frozen=True)
class ProblemParams:
    """All scalar parameters of the noisy zeroth-order process.

    d: model dimension, n: dataset size, K: update directions per step,
    eta: step size, sigma: total noise scale, Delta: clipping threshold,
    R: projection-ball radius, M: smoothness constant, m: strong-convexity
    constant, xi: two-point perturbation scale, batch: optional minibatch
    size (None means full batch).

    ``eta == 0`` and ``sigma == 0`` are accepted so noiseless / frozen
    simulations can share the type; accounting operations require both
    strictly positive and enforce it themselves.
    """

    d: int
    n: int
    K: int
    eta: float
    sigma: float
    Delta: float
    R: float
    M: float
    m: float
    xi: float = 0.0
    batch: Optional[int] = None
    convexity: ConvexityClass = ConvexityClass.NONCONVEX

    def __post_init__(self) -> None:
        if not (isinstance(self.d, int) and self.d >= 1):
            raise ValidationError(f"d must be a positive integer, got {self.d}")
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValidationError(f"n must be a positive integer, got {self.n}")
        if not (isinstance(self.K, int) and 1 <= self.K <= self.d):
            raise ValidationError(f"K must satisfy 1 <= K <= d, got K={self.K}, d={self.d}")
        for name in ("eta", "sigma", "Delta", "R", "M", "m", "xi"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ValidationError(f"{name} must be finite, got {value}")
        if self.eta < 0:
            raise ValidationError(f"eta must be >= 0, got {self.eta}")
        if self.sigma < 0:
            raise ValidationError(f"sigma must be >= 0, got {self.sigma}")
        if self.Delta <= 0:
            raise ValidationError(f"Delta must be > 0, got {self.Delta}")
        if self.R <= 0:
            raise ValidationError(f"R must be > 0, got {self.R}")
        if self.M <= 0:
            raise ValidationError(f"M must be > 0, got {self.M}")
        if self.m < 0:
            raise ValidationError(f"m must be >= 0, got {self.m}")
        if self.xi < 0:
            raise ValidationError(f"xi must be >= 0, got {self.xi}")
        if self.m > self.M:
            raise ValidationError(f"m <= M required, got m={self.m} > M={self.M}")
        strongly = self.convexity is ConvexityClass.STRONGLY_CONVEX
        if strongly and self.m <= 0:
            raise ValidationError("strongly_convex requires m > 0")
        if not strongly and self.m > 0:
            raise ValidationError(
                "m > 0 is only meaningful for convexity=strongly_convex; "
                "set m=0 for the other classes"
            )
        if self.batch is not None and not (
            isinstance(self.batch, int) and 1 <= self.batch <= self.n
        ):
            raise ValidationError(
                f"batch must satisfy 1 <= b <= n, got b={self.batch}, n={self.n}"
            )

    def with_(self, **kwargs) -> "ProblemParams":
        """Copy with selected fields replaced."""
        return replace(self, **kwargs)

    def require_hidden_state(self) -> None:
        """Preconditions shared by all hidden-state accounting paths."""
        if self.d < 2 * self.K:
            raise ValidationError(
                f"hidden-state accounting requires d >= 2K, got d={self.d}, K={self.K}"
            )
        if self.eta <= 0:
            raise ValidationError("accounting requires eta > 0")
        if self.sigma <= 0:
            raise ValidationError("accounting requires sigma > 0")


@dataclass(frozen=True)
class DerivedConstants:
    """Contraction constants shared by the accountant and the verifier.

    c is the Lipschitz constant of the averaged first-order update map,
    cbar1 the high-probability coefficient of the zeroth-order map at
    slack theta, and c2 the additive slack eta*M*xi from the two-point
    discretization.
    """

    c: float
    cbar1: float
    c2: float
    theta: float


def lipschitz_c(params: ProblemParams) -> float:
    """Lipschitz constant of w -> w - (eta/(nK)) sum_i grad l_i(w).

    Branches by convexity class; step sizes beyond the class-admissible
    range are an error, not a silent fallback.
    """
    eta, K, M, m = params.eta, params.K, params.M, params.m
    if params.convexity is ConvexityClass.NONCONVEX:
        return 1.0 + eta * M / K
    if params.convexity is ConvexityClass.CONVEX:
        if eta > 2.0 * K / M:
            raise StepSizeTooLarge(
                f"convex branch needs eta <= 2K/M = {2.0 * K / M}, got {eta}"
            )
        return 1.0
    # strongly convex
    if eta > K / M:
        raise StepSizeTooLarge(
            f"strongly convex branch needs eta <= K/M = {K / M}, got {eta}"
        )
    return 1.0 - eta * m / K


def theta_star(c: float) -> float:
    """Concentration slack that makes cbar1 equal exactly 1.

    Defined only for contractive c in [0, 1); callers must grid over
    theta themselves when c >= 1.
    """
    if not 0.0 <= c < 1.0:
        raise CNotContractive(f"theta_star needs 0 <= c < 1, got c={c}")
    return (1.0 - c * c) / (1.0 + c * c)


def cbar1(c: float, K: int, d: int, theta: float) -> float:
    """High-probability Lipschitz coefficient sqrt(1 - (1-c^2)K/d + theta(1+c^2)K/d)."""
    if not K >= 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    if d < 2 * K:
        raise ValidationError(f"cbar1 requires d >= 2K, got d={d}, K={K}")
    if theta < 0:
        raise ValidationError(f"theta must be >= 0, got {theta}")
    if c < 0:
        raise ValidationError(f"c must be >= 0, got {c}")
    ratio = K / d
    radicand = 1.0 - (1.0 - c * c) * ratio + theta * (1.0 + c * c) * ratio
    if radicand < 0.0:
        raise NegativeRadicand(
            f"radicand {radicand} < 0 at c={c}, K={K}, d={d}, theta={theta}"
        )
    return math.sqrt(radicand)


def derived_constants(params: ProblemParams, theta: Optional[float] = None) -> DerivedConstants:
    """Bundle (c, cbar1, c2, theta) for the given parameters.

    When ``theta`` is omitted it defaults to the optimal slack
    theta_star(c), which requires c < 1.
    """
    c = lipschitz_c(params)
    if theta is None:
        theta = theta_star(c)
    return DerivedConstants(
        c=c,
        cbar1=cbar1(c, params.K, params.d, theta),
        c2=params.eta * params.M * params.xi,
        theta=theta,
    )
