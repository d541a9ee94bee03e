"""Feedback laws for choosing the next driver coefficient from measured scalars.

The quadratic step model for the per-layer energy change is
    q(beta) = dt*beta*a + dt^2*beta^2*b + dt^2*beta*c
with (a, b, c) measured on the pre-step state. The first-order law ignores
the dt^2 terms; the second-order law drives q to its minimum (flipping sign
when the parabola opens downward, falling back to a first-order-like rule
when it degenerates); the hybrid law keeps whichever of the two has the
smaller magnitude.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .engine import FeedbackScalars


class LawKind(Enum):
    FO = "fo"
    SO_PURE = "so"
    SO_HYBRID = "so-hybrid"


class Branch(Enum):
    FO_LAW = "FO_LAW"
    SO_MIN = "SO_MIN"
    SO_SIGN_FLIPPED = "SO_SIGN_FLIPPED"
    SO_B_ZERO_FALLBACK = "SO_B_ZERO_FALLBACK"
    HYBRID_CAPPED_TO_FO = "HYBRID_CAPPED_TO_FO"


@dataclass(frozen=True)
class BetaDecision:
    beta: float
    branch: Branch


def default_eps_b(n: int, edge_count: int) -> float:
    """Degeneracy tolerance on b, scaled to the operator norms of the instance."""
    return 1e-12 * n * max(1, edge_count)


def quadratic_model(sc: FeedbackScalars, beta: float, dt: float) -> float:
    """Predicted per-layer energy change at the given beta."""
    return dt * beta * sc.a + dt * dt * beta * beta * sc.b + dt * dt * beta * sc.c


def beta_fo(sc: FeedbackScalars) -> BetaDecision:
    """First-order law: beta = -a."""
    return BetaDecision(beta=-sc.a, branch=Branch.FO_LAW)


def beta_so(sc: FeedbackScalars, dt: float, eps_b: float) -> BetaDecision:
    """Second-order law with sign-flip and degenerate-b handling.

    For b > eps_b the returned beta is the vertex of the upward parabola
    q(beta); for b < -eps_b the sign of that expression is flipped; for
    |b| <= eps_b it falls back to beta = -(a + c*dt). Every branch makes
    q(beta) <= 0.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if eps_b <= 0:
        raise ValueError(f"eps_b must be positive, got {eps_b}")
    if sc.b > eps_b:
        return BetaDecision(beta=-(sc.a + dt * sc.c) / (2.0 * dt * sc.b), branch=Branch.SO_MIN)
    if sc.b < -eps_b:
        return BetaDecision(beta=(sc.a + dt * sc.c) / (2.0 * dt * sc.b), branch=Branch.SO_SIGN_FLIPPED)
    return BetaDecision(beta=-(sc.a + dt * sc.c), branch=Branch.SO_B_ZERO_FALLBACK)


def beta_hybrid(sc: FeedbackScalars, dt: float, eps_b: float) -> BetaDecision:
    """Keep whichever of the first/second-order betas is smaller in magnitude.

    Ties go to the second-order value.
    """
    so = beta_so(sc, dt, eps_b)
    fo = beta_fo(sc)
    if abs(fo.beta) < abs(so.beta):
        return BetaDecision(beta=fo.beta, branch=Branch.HYBRID_CAPPED_TO_FO)
    return so


def decide_beta(law: LawKind, sc: FeedbackScalars, dt: float, eps_b: float) -> BetaDecision:
    if law is LawKind.FO:
        return beta_fo(sc)
    if law is LawKind.SO_PURE:
        return beta_so(sc, dt, eps_b)
    if law is LawKind.SO_HYBRID:
        return beta_hybrid(sc, dt, eps_b)
    raise ValueError(f"unknown law {law!r}")
