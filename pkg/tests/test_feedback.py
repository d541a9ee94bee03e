import numpy as np
import pytest

from falqon_lab.engine import FeedbackScalars
from falqon_lab.feedback import (
    BetaDecision,
    Branch,
    LawKind,
    beta_fo,
    beta_hybrid,
    beta_so,
    decide_beta,
    default_eps_b,
    quadratic_model,
)

EPS = 1e-9


def sc(a, b, c):
    return FeedbackScalars(a=a, b=b, c=c)


def test_fo_law():
    assert beta_fo(sc(0.0, 1.0, 2.0)) == BetaDecision(0.0, Branch.FO_LAW)
    assert beta_fo(sc(0.3, 0.0, 0.0)).beta == -0.3
    # the initial driver ground state has a = 0, so the first decision is 0
    assert beta_fo(sc(0.0, 0.0, -5.0)).beta == 0.0


def test_so_vertex_branch():
    d = beta_so(sc(1.0, 1.0, 0.0), dt=0.1, eps_b=EPS)
    assert d.branch is Branch.SO_MIN
    assert abs(d.beta - (-5.0)) < 1e-12


def test_so_fallback_branch():
    d = beta_so(sc(1.0, 0.0, 0.0), dt=0.3, eps_b=EPS)
    assert d.branch is Branch.SO_B_ZERO_FALLBACK
    assert d.beta == -1.0  # coincides with the first-order value when c = 0


def test_so_sign_flipped_branch():
    d = beta_so(sc(1.0, -1.0, 0.0), dt=0.1, eps_b=EPS)
    assert d.branch is Branch.SO_SIGN_FLIPPED
    assert abs(d.beta - (-5.0)) < 1e-12
    assert quadratic_model(sc(1.0, -1.0, 0.0), d.beta, 0.1) <= 0.0


def test_so_model_never_predicts_increase():
    rng = np.random.default_rng(0)
    for _ in range(500):
        s = sc(*rng.uniform(-5, 5, size=3))
        dt = float(rng.uniform(0.01, 0.3))
        d = beta_so(s, dt=dt, eps_b=EPS)
        assert quadratic_model(s, d.beta, dt) <= 1e-12


def test_so_vertex_is_global_minimum():
    rng = np.random.default_rng(1)
    for _ in range(50):
        s = sc(float(rng.uniform(-3, 3)), float(rng.uniform(0.1, 3)), float(rng.uniform(-3, 3)))
        dt = float(rng.uniform(0.02, 0.2))
        d = beta_so(s, dt=dt, eps_b=EPS)
        assert d.branch is Branch.SO_MIN
        qmin = quadratic_model(s, d.beta, dt)
        for beta in rng.uniform(-50, 50, size=100):
            assert qmin <= quadratic_model(s, float(beta), dt) + 1e-12


def test_so_zero_gradient_gives_zero_beta():
    for b in (2.0, -2.0, 0.0):
        d = beta_so(sc(0.0, b, 0.0), dt=0.1, eps_b=EPS)
        assert d.beta == 0.0


def test_hybrid_caps_to_smaller_magnitude():
    d = beta_hybrid(sc(1.0, 1.0, 0.0), dt=0.1, eps_b=EPS)
    assert d.branch is Branch.HYBRID_CAPPED_TO_FO
    assert d.beta == -1.0

    d = beta_hybrid(sc(0.1, 1.0, 0.0), dt=1.0, eps_b=EPS)
    assert d.branch is Branch.SO_MIN
    assert abs(d.beta - (-0.05)) < 1e-12


def test_hybrid_tie_goes_to_second_order():
    # |beta_so| == |beta_fo| == 1: a=1, and -(a+dt*c)/(2*dt*b) = -1
    # with c=0 requires 2*dt*b = 1
    d = beta_hybrid(sc(1.0, 5.0, 0.0), dt=0.1, eps_b=EPS)
    assert abs(d.beta) == 1.0
    assert d.branch is Branch.SO_MIN


def test_hybrid_magnitude_is_minimum():
    rng = np.random.default_rng(2)
    for _ in range(1000):
        s = sc(*rng.uniform(-5, 5, size=3))
        dt = float(rng.uniform(0.01, 0.3))
        fo = beta_fo(s)
        so = beta_so(s, dt=dt, eps_b=EPS)
        hy = beta_hybrid(s, dt=dt, eps_b=EPS)
        assert abs(hy.beta) == min(abs(fo.beta), abs(so.beta))


def test_decide_beta_dispatch():
    s = sc(1.0, 1.0, 0.0)
    assert decide_beta(LawKind.FO, s, 0.1, EPS).branch is Branch.FO_LAW
    assert decide_beta(LawKind.SO_PURE, s, 0.1, EPS).branch is Branch.SO_MIN
    assert decide_beta(LawKind.SO_HYBRID, s, 0.1, EPS).branch is Branch.HYBRID_CAPPED_TO_FO


def test_default_eps_b_scales_with_size():
    assert default_eps_b(12, 18) == pytest.approx(1e-12 * 12 * 18)
    assert default_eps_b(2, 0) > 0


def test_so_parameter_validation():
    with pytest.raises(ValueError):
        beta_so(sc(1, 1, 1), dt=0.0, eps_b=EPS)
    with pytest.raises(ValueError):
        beta_so(sc(1, 1, 1), dt=0.1, eps_b=0.0)
