"""Acceptance suite: one test per criterion, at the stated tolerances.

Heavy ensemble computations are shared through session fixtures; the whole
suite is sized for a laptop (the scaling stages dominate, tens of minutes).
Run with `pytest tests/test_acceptance.py -v -s` for the per-criterion log.
"""
import numpy as np
import pytest

from falqon_lab.engine import (
    FeedbackScalars,
    apply_ud,
    apply_up,
    energy,
    feedback_scalars,
    measure,
)
from falqon_lab.experiments import (
    GW_RATIO,
    curve_from_ratios,
    ensemble_ratios,
    is_monotone,
    layers_to_threshold,
    monotone_fraction,
    scaling_study,
)
from falqon_lab.experiments import graphs_for_study
from falqon_lab.feedback import LawKind, beta_fo, beta_hybrid, beta_so, quadratic_model
from falqon_lab.problem import Graph, build_hp_diagonal, sample_graphs
from falqon_lab.runner import RunConfig, replay, run_falqon
from helpers import TRIANGLE, oracle_scalars, random_state

ETA = 1e-6  # suite-wide monotonicity slack
L_MAX = 1000
N12_GRAPHS = 20


def report(num, text):
    print(f"\n[criterion {num:>2}] PASS - {text}")


@pytest.fixture(scope="session")
def ensemble12():
    return graphs_for_study(12, N12_GRAPHS, seed=0)


@pytest.fixture(scope="session")
def fo12(ensemble12):
    """First-order mean curves at the dt values the convergence criteria use."""
    out = {}
    for dt in (0.01, 0.028, 0.06, 0.1):
        ratios = ensemble_ratios(ensemble12, LawKind.FO, dt, L_MAX)
        out[dt] = curve_from_ratios(ratios, 12, LawKind.FO, dt)
    return out


@pytest.fixture(scope="session")
def hybrid12_01(ensemble12):
    ratios = ensemble_ratios(ensemble12, LawKind.SO_HYBRID, 0.1, L_MAX)
    return curve_from_ratios(ratios, 12, LawKind.SO_HYBRID, 0.1)


@pytest.fixture(scope="session")
def appendix12(ensemble12):
    """Per-graph ratio curves for the pure/hybrid comparison."""
    return {
        ("so", 0.1): ensemble_ratios(ensemble12, LawKind.SO_PURE, 0.1, L_MAX),
        ("so", 0.028): ensemble_ratios(ensemble12, LawKind.SO_PURE, 0.028, L_MAX),
        ("so-hybrid", 0.028): ensemble_ratios(ensemble12, LawKind.SO_HYBRID, 0.028, L_MAX),
    }


@pytest.fixture(scope="session")
def scaling():
    """Critical-dt search plus layers-to-threshold for both laws, all sizes."""
    ns = [8, 10, 12, 14, 16]
    return {
        law: scaling_study(ns, law, graphs_per_n=20, seed=0, resolution=0.002,
                           l_max=L_MAX, eta=ETA, r_target=GW_RATIO)
        for law in (LawKind.FO, LawKind.SO_HYBRID)
    }


def test_criterion_01_dense_oracle_equivalence():
    rng = np.random.default_rng(101)
    graphs = {
        2: Graph.from_edges(2, [(0, 1)]),
        3: TRIANGLE,
        4: Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]),
    }
    worst = 0.0
    for n, g in graphs.items():
        h = build_hp_diagonal(g)
        for _ in range(50):
            psi = random_state(rng, n)
            got = feedback_scalars(psi, h)
            a, b, c = oracle_scalars(psi, h.diag)
            worst = max(worst, abs(got.a - a), abs(got.b - b), abs(got.c - c))
    assert worst < 1e-10, f"dense-oracle deviation {worst:.3e}"
    report(1, f"matrix-free scalars match dense commutators, worst {worst:.2e}")


def test_criterion_02_taylor_order_check():
    g6 = sample_graphs(6, 1, seed=3)[0]
    h6 = build_hp_diagonal(g6)
    rng = np.random.default_rng(0)
    ratios = []
    for _ in range(20):
        psi = random_state(rng, 6)
        beta = float(rng.uniform(-1.0, 1.0))
        sc, e0 = measure(psi, h6)
        rem = []
        for dt in (0.02, 0.01):
            stepped = apply_ud(apply_up(psi, h6, dt), beta, dt)
            rem.append(abs(energy(stepped, h6) - e0 - quadratic_model(sc, beta, dt)))
        ratios.append(rem[0] / rem[1])
    bad = [r for r in ratios if not (6.0 <= r <= 10.0)]
    assert not bad, f"halving ratios outside 8x +/- 25%: {bad}"
    report(2, f"remainder shrinks 8x on dt halving (range {min(ratios):.2f}..{max(ratios):.2f})")


def test_criterion_03_fo_convergence(fo12):
    fast, slow = fo12[0.028], fo12[0.01]
    assert is_monotone(fast.mean_r, ETA), "dt=0.028 mean curve not monotone"
    assert fast.mean_r[-1] >= 0.95, f"final mean r {fast.mean_r[-1]:.4f} < 0.95"
    assert is_monotone(slow.mean_r, ETA), "dt=0.01 mean curve not monotone"
    cross_fast = layers_to_threshold(fast, GW_RATIO)
    cross_slow = layers_to_threshold(slow, GW_RATIO)
    assert cross_fast is not None
    assert cross_slow is None or cross_slow > cross_fast, (
        f"dt=0.01 crossing {cross_slow} not later than dt=0.028 crossing {cross_fast}"
    )
    report(3, f"dt=0.028 monotone to {fast.mean_r[-1]:.4f} (cross {cross_fast}); "
              f"dt=0.01 crosses later ({cross_slow})")


def test_criterion_04_fo_breakdown(fo12):
    curve = fo12[0.06]
    assert not is_monotone(curve.mean_r, ETA), "dt=0.06 unexpectedly monotone"
    report(4, f"dt=0.06 breaks monotonicity (final mean r {curve.mean_r[-1]:.4f})")


def test_criterion_05_so_vs_fo_at_large_dt(fo12, hybrid12_01):
    fo_final = fo12[0.1].mean_r[-1]
    assert abs(fo_final - 0.71) <= 0.07, f"first-order plateau {fo_final:.4f} not 0.71 +/- 0.07"
    hy_final = hybrid12_01.mean_r[-1]
    assert abs(hy_final - 0.98) <= 0.03, f"hybrid final {hy_final:.4f} not 0.98 +/- 0.03"
    drops = np.diff(hybrid12_01.mean_r)
    worst = float(drops.min())
    print(f"\n  hybrid dt=0.1 worst mean-curve step: {worst:+.2e} at k={int(drops.argmin()) + 1}")
    assert is_monotone(hybrid12_01.mean_r, ETA), (
        f"hybrid mean curve at dt=0.1 not monotone at eta={ETA} (worst drop {worst:+.2e}); "
        "the hybrid cap takes first-order steps whose own quadratic model ascends, "
        "leaving figure-scale dips in the rise (see decisions ledger)"
    )
    report(5, f"hybrid monotone to {hy_final:.4f}; first-order plateau {fo_final:.4f}")


def test_criterion_06_critical_dt_ordering(scaling):
    fo_points = {p.n: p.critical.dt_c for p in scaling[LawKind.FO].points}
    so_points = {p.n: p.critical.dt_c for p in scaling[LawKind.SO_HYBRID].points}
    for n in (8, 10, 12, 14, 16):
        assert so_points[n] > fo_points[n], (
            f"n={n}: dt_c ordering violated ({so_points[n]} vs {fo_points[n]})"
        )
    assert abs(fo_points[12] - 0.028) <= 0.005, (
        f"dt_c(first-order, n=12) = {fo_points[12]} not 0.028 +/- 0.005"
    )
    report(6, f"dt_c second-order > first-order at every n; "
              f"first-order n=12 dt_c = {fo_points[12]:.3f}")


def test_criterion_07_scaling_slopes(scaling):
    fo_fit = scaling[LawKind.FO].fit
    so_fit = scaling[LawKind.SO_HYBRID].fit
    print(f"\n  layers-to-threshold points: fo {fo_fit.points} so {so_fit.points}")
    print(f"  slopes: fo {fo_fit.slope:.2f}, so {so_fit.slope:.2f}, "
          f"ratio {fo_fit.slope / so_fit.slope:.2f}")
    assert fo_fit.slope >= 20.0, f"first-order slope {fo_fit.slope:.2f} < 20"
    assert so_fit.slope <= 5.0, (
        f"second-order slope {so_fit.slope:.2f} > 5; at the strict slack eta={ETA} the "
        "second-order critical dt lands near 0.04-0.07 instead of the figure-scale "
        "~0.14, so its layer counts stay within ~2x of first-order (see ledger)"
    )
    assert fo_fit.slope / so_fit.slope >= 10.0, (
        f"slope ratio {fo_fit.slope / so_fit.slope:.2f} < 10"
    )
    report(7, f"slopes {fo_fit.slope:.1f} vs {so_fit.slope:.1f}")


def test_criterion_08_saturation_ordering(scaling):
    fo_sat = {p.n: p.saturation_r for p in scaling[LawKind.FO].points}
    so_sat = {p.n: p.saturation_r for p in scaling[LawKind.SO_HYBRID].points}
    print(f"\n  saturations at each law's dt_c: fo {fo_sat} so {so_sat}")
    for n in (8, 10, 12, 14, 16):
        assert fo_sat[n] >= 0.95 and so_sat[n] >= 0.95
    for n in (8, 10, 12):
        assert abs(fo_sat[n] - 0.995) <= 0.01, (
            f"n={n}: first-order saturation {fo_sat[n]:.4f} not 0.995 +/- 0.01"
        )
    for n in (8, 10, 12, 14, 16):
        assert fo_sat[n] > so_sat[n], (
            f"n={n}: saturation ordering violated ({fo_sat[n]:.4f} vs {so_sat[n]:.4f}); "
            f"at the strict slack eta={ETA} the second-order critical dt sits just above "
            "first-order's, so both laws saturate near 0.997 and the large-step "
            "saturation penalty this clause encodes never activates (see ledger)"
        )
    report(8, "saturation r(first-order) > r(second-order) at every n, all >= 0.95")


def test_criterion_09_appendix_comparison(appendix12):
    pure_01 = appendix12[("so", 0.1)]
    frac = monotone_fraction(pure_01, ETA)
    print(f"\n  pure second-order at dt=0.1: per-graph monotone fraction {frac:.2f}")
    assert frac >= 0.90, (
        f"pure second-order monotone for only {frac:.0%} of graphs at dt=0.1; the "
        "near-zero curvature scalar after the first cost layer makes the uncapped "
        "law take one large early step on most graphs (see decisions ledger)"
    )
    hybrid = appendix12[("so-hybrid", 0.028)].mean(axis=0)
    pure = appendix12[("so", 0.028)].mean(axis=0)
    gaps = hybrid[:200] - pure[:200]
    assert np.all(gaps >= -1e-9), (
        f"hybrid mean curve dips below pure at layers {np.nonzero(gaps < -1e-9)[0][:5] + 1}"
    )
    report(9, f"pure second-order monotone fraction {frac:.2f}; hybrid dominates first 200 layers")


def test_criterion_10_property_suite(ensemble12):
    # norm preservation over a deep n=16 run
    g16 = graphs_for_study(16, 1, seed=0)[0]
    trace16 = run_falqon(RunConfig(graph=g16, dt=0.02, max_layers=1000, law=LawKind.FO))
    assert trace16.norm_error < 1e-8, f"norm error {trace16.norm_error:.2e}"

    # beta_1 = 0 in every trace, all laws
    for law in LawKind:
        t = run_falqon(RunConfig(graph=ensemble12[0], dt=0.05, max_layers=5, law=law))
        assert t.betas[0] == 0.0

    # hybrid magnitude minimality on random scalar triples
    rng = np.random.default_rng(7)
    for _ in range(1000):
        sc = FeedbackScalars(*(float(x) for x in rng.uniform(-5, 5, size=3)))
        dt = float(rng.uniform(0.01, 0.3))
        hy = beta_hybrid(sc, dt, 1e-9)
        assert abs(hy.beta) == min(abs(beta_fo(sc).beta), abs(beta_so(sc, dt, 1e-9).beta))

    # closed-loop vs open-loop replay identity
    cfg = RunConfig(graph=ensemble12[1], dt=0.04, max_layers=300, law=LawKind.SO_HYBRID)
    closed = run_falqon(cfg)
    opened = replay(cfg, closed.betas)
    worst = float(np.abs(closed.energies - opened.energies).max())
    assert worst <= 1e-10, f"replay energy deviation {worst:.2e}"
    report(10, f"norms, first betas, hybrid minimality, replay identity (dev {worst:.1e})")
