"""Command-line entry point: graph generation, runs, sweeps, scaling studies,
and oracle self-checks.

Every artifact embeds the fully resolved configuration (flags over config
file over defaults) so any command can be reproduced from its own output.
Exit codes: 0 ok, 2 config error, 3 resource/budget error, 4 bracket error,
5 selfcheck failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .engine import apply_ud, apply_up, energy, init_plus_state, measure
from .experiments import (
    DEFAULT_ETA,
    DEFAULT_L_MAX,
    DEFAULT_RESOLUTION,
    GW_RATIO,
    BracketError,
    EnsembleCurve,
    appendix_study,
    curve_from_ratios,
    ensemble_ratios,
    is_monotone,
    layers_to_threshold,
    scaling_study,
)
from .feedback import LawKind, quadratic_model
from .problem import (
    DrawBudgetError,
    Graph,
    GraphError,
    ResourceLimitError,
    build_hp_diagonal,
    canonical_fingerprint,
    discover_all_classes,
    is_connected,
    read_edge_list,
    sample_graphs,
    write_edge_list,
)
from .reference import dense_scalars
from .runner import RunConfig, replay, run_falqon, write_beta_column, write_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_BRACKET = 4
EXIT_SELFCHECK = 5


class ConfigError(ValueError):
    """Bad flag/config-file values or unreadable inputs."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    flat = {}
    for key, val in data.items():
        if isinstance(val, dict):
            for sub, subval in val.items():
                flat[f"{key}.{sub}"] = subval
                flat[sub] = subval
        else:
            flat[key] = val
    return flat


def _resolve(args: argparse.Namespace, file_cfg: dict, key: str, default, cast=None):
    """Flag value if given, else config-file value (dashed or underscored key),
    else default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is None:
        val = file_cfg.get(key, file_cfg.get(key.replace("-", "_"), default))
    if val is None:
        return None
    return cast(val) if cast is not None else val


def _parse_law(text: str) -> LawKind:
    try:
        return LawKind(text)
    except ValueError:
        raise ConfigError(f"unknown law {text!r}; choose from fo, so, so-hybrid") from None


def _parse_float_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _load_graphs_arg(spec: str) -> list[tuple[str, Graph]]:
    """A graph file or a directory of *.txt edge lists, sorted by name."""
    path = Path(spec)
    if path.is_dir():
        files = sorted(path.glob("*.txt"))
        if not files:
            raise ConfigError(f"no *.txt edge lists in directory {spec}")
    elif path.is_file():
        files = [path]
    else:
        raise ConfigError(f"graph path not found: {spec}")
    out = []
    for f in files:
        out.append((f.stem, read_edge_list(f.read_text(encoding="utf-8"))))
    return out


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _curve_csv(path: Path, curve: EnsembleCurve, config: dict) -> None:
    lines = [f"# config = {json.dumps(config, sort_keys=True)}", "k,mean_r,std_r"]
    for k in range(curve.mean_r.size):
        lines.append(f"{k + 1},{_fmt(curve.mean_r[k])},{_fmt(curve.std_r[k])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _curve_name(law: LawKind, n: int, dt: float) -> str:
    return f"curve_{law.value}_n{n}_dt{dt:g}.csv"


def _out_dir(args, file_cfg) -> Path:
    out = _resolve(args, file_cfg, "out", None, str)
    if out is None:
        raise ConfigError("an output directory is required (--out)")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_gen_graphs(args, file_cfg) -> int:
    n = _resolve(args, file_cfg, "n", None, int)
    count = _resolve(args, file_cfg, "count", None, int)
    all_classes = bool(_resolve(args, file_cfg, "all-classes", False))
    if n is None or (count is None and not all_classes):
        raise ConfigError("gen-graphs needs --n and either --count or --all-classes")
    seed = _resolve(args, file_cfg, "seed", 0, int)
    degree = _resolve(args, file_cfg, "degree", 3, int)
    dedup = bool(_resolve(args, file_cfg, "dedup", False))
    max_draws = _resolve(args, file_cfg, "max-draws", None, int)
    stall_window = _resolve(args, file_cfg, "stall-window", 10_000, int)
    out = _out_dir(args, file_cfg)

    if all_classes:
        graphs = discover_all_classes(n, degree=degree, seed=seed,
                                      stall_window=stall_window, max_draws=max_draws)
        print(f"discovered {len(graphs)} isomorphism classes "
              f"(stall window {stall_window})")
    else:
        graphs = sample_graphs(n, count, degree=degree, seed=seed, dedup=dedup,
                               max_draws=max_draws)
    resolved = {"command": "gen-graphs", "n": n, "count": count, "seed": seed,
                "degree": degree, "dedup": dedup, "max_draws": max_draws,
                "all_classes": all_classes, "stall_window": stall_window}
    records = []
    for idx, g in enumerate(graphs):
        name = f"graph_{idx:03d}.txt"
        (out / name).write_text(write_edge_list(g), encoding="utf-8")
        records.append({
            "file": name,
            "n": g.n,
            "edge_count": g.edge_count,
            "fingerprint": canonical_fingerprint(g),
            "connected": is_connected(g),
        })
    _write_json(out / "manifest.json", {"config": resolved, "graphs": records})
    print(f"wrote {len(graphs)} graphs to {out}")
    return EXIT_OK


def _run_config_from(args, file_cfg, graph: Graph, seed: int) -> RunConfig:
    return RunConfig(
        graph=graph,
        dt=_resolve(args, file_cfg, "dt", 0.028, float),
        max_layers=_resolve(args, file_cfg, "layers", DEFAULT_L_MAX, int),
        law=_parse_law(_resolve(args, file_cfg, "law", "fo", str)),
        eps_b=_resolve(args, file_cfg, "eps-b", None, float),
        seed=seed,
    )


def cmd_run(args, file_cfg) -> int:
    spec = _resolve(args, file_cfg, "graphs", None, str)
    if spec is None:
        raise ConfigError("run needs --graphs <dir|file>")
    seed = _resolve(args, file_cfg, "seed", 0, int)
    out = _out_dir(args, file_cfg)
    for stem, graph in _load_graphs_arg(spec):
        cfg = _run_config_from(args, file_cfg, graph, seed)
        trace = run_falqon(cfg)
        write_trace_csv(trace, out / f"{stem}.trace.csv")
        write_beta_column(trace, out / f"{stem}.betas.txt")
        final = trace.records[-1]
        print(f"{stem}: law={cfg.law.value} dt={cfg.dt:g} layers={cfg.max_layers} "
              f"final_r={final.approx_ratio:.6f}")
    return EXIT_OK


def cmd_sweep_dt(args, file_cfg) -> int:
    spec = _resolve(args, file_cfg, "graphs", None, str)
    if spec is None:
        raise ConfigError("sweep-dt needs --graphs <dir|file>")
    dt_text = _resolve(args, file_cfg, "dt-list", None, str)
    if dt_text is None:
        raise ConfigError("sweep-dt needs --dt-list")
    dt_list = _parse_float_list(str(dt_text))
    law = _parse_law(_resolve(args, file_cfg, "law", "so-hybrid", str))
    l_max = _resolve(args, file_cfg, "layers", DEFAULT_L_MAX, int)
    eta = _resolve(args, file_cfg, "eta", DEFAULT_ETA, float)
    r_target = _resolve(args, file_cfg, "r-target", GW_RATIO, float)
    seed = _resolve(args, file_cfg, "seed", 0, int)
    workers = _resolve(args, file_cfg, "workers", None, int)
    out = _out_dir(args, file_cfg)

    named = _load_graphs_arg(spec)
    graphs = [g for _, g in named]
    n = graphs[0].n
    resolved = {"command": "sweep-dt", "graphs": spec, "law": law.value,
                "dt_list": dt_list, "layers": l_max, "eta": eta,
                "r_target": r_target, "seed": seed, "graph_count": len(graphs)}

    rows = []
    for dt in dt_list:
        ratios = ensemble_ratios(graphs, law, dt, l_max, workers=workers)
        curve = curve_from_ratios(ratios, n, law, dt)
        _curve_csv(out / _curve_name(law, n, dt), curve, resolved | {"dt": dt})
        rows.append({
            "dt": dt,
            "layers_required": layers_to_threshold(curve, r_target),
            "final_mean_r": float(curve.mean_r[-1]),
            "monotone": is_monotone(curve.mean_r, eta),
        })
        print(f"dt={dt:g}: layers_required={rows[-1]['layers_required']} "
              f"monotone={rows[-1]['monotone']} final_r={rows[-1]['final_mean_r']:.4f}")
    lines = [f"# config = {json.dumps(resolved, sort_keys=True)}",
             "dt,layers_required,final_mean_r,monotone"]
    for row in rows:
        req = "" if row["layers_required"] is None else str(row["layers_required"])
        lines.append(f"{_fmt(row['dt'])},{req},{_fmt(row['final_mean_r'])},{row['monotone']}")
    (out / f"sweep_{law.value}_n{n}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "sweep_summary.json", {"config": resolved, "rows": rows})
    return EXIT_OK


def cmd_scaling(args, file_cfg) -> int:
    n_list = _parse_int_list(str(_resolve(args, file_cfg, "n-list", "8,10,12", str)))
    laws = [_parse_law(t) for t in str(_resolve(args, file_cfg, "laws", "fo,so-hybrid", str)).split(",")]
    graphs_per_n = _resolve(args, file_cfg, "graphs-per-n", 20, int)
    seed = _resolve(args, file_cfg, "seed", 0, int)
    resolution = _resolve(args, file_cfg, "resolution", DEFAULT_RESOLUTION, float)
    l_max = _resolve(args, file_cfg, "layers", DEFAULT_L_MAX, int)
    eta = _resolve(args, file_cfg, "eta", DEFAULT_ETA, float)
    r_target = _resolve(args, file_cfg, "r-target", GW_RATIO, float)
    workers = _resolve(args, file_cfg, "workers", None, int)
    dt_lo = _resolve(args, file_cfg, "dt-lo", None, float)
    dt_hi = _resolve(args, file_cfg, "dt-hi", None, float)
    out = _out_dir(args, file_cfg)

    resolved = {"command": "scaling", "n_list": n_list, "laws": [l.value for l in laws],
                "graphs_per_n": graphs_per_n, "seed": seed, "resolution": resolution,
                "layers": l_max, "eta": eta, "r_target": r_target,
                "dt_lo": dt_lo, "dt_hi": dt_hi}

    lines = [f"# config = {json.dumps(resolved, sort_keys=True)}",
             "law,n,dt_c,layers_required,saturation_r"]
    fits = {}
    for law in laws:
        bracket = None
        if dt_lo is not None and dt_hi is not None:
            bracket = (dt_lo, dt_hi)
        study = scaling_study(n_list, law, graphs_per_n=graphs_per_n, seed=seed,
                              bracket=bracket, resolution=resolution, l_max=l_max,
                              eta=eta, r_target=r_target, workers=workers)
        for pt in study.points:
            lines.append(f"{law.value},{pt.n},{_fmt(pt.critical.dt_c)},"
                         f"{pt.layers_required},{_fmt(pt.saturation_r)}")
        fits[law.value] = {
            "slope": study.fit.slope,
            "intercept": study.fit.intercept,
            "residuals": study.fit.residuals,
            "points": study.fit.points,
            "dt_c": {str(pt.n): pt.critical.dt_c for pt in study.points},
            "saturation_r": {str(pt.n): pt.saturation_r for pt in study.points},
        }
        print(f"{law.value}: slope={study.fit.slope:.3f} intercept={study.fit.intercept:.3f}")
    (out / "scaling_points.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_json(out / "scaling_summary.json", {"config": resolved, "fits": fits})
    return EXIT_OK


def cmd_appendix(args, file_cfg) -> int:
    spec = _resolve(args, file_cfg, "graphs", None, str)
    if spec is None:
        raise ConfigError("appendix needs --graphs <dir|file>")
    dt_list = _parse_float_list(str(_resolve(args, file_cfg, "dt-list", "0.028,0.1", str)))
    l_max = _resolve(args, file_cfg, "layers", DEFAULT_L_MAX, int)
    eta = _resolve(args, file_cfg, "eta", DEFAULT_ETA, float)
    workers = _resolve(args, file_cfg, "workers", None, int)
    out = _out_dir(args, file_cfg)

    named = _load_graphs_arg(spec)
    graphs = [g for _, g in named]
    n = graphs[0].n
    resolved = {"command": "appendix", "graphs": spec, "dt_list": dt_list,
                "layers": l_max, "eta": eta, "graph_count": len(graphs)}

    study = appendix_study(graphs, dt_list, l_max=l_max, eta=eta, workers=workers)
    summary_rows = []
    for (law, dt), curve in study.curves.items():
        _curve_csv(out / _curve_name(law, n, dt), curve, resolved | {"law": law.value, "dt": dt})
        frac = study.monotone_fraction[(law, dt)]
        summary_rows.append({
            "law": law.value,
            "dt": dt,
            "monotone_fraction": frac,
            "final_mean_r": float(curve.mean_r[-1]),
        })
        print(f"{law.value} dt={dt:g}: monotone_fraction={frac:.2f} "
              f"final_r={curve.mean_r[-1]:.4f}")
    _write_json(out / "appendix_summary.json", {"config": resolved, "rows": summary_rows})
    return EXIT_OK


def selfcheck(perturb_a: float = 0.0) -> list[tuple[str, bool, str]]:
    """Named consistency checks; perturb_a offsets the measured first scalar
    inside the oracle comparison to prove the harness notices."""
    checks: list[tuple[str, bool, str]] = []
    rng = np.random.default_rng(20240901)

    # Matrix-free scalars against dense commutator matrices.
    worst = 0.0
    test_graphs = {
        2: Graph.from_edges(2, [(0, 1)]),
        3: Graph.from_edges(3, [(0, 1), (0, 2), (1, 2)]),
        4: Graph.from_edges(4, [(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)]),
    }
    for n, g in test_graphs.items():
        h = build_hp_diagonal(g)
        for _ in range(20):
            psi = rng.standard_normal(h.dim) + 1j * rng.standard_normal(h.dim)
            psi /= np.linalg.norm(psi)
            got, _ = measure(psi, h)
            want = dense_scalars(psi, h.diag)
            worst = max(worst, abs(got.a + perturb_a - want.a),
                        abs(got.b - want.b), abs(got.c - want.c))
    checks.append(("dense_scalar_oracle", worst < 1e-10, f"max deviation {worst:.3e}"))

    # The driver ground state is stationary for both commutator scalars.
    g8 = sample_graphs(8, 1, seed=11)[0]
    h8 = build_hp_diagonal(g8)
    sc, _ = measure(init_plus_state(8), h8)
    ok = sc.a == 0.0 and sc.b == 0.0
    checks.append(("plus_state_stationary", ok, f"a={sc.a:.3e} b={sc.b:.3e}"))

    # Unitarity over a long closed-loop run.
    cfg = RunConfig(graph=g8, dt=0.02, max_layers=400, law=LawKind.FO)
    trace = run_falqon(cfg)
    tol = 1e-10 * cfg.max_layers
    checks.append(("norm_preservation", trace.norm_error < tol,
                   f"|norm-1| = {trace.norm_error:.3e} after {cfg.max_layers} layers"))

    # Replaying the recorded betas reproduces the energies.
    rep = replay(cfg, trace.betas)
    diff = float(np.abs(trace.energies - rep.energies).max())
    checks.append(("replay_identity", diff <= 1e-10, f"max energy diff {diff:.3e}"))

    # The quadratic step model misses by a third-order remainder: halving dt
    # shrinks the miss by ~8x.
    g6 = sample_graphs(6, 1, seed=3)[0]
    h6 = build_hp_diagonal(g6)
    taylor_rng = np.random.default_rng(0)
    ratios = []
    for _ in range(6):
        psi = taylor_rng.standard_normal(h6.dim) + 1j * taylor_rng.standard_normal(h6.dim)
        psi /= np.linalg.norm(psi)
        beta = float(taylor_rng.uniform(-1.0, 1.0))
        rem = []
        sc0, e0 = measure(psi, h6)
        for dt in (0.02, 0.01):
            stepped = apply_ud(apply_up(psi, h6, dt), beta, dt)
            rem.append(abs(energy(stepped, h6) - e0 - quadratic_model(sc0, beta, dt)))
        ratios.append(rem[0] / rem[1])
    ok = all(6.0 <= r <= 10.0 for r in ratios)
    checks.append(("taylor_remainder", ok,
                   f"halving ratios {['%.2f' % r for r in ratios]}"))

    # Audit of the second-order branch: negative curvature never fires the
    # sign-flipped branch here (rounding-level |b| may hit the fallback).
    flips = 0
    fallbacks = 0
    for s in range(3):
        g10 = sample_graphs(10, 1, seed=100 + s)[0]
        t = run_falqon(RunConfig(graph=g10, dt=0.05, max_layers=300, law=LawKind.SO_HYBRID))
        flips += t.warnings["so_sign_flipped"]
        fallbacks += t.warnings["so_b_zero_fallback"]
    checks.append(("so_curvature_positive_audit", flips == 0,
                   f"negative-curvature events: {flips} (expected 0), "
                   f"degenerate fallbacks: {fallbacks}"))
    return checks


def cmd_selfcheck(args, file_cfg) -> int:
    perturb = _resolve(args, file_cfg, "debug-perturb-a", 0.0, float)
    results = selfcheck(perturb_a=perturb)
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    if failed:
        print(f"selfcheck failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_SELFCHECK
    print(f"selfcheck passed ({len(results)} checks)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="falqon-lab",
        description="Feedback-based quantum optimization lab for MAX-CUT on 3-regular graphs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--seed", type=int, help="base seed (default 0)")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("gen-graphs", help="sample random regular graphs to edge-list files")
    add_common(p)
    p.add_argument("--n", type=int, help="vertex count (even, >= 4)")
    p.add_argument("--count", type=int, help="how many graphs to write")
    p.add_argument("--degree", type=int, help="vertex degree (default 3)")
    p.add_argument("--dedup", action="store_const", const=True, default=None,
                   help="skip isomorphic duplicates (exact for n <= 10)")
    p.add_argument("--all-classes", action="store_const", const=True, default=None,
                   help="sample until no new isomorphism class appears for a full stall window")
    p.add_argument("--stall-window", type=int,
                   help="consecutive non-novel draws ending class discovery (default 10000)")
    p.add_argument("--max-draws", type=int, help="draw budget for dedup sampling")

    p = sub.add_parser("run", help="closed-loop run(s) on stored graphs, traces to CSV")
    add_common(p)
    p.add_argument("--graphs", help="edge-list file or directory of *.txt files")
    p.add_argument("--law", choices=[l.value for l in LawKind], help="feedback law")
    p.add_argument("--dt", type=float, help="layer time interval")
    p.add_argument("--layers", type=int, help="number of layers")
    p.add_argument("--eps-b", type=float, help="degeneracy tolerance on the curvature scalar")

    p = sub.add_parser("sweep-dt", help="layers-to-threshold across a list of dt values")
    add_common(p)
    p.add_argument("--graphs", help="edge-list file or directory")
    p.add_argument("--law", choices=[l.value for l in LawKind])
    p.add_argument("--dt-list", help="comma-separated dt values")
    p.add_argument("--layers", type=int)
    p.add_argument("--eta", type=float, help="monotonicity slack")
    p.add_argument("--r-target", type=float, help="threshold ratio (default 0.932)")
    p.add_argument("--workers", type=int)

    p = sub.add_parser("scaling", help="critical-dt and depth scaling across sizes")
    add_common(p)
    p.add_argument("--n-list", help="comma-separated vertex counts")
    p.add_argument("--laws", help="comma-separated laws (default fo,so-hybrid)")
    p.add_argument("--graphs-per-n", type=int)
    p.add_argument("--dt-lo", type=float, help="critical-dt search window start")
    p.add_argument("--dt-hi", type=float, help="critical-dt search window end")
    p.add_argument("--resolution", type=float, help="dt_c grid resolution")
    p.add_argument("--layers", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--r-target", type=float)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("appendix", help="pure second-order vs hybrid comparison curves")
    add_common(p)
    p.add_argument("--graphs", help="edge-list file or directory")
    p.add_argument("--dt-list", help="comma-separated dt values (default 0.028,0.1)")
    p.add_argument("--layers", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("selfcheck", help="dense-oracle, unitarity and remainder checks")
    add_common(p)
    p.add_argument("--debug-perturb-a", type=float, help=argparse.SUPPRESS)
    return parser


_COMMANDS = {
    "gen-graphs": cmd_gen_graphs,
    "run": cmd_run,
    "sweep-dt": cmd_sweep_dt,
    "scaling": cmd_scaling,
    "appendix": cmd_appendix,
    "selfcheck": cmd_selfcheck,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        file_cfg = _load_config_file(getattr(args, "config", None))
        return _COMMANDS[args.command](args, file_cfg)
    except (ConfigError, GraphError, ValueError) as exc:
        if isinstance(exc, DrawBudgetError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_RESOURCE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceLimitError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except BracketError as exc:
        print(f"bracket error: {exc}", file=sys.stderr)
        return EXIT_BRACKET


if __name__ == "__main__":
    sys.exit(main())
