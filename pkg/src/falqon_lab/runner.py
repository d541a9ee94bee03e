"""Closed-loop execution of the layer-by-layer feedback iteration.

Step k applies the cost layer then the driver layer with coefficient beta_k,
measures (a, b, c) and the energy on the new state, and feeds the chosen law
to produce beta_{k+1}. The first coefficient is always 0. A trace records,
per step, the beta that was applied, the scalars measured after the step,
and the branch of the decision those scalars produced (i.e. the decision
that sets the next step's beta, so each row is auditable on its own).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .feedback import Branch, LawKind, decide_beta, default_eps_b
from .problem import DEFAULT_MAX_QUBITS, Graph, build_hp_diagonal, solve_exact

TRACE_COLUMNS = "k,beta,A,B,C,energy,approx_ratio,branch"


class NonFiniteBetaError(RuntimeError):
    """A feedback law produced a non-finite beta (law/tolerance misconfiguration)."""


@dataclass(frozen=True)
class RunConfig:
    graph: Graph
    dt: float
    max_layers: int
    law: LawKind
    eps_b: float | None = None
    seed: int = 0
    max_qubits: int = DEFAULT_MAX_QUBITS

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if self.max_layers < 1:
            raise ValueError(f"max_layers must be >= 1, got {self.max_layers}")

    def resolved_eps_b(self) -> float:
        if self.eps_b is not None:
            return self.eps_b
        return default_eps_b(self.graph.n, self.graph.edge_count)


@dataclass(frozen=True)
class StepRecord:
    k: int
    beta: float
    a: float
    b: float
    c: float
    energy: float
    approx_ratio: float
    branch: Branch | None


@dataclass
class RunTrace:
    config: RunConfig
    e_min: float
    records: list[StepRecord]
    warnings: dict[str, int] = field(default_factory=dict)
    norm_error: float = 0.0

    @property
    def betas(self) -> list[float]:
        return [r.beta for r in self.records]

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def approx_ratios(self) -> np.ndarray:
        return np.array([r.approx_ratio for r in self.records])


def _execute(cfg: RunConfig, betas: list[float] | None) -> RunTrace:
    h = build_hp_diagonal(cfg.graph, cfg.max_qubits)
    opt = solve_exact(h)
    eps_b = cfg.resolved_eps_b()
    phases = engine.up_phases(h, cfg.dt)
    psi = engine.init_plus_state(cfg.graph.n, cfg.max_qubits)

    closed_loop = betas is None
    layers = cfg.max_layers if closed_loop else len(betas)
    beta = 0.0
    records: list[StepRecord] = []
    warnings = {"so_sign_flipped": 0, "so_b_zero_fallback": 0}

    for k in range(1, layers + 1):
        if not closed_loop:
            beta = betas[k - 1]
        psi = psi * phases
        psi = engine.apply_ud(psi, beta, cfg.dt)
        sc, en = engine.measure(psi, h)
        # Approximation ratio; the edgeless diagonal is identically zero and
        # every state is optimal, so the ratio is pinned to 1 there.
        ratio = en / opt.e_min if opt.e_min < 0 else 1.0

        branch: Branch | None = None
        next_beta = beta
        if closed_loop:
            decision = decide_beta(cfg.law, sc, cfg.dt, eps_b)
            if not math.isfinite(decision.beta):
                raise NonFiniteBetaError(
                    f"law {cfg.law.value} produced beta={decision.beta} at step {k}"
                )
            branch = decision.branch
            next_beta = decision.beta
            if cfg.law is not LawKind.FO:
                if sc.b < -eps_b:
                    warnings["so_sign_flipped"] += 1
                elif abs(sc.b) <= eps_b:
                    warnings["so_b_zero_fallback"] += 1

        records.append(
            StepRecord(k=k, beta=beta, a=sc.a, b=sc.b, c=sc.c, energy=en,
                       approx_ratio=ratio, branch=branch)
        )
        beta = next_beta

    norm_error = abs(float(np.linalg.norm(psi)) - 1.0)
    return RunTrace(config=cfg, e_min=opt.e_min, records=records,
                    warnings=warnings, norm_error=norm_error)


def run_falqon(cfg: RunConfig) -> RunTrace:
    """Closed-loop run: beta_1 = 0, then each step's scalars set the next beta."""
    return _execute(cfg, None)


def replay(cfg: RunConfig, betas: list[float]) -> RunTrace:
    """Open-loop run of a given beta sequence (no feedback decisions).

    Used to verify closed-loop traces and to export fixed circuits; the trace
    has one record per given beta (at most max_layers) and no branch labels.
    """
    if len(betas) > cfg.max_layers:
        raise ValueError(f"{len(betas)} betas exceed max_layers={cfg.max_layers}")
    if not all(math.isfinite(b) for b in betas):
        raise NonFiniteBetaError("replay given a non-finite beta")
    return _execute(cfg, list(betas))


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _graph_compact(g: Graph) -> str:
    return ";".join(f"{i} {j}" for i, j in g.edges)


def trace_to_csv(trace: RunTrace) -> str:
    """Render a trace with its resolved config embedded as a comment header."""
    cfg = trace.config
    lines = [
        "# falqon-lab trace",
        f"# n = {cfg.graph.n}",
        f"# edges = {_graph_compact(cfg.graph)}",
        f"# law = {cfg.law.value}",
        f"# dt = {_fmt(cfg.dt)}",
        f"# max_layers = {cfg.max_layers}",
        f"# eps_b = {_fmt(cfg.resolved_eps_b())}",
        f"# seed = {cfg.seed}",
        f"# e_min = {_fmt(trace.e_min)}",
        f"# norm_error = {_fmt(trace.norm_error)}",
        f"# warnings = {json.dumps(trace.warnings, sort_keys=True)}",
        TRACE_COLUMNS,
    ]
    for r in trace.records:
        branch = r.branch.value if r.branch is not None else ""
        lines.append(
            f"{r.k},{_fmt(r.beta)},{_fmt(r.a)},{_fmt(r.b)},{_fmt(r.c)},"
            f"{_fmt(r.energy)},{_fmt(r.approx_ratio)},{branch}"
        )
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: RunTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(trace_to_csv(trace))


def write_beta_column(trace: RunTrace, path) -> None:
    """Plain one-beta-per-line export for replay / circuit extraction."""
    with open(path, "w", encoding="utf-8") as f:
        for b in trace.betas:
            f.write(_fmt(b) + "\n")


def parse_trace_csv(text: str) -> dict:
    """Reconstruct config, header fields and columns from a trace CSV.

    Returns a dict with 'config' (RunConfig), 'e_min', 'norm_error',
    'warnings', and 'columns' (name -> list; floats except 'branch')."""
    header: dict[str, str] = {}
    rows: list[str] = []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, val = body.split("=", 1)
                header[key.strip()] = val.strip()
        elif line.strip():
            rows.append(line)
    if not rows or rows[0] != TRACE_COLUMNS:
        raise ValueError("missing trace column header")
    n = int(header["n"])
    edge_text = header.get("edges", "")
    edges = []
    if edge_text:
        for pair in edge_text.split(";"):
            i, j = pair.split()
            edges.append((int(i), int(j)))
    cfg = RunConfig(
        graph=Graph.from_edges(n, edges),
        dt=float(header["dt"]),
        max_layers=int(header["max_layers"]),
        law=LawKind(header["law"]),
        eps_b=float(header["eps_b"]),
        seed=int(header["seed"]),
    )
    names = TRACE_COLUMNS.split(",")
    columns: dict[str, list] = {name: [] for name in names}
    for row in rows[1:]:
        parts = row.split(",")
        for name, part in zip(names, parts):
            if name == "branch":
                columns[name].append(part)
            elif name == "k":
                columns[name].append(int(part))
            else:
                columns[name].append(float(part))
    return {
        "config": cfg,
        "e_min": float(header["e_min"]),
        "norm_error": float(header["norm_error"]),
        "warnings": json.loads(header.get("warnings", "{}")),
        "columns": columns,
    }
