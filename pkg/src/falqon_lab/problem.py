"""MAX-CUT problem instances: random 3-regular graphs, cut Hamiltonians, exact optima.

Vertices are labelled 0..n-1 and bit i of a basis index encodes the side of
vertex i, so ``diag[z]`` is minus the cut size of the bipartition read off z.
"""
from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

import numpy as np

DEFAULT_MAX_QUBITS = 20

# Largest vertex count for which fingerprints are exact canonical forms.
# Above this the fingerprint falls back to the adjacency spectrum, which is
# only an isomorphism invariant (cospectral pairs collide).
EXACT_FINGERPRINT_MAX_N = 10

SPECTRUM_ROUNDING = 1e-9


class GraphError(ValueError):
    """Invalid graph structure or graph-generation parameters."""


class EdgeListError(GraphError):
    """Malformed edge-list text. Carries the offending 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DrawBudgetError(GraphError):
    """Deduplicated sampling could not reach the requested count in budget."""


class ResourceLimitError(RuntimeError):
    """Problem size exceeds the configured qubit limit."""


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph as a sorted tuple of (i, j) pairs with i < j."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"vertex count must be positive, got {self.n}")
        seen = set()
        for i, j in self.edges:
            if not (0 <= i < j < self.n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={self.n}")
            if (i, j) in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

    @classmethod
    def from_edges(cls, n: int, edges) -> "Graph":
        """Build a graph from any iterable of vertex pairs, normalizing i < j."""
        normalized = []
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            normalized.append((min(i, j), max(i, j)))
        return cls(n=n, edges=tuple(sorted(normalized)))

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degrees(self) -> list[int]:
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def is_regular(self, degree: int) -> bool:
        return all(d == degree for d in self.degrees())

    def neighbor_masks(self) -> list[int]:
        """Adjacency rows as bitmasks; bit j of entry i set iff (i, j) is an edge."""
        masks = [0] * self.n
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks


def is_connected(g: Graph) -> bool:
    if g.n <= 1:
        return True
    masks = g.neighbor_masks()
    seen = 1
    frontier = [0]
    while frontier:
        v = frontier.pop()
        m = masks[v] & ~seen
        while m:
            w = (m & -m).bit_length() - 1
            seen |= 1 << w
            frontier.append(w)
            m &= m - 1
    return seen == (1 << g.n) - 1


def _pairing_draw(rng: random.Random, n: int, degree: int) -> Graph | None:
    """One configuration-model attempt: shuffle stubs, pair them up, reject
    the whole draw on any self-loop or repeated edge."""
    stubs = list(range(n)) * degree
    rng.shuffle(stubs)
    edges = set()
    for a, b in zip(stubs[::2], stubs[1::2]):
        if a == b:
            return None
        e = (a, b) if a < b else (b, a)
        if e in edges:
            return None
        edges.add(e)
    return Graph(n=n, edges=tuple(sorted(edges)))


def _check_regular_params(n: int, degree: int) -> None:
    if degree < 1 or degree >= n:
        raise GraphError(f"degree {degree} invalid for n={n}")
    if n < 4:
        raise GraphError(f"need n >= 4, got {n}")
    if (n * degree) % 2 != 0:
        raise GraphError(f"n*degree must be even, got n={n}, degree={degree}")


def generate_random_regular(n: int, degree: int = 3, seed: int = 0) -> Graph:
    """Draw one random simple regular graph via the pairing model.

    Deterministic for a fixed seed. Rejection of loops/multi-edges restarts
    the whole draw, so accepted graphs are uniform over configuration-model
    pairings.
    """
    _check_regular_params(n, degree)
    rng = random.Random(seed)
    while True:
        g = _pairing_draw(rng, n, degree)
        if g is not None:
            return g


def sample_graphs(
    n: int,
    count: int,
    degree: int = 3,
    seed: int = 0,
    dedup: bool = False,
    max_draws: int | None = None,
) -> list[Graph]:
    """Draw `count` regular graphs from one seeded stream.

    With dedup=True, graphs whose canonical fingerprint was already seen are
    skipped; raises DrawBudgetError if the count is unreachable within
    `max_draws` attempts (default 1000 + 2000*count).
    """
    _check_regular_params(n, degree)
    if count < 1:
        raise GraphError(f"count must be positive, got {count}")
    if max_draws is None:
        max_draws = 1000 + 2000 * count
    rng = random.Random(seed)
    out: list[Graph] = []
    seen: set[str] = set()
    draws = 0
    while len(out) < count:
        if draws >= max_draws:
            raise DrawBudgetError(
                f"collected {len(out)}/{count} graphs after {draws} draws "
                f"(n={n}, degree={degree}, dedup={dedup})"
            )
        g = _pairing_draw(rng, n, degree)
        draws += 1
        if g is None:
            continue
        if dedup:
            fp = canonical_fingerprint(g)
            if fp in seen:
                continue
            seen.add(fp)
        out.append(g)
    return out


def discover_all_classes(
    n: int,
    degree: int = 3,
    seed: int = 0,
    stall_window: int = 10_000,
    max_draws: int | None = None,
) -> list[Graph]:
    """One representative per isomorphism class found by repeated sampling.

    Draws until `stall_window` consecutive draws add no new class (or the
    optional hard budget runs out), so the returned count is discovered, not
    assumed. Exact below EXACT_FINGERPRINT_MAX_N, spectral above.
    """
    _check_regular_params(n, degree)
    rng = random.Random(seed)
    reps: list[Graph] = []
    seen: set[str] = set()
    stall = 0
    draws = 0
    while stall < stall_window and (max_draws is None or draws < max_draws):
        g = _pairing_draw(rng, n, degree)
        draws += 1
        if g is None:
            continue
        fp = canonical_fingerprint(g)
        if fp in seen:
            stall += 1
            continue
        seen.add(fp)
        reps.append(g)
        stall = 0
    return reps


def _min_adjacency_code(g: Graph) -> int:
    """Lexicographically smallest upper-triangle adjacency encoding over all
    vertex orderings (column-major bit order, so prefixes are decided as the
    ordering is built). Equal codes <=> isomorphic graphs."""
    n = g.n
    masks = g.neighbor_masks()
    deg = g.degrees()
    # Cheap invariant used only to explore promising candidates first.
    nbr_deg = [tuple(sorted(deg[j] for j in range(n) if (m >> j) & 1)) for m in masks]
    rank = {inv: r for r, inv in enumerate(sorted(set(zip(deg, nbr_deg))))}
    key = [rank[(deg[v], nbr_deg[v])] for v in range(n)]

    high = 1 << (n + 1)
    best = [high] * n
    best[0] = 0
    order = [0] * n
    used = [False] * n

    def descend(pos: int) -> None:
        if pos == n:
            return
        cands = []
        for v in range(n):
            if used[v]:
                continue
            chunk = 0
            m = masks[v]
            for q in range(pos):
                chunk = (chunk << 1) | ((m >> order[q]) & 1)
            cands.append((chunk, key[v], v))
        cands.sort()
        for chunk, _, v in cands:
            if chunk > best[pos]:
                break
            if chunk < best[pos]:
                best[pos] = chunk
                for q in range(pos + 1, n):
                    best[q] = high
            order[pos] = v
            used[v] = True
            descend(pos + 1)
            used[v] = False

    descend(0)
    code = 0
    for pos in range(n):
        code = (code << pos) | best[pos]
    return code


def _spectrum_fingerprint(g: Graph) -> str:
    adj = np.zeros((g.n, g.n))
    for i, j in g.edges:
        adj[i, j] = adj[j, i] = 1.0
    eigs = np.linalg.eigvalsh(adj)
    quantized = tuple(int(round(ev / SPECTRUM_ROUNDING)) for ev in eigs)
    digest = hashlib.sha256(repr(quantized).encode()).hexdigest()[:16]
    return digest


def canonical_fingerprint(g: Graph) -> str:
    """Isomorphism fingerprint of a simple graph.

    Exact (equality <=> isomorphism) for n <= EXACT_FINGERPRINT_MAX_N via a
    branch-and-bound minimum adjacency encoding; spectral (invariant only,
    collisions possible for cospectral pairs) above that.
    """
    if g.n <= EXACT_FINGERPRINT_MAX_N:
        return f"x{g.n}.{g.edge_count}.{_min_adjacency_code(g):x}"
    return f"s{g.n}.{g.edge_count}.{_spectrum_fingerprint(g)}"


@dataclass(eq=False)
class DiagonalHamiltonian:
    """Diagonal of the cut-counting cost operator over all 2^n bitstrings.

    Entry z is minus the number of edges cut by the bipartition encoded in z,
    so values are integers in [-edge_count, 0].
    """

    n: int
    diag: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 1 << self.n


@dataclass(frozen=True)
class OptimumReport:
    e_min: float
    argmin_count: int


def build_hp_diagonal(g: Graph, max_qubits: int = DEFAULT_MAX_QUBITS) -> DiagonalHamiltonian:
    """Cost diagonal for MAX-CUT on g: diag[z] = -(cut size of z)."""
    if g.n > max_qubits:
        raise ResourceLimitError(f"n={g.n} exceeds qubit limit {max_qubits}")
    idx = np.arange(1 << g.n, dtype=np.int64)
    diag = np.zeros(1 << g.n)
    for i, j in g.edges:
        diag -= (((idx >> i) ^ (idx >> j)) & 1).astype(np.float64)
    return DiagonalHamiltonian(n=g.n, diag=diag)


def solve_exact(h: DiagonalHamiltonian) -> OptimumReport:
    """Ground-state energy and its multiplicity by full enumeration of diag."""
    if h.diag.size == 0:
        raise GraphError("empty diagonal")
    e_min = float(h.diag.min())
    count = int(np.count_nonzero(h.diag == e_min))
    return OptimumReport(e_min=e_min, argmin_count=count)


def read_edge_list(text: str) -> Graph:
    """Parse the plain edge-list format: first line ``n m``, then m lines ``i j``.

    Blank lines and lines starting with '#' are skipped. Errors carry the
    1-based line number of the offending line.
    """
    header: tuple[int, int] | None = None
    edges: list[tuple[int, int]] = []
    n = m = 0
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(line_no, f"expected two integers, got {raw!r}")
        try:
            a, b = int(parts[0]), int(parts[1])
        except ValueError:
            raise EdgeListError(line_no, f"expected two integers, got {raw!r}") from None
        if header is None:
            if a < 1 or b < 0:
                raise EdgeListError(line_no, f"invalid header n={a} m={b}")
            header = (a, b)
            n, m = header
            continue
        if a == b:
            raise EdgeListError(line_no, f"self-loop at vertex {a}")
        i, j = min(a, b), max(a, b)
        if not (0 <= i and j < n):
            raise EdgeListError(line_no, f"vertex out of range in edge ({a}, {b}) for n={n}")
        if (i, j) in set(edges):
            raise EdgeListError(line_no, f"duplicate edge ({a}, {b})")
        edges.append((i, j))
    if header is None:
        raise EdgeListError(1, "missing 'n m' header line")
    if len(edges) != m:
        raise EdgeListError(1, f"header declares {m} edges, found {len(edges)}")
    return Graph(n=n, edges=tuple(sorted(edges)))


def write_edge_list(g: Graph) -> str:
    lines = [f"{g.n} {g.edge_count}"]
    lines.extend(f"{i} {j}" for i, j in g.edges)
    return "\n".join(lines) + "\n"
