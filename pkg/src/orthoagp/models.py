"""Graphs, the transverse-field Ising model and parameterised Hamiltonians."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .pauli import PauliString, PauliSum, parse_label, to_dense

__all__ = [
    "GraphSpec",
    "CouplingMonomial",
    "ParamHamiltonian",
    "ring",
    "chain",
    "complete",
    "chord_chain",
    "from_edge_list",
    "read_edge_list",
    "tfim",
    "d_lambda",
    "two_site_example",
]

Edge = Tuple[int, int]


@dataclass(frozen=True)
class GraphSpec:
    """Simple undirected graph on vertices ``0..n-1``.

    ``name`` tags the family (``"ring"``, ``"chain"``, ``"complete"``,
    ``"chord_chain"``, ``"edges"``) and is used to pick a built-in symmetry
    group.
    """

    n: int
    edges: FrozenSet[Edge]
    name: str = "edges"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("graph needs at least one vertex")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop on vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) references a vertex outside 0..{self.n - 1}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    def sorted_edges(self) -> List[Edge]:
        return sorted(self.edges)

    def to_edge_list(self) -> str:
        lines = [f"n {self.n}"] + [f"{i} {j}" for i, j in self.sorted_edges()]
        return "\n".join(lines) + "\n"


def ring(n: int) -> GraphSpec:
    if n < 3:
        raise ValueError("ring needs n >= 3 (n = 2 is a chain)")
    return GraphSpec(n, frozenset((i, (i + 1) % n) for i in range(n)), "ring")


def chain(n: int) -> GraphSpec:
    if n < 2:
        raise ValueError("chain needs n >= 2")
    return GraphSpec(n, frozenset((i, i + 1) for i in range(n - 1)), "chain")


def complete(n: int) -> GraphSpec:
    if n < 2:
        raise ValueError("complete graph needs n >= 2")
    return GraphSpec(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)),
                     "complete")


def chord_chain(n: int, extra_edges: Iterable[Edge]) -> GraphSpec:
    """Open chain of ``n`` sites with additional edges (0-indexed)."""
    base = chain(n).edges
    extra = set()
    for e in extra_edges:
        i, j = (int(v) for v in e)
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"invalid extra edge ({i}, {j}) for n={n}")
        extra.add((min(i, j), max(i, j)))
    return GraphSpec(n, frozenset(base | extra), "chord_chain")


def from_edge_list(text: str) -> GraphSpec:
    """Parse an edge-list document.

    Lines hold ``i j``; ``#`` starts a comment; an optional ``n <int>``
    header fixes the vertex count, otherwise it is one more than the largest
    vertex seen. Duplicate edges are collapsed.
    """
    n: Optional[int] = None
    edges = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0].lower() == "n":
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: malformed header {raw!r}")
            try:
                n = int(parts[1])
            except ValueError:
                raise ValueError(f"line {lineno}: malformed header {raw!r}") from None
            continue
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'i j', got {raw!r}")
        try:
            i, j = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"line {lineno}: expected integers, got {raw!r}") from None
        if i == j:
            raise ValueError(f"line {lineno}: self-loop on vertex {i}")
        if i < 0 or j < 0:
            raise ValueError(f"line {lineno}: negative vertex index")
        edges.add((min(i, j), max(i, j)))
    if n is None:
        if not edges:
            raise ValueError("empty edge list without an 'n' header")
        n = 1 + max(max(e) for e in edges)
    return GraphSpec(n, frozenset(edges), "edges")


def read_edge_list(path) -> GraphSpec:
    with open(path, encoding="utf-8") as fh:
        return from_edge_list(fh.read())


@dataclass(frozen=True)
class CouplingMonomial:
    """``sign * scale * J**j_power * lam**lambda_power``."""

    sign: int = 1
    j_power: int = 0
    lambda_power: int = 0
    scale: float = 1.0

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        if self.j_power < 0 or self.lambda_power < 0:
            raise ValueError("powers must be nonnegative")
        if not np.isfinite(self.scale) or self.scale == 0:
            raise ValueError("scale must be finite and nonzero")

    @property
    def powers(self) -> Tuple[int, int]:
        return (self.j_power, self.lambda_power)

    @property
    def value(self) -> float:
        return self.sign * self.scale

    def __call__(self, j: float, lam: float) -> float:
        return self.value * j ** self.j_power * lam ** self.lambda_power


@dataclass(frozen=True)
class ParamHamiltonian:
    """``H(J, lam) = sum_t m_t(J, lam) P_t`` with monomial couplings."""

    n_sites: int
    terms: Tuple[Tuple[CouplingMonomial, PauliString], ...] = field(default_factory=tuple)
    graph: Optional[GraphSpec] = None

    def __post_init__(self):
        terms = tuple(self.terms)
        for m, p in terms:
            if p.n_sites != self.n_sites:
                raise ValueError("term size does not match n_sites")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_labels(cls, items: Sequence[Tuple[CouplingMonomial, str]], n_sites: int):
        return cls(n_sites, tuple((m, parse_label(lbl, n_sites)) for m, lbl in items))

    def polynomial_terms(self) -> Dict[Tuple[int, int], Dict[Tuple[int, int], float]]:
        """Map string key -> {(j_pow, lam_pow): coefficient}."""
        out: Dict[Tuple[int, int], Dict[Tuple[int, int], float]] = {}
        for m, p in self.terms:
            poly = out.setdefault(p.key, {})
            poly[m.powers] = poly.get(m.powers, 0.0) + m.value
        return out

    def evaluate(self, j: float, lam: float) -> PauliSum:
        acc: Dict[Tuple[int, int], float] = {}
        for m, p in self.terms:
            acc[p.key] = acc.get(p.key, 0.0) + m(j, lam)
        return PauliSum(self.n_sites, acc, hermitian=True)

    def to_dense(self, j: float, lam: float) -> np.ndarray:
        return self.evaluate(j, lam).to_dense()


def tfim(graph: GraphSpec) -> ParamHamiltonian:
    """``H = -J sum_(i,j) Z_i Z_j + lam sum_i X_i`` on ``graph``."""
    n = graph.n
    terms = []
    zz = CouplingMonomial(sign=-1, j_power=1)
    for i, j in graph.sorted_edges():
        terms.append((zz, PauliString(n, 0, (1 << i) | (1 << j))))
    x = CouplingMonomial(sign=1, lambda_power=1)
    for i in range(n):
        terms.append((x, PauliString(n, 1 << i, 0)))
    return ParamHamiltonian(n, tuple(terms), graph)


def d_lambda(h: ParamHamiltonian) -> PauliSum:
    """Derivative with respect to ``lam`` of a Hamiltonian linear in ``lam``.

    Terms carrying ``J`` keep it at ``J = 1``; pass couplings explicitly
    through :meth:`ParamHamiltonian.evaluate` when that matters.
    """
    acc: Dict[Tuple[int, int], float] = {}
    for m, p in h.terms:
        if m.lambda_power > 1:
            raise ValueError("d_lambda supports Hamiltonians at most linear in lambda")
        if m.lambda_power == 1:
            if m.j_power:
                raise ValueError("d_lambda: mixed J*lambda couplings are not supported")
            acc[p.key] = acc.get(p.key, 0.0) + m.value
    return PauliSum(h.n_sites, acc, hermitian=True)


def two_site_example(delta: float = 1.0) -> ParamHamiltonian:
    """``J zz + delta (xI + Ix) + lam (zI + Iz)`` with ``delta`` a fixed number."""
    const = CouplingMonomial(sign=1 if delta > 0 else -1, scale=abs(delta))
    return ParamHamiltonian.from_labels(
        [
            (CouplingMonomial(j_power=1), "zz"),
            (const, "xI"),
            (const, "Ix"),
            (CouplingMonomial(lambda_power=1), "zI"),
            (CouplingMonomial(lambda_power=1), "Iz"),
        ],
        2,
    )
