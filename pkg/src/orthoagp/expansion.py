"""Orthogonal commutator expansion of the adiabatic gauge potential.

Starting from ``dH/dlam`` the superoperator ``L(O) = -i[H, O]`` is applied
repeatedly. Operators reached after an odd number of applications span the
gauge potential, the even ones span ``G = dH/dlam + L(A)``. Every operator is
kept as a Hermitian Pauli string, so all structure constants are real.

With a symmetry group only orbit representatives are propagated. For an odd
orbit ``K`` and an even orbit ``L`` the stored constant is

    c[L, K] = sum over members Q of K of the coefficient of rep(L) in L(Q)

and the action is ``sum_L m_L (c0[L] + sum_K c[L, K] alpha_K)**2`` with
``m_L`` the orbit size. Only representatives are commuted: if ``D[L, K]``
collects the coefficients of every member of ``L`` in ``L(rep K)`` then
``c[L, K] = (m_K / m_L) D[L, K]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .models import GraphSpec, ParamHamiltonian, d_lambda, tfim
from .pauli import PauliString, PauliSum, liouvillian_sign, to_label, weight
from .symmetry import (
    AsymmetricInputError,
    OperatorOrbit,
    SymmetryGroup,
    TrivialGroup,
    builtin_group,
    group_sum,
)

__all__ = [
    "Poly",
    "TruncationPolicy",
    "LayeredBasis",
    "StructureConstants",
    "ExpansionReport",
    "SymbolicHessian",
    "ResourceCapError",
    "EmptyBasisError",
    "expand",
    "count_basis",
    "assemble",
    "max_count_formula",
    "Liouvillian",
]

logger = logging.getLogger(__name__)

Key = Tuple[int, int]
Mono = Tuple[int, int]  # (power of J, power of lambda)
Poly = Dict[Mono, float]

DEFAULT_MAX_ORBITS = 2_000_000


class ResourceCapError(RuntimeError):
    """The odd registry outgrew the configured cap."""

    def __init__(self, message: str, report: "ExpansionReport"):
        super().__init__(message)
        self.report = report


class EmptyBasisError(ValueError):
    """The truncation policy removed every first-layer operator."""


def eval_poly(poly: Poly, j: float, lam: float) -> float:
    return sum(v * j ** a * lam ** b for (a, b), v in poly.items())


@dataclass(frozen=True)
class TruncationPolicy:
    """Limits on the expansion; all ``None`` means exact.

    ``max_odd_layers`` keeps the first that many odd layers (their even
    neighbours are always included, so the action is exact on the retained
    basis). ``max_operator_weight`` and ``allow`` filter odd operators only.
    """

    max_odd_layers: Optional[int] = None
    max_operator_weight: Optional[int] = None
    allow: Optional[Callable[[Key], bool]] = None

    def __post_init__(self):
        if self.max_odd_layers is not None and self.max_odd_layers < 1:
            raise ValueError("max_odd_layers must be >= 1")
        if self.max_operator_weight is not None and self.max_operator_weight < 1:
            raise ValueError("max_operator_weight must be >= 1")

    @property
    def exact(self) -> bool:
        return (self.max_odd_layers is None and self.max_operator_weight is None
                and self.allow is None)

    def permits(self, key: Key) -> bool:
        if self.max_operator_weight is not None and weight(key) > self.max_operator_weight:
            return False
        if self.allow is not None and not self.allow(key):
            return False
        return True


class Liouvillian:
    """Symbolic ``L(O) = -i[H, O]`` on Hermitian strings.

    Results are ``{string key: {monomial: coefficient}}``; each anticommuting
    Hamiltonian term contributes ``2 * s * coupling``.
    """

    def __init__(self, h: ParamHamiltonian):
        self.n_sites = h.n_sites
        poly_terms = h.polynomial_terms()
        self.terms: List[Tuple[Key, Tuple[Tuple[Mono, float], ...]]] = [
            (k, tuple((m, v) for m, v in sorted(p.items()) if v != 0))
            for k, p in sorted(poly_terms.items())
        ]
        self.terms = [t for t in self.terms if t[1]]
        by_site: List[List[int]] = [[] for _ in range(self.n_sites)]
        for idx, (k, _) in enumerate(self.terms):
            supp = k[0] | k[1]
            for s in range(self.n_sites):
                if supp >> s & 1:
                    by_site[s].append(idx)
        self._by_site = by_site
        self._use_index = len(self.terms) > 16

    def _candidates(self, key: Key):
        if not self._use_index:
            return range(len(self.terms))
        supp = key[0] | key[1]
        seen = set()
        s = 0
        while supp:
            if supp & 1:
                seen.update(self._by_site[s])
            supp >>= 1
            s += 1
        return sorted(seen)

    def apply(self, key: Key) -> Dict[Key, Poly]:
        out: Dict[Key, Poly] = {}
        terms = self.terms
        for idx in self._candidates(key):
            tkey, poly = terms[idx]
            s, r = liouvillian_sign(tkey, key)
            if not s:
                continue
            acc = out.get(r)
            if acc is None:
                acc = out[r] = {}
            for m, v in poly:
                acc[m] = acc.get(m, 0.0) + 2.0 * s * v
        return _prune(out)

    def apply_numeric(self, key: Key, j: float, lam: float) -> Dict[Key, float]:
        return {r: eval_poly(p, j, lam) for r, p in self.apply(key).items()}


def _prune(out: Dict[Key, Poly]) -> Dict[Key, Poly]:
    clean = {}
    for r, poly in out.items():
        p = {m: v for m, v in poly.items() if abs(v) > 1e-13}
        if p:
            clean[r] = p
    return clean


@dataclass
class LayeredBasis:
    """Odd (gauge potential) and even (action) orbit registries.

    Orbits are ordered by layer, then by representative; ``*_offsets[i]`` is
    the first index of the ``i``-th layer of that parity and the last entry
    is the registry length.
    """

    n_sites: int
    group: SymmetryGroup
    odd_keys: List[Key] = field(default_factory=list)
    odd_mult: List[int] = field(default_factory=list)
    odd_layer: List[int] = field(default_factory=list)
    even_keys: List[Key] = field(default_factory=list)
    even_mult: List[int] = field(default_factory=list)
    even_layer: List[int] = field(default_factory=list)
    odd_offsets: List[int] = field(default_factory=lambda: [0])
    even_offsets: List[int] = field(default_factory=lambda: [0])

    def __post_init__(self):
        self.odd_index = {k: i for i, k in enumerate(self.odd_keys)}
        self.even_index = {k: i for i, k in enumerate(self.even_keys)}

    @property
    def n_odd(self) -> int:
        return len(self.odd_keys)

    @property
    def n_even(self) -> int:
        return len(self.even_keys)

    @property
    def n_agp(self) -> int:
        return len(self.odd_keys)

    def _add(self, parity: str, keys: List[Key], mults: List[int], layer: int) -> None:
        reg = getattr(self, f"{parity}_keys")
        idx = getattr(self, f"{parity}_index")
        for k, m in zip(keys, mults):
            idx[k] = len(reg)
            reg.append(k)
            getattr(self, f"{parity}_mult").append(m)
            getattr(self, f"{parity}_layer").append(layer)
        getattr(self, f"{parity}_offsets").append(len(reg))

    def odd_labels(self) -> List[str]:
        return [to_label(k, self.n_sites) for k in self.odd_keys]

    def even_labels(self) -> List[str]:
        return [to_label(k, self.n_sites) for k in self.even_keys]

    def odd_orbits(self) -> List[OperatorOrbit]:
        return [OperatorOrbit(PauliString(self.n_sites, *k), m)
                for k, m in zip(self.odd_keys, self.odd_mult)]

    def layers(self) -> Dict[int, List[str]]:
        """Layer number -> representative labels (both parities)."""
        out: Dict[int, List[str]] = {}
        for keys, layers in ((self.even_keys, self.even_layer), (self.odd_keys, self.odd_layer)):
            for k, l in zip(keys, layers):
                out.setdefault(l, []).append(to_label(k, self.n_sites))
        return dict(sorted(out.items()))

    def odd_block_slices(self) -> List[slice]:
        o = self.odd_offsets
        return [slice(o[i], o[i + 1]) for i in range(len(o) - 1)]


@dataclass
class StructureConstants:
    """Sparse constants ``c[l, k]`` (odd ``k`` -> even ``l``) and ``c0[l]``."""

    entries: Dict[Tuple[int, int], Poly] = field(default_factory=dict)
    c0: Dict[int, float] = field(default_factory=dict)

    def monomials(self) -> List[Mono]:
        return sorted({m for p in self.entries.values() for m in p})

    def matrices(self, n_even: int, n_odd: int) -> Dict[Mono, sp.csr_matrix]:
        rows: Dict[Mono, List[int]] = {}
        cols: Dict[Mono, List[int]] = {}
        vals: Dict[Mono, List[float]] = {}
        for (k, l), poly in self.entries.items():
            for m, v in poly.items():
                rows.setdefault(m, []).append(l)
                cols.setdefault(m, []).append(k)
                vals.setdefault(m, []).append(v)
        return {m: sp.csr_matrix((vals[m], (rows[m], cols[m])), shape=(n_even, n_odd))
                for m in sorted(vals)}

    def c0_vector(self, n_even: int) -> np.ndarray:
        v = np.zeros(n_even)
        for l, c in self.c0.items():
            v[l] = c
        return v


@dataclass
class ExpansionReport:
    n_agp: int
    n_even: int
    odd_layer_sizes: List[int]
    even_layer_sizes: List[int]
    truncated: bool
    group_order: int

    def as_dict(self) -> dict:
        return {
            "n_agp": self.n_agp,
            "n_even": self.n_even,
            "odd_layer_sizes": list(self.odd_layer_sizes),
            "even_layer_sizes": list(self.even_layer_sizes),
            "truncated": self.truncated,
            "group_order": self.group_order,
        }


def _report(lb: LayeredBasis, truncated: bool) -> ExpansionReport:
    odd = [lb.odd_offsets[i + 1] - lb.odd_offsets[i] for i in range(len(lb.odd_offsets) - 1)]
    even = [lb.even_offsets[i + 1] - lb.even_offsets[i] for i in range(len(lb.even_offsets) - 1)]
    order = lb.group.order if not lb.group.kind == "complete" else -1
    return ExpansionReport(lb.n_odd, lb.n_even, odd, even, truncated, order)


def expand(h: ParamHamiltonian, dh: Optional[PauliSum] = None,
           group: Optional[SymmetryGroup] = None,
           policy: Optional[TruncationPolicy] = None,
           max_orbits: int = DEFAULT_MAX_ORBITS,
           ) -> Tuple[LayeredBasis, StructureConstants, ExpansionReport]:
    """Build the layered operator basis and the structure constants.

    Parameters
    ----------
    h : ParamHamiltonian
        Hamiltonian with monomial couplings.
    dh : PauliSum, optional
        ``dH/dlam``; computed with :func:`d_lambda` when omitted.
    group : SymmetryGroup, optional
        Site symmetry of ``h`` and ``dh``; trivial by default.
    policy : TruncationPolicy, optional
        Truncation limits; exact by default.
    max_orbits : int
        Abort with :class:`ResourceCapError` beyond this many odd orbits.
    """
    n = h.n_sites
    group = group or TrivialGroup(n)
    policy = policy or TruncationPolicy()
    if group.n != n:
        raise ValueError(f"group acts on {group.n} sites, Hamiltonian has {n}")
    if dh is None:
        dh = d_lambda(h)
    if dh.n_sites != n:
        raise ValueError("dh size does not match the Hamiltonian")
    try:
        grouped = group_sum(dh, group)
    except AsymmetricInputError as exc:
        raise AsymmetricInputError(f"dH/dlam is not symmetric under the group: {exc}") from None
    if not isinstance(group, TrivialGroup):
        by_mono: Dict[Mono, Dict[Key, float]] = {}
        for key, poly in h.polynomial_terms().items():
            for m, v in poly.items():
                by_mono.setdefault(m, {})[key] = v
        for m, terms in sorted(by_mono.items()):
            try:
                group_sum(PauliSum(n, terms), group)
            except AsymmetricInputError as exc:
                raise AsymmetricInputError(
                    f"H is not symmetric under the group (coupling J^{m[0]} lam^{m[1]}): {exc}"
                ) from None

    liou = Liouvillian(h)
    lb = LayeredBasis(n, group)
    sc = StructureConstants()
    lb._add("even", [o.representative.key for o, _ in grouped],
            [o.multiplicity for o, _ in grouped], 0)
    for i, (_, c) in enumerate(grouped):
        sc.c0[i] = c

    frontier = list(lb.even_keys)
    layer = 0
    truncated = False
    while frontier:
        if layer % 2 == 0:
            # even -> next odd layer
            if policy.max_odd_layers is not None and len(lb.odd_offsets) - 1 >= policy.max_odd_layers:
                truncated = _would_grow(liou, group, lb, frontier, policy)
                break
            new: Dict[Key, int] = {}
            excluded = False
            for key in frontier:
                for r in liou.apply(key):
                    rep, size = group.canonicalize(r)
                    if rep in lb.odd_index or rep in new:
                        continue
                    if not policy.permits(rep):
                        excluded = True
                        continue
                    new[rep] = size
            truncated = truncated or excluded
            if not new:
                if layer == 0 and excluded:
                    raise EmptyBasisError("truncation policy removed every first-layer operator")
                break
            keys = sorted(new)
            lb._add("odd", keys, [new[k] for k in keys], layer + 1)
            if lb.n_odd > max_orbits:
                raise ResourceCapError(
                    f"odd registry exceeded {max_orbits} orbits at layer {layer + 1}",
                    _report(lb, True))
            frontier = keys
        else:
            # odd -> even, recording structure constants
            new = {}
            raw: List[Tuple[int, Key, Poly]] = []
            for key in frontier:
                k = lb.odd_index[key]
                for r, poly in liou.apply(key).items():
                    rep, size = group.canonicalize(r)
                    if rep not in lb.even_index and rep not in new:
                        new[rep] = size
                    raw.append((k, rep, poly))
            keys = sorted(new)
            if keys:
                lb._add("even", keys, [new[k] for k in keys], layer + 1)
            for k, rep, poly in raw:
                l = lb.even_index[rep]
                ratio = lb.odd_mult[k] / lb.even_mult[l]
                acc = sc.entries.setdefault((k, l), {})
                for m, v in poly.items():
                    acc[m] = acc.get(m, 0.0) + ratio * v
            frontier = keys
        layer += 1
    sc.entries = {kl: p for kl, p in ((kl, {m: v for m, v in p.items() if abs(v) > 1e-13})
                                      for kl, p in sc.entries.items()) if p}
    report = _report(lb, truncated)
    logger.debug("expansion finished: %s", report)
    return lb, sc, report


def _would_grow(liou, group, lb, frontier, policy) -> bool:
    for key in frontier:
        for r in liou.apply(key):
            rep, _ = group.canonicalize(r)
            if rep not in lb.odd_index and policy.permits(rep):
                return True
    return False


def count_basis(graph: GraphSpec, group: Optional[SymmetryGroup] = None,
                max_orbits: int = DEFAULT_MAX_ORBITS) -> int:
    """Number of odd orbits needed for the exact gauge potential of the TFIM."""
    if group is None:
        group = builtin_group(graph.name, graph.n) if graph.name in (
            "ring", "chain", "complete") else TrivialGroup(graph.n)
    lb, _, _ = expand(tfim(graph), group=group, max_orbits=max_orbits)
    return lb.n_agp


def max_count_formula(n: int) -> int:
    """Upper bound ``2**(n-1) * (2**(n-1) - 1)`` on the TFIM orbit count."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2 ** (n - 1) * (2 ** (n - 1) - 1)


def _mono_mul(a: Mono, b: Mono) -> Mono:
    return (a[0] + b[0], a[1] + b[1])


@dataclass
class SymbolicHessian:
    """Block-tridiagonal ``M`` and right-hand side ``beta`` as polynomials.

    ``diag[i]`` and ``upper[i]`` map monomials to dense blocks; ``upper[i]``
    couples odd layer ``i`` to layer ``i + 1``. ``s0`` is the constant part
    ``sum_L m_L c0_L**2`` of the normalised action.
    """

    offsets: List[int]
    diag: List[Dict[Mono, np.ndarray]]
    upper: List[Dict[Mono, np.ndarray]]
    rhs: Dict[Mono, np.ndarray]
    s0: float

    @property
    def size(self) -> int:
        return self.offsets[-1]

    @property
    def n_blocks(self) -> int:
        return len(self.offsets) - 1

    def block_sizes(self) -> List[int]:
        return [self.offsets[i + 1] - self.offsets[i] for i in range(self.n_blocks)]

    def dense(self, j: float, lam: float) -> np.ndarray:
        """Full matrix at a parameter point, mainly for inspection."""
        n = self.size
        out = np.zeros((n, n))
        o = self.offsets
        for i, blk in enumerate(self.diag):
            out[o[i]:o[i + 1], o[i]:o[i + 1]] = _eval_block(blk, j, lam, o[i + 1] - o[i])
        for i, blk in enumerate(self.upper):
            u = _eval_block(blk, j, lam, None, (o[i + 1] - o[i], o[i + 2] - o[i + 1]))
            out[o[i]:o[i + 1], o[i + 1]:o[i + 2]] = u
            out[o[i + 1]:o[i + 2], o[i]:o[i + 1]] = u.T
        return out

    def rhs_vector(self, j: float, lam: float) -> np.ndarray:
        v = np.zeros(self.size)
        for (a, b), vec in self.rhs.items():
            v += vec * (j ** a * lam ** b)
        return v


def _eval_block(blk: Dict[Mono, np.ndarray], j: float, lam: float,
                n: Optional[int], shape: Optional[Tuple[int, int]] = None) -> np.ndarray:
    out = np.zeros(shape if shape is not None else (n, n))
    for (a, b), mat in blk.items():
        out += mat * (j ** a * lam ** b)
    return out


def assemble(lb: LayeredBasis, sc: StructureConstants) -> SymbolicHessian:
    """Form ``M = sum_L m_L c[L, :]^T c[L, :]`` and ``beta`` symbolically."""
    n_odd, n_even = lb.n_odd, lb.n_even
    cmats = sc.matrices(n_even, n_odd)
    w = sp.diags(np.asarray(lb.even_mult, dtype=float))
    c0 = sc.c0_vector(n_even)
    full: Dict[Mono, sp.csr_matrix] = {}
    monos = sorted(cmats)
    for a_i, a in enumerate(monos):
        wa = (w @ cmats[a]).tocsr()
        for b in monos[a_i:]:
            prod = (cmats[b].T @ wa).tocsr() if a != b else (cmats[a].T @ wa).tocsr()
            key = _mono_mul(a, b)
            term = prod if a == b else prod + prod.T
            full[key] = full[key] + term if key in full else term
    rhs = {m: -np.asarray(cmats[m].T @ (np.asarray(lb.even_mult) * c0)).ravel() for m in monos}
    s0 = float(np.dot(np.asarray(lb.even_mult, dtype=float), c0 ** 2))

    offsets = list(lb.odd_offsets)
    nb = len(offsets) - 1
    diag: List[Dict[Mono, np.ndarray]] = [dict() for _ in range(nb)]
    upper: List[Dict[Mono, np.ndarray]] = [dict() for _ in range(max(nb - 1, 0))]
    block_of = np.zeros(n_odd, dtype=int)
    for i in range(nb):
        block_of[offsets[i]:offsets[i + 1]] = i
    for m, mat in full.items():
        coo = mat.tocoo()
        if coo.nnz:
            bi, bj = block_of[coo.row], block_of[coo.col]
            if np.any(np.abs(bi - bj) > 1):
                raise AssertionError("Hessian support is not block tridiagonal")
        csr = mat.tocsr()
        for i in range(nb):
            s = slice(offsets[i], offsets[i + 1])
            d = csr[s, s].toarray()
            if np.any(d):
                diag[i][m] = d
            if i + 1 < nb:
                t = slice(offsets[i + 1], offsets[i + 2])
                u = csr[s, t].toarray()
                if np.any(u):
                    upper[i][m] = u
    return SymbolicHessian(offsets, diag, upper, rhs, s0)
