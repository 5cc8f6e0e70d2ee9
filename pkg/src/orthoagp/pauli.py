"""Pauli strings in binary symplectic form.

A string on ``n`` sites is stored as two integers ``(x, z)``; bit ``i`` of
``x`` (``z``) marks an X (Z) factor on site ``i``. Both bits set is Y, both
clear is the identity. The Hermitian string for ``(x, z)`` is

    P(x, z) = i^{|x & z|} X^x Z^z

so that every site factor is one of I, X, Y, Z with no external phase.
Site 0 is the leftmost character of a text label.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Optional, Tuple

import numpy as np

__all__ = [
    "PauliString",
    "PauliTerm",
    "PauliSum",
    "parse_label",
    "to_label",
    "multiply",
    "commutator_strings",
    "commutator_sum",
    "inner_product",
    "anticommutes",
    "string_phase_product",
    "liouvillian_sign",
    "weight",
    "count_y",
    "to_dense",
]

_LETTERS = {"i": (0, 0), "x": (1, 0), "y": (1, 1), "z": (0, 1)}
_CHARS = {(0, 0): "I", (1, 0): "x", (1, 1): "y", (0, 1): "z"}

# i**k for k mod 4
_IPOW = (1, 1j, -1, -1j)


_popcount = int.bit_count


@dataclass(frozen=True, slots=True)
class PauliString:
    """A Hermitian N-site Pauli string.

    Parameters
    ----------
    n_sites : int
        Number of sites.
    x_mask, z_mask : int
        Symplectic bit masks, site 0 least significant.
    """

    n_sites: int
    x_mask: int = 0
    z_mask: int = 0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")
        full = (1 << self.n_sites) - 1
        if self.x_mask < 0 or self.z_mask < 0 or (self.x_mask | self.z_mask) & ~full:
            raise ValueError("mask bits beyond n_sites")

    @property
    def key(self) -> Tuple[int, int]:
        return (self.x_mask, self.z_mask)

    @property
    def label(self) -> str:
        return to_label(self.key, self.n_sites)

    @property
    def weight(self) -> int:
        return weight(self.key)

    def __str__(self) -> str:
        return self.label

    @classmethod
    def identity(cls, n_sites: int) -> "PauliString":
        return cls(n_sites, 0, 0)


@dataclass(frozen=True, slots=True)
class PauliTerm:
    string: PauliString
    coeff: float

    def __post_init__(self):
        if not np.isfinite(self.coeff):
            raise ValueError("coefficient must be finite")
        if self.coeff == 0:
            raise ValueError("zero-coefficient terms are not stored")


def parse_label(label: str, n_sites: int) -> PauliString:
    """Parse a label such as ``"xzIy"`` (case-insensitive) into a string."""
    if len(label) != n_sites:
        raise ValueError(f"label {label!r} has length {len(label)}, expected {n_sites}")
    x = z = 0
    for site, ch in enumerate(label.lower()):
        try:
            bx, bz = _LETTERS[ch]
        except KeyError:
            raise ValueError(f"invalid Pauli character {ch!r} in {label!r}") from None
        x |= bx << site
        z |= bz << site
    return PauliString(n_sites, x, z)


def to_label(key: Tuple[int, int], n_sites: int) -> str:
    x, z = key
    return "".join(_CHARS[((x >> i) & 1, (z >> i) & 1)] for i in range(n_sites))


def weight(key: Tuple[int, int]) -> int:
    return _popcount(key[0] | key[1])


def count_y(key: Tuple[int, int]) -> int:
    return _popcount(key[0] & key[1])


def anticommutes(p: Tuple[int, int], q: Tuple[int, int]) -> bool:
    """Symplectic test: ``True`` iff the two strings anticommute."""
    return bool(_popcount((p[0] & q[1]) ^ (p[1] & q[0])) & 1)


def string_phase_product(p: Tuple[int, int], q: Tuple[int, int]) -> Tuple[int, Tuple[int, int]]:
    """Return ``(e, r)`` with ``P(p) P(q) = i**e P(r)`` and ``e`` in 0..3."""
    px, pz = p
    qx, qz = q
    rx, rz = px ^ qx, pz ^ qz
    e = (_popcount(px & pz) + _popcount(qx & qz) - _popcount(rx & rz)
         + 2 * _popcount(pz & qx)) & 3
    return e, (rx, rz)


def liouvillian_sign(p: Tuple[int, int], q: Tuple[int, int]) -> Tuple[int, Tuple[int, int]]:
    """Return ``(s, r)`` with ``-i[P(p), P(q)] = 2 s P(r)``; ``s = 0`` if they commute."""
    e, r = string_phase_product(p, q)
    if not e & 1:
        return 0, r
    # -i * 2 * i**e = -2 i**(e+1); e odd so i**(e+1) = -1 (e=1) or +1 (e=3)
    return (1 if e == 1 else -1), r


def _check_sizes(p: PauliString, q: PauliString) -> None:
    if p.n_sites != q.n_sites:
        raise ValueError(f"size mismatch: {p.n_sites} vs {q.n_sites} sites")


def multiply(p: PauliString, q: PauliString) -> Tuple[complex, PauliString]:
    """Product ``p q = phase * r`` with ``phase`` in {1, -1, 1j, -1j}."""
    _check_sizes(p, q)
    e, r = string_phase_product(p.key, q.key)
    return _IPOW[e], PauliString(p.n_sites, *r)


def commutator_strings(p: PauliString, q: PauliString) -> Optional[Tuple[float, PauliString, bool]]:
    """Commutator of two strings.

    Returns ``None`` when they commute, otherwise ``(coeff, r, i_times_hermitian)``
    such that ``[p, q] = i * coeff * r`` (the flag is always ``True`` for
    nonzero commutators of Hermitian strings; the ``i`` is never folded into
    ``coeff``).
    """
    _check_sizes(p, q)
    e, r = string_phase_product(p.key, q.key)
    if not e & 1:
        return None
    # [p, q] = 2 i**e r = i * (2 i**(e-1)) r
    coeff = 2.0 if e == 1 else -2.0
    return coeff, PauliString(p.n_sites, *r), True


@dataclass(frozen=True)
class PauliSum:
    """Real linear combination of Hermitian strings.

    ``hermitian=True`` represents ``sum_k c_k P_k``; ``hermitian=False``
    represents ``i * sum_k c_k P_k`` (an anti-Hermitian operator stored as
    the Hermitian operator it equals after division by ``i``).
    """

    n_sites: int
    terms: Dict[Tuple[int, int], float] = field(default_factory=dict)
    hermitian: bool = True

    def __post_init__(self):
        clean = {k: float(v) for k, v in self.terms.items() if v != 0}
        for v in clean.values():
            if not np.isfinite(v):
                raise ValueError("non-finite coefficient")
        object.__setattr__(self, "terms", clean)

    @classmethod
    def from_labels(cls, items: Dict[str, float] | Iterable[Tuple[str, float]],
                    n_sites: int, hermitian: bool = True) -> "PauliSum":
        pairs = items.items() if isinstance(items, dict) else items
        terms: Dict[Tuple[int, int], float] = {}
        for label, c in pairs:
            k = parse_label(label, n_sites).key
            terms[k] = terms.get(k, 0.0) + c
        return cls(n_sites, terms, hermitian)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        for k, c in self.terms.items():
            yield PauliTerm(PauliString(self.n_sites, *k), c)

    def labels(self) -> Dict[str, float]:
        return {to_label(k, self.n_sites): c for k, c in self.terms.items()}

    def support(self) -> set:
        return {to_label(k, self.n_sites) for k in self.terms}

    def _compatible(self, other: "PauliSum") -> None:
        if self.n_sites != other.n_sites:
            raise ValueError(f"size mismatch: {self.n_sites} vs {other.n_sites} sites")
        if self.hermitian != other.hermitian:
            raise ValueError("cannot combine Hermitian and i*Hermitian sums")

    def __add__(self, other: "PauliSum") -> "PauliSum":
        self._compatible(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            out[k] = out.get(k, 0.0) + c
        return PauliSum(self.n_sites, out, self.hermitian)

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum(self.n_sites, {k: c * scalar for k, c in self.terms.items()},
                        self.hermitian)

    __rmul__ = __mul__

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def to_dense(self) -> np.ndarray:
        mat = np.zeros((2 ** self.n_sites,) * 2, dtype=complex)
        for k, c in self.terms.items():
            mat += c * to_dense(k, self.n_sites)
        return mat if self.hermitian else 1j * mat


def commutator_sum(h: PauliSum, a: PauliSum) -> PauliSum:
    """Exact commutator ``[h, a]`` of a Hermitian sum with any sum.

    The result toggles the Hermiticity flag, so all stored coefficients stay
    real: ``[h, a]`` is ``i*Hermitian`` for Hermitian ``a`` and Hermitian for
    ``i*Hermitian`` ``a``. Cancellations are removed exactly.
    """
    if h.n_sites != a.n_sites:
        raise ValueError(f"size mismatch: {h.n_sites} vs {a.n_sites} sites")
    if not h.hermitian:
        raise ValueError("left operand must be Hermitian")
    out: Dict[Tuple[int, int], float] = {}
    for pk, pc in h.terms.items():
        for qk, qc in a.terms.items():
            e, r = string_phase_product(pk, qk)
            if not e & 1:
                continue
            # [P, Q] = 2 i**e R = i * s R with s = 2 i**(e-1)
            s = 2.0 if e == 1 else -2.0
            out[r] = out.get(r, 0.0) + s * pc * qc
    if a.hermitian:
        return PauliSum(h.n_sites, out, hermitian=False)
    # [h, i A] = i * (i * sum s ...) = -sum s ...
    return PauliSum(h.n_sites, {k: -v for k, v in out.items()}, hermitian=True)


def inner_product(a: PauliSum, b: PauliSum) -> float:
    """Normalised trace inner product ``Tr[a^dag b] / 2^N`` of two sums."""
    a._compatible(b)
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    return float(sum(c * big.terms.get(k, 0.0) for k, c in small.terms.items()))


def _reverse_bits(v: int, n: int) -> int:
    return int(format(v, f"0{n}b")[::-1], 2) if n else 0


def to_dense(key: Tuple[int, int], n_sites: int) -> np.ndarray:
    """Dense matrix of a Hermitian string, site 0 as the leftmost tensor factor."""
    x = _reverse_bits(key[0], n_sites)
    z = _reverse_bits(key[1], n_sites)
    dim = 1 << n_sites
    cols = np.arange(dim)
    rows = cols ^ x
    zb = cols & z
    parity = np.zeros(dim, dtype=np.int64)
    for bit in range(n_sites):
        parity ^= (zb >> bit) & 1
    vals = _IPOW[_popcount(x & z) & 3] * (1 - 2 * parity)
    mat = np.zeros((dim, dim), dtype=complex)
    mat[rows, cols] = vals
    return mat
