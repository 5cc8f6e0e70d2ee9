"""Site-permutation symmetry groups acting on Pauli strings.

Strings are grouped into orbits; each orbit is represented by its smallest
member under the order ``(x_mask, z_mask)`` compared as unsigned integers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from math import factorial
from typing import Dict, Iterator, List, Sequence, Tuple

from .pauli import PauliString, PauliSum

__all__ = [
    "SitePermutation",
    "SymmetryGroup",
    "TrivialGroup",
    "ReflectionGroup",
    "DihedralGroup",
    "SymmetricGroup",
    "PermutationGroup",
    "OperatorOrbit",
    "AsymmetricInputError",
    "builtin_group",
    "group_from_json",
    "canonicalize",
    "group_sum",
]

Key = Tuple[int, int]


class AsymmetricInputError(ValueError):
    """An operator sum is not invariant under the requested group."""


def _reverse(v: int, n: int) -> int:
    return int(format(v, f"0{n}b")[::-1], 2) if v else 0


@dataclass(frozen=True)
class SitePermutation:
    """Bijection on sites: site ``i`` is sent to ``image[i]``."""

    image: Tuple[int, ...]

    def __post_init__(self):
        img = tuple(int(i) for i in self.image)
        if sorted(img) != list(range(len(img))):
            raise ValueError(f"{img} is not a permutation of 0..{len(img) - 1}")
        object.__setattr__(self, "image", img)

    @property
    def n(self) -> int:
        return len(self.image)

    def compose(self, other: "SitePermutation") -> "SitePermutation":
        """``self`` after ``other``."""
        return SitePermutation(tuple(self.image[i] for i in other.image))

    def apply_mask(self, v: int) -> int:
        out = 0
        i = 0
        while v:
            if v & 1:
                out |= 1 << self.image[i]
            v >>= 1
            i += 1
        return out


@dataclass(frozen=True)
class OperatorOrbit:
    representative: PauliString
    multiplicity: int

    @property
    def label(self) -> str:
        return self.representative.label


class SymmetryGroup:
    """Base class. Subclasses implement :meth:`images` or override
    :meth:`canonicalize` directly."""

    kind = "generic"

    def __init__(self, n: int):
        self.n = n

    @property
    def order(self) -> int:
        raise NotImplementedError

    def images(self, key: Key) -> Iterator[Key]:
        raise NotImplementedError

    def canonicalize(self, key: Key) -> Tuple[Key, int]:
        imgs = set(self.images(key))
        return min(imgs), len(imgs)

    def representative(self, key: Key) -> Key:
        return min(self.images(key))

    def orbit(self, key: Key) -> List[Key]:
        return sorted(set(self.images(key)))

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n={self.n}, order={self.order})"


class TrivialGroup(SymmetryGroup):
    kind = "trivial"

    @property
    def order(self) -> int:
        return 1

    def images(self, key: Key) -> Iterator[Key]:
        yield key

    def canonicalize(self, key: Key) -> Tuple[Key, int]:
        return key, 1

    def representative(self, key: Key) -> Key:
        return key


class ReflectionGroup(SymmetryGroup):
    """Mirror ``i -> n-1-i`` (open chain)."""

    kind = "chain"

    @property
    def order(self) -> int:
        return 2 if self.n > 1 else 1

    def images(self, key: Key) -> Iterator[Key]:
        yield key
        yield (_reverse(key[0], self.n), _reverse(key[1], self.n))

    def canonicalize(self, key: Key) -> Tuple[Key, int]:
        other = (_reverse(key[0], self.n), _reverse(key[1], self.n))
        if other == key:
            return key, 1
        return min(key, other), 2


class DihedralGroup(SymmetryGroup):
    """Rotations and mirrors of a ring of ``n`` sites (order ``2n``)."""

    kind = "ring"

    def __init__(self, n: int):
        super().__init__(n)
        self._mask = (1 << n) - 1

    @property
    def order(self) -> int:
        return 2 * self.n

    def _rotations(self, x: int, z: int) -> Iterator[Key]:
        n, m = self.n, self._mask
        for k in range(n):
            yield (((x << k) | (x >> (n - k))) & m, ((z << k) | (z >> (n - k))) & m)

    def images(self, key: Key) -> Iterator[Key]:
        x, z = key
        yield from self._rotations(x, z)
        yield from self._rotations(_reverse(x, self.n), _reverse(z, self.n))


class SymmetricGroup(SymmetryGroup):
    """All site permutations; never enumerated.

    The representative places Y first, then X, then Z, then identities,
    which is the smallest arrangement under the string order.
    """

    kind = "complete"

    @property
    def order(self) -> int:
        return factorial(self.n)

    def _counts(self, key: Key) -> Tuple[int, int, int]:
        x, z = key
        ny = (x & z).bit_count()
        nx = x.bit_count() - ny
        nz = z.bit_count() - ny
        return ny, nx, nz

    def canonicalize(self, key: Key) -> Tuple[Key, int]:
        ny, nx, nz = self._counts(key)
        a = ny + nx
        x = (1 << a) - 1
        z = ((1 << ny) - 1) | (((1 << nz) - 1) << a)
        ni = self.n - a - nz
        size = factorial(self.n) // (factorial(ny) * factorial(nx) * factorial(nz) * factorial(ni))
        return (x, z), size

    def representative(self, key: Key) -> Key:
        return self.canonicalize(key)[0]

    def images(self, key: Key) -> Iterator[Key]:
        # only for small n (tests); enumerates distinct arrangements
        from itertools import permutations

        letters = [((key[0] >> i) & 1, (key[1] >> i) & 1) for i in range(self.n)]
        seen = set()
        for perm in set(permutations(letters)):
            x = sum(b << i for i, (b, _) in enumerate(perm))
            z = sum(b << i for i, (_, b) in enumerate(perm))
            if (x, z) not in seen:
                seen.add((x, z))
                yield (x, z)


class PermutationGroup(SymmetryGroup):
    """Group generated by explicit site permutations (closure cached)."""

    kind = "generators"

    def __init__(self, n: int, generators: Sequence[Sequence[int]], max_order: int = 100_000):
        super().__init__(n)
        self.generators = [g if isinstance(g, SitePermutation) else SitePermutation(tuple(g))
                           for g in generators]
        for g in self.generators:
            if g.n != n:
                raise ValueError(f"generator {g.image} does not act on {n} sites")
        self.max_order = max_order
        self._elements = None
        self._tables = None

    @property
    def elements(self) -> List[SitePermutation]:
        if self._elements is None:
            ident = SitePermutation(tuple(range(self.n)))
            seen = {ident.image: ident}
            frontier = [ident]
            while frontier:
                nxt = []
                for g in frontier:
                    for s in self.generators:
                        h = s.compose(g)
                        if h.image not in seen:
                            seen[h.image] = h
                            nxt.append(h)
                            if len(seen) > self.max_order:
                                raise ValueError("permutation group too large to enumerate")
                frontier = nxt
            self._elements = [seen[k] for k in sorted(seen)]
        return self._elements

    @property
    def order(self) -> int:
        return len(self.elements)

    def _byte_tables(self):
        if self._tables is None:
            nbytes = (self.n + 7) // 8
            tables = []
            for g in self.elements:
                per = []
                for b in range(nbytes):
                    # the last byte may cover fewer than 8 sites
                    width = min(8, self.n - 8 * b)
                    per.append([g.apply_mask(v << (8 * b)) for v in range(1 << width)])
                tables.append(per)
            self._tables = tables
        return self._tables

    def _apply(self, table, v: int) -> int:
        out = 0
        b = 0
        while v:
            out |= table[b][v & 0xFF]
            v >>= 8
            b += 1
        return out

    def images(self, key: Key) -> Iterator[Key]:
        x, z = key
        for table in self._byte_tables():
            yield (self._apply(table, x), self._apply(table, z))


def builtin_group(kind: str, n: int) -> SymmetryGroup:
    """Symmetry group of a named graph family."""
    kind = kind.replace("-", "_")
    if kind == "ring":
        return DihedralGroup(n)
    if kind == "chain":
        return ReflectionGroup(n)
    if kind == "complete":
        return SymmetricGroup(n)
    if kind in ("trivial", "chord_chain", "edges"):
        return TrivialGroup(n)
    raise ValueError(f"unknown graph kind {kind!r}")


def group_from_json(text: str, n: int) -> PermutationGroup:
    """Build a group from a JSON array of permutation images."""
    gens = json.loads(text)
    if not isinstance(gens, list) or not all(isinstance(g, list) for g in gens):
        raise ValueError("generators must be a JSON array of integer arrays")
    return PermutationGroup(n, gens)


def canonicalize(p: PauliString, g: SymmetryGroup) -> Tuple[PauliString, int]:
    if g.n != p.n_sites:
        raise ValueError(f"group acts on {g.n} sites, string has {p.n_sites}")
    rep, size = g.canonicalize(p.key)
    return PauliString(p.n_sites, *rep), size


def group_sum(s: PauliSum, g: SymmetryGroup, force: bool = False,
              tol: float = 1e-12) -> List[Tuple[OperatorOrbit, float]]:
    """Collapse a sum into one coefficient per orbit.

    In exact mode every orbit member must carry the same coefficient (missing
    members count as zero); with ``force=True`` the orbit average is used.
    """
    if g.n != s.n_sites:
        raise ValueError(f"group acts on {g.n} sites, sum has {s.n_sites}")
    buckets: Dict[Key, List[float]] = {}
    sizes: Dict[Key, int] = {}
    for k, c in s.terms.items():
        rep, size = g.canonicalize(k)
        buckets.setdefault(rep, []).append(c)
        sizes[rep] = size
    out = []
    for rep in sorted(buckets):
        vals = buckets[rep]
        size = sizes[rep]
        if force:
            coeff = float(sum(vals)) / size
        else:
            coeff = vals[0]
            scale = max(1.0, max(abs(v) for v in vals))
            if len(vals) != size or any(abs(v - coeff) > tol * scale for v in vals):
                raise AsymmetricInputError(
                    f"coefficients differ within the orbit of "
                    f"{PauliString(s.n_sites, *rep).label} (members present: {len(vals)}/{size})")
        out.append((OperatorOrbit(PauliString(s.n_sites, *rep), size), coeff))
    return out
