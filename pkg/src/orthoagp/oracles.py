"""Closed-form and combinatorial reference values.

Ring coefficients and norms, operator counts for graph families, and the
collective-spin (LMG) decomposition of the complete-graph Ising model.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Dict, List, Tuple

import numpy as np

from .ed import exact_agp_matrix

__all__ = [
    "ring_alpha",
    "ring_alphas",
    "ring_alpha_thermo",
    "ring_norm",
    "ring_norm_thermo",
    "ring_norm_critical",
    "count_ring",
    "count_chain",
    "count_max",
    "count_complete",
    "count_complete_formula",
    "CompleteCount",
    "lmg_degeneracy",
    "lmg_spins",
    "lmg_hamiltonian",
    "lmg_sector_norm",
    "lmg_sector_norms",
    "lmg_total_norm",
    "lmg_spectrum_mismatch",
    "spin_matrices",
    "KAPPA",
    "measure_kappa",
]

_CONVENTIONS = ("model", "appendix")


def _check_j(j: float) -> int:
    if j not in (1, -1):
        raise ValueError("closed forms are tabulated for J = +1 or -1")
    return int(j)


def _ratio(lam: float, n: int, k: int) -> float:
    """``lam**(k-1) * (lam**(2(n-k)) - 1) / (lam**(2n) - 1)``, stable for any lam >= 0."""
    if lam == 0.0:
        return 1.0 if k == 1 else 0.0
    if lam == 1.0:
        return (n - k) / n
    lx = 2.0 * np.log(lam)
    if abs(lx) < 1e-12:
        return (n - k) / n
    if lam < 1.0:
        # (1 - x^(n-k)) / (1 - x^n)
        r = np.expm1((n - k) * lx) / np.expm1(n * lx)
        return float(lam ** (k - 1) * r)
    # divide numerator and denominator by x^n
    r = -np.expm1(-(n - k) * lx) / -np.expm1(-n * lx)
    return float(np.exp((k - 1) * np.log(lam) - k * lx) * r)


def ring_alpha(n: int, j: float, lam: float, k: int, convention: str = "model") -> float:
    """Coefficient of the ``k``-th operator orbit (``y x^(k-1) z``) on a ring.

    Parameters
    ----------
    n : int
        Ring size, ``n >= 3``.
    j : {+1, -1}
    lam : float
        Transverse field, ``lam >= 0``.
    k : int
        ``1 <= k <= n - 1``.
    convention : {"model", "appendix"}
        ``"model"`` matches ``H = -J sum ZZ + lam sum X`` as built by
        :func:`orthoagp.models.tfim`, giving ``(-J)**k`` as sign factor.
        ``"appendix"`` uses the opposite sign of ``J`` (sign ``J**k``).

    Returns
    -------
    float
        ``s * lam**(k-1)/8 * (lam**(2(n-k)) - 1) / (lam**(2n) - 1)``, with the
        limit ``(n - k) / (8 n)`` at ``lam = 1``.
    """
    if n < 3:
        raise ValueError("ring needs n >= 3")
    if not 1 <= k <= n - 1:
        raise ValueError(f"k must lie in 1..{n - 1}, got {k}")
    if lam < 0 or not np.isfinite(lam):
        raise ValueError("lam must be finite and >= 0")
    if convention not in _CONVENTIONS:
        raise ValueError(f"convention must be one of {_CONVENTIONS}")
    jj = _check_j(j)
    sign = (-jj) ** k if convention == "model" else jj ** k
    return sign * _ratio(float(lam), n, k) / 8.0


def ring_alphas(n: int, j: float, lam: float, convention: str = "model") -> np.ndarray:
    return np.array([ring_alpha(n, j, lam, k, convention) for k in range(1, n)])


def ring_alpha_thermo(lam: float, k: int, j: float = 1.0, convention: str = "model") -> float:
    """Infinite-ring limit of :func:`ring_alpha`.

    ``s lam**(k-1)/8`` for ``lam < 1`` and ``s lam**(-k-1)/8`` for
    ``lam > 1``; ``lam = 1`` is rejected.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if lam < 0 or not np.isfinite(lam):
        raise ValueError("lam must be finite and >= 0")
    if lam == 1.0:
        raise ValueError("the thermodynamic limit is singular at lam = 1")
    jj = _check_j(j)
    sign = (-jj) ** k if convention == "model" else jj ** k
    mag = lam ** (k - 1) if lam < 1 else lam ** (-k - 1)
    return sign * mag / 8.0


def ring_norm(n: int, lam: float) -> float:
    """Finite-ring norm ``Tr[A^2]/2^N = 2 n sum_k alpha_k**2`` (orbit size ``2n``)."""
    a = ring_alphas(n, 1, lam)
    return float(2 * n * np.dot(a, a))


def ring_norm_thermo(lam: float) -> float:
    """Norm per site of the infinite ring."""
    if lam < 0 or not np.isfinite(lam):
        raise ValueError("lam must be finite and >= 0")
    if lam == 1.0:
        raise ValueError("the norm per site diverges at lam = 1")
    if lam < 1:
        return 1.0 / (32.0 * (1.0 - lam ** 2))
    return 1.0 / (32.0 * lam ** 2 * (lam ** 2 - 1.0))


def ring_norm_critical(n: int) -> Fraction:
    """Exact ring norm at ``lam = 1``: ``(n-1)(2n-1)/192``."""
    if n < 3:
        raise ValueError("ring needs n >= 3")
    return Fraction((n - 1) * (2 * n - 1), 192)


def count_ring(n: int) -> int:
    if n < 3:
        raise ValueError("ring needs n >= 3")
    return n - 1


def count_chain(n: int) -> int:
    if n < 2:
        raise ValueError("chain needs n >= 2")
    return n * (n - 1) // 2


def count_max(n: int) -> int:
    """Largest possible number of gauge-potential operators, ``2^(n-1)(2^(n-1)-1)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2 ** (n - 1) * (2 ** (n - 1) - 1)


def count_complete_formula(n: int) -> Fraction:
    """The closed form printed for the complete graph, evaluated literally.

    It is negative for small even ``n`` and is kept only for comparison.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if n % 2 == 0:
        return n * (n + 1) * (Fraction(n + 1, 2) - Fraction(2 * n + 1, 3))
    return n * (n - 1) * (Fraction(n + 1, 2) - Fraction(2 * n - 1, 3))


@dataclass(frozen=True)
class CompleteCount:
    value: int
    formula: Fraction
    discrepancy: bool


def count_complete(n: int) -> CompleteCount:
    """Orbit count for the complete graph by enumeration under the full
    symmetric group, alongside the printed formula."""
    from .expansion import count_basis
    from .models import complete
    from .symmetry import SymmetricGroup

    value = count_basis(complete(n), SymmetricGroup(n))
    formula = count_complete_formula(n)
    return CompleteCount(value, formula, Fraction(value) != formula)


# ---------------------------------------------------------------- LMG sectors

def spin_matrices(s: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(S_x, S_y, S_z)`` for spin ``s`` in the ``|s, m>`` basis, ``m`` descending."""
    two_s = int(round(2 * s))
    if two_s < 0 or abs(two_s - 2 * s) > 1e-12:
        raise ValueError(f"invalid spin {s}")
    m = s - np.arange(two_s + 1)
    sp = np.zeros((two_s + 1, two_s + 1))
    for i in range(1, two_s + 1):
        sp[i - 1, i] = np.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    sx = 0.5 * (sp + sp.T)
    sy = -0.5j * (sp - sp.T)
    return sx, sy, np.diag(m)


def lmg_spins(n_total: int) -> List[float]:
    """Allowed total spins ``n/2, n/2 - 1, ...`` down to 0 or 1/2."""
    if n_total < 1:
        raise ValueError("n_total must be >= 1")
    return [n_total / 2 - i for i in range(n_total // 2 + 1)]


def _check_sector(n_total: int, s: float) -> None:
    if not any(abs(s - t) < 1e-12 for t in lmg_spins(n_total)):
        raise ValueError(f"spin {s} is not a sector of {n_total} spins-1/2")


def lmg_degeneracy(n_total: int, s: float) -> int:
    """Number of copies of total spin ``s``: ``C(n, n/2-s) - C(n, n/2-s-1)``."""
    _check_sector(n_total, s)
    a = int(round(n_total / 2 - s))
    return comb(n_total, a) - (comb(n_total, a - 1) if a >= 1 else 0)


def lmg_hamiltonian(n_total: int, s: float, lam: float, j: float = 1.0):
    """Sector Hamiltonian and its ``lam`` derivative.

    With ``S = sum sigma / 2`` one has ``sum_(i<k) Z_i Z_k = 2 S_z^2 - n/2``,
    so the complete-graph model ``-J sum ZZ + lam sum X`` restricted to total
    spin ``s`` is ``-2 J S_z^2 + J n / 2 + 2 lam S_x``.
    """
    _check_sector(n_total, s)
    sx, _, sz = spin_matrices(s)
    h = -2.0 * j * sz @ sz + 0.5 * j * n_total * np.eye(sz.shape[0]) + 2.0 * lam * sx
    return h, 2.0 * sx


def lmg_sector_norm(n_total: int, s: float, lam: float, j: float = 1.0,
                    degeneracy_tol: float = 1e-10) -> float:
    """Contribution of one copy of spin ``s``: ``Tr_s[A_s^2] / 2^n``."""
    h, dh = lmg_hamiltonian(n_total, s, lam, j)
    if h.shape[0] == 1:
        return 0.0
    a, _ = exact_agp_matrix(h, dh, degeneracy_tol)
    return float(np.real(np.vdot(a, a))) / 2.0 ** n_total


def lmg_sector_norms(n_total: int, lam: float, j: float = 1.0) -> Dict[float, float]:
    return {s: lmg_sector_norm(n_total, s, lam, j) for s in lmg_spins(n_total)}


def lmg_total_norm(n_total: int, lam: float, j: float = 1.0) -> float:
    """``sum_s C(n, s) * lmg_sector_norm(n, s, lam)``."""
    return float(sum(lmg_degeneracy(n_total, s) * v
                     for s, v in lmg_sector_norms(n_total, lam, j).items()))


def lmg_spectrum_mismatch(n_total: int, lam: float, j: float = 1.0) -> float:
    """Largest deviation between the sorted complete-graph spectrum and the
    direct sum of sector spectra (each repeated by its degeneracy)."""
    from .models import complete, tfim

    full = np.linalg.eigvalsh(tfim(complete(n_total)).to_dense(j, lam))
    parts = []
    for s in lmg_spins(n_total):
        h, _ = lmg_hamiltonian(n_total, s, lam, j)
        ev = np.linalg.eigvalsh(h)
        parts.extend(list(ev) * lmg_degeneracy(n_total, s))
    return float(np.abs(np.sort(full) - np.sort(parts)).max())


# ---------------------------------------------------------------- calibration

KAPPA = 1.0
"""Ratio between unit-Pauli ``alpha`` and :func:`ring_alpha`, measured by
:func:`measure_kappa` and frozen here."""


def measure_kappa(lam: float = 0.5, j: float = 1.0) -> float:
    """Measure the calibration constant on a 4-site ring.

    The exact AGP from dense diagonalisation is projected onto the string
    ``y z I I``; the ratio to the closed form is returned.
    """
    from .ed import exact_agp, project
    from .models import ring, tfim
    from .pauli import parse_label

    a = exact_agp(tfim(ring(4)), lam, j)
    measured = project(a, parse_label("yzII", 4).key, 4)
    return measured / ring_alpha(4, j, lam, 1)
