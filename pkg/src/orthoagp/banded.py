"""Block-tridiagonal linear solves (block Thomas with pivoted block LU)."""

from __future__ import annotations

import warnings
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

__all__ = ["SingularBlockError", "BlockTridiagonalLU", "block_thomas", "block_rcond"]


class SingularBlockError(np.linalg.LinAlgError):
    """A Schur-complement block has an exactly zero pivot."""

    def __init__(self, block: int):
        super().__init__(f"zero pivot in diagonal block {block}")
        self.block = block


def block_rcond(lu: np.ndarray, anorm: float) -> float:
    if anorm == 0.0:
        return 0.0
    rcond, info = lapack.dgecon(lu, anorm, norm="1")
    return float(rcond) if info == 0 else 0.0


class BlockTridiagonalLU:
    """Block LU factorisation of a block-tridiagonal matrix.

    Parameters
    ----------
    diag : sequence of (n_i, n_i) arrays
    upper : sequence of (n_i, n_{i+1}) arrays
    lower : sequence of (n_{i+1}, n_i) arrays, optional
        Defaults to the transposes of ``upper`` (symmetric systems).

    Attributes
    ----------
    rcond : float
        Smallest reciprocal 1-norm condition estimate over the Schur
        complements.

    Raises
    ------
    SingularBlockError
        If a Schur complement has an exactly zero pivot.
    """

    def __init__(self, diag: Sequence[np.ndarray], upper: Sequence[np.ndarray],
                 lower: Optional[Sequence[np.ndarray]] = None):
        self.upper = list(upper)
        self.lower = [u.T for u in upper] if lower is None else list(lower)
        self.sizes = [d.shape[0] for d in diag]
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes)]).astype(int)
        self.factors = []
        # w[i] = S_i^{-1} U_i, reused by every solve
        self._w: List[np.ndarray] = []
        rcond = np.inf
        for i, d in enumerate(diag):
            schur = np.array(d, dtype=float)
            if i > 0:
                schur -= self.lower[i - 1] @ self._w[i - 1]
            anorm = float(np.abs(schur).sum(axis=0).max()) if schur.size else 0.0
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                lu, piv = lu_factor(schur, check_finite=False, overwrite_a=True)
            if np.any(np.diag(lu) == 0.0):
                raise SingularBlockError(i)
            rcond = min(rcond, block_rcond(lu, anorm))
            self.factors.append((lu, piv))
            if i < len(self.upper):
                self._w.append(lu_solve((lu, piv), self.upper[i], check_finite=False))
        self.rcond = float(rcond)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for a stacked right-hand side of shape ``(n,)`` or ``(n, k)``."""
        rhs = np.asarray(rhs, dtype=float)
        o = self.offsets
        nb = len(self.factors)
        ys = []
        for i in range(nb):
            y = rhs[o[i]:o[i + 1]]
            if i > 0:
                y = y - self.lower[i - 1] @ ys[i - 1]
            ys.append(lu_solve(self.factors[i], y, check_finite=False))
        x = np.empty_like(rhs)
        x[o[nb - 1]:o[nb]] = ys[-1]
        for i in range(nb - 2, -1, -1):
            x[o[i]:o[i + 1]] = ys[i] - self._w[i] @ x[o[i + 1]:o[i + 2]]
        return x


def block_thomas(diag: Sequence[np.ndarray], upper: Sequence[np.ndarray],
                 rhs: Sequence[np.ndarray],
                 lower: Optional[Sequence[np.ndarray]] = None,
                 ) -> Tuple[List[np.ndarray], float]:
    """Solve a block-tridiagonal system given per-block right-hand sides.

    Returns
    -------
    x : list of (n_i,) arrays
    rcond : float
        Smallest reciprocal condition estimate over the eliminated blocks.
    """
    fac = BlockTridiagonalLU(diag, upper, lower)
    x = fac.solve(np.concatenate([np.asarray(r, dtype=float) for r in rhs]))
    o = fac.offsets
    return [x[o[i]:o[i + 1]] for i in range(len(o) - 1)], fac.rcond
