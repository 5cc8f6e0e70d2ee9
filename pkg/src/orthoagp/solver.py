"""Numeric evaluation and solution of the variational system ``M alpha = beta``."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .banded import BlockTridiagonalLU, SingularBlockError
from .expansion import (
    LayeredBasis,
    Liouvillian,
    SymbolicHessian,
    StructureConstants,
)
from .models import ParamHamiltonian

__all__ = [
    "SolveOptions",
    "NumericSystem",
    "AgpSolution",
    "SingularHessianError",
    "evaluate",
    "solve",
    "agp_norm",
    "action",
    "ResidualEvaluator",
    "residual_f",
    "sweep",
    "DEFAULT_THRESHOLD",
]

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-10
ILL_CONDITIONED = 1e-14  # reciprocal condition treated as singular
KERNEL_RTOL = 1e-11  # eigenvalues below this times the scale of M count as kernel


class SingularHessianError(np.linalg.LinAlgError):
    """The (thresholded) Hessian has no solution for the given right-hand side."""

    def __init__(self, message: str, block: Optional[int] = None):
        super().__init__(message)
        self.block = block


@dataclass(frozen=True)
class SolveOptions:
    lam: float
    j: float = 1.0
    threshold: float = DEFAULT_THRESHOLD
    solver: str = "banded_lu"

    def __post_init__(self):
        if not (np.isfinite(self.lam) and np.isfinite(self.j)):
            raise ValueError("J and lambda must be finite")
        if not (self.threshold >= 0):
            raise ValueError("threshold must be >= 0")
        if self.solver not in ("banded_lu", "dense_fallback"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass
class NumericSystem:
    """Numeric block-tridiagonal system at one parameter point."""

    offsets: List[int]
    diag: List[np.ndarray]
    upper: List[np.ndarray]
    rhs: np.ndarray
    lam: float = 0.0
    j: float = 1.0

    @property
    def size(self) -> int:
        return self.offsets[-1]

    def to_dense(self) -> np.ndarray:
        n = self.size
        out = np.zeros((n, n))
        o = self.offsets
        for i, d in enumerate(self.diag):
            out[o[i]:o[i + 1], o[i]:o[i + 1]] = d
        for i, u in enumerate(self.upper):
            out[o[i]:o[i + 1], o[i + 1]:o[i + 2]] = u
            out[o[i + 1]:o[i + 2], o[i]:o[i + 1]] = u.T
        return out

    def to_sparse(self) -> sp.csr_matrix:
        nb = len(self.diag)
        blocks = [[None] * nb for _ in range(nb)]
        for i, d in enumerate(self.diag):
            blocks[i][i] = sp.csr_matrix(d)
        for i, u in enumerate(self.upper):
            blocks[i][i + 1] = sp.csr_matrix(u)
            blocks[i + 1][i] = sp.csr_matrix(u.T)
        return sp.bmat(blocks, format="csr")

    def is_zero(self) -> bool:
        return not any(np.any(d) for d in self.diag) and not any(np.any(u) for u in self.upper)


@dataclass
class AgpSolution:
    """Gauge-potential coefficients at one parameter point.

    ``alphas[k]`` multiplies every member of odd orbit ``k`` (unit Pauli
    strings), so the operator is ``sum_k alphas[k] * sum(orbit k)``.
    """

    alphas: np.ndarray
    lam: float
    j: float
    norm_sq: float
    residual_f: Optional[float] = None
    dense_fallback: bool = False
    rcond: float = float("nan")
    warnings: List[str] = field(default_factory=list)
    method: str = "banded"


def _threshold(a: np.ndarray, thr: float) -> np.ndarray:
    if thr > 0:
        a = np.where(np.abs(a) < thr, 0.0, a)
    return a


def evaluate(sh: SymbolicHessian, opts: SolveOptions) -> NumericSystem:
    """Evaluate the polynomial entries, zero entries below the threshold and
    re-symmetrise the diagonal blocks."""
    j, lam = opts.j, opts.lam
    o = sh.offsets
    diag = []
    for i, blk in enumerate(sh.diag):
        n = o[i + 1] - o[i]
        d = np.zeros((n, n))
        for (a, b), mat in blk.items():
            d += mat * (j ** a * lam ** b)
        d = _threshold(d, opts.threshold)
        diag.append(0.5 * (d + d.T))
    upper = []
    for i, blk in enumerate(sh.upper):
        u = np.zeros((o[i + 1] - o[i], o[i + 2] - o[i + 1]))
        for (a, b), mat in blk.items():
            u += mat * (j ** a * lam ** b)
        upper.append(_threshold(u, opts.threshold))
    return NumericSystem(list(o), diag, upper, sh.rhs_vector(j, lam), lam, j)


def _dense_least_norm(ns: NumericSystem, first_bad: Optional[int]):
    m = ns.to_dense()
    b = ns.rhs
    x, _, rank, sv = scipy.linalg.lstsq(m, b, cond=KERNEL_RTOL, lapack_driver="gelsd")
    resid = np.linalg.norm(m @ x - b)
    if resid > 1e-8 * max(np.linalg.norm(b), 1e-300):
        raise SingularHessianError(
            f"Hessian is singular and inconsistent (residual {resid:.3e}); "
            f"first zero pivot in block {first_bad}", first_bad)
    rcond = float(sv[-1] / sv[0]) if sv.size and sv[0] > 0 else 0.0
    return x, rcond, rank


def _matvec(ns: NumericSystem, x: np.ndarray) -> np.ndarray:
    o = ns.offsets
    y = np.zeros_like(x)
    for i, d in enumerate(ns.diag):
        y[o[i]:o[i + 1]] += d @ x[o[i]:o[i + 1]]
    for i, u in enumerate(ns.upper):
        y[o[i]:o[i + 1]] += u @ x[o[i + 1]:o[i + 2]]
        y[o[i + 1]:o[i + 2]] += u.T @ x[o[i]:o[i + 1]]
    return y


def _krylov_least_norm(ns: NumericSystem, rtol: float = 1e-11) -> Optional[np.ndarray]:
    """MINRES from zero stays in the range of a symmetric ``M`` and so
    converges to the minimum-norm solution of a consistent singular system.
    Fast when the kernel is large (e.g. ``lam = 0``)."""
    n = ns.size
    m = ns.to_sparse()
    bnorm = max(float(np.linalg.norm(ns.rhs)), 1e-300)
    x, info = spla.minres(m, ns.rhs, rtol=1e-14, maxiter=max(500, 2 * n))
    if not np.all(np.isfinite(x)):
        return None
    if np.linalg.norm(m @ x - ns.rhs) <= rtol * bnorm:
        return x
    return None


def _kernel_least_norm(ns: NumericSystem, max_iter: int = 200,
                       rtol: float = 1e-11, max_kernel: int = 64) -> Optional[Tuple[np.ndarray, int]]:
    """Minimum-norm solution of a singular positive semidefinite system,
    keeping the banded structure.

    ``M + eps I`` is positive definite and still block tridiagonal. Inverse
    subspace iteration with its factorisation exposes the kernel of ``M``,
    then iterated Tikhonov steps projected onto the orthogonal complement of
    that kernel converge to the minimum-norm solution.

    Returns ``(alpha, kernel_dim)``, or ``None`` if the iteration stalls
    (for instance on a nearly but not exactly singular matrix) or the kernel
    is larger than ``max_kernel``.
    """
    n = ns.size
    scale = max(float(np.abs(d).max()) for d in ns.diag)
    if scale == 0.0:
        return None
    eps = 1e-8 * scale
    try:
        fac = BlockTridiagonalLU([d + eps * np.eye(d.shape[0]) for d in ns.diag], ns.upper)
    except SingularBlockError:
        return None
    rng = np.random.default_rng(12345)
    p = min(n, 8)
    while True:
        q = rng.standard_normal((n, p))
        prev = np.inf
        for _ in range(30):
            q, _ = np.linalg.qr(fac.solve(q))
            mq = np.column_stack([_matvec(ns, q[:, c]) for c in range(p)])
            theta, v = np.linalg.eigh(0.5 * (q.T @ mq + mq.T @ q))
            keep = theta < KERNEL_RTOL * scale
            kern = q @ v[:, keep]
            res = float(np.abs(mq @ v[:, keep]).max()) if keep.any() else 0.0
            if res <= 1e-14 * scale or res >= 0.5 * prev:
                break
            prev = res
        if kern.shape[1] < p or p == n:
            break
        if p >= max_kernel:
            return None
        p = min(n, 2 * p)

    def proj(x):
        return x - kern @ (kern.T @ x) if kern.shape[1] else x

    bnorm = max(float(np.linalg.norm(ns.rhs)), 1e-300)
    x = np.zeros(n)
    r = proj(ns.rhs)
    best = np.inf
    for _ in range(max_iter):
        x = proj(x + fac.solve(r))
        r = ns.rhs - _matvec(ns, x)
        rn = float(np.linalg.norm(r))
        if rn <= 1e-15 * bnorm or rn > 0.5 * best:
            break
        best = rn
    # iterate to stagnation: the residual alone under-reports the error
    # along small nonzero eigenvalues
    if min(rn, best) <= rtol * bnorm:
        return x, kern.shape[1]
    return None


def solve(ns: NumericSystem, opts: Optional[SolveOptions] = None,
          lb: Optional[LayeredBasis] = None) -> AgpSolution:
    """Solve ``M alpha = beta`` for the minimum-norm ``alpha``.

    The banded path eliminates block by block with pivoted LU. If a pivot
    vanishes or the condition estimate exceeds ``1e14`` the system is
    treated as singular and solved for the minimum-norm solution, first on
    the banded structure and, if that stalls, with a dense SVD-based least
    squares solve flagged on the result.

    Raises
    ------
    SingularHessianError
        If the Hessian is identically zero or the system is inconsistent.
    """
    opts = opts or SolveOptions(lam=ns.lam, j=ns.j)
    notes: List[str] = []
    n = ns.size
    if n == 0:
        return AgpSolution(np.zeros(0), ns.lam, ns.j, 0.0)
    if ns.is_zero():
        raise SingularHessianError("Hessian is identically zero after thresholding", 0)
    first_bad = None
    alphas = None
    rcond = float("nan")
    method = "dense"
    if opts.solver == "banded_lu":
        try:
            fac = BlockTridiagonalLU(ns.diag, ns.upper)
            rcond = fac.rcond
            alphas = fac.solve(ns.rhs)
            method = "banded"
            if rcond < ILL_CONDITIONED or not np.all(np.isfinite(alphas)):
                notes.append(f"ill-conditioned block elimination (rcond={rcond:.2e})")
                alphas = None
        except SingularBlockError as exc:
            first_bad = exc.block
            notes.append(f"zero pivot in block {exc.block}")
        if alphas is None:
            found = _kernel_least_norm(ns)
            if found is not None:
                alphas, kdim = found
                method = "banded_kernel"
                notes.append(f"singular Hessian, {kdim}-dimensional kernel projected out")
        if alphas is None:
            alphas = _krylov_least_norm(ns)
            if alphas is not None:
                method = "minres"
                notes.append("singular Hessian, minimum-norm solution by MINRES")
    fallback = False
    if alphas is None:
        alphas, rcond, rank = _dense_least_norm(ns, first_bad)
        method = "dense"
        fallback = opts.solver != "dense_fallback"
        if fallback:
            notes.append("dense least-norm fallback")
        if rank < n:
            notes.append(f"rank-deficient Hessian ({rank}/{n}); least-norm solution")
    if not np.all(np.isfinite(alphas)):
        raise SingularHessianError("non-finite coefficients", first_bad)
    for msg in notes:
        logger.info("lambda=%g: %s", ns.lam, msg)
    norm = agp_norm(alphas, lb) if lb is not None else float("nan")
    return AgpSolution(alphas, ns.lam, ns.j, norm, None, fallback, rcond, notes, method)


def agp_norm(alphas, lb: LayeredBasis) -> float:
    """``Tr[A^2] / 2^N = sum_k m_k alpha_k^2``."""
    if isinstance(alphas, AgpSolution):
        alphas = alphas.alphas
    a = np.asarray(alphas, dtype=float)
    return float(np.dot(np.asarray(lb.odd_mult, dtype=float), a * a))


def action(alphas, sh: SymbolicHessian, j: float, lam: float) -> float:
    """Normalised action ``Tr[G^2] / 2^N`` from the quadratic form."""
    a = np.asarray(alphas, dtype=float)
    m = sh.dense(j, lam)
    return float(a @ m @ a - 2 * sh.rhs_vector(j, lam) @ a + sh.s0)


class ResidualEvaluator:
    """Computes ``F = Tr[K^2] / 2^N`` with ``K = -i[H, G]``.

    ``G`` lives on the even orbits; one more application of ``L`` maps it to
    odd orbits, including ones outside a truncated registry.
    """

    def __init__(self, h: ParamHamiltonian, lb: LayeredBasis, sc: StructureConstants):
        self.lb = lb
        self._c = sc.matrices(lb.n_even, lb.n_odd)
        self._c0 = sc.c0_vector(lb.n_even)
        liou = Liouvillian(h)
        group = lb.group
        odd_index = dict(lb.odd_index)
        odd_mult = list(lb.odd_mult)
        rows: Dict = {}
        for l, key in enumerate(lb.even_keys):
            for r, poly in liou.apply(key).items():
                rep, size = group.canonicalize(r)
                k = odd_index.get(rep)
                if k is None:
                    k = odd_index[rep] = len(odd_mult)
                    odd_mult.append(size)
                ratio = lb.even_mult[l] / odd_mult[k]
                for m, v in poly.items():
                    d = rows.setdefault(m, {})
                    d[(k, l)] = d.get((k, l), 0.0) + ratio * v
        self.n_ext = len(odd_mult)
        self._ext_mult = np.asarray(odd_mult, dtype=float)
        self._back = {}
        for m, d in rows.items():
            if d:
                ks, ls = zip(*d.keys())
                self._back[m] = sp.csr_matrix((list(d.values()), (ks, ls)),
                                              shape=(self.n_ext, lb.n_even))

    def g_coefficients(self, alphas, j: float, lam: float) -> np.ndarray:
        g = self._c0.copy()
        a = np.asarray(alphas, dtype=float)
        for (p, q), mat in self._c.items():
            g += (j ** p * lam ** q) * (mat @ a)
        return g

    def __call__(self, alphas, j: float, lam: float) -> float:
        g = self.g_coefficients(alphas, j, lam)
        k = np.zeros(self.n_ext)
        for (p, q), mat in self._back.items():
            k += (j ** p * lam ** q) * (mat @ g)
        return float(np.dot(self._ext_mult, k * k))


def residual_f(sol: AgpSolution, lb: LayeredBasis, sc: StructureConstants,
               h: ParamHamiltonian) -> float:
    return ResidualEvaluator(h, lb, sc)(sol.alphas, sol.j, sol.lam)


def sweep(sh: SymbolicHessian, lb: LayeredBasis, lambdas: Sequence[float], j: float = 1.0,
          threshold: float = DEFAULT_THRESHOLD, solver: str = "banded_lu",
          residual: Optional[ResidualEvaluator] = None) -> List[dict]:
    """Independent solves over a strictly increasing grid.

    Each row holds ``lam``, ``j``, ``alphas``, ``norm_sq``, ``residual_f``,
    ``dense_fallback`` and ``error`` (``None`` on success).
    """
    grid = np.asarray(lambdas, dtype=float)
    if grid.ndim != 1 or not np.all(np.isfinite(grid)):
        raise ValueError("lambda grid must be a finite 1-d sequence")
    if grid.size > 1 and np.any(np.diff(grid) <= 0):
        raise ValueError("lambda grid must be strictly increasing")
    rows = []
    for lam in grid:
        opts = SolveOptions(lam=float(lam), j=j, threshold=threshold, solver=solver)
        row = {"lam": float(lam), "j": j, "alphas": np.full(lb.n_odd, np.nan),
               "norm_sq": np.nan, "residual_f": np.nan, "dense_fallback": False, "error": None}
        try:
            sol = solve(evaluate(sh, opts), opts, lb)
            row.update(alphas=sol.alphas, norm_sq=sol.norm_sq, dense_fallback=sol.dense_fallback)
            if residual is not None:
                row["residual_f"] = residual(sol.alphas, j, float(lam))
        except (SingularHessianError, np.linalg.LinAlgError) as exc:
            row["error"] = str(exc)
        rows.append(row)
    return rows
