"""Exact diagonalisation ground truth and counterdiabatic dynamics.

Everything here works with dense ``2^N x 2^N`` matrices and is meant for
small systems (``N <= 12`` by default).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .expansion import LayeredBasis, SymbolicHessian
from .models import ParamHamiltonian
from .pauli import PauliSum, to_dense
from .symmetry import TrivialGroup

__all__ = [
    "DenseOperator",
    "DegeneracyWarning",
    "Schedule",
    "CDResult",
    "AgpTable",
    "ED_MAX_SITES",
    "dense_h",
    "dense_dh",
    "exact_agp",
    "exact_agp_matrix",
    "g_operator",
    "action_s",
    "condition_f",
    "project",
    "project_basis",
    "orbit_stack",
    "solver_agp_table",
    "exact_agp_table",
    "simulate_cd",
    "ground_state",
]

logger = logging.getLogger(__name__)

ED_MAX_SITES = 12


@dataclass
class DegeneracyWarning:
    """A degenerate cluster on which ``dH/dlam`` is not a multiple of identity.

    The couplings inside such a cluster are dropped from the exact AGP, so
    the result depends on how the degeneracy is resolved.
    """

    energy: float
    size: int
    spread: float


@dataclass
class DenseOperator:
    matrix: np.ndarray
    n_sites: int
    hermitian: bool = True
    warnings: List[DegeneracyWarning] = field(default_factory=list)

    def __post_init__(self):
        dim = 1 << self.n_sites
        if self.matrix.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix, got {self.matrix.shape}")

    def hermiticity_error(self) -> float:
        return float(np.abs(self.matrix - self.matrix.conj().T).max())

    def norm_sq(self) -> float:
        """``Tr[A^2] / 2^N`` (for Hermitian ``A``)."""
        m = self.matrix
        return float(np.real(np.vdot(m, m))) / m.shape[0]


def _check_size(n: int, max_sites: int) -> None:
    if n > max_sites:
        raise ValueError(f"{n} sites exceeds the dense cap of {max_sites}")


def dense_h(h: ParamHamiltonian, lam: float, j: float = 1.0) -> np.ndarray:
    return h.to_dense(j, lam)


def dense_dh(h: ParamHamiltonian, lam: float, j: float = 1.0) -> np.ndarray:
    """Dense ``dH/dlam`` at ``(j, lam)`` for arbitrary monomial couplings."""
    acc = {}
    for m, p in h.terms:
        if m.lambda_power == 0:
            continue
        c = m.value * m.lambda_power * j ** m.j_power * lam ** (m.lambda_power - 1)
        acc[p.key] = acc.get(p.key, 0.0) + c
    return PauliSum(h.n_sites, acc).to_dense()


def _clusters(evals: np.ndarray, tol: float) -> List[np.ndarray]:
    """Group sorted eigenvalues into runs whose neighbours differ by < tol."""
    breaks = np.nonzero(np.diff(evals) >= tol)[0] + 1
    return np.split(np.arange(evals.size), breaks)


def exact_agp_matrix(hm: np.ndarray, dhm: np.ndarray, degeneracy_tol: float = 1e-10):
    """Exact AGP of a dense Hamiltonian.

    ``<m|A|n> = i <m|dH|n> / (E_n - E_m)`` in the eigenbasis, zero inside
    degenerate clusters. The result is independent of the basis chosen
    inside each cluster.

    Returns
    -------
    a : ndarray
    warnings : list of DegeneracyWarning
    """
    if degeneracy_tol <= 0:
        raise ValueError("degeneracy_tol must be positive")
    evals, vecs = np.linalg.eigh(hm)
    d = vecs.conj().T @ dhm @ vecs
    gap = evals[None, :] - evals[:, None]
    same = np.zeros(gap.shape, dtype=bool)
    warns = []
    for idx in _clusters(evals, degeneracy_tol):
        same[np.ix_(idx, idx)] = True
        if idx.size > 1:
            sub = d[np.ix_(idx, idx)]
            ev = np.linalg.eigvalsh(0.5 * (sub + sub.conj().T))
            spread = float(ev[-1] - ev[0])
            if spread > 1e-10:
                warns.append(DegeneracyWarning(float(evals[idx[0]]), int(idx.size), spread))
    with np.errstate(divide="ignore", invalid="ignore"):
        a_eig = np.where(same, 0.0, 1j * d / np.where(same, 1.0, gap))
    a = vecs @ a_eig @ vecs.conj().T
    return 0.5 * (a + a.conj().T), warns


def exact_agp(h: ParamHamiltonian, lam: float, j: float = 1.0,
              degeneracy_tol: float = 1e-10, max_sites: int = ED_MAX_SITES) -> DenseOperator:
    """Exact adiabatic gauge potential of ``h`` at ``(j, lam)``."""
    _check_size(h.n_sites, max_sites)
    a, warns = exact_agp_matrix(dense_h(h, lam, j), dense_dh(h, lam, j), degeneracy_tol)
    for w in warns:
        logger.warning("degenerate cluster at E=%.6g (size %d) is split by dH (spread %.3g)",
                       w.energy, w.size, w.spread)
    return DenseOperator(a, h.n_sites, True, warns)


def _mat(a) -> np.ndarray:
    return a.matrix if isinstance(a, DenseOperator) else np.asarray(a)


def g_operator(h: ParamHamiltonian, lam: float, a, j: float = 1.0) -> DenseOperator:
    """``G = dH/dlam - i [H, A]``."""
    hm = dense_h(h, lam, j)
    am = _mat(a)
    g = dense_dh(h, lam, j) - 1j * (hm @ am - am @ hm)
    return DenseOperator(g, h.n_sites)


def action_s(h: ParamHamiltonian, lam: float, a, j: float = 1.0,
             normalized: bool = False) -> float:
    """``S = Tr[G^2]``; divided by ``2^N`` when ``normalized``."""
    g = g_operator(h, lam, a, j).matrix
    s = float(np.real(np.vdot(g, g)))
    return s / g.shape[0] if normalized else s


def condition_f(h: ParamHamiltonian, lam: float, a, j: float = 1.0) -> float:
    """``F = Tr[K^dag K] / 2^N`` with ``K = [H, G]``."""
    hm = dense_h(h, lam, j)
    g = g_operator(h, lam, a, j).matrix
    k = hm @ g - g @ hm
    return float(np.real(np.vdot(k, k))) / k.shape[0]


def project(a, key, n_sites: int) -> float:
    """Coefficient of the Hermitian string ``key`` in ``a``: ``Re Tr[A P] / 2^N``."""
    m = _mat(a)
    p = to_dense(key, n_sites)
    return float(np.real(np.sum(m * p.T))) / m.shape[0]


def project_basis(a, lb: LayeredBasis) -> np.ndarray:
    """Projection of ``a`` onto every odd orbit representative of ``lb``."""
    return np.array([project(a, k, lb.n_sites) for k in lb.odd_keys])


def orbit_stack(lb: LayeredBasis) -> np.ndarray:
    """Imaginary parts of the orbit-summed odd operators, shape ``(n_odd, D, D)``.

    Every odd operator of a real Hamiltonian carries an odd number of ``y``
    factors and is purely imaginary, so a real array suffices.
    """
    n = lb.n_sites
    dim = 1 << n
    out = np.zeros((lb.n_odd, dim, dim))
    group = lb.group
    for i, key in enumerate(lb.odd_keys):
        members = [key] if isinstance(group, TrivialGroup) else set(group.images(key))
        acc = np.zeros((dim, dim), dtype=complex)
        for m in members:
            acc += to_dense(m, n)
        if np.abs(acc.real).max() > 1e-12:
            raise ValueError(f"odd operator {lb.odd_labels()[i]} is not purely imaginary")
        out[i] = acc.imag
    return out


@dataclass(frozen=True)
class Schedule:
    """Ramp ``lam(t)`` over ``0 <= t <= duration``.

    ``sin_squared``: ``lam_i + (lam_f - lam_i) sin^2(pi t / 2T)``, so the
    ramp starts and ends with zero speed. ``linear``: constant speed.
    """

    lambda_initial: float
    lambda_final: float
    duration: float
    shape: str = "sin_squared"

    def __post_init__(self):
        if not (self.duration > 0 and np.isfinite(self.duration)):
            raise ValueError("duration must be positive and finite")
        if self.shape not in ("sin_squared", "linear"):
            raise ValueError(f"unknown schedule shape {self.shape!r}")

    def lam(self, t):
        s = np.asarray(t, dtype=float) / self.duration
        d = self.lambda_final - self.lambda_initial
        if self.shape == "linear":
            return self.lambda_initial + d * s
        return self.lambda_initial + d * np.sin(0.5 * np.pi * s) ** 2

    def lam_dot(self, t):
        s = np.asarray(t, dtype=float) / self.duration
        d = self.lambda_final - self.lambda_initial
        if self.shape == "linear":
            return np.full_like(s, d / self.duration)
        return d * 0.5 * np.pi / self.duration * np.sin(np.pi * s)


class AgpTable:
    """Cubic-spline table of a dense AGP over a ``lam`` interval.

    Parameters
    ----------
    lambdas : increasing grid
    mats : array ``(len(lambdas), D, D)`` of the imaginary parts of ``A``
    interp_error : float
        Largest entrywise deviation found when checking grid midpoints.
    """

    def __init__(self, lambdas: np.ndarray, mats: np.ndarray, interp_error: float = float("nan")):
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.dim = mats.shape[1]
        self._spline = CubicSpline(self.lambdas, mats.reshape(len(self.lambdas), -1), axis=0)
        self.interp_error = interp_error

    def __call__(self, lam: float) -> np.ndarray:
        return 1j * self._spline(lam).reshape(self.dim, self.dim)


def _build_table(fn: Callable[[float], np.ndarray], lo: float, hi: float, n_grid: int,
                 check: bool = True) -> AgpTable:
    if n_grid < 4:
        raise ValueError("n_grid must be >= 4")
    grid = np.linspace(lo, hi, n_grid)
    mats = np.stack([fn(l) for l in grid])
    table = AgpTable(grid, mats)
    if check:
        mids = 0.5 * (grid[1:] + grid[:-1])
        pick = mids[:: max(1, len(mids) // 8)]
        err = max(float(np.abs(table(m).imag - fn(m)).max()) for m in pick)
        table.interp_error = err
    return table


def solver_agp_table(sh: SymbolicHessian, lb: LayeredBasis, lo: float, hi: float,
                     j: float = 1.0, threshold: float = 1e-10, n_grid: int = 401,
                     stack: Optional[np.ndarray] = None) -> AgpTable:
    """Tabulate the variational AGP ``sum_k alpha_k(lam) O_k`` on a grid."""
    from .solver import SolveOptions, evaluate, solve

    if stack is None:
        stack = orbit_stack(lb)
    flat = stack.reshape(stack.shape[0], -1)
    dim = stack.shape[1]

    def fn(lam):
        opts = SolveOptions(lam=float(lam), j=j, threshold=threshold)
        alphas = solve(evaluate(sh, opts), opts).alphas
        return (alphas @ flat).reshape(dim, dim)

    return _build_table(fn, lo, hi, n_grid)


def exact_agp_table(h: ParamHamiltonian, lo: float, hi: float, j: float = 1.0,
                    n_grid: int = 401, degeneracy_tol: float = 1e-10) -> AgpTable:
    def fn(lam):
        a, _ = exact_agp_matrix(dense_h(h, lam, j), dense_dh(h, lam, j), degeneracy_tol)
        return a.imag

    return _build_table(fn, lo, hi, n_grid)


def ground_state(hm: np.ndarray, nearby: Sequence[np.ndarray] = (),
                 degeneracy_tol: float = 1e-8) -> np.ndarray:
    """Lowest eigenvector of ``hm``.

    A degenerate ground space is resolved by projecting onto it the ground
    state of the first matrix in ``nearby`` whose own ground state is
    separated from the next level by more than ``1e-6`` of its spectral
    scale. This picks the branch that continues adiabatically into the
    direction of those matrices.
    """
    evals, vecs = np.linalg.eigh(hm)
    deg = int(np.sum(evals - evals[0] < degeneracy_tol))
    if deg == 1:
        return vecs[:, 0].astype(complex)
    sub = vecs[:, :deg]
    for other in nearby:
        e2, v2 = np.linalg.eigh(other)
        if e2[1] - e2[0] > 1e-6 * max(1.0, float(np.abs(e2).max())):
            psi = sub @ (sub.conj().T @ v2[:, 0])
            nrm = np.linalg.norm(psi)
            if nrm > 1e-3:
                return (psi / nrm).astype(complex)
    logger.warning("degenerate ground space could not be resolved; using an arbitrary member")
    return vecs[:, 0].astype(complex)


@dataclass
class CDResult:
    t: np.ndarray
    lam: np.ndarray
    fidelity: np.ndarray
    state_norm: np.ndarray
    interp_error: float = float("nan")

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity[-1])

    @property
    def norm_drift(self) -> float:
        return float(np.abs(self.state_norm - 1.0).max())


def simulate_cd(h: ParamHamiltonian, schedule: Schedule,
                agp: Optional[Callable[[float], np.ndarray]] = None,
                state0: Optional[np.ndarray] = None, j: float = 1.0,
                n_samples: int = 201, rtol: float = 1e-10, atol: float = 1e-12,
                method: str = "DOP853", degeneracy_tol: float = 1e-8,
                max_sites: int = ED_MAX_SITES) -> CDResult:
    """Integrate ``i d psi/dt = (H + lam_dot A) psi``.

    Parameters
    ----------
    agp : callable ``lam -> (D, D)`` array, optional
        Gauge potential, e.g. an :class:`AgpTable`. ``None`` runs the bare
        Hamiltonian.
    state0 : array, optional
        Must be an eigenstate of ``H(lambda_initial)``; defaults to the
        ground state.

    Returns
    -------
    CDResult
        Fidelity with the tracked instantaneous level on a uniform time grid.
    """
    _check_size(h.n_sites, max_sites)
    lam_i = schedule.lambda_initial
    h0 = dense_h(h, lam_i, j)
    if state0 is None:
        d = (schedule.lambda_final - lam_i) or 1.0
        nearby = [dense_h(h, lam_i + f * d, j) for f in (1e-3, 1e-2, 0.05, 0.1, 0.2, 0.5)]
        psi0 = ground_state(h0, nearby, degeneracy_tol)
    else:
        psi0 = np.asarray(state0, dtype=complex)
        psi0 = psi0 / np.linalg.norm(psi0)
        e = np.real(np.vdot(psi0, h0 @ psi0))
        resid = np.linalg.norm(h0 @ psi0 - e * psi0)
        if resid > 1e-8 * max(1.0, np.abs(h0).max()):
            raise ValueError("state0 is not an eigenstate of H(lambda_initial)")

    # split H into its monomial parts so H(lam) is cheap to rebuild
    parts = {}
    for m, p in h.terms:
        parts.setdefault(m.powers, {})
        acc = parts[m.powers]
        acc[p.key] = acc.get(p.key, 0.0) + m.value
    dense_parts = [((a, b), PauliSum(h.n_sites, t).to_dense()) for (a, b), t in parts.items()]

    def hmat(lam):
        out = np.zeros_like(h0)
        for (a, b), mat in dense_parts:
            out += (j ** a * lam ** b) * mat
        return out

    def rhs(t, psi):
        lam = float(schedule.lam(t))
        hc = hmat(lam)
        ld = float(schedule.lam_dot(t))
        if agp is not None and ld != 0.0:
            hc = hc + ld * agp(lam)
        return -1j * (hc @ psi)

    times = np.linspace(0.0, schedule.duration, n_samples)
    sol = solve_ivp(rhs, (0.0, schedule.duration), psi0, method=method, t_eval=times,
                    rtol=rtol, atol=atol)
    if not sol.success:
        raise RuntimeError(f"integration failed: {sol.message}")
    states = sol.y.T
    lams = schedule.lam(times)

    fid = np.empty(n_samples)
    tracked = psi0
    for i, (lam, psi) in enumerate(zip(lams, states)):
        evals, vecs = np.linalg.eigh(hmat(float(lam)))
        weight = np.abs(vecs.conj().T @ tracked) ** 2
        target = evals[int(np.argmax(weight))]
        cluster = vecs[:, np.abs(evals - target) < degeneracy_tol]
        fid[i] = float(np.sum(np.abs(cluster.conj().T @ psi) ** 2) / np.vdot(psi, psi).real)
        # follow the level by continuity: the tracked vector is carried into
        # the new cluster, so near-degenerate partners are never swapped in
        nxt = cluster @ (cluster.conj().T @ tracked)
        tracked = nxt / np.linalg.norm(nxt)
    norms = np.linalg.norm(states, axis=1)
    err = getattr(agp, "interp_error", float("nan")) if agp is not None else float("nan")
    return CDResult(times, lams, fid, norms, err)
