"""scikit-learn style front end: ``fit`` builds the expansion, ``predict``
solves for the gauge-potential coefficients on a grid of ``lam`` values."""

from __future__ import annotations

import numbers
from typing import Optional, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .expansion import DEFAULT_MAX_ORBITS, TruncationPolicy, assemble, expand
from .models import GraphSpec, ParamHamiltonian, tfim
from .solver import (
    DEFAULT_THRESHOLD,
    ResidualEvaluator,
    SolveOptions,
    agp_norm,
    evaluate,
    solve,
)
from .symmetry import SymmetryGroup, TrivialGroup, builtin_group

__all__ = ["AGPEstimator"]

_NAMED = ("ring", "chain", "complete")


class AGPEstimator(BaseEstimator):
    """Variational adiabatic gauge potential of a spin Hamiltonian.

    Parameters
    ----------
    j : float, default=1.0
        Ising coupling used when evaluating the Hessian.
    symmetry : {"auto", "trivial"} or SymmetryGroup, default="auto"
        ``"auto"`` uses the built-in group of a ring, chain or complete
        graph and the trivial group otherwise.
    max_odd_layers : int or None, default=None
        Keep at most this many odd layers (``None`` keeps all).
    max_weight : int or None, default=None
        Drop gauge-potential strings acting on more sites.
    threshold : float, default=1e-10
        Hessian entries smaller in magnitude are set to zero.
    solver : {"banded_lu", "dense_fallback"}, default="banded_lu"
    max_orbits : int, default=2_000_000
        Resource cap on the number of odd orbits.

    Attributes
    ----------
    hamiltonian_ : ParamHamiltonian
    group_ : SymmetryGroup
    basis_ : LayeredBasis
    constants_ : StructureConstants
    hessian_ : SymbolicHessian
    report_ : ExpansionReport
    n_agp_ : int
        Number of gauge-potential orbits (length of each predicted row).
    labels_ : list of str
        Representative label of each orbit, in column order.

    Examples
    --------
    >>> from orthoagp import AGPEstimator, ring
    >>> est = AGPEstimator().fit(ring(6))
    >>> est.predict([0.5]).shape
    (1, 5)
    """

    def __init__(self, j: float = 1.0, symmetry: Union[str, SymmetryGroup] = "auto",
                 max_odd_layers: Optional[int] = None, max_weight: Optional[int] = None,
                 threshold: float = DEFAULT_THRESHOLD, solver: str = "banded_lu",
                 max_orbits: int = DEFAULT_MAX_ORBITS):
        self.j = j
        self.symmetry = symmetry
        self.max_odd_layers = max_odd_layers
        self.max_weight = max_weight
        self.threshold = threshold
        self.solver = solver
        self.max_orbits = max_orbits

    def _validate_params(self) -> None:
        if not isinstance(self.j, numbers.Real) or not np.isfinite(self.j):
            raise ValueError(f"j must be a finite real number, got {self.j!r}")
        for name in ("max_odd_layers", "max_weight"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, numbers.Integral) or v < 1):
                raise ValueError(f"{name} must be a positive integer or None, got {v!r}")
        if not isinstance(self.threshold, numbers.Real) or not self.threshold >= 0 \
                or not np.isfinite(self.threshold):
            raise ValueError(f"threshold must be finite and >= 0, got {self.threshold!r}")
        if self.solver not in ("banded_lu", "dense_fallback"):
            raise ValueError(f"solver must be 'banded_lu' or 'dense_fallback', got {self.solver!r}")
        if not isinstance(self.max_orbits, numbers.Integral) or self.max_orbits < 1:
            raise ValueError("max_orbits must be a positive integer")
        if not (isinstance(self.symmetry, SymmetryGroup) or self.symmetry in ("auto", "trivial")):
            raise ValueError("symmetry must be 'auto', 'trivial' or a SymmetryGroup")

    def _resolve_group(self, h: ParamHamiltonian) -> SymmetryGroup:
        if isinstance(self.symmetry, SymmetryGroup):
            if self.symmetry.n != h.n_sites:
                raise ValueError("symmetry group size does not match the model")
            return self.symmetry
        if self.symmetry == "auto" and h.graph is not None and h.graph.name in _NAMED:
            return builtin_group(h.graph.name, h.n_sites)
        return TrivialGroup(h.n_sites)

    def fit(self, X, y=None):
        """Expand and assemble the variational system.

        Parameters
        ----------
        X : GraphSpec or ParamHamiltonian
            A graph is turned into the transverse-field Ising model on it.
        y : ignored

        Returns
        -------
        self
        """
        self._validate_params()
        if isinstance(X, GraphSpec):
            h = tfim(X)
        elif isinstance(X, ParamHamiltonian):
            h = X
        else:
            raise TypeError(f"fit expects a GraphSpec or ParamHamiltonian, got {type(X).__name__}")
        group = self._resolve_group(h)
        policy = TruncationPolicy(self.max_odd_layers, self.max_weight)
        lb, sc, report = expand(h, group=group, policy=policy, max_orbits=self.max_orbits)
        self.hamiltonian_ = h
        self.group_ = group
        self.basis_ = lb
        self.constants_ = sc
        self.report_ = report
        self.hessian_ = assemble(lb, sc)
        self.n_agp_ = lb.n_agp
        self.labels_ = lb.odd_labels()
        self._residual = None
        return self

    def _grid(self, lambdas) -> np.ndarray:
        lam = check_array(np.atleast_1d(np.asarray(lambdas, dtype=float)), ensure_2d=False,
                          dtype=float, ensure_min_samples=0)
        if lam.ndim != 1:
            raise ValueError("lambdas must be a scalar or a 1-d sequence")
        return lam

    def solve_point(self, lam: float):
        """Full :class:`AgpSolution` at a single ``lam``."""
        check_is_fitted(self, "hessian_")
        opts = SolveOptions(lam=float(lam), j=float(self.j), threshold=float(self.threshold),
                            solver=self.solver)
        return solve(evaluate(self.hessian_, opts), opts, self.basis_)

    def predict(self, lambdas) -> np.ndarray:
        """Coefficients ``alpha``, one row per ``lam`` and one column per orbit."""
        lam = self._grid(lambdas)
        return np.vstack([self.solve_point(l).alphas for l in lam]) if lam.size else \
            np.zeros((0, self.n_agp_))

    def norm(self, lambdas) -> np.ndarray:
        """Normalised norm ``Tr[A^2] / 2^N`` at each ``lam``."""
        lam = self._grid(lambdas)
        return np.array([agp_norm(a, self.basis_) for a in self.predict(lam)])

    def residual(self, lambdas) -> np.ndarray:
        """Residual ``F`` at each ``lam``; zero up to rounding for an exact basis."""
        check_is_fitted(self, "hessian_")
        if self._residual is None:
            self._residual = ResidualEvaluator(self.hamiltonian_, self.basis_, self.constants_)
        lam = self._grid(lambdas)
        return np.array([self._residual(a, float(self.j), float(l))
                         for l, a in zip(lam, self.predict(lam))])
