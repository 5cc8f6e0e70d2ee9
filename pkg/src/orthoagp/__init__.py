"""Adiabatic gauge potentials from an orthogonal commutator expansion.

The gauge potential of a parametrised spin Hamiltonian is expanded in the
operators generated by nested commutators of ``H`` with ``dH/dlam``. The
variational problem is assembled symbolically once and solved per ``lam``.
"""

from .estimator import AGPEstimator
from .expansion import (
    EmptyBasisError,
    LayeredBasis,
    ResourceCapError,
    StructureConstants,
    SymbolicHessian,
    TruncationPolicy,
    assemble,
    count_basis,
    expand,
    max_count_formula,
)
from .models import (
    GraphSpec,
    ParamHamiltonian,
    chain,
    chord_chain,
    complete,
    d_lambda,
    from_edge_list,
    read_edge_list,
    ring,
    tfim,
    two_site_example,
)
from .pauli import PauliString, PauliSum, commutator_sum, parse_label, to_label
from .solver import AgpSolution, SingularHessianError, SolveOptions, evaluate, solve, sweep
from .symmetry import AsymmetricInputError, builtin_group

__version__ = "0.1.0"

__all__ = [
    "AGPEstimator",
    "AgpSolution",
    "AsymmetricInputError",
    "EmptyBasisError",
    "GraphSpec",
    "LayeredBasis",
    "ParamHamiltonian",
    "PauliString",
    "PauliSum",
    "ResourceCapError",
    "SingularHessianError",
    "SolveOptions",
    "StructureConstants",
    "SymbolicHessian",
    "TruncationPolicy",
    "assemble",
    "builtin_group",
    "chain",
    "chord_chain",
    "commutator_sum",
    "complete",
    "count_basis",
    "d_lambda",
    "evaluate",
    "expand",
    "from_edge_list",
    "max_count_formula",
    "parse_label",
    "read_edge_list",
    "ring",
    "solve",
    "sweep",
    "tfim",
    "to_label",
    "two_site_example",
]
