import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orthoagp.banded import BlockTridiagonalLU, SingularBlockError, block_thomas
from orthoagp.ed import exact_agp, project_basis
from orthoagp.expansion import TruncationPolicy, assemble, expand
from orthoagp.models import chain, chord_chain, ring, tfim, two_site_example
from orthoagp.solver import (
    NumericSystem,
    ResidualEvaluator,
    SingularHessianError,
    SolveOptions,
    action,
    agp_norm,
    evaluate,
    residual_f,
    solve,
    sweep,
)
from orthoagp.symmetry import TrivialGroup, builtin_group


def _system(graph, group=None, policy=None):
    h = tfim(graph)
    lb, sc, _ = expand(h, group=group, policy=policy)
    return h, lb, sc, assemble(lb, sc)


def _random_block_tridiagonal(rng, sizes):
    diag = [rng.normal(size=(s, s)) + 4 * s * np.eye(s) for s in sizes]
    upper = [rng.normal(size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    lower = [rng.normal(size=(b, a)) for a, b in zip(sizes[:-1], sizes[1:])]
    n = sum(sizes)
    o = np.concatenate([[0], np.cumsum(sizes)])
    dense = np.zeros((n, n))
    for i, d in enumerate(diag):
        dense[o[i]:o[i + 1], o[i]:o[i + 1]] = d
    for i, (u, l) in enumerate(zip(upper, lower)):
        dense[o[i]:o[i + 1], o[i + 1]:o[i + 2]] = u
        dense[o[i + 1]:o[i + 2], o[i]:o[i + 1]] = l
    return diag, upper, lower, dense


@given(st.lists(st.integers(1, 5), min_size=1, max_size=6), st.integers(0, 2 ** 31))
def test_block_lu_matches_dense(sizes, seed):
    rng = np.random.default_rng(seed)
    diag, upper, lower, dense = _random_block_tridiagonal(rng, sizes)
    rhs = rng.normal(size=(dense.shape[0], 2))
    fac = BlockTridiagonalLU(diag, upper, lower)
    np.testing.assert_allclose(fac.solve(rhs), np.linalg.solve(dense, rhs), atol=1e-9)
    assert 0 < fac.rcond <= 1 + 1e-12


def test_block_thomas_per_block_rhs(rng):
    diag, upper, _, dense = _random_block_tridiagonal(rng, [2, 3, 1])
    dense = np.triu(dense) + np.triu(dense, 1).T  # symmetric default lower
    diag = [np.triu(d) + np.triu(d, 1).T for d in diag]
    rhs = [rng.normal(size=s) for s in (2, 3, 1)]
    xs, _ = block_thomas(diag, upper, rhs)
    np.testing.assert_allclose(np.concatenate(xs), np.linalg.solve(dense, np.concatenate(rhs)))


def test_zero_pivot_raises():
    with pytest.raises(SingularBlockError):
        BlockTridiagonalLU([np.zeros((1, 1))], [])


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(lam=float("nan"))
    with pytest.raises(ValueError):
        SolveOptions(lam=0.5, threshold=-1)
    with pytest.raises(ValueError):
        SolveOptions(lam=0.5, solver="qr")


def test_banded_equals_dense_solution():
    h, lb, sc, sh = _system(chain(6), builtin_group("chain", 6))
    for lam in (0.3, 1.0, 1.8):
        opts = SolveOptions(lam=lam)
        ns = evaluate(sh, opts)
        a = solve(ns, opts, lb)
        assert a.method == "banded" and not a.dense_fallback
        b = solve(ns, SolveOptions(lam=lam, solver="dense_fallback"), lb)
        np.testing.assert_allclose(a.alphas, b.alphas, atol=1e-12)
        np.testing.assert_allclose(ns.to_dense() @ a.alphas, ns.rhs, atol=1e-12)


def test_singular_hessian_least_norm_matches_ed():
    """chord_chain(6) has a kernel; the least-norm solution is the projected exact AGP."""
    h, lb, sc, sh = _system(chord_chain(6, [(1, 3)]))
    opts = SolveOptions(lam=0.8)
    sol = solve(evaluate(sh, opts), opts, lb)
    assert sol.method in ("banded_kernel", "minres", "dense")
    ref = project_basis(exact_agp(h, 0.8), lb)
    assert np.abs(sol.alphas - ref).max() < 1e-9


def test_zero_hessian_raises():
    ns = NumericSystem([0, 1], [np.zeros((1, 1))], [], np.zeros(1))
    with pytest.raises(SingularHessianError):
        solve(ns)


def test_threshold_symmetrises_and_zeroes():
    _, lb, _, sh = _system(ring(6), builtin_group("ring", 6))
    ns = evaluate(sh, SolveOptions(lam=0.5, threshold=1e3))
    assert ns.is_zero()
    ns = evaluate(sh, SolveOptions(lam=0.5))
    m = ns.to_dense()
    np.testing.assert_array_equal(m, m.T)
    np.testing.assert_array_equal(ns.to_sparse().toarray(), m)


def test_action_and_residual_consistency():
    h, lb, sc, sh = _system(ring(6), builtin_group("ring", 6))
    opts = SolveOptions(lam=0.6)
    sol = solve(evaluate(sh, opts), opts, lb)
    # exact basis: residual vanishes and the action is minimal
    assert residual_f(sol, lb, sc, h) < 1e-25
    s_min = action(sol.alphas, sh, 1.0, 0.6)
    for _ in range(5):
        trial = sol.alphas + 1e-3 * np.random.default_rng(_).normal(size=lb.n_odd)
        assert action(trial, sh, 1.0, 0.6) > s_min
    assert sol.norm_sq == pytest.approx(agp_norm(sol.alphas, lb))


def test_truncated_single_orbit_is_scalar_least_squares():
    h, lb, sc, sh = _system(ring(8), builtin_group("ring", 8), TruncationPolicy(max_odd_layers=1))
    ns = evaluate(sh, SolveOptions(lam=0.7))
    assert ns.size == 1
    sol = solve(ns)
    assert sol.alphas[0] == pytest.approx(ns.rhs[0] / ns.diag[0][0, 0])


def test_sweep_rows_and_validation():
    h, lb, sc, sh = _system(ring(5), builtin_group("ring", 5))
    rows = sweep(sh, lb, [0.0, 0.5, 1.0], residual=ResidualEvaluator(h, lb, sc))
    assert [r["lam"] for r in rows] == [0.0, 0.5, 1.0]
    assert all(r["error"] is None and r["residual_f"] < 1e-20 for r in rows)
    with pytest.raises(ValueError):
        sweep(sh, lb, [0.5, 0.2])
    with pytest.raises(ValueError):
        sweep(sh, lb, [0.1, float("inf")])


def test_two_site_solution_is_exact():
    h = two_site_example(0.7)
    lb, sc, _ = expand(h)
    sh = assemble(lb, sc)
    for lam in (0.2, 1.1):
        opts = SolveOptions(lam=lam)
        sol = solve(evaluate(sh, opts), opts, lb)
        np.testing.assert_allclose(sol.alphas, project_basis(exact_agp(h, lam), lb), atol=1e-10)


def test_grouped_solution_spreads_to_ungrouped():
    for graph in (ring(6), chain(6)):
        _, lb_g, _, sh_g = _system(graph, builtin_group(graph.name, 6))
        _, lb_t, _, sh_t = _system(graph, TrivialGroup(6))
        opts = SolveOptions(lam=0.9)
        a_g = solve(evaluate(sh_g, opts), opts, lb_g).alphas
        a_t = solve(evaluate(sh_t, opts), opts, lb_t).alphas
        for i, key in enumerate(lb_t.odd_keys):
            rep, _ = lb_g.group.canonicalize(key)
            assert abs(a_t[i] - a_g[lb_g.odd_index[rep]]) < 1e-10
