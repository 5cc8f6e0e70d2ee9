import numpy as np
import pytest

from orthoagp.ed import (
    DenseOperator,
    Schedule,
    action_s,
    condition_f,
    exact_agp,
    exact_agp_matrix,
    exact_agp_table,
    g_operator,
    ground_state,
    project,
    simulate_cd,
)
from orthoagp.models import chain, chord_chain, ring, tfim, two_site_example
from orthoagp.pauli import parse_label, to_dense


def _finite_difference_agp(h, lam, eps=1e-6):
    """Independent check: A = i sum_{m != n} |m><m| dH |n><n| / (E_n - E_m)."""
    hm = h.to_dense(1.0, lam)
    dh = (h.to_dense(1.0, lam + eps) - h.to_dense(1.0, lam - eps)) / (2 * eps)
    e, v = np.linalg.eigh(hm)
    d = v.conj().T @ dh @ v
    a = np.zeros_like(d)
    for m in range(len(e)):
        for n in range(len(e)):
            if abs(e[n] - e[m]) > 1e-8:
                a[m, n] = 1j * d[m, n] / (e[n] - e[m])
    return v @ a @ v.conj().T


def test_exact_agp_against_independent_formula():
    h = two_site_example(0.6)
    a = exact_agp(h, 0.4)
    np.testing.assert_allclose(a.matrix, _finite_difference_agp(h, 0.4), atol=1e-7)


@pytest.mark.parametrize("graph", [ring(4), chain(5), chord_chain(5, [(1, 3)])])
def test_agp_is_imaginary_hermitian(graph):
    a = exact_agp(tfim(graph), 0.7)
    assert a.hermiticity_error() < 1e-12
    assert np.abs(a.matrix.real).max() < 1e-12


def test_exact_agp_zeroes_action_residual():
    h = tfim(chord_chain(5, [(1, 3)]))
    a = exact_agp(h, 0.9)
    assert condition_f(h, 0.9, a) < 1e-20
    # any perturbation raises the action
    p = parse_label("yzIII", 5).key
    s0 = action_s(h, 0.9, a)
    assert action_s(h, 0.9, a.matrix + 1e-3 * to_dense(p, 5)) > s0


def test_g_operator_commutes_with_h_for_exact_agp():
    h = tfim(ring(4))
    a = exact_agp(h, 1.3)
    g = g_operator(h, 1.3, a).matrix
    hm = h.to_dense(1.0, 1.3)
    np.testing.assert_allclose(hm @ g - g @ hm, 0, atol=1e-10)


def test_projection_of_ring4():
    a = exact_agp(tfim(ring(4)), 0.5)
    # each of the 8 members of the first orbit carries the same coefficient
    labs = ("yzII", "IyzI", "IIyz", "zIIy", "zyII", "IzyI", "IIzy", "yIIz")
    vals = [project(a, parse_label(lab, 4).key, 4) for lab in labs]
    np.testing.assert_allclose(vals, vals[0], atol=1e-14)
    assert vals[0] == pytest.approx(-63 / 510)


def test_degeneracy_warning_is_basis_free():
    hm = np.diag([0.0, 0.0, 1.0])
    dh = np.array([[1.0, 0, 0.3], [0, -1.0, 0], [0.3, 0, 0]])
    a, warns = exact_agp_matrix(hm, dh)
    assert len(warns) == 1 and warns[0].size == 2
    assert a[0, 1] == 0 and a[0, 2] != 0
    _, warns = exact_agp_matrix(hm, np.diag([1.0, 1.0, 0.0]))
    assert not warns
    with pytest.raises(ValueError):
        exact_agp_matrix(hm, dh, degeneracy_tol=0)


def test_size_cap_and_shape_checks():
    with pytest.raises(ValueError):
        exact_agp(tfim(chain(5)), 0.5, max_sites=4)
    with pytest.raises(ValueError):
        DenseOperator(np.eye(3), 2)


def test_schedule_shapes():
    s = Schedule(0.0, 2.0, 4.0)
    assert s.lam(0.0) == 0 and s.lam(4.0) == pytest.approx(2.0)
    assert s.lam_dot(0.0) == 0 and s.lam_dot(4.0) == pytest.approx(0.0, abs=1e-15)
    lin = Schedule(0.0, 2.0, 4.0, "linear")
    assert lin.lam_dot(1.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        Schedule(0, 1, 0.0)
    with pytest.raises(ValueError):
        Schedule(0, 1, 1.0, "cubic")


def test_ground_state_resolves_degeneracy():
    h = tfim(chain(4))
    psi = ground_state(h.to_dense(1, 0.0), [h.to_dense(1, 0.05)])
    # the adiabatic continuation of the lam > 0 ground state is the symmetric GHZ state
    assert abs(psi[0]) ** 2 == pytest.approx(0.5, abs=1e-6)
    assert abs(psi[-1]) ** 2 == pytest.approx(0.5, abs=1e-6)


def test_cd_with_exact_agp_is_adiabatic():
    h = tfim(chain(4))
    table = exact_agp_table(h, 0.0, 2.0, n_grid=201)
    res = simulate_cd(h, Schedule(0.0, 2.0, 0.5), table, n_samples=11)
    assert res.final_fidelity > 1 - 1e-6
    assert res.norm_drift < 1e-9
    bare = simulate_cd(h, Schedule(0.0, 2.0, 0.5), None, n_samples=11)
    assert bare.final_fidelity < 0.99


def test_state0_must_be_eigenstate():
    h = tfim(chain(3))
    with pytest.raises(ValueError):
        simulate_cd(h, Schedule(0.0, 1.0, 1.0), None, state0=np.ones(8))
