import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from orthoagp.pauli import (
    PauliString,
    PauliSum,
    anticommutes,
    commutator_strings,
    commutator_sum,
    count_y,
    inner_product,
    liouvillian_sign,
    multiply,
    parse_label,
    string_phase_product,
    to_dense,
    to_label,
    weight,
)

from conftest import dense_label

LETTERS = "Ixyz"


def labels(n):
    return ["".join(t) for t in itertools.product(LETTERS, repeat=n)]


def label_strategy(max_n=4):
    return st.integers(1, max_n).flatmap(
        lambda n: st.tuples(st.text(LETTERS, min_size=n, max_size=n),
                            st.text(LETTERS, min_size=n, max_size=n)))


def test_parse_roundtrip_and_layout():
    p = parse_label("xzIy", 4)
    assert (p.x_mask, p.z_mask) == (0b1001, 0b1010)
    assert p.label == "xzIy"
    assert to_label(p.key, 4) == "xzIy"
    assert weight(p.key) == 3 and count_y(p.key) == 1


@pytest.mark.parametrize("bad", ["xq", "xxx", ""])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_label(bad, 2)


def test_mask_validation():
    with pytest.raises(ValueError):
        PauliString(2, 0b100, 0)
    with pytest.raises(ValueError):
        PauliString(0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_to_dense_matches_kron(n):
    for lab in labels(n):
        np.testing.assert_array_equal(to_dense(parse_label(lab, n).key, n), dense_label(lab))


def test_single_site_rules():
    x, y, z = (parse_label(c, 1) for c in "xyz")
    assert multiply(x, y) == (1j, z)
    assert multiply(y, z) == (1j, x)
    assert multiply(z, x) == (1j, y)
    assert multiply(y, x) == (-1j, z)


@pytest.mark.parametrize("n", [2, 3])
def test_symplectic_commutation_exhaustive(n):
    """Every pair of strings at n = 2, 3: symplectic form versus dense matrices."""
    mats = {lab: dense_label(lab) for lab in labels(n)}
    mismatches = 0
    for a, b in itertools.product(mats, repeat=2):
        comm = mats[a] @ mats[b] - mats[b] @ mats[a]
        dense_anti = not np.allclose(comm, 0)
        if anticommutes(parse_label(a, n).key, parse_label(b, n).key) != dense_anti:
            mismatches += 1
    assert mismatches == 0


def _random_label(rng, n):
    return "".join(rng.choice(list(LETTERS), size=n))


def test_random_products_and_commutators_vs_dense(rng):
    """10^4 random checks of products and commutators for n <= 4."""
    mismatches = 0
    for trial in range(10_000):
        n = int(rng.integers(1, 5))
        a, b = _random_label(rng, n), _random_label(rng, n)
        pa, pb = parse_label(a, n), parse_label(b, n)
        da, db = dense_label(a), dense_label(b)
        if trial % 2 == 0:
            phase, r = multiply(pa, pb)
            ok = np.allclose(phase * dense_label(r.label), da @ db)
        else:
            res = commutator_strings(pa, pb)
            comm = da @ db - db @ da
            if res is None:
                ok = np.allclose(comm, 0)
            else:
                coeff, r, _ = res
                ok = np.allclose(1j * coeff * dense_label(r.label), comm)
        mismatches += not ok
    assert mismatches == 0


def test_liouvillian_sign_matches_dense(rng):
    for _ in range(500):
        n = int(rng.integers(1, 4))
        a, b = _random_label(rng, n), _random_label(rng, n)
        s, r = liouvillian_sign(parse_label(a, n).key, parse_label(b, n).key)
        lhs = -1j * (dense_label(a) @ dense_label(b) - dense_label(b) @ dense_label(a))
        rhs = 2 * s * to_dense(r, n)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def _random_sum(rng, n, k, hermitian=True):
    terms = {}
    for _ in range(k):
        terms[parse_label(_random_label(rng, n), n).key] = float(rng.normal())
    return PauliSum(n, terms, hermitian)


def test_commutator_sum_vs_dense(rng):
    for _ in range(200):
        n = int(rng.integers(1, 5))
        h = _random_sum(rng, n, 4)
        a = _random_sum(rng, n, 4, hermitian=bool(rng.integers(2)))
        c = commutator_sum(h, a)
        ha, aa = h.to_dense(), a.to_dense()
        np.testing.assert_allclose(c.to_dense(), ha @ aa - aa @ ha, atol=1e-12)
        assert c.hermitian != a.hermitian


def test_commutator_sum_requires_hermitian_left():
    a = PauliSum.from_labels({"x": 1.0}, 1, hermitian=False)
    with pytest.raises(ValueError):
        commutator_sum(a, a)


def test_jacobi_identity(rng):
    for _ in range(100):
        n = int(rng.integers(1, 4))
        a, b, c = (_random_sum(rng, n, 3) for _ in range(3))
        # [a,[b,c]] + [b,[c,a]] + [c,[a,b]] = 0; every inner result is i*Hermitian
        total = (commutator_sum(a, commutator_sum(b, c))
                 + commutator_sum(b, commutator_sum(c, a))
                 + commutator_sum(c, commutator_sum(a, b)))
        assert all(abs(v) < 1e-12 for v in total.terms.values())


def test_inner_product_orthonormal():
    n = 2
    strings = [PauliSum.from_labels({lab: 1.0}, n) for lab in labels(n)]
    for i, a in enumerate(strings):
        for j, b in enumerate(strings):
            assert inner_product(a, b) == (1.0 if i == j else 0.0)


def test_nonfinite_coefficient_rejected():
    with pytest.raises(ValueError):
        PauliSum(1, {(1, 0): float("nan")})


@given(label_strategy())
def test_phase_product_is_consistent(pair):
    a, b = pair
    n = len(a)
    e, r = string_phase_product(parse_label(a, n).key, parse_label(b, n).key)
    np.testing.assert_allclose(1j ** e * dense_label(to_label(r, n)),
                               dense_label(a) @ dense_label(b), atol=1e-12)


@given(label_strategy())
def test_commutation_is_symmetric(pair):
    a, b = pair
    n = len(a)
    ka, kb = parse_label(a, n).key, parse_label(b, n).key
    assert anticommutes(ka, kb) == anticommutes(kb, ka)
    sa, ra = liouvillian_sign(ka, kb)
    sb, rb = liouvillian_sign(kb, ka)
    assert ra == rb and sa == -sb


@given(st.integers(1, 4).flatmap(lambda n: st.text(LETTERS, min_size=n, max_size=n)))
def test_strings_square_to_identity(lab):
    n = len(lab)
    p = parse_label(lab, n)
    phase, r = multiply(p, p)
    assert phase == 1 and r.key == (0, 0)
