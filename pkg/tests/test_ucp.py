import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import E
from opsys_limits import linalg
from opsys_limits.errors import DimensionMismatch, DomainNotFullAlgebra, NotInjective, NotInSystem
from opsys_limits.opsys import diagonal_system, full_matrix_algebra, is_positive, new_concrete
from opsys_limits.ucp import (
    CpStatus,
    LinearMap,
    apply,
    choi_matrix,
    compose,
    identity_map,
    is_complete_order_mono,
    is_injective,
    is_ucp,
    kraus_map,
    map_from_choi,
    max_entangled,
    path_compose,
    transpose_map,
)
from opsys_limits.uhf import canonical_embedding

EPS = linalg.DEFAULT_EPS


def doubling(n):
    return canonical_embedding(full_matrix_algebra(n), 2)


def test_apply_examples(M2, rng):
    x = rng.normal(size=(4, 4))
    np.testing.assert_array_equal(apply(identity_map(M2), 2, x), x)
    np.testing.assert_array_equal(apply(doubling(1), 1, [[3]]), np.diag([3, 3]))
    np.testing.assert_array_equal(apply(transpose_map(M2), 1, E(0, 1, 2)), E(1, 0, 2))


def test_apply_unit_and_membership(D2):
    f = identity_map(D2)
    np.testing.assert_array_equal(apply(f, 3, D2.unit(3)), np.eye(6))
    with pytest.raises(NotInSystem):
        apply(f, 1, np.ones((2, 2)))


def test_map_validation(M2, D2):
    with pytest.raises(DimensionMismatch):
        LinearMap(M2, M2, [np.eye(2)])
    # images outside the diagonal codomain
    with pytest.raises(NotInSystem):
        LinearMap(D2, D2, [np.eye(2), np.ones((2, 2))])


def test_choi_examples(M2):
    w = linalg.hermitian_eigenvalues(choi_matrix(identity_map(M2)))
    np.testing.assert_allclose(w, [0, 0, 0, 2], atol=1e-12)
    w = linalg.hermitian_eigenvalues(choi_matrix(transpose_map(M2)))
    np.testing.assert_allclose(w, [-1, 1, 1, 1], atol=1e-12)
    assert linalg.is_psd(choi_matrix(doubling(2)))


def test_choi_needs_full_domain(D2):
    with pytest.raises(DomainNotFullAlgebra):
        choi_matrix(identity_map(D2))


def test_is_ucp_examples(M2):
    v = is_ucp(doubling(2))
    assert v.status is CpStatus.UCP and v.exact
    assert is_ucp(identity_map(M2)).status is CpStatus.UCP
    v = is_ucp(transpose_map(M2))
    assert v.status is CpStatus.NOT_CP
    assert v.witness.level == 2 and v.witness.image_min_eigenvalue == pytest.approx(-1)


def test_cp_not_unital(M2):
    f = kraus_map(M2, M2, [2 * np.eye(2)])
    assert is_ucp(f).status is CpStatus.CP_NOT_UNITAL


def test_sampled_ucp_on_subsystem(D2):
    v = is_ucp(identity_map(D2), max_level=2, samples=30)
    assert v.status is CpStatus.UNKNOWN_UP_TO_LEVEL and v.passed and v.unital


def test_sampled_not_cp_on_subsystem():
    # span{I, X} -> D2 stretching X to 2Z is not even positive
    S = new_concrete(2, [np.eye(2), np.array([[0, 1], [1, 0]])], "IX")
    D = diagonal_system(2)
    f = LinearMap(S, D, [np.eye(2), 2 * np.diag([1, -1])])
    v = is_ucp(f, max_level=2, samples=50)
    assert v.status is CpStatus.NOT_CP
    w = v.witness
    assert is_positive(S, w.level, w.element).positive
    assert w.image_min_eigenvalue < -EPS


def test_sampling_is_seeded():
    S = new_concrete(2, [np.eye(2), np.array([[0, 1], [1, 0]])], "IX")
    f = LinearMap(S, diagonal_system(2), [np.eye(2), 2 * np.diag([1, -1])])
    a, b = is_ucp(f, samples=20, seed=5), is_ucp(f, samples=20, seed=5)
    np.testing.assert_array_equal(a.witness.element, b.witness.element)


def test_order_mono_examples(M2):
    v = is_complete_order_mono(doubling(2), max_level=3, samples=30)
    assert v.passed
    assert is_complete_order_mono(identity_map(M2), samples=30).passed


def test_compression_is_not_injective(M2, D2):
    comp = LinearMap(M2, D2, action=lambda x: x * np.eye(2))
    assert not is_injective(comp)
    with pytest.raises(NotInjective):
        is_complete_order_mono(comp)


def test_order_mono_reflection_failure(D2):
    # aI + bX -> aI + (b/2)Z preserves order but does not reflect it
    S = new_concrete(2, [np.eye(2), np.array([[0, 1], [1, 0]])], "IX")
    f = LinearMap(S, D2, [np.eye(2), 0.5 * np.diag([1, -1])])
    assert is_ucp(f, samples=50).passed
    v = is_complete_order_mono(f, max_level=2, samples=60)
    assert v.status is CpStatus.NOT_CP and v.witness.direction == "reflect"
    assert v.witness.input_min_eigenvalue < -EPS <= v.witness.image_min_eigenvalue


def test_compose_and_path(M2):
    maps = [doubling(1), doubling(2), doubling(4)]
    f = path_compose(maps, 0, 2)
    np.testing.assert_array_equal(apply(f, 1, [[7]]), 7 * np.eye(4))
    g = path_compose(maps, 1, 3)
    x = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(apply(g, 1, x), np.kron(np.eye(4), x))
    assert path_compose(maps, 1, 2) is maps[1]
    with pytest.raises(ValueError):
        path_compose(maps, 2, 2)
    T = transpose_map(M2)
    y = np.arange(4).reshape(2, 2) + 1j
    np.testing.assert_array_equal(apply(compose(T, T), 1, y), y)
    np.testing.assert_array_equal(apply(compose(T, identity_map(M2)), 1, y), apply(T, 1, y))
    with pytest.raises(DimensionMismatch):
        compose(maps[0], maps[2])


def test_path_compose_of_ucp_is_ucp():
    for g in (1, 2, 3):
        maps = [canonical_embedding(full_matrix_algebra(g ** k), g) for k in range(0, 4)]
        for p in range(len(maps)):
            for q in range(p + 1, len(maps) + 1):
                f = path_compose(maps, p, q)
                if f.domain.ambient_dim * f.codomain.ambient_dim <= 256:
                    assert is_ucp(f).status is CpStatus.UCP


def test_max_entangled_is_rank_one_psd():
    w = linalg.hermitian_eigenvalues(max_entangled(3))
    np.testing.assert_allclose(w, [0] * 8 + [3], atol=1e-12)


def random_kraus_map(m, d, r, rng):
    V = rng.normal(size=(r, d, m)) + 1j * rng.normal(size=(r, d, m))
    return kraus_map(full_matrix_algebra(m), full_matrix_algebra(d), V)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3), st.integers(1, 3))
def test_kraus_maps_never_not_cp(seed, m, d, r):
    f = random_kraus_map(m, d, r, np.random.default_rng(seed))
    assert linalg.is_psd(choi_matrix(f), tol=1e-8)
    assert is_ucp(f, tol=1e-8).status is not CpStatus.NOT_CP


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(1, 3))
def test_non_psd_choi_gives_not_cp_with_witness(seed, m, d):
    rng = np.random.default_rng(seed)
    h = linalg.random_hermitian(m * d, rng)
    h = h - (linalg.min_eigenvalue(h) + 0.5) * np.eye(m * d) + 0.45 * rng.random() * np.eye(m * d)
    f = map_from_choi(h, m)
    np.testing.assert_allclose(choi_matrix(f), h, atol=1e-12)
    v = is_ucp(f)
    assert v.status is CpStatus.NOT_CP
    w = v.witness
    assert is_positive(f.domain, w.level, w.element).positive
    assert linalg.min_eigenvalue(apply(f, w.level, w.element)) < -EPS


@given(st.integers(0, 2**32 - 1))
def test_compose_associative(seed):
    rng = np.random.default_rng(seed)
    f, g, h = (random_kraus_map(2, 2, 2, rng) for _ in range(3))
    x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    a = apply(compose(compose(f, g), h), 1, x)
    b = apply(compose(f, compose(g, h)), 1, x)
    assert linalg.max_abs(a - b) <= EPS * max(1, linalg.max_abs(a))
