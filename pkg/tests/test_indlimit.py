import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opsys_limits import linalg
from opsys_limits.errors import (
    DepthExceeded,
    DimensionMismatch,
    IncompatibleFamily,
    IncompatibleSquare,
    LevelMismatch,
    NotInSystem,
    NotUnital,
)
from opsys_limits.indlimit import (
    InductiveSequence,
    LimitElement,
    LimitStatus,
    canonical_injection,
    induced_map,
    limit_arith,
    limit_eq,
    limit_positive,
    limit_unit,
    limit_zero,
    push_forward,
    universal_map,
)
from opsys_limits.opsys import diagonal_system, full_matrix_algebra, is_positive, random_hermitian_element
from opsys_limits.ucp import LinearMap, apply, identity_map, kraus_map
from opsys_limits.uhf import (
    GammaRule,
    ampliation_family,
    canonical_embedding,
    forward_family,
    normalized_trace_family,
    partial_trace_family,
    uhf_sequence,
)

YES, NO, UNKNOWN = LimitStatus.YES, LimitStatus.NO, LimitStatus.UNKNOWN


@pytest.fixture(scope="module")
def uhf():
    return uhf_sequence(GammaRule((2,)), 5)


def constant_sequence(S, depth=4, inclusion=False):
    f = identity_map(S)
    return InductiveSequence.explicit([S] * depth, [f] * (depth - 1), inclusion=inclusion, name="const")


def trace_sequence(depth=4):
    # x -> tr(x)/2 * I on M_2: UCP but not injective
    M2 = full_matrix_algebra(2)
    f = LinearMap(M2, M2, action=lambda x: np.trace(x, axis1=-2, axis2=-1)[..., None, None] / 2 * np.eye(2))
    return InductiveSequence.explicit([M2] * depth, [f] * (depth - 1), name="trace")


def inj(seq, k, x):
    return canonical_injection(seq, k, np.asarray(x, dtype=complex))


# -- construction --------------------------------------------------------------


def test_uhf_sizes(uhf):
    assert [uhf.system(k).ambient_dim for k in range(1, 6)] == [2, 4, 8, 16, 32]
    assert uhf.inclusion


def test_depth_exceeded(uhf):
    with pytest.raises(DepthExceeded):
        uhf.system(6)
    with pytest.raises(DepthExceeded):
        push_forward(uhf, inj(uhf, 1, np.eye(2)), 6)


def test_chain_must_match():
    M2, M3 = full_matrix_algebra(2), full_matrix_algebra(3)
    seq = InductiveSequence.explicit([M2, M3], [identity_map(M2)])
    with pytest.raises(DimensionMismatch):
        seq.materialize(2)


def test_non_unital_map_rejected():
    M2 = full_matrix_algebra(2)
    seq = InductiveSequence.explicit([M2, M2], [kraus_map(M2, M2, [2 * np.eye(2)])])
    with pytest.raises(NotUnital):
        seq.connect(1)


def test_non_cp_map_rejected():
    M2 = full_matrix_algebra(2)
    T = LinearMap(M2, M2, action=lambda x: np.swapaxes(x, -1, -2))
    seq = InductiveSequence.explicit([M2, M2], [T])
    with pytest.raises(NotUnital):
        seq.connect(1)


def test_inclusion_flag_requires_order_mono():
    with pytest.raises(Exception):
        trace_sequence(2).__class__.explicit(
            [full_matrix_algebra(2)] * 2, [trace_sequence(2).connect(1)], inclusion=True
        ).connect(1)


def test_explicit_needs_matching_lengths():
    M2 = full_matrix_algebra(2)
    with pytest.raises(DimensionMismatch):
        InductiveSequence.explicit([M2, M2], [])


def test_concurrent_materialization_builds_once():
    calls = []
    lock = threading.Lock()

    def system_at(k):
        with lock:
            calls.append(k)
        return full_matrix_algebra(2 ** k)

    def connect_at(k):
        return canonical_embedding(full_matrix_algebra(2 ** k), 2, full_matrix_algebra(2 ** (k + 1)))

    seq = InductiveSequence(system_at, connect_at, 4)
    threads = [threading.Thread(target=seq.materialize, args=(4,)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sorted(calls) == [1, 2, 3, 4]


# -- push-forward, equality ---------------------------------------------------


def test_push_forward_examples(uhf):
    np.testing.assert_array_equal(push_forward(uhf, inj(uhf, 1, [[5, 0], [0, 5]]), 2).rep, 5 * np.eye(4))
    e = inj(uhf, 1, np.diag([1, 2]))
    np.testing.assert_array_equal(push_forward(uhf, e, 1).rep, e.rep)
    np.testing.assert_array_equal(push_forward(uhf, e, 3).rep, np.diag([1, 2] * 4))
    assert e.stage == 1
    with pytest.raises(ValueError):
        push_forward(uhf, push_forward(uhf, e, 3), 2)


def test_push_forward_m1_example():
    seq = uhf_sequence(GammaRule((1, 2)), 2)
    e = inj(seq, 1, [[5]])
    np.testing.assert_array_equal(push_forward(seq, e, 2).rep, np.diag([5, 5]))


def test_limit_eq_examples(uhf):
    v = limit_eq(uhf, inj(uhf, 1, np.diag([1, 2])), inj(uhf, 2, np.diag([1, 2, 1, 2])))
    assert v.status is YES and v.stage_used == 2
    e = inj(uhf, 3, np.eye(8))
    v = limit_eq(uhf, e, e)
    assert v.status is YES and v.stage_used == 3
    v = limit_eq(uhf, inj(uhf, 1, np.zeros((2, 2))), inj(uhf, 1, np.eye(2)))
    assert v.status is NO


def test_limit_eq_level_mismatch(uhf):
    with pytest.raises(LevelMismatch):
        limit_eq(uhf, inj(uhf, 1, np.eye(2)), inj(uhf, 1, np.eye(4)))


def test_limit_eq_non_injective_sequence():
    seq = trace_sequence(4)
    v = limit_eq(seq, inj(seq, 1, np.diag([1, 0])), inj(seq, 1, np.diag([0, 1])))
    assert v.status is YES and v.stage_used == 2
    v = limit_eq(seq, inj(seq, 1, np.diag([1, 0])), inj(seq, 1, np.zeros((2, 2))))
    assert v.status is UNKNOWN and v.stage_used == 4


def test_limit_eq_horizon_respected():
    seq = constant_sequence(diagonal_system(2), depth=6)
    v = limit_eq(seq, inj(seq, 1, np.eye(2)), inj(seq, 1, np.diag([1, 2])), horizon=3)
    assert v.status is UNKNOWN and v.stage_used == 3


def test_injection_examples(uhf):
    units = [limit_unit(uhf)] + [inj(uhf, k, np.eye(2 ** k)) for k in range(1, 6)]
    for a in units:
        for b in units:
            assert limit_eq(uhf, a, b).status is YES
    x = np.array([[1, 2j], [3, 4]])
    e = inj(uhf, 1, x)
    assert limit_eq(uhf, inj(uhf, 1, x.conj().T), limit_arith(uhf, e, op="adjoint")).status is YES
    with pytest.raises(NotInSystem):
        canonical_injection(constant_sequence(diagonal_system(2)), 1, np.ones((2, 2)))


def test_limit_zero_and_unit(uhf):
    assert limit_eq(uhf, limit_zero(uhf), inj(uhf, 3, np.zeros((8, 8)))).status is YES
    assert limit_eq(uhf, limit_unit(uhf, 2), inj(uhf, 2, np.eye(8))).status is YES


def test_triangle_commutation(uhf):
    for k in range(1, uhf.depth):
        for x in uhf.system(k).basis:
            y = apply(uhf.connect(k), 1, x)
            assert limit_eq(uhf, inj(uhf, k, x), inj(uhf, k + 1, y)).status is YES


# -- positivity --------------------------------------------------------------


def test_limit_positive_examples(uhf):
    v = limit_positive(uhf, limit_unit(uhf))
    assert v.status is YES and v.stage_used == 1 and v.epsilon_used == 0
    v = limit_positive(uhf, inj(uhf, 1, [[2, 1], [1, 2]]))
    assert v.status is YES
    v = limit_positive(uhf, inj(uhf, 1, np.diag([1, -1])))
    assert v.status is NO


def test_limit_positive_unknown_cases(uhf):
    v = limit_positive(uhf, inj(uhf, 1, np.diag([1, -1e-4])))
    assert v.status is UNKNOWN and v.epsilon_used == 1e-3
    seq = constant_sequence(full_matrix_algebra(2))
    assert limit_positive(seq, inj(seq, 1, np.diag([1, -1]))).status is UNKNOWN


def test_limit_positive_at_later_stage():
    seq = trace_sequence(3)
    v = limit_positive(seq, inj(seq, 1, np.diag([1, -0.5])))
    assert v.status is YES and v.stage_used == 2


def test_limit_positive_boundary_via_smallest_epsilon(uhf):
    v = limit_positive(uhf, inj(uhf, 1, np.diag([1, -1e-9])))
    assert v.status is YES and v.epsilon_used in (0.0, 1e-9)


def test_limit_positive_needs_hermitian(uhf):
    with pytest.raises(linalg.NotHermitian):
        limit_positive(uhf, inj(uhf, 1, [[0, 1], [0, 0]]))


def test_limit_arith_examples(uhf):
    e = inj(uhf, 1, [[1, 2], [2, 1]])
    z = limit_arith(uhf, e, limit_arith(uhf, e, -1, "scale"), "add")
    assert limit_eq(uhf, z, limit_zero(uhf)).status is YES
    ee = limit_arith(uhf, limit_arith(uhf, e, op="adjoint"), op="adjoint")
    assert limit_eq(uhf, ee, e).status is YES
    s = limit_arith(uhf, inj(uhf, 1, 2 * np.eye(2)), inj(uhf, 2, 3 * np.eye(4)), "add")
    assert s.stage == 2
    np.testing.assert_array_equal(s.rep, 5 * np.eye(4))
    with pytest.raises(LevelMismatch):
        limit_arith(uhf, inj(uhf, 1, np.eye(2)), inj(uhf, 1, np.eye(4)), "add")
    with pytest.raises(ValueError):
        limit_arith(uhf, e, e, "mul")


# -- properties on random samples --------------------------------------------


def random_element(seq, rng, level=1, positive=False):
    k = int(rng.integers(1, 4))
    x = random_hermitian_element(seq.system(k), level, rng)
    if positive:
        x = x - linalg.min_eigenvalue(x) * seq.system(k).unit(level) + rng.exponential() * np.eye(x.shape[0])
    return inj(seq, k, x)


@given(st.integers(0, 2**32 - 1))
def test_equality_is_an_equivalence(seed):
    seq = uhf_sequence(GammaRule((2,)), 5)
    rng = np.random.default_rng(seed)
    a = random_element(seq, rng)
    # b and c are forwarded copies of a, d is unrelated
    b = push_forward(seq, a, min(5, a.stage + 1))
    c = push_forward(seq, a, 5)
    d = random_element(seq, rng)
    assert limit_eq(seq, a, a).status is YES
    for x, y in ((a, b), (b, c), (a, c)):
        v1, v2 = limit_eq(seq, x, y), limit_eq(seq, y, x)
        assert v1.status is YES and v2.status is YES
    assert limit_eq(seq, a, d).status == limit_eq(seq, d, a).status


@given(st.integers(0, 2**32 - 1))
def test_positive_cone_closed_under_add_and_scale(seed):
    seq = uhf_sequence(GammaRule((2,)), 4)
    rng = np.random.default_rng(seed)
    a, b = random_element(seq, rng, positive=True), random_element(seq, rng, positive=True)
    assert limit_positive(seq, a).status is YES and limit_positive(seq, b).status is YES
    s = limit_arith(seq, a, b, "add")
    assert limit_positive(seq, s).status is YES
    assert limit_positive(seq, limit_arith(seq, a, float(rng.exponential()), "scale")).status is YES


@given(st.integers(0, 2**32 - 1), st.integers(1, 2))
def test_push_forward_invariance(seed, level):
    seq = uhf_sequence(GammaRule((2,)), 4)
    rng = np.random.default_rng(seed)
    e = random_element(seq, rng, level, positive=bool(rng.integers(2)))
    f = random_element(seq, rng, level)
    pos = limit_positive(seq, e).status
    for p in range(e.stage, seq.depth + 1):
        ep = push_forward(seq, e, p)
        assert limit_positive(seq, ep).status is pos
        assert limit_eq(seq, ep, e).status is YES
    eq = limit_eq(seq, e, f).status
    assert limit_eq(seq, push_forward(seq, e, seq.depth), f).status is eq


# -- universal and induced maps -------------------------------------------------


def test_universal_identity_on_constant_sequence():
    S = diagonal_system(2)
    seq = constant_sequence(S, 3)
    Psi = universal_map(seq, S, [identity_map(S)] * 3)
    x = np.diag([3.0, -1.0])
    np.testing.assert_array_equal(Psi(inj(seq, 2, x)), x)


@pytest.mark.parametrize("family", ["trace", "ptrace-last", "forward"])
def test_universal_factorization(uhf, family):
    depth = 4
    psi = {
        "trace": lambda: normalized_trace_family(uhf, depth),
        "ptrace-last": lambda: partial_trace_family(uhf, "last", depth),
        "forward": lambda: forward_family(uhf, depth),
    }[family]()
    target = psi[0].codomain
    Psi = universal_map(uhf, target, psi, depth)
    rng = np.random.default_rng(0)
    for k in range(1, depth + 1):
        for x in uhf.system(k).basis:
            assert linalg.max_abs(Psi(inj(uhf, k, x)) - apply(psi[k - 1], 1, x)) == 0
    np.testing.assert_allclose(Psi(limit_unit(uhf)), target.unit(1), atol=1e-12)
    for _ in range(10):
        e = random_element(uhf, rng, positive=True)
        f = push_forward(uhf, e, depth)
        assert linalg.max_abs(Psi(e) - Psi(f)) <= 10 * linalg.DEFAULT_EPS
        assert limit_positive(uhf, e).status is YES
        assert is_positive(target, 1, (Psi(e) + Psi(e).conj().T) / 2).positive


def test_universal_forward_truncated_at_depth_two(uhf):
    psi = forward_family(uhf, 2)
    Psi = universal_map(uhf, uhf.system(2), psi, 2)
    e = inj(uhf, 1, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(Psi(e), push_forward(uhf, e, 2).rep)
    with pytest.raises(DepthExceeded):
        Psi(inj(uhf, 3, np.eye(8)))


def test_universal_rejects_first_factor_partial_trace(uhf):
    with pytest.raises(IncompatibleFamily) as err:
        universal_map(uhf, full_matrix_algebra(2), partial_trace_family(uhf, "first", 4), 4)
    assert err.value.stage == 1
    assert not isinstance(err.value, IncompatibleSquare)


def test_universal_family_must_land_in_target(uhf):
    with pytest.raises(DimensionMismatch):
        universal_map(uhf, full_matrix_algebra(3), normalized_trace_family(uhf, 2), 2)


def test_induced_identity(uhf):
    P = induced_map(uhf, uhf, [identity_map(uhf.system(k)) for k in range(1, 4)])
    e = inj(uhf, 2, np.diag([1, 2, 3, 4]))
    assert limit_eq(uhf, P(e), e).status is YES


def test_induced_ampliation_accepted_and_perturbation_rejected():
    S = uhf_sequence(GammaRule((2,)), 3)
    T = uhf_sequence(GammaRule((4,)), 3)
    pi = ampliation_family(S, T)
    P = induced_map(S, T, pi)
    assert limit_eq(T, P(limit_unit(S)), limit_unit(T)).status is YES
    for k in range(1, 3):
        for x in S.system(k).basis:
            lhs = inj(T, k, apply(pi[k - 1], 1, x))
            assert limit_eq(T, lhs, P(inj(S, k, x))).status is YES
    rng = np.random.default_rng(3)
    for _ in range(5):
        e = random_element(S, rng, positive=True)
        assert limit_positive(T, P(e)).status is YES
    imgs = pi[1].images.copy()
    imgs[5][0, 0] += 1e-3
    bad = list(pi)
    bad[1] = LinearMap(pi[1].domain, pi[1].codomain, imgs, validate=False)
    with pytest.raises(IncompatibleSquare) as err:
        induced_map(S, T, bad)
    assert err.value.stage in (1, 2)


def test_induced_non_commuting_rejected():
    # pi_2(y) = y (x) I_3 puts the copies in the wrong tensor slot
    S = uhf_sequence(GammaRule((2,)), 2)
    T = uhf_sequence(GammaRule((4, 3)), 2)
    pi = [
        canonical_embedding(S.system(1), 2, T.system(1)),
        LinearMap(S.system(2), T.system(2), action=lambda x: np.kron(x, np.eye(3)), validate=False),
    ]
    with pytest.raises(IncompatibleSquare):
        induced_map(S, T, pi)


def test_limit_element_validation():
    with pytest.raises(ValueError):
        LimitElement(0, np.eye(2))
    with pytest.raises(ValueError):
        LimitElement(1, np.eye(2), 0)
