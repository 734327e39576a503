import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opsys_limits import linalg
from opsys_limits.errors import IncompatibleFamily, SizeCapExceeded
from opsys_limits.indlimit import (
    LimitStatus,
    canonical_injection,
    induced_map,
    limit_eq,
    limit_positive,
    limit_unit,
    universal_map,
)
from opsys_limits.ucp import CpStatus, apply, is_ucp
from opsys_limits.uhf import (
    GammaRule,
    ampliation_family,
    block_copies,
    connecting_choi_report,
    forward_family,
    normalized_trace_family,
    partial_trace_family,
    spectrum_multiplicity_defect,
    uhf_sequence,
    verify_order_mono_injection,
)

EPS = linalg.DEFAULT_EPS


def test_gamma_two_sizes_and_maps_ucp():
    seq = uhf_sequence(GammaRule((2,)), 3)
    assert [seq.system(k).ambient_dim for k in (1, 2, 3)] == [2, 4, 8]
    for k in (1, 2):
        v = is_ucp(seq.connect(k))
        assert v.status is CpStatus.UCP and v.exact


def test_gamma_one_is_constant_identity(rng):
    seq = uhf_sequence(GammaRule((1,)), 4)
    for k in range(1, 4):
        assert seq.system(k).ambient_dim == 1
        x = rng.normal(size=(1, 1))
        np.testing.assert_array_equal(apply(seq.connect(k), 1, x), x)


def test_mixed_gamma_sizes():
    seq = uhf_sequence(GammaRule((2, 3)), 2)
    assert [seq.system(k).ambient_dim for k in (1, 2)] == [2, 6]
    x = np.array([[1, 2], [3, 4]])
    np.testing.assert_array_equal(apply(seq.connect(1), 1, x), np.kron(np.eye(3), x))


def test_size_cap():
    with pytest.raises(SizeCapExceeded):
        uhf_sequence(GammaRule((2,)), 9)
    with pytest.raises(SizeCapExceeded):
        uhf_sequence(GammaRule((3,)), 3, size_cap=20)
    assert uhf_sequence(GammaRule((2,)), 8).depth == 8


def test_gamma_validation():
    with pytest.raises(ValueError):
        GammaRule(())
    with pytest.raises(ValueError):
        GammaRule((2, 0))
    with pytest.raises(ValueError):
        GammaRule((2,)).factor(0)


@given(st.lists(st.integers(1, 5), min_size=1, max_size=6), st.integers(1, 8))
def test_factorial_divisibility(gamma, n):
    r = GammaRule(tuple(gamma))
    assert r.factor(n) >= 1
    assert r.factorial(n + 1) == r.factorial(n) * r.factor(n + 1)


def test_block_copies_matches_kron(rng):
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    np.testing.assert_array_equal(block_copies(x, 4), np.kron(np.eye(4), x))
    stack = rng.normal(size=(2, 2, 3, 3))
    assert block_copies(stack, 2).shape == (2, 2, 6, 6)


@given(st.integers(0, 2**32 - 1), st.integers(2, 4))
def test_spectrum_multiplication(seed, n):
    x = linalg.random_hermitian(2, np.random.default_rng(seed))
    assert spectrum_multiplicity_defect(GammaRule((2,)), x, n) <= 10 * EPS


def test_spectrum_multiplication_mixed_gamma(rng):
    x = linalg.random_hermitian(2, rng)
    assert spectrum_multiplicity_defect(GammaRule((2, 3, 2)), x, 3) <= 10 * EPS


@pytest.mark.parametrize("gamma, depth", [((2,), 4), ((2, 3), 3), ((3,), 3)])
def test_connecting_choi_psd(gamma, depth):
    report = connecting_choi_report(uhf_sequence(GammaRule(gamma), depth))
    assert len(report) == depth - 1
    assert all(r["psd"] for r in report)
    assert all(r["choi_min_eigenvalue"] >= -EPS for r in report)


def test_order_mono_unit_and_diag():
    seq = uhf_sequence(GammaRule((2,)), 3)
    assert limit_positive(seq, limit_unit(seq)).status is LimitStatus.YES
    v = limit_positive(seq, canonical_injection(seq, 1, np.diag([1, -1])))
    assert v.status is LimitStatus.NO


def test_verify_order_mono_injection_small():
    r = verify_order_mono_injection(GammaRule((2,)), 3, level=2, samples=30, seed=3)
    assert r.discrepancies == 0
    assert r.agree_positive > 0 and r.agree_not_positive > 0
    assert r.agree_positive + r.agree_not_positive == 30


def test_verify_order_mono_deterministic():
    a = verify_order_mono_injection(GammaRule((2, 3)), 2, samples=20, seed=9).to_json()
    b = verify_order_mono_injection(GammaRule((2, 3)), 2, samples=20, seed=9).to_json()
    assert a == b


@pytest.mark.parametrize("depth", [1, 2, 3, 4])
def test_triangle_commutation_at_each_depth(depth):
    seq = uhf_sequence(GammaRule((2,)), depth)
    for k in range(1, depth):
        S = seq.system(k)
        for x in S.basis:
            y = apply(seq.connect(k), 1, x)
            assert limit_eq(seq, canonical_injection(seq, k, x), canonical_injection(seq, k + 1, y)).status is LimitStatus.YES


# -- families -------------------------------------------------------------------


@pytest.mark.parametrize("make", [
    normalized_trace_family,
    lambda s, d: partial_trace_family(s, "last", d),
    forward_family,
])
def test_compatible_families_accepted(make):
    seq = uhf_sequence(GammaRule((2,)), 4)
    psi = make(seq, 4)
    U = universal_map(seq, psi[0].codomain, psi)
    for k in range(1, 5):
        for x in seq.system(k).basis:
            got = U(canonical_injection(seq, k, x))
            np.testing.assert_allclose(got, apply(psi[k - 1], 1, x), atol=EPS)


def test_first_factor_partial_trace_rejected():
    seq = uhf_sequence(GammaRule((2,)), 4)
    psi = partial_trace_family(seq, "first", 4)
    with pytest.raises(IncompatibleFamily) as info:
        universal_map(seq, psi[0].codomain, psi)
    assert info.value.stage == 1 and "1" in str(info.value)


def test_partial_trace_needs_constant_gamma():
    with pytest.raises(ValueError):
        partial_trace_family(uhf_sequence(GammaRule((2, 3)), 2))


def test_ampliation_square_commutes():
    S = uhf_sequence(GammaRule((2,)), 3)
    T = uhf_sequence(GammaRule((4,)), 3)
    pi = ampliation_family(S, T)
    m = induced_map(S, T, pi)
    for k in range(1, 4):
        for x in S.system(k).basis[:6]:
            e = canonical_injection(S, k, x)
            out = m(e)
            assert out.stage == k
            np.testing.assert_allclose(out.rep, apply(pi[k - 1], 1, x), atol=EPS)


def test_ampliation_needs_divisibility():
    with pytest.raises(ValueError):
        ampliation_family(uhf_sequence(GammaRule((2,)), 2), uhf_sequence(GammaRule((3,)), 2))


def test_choi_report_falls_back_to_kraus_form_above_cap():
    report = connecting_choi_report(uhf_sequence(GammaRule((2,)), 4), cap=32)
    assert [r["method"] for r in report] == ["choi", "choi", "kraus"]
    assert all(r["psd"] for r in report)
