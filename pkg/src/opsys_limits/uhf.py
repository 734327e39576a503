"""UHF sequences ``M_{g!(1)} -> M_{g!(2)} -> ...`` with block-diagonal embeddings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import SizeCapExceeded
from .indlimit import (
    CHOI_CAP,
    InductiveSequence,
    LimitStatus,
    canonical_injection,
    limit_positive,
    push_forward,
)
from .linalg import DEFAULT_EPS
from .opsys import ConcreteOperatorSystem, full_matrix_algebra, is_positive, random_hermitian_element
from .ucp import CpStatus, CpVerdict, LinearMap, choi_matrix, is_ucp

SIZE_CAP = 256


@dataclass(frozen=True)
class GammaRule:
    """Multiplicities ``g(1), g(2), ...``; the last entry repeats forever."""

    gamma: tuple[int, ...]

    def __post_init__(self):
        g = tuple(int(x) for x in self.gamma)
        if not g or any(x < 1 for x in g):
            raise ValueError("gamma entries must be integers >= 1")
        object.__setattr__(self, "gamma", g)

    def factor(self, n: int) -> int:
        if n < 1:
            raise ValueError("gamma is indexed from 1")
        return self.gamma[min(n, len(self.gamma)) - 1]

    def factorial(self, n: int) -> int:
        """``g!(n) = g(1) g(2) ... g(n)``."""
        out = 1
        for k in range(1, n + 1):
            out *= self.factor(k)
        return out


def block_copies(x: np.ndarray, d: int) -> np.ndarray:
    """``diag(x, ..., x)`` with ``d`` copies, for stacks ``(..., n, n)``."""
    n = x.shape[-1]
    out = np.zeros(x.shape[:-2] + (d * n, d * n), dtype=complex)
    for s in range(d):
        out[..., s * n:(s + 1) * n, s * n:(s + 1) * n] = x
    return out


def canonical_embedding(domain: ConcreteOperatorSystem, d: int, codomain: ConcreteOperatorSystem | None = None) -> LinearMap:
    """``x -> diag(x, ..., x)`` from ``M_n`` into ``M_{dn}``."""
    if codomain is None:
        codomain = full_matrix_algebra(d * domain.ambient_dim)
    return LinearMap(
        domain, codomain, action=lambda x: block_copies(x, d), name=f"diag^{d}", validate=False
    )


def _certify_embedding(k: int, f: LinearMap) -> CpVerdict:
    # exact Choi check while the Choi matrix is small; beyond that the map is
    # sum_s V_s x V_s* with V_s the s-th block isometry, checked on a sample
    size = f.domain.ambient_dim * f.codomain.ambient_dim
    if size <= CHOI_CAP:
        return is_ucp(f)
    n = f.domain.ambient_dim
    d = f.codomain.ambient_dim // n
    rng = np.random.default_rng(k)
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    kraus = sum(
        np.kron(np.eye(d)[:, [s]], np.eye(n)) @ x @ np.kron(np.eye(d)[:, [s]], np.eye(n)).T for s in range(d)
    )
    ok = linalg.max_abs(f._act(x) - kraus) <= DEFAULT_EPS
    unital = linalg.max_abs(f._act(np.eye(n)) - np.eye(d * n)) <= DEFAULT_EPS
    status = CpStatus.UCP if ok and unital else CpStatus.NOT_CP
    return CpVerdict(status, n, unital, True, detail="Kraus form of the block embedding")


def _certify_inclusion(k: int, f: LinearMap) -> CpVerdict:
    # an injective unital *-homomorphism reflects positivity at every level:
    # diag(x, ..., x) has the spectrum of x
    return CpVerdict(CpStatus.UCP, 0, True, True, detail="injective unital *-homomorphism (block copies)")


def uhf_sequence(rule: GammaRule, depth: int, size_cap: int = SIZE_CAP) -> InductiveSequence:
    """Full matrix algebras ``M_{g!(n)}`` linked by canonical block embeddings."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    top = rule.factorial(depth)
    if top > size_cap:
        raise SizeCapExceeded(f"g!({depth}) = {top} exceeds the size cap {size_cap}")
    systems: dict[int, ConcreteOperatorSystem] = {}

    def system_at(k: int) -> ConcreteOperatorSystem:
        if k not in systems:
            systems[k] = full_matrix_algebra(rule.factorial(k))
        return systems[k]

    def connect_at(k: int) -> LinearMap:
        return canonical_embedding(system_at(k), rule.factor(k + 1), system_at(k + 1))

    return InductiveSequence(
        system_at,
        connect_at,
        depth,
        inclusion=True,
        certify=_certify_embedding,
        certify_order_mono=_certify_inclusion,
        name=f"UHF{list(rule.gamma)}",
    )


# largest Choi matrix diagonalized for reports (a 4096^2 complex array is 256 MB)
REPORT_CHOI_CAP = 4096


def connecting_choi_report(seq: InductiveSequence, cap: int = REPORT_CHOI_CAP) -> list[dict]:
    """Minimum Choi eigenvalue of every connecting map (exact, via Jacobi).

    Maps whose Choi matrix exceeds ``cap`` fall back to the Kraus-form certificate.
    """
    out = []
    for k in range(1, seq.depth):
        f = seq.connect(k)
        size = f.domain.ambient_dim * f.codomain.ambient_dim
        if size <= cap:
            lam = linalg.min_eigenvalue(choi_matrix(f))
            row = {"choi_min_eigenvalue": lam, "psd": lam >= -DEFAULT_EPS, "method": "choi"}
        else:
            ok = _certify_embedding(k, f).status is CpStatus.UCP
            row = {"choi_min_eigenvalue": None, "psd": ok, "method": "kraus"}
        out.append({"stage": k, "choi_size": size, **row})
    return out


@dataclass
class OrderMonoReport:
    gamma: list
    depth: int
    level: int
    samples: int
    seed: int
    discrepancies: int = 0
    agree_positive: int = 0
    agree_not_positive: int = 0
    discrepancy_details: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "depth": self.depth,
            "level": self.level,
            "samples": self.samples,
            "seed": self.seed,
            "discrepancies": self.discrepancies,
            "agree_positive": self.agree_positive,
            "agree_not_positive": self.agree_not_positive,
            "discrepancy_details": self.discrepancy_details,
        }


def verify_order_mono_injection(
    rule: GammaRule, depth: int, level: int = 2, samples: int = 100, seed: int = 0
) -> OrderMonoReport:
    """Compare positivity in the limit with positivity at the element's own stage.

    Samples alternate between random Hermitian elements and points on the
    PSD boundary, over random stages and levels ``<= level``.
    """
    seq = uhf_sequence(rule, depth)
    rng = np.random.default_rng(seed)
    report = OrderMonoReport(list(rule.gamma), depth, level, samples, seed)
    for i in range(samples):
        k = int(rng.integers(1, depth + 1))
        n = int(rng.integers(1, level + 1))
        S = seq.system(k)
        x = random_hermitian_element(S, n, rng)
        if i % 2:
            x = x - linalg.min_eigenvalue(x) * S.unit(n)
        stage_pos = is_positive(S, n, x).positive
        verdict = limit_positive(seq, canonical_injection(seq, k, x), horizon=depth)
        limit_pos = verdict.status is LimitStatus.YES
        if stage_pos != limit_pos:
            report.discrepancies += 1
            report.discrepancy_details.append(
                {"index": i, "stage": k, "level": n, "stage_positive": stage_pos, "limit": verdict.status.value}
            )
        elif stage_pos:
            report.agree_positive += 1
        else:
            report.agree_not_positive += 1
    return report


def spectrum_multiplicity_defect(rule: GammaRule, x: np.ndarray, n: int) -> float:
    """Distance between the spectrum of ``push(x, n)`` and ``g(2)...g(n)`` copies of the spectrum of ``x``."""
    seq = uhf_sequence(rule, n)
    e = canonical_injection(seq, 1, x)
    pushed = push_forward(seq, e, n).rep
    copies = rule.factorial(n) // rule.factorial(1)
    expected = np.sort(np.repeat(linalg.hermitian_eigenvalues(x), copies))
    return linalg.max_abs(linalg.hermitian_eigenvalues(pushed) - expected)


def _constant_factor(seq: InductiveSequence, depth: int) -> int:
    dims = [seq.system(k).ambient_dim for k in range(1, depth + 1)]
    d = dims[0]
    if any(dims[k] != d ** (k + 1) for k in range(depth)):
        raise ValueError("partial traces need a constant gamma")
    return d


def normalized_trace_family(seq: InductiveSequence, depth: int | None = None) -> list[LinearMap]:
    """``psi^(k)(x) = tr(x) / dim`` into ``M_1``; compatible with every block embedding."""
    depth = seq.depth if depth is None else depth
    C = full_matrix_algebra(1)
    out = []
    for k in range(1, depth + 1):
        d = seq.system(k).ambient_dim
        out.append(LinearMap(
            seq.system(k), C,
            action=lambda x, d=d: (np.trace(x, axis1=-2, axis2=-1) / d)[..., None, None],
            name=f"tr_{k}", validate=False,
        ))
    return out


def partial_trace_family(seq: InductiveSequence, keep: str = "last", depth: int | None = None) -> list[LinearMap]:
    """Normalized partial trace of ``M_d^{(x)k}`` onto its first or last factor.

    The block embedding adds a new *first* factor, so keeping the last one
    gives a compatible family and keeping the first one does not.
    """
    depth = seq.depth if depth is None else depth
    d = _constant_factor(seq, depth)
    target = full_matrix_algebra(d)
    out = []
    for k in range(1, depth + 1):
        rest = d ** (k - 1)

        def act(x, rest=rest):
            t = x.reshape(x.shape[:-2] + (rest, d, rest, d)) if keep == "last" else x.reshape(x.shape[:-2] + (d, rest, d, rest))
            if keep == "last":
                return np.einsum("...iaib->...ab", t) / rest
            return np.einsum("...aibi->...ab", t) / rest

        out.append(LinearMap(seq.system(k), target, action=act, name=f"ptr_{keep}_{k}", validate=False))
    return out


def forward_family(seq: InductiveSequence, depth: int | None = None) -> list[LinearMap]:
    """``psi^(k) = phi_{k,depth}`` into the last stage."""
    depth = seq.depth if depth is None else depth
    target = seq.system(depth)
    out = []
    for k in range(1, depth + 1):
        copies = target.ambient_dim // seq.system(k).ambient_dim
        out.append(LinearMap(
            seq.system(k), target, action=lambda x, c=copies: block_copies(x, c), name=f"fwd_{k}", validate=False
        ))
    return out


def ampliation_family(seq_s: InductiveSequence, seq_t: InductiveSequence, depth: int | None = None) -> list[LinearMap]:
    """``pi_k(x) = I (x) x`` from ``S_k`` into ``T_k`` (i.e. block copies)."""
    depth = min(seq_s.depth, seq_t.depth) if depth is None else depth
    out = []
    for k in range(1, depth + 1):
        ds, dt = seq_s.system(k).ambient_dim, seq_t.system(k).ambient_dim
        if dt % ds:
            raise ValueError(f"stage {k}: {dt} is not a multiple of {ds}")
        out.append(LinearMap(
            seq_s.system(k), seq_t.system(k), action=lambda x, c=dt // ds: block_copies(x, c),
            name=f"amp_{k}", validate=False,
        ))
    return out
