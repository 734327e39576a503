"""Inductive limits of operator systems, computed stage by stage.

An element of the limit is stored as a pair ``(stage k, x in M_n(S_k))``
standing for the eventually-forwarded sequence it generates.  Sequences
that differ by an eventually-zero tail are identified by :func:`limit_eq`,
and the Archimedean closure of the limit cone enters :func:`limit_positive`
through an epsilon ladder.  Neither the space of sequences nor the
eventually-zero subspace is ever built.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import (
    DepthExceeded,
    DimensionMismatch,
    IncompatibleFamily,
    IncompatibleSquare,
    LevelMismatch,
    NotInSystem,
    NotUnital,
)
from .linalg import DEFAULT_EPS
from .opsys import DEFAULT_LADDER, ConcreteOperatorSystem, check_ladder, check_level, is_positive
from .ucp import CpVerdict, LinearMap, apply, is_complete_order_mono, is_ucp, is_unital

DEFAULT_HORIZON = 8
CHOI_CAP = 256

Certifier = Callable[[int, LinearMap], CpVerdict]


class InductiveSequence:
    """``S_1 -> S_2 -> ...`` with UCP connecting maps, built lazily up to ``depth``.

    ``system_at(k)`` and ``connect_at(k)`` produce ``S_k`` and
    ``phi_k: S_k -> S_{k+1}`` (stages count from 1).  Each stage is built
    once, under a lock, and its connecting map is checked for chaining,
    exact unitality and complete positivity (``certify``).  With
    ``inclusion=True`` every map must also pass ``certify_order_mono``.
    """

    def __init__(
        self,
        system_at: Callable[[int], ConcreteOperatorSystem],
        connect_at: Callable[[int], LinearMap],
        depth: int,
        *,
        inclusion: bool = False,
        certify: Certifier | None = None,
        certify_order_mono: Certifier | None = None,
        name: str = "",
        check_level: int = 2,
        samples: int = 50,
        seed: int = 0,
        tol: float = DEFAULT_EPS,
    ):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.depth = int(depth)
        self.inclusion = bool(inclusion)
        self.name = name
        self.tol = tol
        self._system_at = system_at
        self._connect_at = connect_at
        self._certify = certify or self._default_certify
        self._certify_mono = certify_order_mono or self._default_order_mono
        self._check_level = check_level
        self._samples = samples
        self._seed = seed
        self._systems: dict[int, ConcreteOperatorSystem] = {}
        self._maps: dict[int, LinearMap] = {}
        self._certs: dict[int, CpVerdict] = {}
        self._mono_certs: dict[int, CpVerdict] = {}
        self._lock = threading.Lock()

    @classmethod
    def explicit(
        cls,
        systems: Sequence[ConcreteOperatorSystem],
        connect: Sequence[LinearMap],
        *,
        inclusion: bool = False,
        **kwargs,
    ) -> "InductiveSequence":
        if len(connect) != len(systems) - 1:
            raise DimensionMismatch(f"{len(systems)} systems need {len(systems) - 1} connecting maps")
        seq = cls(
            lambda k: systems[k - 1], lambda k: connect[k - 1], len(systems), inclusion=inclusion, **kwargs
        )
        return seq

    def _default_certify(self, k: int, f: LinearMap) -> CpVerdict:
        return is_ucp(f, self._check_level, self._samples, self._seed + k, self.tol, choi_cap=CHOI_CAP)

    def _default_order_mono(self, k: int, f: LinearMap) -> CpVerdict:
        return is_complete_order_mono(f, self._check_level, self._samples, self._seed + k, self.tol)

    def _check_stage(self, k: int) -> None:
        if not 1 <= k <= self.depth:
            raise DepthExceeded(f"stage {k} is outside 1..{self.depth}")

    def system(self, k: int) -> ConcreteOperatorSystem:
        self._check_stage(k)
        if k not in self._systems:
            self.materialize(k)
        return self._systems[k]

    def connect(self, k: int) -> LinearMap:
        """``phi_k: S_k -> S_{k+1}``."""
        self._check_stage(k + 1)
        if k not in self._maps:
            self.materialize(k + 1)
        return self._maps[k]

    def certificate(self, k: int) -> CpVerdict:
        self.connect(k)
        return self._certs[k]

    def order_mono_certificate(self, k: int) -> CpVerdict | None:
        self.connect(k)
        return self._mono_certs.get(k)

    def materialize(self, k: int) -> None:
        """Build and check stages ``1..k``; concurrent callers see one build."""
        self._check_stage(k)
        with self._lock:
            for j in range(1, k + 1):
                if j not in self._systems:
                    self._systems[j] = self._system_at(j)
                if j > 1 and (j - 1) not in self._maps:
                    self._add_map(j - 1)

    def _add_map(self, k: int) -> None:
        f = self._connect_at(k)
        S, T = self._systems[k], self._systems[k + 1]
        if not (f.domain.same_as(S) and f.codomain.same_as(T)):
            raise DimensionMismatch(f"phi_{k} does not map S_{k} into S_{k + 1}")
        if not is_unital(f, self.tol):
            raise NotUnital(f"phi_{k} is not unital")
        cert = self._certify(k, f)
        if not cert.passed:
            raise NotUnital(f"phi_{k} failed the UCP check: {cert.status.value} ({cert.detail})")
        if self.inclusion:
            mono = self._certify_mono(k, f)
            if not mono.passed:
                raise ValueError(f"phi_{k} is not a complete order monomorphism: {mono.detail}")
            self._mono_certs[k] = mono
        self._maps[k] = f
        self._certs[k] = cert

    def connecting_maps(self, upto: int | None = None) -> list[LinearMap]:
        upto = self.depth if upto is None else upto
        return [self.connect(k) for k in range(1, upto)]


@dataclass(frozen=True, eq=False)
class LimitElement:
    """The class of ``x in M_n(S_k)`` in the limit; compare with :func:`limit_eq`."""

    stage: int
    rep: np.ndarray
    level: int = 1

    def __post_init__(self):
        if self.stage < 1:
            raise ValueError("stages start at 1")
        check_level(self.level)
        object.__setattr__(self, "rep", linalg.as_matrix(self.rep, "rep"))


class LimitStatus(str, Enum):
    YES = "Yes"
    NO = "No"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class LimitVerdict:
    status: LimitStatus
    stage_used: int
    epsilon_used: float | None = None
    detail: str = ""

    @property
    def yes(self) -> bool:
        return self.status is LimitStatus.YES

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "stage_used": self.stage_used,
            "epsilon_used": self.epsilon_used,
            "detail": self.detail,
        }


def canonical_injection(seq: InductiveSequence, k: int, x) -> LimitElement:
    """``x in M_n(S_k)`` as an element of the limit."""
    S = seq.system(k)
    x = linalg.as_matrix(x)
    n = S.level_of(x)
    inside, _, res = S.coordinates(n, x)
    if not inside:
        raise NotInSystem(f"element is not in M_{n}(S_{k}) (residual {res:.3e})")
    return LimitElement(k, x, n)


def limit_unit(seq: InductiveSequence, n: int = 1) -> LimitElement:
    return LimitElement(1, seq.system(1).unit(n), n)


def limit_zero(seq: InductiveSequence, n: int = 1) -> LimitElement:
    return LimitElement(1, np.zeros_like(seq.system(1).unit(n)), n)


def push_forward(seq: InductiveSequence, e: LimitElement, p: int) -> LimitElement:
    """Apply ``phi_{k,p}`` to the representative; the stage of ``e`` itself is untouched."""
    seq._check_stage(p)
    if p < e.stage:
        raise ValueError(f"cannot push stage {e.stage} back to {p}")
    rep = e.rep
    for k in range(e.stage, p):
        rep = apply(seq.connect(k), e.level, rep)
    return LimitElement(p, rep, e.level)


def limit_eq(seq: InductiveSequence, e1: LimitElement, e2: LimitElement, horizon: int | None = None, tol: float = DEFAULT_EPS) -> LimitVerdict:
    """Equality in the limit: some ``phi_{k,p}(x) = phi_{l,p}(y)``.

    For inclusion sequences agreement at ``max(k, l)`` decides the question
    (the maps are injective), so a No is certified.  Otherwise stages up to
    ``horizon`` are searched and exhausting them gives Unknown.
    """
    if e1.level != e2.level:
        raise LevelMismatch(f"levels differ: {e1.level} vs {e2.level}")
    start = max(e1.stage, e2.stage)
    seq._check_stage(start)
    last = min(seq.depth, start + DEFAULT_HORIZON if horizon is None else horizon)
    a, b = push_forward(seq, e1, start), push_forward(seq, e2, start)
    p = start
    while True:
        if linalg.max_abs(a.rep - b.rep) <= tol:
            return LimitVerdict(LimitStatus.YES, p, None, "representatives agree")
        if seq.inclusion:
            return LimitVerdict(LimitStatus.NO, p, None, "inclusion sequence: injective maps never merge elements")
        if p >= last:
            return LimitVerdict(LimitStatus.UNKNOWN, p, None, "horizon exhausted")
        a, b = push_forward(seq, a, p + 1), push_forward(seq, b, p + 1)
        p += 1


def limit_positive(
    seq: InductiveSequence,
    e: LimitElement,
    horizon: int | None = None,
    ladder: Sequence[float] = DEFAULT_LADDER,
    tol: float = DEFAULT_EPS,
) -> LimitVerdict:
    """Positivity in the Archimedeanized limit cone.

    Yes as soon as some stage ``l <= horizon`` has ``eps*1 + phi_{k,l}(x)``
    positive for ``eps`` = 0 or the smallest ladder entry.  For inclusion
    sequences a failure at the last stage by more than the largest ladder
    entry is a certified No; everything else is Unknown.
    """
    ladder = check_ladder(ladder)
    if linalg.hermitian_defect(e.rep) > tol:
        raise linalg.NotHermitian("limit positivity needs a Hermitian representative")
    last = min(seq.depth, e.stage + DEFAULT_HORIZON if horizon is None else horizon)
    if last < e.stage:
        raise DepthExceeded(f"horizon {last} is below the element's stage {e.stage}")
    best_eps = None
    cur = push_forward(seq, e, e.stage)
    lam = None
    for l in range(e.stage, last + 1):
        if l > e.stage:
            cur = push_forward(seq, cur, l)
        S = seq.system(l)
        # eps*1 shifts every eigenvalue by eps, so one spectrum serves the whole ladder
        lam = is_positive(S, e.level, cur.rep, tol).witness
        if lam >= -tol:
            return LimitVerdict(LimitStatus.YES, l, 0.0, "positive at this stage")
        if lam + ladder[-1] >= -tol:
            return LimitVerdict(LimitStatus.YES, l, ladder[-1], "positive after the smallest unit shift")
        passing = [eps for eps in ladder if lam + eps >= -tol]
        if passing and (best_eps is None or min(passing) < best_eps):
            best_eps = min(passing)
    if seq.inclusion and lam < -ladder[0] - tol:
        return LimitVerdict(LimitStatus.NO, last, ladder[0], f"min eigenvalue {lam:.3e} below every unit shift")
    return LimitVerdict(LimitStatus.UNKNOWN, last, best_eps, "only larger shifts pass" if best_eps else "horizon exhausted")


def limit_arith(seq: InductiveSequence, e1: LimitElement, e2=None, op: str = "add") -> LimitElement:
    """``add`` two elements, ``scale`` ``e1`` by the number ``e2``, or take the ``adjoint``."""
    if op == "adjoint":
        return LimitElement(e1.stage, e1.rep.conj().T, e1.level)
    if op == "scale":
        return LimitElement(e1.stage, complex(e2) * e1.rep, e1.level)
    if op != "add":
        raise ValueError(f"unknown operation {op!r}")
    if e1.level != e2.level:
        raise LevelMismatch(f"cannot add elements at levels {e1.level} and {e2.level}")
    p = max(e1.stage, e2.stage)
    a, b = push_forward(seq, e1, p), push_forward(seq, e2, p)
    return LimitElement(p, a.rep + b.rep, e1.level)


class UniversalMap:
    """The map out of the limit induced by a compatible family ``psi^(k): S_k -> T``."""

    def __init__(self, seq: InductiveSequence, target: ConcreteOperatorSystem, psi: Sequence[LinearMap], depth: int):
        self.seq = seq
        self.target = target
        self.psi = list(psi)
        self.depth = depth

    def __call__(self, e: LimitElement) -> np.ndarray:
        if e.stage > self.depth:
            raise DepthExceeded(f"no psi^({e.stage}) supplied (depth {self.depth})")
        return apply(self.psi[e.stage - 1], e.level, e.rep)


def universal_map(
    seq: InductiveSequence,
    target: ConcreteOperatorSystem,
    psi: Sequence[LinearMap],
    depth: int | None = None,
    tol: float = DEFAULT_EPS,
) -> UniversalMap:
    """Check ``psi^(k+1) o phi_k = psi^(k)`` on each basis of ``S_k`` and return the limit map.

    Raises IncompatibleFamily naming the first failing ``k`` and basis index.
    """
    depth = len(psi) if depth is None else depth
    if depth > len(psi):
        raise DimensionMismatch(f"depth {depth} needs {depth} maps, got {len(psi)}")
    seq._check_stage(depth)
    for k in range(1, depth + 1):
        f = psi[k - 1]
        if not f.domain.same_as(seq.system(k)) or not f.codomain.same_as(target):
            raise DimensionMismatch(f"psi^({k}) does not map S_{k} into {target.name}")
    for k in range(1, depth):
        basis = seq.system(k).basis
        phi = seq.connect(k)
        lhs = psi[k]._act(phi._act(basis))
        rhs = psi[k - 1]._act(basis)
        bad = _first_bad(lhs, rhs, tol)
        if bad is not None:
            raise IncompatibleFamily(
                f"psi^({k + 1}) o phi_{k} != psi^({k}) on basis element {bad} of S_{k}", k, bad
            )
    return UniversalMap(seq, target, psi, depth)


def _first_bad(lhs: np.ndarray, rhs: np.ndarray, tol: float) -> int | None:
    n = len(lhs)
    bad = np.max(np.abs(lhs - rhs).reshape(n, -1), axis=1)
    idx = np.nonzero(bad > tol)[0]
    return int(idx[0]) if idx.size else None


class InducedMap:
    """The map between limits induced by ``pi_k: S_k -> T_k`` commuting with the connecting maps."""

    def __init__(self, seq_s: InductiveSequence, seq_t: InductiveSequence, pi: Sequence[LinearMap], depth: int):
        self.seq_s = seq_s
        self.seq_t = seq_t
        self.pi = list(pi)
        self.depth = depth

    def __call__(self, e: LimitElement) -> LimitElement:
        if e.stage > self.depth:
            raise DepthExceeded(f"no pi_{e.stage} supplied (depth {self.depth})")
        return LimitElement(e.stage, apply(self.pi[e.stage - 1], e.level, e.rep), e.level)


def induced_map(
    seq_s: InductiveSequence,
    seq_t: InductiveSequence,
    pi: Sequence[LinearMap],
    depth: int | None = None,
    tol: float = DEFAULT_EPS,
) -> InducedMap:
    """Check ``psi_k o pi_k = pi_{k+1} o phi_k`` on each basis of ``S_k`` and return the limit map."""
    depth = len(pi) if depth is None else depth
    if depth > len(pi):
        raise DimensionMismatch(f"depth {depth} needs {depth} maps, got {len(pi)}")
    seq_s._check_stage(depth)
    seq_t._check_stage(depth)
    for k in range(1, depth + 1):
        f = pi[k - 1]
        if not f.domain.same_as(seq_s.system(k)) or not f.codomain.same_as(seq_t.system(k)):
            raise DimensionMismatch(f"pi_{k} does not map S_{k} into T_{k}")
    for k in range(1, depth):
        basis = seq_s.system(k).basis
        lhs = seq_t.connect(k)._act(pi[k - 1]._act(basis))
        rhs = pi[k]._act(seq_s.connect(k)._act(basis))
        bad = _first_bad(lhs, rhs, tol)
        if bad is not None:
            raise IncompatibleSquare(
                f"psi_{k} o pi_{k} != pi_{k + 1} o phi_{k} on basis element {bad} of S_{k}", k, bad
            )
    return InducedMap(seq_s, seq_t, pi, depth)
