"""Concrete operator systems inside matrix algebras and their cones.

A concrete operator system is a unital, adjoint-closed subspace of ``M_d``
given by a basis whose first element is the identity.  Its matrix levels
``M_n(S)`` sit inside ``M_n(M_d) = M_{nd}`` as block matrices, and the
positive cone at level ``n`` is the PSD cone of that ambient algebra.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import (
    DependentBasis,
    DimensionMismatch,
    EmptyLadder,
    MissingUnit,
    NotAdjointClosed,
    NotInSystem,
)
from .linalg import DEFAULT_EPS

DEFAULT_LADDER = (1e-3, 1e-6, 1e-9)


class ConeStatus(str, Enum):
    POSITIVE = "Positive"
    NOT_POSITIVE = "NotPositive"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ConeVerdict:
    status: ConeStatus
    witness: float | None = None
    detail: str = ""

    @property
    def positive(self) -> bool:
        return self.status is ConeStatus.POSITIVE

    def to_json(self) -> dict:
        return {"status": self.status.value, "witness": self.witness, "detail": self.detail}


def check_level(n: int) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"matrix level must be a positive integer, got {n}")
    return int(n)


def blocks(m: np.ndarray, n: int, d: int) -> np.ndarray:
    """View an ``nd x nd`` matrix as an ``(n, n, d, d)`` array of blocks."""
    return m.reshape(n, d, n, d).transpose(0, 2, 1, 3)


def unblock(b: np.ndarray) -> np.ndarray:
    n, _, d, e = b.shape
    return b.transpose(0, 2, 1, 3).reshape(n * d, n * e)


class ConcreteOperatorSystem:
    """Unital, adjoint-closed subspace of ``M_d`` with a fixed basis.

    Use :func:`new_concrete` for an explicit basis and
    :func:`full_matrix_algebra` for ``M_d`` itself; the latter never
    materializes its ``d**2`` basis matrices unless asked to.
    """

    def __init__(self, ambient_dim: int, basis, name: str = "", tol: float = DEFAULT_EPS, *, _full: bool = False):
        d = int(ambient_dim)
        if d < 1:
            raise ValueError("ambient dimension must be positive")
        self.ambient_dim = d
        self.name = name
        self.tol = linalg.check_tol(tol)
        self._full = _full
        self._basis = None
        if _full:
            self.dim = d * d
            return

        mats = [linalg.as_matrix(b, f"basis[{i}]") for i, b in enumerate(basis)]
        if not mats:
            raise MissingUnit("empty basis: the identity must be basis[0]")
        for i, b in enumerate(mats):
            if b.shape != (d, d):
                raise DimensionMismatch(f"basis[{i}] has shape {b.shape}, expected {(d, d)}")
        if linalg.max_abs(mats[0] - np.eye(d)) > self.tol:
            raise MissingUnit("basis[0] must be the identity matrix")
        self._basis = np.stack(mats)
        self.dim = len(mats)

        cols = self._basis.reshape(self.dim, d * d).T
        gram = cols.conj().T @ cols
        if self.dim > d * d or linalg.min_eigenvalue(gram, self.tol) <= self.tol:
            raise DependentBasis("basis matrices are linearly dependent")
        self._q, self._r = np.linalg.qr(cols)

        adj = self._basis.conj().transpose(0, 2, 1).reshape(self.dim, d * d)
        res = adj.T - self._q @ (self._q.conj().T @ adj.T)
        bad = np.linalg.norm(res, axis=0)
        if np.any(bad > self.tol):
            i = int(np.argmax(bad))
            raise NotAdjointClosed(f"adjoint of basis[{i}] is not in the span (residual {bad[i]:.3e})")

    def __repr__(self) -> str:
        kind = "full" if self._full else f"dim={self.dim}"
        return f"ConcreteOperatorSystem({self.name!r}, d={self.ambient_dim}, {kind})"

    @property
    def is_full_algebra(self) -> bool:
        return self.dim == self.ambient_dim ** 2

    @property
    def basis(self) -> np.ndarray:
        """Basis as a ``(dim, d, d)`` array; built on demand for ``M_d``."""
        if self._basis is None:
            self._basis = self.from_coordinates(np.eye(self.dim, dtype=complex))
        return self._basis

    def unit(self, n: int = 1) -> np.ndarray:
        return np.eye(check_level(n) * self.ambient_dim, dtype=complex)

    def from_coordinates(self, coords) -> np.ndarray:
        """Map coordinate vectors ``(..., dim)`` to matrices ``(..., d, d)``."""
        coords = np.asarray(coords, dtype=complex)
        d = self.ambient_dim
        if self._full:
            x = coords.reshape(coords.shape[:-1] + (d, d)).copy()
            diag = np.arange(1, d)
            x[..., diag, diag] += coords[..., :1]
            return x
        return np.tensordot(coords, self._basis, axes=([-1], [0]))

    def _block_coordinates(self, b: np.ndarray) -> tuple[np.ndarray, float]:
        # b: (..., d, d) -> coordinates (..., dim) and Frobenius residual
        d = self.ambient_dim
        flat = b.reshape(b.shape[:-2] + (d * d,))
        if self._full:
            c = flat.copy()
            diag = np.arange(1, d) * (d + 1)
            c[..., diag] -= flat[..., :1]
            return c, 0.0
        proj = flat @ self._q.conj()
        res = flat - proj @ self._q.T
        c = np.linalg.solve(self._r, proj.reshape(-1, self.dim).T).T.reshape(proj.shape)
        return c, float(np.linalg.norm(res))

    def coordinates(self, n: int, m) -> tuple[bool, np.ndarray | None, float]:
        """Least-squares coordinates of ``m`` over ``basis x matrix units``.

        Returns ``(inside, coords, residual)`` where ``coords`` has shape
        ``(n, n, dim)`` and is ``None`` when the residual exceeds ``tol``.
        """
        n = check_level(n)
        m = linalg.as_matrix(m)
        size = n * self.ambient_dim
        if m.shape != (size, size):
            raise DimensionMismatch(f"expected a {size}x{size} matrix at level {n}, got {m.shape}")
        c, res = self._block_coordinates(blocks(m, n, self.ambient_dim))
        inside = res <= self.tol
        return inside, (c if inside else None), res

    def contains(self, n: int, m) -> bool:
        return self.coordinates(n, m)[0]

    def element(self, coords) -> np.ndarray:
        """Assemble the level-``n`` element with coordinates ``(n, n, dim)``."""
        return unblock(self.from_coordinates(coords))

    def level_of(self, m) -> int:
        m = np.asarray(m)
        n, r = divmod(m.shape[0], self.ambient_dim)
        if r or m.ndim != 2 or m.shape[0] != m.shape[1] or n < 1:
            raise DimensionMismatch(
                f"matrix of shape {m.shape} is not a level of an M_{self.ambient_dim} system"
            )
        return n

    def oracle(self, tol: float | None = None) -> "ConeOracle":
        tol = self.tol if tol is None else tol
        return ConeOracle(lambda n, u: is_positive(self, n, u, tol), self.unit(1), self.name)

    def same_as(self, other: "ConcreteOperatorSystem") -> bool:
        if other is self:
            return True
        if self.ambient_dim != other.ambient_dim or self.dim != other.dim:
            return False
        if self._full and other._full:
            return True
        return linalg.max_abs(self.basis - other.basis) <= self.tol


def new_concrete(ambient_dim: int, basis: Sequence, name: str = "", tol: float = DEFAULT_EPS) -> ConcreteOperatorSystem:
    """Validate and build a concrete operator system.

    Raises MissingUnit, DependentBasis or NotAdjointClosed when the basis
    fails the corresponding invariant.
    """
    return ConcreteOperatorSystem(ambient_dim, basis, name, tol)


def full_matrix_algebra(d: int, name: str | None = None, tol: float = DEFAULT_EPS) -> ConcreteOperatorSystem:
    """``M_d`` with basis ``[I] + [E_ab for (a, b) != (0, 0)]`` (row-major)."""
    return ConcreteOperatorSystem(d, None, f"M{d}" if name is None else name, tol, _full=True)


def diagonal_system(d: int = 2, name: str | None = None) -> ConcreteOperatorSystem:
    """The commutative system of diagonal ``d x d`` matrices."""
    basis = [np.eye(d)]
    for k in range(1, d):
        e = np.zeros((d, d))
        e[0, 0], e[k, k] = 1.0, -1.0
        basis.append(e)
    return new_concrete(d, basis, f"D{d}" if name is None else name)


def is_positive(S: ConcreteOperatorSystem, n: int, m, tol: float = DEFAULT_EPS) -> ConeVerdict:
    """Decide ``m in M_n(S)^+`` via the ambient PSD cone."""
    inside, _, res = S.coordinates(n, m)
    if not inside:
        raise NotInSystem(f"element is not in M_{n}({S.name}) (residual {res:.3e})")
    lam = linalg.min_eigenvalue(m, tol)
    status = ConeStatus.POSITIVE if lam >= -tol else ConeStatus.NOT_POSITIVE
    return ConeVerdict(status, lam, "min eigenvalue")


@dataclass(frozen=True)
class ConeOracle:
    """Abstract matrix-ordered cone: a level tester plus an order unit."""

    level_tester: Callable[[int, np.ndarray], ConeVerdict]
    unit: np.ndarray
    name: str = ""

    def unit_at(self, n: int) -> np.ndarray:
        return np.kron(np.eye(check_level(n)), self.unit)

    def test(self, n: int, u) -> ConeVerdict:
        return self.level_tester(check_level(n), linalg.as_matrix(u))


def check_ladder(ladder: Sequence[float]) -> tuple[float, ...]:
    ladder = tuple(float(x) for x in ladder)
    if not ladder:
        raise EmptyLadder("the epsilon ladder must be nonempty")
    if any(x <= 0 for x in ladder):
        raise ValueError("ladder entries must be strictly positive")
    if any(a <= b for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly descending")
    return ladder


def archimedeanize(oracle: ConeOracle, ladder: Sequence[float] = DEFAULT_LADDER) -> ConeOracle:
    """Archimedean closure of a cone, tested along a finite epsilon ladder.

    ``u`` is Positive when ``eps*1_n + u`` passes the base oracle at the
    smallest ladder entry, Unknown when only larger entries pass, and
    NotPositive when every entry fails.
    """
    ladder = check_ladder(ladder)

    def tester(n: int, u: np.ndarray) -> ConeVerdict:
        unit_n = oracle.unit_at(n)
        passed = None
        for eps in ladder:
            if oracle.test(n, eps * unit_n + u).positive:
                passed = eps
        if passed == ladder[-1]:
            return ConeVerdict(ConeStatus.POSITIVE, passed, "archimedean: smallest epsilon passes")
        if passed is not None:
            return ConeVerdict(ConeStatus.UNKNOWN, passed, "archimedean: only larger epsilon passes")
        return ConeVerdict(ConeStatus.NOT_POSITIVE, ladder[0], "archimedean: every epsilon fails")

    return ConeOracle(tester, oracle.unit, f"Arch({oracle.name})")


def random_hermitian_element(S: ConcreteOperatorSystem, n: int, rng: np.random.Generator) -> np.ndarray:
    """Random Hermitian element of ``M_n(S)``."""
    shape = (n, n, S.dim)
    c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    x = S.element(c)
    return (x + x.conj().T) / 2


def random_positive_element(
    S: ConcreteOperatorSystem, n: int, rng: np.random.Generator, margin: float = 0.0
) -> np.ndarray:
    """Random element of ``M_n(S)^+`` with smallest eigenvalue ``margin``.

    A random Hermitian element is shifted by a multiple of the unit, which
    keeps it inside the system; ``margin=0`` lands on the cone boundary.
    """
    h = random_hermitian_element(S, n, rng)
    lam = linalg.min_eigenvalue(h, S.tol)
    return h + (margin - lam) * S.unit(n)
