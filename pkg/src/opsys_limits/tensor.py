"""min and max tensor cones of two concrete operator systems.

Elements of ``M_n(S (x) T)`` are stored spatially as ``n*dS*dT`` square
matrices with index order ``(level, left, right)``.  The min cone is the
ambient PSD cone.  The max cone is generated by ``alpha (P (x) Q) alpha*``
with ``P in M_l(S)^+``, ``Q in M_m(T)^+`` and scalar ``alpha``, then closed
Archimedean-style; membership is shown by a :class:`MaxCertificate` that
anyone can re-check by reconstruction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import DimensionMismatch, NecessaryConditionFailed, NotInSpan, NotPositiveFactor
from .linalg import DEFAULT_EPS
from .opsys import (
    DEFAULT_LADDER,
    ConcreteOperatorSystem,
    ConeStatus,
    ConeVerdict,
    blocks,
    check_ladder,
    check_level,
    full_matrix_algebra,
    is_positive,
    new_concrete,
    random_positive_element,
)

CERT_TOL_FACTOR = 100

_products: dict[tuple[int, int], ConcreteOperatorSystem] = {}


def product_system(left: ConcreteOperatorSystem, right: ConcreteOperatorSystem) -> ConcreteOperatorSystem:
    """The algebraic tensor product as a concrete system inside ``M_{dS*dT}``."""
    key = (id(left), id(right))
    cached = _products.get(key)
    if cached is not None:
        return cached
    name = f"{left.name}(x){right.name}"
    if left.is_full_algebra and right.is_full_algebra:
        prod = full_matrix_algebra(left.ambient_dim * right.ambient_dim, name, left.tol)
    else:
        basis = np.einsum("iab,jcd->ijacbd", left.basis, right.basis).reshape(
            left.dim * right.dim, left.ambient_dim * right.ambient_dim, -1
        )
        prod = new_concrete(left.ambient_dim * right.ambient_dim, basis, name, left.tol)
    # keep operands alive so the id() key stays valid
    _products[key] = prod
    prod._operands = (left, right)
    return prod


@dataclass(frozen=True)
class TensorElement:
    left: ConcreteOperatorSystem
    right: ConcreteOperatorSystem
    level: int
    matrix: np.ndarray

    def __post_init__(self):
        check_level(self.level)
        m = linalg.as_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        size = self.level * self.left.ambient_dim * self.right.ambient_dim
        if m.shape != (size, size):
            raise DimensionMismatch(f"expected a {size}x{size} matrix, got {m.shape}")
        inside, _, res = product_system(self.left, self.right).coordinates(self.level, m)
        if not inside:
            raise NotInSpan(f"element is not in M_{self.level}({self.left.name} (x) {self.right.name}) (residual {res:.3e})")

    @property
    def unit(self) -> np.ndarray:
        return np.eye(self.matrix.shape[0], dtype=complex)


def shuffle_permutation(l: int, m: int, dS: int, dT: int) -> np.ndarray:
    """Index map from ``kron(P, Q)`` order ``(l, dS, m, dT)`` to ``(l, m, dS, dT)``."""
    return np.arange(l * dS * m * dT).reshape(l, dS, m, dT).transpose(0, 2, 1, 3).reshape(-1)


def spatial_alpha(alpha, l: int, m: int, dS: int, dT: int) -> np.ndarray:
    """``(alpha (x) I_{dS dT}) W`` with ``W`` the shuffle above.

    With this matrix the max generator is literally
    ``congruence(spatial_alpha, kron(P, Q))``.
    """
    alpha = linalg.as_matrix(alpha, "alpha")
    if alpha.shape[1] != l * m:
        raise DimensionMismatch(f"alpha must have l*m = {l * m} columns, got {alpha.shape[1]}")
    lifted = np.kron(alpha, np.eye(dS * dT))
    return lifted[:, np.argsort(shuffle_permutation(l, m, dS, dT))]


def swap_factors(matrix: np.ndarray, n: int, dS: int, dT: int) -> np.ndarray:
    """Reorder a spatial element of ``M_n(S (x) T)`` into ``M_n(T (x) S)``."""
    perm = np.arange(n * dS * dT).reshape(n, dS, dT).transpose(0, 2, 1).reshape(-1)
    return matrix[np.ix_(perm, perm)]


@dataclass(frozen=True)
class MaxCertificate:
    """Witness that ``epsilon*1 + u = alpha (P (x) Q) alpha*``."""

    alpha: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    l: int
    m: int
    epsilon: float = 0.0
    method: str = field(default="", compare=False)

    def reconstruct(self, dS: int, dT: int) -> np.ndarray:
        return linalg.congruence(spatial_alpha(self.alpha, self.l, self.m, dS, dT), np.kron(self.P, self.Q))

    def residual(self, u: TensorElement) -> float:
        dS, dT = u.left.ambient_dim, u.right.ambient_dim
        if self.alpha.shape[0] != u.level:
            return float("inf")
        return linalg.max_abs(self.epsilon * u.unit + u.matrix - self.reconstruct(dS, dT))

    def verify(self, u: TensorElement, tol: float = DEFAULT_EPS) -> bool:
        """Reconstruction within ``100*tol`` and both factors positive."""
        if self.residual(u) > CERT_TOL_FACTOR * tol:
            return False
        for S, k, X in ((u.left, self.l, self.P), (u.right, self.m, self.Q)):
            if X.shape != (k * S.ambient_dim,) * 2 or not S.contains(k, X):
                return False
            if linalg.hermitian_defect(X) > tol or not is_positive(S, k, X, tol).positive:
                return False
        return True

    def to_json(self) -> dict:
        from .serialization import matrix_to_json

        return {
            "alpha": matrix_to_json(self.alpha),
            "P": matrix_to_json(self.P),
            "Q": matrix_to_json(self.Q),
            "l": self.l,
            "m": self.m,
            "epsilon": self.epsilon,
        }


def min_positive(u: TensorElement, tol: float = DEFAULT_EPS) -> ConeVerdict:
    """Spatial (min) positivity of a tensor element."""
    lam = linalg.min_eigenvalue(u.matrix, tol)
    status = ConeStatus.POSITIVE if lam >= -tol else ConeStatus.NOT_POSITIVE
    return ConeVerdict(status, lam, "min eigenvalue of the spatial matrix")


def max_generate(
    left: ConcreteOperatorSystem,
    right: ConcreteOperatorSystem,
    n: int,
    alpha,
    P,
    Q,
    tol: float = DEFAULT_EPS,
) -> tuple[TensorElement, MaxCertificate]:
    """Build ``alpha (P (x) Q) alpha*`` together with its exact certificate."""
    n = check_level(n)
    P = linalg.as_matrix(P, "P")
    Q = linalg.as_matrix(Q, "Q")
    alpha = linalg.as_matrix(alpha, "alpha")
    l, m = left.level_of(P), right.level_of(Q)
    if alpha.shape != (n, l * m):
        raise DimensionMismatch(f"alpha must be {n}x{l * m}, got {alpha.shape}")
    for name, S, k, X in (("P", left, l, P), ("Q", right, m, Q)):
        if not S.contains(k, X) or not is_positive(S, k, X, tol).positive:
            raise NotPositiveFactor(f"{name} is not in M_{k}({S.name})^+")
    cert = MaxCertificate(alpha, P, Q, l, m, 0.0, "generator")
    u = TensorElement(left, right, n, cert.reconstruct(left.ambient_dim, right.ambient_dim))
    return u, cert


def block_diag(mats: Sequence[np.ndarray]) -> np.ndarray:
    size = sum(x.shape[0] for x in mats)
    out = np.zeros((size, size), dtype=complex)
    k = 0
    for x in mats:
        s = x.shape[0]
        out[k:k + s, k:k + s] = x
        k += s
    return out


@dataclass(frozen=True)
class Term:
    """One summand ``alpha (P (x) Q) alpha*`` of a max-cone decomposition."""

    alpha: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    l: int
    m: int


def combine_terms(terms: Sequence[Term], epsilon: float = 0.0, method: str = "") -> MaxCertificate:
    """Absorb a sum of generators into one, via ``P = (+)P_r``, ``Q = (+)Q_r``.

    ``alpha`` only touches the diagonal ``(r, r)`` blocks of
    ``P (x) Q``; the cross blocks vanish because ``P`` is block diagonal.
    """
    if not terms:
        raise ValueError("need at least one term")
    n = terms[0].alpha.shape[0]
    l_tot = sum(t.l for t in terms)
    m_tot = sum(t.m for t in terms)
    alpha = np.zeros((n, l_tot * m_tot), dtype=complex)
    lo = mo = 0
    for t in terms:
        cols = ((lo + np.arange(t.l))[:, None] * m_tot + (mo + np.arange(t.m))[None, :]).reshape(-1)
        alpha[:, cols] = t.alpha
        lo += t.l
        mo += t.m
    P = block_diag([t.P for t in terms])
    Q = block_diag([t.Q for t in terms])
    return MaxCertificate(alpha, P, Q, l_tot, m_tot, float(epsilon), method)


@dataclass
class SearchBudget:
    """Search limits; ``l_max``/``m_max`` default to ``2n`` and cap each summand."""

    l_max: int | None = None
    m_max: int | None = None
    restarts: int = 50
    seed: int = 0
    iterations: int = 40
    terms: int = 4

    @classmethod
    def coerce(cls, budget) -> "SearchBudget":
        if budget is None:
            return cls()
        if isinstance(budget, cls):
            return budget
        return cls(**dict(budget))


def hermitian_orthonormal_basis(S: ConcreteOperatorSystem) -> np.ndarray:
    """Real-orthonormal Hermitian basis of ``S``, first element ``1/sqrt(d)``."""
    d = S.ambient_dim
    cands = [np.eye(d, dtype=complex)]
    for b in S.basis:
        cands.append((b + b.conj().T) / 2)
        cands.append((b - b.conj().T) / 2j)
    out: list[np.ndarray] = []
    for c in cands:
        v = c.copy()
        for e in out:
            v = v - np.real(np.vdot(e, v)) * e
        nrm = np.linalg.norm(v)
        if nrm > 1e-7:
            out.append(v / nrm)
        if len(out) == S.dim:
            break
    return np.stack(out)


def _expand_right(u: np.ndarray, n: int, S: ConcreteOperatorSystem, T: ConcreteOperatorSystem) -> tuple[np.ndarray, np.ndarray]:
    """``u = sum_k A_k (x) t_k`` with ``t_k`` Hermitian orthonormal in ``T``."""
    N, dT = n * S.ambient_dim, T.ambient_dim
    t = hermitian_orthonormal_basis(T)
    U = u.reshape(N, dT, N, dT)
    A = np.einsum("acbd,kdc->kab", U, t)
    A = (A + A.conj().transpose(0, 2, 1)) / 2
    return A, t


def _archimedean_terms(
    u: np.ndarray, n: int, S: ConcreteOperatorSystem, T: ConcreteOperatorSystem, tol: float
) -> tuple[list[Term], float, np.ndarray, float]:
    """Decompose ``eps*1 + u`` into generators.

    Returns the non-unit terms, the ``eps`` needed, the unit component and
    the total cost of the non-unit terms.

    Each non-unit summand ``A_k (x) t_k`` is covered by
    ``[(a+A)/2 (x) (b+t) + (a-A)/2 (x) (b-t)] = ab*1 + A (x) t`` with
    ``a = ||A||``, ``b = ||t||``; whatever the unit component cannot pay
    for becomes ``eps``.
    """
    dT = T.ambient_dim
    A, t = _expand_right(u, n, S, T)
    ident_n = np.eye(n)
    unit_part = A[0] / np.sqrt(dT)
    terms: list[Term] = []
    cost = 0.0
    for Ak, tk in zip(A[1:], t[1:]):
        a = linalg.operator_norm(Ak, tol)
        b = linalg.operator_norm(tk, tol)
        if a * b <= 0:
            continue
        cost += a * b
        ia = a * np.eye(Ak.shape[0])
        ib = b * np.eye(dT)
        terms.append(Term(ident_n, (ia + Ak) / 2, ib + tk, n, 1))
        terms.append(Term(ident_n, (ia - Ak) / 2, ib - tk, n, 1))
    eps = max(0.0, cost - linalg.min_eigenvalue(unit_part, tol))
    return terms, eps, unit_part, cost


def _finish_archimedean(terms, unit_part, cost, eps, n, dT) -> list[Term]:
    shift = eps - cost
    P0 = unit_part + shift * np.eye(unit_part.shape[0])
    return terms + [Term(np.eye(n), P0, np.eye(dT, dtype=complex), n, 1)]


def _swap_term(term: Term, n: int) -> Term:
    # a (left=T, right=S) term becomes a (left=S, right=T) term
    alpha = term.alpha.reshape(n, term.l, term.m).transpose(0, 2, 1).reshape(n, -1)
    return Term(alpha, term.Q, term.P, term.m, term.l)


def _nuclear_left(u: TensorElement) -> Term:
    # left = M_p: P = sum E_cd (x) E_cd at level p, Q = u read as an element of M_{np}(T)
    n, p = u.level, u.left.ambient_dim
    P = np.outer(np.eye(p).reshape(-1), np.eye(p).reshape(-1)).astype(complex)
    alpha = np.zeros((n, p * n * p), dtype=complex)
    for i in range(n):
        for a in range(p):
            alpha[i, a * (n * p) + i * p + a] = 1
    return Term(alpha, P, u.matrix.copy(), p, n * p)


def _ladder_pick(eps_needed: float, ladder: Sequence[float], tol: float) -> float | None:
    if eps_needed <= tol:
        return 0.0
    for e in sorted(ladder):
        if e >= eps_needed:
            return e
    return None


class _Search:
    def __init__(self, u: TensorElement, ladder, budget: SearchBudget, tol: float):
        self.u = u
        self.ladder = ladder
        self.budget = budget
        self.tol = tol
        self.best: MaxCertificate | None = None
        n = u.level
        self.l_max = budget.l_max if budget.l_max is not None else 2 * n
        self.m_max = budget.m_max if budget.m_max is not None else 2 * n

    def fits(self, terms: Sequence[Term]) -> bool:
        return all(t.l <= self.l_max and t.m <= self.m_max for t in terms)

    def offer(self, terms: Sequence[Term], eps: float | None, method: str) -> bool:
        """Record a candidate if it verifies; True once an exact one is held."""
        if eps is None or not terms or not self.fits(terms):
            return self.done
        if self.best is not None and eps >= self.best.epsilon:
            return self.done
        cert = combine_terms(terms, eps, method)
        if cert.verify(self.u, self.tol):
            self.best = cert
        return self.done

    @property
    def done(self) -> bool:
        return self.best is not None and self.best.epsilon == 0.0

    def archimedean(self, r: np.ndarray, extra: Sequence[Term], method: str) -> None:
        u, n, tol = self.u, self.u.level, self.tol
        S, T = u.left, u.right
        dS, dT = S.ambient_dim, T.ambient_dim
        # expand along the right factor, then along the left one via the swap
        terms, need, unit_part, cost = _archimedean_terms(r, n, S, T, tol)
        eps = _ladder_pick(need, self.ladder, tol)
        if eps is not None:
            self.offer(list(extra) + _finish_archimedean(terms, unit_part, cost, eps, n, dT), eps, method)
        if self.done:
            return
        rs = swap_factors(r, n, dS, dT)
        terms, need, unit_part, cost = _archimedean_terms(rs, n, T, S, tol)
        eps = _ladder_pick(need, self.ladder, tol)
        if eps is not None:
            swapped = [_swap_term(t, n) for t in _finish_archimedean(terms, unit_part, cost, eps, n, dS)]
            self.offer(list(extra) + swapped, eps, method)

    def refit(self, rng: np.random.Generator) -> None:
        """Alternating least squares for ``u ~ sum_r A_r (x) B_r`` with PSD factors.

        ``A_r in M_n(S)^+`` and ``B_r in T^+``; the leftover residual is
        handed to the Archimedean decomposition, so any fit converts into an
        exact certificate at some epsilon.
        """
        u, n, tol = self.u, self.u.level, self.tol
        S, T = u.left, u.right
        R = max(1, self.budget.terms)
        Bs = [random_positive_element(T, 1, rng, margin=float(rng.uniform(0, 0.5))) for _ in range(R)]
        As = [None] * R
        target = u.matrix.reshape(-1)
        basis_A = _level_basis(S, n)
        for _ in range(self.budget.iterations):
            As = _fit_factor(target, basis_A, Bs, left=True, S=S, n=n, tol=tol)
            Bs = _fit_factor(target, T.basis, As, left=False, S=T, n=1, tol=tol)
        G = sum(np.kron(A, B) for A, B in zip(As, Bs))
        extra = [Term(np.eye(n), A, B, n, 1) for A, B in zip(As, Bs)]
        self.archimedean(u.matrix - G, extra, "refit")


def _level_basis(S: ConcreteOperatorSystem, n: int) -> np.ndarray:
    # basis of M_n(S): E_ij (x) b
    e = np.eye(n)
    out = np.einsum("ia,jb,kcd->ijkacbd", e, e, S.basis)
    return out.reshape(n * n * S.dim, n * S.ambient_dim, n * S.ambient_dim)


def _psd_in_system(X: np.ndarray, S: ConcreteOperatorSystem, n: int, tol: float) -> np.ndarray:
    # clip negative eigenvalues, return to the span, then lift by the unit
    X = (X + X.conj().T) / 2
    w, V = linalg.jacobi_eigh(X, tol)
    Y = (V * np.maximum(w, 0)) @ V.conj().T
    c, _ = S._block_coordinates(blocks(Y, n, S.ambient_dim))
    Y = S.element(c)
    Y = (Y + Y.conj().T) / 2
    lam = linalg.min_eigenvalue(Y, tol)
    if lam < 0:
        Y = Y - lam * np.eye(Y.shape[0])
    return Y


def _fit_factor(target, basis, others, *, left: bool, S, n, tol) -> list[np.ndarray]:
    cols = []
    for O in others:
        for b in basis:
            cols.append((np.kron(b, O) if left else np.kron(O, b)).reshape(-1))
    design = np.stack(cols, axis=1)
    coef = np.linalg.lstsq(design, target, rcond=None)[0].reshape(len(others), len(basis))
    out = []
    for c in coef:
        X = np.tensordot(c, basis, axes=([0], [0]))
        out.append(_psd_in_system(X, S, n, tol))
    return out


def max_certificate_search(
    u: TensorElement,
    ladder: Sequence[float] = DEFAULT_LADDER,
    budget=None,
    hint: MaxCertificate | None = None,
    tol: float = DEFAULT_EPS,
) -> MaxCertificate | None:
    """Look for a self-verifying max certificate of ``u``.

    Tries, in order: the ``hint``; the exact construction available when a
    factor is a full matrix algebra; an Archimedean decomposition along
    Hermitian bases; and ``restarts`` rounds of alternating refits.  The
    certificate with the smallest epsilon (0 or a ladder value) wins.
    ``None`` means nothing was found, which is not a disproof.
    """
    ladder = check_ladder(ladder)
    budget = SearchBudget.coerce(budget)
    if not min_positive(u, tol).positive:
        raise NecessaryConditionFailed("element is not min-positive, so it cannot be max-positive")
    search = _Search(u, ladder, budget, tol)

    if hint is not None and hint.verify(u, tol):
        search.best = hint
        if search.done:
            return hint

    n = u.level
    if u.left.is_full_algebra:
        search.offer([_nuclear_left(u)], 0.0, "full-left")
    if not search.done and u.right.is_full_algebra:
        dS, dT = u.left.ambient_dim, u.right.ambient_dim
        swapped = TensorElement(u.right, u.left, n, swap_factors(u.matrix, n, dS, dT))
        search.offer([_swap_term(_nuclear_left(swapped), n)], 0.0, "full-right")
    if search.done:
        return search.best

    search.archimedean(u.matrix, [], "archimedean")
    rng = np.random.default_rng(budget.seed)
    for _ in range(budget.restarts):
        if search.done:
            break
        search.refit(rng)
    return search.best


@dataclass
class MinMaxReport:
    left: str
    right: str
    level: int
    samples: int
    seed: int
    passed: int = 0
    certificates_verified: int = 0
    outcomes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "left": self.left,
            "right": self.right,
            "level": self.level,
            "samples": self.samples,
            "seed": self.seed,
            "passed": self.passed,
            "certificates_verified": self.certificates_verified,
            "outcomes": self.outcomes,
        }


def random_generator(
    left: ConcreteOperatorSystem,
    right: ConcreteOperatorSystem,
    n: int,
    rng: np.random.Generator,
    max_l: int = 2,
    max_m: int = 2,
) -> tuple[TensorElement, MaxCertificate]:
    """A random max generator with boundary-or-interior positive factors."""
    l = int(rng.integers(1, max_l + 1))
    m = int(rng.integers(1, max_m + 1))
    P = random_positive_element(left, l, rng, margin=float(rng.choice([0.0, rng.exponential()])))
    Q = random_positive_element(right, m, rng, margin=float(rng.choice([0.0, rng.exponential()])))
    alpha = rng.normal(size=(n, l * m)) + 1j * rng.normal(size=(n, l * m))
    return max_generate(left, right, n, alpha, P, Q)


def min_leq_max_check(
    left: ConcreteOperatorSystem,
    right: ConcreteOperatorSystem,
    n: int,
    samples: int = 100,
    seed: int = 0,
    tol: float = DEFAULT_EPS,
) -> MinMaxReport:
    """Random max generators must all be min-positive."""
    rng = np.random.default_rng(seed)
    report = MinMaxReport(left.name, right.name, n, samples, seed)
    for i in range(samples):
        u, cert = random_generator(left, right, n, rng)
        verdict = min_positive(u, tol)
        ok_cert = cert.verify(u, tol)
        report.passed += verdict.positive
        report.certificates_verified += ok_cert
        report.outcomes.append(
            {"index": i, "l": cert.l, "m": cert.m, "min_eigenvalue": verdict.witness, "min_positive": verdict.positive}
        )
    return report
