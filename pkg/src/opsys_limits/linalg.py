"""Dense complex linear algebra used by every cone test in the package.

Matrices are plain ``numpy`` complex arrays.  Eigenvalues come from a
cyclic Jacobi solver using a round-robin (parallel) pair ordering, so each
sweep applies ``n/2`` disjoint rotations per vectorized step.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NotHermitian

DEFAULT_EPS = 1e-9
MAX_SWEEPS = 100


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce ``a`` to a finite 2-d complex array."""
    m = np.array(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-dimensional, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def check_tol(tol: float) -> float:
    tol = float(tol)
    if not tol >= 0:
        raise ValueError(f"tolerance must be nonnegative, got {tol}")
    return tol


def _square(h: np.ndarray) -> None:
    if h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got {h.shape}")


def hermitian_defect(h: np.ndarray) -> float:
    """Largest entry of ``|H - H*|``."""
    if h.size == 0:
        return 0.0
    return float(np.max(np.abs(h - h.conj().T)))


def is_hermitian(h, tol: float = DEFAULT_EPS) -> bool:
    h = as_matrix(h)
    return h.shape[0] == h.shape[1] and hermitian_defect(h) <= tol


def symmetrize(h, tol: float = DEFAULT_EPS) -> np.ndarray:
    """Return ``(H + H*)/2`` after checking ``H`` is Hermitian within ``tol``."""
    h = as_matrix(h)
    _square(h)
    defect = hermitian_defect(h)
    if defect > tol:
        raise NotHermitian(f"matrix is not Hermitian: max |H - H*| = {defect:.3e} > {tol:.3e}")
    return (h + h.conj().T) / 2


@lru_cache(maxsize=64)
def _round_robin(n: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    # circle method: every unordered pair appears in exactly one round
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return tuple(rounds)


def _off_norm(a: np.ndarray) -> float:
    off = a.copy()
    np.fill_diagonal(off, 0)
    return float(np.linalg.norm(off))


def jacobi_eigh(h, tol: float = DEFAULT_EPS, max_sweeps: int = MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi sweeps.

    Returns ``(w, V)`` with ``w`` ascending and ``H = V diag(w) V*``.
    Iteration stops once the off-diagonal Frobenius norm drops below
    ``max(tol, 64 * machine_eps * ||H||_F)``; the second term keeps large
    inputs from chasing roundoff.
    """
    tol = check_tol(tol)
    a = symmetrize(h, tol).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    if n <= 1:
        return np.real(np.diag(a)).copy(), v

    threshold = max(tol, 64 * np.finfo(float).eps * float(np.linalg.norm(a)))
    negligible = 1e-6 * np.finfo(float).eps * threshold
    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        if _off_norm(a) <= threshold:
            break
        for p, q in rounds:
            apq = a[p, q]
            r = np.abs(apq)
            # entries this small cannot move the off-norm; rotating them risks overflow
            active = r > negligible
            a[p[~active], q[~active]] = 0
            a[q[~active], p[~active]] = 0
            if not np.any(active):
                continue
            p, q, apq, r = p[active], q[active], apq[active], r[active]
            phase = apq / r
            app = np.real(a[p, p])
            aqq = np.real(a[q, q])
            tau = (aqq - app) / (2 * r)
            t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.hypot(1.0, tau))
            c = 1 / np.sqrt(1 + t * t)
            s = t * c
            # U = diag(1, conj(phase)) @ [[c, s], [-s, c]] on each (p, q) plane
            u_pp, u_pq = c, s
            u_qp, u_qq = -s * phase.conj(), c * phase.conj()
            cp, cq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = cp * u_pp + cq * u_qp
            a[:, q] = cp * u_pq + cq * u_qq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = np.conj(u_pp)[:, None] * rp + np.conj(u_qp)[:, None] * rq
            a[q, :] = np.conj(u_pq)[:, None] * rp + np.conj(u_qq)[:, None] * rq
            a[p, q] = 0
            a[q, p] = 0
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = vp * u_pp + vq * u_qp
            v[:, q] = vp * u_pq + vq * u_qq
    else:
        if _off_norm(a) > threshold:
            raise NoConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps")

    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def hermitian_eigenvalues(h, tol: float = DEFAULT_EPS) -> np.ndarray:
    """Eigenvalues of a Hermitian matrix in nondecreasing order."""
    return jacobi_eigh(h, tol)[0]


def min_eigenvalue(h, tol: float = DEFAULT_EPS) -> float:
    h = as_matrix(h)
    if h.size == 0:
        return 0.0
    return float(hermitian_eigenvalues(h, tol)[0])


def is_psd(h, tol: float = DEFAULT_EPS) -> bool:
    """True iff the smallest eigenvalue of ``H`` is at least ``-tol``."""
    return min_eigenvalue(h, tol) >= -tol


def operator_norm(h, tol: float = DEFAULT_EPS) -> float:
    w = hermitian_eigenvalues(h, tol)
    return float(np.max(np.abs(w))) if w.size else 0.0


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "A"), as_matrix(b, "B"))


def congruence(alpha, x) -> np.ndarray:
    """Return ``alpha @ X @ alpha*``."""
    alpha = as_matrix(alpha, "alpha")
    x = as_matrix(x, "X")
    _square(x)
    if alpha.shape[1] != x.shape[0]:
        raise DimensionMismatch(
            f"alpha has {alpha.shape[1]} columns but X has size {x.shape[0]}"
        )
    return alpha @ x @ alpha.conj().T


def max_abs(a) -> float:
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Product of ``n`` random complex Householder reflections."""
    u = np.eye(n, dtype=complex)
    for _ in range(n):
        x = rng.normal(size=n) + 1j * rng.normal(size=n)
        x /= np.linalg.norm(x)
        u = u - 2 * np.outer(u @ x, x.conj())
    return u


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (g + g.conj().T) / 2
