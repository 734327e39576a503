"""Linear maps between concrete operator systems and their positivity checks."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import linalg
from .errors import (
    DimensionMismatch,
    DomainNotFullAlgebra,
    NotAdjointClosed,
    NotInSystem,
    NotInjective,
)
from .linalg import DEFAULT_EPS
from .opsys import (
    ConcreteOperatorSystem,
    blocks,
    check_level,
    full_matrix_algebra,
    random_hermitian_element,
    random_positive_element,
    unblock,
)

Action = Callable[[np.ndarray], np.ndarray]


class LinearMap:
    """Linear map ``domain -> codomain`` fixed by its values on the domain basis.

    Either ``images`` (one matrix per basis element) or ``action`` (a
    function applied to stacks of ``d x d`` matrices, shape ``(..., d, d)``)
    must be given.  ``action`` is how the large structured maps of a UHF
    sequence avoid storing ``d**2`` images; their checks are sampled.
    """

    def __init__(
        self,
        domain: ConcreteOperatorSystem,
        codomain: ConcreteOperatorSystem,
        images: Sequence | None = None,
        *,
        action: Action | None = None,
        name: str = "",
        validate: bool = True,
    ):
        if (images is None) == (action is None):
            raise ValueError("give exactly one of images or action")
        self.domain = domain
        self.codomain = codomain
        self.name = name
        self._action = action
        self._images = None
        if images is not None:
            imgs = [linalg.as_matrix(m, f"images[{i}]") for i, m in enumerate(images)]
            if len(imgs) != domain.dim:
                raise DimensionMismatch(f"expected {domain.dim} images, got {len(imgs)}")
            shape = (codomain.ambient_dim, codomain.ambient_dim)
            for i, m in enumerate(imgs):
                if m.shape != shape:
                    raise DimensionMismatch(f"images[{i}] has shape {m.shape}, expected {shape}")
            self._images = np.stack(imgs)
        if validate:
            self._validate()

    def __repr__(self) -> str:
        return f"LinearMap({self.name!r}: {self.domain.name} -> {self.codomain.name})"

    @property
    def images(self) -> np.ndarray:
        if self._images is None:
            self._images = self._action(self.domain.basis)
        return self._images

    def _act(self, x: np.ndarray) -> np.ndarray:
        """Apply to a stack ``(..., d, d)`` of domain elements (no membership check)."""
        if self._action is not None:
            return self._action(x)
        c, _ = self.domain._block_coordinates(x)
        return np.tensordot(c, self._images, axes=([-1], [0]))

    def _validate(self) -> None:
        tol = self.codomain.tol
        if self._images is not None:
            _, res = self.codomain._block_coordinates(self._images)
            if res > tol:
                raise NotInSystem(f"images of {self.name or 'map'} leave {self.codomain.name} (residual {res:.3e})")
            basis = self.domain.basis
            lhs = self._act(basis.conj().transpose(0, 2, 1))
            rhs = self._images.conj().transpose(0, 2, 1)
            bad = np.max(np.abs(lhs - rhs), axis=(1, 2))
            if np.any(bad > tol):
                i = int(np.argmax(bad))
                raise NotAdjointClosed(f"f(b*) != f(b)* for basis element {i} (defect {bad[i]:.3e})")
            return
        rng = np.random.default_rng(0)
        for _ in range(3):
            shape = (self.domain.dim,)
            x = self.domain.from_coordinates(rng.normal(size=shape) + 1j * rng.normal(size=shape))
            y = self._act(x)
            if not self.codomain.contains(1, y):
                raise NotInSystem(f"{self.name or 'map'} leaves {self.codomain.name}")
            if linalg.max_abs(self._act(x.conj().T) - y.conj().T) > tol * max(1.0, linalg.max_abs(y)):
                raise NotAdjointClosed(f"{self.name or 'map'} does not commute with the adjoint")

    def coefficient_matrix(self) -> np.ndarray:
        """Columns are the vectorized images (``d'^2 x dim``)."""
        return self.images.reshape(self.domain.dim, -1).T


def apply(f: LinearMap, n: int, m) -> np.ndarray:
    """Entrywise application ``(f (x) id_{M_n})(m)``."""
    n = check_level(n)
    m = linalg.as_matrix(m)
    inside, _, res = f.domain.coordinates(n, m)
    if not inside:
        raise NotInSystem(f"element is not in M_{n}({f.domain.name}) (residual {res:.3e})")
    return unblock(f._act(blocks(m, n, f.domain.ambient_dim)))


def is_unital(f: LinearMap, tol: float = DEFAULT_EPS) -> bool:
    return linalg.max_abs(f._act(f.domain.unit(1)) - f.codomain.unit(1)) <= tol


def matrix_units(m: int) -> np.ndarray:
    """``E[i, j]`` is the ``(i, j)`` matrix unit of ``M_m``."""
    e = np.zeros((m, m, m, m), dtype=complex)
    idx = np.arange(m)
    e[idx[:, None], idx[None, :], idx[:, None], idx[None, :]] = 1
    return e


def choi_matrix(f: LinearMap) -> np.ndarray:
    """Block matrix ``[f(E_ij)]``; PSD exactly when ``f`` is completely positive."""
    if not f.domain.is_full_algebra:
        raise DomainNotFullAlgebra(f"{f.domain.name} is not a full matrix algebra")
    return unblock(f._act(matrix_units(f.domain.ambient_dim)))


def max_entangled(m: int) -> np.ndarray:
    """``sum_ij E_ij (x) E_ij``: rank one, PSD, and maps to the Choi matrix."""
    w = np.eye(m, dtype=complex).reshape(-1)
    return np.outer(w, w)


class CpStatus(str, Enum):
    UCP = "UCP"
    CP_NOT_UNITAL = "CPnotUnital"
    NOT_CP = "NotCP"
    UNKNOWN_UP_TO_LEVEL = "UnknownUpToLevel"


@dataclass(frozen=True)
class Witness:
    """A positive input whose image fails positivity (or the reverse)."""

    level: int
    element: np.ndarray
    image_min_eigenvalue: float
    input_min_eigenvalue: float
    direction: str = "preserve"


@dataclass(frozen=True)
class CpVerdict:
    status: CpStatus
    checked_level: int
    unital: bool
    exact: bool
    witness: Witness | None = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status in (CpStatus.UCP, CpStatus.UNKNOWN_UP_TO_LEVEL)


def _positive_samples(S: ConcreteOperatorSystem, n: int, rng: np.random.Generator):
    # alternate cone-boundary and interior points; all stay inside M_n(S)
    k = 0
    while True:
        yield random_positive_element(S, n, rng, margin=0.0 if k % 2 == 0 else float(rng.exponential()))
        k += 1


def is_ucp(
    f: LinearMap,
    max_level: int = 3,
    samples: int = 200,
    seed: int = 0,
    tol: float = DEFAULT_EPS,
    choi_cap: int | None = None,
) -> CpVerdict:
    """Unitality plus complete positivity.

    Exact through the Choi matrix when the domain is a full matrix algebra
    (and the Choi matrix is no larger than ``choi_cap``, if given);
    otherwise random positive elements of ``M_n(domain)``, ``n <= max_level``,
    are pushed through ``f`` and any non-positive image is a witness.  A
    clean sampled run only proves the map passed up to ``max_level``.
    """
    max_level = check_level(max_level)
    unital = is_unital(f, tol)
    m = f.domain.ambient_dim
    if f.domain.is_full_algebra and (choi_cap is None or m * f.codomain.ambient_dim <= choi_cap):
        choi = choi_matrix(f)
        lam = linalg.min_eigenvalue(choi, tol)
        if lam >= -tol:
            status = CpStatus.UCP if unital else CpStatus.CP_NOT_UNITAL
            return CpVerdict(status, m, unital, True, detail=f"Choi min eigenvalue {lam:.3e}")
        w = Witness(m, max_entangled(m), lam, 0.0)
        return CpVerdict(CpStatus.NOT_CP, m, unital, True, w, "Choi matrix has a negative eigenvalue")

    rng = np.random.default_rng(seed)
    for n in range(1, max_level + 1):
        gen = _positive_samples(f.domain, n, rng)
        for _ in range(samples):
            x = next(gen)
            lam = linalg.min_eigenvalue(apply(f, n, x), tol)
            if lam < -tol:
                w = Witness(n, x, lam, linalg.min_eigenvalue(x, tol))
                return CpVerdict(CpStatus.NOT_CP, n, unital, False, w, "sampled positive element maps outside the cone")
    status = CpStatus.UNKNOWN_UP_TO_LEVEL
    detail = f"{'UCP' if unital else 'CP'} up to level {max_level} ({samples} samples per level)"
    return CpVerdict(status, max_level, unital, False, detail=detail)


def is_injective(f: LinearMap, tol: float = DEFAULT_EPS) -> bool:
    a = f.coefficient_matrix()
    return linalg.min_eigenvalue(a.conj().T @ a, tol) > tol


def is_complete_order_mono(
    f: LinearMap, max_level: int = 3, samples: int = 200, seed: int = 0, tol: float = DEFAULT_EPS
) -> CpVerdict:
    """Sampled check that ``u >= 0  <=>  f_n(u) >= 0`` for ``n <= max_level``.

    Three sample kinds per level: points on the domain cone boundary (tests
    that ``f`` preserves order), preimages of points on the image cone
    boundary (tests that ``f`` reflects order; needs ``f`` unital), and
    plain random Hermitian elements.
    """
    max_level = check_level(max_level)
    if not is_injective(f, tol):
        raise NotInjective(f"{f.name or 'map'} is not injective")
    unital = is_unital(f, tol)
    rng = np.random.default_rng(seed)
    for n in range(1, max_level + 1):
        unit = f.domain.unit(n)
        for s in range(samples):
            kind = s % 3
            if kind == 0:
                x = random_positive_element(f.domain, n, rng)
            else:
                x = random_hermitian_element(f.domain, n, rng)
                if kind == 1 and unital:
                    x = x - linalg.min_eigenvalue(apply(f, n, x), tol) * unit
            lam_in = linalg.min_eigenvalue(x, tol)
            lam_out = linalg.min_eigenvalue(apply(f, n, x), tol)
            pos_in, pos_out = lam_in >= -tol, lam_out >= -tol
            if pos_in != pos_out:
                direction = "preserve" if pos_in else "reflect"
                w = Witness(n, x, lam_out, lam_in, direction)
                return CpVerdict(CpStatus.NOT_CP, n, unital, False, w, f"order not {direction}d at level {n}")
    return CpVerdict(
        CpStatus.UNKNOWN_UP_TO_LEVEL, max_level, unital, False,
        detail=f"order preserved and reflected up to level {max_level}",
    )


def compose(f: LinearMap, g: LinearMap) -> LinearMap:
    """``f o g`` (apply ``g`` first)."""
    if not g.codomain.same_as(f.domain):
        raise DimensionMismatch(f"cannot compose: {g.codomain.name} is not {f.domain.name}")
    name = f"{f.name}.{g.name}" if f.name and g.name else ""
    if f._action is not None or g._action is not None:
        return LinearMap(g.domain, f.codomain, action=lambda x: f._act(g._act(x)), name=name, validate=False)
    return LinearMap(g.domain, f.codomain, f._act(g.images), name=name, validate=False)


def path_compose(maps: Sequence[LinearMap], p: int, q: int) -> LinearMap:
    """``maps[q-1] o ... o maps[p]``; ``path_compose(maps, p, p + 1) is maps[p]``."""
    if not 0 <= p < q <= len(maps):
        raise ValueError(f"need 0 <= p < q <= {len(maps)}, got p={p}, q={q}")
    out = maps[p]
    for k in range(p + 1, q):
        out = compose(maps[k], out)
    return out


def identity_map(S: ConcreteOperatorSystem) -> LinearMap:
    return LinearMap(S, S, action=lambda x: x, name=f"id_{S.name}", validate=False)


def transpose_map(S: ConcreteOperatorSystem) -> LinearMap:
    return LinearMap(S, S, action=lambda x: np.swapaxes(x, -1, -2), name=f"T_{S.name}")


def kraus_map(domain: ConcreteOperatorSystem, codomain: ConcreteOperatorSystem, kraus: Sequence, name: str = "") -> LinearMap:
    """``X -> sum_s V_s X V_s*``; the images must land in ``codomain``."""
    ops = np.stack([linalg.as_matrix(v) for v in kraus])
    images = np.einsum("sab,kbc,sdc->kad", ops, domain.basis, ops.conj())
    return LinearMap(domain, codomain, images, name=name)


def map_from_choi(choi, m: int, name: str = "") -> LinearMap:
    """The map on ``M_m`` whose Choi matrix is ``choi`` (Hermitian)."""
    choi = linalg.as_matrix(choi)
    d, r = divmod(choi.shape[0], m)
    if r:
        raise DimensionMismatch("Choi size is not a multiple of m")
    dom, cod = full_matrix_algebra(m), full_matrix_algebra(d)
    b = blocks(choi, m, d)
    return LinearMap(dom, cod, action=lambda x: np.einsum("...ij,ijab->...ab", x, b), name=name)
