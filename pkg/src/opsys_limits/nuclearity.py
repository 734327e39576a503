"""Finite-stage evidence for (min, max)-nuclearity.

The forward direction (max generators are min-positive) always holds, so
any failure there is a bug.  The backward direction is searched for with
:func:`max_certificate_search`; a missing certificate only counts as
unknown, and the resulting rate is evidence rather than proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotInclusionSequence
from .indlimit import InductiveSequence
from .linalg import DEFAULT_EPS
from .opsys import DEFAULT_LADDER, ConcreteOperatorSystem, check_level, random_positive_element
from .tensor import (
    MaxCertificate,
    SearchBudget,
    TensorElement,
    max_certificate_search,
    min_positive,
    product_system,
    random_generator,
    swap_factors,
)
from .ucp import apply

# positive-control threshold for S = T = M_2; a harness calibration, not a theorem
POSITIVE_CONTROL_RATE = 0.9


@dataclass
class NuclearityReport:
    left: str
    right: str
    level: int
    samples: int
    seeds: dict
    forward_pass: int = 0
    backward_found: int = 0
    unknowns: int = 0
    certificates_emitted: int = 0
    certificates_verified: int = 0
    pair: tuple = ("min", "max")
    outcomes: list = field(default_factory=list)

    @property
    def certificate_rate(self) -> float:
        tried = self.backward_found + self.unknowns
        return self.backward_found / tried if tried else 0.0

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "left": self.left,
            "right": self.right,
            "level": self.level,
            "samples": self.samples,
            "forward_pass": self.forward_pass,
            "backward_found": self.backward_found,
            "unknowns": self.unknowns,
            "certificate_rate": self.certificate_rate,
            "certificates_emitted": self.certificates_emitted,
            "certificates_verified": self.certificates_verified,
            "seeds": self.seeds,
            "outcomes": self.outcomes,
        }


def push_left(seq: InductiveSequence, k: int, u: TensorElement, T: ConcreteOperatorSystem) -> TensorElement:
    """``(phi_k (x) id_T)(u)`` as an element of ``M_n(S_{k+1} (x) T)``."""
    n, dS, dT = u.level, u.left.ambient_dim, T.ambient_dim
    phi = seq.connect(k)
    # reorder to (level, right, left) so the left factor sits in the blocks
    swapped = swap_factors(u.matrix, n, dS, dT)
    pushed = apply(phi, n * dT, swapped)
    dS1 = phi.codomain.ambient_dim
    back = swap_factors(pushed, n, dT, dS1)
    return TensorElement(phi.codomain, T, n, back)


def push_certificate(seq: InductiveSequence, k: int, cert: MaxCertificate) -> MaxCertificate:
    """Same ``alpha`` and ``Q``, with ``P`` replaced by ``phi_k(P)``."""
    P = apply(seq.connect(k), cert.l, cert.P)
    return MaxCertificate(cert.alpha, P, cert.Q, cert.l, cert.m, cert.epsilon, "pushed")


def tensor_limit_consistency(
    seq: InductiveSequence,
    T: ConcreteOperatorSystem,
    n: int = 1,
    samples: int = 50,
    seed: int = 0,
    tol: float = DEFAULT_EPS,
) -> NuclearityReport:
    """Push max generators of ``M_n(S_k (x) T)`` to stage ``k+1`` and re-check them.

    A sample passes when the generator is min-positive at stage ``k`` and,
    after applying ``phi_k (x) id_T``, is still min-positive with its pushed
    certificate verifying.
    """
    if not seq.inclusion:
        raise NotInclusionSequence("tensor consistency needs an inclusion sequence")
    n = check_level(n)
    if seq.depth < 2:
        raise ValueError("need at least two stages")
    rng = np.random.default_rng(seed)
    report = NuclearityReport(
        f"{seq.name or 'seq'}[1..{seq.depth}]", T.name, n, samples, {"seed": seed}
    )
    for i in range(samples):
        k = int(rng.integers(1, seq.depth))
        u, cert = random_generator(seq.system(k), T, n, rng)
        u1 = push_left(seq, k, u, T)
        cert1 = push_certificate(seq, k, cert)
        before = min_positive(u, tol).positive
        after = min_positive(u1, tol).positive
        still = cert1.verify(u1, tol)
        ok = before and after and still
        report.forward_pass += ok
        report.certificates_emitted += 2
        report.certificates_verified += cert.verify(u, tol) + still
        report.outcomes.append(
            {"index": i, "stage": k, "min_positive": before, "pushed_min_positive": after, "pushed_certificate": still}
        )
    return report


def minmax_nuclearity_evidence(
    S: ConcreteOperatorSystem,
    T: ConcreteOperatorSystem,
    n: int = 1,
    samples: int = 50,
    budget=None,
    seed: int = 0,
    ladder=DEFAULT_LADDER,
    tol: float = DEFAULT_EPS,
) -> NuclearityReport:
    """Forward check on random max generators, backward search on random min-positive elements.

    A backward sample counts as found only with a certificate at epsilon 0
    or the smallest ladder value; coarser certificates and failed searches
    are unknowns.
    """
    n = check_level(n)
    budget = SearchBudget.coerce(budget)
    rng = np.random.default_rng(seed)
    report = NuclearityReport(S.name, T.name, n, samples, {"seed": seed, "search_seed": budget.seed})
    prod = product_system(S, T)
    fine = min(ladder)
    for i in range(samples):
        g, gcert = random_generator(S, T, n, rng)
        fwd = min_positive(g, tol).positive
        report.forward_pass += fwd
        report.certificates_emitted += 1
        report.certificates_verified += gcert.verify(g, tol)

        x = random_positive_element(prod, n, rng, margin=float(rng.choice([0.0, rng.exponential()])))
        u = TensorElement(S, T, n, x)
        cert = max_certificate_search(u, ladder, budget, tol=tol)
        found = cert is not None and cert.epsilon <= fine
        if cert is not None:
            report.certificates_emitted += 1
            report.certificates_verified += cert.verify(u, tol)
        report.backward_found += found
        report.unknowns += not found
        report.outcomes.append(
            {
                "index": i,
                "forward_min_positive": fwd,
                "backward": "found" if found else "unknown",
                "epsilon": None if cert is None else cert.epsilon,
                "method": None if cert is None else cert.method,
            }
        )
    return report
