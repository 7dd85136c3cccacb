"""Subjective-logic opinion algebra over Dirichlet evidence.

An opinion is the triple (belief masses b, uncertainty mass u, base rates a)
with sum(b) + u = 1. Opinions are backed by nonnegative per-class evidence
through alpha = e + 1: belief is evidence over the Dirichlet strength S, and
u = K / S, so zero evidence means a fully vacuous opinion (u = 1).

The aggregation operator implemented here combines two opinions so that the
fused uncertainty is the harmonic mean of the inputs: folding in a *more*
uncertain opinion raises uncertainty instead of collapsing it, which is the
behavior wanted when views may disagree. Pairwise aggregation is exactly
opinion-of-mean-evidence, and the V-way fusion is defined as the arithmetic
mean of the view evidences (uniform 1/V weights; a left fold of the pair
operator would weight the first view by 1/2**(V-1) instead).

Disagreement between two opinions is scored by the conflictive degree
c = c_p * c_c: the projected distance (total variation between projected
probability vectors) times the conjunctive certainty (1-u_A)(1-u_B), so only
confident disagreement counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ATOL",
    "Evidence",
    "DirichletParams",
    "Opinion",
    "ProjectedProbability",
    "uniform_base_rates",
    "evidence_to_opinion",
    "opinion_to_evidence",
    "project",
    "dirichlet_pdf_log",
    "aggregate_pair",
    "fuse_evidence",
    "fuse_opinions",
    "projected_distance",
    "conjunctive_certainty",
    "conflictive_degree",
    "decide",
]

# Absolute tolerance for algebraic identities; all operations here are short
# arithmetic chains in float64.
ATOL = 1e-12

_BASE_RATE_ATOL = 1e-9
_SIMPLEX_ATOL = 1e-9


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


def uniform_base_rates(n_classes: int) -> np.ndarray:
    """Uniform prior probabilities 1/K, the default base rate distribution."""
    if n_classes < 2:
        raise ValueError("need at least 2 classes")
    return np.full(n_classes, 1.0 / n_classes)


@dataclass(frozen=True, eq=False)
class Evidence:
    """Nonnegative per-class support vector; alpha = e + 1."""

    e: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.e, "evidence")
        if arr.size < 2:
            raise ValueError("evidence needs at least 2 classes")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise ValueError("evidence components must be finite and nonnegative")
        object.__setattr__(self, "e", arr)

    @property
    def n_classes(self) -> int:
        return self.e.size

    def to_dict(self) -> dict:
        return {"evidence": self.e.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Evidence":
        return cls(e=np.asarray(payload["evidence"], dtype=np.float64))


@dataclass(frozen=True, eq=False)
class DirichletParams:
    """Dirichlet concentration vector with every component >= 1."""

    alpha: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.alpha, "alpha")
        if arr.size < 2:
            raise ValueError("alpha needs at least 2 classes")
        if not np.all(np.isfinite(arr)) or np.any(arr < 1.0):
            raise ValueError("alpha components must be finite and >= 1")
        object.__setattr__(self, "alpha", arr)

    @property
    def strength(self) -> float:
        """Total concentration S = sum(alpha)."""
        return float(self.alpha.sum())

    @property
    def n_classes(self) -> int:
        return self.alpha.size

    @classmethod
    def from_evidence(cls, evidence: Evidence) -> "DirichletParams":
        return cls(alpha=evidence.e + 1.0)


@dataclass(frozen=True, eq=False)
class Opinion:
    """Belief masses, uncertainty mass and base rates with sum(b) + u = 1."""

    b: np.ndarray
    u: float
    a: np.ndarray

    def __post_init__(self):
        b = _frozen_array(self.b, "belief")
        a = _frozen_array(self.a, "base_rate")
        u = float(self.u)
        if b.size < 2 or a.size != b.size:
            raise ValueError("belief and base_rate must share a length >= 2")
        if not np.all(np.isfinite(b)) or np.any(b < 0.0):
            raise ValueError("belief masses must be finite and nonnegative")
        if not np.isfinite(u) or u < 0.0:
            raise ValueError("uncertainty mass must be finite and nonnegative")
        total = float(b.sum()) + u
        if abs(total - 1.0) > ATOL:
            raise ValueError(f"belief masses and uncertainty must sum to 1, got {total!r}")
        if np.any(a < 0.0) or abs(float(a.sum()) - 1.0) > _BASE_RATE_ATOL:
            raise ValueError("base rates must be nonnegative and sum to 1")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "a", a)

    @property
    def n_classes(self) -> int:
        return self.b.size

    def to_dict(self) -> dict:
        return {"belief": self.b.tolist(), "uncertainty": self.u, "base_rate": self.a.tolist()}

    @classmethod
    def from_dict(cls, payload: dict) -> "Opinion":
        return cls(
            b=np.asarray(payload["belief"], dtype=np.float64),
            u=float(payload["uncertainty"]),
            a=np.asarray(payload["base_rate"], dtype=np.float64),
        )


@dataclass(frozen=True, eq=False)
class ProjectedProbability:
    """Point-probability summary of an opinion: p_k = b_k + a_k * u."""

    p: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.p, "probability")
        if np.any(arr < 0.0) or abs(float(arr.sum()) - 1.0) > ATOL:
            raise ValueError("projected probabilities must be nonnegative and sum to 1")
        object.__setattr__(self, "p", arr)

    @property
    def n_classes(self) -> int:
        return self.p.size


def evidence_to_opinion(evidence, base_rates=None) -> Opinion:
    """Map evidence to an opinion: b_k = e_k / S, u = K / S with S = sum(e + 1).

    Parameters
    ----------
    evidence : Evidence or array-like
        Nonnegative per-class support.
    base_rates : array-like, optional
        Prior class probabilities; uniform if omitted.

    Raises
    ------
    ValueError
        On a dimension mismatch between evidence and base rates.
    """
    if not isinstance(evidence, Evidence):
        evidence = Evidence(e=np.asarray(evidence, dtype=np.float64))
    k = evidence.n_classes
    if base_rates is None:
        base_rates = uniform_base_rates(k)
    base_rates = np.asarray(base_rates, dtype=np.float64)
    if base_rates.shape != (k,):
        raise ValueError(
            f"base rates have {base_rates.size} entries for {k}-class evidence"
        )
    strength = float(evidence.e.sum()) + k
    return Opinion(b=evidence.e / strength, u=k / strength, a=base_rates)


def opinion_to_evidence(opinion: Opinion) -> Evidence:
    """Invert the evidence mapping: S = K / u, e_k = b_k * S.

    Raises
    ------
    ValueError
        If u == 0; a dogmatic opinion carries no finite evidence total.
    """
    if opinion.u == 0.0:
        raise ValueError("opinion with zero uncertainty is not evidence-backed")
    strength = opinion.n_classes / opinion.u
    return Evidence(e=np.maximum(opinion.b * strength, 0.0))


def project(opinion: Opinion) -> ProjectedProbability:
    """Projected probability distribution p_k = b_k + a_k * u."""
    return ProjectedProbability(p=opinion.b + opinion.a * opinion.u)


def dirichlet_pdf_log(p, params) -> float:
    """Log density of the Dirichlet at a point strictly inside the simplex.

    log D(p | alpha) = -log B(alpha) + sum_k (alpha_k - 1) log p_k.

    Raises
    ------
    ValueError
        If any p_k <= 0 or the components do not sum to 1 (tolerance 1e-9).
    """
    from .special import log_gamma

    if isinstance(p, ProjectedProbability):
        p = p.p
    p = np.asarray(p, dtype=np.float64)
    if not isinstance(params, DirichletParams):
        params = DirichletParams(alpha=np.asarray(params, dtype=np.float64))
    if p.shape != params.alpha.shape:
        raise ValueError("point and alpha must have the same length")
    if np.any(p <= 0.0):
        raise ValueError("point must lie strictly inside the simplex")
    if abs(float(p.sum()) - 1.0) > _SIMPLEX_ATOL:
        raise ValueError("point components must sum to 1")
    alpha = params.alpha
    log_beta = float(np.sum(log_gamma(alpha)) - log_gamma(params.strength))
    return float(np.sum((alpha - 1.0) * np.log(p)) - log_beta)


def _check_same_classes(a: Opinion, b: Opinion) -> None:
    if a.n_classes != b.n_classes:
        raise ValueError(
            f"opinions disagree on class count: {a.n_classes} vs {b.n_classes}"
        )


def aggregate_pair(first: Opinion, second: Opinion) -> Opinion:
    """Combine two opinions; the fused uncertainty is their harmonic mean.

        b_k = (b_k^A u^B + b_k^B u^A) / (u^A + u^B)
        u   = 2 u^A u^B / (u^A + u^B)
        a_k = (a_k^A + a_k^B) / 2

    Equivalent to forming the opinion of the averaged evidences, so combining
    with a more uncertain opinion raises uncertainty and vice versa.

    Raises
    ------
    ValueError
        If u^A + u^B == 0 (two dogmatic opinions; the rule is 0/0 there and
        cannot occur for evidence-backed opinions, which always have u > 0).
    """
    _check_same_classes(first, second)
    denom = first.u + second.u
    if denom == 0.0:
        raise ValueError("cannot aggregate two opinions with zero uncertainty")
    b = (first.b * second.u + second.b * first.u) / denom
    u = 2.0 * first.u * second.u / denom
    a = 0.5 * (first.a + second.a)
    return Opinion(b=b, u=u, a=a)


def fuse_evidence(evidences) -> Evidence:
    """Component-wise arithmetic mean of V evidence vectors."""
    evidences = list(evidences)
    if not evidences:
        raise ValueError("need at least one evidence vector to fuse")
    arrays = []
    for ev in evidences:
        if not isinstance(ev, Evidence):
            ev = Evidence(e=np.asarray(ev, dtype=np.float64))
        arrays.append(ev.e)
    k = arrays[0].size
    if any(a.size != k for a in arrays):
        raise ValueError("evidence vectors disagree on class count")
    return Evidence(e=np.mean(arrays, axis=0))


def fuse_opinions(opinions) -> Opinion:
    """Fuse V evidence-backed opinions into the joint opinion.

    Realized as the opinion of the V-way mean evidence with averaged base
    rates (uniform 1/V weight per view). For V = 2 this coincides with
    ``aggregate_pair``; chaining the pair operator instead would weight the
    views unevenly. Invariant under permutation of the input list.

    Raises
    ------
    ValueError
        If the list is empty, any opinion has u == 0, or class counts differ.
    """
    opinions = list(opinions)
    if not opinions:
        raise ValueError("need at least one opinion to fuse")
    evidences = [opinion_to_evidence(op) for op in opinions]
    base = np.mean([op.a for op in opinions], axis=0)
    return evidence_to_opinion(fuse_evidence(evidences), base)


def projected_distance(first: Opinion, second: Opinion) -> float:
    """Total variation between projected probabilities, in [0, 1]."""
    _check_same_classes(first, second)
    return float(np.abs(project(first).p - project(second).p).sum() / 2.0)


def conjunctive_certainty(first: Opinion, second: Opinion) -> float:
    """(1 - u^A)(1 - u^B): 0 when either opinion is vacuous, 1 when both are sharp."""
    _check_same_classes(first, second)
    return float((1.0 - first.u) * (1.0 - second.u))


def conflictive_degree(first: Opinion, second: Opinion) -> float:
    """Disagreement score c = c_p * c_c in [0, 1].

    Zero when the projected distributions coincide; 1 only for dogmatic
    opinions with disjoint projected probabilities. Vacuity in either input
    drives the score to 0 through the certainty factor.
    """
    return projected_distance(first, second) * conjunctive_certainty(first, second)


def decide(opinion: Opinion) -> tuple[int, float]:
    """Pick the class with the largest projected probability.

    Returns ``(class_index, reliability)`` with reliability = 1 - u.
    Ties break toward the lowest class index.
    """
    probs = project(opinion).p
    return int(np.argmax(probs)), 1.0 - opinion.u
