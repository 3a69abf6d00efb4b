"""Closed-form sharp Holder exponents for degenerate parabolic equations.

Covers four equation families, identified by their structural exponents
(p for the gradient nonlinearity, m for the amplitude nonlinearity):

* heat:               u_t - div(grad u) = f                  (p = 2, m = 1)
* p-parabolic:        u_t - div(|grad u|^(p-2) grad u) = f   (p > 2)
* porous medium:      u_t - div(m |u|^(m-1) grad u) = f      (m > 1)
* doubly nonlinear:   u_t - div(m |u|^(m-1) |grad u|^(p-2) grad u) = f

The source f lives in the mixed space L^r(time; L^q(space)).  All formulas
are evaluated through the reciprocals 1/q and 1/r so that infinite
integrability exponents are exact, not large-number approximations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .errors import InadmissibleParameters, MissingHomogeneousExponent

__all__ = [
    "EquationKind",
    "EquationParams",
    "SourceIntegrability",
    "HomogeneousExponent",
    "Branch",
    "RegularityReport",
    "ConditionCheck",
    "AdmissibilityVerdict",
    "check_admissibility",
    "sharp_exponents",
    "p_monotonicity_sign",
    "pparabolic_alpha",
    "pparabolic_theta",
    "pme_source_bound",
    "pme_theta",
    "dnl_source_bound",
    "dnl_beta",
    "dnl_theta",
]


class EquationKind(Enum):
    HEAT = "heat"
    P_PARABOLIC = "p_parabolic"
    PME = "pme"
    DOUBLY_NONLINEAR = "doubly_nonlinear"


@dataclass(frozen=True)
class EquationParams:
    """Equation family plus its structural exponents.

    Exact reductions are normalised to the canonical representative:
    p-parabolic with p = 2 becomes heat, porous medium with m = 1 becomes
    heat, doubly nonlinear degenerates to p-parabolic (m = 1), porous
    medium (p = 2) or heat (both).
    """

    kind: EquationKind
    n: int
    p: float = 2.0
    m: float = 1.0

    def __post_init__(self):
        kind, p, m = self.kind, float(self.p), float(self.m)
        if kind is EquationKind.HEAT:
            p, m = 2.0, 1.0
        if kind is EquationKind.P_PARABOLIC:
            m = 1.0
        if kind is EquationKind.PME:
            p = 2.0
        if kind is EquationKind.DOUBLY_NONLINEAR:
            if m == 1.0 and p == 2.0:
                kind = EquationKind.HEAT
            elif m == 1.0:
                kind = EquationKind.P_PARABOLIC
            elif p == 2.0:
                kind = EquationKind.PME
        if kind is EquationKind.P_PARABOLIC and p == 2.0:
            kind = EquationKind.HEAT
        if kind is EquationKind.PME and m == 1.0:
            kind = EquationKind.HEAT
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "m", m)
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ValueError(f"spatial dimension must be a positive integer, got {self.n}")
        if kind in (EquationKind.P_PARABOLIC, EquationKind.DOUBLY_NONLINEAR) and not p > 2.0:
            raise ValueError(f"{kind.value} requires p > 2, got p={p}")
        if kind in (EquationKind.PME, EquationKind.DOUBLY_NONLINEAR) and not m > 1.0:
            raise ValueError(f"{kind.value} requires m > 1, got m={m}")

    @classmethod
    def heat(cls, n):
        return cls(EquationKind.HEAT, n)

    @classmethod
    def p_parabolic(cls, p, n):
        return cls(EquationKind.P_PARABOLIC, n, p=p)

    @classmethod
    def pme(cls, m, n):
        return cls(EquationKind.PME, n, m=m)

    @classmethod
    def doubly_nonlinear(cls, p, m, n):
        return cls(EquationKind.DOUBLY_NONLINEAR, n, p=p, m=m)


@dataclass(frozen=True)
class SourceIntegrability:
    """Lebesgue exponents of the source: L^q in space, L^r in time.

    Both live in (1, inf]; ``math.inf`` is a first-class value.
    """

    q: float
    r: float

    def __post_init__(self):
        for name, v in (("q", self.q), ("r", self.r)):
            if not (v > 1.0):
                raise ValueError(f"{name} must lie in (1, inf], got {v}")

    @property
    def inv_q(self) -> float:
        return 0.0 if math.isinf(self.q) else 1.0 / self.q

    @property
    def inv_r(self) -> float:
        return 0.0 if math.isinf(self.r) else 1.0 / self.r


class Provenance(Enum):
    KNOWN = "known"
    ASSUMED = "assumed"


@dataclass(frozen=True)
class HomogeneousExponent:
    """Optimal Holder exponent of the source-free equation, in (0, 1]."""

    value: float
    provenance: Provenance = Provenance.ASSUMED

    def __post_init__(self):
        if not (0.0 < self.value <= 1.0):
            raise ValueError(f"homogeneous exponent must lie in (0, 1], got {self.value}")


class Branch(Enum):
    SOURCE_LIMITED = "source_limited"
    HOMOGENEOUS_LIMITED = "homogeneous_limited"


@dataclass(frozen=True)
class RegularityReport:
    """Sharp space/time Holder exponents and the active branch.

    ``alpha_space`` is the space exponent of the solution class (alpha,
    gamma = alpha/m, or beta = alpha(p-1)/(m+p-2) depending on the family);
    ``raw_alpha`` is the exponent before that final division.  When the
    homogeneous branch is active the value is an open supremum and
    ``open_interval`` is set; ``realized`` subtracts a margin in that case.
    """

    alpha_space: float
    alpha_time: float
    theta: float
    branch: Branch
    open_interval: bool
    raw_alpha: float

    def realized(self, margin: float = 0.01) -> float:
        """Usable exponent: the value itself, minus ``margin`` if open."""
        return self.alpha_space - margin if self.open_interval else self.alpha_space


@dataclass(frozen=True)
class ConditionCheck:
    name: str
    lhs: float
    comparator: str  # "<" or ">"
    rhs: float

    @property
    def satisfied(self) -> bool:
        return self.lhs < self.rhs if self.comparator == "<" else self.lhs > self.rhs


@dataclass(frozen=True)
class AdmissibilityVerdict:
    admissible: bool
    conditions: tuple[ConditionCheck, ...]
    failed_conditions: tuple[ConditionCheck, ...] = field(default=())


# -- raw formulas (reciprocal arguments, evaluable outside the class gates) --


def pparabolic_alpha(p, n, q, r) -> float:
    """Sharp space exponent for the p-parabolic equation.

    Equals ((pq - n)r - pq) / (q[(p-1)r - (p-2)]), written in reciprocals
    so q or r may be ``inf``.
    """
    iq = 0.0 if math.isinf(q) else 1.0 / q
    ir = 0.0 if math.isinf(r) else 1.0 / r
    return (p - n * iq - p * ir) / ((p - 1.0) - (p - 2.0) * ir)


def pparabolic_theta(p, alpha) -> float:
    """Time-scaling exponent: the alpha-interpolation between 2 and p."""
    return p - (p - 2.0) * alpha


def pme_source_bound(m, n, q, r) -> float:
    """Source-driven bound m[(2q - n)r - 2q] / (q[mr - (m-1)])."""
    iq = 0.0 if math.isinf(q) else 1.0 / q
    ir = 0.0 if math.isinf(r) else 1.0 / r
    return m * (2.0 - n * iq - 2.0 * ir) / (m - (m - 1.0) * ir)


def pme_theta(m, alpha) -> float:
    """Time-scaling exponent: the alpha-interpolation between 1 + 1/m and 2."""
    return 2.0 - (1.0 - 1.0 / m) * alpha


def dnl_source_bound(p, m, n, q, r) -> float:
    """Source-driven bound (m+p-2)[(pq-n)r - pq] / (q(p-1)[(r-1)(m+p-2)+1])."""
    iq = 0.0 if math.isinf(q) else 1.0 / q
    ir = 0.0 if math.isinf(r) else 1.0 / r
    num = (m + p - 2.0) * (p - n * iq - p * ir)
    den = (p - 1.0) * ((m + p - 2.0) - (m + p - 3.0) * ir)
    return num / den


def dnl_beta(p, m, alpha) -> float:
    return alpha * (p - 1.0) / (m + p - 2.0)


def dnl_theta(p, m, beta) -> float:
    """Time-scaling exponent matching the equation's scaling homogeneity.

    Reduces to p - (p-2)beta at m = 1 and to 2 - (1 - 1/m)(m beta) at p = 2.
    """
    return p - (m + p - 3.0) * beta


# -- operations --


def check_admissibility(params: EquationParams, integ: SourceIntegrability) -> AdmissibilityVerdict:
    """Evaluate the integrability window for the given equation family.

    Inadmissibility is a verdict, never an exception.  Each condition is
    returned with its evaluated left-hand side; ``failed_conditions`` lists
    the ones that do not hold.
    """
    iq, ir = integ.inv_q, integ.inv_r
    n, p = params.n, params.p
    kind = params.kind

    conditions = [
        ConditionCheck("minimal_integrability", ir + n * iq / p, "<", 1.0),
    ]
    if kind in (EquationKind.HEAT, EquationKind.P_PARABOLIC):
        conditions.append(ConditionCheck("optimal_borderline", 2.0 * ir + n * iq, ">", 1.0))
    elif kind is EquationKind.DOUBLY_NONLINEAR:
        conditions.append(ConditionCheck("optimal_borderline", 3.0 * ir + n * iq, ">", 2.0))
    # porous medium: only the minimal-integrability condition applies;
    # the homogeneous branch of the min{} takes over at high integrability.

    failed = tuple(c for c in conditions if not c.satisfied)
    return AdmissibilityVerdict(not failed, tuple(conditions), failed)


def _default_homogeneous(params: EquationParams) -> HomogeneousExponent:
    """One-dimensional default min{1, 1/(m-1)}; unknown in n >= 2."""
    if params.n != 1:
        raise MissingHomogeneousExponent(
            f"the optimal homogeneous exponent for {params.kind.value} in n={params.n} "
            "is unknown; supply it explicitly"
        )
    value = min(1.0, 1.0 / (params.m - 1.0))
    prov = Provenance.KNOWN if params.kind is EquationKind.PME else Provenance.ASSUMED
    return HomogeneousExponent(value, prov)


def sharp_exponents(
    params: EquationParams,
    integ: SourceIntegrability,
    hom: HomogeneousExponent | None = None,
) -> RegularityReport:
    """Sharp space and time Holder exponents for an admissible source class.

    Parameters
    ----------
    params : EquationParams
    integ : SourceIntegrability
    hom : HomogeneousExponent, optional
        Optimal exponent of the source-free equation.  Required for the
        porous-medium and doubly-nonlinear families except in dimension
        one, where min{1, 1/(m-1)} is used.

    Returns
    -------
    RegularityReport

    Raises
    ------
    InadmissibleParameters
        If ``check_admissibility`` fails.
    MissingHomogeneousExponent
        Porous medium / doubly nonlinear in n >= 2 without ``hom``.
    """
    verdict = check_admissibility(params, integ)
    if not verdict.admissible:
        raise InadmissibleParameters(verdict)

    kind = params.kind
    q, r = integ.q, integ.r

    if kind in (EquationKind.HEAT, EquationKind.P_PARABOLIC):
        alpha = pparabolic_alpha(params.p, params.n, q, r)
        theta = pparabolic_theta(params.p, alpha)
        return RegularityReport(alpha, alpha / theta, theta, Branch.SOURCE_LIMITED, False, alpha)

    if hom is None:
        hom = _default_homogeneous(params)

    if kind is EquationKind.PME:
        bound = pme_source_bound(params.m, params.n, q, r)
        # a tie resolves to the closed source-limited value
        if bound > hom.value:
            alpha, branch, open_sup = hom.value, Branch.HOMOGENEOUS_LIMITED, True
        else:
            alpha, branch, open_sup = bound, Branch.SOURCE_LIMITED, False
        gamma = alpha / params.m
        theta = pme_theta(params.m, alpha)
        return RegularityReport(gamma, gamma / theta, theta, branch, open_sup, alpha)

    # doubly nonlinear
    bound = dnl_source_bound(params.p, params.m, params.n, q, r)
    if bound > hom.value:
        alpha, branch, open_sup = hom.value, Branch.HOMOGENEOUS_LIMITED, True
    else:
        alpha, branch, open_sup = bound, Branch.SOURCE_LIMITED, False
    beta = dnl_beta(params.p, params.m, alpha)
    theta = dnl_theta(params.p, params.m, beta)
    return RegularityReport(beta, beta / theta, theta, branch, open_sup, alpha)


def p_monotonicity_sign(n: int, q: float, r: float) -> int:
    """Sign of the derivative of the p-parabolic exponent in p.

    Equals sign(q(2 - r) + nr); for r = inf the limit sign(n - q) of the
    expression divided by r is returned.  Guaranteed +1 whenever the
    admissibility window holds.
    """
    if math.isinf(q):
        raise ValueError("q must be finite")
    if math.isinf(r):
        value = n - q
    else:
        value = q * (2.0 - r) + n * r
    return (value > 0) - (value < 0)
