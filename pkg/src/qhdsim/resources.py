"""Closed-form query, qubit, and gate calculators for the simulation and
descent-optimization cost bounds.

Every suppressed constant is set to one and polylog factors are kept only
where the source expressions state them; outputs that bundle several
formulas carry an explicit convention note so the numbers are never
mistaken for hardware forecasts.  Logarithms are natural unless a count is
explicitly a register width (those use log2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InvalidParameterError

__all__ = [
    "CONVENTION_NOTE",
    "ResourceEstimate",
    "QueryBudget",
    "LowerBounds",
    "BaselineCost",
    "eps_f_budget",
    "queries_binary",
    "queries_phase",
    "qubit_count",
    "gate_count",
    "estimate_resources",
    "qhd_query_upper",
    "qhd_query_lower",
    "stochastic_queries",
    "baseline_queries",
]

CONVENTION_NOTE = "leading-order, constants = 1"


def _log_ratio(Lambda: float, b_l1: float, eps: float):
    """ln(x) and lnln(x) for x = Lambda*b_l1/eps, guarding the log domain."""
    for name, v in (("Lambda", Lambda), ("b_l1", b_l1), ("eps", eps)):
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive")
    x = Lambda * b_l1 / eps
    if x <= math.e:
        raise DomainError(
            f"Lambda*b_l1/eps = {x:.6g} must exceed e for the iterated log"
        )
    lx = math.log(x)
    return lx, math.log(lx)


def eps_f_budget(eps: float, Lambda: float, b_l1: float) -> float:
    """Largest admissible per-evaluation error for an eps-accurate simulation.

    1/eps_f = (b_l1/eps) * ln(x)/lnln(x) with x = Lambda*b_l1/eps.
    """
    lx, llx = _log_ratio(Lambda, b_l1, eps)
    return 1.0 / ((b_l1 / eps) * lx / llx)


def queries_binary(Lambda: float, b_l1: float, eps: float) -> int:
    """Oracle calls with bit-valued answers, rounded up."""
    lx, llx = _log_ratio(Lambda, b_l1, eps)
    return math.ceil(Lambda * b_l1 * lx / llx)


def queries_phase(Lambda: float, b_l1: float, eps: float) -> int:
    """Oracle calls with phase-valued answers, rounded up."""
    lx, llx = _log_ratio(Lambda, b_l1, eps)
    return math.ceil((Lambda * b_l1) ** 2 / eps * lx**3 / llx**2)


def qubit_count(d: int, N: int, a_l1: float, Lambda: float, b_l1: float,
                eps: float) -> int:
    """Register width: d*log2(N) + log2(d*N^2) + log2(a_l1/eps) + log2(Lambda*b_l1/eps)."""
    if d < 1:
        raise InvalidParameterError("dimension must be at least 1")
    if N < 1 or N & (N - 1):
        raise InvalidParameterError(f"N must be a power of two, got {N}")
    for name, v in (("a_l1", a_l1), ("Lambda", Lambda), ("b_l1", b_l1), ("eps", eps)):
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive")
    total = (d * math.log2(N) + math.log2(d * N * N)
             + math.log2(a_l1 / eps) + math.log2(Lambda * b_l1 / eps))
    return math.ceil(total)


def gate_count(d: int, N: int, a_l1: float, Lambda: float, b_l1: float,
               eps: float) -> int:
    """Elementary-gate tally, reported as stated with constants one.

    Too many conventions stack up here for the number to enter any
    invariant; it is carried for the report tables only.
    """
    if d < 1 or N < 1:
        raise InvalidParameterError("d and N must be at least 1")
    if not a_l1 > 0:
        raise InvalidParameterError("a_l1 must be positive")
    lx, llx = _log_ratio(Lambda, b_l1, eps)
    prefactor = (Lambda * b_l1) ** 2 / eps * lx**3 / llx**2
    ln_n = math.log(N)
    bracket = (d * ln_n * math.log(d * N * N)
               + d * ln_n * math.log((a_l1 + Lambda * b_l1 / (d * N * N)) / eps)
               + lx**3)
    return math.ceil(prefactor * bracket)


@dataclass(frozen=True)
class ResourceEstimate:
    """Bundle of modeled costs for one simulation configuration."""

    queries_binary: int
    queries_phase: int
    qubits: int
    gates: int
    eps_f: float
    convention_note: str = CONVENTION_NOTE

    def __post_init__(self):
        for name in ("queries_binary", "queries_phase", "qubits", "gates"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be nonnegative")
        if not self.eps_f > 0:
            raise InvalidParameterError("eps_f must be positive")


def estimate_resources(d: int, N: int, a_l1: float, Lambda: float, b_l1: float,
                       eps: float) -> ResourceEstimate:
    return ResourceEstimate(
        queries_binary=queries_binary(Lambda, b_l1, eps),
        queries_phase=queries_phase(Lambda, b_l1, eps),
        qubits=qubit_count(d, N, a_l1, Lambda, b_l1, eps),
        gates=gate_count(d, N, a_l1, Lambda, b_l1, eps),
        eps_f=eps_f_budget(eps, Lambda, b_l1),
    )


@dataclass(frozen=True)
class QueryBudget:
    """Evaluation-query count together with the noise it survives."""

    count: float
    noise: float


@dataclass(frozen=True)
class LowerBounds:
    """Query floor in its general form and under the sqrt(d) convention."""

    general: float
    hypercube: float


def _check_positive(**kwargs):
    for name, v in kwargs.items():
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive")


def qhd_query_upper(d: int, G: float, R: float, eps: float) -> QueryBudget:
    """Descent-algorithm query count d^1.5 (GR/eps)^2 and its noise floor.

    Polylog factors are dropped entirely, per the convention note.
    """
    _check_positive(d=d, G=G, R=R, eps=eps)
    return QueryBudget(count=d**1.5 * (G * R / eps) ** 2,
                       noise=eps**3 / (d**1.5 * G**2 * R**2))


def qhd_query_lower(d: int, G: float, R: float, eps: float,
                    lambda_f: float = None) -> LowerBounds:
    """No-fast-forwarding query floor sqrt(d)*G*R*lambda_f/eps^2.

    lambda_f is the objective's oracle-sensitivity scale; it defaults to
    sqrt(d), the hypercube convention, which makes both forms coincide.
    """
    _check_positive(d=d, G=G, R=R, eps=eps)
    if lambda_f is None:
        lambda_f = math.sqrt(d)
    elif lambda_f <= 0:
        raise InvalidParameterError("lambda_f must be positive")
    return LowerBounds(general=math.sqrt(d) * G * R * lambda_f / eps**2,
                       hypercube=d * G * R / eps**2)


def stochastic_queries(d: int, G: float, R: float, eps: float) -> float:
    """Query count d^3 (GR/eps)^5 under unit-variance stochastic answers."""
    _check_positive(d=d, G=G, R=R, eps=eps)
    return d**3 * (G * R / eps) ** 5


@dataclass(frozen=True)
class BaselineCost:
    """Query count and admissible noise for one comparison algorithm."""

    count: float
    noise: float


_BASELINES = {
    "belloni": lambda d, G, R, eps: BaselineCost(
        count=d**4.5, noise=eps / d),
    "risteski_li": lambda d, G, R, eps: BaselineCost(
        count=d**4 * (G * R / eps) ** 6,
        noise=max(eps**2 / (math.sqrt(d) * G * R), eps / d)),
    "li_zhang": lambda d, G, R, eps: BaselineCost(
        count=d**3, noise=eps / d),
    "subgradient": lambda d, G, R, eps: BaselineCost(
        count=(G * R / eps) ** 2,
        noise=eps**5 / (d**4.5 * G**4 * R**4)),
}


def baseline_queries(algorithm: str, d: int, G: float, R: float,
                     eps: float) -> BaselineCost:
    """Leading-order cost of a named comparison algorithm."""
    _check_positive(d=d, G=G, R=R, eps=eps)
    try:
        row = _BASELINES[algorithm]
    except KeyError:
        known = ", ".join(sorted(_BASELINES))
        raise InvalidParameterError(
            f"unknown algorithm {algorithm!r}; known: {known}"
        ) from None
    return row(d, G, R, eps)
