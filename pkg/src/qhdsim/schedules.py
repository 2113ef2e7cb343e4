"""Time schedules driving the evolving Hamiltonian.

A schedule is the triple of positive functions (c_t, m_t, omega_t) subject to
the scaling conditions dm/dt = lam*c*m and domega/dt <= (lam/2)*c*omega. The
kinetic and potential weights are a(t) = c/(2m) and b(t) = c*m*omega^2; their
exact interval integrals are exposed for the integrator, and the L1 weight of
b admits a closed form when the second condition holds with a fixed ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .errors import (
    DomainError,
    InvalidParameterError,
    NumericError,
    UnreachableTargetError,
    UnsupportedScheduleError,
)

__all__ = [
    "Schedule",
    "ScalingReport",
    "exponential",
    "polynomial",
    "custom",
    "ab_coeffs",
    "b_l1_closed_form",
    "b_l1_quadrature",
    "validate_ideal_scaling",
    "stopping_time",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class Schedule:
    kind: str
    lam: float
    theta: float
    t_start: float
    m0: float
    omega0: float
    c: Optional[float] = None
    k: Optional[float] = None
    t0: Optional[float] = None
    funcs: Optional[tuple] = None  # (c_t, m_t, omega_t) for custom kinds

    def _check_domain(self, t):
        if np.any(np.asarray(t) < self.t_start - 1e-12):
            raise DomainError(f"t={t} below schedule start {self.t_start}")

    def c_at(self, t):
        self._check_domain(t)
        if self.kind == "exponential":
            return self.c * np.ones_like(np.asarray(t, dtype=float))
        if self.kind == "polynomial":
            return self.k / np.asarray(t, dtype=float)
        return self.funcs[0](t)

    def m_at(self, t):
        self._check_domain(t)
        if self.kind == "exponential":
            return self.m0 * np.exp(self.c * np.asarray(t, dtype=float))
        if self.kind == "polynomial":
            return self.m0 * (np.asarray(t, dtype=float) / self.t0) ** self.k
        return self.funcs[1](t)

    def omega_at(self, t):
        self._check_domain(t)
        if self.kind == "exponential":
            return self.omega0 * np.exp(0.5 * self.c * np.asarray(t, dtype=float))
        if self.kind == "polynomial":
            return self.omega0 * (np.asarray(t, dtype=float) / self.t0) ** (0.5 * self.k)
        return self.funcs[2](t)

    def a_at(self, t):
        return self.c_at(t) / (2.0 * self.m_at(t))

    def b_at(self, t):
        return self.c_at(t) * self.m_at(t) * self.omega_at(t) ** 2

    def int_a(self, t1: float, t2: float) -> float:
        """Exact integral of a(t) over [t1, t2] (5-point Gauss for custom kinds)."""
        self._check_domain([t1, t2])
        if self.kind == "exponential":
            return (math.exp(-self.c * t1) - math.exp(-self.c * t2)) / (2.0 * self.m0)
        if self.kind == "polynomial":
            return ((self.t0 / t1) ** self.k - (self.t0 / t2) ** self.k) / (2.0 * self.m0)
        return self._gauss(self.a_at, t1, t2)

    def int_b(self, t1: float, t2: float) -> float:
        self._check_domain([t1, t2])
        if self.kind == "exponential":
            return 0.5 * self.m0 * self.omega0**2 * (math.exp(2 * self.c * t2) - math.exp(2 * self.c * t1))
        if self.kind == "polynomial":
            return 0.5 * self.m0 * self.omega0**2 * ((t2 / self.t0) ** (2 * self.k) - (t1 / self.t0) ** (2 * self.k))
        return self._gauss(self.b_at, t1, t2)

    @staticmethod
    def _gauss(f, t1, t2):
        half = 0.5 * (t2 - t1)
        mid = 0.5 * (t1 + t2)
        return float(half * np.sum(_GL_WEIGHTS * f(mid + half * _GL_NODES)))


def exponential(c: float, m0: float = 1.0, omega0: float = 1.0) -> Schedule:
    if c <= 0 or m0 <= 0 or omega0 <= 0:
        raise InvalidParameterError("exponential schedule needs c, m0, omega0 > 0")
    return Schedule("exponential", 1.0, 1.0, 0.0, m0, omega0, c=c)


def polynomial(k: float, t0: float, m0: float = 1.0, omega0: float = 1.0) -> Schedule:
    if k <= 0 or t0 <= 0 or m0 <= 0 or omega0 <= 0:
        raise InvalidParameterError("polynomial schedule needs k, t0, m0, omega0 > 0")
    return Schedule("polynomial", 1.0, 1.0, t0, m0, omega0, k=k, t0=t0)


def custom(
    c_t: Callable,
    m_t: Callable,
    omega_t: Callable,
    lam: float = 1.0,
    theta: float = 1.0,
    t_start: float = 0.0,
) -> Schedule:
    if lam <= 0 or not 0 < theta <= 1:
        raise InvalidParameterError("need lam > 0 and theta in (0, 1]")
    return Schedule(
        "custom",
        lam,
        theta,
        t_start,
        float(m_t(t_start)),
        float(omega_t(t_start)),
        funcs=(c_t, m_t, omega_t),
    )


def ab_coeffs(s: Schedule, t) -> tuple:
    return s.a_at(t), s.b_at(t)


def b_l1_closed_form(s: Schedule, T: float) -> float:
    """Integral of b over [t_start, T] for ratio-equality schedules."""
    if s.kind not in ("exponential", "polynomial"):
        raise UnsupportedScheduleError(
            "closed form requires the equality scaling structure; use b_l1_quadrature"
        )
    s._check_domain(T)
    ratio = float(s.omega_at(T)) / s.omega0
    power = 2.0 * (1.0 + s.theta) / s.theta
    return s.m0 * s.omega0**2 / ((1.0 + s.theta) * s.lam) * (ratio**power - 1.0)


def b_l1_quadrature(s: Schedule, T: float) -> float:
    s._check_domain(T)
    if T <= s.t_start:
        return 0.0
    val, err = quad(lambda t: float(s.b_at(t)), s.t_start, T, epsabs=0.0, epsrel=1e-10, limit=500)
    if not np.isfinite(val) or (val > 0 and err / val > 1e-8):
        raise NumericError(f"quadrature of b did not converge: value {val}, error {err}")
    return val


@dataclass(frozen=True)
class ScalingReport:
    samples: int
    max_mass_residual: float
    max_omega_excess: float
    ok: bool


def validate_ideal_scaling(s: Schedule, samples: int = 100, t_end: Optional[float] = None) -> ScalingReport:
    """Numeric-derivative check of both scaling conditions at log-spaced times."""
    if samples < 2:
        raise InvalidParameterError("need at least 2 samples")
    if t_end is None:
        t_end = s.t_start + 10.0
    span = t_end - s.t_start
    if span <= 0:
        raise InvalidParameterError("t_end must exceed t_start")
    offsets = np.geomspace(span * 1e-4, span, samples)
    mass_worst = 0.0
    omega_worst = 0.0
    for t in s.t_start + offsets:
        h = 1e-5 * max(abs(t), 1.0)
        lo = max(t - h, s.t_start)
        hi = t + h
        dm = (float(s.m_at(hi)) - float(s.m_at(lo))) / (hi - lo)
        dw = (float(s.omega_at(hi)) - float(s.omega_at(lo))) / (hi - lo)
        c, m, w = float(s.c_at(t)), float(s.m_at(t)), float(s.omega_at(t))
        mass_target = s.lam * c * m
        mass_worst = max(mass_worst, abs(dm - mass_target) / abs(mass_target))
        omega_cap = 0.5 * s.lam * c * w
        omega_worst = max(omega_worst, (dw - omega_cap) / abs(omega_cap))
    ok = mass_worst <= 1e-6 and omega_worst <= 1e-6
    return ScalingReport(samples, mass_worst, omega_worst, ok)


def stopping_time(s: Schedule, eps: float, E0: float) -> float:
    """Smallest T with E0 / omega_T^2 <= eps / 24."""
    if eps <= 0 or E0 <= 0:
        raise InvalidParameterError("need eps > 0 and E0 > 0")
    target = math.sqrt(24.0 * E0 / eps)  # required omega_T
    if s.omega0 >= target:
        return s.t_start
    ratio = target / s.omega0
    if s.kind == "exponential":
        return 2.0 * math.log(ratio) / s.c
    if s.kind == "polynomial":
        return s.t0 * ratio ** (2.0 / s.k)
    lo, hi = s.t_start, max(s.t_start * 2.0, s.t_start + 1.0)
    for _ in range(200):
        if float(s.omega_at(hi)) >= target:
            break
        hi = 2.0 * hi if hi > 0 else 1.0
    else:
        raise UnreachableTargetError(
            f"omega stays below the required {target:.6g}; cannot certify accuracy {eps}"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(s.omega_at(mid)) >= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * max(1.0, hi):
            break
    return hi
