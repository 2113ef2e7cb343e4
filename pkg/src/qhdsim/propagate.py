"""Split-step spectral time evolution with adaptive step doubling.

One step applies the potential phase for the first half interval, the exact
kinetic phase in Fourier space for the whole interval, then the potential
phase for the second half; coefficient integrals use the schedule's closed
forms, so the only discretization error is the operator splitting itself
(local error O(dt^3)). The error controller compares a full step against two
half steps and targets tol_step per unit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import (
    GridMismatchError,
    InstabilityError,
    InvalidParameterError,
    NumericError,
    StepBudgetError,
)
from .grid import FOURIER, POSITION, GridSpec, WaveState, as_fourier, as_position
from .schedules import Schedule

__all__ = [
    "EvolveConfig",
    "EvolveResult",
    "kinetic_phase",
    "potential_phase",
    "strang_step",
    "evolve",
]

NORM_DRIFT_LIMIT = 1e-8
FINAL_DRIFT_LIMIT = 1e-10


@dataclass(frozen=True)
class EvolveConfig:
    dt_initial: float = 1e-3
    tol_step: float = 1e-6
    max_steps: int = 2_000_000
    record_every: int = 100
    seed: int = 0
    estimate_interval: int = 1  # accepted steps between error re-estimates

    def __post_init__(self):
        if self.dt_initial <= 0 or self.tol_step <= 0:
            raise InvalidParameterError("dt_initial and tol_step must be positive")
        if self.max_steps < 1 or self.record_every < 1 or self.estimate_interval < 1:
            raise InvalidParameterError("max_steps, record_every, estimate_interval must be >= 1")


@dataclass
class EvolveResult:
    state: WaveState
    times: np.ndarray
    norms: np.ndarray
    steps_accepted: int
    steps_rejected: int
    norm_drift: float
    dt_final: float


def _mode_multiplier(grid: GridSpec) -> np.ndarray:
    n = np.rint(np.fft.fftfreq(grid.points_per_axis) * grid.points_per_axis)
    return (2.0 * np.pi * n) ** 2


def _apply_axis(psi: np.ndarray, vec: np.ndarray, axis: int):
    shape = [1] * psi.ndim
    shape[axis] = vec.size
    psi *= vec.reshape(shape)


def kinetic_phase(state: WaveState, theta: float) -> WaveState:
    """Multiply Fourier coefficient n by exp(-i (2pi|n|)^2 theta)."""
    if not math.isfinite(theta):
        raise InvalidParameterError("theta must be finite")
    started_in_position = state.representation == POSITION
    work = as_fourier(state)
    amps = work.amplitudes.copy()
    axis_phase = np.exp(-1j * theta * _mode_multiplier(state.grid))
    for axis in range(state.grid.d):
        _apply_axis(amps, axis_phase, axis)
    out = WaveState(state.grid, amps, FOURIER, normalized=state.normalized)
    return as_position(out) if started_in_position else out


def potential_phase(state: WaveState, beta: float, field: np.ndarray) -> WaveState:
    """Multiply sample j by exp(-i beta g(x_j))."""
    field = np.asarray(field, dtype=float)
    if field.shape != state.grid.shape:
        raise GridMismatchError("potential field shape does not match the state's grid")
    started_in_fourier = state.representation == FOURIER
    work = as_position(state)
    amps = work.amplitudes * np.exp((-1j * beta) * field)
    out = WaveState(state.grid, amps, POSITION, normalized=state.normalized)
    return as_fourier(out) if started_in_fourier else out


def strang_step(state: WaveState, t: float, dt: float, schedule: Schedule, field: np.ndarray) -> WaveState:
    """One second-order split step over [t, t + dt]."""
    if dt <= 0:
        raise InvalidParameterError("dt must be positive")
    mid = t + 0.5 * dt
    out = potential_phase(state, schedule.int_b(t, mid), field)
    out = kinetic_phase(out, schedule.int_a(t, t + dt))
    return potential_phase(out, schedule.int_b(mid, t + dt), field)


class _Stepper:
    """Raw-array split stepping with per-axis phase factorization."""

    def __init__(self, grid: GridSpec, field: np.ndarray, axis_fields: Optional[Sequence[np.ndarray]]):
        self.grid = grid
        self.mu = _mode_multiplier(grid)
        self.field = np.asarray(field, dtype=float)
        if self.field.shape != grid.shape:
            raise GridMismatchError("potential field shape does not match the grid")
        self.axes = None
        if axis_fields is not None and grid.d > 1:
            axes = [np.asarray(h, dtype=float) for h in axis_fields]
            if len(axes) != grid.d or any(h.shape != (grid.points_per_axis,) for h in axes):
                raise GridMismatchError("axis fields must be d arrays of length 2N")
            recon = axes[0].reshape([-1] + [1] * (grid.d - 1)).copy()
            for j in range(1, grid.d):
                shape = [1] * grid.d
                shape[j] = grid.points_per_axis
                recon = recon + axes[j].reshape(shape)
            if not np.allclose(recon, self.field, atol=1e-12, rtol=0.0):
                raise GridMismatchError("axis fields do not sum to the full potential field")
            self.axes = axes

    def potential(self, psi: np.ndarray, beta: float):
        if beta == 0.0:
            return
        if self.axes is None:
            psi *= np.exp((-1j * beta) * self.field)
        else:
            for j, h in enumerate(self.axes):
                _apply_axis(psi, np.exp((-1j * beta) * h), j)

    def kinetic(self, psi: np.ndarray, alpha: float) -> np.ndarray:
        out = sfft.fftn(psi, norm="ortho", overwrite_x=True)
        axis_phase = np.exp((-1j * alpha) * self.mu)
        for axis in range(self.grid.d):
            _apply_axis(out, axis_phase, axis)
        return sfft.ifftn(out, norm="ortho", overwrite_x=True)

    def plain(self, psi: np.ndarray, schedule: Schedule, t: float, dt: float) -> np.ndarray:
        mid = t + 0.5 * dt
        self.potential(psi, schedule.int_b(t, mid))
        psi = self.kinetic(psi, schedule.int_a(t, t + dt))
        self.potential(psi, schedule.int_b(mid, t + dt))
        return psi

    def pair_and_big(self, psi: np.ndarray, schedule: Schedule, t: float, dt: float):
        """Two half steps (middle potentials merged) and one full step, from the same input."""
        q = [schedule.int_b(t + 0.25 * i * dt, t + 0.25 * (i + 1) * dt) for i in range(4)]
        a1 = schedule.int_a(t, t + 0.5 * dt)
        a2 = schedule.int_a(t + 0.5 * dt, t + dt)

        big = psi.copy()
        self.potential(big, q[0] + q[1])
        big = self.kinetic(big, a1 + a2)
        self.potential(big, q[2] + q[3])

        half = psi.copy()
        self.potential(half, q[0])
        half = self.kinetic(half, a1)
        self.potential(half, q[1] + q[2])
        half = self.kinetic(half, a2)
        self.potential(half, q[3])
        return half, big


def evolve(
    state: WaveState,
    schedule: Schedule,
    t0: float,
    t1: float,
    config: EvolveConfig,
    field: np.ndarray,
    recorder=None,
    axis_fields: Optional[Sequence[np.ndarray]] = None,
) -> EvolveResult:
    """Advance the state from t0 to t1 under the scheduled Hamiltonian.

    Every config.estimate_interval-th accepted step is a doubled step whose
    half/full discrepancy drives dt; the steps in between reuse the current
    dt without re-estimating. Raises on step-budget exhaustion (carrying
    partial results) and on norm drift beyond NORM_DRIFT_LIMIT.
    """
    if t1 <= t0:
        raise InvalidParameterError("need t0 < t1")
    schedule._check_domain([t0, t1])
    stepper = _Stepper(state.grid, field, axis_fields)
    psi = as_position(state).amplitudes.copy()

    times = [t0]
    norms = [float(np.linalg.norm(psi.ravel()))]
    if recorder is not None:
        recorder.record(t0, WaveState(state.grid, psi.copy(), POSITION, normalized=False))

    t = t0
    dt_candidate = min(config.dt_initial, t1 - t0)  # next size to try at an estimate step
    dt_verified = dt_candidate  # last size that passed estimation; plain steps reuse it
    dt = dt_candidate
    accepted = rejected = 0
    since_estimate = 0
    worst_drift = abs(norms[0] - 1.0)

    def checkpoint(now):
        nonlocal worst_drift
        norm = float(np.linalg.norm(psi.ravel()))
        drift = abs(norm - 1.0)
        worst_drift = max(worst_drift, drift)
        times.append(now)
        norms.append(norm)
        if drift > NORM_DRIFT_LIMIT:
            raise InstabilityError(f"norm drifted to {norm} at t={now}")
        if recorder is not None:
            recorder.record(now, WaveState(state.grid, psi.copy(), POSITION, normalized=False))

    def partial_result():
        return EvolveResult(
            WaveState(state.grid, psi.copy(), POSITION, normalized=False),
            np.asarray(times), np.asarray(norms), accepted, rejected, worst_drift, dt,
        )

    end_guard = 1e-13 * max(1.0, abs(t1))
    while t < t1 - end_guard:
        if accepted + rejected >= config.max_steps:
            raise StepBudgetError(
                f"exceeded {config.max_steps} steps at t={t:.6g} of [{t0}, {t1}]",
                partial=partial_result(),
            )
        if since_estimate == 0:
            dt = min(dt_candidate, t1 - t)
            if dt <= 1e-14 * max(1.0, abs(t)):
                raise NumericError(f"step size underflow at t={t}")
            half, big = stepper.pair_and_big(psi, schedule, t, dt)
            err = float(np.linalg.norm((big - half).ravel()))
            tol = config.tol_step * dt
            if err <= tol:
                psi = half
                t += dt
                accepted += 1
                dt_verified = dt
                since_estimate = (since_estimate + 1) % config.estimate_interval
                if accepted % config.record_every == 0 or t >= t1 - end_guard:
                    checkpoint(t)
            else:
                rejected += 1
            factor = 0.9 * math.sqrt(tol / err) if err > 0 else 2.0
            dt_candidate = dt * min(2.0, max(0.2, factor))
        else:
            dt = min(dt_verified, t1 - t)
            if dt <= 1e-14 * max(1.0, abs(t)):
                raise NumericError(f"step size underflow at t={t}")
            psi = stepper.plain(psi, schedule, t, dt)
            t += dt
            accepted += 1
            since_estimate = (since_estimate + 1) % config.estimate_interval
            if accepted % config.record_every == 0 or t >= t1 - end_guard:
                checkpoint(t)

    if times[-1] != t:
        checkpoint(t)
    final_norm = norms[-1]
    if abs(final_norm - 1.0) > FINAL_DRIFT_LIMIT:
        raise InstabilityError(f"final norm {final_norm} outside the 1e-10 budget")
    final = WaveState(state.grid, psi, POSITION, normalized=False)
    return EvolveResult(final, np.asarray(times), np.asarray(norms), accepted, rejected, worst_drift, dt)
