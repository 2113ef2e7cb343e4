"""Run diagnostics: energy functional, error bounds, grid sizing, and fits.

Two kinds of quantity live here.  Measurements evaluate discrete states
(energy, expectations, boundary leakage, spectral tails, collocation
residuals); closed-form bounds predict discretization error (truncation,
aliasing) and pick grid sizes.  Bounds whose derivation absorbs an unknown
leading constant use the convention constant = 1; empirical soundness tests
compare those at order of magnitude only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .errors import (
    BoundHypothesisError,
    DomainError,
    FitError,
    GridMismatchError,
    InvalidParameterError,
    ResolutionError,
)
from .grid import (
    WaveState,
    _mode_norm_sq,
    as_fourier,
    as_position,
    project_PM,
)

__all__ = [
    "EnergyReport",
    "EnergyRecorder",
    "FitResult",
    "lyapunov_energy",
    "expected_f",
    "truncation_bound",
    "aliasing_bound",
    "select_N",
    "leakage",
    "decay_rate_fit",
    "interpolation_error_measured",
    "collocation_residual",
]


@dataclass(frozen=True)
class EnergyReport:
    """Recorded trajectory diagnostics.

    All series share one length.  ``bound`` is the envelope E_0/omega_t^2
    implied by the first recorded energy.
    """

    times: np.ndarray
    E_t: np.ndarray
    f_mean: np.ndarray
    norm: np.ndarray
    leakage: np.ndarray
    bound: np.ndarray
    tail_mass: np.ndarray

    def __post_init__(self):
        series = (self.times, self.E_t, self.f_mean, self.norm, self.leakage, self.bound, self.tail_mass)
        lengths = {len(s) for s in series}
        if len(lengths) != 1:
            raise InvalidParameterError(f"series lengths differ: {sorted(lengths)}")
        if len(self.norm) and np.any(np.abs(self.norm - 1.0) > 1e-8):
            raise InvalidParameterError("recorded norms drifted beyond 1e-8")


def _momentum_sq(state: WaveState) -> np.ndarray:
    # multiplier (2*pi*|n|_2)^2 over the mode lattice
    return (2.0 * np.pi) ** 2 * _mode_norm_sq(state.grid.d, state.grid.N)


def lyapunov_energy(state, schedule, t, x_star, field, f_star) -> float:
    """Energy functional (p/m_t + lam*(x - x*))^2/2 + omega_t^2*(f - f*).

    Momentum acts as the Fourier multiplier 2*pi*n on the unit box while x,
    x* and f are physical; the two frames coincide on the identity box
    (radius 1/2, centered at 0), which is where the monotonicity guarantee
    is exercised.
    """
    grid = state.grid
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    if x_star.shape != (grid.d,):
        raise InvalidParameterError(f"minimizer must have length {grid.d}")
    offset = x_star - np.asarray(grid.center)
    if np.any(offset < -grid.radius) or np.any(offset >= grid.radius):
        raise DomainError(f"minimizer {x_star} outside the simulation box")
    if np.asarray(field).shape != grid.shape:
        raise GridMismatchError("field shape does not match the grid")

    lam = schedule.lam
    m_t = float(schedule.m_at(t))
    omega_t = float(schedule.omega_at(t))

    pos = as_position(state)
    four = as_fourier(state)
    prob = np.abs(pos.amplitudes) ** 2
    dx = grid.physical_points() - x_star

    p_sq = float(np.sum(np.abs(four.amplitudes) ** 2 * _momentum_sq(state)))
    x_sq = float(np.sum(prob * np.sum(dx * dx, axis=-1)))

    cross = 0.0
    modes = grid.axis_modes().astype(float)
    for axis in range(grid.d):
        shape = [1] * grid.d
        shape[axis] = grid.points_per_axis
        mult = (2.0 * np.pi) * modes.reshape(shape)
        p_psi = WaveState(grid, mult * four.amplitudes, "fourier", normalized=False)
        p_psi = as_position(p_psi).amplitudes
        cross += float(np.real(np.vdot(p_psi, dx[..., axis] * pos.amplitudes)))

    kinetic_part = 0.5 * (p_sq / m_t**2 + 2.0 * lam * cross / m_t + lam**2 * x_sq)
    potential_part = omega_t**2 * (float(np.sum(prob * np.asarray(field))) - f_star)
    return kinetic_part + potential_part


def expected_f(state: WaveState, field, f_star: float) -> float:
    """Discrete objective expectation sum_j g(x_j)|Psi_j|^2 - f*."""
    if np.asarray(field).shape != state.grid.shape:
        raise GridMismatchError("field shape does not match the grid")
    prob = np.abs(as_position(state).amplitudes) ** 2
    return float(np.sum(prob * np.asarray(field)) - f_star)


def truncation_bound(sobolev_m: float, N: int, m: int) -> float:
    """Band truncation error bound |phi|_{H^m} / N^m (exact inequality)."""
    if m < 1:
        raise InvalidParameterError("Sobolev order must be at least 1")
    if N < 1:
        raise InvalidParameterError("half grid size must be at least 1")
    return sobolev_m / N**m


def aliasing_bound(sobolev_m: float, N: int, m: float, d: int) -> float:
    """Aliasing error bound, leading constant convention = 1.

    Valid for Sobolev order m > max(d/2, 2); below that the derivation's
    tail sum diverges and the hypothesis is violated.
    """
    if m <= max(d / 2.0, 2.0):
        raise BoundHypothesisError(
            f"aliasing bound needs Sobolev order m > max(d/2, 2) = {max(d / 2.0, 2.0)}, got {m}"
        )
    if N < 1:
        raise InvalidParameterError("half grid size must be at least 1")
    return (
        (math.pi / 4.0) ** (d / 4.0)
        * sobolev_m
        / (math.sqrt((m - d / 2.0) * math.gamma(d / 2.0)) * N**m)
    )


def _next_pow2(target: float) -> int:
    if target <= 1.0:
        return 1
    return 2 ** math.ceil(math.log2(target) - 1e-12)


def select_N(
    norm_a_l1: float,
    norm_b_l1: float,
    G: float,
    R: float,
    d: int,
    eps: float,
    sobolev_d: float,
    sobolev_3: float,
    envelope: str | None = None,
    envelope_degree: int | None = None,
) -> int:
    """Smallest power-of-two half grid size meeting the resolution rule.

    The general rule (constant convention = 1) requires

        log2 N >= d * log2( ||a||_1^{1/d} * [max(s_d, s_3)^{1/d} + ||b||_1*G*R*d] / eps ).

    Callers asserting an envelope hypothesis on the wavepacket may request
    the sharper alternatives: envelope="gaussian" gives N >= d^{1.25}*R/eps;
    envelope="polynomial" (with the envelope polynomial degree) gives
    N >= ((2R)^{k/2} * d^{5k/2-1/4} * ||b||_1 + s_d^{1/d}) / eps.
    """
    for name, v in (("norm_a_l1", norm_a_l1), ("norm_b_l1", norm_b_l1), ("G", G),
                    ("R", R), ("eps", eps), ("sobolev_d", sobolev_d), ("sobolev_3", sobolev_3)):
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive, got {v}")
    if d < 1:
        raise InvalidParameterError("dimension must be at least 1")

    if envelope is None:
        base = norm_a_l1 ** (1.0 / d) * (max(sobolev_d, sobolev_3) ** (1.0 / d) + norm_b_l1 * G * R * d) / eps
        return _next_pow2(base**d)
    if envelope == "gaussian":
        return _next_pow2(d**1.25 * R / eps)
    if envelope == "polynomial":
        if envelope_degree is None or envelope_degree < 1:
            raise InvalidParameterError("polynomial envelope needs a positive degree")
        k = float(envelope_degree)
        target = ((2.0 * R) ** (k / 2.0) * d ** (2.5 * k - 0.25) * norm_b_l1 + sobolev_d ** (1.0 / d)) / eps
        return _next_pow2(target)
    raise InvalidParameterError(f"unknown envelope kind {envelope!r}")


def leakage(state: WaveState, delta: float) -> float:
    """Probability mass outside the ball B_inf(1/2 - delta).

    A grid point counts as outside when its whole quadrature cell (side
    1/(2N), centered on the point) misses the ball, matching the Riemann-sum
    reading of the continuum integral; hence leakage -> 0 as delta -> 0.
    """
    if not 0.0 < delta < 0.5:
        raise InvalidParameterError(f"margin must lie in (0, 1/2), got {delta}")
    pos = as_position(state)
    pts = state.grid.unit_points()
    half_cell = 0.25 / state.grid.N
    outside = np.max(np.abs(pts), axis=-1) > 0.5 - delta + half_cell
    return float(np.sum(np.abs(pos.amplitudes[outside]) ** 2))


@dataclass(frozen=True)
class FitResult:
    slope: float
    r_squared: float


def decay_rate_fit(times, values, window, log_time: bool = False) -> FitResult:
    """Least-squares exponent of values on the window.

    Fits log(values) against t (decay exponent) or against log(t) when
    log_time is set (polynomial exponent).
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape or times.ndim != 1:
        raise InvalidParameterError("times and values must be matching 1-D arrays")
    lo, hi = window
    mask = (times >= lo) & (times <= hi)
    if np.count_nonzero(mask) < 10:
        raise FitError(f"window [{lo}, {hi}] holds {np.count_nonzero(mask)} points, need at least 10")
    t_w = times[mask]
    v_w = values[mask]
    if np.any(v_w <= 0.0):
        raise FitError("values must be positive on the fit window")
    x = np.log(t_w) if log_time else t_w
    if log_time and np.any(t_w <= 0.0):
        raise FitError("log-time fit needs positive times on the window")
    y = np.log(v_w)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return FitResult(slope=float(slope), r_squared=float(r2))


def interpolation_error_measured(f_fine: np.ndarray, N: int) -> float:
    """L2 distance between a function and its N-band Fourier interpolant.

    ``f_fine`` holds samples on a power-of-two refinement of the 2N grid
    (FFT axis order); both the interpolant and the quadrature are evaluated
    on that finer grid.
    """
    fine = np.asarray(f_fine, dtype=np.complex128)
    if N < 1:
        raise InvalidParameterError("half grid size must be at least 1")
    d = fine.ndim
    sizes = set(fine.shape)
    if len(sizes) != 1:
        raise ResolutionError("fine grid must be square")
    fine_n = fine.shape[0]
    ratio, coarse_n = divmod(fine_n, 2 * N)
    if coarse_n != 0 or ratio < 2 or ratio & (ratio - 1):
        raise ResolutionError(
            f"fine axis size {fine_n} is not a power-of-two refinement of {2 * N}"
        )

    coarse = fine[(slice(None, None, ratio),) * d]
    coeff = scipy.fft.fftn(coarse, norm="forward")

    embed = np.zeros_like(fine)
    n_axis = np.rint(np.fft.fftfreq(2 * N) * 2 * N).astype(int)
    idx = n_axis % fine_n
    embed[np.ix_(*([idx] * d))] = coeff
    interp = scipy.fft.ifftn(embed, norm="forward")

    return float(np.linalg.norm((fine - interp).ravel()) / math.sqrt(fine.size))


def collocation_residual(snapshots, schedule, field) -> float:
    """Finite-difference residual of the collocation equation at a snapshot.

    ``snapshots`` is an odd-length, uniformly spaced sequence of (t, state)
    pairs bracketing the evaluation point (its center).  The time derivative
    uses the centered stencil of maximal order for the window (2nd order for
    3 points, 4th for 5), so the returned value
    || i*dPsi/dt + a*Lap(Psi) - I_N[V*Psi] || isolates how far the trajectory
    is from solving the grid equation rather than differentiation error.
    """
    if len(snapshots) not in (3, 5):
        raise InvalidParameterError("need 3 or 5 uniformly spaced snapshots")
    times = np.asarray([t for t, _ in snapshots], dtype=float)
    states = [s for _, s in snapshots]
    grid = states[0].grid
    if any(s.grid != grid for s in states):
        raise GridMismatchError("residual needs all states on one grid")
    if np.asarray(field).shape != grid.shape:
        raise GridMismatchError("field shape does not match the grid")
    steps = np.diff(times)
    h = steps[0]
    if h <= 0 or np.any(np.abs(steps - h) > 1e-9 * max(h, 1e-30)):
        raise InvalidParameterError("snapshots must be uniformly spaced in time")

    coeffs = [as_fourier(s).amplitudes for s in states]
    center = len(snapshots) // 2
    if len(snapshots) == 3:
        d_dt = (coeffs[2] - coeffs[0]) / (2.0 * h)
    else:
        d_dt = (-coeffs[4] + 8.0 * coeffs[3] - 8.0 * coeffs[1] + coeffs[0]) / (12.0 * h)

    t_c = times[center]
    a_c = float(schedule.a_at(t_c))
    b_c = float(schedule.b_at(t_c))
    c_c = coeffs[center]
    # i d/dt - H with H = -a*Lap + V: +a*Lap is the multiplier -a*(2*pi*n)^2
    lap = -_momentum_sq(states[center]) * c_c
    v_psi = b_c * np.asarray(field) * as_position(states[center]).amplitudes
    v_coeff = as_fourier(WaveState(grid, v_psi, "position", normalized=False)).amplitudes
    resid = 1j * d_dt + a_c * lap - v_coeff
    return float(np.linalg.norm(resid.ravel()))


class EnergyRecorder:
    """Recorder building an EnergyReport from evolve checkpoints.

    Each record point stores (t, norm, <f>-f*, E_t, leakage, Fourier tail
    mass); the report adds the E_0/omega_t^2 envelope.
    """

    def __init__(self, schedule, field, x_star, f_star, delta: float = 0.1):
        if not 0.0 < delta < 0.5:
            raise InvalidParameterError(f"margin must lie in (0, 1/2), got {delta}")
        self.schedule = schedule
        self.field = np.asarray(field)
        self.x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
        self.f_star = float(f_star)
        self.delta = float(delta)
        self.rows: list[tuple[float, float, float, float, float, float]] = []

    def record(self, t: float, state: WaveState) -> None:
        e_t = lyapunov_energy(state, self.schedule, t, self.x_star, self.field, self.f_star)
        f_m = expected_f(state, self.field, self.f_star)
        leak = leakage(state, self.delta)
        half = max(1, state.grid.N // 2)
        _, tail = project_PM(state, half)
        self.rows.append((float(t), state.norm(), f_m, e_t, leak, float(tail**2)))

    def report(self) -> EnergyReport:
        if not self.rows:
            raise InvalidParameterError("nothing recorded")
        arr = np.asarray(self.rows, dtype=float)
        times, norms, f_mean, e_t, leak, tail = arr.T
        omega = np.asarray(self.schedule.omega_at(times), dtype=float)
        bound = e_t[0] / omega**2
        return EnergyReport(times=times, E_t=e_t, f_mean=f_mean, norm=norms,
                            leakage=leak, bound=bound, tail_mass=tail)
