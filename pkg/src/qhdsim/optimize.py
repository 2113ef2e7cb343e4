"""Zeroth-order convex minimization by simulated descent dynamics.

The pipeline: pick schedule initials from the problem data (Lipschitz
constant, distance and value bounds), prepare a Gaussian packet at the
prior point, evolve it on a periodic box four times the distance bound,
measure in the position basis, and keep the best repeat.  All oracle
traffic flows through the potentials module so query counts stay honest.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .diagnostics import EnergyRecorder, EnergyReport, select_N
from .errors import (
    GeometryError,
    InvalidParameterError,
    UnsupportedScheduleError,
)
from .grid import (
    GridSpec,
    WaveState,
    as_position,
    make_grid,
    sobolev_seminorm,
    state_from_samples,
)
from .potentials import (
    PotentialSpec,
    QueryLedger,
    axis_fields,
    eval_binary,
    eval_exact,
    eval_stochastic,
    grid_potential,
)
from .propagate import EvolveConfig, evolve
from .schedules import Schedule, exponential, polynomial, stopping_time

__all__ = [
    "QHDParams",
    "OptimizeConfig",
    "RunRecord",
    "OptimizeReport",
    "choose_params",
    "initial_gaussian",
    "lyapunov_initial_bound",
    "simulation_schedule",
    "optimize",
    "measure_sample",
    "markov_success_check",
    "amplify",
]


@dataclass(frozen=True)
class QHDParams:
    """Schedule initials and geometry bounds for one optimization problem."""

    m0: float
    omega0: float
    lam: float
    sigma: float
    R: float
    R_inf: float
    Lambda: float
    Lambda_inf: float
    eps: float
    box_radius: float

    def __post_init__(self):
        for name in ("m0", "omega0", "lam", "sigma", "R", "R_inf",
                     "Lambda", "Lambda_inf", "eps", "box_radius"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be positive")
        if abs(self.box_radius - 4.0 * self.R_inf) > 1e-12 * self.R_inf:
            raise InvalidParameterError("box_radius must equal 4 * R_inf")


def choose_params(G: float, R: float, Lambda: float, Lambda_inf: float,
                  d: int, eps: float) -> QHDParams:
    """Schedule initials from the problem data.

    omega0 is pinned to 1; the mass balances the kinetic term against the
    value bound, the coupling against the distance bound, and the packet
    width spreads the d-dimensional variance budget R^2 evenly.
    """
    for name, v in (("G", G), ("R", R), ("Lambda", Lambda),
                    ("Lambda_inf", Lambda_inf), ("eps", eps)):
        if not v > 0:
            raise InvalidParameterError(f"{name} must be positive")
    if d < 1:
        raise InvalidParameterError("dimension must be at least 1")
    m0 = math.sqrt(d / (G * R + Lambda)) / R
    lam = (Lambda + G * R) ** 1.5 / (G * R**2)
    sigma = R / math.sqrt(d)
    return QHDParams(m0=m0, omega0=1.0, lam=lam, sigma=sigma, R=R, R_inf=R,
                     Lambda=Lambda, Lambda_inf=Lambda_inf, eps=eps,
                     box_radius=4.0 * R)


def initial_gaussian(grid: GridSpec, x0, sigma: float, rng=None,
                     mass_tol: float = 1e-6):
    """Discretized symmetric Gaussian exp(-|x - x0|^2 / 4 sigma^2), renormalized.

    Returns (state, truncated_mass) where the mass outside the box is
    computed analytically before sampling.  ``rng`` is accepted for
    interface stability; the construction is deterministic.
    """
    if sigma <= 0:
        raise InvalidParameterError("sigma must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (grid.d,):
        raise InvalidParameterError(f"x0 must have length {grid.d}")

    inside = 1.0
    for i in range(grid.d):
        lo = grid.center[i] - grid.radius - x0[i]
        hi = grid.center[i] + grid.radius - x0[i]
        inside *= 0.5 * (math.erf(hi / (sigma * math.sqrt(2.0)))
                         - math.erf(lo / (sigma * math.sqrt(2.0))))
    truncated = 1.0 - inside
    if truncated >= mass_tol:
        raise GeometryError(
            f"Gaussian mass {truncated:.3e} outside the box exceeds {mass_tol:.1e}; "
            "box too small for sigma"
        )

    dx = grid.physical_points() - x0
    vals = np.exp(-np.sum(dx * dx, axis=-1) / (4.0 * sigma**2))
    return state_from_samples(grid, vals), truncated


def lyapunov_initial_bound(params: QHDParams, G: float, Lambda: float, d: int) -> float:
    """Closed-form cap on the descent functional at t = 0 for the Gaussian start."""
    kinetic = d / (2.0 * params.m0 * params.sigma) ** 2
    coupling = 2.0 * params.lam**2 * (d * params.sigma**2 + params.R**2)
    value = params.omega0**2 * (G * params.R + Lambda)
    return kinetic + coupling + value


def simulation_schedule(params: QHDParams, kind: str = "polynomial", *,
                        k: float = 1.0, c: float = 1.0, t0: float = 1.0) -> Schedule:
    """Schedule in the simulation frame of the unit box.

    Two absorptions fold into the constructor arguments: the coupling lam
    rescales time (rate lam*k or lam*c, mass lam*m0, frequency omega0/lam),
    and the affine box map u = (x - x0)/(2*box_radius) rescales the kinetic
    term (mass gains (2*box_radius)^2, frequency loses 2*box_radius, so the
    potential weight b is unchanged).  Frequency ratios, and with them the
    stopping rule, are invariant under both.
    """
    width = 2.0 * params.box_radius
    m0 = params.lam * params.m0 * width**2
    omega0 = params.omega0 / (params.lam * width)
    if kind == "polynomial":
        return polynomial(params.lam * k, t0, m0=m0, omega0=omega0)
    if kind == "exponential":
        return exponential(params.lam * c, m0=m0, omega0=omega0)
    raise UnsupportedScheduleError(f"unknown schedule family {kind!r}")


def measure_sample(state: WaveState, rng: np.random.Generator):
    """Position-basis measurement: grid index and its physical point."""
    pos = as_position(state)
    prob = np.abs(pos.amplitudes.ravel()) ** 2
    total = float(prob.sum())
    if abs(total - 1.0) > 1e-6:
        raise InvalidParameterError(f"state norm {math.sqrt(total):.6f} is not 1")
    flat = int(np.searchsorted(np.cumsum(prob), total * rng.random(), side="right"))
    flat = min(flat, prob.size - 1)
    idx = np.unravel_index(flat, state.grid.shape)
    point = state.grid.physical_points()[idx]
    return tuple(int(i) for i in idx), np.asarray(point, dtype=float)


def markov_success_check(mean_excess: float, eps: float) -> float:
    """Lower bound P[f - f* < eps] >= (eps - E[f - f*]) / eps, floored at 0."""
    if mean_excess < 0:
        raise InvalidParameterError("mean excess must be nonnegative")
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    return max(0.0, (eps - mean_excess) / eps)


def amplify(repeats: int, per_run_success: float = 2.0 / 3.0) -> float:
    """Failure bound for best-of-K repeats at per-run success >= 2/3."""
    if repeats < 1:
        raise InvalidParameterError("need at least one repeat")
    if per_run_success < 2.0 / 3.0 or per_run_success > 1.0:
        raise InvalidParameterError("per-run success must lie in [2/3, 1]")
    if per_run_success == 2.0 / 3.0:
        return 3.0 ** (-repeats)
    return (1.0 - per_run_success) ** repeats


@dataclass(frozen=True)
class OptimizeConfig:
    """Knobs for one optimize call; defaults follow the desk-scale profile."""

    noise_mode: str = "exact"            # exact | binary | stochastic
    eps_f: Optional[float] = None        # binary oracle granularity
    noise_sigma: Optional[float] = None  # stochastic oracle spread
    grid_n: Optional[int] = None         # pin the half grid size directly
    grid_cap: int = 2**24                # max complex values on the grid
    schedule_kind: str = "polynomial"
    schedule_k: float = 1.0
    schedule_c: float = 1.0
    t0: float = 1.0
    stopping: str = "ratio"              # ratio | lyapunov_bound
    init_sigma: Optional[float] = None
    lambda_bound: Optional[float] = None
    lambda_inf_bound: Optional[float] = None
    # the paper's own d=1 defaults put ~6e-5 outside the box (see ledger)
    mass_tol: float = 1e-4
    tol_step: float = 1e-3
    dt_initial: float = 1e-3
    max_steps: int = 2_000_000
    record_every: int = 200
    estimate_interval: int = 1
    max_workers: Optional[int] = None
    keep_energy: bool = True


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one evolve + measure repeat."""

    index: int
    sample_index: tuple
    candidate: tuple
    f_noisy: float
    f_exact: float
    steps_accepted: int
    norm_drift: float


@dataclass(frozen=True)
class OptimizeReport:
    candidate: tuple
    f_candidate: float
    f_exact: float
    success: Optional[bool]
    runs: tuple
    ledger: dict
    energy: Optional[EnergyReport]
    params: QHDParams
    x0: tuple
    grid_n: int
    grid_rule_n: Optional[int]
    cap_bound: bool
    horizon: float
    horizon_lyapunov: float
    stopping_used: str
    sigma_used: float
    schedule_kind: str

    def __post_init__(self):
        off = np.abs(np.asarray(self.candidate) - np.asarray(self.x0))
        if np.any(off > self.params.box_radius * (1 + 1e-12)):
            raise InvalidParameterError("candidate left the simulation box")


def _grid_cap_n(cap: int, d: int) -> int:
    # largest power-of-two N with (2N)^d <= cap
    per_axis = cap ** (1.0 / d) / 2.0
    if per_axis < 1.0:
        raise InvalidParameterError("grid cap too small for this dimension")
    return 2 ** int(math.floor(math.log2(per_axis) + 1e-12))


def _noisy_value(spec: PotentialSpec, point, config: OptimizeConfig,
                 ledger: QueryLedger, seed: int, rng: np.random.Generator) -> float:
    if config.noise_mode == "exact":
        return eval_exact(spec, point, ledger)
    if config.noise_mode == "binary":
        return eval_binary(spec, point, config.eps_f, ledger, seed=seed)
    return eval_stochastic(spec, point, config.noise_sigma, rng, ledger)


def optimize(potential: PotentialSpec, x0, R: float, eps: float, repeats: int,
             config: Optional[OptimizeConfig] = None,
             rng: Optional[np.random.Generator] = None) -> OptimizeReport:
    """Run the full descent pipeline and keep the best of ``repeats`` samples.

    Value and sup bounds default to the Lipschitz reductions Lambda = G*R and
    Lambda_inf = G*R*sqrt(d); pass tighter ones through the config.  Repeats
    run concurrently on private rng streams and merge by index, so reports
    are deterministic for a fixed seed.
    """
    config = config or OptimizeConfig()
    rng = np.random.default_rng() if rng is None else rng
    if eps <= 0:
        raise InvalidParameterError("eps must be positive")
    if repeats < 1:
        raise InvalidParameterError("need at least one repeat")
    if config.noise_mode not in ("exact", "binary", "stochastic"):
        raise InvalidParameterError(f"unknown noise mode {config.noise_mode!r}")
    if config.noise_mode == "binary" and (config.eps_f is None or config.eps_f <= 0):
        raise InvalidParameterError("binary noise needs eps_f > 0")
    if config.noise_mode == "stochastic" and (config.noise_sigma is None
                                              or config.noise_sigma < 0):
        raise InvalidParameterError("stochastic noise needs noise_sigma >= 0")

    d = potential.d
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (d,):
        raise InvalidParameterError(f"x0 must have length {d}")
    G = potential.G
    Lam = config.lambda_bound if config.lambda_bound is not None else G * R
    Lam_inf = (config.lambda_inf_bound if config.lambda_inf_bound is not None
               else G * R * math.sqrt(d))
    params = choose_params(G, R, Lam, Lam_inf, d, eps)
    sigma = config.init_sigma if config.init_sigma is not None else params.sigma

    sch = simulation_schedule(params, config.schedule_kind,
                              k=config.schedule_k, c=config.schedule_c, t0=config.t0)
    e0_bound = lyapunov_initial_bound(params, G, Lam, d)
    absorb_sq = (params.lam * 2.0 * params.box_radius) ** 2
    horizon_ratio = stopping_time(sch, eps, sch.omega0**2)
    horizon_lyap = stopping_time(sch, eps, e0_bound / absorb_sq)
    if config.stopping == "ratio":
        horizon = horizon_ratio
    elif config.stopping == "lyapunov_bound":
        horizon = horizon_lyap
    else:
        raise InvalidParameterError(f"unknown stopping rule {config.stopping!r}")

    cap_n = _grid_cap_n(config.grid_cap, d)
    rule_n: Optional[int] = None
    if config.grid_n is not None:
        if config.grid_n < 1:
            raise InvalidParameterError("grid_n must be at least 1")
        N = int(config.grid_n)
        cap_bound = False
    else:
        probe = make_grid(d, 16, x0, params.box_radius)
        probe_state, _ = initial_gaussian(probe, x0, sigma, mass_tol=config.mass_tol)
        rule_n = select_N(
            sch.int_a(sch.t_start, horizon), sch.int_b(sch.t_start, horizon),
            G, params.box_radius, d, eps,
            sobolev_seminorm(probe_state, d), sobolev_seminorm(probe_state, 3),
        )
        cap_bound = rule_n > cap_n
        N = min(rule_n, cap_n)

    grid = make_grid(d, N, x0, params.box_radius)
    start, _ = initial_gaussian(grid, x0, sigma, mass_tol=config.mass_tol)
    ledger = QueryLedger()
    evolve_cfg = EvolveConfig(
        dt_initial=config.dt_initial, tol_step=config.tol_step,
        max_steps=config.max_steps, record_every=config.record_every,
        estimate_interval=config.estimate_interval,
    )
    per_axis = (axis_fields(potential, grid)
                if potential.separable and config.noise_mode == "exact" and d > 1
                else None)

    # reference point for the recorded energy series
    x_ref = np.asarray(potential.x_star, dtype=float) if potential.x_star is not None else x0
    if np.any(np.abs(x_ref - x0) >= params.box_radius):
        x_ref = x0
    f_ref = potential.f_star if potential.f_star is not None else 0.0

    seeds = rng.integers(0, 2**62, size=repeats)
    streams = rng.spawn(repeats)

    # exact-mode repeats share one field; fetch it before the pool so the
    # sweep is charged exactly once (noisy modes get per-seed fields)
    shared_field = None
    if config.noise_mode == "exact":
        shared_field = grid_potential(potential, grid, "exact", seed=0, ledger=ledger)

    def one_repeat(i: int):
        seed = int(seeds[i])
        if shared_field is not None:
            field = shared_field
        else:
            field = grid_potential(potential, grid, config.noise_mode,
                                   eps_f=config.eps_f, sigma=config.noise_sigma,
                                   seed=seed, ledger=ledger)
        recorder = None
        if i == 0 and config.keep_energy:
            recorder = EnergyRecorder(sch, field, x_ref, f_ref)
        result = evolve(start, sch, sch.t_start, horizon, evolve_cfg, field,
                        recorder=recorder,
                        axis_fields=per_axis)
        idx, point = measure_sample(result.state, streams[i])
        f_noisy = _noisy_value(potential, point, config, ledger, seed, streams[i])
        f_true = float(potential(point))
        rec = RunRecord(index=i, sample_index=idx,
                        candidate=tuple(float(c) for c in point),
                        f_noisy=f_noisy, f_exact=f_true,
                        steps_accepted=result.steps_accepted,
                        norm_drift=result.norm_drift)
        return rec, (recorder.report() if recorder else None)

    energy: Optional[EnergyReport] = None
    runs: list[RunRecord] = [None] * repeats  # type: ignore[list-item]
    if repeats == 1:
        runs[0], energy = one_repeat(0)
    else:
        workers = config.max_workers or min(repeats, os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for rec, rep in pool.map(one_repeat, range(repeats)):
                runs[rec.index] = rec
                if rep is not None:
                    energy = rep

    best = min(runs, key=lambda r: (r.f_noisy, r.index))
    success = None
    if potential.f_star is not None:
        success = bool(best.f_exact - potential.f_star <= eps)

    return OptimizeReport(
        candidate=best.candidate, f_candidate=best.f_noisy, f_exact=best.f_exact,
        success=success, runs=tuple(runs), ledger=ledger.snapshot(), energy=energy,
        params=params, x0=tuple(float(v) for v in x0), grid_n=N, grid_rule_n=rule_n,
        cap_bound=cap_bound, horizon=horizon, horizon_lyapunov=horizon_lyap,
        stopping_used=config.stopping, sigma_used=sigma,
        schedule_kind=config.schedule_kind,
    )
