"""Split-step integrator: phase primitives, convergence order, adaptivity, reversal."""

import math

import numpy as np
import pytest

from qhdsim.errors import (
    GridMismatchError,
    InvalidParameterError,
    StepBudgetError,
)
from qhdsim.grid import (
    POSITION,
    WaveState,
    as_position,
    dft_forward,
    make_grid,
    mode_state,
    state_from_samples,
    uniform_state,
)
from qhdsim.potentials import axis_fields, grid_potential, make_potential, restrict
from qhdsim.propagate import (
    EvolveConfig,
    evolve,
    kinetic_phase,
    potential_phase,
    strang_step,
)
from qhdsim.schedules import custom, exponential


def harmonic_setup(N=64):
    grid = make_grid(1, N, [0.0], 0.5)
    spec = restrict(make_potential("quadratic", 1), [0.0], 0.5)
    field = grid_potential(spec, grid, "exact")
    return grid, field


def test_kinetic_phase_identity():
    g = make_grid(1, 4, [0.0], 0.5)
    s = mode_state(g, [1])
    out = kinetic_phase(s, 0.0)
    np.testing.assert_allclose(out.amplitudes, s.amplitudes, atol=1e-15)


def test_kinetic_phase_single_mode_eigenstate():
    g = make_grid(1, 4, [0.0], 0.5)
    s = mode_state(g, [1])
    theta = 0.37
    out = kinetic_phase(s, theta)
    expected = s.amplitudes * np.exp(-1j * 4 * np.pi**2 * theta)
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-14)
    assert out.norm() == pytest.approx(1.0, abs=1e-14)


def test_kinetic_phase_multi_axis():
    g = make_grid(2, 4, [0.0, 0.0], 0.5)
    s = mode_state(g, [1, -2])
    out = kinetic_phase(s, 0.1)
    expected = s.amplitudes * np.exp(-1j * (2 * np.pi) ** 2 * (1 + 4) * 0.1)
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-13)


def test_potential_phase_constant_is_global():
    g = make_grid(1, 4, [0.0], 0.5)
    rng = np.random.default_rng(1)
    amp = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    amp /= np.linalg.norm(amp)
    s = WaveState(g, amp, POSITION)
    out = potential_phase(s, 0.8, np.full(g.shape, 3.0))
    np.testing.assert_allclose(out.amplitudes, amp * np.exp(-1j * 2.4), atol=1e-14)
    assert out.norm() == pytest.approx(1.0, abs=1e-14)


def test_potential_phase_grid_mismatch():
    g = make_grid(1, 4, [0.0], 0.5)
    with pytest.raises(GridMismatchError):
        potential_phase(uniform_state(g), 1.0, np.zeros(4))


def test_potential_phase_pointwise():
    grid, field = harmonic_setup(8)
    s = uniform_state(grid)
    beta = 1.3
    out = potential_phase(s, beta, field)
    np.testing.assert_allclose(out.amplitudes, s.amplitudes * np.exp(-1j * beta * field), atol=1e-14)


def test_strang_free_evolution_exact():
    # zero potential: splitting is exact for any dt
    g = make_grid(1, 8, [0.0], 0.5)
    s = mode_state(g, [1])
    sched = exponential(1.0)
    out = strang_step(s, 0.0, 0.7, sched, np.zeros(g.shape))
    expected = s.amplitudes * np.exp(-1j * 4 * np.pi**2 * sched.int_a(0.0, 0.7))
    np.testing.assert_allclose(out.amplitudes, expected, atol=1e-13)


def wrapped_gaussian(x, s):
    # exactly periodic, so no boundary kink feeds the high modes
    return sum(np.exp(-((x + k) ** 2) / (2 * s * s)) for k in (-2, -1, 0, 1, 2))


def test_strang_order_two():
    # endpoint error vs a fine reference drops ~4x per dt halving; step counts
    # are large enough that per-step error phases average out
    grid, field = harmonic_setup(16)
    sched = exponential(1.0)
    x = grid.unit_points()[..., 0]
    start = state_from_samples(grid, wrapped_gaussian(x, 0.1))

    def run(steps):
        s = start
        dt = 1.0 / steps
        for i in range(steps):
            s = strang_step(s, i * dt, dt, sched, field)
        return s.amplitudes

    ref = run(32768)
    errs = [np.linalg.norm(run(n) - ref) for n in (1024, 2048, 4096)]
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(3.3 <= r <= 4.7 for r in ratios), ratios


def test_evolve_free_particle_analytic():
    g = make_grid(1, 8, [0.0], 0.5)
    s = mode_state(g, [1])
    sched = exponential(1.0)
    cfg = EvolveConfig(dt_initial=0.05, tol_step=1e-9, record_every=10)
    res = evolve(s, sched, 0.0, 1.0, cfg, np.zeros(g.shape))
    expected = s.amplitudes * np.exp(-1j * 4 * np.pi**2 * sched.int_a(0.0, 1.0))
    np.testing.assert_allclose(res.state.amplitudes, expected, atol=1e-12)
    assert res.norm_drift < 1e-10


def test_evolve_zero_span_rejected():
    g = make_grid(1, 4, [0.0], 0.5)
    with pytest.raises(InvalidParameterError):
        evolve(uniform_state(g), exponential(1.0), 1.0, 1.0, EvolveConfig(), np.zeros(g.shape))


def test_evolve_self_convergence():
    grid, field = harmonic_setup(64)
    x = grid.unit_points()[..., 0]
    start = state_from_samples(grid, wrapped_gaussian(x, 0.12))
    sched = exponential(1.0)
    loose = evolve(start, sched, 0.0, 0.3, EvolveConfig(dt_initial=0.01, tol_step=1e-4), field)
    tight = evolve(start, sched, 0.0, 0.3, EvolveConfig(dt_initial=0.01, tol_step=1e-6), field)
    assert np.linalg.norm(loose.state.amplitudes - tight.state.amplitudes) < 2e-3
    assert loose.steps_accepted < tight.steps_accepted


def test_evolve_unitarity_budget():
    grid, field = harmonic_setup(64)
    x = grid.unit_points()[..., 0]
    start = state_from_samples(grid, np.exp(-((x / 0.12) ** 2)))
    res = evolve(start, exponential(1.0), 0.0, 0.3, EvolveConfig(dt_initial=0.01, tol_step=1e-5), field)
    assert res.norm_drift < 1e-10
    assert np.all(np.abs(res.norms - 1.0) < 1e-10)


def test_evolve_time_reversal():
    # H is real symmetric, so conjugation plus the time-reversed schedule inverts the flow
    grid, field = harmonic_setup(64)
    x = grid.unit_points()[..., 0]
    start = state_from_samples(grid, np.exp(-((x / 0.12) ** 2)))
    T = 0.25
    tol = 1e-5
    cfg = EvolveConfig(dt_initial=0.005, tol_step=tol)
    fwd = evolve(start, exponential(1.0), 0.0, T, cfg, field)
    rev_sched = custom(
        lambda t: np.ones_like(np.asarray(t, float)),
        lambda t: np.exp(T - np.asarray(t, float)),
        lambda t: np.exp(0.5 * (T - np.asarray(t, float))),
    )
    flipped = WaveState(grid, np.conj(fwd.state.amplitudes), POSITION, normalized=False)
    back = evolve(flipped, rev_sched, 0.0, T, cfg, field)
    recovered = np.conj(back.state.amplitudes)
    assert np.linalg.norm(recovered - start.amplitudes) < 10 * tol * T


def test_evolve_step_budget_error_carries_partial():
    grid, field = harmonic_setup(32)
    x = grid.unit_points()[..., 0]
    start = state_from_samples(grid, np.exp(-((x / 0.12) ** 2)))
    cfg = EvolveConfig(dt_initial=1e-4, tol_step=1e-12, max_steps=5)
    with pytest.raises(StepBudgetError) as exc:
        evolve(start, exponential(1.0), 0.0, 2.0, cfg, field)
    partial = exc.value.partial
    assert partial is not None
    assert partial.times[-1] < 2.0
    assert partial.state.amplitudes.shape == grid.shape


def test_evolve_estimate_interval_consistent():
    grid, field = harmonic_setup(64)
    x = grid.unit_points()[..., 0]
    start = state_from_samples(grid, np.exp(-((x / 0.12) ** 2)))
    dense = evolve(start, exponential(1.0), 0.0, 0.4,
                   EvolveConfig(dt_initial=0.01, tol_step=1e-5), field)
    sparse = evolve(start, exponential(1.0), 0.0, 0.4,
                    EvolveConfig(dt_initial=0.01, tol_step=1e-5, estimate_interval=4), field)
    assert np.linalg.norm(dense.state.amplitudes - sparse.state.amplitudes) < 1e-3


def test_evolve_axis_fields_match_full():
    grid = make_grid(2, 16, [0.1, -0.2], 0.5)
    spec = restrict(make_potential("quadratic", 2), [0.1, -0.2], 0.5)
    unit_grid = make_grid(2, 16, [0.0, 0.0], 0.5)
    field = grid_potential(spec, unit_grid, "exact")
    ax = axis_fields(spec, unit_grid)
    xs = unit_grid.unit_points()
    start = state_from_samples(unit_grid, np.exp(-np.sum((xs / 0.15) ** 2, axis=-1)))
    cfg = EvolveConfig(dt_initial=0.02, tol_step=1e-5)
    res_full = evolve(start, exponential(1.0), 0.0, 0.2, cfg, field)
    res_axes = evolve(start, exponential(1.0), 0.0, 0.2, cfg, field, axis_fields=ax)
    np.testing.assert_allclose(res_axes.state.amplitudes, res_full.state.amplitudes, atol=1e-11)


def test_evolve_axis_fields_validated():
    grid = make_grid(2, 8, [0.0, 0.0], 0.5)
    spec = restrict(make_potential("quadratic", 2), [0.0, 0.0], 0.5)
    field = grid_potential(spec, grid, "exact")
    bad = [np.zeros(16), np.ones(16)]
    start = uniform_state(grid)
    with pytest.raises(GridMismatchError):
        evolve(start, exponential(1.0), 0.0, 0.5, EvolveConfig(), field, axis_fields=bad)


def test_recorder_called_at_cadence():
    grid, field = harmonic_setup(32)
    x = grid.unit_points()[..., 0]
    start = state_from_samples(grid, np.exp(-((x / 0.12) ** 2)))

    class Probe:
        def __init__(self):
            self.ts = []

        def record(self, t, state):
            self.ts.append(t)
            assert abs(state.norm() - 1.0) < 1e-9

    probe = Probe()
    evolve(start, exponential(1.0), 0.0, 0.4,
           EvolveConfig(dt_initial=0.01, tol_step=1e-6, record_every=5), field, recorder=probe)
    assert probe.ts[0] == 0.0
    assert probe.ts[-1] == pytest.approx(0.4, abs=1e-12)
    assert len(probe.ts) >= 4


def test_mode_occupation_preserved_free_case():
    # kinetic-only evolution cannot move mass between modes
    g = make_grid(1, 16, [0.0], 0.5)
    rng = np.random.default_rng(8)
    amp = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    amp /= np.linalg.norm(amp)
    s = WaveState(g, amp, POSITION)
    res = evolve(s, exponential(1.0), 0.0, 1.5, EvolveConfig(dt_initial=0.1, tol_step=1e-9), np.zeros(g.shape))
    before = np.abs(dft_forward(s).amplitudes)
    after = np.abs(dft_forward(as_position(res.state)).amplitudes)
    np.testing.assert_allclose(after, before, atol=1e-12)
