"""Uniform grid on the unit box S = [-1/2, 1/2)^d with unitary discrete Fourier transforms.

Grid points are x_j = j/(2N) for j in {-N, ..., N-1} per axis, stored in
standard radix (FFT) order along every axis.  Physical coordinates are
reached through the affine map x_phys = 2R*x + x0.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from .errors import (
    DomainError,
    GridMismatchError,
    InvalidParameterError,
    RepresentationError,
)

POSITION = "position"
FOURIER = "fourier"


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the discretization.

    Attributes:
        d: spatial dimension.
        N: half grid size per axis; the axis holds 2N points.
        center: physical center x0 (length d).
        radius: physical half-width R of the box being mapped onto S.
    """

    d: int
    N: int
    center: tuple[float, ...]
    radius: float

    @property
    def points_per_axis(self) -> int:
        return 2 * self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (2 * self.N,) * self.d

    @property
    def size(self) -> int:
        return (2 * self.N) ** self.d

    def axis_coords(self) -> np.ndarray:
        """Unit-box coordinates j/(2N) of one axis, FFT index order."""
        return np.fft.fftfreq(2 * self.N)

    def axis_modes(self) -> np.ndarray:
        """Integer Fourier modes n of one axis, FFT index order."""
        return np.rint(np.fft.fftfreq(2 * self.N) * 2 * self.N).astype(int)

    def unit_points(self) -> np.ndarray:
        """All grid points in unit-box coordinates, shape (*shape, d)."""
        axes = np.meshgrid(*([self.axis_coords()] * self.d), indexing="ij")
        return np.stack(axes, axis=-1)

    def physical_points(self) -> np.ndarray:
        """Grid points mapped to physical coordinates, shape (*shape, d)."""
        x0 = np.asarray(self.center, dtype=float)
        return 2.0 * self.radius * self.unit_points() + x0

    def to_physical(self, x_unit: np.ndarray) -> np.ndarray:
        return 2.0 * self.radius * np.asarray(x_unit, dtype=float) + np.asarray(self.center)


def make_grid(d: int, N: int, x0, R: float) -> GridSpec:
    """Builds a GridSpec, validating the geometry parameters."""
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise InvalidParameterError(f"dimension must be a positive integer, got {d}")
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise InvalidParameterError(f"half grid size must be a positive integer, got {N}")
    if not R > 0:
        raise InvalidParameterError(f"radius must be positive, got {R}")
    x0 = tuple(float(v) for v in np.atleast_1d(x0))
    if len(x0) != d:
        raise InvalidParameterError(f"center has length {len(x0)}, expected {d}")
    return GridSpec(d=int(d), N=int(N), center=x0, radius=float(R))


@dataclass(frozen=True)
class WaveState:
    """Discrete wavefunction on a grid.

    Amplitudes are unit-norm: in position representation entry j holds
    Psi(x_j)/sqrt((2N)^d); in fourier representation entry n holds the
    unitary-DFT coefficient.  Instances are immutable; operations return
    new states.
    """

    grid: GridSpec
    amplitudes: np.ndarray
    representation: str = POSITION
    normalized: bool = True

    def __post_init__(self):
        amp = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amp.shape != self.grid.shape:
            raise InvalidParameterError(
                f"amplitude shape {amp.shape} does not match grid shape {self.grid.shape}"
            )
        if self.representation not in (POSITION, FOURIER):
            raise InvalidParameterError(f"unknown representation {self.representation!r}")
        amp.flags.writeable = False
        object.__setattr__(self, "amplitudes", amp)
        if self.normalized:
            n = np.linalg.norm(amp.ravel())
            if abs(n - 1.0) > 1e-10:
                raise InvalidParameterError(f"state marked normalized but has norm {n!r}")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes.ravel()))

    def samples(self) -> np.ndarray:
        """Raw function samples Psi(x_j) (position representation only)."""
        if self.representation != POSITION:
            raise RepresentationError("samples are defined on position-representation states")
        return self.amplitudes * np.sqrt(self.grid.size)


def state_from_samples(grid: GridSpec, values: np.ndarray, normalize: bool = True) -> WaveState:
    """Wraps raw samples Psi(x_j) (FFT axis order) as a WaveState."""
    values = np.asarray(values, dtype=np.complex128)
    amp = values / np.sqrt(grid.size)
    if normalize:
        n = np.linalg.norm(amp.ravel())
        if n == 0:
            raise InvalidParameterError("cannot normalize the zero state")
        amp = amp / n
    return WaveState(grid, amp, POSITION, normalized=normalize)


def uniform_state(grid: GridSpec) -> WaveState:
    """The flat state: every grid point with equal real amplitude."""
    amp = np.full(grid.shape, 1.0 / np.sqrt(grid.size), dtype=np.complex128)
    return WaveState(grid, amp, POSITION)


def mode_state(grid: GridSpec, n) -> WaveState:
    """Unit-norm samples of the plane wave chi_n(x) = exp(2*pi*i n.x)."""
    n = np.atleast_1d(np.asarray(n, dtype=int))
    if n.shape != (grid.d,):
        raise InvalidParameterError(f"mode vector must have length {grid.d}")
    phase = grid.unit_points() @ n.astype(float)
    return state_from_samples(grid, np.exp(2j * np.pi * phase))


def dft_forward(state: WaveState) -> WaveState:
    """Position -> Fourier, unitary, paper index convention (modes in Ncal)."""
    if state.representation != POSITION:
        raise RepresentationError("dft_forward expects a position-representation state")
    coeff = scipy.fft.fftn(state.amplitudes, norm="ortho")
    return replace(state, amplitudes=coeff, representation=FOURIER)


def dft_inverse(state: WaveState) -> WaveState:
    """Fourier -> position, unitary inverse of dft_forward."""
    if state.representation != FOURIER:
        raise RepresentationError("dft_inverse expects a fourier-representation state")
    vals = scipy.fft.ifftn(state.amplitudes, norm="ortho")
    return replace(state, amplitudes=vals, representation=POSITION)


def as_fourier(state: WaveState) -> WaveState:
    return state if state.representation == FOURIER else dft_forward(state)


def as_position(state: WaveState) -> WaveState:
    return state if state.representation == POSITION else dft_inverse(state)


def discrete_inner(phi, psi) -> complex:
    """Discrete inner product <phi, psi>_Gamma = (2N)^-d sum conj(phi(x_j)) psi(x_j).

    Accepts WaveStates (position or fourier; fourier inputs are transformed)
    or raw sample arrays in FFT axis order.
    """
    if isinstance(phi, WaveState) and isinstance(psi, WaveState):
        if phi.grid != psi.grid:
            raise GridMismatchError("inner product requires a common grid")
        a = as_position(phi).amplitudes
        b = as_position(psi).amplitudes
        # amplitudes already carry the 1/sqrt((2N)^d) weight on each side
        return complex(np.vdot(a, b))
    a = np.asarray(phi, dtype=np.complex128)
    b = np.asarray(psi, dtype=np.complex128)
    if a.shape != b.shape:
        raise GridMismatchError("sampled functions must share a shape")
    return complex(np.vdot(a, b) / a.size)


def interpolant_eval(state: WaveState, x) -> complex:
    """Evaluates the Fourier interpolant of the state at a unit-box point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (state.grid.d,):
        raise InvalidParameterError(f"point must have length {state.grid.d}")
    if np.any(x < -0.5) or np.any(x >= 0.5):
        raise DomainError(f"point {x} outside [-1/2, 1/2)^d")
    coeff = as_fourier(state).amplitudes
    modes = state.grid.axis_modes().astype(float)
    out = coeff
    for axis in range(state.grid.d):
        wave = np.exp(2j * np.pi * modes * x[axis])
        out = np.tensordot(out, wave, axes=([0], [0]))
    return complex(out)


def sobolev_seminorm(state: WaveState, k: int) -> float:
    """Seminorm sqrt(sum (2*pi*|n|_2)^(2k) |coeff_n|^2)."""
    if k < 0 or int(k) != k:
        raise InvalidParameterError("order k must be a nonnegative integer")
    coeff = as_fourier(state).amplitudes
    w = _mode_norm_sq(state.grid.d, state.grid.N)
    return float(np.sqrt(np.sum(((2 * np.pi) ** 2 * w) ** k * np.abs(coeff) ** 2)))


def project_PM(state: WaveState, M: int) -> tuple[WaveState, float]:
    """Projects onto the band {-M, ..., M-1}^d; returns (state, removed tail norm)."""
    if M > state.grid.N:
        raise InvalidParameterError(f"target half size {M} exceeds grid half size {state.grid.N}")
    if M < 1:
        raise InvalidParameterError("target half size must be at least 1")
    four = as_fourier(state)
    keep = _band_mask(state.grid.d, state.grid.N, M)
    removed = four.amplitudes[~keep]
    tail = float(np.linalg.norm(removed))
    coeff = np.where(keep, four.amplitudes, 0.0)
    projected = WaveState(state.grid, coeff, FOURIER, normalized=False)
    if state.representation == POSITION:
        projected = dft_inverse(projected)
    return projected, tail


@functools.lru_cache(maxsize=64)
def _mode_norm_sq(d: int, N: int) -> np.ndarray:
    """|n|_2^2 over the mode lattice, FFT order, shape (2N,)*d."""
    n = np.rint(np.fft.fftfreq(2 * N) * 2 * N)
    sq = n.astype(float) ** 2
    total = np.zeros((2 * N,) * d)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = 2 * N
        total = total + sq.reshape(shape)
    return total


@functools.lru_cache(maxsize=64)
def _band_mask(d: int, N: int, M: int) -> np.ndarray:
    n = np.rint(np.fft.fftfreq(2 * N) * 2 * N).astype(int)
    axis_keep = (n >= -M) & (n <= M - 1)
    mask = np.ones((2 * N,) * d, dtype=bool)
    for axis in range(d):
        shape = [1] * d
        shape[axis] = 2 * N
        mask &= axis_keep.reshape(shape)
    return mask
