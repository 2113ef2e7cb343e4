"""Objective functions and their evaluation oracles.

A `PotentialSpec` bundles a test function with its declared regularity data
(Lipschitz constant in a stated p-norm, optional sup bound, known minimizer).
Evaluation comes in three flavors: exact, deterministically perturbed binary
oracle, and Gaussian stochastic oracle; every call is charged to a
`QueryLedger`. The module also provides the box-to-unit-cube restriction map,
a compactly supported smooth mollifier, and a sample-mean estimator.
"""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from .errors import (
    BoundHypothesisError,
    InvalidParameterError,
    ResolutionError,
)
from .grid import GridSpec

__all__ = [
    "PotentialSpec",
    "QueryLedger",
    "REGISTRY",
    "make_potential",
    "sup_abs_bound",
    "restrict",
    "eval_exact",
    "eval_binary",
    "eval_stochastic",
    "mean_estimate",
    "mollifier_value",
    "mollify",
    "grid_potential",
    "axis_fields",
]


@dataclass(frozen=True)
class PotentialSpec:
    """An objective f with declared regularity data.

    `func` maps physical points of shape (..., d) to values of shape (...).
    `G` is a Lipschitz constant valid in the `p`-norm; `Lambda`, when set, is
    a promised bound on sup |f| over the box the spec is meant for (None
    means no promise is declared and the bound check is skipped).
    For separable potentials `axis_func(u, j)` gives the per-axis summand.
    """

    name: str
    d: int
    func: Callable[[np.ndarray], np.ndarray]
    G: float
    p: float
    x_star: Optional[tuple]
    f_star: Optional[float]
    convex: bool
    separable: bool
    axis_func: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    Lambda: Optional[float] = None

    def __post_init__(self):
        if self.d < 1:
            raise InvalidParameterError("d must be >= 1")
        if self.G <= 0 or self.p < 1:
            raise InvalidParameterError("need G > 0 and p >= 1")
        if self.separable and self.axis_func is None:
            raise InvalidParameterError("separable spec needs axis_func")

    def __call__(self, pts):
        return self.func(np.asarray(pts, dtype=float))


class QueryLedger:
    """Thread-safe monotone counters for oracle usage."""

    def __init__(self):
        self._lock = threading.Lock()
        self.exact_evals = 0
        self.noisy_evals = 0
        self.stochastic_evals = 0
        self.grid_sweeps = 0

    def add(self, kind: str, n: int = 1):
        if n < 0:
            raise InvalidParameterError("ledger increments must be >= 0")
        attr = {
            "exact": "exact_evals",
            "binary": "noisy_evals",
            "stochastic": "stochastic_evals",
            "sweep": "grid_sweeps",
        }[kind]
        with self._lock:
            setattr(self, attr, getattr(self, attr) + n)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "exact_evals": self.exact_evals,
                "noisy_evals": self.noisy_evals,
                "stochastic_evals": self.stochastic_evals,
                "grid_sweeps": self.grid_sweeps,
            }


def _check_bound(spec: PotentialSpec, values: np.ndarray):
    if spec.Lambda is not None:
        worst = float(np.max(np.abs(values)))
        if worst > spec.Lambda * (1 + 1e-12):
            raise BoundHypothesisError(
                f"|{spec.name}| reached {worst:.6g}, above the promised bound {spec.Lambda:.6g}"
            )


# ---------------------------------------------------------------------------
# registry


def _quadratic(d, x_star):
    xs = np.asarray(x_star, dtype=float)

    def f(pts):
        diff = pts - xs
        return np.sum(diff * diff, axis=-1)

    def axis(u, j):
        return (u - xs[j]) ** 2

    # gradient norm on B_inf(x_star, 1) is at most 2*sqrt(d)
    return PotentialSpec("quadratic", d, f, 2.0 * math.sqrt(d), 2.0, tuple(xs), 0.0, True, True, axis)


def _abs_l1(d, x_star):
    xs = np.asarray(x_star, dtype=float)

    def f(pts):
        return np.sum(np.abs(pts - xs), axis=-1)

    def axis(u, j):
        return np.abs(u - xs[j])

    return PotentialSpec("abs_l1", d, f, 1.0, 1.0, tuple(xs), 0.0, True, True, axis)


def _max_abs(d, x_star):
    xs = np.asarray(x_star, dtype=float)

    def f(pts):
        return np.max(np.abs(pts - xs), axis=-1)

    return PotentialSpec("max_abs", d, f, 1.0, 1.0, tuple(xs), 0.0, True, False)


HUBER_DELTA = 0.5


def _huber_1d(u):
    au = np.abs(u)
    return np.where(au <= HUBER_DELTA, 0.5 * u * u, HUBER_DELTA * (au - 0.5 * HUBER_DELTA))


def _huber(d, x_star):
    xs = np.asarray(x_star, dtype=float)

    def f(pts):
        return np.sum(_huber_1d(pts - xs), axis=-1)

    def axis(u, j):
        return _huber_1d(u - xs[j])

    # slope of the per-axis profile is capped at HUBER_DELTA
    return PotentialSpec("huber", d, f, HUBER_DELTA, 1.0, tuple(xs), 0.0, True, True, axis)


def _rosenbrock_convexified(d, x_star):
    if d < 2:
        raise InvalidParameterError("rosenbrock_convexified needs d >= 2")
    if x_star is not None and any(c != 1.0 for c in np.asarray(x_star).ravel()):
        raise InvalidParameterError("rosenbrock_convexified minimizer is fixed at the all-ones point")
    xs = tuple(1.0 for _ in range(d))

    def f(pts):
        pts = np.asarray(pts, dtype=float)
        head = (pts[..., 0] - 1.0) ** 2
        steps = np.diff(pts, axis=-1)
        return head + np.sum(steps * steps, axis=-1)

    # chain-coupling gradient entries stay below 8 on B_inf(x_star, 1)
    return PotentialSpec("rosenbrock_convexified", d, f, 8.0 * math.sqrt(d), 2.0, xs, 0.0, True, False)


REGISTRY = {
    "quadratic": _quadratic,
    "abs_l1": _abs_l1,
    "max_abs": _max_abs,
    "huber": _huber,
    "rosenbrock_convexified": _rosenbrock_convexified,
}


def make_potential(name: str, d: int, x_star=None) -> PotentialSpec:
    if name not in REGISTRY:
        raise InvalidParameterError(f"unknown potential {name!r}; known: {sorted(REGISTRY)}")
    if x_star is None and name != "rosenbrock_convexified":
        x_star = (0.0,) * d
    return REGISTRY[name](d, x_star)


def sup_abs_bound(spec: PotentialSpec, center, radius: float) -> float:
    """A valid upper bound on sup |f| over B_inf(center, radius).

    Exact for the axis-wise registry functions; a Lipschitz envelope
    |f(center)| + G * (l_p radius of the box) otherwise.
    """
    c = np.asarray(center, dtype=float)
    if c.shape != (spec.d,):
        raise InvalidParameterError("center must have length d")
    if radius <= 0:
        raise InvalidParameterError("radius must be positive")
    base = spec.name.split("@", 1)[0]
    if spec.x_star is not None:
        reach = np.abs(c - np.asarray(spec.x_star)) + radius
        if base == "quadratic":
            return float(np.sum(reach**2))
        if base == "abs_l1":
            return float(np.sum(reach))
        if base == "max_abs":
            return float(np.max(reach))
        if base == "huber":
            return float(np.sum(_huber_1d(reach)))
    corner_lp = radius * spec.d ** (1.0 / spec.p)
    return float(abs(spec(c)) + spec.G * corner_lp)


def restrict(spec: PotentialSpec, x0, R: float) -> PotentialSpec:
    """Map f on the box B_inf(x0, R) to g(u) = f(2R u + x0) on the unit cube.

    The returned spec lives in unit coordinates: Lipschitz constant 2RG in
    the same p-norm, promised sup bound computed over the box, and minimizer
    mapped through the affine change of variables.
    """
    if R <= 0:
        raise InvalidParameterError("R must be positive")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (spec.d,):
        raise InvalidParameterError("x0 must have length d")
    outer = spec.func

    def g(pts):
        return outer(2.0 * R * pts + x0)

    axis_g = None
    if spec.separable:
        inner_axis = spec.axis_func

        def axis_g(u, j):
            return inner_axis(2.0 * R * u + x0[j], j)

    new_star = None
    if spec.x_star is not None:
        new_star = tuple((np.asarray(spec.x_star) - x0) / (2.0 * R))
    return replace(
        spec,
        name=spec.name.split("@", 1)[0] + "@unit",
        func=g,
        G=2.0 * R * spec.G,
        x_star=new_star,
        axis_func=axis_g,
        Lambda=sup_abs_bound(spec, x0, R),
    )


# ---------------------------------------------------------------------------
# oracles


def eval_exact(spec: PotentialSpec, x, ledger: Optional[QueryLedger] = None) -> float:
    val = float(spec(x))
    _check_bound(spec, np.asarray(val))
    if ledger is not None:
        ledger.add("exact")
    return val


def _hash_unit(spec_name: str, x: np.ndarray, seed: int) -> float:
    """Deterministic value in the open interval (0, 1) keyed by (name, x, seed)."""
    h = hashlib.blake2b(digest_size=8)
    h.update(spec_name.encode())
    h.update(int(seed).to_bytes(8, "little", signed=True))
    h.update(np.ascontiguousarray(x, dtype=np.float64).tobytes())
    word = int.from_bytes(h.digest(), "little")
    return (word + 0.5) / 2.0**64


def eval_binary(
    spec: PotentialSpec,
    x,
    eps_f: float,
    ledger: Optional[QueryLedger] = None,
    seed: int = 0,
) -> float:
    """f(x) snapped to the 2*eps_f lattice plus a seeded sub-eps_f offset.

    Repeatable for identical (x, seed) and always within 2*eps_f of the truth.
    """
    if eps_f <= 0:
        raise InvalidParameterError("eps_f must be positive")
    x = np.asarray(x, dtype=float)
    truth = float(spec(x))
    _check_bound(spec, np.asarray(truth))
    snapped = 2.0 * eps_f * round(truth / (2.0 * eps_f))
    offset = (2.0 * _hash_unit(spec.name, x, seed) - 1.0) * eps_f
    if ledger is not None:
        ledger.add("binary")
    return snapped + offset


def eval_stochastic(
    spec: PotentialSpec,
    x,
    sigma: float,
    rng: np.random.Generator,
    ledger: Optional[QueryLedger] = None,
) -> float:
    if sigma < 0:
        raise InvalidParameterError("sigma must be >= 0")
    truth = float(spec(x))
    _check_bound(spec, np.asarray(truth))
    if ledger is not None:
        ledger.add("stochastic")
    return truth + (rng.normal(0.0, sigma) if sigma > 0 else 0.0)


def mean_estimate(
    spec: PotentialSpec,
    x,
    sigma: float,
    eps_f: float,
    delta: float,
    rng: np.random.Generator,
    ledger: Optional[QueryLedger] = None,
) -> float:
    """Sample mean of K = ceil(2 sigma^2 ln(2/delta) / eps_f^2) noisy draws."""
    if eps_f <= 0 or not 0 < delta < 1:
        raise InvalidParameterError("need eps_f > 0 and delta in (0, 1)")
    K = max(1, math.ceil(2.0 * sigma**2 * math.log(2.0 / delta) / eps_f**2))
    total = 0.0
    for _ in range(K):
        total += eval_stochastic(spec, x, sigma, rng, ledger)
    return total / K


# ---------------------------------------------------------------------------
# mollifier

_BUMP_NORM: Optional[float] = None


def _bump_norm() -> float:
    global _BUMP_NORM
    if _BUMP_NORM is None:
        val, _ = quad(lambda v: math.exp(-1.0 / (1.0 - v * v)), -1.0, 1.0, epsabs=1e-13, epsrel=1e-12)
        _BUMP_NORM = val
    return _BUMP_NORM


def _bump(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u, dtype=float)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def mollifier_value(sigma: float, d: int, x) -> float:
    """Product bump of width sigma per axis, unit total mass, zero outside (-sigma, sigma)^d."""
    if not 0 < sigma < 0.5:
        raise InvalidParameterError("sigma must lie in (0, 1/2)")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (d,):
        raise InvalidParameterError("x must have length d")
    factors = _bump(x / sigma)
    return float(np.prod(factors) / (_bump_norm() * sigma) ** d)


def mollify(field: np.ndarray, grid: GridSpec, sigma: float):
    """Periodic convolution of a sampled potential with the width-sigma mollifier.

    Computed spectrally; the sampled kernel is renormalized to exact unit
    discrete mass so constants pass through unchanged. Returns the smoothed
    samples and the measured sup distance to the input on the inner box
    B_inf(0, 1/2 - sigma).
    """
    if not 0 < sigma < 0.5:
        raise InvalidParameterError("sigma must lie in (0, 1/2)")
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise InvalidParameterError("field shape does not match the grid")
    if 2 * grid.N * sigma < 8:
        raise ResolutionError(
            f"grid resolves {2 * grid.N * sigma:.2f} points per sigma; need at least 8"
        )
    coords = grid.axis_coords()
    kernel_axis = _bump(coords / sigma)
    kernel = kernel_axis
    for _ in range(grid.d - 1):
        kernel = np.multiply.outer(kernel, kernel_axis)
    kernel = kernel / kernel.sum()
    smoothed = np.fft.ifftn(np.fft.fftn(field) * np.fft.fftn(kernel)).real
    inner = np.all(np.abs(grid.unit_points()) <= 0.5 - sigma, axis=-1)
    sup_dist = float(np.max(np.abs(smoothed[inner] - field[inner]))) if inner.any() else 0.0
    return smoothed, sup_dist


# ---------------------------------------------------------------------------
# grid evaluation cache

_FIELD_CACHE: dict = {}
_CACHE_LOCK = threading.Lock()


def grid_potential(
    spec: PotentialSpec,
    grid: GridSpec,
    mode: str = "exact",
    *,
    eps_f: Optional[float] = None,
    sigma: Optional[float] = None,
    seed: int = 0,
    ledger: Optional[QueryLedger] = None,
) -> np.ndarray:
    """Evaluate the potential once over the whole grid and cache the field.

    One cache miss charges a single grid sweep plus per-point oracle calls;
    hits are free. The returned array is read-only.
    """
    if mode not in ("exact", "binary", "stochastic"):
        raise InvalidParameterError(f"unknown evaluation mode {mode!r}")
    if mode == "binary" and (eps_f is None or eps_f <= 0):
        raise InvalidParameterError("binary mode needs eps_f > 0")
    if mode == "stochastic" and (sigma is None or sigma < 0):
        raise InvalidParameterError("stochastic mode needs sigma >= 0")
    key = (spec, grid, mode, eps_f, sigma, seed)
    with _CACHE_LOCK:
        cached = _FIELD_CACHE.get(key)
    if cached is not None:
        return cached

    pts = grid.physical_points()
    exact = np.asarray(spec.func(pts), dtype=float)
    _check_bound(spec, exact)
    if mode == "exact":
        field = exact
    elif mode == "binary":
        snapped = 2.0 * eps_f * np.round(exact / (2.0 * eps_f))
        flat = pts.reshape(-1, spec.d)
        offsets = np.fromiter(
            (2.0 * _hash_unit(spec.name, row, seed) - 1.0 for row in flat),
            dtype=float,
            count=flat.shape[0],
        ).reshape(exact.shape)
        field = snapped + offsets * eps_f
    else:
        rng = np.random.default_rng(seed)
        field = exact + rng.normal(0.0, sigma, size=exact.shape) if sigma > 0 else exact

    field.setflags(write=False)
    if ledger is not None:
        ledger.add("sweep")
        ledger.add({"exact": "exact", "binary": "binary", "stochastic": "stochastic"}[mode], grid.size)
    with _CACHE_LOCK:
        _FIELD_CACHE[key] = field
    return field


def axis_fields(spec: PotentialSpec, grid: GridSpec) -> list[np.ndarray]:
    """Per-axis summands h_j evaluated on the physical axis coordinates.

    Only defined for separable specs; the full field is the broadcast sum.
    """
    if not spec.separable:
        raise InvalidParameterError(f"{spec.name} is not separable")
    out = []
    for j in range(grid.d):
        phys = 2.0 * grid.radius * grid.axis_coords() + grid.center[j]
        vals = np.asarray(spec.axis_func(phys, j), dtype=float)
        vals.setflags(write=False)
        out.append(vals)
    return out
