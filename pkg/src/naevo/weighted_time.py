# src/naevo/weighted_time.py
"""
Discrete exponentially weighted time axis.

A signal lives on a uniform grid t_k = t_min + k*h, k = 0..n, and is zero-extended
before t_min. The weighted inner product is

    <u, v>_rho = h * sum_k c_k <u_k, v_k> exp(-2 rho t_k),   c_0 = c_n = 1/2, c_k = 1 otherwise,

conjugate-linear in the first slot. The time derivative is the causal backward
difference, its inverse the left-rectangle cumulative sum.

Fourier-Laplace normalization: for N = n + 1 samples and xi_m = 2*pi*fftfreq(N, h),

    (L_rho u)(xi_m) = h / sqrt(2*pi) * exp(-1j*xi_m*t_min) * sum_k exp(-1j*xi_m*k*h) exp(-rho t_k) u_k

so that sum_m |L_rho u(xi_m)|^2 * dxi = h * sum_k |u_k|^2 exp(-2 rho t_k) with dxi = 2*pi/(N*h).
Plancherel therefore pairs the transform with the rectangle rule; for signals vanishing at
both grid ends this equals the trapezoid weighted norm. Frequencies are returned ascending
(fftshift order).
"""

import csv
import logging
import math
import numbers
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.fft
import scipy.signal

from .errors import ShapeError
from .utils import format_float, make_rng

logger = logging.getLogger(__name__)

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class TimeGrid:
    t_min: float
    t_max: float
    n: int

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool) or self.n < 2:
            raise ValueError(f"TimeGrid needs an integer n >= 2, got {self.n!r}.")
        if not (math.isfinite(self.t_min) and math.isfinite(self.t_max)) or self.t_max <= self.t_min:
            raise ValueError(f"TimeGrid needs finite t_min < t_max, got [{self.t_min}, {self.t_max}].")
        object.__setattr__(self, "t_min", float(self.t_min))
        object.__setattr__(self, "t_max", float(self.t_max))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.t_max - self.t_min) / self.n

    @cached_property
    def times(self) -> np.ndarray:
        t = self.t_min + self.h * np.arange(self.n + 1)
        t.setflags(write=False)
        return t

    def index_at_or_before(self, a: float) -> int:
        """Largest k with t_k <= a (tolerant to round-off), -1 if a precedes the grid."""
        if a < self.t_min - 1e-12 * max(1.0, abs(self.t_min)):
            return -1
        k = int(math.floor((a - self.t_min) / self.h + 1e-9))
        return min(k, self.n)

    def refine(self, factor: int = 2) -> "TimeGrid":
        return TimeGrid(self.t_min, self.t_max, self.n * int(factor))

    def endpoint_factors(self) -> np.ndarray:
        c = np.ones(self.n + 1)
        c[0] = c[-1] = 0.5
        return c

    def quadrature_weights(self, w: "Weight", rule: str = "trapezoid") -> np.ndarray:
        """h * c_k * exp(-2 rho t_k); `rule` is 'trapezoid' or 'rectangle' (c_k = 1)."""
        weights = self.h * np.exp(-2.0 * w.rho * self.times)
        if rule == "trapezoid":
            weights = weights * self.endpoint_factors()
        elif rule != "rectangle":
            raise ValueError(f"Unknown quadrature rule '{rule}'.")
        return weights


@dataclass(frozen=True)
class Weight:
    rho: float

    def __post_init__(self):
        if isinstance(self.rho, bool) or not isinstance(self.rho, numbers.Real) or not math.isfinite(self.rho) or self.rho <= 0:
            raise ValueError(f"The exponential weight rho must be a positive real, got {self.rho!r}.")
        object.__setattr__(self, "rho", float(self.rho))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-sampled signal: `values[k]` is the vector at grid time t_k. Read-only after construction."""
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] != self.grid.n + 1 or arr.shape[1] < 1:
            raise ShapeError(f"Trajectory values must have shape ({self.grid.n + 1}, d), got {arr.shape}.")
        if not np.issubdtype(arr.dtype, np.number):
            raise ShapeError(f"Trajectory values must be numeric, got dtype {arr.dtype}.")
        if not np.issubdtype(arr.dtype, np.inexact):
            arr = arr.astype(float)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int, dtype=float) -> "Trajectory":
        return cls(grid, np.zeros((grid.n + 1, dim), dtype=dtype))

    @classmethod
    def from_function(cls, grid: TimeGrid, fn: Callable[[float], Sequence[float]]) -> "Trajectory":
        return cls(grid, np.array([np.atleast_1d(fn(t)) for t in grid.times]))

    def with_values(self, values: np.ndarray) -> "Trajectory":
        return Trajectory(self.grid, values)

    def components(self, index) -> "Trajectory":
        return Trajectory(self.grid, self.values[:, index])

    def max_abs(self, upto: Optional[float] = None) -> float:
        vals = self.values
        if upto is not None:
            vals = vals[: self.grid.index_at_or_before(upto) + 1]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def _check_peer(self, other: "Trajectory"):
        require_compatible(self, other)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        self._check_peer(other)
        return Trajectory(self.grid, self.values + other.values)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self._check_peer(other)
        return Trajectory(self.grid, self.values - other.values)

    def __neg__(self) -> "Trajectory":
        return Trajectory(self.grid, -self.values)

    def __mul__(self, scalar) -> "Trajectory":
        return Trajectory(self.grid, scalar * self.values)

    __rmul__ = __mul__

    def to_csv(self, path: str):
        """Header `t,v0,...`; every number written with 17 significant digits."""
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["t"] + [f"v{i}" for i in range(self.dim)])
            for t, row in zip(self.grid.times, self.values):
                writer.writerow([format_float(t)] + [format_float(x) for x in row])

    @classmethod
    def from_csv(cls, path: str) -> "Trajectory":
        with open(path, "r", newline="") as f:
            rows = [row for row in csv.reader(f) if row]
        if len(rows) < 4 or not rows[0] or rows[0][0].strip() != "t":
            raise ShapeError(f"'{path}' is not a trajectory CSV (expected header 't,v0,...' and >= 3 rows).")
        body = rows[1:]
        as_complex = any(cell.strip().endswith("j") for row in body for cell in row[1:])
        times = np.array([float(row[0]) for row in body])
        parse = complex if as_complex else float
        values = np.array([[parse(cell) for cell in row[1:]] for row in body])
        grid = TimeGrid(times[0], times[-1], len(times) - 1)
        if np.max(np.abs(times - grid.times)) > 1e-9 * max(1.0, np.max(np.abs(times))):
            raise ShapeError(f"'{path}' does not sample a uniform grid.")
        return cls(grid, values)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Frequency-side samples of the Fourier-Laplace transform (ascending frequencies)."""
    grid: TimeGrid
    rho: float
    frequencies: np.ndarray
    values: np.ndarray

    @property
    def dxi(self) -> float:
        return 2.0 * math.pi / ((self.grid.n + 1) * self.grid.h)

    def norm(self) -> float:
        return math.sqrt(self.dxi * float(np.sum(np.abs(self.values) ** 2)))

    def multiply(self, symbol: Callable[[np.ndarray], np.ndarray]) -> "Spectrum":
        """Multiplies by symbol(xi), e.g. the derivative multiplier 1j*xi + rho."""
        factor = np.asarray(symbol(self.frequencies)).reshape(-1, 1)
        return Spectrum(self.grid, self.rho, self.frequencies, self.values * factor)


def require_compatible(u: Trajectory, v: Trajectory):
    if u.grid != v.grid:
        raise ShapeError(f"Trajectories live on different grids: {u.grid} vs {v.grid}.")
    if u.dim != v.dim:
        raise ShapeError(f"Trajectory dimensions differ: {u.dim} vs {v.dim}.")


def weighted_inner(u: Trajectory, v: Trajectory, w: Weight, rule: str = "trapezoid"):
    require_compatible(u, v)
    pointwise = np.sum(np.conj(u.values) * v.values, axis=1)
    value = np.sum(u.grid.quadrature_weights(w, rule) * pointwise)
    if np.iscomplexobj(value):
        return complex(value)
    return float(value)


def weighted_norm(u: Trajectory, w: Weight, rule: str = "trapezoid") -> float:
    squares = np.sum(np.abs(u.values) ** 2, axis=1)
    return math.sqrt(float(np.sum(u.grid.quadrature_weights(w, rule) * squares)))


def d0_apply(u: Trajectory) -> Trajectory:
    """Backward difference with zero extension: (u_k - u_{k-1})/h, u_0/h at k = 0."""
    return u.with_values(np.diff(u.values, axis=0, prepend=0.0) / u.grid.h)


def d0_inv(u: Trajectory, w: Optional[Weight] = None) -> Trajectory:
    """Causal integral v_k = h * sum_{j<=k} u_j; exact inverse of d0_apply."""
    return u.with_values(u.grid.h * np.cumsum(u.values, axis=0))


def d0_star_apply(u: Trajectory, w: Weight) -> Trajectory:
    """Continuum adjoint formula -d/dt + 2 rho with a forward difference (zero after t_max)."""
    forward = np.diff(u.values, axis=0, append=0.0) / u.grid.h
    return u.with_values(-forward + 2.0 * w.rho * u.values)


def exact_weighted_adjoint(u: Trajectory, w: Weight) -> Trajectory:
    """Matrix adjoint of d0_apply under weighted_inner."""
    grid = u.grid
    c = grid.endpoint_factors()
    ratio = (c[1:] / c[:-1]) * math.exp(-2.0 * w.rho * grid.h)
    out = u.values / grid.h
    out[:-1] -= ratio.reshape(-1, 1) * u.values[1:] / grid.h
    return u.with_values(out)


def resolvent_eps(u: Trajectory, eps: float) -> Trajectory:
    """(1 + eps*d0)^{-1} by the forward sweep (1 + eps/h) v_k - (eps/h) v_{k-1} = u_k."""
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}.")
    a = eps / u.grid.h
    return u.with_values(scipy.signal.lfilter([1.0 / (1.0 + a)], [1.0, -a / (1.0 + a)], u.values, axis=0))


def cutoff(u: Trajectory, a: float) -> Trajectory:
    """Multiplication by the indicator of ]-inf, a]."""
    values = np.array(u.values, copy=True)
    values[u.grid.index_at_or_before(a) + 1:] = 0
    return u.with_values(values)


def fourier_laplace(u: Trajectory, w: Weight) -> Spectrum:
    grid = u.grid
    count = grid.n + 1
    tilted = np.exp(-w.rho * grid.times).reshape(-1, 1) * u.values
    xi = 2.0 * math.pi * scipy.fft.fftfreq(count, d=grid.h)
    phase = np.exp(-1j * xi * grid.t_min).reshape(-1, 1)
    values = (grid.h / SQRT_2PI) * phase * scipy.fft.fft(tilted, axis=0)
    return Spectrum(grid, w.rho, scipy.fft.fftshift(xi), scipy.fft.fftshift(values, axes=0))


def inverse_fourier_laplace(spectrum: Spectrum, real: bool = False) -> Trajectory:
    grid = spectrum.grid
    xi = scipy.fft.ifftshift(spectrum.frequencies)
    values = scipy.fft.ifftshift(spectrum.values, axes=0)
    values = values * np.exp(1j * xi * grid.t_min).reshape(-1, 1)
    tilted = scipy.fft.ifft(values, axis=0) * (SQRT_2PI / grid.h)
    out = np.exp(spectrum.rho * grid.times).reshape(-1, 1) * tilted
    return Trajectory(grid, out.real if real else out)


def spectral_d0(u: Trajectory, w: Weight) -> Trajectory:
    """d0 realized as L*(i m + rho) L; accurate for band-limited u vanishing at the grid ends."""
    spectrum = fourier_laplace(u, w).multiply(lambda xi: 1j * xi + w.rho)
    return inverse_fourier_laplace(spectrum, real=not u.is_complex)


def minus_one_norm(u: Trajectory, w: Weight) -> float:
    """||u||_{rho,-1} approximated by ||d0^{-1} u||_{rho,0}."""
    return weighted_norm(d0_inv(u, w), w)


def plus_one_norm(u: Trajectory, w: Weight) -> float:
    return weighted_norm(d0_apply(u), w)


def probe_signals(grid: TimeGrid, dim: int, w: Weight, n_samples: int, seed: Optional[int] = 0,
                  support: Optional[tuple] = None) -> list:
    """
    Compactly supported random test signals. Three in four are smooth low-frequency profiles
    tilted by exp(rho t), which is where smoothing operators such as d0^{-1} attain their
    weighted norm; the rest are tapered white noise.
    """
    rng = make_rng(seed)
    length = grid.t_max - grid.t_min
    a, b = support if support is not None else (grid.t_min + 0.05 * length, grid.t_max - 0.2 * length)
    lo = grid.index_at_or_before(a) + 1
    hi = grid.index_at_or_before(b)
    if hi - lo < 4:
        raise ValueError(f"Probe support [{a}, {b}] holds fewer than 5 grid points.")
    t = grid.times[lo:hi + 1]
    s = (t - t[0]) / (t[-1] - t[0])
    taper = scipy.signal.windows.tukey(hi - lo + 1, alpha=0.2).reshape(-1, 1)
    tilt = np.exp(w.rho * (t - t[-1])).reshape(-1, 1)
    probes = []
    for i in range(n_samples):
        if i % 4 == 3:
            shape = rng.standard_normal((hi - lo + 1, dim))
        else:
            shape = np.zeros((hi - lo + 1, dim))
            for j in range(4):
                direction = rng.standard_normal(dim)
                amplitude = rng.standard_normal() / (1.0 + j) ** 2
                shape += amplitude * np.cos(math.pi * j * s + rng.uniform(0, 2 * math.pi)).reshape(-1, 1) * direction
        values = np.zeros((grid.n + 1, dim))
        values[lo:hi + 1] = taper * tilt * shape
        probes.append(Trajectory(grid, values))
    return probes


def estimate_operator_norm(apply: Callable[[Trajectory], Trajectory], grid: TimeGrid, dim: int, w: Weight,
                           n_samples: int = 200, seed: Optional[int] = 0, support: Optional[tuple] = None) -> float:
    """Largest observed ratio ||apply(u)||_rho / ||u||_rho over `probe_signals`."""
    best = 0.0
    for u in probe_signals(grid, dim, w, n_samples, seed, support):
        size = weighted_norm(u, w)
        if size == 0.0:
            continue
        best = max(best, weighted_norm(apply(u), w) / size)
    logger.debug(f"Operator norm estimate at rho={w.rho}: {best:.6g} over {n_samples} probes.")
    return best


def estimate_d0_inv_norm(grid: TimeGrid, w: Weight, n_samples: int = 200, seed: Optional[int] = 0) -> float:
    return estimate_operator_norm(lambda u: d0_inv(u, w), grid, 1, w, n_samples, seed)
