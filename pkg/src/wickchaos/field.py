"""Periodic 1D grids, grid functions, and weighted Sobolev-Kato norms.

The window ``[-L, L)`` stands in for the real line.  ``<x>^s`` uses the true
unbounded weight on the window; ``<D>^sigma`` is a discrete Fourier multiplier.
How much mass sits near the window edge is reported by :func:`boundary_mass`.
"""
import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import GridMismatchError


@dataclass(frozen=True)
class Grid1D:
    half_width: float
    points: int

    def __post_init__(self):
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        m = self.points
        if int(m) != m or m < 2 or (m & (m - 1)) != 0:
            raise ValueError(f"points must be a power of two >= 2, got {m}")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.points

    @cached_property
    def nodes(self):
        x = -self.half_width + self.spacing * np.arange(self.points)
        x.flags.writeable = False
        return x

    @cached_property
    def wavenumbers(self):
        k = 2.0 * np.pi * np.fft.fftfreq(self.points, d=self.spacing)
        k.flags.writeable = False
        return k

    def function(self, values):
        return GridFunction(self, values)

    def sample(self, f):
        """Evaluate a callable on the nodes."""
        return GridFunction(self, f(self.nodes))

    def zeros(self):
        return GridFunction(self, np.zeros(self.points, dtype=complex))


class GridFunction:
    """Complex samples of one function on a :class:`Grid1D`; values are read-only."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        arr = np.array(values, dtype=complex)
        if arr.ndim == 0:
            arr = np.full(grid.points, arr, dtype=complex)
        if arr.shape != (grid.points,):
            raise ValueError(f"expected {grid.points} values, got shape {arr.shape}")
        arr.flags.writeable = False
        self.grid = grid
        self.values = arr

    def _other(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridMismatchError("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    @property
    def real(self):
        return self.values.real

    def is_real(self, tol=0.0):
        return bool(np.max(np.abs(self.values.imag), initial=0.0) <= tol)

    def __repr__(self):
        return f"GridFunction(L={self.grid.half_width}, M={self.grid.points})"


def _values(u):
    return u.values if isinstance(u, GridFunction) else np.asarray(u)


def japanese_bracket(y, s):
    """``<y>^s = (1 + y^2)^(s/2)``."""
    return (1.0 + np.asarray(y) ** 2) ** (0.5 * s)


def bracket_x(s, u):
    """Multiply pointwise by ``<x>^s``."""
    if s == 0:
        return GridFunction(u.grid, u.values)
    return GridFunction(u.grid, japanese_bracket(u.grid.nodes, s) * u.values)


def bracket_D(sigma, u):
    """Apply the Fourier multiplier ``<xi>^sigma``."""
    if sigma == 0:
        return GridFunction(u.grid, u.values)
    mult = japanese_bracket(u.grid.wavenumbers, sigma)
    return GridFunction(u.grid, np.fft.ifft(mult * np.fft.fft(u.values)))


def l2_norm(u):
    """Uniform-grid (periodic trapezoidal) ``L^2`` norm."""
    return math.sqrt(u.grid.spacing * float(np.sum(np.abs(u.values) ** 2)))


def spectral_l2_norm(u):
    """The same norm evaluated on the DFT side (Parseval)."""
    uh = np.fft.fft(u.values)
    return math.sqrt(u.grid.spacing / u.grid.points * float(np.sum(np.abs(uh) ** 2)))


def _sk_rows(values, grid, s, sigma):
    # values: (..., M); returns the H^{s,sigma} norm of every row
    v = values
    if sigma != 0:
        v = np.fft.ifft(japanese_bracket(grid.wavenumbers, sigma) * np.fft.fft(v, axis=-1), axis=-1)
    if s != 0:
        v = japanese_bracket(grid.nodes, s) * v
    return np.sqrt(grid.spacing * np.sum(np.abs(v) ** 2, axis=-1))


def sk_norm(u, s, sigma):
    """Sobolev-Kato norm ``|| <x>^s <D>^sigma u ||_{L^2}``."""
    return float(_sk_rows(u.values, u.grid, s, sigma))


def hzz_norm(u, z, zeta):
    """``sum_{j=0}^{z} ||u||_{H^{z-j, j+zeta}}``."""
    return float(hzz_rows(u.values, u.grid, z, zeta))


def hzz_rows(values, grid, z, zeta):
    """Vectorised :func:`hzz_norm` over the leading axes of ``values``."""
    if z < 0 or int(z) != z:
        raise ValueError("z must be a non-negative integer")
    values = np.asarray(values)
    fhat = np.fft.fft(values, axis=-1)
    total = 0.0
    for j in range(int(z) + 1):
        sigma = j + zeta
        v = np.fft.ifft(japanese_bracket(grid.wavenumbers, sigma) * fhat, axis=-1) if sigma else values
        s = z - j
        if s:
            v = japanese_bracket(grid.nodes, s) * v
        total = total + np.sqrt(grid.spacing * np.sum(np.abs(v) ** 2, axis=-1))
    return total


def boundary_mass(u, fraction=0.9):
    """Share of ``|u|^2`` carried by nodes with ``|x| > fraction * L``."""
    w = np.abs(_values(u)) ** 2
    total = float(np.sum(w))
    if total == 0.0:
        return 0.0
    mask = np.abs(u.grid.nodes) > fraction * u.grid.half_width
    return float(np.sum(w[mask])) / total


def sup_norm(u):
    return float(np.max(np.abs(_values(u))))


def spectral_derivative(values, grid, order=1):
    """``d^order/dx^order`` of periodic samples via the DFT."""
    return np.fft.ifft((1j * grid.wavenumbers) ** order * np.fft.fft(values))


FLOAT_FMT = "{:.17g}"


def write_csv(u, path):
    """Write columns ``x, re, im`` with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "re", "im"])
        for x, v in zip(u.grid.nodes, u.values):
            w.writerow([FLOAT_FMT.format(x), FLOAT_FMT.format(v.real), FLOAT_FMT.format(v.imag)])


def read_csv(path):
    """Read a file written by :func:`write_csv`; the grid is recovered from the x column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "re", "im"]:
        raise ValueError(f"{path}: expected header x,re,im")
    data = np.array([[float(c) for c in r] for r in rows[1:] if r], dtype=float)
    x = data[:, 0]
    m = len(x)
    grid = Grid1D(half_width=-float(x[0]), points=m)
    if not np.allclose(x, grid.nodes, rtol=0, atol=1e-12 * grid.half_width):
        raise ValueError(f"{path}: x column is not a uniform periodic grid")
    return GridFunction(grid, data[:, 1] + 1j * data[:, 2])
