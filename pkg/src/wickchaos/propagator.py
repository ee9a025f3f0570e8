"""Deterministic magnetic Schroedinger propagation by Crank-Nicolson.

Solves ``du/dt = -i H u - i g`` on a periodic grid with

    H = 1/2 d/dx (a(x) d/dx) + 1/2 (b D + D b) + v(x),   D = -i d/dx.

Derivatives are Fourier-spectral by default (``scheme="spectral"``); the
second-order conservative stencil is available as ``scheme="fd2"``.  Each CN
step is solved matrix-free with GMRES, preconditioned by the exact inverse of
the constant-coefficient part.
"""
import csv
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import EllipticityError, GridMismatchError, SolverConvergenceError
from .field import FLOAT_FMT, GridFunction, boundary_mass, hzz_rows, write_csv

SCHEMES = ("spectral", "fd2")


@dataclass(frozen=True)
class CoefficientSet:
    """Metric ``a`` (real, elliptic), magnetic ``b`` (real) and potential ``v`` (complex allowed)."""

    a: GridFunction
    b: GridFunction
    v: GridFunction
    ellipticity: float = 10.0

    def __post_init__(self):
        grid = self.a.grid
        if self.b.grid != grid or self.v.grid != grid:
            raise GridMismatchError("coefficients must share one grid")
        for name in ("a", "b", "v"):
            if not np.all(np.isfinite(getattr(self, name).values)):
                raise ValueError(f"coefficient {name} has non-finite values")
        if not self.a.is_real():
            raise ValueError("metric coefficient a must be real")
        if not self.b.is_real():
            raise ValueError("magnetic coefficient b must be real")
        amin, amax = float(self.a.real.min()), float(self.a.real.max())
        c = self.ellipticity
        if amin <= 0 or amin < 1.0 / c or amax > c:
            raise EllipticityError(
                f"a must satisfy 1/C <= a <= C with C={c}; got min {amin:.6g}, max {amax:.6g}"
            )

    @classmethod
    def free(cls, grid):
        return cls(GridFunction(grid, 1.0), GridFunction(grid, 0.0), GridFunction(grid, 0.0))

    @property
    def grid(self):
        return self.a.grid

    def potential_is_real(self):
        return self.v.is_real()


class Hamiltonian:
    """Matrix-free discrete ``H``; immutable once built.

    ``apply`` acts along the last axis, so it also maps stacks of vectors.
    """

    def __init__(self, grid, a, b, v, scheme="spectral"):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        self.grid = grid
        self.scheme = scheme
        self.a = np.asarray(a, dtype=float).copy()
        self.b = np.asarray(b, dtype=float).copy()
        self.v = np.asarray(v, dtype=complex).copy()
        for arr in (self.a, self.b, self.v):
            arr.flags.writeable = False
        self.magnetic = bool(np.any(self.b != 0.0))
        self.is_zero = not (np.any(self.a) or self.magnetic or np.any(self.v))
        h = grid.spacing
        k = np.array(grid.wavenumbers)
        if scheme == "spectral":
            k1 = k.copy()
            k1[grid.points // 2] = 0.0  # odd derivative: drop the Nyquist mode
            self._ik = 1j * k1
            kinetic = -0.5 * k1 ** 2
        else:
            self._a_half = 0.5 * (self.a + np.roll(self.a, -1))
            kinetic = -(1.0 - np.cos(k * h)) / h ** 2
        self._kinetic_symbol = kinetic

    @classmethod
    def zero(cls, grid, scheme="spectral"):
        """Degenerate ``H = 0``; test scenarios only."""
        z = np.zeros(grid.points)
        return cls(grid, z, z, z, scheme=scheme)

    @property
    def hermitian(self):
        return not np.any(self.v.imag)

    def _d1(self, u):
        if self.scheme == "spectral":
            return np.fft.ifft(self._ik * np.fft.fft(u, axis=-1), axis=-1)
        h = self.grid.spacing
        return (np.roll(u, -1, axis=-1) - np.roll(u, 1, axis=-1)) / (2.0 * h)

    def _div_a_grad(self, u):
        if self.scheme == "spectral":
            return self._d1(self.a * self._d1(u))
        h = self.grid.spacing
        ah = self._a_half
        up = np.roll(u, -1, axis=-1)
        um = np.roll(u, 1, axis=-1)
        return (ah * (up - u) - np.roll(ah, 1) * (u - um)) / h ** 2

    def apply(self, u):
        u = np.asarray(u, dtype=complex)
        out = 0.5 * self._div_a_grad(u)
        if self.magnetic:
            # 1/2 (b D + D b) with D = -i d/dx
            out = out - 0.5j * (self.b * self._d1(u) + self._d1(self.b * u))
        return out + self.v * u

    __call__ = apply

    def with_potential_shift(self, w):
        """New operator with potential ``v + w``."""
        return Hamiltonian(self.grid, self.a, self.b, self.v + np.asarray(w), scheme=self.scheme)

    def preconditioner_symbol(self):
        """Fourier symbol of the constant-coefficient part ``mean(a) * kinetic + mean(v)``."""
        return float(np.mean(self.a)) * self._kinetic_symbol + complex(np.mean(self.v))

    def to_dense(self):
        m = self.grid.points
        return self.apply(np.eye(m, dtype=complex)).T

    def to_sparse(self):
        if self.scheme == "spectral":
            return sp.csr_matrix(self.to_dense())
        m = self.grid.points
        h = self.grid.spacing
        idx = np.arange(m)
        right = (idx + 1) % m
        left = (idx - 1) % m
        ah = self._a_half
        ahm = np.roll(ah, 1)
        rows = np.concatenate([idx, idx, idx])
        cols = np.concatenate([right, idx, left])
        vals = 0.5 * np.concatenate([ah, -(ah + ahm), ahm]) / h ** 2
        mat = sp.csr_matrix((vals.astype(complex), (rows, cols)), shape=(m, m))
        if self.magnetic:
            d1 = sp.csr_matrix(
                (np.concatenate([np.ones(m), -np.ones(m)]) / (2 * h),
                 (np.concatenate([idx, idx]), np.concatenate([right, left]))),
                shape=(m, m),
            )
            bm = sp.diags(self.b)
            mat = mat - 0.5j * (bm @ d1 + d1 @ bm)
        return (mat + sp.diags(self.v)).tocsr()


def build_hamiltonian(coeffs, grid=None, scheme="spectral"):
    """Assemble ``H`` from a :class:`CoefficientSet`."""
    grid = coeffs.grid if grid is None else grid
    if coeffs.grid != grid:
        raise GridMismatchError("coefficients live on a different grid")
    if float(coeffs.a.real.min()) <= 0:
        raise EllipticityError("metric coefficient a must be strictly positive")
    b = coeffs.b.real
    if not np.any(b):
        b = np.zeros(grid.points)
    return Hamiltonian(grid, coeffs.a.real, b, coeffs.v.values, scheme=scheme)


@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    theta: float = 0.5
    linear_solver_tol: float = 1e-12
    max_solver_iters: int = 200

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.theta != 0.5:
            raise ValueError("only theta = 1/2 (Crank-Nicolson) is supported")
        if not self.linear_solver_tol > 0:
            raise ValueError("linear_solver_tol must be positive")
        if self.max_solver_iters < 1:
            raise ValueError("max_solver_iters must be positive")


class CNStepper:
    """Reusable Crank-Nicolson step for a fixed operator and time step."""

    def __init__(self, hamiltonian, cfg):
        self.H = hamiltonian
        self.cfg = cfg
        m = hamiltonian.grid.points
        half = 0.5j * cfg.dt
        self._half = half
        self._pre = 1.0 / (1.0 + half * hamiltonian.preconditioner_symbol())
        self._A = spla.LinearOperator((m, m), matvec=lambda u: u + half * hamiltonian.apply(u),
                                      dtype=complex)
        self._M = spla.LinearOperator((m, m), matvec=lambda u: np.fft.ifft(self._pre * np.fft.fft(u)),
                                      dtype=complex)
        # short restart cycles: the outer loop re-checks the true (unpreconditioned) residual
        self._restart = min(cfg.max_solver_iters, m, 50)
        self._maxiter = max(2, math.ceil(cfg.max_solver_iters / self._restart))

    def advance(self, u, g_mid=None):
        """``(I + i dt/2 H) u_new = (I - i dt/2 H) u - i dt g_mid``."""
        u = np.asarray(u, dtype=complex)
        if self.H.is_zero:
            rhs = u.copy()
            if g_mid is not None:
                rhs = rhs - 1j * self.cfg.dt * np.asarray(g_mid)
            return rhs
        rhs = u - self._half * self.H.apply(u)
        if g_mid is not None:
            rhs = rhs - 1j * self.cfg.dt * np.asarray(g_mid)
        if not np.any(rhs):
            return np.zeros_like(rhs)
        x0 = np.fft.ifft(self._pre * np.fft.fft(rhs))
        sol, info = spla.gmres(self._A, rhs, x0=x0, rtol=self.cfg.linear_solver_tol, atol=0.0,
                               restart=self._restart, maxiter=self._maxiter, M=self._M)
        if info != 0:
            raise SolverConvergenceError(
                f"GMRES did not reach rtol={self.cfg.linear_solver_tol} "
                f"within {self.cfg.max_solver_iters} iterations (info={info})"
            )
        return sol


def step(u, H, g, cfg):
    """One CN step of a :class:`GridFunction`; ``g`` is the midpoint source or ``None``."""
    g_vals = None
    if g is not None:
        if g.grid != u.grid:
            raise GridMismatchError("source and state live on different grids")
        g_vals = g.values
    return GridFunction(u.grid, CNStepper(H, cfg).advance(u.values, g_vals))


def num_steps(T, dt):
    """Number of steps with ``n * dt == T`` to relative 1e-12."""
    if T < 0:
        raise ValueError("T must be non-negative")
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-12 * max(abs(T), dt):
        raise ValueError(f"dt={dt} does not divide T={T}")
    return n


@dataclass
class Trajectory:
    """Snapshots ``values[i]`` of one grid function at ``times[i]``."""

    grid: object
    times: np.ndarray
    values: np.ndarray
    z: int = 0
    zeta: float = 0.0

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return GridFunction(self.grid, self.values[i])

    @property
    def final(self):
        return self[len(self) - 1]

    def l2_history(self):
        return np.sqrt(self.grid.spacing * np.sum(np.abs(self.values) ** 2, axis=-1))

    def hzz_history(self, z=None, zeta=None):
        z = self.z if z is None else z
        zeta = self.zeta if zeta is None else zeta
        return np.atleast_1d(hzz_rows(self.values, self.grid, z, zeta))

    def boundary_history(self):
        return np.array([boundary_mass(self[i]) for i in range(len(self))])

    def write(self, directory, prefix="snap"):
        """One field CSV per snapshot plus ``manifest.csv`` (t, l2_norm, hzz_norm, boundary_mass)."""
        os.makedirs(directory, exist_ok=True)
        l2 = self.l2_history()
        hz = self.hzz_history()
        bm = self.boundary_history()
        with open(os.path.join(directory, "manifest.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "l2_norm", "hzz_norm", "boundary_mass", "file"])
            for i, t in enumerate(self.times):
                name = f"{prefix}_{i:05d}.csv"
                write_csv(self[i], os.path.join(directory, name))
                w.writerow([FLOAT_FMT.format(t), FLOAT_FMT.format(l2[i]), FLOAT_FMT.format(hz[i]),
                            FLOAT_FMT.format(bm[i]), name])


def _source_array(sources, n, m):
    if sources is None or len(sources) == 0:
        return None
    arr = np.array([s.values if isinstance(s, GridFunction) else s for s in sources], dtype=complex)
    if arr.shape != (n, m):
        raise ValueError(f"expected {n} midpoint sources of length {m}, got {arr.shape}")
    return arr


def evolve(u0, H, sources, T, cfg, z=0, zeta=0.0, stride=1):
    """Time-step ``u(t) = S(t) u0 - i int_0^t S(t-s) g(s) ds`` over ``[0, T]``.

    ``sources`` holds the source at the ``n`` half steps (or is empty).
    Snapshots are kept every ``stride`` steps and always at ``T``.
    """
    n = num_steps(T, cfg.dt)
    g = _source_array(sources, n, u0.grid.points)
    stepper = CNStepper(H, cfg)
    u = np.array(u0.values)
    times, snaps = [0.0], [u.copy()]
    for i in range(n):
        u = stepper.advance(u, None if g is None else g[i])
        if (i + 1) % stride == 0 or i + 1 == n:
            times.append((i + 1) * cfg.dt)
            snaps.append(u.copy())
    return Trajectory(u0.grid, np.array(times), np.array(snaps), z=z, zeta=zeta)


@dataclass(frozen=True)
class GrowthFit:
    """Exponential majorants of a norm history ``n(t)``.

    ``C``: smallest rate with ``n(t) <= exp(C t) n(0)``.
    ``m, w``: least-squares rate ``w >= 0`` with the prefactor lifted so ``n(t) <= m exp(w t) n(0)``.
    ``residual``: largest deviation of ``log n(t)/n(0)`` from the least-squares line.
    """

    C: float
    m: float
    w: float
    residual: float


def fit_growth(times, norms):
    t = np.asarray(times, dtype=float)
    y = np.log(np.asarray(norms, dtype=float) / float(norms[0]))
    if len(t) < 2:
        return GrowthFit(0.0, 1.0, 0.0, 0.0)
    w, b = np.polyfit(t, y, 1)
    if w < 0:
        w, b = 0.0, float(np.mean(y))
    residual = float(np.max(np.abs(y - (b + w * t))))
    lift = float(np.max(y - w * t))
    pos = t > 0
    C = max(0.0, float(np.max(y[pos] / t[pos]))) if np.any(pos) else 0.0
    return GrowthFit(C=C, m=math.exp(max(lift, 0.0)), w=float(w), residual=residual)


@dataclass
class ConvergenceScenario:
    """Homogeneous problem for temporal order checks; ``exact(T)`` may be omitted."""

    u0: GridFunction
    hamiltonian: Hamiltonian
    T: float
    exact: object = None
    reference: np.ndarray = dc_field(default=None, repr=False)

    def reference_solution(self):
        if self.exact is not None:
            return np.asarray(self.exact(self.T), dtype=complex)
        if self.reference is None:
            self.reference = dense_propagate(self.hamiltonian, self.u0.values, self.T)
        return self.reference


def dense_propagate(H, u0, t):
    """``exp(-i H t) u0`` from a dense eigen-decomposition (or ``expm`` if ``H`` is not Hermitian)."""
    mat = H.to_dense()
    if H.hermitian:
        mat = 0.5 * (mat + mat.conj().T)
        lam, vec = np.linalg.eigh(mat)
        return vec @ (np.exp(-1j * lam * t) * (vec.conj().T @ u0))
    return scipy.linalg.expm(-1j * t * mat) @ u0


def step_convergence_order(scenario, dt, cfg=None, return_errors=False):
    """Observed temporal order from the error triplet at ``dt, dt/2, dt/4``.

    Returns ``nan`` when the errors are at rounding level (nothing to measure).
    """
    ref = scenario.reference_solution()
    h = scenario.u0.grid.spacing
    errors = []
    for k in range(3):
        d = dt / 2 ** k
        c = PropagatorConfig(dt=d) if cfg is None else PropagatorConfig(
            dt=d, linear_solver_tol=cfg.linear_solver_tol, max_solver_iters=cfg.max_solver_iters)
        traj = evolve(scenario.u0, scenario.hamiltonian, None, scenario.T, c, stride=10 ** 9)
        errors.append(math.sqrt(h * float(np.sum(np.abs(traj.values[-1] - ref) ** 2))))
    scale = math.sqrt(h * float(np.sum(np.abs(ref) ** 2))) or 1.0
    if min(errors) < 1e-13 * scale:
        order = float("nan")
    else:
        order = 0.5 * (math.log2(errors[0] / errors[1]) + math.log2(errors[1] / errors[2]))
    return (order, errors) if return_errors else order
