"""Chaos fields ``u = sum_alpha u_alpha H_alpha`` with grid-valued coefficients.

Products are formed in the full algebra and then clipped to the truncation
policy; whatever is discarded is measured and carried on the result as
``clipped_mass`` rather than silently dropped.
"""
import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateFitError, GridMismatchError, PolicyViolationError
from .field import FLOAT_FMT, GridFunction, hzz_norm, hzz_rows, read_csv, write_csv
from .multiindex import (MultiIndex, TruncationPolicy, as_multiindex, enumerate_indices,
                         log_weight, subtract, weight)


class ChaosField:
    """Finite map ``MultiIndex -> GridFunction``; missing keys are zero."""

    def __init__(self, policy, grid, coeffs=None, clipped_mass=0.0):
        self.policy = policy
        self.grid = grid
        self.clipped_mass = float(clipped_mass)
        store = {}
        for key, val in (coeffs or {}).items():
            alpha = as_multiindex(key)
            if not policy.admits(alpha):
                raise PolicyViolationError(
                    f"index {alpha} violates policy K={policy.max_dim}, N={policy.max_order}")
            if isinstance(val, GridFunction):
                if val.grid != grid:
                    raise GridMismatchError(f"coefficient {alpha} lives on a different grid")
            else:
                val = GridFunction(grid, val)
            store[alpha] = val
        self._coeffs = dict(sorted(store.items(), key=lambda kv: kv[0].sort_key()))

    @classmethod
    def deterministic(cls, u, policy):
        return cls(policy, u.grid, {MultiIndex.zero(): u})

    def __getitem__(self, alpha):
        alpha = as_multiindex(alpha)
        if alpha in self._coeffs:
            return self._coeffs[alpha]
        if not self.policy.admits(alpha):
            raise PolicyViolationError(f"index {alpha} violates the policy")
        return GridFunction(self.grid, 0.0)

    def array(self, alpha):
        return self[alpha].values

    def __contains__(self, alpha):
        return as_multiindex(alpha) in self._coeffs

    def __iter__(self):
        return iter(self._coeffs)

    def __len__(self):
        return len(self._coeffs)

    def keys(self):
        return self._coeffs.keys()

    def items(self):
        return self._coeffs.items()

    def indices(self):
        """Every index admitted by the policy, stored or not."""
        return enumerate_indices(self.policy)

    def _check_compatible(self, other):
        if other.grid != self.grid:
            raise GridMismatchError("chaos fields live on different grids")
        if other.policy != self.policy:
            raise PolicyViolationError("chaos fields use different truncation policies")

    def __add__(self, other):
        self._check_compatible(other)
        out = dict(self._coeffs)
        for a, g in other.items():
            out[a] = out[a] + g if a in out else g
        return ChaosField(self.policy, self.grid, out)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, c):
        if isinstance(c, (ChaosField, GridFunction)):
            return NotImplemented
        return ChaosField(self.policy, self.grid, {a: g * c for a, g in self.items()})

    __rmul__ = __mul__

    def map(self, func):
        """Apply ``func`` to every stored coefficient array."""
        return ChaosField(self.policy, self.grid, {a: func(g.values) for a, g in self.items()})

    def hzz_norms(self, z=0, zeta=0.0):
        return {a: hzz_norm(g, z, zeta) for a, g in self.items()}

    def __repr__(self):
        return (f"ChaosField(K={self.policy.max_dim}, N={self.policy.max_order}, "
                f"stored={len(self)}, M={self.grid.points})")


def _check_pair(F, G):
    if F.grid != G.grid:
        raise GridMismatchError("chaos fields live on different grids")
    if F.policy != G.policy:
        raise PolicyViolationError("chaos fields use different truncation policies")


def _clipped(extra, grid, z, zeta):
    return math.fsum(float(hzz_rows(v, grid, z, zeta)) for v in extra.values())


def wick_product(F, G, z=0, zeta=0.0):
    """``(F <> G)_gamma = sum_{beta <= gamma} F_beta G_{gamma - beta}`` with pointwise products.

    Terms with ``|gamma| > N`` are discarded; the sum of their ``H_{z,zeta}`` norms
    is stored as ``clipped_mass`` on the result.
    """
    _check_pair(F, G)
    kept, extra = {}, {}
    for a, f in F.items():
        for b, g in G.items():
            c = a + b
            target = kept if F.policy.admits(c) else extra
            prod = f.values * g.values
            target[c] = target[c] + prod if c in target else prod
    return ChaosField(F.policy, F.grid, kept, clipped_mass=_clipped(extra, F.grid, z, zeta))


def wick_square(F, z=0, zeta=0.0):
    """Wick square by its explicit split.

    ``u_0^2`` at zero and ``2 u_0 u_alpha + sum_{0 < gamma < alpha} u_gamma u_{alpha-gamma}``
    at every ``|alpha| > 0``.
    """
    zero = MultiIndex.zero()
    u0 = F.array(zero)
    keys = list(F.keys())
    out = {zero: u0 * u0}
    for alpha in F.indices():
        if alpha.is_zero():
            continue
        acc = 2.0 * u0 * F.array(alpha)
        for gamma in keys:
            if gamma.is_zero() or gamma == alpha or not gamma.le(alpha):
                continue
            rest = subtract(alpha, gamma)
            if rest in F:
                acc = acc + F.array(gamma) * F.array(rest)
        if np.any(acc):
            out[alpha] = acc
    extra = {}
    for a in keys:
        for b in keys:
            c = a + b
            if not F.policy.admits(c):
                prod = F.array(a) * F.array(b)
                extra[c] = extra[c] + prod if c in extra else prod
    return ChaosField(F.policy, F.grid, out, clipped_mass=_clipped(extra, F.grid, z, zeta))


def expectation(F):
    """The zeroth coefficient (zero function if absent)."""
    return F[MultiIndex.zero()]


def variance(F):
    """Pointwise ``sum_{alpha != 0} alpha! |F_alpha|^2`` of the truncation."""
    acc = np.zeros(F.grid.points)
    for a, g in F.items():
        if not a.is_zero():
            acc = acc + a.factorial() * np.abs(g.values) ** 2
    return GridFunction(F.grid, acc)


def kondratiev_norm(F, p, z=0, zeta=0.0):
    """``sqrt(sum_alpha ||F_alpha||^2_{H_{z,zeta}} (2N)^(-p alpha))``."""
    terms = [hzz_norm(g, z, zeta) ** 2 * weight(a, -p) for a, g in F.items()]
    return math.sqrt(math.fsum(terms))


@dataclass(frozen=True)
class DecayFit:
    """Majorant ``norm_alpha <= K_fit (2N)^(p_fit alpha)`` over the fitted indices."""

    K_fit: float
    p_fit: float
    max_violation: float

    def bound(self, alpha):
        return self.K_fit * weight(alpha, self.p_fit)


def fit_decay_values(norms):
    """Fit a :class:`DecayFit` to ``{alpha: norm}``.

    Least squares of ``log norm`` against ``log (2N)^alpha`` gives the slope
    (clipped at zero); the intercept is then raised until every point lies on
    or below the line.
    """
    pts = [(log_weight(a), math.log(v)) for a, v in norms.items() if v > 0]
    if len(pts) < 2:
        raise DegenerateFitError("need at least two nonzero coefficients")
    x = np.array([p[0] for p in pts])
    y = np.array([p[1] for p in pts])
    if np.ptp(x) == 0:
        raise DegenerateFitError("all coefficients carry the same weight")
    slope = float(np.polyfit(x, y, 1)[0])
    slope = max(slope, 0.0)
    intercept = float(np.max(y - slope * x))
    violation = float(np.max(y - (intercept + slope * x)))
    return DecayFit(K_fit=math.exp(intercept), p_fit=slope, max_violation=max(violation, 0.0))


def fit_decay(F, z=0, zeta=0.0):
    return fit_decay_values(F.hzz_norms(z, zeta))


def variance_is_formal(F, z=0, zeta=0.0):
    """True when the fitted growth exponent is positive (the untruncated series may diverge)."""
    try:
        return fit_decay(F, z, zeta).p_fit > 0
    except DegenerateFitError:
        return False


def coefficient_filename(alpha):
    return f"coef_{alpha}.csv"


def write_chaos_field(F, directory, z=0, zeta=0.0):
    """One coefficient CSV per stored index plus ``index.csv`` (alpha, hzz_norm, weight_p2)."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, "index.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "hzz_norm", "weight_p2"])
        for a, g in F.items():
            write_csv(g, os.path.join(directory, coefficient_filename(a)))
            w.writerow([str(a), FLOAT_FMT.format(hzz_norm(g, z, zeta)), FLOAT_FMT.format(weight(a, -2))])


def read_chaos_field(directory, policy=None):
    """Load a directory written by :func:`write_chaos_field`."""
    with open(os.path.join(directory, "index.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    alphas = [MultiIndex.parse(r["alpha"]) for r in rows]
    coeffs = {a: read_csv(os.path.join(directory, coefficient_filename(a))) for a in alphas}
    if not coeffs:
        raise ValueError(f"{directory}: empty chaos field dump")
    grid = next(iter(coeffs.values())).grid
    if policy is None:
        policy = TruncationPolicy(max(1, max(a.support for a in alphas)),
                                  max(a.order for a in alphas))
    return ChaosField(policy, grid, coeffs)
