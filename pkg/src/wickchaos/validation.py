"""Input checks shared by the estimator facade."""
import numpy as np

from .multiindex import as_multiindex
from .wick import ChaosField


def check_chaos_field(X, policy=None, grid=None):
    """Return ``X`` if it is a :class:`ChaosField` compatible with ``policy`` and ``grid``."""
    if not isinstance(X, ChaosField):
        raise TypeError(f"expected a ChaosField, got {type(X).__name__}")
    if policy is not None:
        bad = [str(a) for a in X.keys() if not policy.admits(a)]
        if bad:
            raise ValueError(f"coefficients outside the truncation policy: {', '.join(bad)}")
    if grid is not None and X.grid != grid:
        raise ValueError("chaos field lives on a different grid")
    return X


def check_norm_table(X):
    """Normalise ``{alpha: norm}`` (or a ChaosField's norms) into positive finite floats."""
    out = {}
    for k, v in dict(X).items():
        v = float(v)
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"norm for {k} must be finite and non-negative, got {v}")
        out[as_multiindex(k)] = v
    if not out:
        raise ValueError("empty norm table")
    return out


def check_time(t, times, rtol=1e-12):
    """Index of the stored time ``t`` on a solution time grid."""
    times = np.asarray(times)
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > rtol * max(1.0, abs(t)):
        raise ValueError(f"t={t} is not a stored time (nearest {times[i]})")
    return i
