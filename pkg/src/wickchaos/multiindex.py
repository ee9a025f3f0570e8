"""Multi-indices of the chaos index set and the combinatorics built on them.

A multi-index is a finitely supported sequence ``alpha = (alpha_1, alpha_2, ...)``
of non-negative integers.  Coordinates are 1-based in the mathematical sense;
:class:`MultiIndex` stores the canonical entry tuple with trailing zeros removed.
"""
import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import CapacityError, MissingSeedError

DEFAULT_CAPACITY = 200_000
CATALAN_CAP = 2000


class MultiIndex:
    """Immutable, hashable multi-index in canonical form."""

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries=()):
        if isinstance(entries, MultiIndex):
            entries = entries._entries
        values = []
        for a in entries:
            if int(a) != a or a < 0:
                raise ValueError(f"multi-index entries must be non-negative integers, got {a!r}")
            values.append(int(a))
        while values and values[-1] == 0:
            values.pop()
        self._entries = tuple(values)
        self._hash = hash(self._entries)

    @classmethod
    def zero(cls):
        return cls(())

    @classmethod
    def unit(cls, k):
        """The unit index eps_k (``k >= 1``)."""
        if k < 1:
            raise ValueError("unit indices are 1-based")
        return cls((0,) * (k - 1) + (1,))

    @classmethod
    def parse(cls, text):
        """Inverse of ``str``: ``"(1,0,2)" -> MultiIndex((1, 0, 2))``; ``"()"`` is zero."""
        s = text.strip()
        if not (s.startswith("(") and s.endswith(")")):
            raise ValueError(f"malformed multi-index {text!r}")
        body = s[1:-1].strip()
        if not body:
            return cls(())
        try:
            parts = [int(p) for p in body.split(",") if p.strip() != ""]
        except ValueError:
            raise ValueError(f"malformed multi-index {text!r}") from None
        return cls(parts)

    @property
    def entries(self):
        return self._entries

    @property
    def order(self):
        """Length ``|alpha|``."""
        return sum(self._entries)

    @property
    def support(self):
        """Index of the last nonzero coordinate (0 for the zero index)."""
        return len(self._entries)

    def coord(self, k):
        """1-based coordinate ``alpha_k``."""
        return self._entries[k - 1] if 1 <= k <= len(self._entries) else 0

    def is_zero(self):
        return not self._entries

    def factorial(self):
        """``alpha! = prod alpha_n!`` as an exact integer."""
        out = 1
        for a in self._entries:
            out *= math.factorial(a)
        return out

    def le(self, other):
        """Componentwise partial order ``self <= other``."""
        other = as_multiindex(other)
        if len(self._entries) > len(other._entries):
            return False
        return all(a <= b for a, b in zip(self._entries, other._entries))

    def sort_key(self):
        # graded, then reverse-lexicographic within a grade
        return (self.order, tuple(-a for a in self._entries))

    def __add__(self, other):
        other = as_multiindex(other)
        n = max(len(self._entries), len(other._entries))
        return MultiIndex(self.coord(i) + other.coord(i) for i in range(1, n + 1))

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def __eq__(self, other):
        if isinstance(other, MultiIndex):
            return self._entries == other._entries
        if isinstance(other, tuple):
            return self._entries == MultiIndex(other)._entries
        return NotImplemented

    def __hash__(self):
        return self._hash

    def __str__(self):
        return "(" + ",".join(str(a) for a in self._entries) + ")"

    def __repr__(self):
        return f"MultiIndex({self._entries!r})"


def as_multiindex(value):
    if isinstance(value, MultiIndex):
        return value
    if isinstance(value, str):
        return MultiIndex.parse(value)
    return MultiIndex(value)


@dataclass(frozen=True)
class TruncationPolicy:
    """Finite proxy for the index set: support in ``1..max_dim`` and ``|alpha| <= max_order``."""

    max_dim: int
    max_order: int

    def __post_init__(self):
        if int(self.max_dim) != self.max_dim or self.max_dim < 1:
            raise ValueError("max_dim must be a positive integer")
        if int(self.max_order) != self.max_order or self.max_order < 0:
            raise ValueError("max_order must be a non-negative integer")

    def size(self):
        return math.comb(self.max_order + self.max_dim, self.max_dim)

    def admits(self, alpha):
        alpha = as_multiindex(alpha)
        return alpha.support <= self.max_dim and alpha.order <= self.max_order

    def enumerate(self, capacity=DEFAULT_CAPACITY):
        return enumerate_indices(self, capacity=capacity)


def _compositions(total, parts):
    # descending lexicographic order
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_indices(policy, capacity=DEFAULT_CAPACITY):
    """All indices admitted by ``policy`` in graded reverse-lexicographic order."""
    size = policy.size()
    if size > capacity:
        raise CapacityError(
            f"index set of size {size} exceeds capacity {capacity} "
            f"(K={policy.max_dim}, N={policy.max_order})"
        )
    out = []
    for m in range(policy.max_order + 1):
        out.extend(MultiIndex(c) for c in _compositions(m, policy.max_dim))
    return out


def subtract(alpha, beta):
    """``alpha - beta`` if ``beta <= alpha`` componentwise, otherwise ``None``."""
    alpha, beta = as_multiindex(alpha), as_multiindex(beta)
    if not beta.le(alpha):
        return None
    return MultiIndex(alpha.coord(i) - beta.coord(i) for i in range(1, alpha.support + 1))


def sub_indices(alpha):
    """Every ``gamma <= alpha`` (including zero and ``alpha`` itself)."""
    alpha = as_multiindex(alpha)
    for c in itertools.product(*(range(a + 1) for a in alpha.entries)):
        yield MultiIndex(c)


def log_weight(alpha):
    """``log (2N)^alpha = sum alpha_n log(2n)``."""
    alpha = as_multiindex(alpha)
    return math.fsum(a * math.log(2 * n) for n, a in enumerate(alpha.entries, start=1) if a)


def weight(alpha, r):
    """Kondratiev weight ``(2N)^(r alpha) = prod (2n)^(r alpha_n)``, evaluated in log space.

    Overflow returns ``inf`` with a ``RuntimeWarning`` instead of wrapping.
    """
    s = r * log_weight(alpha)
    try:
        return math.exp(s)
    except OverflowError:
        warnings.warn(f"weight overflow for alpha={alpha}, r={r}", RuntimeWarning, stacklevel=2)
        return math.inf


def factorial_ratio(alpha):
    """Multinomial coefficient ``|alpha|! / alpha!``."""
    alpha = as_multiindex(alpha)
    n = alpha.order
    if n <= 170:
        return float(math.factorial(n) // alpha.factorial())
    return math.exp(math.lgamma(n + 1) - sum(math.lgamma(a + 1) for a in alpha.entries))


def factorial_bound_holds(alpha):
    """Check ``|alpha|!/alpha! <= (2N)^(2 alpha)`` in log space."""
    alpha = as_multiindex(alpha)
    lhs = math.lgamma(alpha.order + 1) - sum(math.lgamma(a + 1) for a in alpha.entries)
    return lhs <= 2.0 * log_weight(alpha) + 1e-12


def catalan(n, cap=CATALAN_CAP):
    """Catalan number by the closed form ``C(2n, n) / (n + 1)``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > cap:
        raise OverflowError(f"catalan({n}) beyond configured cap {cap}")
    return math.comb(2 * n, n) // (n + 1)


def catalan_recursive(n, cap=CATALAN_CAP):
    """Catalan number by the convolution recurrence, for cross-checking :func:`catalan`."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n > cap:
        raise OverflowError(f"catalan({n}) beyond configured cap {cap}")
    c = [1]
    for m in range(1, n + 1):
        c.append(sum(c[k] * c[m - 1 - k] for k in range(m)))
    return c[n]


def _check_seed(seed, alpha):
    if alpha.order < 1:
        raise ValueError("R is defined for |alpha| >= 1 only")
    for k, a in enumerate(alpha.entries, start=1):
        if a and k not in seed:
            raise MissingSeedError(k)


def r_recursive(seed, alpha, cache=None):
    """Evaluate ``R_alpha = sum_{0 < gamma < alpha} R_gamma R_{alpha-gamma}`` by memoised recursion.

    ``seed`` maps the 1-based coordinate ``k`` to ``R_{eps_k}``.  Passing the same
    ``cache`` dict to several calls with one seed shares the memo between them.
    """
    alpha = as_multiindex(alpha)
    _check_seed(seed, alpha)
    memo = {} if cache is None else cache

    def rec(beta):
        if beta in memo:
            return memo[beta]
        if beta.order == 1:
            val = float(seed[beta.support])
        else:
            val = 0.0
            for gamma in sub_indices(beta):
                if gamma.is_zero() or gamma == beta:
                    continue
                val += rec(gamma) * rec(subtract(beta, gamma))
        memo[beta] = val
        return val

    return rec(alpha)


def r_closed(seed, alpha):
    """Closed form ``R_alpha = C(2n-2, n-1)/n * n!/alpha! * prod R_{eps_k}^alpha_k`` with ``n = |alpha|``."""
    alpha = as_multiindex(alpha)
    _check_seed(seed, alpha)
    n = alpha.order
    prod = 1.0
    for k, a in enumerate(alpha.entries, start=1):
        if a:
            prod *= float(seed[k]) ** a
    return catalan(n - 1) * factorial_ratio(alpha) * prod


def complete_homogeneous_sums(x, max_order):
    """``h_m(x_1..x_K)`` for ``m = 0..max_order``.

    ``sum_m h_m`` equals ``sum_alpha prod x_n^alpha_n`` over the truncated index set,
    which is how the weighted series below avoid enumerating ``C(N+K, K)`` indices.
    """
    h = np.zeros(max_order + 1)
    h[0] = 1.0
    for xn in x:
        for m in range(1, max_order + 1):
            h[m] += xn * h[m - 1]
    return h


def kondratiev_series(p, policy):
    """Partial sum of ``sum_alpha (2N)^(-p alpha)`` over the indices admitted by ``policy``."""
    x = (2.0 * np.arange(1, policy.max_dim + 1)) ** (-float(p))
    return float(math.fsum(complete_homogeneous_sums(x, policy.max_order)))


def geometric_weight_sum(c, q, policy):
    """Partial sum of ``sum_alpha c^|alpha| (2N)^(-q alpha)``."""
    x = float(c) * (2.0 * np.arange(1, policy.max_dim + 1)) ** (-float(q))
    return float(math.fsum(complete_homogeneous_sums(x, policy.max_order)))


def geometric_weight_tails(c, q, policy):
    """Per-grade contributions of :func:`geometric_weight_sum` (grade ``m`` at position ``m``)."""
    x = float(c) * (2.0 * np.arange(1, policy.max_dim + 1)) ** (-float(q))
    return complete_homogeneous_sums(x, policy.max_order)


def graded_sums(values, q):
    """Group ``sum values[alpha] * (2N)^(-q alpha)`` by grade ``|alpha|``.

    Returns a list whose ``m``-th entry is the grade-``m`` contribution.
    """
    top = max((as_multiindex(a).order for a in values), default=0)
    out = [0.0] * (top + 1)
    for a, v in values.items():
        a = as_multiindex(a)
        out[a.order] += v * weight(a, -q)
    return out
