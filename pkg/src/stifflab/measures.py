"""Monotone measures, conductivities and interface barriers.

Everything here is CDF-first: a measure is represented by its cumulative
distribution function on a closed interval, anchored so that ``cdf(lo) == 0``.
Densities (Lebesgue, reciprocal conductivity) are special cases; singular
parts (the Cantor staircase) are first-class.  Cell masses used by the grid
assembly are plain CDF differences, so refinement additivity is telescopic.

Conventions:

* ``cdf(x)`` returns the mass of ``(lo, min(x, hi)]``; queries are clipped to
  the domain.
* All measures are atomless within evaluation tolerance: single-point queries
  have zero mass.
* A resistance measure anchored at the origin induces the scale function
  ``s(x) = cdf(x) - cdf(0)``; no separate scale object is kept.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DomainError, InvariantViolation

__all__ = [
    "MonotoneMeasure",
    "LebesgueMeasure",
    "UniformDensityMeasure",
    "CantorMeasure",
    "SumMeasure",
    "TabulatedMeasure",
    "PowerCuspResistance",
    "ZeroMeasure",
    "Conductivity",
    "conductivity_family",
    "BarrierSpec",
    "lejay_barrier",
    "build_lambda_eps",
    "measure_increments",
    "sup_window",
    "cantor_cdf",
]


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class MonotoneMeasure:
    """A nonnegative Radon measure on ``[lo, hi]`` given by its CDF.

    Subclasses implement ``_cdf_raw`` on clipped inputs; the public ``cdf``
    handles clipping and scalar/array polymorphism.
    """

    kind: str = "abstract"

    def __init__(self, lo: float, hi: float):
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise ArgumentError(f"measure domain must be a finite interval, got [{lo}, {hi}]")
        self.lo = float(lo)
        self.hi = float(hi)

    @property
    def domain(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    @property
    def mass(self) -> float:
        return float(self.cdf(self.hi))

    def cdf(self, x):
        arr = _as_array(x)
        out = self._cdf_raw(np.clip(arr, self.lo, self.hi))
        return float(out) if np.isscalar(x) or arr.ndim == 0 else out

    def _cdf_raw(self, x: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def increments(self, nodes) -> np.ndarray:
        """Cell masses ``cdf(x[i+1]) - cdf(x[i])`` over a sorted node vector."""
        return measure_increments(self, nodes)

    def shifted(self, dx: float) -> "ShiftedMeasure":
        return ShiftedMeasure(self, dx)


class LebesgueMeasure(MonotoneMeasure):
    """``scale * dx`` on an interval; the default speed and resistance measure."""

    kind = "lebesgue"

    def __init__(self, lo: float, hi: float, scale: float = 1.0):
        super().__init__(lo, hi)
        if scale <= 0:
            raise ArgumentError("Lebesgue scale must be positive")
        self.scale = float(scale)

    def _cdf_raw(self, x):
        return self.scale * (x - self.lo)


class UniformDensityMeasure(LebesgueMeasure):
    """Alias for a constant-density measure, used for flat barrier resistances."""

    kind = "uniform-density"


class ZeroMeasure(MonotoneMeasure):
    """The zero measure.

    Not a member of the fully-supported class; it exists only as the explicit
    empty-barrier sentinel for the permeable limit.
    """

    kind = "zero"

    def _cdf_raw(self, x):
        return np.zeros_like(x)


def cantor_cdf(x, level: int = 20):
    """Cantor staircase on [0,1], truncated after ``level`` ternary digits.

    The truncation closes the recursion with the linear seed ``c0(t) = t``, so
    the result differs from the exact staircase by at most ``2**-level``.
    Inputs outside [0,1] are clipped.
    """
    if level < 1:
        raise ArgumentError("cantor level must be >= 1")
    t = np.clip(_as_array(x), 0.0, 1.0).copy()
    out = np.zeros_like(t)
    factor = 1.0
    active = np.ones(t.shape, dtype=bool)
    for _ in range(level):
        if not active.any():
            break
        d = np.floor(3.0 * t).astype(np.int64)
        d = np.minimum(d, 2)  # t == 1.0 maps to digit 2 branch
        mid = active & (d == 1)
        out[mid] += 0.5 * factor
        active = active & ~mid
        hi = active & (d == 2)
        out[hi] += 0.5 * factor
        t = np.where(active, 3.0 * t - np.where(hi, 2.0, 0.0), t)
        factor *= 0.5
    out[active] += factor * t[active]
    return out


class CantorMeasure(MonotoneMeasure):
    """Unit-mass Cantor measure supported on ``[support_lo, support_lo + width]``.

    Approximation depth is configurable; the CDF error bound ``2**-level`` is
    exposed for reports.
    """

    kind = "cantor-sum"

    def __init__(self, lo: float, hi: float, level: int = 20,
                 support_lo: float = 0.0, support_hi: float = 1.0):
        super().__init__(lo, hi)
        if not (lo <= support_lo < support_hi <= hi):
            raise DomainError("Cantor support must sit inside the measure domain")
        if not (1 <= level <= 64):
            raise ArgumentError("cantor level must be in [1, 64]")
        self.level = int(level)
        self.support_lo = float(support_lo)
        self.support_hi = float(support_hi)

    @property
    def cdf_error_bound(self) -> float:
        return 2.0 ** (-self.level)

    def _cdf_raw(self, x):
        t = (x - self.support_lo) / (self.support_hi - self.support_lo)
        return cantor_cdf(t, self.level)


class SumMeasure(MonotoneMeasure):
    """Sum of measures; domain is the hull of the component domains."""

    kind = "sum"

    def __init__(self, *parts: MonotoneMeasure):
        if not parts:
            raise ArgumentError("SumMeasure needs at least one part")
        super().__init__(min(p.lo for p in parts), max(p.hi for p in parts))
        self.parts = tuple(parts)

    def _cdf_raw(self, x):
        out = np.zeros_like(x)
        for p in self.parts:
            out += p._cdf_raw(np.clip(x, p.lo, p.hi))
        return out


class ShiftedMeasure(MonotoneMeasure):
    """Image of a measure under translation by ``dx``."""

    kind = "shifted"

    def __init__(self, base: MonotoneMeasure, dx: float):
        super().__init__(base.lo + dx, base.hi + dx)
        self.base = base
        self.dx = float(dx)

    def _cdf_raw(self, x):
        return self.base._cdf_raw(np.clip(x - self.dx, self.base.lo, self.base.hi))


class TabulatedMeasure(MonotoneMeasure):
    """Piecewise-linear CDF through ``(x, cdf)`` samples.

    Validation is strict: abscissae strictly increasing, values nondecreasing.
    The anchor value is subtracted, so tables need not start at zero.
    """

    kind = "tabulated"

    def __init__(self, xs: Sequence[float], values: Sequence[float]):
        xs = _as_array(xs)
        values = _as_array(values)
        if xs.ndim != 1 or xs.shape != values.shape or xs.size < 2:
            raise ArgumentError("tabulated measure needs two equal-length columns with >= 2 rows")
        if not np.all(np.diff(xs) > 0):
            raise ArgumentError("tabulated measure abscissae must be strictly increasing")
        if np.any(np.diff(values) < 0):
            raise ArgumentError("tabulated measure cdf column must be nondecreasing")
        super().__init__(xs[0], xs[-1])
        self.xs = xs
        self.values = values - values[0]

    @classmethod
    def from_csv(cls, path) -> "TabulatedMeasure":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 2:
            raise ArgumentError(f"{path}: expected two columns (x, cdf)")
        return cls(data[:, 0], data[:, 1])

    def _cdf_raw(self, x):
        return np.interp(x, self.xs, self.values)


class PowerCuspResistance(MonotoneMeasure):
    """Resistance measure ``dx / a(x)`` for the cusp conductivity ``a = |x|^beta ∧ 1``.

    The reciprocal has an integrable singularity at 0; the CDF uses the local
    closed-form antiderivative ``x^(1-beta)/(1-beta)``, so cells touching the
    cusp are exact rather than quadrature-approximate.
    """

    kind = "conductivity-reciprocal"

    def __init__(self, lo: float, hi: float, beta: float):
        if not 0.0 < beta < 1.0:
            raise ArgumentError(f"power-cusp exponent must be in (0, 1), got {beta}")
        super().__init__(lo, hi)
        self.beta = float(beta)

    def _antiderivative(self, x):
        # odd primitive of 1/(|x|^beta ∧ 1), anchored at 0
        ax = np.abs(x)
        b = self.beta
        inner = ax ** (1.0 - b) / (1.0 - b)
        outer = 1.0 / (1.0 - b) + (ax - 1.0)
        return np.sign(x) * np.where(ax <= 1.0, inner, outer)

    def _cdf_raw(self, x):
        return self._antiderivative(x) - self._antiderivative(self.lo)


class ReciprocalTableMeasure(MonotoneMeasure):
    """``dx / a`` for a piecewise-constant conductivity table; segmentwise exact."""

    kind = "conductivity-reciprocal"

    def __init__(self, breakpoints: Sequence[float], values: Sequence[float]):
        bp = _as_array(breakpoints)
        vals = _as_array(values)
        if bp.ndim != 1 or bp.size < 2 or vals.size != bp.size - 1:
            raise ArgumentError("conductivity table needs n+1 breakpoints for n values")
        if not np.all(np.diff(bp) > 0):
            raise ArgumentError("conductivity breakpoints must be strictly increasing")
        if np.any(vals <= 0):
            raise ArgumentError("conductivity values must be positive")
        super().__init__(bp[0], bp[-1])
        self.breakpoints = bp
        self.values = vals
        # cumulative resistance at each breakpoint
        self._cum = np.concatenate([[0.0], np.cumsum(np.diff(bp) / vals)])

    def _cdf_raw(self, x):
        idx = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0,
                      self.values.size - 1)
        return self._cum[idx] + (x - self.breakpoints[idx]) / self.values[idx]


class QuadReciprocalMeasure(MonotoneMeasure):
    """``dx / a`` for an arbitrary positive callable, via adaptive quadrature.

    Per-cell relative tolerance 1e-10; breakpoint CDF values are cached on a
    lazily grown sorted table so repeated grid queries stay cheap.
    """

    kind = "conductivity-reciprocal"

    def __init__(self, lo: float, hi: float, fn: Callable[[np.ndarray], np.ndarray]):
        super().__init__(lo, hi)
        self.fn = fn
        self._xs = [self.lo]
        self._cs = [0.0]

    def _integrate(self, a: float, b: float) -> float:
        from scipy.integrate import quad

        val, _ = quad(lambda t: 1.0 / float(self.fn(np.asarray(t))), a, b,
                      epsrel=1e-10, epsabs=0.0, limit=200)
        return val

    def _cdf_scalar(self, x: float) -> float:
        import bisect

        i = bisect.bisect_left(self._xs, x)
        if i < len(self._xs) and self._xs[i] == x:
            return self._cs[i]
        c = self._cs[i - 1] + self._integrate(self._xs[i - 1], x)
        self._xs.insert(i, x)
        self._cs.insert(i, c)
        return c

    def _cdf_raw(self, x):
        flat = np.atleast_1d(x).ravel()
        out = np.array([self._cdf_scalar(float(v)) for v in flat])
        return out.reshape(np.shape(x))


@dataclass(frozen=True)
class Conductivity:
    """Positive thermal conductivity with declared essential bounds.

    ``delta`` may be None for families (like the power cusp) whose lower bound
    is only positive away from a pathological point; in that case the bound is
    grid-dependent and reported by ``bounds_on``.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    delta: float | None
    C: float
    label: str = "custom"

    def __call__(self, x):
        return self.fn(_as_array(x))

    def bounds_on(self, xs) -> tuple[float, float]:
        vals = self(_as_array(xs))
        lo, hi = float(np.min(vals)), float(np.max(vals))
        if lo <= 0.0:
            raise InvariantViolation(f"conductivity '{self.label}' is nonpositive on the grid")
        if hi > self.C * (1.0 + 1e-12):
            raise InvariantViolation(f"conductivity '{self.label}' exceeds its declared bound {self.C}")
        if self.delta is not None and lo < self.delta * (1.0 - 1e-12):
            raise InvariantViolation(f"conductivity '{self.label}' drops below its declared bound {self.delta}")
        return lo, hi

    def to_resistance(self, lo: float, hi: float) -> MonotoneMeasure:
        """Resistance measure ``dx / a`` on [lo, hi]."""
        if self.label == "const-one":
            return LebesgueMeasure(lo, hi)
        if self.label.startswith("power-cusp"):
            return PowerCuspResistance(lo, hi, beta=self.__dict__["beta"])
        table = self.__dict__.get("_table")
        if table is not None:
            if lo < table.lo - 1e-12 or hi > table.hi + 1e-12:
                raise DomainError("requested domain exceeds the conductivity table")
            return _WindowedMeasure(table, lo, hi)
        return QuadReciprocalMeasure(lo, hi, self.fn)


def conductivity_family(kind: str, **params) -> Conductivity:
    """Build one of the named conductivity families.

    ``const-one``: a ≡ 1 (the Brownian case).
    ``power-cusp``: a(x) = |x|^beta ∧ 1 with 0 < beta < 1.
    ``custom-table``: piecewise constant; params ``breakpoints`` (n+1) and
    ``values`` (n).
    """
    if kind == "const-one":
        return Conductivity(fn=lambda x: np.ones_like(_as_array(x)), delta=1.0, C=1.0,
                            label="const-one")
    if kind == "power-cusp":
        beta = params.get("beta")
        if beta is None or not 0.0 < beta < 1.0:
            raise ArgumentError(f"power-cusp requires beta in (0, 1), got {beta}")
        cond = Conductivity(fn=lambda x, b=beta: np.minimum(np.abs(_as_array(x)) ** b, 1.0),
                            delta=None, C=1.0, label=f"power-cusp({beta})")
        object.__setattr__(cond, "beta", float(beta))
        return cond
    if kind == "custom-table":
        bp = _as_array(params.get("breakpoints", []))
        vals = _as_array(params.get("values", []))
        table = ReciprocalTableMeasure(bp, vals)  # validates

        def fn(x, bp=bp, vals=vals):
            idx = np.clip(np.searchsorted(bp, _as_array(x), side="right") - 1, 0, vals.size - 1)
            return vals[idx]

        cond = Conductivity(fn=fn, delta=float(np.min(vals)), C=float(np.max(vals)),
                            label="custom-table")
        object.__setattr__(cond, "_table", table)
        return cond
    raise ArgumentError(f"unknown conductivity kind '{kind}'")


class _WindowedMeasure(MonotoneMeasure):
    """Restriction of a measure to a subinterval, re-anchored at its left end."""

    kind = "windowed"

    def __init__(self, base: MonotoneMeasure, lo: float, hi: float):
        super().__init__(lo, hi)
        self.base = base
        self._off = base.cdf(lo)

    def _cdf_raw(self, x):
        return self.base._cdf_raw(np.clip(x, self.base.lo, self.base.hi)) - self._off


@dataclass(frozen=True)
class BarrierSpec:
    """A finite barrier: half-width and the resistance it carries.

    ``gamma`` lives on ``(-epsilon, epsilon)`` and must be finite and atomless.
    The zero measure is allowed as the explicit empty-barrier sentinel.
    """

    epsilon: float
    gamma: MonotoneMeasure

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ArgumentError("barrier half-width must be positive")
        if not isinstance(self.gamma, ZeroMeasure):
            if abs(self.gamma.lo + self.epsilon) > 1e-12 * max(1.0, self.epsilon) or \
               abs(self.gamma.hi - self.epsilon) > 1e-12 * max(1.0, self.epsilon):
                raise DomainError("barrier measure must live on (-epsilon, epsilon)")
        if not np.isfinite(self.gamma.mass):
            raise ArgumentError("barrier resistance must be finite")

    @property
    def total_resistance(self) -> float:
        return self.gamma.mass


def lejay_barrier(epsilon: float, kappa: float, alpha_exp: float) -> BarrierSpec:
    """Flat barrier with density ``(kappa * epsilon) ** alpha_exp`` on the slab.

    ``alpha_exp = -1`` reproduces the classical ``1/(kappa*eps)`` profile with
    total resistance ``2/kappa`` independent of the width.
    """
    if kappa <= 0:
        raise ArgumentError("kappa must be positive")
    density = (kappa * epsilon) ** alpha_exp
    return BarrierSpec(epsilon, UniformDensityMeasure(-epsilon, epsilon, scale=density))


class LambdaEpsMeasure(MonotoneMeasure):
    """Resistance with a finite barrier spliced in at the origin.

    Outside the slab it is the base resistance transported away from 0 by the
    half-width; inside it is the barrier resistance.  Total mass equals base
    mass plus the barrier's total resistance.
    """

    kind = "lambda-eps"

    def __init__(self, lam: MonotoneMeasure, barrier: BarrierSpec):
        eps = barrier.epsilon
        if not (lam.lo < 0.0 < lam.hi):
            raise DomainError("base resistance must straddle the origin")
        if eps >= min(-lam.lo, lam.hi):
            raise DomainError(
                f"barrier half-width {eps} does not fit inside the box [{lam.lo}, {lam.hi}]")
        super().__init__(lam.lo - eps, lam.hi + eps)
        self.lam = lam
        self.barrier = barrier
        self._c0 = lam.cdf(0.0)

    def _cdf_raw(self, x):
        eps = self.barrier.epsilon
        left = self.lam._cdf_raw(np.clip(x + eps, self.lam.lo, self.lam.hi))
        inner = self._c0 + self.barrier.gamma.cdf(np.clip(x, -eps, eps))
        right = self.lam._cdf_raw(np.clip(x - eps, self.lam.lo, self.lam.hi)) \
            + self.barrier.total_resistance
        return np.where(x <= -eps, left, np.where(x < eps, inner, right))


def build_lambda_eps(lam: MonotoneMeasure, barrier: BarrierSpec) -> LambdaEpsMeasure:
    """Splice a barrier into a base resistance measure."""
    return LambdaEpsMeasure(lam, barrier)


def measure_increments(mu: MonotoneMeasure, nodes) -> np.ndarray:
    """Cell masses of ``mu`` over a strictly increasing node vector."""
    xs = _as_array(nodes)
    if xs.ndim != 1 or xs.size < 2:
        raise ArgumentError("need at least two nodes")
    if not np.all(np.diff(xs) > 0):
        raise ArgumentError("nodes must be strictly increasing")
    tol = 1e-9 * max(1.0, abs(mu.lo), abs(mu.hi))
    if xs[0] < mu.lo - tol or xs[-1] > mu.hi + tol:
        raise DomainError(
            f"nodes [{xs[0]}, {xs[-1]}] fall outside the measure domain [{mu.lo}, {mu.hi}]")
    inc = np.diff(mu.cdf(xs))
    neg = inc < 0
    if neg.any():
        worst = float(inc.min())
        if worst < -1e-12 * max(1.0, mu.mass):
            raise InvariantViolation(f"negative increment {worst} from a monotone CDF")
        inc = np.where(neg, 0.0, inc)
    return inc


def sup_window(mu: MonotoneMeasure, eps: float, n_probes: int = 4096) -> float:
    """Numerical sup over x of ``mu([x, x + eps])``; a report quantity only."""
    anchors = np.linspace(mu.lo, mu.hi - min(eps, mu.hi - mu.lo), n_probes)
    vals = mu.cdf(np.minimum(anchors + eps, mu.hi)) - mu.cdf(anchors)
    return float(np.max(vals))
