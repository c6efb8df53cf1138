"""Scenario description: measures, interface phase, grid policy, probes.

A scenario is the full problem statement for one experiment: the speed
measure, the resistance measure (possibly given through a conductivity), the
truncation box, the interface phase and the grid policy.  It is deliberately
declarative; the numerical objects (grids, discrete forms) are built from it
on demand.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import grids
from .errors import ArgumentError, ConfigError, DomainError
from .measures import (
    BarrierSpec,
    CantorMeasure,
    Conductivity,
    LebesgueMeasure,
    MonotoneMeasure,
    SumMeasure,
    TabulatedMeasure,
)

# ---------------------------------------------------------------------------
# interface phases


@dataclass(frozen=True)
class Separate:
    """Two reflecting components, no interface coupling (impermeable limit)."""

    name: str = field(default="separate", init=False)


@dataclass(frozen=True)
class Continuous:
    """Single origin node; the irreducible diffusion on the line (permeable limit)."""

    name: str = field(default="continuous", init=False)


@dataclass(frozen=True)
class Snapping:
    """Interface jump coupling; give exactly one of ``kappa`` or ``gamma_bar``.

    The interface bilinear block carries weight ``alpha*(1-alpha)*kappa``; the
    default ``alpha = 1/2`` gives the symmetric kappa/4 block, other values the
    skew interface.
    """

    kappa: float | None = None
    gamma_bar: float | None = None
    alpha: float = 0.5
    name: str = field(default="snapping", init=False)

    def __post_init__(self):
        if (self.kappa is None) == (self.gamma_bar is None):
            raise ArgumentError("snapping phase needs exactly one of kappa / gamma_bar")
        if self.kappa is not None and self.kappa <= 0:
            raise ArgumentError("kappa must be positive")
        if self.gamma_bar is not None and self.gamma_bar <= 0:
            raise ArgumentError("gamma_bar must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ArgumentError("skew parameter must lie in (0, 1)")

    @property
    def kappa_eff(self) -> float:
        return self.kappa if self.kappa is not None else 2.0 / self.gamma_bar

    @property
    def coupling_weight(self) -> float:
        if self.alpha == 0.5:
            return self.kappa_eff / 4.0
        return self.alpha * (1.0 - self.alpha) * self.kappa_eff


@dataclass(frozen=True)
class EpsBarrier:
    """Finite barrier of explicit width and resistance, spliced into the line."""

    barrier: BarrierSpec
    name: str = field(default="eps-barrier", init=False)


Phase = Separate | Continuous | Snapping | EpsBarrier


# ---------------------------------------------------------------------------
# measure specs


@dataclass(frozen=True)
class MeasureSpec:
    """Declarative measure description, instantiated on a concrete box.

    kinds: ``lebesgue`` (scale), ``lebesgue-plus-cantor`` (scale, level,
    support), ``conductivity`` (a :class:`Conductivity`; the measure is
    dx/a), ``table`` (a tabulated CDF).
    """

    kind: str = "lebesgue"
    scale: float = 1.0
    level: int = 20
    support: tuple[float, float] = (0.0, 1.0)
    conductivity: Conductivity | None = None
    table: TabulatedMeasure | None = None

    def build(self, lo: float, hi: float) -> MonotoneMeasure:
        if self.kind == "lebesgue":
            return LebesgueMeasure(lo, hi, scale=self.scale)
        if self.kind == "lebesgue-plus-cantor":
            slo, shi = self.support
            if not (lo <= slo < shi <= hi):
                raise DomainError("cantor support must lie inside the box")
            return SumMeasure(LebesgueMeasure(lo, hi, scale=self.scale),
                              CantorMeasure(lo, hi, level=self.level,
                                            support_lo=slo, support_hi=shi))
        if self.kind == "conductivity":
            if self.conductivity is None:
                raise ConfigError("conductivity measure spec without a conductivity")
            return self.conductivity.to_resistance(lo, hi)
        if self.kind == "table":
            if self.table is None:
                raise ConfigError("table measure spec without a table")
            if lo < self.table.lo - 1e-12 or hi > self.table.hi + 1e-12:
                raise DomainError("box exceeds the tabulated measure domain")
            return self.table
        raise ConfigError(f"unknown measure kind '{self.kind}'")


# ---------------------------------------------------------------------------
# probe / initial-condition functions


@dataclass(frozen=True)
class Probe:
    """Side-aware function on the split line."""

    name: str
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, x, side):
        return self.fn(np.asarray(x, dtype=float), np.asarray(side))

    def on_grid(self, grid: grids.Grid) -> np.ndarray:
        return self(grid.coords, grid.sides())


def _signed(x: np.ndarray, side: np.ndarray) -> np.ndarray:
    s = np.where(side != 0, side, np.sign(x))
    return s.astype(float)


def make_probe(spec) -> Probe:
    """Build a probe from a spec string or mapping.

    Strings: ``gauss``, ``odd-exp``, ``minus-side``, ``plus-side``, ``one``,
    ``box:<lo>:<hi>``, ``const:<v>``.
    """
    if isinstance(spec, Probe):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "indicator":
            return make_probe(f"box:{spec['lo']}:{spec['hi']}")
        if kind == "const":
            return make_probe(f"const:{spec['value']}")
        if kind in ("gaussian", "gauss"):
            return make_probe("gauss")
        if kind in ("odd-exp", "minus-side", "plus-side", "one"):
            return make_probe(kind)
        raise ConfigError(f"unknown probe spec {spec!r}")
    name = str(spec)
    if name == "gauss":
        return Probe(name, lambda x, s: np.exp(-x * x))
    if name == "odd-exp":
        return Probe(name, lambda x, s: _signed(x, s) * np.exp(-np.abs(x)))
    if name == "minus-side":
        return Probe(name, lambda x, s: (_signed(x, s) < 0).astype(float))
    if name == "plus-side":
        return Probe(name, lambda x, s: (_signed(x, s) > 0).astype(float))
    if name == "one":
        return Probe(name, lambda x, s: np.ones_like(x))
    if name.startswith("box:"):
        _, lo, hi = name.split(":")
        lo_f, hi_f = float(lo), float(hi)
        if not lo_f < hi_f:
            raise ConfigError(f"empty indicator box in probe '{name}'")
        return Probe(name, lambda x, s: ((x >= lo_f) & (x <= hi_f)).astype(float))
    if name.startswith("const:"):
        v = float(name.split(":", 1)[1])
        return Probe(name, lambda x, s: np.full_like(x, v))
    raise ConfigError(f"unknown probe '{name}'")


DEFAULT_PROBES = ("gauss", "box:0.5:1.5", "odd-exp")
DEFAULT_ALPHAS = (0.5, 1.0, 4.0)


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class Scenario:
    """Full problem description for one experiment."""

    speed: MeasureSpec = field(default_factory=MeasureSpec)
    resistance: MeasureSpec = field(default_factory=MeasureSpec)
    L: float = 5.0
    phase: Phase = field(default_factory=Continuous)
    grid_h: float | None = 0.01
    grid_n_half: int | None = None
    barrier_cells: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.L <= 0:
            raise ConfigError("box half-width L must be positive")
        if (self.grid_h is None) == (self.grid_n_half is None):
            raise ConfigError("give exactly one of grid_h / grid_n_half")
        if isinstance(self.phase, EpsBarrier):
            if self.phase.barrier.epsilon >= self.L:
                raise ConfigError(
                    f"barrier half-width {self.phase.barrier.epsilon} must be smaller "
                    f"than the box half-width L={self.L}")
            if self.barrier_cells < 1:
                raise ConfigError("barrier_cells must be >= 1")

    def speed_measure(self, lo: float | None = None, hi: float | None = None) -> MonotoneMeasure:
        lo = -self.L if lo is None else lo
        hi = self.L if hi is None else hi
        return self.speed.build(lo, hi)

    def resistance_measure(self, lo: float | None = None, hi: float | None = None) -> MonotoneMeasure:
        lo = -self.L if lo is None else lo
        hi = self.L if hi is None else hi
        return self.resistance.build(lo, hi)

    def build_grid(self) -> grids.Grid:
        """Grid matching the phase: doubled origin for split-line phases,
        barrier endpoints inserted as nodes for the finite-barrier phase."""
        if isinstance(self.phase, (Separate, Snapping)):
            origin = grids.DOUBLED
            extra = ()
        elif isinstance(self.phase, Continuous):
            origin = grids.SINGLE
            extra = ()
        else:
            origin = grids.SINGLE
            eps = self.phase.barrier.epsilon
            extra = np.concatenate([[-eps, eps],
                                    grids.barrier_interior_nodes(eps, self.barrier_cells)])
        return grids.make_grid(self.L, h=self.grid_h, n_half=self.grid_n_half,
                               origin=origin, extra_nodes=extra)

    def with_phase(self, phase: Phase) -> "Scenario":
        return Scenario(speed=self.speed, resistance=self.resistance, L=self.L,
                        phase=phase, grid_h=self.grid_h, grid_n_half=self.grid_n_half,
                        barrier_cells=self.barrier_cells, seed=self.seed)


def brownian_scenario(L: float = 5.0, phase: Phase | None = None,
                      grid_h: float = 0.01, **kw) -> Scenario:
    """Lebesgue speed and resistance: the classical Brownian setting."""
    return Scenario(speed=MeasureSpec("lebesgue"), resistance=MeasureSpec("lebesgue"),
                    L=L, phase=phase if phase is not None else Continuous(),
                    grid_h=grid_h, **kw)
