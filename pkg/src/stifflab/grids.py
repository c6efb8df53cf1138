"""Ordered grids on a truncated box, with an optionally doubled origin.

A doubled origin stores two logical nodes at coordinate 0: the left one plays
0- and the right one 0+.  Outer boundary nodes always carry reflecting
(zero-flux) closure; that falls out of the node-centered finite volumes in
:mod:`stifflab.assembly` without extra bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, ShapeError

SINGLE = "single-zero"
DOUBLED = "doubled-zero"
NONE = "no-origin"


@dataclass(frozen=True)
class Grid:
    coords: np.ndarray
    origin_mode: str
    i0m: int | None = None
    i0p: int | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if coords.ndim != 1 or coords.size < 1:
            raise ArgumentError("grid needs at least one node")
        d = np.diff(coords)
        if self.origin_mode == DOUBLED:
            if self.i0m is None or self.i0p != self.i0m + 1:
                raise ArgumentError("doubled origin must be two consecutive indices")
            if coords[self.i0m] != 0.0 or coords[self.i0p] != 0.0:
                raise ArgumentError("doubled origin nodes must sit at coordinate 0")
            ok = d > 0
            ok[self.i0m] = d[self.i0m] == 0.0
            if not ok.all():
                raise ArgumentError("grid nodes must be strictly increasing away from 0-/0+")
        else:
            if not (d > 0).all():
                raise ArgumentError("grid nodes must be strictly increasing")
            if self.origin_mode == SINGLE:
                if self.i0m is None or self.i0m != self.i0p or coords[self.i0m] != 0.0:
                    raise ArgumentError("single-zero grid must point at its origin node")
            elif self.origin_mode == NONE:
                if self.i0m is not None or self.i0p is not None:
                    raise ArgumentError("no-origin grid cannot carry origin indices")
            else:
                raise ArgumentError(f"unknown origin mode '{self.origin_mode}'")

    @property
    def n(self) -> int:
        return self.coords.size

    @property
    def doubled(self) -> bool:
        return self.origin_mode == DOUBLED

    @property
    def box(self) -> tuple[float, float]:
        return (float(self.coords[0]), float(self.coords[-1]))

    def sides(self) -> np.ndarray:
        """Side tag per node: -1 on the minus component, +1 on plus, 0 at a single origin."""
        s = np.sign(self.coords).astype(np.int8)
        if self.doubled:
            s[self.i0m] = -1
            s[self.i0p] = 1
        return s

    def coupling_gap(self) -> int:
        """Index of the zero-length gap between 0- and 0+."""
        if not self.doubled:
            raise ShapeError("coupling gap only exists on a doubled-origin grid")
        return self.i0m

    def index_of(self, x: float, side: int = 0) -> int:
        """Node index holding coordinate ``x`` (exact match up to 1e-12)."""
        if x == 0.0 and self.i0m is not None:
            if self.doubled:
                if side < 0:
                    return self.i0m
                if side > 0:
                    return self.i0p
                raise ArgumentError("coordinate 0 on a doubled grid needs a side")
            return self.i0m
        i = int(np.searchsorted(self.coords, x))
        for j in (i - 1, i, i + 1):
            if 0 <= j < self.n and abs(self.coords[j] - x) <= 1e-12 * max(1.0, abs(x)):
                return j
        raise ArgumentError(f"coordinate {x} is not a grid node")

    def merged(self) -> "Grid":
        """Grid with the doubled origin collapsed to a single node."""
        if not self.doubled:
            raise ShapeError("only a doubled-origin grid can be merged")
        coords = np.delete(self.coords, self.i0p)
        return Grid(coords, SINGLE, self.i0m, self.i0m)


def _dedupe(base: np.ndarray, extras: np.ndarray, tol: float) -> np.ndarray:
    if extras.size == 0:
        return np.sort(base)
    keep = np.ones(base.size, dtype=bool)
    for e in extras:
        keep &= np.abs(base - e) > tol
    return np.sort(np.concatenate([base[keep], extras]))


def make_grid(L: float, h: float | None = None, n_half: int | None = None,
              origin: str = SINGLE, extra_nodes=()) -> Grid:
    """Uniform symmetric grid on [-L, L] with the origin as a node.

    Exactly one of ``h`` (target spacing) or ``n_half`` (cells per half-box)
    must be given.  ``extra_nodes`` are inserted exactly (base nodes within a
    small tolerance of an extra are dropped); barrier endpoints should always
    be passed here so cell-aligned barriers stay quadrature-free.
    """
    if L <= 0:
        raise ArgumentError("box half-width must be positive")
    if (h is None) == (n_half is None):
        raise ArgumentError("give exactly one of h or n_half")
    if n_half is None:
        n_half = max(1, int(round(L / h)))
    if n_half < 1:
        raise ArgumentError("need at least one cell per half-box")
    step = L / n_half
    pos = np.arange(1, n_half + 1) * step
    base = np.concatenate([-pos[::-1], [0.0], pos])
    extras = np.asarray(sorted(set(float(x) for x in extra_nodes)), dtype=float)
    if extras.size and (extras.min() <= -L or extras.max() >= L):
        raise ArgumentError("extra nodes must lie strictly inside the box")
    extras = extras[extras != 0.0]
    coords = _dedupe(base, extras, tol=min(step, 1.0) * 1e-9)
    i0 = int(np.searchsorted(coords, 0.0))
    assert coords[i0] == 0.0
    if origin == DOUBLED:
        coords = np.insert(coords, i0, 0.0)
        return Grid(coords, DOUBLED, i0, i0 + 1)
    if origin == SINGLE:
        return Grid(coords, SINGLE, i0, i0)
    raise ArgumentError(f"unknown origin request '{origin}'")


def barrier_interior_nodes(epsilon: float, n_cells: int) -> np.ndarray:
    """Interior nodes splitting (-eps, eps) into ``n_cells`` equal cells."""
    if n_cells < 1:
        raise ArgumentError("barrier needs at least one cell")
    return np.linspace(-epsilon, epsilon, n_cells + 1)[1:-1]


def shifted_image_grid(limit_grid: Grid, epsilon: float, n_barrier_cells: int) -> Grid:
    """Barrier-resolving grid matched node-by-node to a doubled limit grid.

    Nodes of the minus component are shifted by ``-epsilon``, plus component by
    ``+epsilon`` (so 0-/0+ land on the barrier endpoints), and the barrier slab
    is filled with ``n_barrier_cells`` uniform cells.  The node transport used
    when comparing resolvents is then exact.
    """
    if not limit_grid.doubled:
        raise ShapeError("image grid construction needs a doubled limit grid")
    cm = limit_grid.coords[: limit_grid.i0m + 1] - epsilon
    cp = limit_grid.coords[limit_grid.i0p:] + epsilon
    inner = np.linspace(-epsilon, epsilon, n_barrier_cells + 1)[1:-1]
    coords = np.concatenate([cm, inner, cp])
    has_zero = np.where(coords == 0.0)[0]
    if has_zero.size:
        i0 = int(has_zero[0])
        return Grid(coords, SINGLE, i0, i0)
    return Grid(coords, NONE)
