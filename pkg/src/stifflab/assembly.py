"""Discrete Dirichlet forms on a grid: assembly, killing, darning, traces.

The discretization is node-centered finite volumes: the dual cell of a node
runs from the midpoint with its left neighbor to the midpoint with its right
neighbor (half-cells at the box ends, which makes the outer boundaries
zero-flux automatically).  Interior edge (i, i+1) carries conductance
``1 / (2 * dlambda)`` where ``dlambda`` is the resistance mass of the primal
cell, and the mass vector is the speed-measure content of the dual cells.

Two constants live here and are asserted against each other in the tests:
the interface bilinear block ``kappa/4`` and the generator flux coefficient
``kappa/2``.  Mixing them up is the classic factor-of-two bug.

Bitwise reproducibility note: dual masses are accumulated as left-half plus
right-half contributions in cell order, and darning drops the coupling slot
structurally instead of summing rows.  Hence ``darn(snapping)`` equals the
continuous assembly bit for bit, coupling weight notwithstanding.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    ArgumentError,
    AssemblyError,
    InvariantViolation,
    NumericalError,
    ShapeError,
)
from .grids import DOUBLED, SINGLE, NONE, Grid
from .measures import MonotoneMeasure
from .scenario import Continuous, EpsBarrier, Scenario, Separate, Snapping


@dataclass(frozen=True)
class DiscreteForm:
    """Mass vector plus symmetric stiffness on an ordered grid.

    The stiffness is tridiagonal by construction: ``w_gap[k]`` is the
    conductance of the gap between logical nodes k and k+1 (0 means
    disconnected, as in the separate phase), and ``kill`` holds nonnegative
    diagonal killing weights.  Immutable and safe to share.
    """

    grid: Grid
    mass: np.ndarray
    w_gap: np.ndarray
    kill: np.ndarray
    phase: str
    kappa: float | None = None

    def __post_init__(self):
        for name in ("mass", "w_gap", "kill"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.grid.n
        if self.mass.shape != (n,) or self.kill.shape != (n,) or self.w_gap.shape != (n - 1,):
            raise ArgumentError("form arrays do not match the grid")
        if np.any(self.mass <= 0):
            raise AssemblyError("every dual cell needs positive speed-measure mass")
        if np.any(self.w_gap < 0) or np.any(self.kill < 0):
            raise InvariantViolation("negative conductance or killing weight")

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def is_killed(self) -> bool:
        return bool(np.any(self.kill > 0))

    def stiffness_diag(self) -> np.ndarray:
        d = np.zeros(self.n)
        d[:-1] += self.w_gap
        d[1:] += self.w_gap
        return d + self.kill

    def quad_form(self, u, v=None) -> float:
        """Bilinear form value u' A v (v defaults to u)."""
        u = np.asarray(u, dtype=float)
        v = u if v is None else np.asarray(v, dtype=float)
        du = np.diff(u)
        dv = np.diff(v)
        return float(np.dot(self.w_gap * du, dv) + np.dot(self.kill * u, v))

    def apply_stiffness(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        flux = self.w_gap * np.diff(u)
        out = self.kill * u
        out[:-1] -= flux
        out[1:] += flux
        return out

    def inner_m(self, u, v) -> float:
        return float(np.dot(self.mass * np.asarray(u, float), np.asarray(v, float)))

    def norm_m(self, u) -> float:
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(np.dot(self.mass, u * u)))

    def to_triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Stiffness as canonical symmetric sparse triplets (row-major order)."""
        rows, cols, vals = [], [], []
        d = self.stiffness_diag()
        for i in range(self.n):
            if i > 0 and self.w_gap[i - 1] != 0.0:
                rows.append(i)
                cols.append(i - 1)
                vals.append(-self.w_gap[i - 1])
            if d[i] != 0.0:
                rows.append(i)
                cols.append(i)
                vals.append(d[i])
            if i < self.n - 1 and self.w_gap[i] != 0.0:
                rows.append(i)
                cols.append(i + 1)
                vals.append(-self.w_gap[i])
        return (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64),
                np.array(vals, dtype=float))

    def sparse_stiffness(self):
        import scipy.sparse as sp

        r, c, v = self.to_triplets()
        return sp.coo_matrix((v, (r, c)), shape=(self.n, self.n)).tocsc()


def _coupling_weight(phase) -> float:
    if isinstance(phase, Separate):
        return 0.0
    if isinstance(phase, Snapping):
        return phase.coupling_weight
    raise ArgumentError(f"phase {phase!r} has no interface slot")


def _dual_masses(m: MonotoneMeasure, grid: Grid) -> np.ndarray:
    """Half-cell accumulation of dual masses, cell order left to right."""
    mass = np.zeros(grid.n)
    coords = grid.coords
    skip = grid.coupling_gap() if grid.doubled else -1
    cm = m.cdf(coords)
    # cell midpoints; the zero-length 0-/0+ gap is skipped below, which leaves
    # the origin dual cells with their adjacent half-cells only (no shared mass)
    cmid = m.cdf(0.5 * (coords[:-1] + coords[1:]))
    for k in range(grid.n - 1):
        if k == skip:
            continue
        mass[k] += cmid[k] - cm[k]
        mass[k + 1] += cm[k + 1] - cmid[k]
    return mass


def assemble(scenario: Scenario, grid: Grid | None = None) -> DiscreteForm:
    """Assemble the discrete form of a scenario on a grid.

    Interior gap (i, i+1) gets weight ``1/(2 dlambda)``; the interface slot of
    a doubled grid gets the phase coupling (0 for separate, ``kappa/4`` or the
    skew weight for snapping).  Raises :class:`AssemblyError` on a cell with
    zero resistance mass, naming the cell.
    """
    if grid is None:
        grid = scenario.build_grid()
    phase = scenario.phase
    if isinstance(phase, (Separate, Snapping)) and not grid.doubled:
        raise ShapeError(f"{phase.name} phase needs a doubled-origin grid")
    if isinstance(phase, (Continuous, EpsBarrier)) and grid.doubled:
        raise ShapeError(f"{phase.name} phase needs a single-origin grid")

    lo, hi = grid.box
    if isinstance(phase, EpsBarrier):
        from .measures import build_lambda_eps

        base = scenario.resistance_measure()
        lam = build_lambda_eps(base, phase.barrier)
        if lo < lam.lo - 1e-12 or hi > lam.hi + 1e-12:
            raise AssemblyError("grid exceeds the spliced resistance domain")
    else:
        lam = scenario.resistance_measure(min(lo, -scenario.L), max(hi, scenario.L))
    m = scenario.speed_measure(min(lo, -scenario.L), max(hi, scenario.L))

    coords = grid.coords
    w = np.zeros(grid.n - 1)
    dlam = np.diff(lam.cdf(coords))
    skip = grid.coupling_gap() if grid.doubled else -1
    for k in range(grid.n - 1):
        if k == skip:
            continue
        if dlam[k] <= 0.0:
            raise AssemblyError(
                f"cell {k} [{coords[k]}, {coords[k + 1]}] has zero resistance mass "
                "(infinite conductance)")
        w[k] = 1.0 / (2.0 * dlam[k])
    kappa = None
    if grid.doubled:
        w[skip] = _coupling_weight(phase)
        if isinstance(phase, Snapping):
            kappa = phase.kappa_eff

    mass = _dual_masses(m, grid)
    return DiscreteForm(grid=grid, mass=mass, w_gap=w, kill=np.zeros(grid.n),
                        phase=phase.name, kappa=kappa)


def kill(form: DiscreteForm, mu_nodes) -> DiscreteForm:
    """Add diagonal killing weights at the given nodes.

    ``mu_nodes`` is a list of ``(where, weight)`` with ``where`` a node
    coordinate or one of the strings ``"0-"``, ``"0+"``.
    """
    new_kill = form.kill.copy()
    for where, weight in mu_nodes:
        if weight < 0:
            raise ArgumentError(f"killing weight must be nonnegative, got {weight}")
        if where == "0-":
            idx = form.grid.index_of(0.0, side=-1)
        elif where == "0+":
            idx = form.grid.index_of(0.0, side=+1)
        else:
            idx = form.grid.index_of(float(where))
        new_kill[idx] += weight
    return replace(form, kill=new_kill, phase=form.phase + "+killed"
                   if not form.phase.endswith("+killed") else form.phase)


def elastic_kill(form: DiscreteForm, kappa: float) -> DiscreteForm:
    """Killing weights kappa/2 at 0- and 0+: the elastic (absorbed) companion."""
    return kill(form, [("0-", kappa / 2.0), ("0+", kappa / 2.0)])


def darn(form: DiscreteForm) -> DiscreteForm:
    """Merge 0- and 0+ into a single origin node.

    Masses and killing weights add; the coupling slot disappears without any
    floating-point cancellation, so the result of darning a snapping form is
    bit-identical to the continuous assembly and independent of kappa.
    """
    if not form.grid.doubled:
        raise ShapeError("darning needs a doubled-origin form")
    k = form.grid.coupling_gap()
    mass = np.concatenate([form.mass[:k], [form.mass[k] + form.mass[k + 1]],
                           form.mass[k + 2:]])
    killv = np.concatenate([form.kill[:k], [form.kill[k] + form.kill[k + 1]],
                            form.kill[k + 2:]])
    w = np.concatenate([form.w_gap[:k], form.w_gap[k + 1:]])
    return DiscreteForm(grid=form.grid.merged(), mass=mass, w_gap=w, kill=killv,
                        phase="continuous", kappa=None)


def trace_schur(form: DiscreteForm, keep) -> DiscreteForm:
    """Trace of the form onto a node subset via the stiffness Schur complement.

    Eliminated interior segments reduce to series conductances between their
    flanking kept nodes (the discrete harmonic extension); killing absorbed
    from eliminated nodes shows up as diagonal excess.  Mass is restricted to
    the kept cells.
    """
    keep_idx = _normalize_keep(form.n, keep)
    if keep_idx.size == 0:
        raise ArgumentError("keep set must be nonempty")
    if keep_idx.size == form.n:
        return replace(form, phase=form.phase)

    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    A = form.sparse_stiffness()
    n = form.n
    elim = np.setdiff1d(np.arange(n), keep_idx)
    A_II = A[np.ix_(elim, elim)].tocsc()
    A_IF = A[np.ix_(elim, keep_idx)].tocsc()
    A_FF = A[np.ix_(keep_idx, keep_idx)].tocsr()

    cols = np.unique(A_IF.nonzero()[1])
    try:
        lu = spla.splu(A_II)
    except RuntimeError as exc:
        raise NumericalError(
            f"eliminated block is singular or near-singular: {exc}") from exc
    if cols.size:
        rhs = np.asarray(A_IF[:, cols].todense())
        X = lu.solve(rhs)
        corr = (A_IF.T @ X)  # (|F| x |cols|) dense, rows nonzero only near cols
        corr = np.asarray(corr)
    else:
        corr = None

    # assemble tridiagonal data on the kept chain
    nf = keep_idx.size
    w_new = np.zeros(nf - 1)
    diag = np.zeros(nf)
    A_FF_d = A_FF.diagonal()
    col_pos = {int(c): j for j, c in enumerate(cols)}
    for j in range(nf):
        diag[j] = A_FF_d[j]
        if corr is not None and j in col_pos:
            diag[j] -= corr[j, col_pos[j]]
    for j in range(nf - 1):
        off = A_FF[j, j + 1]
        if corr is not None and (j + 1) in col_pos:
            off -= corr[j, col_pos[j + 1]]
        w_new[j] = -off
    # sanity: Markovian structure must survive elimination
    tol = 1e-12 * max(1.0, float(np.max(np.abs(diag))) if nf else 1.0)
    if np.any(w_new < -tol):
        raise InvariantViolation("Schur complement produced a negative conductance")
    w_new = np.maximum(w_new, 0.0)
    excess = diag.copy()
    excess[:-1] -= w_new
    excess[1:] -= w_new
    if np.any(excess < -1e-9 * max(1.0, float(np.max(np.abs(diag))))):
        raise InvariantViolation("Schur complement produced negative killing excess")
    excess = np.maximum(excess, 0.0)

    new_grid = _subset_grid(form.grid, keep_idx)
    return DiscreteForm(grid=new_grid, mass=form.mass[keep_idx], w_gap=w_new,
                        kill=excess, phase="trace", kappa=None)


def _normalize_keep(n: int, keep) -> np.ndarray:
    keep_arr = np.asarray(keep)
    if keep_arr.dtype == bool:
        if keep_arr.shape != (n,):
            raise ArgumentError("boolean keep mask has wrong length")
        return np.flatnonzero(keep_arr)
    idx = np.unique(keep_arr.astype(np.int64))
    if idx.size and (idx[0] < 0 or idx[-1] >= n):
        raise ArgumentError("keep indices out of range")
    return idx


def _subset_grid(grid: Grid, keep_idx: np.ndarray) -> Grid:
    coords = grid.coords[keep_idx]
    if grid.doubled:
        km = np.flatnonzero(keep_idx == grid.i0m)
        kp = np.flatnonzero(keep_idx == grid.i0p)
        if km.size and kp.size:
            return Grid(coords, DOUBLED, int(km[0]), int(kp[0]))
        if km.size:
            return Grid(coords, SINGLE, int(km[0]), int(km[0]))
        if kp.size:
            return Grid(coords, SINGLE, int(kp[0]), int(kp[0]))
        return Grid(coords, NONE)
    if grid.i0m is not None:
        k0 = np.flatnonzero(keep_idx == grid.i0m)
        if k0.size:
            return Grid(coords, SINGLE, int(k0[0]), int(k0[0]))
    return Grid(coords, NONE)


def dump_matrix_csv(form: DiscreteForm, stiffness_path, mass_path) -> None:
    """Write the stiffness as (row, col, value) triplets and the mass vector."""
    r, c, v = form.to_triplets()
    with open(stiffness_path, "w", encoding="utf-8") as fh:
        fh.write("row,col,value\n")
        for i in range(r.size):
            fh.write(f"{r[i]},{c[i]},{float(v[i])!r}\n")
    with open(mass_path, "w", encoding="utf-8") as fh:
        fh.write("node,x,mass\n")
        for i in range(form.n):
            fh.write(f"{i},{float(form.grid.coords[i])!r},{float(form.mass[i])!r}\n")
