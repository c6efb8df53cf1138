"""Path-level simulation: snapping-out Brownian paths and form-driven chains.

The Brownian sampler is exact per step: it draws the free endpoint together
with the bridge minimum, so the joint law of (reflected position, local-time
increment) over one step is exact.  Killing is driven by the accumulated
local time against an exponential threshold with rate kappa; a killed path is
instantly reborn at 0+ or 0- with equal probability.  The only bias sources
are rebirths logged at step boundaries and first-passage discretization, both
O(h) and measured rather than assumed.

For general scenarios (measure-valued resistances) the path construction is
the exact continuous-time chain of the assembled form's generator -M^{-1}A:
exponential holding times, jump probabilities proportional to off-diagonal
rates, killing mass sent to a cemetery.

Randomness is counter-based (Philox) keyed by (seed, path-block); paths are
grouped in fixed-width blocks so results do not depend on execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assembly import DiscreteForm
from .errors import ArgumentError, InvariantViolation, ResourceError

BLOCK = 8192
CEMETERY = -1

__all__ = [
    "PathEnsemble",
    "step_reflected_bm",
    "run_snob",
    "run_ctmc",
    "estimate",
    "MeanAt",
    "TwoPointProduct",
    "HittingBefore",
    "ErgodicAverage",
]


def _block_rng(seed: int, block_start: int) -> np.random.Generator:
    key = ((int(seed) & (2**64 - 1)) << 64) | (int(block_start) & (2**64 - 1))
    return np.random.Generator(np.random.Philox(key=key))


def step_reflected_bm(x, h: float, rng: np.random.Generator):
    """One exact step of reflected Brownian motion with its local-time increment.

    Draws the free endpoint w ~ N(x, h) and the bridge minimum
    m = (x + w - sqrt((w-x)^2 - 2 h ln U)) / 2, then reflects:
    dL = max(0, -m), x' = w + dL.  Marginals of (x', dL) are exact.
    """
    if h <= 0:
        raise ArgumentError("step size must be positive")
    x = np.asarray(x, dtype=float)
    w = x + np.sqrt(h) * rng.standard_normal(x.shape)
    u = rng.random(x.shape)                      # in [0, 1); use 1-u in (0, 1]
    m = 0.5 * (x + w - np.sqrt((w - x) ** 2 - 2.0 * h * np.log1p(-u)))
    dL = np.maximum(0.0, -m)
    return w + dL, dL


@dataclass
class PathEnsemble:
    """Monte Carlo trajectory set with its event log.

    Positions live on the split line: a side tag in {-1, +1} (0 marks the
    cemetery) and a nonnegative distance from the origin.  Snapshots map a
    time to (sides, xs) arrays; events are rebirths/crossings/killings sorted
    by (path, time).
    """

    n_paths: int
    seed: int
    h: float | None
    T: float
    snapshots: dict = field(default_factory=dict)
    ev_path: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    ev_time: np.ndarray = field(default_factory=lambda: np.empty(0, float))
    ev_kind: np.ndarray = field(default_factory=lambda: np.empty(0, "U8"))
    ev_side: np.ndarray = field(default_factory=lambda: np.empty(0, np.int8))
    first_hit: dict = field(default_factory=dict)      # "0-"/"0+" -> per-path times
    occupation_avg: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def snapshot(self, t: float):
        for key in self.snapshots:
            if abs(key - t) <= 1e-9 * max(1.0, self.T):
                return self.snapshots[key]
        raise ArgumentError(f"no snapshot stored at t={t}")

    def rebirth_fraction_plus(self) -> tuple[float, int]:
        side = self.ev_side[self.ev_kind == "rebirth"]
        if side.size == 0:
            return 0.5, 0
        return float(np.mean(side > 0)), int(side.size)

    def export_events_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("path_id,event_time,event_kind,side\n")
            for i in range(self.ev_path.size):
                fh.write(f"{self.ev_path[i]},{float(self.ev_time[i])!r},"
                         f"{self.ev_kind[i]},{int(self.ev_side[i])}\n")

    def export_snapshots_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("path_id,t,side,x\n")
            for t in sorted(self.snapshots):
                sides, xs = self.snapshots[t]
                for p in range(self.n_paths):
                    fh.write(f"{p},{float(t)!r},{int(sides[p])},{float(xs[p])!r}\n")


def _parse_start(x0, n: int):
    """Initial condition: '0+', '0-', signed float, (side, x), or per-path arrays."""
    if isinstance(x0, str):
        if x0 == "0+":
            return np.full(n, 1, np.int8), np.zeros(n)
        if x0 == "0-":
            return np.full(n, -1, np.int8), np.zeros(n)
        raise ArgumentError(f"unknown start point '{x0}'")
    if isinstance(x0, tuple) and len(x0) == 2 and np.ndim(x0[0]) == 0:
        side, x = x0
        if x < 0:
            raise ArgumentError("distance coordinate must be nonnegative")
        return np.full(n, int(side), np.int8), np.full(n, float(x))
    if isinstance(x0, tuple) and len(x0) == 2:
        sides = np.asarray(x0[0], np.int8)
        xs = np.asarray(x0[1], float)
        if sides.shape != (n,) or xs.shape != (n,):
            raise ArgumentError("per-path start arrays must have length n_paths")
        return sides.copy(), xs.copy()
    x0 = float(x0)
    if x0 == 0.0:
        raise ArgumentError("start 0.0 is ambiguous; use '0+' or '0-'")
    return np.full(n, 1 if x0 > 0 else -1, np.int8), np.full(n, abs(x0))


def run_snob(x0, kappa: float, h: float, T: float, n_paths: int, seed: int,
             snapshot_times=None, occupation: Callable | None = None) -> PathEnsemble:
    """Simulate snapping-out Brownian paths on the split line.

    Per path: reflected Brownian steps on the current side accumulate local
    time L; when L exceeds the exponential threshold (rate kappa) the path is
    reborn at 0+ or 0- with probability 1/2 each at the end of the step,
    resetting (L, threshold).  Events and optional occupation averages are
    logged per path.
    """
    if kappa <= 0:
        raise ArgumentError("kappa must be positive")
    if h <= 0 or T <= 0 or n_paths < 1:
        raise ArgumentError("need positive h, T and at least one path")
    n_steps = int(round(T / h))
    if abs(n_steps * h - T) > 1e-9 * T:
        raise ArgumentError(f"T={T} is not a multiple of h={h}")
    if n_paths * n_steps > 2**34:
        raise ResourceError(f"{n_paths} paths x {n_steps} steps exceeds the resource guard")

    if snapshot_times is None:
        snapshot_times = [T]
    snap_steps = {}
    for t in snapshot_times:
        k = int(round(t / h))
        if abs(k * h - t) > 1e-9 * max(1.0, T) or not 0 <= k <= n_steps:
            raise ArgumentError(f"snapshot time {t} is not step-commensurate")
        snap_steps[k] = k * h

    ens = PathEnsemble(n_paths=n_paths, seed=seed, h=h, T=T,
                       meta={"kind": "snob", "kappa": kappa})
    snap_sides = {k: np.empty(n_paths, np.int8) for k in snap_steps}
    snap_xs = {k: np.empty(n_paths, float) for k in snap_steps}
    fh_minus = np.full(n_paths, np.nan)
    fh_plus = np.full(n_paths, np.nan)
    occ = np.zeros(n_paths) if occupation is not None else None
    ev_p, ev_t, ev_s = [], [], []

    sides0, xs0 = _parse_start(x0, n_paths)
    fh_minus[np.flatnonzero((sides0 < 0) & (xs0 == 0.0))] = 0.0
    fh_plus[np.flatnonzero((sides0 > 0) & (xs0 == 0.0))] = 0.0

    sqh = np.sqrt(h)
    for start in range(0, n_paths, BLOCK):
        stop = min(start + BLOCK, n_paths)
        nb = stop - start
        ids = np.arange(start, stop, dtype=np.int64)
        rng = _block_rng(seed, start)
        side = sides0[start:stop].copy()
        x = xs0[start:stop].copy()
        L = np.zeros(nb)
        xi = rng.exponential(1.0 / kappa, nb)
        if 0 in snap_steps:
            snap_sides[0][start:stop] = side
            snap_xs[0][start:stop] = x
        for step in range(1, n_steps + 1):
            w = x + sqh * rng.standard_normal(nb)
            u = rng.random(nb)
            m = 0.5 * (x + w - np.sqrt((w - x) ** 2 - 2.0 * h * np.log1p(-u)))
            dL = np.maximum(0.0, -m)
            x = w + dL
            L += dL
            crossed = L > xi
            if crossed.any():
                t_now = step * h
                r = rng.random(int(crossed.sum()))
                new_side = np.where(r < 0.5, 1, -1).astype(np.int8)
                idx = np.flatnonzero(crossed)
                side[idx] = new_side
                x[idx] = 0.0
                L[idx] = 0.0
                xi[idx] = rng.exponential(1.0 / kappa, idx.size)
                ev_p.append(ids[idx])
                ev_t.append(np.full(idx.size, t_now))
                ev_s.append(new_side)
                gm = ids[idx[new_side < 0]]
                gm = gm[np.isnan(fh_minus[gm])]
                fh_minus[gm] = t_now
                gp = ids[idx[new_side > 0]]
                gp = gp[np.isnan(fh_plus[gp])]
                fh_plus[gp] = t_now
            if occ is not None:
                occ[start:stop] += h * occupation(side.astype(float) * x, side)
            if step in snap_steps:
                snap_sides[step][start:stop] = side
                snap_xs[step][start:stop] = x

    for k, t in snap_steps.items():
        ens.snapshots[t] = (snap_sides[k], snap_xs[k])
    if ev_p:
        p = np.concatenate(ev_p)
        t = np.concatenate(ev_t)
        s = np.concatenate(ev_s)
        order = np.lexsort((t, p))
        ens.ev_path, ens.ev_time, ens.ev_side = p[order], t[order], s[order]
        ens.ev_kind = np.full(p.size, "rebirth", dtype="U8")
    ens.first_hit = {"0-": fh_minus, "0+": fh_plus}
    ens.occupation_avg = occ / T if occ is not None else None
    return ens


def run_ctmc(form: DiscreteForm, x0_node: int, T: float, n_paths: int, seed: int,
             snapshot_times=None, hit_node: int | None = None,
             max_total_jumps: int = 2**33) -> PathEnsemble:
    """Exact continuous-time chain of the form's generator -M^{-1}A.

    Holding time at node i is exponential with rate (row sum of A)/m_i; jumps
    go left/right with probability proportional to the gap conductances, and
    killing weight sends the path to an absorbing cemetery.  Jumps across the
    0-/0+ slot are logged as crossing events.
    """
    if T <= 0 or n_paths < 1:
        raise ArgumentError("need positive T and at least one path")
    n = form.n
    if not 0 <= x0_node < n:
        raise ArgumentError(f"start node {x0_node} out of range")
    if np.any(form.w_gap < 0):
        raise InvariantViolation("negative off-diagonal rate: assembly is not Markovian")
    wl = np.concatenate([[0.0], form.w_gap])          # conductance to the left
    wr = np.concatenate([form.w_gap, [0.0]])          # conductance to the right
    out_rate = (wl + wr + form.kill) / form.mass
    p_left = np.divide(wl, wl + wr + form.kill,
                       out=np.zeros(n), where=(wl + wr + form.kill) > 0)
    p_right_cum = p_left + np.divide(wr, wl + wr + form.kill,
                                     out=np.zeros(n), where=(wl + wr + form.kill) > 0)

    g = form.grid
    cross_slot = g.coupling_gap() if g.doubled else None
    if snapshot_times is None:
        snapshot_times = [T]
    snapshot_times = sorted(set(float(t) for t in snapshot_times))
    if any(t < 0 or t > T * (1 + 1e-12) for t in snapshot_times):
        raise ArgumentError("snapshot times must lie in [0, T]")

    pos = np.full(n_paths, x0_node, dtype=np.int64)
    t = np.zeros(n_paths)
    active = np.ones(n_paths, dtype=bool)
    snap_pos = {tt: np.full(n_paths, x0_node, dtype=np.int64) for tt in snapshot_times}
    snap_done = {tt: np.zeros(n_paths, dtype=bool) for tt in snapshot_times}
    fh = np.full(n_paths, np.nan)
    if hit_node is not None and x0_node == hit_node:
        fh[:] = 0.0
    ev_p, ev_t, ev_k, ev_s = [], [], [], []
    rng = _block_rng(seed, 0)
    total_jumps = 0

    while active.any():
        ai = np.flatnonzero(active)
        rates = out_rate[pos[ai]]
        frozen = rates <= 0
        if frozen.any():
            fi = ai[frozen]
            for tt in snapshot_times:
                later = ~snap_done[tt][fi] & (t[fi] < tt)
                snap_pos[tt][fi[later]] = pos[fi[later]]
                snap_done[tt][fi[later]] = True
            active[fi] = False
            ai = ai[~frozen]
            if ai.size == 0:
                break
            rates = rates[~frozen]
        dt = rng.exponential(1.0, ai.size) / rates
        t_new = t[ai] + dt
        for tt in snapshot_times:
            mask = ~snap_done[tt][ai] & (t[ai] < tt) & (t_new >= tt)
            if mask.any():
                snap_pos[tt][ai[mask]] = pos[ai[mask]]
                snap_done[tt][ai[mask]] = True
        done = t_new >= T
        if done.any():
            active[ai[done]] = False
        move = ai[~done]
        t_move = t_new[~done]
        if move.size:
            total_jumps += move.size
            if total_jumps > max_total_jumps:
                raise ResourceError("jump budget exceeded; refine T, grid or path count")
            u = rng.random(move.size)
            old = pos[move]
            new = np.where(u < p_left[old], old - 1,
                           np.where(u < p_right_cum[old], old + 1, CEMETERY))
            if cross_slot is not None:
                crossed = ((old == cross_slot) & (new == cross_slot + 1)) | \
                          ((old == cross_slot + 1) & (new == cross_slot))
                if crossed.any():
                    ci = np.flatnonzero(crossed)
                    ev_p.append(move[ci])
                    ev_t.append(t_move[ci])
                    ev_k.append(np.full(ci.size, "cross", dtype="U8"))
                    ev_s.append(np.where(new[ci] > old[ci], 1, -1).astype(np.int8))
            killed = new == CEMETERY
            if killed.any():
                ki = np.flatnonzero(killed)
                ev_p.append(move[ki])
                ev_t.append(t_move[ki])
                ev_k.append(np.full(ki.size, "killed", dtype="U8"))
                ev_s.append(np.zeros(ki.size, np.int8))
                for tt in snapshot_times:
                    later = ~snap_done[tt][move[ki]] & (t_move[ki] < tt)
                    snap_pos[tt][move[ki][later]] = CEMETERY
                    snap_done[tt][move[ki][later]] = True
                active[move[ki]] = False
            if hit_node is not None:
                hits = (new == hit_node) & np.isnan(fh[move])
                fh[move[hits]] = t_move[hits]
            pos[move] = new
        t[ai] = t_new

    sides = g.sides()
    ens = PathEnsemble(n_paths=n_paths, seed=seed, h=None, T=T,
                       meta={"kind": "ctmc", "phase": form.phase})
    for tt in snapshot_times:
        p = snap_pos[tt]
        dead = p == CEMETERY
        s = np.where(dead, 0, sides[np.where(dead, 0, p)]).astype(np.int8)
        x = np.where(dead, np.nan, np.abs(form.grid.coords[np.where(dead, 0, p)]))
        ens.snapshots[tt] = (s, x)
        ens.meta.setdefault("node_snapshots", {})[tt] = p.copy()
    if ev_p:
        p = np.concatenate(ev_p)
        tv = np.concatenate(ev_t)
        k = np.concatenate(ev_k)
        s = np.concatenate(ev_s)
        order = np.lexsort((tv, p))
        ens.ev_path, ens.ev_time, ens.ev_kind, ens.ev_side = p[order], tv[order], k[order], s[order]
    if hit_node is not None:
        ens.first_hit = {"node": fh}
    return ens


# ---------------------------------------------------------------------------
# estimators


@dataclass(frozen=True)
class MeanAt:
    t: float
    f: Callable


@dataclass(frozen=True)
class TwoPointProduct:
    t1: float
    t2: float
    f1: Callable
    f2: Callable


@dataclass(frozen=True)
class HittingBefore:
    target: str       # "0-", "0+", or "node"
    T: float


@dataclass(frozen=True)
class ErgodicAverage:
    pass


def _eval_snapshot(ens: PathEnsemble, t: float, f: Callable) -> np.ndarray:
    sides, xs = ens.snapshot(t)
    dead = sides == 0
    vals = np.where(dead, 0.0, f(np.where(dead, 0.0, sides * xs), sides))
    return vals


def estimate(ensemble: PathEnsemble, functional) -> tuple[float, float]:
    """Sample mean and standard error of a path functional."""
    n = ensemble.n_paths
    if isinstance(functional, MeanAt):
        vals = _eval_snapshot(ensemble, functional.t, functional.f)
    elif isinstance(functional, TwoPointProduct):
        if functional.t2 <= functional.t1:
            raise ArgumentError("need t1 < t2")
        vals = _eval_snapshot(ensemble, functional.t1, functional.f1) * \
            _eval_snapshot(ensemble, functional.t2, functional.f2)
    elif isinstance(functional, HittingBefore):
        if functional.target not in ensemble.first_hit:
            raise ArgumentError(f"no first-passage record for '{functional.target}'")
        fh = ensemble.first_hit[functional.target]
        vals = (np.nan_to_num(fh, nan=np.inf) < functional.T).astype(float)
    elif isinstance(functional, ErgodicAverage):
        if ensemble.occupation_avg is None:
            raise ArgumentError("ensemble was run without an occupation functional")
        vals = ensemble.occupation_avg
    else:
        raise ArgumentError(f"unknown functional {functional!r}")
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, stderr
