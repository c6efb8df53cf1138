"""Command-line surface: solve, sweep, mc, check.

Every command reads one TOML config, writes its artifacts plus a JSON run
manifest into the output directory, and exits 0 on success, 2 on
configuration/validation problems, 3 on numerical failures.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import assemble, darn, dump_matrix_csv
from .config import load_config, parse_scenario, parse_sweep
from .errors import (
    ArgumentError,
    AssemblyError,
    ConfigError,
    DomainError,
    InvariantViolation,
    NumericalError,
    ResourceError,
    ShapeError,
    StiffLabError,
)
from .evolve import bc_residual, resolvent, step_heat
from .manifest import new_manifest
from .mc import MeanAt, estimate, run_ctmc, run_snob
from .scenario import Continuous, Scenario, Snapping, make_probe
from .sweeps import check_resolvent_identity, run_phase_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_CONFIG_ERRORS = (ConfigError, ArgumentError, DomainError, ShapeError, ResourceError)
_NUMERICAL_ERRORS = (NumericalError, AssemblyError, InvariantViolation)


def _note_approximations(manifest, scenario: Scenario) -> None:
    for label, spec in (("speed", scenario.speed), ("resistance", scenario.resistance)):
        if spec.kind == "lebesgue-plus-cantor":
            manifest.info[f"{label}_cantor_level"] = spec.level
            manifest.info[f"{label}_cantor_cdf_error_bound"] = 2.0 ** (-spec.level)


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("STIFFLAB_THREADS")
    return max(1, int(env)) if env else 1


def _write_rows(path: Path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, float) else str(v)
                              for v in row) + "\n")


def _solution_csv(path: Path, form, u) -> None:
    g = form.grid
    sides = g.sides()
    _write_rows(path, "node,x,side,u",
                ((i, float(g.coords[i]), int(sides[i]), float(u[i])) for i in range(g.n)))


def _interface_report(form, alpha, f, scenario) -> list[tuple]:
    """One-row flux/BC report covering every phase."""
    if form.phase.startswith(("separate", "snapping")):
        r = bc_residual(form, alpha, f)
        return [(form.phase, alpha, r.flux_minus, r.flux_plus, r.jump, r.r_left,
                 r.r_right, "" if r.r_jump is None else r.r_jump)]
    if form.phase.startswith("continuous"):
        return [(form.phase, alpha, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)]
    # finite barrier: one-sided fluxes just outside the slab
    sol = resolvent(form, alpha, f)
    eps = scenario.phase.barrier.epsilon
    g = form.grid
    im = g.index_of(-eps)
    ip = g.index_of(eps)
    fm = float((sol.u[im] - sol.u[im - 1]) * 2.0 * form.w_gap[im - 1])
    fp = float((sol.u[ip + 1] - sol.u[ip]) * 2.0 * form.w_gap[ip])
    jump = float(sol.u[ip] - sol.u[im])
    return [(form.phase, alpha, fm, fp, jump, fp - fm, fp - fm, "")]


def cmd_solve(args, cfg: dict, out: Path, manifest) -> int:
    scenario = parse_scenario(cfg, Path(args.config).parent)
    tbl = cfg.get("solve")
    if tbl is None:
        raise ConfigError("missing [solve] table")
    mode = tbl.get("mode", "resolvent")
    form = assemble(scenario)
    manifest.seeds = [scenario.seed]
    _note_approximations(manifest, scenario)

    if mode == "resolvent":
        alpha = float(tbl.get("alpha", 1.0))
        if alpha <= 0:
            raise ConfigError("[solve].alpha must be positive")
        probe = make_probe(tbl.get("f", "gauss"))
        sol = resolvent(form, alpha, probe.on_grid(form.grid))
        _solution_csv(out / "solution.csv", form, sol.u)
        _write_rows(out / "bc_report.csv",
                    "phase,alpha,flux_minus,flux_plus,jump,r_left,r_right,r_jump",
                    _interface_report(form, alpha, probe.on_grid(form.grid), scenario))
        manifest.outputs += [str(out / "solution.csv"), str(out / "bc_report.csv")]
        if args.svg:
            from .svgplot import line_chart

            line_chart([("u", form.grid.coords, sol.u)], out / "solution.svg",
                       title=f"resolvent alpha={alpha}", xlabel="x", ylabel="u")
            manifest.outputs.append(str(out / "solution.svg"))
    elif mode == "heat":
        u0 = make_probe(tbl.get("u0", "gauss"))
        dt = float(tbl.get("dt", 1e-3))
        t_end = float(tbl.get("t_end", 1.0))
        scheme = tbl.get("scheme", "crank-nicolson")
        snaps = [float(t) for t in tbl.get("snapshots", [t_end])]
        run = step_heat(form, u0.on_grid(form.grid), dt, t_end, scheme=scheme,
                        snapshot_times=snaps)
        rows = []
        for ti, t in enumerate(run.times):
            for i in range(form.n):
                rows.append((float(t), float(form.grid.coords[i]),
                             float(run.snapshots[ti, i])))
        _write_rows(out / "heat_snapshots.csv", "t,x,u", rows)
        wres = float(np.max(np.abs(run.weak_residuals)))
        _write_rows(out / "heat_report.csv", "t,l2_norm,mass_integral,max_weak_residual",
                    ((float(run.times[i]), float(run.l2_norms[i]),
                      float(run.mass_integrals[i]), wres) for i in range(run.times.size)))
        manifest.outputs += [str(out / "heat_snapshots.csv"), str(out / "heat_report.csv")]
        if args.svg:
            from .svgplot import line_chart

            series = [(f"t={run.times[i]:g}", form.grid.coords, run.snapshots[i])
                      for i in range(run.times.size)]
            line_chart(series, out / "heat_profiles.svg", title="heat run",
                       xlabel="x", ylabel="u")
            manifest.outputs.append(str(out / "heat_profiles.svg"))
    else:
        raise ConfigError(f"[solve].mode '{mode}' unknown (resolvent | heat)")

    if tbl.get("dump_matrix", False):
        dump_matrix_csv(form, out / "stiffness.csv", out / "mass.csv")
        manifest.outputs += [str(out / "stiffness.csv"), str(out / "mass.csv")]
    return EXIT_OK


def cmd_sweep(args, cfg: dict, out: Path, manifest) -> int:
    spec = parse_sweep(cfg, Path(args.config).parent)
    _note_approximations(manifest, spec.scenario)
    report = run_phase_sweep(spec, run_id=manifest.run_id, threads=_threads(args))
    path = out / "sweep_report.csv"
    report.to_csv(path, append=True)
    manifest.outputs.append(str(path))
    manifest.seeds = [spec.scenario.seed]
    all_pass = True
    for (f_id, alpha), ok in sorted(report.verdicts.items()):
        final = report.errors_for(f_id, alpha)[-1]
        verdict = "PASS" if ok else "FAIL"
        all_pass &= ok
        print(f"verdict {verdict} target={report.target} f={f_id} alpha={alpha} "
              f"final_l2_error={final:.3e}")
    if report.hypothesis_flag:
        print("flag: hypothesis quantity non-monotone over the sweep (informational)")
    if args.svg:
        from .svgplot import line_chart

        series = []
        for (f_id, alpha) in sorted(report.verdicts):
            eps = np.array([r.eps for r in report.rows
                            if r.f_id == f_id and r.alpha == alpha])
            errs = report.errors_for(f_id, alpha)
            series.append((f"{f_id} a={alpha}", eps, errs))
        line_chart(series, out / "sweep_errors.svg", title=f"target {report.target}",
                   xlabel="eps", ylabel="L2 error", logx=True, logy=True)
        manifest.outputs.append(str(out / "sweep_errors.svg"))
    return EXIT_OK


def _mc_cross_check(scenario: Scenario, tbl: dict, ens, T: float) -> tuple | None:
    cc = tbl.get("cross_check")
    if not cc:
        return None
    probe = make_probe(cc.get("f", "minus-side"))
    mc_mean, std_err = estimate(ens, MeanAt(T, probe))
    pde_h = float(cc.get("pde_grid_h", 0.005))
    pde_dt = float(cc.get("pde_dt", 1e-3))
    pde_sc = Scenario(speed=scenario.speed, resistance=scenario.resistance,
                      L=scenario.L, phase=scenario.phase, grid_h=pde_h,
                      grid_n_half=None, barrier_cells=scenario.barrier_cells,
                      seed=scenario.seed)
    form = assemble(pde_sc)
    run = step_heat(form, probe.on_grid(form.grid), pde_dt, T)
    x0 = tbl.get("x0", "0+")
    if x0 == "0+":
        idx = form.grid.i0p
    elif x0 == "0-":
        idx = form.grid.i0m
    else:
        idx = form.grid.index_of(float(x0))
    pde_value = float(run.at(T)[idx])
    z = (mc_mean - pde_value) / std_err if std_err > 0 else 0.0
    return (mc_mean, std_err, pde_value, z)


def cmd_mc(args, cfg: dict, out: Path, manifest) -> int:
    scenario = parse_scenario(cfg, Path(args.config).parent)
    tbl = cfg.get("mc")
    if tbl is None:
        raise ConfigError("missing [mc] table")
    kind = tbl.get("kind", "snob")
    T = float(tbl.get("T", 1.0))
    n_paths = int(tbl.get("n_paths", 10000))
    seed = int(tbl.get("seed", scenario.seed))
    snaps = [float(t) for t in tbl.get("snapshots", [T])]
    manifest.seeds = [seed]

    if kind == "snob":
        kappa = tbl.get("kappa")
        if kappa is None:
            if isinstance(scenario.phase, Snapping):
                kappa = scenario.phase.kappa_eff
            else:
                raise ConfigError("[mc].kappa required unless the scenario phase is snapping")
        h = float(tbl.get("h", 1e-3))
        ens = run_snob(tbl.get("x0", "0+"), float(kappa), h, T, n_paths, seed,
                       snapshot_times=snaps)
    elif kind == "ctmc":
        form = assemble(scenario)
        x0 = tbl.get("x0", "0+")
        if x0 == "0+":
            node = form.grid.i0p
        elif x0 == "0-":
            node = form.grid.i0m
        else:
            node = form.grid.index_of(float(x0))
        ens = run_ctmc(form, node, T, n_paths, seed, snapshot_times=snaps)
    else:
        raise ConfigError(f"[mc].kind '{kind}' unknown (snob | ctmc)")

    ens.export_events_csv(out / "mc_events.csv")
    ens.export_snapshots_csv(out / "mc_snapshots.csv")
    manifest.outputs += [str(out / "mc_events.csv"), str(out / "mc_snapshots.csv")]
    row = _mc_cross_check(scenario, tbl, ens, T) if kind == "snob" else None
    if row is not None:
        _write_rows(out / "mc_cross_check.csv", "mc_mean,std_err,pde_value,z_score", [row])
        manifest.outputs.append(str(out / "mc_cross_check.csv"))
        print(f"cross-check z = {row[3]:.3f} (mc {row[0]:.5f} +- {row[1]:.5f}, "
              f"pde {row[2]:.5f})")
    return EXIT_OK


def cmd_check(args, cfg: dict, out: Path, manifest) -> int:
    """Identity and invariant battery on the configured scenario."""
    scenario = parse_scenario(cfg, Path(args.config).parent)
    base = scenario if isinstance(scenario.phase, Snapping) else \
        scenario.with_phase(Snapping(kappa=2.0))
    kappa = base.phase.kappa_eff
    rng = np.random.default_rng(scenario.seed)
    results = []

    err = check_resolvent_identity(base, kappa=kappa, alpha=1.0, f="gauss")
    results.append(("resolvent-identity", err < 1e-9, err))

    form = assemble(base)
    fv = rng.standard_normal(form.n)
    gv = rng.standard_normal(form.n)
    uf = resolvent(form, 1.0, fv).u
    ug = resolvent(form, 1.0, gv).u
    gap = abs(form.inner_m(uf, gv) - form.inner_m(fv, ug))
    scale = form.norm_m(fv) * form.norm_m(gv)
    results.append(("m-symmetry", gap < 1e-10 * scale, gap))

    fc = assemble(base.with_phase(Continuous()), form.grid.merged())
    d = darn(form)
    same = np.array_equal(d.w_gap, fc.w_gap) and np.array_equal(d.mass, fc.mass)
    results.append(("darning-bitwise", same, 0.0 if same else 1.0))

    ok_markov = True
    worst = 0.0
    for _ in range(20):
        u = rng.standard_normal(form.n) * 2.0
        drop = form.quad_form(np.clip(u, 0.0, 1.0)) - form.quad_form(u)
        worst = max(worst, drop)
        ok_markov &= drop <= 1e-12 * max(1.0, abs(form.quad_form(u)))
    results.append(("unit-contraction", ok_markov, worst))

    a, b = 0.7, 3.1
    ra = resolvent(form, a, fv).u
    rb = resolvent(form, b, fv).u
    rab = resolvent(form, a, rb).u
    res_eq = float(np.max(np.abs(ra - rb - (b - a) * rab)))
    results.append(("resolvent-equation", res_eq < 1e-9 * max(1.0, float(np.max(np.abs(ra)))),
                    res_eq))

    all_ok = True
    rows = []
    for name, ok, value in results:
        print(f"check {'PASS' if ok else 'FAIL'} {name} ({value:.3e})")
        rows.append((name, "PASS" if ok else "FAIL", float(value)))
        all_ok &= ok
    _write_rows(out / "check_report.csv", "check,verdict,value", rows)
    manifest.outputs.append(str(out / "check_report.csv"))
    if not all_ok:
        raise NumericalError("invariant battery failed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stifflab",
                                description="Numerical lab for 1D diffusions with "
                                            "singular interface barriers")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in (("solve", cmd_solve), ("sweep", cmd_sweep),
                     ("mc", cmd_mc), ("check", cmd_check)):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--svg", action="store_true")
        sp.set_defaults(fn=fn)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.time()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.setdefault("scenario", {})["seed"] = args.seed
            for tbl in ("mc",):
                if tbl in cfg:
                    cfg[tbl]["seed"] = args.seed
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        manifest = new_manifest(args.command, args.config, __version__)
        code = args.fn(args, cfg, out, manifest)
        manifest.wall_clock_s = time.time() - t0
        mpath = out / f"manifest_{manifest.run_id}.json"
        manifest.outputs.append(str(mpath))
        manifest.write(mpath)
        return code
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except StiffLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
