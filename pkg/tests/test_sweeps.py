"""Convergence lab: phase sweeps, resolvent identity, continuity, two-time laws."""

import math

import numpy as np
import pytest

from stifflab.assembly import assemble
from stifflab.errors import ArgumentError
from stifflab.evolve import resolvent, step_heat
from stifflab.mc import TwoPointProduct, estimate, run_snob
from stifflab.scenario import (
    Continuous,
    MeasureSpec,
    Scenario,
    Separate,
    Snapping,
    brownian_scenario,
    make_probe,
)
from stifflab.sweeps import (
    SweepSpec,
    check_resolvent_identity,
    kappa_lock_scan,
    limit_solution_on_doubled,
    potential_symmetry_gap,
    run_fdd_check,
    run_gamma_continuity,
    run_phase_sweep,
    two_time_functional,
)

BASE = brownian_scenario(L=5.0, phase=Continuous(), grid_h=0.02)


def quick_spec(alpha_exp, **kw):
    defaults = dict(scenario=BASE, kappa=1.0, alpha_exp=alpha_exp, eps0=0.2,
                    n_values=tuple(range(5)), probes=("odd-exp",), alphas=(1.0,),
                    barrier_cells=8)
    defaults.update(kw)
    return SweepSpec(**defaults)


# ---------------------------------------------------------------------------
# resolvent identity


def test_identity_exact_brownian():
    sc = brownian_scenario(L=5.0, grid_h=0.01)
    assert check_resolvent_identity(sc, kappa=2.0, alpha=1.0, f="gauss") < 1e-9


def test_identity_zero_data():
    sc = brownian_scenario(L=3.0, grid_h=0.05)
    assert check_resolvent_identity(sc, kappa=1.0, alpha=2.0, f="const:0") == 0.0


def test_identity_error_grid_independent():
    # exactness scales with roundoff, not with h
    sc1 = brownian_scenario(L=5.0, grid_h=0.02)
    sc2 = brownian_scenario(L=5.0, grid_h=0.01)
    e1 = check_resolvent_identity(sc1, kappa=2.0, alpha=1.0, f="gauss")
    e2 = check_resolvent_identity(sc2, kappa=2.0, alpha=1.0, f="gauss")
    assert e1 < 1e-9 and e2 < 1e-9
    assert max(e1, e2) < 10 * max(min(e1, e2), 1e-16)


def test_potential_pairing_symmetry():
    sc = brownian_scenario(L=4.0, grid_h=0.02)
    assert potential_symmetry_gap(sc, kappa=2.0, alpha=1.0, g_probe="gauss") < 1e-10


def test_identity_nonbrownian_scenario():
    from stifflab.measures import conductivity_family

    sc = Scenario(speed=MeasureSpec("lebesgue"),
                  resistance=MeasureSpec("conductivity",
                                         conductivity=conductivity_family("power-cusp",
                                                                          beta=0.5)),
                  L=4.0, phase=Continuous(), grid_h=0.02)
    assert check_resolvent_identity(sc, kappa=1.0, alpha=0.5, f="odd-exp") < 1e-9


# ---------------------------------------------------------------------------
# phase sweep


def test_three_regimes_converge_to_distinct_limits():
    finals = {}
    for aexp, target in ((-2.0, "separate"), (-1.0, "snapping"), (0.0, "continuous")):
        rep = run_phase_sweep(quick_spec(aexp))
        assert rep.target == target
        errs = rep.errors_for("odd-exp", 1.0)
        assert np.all(np.diff(errs[-3:]) < 0)
        assert errs[-1] < 1e-2
        finals[target] = errs
    # trichotomy: the three limit resolvents are pairwise far apart
    grid = BASE.with_phase(Snapping(kappa=1.0)).build_grid()
    fv = make_probe("odd-exp").on_grid(grid)
    u = {}
    u["separate"] = resolvent(assemble(BASE.with_phase(Separate()), grid), 1.0, fv).u
    u["snapping"] = resolvent(assemble(BASE.with_phase(Snapping(kappa=1.0)), grid), 1.0, fv).u
    cont = assemble(BASE.with_phase(Continuous()), grid.merged())
    u["continuous"] = limit_solution_on_doubled(cont, grid, 1.0, fv)
    mass = assemble(BASE.with_phase(Separate()), grid).mass
    names = list(u)
    for i in range(3):
        for j in range(i + 1, 3):
            d = u[names[i]] - u[names[j]]
            assert np.sqrt(np.dot(mass, d * d)) > 0.05


def test_sweep_rows_and_schema(tmp_path):
    rep = run_phase_sweep(quick_spec(-1.0, n_values=(0, 1, 2)), run_id="t1")
    assert len(rep.rows) == 3
    path = tmp_path / "report.csv"
    rep.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == ("run_id,n,eps,gamma_bar_n,hypothesis_qty,f_id,alpha,l2_error,"
                      "jump,flux_res_plus,flux_res_minus,grid_h,box_L")
    # append-only per run id
    rep2 = run_phase_sweep(quick_spec(-1.0, n_values=(0,)), run_id="t2")
    rep2.to_csv(path)
    lines = path.read_text().splitlines()
    assert len(lines) == 1 + 3 + 1
    assert lines[-1].startswith("t2,")


def test_sweep_refuses_coarse_barrier():
    with pytest.raises(ArgumentError, match="8 cells"):
        run_phase_sweep(quick_spec(-1.0, barrier_cells=4))


def test_hypothesis_quantity_monotone_for_lejay_presets():
    for aexp in (-2.0, -1.0, 0.0):
        rep = run_phase_sweep(quick_spec(aexp))
        assert not rep.hypothesis_flag


def test_sweep_threads_match_serial():
    spec = quick_spec(-1.0)
    r1 = run_phase_sweep(spec, threads=1)
    r2 = run_phase_sweep(spec, threads=4)
    np.testing.assert_array_equal(r1.errors_for("odd-exp", 1.0),
                                  r2.errors_for("odd-exp", 1.0))


def test_kappa_lock_small():
    spec = quick_spec(-1.0, n_values=tuple(range(5)))
    best_j, errs = kappa_lock_scan(spec, n=4, j_values=tuple(range(-4, 5)))
    assert best_j == 0
    assert errs[4] == errs.min()


def test_cantor_resistance_sweep_runs():
    sc = Scenario(speed=MeasureSpec("lebesgue"),
                  resistance=MeasureSpec("lebesgue-plus-cantor", level=16),
                  L=2.0, phase=Continuous(), grid_h=0.02)
    spec = SweepSpec(scenario=sc, kappa=1.0, alpha_exp=0.0, eps0=0.2,
                     n_values=(0, 1, 2, 3), probes=("odd-exp",), alphas=(1.0,),
                     barrier_cells=8, target="continuous")
    rep = run_phase_sweep(spec)
    errs = rep.errors_for("odd-exp", 1.0)
    assert np.all(np.diff(errs) < 0)
    assert not rep.hypothesis_flag


# ---------------------------------------------------------------------------
# continuity in the total resistance


def test_gamma_continuity_constant_sequence_is_zero():
    errs = run_gamma_continuity(BASE, [1.0, 1.0, 1.0], 1.0, alpha=1.0, f="odd-exp")
    assert np.max(errs) < 1e-12


def test_gamma_continuity_halving_ratios():
    gammas = [1.0 + 2.0 ** (-l) for l in range(5)]
    errs = run_gamma_continuity(BASE, gammas, 1.0, alpha=1.0, f="odd-exp")
    ratios = errs[1:] / errs[:-1]
    assert np.all((0.3 < ratios) & (ratios < 0.7))


def test_gamma_to_infinity_jump_grows_to_separate():
    grid = BASE.with_phase(Snapping(kappa=1.0)).build_grid()
    fv = make_probe("odd-exp").on_grid(grid)
    sep = assemble(BASE.with_phase(Separate()), grid)
    u_sep = resolvent(sep, 1.0, fv).u
    jump_sep = u_sep[grid.i0p] - u_sep[grid.i0m]
    jumps = []
    for l in range(6):
        form = assemble(BASE.with_phase(Snapping(gamma_bar=2.0 ** l)), grid)
        u = resolvent(form, 1.0, fv).u
        jumps.append(u[grid.i0p] - u[grid.i0m])
    assert np.all(np.diff(jumps) > 0)
    assert abs(jumps[-1] - jump_sep) < abs(jumps[0] - jump_sep) * 0.1


def test_gamma_continuity_limits_at_ends():
    errs0 = run_gamma_continuity(BASE, [2.0 ** (-l) for l in range(2, 7)], 0.0,
                                 alpha=1.0, f="odd-exp")
    assert np.all(np.diff(errs0) < 0)
    errs_inf = run_gamma_continuity(BASE, [2.0 ** l for l in range(2, 7)], math.inf,
                                    alpha=1.0, f="odd-exp")
    assert np.all(np.diff(errs_inf) < 0)


def test_gamma_continuity_rejects_bad_sequence():
    with pytest.raises(ArgumentError):
        run_gamma_continuity(BASE, [0.0], 1.0, alpha=1.0, f="gauss")


# ---------------------------------------------------------------------------
# two-time functionals


def test_two_time_with_trivial_second_factor_reduces_to_marginal():
    form = assemble(BASE.with_phase(Snapping(kappa=1.0)))
    g = form.grid
    h = make_probe("box:-1:1").on_grid(g)
    h = h / np.dot(form.mass, h)
    f1 = make_probe("box:0.5:1.5").on_grid(g)
    ones = np.ones(g.n)
    val2 = two_time_functional(form, h, f1, ones, 0.25, 0.75, dt=2.5e-3)
    run = step_heat(form, f1, 2.5e-3, 0.25)
    val1 = float(np.dot(form.mass, h * run.at(0.25)))
    assert val2 == pytest.approx(val1, rel=1e-10)


def test_two_time_ordering_validation():
    form = assemble(BASE.with_phase(Snapping(kappa=1.0)))
    ones = np.ones(form.n)
    with pytest.raises(ArgumentError):
        two_time_functional(form, ones, ones, ones, 0.75, 0.25, dt=1e-3)


def test_fdd_convergence_to_snapping_limit():
    spec = quick_spec(-1.0, n_values=(0, 1, 2, 3))
    out = run_fdd_check(spec, 0.25, 0.75, "box:0.5:1.5", "minus-side", "box:-1:1",
                        dt=2.5e-3)
    assert np.all(np.diff(out["diffs"]) < 0)
    assert out["diffs"][-1] < 1e-2


def test_fdd_mc_spot_check():
    # same two-time quantity via snapping-out paths, within 3 sigma
    spec = quick_spec(-1.0, n_values=(0,))
    t1, t2 = 0.25, 0.75
    out = run_fdd_check(spec, t1, t2, "box:0.5:1.5", "minus-side", "box:-1:1",
                        dt=2.5e-3)
    kappa = 2.0 / spec.gamma_bar(0)
    rng = np.random.default_rng(7)
    n_paths = 40_000
    # sample x0 ~ h*m on the limit grid (uniform on [-1,1] under Lebesgue m)
    xs = rng.uniform(-1.0, 1.0, n_paths)
    sides = np.where(xs >= 0, 1, -1).astype(np.int8)
    ens = run_snob((sides, np.abs(xs)), kappa=kappa, h=2.5e-3, T=t2,
                   n_paths=n_paths, seed=77, snapshot_times=[t1, t2])
    mc, se = estimate(ens, TwoPointProduct(t1, t2, make_probe("box:0.5:1.5"),
                                           make_probe("minus-side")))
    assert abs(mc - out["limit"]) < 3 * se + 5e-3
