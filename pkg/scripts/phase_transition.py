#!/usr/bin/env python3
"""Run the three barrier-exponent regimes and tabulate resolvent convergence.

Writes one combined CSV (and optionally SVG) per regime under --out-dir and
prints the error table.  The limit forms are the split line, the jump-coupled
line (kappa = 2 / total resistance), and the plain line.
"""

import argparse
from pathlib import Path

from stifflab.scenario import Continuous, brownian_scenario
from stifflab.sweeps import SweepSpec, run_phase_sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="out/phase_transition")
    ap.add_argument("--kappa", type=float, default=1.0)
    ap.add_argument("--eps0", type=float, default=0.2)
    ap.add_argument("--n-max", type=int, default=6)
    ap.add_argument("--grid-h", type=float, default=0.01)
    ap.add_argument("--box-L", type=float, default=5.0)
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = brownian_scenario(L=args.box_L, phase=Continuous(), grid_h=args.grid_h)

    for alpha_exp in (-2.0, -1.0, 0.0):
        spec = SweepSpec(scenario=scenario, kappa=args.kappa, alpha_exp=alpha_exp,
                         eps0=args.eps0, n_values=tuple(range(args.n_max + 1)),
                         probes=("odd-exp",), alphas=(1.0,), barrier_cells=16)
        rep = run_phase_sweep(spec, run_id=f"exp{alpha_exp:g}")
        rep.to_csv(out / "phase_transition.csv", append=True)
        errs = rep.errors_for("odd-exp", 1.0)
        print(f"alpha_exp = {alpha_exp:+.0f}  ->  limit: {rep.target}")
        for row, err in zip([r for r in rep.rows if r.alpha == 1.0], errs):
            print(f"   n={row.n}  eps={row.eps:<9.3g} gamma_bar={row.gamma_bar_n:<9.3g} "
                  f"l2_error={err:.3e}  jump={row.jump:+.3e}")
        if args.svg:
            from stifflab.svgplot import line_chart

            eps = [r.eps for r in rep.rows if r.alpha == 1.0]
            line_chart([(rep.target, eps, errs)],
                       out / f"errors_{rep.target}.svg",
                       title=f"alpha_exp={alpha_exp:g} -> {rep.target}",
                       xlabel="eps", ylabel="L2 error", logx=True, logy=True)
    print(f"report: {out / 'phase_transition.csv'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
