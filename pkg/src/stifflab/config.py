"""TOML configuration parsing for the command-line surface.

One file describes one experiment: a ``[scenario]`` table plus one of
``[solve]``, ``[sweep]``, ``[mc]``.  Validation errors name the offending
key.  Sweep configs may reference a shipped preset by name; explicit keys
override the preset's.
"""

from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

from .errors import ConfigError
from .measures import BarrierSpec, TabulatedMeasure, UniformDensityMeasure, conductivity_family, lejay_barrier
from .scenario import (
    Continuous,
    EpsBarrier,
    MeasureSpec,
    Scenario,
    Separate,
    Snapping,
)
from .sweeps import SweepSpec

PRESET_DIR = Path(__file__).parent / "presets"


def load_toml(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _require(tbl: dict, key: str, where: str):
    if key not in tbl:
        raise ConfigError(f"missing key '{key}' in [{where}]")
    return tbl[key]


def parse_measure(tbl: dict, where: str, base_dir: Path) -> MeasureSpec:
    kind = tbl.get("kind", "lebesgue")
    if kind == "lebesgue":
        return MeasureSpec("lebesgue", scale=float(tbl.get("scale", 1.0)))
    if kind == "lebesgue-plus-cantor":
        support = tbl.get("support", [0.0, 1.0])
        if len(support) != 2:
            raise ConfigError(f"[{where}].support must be [lo, hi]")
        return MeasureSpec("lebesgue-plus-cantor", scale=float(tbl.get("scale", 1.0)),
                           level=int(tbl.get("level", 20)),
                           support=(float(support[0]), float(support[1])))
    if kind == "conductivity":
        family = _require(tbl, "family", where)
        if family == "const-one":
            cond = conductivity_family("const-one")
        elif family == "power-cusp":
            cond = conductivity_family("power-cusp", beta=float(_require(tbl, "beta", where)))
        elif family == "custom-table":
            cond = conductivity_family("custom-table",
                                       breakpoints=_require(tbl, "breakpoints", where),
                                       values=_require(tbl, "values", where))
        else:
            raise ConfigError(f"[{where}].family '{family}' unknown")
        return MeasureSpec("conductivity", conductivity=cond)
    if kind == "table":
        path = base_dir / str(_require(tbl, "path", where))
        return MeasureSpec("table", table=TabulatedMeasure.from_csv(path))
    raise ConfigError(f"[{where}].kind '{kind}' unknown")


def parse_barrier(tbl: dict, where: str) -> BarrierSpec:
    eps = float(_require(tbl, "eps", where))
    gtbl = tbl.get("gamma", {"kind": "lejay", "kappa": 1.0, "alpha_exp": -1.0})
    kind = gtbl.get("kind", "lejay")
    if kind == "lejay":
        return lejay_barrier(eps, float(gtbl.get("kappa", 1.0)),
                             float(gtbl.get("alpha_exp", -1.0)))
    if kind == "uniform":
        dens = float(_require(gtbl, "density", where + ".gamma"))
        return BarrierSpec(eps, UniformDensityMeasure(-eps, eps, scale=dens))
    raise ConfigError(f"[{where}.gamma].kind '{kind}' unknown")


def parse_phase(tbl: dict, where: str = "scenario.phase"):
    kind = _require(tbl, "kind", where)
    if kind == "separate":
        return Separate()
    if kind == "continuous":
        return Continuous()
    if kind == "snapping":
        kappa = tbl.get("kappa")
        gamma_bar = tbl.get("gamma_bar")
        if (kappa is None) == (gamma_bar is None):
            raise ConfigError(f"[{where}] snapping needs exactly one of kappa / gamma_bar")
        return Snapping(kappa=None if kappa is None else float(kappa),
                        gamma_bar=None if gamma_bar is None else float(gamma_bar),
                        alpha=float(tbl.get("alpha", 0.5)))
    if kind == "eps-barrier":
        return EpsBarrier(parse_barrier(tbl, where))
    raise ConfigError(f"[{where}].kind '{kind}' unknown")


def parse_scenario(cfg: dict, base_dir: Path) -> Scenario:
    tbl = cfg.get("scenario")
    if tbl is None:
        raise ConfigError("missing [scenario] table")
    L = float(tbl.get("L", 5.0))
    phase = parse_phase(_require(tbl, "phase", "scenario"))
    if isinstance(phase, EpsBarrier) and phase.barrier.epsilon >= L:
        raise ConfigError(
            f"[scenario.phase].eps = {phase.barrier.epsilon} must be smaller than "
            f"[scenario].L = {L}")
    grid_h = tbl.get("grid_h")
    grid_n_half = tbl.get("grid_n_half")
    if grid_h is None and grid_n_half is None:
        grid_h = 0.01
    return Scenario(
        speed=parse_measure(tbl.get("speed", {}), "scenario.speed", base_dir),
        resistance=parse_measure(tbl.get("resistance", {}), "scenario.resistance", base_dir),
        L=L,
        phase=phase,
        grid_h=None if grid_h is None else float(grid_h),
        grid_n_half=None if grid_n_half is None else int(grid_n_half),
        barrier_cells=int(tbl.get("barrier_cells", 16)),
        seed=int(tbl.get("seed", 0)),
    )


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path) -> dict:
    """Load a config file, resolving a sweep preset reference if present."""
    cfg = load_toml(path)
    preset_name = cfg.get("sweep", {}).get("preset")
    if preset_name:
        preset_path = PRESET_DIR / f"{preset_name}.toml"
        if not preset_path.exists():
            known = sorted(p.stem for p in PRESET_DIR.glob("*.toml"))
            raise ConfigError(f"[sweep].preset '{preset_name}' unknown; shipped presets: {known}")
        cfg = _merge(load_toml(preset_path), cfg)
    return cfg


def parse_sweep(cfg: dict, base_dir: Path) -> SweepSpec:
    tbl = cfg.get("sweep")
    if tbl is None:
        raise ConfigError("missing [sweep] table")
    scenario = parse_scenario(cfg, base_dir)
    n_max = int(tbl.get("n_max", 6))
    return SweepSpec(
        scenario=scenario,
        kappa=float(tbl.get("kappa", 1.0)),
        alpha_exp=float(tbl.get("alpha_exp", -1.0)),
        eps0=float(tbl.get("eps0", 0.2)),
        n_values=tuple(range(n_max + 1)),
        target=str(tbl.get("target", "auto")),
        probes=tuple(tbl.get("probes", ["odd-exp"])),
        alphas=tuple(float(a) for a in tbl.get("alphas", [1.0])),
        barrier_cells=int(tbl.get("barrier_cells", scenario.barrier_cells)),
    )
