"""Config-driven command line front end.

Commands: ``integrate``, ``convert``, ``simulate``, ``stationary``,
``fpe``, and ``experiment <family>``.  Configuration is a single JSON file
(strictly validated: unknown keys are rejected); ``--seed``, ``--out``,
``--paths``, ``--dt``, and ``--format`` override config fields.  Exit
codes: 0 success, 2 invalid configuration, 3 numeric divergence.  stderr
carries diagnostics; stdout prints one final summary line.  Output files
are written atomically (temp file, then rename), so a run is reproducible
byte for byte from ``(config, seed)``.

``NOISECALC_THREADS`` caps worker threads for the experiment command
(0 = auto); results do not depend on the thread count.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import expr as xp
from .fokker_planck import FpeProblem, GridDensity, evolve_fpe, relative_entropy, stationary_density
from .integrals import EvaluationRule, convergence_table
from .paths import SeedSpec, TimeGrid, generate_brownian
from .physics import (
    FAMILIES,
    LangevinParams,
    RelativisticParams,
    boundary_hitting_study,
    family_models,
    rest_start_diagnostics,
)
from .sde import Interpretation, SdeModel, from_ito, to_ito
from .solvers import McConfig, Reflect, STOP_ON_VIOLATION, SolverScheme, simulate_ensemble

__all__ = ["main", "ConfigError", "NumericError"]


class ConfigError(ValueError):
    """Invalid configuration: maps to exit code 2."""


class NumericError(RuntimeError):
    """Numeric divergence in an otherwise valid run: exit code 3."""


def _check_keys(block: dict, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _get(block: dict, key: str, default=None, required: bool = False):
    if required and key not in block:
        raise ConfigError(f"missing required key {key!r}")
    return block.get(key, default)


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fp:
            cfg = json.load(fp)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    _check_keys(cfg, {"model", "run", "outputs", "integrate", "convert",
                      "stationary", "fpe", "experiment"}, "config root")
    return cfg


def _parse_expr(src: str, what: str) -> xp.Expr:
    try:
        return xp.parse(src)
    except xp.ExprSyntaxError as exc:
        raise ConfigError(f"cannot parse {what}: {exc}") from None


def _seed_from(cfg: dict, override: int | None) -> SeedSpec:
    run = cfg.get("run", {})
    raw = run.get("seed", {"master": 0, "stream": 0})
    if isinstance(raw, int):
        raw = {"master": raw, "stream": 0}
    _check_keys(raw, {"master", "stream"}, "run.seed")
    master = raw.get("master", 0) if override is None else override
    return SeedSpec(int(master), int(raw.get("stream", 0)))


def _build_custom_model(block: dict) -> tuple[SdeModel, xp.Expr, xp.Expr]:
    _check_keys(block, {"f", "g", "interpretation", "domain", "x0"}, "model.custom")
    f_expr = _parse_expr(_get(block, "f", required=True), "model.custom.f")
    g_expr = _parse_expr(_get(block, "g", required=True), "model.custom.g")
    interp = Interpretation.from_name(_get(block, "interpretation", "ito"))
    dom = _get(block, "domain", [None, None])
    if not isinstance(dom, list) or len(dom) != 2:
        raise ConfigError("model.custom.domain must be a 2-element list")
    lo = -math.inf if dom[0] is None else float(dom[0])
    hi = math.inf if dom[1] is None else float(dom[1])
    x0 = float(_get(block, "x0", required=True))
    try:
        dg = xp.vector_fn(xp.derivative(g_expr))
    except xp.DerivativeUnsupportedError:
        dg = None
    try:
        model = SdeModel(
            f=xp.vector_fn(f_expr), g=xp.vector_fn(g_expr), dgdx=dg,
            interpretation=interp, x0=x0, domain=(lo, hi), label="custom",
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return model, f_expr, g_expr


def _langevin_params(params: dict) -> LangevinParams:
    _check_keys(params, {"m", "gamma", "sigma", "v0", "u0"}, "model.params")
    try:
        return LangevinParams(
            m=float(params.get("m", 1.0)),
            gamma=float(params.get("gamma", 1.0)),
            sigma=float(params.get("sigma", 1.0)),
            v0=float(params.get("v0", 1.0)),
            u0=None if params.get("u0") is None else float(params["u0"]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _family_params(family: str, params: dict):
    if family == "relativistic":
        _check_keys(params, {"M", "p0"}, "model.params")
        return RelativisticParams(M=float(params.get("M", 1.0)),
                                  p0=float(params.get("p0", 0.0)))
    p = _langevin_params(params)
    if family == "langevin2" and p.u0 is None:
        p = LangevinParams(m=p.m, gamma=p.gamma, sigma=p.sigma, v0=p.v0, u0=p.v0)
    return p


def _build_model(cfg: dict):
    block = cfg.get("model")
    if not isinstance(block, dict):
        raise ConfigError("config needs a 'model' object")
    if "custom" in block:
        _check_keys(block, {"custom"}, "model")
        return _build_custom_model(block["custom"])
    _check_keys(block, {"family", "interpretation", "params"}, "model")
    family = _get(block, "family", required=True)
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}; expected one of {FAMILIES}")
    interp = Interpretation.from_name(_get(block, "interpretation", "ito"))
    trio = family_models(family, _family_params(family, block.get("params", {})))
    return trio.member(interp), None, None


def _mc_config(cfg: dict, args, default_boundary=None) -> McConfig:
    run = cfg.get("run", {})
    _check_keys(run, {"n_paths", "dt", "horizon", "seed", "boundary", "scheme",
                      "record", "record_stride"}, "run")
    boundary = run.get("boundary", default_boundary)
    if isinstance(boundary, dict):
        _check_keys(boundary, {"reflect"}, "run.boundary")
        a, b = boundary["reflect"]
        boundary = Reflect(float(a), math.inf if b is None else float(b))
    elif boundary in ("stop", STOP_ON_VIOLATION):
        boundary = STOP_ON_VIOLATION
    elif boundary not in (None, "none"):
        raise ConfigError(f"unknown boundary {boundary!r}")
    elif boundary == "none":
        boundary = None
    try:
        return McConfig(
            n_paths=int(args.paths or run.get("n_paths", 100)),
            dt=float(args.dt or run.get("dt", 1e-3)),
            horizon=float(run.get("horizon", 1.0)),
            seed=_seed_from(cfg, args.seed),
            boundary=boundary,
            record=run.get("record", "path"),
            record_stride=int(run.get("record_stride", 1)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _scheme_from(cfg: dict) -> SolverScheme:
    name = cfg.get("run", {}).get("scheme", "euler_maruyama_ito_form")
    aliases = {
        "euler_maruyama_ito_form": SolverScheme.EULER_MARUYAMA_ITO_FORM,
        "euler": SolverScheme.EULER_MARUYAMA_ITO_FORM,
        "left": SolverScheme.DIRECT_LEFT,
        "midpoint": SolverScheme.DIRECT_MIDPOINT_HEUN,
        "right": SolverScheme.DIRECT_RIGHT_PREDICTOR_CORRECTOR,
    }
    try:
        return aliases[name]
    except KeyError:
        raise ConfigError(f"unknown scheme {name!r}") from None


def _out_dir(cfg: dict, args) -> Path:
    outputs = cfg.get("outputs", {})
    _check_keys(outputs, {"dir", "format"}, "outputs")
    fmt = args.format or outputs.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown output format {fmt!r}")
    out = Path(args.out or outputs.get("dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, payload) -> None:
    _write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


class _Csv:
    def __init__(self):
        self.rows: list[str] = []

    def write(self, text: str) -> None:
        self.rows.append(text)

    def text(self) -> str:
        return "".join(self.rows)


def _hk_form(model: SdeModel) -> SdeModel:
    """The HK-form coefficients of the model's law (identity for HK tags)."""
    if model.interpretation is Interpretation.HAENGGI_KLIMONTOVICH:
        return model
    return from_ito(to_ito(model), Interpretation.HAENGGI_KLIMONTOVICH)


# --- commands ---------------------------------------------------------------


def _cmd_integrate(cfg: dict, args) -> str:
    block = cfg.get("integrate", {})
    _check_keys(block, {"phi", "rules", "t0", "t1", "base_steps", "levels"}, "integrate")
    phi_expr = _parse_expr(block.get("phi", "x"), "integrate.phi")
    phi = xp.vector_fn(phi_expr)
    rules = [EvaluationRule.from_name(r) for r in block.get("rules",
             ["left", "midpoint", "right"])]
    t0 = float(block.get("t0", 0.0))
    t1 = float(block.get("t1", 1.0))
    base = int(block.get("base_steps", 1024))
    levels = int(block.get("levels", 6))
    if base < 2 or base % 2:
        raise ConfigError("integrate.base_steps must be even and >= 2")
    if levels < 0:
        raise ConfigError("integrate.levels must be >= 0")
    seed = _seed_from(cfg, args.seed)
    out = _out_dir(cfg, args)

    path = generate_brownian(TimeGrid.uniform(t0, t1, base), seed)
    wrote = []
    diverged = False
    for rule in rules:
        table = convergence_table(lambda x: phi(x, 0.0), path, levels,
                                  seed.shifted(1), rule)
        buf = _Csv()
        table.write_csv(buf)
        _write_text(out / f"convergence_{rule.value}.csv", buf.text())
        wrote.append(f"convergence_{rule.value}.csv")
        diverged = diverged or table.diverged
    if diverged:
        raise NumericError("divergent sums in at least one convergence table")
    return f"integrate: wrote {len(wrote)} table(s) to {out}"


def _cmd_convert(cfg: dict, args) -> str:
    model, f_expr, g_expr = _build_model(cfg)
    if f_expr is None:
        raise ConfigError("convert requires a custom model")
    block = cfg.get("convert", {})
    _check_keys(block, {"xs"}, "convert")
    lo, hi, n = block.get("xs", [-2.0, 2.0, 101])
    n = int(n)
    if n < 1 or not float(lo) < float(hi):
        raise ConfigError("convert.xs must be [lo, hi, n] with lo < hi and n >= 1")
    xs = np.linspace(float(lo), float(hi), n)
    out = _out_dir(cfg, args)

    if model.dgdx is None:
        print("warning: symbolic derivative unavailable; using finite differences",
              file=sys.stderr)
    ito = to_ito(model)
    f_orig = np.asarray(model.f(xs, 0.0), dtype=float)
    f_ito = np.asarray(ito.f(xs, 0.0), dtype=float)
    rows = ["x,f_original,f_ito\n"]
    for x, a, b in zip(xs, f_orig, f_ito):
        rows.append(f"{float(x)!r},{float(a)!r},{float(b)!r}\n")
    _write_text(out / "converted_drift.csv", "".join(rows))
    return f"convert: wrote converted_drift.csv to {out}"


def _cmd_simulate(cfg: dict, args) -> str:
    model, _, _ = _build_model(cfg)
    mc = _mc_config(cfg, args)
    scheme = _scheme_from(cfg)
    out = _out_dir(cfg, args)
    try:
        result = simulate_ensemble(model, scheme, mc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    summary = result.summary
    if not (math.isfinite(summary.terminal_mean) or summary.n_completed == 0):
        raise NumericError("non-finite ensemble statistics")
    _write_json(out / "summary.json", summary.to_json_dict())
    edges, dens = summary.histogram
    rows = ["bin_left,bin_right,density\n"]
    for i in range(dens.size):
        rows.append(f"{float(edges[i])!r},{float(edges[i + 1])!r},{float(dens[i])!r}\n")
    _write_text(out / "histogram.csv", "".join(rows))
    wrote = 2
    if result.results is not None and mc.n_paths == 1:
        buf = _Csv()
        result.results[0].path.write_csv(buf)
        _write_text(out / "path.csv", buf.text())
        wrote += 1
    return f"simulate: wrote {wrote} file(s) to {out}"


def _stationary_block(cfg: dict) -> tuple[tuple[float, float], int]:
    block = cfg.get("stationary", {})
    _check_keys(block, {"interval", "n_cells"}, "stationary")
    a, b = block.get("interval", [-3.0, 3.0])
    n_cells = int(block.get("n_cells", 256))
    if not float(a) < float(b) or n_cells < 2:
        raise ConfigError("stationary.interval must satisfy a < b with n_cells >= 2")
    return (float(a), float(b)), n_cells


def _cmd_stationary(cfg: dict, args) -> str:
    model, _, _ = _build_model(cfg)
    interval, n_cells = _stationary_block(cfg)
    out = _out_dir(cfg, args)
    hk = _hk_form(model)
    try:
        dens = stationary_density(hk.f, hk.g, interval, n_cells)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    buf = _Csv()
    dens.write_csv(buf)
    _write_text(out / "density.csv", buf.text())
    return f"stationary: wrote density.csv to {out}"


def _cmd_fpe(cfg: dict, args) -> str:
    model, _, _ = _build_model(cfg)
    block = cfg.get("fpe", {})
    _check_keys(block, {"interval", "n_cells", "dt", "horizon", "initial",
                        "snapshot_every"}, "fpe")
    a, b = (float(v) for v in block.get("interval", [-3.0, 3.0]))
    n_cells = int(block.get("n_cells", 256))
    horizon = float(block.get("horizon", 10.0))
    snap = float(block.get("snapshot_every", 0.1))
    init = block.get("initial", {"kind": "point", "x0": model.x0})
    _check_keys(init, {"kind", "x0", "center", "width"}, "fpe.initial")
    kind = init.get("kind", "point")
    if kind == "point":
        initial = GridDensity.point_mass(a, b, n_cells, float(init.get("x0", model.x0)))
    elif kind == "gaussian":
        c = float(init.get("center", 0.0))
        w = float(init.get("width", 0.5))
        initial = GridDensity.from_function(
            lambda x: np.exp(-0.5 * ((x - c) / w) ** 2), a, b, n_cells)
    elif kind == "uniform":
        initial = GridDensity.uniform(a, b, n_cells)
    else:
        raise ConfigError(f"unknown initial kind {kind!r}")

    hk = _hk_form(model)
    try:
        problem = FpeProblem(f=hk.f, g=hk.g, interval=(a, b), initial=initial,
                             dgdx=hk.dgdx)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dt = block.get("dt")
    dt = 0.9 * problem.stability_bound() if dt is None else float(dt)
    try:
        result = evolve_fpe(problem, dt, horizon, snapshot_every=snap)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if not np.all(np.isfinite(result.final.values)):
        raise NumericError("forward evolution diverged")

    out = _out_dir(cfg, args)
    buf = _Csv()
    result.final.write_csv(buf)
    _write_text(out / "density.csv", buf.text())
    target = stationary_density(hk.f, hk.g, (a, b), n_cells)
    rows = ["t,H\n"]
    for t, snap_d in zip(result.times, result.snapshots):
        rows.append(f"{float(t)!r},{float(relative_entropy(snap_d, target))!r}\n")
    _write_text(out / "entropy.csv", "".join(rows))
    return f"fpe: wrote 2 file(s) to {out}"


_EXPERIMENT_DEFAULTS = {
    "dt": 1e-3,
    "n_seeds": 1000,
    "horizon": 1.0,
    "hitting": {"band": 1e-4, "n_paths": 1000, "dt": 1e-3, "horizon": 5.0},
}


def _cmd_experiment(cfg: dict, args) -> str:
    family = args.name
    if family not in FAMILIES:
        raise ConfigError(f"unknown experiment {family!r}; expected one of {FAMILIES}")
    block = cfg.get("experiment", {})
    _check_keys(block, {"dt", "n_seeds", "horizon", "hitting", "params"}, "experiment")
    dt = float(block.get("dt", _EXPERIMENT_DEFAULTS["dt"]))
    n_seeds = int(block.get("n_seeds", _EXPERIMENT_DEFAULTS["n_seeds"]))
    horizon = float(block.get("horizon", _EXPERIMENT_DEFAULTS["horizon"]))
    hit_block = {**_EXPERIMENT_DEFAULTS["hitting"], **block.get("hitting", {})}
    _check_keys(hit_block, {"band", "n_paths", "dt", "horizon"}, "experiment.hitting")
    seed = _seed_from(cfg, args.seed)
    out = _out_dir(cfg, args)

    # rest start: boundary initial data (null velocities / null momentum)
    if family == "relativistic":
        rest_params = RelativisticParams(p0=0.0)
        run_params = RelativisticParams(p0=1.0)
        level = rest_params.M
    else:
        rest_params = LangevinParams(v0=0.0, u0=0.0 if family == "langevin2" else None)
        v = math.sqrt(0.5) if family == "langevin2" else 1.0
        run_params = LangevinParams(v0=v, u0=v if family == "langevin2" else None)
        level = 0.0

    rest_trio = family_models(family, rest_params)
    report = rest_start_diagnostics(rest_trio, dt, n_seeds, seed=seed, horizon=horizon)

    run_trio = family_models(family, run_params)
    hit_cfg = McConfig(
        n_paths=int(args.paths or hit_block["n_paths"]),
        dt=float(hit_block["dt"]),
        horizon=float(hit_block["horizon"]),
        seed=seed.shifted(10_000),
        record="terminal",
    )

    workers = _thread_cap()
    if workers == 1:
        hitting = boundary_hitting_study(run_trio, level, float(hit_block["band"]), hit_cfg)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            future = pool.submit(boundary_hitting_study, run_trio, level,
                                 float(hit_block["band"]), hit_cfg)
            hitting = future.result()

    members = []
    for diag in report.members:
        entry = diag.to_json_dict()
        entry["model_family"] = family
        entry["hitting"] = hitting[diag.interpretation].to_json_dict()
        members.append(entry)
    _write_json(out / f"experiment_{family}.json",
                {"model_family": family, "members": members})
    return f"experiment: wrote experiment_{family}.json to {out}"


def _thread_cap() -> int:
    raw = os.environ.get("NOISECALC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"NOISECALC_THREADS must be an integer, got {raw!r}") from None
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


# --- entry point -------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisecalc",
        description="Stochastic-integral laboratory: left / midpoint / right "
                    "evaluation rules, drift conversions, forward equations, "
                    "and the boundary-behavior case studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in (
        ("integrate", True), ("convert", True), ("simulate", True),
        ("stationary", True), ("fpe", True), ("experiment", False),
    ):
        p = sub.add_parser(name)
        if name == "experiment":
            p.add_argument("name", help=f"one of {', '.join(FAMILIES)}")
        p.add_argument("--config", required=needs_config, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--format", choices=("csv", "json"), default=None)
    return parser


_DISPATCH = {
    "integrate": _cmd_integrate,
    "convert": _cmd_convert,
    "simulate": _cmd_simulate,
    "stationary": _cmd_stationary,
    "fpe": _cmd_fpe,
    "experiment": _cmd_experiment,
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config) if args.config else {}
        summary = _DISPATCH[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
