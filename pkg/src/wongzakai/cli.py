"""Command-line front end: ``wongzakai {simulate,converge,validate}``.

Every subcommand reads one JSON experiment file (``--config``), validates it
against :data:`CONFIG_SCHEMA` (unknown keys are rejected) and writes its
artifacts to ``--out`` (default: ``output.dir`` from the config, else
``out``).  The environment variable ``SPDE_SEED`` overrides
``monte_carlo.base_seed``.

Exit codes: 0 success, 1 validation probes failed, 2 bad configuration,
3 numerical blow-up (the message names seed, path and time).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .catalog import BUILDERS, build_model, default_x0
from .errors import ArgumentError, NumericalError, ParameterError, StructuralError
from .model import validate_model
from .noise import BrownianLattice, dump_lattice, gaussian_even_moment
from .schemes import SCHEMES, SchemeConfig, Trajectory, simulate
from .study import PAIRS, StudySpec, run_study, synthetic_report

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

_POS_INT = {"type": "integer", "minimum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"type": "string", "enum": sorted(BUILDERS)},
                "params": {"type": "object"},
            },
        },
        "x0": {"type": "array", "items": {"type": "number"}},
        "scheme": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m": {"oneOf": [_POS_INT, {"type": "array", "items": _POS_INT, "minItems": 1}]},
                "m_fine": _POS_INT,
                "inner_steps": _POS_INT,
                "p": {"type": "number"},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "schemes": {"type": "array", "items": {"enum": list(SCHEMES)}, "minItems": 1},
                "pair": {"enum": list(PAIRS)},
            },
        },
        "monte_carlo": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": _POS_INT,
                "base_seed": {"type": "integer", "minimum": 0},
                "path": {"type": "integer", "minimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dir": {"type": "string"},
                "formats": {"type": "array", "items": {"enum": ["json", "csv"]}},
                "lattice": {"enum": ["none", "csv", "binary"]},
            },
        },
        "self_test": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"constant": {"type": "number", "exclusiveMinimum": 0}, "rate": {"type": "number"}},
        },
    },
}


class ConfigError(Exception):
    pass


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None
    seed = os.environ.get("SPDE_SEED")
    if seed is not None:
        try:
            seed_val = int(seed)
        except ValueError:
            raise ConfigError(f"SPDE_SEED must be an integer, got {seed!r}") from None
        if seed_val < 0:
            raise ConfigError("SPDE_SEED must be nonnegative")
        cfg.setdefault("monte_carlo", {})["base_seed"] = seed_val
    return cfg


def _model(cfg):
    block = cfg.get("model")
    if block is None:
        raise ConfigError("config needs a model block")
    model = build_model(block["name"], **block.get("params", {}))
    x0 = default_x0(model) if "x0" not in cfg else np.asarray(cfg["x0"], dtype=float)
    if x0.shape != (model.dim,):
        raise ConfigError(f"x0 has length {x0.size}, model dimension is {model.dim}")
    return model, x0


def _out_dir(cfg, out) -> Path:
    d = Path(out or cfg.get("output", {}).get("dir", "out"))
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_simulate(cfg: dict, out=None, workers: int = 1, echo=print) -> int:
    model, x0 = _model(cfg)
    sch = cfg.get("scheme", {})
    m = sch.get("m", 16)
    if isinstance(m, list):
        if len(m) != 1:
            raise ConfigError("simulate takes a single m")
        m = m[0]
    mc = cfg.get("monte_carlo", {})
    seed, path = mc.get("base_seed", 0), mc.get("path", 0)
    T, m_fine = float(sch.get("T", 1.0)), sch.get("m_fine", 1024)
    lat = BrownianLattice.sample(seed, model.r, T, m_fine, path)
    cfg_m = SchemeConfig(m, sch.get("inner_steps")).resolve(m_fine)
    d = _out_dir(cfg, out)
    for scheme in sch.get("schemes", ["wz", "em", "ref"]):
        try:
            states = simulate(scheme, model, x0, lat.increments[None], T, cfg_m.m, inner_steps=cfg_m.inner_steps)[0]
        except NumericalError as exc:
            exc.seed, exc.path, exc.m = seed, path, m
            raise
        level = m_fine if scheme == "ref" else m
        traj = Trajectory(lat.times, states, scheme, level, model.space, seed, path)
        name = d / f"trajectory_{scheme}.csv"
        traj.to_csv(name)
        echo(f"wrote {name}")
        if model.name == "hjmm":
            _hjmm_outputs(model, states[-1], d, scheme, echo)
    fmt = cfg.get("output", {}).get("lattice", "none")
    if fmt != "none":
        name = d / ("lattice.bin" if fmt == "binary" else "lattice.csv")
        dump_lattice(lat, name, binary=fmt == "binary")
        echo(f"wrote {name}")
    return EXIT_OK


def _hjmm_outputs(model, terminal, d, scheme, echo):
    from .hjmm import ForwardCurve, write_bond_prices_csv, write_curve_csv

    params = model.params["hjmm"]
    curve = ForwardCurve(params.x, terminal[:-1], params.beta)
    write_curve_csv(curve, d / f"curve_{scheme}.csv")
    maturities = [x for x in (0.25, 0.5, 1, 2, 3, 5, 7, 10, 15, 20, 30) if x <= params.x[-1]]
    write_bond_prices_csv(curve, maturities, d / f"bonds_{scheme}.csv")
    echo(f"wrote {d / f'curve_{scheme}.csv'} and {d / f'bonds_{scheme}.csv'}")


def _study_spec(cfg) -> StudySpec:
    sch, mc = cfg.get("scheme", {}), cfg.get("monte_carlo", {})
    block = cfg.get("model", {"name": "nemytskii_heat"})
    m_list = sch.get("m", [4, 8, 16, 32, 64])
    m_list = m_list if isinstance(m_list, list) else [m_list]
    if len(m_list) < 3:
        raise ConfigError("converge needs at least 3 values of m")
    spec = StudySpec(
        model=block["name"], params=block.get("params", {}), x0=cfg.get("x0"),
        T=float(sch.get("T", 1.0)), p=float(sch.get("p", 2.0)), m_list=m_list,
        m_fine=sch.get("m_fine", 1024), paths=mc.get("paths", 200), base_seed=mc.get("base_seed", 0),
        pair=sch.get("pair", "WZ-vs-ref"), inner_steps=sch.get("inner_steps"),
    )
    spec.validate()
    return spec


def cmd_converge(cfg: dict, out=None, workers: int = 1, echo=print) -> int:
    spec = _study_spec(cfg)
    if "self_test" in cfg:
        st = cfg["self_test"]
        report = synthetic_report(spec, st.get("constant", 1.0), st.get("rate"))
    else:
        build_model(spec.model, **spec.params)  # parameter errors surface before any work
        report = run_study(spec, workers=workers, log=echo)
    d = _out_dir(cfg, out)
    formats = cfg.get("output", {}).get("formats", ["json", "csv"])
    if "json" in formats:
        report.to_json(d / "report.json")
    if "csv" in formats:
        report.to_csv(d / "report.csv")
    if report.slope is None:
        echo("slope: undefined (degenerate estimates)")
    else:
        echo(f"slope: {report.slope:.6f}  (predicted {-(spec.p - 1):g})")
    return EXIT_OK


def semigroup_law_probes(model, seed: int = 0) -> list:
    """``S_0 = I`` and ``S_{t+s} = S_t S_s`` on sampled states."""
    sg = model.semigroup
    x = model.sample_states(np.random.default_rng(seed), 5)
    norm = model.space.norm_array
    # diagonal semigroups are exact; grid shifts compose interpolations
    tol = 1e-12 if sg.diagonal else 1e-3
    out = []
    err0 = float(np.max(norm(sg.apply(0.0, x) - x)))
    out.append({"name": "semigroup_identity", "passed": err0 == 0.0, "value": err0, "threshold": 0.0})
    worst = 0.0
    for t, s in [(0.1, 0.25), (0.5, 0.5), (0.03, 1.0)]:
        lhs, rhs = sg.apply(t + s, x), sg.apply(t, sg.apply(s, x))
        worst = max(worst, float(np.max(norm(lhs - rhs) / np.maximum(norm(lhs), 1e-300))))
    out.append({"name": "semigroup_law", "passed": worst <= tol, "value": worst, "threshold": tol})
    return out


def moment_probes(seed: int = 0, samples: int = 200_000) -> list:
    """Closed-form Gaussian even moments and a seeded Monte Carlo check."""
    out = []
    for q, exact in [(1, 1.0), (2, 3.0), (3, 15.0)]:
        err = abs(gaussian_even_moment(q, 1.0) - exact)
        out.append({"name": f"gaussian_moment[q={q}]", "passed": err <= 1e-12, "value": err, "threshold": 1e-12})
    z = np.random.default_rng(seed).standard_normal(samples)
    for q in (1, 2):
        vals = z ** (2 * q)
        se = vals.std(ddof=1) / np.sqrt(samples)
        dev = abs(vals.mean() - gaussian_even_moment(q, 1.0)) / se
        out.append({"name": f"gaussian_moment_mc[q={q}]", "passed": dev <= 3.0, "value": float(dev), "threshold": 3.0})
    return out


def cmd_validate(cfg: dict, out=None, workers: int = 1, echo=print) -> int:
    if "model" in cfg:
        models = [(cfg["model"]["name"], cfg["model"].get("params", {}))]
    else:
        models = [(name, {}) for name in sorted(BUILDERS)]
    result = {"models": [], "moments": moment_probes()}
    for name, params in models:
        model = build_model(name, **params)
        rep = validate_model(model).to_dict()
        rep["probes"] += semigroup_law_probes(model)
        rep["passed"] = all(p["passed"] for p in rep["probes"])
        result["models"].append(rep)
        failed = [p["name"] for p in rep["probes"] if not p["passed"]]
        echo(f"{name}: {'pass' if not failed else 'FAIL ' + ', '.join(failed)}")
    result["passed"] = all(r["passed"] for r in result["models"]) and all(p["passed"] for p in result["moments"])
    d = _out_dir(cfg, out)
    with open(d / "validation.json", "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    echo(f"validation {'passed' if result['passed'] else 'FAILED'}; wrote {d / 'validation.json'}")
    return EXIT_OK if result["passed"] else EXIT_FAILED


COMMANDS = {"simulate": cmd_simulate, "converge": cmd_converge, "validate": cmd_validate}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wongzakai", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment file")
    parser.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be positive")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, out=args.out, workers=args.workers)
    except (ConfigError, ArgumentError, ParameterError, StructuralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        t = "?" if exc.time is None else f"{exc.time:g}"
        print(f"numerical failure (seed={exc.seed}, path={exc.path}, m={exc.m}, t={t}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
