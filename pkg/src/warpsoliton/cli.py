"""Command-line front end: TOML config in, JSON report (plus CSV profiles) out.

Exit codes: 0 all checks pass, 1 usage or config error, 2 a checked
inequality or solve failed, 3 nonexistence certified.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import jsonschema
import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from . import __version__
from .bounds import (
    EstimateParams,
    beta_window,
    global_estimate,
    local_estimate,
    optimize_rhs,
)
from .errors import ConfigError, PositivityLost, WarpError, NoConvergence
from .geometry import (
    KINDS,
    ScalarProfile,
    bakry_emery_lower_bound,
    build_radial_base,
    origin_for,
    qian_comparison_check,
)
from .nonexist import Scenario, example_sphere_product, nonexistence_probe, probe_with_witness
from .proofcheck import (
    FAMILIES,
    build_cutoff,
    bochner_check,
    cutoff_condition_margins,
    cutoff_gradient_check,
    delta_L_check,
    max_point_trace,
    quadratic_positive_root,
    quadratic_root_bound,
)
from .warpfield import (
    SolitonInstance,
    SolveConfig,
    hyperbolic_decomposition,
    instance_residual,
    solve_warp_ode,
    spherical_decomposition,
    theta_profile,
    v_to_f,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAILED, EXIT_NONEXISTENT = 0, 1, 2, 3
SUBCOMMANDS = ("solve", "verify", "proofcheck", "nonexist", "example", "sweep")
PRESETS = ("hyperbolic-decomposition", "spherical-decomposition")
BATTERY = ("r", "r2", "r3", "sin", "exp", "const")
DEFAULT_TOL = 1e-6

_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM}


def _selector(name, coeff_min, coeff_max=None):
    coeffs = {"type": "array", "items": _NUM, "minItems": coeff_min}
    if coeff_max is not None:
        coeffs["maxItems"] = coeff_max
    return {
        "type": "object",
        "properties": {"selector": {"const": name}, "coefficients": coeffs},
        "required": ["selector", "coefficients"],
        "additionalProperties": False,
    }


PROFILE_SCHEMA = {
    "oneOf": [
        _selector("exp", 2, 2),
        _selector("sin", 2, 3),
        _selector("poly", 1),
        {
            "type": "object",
            "properties": {"selector": {"const": "const"}, "value": _NUM},
            "required": ["selector", "value"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"values": {**_NUMS, "minItems": 9}},
            "required": ["values"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {"file": {"type": "string"}},
            "required": ["file"],
            "additionalProperties": False,
        },
    ]
}

_RADIUS = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "inf"}]}
_OPEN_UNIT = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}
_NONNEG = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "base": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(KINDS)},
                "n": {"type": "integer", "minimum": 1},
                "r_min": _NONNEG,
                "r_max": _NUM,
                "count": {"type": "integer", "minimum": 9},
                "m": {"type": "number", "exclusiveMinimum": 0},
                "h": PROFILE_SCHEMA,
            },
            "required": ["kind", "n", "r_min", "r_max", "count"],
        },
        "instance": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "preset": {"enum": list(PRESETS)},
                "k": {"type": "integer", "minimum": 1},
                "theta": _NUM,
                "f": PROFILE_SCHEMA,
                "rho": PROFILE_SCHEMA,
            },
            "required": ["k"],
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "v0": {"type": "number", "exclusiveMinimum": 0},
                "slope0": {"oneOf": [_NUM, {"const": "auto-zero"}]},
                "method": {"enum": ["shooting", "collocation"]},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "boundary": {"enum": ["free", "dirichlet"]},
                "target": _NUM,
                "reference": PROFILE_SCHEMA,
            },
        },
        "estimate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta": _NUM,
                "eps": _OPEN_UNIT,
                "R": {"oneOf": [_RADIUS, {"type": "array", "items": _RADIUS, "minItems": 1}]},
                "K": _NONNEG,
                "gamma": _NONNEG,
                "M": _NONNEG,
                "c1": {"type": "number", "exclusiveMinimum": 0},
                "c2": {"type": "number", "exclusiveMinimum": 0},
                "cutoff": {"enum": list(FAMILIES)},
            },
            "required": ["eps"],
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "beta": {**_NUMS, "minItems": 1},
                "eps": {**_NUMS, "minItems": 1},
            },
            "required": ["beta", "eps"],
        },
        "proofcheck": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "families": {"type": "array", "items": {"enum": list(FAMILIES)}},
                "R": {"type": "number", "exclusiveMinimum": 0},
                "K": _NONNEG,
                "derivatives": {"enum": ["fd", "chain"]},
                "random_points": {"type": "integer", "minimum": 0},
                "qian_samples": {"type": "integer", "minimum": 0},
                "bochner": {"type": "array", "items": {"enum": list(BATTERY)}},
                "instances": {"type": "array", "items": {"enum": list(PRESETS)}},
                "beta": {"type": "array", "items": _NUM},
                "delta_L_tol": {"type": "number", "exclusiveMinimum": 0},
                "quadratic_trials": {"type": "integer", "minimum": 0},
            },
        },
        "scenario": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rho_kind": {"enum": ["zero", "positive-constant", "other"]},
                "rho_value": _NUM,
                "theta": _NUM,
                "K": _NONNEG,
                "gamma": _NONNEG,
                "k": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 1},
                "m": {"type": "number", "exclusiveMinimum": 0},
                "f_bounded": {"type": "boolean"},
                "witness": {"type": "boolean"},
                "domain_length": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["rho_kind", "theta"],
        },
        "example": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "sample_count": {"type": "integer", "minimum": 100},
                "instances": {"type": "array", "items": {"enum": list(PRESETS)}},
                "k": {"type": "integer", "minimum": 1},
                "residual_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"csv": {"type": "boolean"}},
        },
    },
}

REQUIRED_SECTIONS = {
    "solve": ("base", "instance", "solver"),
    "verify": ("instance", "estimate"),
    "proofcheck": ("base",),
    "nonexist": ("scenario",),
    "example": (),
    "sweep": ("instance", "estimate", "sweep"),
}


# ----------------------------------------------------------------------------
# config ingestion


def _path_of(error) -> str:
    return ".".join(str(p) for p in error.absolute_path) or "<root>"


def load_config(path: str | Path, subcommand: str) -> dict:
    """Read, schema-validate and cross-check a TOML config."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            config = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", "<file>") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}", "<file>") from None
    validate_config(config, subcommand)
    config["_dir"] = str(path.resolve().parent)
    return config


def validate_config(config: dict, subcommand: str) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(err.message, _path_of(err))
    for section in REQUIRED_SECTIONS[subcommand]:
        if section not in config:
            raise ConfigError(f"section required by '{subcommand}'", section)
    _cross_check(config, subcommand)


def _cross_check(config: dict, subcommand: str) -> None:
    base = config.get("base")
    if base is not None:
        if not base["r_max"] > base["r_min"]:
            raise ConfigError("must exceed base.r_min", "base.r_max")
        if base["count"] % 2 == 0:
            raise ConfigError("must be odd", "base.count")
        if base["kind"] == "line-segment" and base["n"] != 1:
            raise ConfigError("line-segment bases need n = 1", "base.n")
    inst = config.get("instance")
    if inst is not None and "preset" not in inst:
        if "base" not in config:
            raise ConfigError("section required unless instance.preset is given", "base")
        missing = [key for key in ("f", "rho", "theta") if key not in inst]
        if subcommand == "solve":
            missing = [key for key in missing if key != "f"]
        if missing:
            raise ConfigError("required field missing", f"instance.{missing[0]}")
    est = config.get("estimate")
    if est is not None and "beta" in est:
        k = (inst or {}).get("k", 2)
        lo, hi = beta_window(k)
        if not lo < est["beta"] < hi:
            raise ConfigError(
                f"beta = {est['beta']} outside the admissible window "
                f"({lo:g}, {hi:g}) = (1 - 2/k, 1) for k = {k}",
                "estimate.beta",
            )
    if est is not None and subcommand == "verify" and "beta" not in est:
        raise ConfigError("required field missing", "estimate.beta")


def _read_profile_file(path: Path) -> np.ndarray:
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "value" not in rows[0]:
        raise ConfigError(f"{path}: expected a CSV with columns r,value", str(path))
    return np.array([float(row["value"]) for row in rows])


def sample_profile(spec: dict, grid, label: str, where: str, root: str = ".") -> ScalarProfile:
    """Sample a closed-form selector or load raw values onto ``grid``."""
    r = grid.nodes
    if "values" in spec or "file" in spec:
        values = (np.asarray(spec["values"], dtype=float) if "values" in spec
                  else _read_profile_file(Path(root) / spec["file"]))
        if values.shape != (grid.count,):
            raise ConfigError(f"{values.size} values for a grid of {grid.count} nodes", where)
        return ScalarProfile(grid, values, label)
    c = spec.get("coefficients", ())
    selector = spec["selector"]
    if selector == "exp":
        values = c[0] * np.exp(c[1] * r)
    elif selector == "sin":
        values = c[0] * np.sin(c[1] * r + (c[2] if len(c) > 2 else 0.0))
    elif selector == "poly":
        values = np.polynomial.polynomial.polyval(r, c)
    else:
        values = np.full(grid.count, float(spec["value"]))
    return ScalarProfile(grid, values, label)


def _base_from(config: dict):
    b = config["base"]
    root = config.get("_dir", ".")
    base = build_radial_base(b["kind"], b["n"], float(b["r_min"]), float(b["r_max"]), b["count"],
                             m=float(b.get("m", 1.0)))
    if "h" in b:
        h = sample_profile(b["h"], base.grid, "h", "base.h", root)
        base = build_radial_base(b["kind"], b["n"], float(b["r_min"]), float(b["r_max"]), b["count"],
                                 h_values=h.values, m=float(b.get("m", 1.0)))
    return base


def _preset(name: str, k: int, config: dict) -> SolitonInstance:
    b = config.get("base")
    if name == "hyperbolic-decomposition":
        if b is None:
            return hyperbolic_decomposition(k)
        return hyperbolic_decomposition(k, float(b["r_min"]), float(b["r_max"]), b["count"], b["n"])
    if b is None:
        return spherical_decomposition(k)
    return spherical_decomposition(k, float(b["r_min"]), float(b["r_max"]), b["count"])


def _instance_from(config: dict) -> SolitonInstance:
    inst = config["instance"]
    if "preset" in inst:
        return _preset(inst["preset"], inst["k"], config)
    base = _base_from(config)
    root = config.get("_dir", ".")
    f = sample_profile(inst["f"], base.grid, "f", "instance.f", root)
    rho = sample_profile(inst["rho"], base.grid, "rho_B", "instance.rho", root)
    return SolitonInstance(base, f, rho, inst["k"], float(inst["theta"]))


def _radius(value) -> float:
    return math.inf if value == "inf" else float(value)


def _params_for(instance: SolitonInstance, est: dict, R: float, beta: float | None = None) -> EstimateParams:
    c1, c2 = est.get("c1", 1.0), est.get("c2", 1.0)
    if "cutoff" in est:
        spec = build_cutoff(est["cutoff"])
        c1, c2 = spec.c1_certified, spec.c2_certified
    if beta is None:
        beta = est.get("beta")
    if beta is None:
        lo, _ = beta_window(instance.k)
        beta = 0.5 * (lo + 1.0)
    return EstimateParams(
        n=instance.base.n, m=instance.base.m, k=instance.k, beta=float(beta), eps=float(est["eps"]),
        theta=instance.theta, K=est.get("K"), gamma=est.get("gamma"), c1=float(c1), c2=float(c2),
        R=R, M=est.get("M"),
    )


# ----------------------------------------------------------------------------
# report plumbing


def _clean(obj):
    """Recursively convert to JSON-ready builtins; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def content_hash(report: dict) -> str:
    """sha256 of the canonical report with the wall-time and hash fields removed."""
    trimmed = copy.deepcopy(report)
    meta = trimmed.get("meta", {})
    meta.pop("wall_time_s", None)
    meta.pop("content_hash", None)
    blob = json.dumps(trimmed, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def write_csv(path: Path, profile: ScalarProfile) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["r", "value"])
        for r, v in zip(profile.grid.nodes, profile.values):
            writer.writerow([f"{r:.16e}", f"{v:.16e}"])


class Outcome:
    """Mutable collector for one subcommand run."""

    def __init__(self):
        self.constants: dict = {}
        self.reports: dict = {}
        self.verdicts: dict = {}
        self.profiles: dict[str, ScalarProfile] = {}
        self.failed = False
        self.nonexistent = False

    def check(self, name: str, passed: bool) -> bool:
        self.verdicts.setdefault("checks", {})[name] = bool(passed)
        if not passed:
            self.failed = True
        return passed


# ----------------------------------------------------------------------------
# subcommands


def cmd_solve(config: dict, tol: float, seed: int) -> Outcome:
    out = Outcome()
    inst = config["instance"]
    base = _base_from(config)
    root = config.get("_dir", ".")
    rho = sample_profile(inst["rho"], base.grid, "rho_B", "instance.rho", root)
    theta, k = float(inst["theta"]), inst["k"]
    s = {key: val for key, val in config["solver"].items() if key != "reference"}
    solver = SolveConfig(**s)
    try:
        result = solve_warp_ode(base, rho, theta, k, solver)
    except PositivityLost as exc:
        out.reports["solve"] = {"status": "positivity-lost", "crossing_radius": exc.radius, "message": str(exc)}
        out.check("solve", False)
        return out
    except NoConvergence as exc:
        out.reports["solve"] = {"status": "no-convergence", "message": str(exc)}
        out.check("solve", False)
        return out
    out.reports["solve"] = {
        "status": "converged",
        "method": result.method,
        "iterations": result.iterations,
        "slope0": result.slope0,
        "residual_max": result.residual_max,
        "solver_tol": solver.tol,
    }
    out.check("residual", result.residual_max < solver.tol)
    f = v_to_f(result.v, k)
    instance = SolitonInstance(base, f, rho, k, theta)
    prof = theta_profile(instance, origin_for(base)).values
    scale = max(1.0, float(np.max(np.abs(rho.values * f.values**2))))
    deviation = float(np.max(np.abs(prof - theta)))
    out.reports["theta_constancy"] = {
        "mean": float(np.mean(prof)),
        "std": float(np.std(prof)),
        "max_deviation": deviation,
        "scale": scale,
        "relative_deviation": deviation / scale,
    }
    out.check("theta_constancy", deviation / scale < tol)
    if "reference" in config["solver"]:
        ref = sample_profile(config["solver"]["reference"], base.grid, "reference", "solver.reference", root)
        rel = float(np.max(np.abs(result.v.values - ref.values) / np.abs(ref.values)))
        out.reports["reference"] = {"max_relative_error": rel}
        out.check("reference", rel < tol)
    out.profiles["v"] = result.v
    out.profiles["f"] = f
    return out


def cmd_verify(config: dict, tol: float, seed: int) -> Outcome:
    out = Outcome()
    instance = _instance_from(config)
    est = config["estimate"]
    radii = est.get("R", "inf")
    radii = radii if isinstance(radii, list) else [radii]
    reports = []
    for raw in radii:
        R = _radius(raw)
        params = _params_for(instance, est, R)
        report = global_estimate(instance, params) if math.isinf(R) else local_estimate(instance, params)
        label = f"R={raw}"
        out.constants[label] = report.constants.as_dict()
        summary = report.summary()
        summary["R"] = R
        summary["params"] = {key: getattr(report.params, key) for key in
                             ("n", "m", "k", "beta", "eps", "theta", "K", "gamma", "c1", "c2", "M")}
        reports.append(summary)
        out.check(label, report.passed)
    out.reports["estimates"] = reports
    out.verdicts["theorem_applicable"] = all(r["theorem_applicable"] for r in reports)
    return out


def _battery(name: str, r: np.ndarray) -> np.ndarray:
    return {
        "r": lambda: r,
        "r2": lambda: r * r,
        "r3": lambda: r**3,
        "sin": lambda: np.sin(r),
        "exp": lambda: np.exp(r),
        "const": lambda: np.ones_like(r),
    }[name]()


def cmd_proofcheck(config: dict, tol: float, seed: int) -> Outcome:
    out = Outcome()
    pc = config.get("proofcheck", {})
    base = _base_from(config)
    grid = base.grid
    origin = origin_for(base)
    K = pc.get("K", bakry_emery_lower_bound(base, origin=origin))
    out.constants["K"] = K
    R = float(pc.get("R", 1.0))
    rng = np.random.default_rng(seed)

    cutoffs = {}
    for family in pc.get("families", ["quartic-poly", "cos4"]):
        spec = build_cutoff(family, R)
        route = pc.get("derivatives", "chain" if family == "smooth-bump" else "fd")
        chk = cutoff_gradient_check(spec, base, R, K, route)
        t = rng.uniform(1.0, 2.0, pc.get("random_points", 10_000))
        conds = {name: float(np.min(vals)) if vals.size else None
                 for name, vals in cutoff_condition_margins(spec, t).items()}
        out.constants.setdefault("cutoffs", {})[family] = {"c1": spec.c1_certified, "c2": spec.c2_certified}
        cutoffs[family] = {"derivatives": route, "min_a2": chk.min_a2, "min_a3": chk.min_a3,
                           "excluded_nodes": int(np.count_nonzero(chk.excluded)),
                           "random_point_margins": conds}
        ok = chk.min_a2 >= -tol and chk.min_a3 >= -tol
        ok = ok and all(v is None or v >= -tol for v in conds.values())
        out.check(f"cutoff:{family}", ok)
    out.reports["cutoffs"] = cutoffs

    count = pc.get("qian_samples", 50)
    if count:
        samples = np.linspace(grid.r_min, grid.r_max, count)
        qs = qian_comparison_check(base, K, samples, origin)
        margins = np.array([q.margin for q in qs])
        out.reports["qian"] = {"samples": count, "min_margin": float(margins.min()),
                               "max_abs_margin": float(np.abs(margins).max())}
        out.check("qian", margins.min() >= -tol)

    bochner = {}
    for name in pc.get("bochner", list(BATTERY)):
        u = ScalarProfile(grid, _battery(name, grid.nodes), name)
        bochner[name] = bochner_check(base, u, K).min_margin
        out.check(f"bochner:{name}", bochner[name] >= -tol)
    out.reports["bochner"] = bochner

    dl_tol = pc.get("delta_L_tol", 1e-5)
    delta = {}
    for name in pc.get("instances", list(PRESETS)):
        instance = _preset(name, 2, {})
        lo, _ = beta_window(instance.k)
        betas = pc.get("beta", list(np.linspace(lo, 1.0, 11)[1:-1]))
        inst_K = bakry_emery_lower_bound(instance.base, origin=origin_for(instance.base))
        worst = min(delta_L_check(instance, float(b), inst_K).min_margin for b in betas)
        cutoff = build_cutoff("cos4", R)
        trace = max_point_trace(instance, float(betas[0]), cutoff, min(R, instance.base.grid.r_max / 2))
        delta[name] = {"min_margin": worst, "betas": [float(b) for b in betas],
                       "max_point": trace.as_dict()}
        out.check(f"delta_L:{name}", worst >= -dl_tol)
    out.reports["delta_L"] = delta

    trials = pc.get("quadratic_trials", 1000)
    if trials:
        abc = rng.uniform(0.0, 10.0, size=(trials, 3))
        abc[abc == 0.0] = 10.0  # keep the draws in (0, 10]
        violations = sum(quadratic_root_bound(*t) < quadratic_positive_root(*t) for t in abc)
        out.reports["quadratic_lemma"] = {"trials": trials, "violations": int(violations)}
        out.check("quadratic_lemma", violations == 0)
    return out


def cmd_nonexist(config: dict, tol: float, seed: int) -> Outcome:
    out = Outcome()
    s = dict(config["scenario"])
    witness = s.pop("witness", False)
    domain_length = s.pop("domain_length", 10.0)
    scenario = Scenario(**s)
    verdict = probe_with_witness(scenario, domain_length) if witness else nonexistence_probe(scenario)
    out.constants = {"Q": verdict.Q, "global_rhs": verdict.global_rhs}
    out.verdicts["nonexistence"] = verdict.as_dict()
    out.nonexistent = verdict.nonexistent
    return out


def cmd_example(config: dict, tol: float, seed: int) -> Outcome:
    out = Outcome()
    ex = config.get("example", {})
    products = []
    for n in ex.get("n", [2, 3, 4, 5, 6]):
        rep = example_sphere_product(n, ex.get("sample_count", 1001)).as_dict()
        rep["expected_min"] = n - 1.5
        products.append(rep)
        out.check(f"sphere_product:n={n}",
                  abs(rep["min_eigenvalue"] - (n - 1.5)) < 1e-9
                  and rep["anisotropy"] < 1e-12 and rep["off_diagonal"] < 1e-12)
    out.reports["sphere_product"] = products
    residual_tol = ex.get("residual_tol", 1e-8)
    instances = {}
    for name in ex.get("instances", list(PRESETS)):
        instance = _preset(name, ex.get("k", 2), config if "base" in config else {})
        origin = origin_for(instance.base)
        res = float(np.max(np.abs(instance_residual(instance, origin=origin).values[1:-1])))
        prof = theta_profile(instance, origin).values
        instances[name] = {"theta": instance.theta, "residual_max": res,
                           "theta_std": float(np.std(prof)),
                           "theta_max_deviation": float(np.max(np.abs(prof - instance.theta)))}
        out.check(f"instance:{name}", res < residual_tol)
        out.profiles[f"{name}-f"] = instance.f
    out.reports["instances"] = instances
    return out


def cmd_sweep(config: dict, tol: float, seed: int) -> Outcome:
    out = Outcome()
    instance = _instance_from(config)
    est, sw = config["estimate"], config["sweep"]
    R = est.get("R", "inf")
    if isinstance(R, list):
        raise ConfigError("sweep takes a single radius", "estimate.R")
    params = _params_for(instance, est, _radius(R))
    result = optimize_rhs(instance, params, sw["beta"], sw["eps"])
    best = params.with_(beta=result.beta, eps=result.eps)
    report = global_estimate(instance, best) if best.is_global else local_estimate(instance, best)
    out.constants = report.constants.as_dict()
    out.reports["sweep"] = {
        "best": {"beta": result.beta, "eps": result.eps, "rhs": result.rhs},
        "table": [{"beta": b, "eps": e, "rhs": v} for b, e, v in result.table],
    }
    out.reports["estimate_at_best"] = report.summary()
    out.check("estimate_at_best", report.passed)
    return out


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "proofcheck": cmd_proofcheck,
    "nonexist": cmd_nonexist,
    "example": cmd_example,
    "sweep": cmd_sweep,
}


def run(subcommand: str, config: dict, tol: float | None = None, seed: int = 0) -> tuple[dict, int, Outcome]:
    """Run one subcommand on a validated config; returns (report, exit code, outcome)."""
    tol = DEFAULT_TOL if tol is None else tol
    started = time.perf_counter()
    outcome = COMMANDS[subcommand](config, tol, seed)
    echo = {key: val for key, val in config.items() if not key.startswith("_")}
    report = {
        "config_echo": echo,
        "constants": outcome.constants,
        "reports": outcome.reports,
        "verdicts": outcome.verdicts,
        "meta": {"tool": "warpsoliton", "version": __version__, "subcommand": subcommand,
                 "tol": tol, "seed": seed},
    }
    if outcome.nonexistent:
        code = EXIT_NONEXISTENT
    elif outcome.failed:
        code = EXIT_FAILED
    else:
        code = EXIT_OK
    report["verdicts"]["exit_code"] = code
    report = _clean(report)
    report["meta"]["content_hash"] = content_hash(report)
    report["meta"]["wall_time_s"] = time.perf_counter() - started
    return report, code, outcome


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpsoliton", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=COMMANDS[name].__name__.replace("cmd_", "") + " workflow")
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", help="directory for report.json and CSV profiles (default: stdout)")
        p.add_argument("--tol", type=float, default=None,
                       help=f"margin tolerance for the checks (default {DEFAULT_TOL:g})")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.tol is not None and not args.tol > 0:
        print("error: --tol must be > 0", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.config, args.subcommand)
        report, code, outcome = run(args.subcommand, config, args.tol, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WarpError, ValueError) as exc:
        if isinstance(exc, RuntimeError):
            print(f"run failed: {exc}", file=sys.stderr)
            return EXIT_FAILED
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(text + "\n")
        if config.get("output", {}).get("csv", True):
            for name, profile in outcome.profiles.items():
                write_csv(out_dir / f"{name}.csv", profile)
        print(f"{args.subcommand}: exit {code}, report {out_dir / 'report.json'}", file=sys.stderr)
    else:
        print(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
