"""Command line driver.

Two subcommands: ``run`` executes an experiment (or the attack study) and
writes CSV traces plus a JSON summary into ``--out-dir``; ``describe`` prints
the assembled instance's dimensions and constants without solving.

Configuration merges, in order: built-in defaults, ``--preset``, ``--config``
JSON file, then explicit flags.  Unknown keys anywhere in a config file are
rejected before any output file is opened.  Exit codes: 0 success, 1
configuration problem, 2 solver failure, 3 a requested runtime check failed.

CSV rows stream to disk as the solver produces them, floats are written via
repr so reruns are byte-identical, and wall-clock time appears only in
summary.json.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments
from .linalg import spectral_norm
from .model import estimate_lipschitz
from .pdapg import (
    ConcaveRegime,
    PdapgParams,
    StronglyConcaveRegime,
    check_strongly_concave_weights,
    descent_constant,
    pdapg_schedule,
    pdapg_solve,
    pdapg_theory_params,
    strongly_concave_bounds,
)
from .pdpgl import (
    ManualSchedule,
    PdpgLParams,
    TheorySchedule,
    pdpg_l_solve,
    pdpgl_schedule,
    vdescent_coefficient,
)


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


DEFAULTS = {
    "experiment": "bilinear",
    "solver": "auto",
    "seed": 0,
    "max_iter": 1000,
    "eps": 1e-6,
    "check": None,
    "record_potentials": False,
    "solver_params": {},
    "flow": {
        "n_nodes": 15,
        "edge_prob": 0.75,
        "d_percent": 10.0,
        "budget": 1.0,
        "eta": 0.05,
    },
    "study": {
        "budgets": [0.0, 0.5, 1.0, 1.5, 2.0],
        "seeds": list(range(15)),
        "n_nodes": 15,
        "edge_prob": 0.75,
        "d_percent": 10.0,
        "eta": 0.05,
        "max_iter": 300,
        "jobs": 1,
        "inv_alpha": 0.6,
        "inv_beta": 0.8,
        "gamma": 0.5,
    },
}

_EXPERIMENTS = ("bilinear", "ncsc_quad", "random_ncsc", "flow_attack", "attack_study")
_SOLVERS = ("pdapg_ncsc", "pdapg_ncc", "pdpg_l", "baseline_gda")
_CHECKS = ("descent", "certificate", "vdescent")

# solver 'auto' picks the natural pairing for the experiment
_AUTO_SOLVER = {
    "bilinear": "pdpg_l",
    "ncsc_quad": "pdapg_ncsc",
    "random_ncsc": "pdapg_ncsc",
    "flow_attack": "pdapg_ncsc",
    "attack_study": "pdapg_ncsc",
}

_FLOW_SCHEMA = {"n_nodes": "int", "edge_prob": "num", "d_percent": "num",
                "budget": "num", "eta": "num"}
_STUDY_SCHEMA = {"budgets": "numlist", "seeds": "intlist", "n_nodes": "int",
                 "edge_prob": "num", "d_percent": "num", "eta": "num",
                 "max_iter": "int", "jobs": "int", "inv_alpha": "num",
                 "inv_beta": "num", "gamma": "num"}
_SOLVER_SCHEMA = {"beta": "num", "alpha": "num", "gamma": "num", "tau": "num",
                  "theory_mode": "bool", "margin": "num",
                  "schedule": "str", "stepsize": "num"}
_ROOT_SCHEMA = {"experiment": "str", "solver": "str", "seed": "int",
                "max_iter": "int", "eps": "eps", "check": "check",
                "record_potentials": "bool", "solver_params": _SOLVER_SCHEMA,
                "flow": _FLOW_SCHEMA, "study": _STUDY_SCHEMA}


def _parse_eps(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"eps must be a positive number or 'inf', got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"eps must be a positive number or 'inf', got {value!r}")
    if not value > 0:
        raise ConfigError("eps must be positive")
    return float(value)


def _check_leaf(path: str, value, kind: str):
    if kind == "int":
        if type(value) is not int:
            raise ConfigError(f"{path} must be an integer, got {value!r}")
    elif kind == "num":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
    elif kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false, got {value!r}")
    elif kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string, got {value!r}")
    elif kind == "eps":
        _parse_eps(value)
    elif kind == "check":
        if value is not None and value not in _CHECKS:
            raise ConfigError(f"{path} must be one of {', '.join(_CHECKS)}, got {value!r}")
    elif kind == "numlist":
        if not isinstance(value, list) or not value or any(
            isinstance(v, bool) or not isinstance(v, (int, float)) for v in value
        ):
            raise ConfigError(f"{path} must be a non-empty list of numbers")
    elif kind == "intlist":
        if not isinstance(value, list) or not value or any(type(v) is not int for v in value):
            raise ConfigError(f"{path} must be a non-empty list of integers")
    else:  # pragma: no cover - schema bug
        raise AssertionError(kind)


def _validate(cfg: dict, schema: dict = _ROOT_SCHEMA, prefix: str = ""):
    for key, value in cfg.items():
        path = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown config key '{path}'")
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path} must be an object")
            _validate(value, rule, prefix=f"{path}.")
        else:
            _check_leaf(path, value, rule)


def _deep_merge(base: dict, extra: dict):
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_merge(base[key], value)
        else:
            base[key] = value


def _deep_copy(d):
    return json.loads(json.dumps(d))


PRESETS = {
    "bilinear_fig1": {
        "experiment": "bilinear", "solver": "pdpg_l", "seed": 0,
        "max_iter": 200, "eps": 1e-10, "solver_params": {"schedule": "fig1"},
    },
    "bilinear_fig1_gda": {
        "experiment": "bilinear", "solver": "baseline_gda", "seed": 0,
        "max_iter": 200, "eps": "inf", "solver_params": {"stepsize": 0.3},
    },
    "bilinear_theory": {
        "experiment": "bilinear", "solver": "pdpg_l", "seed": 0,
        "max_iter": 5000, "eps": 1e-2,
        "solver_params": {"schedule": "theory", "tau": 2.0},
    },
    "ncsc_descent": {
        "experiment": "ncsc_quad", "solver": "pdapg_ncsc",
        "max_iter": 2000, "eps": 1e-6, "check": "descent",
        "record_potentials": True, "solver_params": {"theory_mode": True},
    },
    "flow_attack_fig2_n15_p075_d10": {
        "experiment": "attack_study",
    },
    "flow_attack_single": {
        "experiment": "flow_attack", "solver": "pdapg_ncsc", "seed": 0,
        "max_iter": 600, "eps": "inf",
        "solver_params": {"beta": 1.25, "alpha": 1.6666666666666667, "gamma": 0.5},
    },
}


def _parse_instance(text: str) -> tuple[str, dict]:
    """'name' or 'name:key=val,key=val' with JSON-style values."""
    name, _, rest = text.partition(":")
    overrides = {}
    if rest:
        for item in rest.split(","):
            key, sep, raw = item.partition("=")
            if not sep or not key:
                raise ConfigError(f"bad --instance option {item!r}; expected key=value")
            try:
                overrides[key] = json.loads(raw)
            except json.JSONDecodeError:
                overrides[key] = raw
    return name, overrides


def assemble_config(args) -> dict:
    cfg = _deep_copy(DEFAULTS)
    if getattr(args, "preset", None):
        if args.preset not in PRESETS:
            raise ConfigError(
                f"unknown preset '{args.preset}'; available: {', '.join(sorted(PRESETS))}"
            )
        _deep_merge(cfg, _deep_copy(PRESETS[args.preset]))
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        _validate(data)
        _deep_merge(cfg, data)
    if getattr(args, "instance", None):
        name, overrides = _parse_instance(args.instance)
        cfg["experiment"] = name
        if overrides:
            if name == "flow_attack":
                _validate(overrides, _FLOW_SCHEMA, prefix="flow.")
                _deep_merge(cfg["flow"], overrides)
            elif name == "attack_study":
                _validate(overrides, _STUDY_SCHEMA, prefix="study.")
                _deep_merge(cfg["study"], overrides)
            else:
                raise ConfigError(f"instance '{name}' takes no options")
    for key in ("experiment", "solver", "seed", "eps", "check"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "max_iter", None) is not None:
        cfg["max_iter"] = args.max_iter
    if getattr(args, "record_potentials", False):
        cfg["record_potentials"] = True
    if getattr(args, "jobs", None) is not None:
        cfg["study"]["jobs"] = args.jobs
    _validate(cfg)
    if cfg["experiment"] not in _EXPERIMENTS:
        raise ConfigError(
            f"unknown experiment '{cfg['experiment']}'; available: {', '.join(_EXPERIMENTS)}"
        )
    if cfg["solver"] == "auto":
        cfg["solver"] = _AUTO_SOLVER[cfg["experiment"]]
    if cfg["solver"] not in _SOLVERS:
        raise ConfigError(f"unknown solver '{cfg['solver']}'; available: {', '.join(_SOLVERS)}")
    _parse_eps(cfg["eps"])
    if cfg["max_iter"] < 1:
        raise ConfigError("max_iter must be at least 1")
    return cfg


# ---------------------------------------------------------------------------
# instance and solver assembly


def build_instance(cfg: dict):
    name = cfg["experiment"]
    if name == "bilinear":
        return experiments.gen_bilinear(cfg["seed"])
    if name == "ncsc_quad":
        return experiments.make_ncsc_quadratic()
    if name == "random_ncsc":
        return experiments.make_random_ncsc(cfg["seed"])
    if name == "flow_attack":
        fl = cfg["flow"]
        return experiments.gen_flow_attack(
            fl["n_nodes"], fl["edge_prob"], fl["d_percent"], fl["budget"],
            cfg["seed"], eta=fl["eta"],
        )
    raise ConfigError(f"experiment '{name}' does not build a single instance")


_FIG1_SCHEDULE = ManualSchedule(
    q_fn=lambda k: k ** (-1.0 / 3.0),
    p_fn=lambda k: 0.0,
    alpha_fn=lambda k: k ** (1.0 / 3.0),
    gamma_fn=lambda k: k ** (-1.0 / 3.0),
)


def _solver_params(cfg: dict, prob):
    sp = cfg["solver_params"]
    eps = _parse_eps(cfg["eps"])
    record = cfg["record_potentials"] or cfg["check"] in ("descent", "vdescent")
    solver = cfg["solver"]
    if solver == "pdapg_ncsc":
        manual = [k for k in ("alpha", "gamma") if k in sp]
        if sp.get("theory_mode", False) or not manual:
            # no explicit weights: derive admissible constants from L and mu
            try:
                return pdapg_theory_params(
                    prob,
                    beta=sp.get("beta"),
                    margin=sp.get("margin", 0.05),
                    max_iter=cfg["max_iter"],
                    target_eps=eps,
                    record_potentials=record,
                )
            except ValueError as exc:
                raise ConfigError(str(exc))
        missing = [k for k in ("beta", "alpha", "gamma") if k not in sp]
        if missing:
            raise ConfigError(
                "pdapg_ncsc with manual constant weights needs solver_params "
                + ", ".join(missing)
            )
        return PdapgParams(
            beta=sp["beta"],
            regime=StronglyConcaveRegime(alpha=sp["alpha"], gamma=sp["gamma"]),
            max_iter=cfg["max_iter"],
            target_eps=eps,
            record_potentials=record,
        )
    if solver == "pdapg_ncc":
        beta = sp.get("beta", 3.0 * prob.f.lipschitz_L)
        return PdapgParams(
            beta=beta,
            regime=ConcaveRegime(tau=sp.get("tau", 2.0)),
            max_iter=cfg["max_iter"],
            target_eps=eps,
            record_potentials=record,
        )
    if solver == "pdpg_l":
        name = sp.get("schedule", "theory")
        if name == "theory":
            schedule = TheorySchedule()
        elif name == "fig1":
            schedule = _FIG1_SCHEDULE
        else:
            raise ConfigError(
                f"solver_params.schedule must be 'theory' or 'fig1', got {name!r}"
            )
        return PdpgLParams(
            tau=sp.get("tau", 2.0),
            max_iter=cfg["max_iter"],
            target_eps=eps,
            schedule=schedule,
            record_potentials=record,
        )
    if solver == "baseline_gda":
        return {"stepsize": sp.get("stepsize", 0.3), "max_iter": cfg["max_iter"],
                "target_eps": eps}
    raise ConfigError(f"unknown solver '{solver}'")


def _run_solver(cfg: dict, prob, params, sink):
    init = experiments.default_init(prob)
    if cfg["solver"] in ("pdapg_ncsc", "pdapg_ncc"):
        return pdapg_solve(prob, params, init, sink=sink)
    if cfg["solver"] == "pdpg_l":
        return pdpg_l_solve(prob, params, init, sink=sink)
    return experiments.baseline_sim_gda(prob, init, sink=sink, **params)


# ---------------------------------------------------------------------------
# output writers


def _fmt(value) -> str:
    return repr(float(value))


class _TraceWriter:
    """Streams trace rows to CSV, one flush per row."""

    def __init__(self, path: Path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh)
        self._keys = None

    def __call__(self, row):
        if self._keys is None:
            self._keys = sorted(row.schedule)
            self._writer.writerow(
                ["iter", "x_norm", "y_norm", "lambda_norm", "gradG_norm",
                 "max_violation", "potential", "potential_trusted", *self._keys]
            )
        self._writer.writerow(
            [str(row.k), _fmt(row.x_norm), _fmt(row.y_norm), _fmt(row.lam_norm),
             _fmt(row.grad_norm), _fmt(row.max_violation),
             "" if row.potential is None else _fmt(row.potential),
             "true" if row.potential_trusted else "false",
             *(_fmt(row.schedule[k]) for k in self._keys)]
        )
        self._fh.flush()

    def close(self):
        self._fh.close()


_TRAJECTORY_DIM_LIMIT = 64


def _write_trajectory(path: Path, rows, prob) -> bool:
    if prob.n + prob.m + prob.p > _TRAJECTORY_DIM_LIMIT:
        return False
    header = (
        ["iter"]
        + [f"x_{i}" for i in range(prob.n)]
        + [f"y_{i}" for i in range(prob.m)]
        + [f"lambda_{i}" for i in range(prob.p)]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [str(row.k)]
                + [_fmt(v) for v in row.x]
                + [_fmt(v) for v in row.y]
                + [_fmt(v) for v in row.lam]
            )
            fh.flush()
    return True


def _jsonsafe(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonsafe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonsafe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonsafe(v) for v in obj.tolist()]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(_jsonsafe(payload), sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# runtime checks


def _check_certificate(rows, tol: float = 1e-8) -> tuple[bool, str]:
    for row in rows:
        if row.max_violation > row.grad_norm + tol:
            return False, (
                f"iteration {row.k}: violation {row.max_violation!r} exceeds "
                f"measure norm {row.grad_norm!r}"
            )
    return True, f"violation bounded by the measure norm on {len(rows)} iterations"


def _check_descent(rows, d1: float, slack: float = 1e-7) -> tuple[bool, str]:
    if len(rows) < 2:
        return False, "need at least two recorded iterations"
    for cur, nxt in zip(rows, rows[1:]):
        if cur.potential is None or nxt.potential is None:
            return False, f"iteration {cur.k}: potential not recorded"
        if not (cur.potential_trusted and nxt.potential_trusted):
            return False, f"iteration {cur.k}: potential not trusted"
        lhs = d1 * cur.grad_norm**2
        rhs = cur.potential - nxt.potential + slack * (1.0 + abs(cur.potential))
        if lhs > rhs:
            return False, (
                f"iteration {cur.k}: predicted decrease {lhs!r} exceeds "
                f"observed {rhs!r}"
            )
    return True, f"merit decreased as guaranteed on {len(rows) - 1} steps (d1={d1!r})"


def _check_vdescent(rows, tau: float, L_B: float, slack: float = 1e-6) -> tuple[bool, str]:
    if len(rows) < 3:
        return False, "need at least three recorded iterations"
    for r0, r1, r2 in zip(rows, rows[1:], rows[2:]):
        if r0.potential is None or r1.potential is None:
            return False, f"iteration {r0.k}: potential not recorded"
        if not (r0.potential_trusted and r1.potential_trusted):
            return False, f"iteration {r0.k}: potential not trusted"
        q0 = r0.schedule["q_k"]
        q1 = r1.schedule["q_k"]
        theta = vdescent_coefficient(q0, tau, L_B)
        lhs = (
            theta * float(np.sum((r1.x - r0.x) ** 2))
            + theta * float(np.sum((r1.lam - r0.lam) ** 2))
            + 0.25 * q0 * float(np.sum((r1.y - r0.y) ** 2))
        )
        lyap0 = r0.potential + 0.5 * q0 * float(np.sum(r0.y**2))
        lyap1 = r1.potential + 0.5 * q1 * float(np.sum(r1.y**2))
        carry = (q0 - q1) * (
            0.25 * float(np.sum((r2.y - r1.y) ** 2)) + float(np.sum(r2.y**2))
        )
        rhs = lyap0 - lyap1 + carry + slack * (1.0 + abs(r0.potential))
        if lhs > rhs:
            return False, (
                f"iteration {r0.k}: displacement weight {lhs!r} exceeds merit "
                f"decrease {rhs!r}"
            )
    return True, f"damped merit decreased as guaranteed on {len(rows) - 2} steps"


def _run_check(name: str, cfg: dict, prob, params, rows) -> tuple[bool, str]:
    if name == "certificate":
        return _check_certificate(rows)
    if name == "descent":
        if not isinstance(params, PdapgParams) or not isinstance(
            params.regime, StronglyConcaveRegime
        ):
            raise ConfigError(
                "check 'descent' needs solver pdapg_ncsc with constant admissible weights"
            )
        try:
            d1 = descent_constant(prob, params)
        except ValueError as exc:
            raise ConfigError(f"check 'descent': {exc}")
        return _check_descent(rows, d1)
    if name == "vdescent":
        if not isinstance(params, PdpgLParams):
            raise ConfigError("check 'vdescent' needs solver pdpg_l")
        L_B = prob.f.lipschitz_L + spectral_norm(prob.constraints.B)
        return _check_vdescent(rows, params.tau, L_B)
    raise ConfigError(f"unknown check '{name}'")


# ---------------------------------------------------------------------------
# subcommands


_PREVIEW_ITERS = (1, 10, 100)


def _schedule_preview(cfg: dict, prob) -> tuple[dict, dict]:
    """Solver weights at a few iteration counts plus admissibility checks.

    For the constant-weight regime the checks report whether the configured
    (or defaulted) weights clear the floors that guarantee per-step descent.
    """
    sp = cfg["solver_params"]
    solver = cfg["solver"]
    L = prob.f.lipschitz_L
    mu = prob.f.strong_concavity_mu
    norm_A = spectral_norm(prob.constraints.A)
    norm_B = spectral_norm(prob.constraints.B)
    checks: dict = {"mu_positive": mu > 0}
    preview: dict = {}
    if solver == "baseline_gda":
        step = sp.get("stepsize", 0.3)
        for k in _PREVIEW_ITERS:
            preview[str(k)] = {"stepsize": step}
        return preview, checks
    if solver == "pdpg_l":
        checks["linear_in_y"] = prob.linear_in_y
        schedule = _FIG1_SCHEDULE if sp.get("schedule") == "fig1" else TheorySchedule()
        params = PdpgLParams(tau=sp.get("tau", 2.0), schedule=schedule)
        for k in _PREVIEW_ITERS:
            q_k, p_k, alpha_k, gamma_k = pdpgl_schedule(params, k, L, norm_A, norm_B)
            preview[str(k)] = {"q_k": q_k, "p_k": p_k,
                               "alpha_k": alpha_k, "gamma_k": gamma_k}
        return preview, checks
    if solver == "pdapg_ncc":
        params = PdapgParams(
            beta=sp.get("beta", 3.0 * L), regime=ConcaveRegime(tau=sp.get("tau", 2.0))
        )
        checks["beta"] = params.beta
        for k in _PREVIEW_ITERS:
            alpha_k, beta, gamma_k, rho_k = pdapg_schedule(params, k, L, norm_B)
            preview[str(k)] = {"alpha_k": alpha_k, "beta": beta,
                               "gamma_k": gamma_k, "rho_k": rho_k}
        return preview, checks
    # pdapg_ncsc: constant weights against their descent floors
    beta = sp.get("beta", 3.0 * L)
    checks["beta"] = beta
    checks["beta_floor"] = 2.5 * L
    checks["beta_admissible"] = beta > 2.5 * L
    if mu > 0:
        bounds = strongly_concave_bounds(L, mu, beta, norm_B)
        checks["alpha_floor"] = bounds["alpha_min"]
        checks["inv_gamma_floor"] = bounds["inv_gamma_min"]
        margin = sp.get("margin", 0.05)
        alpha = sp.get("alpha", (1.0 + margin) * bounds["alpha_min"])
        gamma = sp.get("gamma", 1.0 / ((1.0 + margin) * bounds["inv_gamma_min"]))
        ok, _ = check_strongly_concave_weights(L, mu, beta, alpha, gamma, norm_B)
        checks["weights_admissible"] = ok
        for k in _PREVIEW_ITERS:
            preview[str(k)] = {"alpha_k": alpha, "beta": beta,
                               "gamma_k": gamma, "rho_k": 0.0}
    else:
        # the constant-weight floors need mu > 0; nothing to certify
        checks["weights_admissible"] = False
        if "alpha" in sp and "gamma" in sp:
            for k in _PREVIEW_ITERS:
                preview[str(k)] = {"alpha_k": sp["alpha"], "beta": beta,
                                   "gamma_k": sp["gamma"], "rho_k": 0.0}
    return preview, checks


def _describe_payload(cfg: dict) -> dict:
    prob = build_instance(cfg)
    senses = [s.value for s in prob.constraints.senses]
    preview, weight_checks = _schedule_preview(cfg, prob)
    info = {
        "experiment": cfg["experiment"],
        "solver": cfg["solver"],
        "n": prob.n,
        "m": prob.m,
        "p": prob.p,
        "lipschitz_L": prob.f.lipschitz_L,
        "lipschitz_L_sampled": estimate_lipschitz(prob),
        "strong_concavity_mu": prob.f.strong_concavity_mu,
        "norm_A": spectral_norm(prob.constraints.A),
        "norm_B": spectral_norm(prob.constraints.B),
        "senses": {"LE": senses.count("LE"), "EQ": senses.count("EQ")},
        "set_X": prob.set_X.kind,
        "set_Y": prob.set_Y.kind,
        "linear_in_y": prob.linear_in_y,
        "schedule_preview": preview,
        "weight_checks": weight_checks,
    }
    meta = {
        k: v for k, v in prob.meta.items()
        if isinstance(v, (str, int, float, bool))
    }
    if meta:
        info["meta"] = meta
    data = prob.meta.get("data")
    if isinstance(data, experiments.FlowAttackData):
        info["network"] = {
            "n_nodes": data.network.n_nodes,
            "n_edges": data.network.n_edges,
            "r_t": data.r_t,
            "budget": data.budget,
            "eta": data.eta,
        }
    return info


def cmd_describe(args) -> int:
    try:
        cfg = assemble_config(args)
        if cfg["experiment"] == "attack_study":
            payload = {"experiment": "attack_study", "study": cfg["study"]}
        else:
            payload = _describe_payload(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(_jsonsafe(payload), sort_keys=True, indent=2))
    return 0


def _run_study(cfg: dict, out_dir: Path) -> int:
    st = cfg["study"]
    config = experiments.AttackStudyConfig(
        budgets=tuple(float(b) for b in st["budgets"]),
        n_nodes=st["n_nodes"],
        edge_prob=st["edge_prob"],
        d_percent=st["d_percent"],
        seeds=tuple(st["seeds"]),
        eta=st["eta"],
        max_iter=st["max_iter"],
        inv_beta=st["inv_beta"],
        inv_alpha=st["inv_alpha"],
        gamma=st["gamma"],
        jobs=st["jobs"],
    )
    t0 = time.perf_counter()
    try:
        rows, summary = experiments.run_attack_study(config)
    except Exception as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0
    with open(out_dir / "study.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["budget", "seed", "q_cl", "q_att", "rho", "iters",
                         "final_eps", "failed"])
        for row in rows:
            writer.writerow(
                [_fmt(row.budget), str(row.seed), _fmt(row.q_cl), _fmt(row.q_att),
                 _fmt(row.rho), str(row.iters), _fmt(row.final_eps),
                 "true" if row.failed else "false"]
            )
            fh.flush()
    _write_json(
        out_dir / "study_summary.json",
        {
            "experiment": "attack_study",
            "study": st,
            "per_budget": summary,
            "n_rows": len(rows),
            "n_failed": sum(1 for r in rows if r.failed),
            "wall_time_s": wall,
        },
    )
    for entry in summary:
        print(
            f"budget={entry['budget']:g}: mean_rho={entry['mean_rho']:.6g} "
            f"(n={entry['n']})"
        )
    print(f"attack study: {len(rows)} rows -> {out_dir / 'study.csv'}")
    return 0


def cmd_run(args) -> int:
    try:
        cfg = assemble_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out_dir)
    if cfg["experiment"] == "attack_study":
        out_dir.mkdir(parents=True, exist_ok=True)
        return _run_study(cfg, out_dir)
    try:
        prob = build_instance(cfg)
        params = _solver_params(cfg, prob)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out_dir.mkdir(parents=True, exist_ok=True)
    writer = _TraceWriter(out_dir / "trace.csv")
    t0 = time.perf_counter()
    try:
        result = _run_solver(cfg, prob, params, writer)
    except Exception as exc:
        writer.close()
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    wall = time.perf_counter() - t0
    writer.close()
    rows = list(result.trace)
    trajectory_written = _write_trajectory(out_dir / "trajectory.csv", rows, prob)
    check_passed = None
    check_message = None
    if cfg["check"]:
        try:
            check_passed, check_message = _run_check(cfg["check"], cfg, prob, params, rows)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    last = rows[-1]
    summary = {
        "experiment": cfg["experiment"],
        "solver": cfg["solver"],
        "seed": cfg["seed"],
        "eps": cfg["eps"],
        "max_iter": cfg["max_iter"],
        "iterations_used": result.iterations_used,
        "converged": result.converged,
        "first_hit": result.first_hit,
        "final_grad_norm": last.grad_norm,
        "final_max_violation": last.max_violation,
        "final_potential": last.potential,
        "check": cfg["check"],
        "check_passed": check_passed,
        "check_message": check_message,
        "trajectory_written": trajectory_written,
        "wall_time_s": wall,
    }
    _write_json(out_dir / "summary.json", summary)
    print(
        f"{cfg['experiment']}/{cfg['solver']}: iterations={result.iterations_used} "
        f"measure={last.grad_norm:.3e} violation={last.max_violation:.3e} "
        f"converged={result.converged} -> {out_dir}"
    )
    if cfg["check"]:
        print(f"check {cfg['check']}: {'pass' if check_passed else 'FAIL'} ({check_message})")
        if not check_passed:
            return 3
    return 0


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    """Exit 1 on argument errors so all configuration problems share a code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="couplemax", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--experiment", choices=_EXPERIMENTS, default=None)
        p.add_argument("--instance", default=None,
                       help="experiment name with options, e.g. flow_attack:budget=1.5")
        p.add_argument("--preset", default=None, help="named configuration bundle")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--solver", choices=_SOLVERS + ("auto",), default=None)

    run_p = sub.add_parser("run", help="solve an instance or run the attack study")
    common(run_p)
    run_p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    run_p.add_argument("--eps", default=None, help="target measure norm, or 'inf'")
    run_p.add_argument("--out-dir", dest="out_dir", default="out")
    run_p.add_argument("--check", choices=_CHECKS, default=None,
                       help="verify a runtime inequality on the trace; exit 3 on failure")
    run_p.add_argument("--jobs", type=int, default=None,
                       help="worker threads for the attack study")
    run_p.add_argument("--record-potentials", dest="record_potentials",
                       action="store_true")
    run_p.set_defaults(func=cmd_run)

    desc_p = sub.add_parser("describe", help="print instance facts without solving")
    common(desc_p)
    desc_p.set_defaults(func=cmd_describe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
