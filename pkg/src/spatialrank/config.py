"""Simulation plans from YAML files.

Schema (all top-level keys optional except ``grid``)::

    master_seed: 2024          # seeds every replication
    constants_seed: 0          # freezes chi-square scales and MA coefficients
    replications: 1000
    alpha: 0.05
    mode: fast                 # fast | exact | shared
    workers: 1                 # or "auto"
    grid:                      # list of blocks; each expands to a product of cells
      - scenarios: [I, III]    # names I..IX
        sizes: [[20, 100], [20, 30, 200]]   # [n, p] or [n1, n2, p]
        shifts:                # null means no shift (size)
          - null
          - {sparsity: 0.5, eta: 0.5}
          - {sparsity: 0.95, eta: 0.5, normalization: raw}
        tests: [SR, TR]
        sample1: {}            # ScenarioSpec overrides for one sample, e.g.
        sample2: {order: 3}    #   {correlation: identity} or {order: 3}
        replications: 500      # block-level overrides of the defaults above
        tag: unequal           # appended to the scenario label in outputs
"""
from __future__ import annotations

import os

import yaml

from .errors import ConfigError, InvalidInputError
from .harness import TESTS, Cell, SimulationPlan
from .scenarios import SCENARIO_NAMES, ShiftSpec, scenario
from .sr import MODES

_TOP = {"master_seed", "constants_seed", "replications", "alpha", "mode", "workers", "grid"}
_BLOCK = {"scenarios", "sizes", "shifts", "tests", "sample1", "sample2", "replications", "alpha", "mode",
          "tag"}
_SHIFT = {"sparsity", "eta", "normalization"}
_OVERRIDES = {"correlation", "rho", "diag_scales", "nu", "gamma", "inflation", "innovation", "order"}
THREADS_ENV = "SPATIALRANK_THREADS"


def _int(v, path, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(path, f"must be >= {lo}, got {v}")
    return v


def _float(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    return float(v)


def _list(v, path):
    if not isinstance(v, list) or not v:
        raise ConfigError(path, "expected a non-empty list")
    return v


def _mapping(v, path, allowed):
    if v is None:
        return {}
    if not isinstance(v, dict):
        raise ConfigError(path, "expected a mapping")
    extra = sorted(set(v) - allowed)
    if extra:
        raise ConfigError(f"{path}.{extra[0]}", f"unknown key (allowed: {', '.join(sorted(allowed))})")
    return v


def _alpha(v, path):
    a = _float(v, path)
    if not 0 < a < 1:
        raise ConfigError(path, "must lie in (0, 1)")
    return a


def _mode(v, path):
    if v not in MODES:
        raise ConfigError(path, f"expected one of {', '.join(MODES)}, got {v!r}")
    return v


def resolve_workers(value, path="workers"):
    if value is None:
        env = os.environ.get(THREADS_ENV)
        if env is None:
            return 1
        value = env
        path = THREADS_ENV
    if value == "auto":
        return os.cpu_count() or 1
    if isinstance(value, str) and value.isdigit():
        value = int(value)
    return _int(value, path, lo=1)


def _size(v, path):
    if not isinstance(v, list) or len(v) not in (2, 3):
        raise ConfigError(path, "expected [n, p] or [n1, n2, p]")
    vals = [_int(x, f"{path}[{i}]", lo=1) for i, x in enumerate(v)]
    return (vals[0], vals[0], vals[1]) if len(vals) == 2 else tuple(vals)


def _shift(v, path):
    if v is None:
        return None
    m = _mapping(v, path, _SHIFT)
    for key in ("sparsity", "eta"):
        if key not in m:
            raise ConfigError(f"{path}.{key}", "missing")
    try:
        return ShiftSpec(_float(m["sparsity"], f"{path}.sparsity"), _float(m["eta"], f"{path}.eta"),
                         m.get("normalization", "scaled"))
    except InvalidInputError as e:
        raise ConfigError(path, str(e)) from None


def _scenario(name, p, seed, overrides, path):
    if name not in SCENARIO_NAMES:
        raise ConfigError(path, f"unknown scenario {name!r} (expected one of {', '.join(SCENARIO_NAMES)})")
    try:
        return scenario(name, p, constants_seed=seed, **overrides)
    except (InvalidInputError, TypeError) as e:
        raise ConfigError(path, str(e)) from None


def plan_from_dict(doc, reps_override=None, seed_override=None, workers_override=None):
    doc = _mapping(doc, "<root>", _TOP)
    seed = _int(doc.get("master_seed", 0), "master_seed", lo=0)
    cseed = _int(doc.get("constants_seed", 0), "constants_seed", lo=0)
    reps = _int(doc.get("replications", 1000), "replications", lo=1)
    alpha = _alpha(doc.get("alpha", 0.05), "alpha")
    mode = _mode(doc.get("mode", "fast"), "mode")
    workers = resolve_workers(workers_override if workers_override is not None else doc.get("workers"))
    if "grid" not in doc:
        raise ConfigError("grid", "missing")
    grid = doc["grid"]
    if not isinstance(grid, list):
        raise ConfigError("grid", "expected a list of blocks")
    cells = []
    for b, block in enumerate(grid):
        bp = f"grid[{b}]"
        block = _mapping(block, bp, _BLOCK)
        for key in ("scenarios", "sizes"):
            if key not in block:
                raise ConfigError(f"{bp}.{key}", "missing")
        names = _list(block["scenarios"], f"{bp}.scenarios")
        sizes = [_size(s, f"{bp}.sizes[{i}]") for i, s in enumerate(_list(block["sizes"], f"{bp}.sizes"))]
        shifts = [_shift(s, f"{bp}.shifts[{i}]")
                  for i, s in enumerate(_list(block.get("shifts", [None]), f"{bp}.shifts"))]
        tests = _list(block.get("tests", ["SR"]), f"{bp}.tests")
        for i, t in enumerate(tests):
            if t not in TESTS:
                raise ConfigError(f"{bp}.tests[{i}]", f"expected one of {', '.join(TESTS)}, got {t!r}")
        over1 = _mapping(block.get("sample1"), f"{bp}.sample1", _OVERRIDES)
        over2 = _mapping(block.get("sample2"), f"{bp}.sample2", _OVERRIDES)
        b_reps = _int(block.get("replications", reps), f"{bp}.replications", lo=1)
        b_alpha = _alpha(block.get("alpha", alpha), f"{bp}.alpha")
        b_mode = _mode(block.get("mode", mode), f"{bp}.mode")
        tag = block.get("tag")
        if tag is not None and not isinstance(tag, str):
            raise ConfigError(f"{bp}.tag", "expected a string")
        for s, name in enumerate(names):
            for n1, n2, p in sizes:
                s1 = _scenario(name, p, cseed, over1, f"{bp}.scenarios[{s}]")
                s2 = _scenario(name, p, cseed, over2, f"{bp}.scenarios[{s}]")
                for shift in shifts:
                    label = name if tag is None else f"{name}/{tag}"
                    cells.append(Cell(label, s1, s2, n1, n2, shift, b_alpha,
                                      reps_override or b_reps, b_mode, tuple(tests)))
    if seed_override is not None:
        seed = seed_override
    return SimulationPlan(cells, seed, workers)


def load_plan(path, **overrides):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        raise ConfigError(str(path), f"not valid YAML: {e}") from None
    return plan_from_dict(doc if doc is not None else {}, **overrides)
