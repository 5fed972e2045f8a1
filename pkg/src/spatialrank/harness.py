"""Monte Carlo replication engine for size and power studies.

Replication ``r`` of cell ``c`` draws both samples from
``SeedSequence(master_seed, spawn_key=(c, r))``, so any cell or any subset
of replications can be rerun on its own and the outcome does not depend on
how replications are spread over worker processes. Per-cell summaries are
formed after all replications are collected, in replication order.
"""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import PlanValidationError, SpatialRankError
from .q2 import tr_test_q2
from .scenarios import ScenarioSpec, ShiftSpec, build_shift, sample_scenario, trace_r2_exact
from .sr import MODES, sr_test

TESTS = ("SR", "TR")
CELL_COLUMNS = ("cell_id", "scenario", "n1", "n2", "p", "shift", "eta", "test", "mode", "alpha",
                "reps", "rejections", "rate", "se", "failures", "mean_statistic", "mean_sigma_hat")
TIMING_COLUMNS = ("cell_id", "wall_ms")
_CHUNK_REPS = 10


@dataclass(frozen=True, eq=False)
class Cell:
    label: str
    sample1: ScenarioSpec
    sample2: ScenarioSpec
    n1: int
    n2: int
    shift: ShiftSpec | None = None
    alpha: float = 0.05
    replications: int = 1000
    mode: str = "fast"
    tests: tuple = ("SR",)

    @property
    def p(self):
        return self.sample1.p

    @property
    def shift_kind(self):
        if self.shift is None or self.shift.eta == 0:
            return "none"
        return self.shift.kind

    def problems(self):
        out = []
        if self.sample1.p != self.sample2.p:
            out.append(f"sample dimensions differ ({self.sample1.p} vs {self.sample2.p})")
        if self.replications < 1:
            out.append("replications must be >= 1")
        if not 0 < self.alpha < 1:
            out.append("alpha must lie in (0, 1)")
        if self.mode not in MODES:
            out.append(f"mode must be one of {MODES}")
        if not self.tests or any(t not in TESTS for t in self.tests):
            out.append(f"tests must be a non-empty subset of {TESTS}")
        if "TR" in self.tests and self.p >= self.n1 + self.n2:
            out.append(f"TR needs p < n1 + n2 (p={self.p}, n1+n2={self.n1 + self.n2})")
        if min(self.n1, self.n2) < 4:
            out.append("sample sizes must be >= 4")
        return out

    def delta(self):
        """Mean shift added to the second sample."""
        if self.shift is None:
            return np.zeros(self.p)
        if self.shift.normalization == "scaled":
            return build_shift(self.shift, self.p, self.sample1.scatter_diagonal(),
                               trace_r2_exact(self.sample1.correlation_matrix()))
        covs = [trace_r2_exact(s.covariance()) for s in (self.sample1, self.sample2)]
        return build_shift(self.shift, self.p, cov_traces=covs)


@dataclass(frozen=True)
class CellResult:
    cell_id: int
    test: str
    replications: int
    rejections: int
    failures: int
    mean_statistic: float
    mean_sigma_hat: float
    wall_time: float = 0.0

    @property
    def succeeded(self):
        return self.replications - self.failures

    @property
    def rejection_rate(self):
        return self.rejections / self.succeeded if self.succeeded else math.nan

    @property
    def standard_error(self):
        k = self.succeeded
        if not k:
            return math.nan
        r = self.rejection_rate
        return math.sqrt(r * (1.0 - r) / k)


@dataclass
class SimulationPlan:
    cells: list = field(default_factory=list)
    master_seed: int = 0
    workers: int | None = None

    def validate(self):
        bad = [f"cell {i} ({c.label}, n=({c.n1},{c.n2}), p={c.p}): {'; '.join(pr)}"
               for i, c in enumerate(self.cells) if (pr := c.problems())]
        if bad:
            raise PlanValidationError("invalid cells:\n  " + "\n  ".join(bad))


# --- replications ------------------------------------------------------------------

def _replicate(cell, delta, master_seed, cell_id, r):
    s1, s2 = np.random.SeedSequence(master_seed, spawn_key=(cell_id, r)).spawn(2)
    x1 = sample_scenario(cell.sample1, cell.n1, s1)
    x2 = sample_scenario(cell.sample2, cell.n2, s2) + delta
    out = []
    for test in cell.tests:
        try:
            if test == "SR":
                res = sr_test(x1, x2, cell.alpha, mode=cell.mode)
                out.append((True, res.reject, res.statistic, math.sqrt(res.variance_est)))
            else:
                res = tr_test_q2(x1, x2, cell.alpha)
                out.append((True, res.reject, res.statistic, math.nan))
        except SpatialRankError:
            out.append((False, False, math.nan, math.nan))
    return out


def _run_chunk(args):
    cell, master_seed, cell_id, start, stop = args
    t0 = time.perf_counter()
    delta = cell.delta()
    recs = [_replicate(cell, delta, master_seed, cell_id, r) for r in range(start, stop)]
    return cell_id, start, recs, time.perf_counter() - t0


def _summarize(cell_id, cell, records, wall):
    results = []
    for k, test in enumerate(cell.tests):
        ok = [rec[k] for rec in records if rec[k][0]]
        stats = [o[2] for o in ok]
        sig = [o[3] for o in ok if not math.isnan(o[3])]
        results.append(CellResult(
            cell_id=cell_id, test=test, replications=len(records),
            rejections=sum(1 for o in ok if o[1]), failures=len(records) - len(ok),
            mean_statistic=math.fsum(stats) / len(stats) if stats else math.nan,
            mean_sigma_hat=math.fsum(sig) / len(sig) if sig else math.nan,
            wall_time=wall,
        ))
    return results


def run_cell(cell, master_seed=0, cell_id=0):
    """Run every replication of one cell in this process."""
    problems = cell.problems()
    if problems:
        raise PlanValidationError(f"cell {cell_id}: {'; '.join(problems)}")
    _, _, records, wall = _run_chunk((cell, master_seed, cell_id, 0, cell.replications))
    return _summarize(cell_id, cell, records, wall)


def run_plan(plan, progress=None):
    """Validate, then run all cells; returns CellResults in (cell, test) order.

    With ``plan.workers > 1`` chunks of replications are farmed out to a
    process pool. A result's ``wall_time`` is the compute time summed over
    its cell's chunks. ``progress`` is called as ``progress(done, total)`` with
    replication counts.
    """
    plan.validate()
    if not plan.cells:
        return []
    jobs = [(cell, plan.master_seed, cid, start, min(start + _CHUNK_REPS, cell.replications))
            for cid, cell in enumerate(plan.cells)
            for start in range(0, cell.replications, _CHUNK_REPS)]
    total = sum(c.replications for c in plan.cells)
    records = {cid: {} for cid in range(len(plan.cells))}
    busy = dict.fromkeys(records, 0.0)
    done = 0

    def collect(item):
        nonlocal done
        cid, start, recs, wall = item
        busy[cid] += wall
        records[cid][start] = recs
        done += len(recs)
        if progress:
            progress(done, total)

    workers = plan.workers or 1
    if workers == 1:
        for job in jobs:
            collect(_run_chunk(job))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for item in pool.map(_run_chunk, jobs):
                collect(item)
    out = []
    for cid, cell in enumerate(plan.cells):
        ordered = [rec for start in sorted(records[cid]) for rec in records[cid][start]]
        out.extend(_summarize(cid, cell, ordered, busy[cid]))
    return out


# --- output ------------------------------------------------------------------------

def _num(x):
    if isinstance(x, float) and math.isnan(x):
        return ""
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def cells_csv(plan, results):
    """``cells.csv`` contents. Only deterministic quantities are included."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CELL_COLUMNS)
    for res in results:
        c = plan.cells[res.cell_id]
        eta = c.shift.eta if c.shift is not None else 0.0
        w.writerow([res.cell_id, c.label, c.n1, c.n2, c.p, c.shift_kind, _num(float(eta)), res.test,
                    c.mode if res.test == "SR" else "", _num(float(c.alpha)), res.replications,
                    res.rejections, _num(res.rejection_rate), _num(res.standard_error), res.failures,
                    _num(res.mean_statistic), _num(res.mean_sigma_hat)])
    return buf.getvalue()


def timings_csv(results):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TIMING_COLUMNS)
    seen = set()
    for res in results:
        if res.cell_id not in seen:
            seen.add(res.cell_id)
            w.writerow([res.cell_id, f"{res.wall_time * 1000:.0f}"])
    return buf.getvalue()


def render_table(plan, results):
    """Rejection rates in percent: rows are scenario x size, columns test x shift kind."""
    kinds = ("none", "dense", "sparse")
    heads = {"none": "size", "dense": "dense", "sparse": "sparse"}
    tests = [t for t in TESTS if any(r.test == t for r in results)]
    rows = {}
    for res in results:
        c = plan.cells[res.cell_id]
        key = (c.label, c.n1, c.n2, c.p)
        rows.setdefault(key, {})[(res.test, c.shift_kind)] = res.rejection_rate
    cols = [(t, k) for k in kinds for t in tests]
    header = ["scenario", "(n1,n2,p)"] + [f"{t}:{heads[k]}" for t, k in cols]
    lines = [header]
    for (label, n1, n2, p), vals in rows.items():
        cells = [label, f"({n1},{n2},{p})"]
        for col in cols:
            v = vals.get(col)
            cells.append("-" if v is None or math.isnan(v) else f"{100 * v:.1f}")
        lines.append(cells)
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    return "\n".join("  ".join(s.rjust(wd) for s, wd in zip(r, widths)) for r in lines) + "\n"
