"""Seeded Monte-Carlo experiment harness: runs, campaigns, sweeps, CSV.

One run draws a world and a channel realization, scores memories with the
GAE pipeline, allocates power with the requested method, materializes the
uploads and grades the ground-truth question set with the synthetic oracle.
Runs are isolated: every method inside a campaign sees identical worlds,
channels and GAE scores for a given seed.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from . import baselines
from .baselines import BaselineSpec
from .channel import RobotGeometry, draw_channels, sinr_vector
from .config import Scenario, build_scenario, load_config  # noqa: F401 (re-export)
from .gae import MemoryIndex, SyntheticBackend, run_gae
from .qom import (PilotPhaseInfeasible, PowerVector, QomParams,
                  frames_uploaded, pilot_overhead, qom_objective, qom_weights)
from .solver import solve_mcpa
from .world import WorldInstance, build_world

__all__ = [
    "METHODS",
    "CSV_COLUMNS",
    "ExternalWeights",
    "RunMetrics",
    "run_once",
    "run_campaign",
    "run_sweep",
    "write_csv",
    "aggregate",
    "Scenario",
    "build_scenario",
    "load_config",
]

METHODS = ("mcpa",) + baselines.BASELINE_KINDS

CSV_COLUMNS = ("method", "seed", "p_sum_mw", "eqa_accuracy", "qom",
               "sum_rate_mbps", "connected_drones", "solver_iters", "wall_ms")


@dataclass(frozen=True)
class ExternalWeights:
    """Externally supplied per-robot value weights (e.g. a semantic-similarity
    scorer) run through the same MM machinery as the native allocator."""

    weights: tuple
    name: str = "external"


@dataclass(frozen=True)
class RunMetrics:
    """Everything one (scenario, method, seed) run reports.

    ``power_mw`` keeps the allocation behind the metrics; it is not part of
    the CSV schema but lets callers re-derive qom / rates exactly.
    """

    method: str
    seed: int
    p_sum_mw: float
    eqa_accuracy: float
    qom: float
    sum_rate_mbps: float
    connected_drones: int
    solver_iters: int
    wall_ms: float
    power_mw: tuple = ()

    def row(self) -> list:
        return [self.method, self.seed, repr(self.p_sum_mw), repr(self.eqa_accuracy),
                repr(self.qom), repr(self.sum_rate_mbps), self.connected_drones,
                self.solver_iters, f"{self.wall_ms:.3f}"]


def _method_spec(method) -> BaselineSpec | ExternalWeights | str:
    if isinstance(method, (BaselineSpec, ExternalWeights)):
        return method
    if method == "mcpa":
        return "mcpa"
    return BaselineSpec(kind=str(method))


def _method_name(method) -> str:
    if isinstance(method, str):
        return method
    if isinstance(method, ExternalWeights):
        return method.name
    return method.kind


def _default_cov_threshold(scenario: Scenario, effective_time_s: float) -> float:
    """Rate that uploads just over half a dataset within the effective time.

    The margin compensates the zero-interference sizing so admitted robots
    actually cross the more-than-half mark once interference is charged.
    """
    half_bits = 0.5 * (1.0 + scenario.coverage_margin) \
        * scenario.dataset.item_volume_bits[0] * scenario.dataset.num_items[0]
    return half_bits / effective_time_s


@dataclass
class _RunContext:
    """Per-seed state shared by every method: world, channel, GAE, weights."""

    world: WorldInstance
    state: object
    params: object
    effective_time_s: float
    base_index: MemoryIndex
    base_accuracy: float


def _prepare_run(scenario: Scenario, seed: int, backend=None) -> _RunContext:
    backend = backend or SyntheticBackend()
    world = build_world(scenario, np.random.default_rng(
        [scenario.seeds["placement"], seed]))

    rng_geom = np.random.default_rng([scenario.seeds["channel"], seed, 0])
    distances = rng_geom.uniform(scenario.distance_min_m, scenario.distance_max_m,
                                 size=scenario.num_robots)
    geometry = RobotGeometry(distance_m=distances,
                             server_height_m=scenario.server_height_m)
    state = draw_channels(scenario.radio, geometry,
                          seed=[scenario.seeds["channel"], seed, 1])

    report = run_gae(world.datasets, world.base_memory, scenario.pilot_ratio,
                     scenario.questions_per_robot, backend,
                     seed=[scenario.seeds["pilot"], seed])

    delta_t = pilot_overhead(state, scenario.dataset, scenario.radio,
                             scenario.power_budget_w,
                             time_budget_s=scenario.time_budget_s)
    effective_time_s = scenario.time_budget_s - delta_t
    params = qom_weights(report.scores, scenario.dataset, effective_time_s,
                         scenario.radio.bandwidth_hz)

    base_index = world.base_index()
    oracle = SyntheticBackend()
    base_accuracy = sum(oracle.grade(q, base_index) for q in world.questions) \
        / len(world.questions)
    return _RunContext(world=world, state=state, params=params,
                       effective_time_s=effective_time_s, base_index=base_index,
                       base_accuracy=base_accuracy)


def _allocate(ctx: _RunContext, scenario: Scenario, method) -> tuple[PowerVector, int]:
    spec = _method_spec(method)
    state, budget = ctx.state, scenario.power_budget_w
    noise = scenario.radio.noise_power_w
    if spec == "mcpa":
        trace = solve_mcpa(ctx.params, state, budget, noise, scenario.solver)
        return trace.final, trace.outer_iterations
    if isinstance(spec, ExternalWeights):
        w = np.asarray(spec.weights, dtype=float)
        params = QomParams(weights=w, effective_time_s=ctx.effective_time_s,
                           gae_scores=np.where(w > 0.0, 0.0, 1.0))
        trace = solve_mcpa(params, state, budget, noise, scenario.solver)
        return trace.final, trace.outer_iterations
    kind, options = spec.kind, spec.options
    if kind == "max_rate":
        trace = solve_mcpa(baselines.unit_rate_params(state.num_robots), state,
                           budget, noise, scenario.solver)
        return trace.final, trace.outer_iterations
    if kind == "max_cov":
        threshold = options.get("rate_threshold_bps") or \
            _default_cov_threshold(scenario, ctx.effective_time_s)
        return baselines.allocate_max_cov(
            state, budget, noise, threshold, scenario.radio.bandwidth_hz), 0
    if kind == "fairness":
        return baselines.allocate_fairness(
            state, budget, noise, tol=options.get("tol", 1e-4)), 0
    if kind == "greedy":
        return baselines.allocate_greedy(
            state, ctx.params.gae_scores, scenario.dataset, budget, noise,
            ctx.effective_time_s, scenario.radio.bandwidth_hz), 0
    if kind == "remember":
        return baselines.allocate_remember(state.num_robots, budget), 0
    if kind == "uniform":
        return baselines.allocate_uniform(state.num_robots, budget), 0
    raise ValueError(f"unknown method {kind!r}")


class _UnionIndex:
    """Read-only union view over two memory indexes."""

    def __init__(self, first: MemoryIndex, second: MemoryIndex):
        self._a, self._b = first, second

    def has_tag(self, tag):
        return self._a.has_tag(tag) or self._b.has_tag(tag)

    def robots_for(self, tag):
        return self._a.robots_for(tag) | self._b.robots_for(tag)

    def near(self, tag, x, y, radius_m=None):
        args = (tag, x, y) if radius_m is None else (tag, x, y, radius_m)
        return self._a.near(*args) or self._b.near(*args)


def _score_allocation(ctx: _RunContext, scenario: Scenario,
                      allocation: PowerVector) -> tuple[float, float, float, int]:
    noise = scenario.radio.noise_power_w
    bandwidth = scenario.radio.bandwidth_hz
    meta = scenario.dataset

    frames = np.array([
        math.floor(frames_uploaded(ctx.state, allocation, meta, noise,
                                   ctx.effective_time_s, bandwidth, k))
        for k in range(scenario.num_robots)
    ])

    upload_index = MemoryIndex()
    for k in range(scenario.num_robots):
        upload_index.extend(ctx.world.datasets[k][:frames[k]])
    merged = _UnionIndex(ctx.base_index, upload_index)

    oracle = SyntheticBackend()
    correct = sum(oracle.grade(q, merged) for q in ctx.world.questions)
    accuracy = correct / len(ctx.world.questions)

    qom = qom_objective(ctx.params, ctx.state, allocation, noise)
    rates = bandwidth * np.log2(1.0 + sinr_vector(ctx.state, allocation.powers, noise))
    connected = int(np.sum(frames / meta.num_items > 0.5))
    return accuracy, qom, float(rates.sum() / 1e6), connected


def run_once(scenario: Scenario, method, seed: int, backend=None) -> RunMetrics:
    """Execute one seeded run of one method and report its metrics."""
    ctx = _prepare_run(scenario, seed, backend)
    return _run_with_context(ctx, scenario, method, seed)


def _run_with_context(ctx: _RunContext, scenario: Scenario, method,
                      seed: int) -> RunMetrics:
    started = time.perf_counter()
    allocation, iters = _allocate(ctx, scenario, method)
    accuracy, qom, sum_rate, connected = _score_allocation(ctx, scenario, allocation)
    wall_ms = (time.perf_counter() - started) * 1e3
    return RunMetrics(
        method=_method_name(_method_spec(method)),
        seed=seed,
        p_sum_mw=scenario.power_budget_w * 1e3,
        eqa_accuracy=accuracy,
        qom=qom,
        sum_rate_mbps=sum_rate,
        connected_drones=connected,
        solver_iters=iters,
        wall_ms=wall_ms,
        power_mw=tuple(float(p) * 1e3 for p in allocation.powers),
    )


def run_campaign(scenario: Scenario, methods, num_seeds: int,
                 backend=None) -> tuple[list[RunMetrics], dict]:
    """Run every method over the seed schedule seed_i = base + i.

    The expensive per-seed stages (world, channels, GAE) are computed once
    and shared across methods; allocations and scoring stay per-method, so
    the method list's order cannot affect any result. A failed run is
    recorded as a row of NaNs and the campaign continues.
    """
    if num_seeds < 1:
        raise ValueError("num_seeds must be >= 1")
    base = scenario.seeds["run"]
    rows: list[RunMetrics] = []
    for i in range(num_seeds):
        seed = base + i
        try:
            ctx = _prepare_run(scenario, seed, backend)
        except PilotPhaseInfeasible:
            for method in methods:
                rows.append(_failed_run(scenario, method, seed))
            continue
        for method in methods:
            try:
                rows.append(_run_with_context(ctx, scenario, method, seed))
            except Exception:
                rows.append(_failed_run(scenario, method, seed))
    return rows, aggregate(rows)


def _failed_run(scenario: Scenario, method, seed: int) -> RunMetrics:
    nan = float("nan")
    return RunMetrics(method=_method_name(_method_spec(method)), seed=seed,
                      p_sum_mw=scenario.power_budget_w * 1e3, eqa_accuracy=nan,
                      qom=nan, sum_rate_mbps=nan, connected_drones=0,
                      solver_iters=0, wall_ms=0.0)


def run_sweep(scenario: Scenario, methods, budgets_mw, num_seeds: int,
              backend=None) -> tuple[list[RunMetrics], dict]:
    """run_campaign once per power budget (default grid 100..300 mW)."""
    rows: list[RunMetrics] = []
    for budget_mw in budgets_mw:
        if budget_mw <= 0:
            raise ValueError("sweep budgets must be strictly positive")
        swept = _with_budget(scenario, budget_mw / 1e3)
        campaign_rows, _ = run_campaign(swept, methods, num_seeds, backend)
        rows.extend(campaign_rows)
    return rows, aggregate(rows)


DEFAULT_SWEEP_MW = (100.0, 150.0, 200.0, 250.0, 300.0)


def _with_budget(scenario: Scenario, power_w: float) -> Scenario:
    return replace(scenario, power_budget_w=power_w)


def aggregate(rows) -> dict:
    """Per-(method, budget) means and standard errors, NaN rows skipped."""
    groups: dict[tuple[str, float], list[RunMetrics]] = {}
    for row in rows:
        groups.setdefault((row.method, row.p_sum_mw), []).append(row)
    summary = {}
    for key, members in groups.items():
        stats = {}
        for metric in ("eqa_accuracy", "qom", "sum_rate_mbps", "connected_drones"):
            values = np.array([getattr(m, metric) for m in members], dtype=float)
            values = values[~np.isnan(values)]
            mean = float(values.mean()) if values.size else float("nan")
            se = float(values.std(ddof=1) / np.sqrt(values.size)) \
                if values.size > 1 else 0.0
            stats[metric] = {"mean": mean, "stderr": se, "count": int(values.size)}
        summary[key] = stats
    return summary


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(row.row())
