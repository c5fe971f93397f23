"""Experiment harness: run variants, measure accuracy/ranks/flops, report.

An experiment fixes a geometry, kernel and accuracy, runs one or all M2L
variants over the same octree, and writes ``report.md`` (human tables) and
``report.csv`` (machine rows ``level,variant,metric,value``).  Every
numeric field except the wall-clock timings is reproducible from
(config, seed) in single-threaded mode.  A variant whose precompute
exceeds the memory budget is reported as ``OOM`` and the experiment exit
code becomes 2.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .engine import FmmPlan, build_plan
from .geometry import bounding_cube, gen_geometry, read_particle_file
from .interp import ChebyshevGrid
from .kernels import helmholtz_kernel, laplace_kernel
from .m2l import DEFAULT_BUDGET_BYTES, VARIANTS, BudgetExceededError, make_handler
from .octree import build_interaction_lists, build_tree, unique_transfer_vectors
from .symmetry import SymmetryMap

__all__ = ["ExperimentConfig", "RunReport", "measure_error", "run_experiment",
           "parse_report_csv"]


@dataclass
class ExperimentConfig:
    """Parameters of one benchmark experiment.

    ``acc`` is the shorthand (order, epsilon) = (acc, 10^-acc); setting
    ``order``/``epsilon`` explicitly overrides it.
    """

    geometry: str = "sphere"  # sphere | oblate | prolate | file:PATH
    n: int = 5000
    depth: int = 3
    kernel: str = "laplace"
    wavenumber: float = 1.0
    acc: int | None = 4
    order: int | None = None
    epsilon: float | None = None
    variant: str = "all"
    compression: str = "svd"
    block_size: int = 128
    seed: int = 0
    threads: int = 1
    out_dir: str = "out"
    error_metric: str = "l2"  # l2 | paper
    budget_bytes: int = DEFAULT_BUDGET_BYTES
    timing_repeats: int = 3

    def resolve_accuracy(self) -> tuple[int, float]:
        order = self.order
        epsilon = self.epsilon
        if order is None or epsilon is None:
            if self.acc is None:
                raise ValueError("either acc or both order and epsilon must be set")
            order = self.acc if order is None else order
            epsilon = 10.0 ** (-self.acc) if epsilon is None else epsilon
        return int(order), float(epsilon)

    def make_kernel(self):
        if self.kernel == "laplace":
            return laplace_kernel()
        if self.kernel == "helmholtz":
            return helmholtz_kernel(self.wavenumber)
        raise ValueError(f"unknown kernel {self.kernel!r}")

    def variant_list(self) -> list[str]:
        if self.variant == "all":
            return list(VARIANTS)
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        return [self.variant]


def measure_error(potentials, reference, metric: str = "l2") -> float:
    """Relative error of approximate potentials on a reference subset.

    ``l2`` uses sqrt(sum|f-fbar|^2 / sum|f|^2); ``paper`` uses the
    unsquared denominator sqrt(sum|f-fbar|^2 / sum|f|) instead.
    """
    f = np.asarray(reference)
    fbar = np.asarray(potentials)
    if f.size == 0:
        raise ValueError("reference set is empty")
    num = np.sum(np.abs(f - fbar) ** 2)
    if metric == "l2":
        return float(np.sqrt(num / np.sum(np.abs(f) ** 2)))
    if metric == "paper":
        return float(np.sqrt(num / np.sum(np.abs(f))))
    raise ValueError(f"unknown error metric {metric!r}")


@dataclass
class VariantResult:
    status: str  # "ok" | "oom"
    eps_l2: float | None = None
    precompute_s: float | None = None
    apply_s_mean: float | None = None
    apply_s_spread: float | None = None
    operator_count: int | None = None
    stored_bytes: int | None = None
    level_flops: dict[int, int] = field(default_factory=dict)
    level_ranks: dict[int, tuple[int, float, int]] = field(default_factory=dict)
    message: str = ""


@dataclass
class RunReport:
    config: ExperimentConfig
    order: int
    epsilon: float
    levels: list[int]
    level_t_sizes: dict[int, int]
    level_tsym_sizes: dict[int, int]
    reference_leaf: str
    reference_size: int
    results: dict[str, VariantResult]

    @property
    def exit_code(self) -> int:
        return 2 if any(r.status == "oom" for r in self.results.values()) else 0

    # ------------------------------------------------------------------

    def csv_rows(self) -> list[tuple[str, str, str, str]]:
        rows: list[tuple[str, str, str, str]] = []
        for lvl in self.levels:
            rows.append((str(lvl), "-", "n_transfer_vectors", repr(self.level_t_sizes[lvl])))
            rows.append((str(lvl), "-", "n_cone_vectors", repr(self.level_tsym_sizes[lvl])))
        for variant, res in self.results.items():
            if res.status == "oom":
                rows.append(("global", variant, "status", "OOM"))
                for lvl in self.levels:
                    rows.append((str(lvl), variant, "flops", "OOM"))
                continue
            rows.append(("global", variant, "status", "ok"))
            rows.append(("global", variant, "eps_l2", repr(res.eps_l2)))
            rows.append(("global", variant, "operator_count", repr(res.operator_count)))
            rows.append(("global", variant, "stored_bytes", repr(res.stored_bytes)))
            rows.append(("global", variant, "precompute_s", repr(res.precompute_s)))
            rows.append(("global", variant, "apply_s_mean", repr(res.apply_s_mean)))
            rows.append(("global", variant, "apply_s_spread", repr(res.apply_s_spread)))
            for lvl in self.levels:
                rows.append((str(lvl), variant, "flops", repr(res.level_flops.get(lvl, 0))))
                if lvl in res.level_ranks:
                    rmin, ravg, rmax = res.level_ranks[lvl]
                    rows.append((str(lvl), variant, "rank_min", repr(rmin)))
                    rows.append((str(lvl), variant, "rank_avg", repr(ravg)))
                    rows.append((str(lvl), variant, "rank_max", repr(rmax)))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("level", "variant", "metric", "value"))
        writer.writerows(self.csv_rows())
        return buf.getvalue()

    def to_markdown(self) -> str:
        cfg = self.config
        lines = ["# Fast summation benchmark report", ""]
        lines.append(
            f"- geometry: {cfg.geometry}, n = {cfg.n}, depth = {cfg.depth}, "
            f"seed = {cfg.seed}, threads = {cfg.threads}"
        )
        lines.append(
            f"- kernel: {cfg.kernel}"
            + (f" (k = {cfg.wavenumber})" if cfg.kernel == "helmholtz" else "")
            + f", order = {self.order}, epsilon = {self.epsilon:g}, "
            f"compression = {cfg.compression}, block size = {cfg.block_size}"
        )
        lines.append(
            f"- error metric: {cfg.error_metric}; reference leaf {self.reference_leaf} "
            f"({self.reference_size} particles)"
        )
        lines.append("")

        lines.append("## Interaction lists")
        lines.append("")
        lines.append("| level | distinct transfer vectors | cone representatives |")
        lines.append("| --- | --- | --- |")
        for lvl in self.levels:
            lines.append(
                f"| {lvl} | {self.level_t_sizes[lvl]} | {self.level_tsym_sizes[lvl]} |"
            )
        lines.append("")

        variants = list(self.results)

        def cell(variant, fn):
            res = self.results[variant]
            if res.status == "oom":
                return "OOM"
            value = fn(res)
            return "OOM" if value is None else value

        lines.append("## Accuracy and cost per variant")
        lines.append("")
        lines.append("| variant | eps_L2 | operators | stored bytes | precompute [s] | apply [s] |")
        lines.append("| --- | --- | --- | --- | --- | --- |")
        for v in variants:
            res = self.results[v]
            if res.status == "oom":
                lines.append(f"| {v} | OOM | OOM | OOM | OOM | OOM |")
            else:
                lines.append(
                    f"| {v} | {res.eps_l2:.3e} | {res.operator_count} | {res.stored_bytes} "
                    f"| {res.precompute_s:.3f} "
                    f"| {res.apply_s_mean:.3f} ± {res.apply_s_spread:.3f} |"
                )
        lines.append("")

        lines.append("## M2L flops per level")
        lines.append("")
        lines.append("| level | " + " | ".join(variants) + " |")
        lines.append("| --- |" + " --- |" * len(variants))
        for lvl in self.levels:
            row = [cell(v, lambda r, lvl=lvl: r.level_flops.get(lvl, 0)) for v in variants]
            lines.append(f"| {lvl} | " + " | ".join(str(x) for x in row) + " |")
        lines.append("")

        lines.append("## Operator ranks per level (min/avg/max)")
        lines.append("")
        lines.append("| level | " + " | ".join(variants) + " |")
        lines.append("| --- |" + " --- |" * len(variants))
        for lvl in self.levels:
            row = []
            for v in variants:
                res = self.results[v]
                if res.status == "oom" or lvl not in res.level_ranks:
                    row.append("OOM" if res.status == "oom" else "-")
                else:
                    rmin, ravg, rmax = res.level_ranks[lvl]
                    row.append(f"{rmin}/{ravg:.1f}/{rmax}")
            lines.append(f"| {lvl} | " + " | ".join(row) + " |")
        lines.append("")
        return "\n".join(lines)


def parse_report_csv(text: str) -> list[tuple[str, str, str, str]]:
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    return [tuple(r) for r in rows[1:]]


def _load_particles(config: ExperimentConfig):
    if config.geometry.startswith("file:"):
        points, weights = read_particle_file(config.geometry[5:])
        return points, weights, bounding_cube(points)
    points, bbox = gen_geometry(config.geometry, config.n, config.seed)
    rng = np.random.default_rng(config.seed + 1)
    weights = rng.uniform(0.5, 1.5, len(points))
    return points, weights, bbox


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Execute an experiment and write report.md / report.csv."""
    order, epsilon = config.resolve_accuracy()
    kernel = config.make_kernel()
    points, weights, bbox = _load_particles(config)

    tree = build_tree(points, bbox, config.depth)
    lists = build_interaction_lists(tree)
    grid = ChebyshevGrid(order)
    levels = lists.far_levels()
    level_transfers = {lvl: unique_transfer_vectors(lists, lvl) for lvl in levels}
    level_widths = {lvl: tree.cell_width(lvl) for lvl in levels}
    t_sizes = {lvl: len(level_transfers[lvl]) for lvl in levels}
    tsym_sizes = {lvl: len(SymmetryMap(level_transfers[lvl])) for lvl in levels}

    # deterministic reference cluster: the most populated leaf
    ref_leaf = max(tree.leaves, key=lambda c: (len(tree.leaf_particles[c]), c.ijk))
    ref_idx = tree.leaf_particles[ref_leaf]

    results: dict[str, VariantResult] = {}
    reference = None
    for variant in config.variant_list():
        handler = make_handler(
            variant,
            kernel,
            grid,
            epsilon,
            compression=config.compression,
            block_size=config.block_size,
            budget_bytes=config.budget_bytes,
        )
        tic = time.perf_counter()
        try:
            handler.precompute(level_transfers, level_widths)
        except BudgetExceededError as exc:
            results[variant] = VariantResult(status="oom", message=str(exc))
            continue
        precompute_s = time.perf_counter() - tic

        plan = FmmPlan(tree, lists, grid, kernel, handler, epsilon, config.threads)
        if reference is None:
            reference = plan.direct_reference(weights, ref_idx)
        handler.reset_counters()
        apply_times = []
        potentials = plan.run(weights)
        apply_times.append(plan.m2l_seconds)
        flops_snapshot = dict(handler.flops)
        for _ in range(max(config.timing_repeats - 1, 0)):
            plan.run(weights)
            apply_times.append(plan.m2l_seconds)

        eps_l2 = measure_error(potentials[ref_idx], reference, config.error_metric)
        ranks = {}
        for lvl in levels:
            rr = handler.level_ranks(lvl)
            if rr:
                ranks[lvl] = (int(min(rr)), float(np.mean(rr)), int(max(rr)))
        results[variant] = VariantResult(
            status="ok",
            eps_l2=eps_l2,
            precompute_s=precompute_s,
            apply_s_mean=float(np.mean(apply_times)),
            apply_s_spread=float((np.max(apply_times) - np.min(apply_times)) / 2.0),
            operator_count=handler.operator_count(),
            stored_bytes=handler.stored_bytes(),
            level_flops=flops_snapshot,
            level_ranks=ranks,
        )

    report = RunReport(
        config=config,
        order=order,
        epsilon=epsilon,
        levels=levels,
        level_t_sizes=t_sizes,
        level_tsym_sizes=tsym_sizes,
        reference_leaf=str(tuple(ref_leaf.ijk)),
        reference_size=len(ref_idx),
        results=results,
    )

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.md").write_text(report.to_markdown())
    return report
