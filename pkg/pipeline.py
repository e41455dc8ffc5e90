"""
End-to-end runs: grid tree, balancing, Shabat polynomial, true tree, alignment; and the catalog
"""
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Optional

import numpy as np

from balancer import BalanceOptions, assign_heights, balance_report, build_teeth, circle_layout, subdivide
from config import section
from errors import InputError, NumericalError, ResourceGuardError, StageError, TrueTreeError
from geom_tree import as_points, hausdorff_distance, load_points, sample_points, save_json, similarity_align
from grid_approx import approximate
from harmonic import WalkConfig, estimate_measures
from plane_tree import canonical_code, enumerate_plane_trees
from render import Layer, render_png, save_svg
from shabat import SolveOptions, normalize, solve
from tracer import TraceOptions, trace_tree

logger = logging.getLogger(__name__)


@dataclass
class PipelineOptions:
    depth: int = 2
    max_depth: int = 5
    walkers: int = 100000
    seed: int = 0
    max_solve_degree: int = 160
    strict: bool = False
    catalog_max: int = 8

    @classmethod
    def from_config(cls, cfg=None, **overrides):
        values = dict(section(cfg, "pipeline"))
        values.update({k: v for k, v in overrides.items() if v is not None})
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in values.items() if k in names})


@dataclass
class PipelineReport:
    """Everything needed to reproduce and judge one run"""

    input: str
    depth: int
    delta_exp: int
    walkers: int
    seeds: Dict[str, int]
    sizes: Dict[str, int] = field(default_factory=dict)
    solved_tree: str = "skipped"
    newton: Dict[str, float] = field(default_factory=dict)
    balance: dict = field(default_factory=dict)
    grid_distance: Optional[float] = None
    hausdorff: Optional[float] = None
    timings: Dict[str, float] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)

    def to_json(self):
        return asdict(self)

    @classmethod
    def from_json(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise InputError(f"unknown report fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise InputError(f"malformed report: {exc}") from exc


class Pipeline:
    """Runs the stages in order, timing each and tagging failures with the stage name"""

    def __init__(self, points, output_dir, cfg=None, delta_exp=None, allow_deep=False, png=False, **overrides):
        self.cfg = cfg
        self.options = PipelineOptions.from_config(cfg, **overrides)
        self.balance_options = BalanceOptions.from_config(cfg, delta_exp=delta_exp)
        self.walk_config = WalkConfig.from_config(cfg, seed=self.options.seed)
        self.solve_options = SolveOptions.from_config(cfg, seed=self.options.seed)
        self.trace_options = TraceOptions.from_config(cfg)
        self.output_dir = output_dir
        self.png = png
        if isinstance(points, (str, os.PathLike)):
            self.source = str(points)
            self.points = load_points(points)
        else:
            self.source = "<points>"
            self.points = as_points(points)
        if self.options.depth > self.options.max_depth:
            if not allow_deep:
                raise ResourceGuardError(f"depth {self.options.depth} exceeds the guard of {self.options.max_depth}")
            logger.warning("depth %d exceeds the guard of %d; the decorated tree may be very large",
                           self.options.depth, self.options.max_depth)
        self.report = PipelineReport(self.source, self.options.depth, self.balance_options.delta_exp,
                                     self.options.walkers, {"walk": self.options.seed, "solve": self.options.seed})

    def _path(self, name):
        return os.path.join(self.output_dir, name)

    def _save(self, key, name, data):
        save_json(self._path(name), data)
        self.report.artifacts[key] = name

    def _stage(self, name, func, *args, **kwargs):
        logger.info("stage %s", name)
        start = time.perf_counter()
        try:
            result = func(*args, **kwargs)
        except TrueTreeError as exc:
            raise StageError(name, exc) from exc
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            raise StageError(name, NumericalError(f"{type(exc).__name__}: {exc}")) from exc
        self.report.timings[name] = round(time.perf_counter() - start, 6)
        return result

    def run(self) -> PipelineReport:
        os.makedirs(self.output_dir, exist_ok=True)
        report = self.report
        K = self.points

        tree = self._stage("approximate", approximate, K, self.options.depth)
        self._save("tree", "tree.json", tree.to_json())
        spacing = tree.unit / 64
        report.grid_distance = hausdorff_distance(K, sample_points(tree, spacing))

        before = self._stage("measure", estimate_measures, tree, self.walk_config, self.options.walkers)
        self._save("measures", "measures.json", before.to_json())

        def decorate():
            layout = circle_layout(before, tree, floor=0.5 / max(before.total, 1))
            intervals = subdivide(layout, self.balance_options.group_size)
            plan = assign_heights(intervals, tree, before, self.balance_options.delta_exp, self.balance_options)
            return plan, build_teeth(plan, tree)

        plan, decorated = self._stage("decorate", decorate)
        self._save("plan", "plan.json", plan.to_json())
        self._save("decorated", "decorated.json", decorated.to_json())

        after = self._stage("measure_decorated", estimate_measures, decorated, self.walk_config, self.options.walkers)
        self._save("measures_decorated", "measures_decorated.json", after.to_json())
        report.balance = balance_report(before, after)
        report.sizes = {"tree_edges": tree.edge_count, "decorated_edges": decorated.edge_count}

        layers = [Layer("K", K), Layer("tree", tree), Layer("decorated", decorated)]
        target = self._solve_target(tree, decorated)
        if target is None:
            report.skipped.extend(["solve", "trace", "align"])
            logger.warning("solve, trace and align skipped: both trees exceed degree %d", self.options.max_solve_degree)
        else:
            label, geom = target
            report.solved_tree = label
            p = self._stage("solve", solve, geom.plane_tree(), geom, self.solve_options, self.trace_options)
            q, _ = normalize(p)
            report.sizes["degree"] = q.degree
            report.newton = {"iterations": p.iterations, "residual": p.residual}
            self._save("polynomial", "poly.json", q.to_json())
            traced = self._stage("trace", trace_tree, q, self.trace_options)
            self._save("true_tree", "geom.json", traced.geom.to_json())
            similarity, distance = self._stage("align", similarity_align, traced.geom, K)
            report.hausdorff = distance
            layers.append(Layer("true", similarity.apply_tree(traced.geom)))

        save_svg(self._path("overlay.svg"), layers)
        report.artifacts["overlay"] = "overlay.svg"
        if self.png:
            render_png(self._path("overlay.png"), layers)
            report.artifacts["overlay_png"] = "overlay.png"
        self._save("report", "report.json", report.to_json())
        logger.info("pipeline done: grid distance %.4g, aligned distance %s", report.grid_distance,
                    "n/a" if report.hausdorff is None else f"{report.hausdorff:.4g}")
        return report

    def _solve_target(self, tree, decorated):
        limit = self.options.max_solve_degree
        if decorated.edge_count <= limit:
            return "decorated", decorated
        if self.options.strict:
            raise StageError("solve", ResourceGuardError(
                f"decorated tree has {decorated.edge_count} edges, guard is {limit}"))
        logger.warning("decorated tree has %d edges (guard %d); solving the grid tree instead",
                       decorated.edge_count, limit)
        if tree.edge_count <= limit:
            return "grid", tree
        return None


def pipeline(points, output_dir, cfg=None, **kwargs) -> PipelineReport:
    return Pipeline(points, output_dir, cfg, **kwargs).run()


def catalog(n, output_dir, cfg=None) -> dict:
    """Solve and draw every plane tree with at most n edges"""
    options = PipelineOptions.from_config(cfg)
    if n > options.catalog_max:
        raise ResourceGuardError(f"catalog is limited to {options.catalog_max} edges, got {n}")
    if n < 1:
        raise InputError("catalog needs at least one edge")
    solve_options = SolveOptions.from_config(cfg)
    trace_options = TraceOptions.from_config(cfg)
    os.makedirs(output_dir, exist_ok=True)
    entries, partial = [], False
    for edges in range(1, n + 1):
        for index, tree in enumerate(enumerate_plane_trees(edges)):
            code = canonical_code(tree)
            entry = {"edges": edges, "code": code}
            try:
                q, _ = normalize(solve(tree, None, solve_options, trace_options))
                traced = trace_tree(q, trace_options)
            except NumericalError as exc:
                logger.warning("catalog entry %s failed: %s", code, exc)
                entry["error"] = str(exc)
                partial = True
            else:
                name = f"tree_{edges}_{index:03d}.svg"
                save_svg(os.path.join(output_dir, name), [Layer("true", traced.geom)])
                entry["polynomial"] = q.to_json()
                entry["svg"] = name
            entries.append(entry)
    result = {"max_edges": n, "partial": partial, "entries": entries}
    with open(os.path.join(output_dir, "catalog.json"), "w", encoding="utf-8") as handle:
        json.dump(result, handle, indent=1)
    logger.info("catalog of %d trees written to %s%s", len(entries), output_dir, " (partial)" if partial else "")
    return result


def load_report(path) -> PipelineReport:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {path}: {exc}") from exc
    return PipelineReport.from_json(data)
