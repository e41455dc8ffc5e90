#!/usr/bin/env python3
"""
truetrees - true trees, harmonic measure and Shabat polynomials
Command line entry point
"""
import argparse
import json
import logging
import sys

from balancer import BalanceOptions, assign_heights, balance_report, build_teeth, circle_layout, save_plan, subdivide
from config import load_config, section
from errors import InputError, TrueTreeError
from geom_tree import load_geom_tree, load_points, save_json
from grid_approx import approximate
from harmonic import MeasureTable, WalkConfig, estimate_measures
from pipeline import catalog, pipeline
from plane_tree import PlaneTree, canonical_code, enumerate_plane_trees, from_code
from polynomial import load_polynomial
from render import Layer, render_png, save_svg
from shabat import SolveOptions, normalize, solve
from tracer import TraceOptions, trace_tree

logger = logging.getLogger("truetrees")

PROGRAM = "truetrees"


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


class _ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as InputError"""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


class TrueTreesCLI:
    """Parses arguments, sets up logging and dispatches to one command"""

    def __init__(self):
        self.parser = self._build_parser()
        self.cfg = None

    def _build_parser(self):
        parser = _ArgumentParser(prog=PROGRAM, description=__doc__.strip().splitlines()[0])
        parser.add_argument("--config", help="YAML file over the shipped defaults")
        parser.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
        commands = parser.add_subparsers(dest="command", required=True)

        cmd = commands.add_parser("approximate", help="grid tree of a point set")
        cmd.add_argument("--input", "--points", dest="points", required=True, help="point set JSON")
        cmd.add_argument("--depth", type=int)
        cmd.add_argument("--output", required=True)
        self._add_drawing(cmd)

        cmd = commands.add_parser("balance", help="harmonic measure of every edge side")
        cmd.add_argument("--tree", required=True)
        cmd.add_argument("--walkers", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--workers", type=int)
        cmd.add_argument("--report", "--output", dest="output", required=True, help="measure table JSON")

        cmd = commands.add_parser("decorate", help="add teeth that even out the measure")
        cmd.add_argument("--tree", required=True)
        cmd.add_argument("--measures", required=True)
        cmd.add_argument("--delta-exp", type=int)
        cmd.add_argument("--output", required=True)
        cmd.add_argument("--plan", help="also write the height plan")
        cmd.add_argument("--measure-after", type=int, metavar="WALKERS",
                         help="measure the decorated tree and print the balance report")
        cmd.add_argument("--seed", type=int)
        self._add_drawing(cmd)

        cmd = commands.add_parser("solve", help="Shabat polynomial of a plane tree")
        source = cmd.add_mutually_exclusive_group(required=True)
        source.add_argument("--tree", help="plane tree or geometric tree JSON")
        source.add_argument("--code", help="d/u boundary word")
        cmd.add_argument("--hint", help="geometric tree used as the initial guess")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--output", required=True)

        cmd = commands.add_parser("trace", help="true tree of a Shabat polynomial")
        cmd.add_argument("--poly", required=True)
        cmd.add_argument("--output", required=True)
        self._add_drawing(cmd)

        cmd = commands.add_parser("pipeline", help="point set to aligned true tree")
        cmd.add_argument("--points", required=True)
        cmd.add_argument("--depth", type=int)
        cmd.add_argument("--delta-exp", type=int)
        cmd.add_argument("--walkers", type=int)
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--output-dir", required=True)
        cmd.add_argument("--strict", action="store_true", default=None,
                         help="fail instead of solving the grid tree when the decorated tree is too large")
        cmd.add_argument("--allow-deep", action="store_true", help="lift the depth guard")
        cmd.add_argument("--png", action="store_true")

        cmd = commands.add_parser("catalog", help="solve every plane tree up to a size")
        cmd.add_argument("--max-edges", type=int, required=True)
        cmd.add_argument("--output-dir", required=True)

        cmd = commands.add_parser("enumerate", help="canonical codes of all plane trees with n edges")
        cmd.add_argument("--edges", type=int, required=True)
        cmd.add_argument("--output")
        return parser

    @staticmethod
    def _add_drawing(cmd):
        cmd.add_argument("--svg")
        cmd.add_argument("--png")

    def _setup_logging(self, args):
        settings = section(self.cfg, "logging")
        level = (args.log_level or settings["level"]).upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise InputError(f"unknown log level {level}")
        logging.basicConfig(level=level, format=settings["format"])

    def _draw(self, args, layers):
        style = section(self.cfg, "render")
        if args.svg:
            save_svg(args.svg, layers, stroke_width=style["stroke_width"], vertex_radius=style["vertex_radius"])
            print(f"svg: {args.svg}")
        if args.png:
            render_png(args.png, layers, size=style["png_size"], stroke_width=style["stroke_width"],
                       vertex_radius=style["vertex_radius"])
            print(f"png: {args.png}")

    def run(self, argv=None):
        try:
            args = self.parser.parse_args(argv)
            self.cfg = load_config(args.config)
            self._setup_logging(args)
            handler = getattr(self, "cmd_" + args.command.replace("-", "_"))
            handler(args)
        except TrueTreeError as exc:
            logger.error("%s", exc)
            return exc.exit_code
        return 0

    def cmd_approximate(self, args):
        points = load_points(args.points)
        depth = args.depth if args.depth is not None else section(self.cfg, "pipeline")["depth"]
        tree = approximate(points, depth)
        save_json(args.output, tree.to_json())
        print(f"grid tree: {tree.vertex_count} vertices, {tree.edge_count} edges -> {args.output}")
        self._draw(args, [Layer("K", points), Layer("tree", tree)])

    def cmd_balance(self, args):
        tree = load_geom_tree(args.tree)
        config = WalkConfig.from_config(self.cfg, seed=args.seed, workers=args.workers)
        walkers = args.walkers or section(self.cfg, "pipeline")["walkers"]
        table = estimate_measures(tree, config, walkers)
        save_json(args.output, table.to_json())
        summary = table.summary()
        print(f"{table.total} hits on {tree.edge_count} edges; max side deviation "
              f"{summary['max_side_deviation']:.4f} -> {args.output}")

    def cmd_decorate(self, args):
        tree = load_geom_tree(args.tree)
        table = MeasureTable.from_json(_read_json(args.measures))
        options = BalanceOptions.from_config(self.cfg, delta_exp=args.delta_exp)
        layout = circle_layout(table, tree)
        intervals = subdivide(layout, options.group_size)
        plan = assign_heights(intervals, tree, table, options.delta_exp, options)
        decorated = build_teeth(plan, tree)
        save_json(args.output, decorated.to_json())
        if args.plan:
            save_plan(args.plan, plan)
        print(f"decorated tree: {decorated.edge_count} edges, {len(intervals)} intervals, "
              f"N={plan.N} -> {args.output}")
        if args.measure_after:
            config = WalkConfig.from_config(self.cfg, seed=args.seed)
            after = estimate_measures(decorated, config, args.measure_after)
            report = balance_report(table, after)
            print(json.dumps(report, indent=1))
        self._draw(args, [Layer("tree", tree), Layer("decorated", decorated)])

    def cmd_solve(self, args):
        hint = load_geom_tree(args.hint) if args.hint else None
        if args.code is not None:
            tree = from_code(args.code)
        else:
            data = _read_json(args.tree)
            if "rotations" in data:
                tree = PlaneTree.from_json(data)
            else:
                geom = load_geom_tree(args.tree)
                tree = geom.plane_tree()
                hint = hint or geom
        options = SolveOptions.from_config(self.cfg, seed=args.seed)
        p = solve(tree, hint, options, TraceOptions.from_config(self.cfg))
        q, _ = normalize(p)
        save_json(args.output, q.to_json())
        print(f"degree {q.degree}: residual {p.residual:.2e} after {p.iterations} iterations -> {args.output}")

    def cmd_trace(self, args):
        p = load_polynomial(args.poly)
        traced = trace_tree(p, TraceOptions.from_config(self.cfg))
        save_json(args.output, traced.to_json())
        print(f"true tree: {traced.geom.vertex_count} vertices, code {canonical_code(traced.plane_tree())} "
              f"-> {args.output}")
        self._draw(args, [Layer("true", traced.geom)])

    def cmd_pipeline(self, args):
        report = pipeline(args.points, args.output_dir, self.cfg, delta_exp=args.delta_exp,
                          allow_deep=args.allow_deep, png=args.png, depth=args.depth,
                          walkers=args.walkers, seed=args.seed, strict=args.strict)
        before = report.balance["before"]["max_side_deviation"]
        after = report.balance["after"]["max_side_deviation"]
        print(f"grid tree {report.sizes['tree_edges']} edges, decorated {report.sizes['decorated_edges']} edges")
        print(f"max side deviation {before:.4f} -> {after:.4f}")
        if report.hausdorff is not None:
            print(f"solved {report.solved_tree} tree of degree {report.sizes['degree']}; "
                  f"aligned distance {report.hausdorff:.4g}")
        print(f"report: {args.output_dir}/report.json")

    def cmd_catalog(self, args):
        result = catalog(args.max_edges, args.output_dir, self.cfg)
        failed = sum(1 for entry in result["entries"] if "error" in entry)
        print(f"{len(result['entries'])} trees, {failed} failed -> {args.output_dir}/catalog.json")

    def cmd_enumerate(self, args):
        codes = [canonical_code(tree) for tree in enumerate_plane_trees(args.edges)]
        if args.output:
            save_json(args.output, {"edges": args.edges, "codes": codes})
            print(f"{len(codes)} plane trees -> {args.output}")
        else:
            for code in codes:
                print(code)


def main(argv=None):
    return TrueTreesCLI().run(argv)


if __name__ == "__main__":
    sys.exit(main())
