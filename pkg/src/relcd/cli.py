"""Command line entry points: generate models, run discovery, query outputs,
evaluate the synthetic grid, and export DOT renderings."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .agg import build_sigma_agg, node_label
from .discovery import rcd
from .experiments import ExperimentConfig, export_dot, export_results, run_grid
from .model import RelationalModel, random_model
from .pag import is_possible_ancestor, is_possible_cycle
from .paths import RelationalVariable
from .schema import random_schema


def _parse_variable(text: str) -> RelationalVariable:
    """Parse '[A, AB, B].Y1' into a relational variable."""
    text = text.strip()
    if not text.startswith("[") or "]." not in text:
        raise ValueError(f"cannot parse variable: {text!r}")
    inner, attr = text[1:].rsplit("].", 1)
    path = tuple(part.strip() for part in inner.split(","))
    return RelationalVariable(path, attr)


def _cmd_generate(args: argparse.Namespace) -> int:
    schema = random_schema(args.seed, args.entities)
    model = random_model(
        args.seed + 1,
        schema,
        args.num_deps,
        h=args.hop,
        max_parents=args.max_parents,
        require_cycle=not args.no_cycle,
    )
    payload = json.dumps(model.to_json(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def _cmd_discover(args: argparse.Namespace) -> int:
    model = RelationalModel.load(args.model)
    result = rcd(model, oracle_kind=args.oracle, max_depth=args.depth)
    artifact = {
        "model_file": args.model,
        "oracle": args.oracle,
        "rule_counts": result.rule_counts,
        "perspectives": {p: d.to_json() for p, d in sorted(result.dpags.items())},
        "sepsets": {
            str(key): {
                "perspective": rec.perspective,
                "pair": [node_label(rec.pair[0]), node_label(rec.pair[1])],
                "conditioning": sorted(node_label(n) for n in rec.conditioning),
            }
            for key, rec in sorted(result.sepsets.items(), key=lambda kv: str(kv[0]))
        },
        "conflicts": result.learned.conflicts,
    }
    payload = json.dumps(artifact, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
        if args.dot_dir:
            import os

            os.makedirs(args.dot_dir, exist_ok=True)
            for persp, dpag in result.dpags.items():
                with open(os.path.join(args.dot_dir, f"dpag_{persp}.dot"), "w") as fh:
                    fh.write(dpag.to_dot())
    else:
        print(payload)
    return 0


def _load_dpag(path: str, perspective: str):
    from .pag import CIRCLE  # noqa: F401  (marks validated by Dpag itself)
    from .pag import Dpag

    with open(path) as fh:
        artifact = json.load(fh)
    block = artifact["perspectives"][perspective]
    dpag = Dpag(list(block["nodes"]))
    for edge in block["edges"]:
        dpag.add_edge(edge["u"], edge["v"], edge["mark_at_u"], edge["mark_at_v"])
    return dpag


def _cmd_query(args: argparse.Namespace) -> int:
    dpag = _load_dpag(args.dpag, args.perspective)
    i, j = args.i, args.j
    answer = {
        "possible_ancestor": is_possible_ancestor(dpag, i, j),
        "possible_cycle": is_possible_cycle(dpag, i, j) if i != j else None,
    }
    print(json.dumps(answer, indent=2))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    records = run_grid(config, jobs=args.jobs)
    export_results(records, args.out)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def _cmd_export_dot(args: argparse.Namespace) -> int:
    model = RelationalModel.load(args.model)
    if args.kind == "model":
        export_dot(model, args.out)
    elif args.kind == "agg":
        persp = args.perspective or sorted(model.schema.entities)[0]
        agg = build_sigma_agg(model, persp, args.hop or 2 * model.hop_threshold)
        export_dot(agg, args.out)
    else:
        result = rcd(model, oracle_kind=args.oracle)
        persp = args.perspective or sorted(result.dpags)[0]
        export_dot(result.dpags[persp], args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relcd",
        description="Cyclic relational causal discovery with separation oracles",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="emit a random cyclic model as JSON")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--entities", type=int, default=2)
    p.add_argument("--num-deps", type=int, default=4)
    p.add_argument("--hop", type=int, default=2)
    p.add_argument("--max-parents", type=int, default=3)
    p.add_argument("--no-cycle", action="store_true", help="do not force a feedback loop")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("discover", help="run discovery on a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--oracle", choices=["d", "sigma"], default="sigma")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--dot-dir", help="also write one DOT file per perspective")
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("query", help="possible-ancestor / possible-cycle on a discovery artifact")
    p.add_argument("--dpag", required=True, help="JSON artifact produced by discover")
    p.add_argument("--perspective", required=True)
    p.add_argument("--i", required=True)
    p.add_argument("--j", required=True)
    p.set_defaults(func=_cmd_query)

    p = sub.add_parser("eval", help="run the experiment grid from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("export-dot", help="render a model, AGG, or DPAG as DOT")
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=["model", "agg", "dpag"], default="model")
    p.add_argument("--perspective")
    p.add_argument("--hop", type=int, default=None)
    p.add_argument("--oracle", choices=["d", "sigma"], default="sigma")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export_dot)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
