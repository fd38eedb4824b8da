"""Command-line entry point: ``latentedit <verb> ...``.

Exit codes: 0 success, 1 failure (all entries failed or a demo threshold
missed), 2 invalid arguments or configuration.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import commands, config, io
from .commands import EXIT_FAILED, EXIT_USAGE
from .errors import LatentEditError


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="global seed (default 0)")
    common.add_argument("--config", default=None, help="JSON file overriding defaults")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="parallel workers for batch verbs")
    common.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="latentedit", parents=[common],
                                description="Invert, edit and evaluate images in a latent space.")
    sub = p.add_subparsers(dest="verb", required=True)

    a = sub.add_parser("align", parents=[common], help="align faces listed in a manifest")
    a.add_argument("manifest")
    a.add_argument("--out-size", type=int, default=None)
    a.add_argument("--pad-mode", choices=("reflect", "replicate", "constant"), default=None)
    a.add_argument("--format", choices=("ppm", "f32"), default="ppm")

    e = sub.add_parser("embed", parents=[common], help="invert images into latent codes")
    e.add_argument("images", nargs="+")
    e.add_argument("--generator", default=None, help="GEN1 file (default: synthetic from config)")
    e.add_argument("--iterations", type=int, default=None)
    e.add_argument("--init", choices=("encoder", "mean_latent", "random"), default=None)

    x = sub.add_parser("extract-direction", parents=[common],
                       help="fit an attribute direction from labelled latents")
    x.add_argument("manifest")
    x.add_argument("--name", default="attribute")
    x.add_argument("--output", default=None, help="DIR1 output path")

    c = sub.add_parser("correlate", parents=[common], help="cosine similarities between directions")
    c.add_argument("directions", nargs="+")
    c.add_argument("--disentangle", default=None,
                   help="write the first direction with the others projected out to this DIR1 file")
    c.add_argument("--iterate", action="store_true", help="repeat projection passes to convergence")

    d = sub.add_parser("edit", parents=[common], help="move a latent along a direction")
    d.add_argument("latent")
    d.add_argument("direction")
    d.add_argument("--alphas", type=_floats, default=None)
    d.add_argument("--mask", default=None, help="'default', 'all' or layer list like 0-3,5")
    d.add_argument("--generator", default=None)

    v = sub.add_parser("evaluate", parents=[common], help="quality metrics over image pairs")
    v.add_argument("pairs")
    v.add_argument("--extractor", default="patch:4", help="patch:G")
    v.add_argument("--embedder", default="proj:64:0", help="proj:DIM[:SEED] identity embedder")

    sub.add_parser("demo", parents=[common], help="synthetic end-to-end run with threshold checks")
    return p


def _generator(args, cfg):
    return io.load_generator(args.generator) if args.generator else config.build_generator(cfg)


def run(args) -> int:
    cfg = config.load_config(args.config, args.seed)
    plots = not args.no_plots

    if args.verb == "align":
        if args.out_size is not None:
            cfg["align"]["out_size"] = args.out_size
        if args.pad_mode is not None:
            cfg["align"]["pad_mode"] = args.pad_mode
        return commands.cmd_align(args.manifest, config.build_align_config(cfg), args.out,
                                  args.jobs, args.format)
    if args.verb == "embed":
        if args.iterations is not None:
            cfg["embed"]["iterations"] = args.iterations
        if args.init is not None:
            cfg["embed"]["init"] = args.init
        return commands.cmd_embed(args.images, _generator(args, cfg), config.build_embed_config(cfg),
                                  config.build_extractor(cfg), args.out, args.jobs, plots)
    if args.verb == "extract-direction":
        return commands.cmd_extract_direction(args.manifest, config.build_logistic_config(cfg),
                                              args.name, args.output, args.out)
    if args.verb == "correlate":
        if len(args.directions) < 2:
            raise ValueError("correlate needs at least two direction files")
        return commands.cmd_correlate(args.directions, args.out, args.disentangle, args.iterate, plots)
    if args.verb == "edit":
        alphas = args.alphas if args.alphas is not None else cfg["alphas"]
        return commands.cmd_edit(args.latent, args.direction, alphas, args.mask or cfg["mask"],
                                 _generator(args, cfg), args.out, plots)
    if args.verb == "evaluate":
        ext = config.parse_extractor(args.extractor)
        return commands.cmd_evaluate(args.pairs, ext,
                                     lambda shape: config.parse_extractor(args.embedder, shape),
                                     args.out, args.jobs)
    if args.verb == "demo":
        from .demo import cmd_demo
        return cmd_demo(cfg["seed"], args.out, plots)
    raise ValueError(f"unknown verb {args.verb}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (LatentEditError, OSError) as exc:
        print(f"latentedit: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except (ValueError, TypeError, KeyError) as exc:
        print(f"latentedit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
