"""Command line entry point.

Subcommands:
  run       benchmark suites and report emission (the main entry point)
  asm       assemble a .s file into a binary image
  disasm    disassemble a binary image back to text
  registry  export the MASK/MATCH encoding table as JSON
  layers    export a model's convolution layer suite as JSON
"""

from __future__ import annotations

import argparse
import sys

from . import backend_name
from .asm import AsmError, ProgramImage, assemble, disassemble
from .bench import BenchError, OracleMismatchError, RunConfig, emit_report, run_benchmark
from .isa import registry_to_json
from .kernelgen import ConvSpec, Variant, default_binding, gen_conv, init_tensors, layers_to_json
from .pipeline import SimConfig, run as sim_run


def _cmd_run(args) -> int:
    if args.config:
        config = RunConfig.from_file(args.config)
    else:
        config = RunConfig()
    if args.variant:
        config.variants = [Variant.from_text(v).value for v in args.variant]
    if args.model:
        models = {}
        for m in args.model:
            models[m] = config.models.get(m, 1.0 if m == "lenet" else 0.25)
        config.models = models
    if args.scale is not None:
        config.models = {m: args.scale for m in config.models}
    if args.seed is not None:
        config.seed = args.seed

    if args.trace:
        return _traced_single_run(args, config)

    try:
        report = run_benchmark(config)
    except OracleMismatchError as exc:
        print("oracle mismatch: %s" % exc, file=sys.stderr)
        return 2
    text = emit_report(report, args.format, args.out)
    if not args.out:
        print(text)
    else:
        print("report written to %s" % args.out)
    return 0


def _traced_single_run(args, config: RunConfig) -> int:
    """--trace: run one layer of one variant and dump the cycle trace."""
    from .kernelgen import model_layers

    if len(config.variants) != 1 or len(config.models) != 1:
        print("--trace needs exactly one --variant and one --model", file=sys.stderr)
        return 1
    model, scale = next(iter(config.models.items()))
    specs = model_layers(model, float(scale))
    spec = specs[min(args.layer, len(specs) - 1)]
    variant = Variant.from_text(config.variants[0])
    bind = default_binding(spec, config.data_base)
    inp, fil = init_tensors(spec, config.seed)
    image = assemble(gen_conv(variant, spec, bind), base=config.image_base)
    cfg = SimConfig(
        l1i=config.l1i, l1d=config.l1d, memory=config.memory,
        max_cycles=config.max_cycles, trace_cycles=args.trace_cycles,
    )
    data = [(bind.input_base, inp.tobytes()), (bind.filter_base, fil.tobytes())]
    _, stats = sim_run(image, data=data, config=cfg)
    out = sys.stdout if not args.out else open(args.out, "w")
    try:
        for line in stats.trace or []:
            print(line, file=out)
        print(
            "# %s %s layer=%d cycles=%d retired=%d ipc=%.4f"
            % (variant.value, model, args.layer, stats.cycles, stats.retired, stats.ipc),
            file=out,
        )
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_asm(args) -> int:
    with open(args.source) as fh:
        text = fh.read()
    try:
        image = assemble(text, base=args.base)
    except AsmError as exc:
        print("asm error: %s" % exc, file=sys.stderr)
        return 1
    image.save(args.out)
    print("%s: %d instructions at base 0x%x" % (args.out, len(image.words), image.base))
    return 0


def _cmd_disasm(args) -> int:
    try:
        image = ProgramImage.load(args.image)
        text = disassemble(image)
    except AsmError as exc:
        print("disasm error: %s" % exc, file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def _cmd_registry(args) -> int:
    text = registry_to_json()
    if args.export and args.export != "-":
        with open(args.export, "w") as fh:
            fh.write(text)
    else:
        print(text)
    return 0


def _cmd_layers(args) -> int:
    print(layers_to_json(args.model, args.scale))
    return 0


def _cmd_gen(args) -> int:
    spec = ConvSpec(
        M=args.m, C=args.c, H_in=args.h_in, W_in=args.w_in,
        H_fil=args.h_fil, W_fil=args.w_fil, S=args.stride,
    )
    text = gen_conv(Variant.from_text(args.variant), spec, default_binding(spec))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print("wrote %s (%d lines)" % (args.out, text.count("\n")))
    else:
        print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rpipe",
        description="RV64 5-stage pipeline simulator with the rfmac/rfsmac "
        "accumulator extension (backend: %s)" % backend_name(),
    )
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run benchmark suites and emit a report")
    pr.add_argument("--config", help="JSON run configuration (see configs/table2.json)")
    pr.add_argument("--variant", action="append", help="rv64f|baseline|rv64r (repeatable)")
    pr.add_argument("--model", action="append", help="lenet|resnet20|mobilenetv1 (repeatable)")
    pr.add_argument("--scale", type=float, help="override channel scale for all selected models")
    pr.add_argument("--seed", type=int, help="override tensor seed")
    pr.add_argument("--format", default="markdown", choices=["json", "csv", "markdown"])
    pr.add_argument("--out", help="write the report (or trace) to this path")
    pr.add_argument("--trace", action="store_true", help="per-cycle trace of a single run")
    pr.add_argument("--trace-cycles", type=int, default=2000, help="trace row limit")
    pr.add_argument("--layer", type=int, default=0, help="layer index for --trace")
    pr.set_defaults(func=_cmd_run)

    pa = sub.add_parser("asm", help="assemble source into a binary image")
    pa.add_argument("source")
    pa.add_argument("-o", "--out", required=True)
    pa.add_argument("--base", type=lambda v: int(v, 0), default=0x1000)
    pa.set_defaults(func=_cmd_asm)

    pd = sub.add_parser("disasm", help="disassemble a binary image")
    pd.add_argument("image")
    pd.add_argument("-o", "--out")
    pd.set_defaults(func=_cmd_disasm)

    pg = sub.add_parser("registry", help="export the encoding registry as JSON")
    pg.add_argument("--export", nargs="?", const="-", help="path or - for stdout")
    pg.set_defaults(func=_cmd_registry)

    pl = sub.add_parser("layers", help="export a model layer suite as JSON")
    pl.add_argument("--model", required=True)
    pl.add_argument("--scale", type=float, default=1.0)
    pl.set_defaults(func=_cmd_layers)

    pn = sub.add_parser("gen", help="emit a convolution kernel as assembly")
    pn.add_argument("--variant", required=True, help="rv64f|baseline|rv64r")
    pn.add_argument("--m", type=int, required=True, help="filter count M")
    pn.add_argument("--c", type=int, required=True, help="channels C")
    pn.add_argument("--h-in", type=int, required=True)
    pn.add_argument("--w-in", type=int, required=True)
    pn.add_argument("--h-fil", type=int, required=True)
    pn.add_argument("--w-fil", type=int, required=True)
    pn.add_argument("--stride", type=int, default=1)
    pn.add_argument("-o", "--out", help="write .s here (default stdout)")
    pn.set_defaults(func=_cmd_gen)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BenchError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
