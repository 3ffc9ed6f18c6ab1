"""Benchmark orchestration and Table-style reports.

For every (model, layer, variant) the harness generates the kernel,
assembles it, seeds identical tensor data across variants, runs the timed
simulation and verifies the output region bit-exactly against the
convolution oracle before any statistics are reported.  A report is
therefore only ever produced from semantically verified runs.

Enhancement rows compare RV64R against each reference variant:
(ref - new)/ref * 100 for lower-is-better metrics, and (new - ref)/ref for
IPC, so a positive cell always means RV64R improved.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .asm import assemble
from .kernelgen import (
    ConvSpec,
    Variant,
    conv_ref,
    default_binding,
    derive_seed,
    gen_conv,
    init_tensors,
    model_layers,
)
from .memhier import CacheConfig, MainMemoryConfig
from .pipeline import RunStats, SimConfig, run

VARIANT_ORDER = (Variant.RV64F, Variant.BASELINE, Variant.RV64R)

# Aggregate metrics: (key, higher_is_better).
METRICS = (
    ("runtime_seconds", False),
    ("cycles", False),
    ("ic", False),
    ("ipc", True),
    ("mem_type", False),
    ("l1d_accesses", False),
    ("l1i_accesses", False),
    ("l1_overall_accesses", False),
)


class BenchError(Exception):
    pass


class OracleMismatchError(BenchError):
    """A simulated output tensor differed from conv_ref; the run is invalid."""


@dataclass
class RunConfig:
    variants: list = field(default_factory=lambda: [v.value for v in VARIANT_ORDER])
    models: dict = field(
        default_factory=lambda: {"lenet": 1.0, "resnet20": 0.25, "mobilenetv1": 0.25}
    )
    specs: list | None = None  # explicit ConvSpec list (model name "custom")
    l1i: CacheConfig = field(default_factory=CacheConfig)
    l1d: CacheConfig = field(default_factory=CacheConfig)
    memory: MainMemoryConfig = field(default_factory=MainMemoryConfig)
    clock_hz: float = 1_000_000_000.0
    seed: int = 20250801
    max_cycles: int = 2_000_000_000
    image_base: int = 0x1000
    data_base: int = 0x0010_0000

    def __post_init__(self):
        if not self.variants:
            raise BenchError("at least one variant required")
        self.variants = [Variant.from_text(v).value for v in self.variants]
        if self.specs is None and not self.models:
            raise BenchError("no models or explicit specs configured")
        for m, s in (self.models or {}).items():
            if not 0.0 < float(s) <= 1.0:
                raise BenchError("scale for %s must be in (0, 1]" % m)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        kw = dict(d)
        if "l1i" in kw:
            kw["l1i"] = CacheConfig.from_dict(kw["l1i"])
        if "l1d" in kw:
            kw["l1d"] = CacheConfig.from_dict(kw["l1d"])
        if "memory" in kw:
            kw["memory"] = MainMemoryConfig.from_dict(kw["memory"])
        if "specs" in kw and kw["specs"] is not None:
            kw["specs"] = [ConvSpec(**s) for s in kw["specs"]]
        return cls(**kw)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def as_dict(self) -> dict:
        return {
            "variants": list(self.variants),
            "models": dict(self.models) if self.specs is None else {},
            "specs": [s.as_dict() for s in self.specs] if self.specs else None,
            "l1i": vars(self.l1i),
            "l1d": vars(self.l1d),
            "memory": vars(self.memory),
            "clock_hz": self.clock_hz,
            "seed": self.seed,
            "max_cycles": self.max_cycles,
            "image_base": self.image_base,
            "data_base": self.data_base,
        }


def _stats_to_metrics(stats: RunStats, clock_hz: float) -> dict:
    return {
        "runtime_seconds": stats.cycles / clock_hz,
        "cycles": stats.cycles,
        "ic": stats.retired,
        "ipc": stats.ipc,
        "mem_type": stats.mem_type_retired,
        "l1d_accesses": stats.l1d.accesses,
        "l1i_accesses": stats.l1i.accesses,
        "l1_overall_accesses": stats.l1_overall_accesses,
        "stalls_load_use": stats.stalls_load_use,
        "stalls_apr_interlock": stats.stalls_apr_interlock,
        "stalls_cache": stats.stalls_cache,
        "flushes_branch": stats.flushes_branch,
        "per_mnemonic": dict(stats.per_mnemonic),
    }


def _aggregate(layer_stats: list, clock_hz: float) -> dict:
    """Sum additive counters across layers; IPC recomputed, never averaged."""
    agg = {
        "cycles": 0, "ic": 0, "mem_type": 0,
        "l1d_accesses": 0, "l1i_accesses": 0, "l1_overall_accesses": 0,
        "stalls_load_use": 0, "stalls_apr_interlock": 0,
        "stalls_cache": 0, "flushes_branch": 0,
    }
    for s in layer_stats:
        for k in agg:
            agg[k] += s[k]
    agg["ipc"] = agg["ic"] / agg["cycles"] if agg["cycles"] else 0.0
    agg["runtime_seconds"] = agg["cycles"] / clock_hz
    return agg


def enhancement(ref: dict, new: dict) -> dict:
    """Percentage improvement of `new` over `ref` for every report metric."""
    out = {}
    for key, higher_better in METRICS:
        r, n = ref[key], new[key]
        if r == 0:
            out[key] = 0.0
        elif higher_better:
            out[key] = (n - r) / r * 100.0
        else:
            out[key] = (r - n) / r * 100.0
    return out


@dataclass
class Report:
    config: dict
    models: dict
    overall: dict

    def to_json(self, indent=2) -> str:
        return json.dumps(
            {"config": self.config, "models": self.models, "overall": self.overall},
            indent=indent,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("model,layer,variant,metric,value\n")
        for model, mrep in self.models.items():
            for li, layer in enumerate(mrep["layers"]):
                for variant, stats in layer["variants"].items():
                    for metric, value in stats.items():
                        if metric == "per_mnemonic":
                            continue
                        buf.write("%s,%d,%s,%s,%s\n" % (model, li, variant, metric, value))
            for variant, agg in mrep["aggregates"].items():
                for metric, value in agg.items():
                    buf.write("%s,aggregate,%s,%s,%s\n" % (model, variant, metric, value))
        return buf.getvalue()

    def to_markdown(self) -> str:
        cols = [
            ("runtime (s)", "runtime_seconds", "%.6f"),
            ("cycles", "cycles", "%d"),
            ("IC", "ic", "%d"),
            ("IPC", "ipc", "%.3f"),
            ("mem-type instructions", "mem_type", "%d"),
            ("L1D accesses", "l1d_accesses", "%d"),
            ("L1I accesses", "l1i_accesses", "%d"),
            ("L1 overall accesses", "l1_overall_accesses", "%d"),
        ]
        names = {"rv64f": "RV64F", "baseline": "Baseline", "rv64r": "RV64R"}
        lines = []

        def block(title, aggregates, enhancements):
            lines.append("## %s" % title)
            lines.append("")
            lines.append("| | " + " | ".join(c[0] for c in cols) + " |")
            lines.append("|---" * (len(cols) + 1) + "|")
            for variant in (v.value for v in VARIANT_ORDER):
                if variant not in aggregates:
                    continue
                agg = aggregates[variant]
                row = [names[variant]] + [fmt % agg[key] for _, key, fmt in cols]
                lines.append("| " + " | ".join(row) + " |")
            for label, enh in enhancements.items():
                pretty = label.replace("rv64r_over_rv64f", "Enhancement over RV64F")
                pretty = pretty.replace("rv64r_over_baseline", "Enhancement over Baseline")
                row = [pretty] + ["%.2f %%" % enh[key] for _, key, _ in cols]
                lines.append("| " + " | ".join(row) + " |")
            lines.append("")

        for model, mrep in self.models.items():
            title = model if mrep.get("scale", 1.0) == 1.0 else "%s (scale %s)" % (model, mrep["scale"])
            block(title, mrep["aggregates"], mrep["enhancements"])
        if self.overall:
            block("overall", self.overall["aggregates"], self.overall["enhancements"])
        return "\n".join(lines)


@lru_cache(maxsize=256)
def _kernel_image(variant: Variant, spec: ConvSpec, data_base: int, image_base: int):
    """Images depend only on geometry; depthwise suites reuse them heavily."""
    bind = default_binding(spec, data_base)
    return assemble(gen_conv(variant, spec, bind), base=image_base)


def run_layer(
    spec: ConvSpec,
    variant: Variant,
    config: RunConfig,
    seed: int,
    tensors=None,
    ref=None,
) -> RunStats:
    """Generate, assemble, simulate and oracle-check one layer/variant."""
    bind = default_binding(spec, config.data_base)
    if tensors is None:
        tensors = init_tensors(spec, seed)
    inp, fil = tensors
    if ref is None:
        ref = conv_ref(inp, fil, spec)
    image = _kernel_image(variant, spec, config.data_base, config.image_base)
    # The output region is explicitly zeroed: rv64f/baseline accumulate
    # through memory starting from 0.0, and it sizes the backing store.
    data = [
        (bind.input_base, inp.tobytes()),
        (bind.filter_base, fil.tobytes()),
        (bind.output_base, bytes(4 * spec.outputs)),
    ]
    sim_cfg = SimConfig(
        l1i=config.l1i, l1d=config.l1d, memory=config.memory, max_cycles=config.max_cycles
    )
    state, stats = run(image, data=data, config=sim_cfg)
    out = state.memory[
        bind.output_base : bind.output_base + 4 * spec.outputs
    ].view(np.float32).reshape(spec.output_shape)
    if not np.array_equal(out.view(np.uint32), ref.view(np.uint32)):
        raise OracleMismatchError(
            "%s output differs from conv_ref for spec %s" % (variant.value, spec)
        )
    return stats


def run_benchmark(config: RunConfig) -> Report:
    """Run every configured (model, layer, variant) and assemble the report."""
    model_suites: list = []
    if config.specs is not None:
        model_suites.append(("custom", 1.0, list(config.specs)))
    else:
        for model, scale in config.models.items():
            model_suites.append((model, float(scale), model_layers(model, float(scale))))

    variants = [Variant.from_text(v) for v in config.variants]
    models_rep: dict = {}
    overall_layers: dict = {v.value: [] for v in variants}

    for model, scale, specs in model_suites:
        if not specs:
            raise BenchError("model %s produced an empty layer list" % model)
        layers = []
        per_variant: dict = {v.value: [] for v in variants}
        for li, spec in enumerate(specs):
            seed = derive_seed(config.seed, model, li)
            tensors = init_tensors(spec, seed)
            ref = conv_ref(tensors[0], tensors[1], spec)
            layer_entry = {"spec": spec.as_dict(), "variants": {}}
            for variant in variants:
                stats = run_layer(spec, variant, config, seed, tensors=tensors, ref=ref)
                m = _stats_to_metrics(stats, config.clock_hz)
                layer_entry["variants"][variant.value] = m
                per_variant[variant.value].append(m)
                overall_layers[variant.value].append(m)
            layers.append(layer_entry)
        aggregates = {v: _aggregate(stats, config.clock_hz) for v, stats in per_variant.items()}
        enhancements = {}
        if "rv64r" in aggregates:
            for refv in ("rv64f", "baseline"):
                if refv in aggregates:
                    enhancements["rv64r_over_%s" % refv] = enhancement(
                        aggregates[refv], aggregates["rv64r"]
                    )
        models_rep[model] = {
            "scale": scale,
            "layers": layers,
            "aggregates": aggregates,
            "enhancements": enhancements,
        }

    overall = {}
    if len(model_suites) > 1:
        aggregates = {
            v: _aggregate(stats, config.clock_hz) for v, stats in overall_layers.items()
        }
        enhancements = {}
        if "rv64r" in aggregates:
            for refv in ("rv64f", "baseline"):
                if refv in aggregates:
                    enhancements["rv64r_over_%s" % refv] = enhancement(
                        aggregates[refv], aggregates["rv64r"]
                    )
        overall = {"aggregates": aggregates, "enhancements": enhancements}

    return Report(config=config.as_dict(), models=models_rep, overall=overall)


def emit_report(report: Report, fmt: str = "json", path=None) -> str:
    """Serialize a report; writes to `path` when given, returns the text."""
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv":
        text = report.to_csv()
    elif fmt == "markdown":
        text = report.to_markdown()
    else:
        raise BenchError("unknown report format %r" % fmt)
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text
