"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -s -v` to see the per-criterion
lines and timings.  The directional checks (criteria 7-9) share one full
benchmark run: lenet at full scale, resnet20 and mobilenetv1 at 1/4 channel
scale, which dominates the suite's runtime.
"""

import json
import random
import time

import numpy as np
import pytest

from rpipe import kernels
from rpipe.asm import assemble
from rpipe.bench import METRICS, RunConfig, run_benchmark
from rpipe.isa import Mnemonic, decode, encode, registry
from rpipe.kernelgen import (
    ConvSpec,
    Variant,
    conv_ref,
    default_binding,
    expected_counts,
    gen_conv,
    init_tensors,
)
from rpipe.memhier import CacheConfig
from rpipe.pipeline import SimConfig, exec_functional, run, states_equal

from conftest import fstate
from test_isa import random_legal

VARIANTS = (Variant.RV64F, Variant.BASELINE, Variant.RV64R)


def _passed(num, elapsed, detail):
    print("ACCEPTANCE %d PASS (%.2fs): %s" % (num, elapsed, detail))


def _random_specs(n, rng, cap=8):
    specs = []
    while len(specs) < n:
        h_fil = rng.randint(1, cap)
        w_fil = rng.randint(1, cap)
        h_in = rng.randint(h_fil, cap)
        w_in = rng.randint(w_fil, cap)
        specs.append(
            ConvSpec(
                M=rng.randint(1, cap),
                C=rng.randint(1, cap),
                H_in=h_in,
                W_in=w_in,
                H_fil=h_fil,
                W_fil=w_fil,
                S=rng.randint(1, 3),
            )
        )
    return specs


def _layer_data(spec, bind, inp, fil):
    return [
        (bind.input_base, inp.tobytes()),
        (bind.filter_base, fil.tobytes()),
        (bind.output_base, bytes(4 * spec.outputs)),
    ]


def _simulate(variant, spec, seed, timed=True, sim_cfg=None):
    bind = default_binding(spec)
    inp, fil = init_tensors(spec, seed)
    img = assemble(gen_conv(variant, spec, bind), base=0x1000)
    data = _layer_data(spec, bind, inp, fil)
    if timed:
        state, stats = run(img, data=data, config=sim_cfg)
    else:
        state, stats = exec_functional(img, data=data)
    out = state.memory[
        bind.output_base : bind.output_base + 4 * spec.outputs
    ].view(np.float32).reshape(spec.output_shape)
    return state, stats, out, (inp, fil)


@pytest.fixture(scope="module")
def oracle_specs():
    rng = random.Random(0xACCE97)
    specs = _random_specs(100, rng)
    seeds = [rng.getrandbits(48) for _ in specs]
    return specs, seeds


@pytest.fixture(scope="module")
def full_report():
    cfg = RunConfig(
        models={"lenet": 1.0, "resnet20": 0.25, "mobilenetv1": 0.25},
        seed=20250801,
    )
    t0 = time.time()
    report = run_benchmark(cfg)
    report._elapsed = time.time() - t0
    return report


def test_criterion_1_encoding_conformance(data_dir):
    t0 = time.time()
    rng = random.Random(1)
    count = 0
    for mn in Mnemonic:
        for _ in range(1000):
            di = random_legal(mn, rng)
            assert decode(encode(di)) == di
            count += 1
    entries = registry()
    for i, a in enumerate(entries):
        for b in entries[i + 1 :]:
            assert (a.match ^ b.match) & (a.mask & b.mask) != 0
    vectors = json.loads((data_dir / "riscv_encodings.json").read_text())["vectors"]
    fmul = next(v for v in vectors if v["asm"].startswith("fmul.s"))
    assert int(fmul["word"], 16) == 0x10F6F7D3
    for v in vectors:
        w = int(v["word"], 16)
        assert encode(decode(w)) == w
    _passed(1, time.time() - t0,
            "%d roundtrips, %d registry entries collision-free, fmul.s == 0x10F6F7D3"
            % (count, len(entries)))


def test_criterion_2_semantic_oracle_equivalence(oracle_specs):
    t0 = time.time()
    specs, seeds = oracle_specs
    for spec, seed in zip(specs, seeds):
        bind = default_binding(spec)
        inp, fil = init_tensors(spec, seed)
        ref = conv_ref(inp, fil, spec)
        words = {}
        for variant in VARIANTS:
            _, _, out, _ = _simulate(variant, spec, seed)
            words[variant] = out.view(np.uint32).copy()
            assert np.array_equal(words[variant], ref.view(np.uint32)), (variant, spec)
        assert np.array_equal(words[Variant.RV64F], words[Variant.BASELINE])
        assert np.array_equal(words[Variant.RV64F], words[Variant.RV64R])
    _passed(2, time.time() - t0,
            "100 random specs x 3 variants bit-identical to conv_ref (0 ULP)")


def test_criterion_3_timing_semantics_separation(oracle_specs):
    t0 = time.time()
    specs, seeds = oracle_specs
    alt_cfg = SimConfig(
        l1i=CacheConfig(associativity=1),
        l1d=CacheConfig(size_bytes=16 * 1024, associativity=1, line_bytes=32, hit_latency=1),
    )
    checked_alt = 0
    for i, (spec, seed) in enumerate(zip(specs, seeds)):
        variant = VARIANTS[i % 3]
        st_t, stats_t, _, _ = _simulate(variant, spec, seed)
        st_f, _, _, _ = _simulate(variant, spec, seed, timed=False)
        assert states_equal(st_t, st_f), (variant, spec)
        if i % 5 == 0:
            st_alt, stats_alt, _, _ = _simulate(variant, spec, seed, sim_cfg=alt_cfg)
            assert states_equal(st_t, st_alt), (variant, spec)
            assert stats_alt.cycles != stats_t.cycles
            checked_alt += 1
    _passed(3, time.time() - t0,
            "run == exec_functional on 100 programs; %d cache-config variations "
            "changed stats, never values" % checked_alt)


def test_criterion_4_count_oracle():
    t0 = time.time()
    rng = random.Random(0xC0437)
    specs = _random_specs(50, rng)
    for variant in VARIANTS:
        for spec in specs:
            _, stats, _, _ = _simulate(variant, spec, rng.getrandbits(32))
            exp = expected_counts(variant, spec)
            got = dict(stats.per_mnemonic)
            got["total"] = stats.retired
            got["mem_type"] = stats.mem_type_retired
            for key, val in exp.items():
                assert got.get(key, 0) == val, (variant, spec, key)
            assert set(got) - {"total", "mem_type"} == set(exp) - {"total", "mem_type"}
    _passed(4, time.time() - t0, "50 specs x 3 variants: retired counters exact")


def test_criterion_5_pipeline_micro_timing():
    t0 = time.time()
    # (a) n back-to-back rfmac.s with warm caches: n + 4 cycles (the
    #     terminating ebreak retires one cycle later).
    init = fstate(f14=0.5, f15=0.25)
    for n in (1, 4, 8, 40):
        src = "\n".join(["rfmac.s fa5, fa4"] * n + ["ebreak"])
        _, stats = run(assemble(src, 0x1000), config=SimConfig(warm_icache=True), init_state=init)
        assert stats.cycles == (n + 1) + 4
        assert stats.stalls_load_use == stats.stalls_apr_interlock == stats.stalls_cache == 0
    # (b) rfmac.s -> rfsmac.s: exactly 2 APR-interlock stalls.
    src = "rfmac.s fa5, fa4\nrfsmac.s fa5\nebreak"
    _, stats_b = run(assemble(src, 0x1000), config=SimConfig(warm_icache=True), init_state=init)
    assert stats_b.stalls_apr_interlock == 2
    assert stats_b.cycles == 3 + 4 + 2
    # (c) flw -> dependent use: exactly 1 load-use stall beyond cache latency.
    init_c = fstate(x15=0x2000, f15=2.0)
    data = [(0x2000, np.float32([1.5]).tobytes())]
    src = "flw fa4, 0(a5)\nfmul.s fa5, fa4, fa5\nebreak"
    _, stats_c = run(
        assemble(src, 0x1000),
        data=data,
        config=SimConfig(warm_icache=True, warm_dcache=True),
        init_state=init_c,
    )
    assert stats_c.stalls_load_use == 1
    assert stats_c.stalls_cache == 2 - 1  # hit latency 2 -> 1 occupancy stall
    assert stats_c.cycles == 3 + 4 + 2
    # Hand-drawn stage tables for these programs are asserted cycle-by-cycle
    # in tests/test_pipeline.py::TestHandTraces.
    _passed(5, time.time() - t0,
            "n+4 stream, 2 APR-interlock stalls, 1 load-use stall beyond hit latency")


def test_criterion_6_apr_invariants():
    t0 = time.time()
    rng = random.Random(0xA9A)
    kernels_checked = 0
    for _ in range(12):
        spec = _random_specs(1, rng, cap=5)[0]
        seed = rng.getrandbits(32)
        st, stats, out, _ = _simulate(Variant.RV64R, spec, seed)
        # Rented stage: rfmac/rfsmac never touch the data cache.
        assert stats.l1d.accesses == stats.mem_type_retired
        exp = expected_counts(Variant.RV64R, spec)
        assert stats.l1d.accesses == exp["mem_type"]
        # Every output element was produced by an rfsmac reset cycle; the
        # final APR must be exactly +0.0 bits.
        assert st.apr_bits == 0x00000000
        kernels_checked += 1
    # Trace-level check: APR raw bits are zero at every rfsmac retirement.
    spec = ConvSpec(M=2, C=2, H_in=4, W_in=4, H_fil=2, W_fil=2)
    bind = default_binding(spec)
    inp, fil = init_tensors(spec, 99)
    img = assemble(gen_conv(Variant.RV64R, spec, bind), base=0x1000)
    cfg = SimConfig(warm_icache=True, trace_cycles=50_000)
    _, stats = run(img, data=_layer_data(spec, bind, inp, fil), config=cfg)
    retire_rows = stats.trace_raw[stats.trace_raw[:, 5] == int(Mnemonic.RFSMAC_S)]
    assert len(retire_rows) == spec.outputs
    assert (retire_rows[:, 7] == 0).all(), "APR bits nonzero at an rfsmac retirement"
    _passed(6, time.time() - t0,
            "%d random kernels: zero rented-stage D-cache traffic; APR bits 0 at "
            "all %d rfsmac retirements" % (kernels_checked, len(retire_rows)))


def test_criterion_7_directional_reproduction(full_report):
    t0 = time.time()
    for model, mrep in full_report.models.items():
        agg = mrep["aggregates"]
        f, b, r = agg["rv64f"], agg["baseline"], agg["rv64r"]
        assert r["cycles"] < b["cycles"] < f["cycles"], model
        assert r["ipc"] > b["ipc"] > f["ipc"], model
        assert r["mem_type"] < b["mem_type"] < f["mem_type"], model
        assert r["l1d_accesses"] < b["l1d_accesses"] < f["l1d_accesses"], model
        for row in mrep["enhancements"].values():
            for key, _ in METRICS:
                assert row[key] > 0.0, (model, key)
    for row in full_report.overall["enhancements"].values():
        for key, _ in METRICS:
            assert row[key] > 0.0
    _passed(7, time.time() - t0 + full_report._elapsed,
            "lenet + resnet20(1/4) + mobilenetv1(1/4): every ordering and "
            "enhancement sign reproduced (suite ran %.1fs)" % full_report._elapsed)


def test_criterion_8_quantitative_ratio(full_report):
    t0 = time.time()
    # Inner-loop memory instructions per MAC: rv64r:rv64f = 2:4 exactly.
    spec = ConvSpec(M=1, C=1, H_in=8, W_in=8, H_fil=3, W_fil=3)
    f = expected_counts(Variant.RV64F, spec)
    r = expected_counts(Variant.RV64R, spec)
    assert (f["flw"] + f["fsw"]) * 1.0 / spec.macs == 4.0
    assert r["flw"] * 1.0 / spec.macs == 2.0
    # Whole-suite mem-type reduction for lenet within [30%, 60%].
    agg = full_report.models["lenet"]["aggregates"]
    reduction = (
        (agg["rv64f"]["mem_type"] - agg["rv64r"]["mem_type"])
        / agg["rv64f"]["mem_type"] * 100.0
    )
    assert 30.0 <= reduction <= 60.0, reduction
    _passed(8, time.time() - t0,
            "inner-loop mem ratio 2:4 exact; lenet mem-type reduction %.2f%% in [30, 60]"
            % reduction)


def test_criterion_9_ipc_sanity(full_report):
    t0 = time.time()
    cells = 0
    for mrep in full_report.models.values():
        for layer in mrep["layers"]:
            for stats in layer["variants"].values():
                assert 0.0 < stats["ipc"] <= 1.0
                assert abs(stats["ipc"] - stats["ic"] / stats["cycles"]) < 1e-9
                cells += 1
        for agg in mrep["aggregates"].values():
            assert 0.0 < agg["ipc"] <= 1.0
            assert abs(agg["ipc"] - agg["ic"] / agg["cycles"]) < 1e-9
            cells += 1
    _passed(9, time.time() - t0, "%d IPC cells in (0, 1], recomputed to 1e-9" % cells)
