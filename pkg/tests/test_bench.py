"""Benchmark harness: determinism, enhancement math, oracle gating, formats."""

import json

import numpy as np
import pytest

import rpipe.bench as bench
from rpipe.bench import (
    BenchError,
    OracleMismatchError,
    RunConfig,
    emit_report,
    enhancement,
    run_benchmark,
    run_layer,
)
from rpipe.kernelgen import ConvSpec, Variant

TINY_SPECS = [
    ConvSpec(M=2, C=2, H_in=6, W_in=6, H_fil=3, W_fil=3, S=1),
    ConvSpec(M=1, C=3, H_in=5, W_in=5, H_fil=2, W_fil=2, S=2),
]


@pytest.fixture(scope="module")
def tiny_report():
    return run_benchmark(RunConfig(specs=TINY_SPECS, seed=77))


class TestEnhancement:
    def test_formula_lower_better(self):
        ref = {k: 0.066 for k, _ in bench.METRICS}
        new = {k: 0.032 for k, _ in bench.METRICS}
        e = enhancement(ref, new)
        assert e["runtime_seconds"] == pytest.approx(51.515, abs=0.01)

    def test_ipc_direction_is_higher_better(self):
        ref = dict.fromkeys([k for k, _ in bench.METRICS], 1.0)
        new = dict.fromkeys([k for k, _ in bench.METRICS], 1.0)
        ref["ipc"], new["ipc"] = 0.666, 0.847
        e = enhancement(ref, new)
        assert e["ipc"] == pytest.approx((0.847 - 0.666) / 0.666 * 100)
        assert e["ipc"] > 0

    def test_self_enhancement_is_zero(self):
        m = {k: 3.14 for k, _ in bench.METRICS}
        assert all(v == 0.0 for v in enhancement(m, m).values())


class TestRunBenchmark:
    def test_orderings_on_tiny_suite(self, tiny_report):
        agg = tiny_report.models["custom"]["aggregates"]
        f, b, r = agg["rv64f"], agg["baseline"], agg["rv64r"]
        assert r["cycles"] < b["cycles"] < f["cycles"]
        assert r["ipc"] > b["ipc"] > f["ipc"]
        assert r["mem_type"] < b["mem_type"] < f["mem_type"]
        assert r["l1d_accesses"] < b["l1d_accesses"] < f["l1d_accesses"]

    def test_enhancement_cells_all_positive(self, tiny_report):
        for row in tiny_report.models["custom"]["enhancements"].values():
            for key, val in row.items():
                assert val > 0.0, key

    def test_aggregate_is_sum_and_ipc_recomputed(self, tiny_report):
        m = tiny_report.models["custom"]
        for variant, agg in m["aggregates"].items():
            per_layer = [l["variants"][variant] for l in m["layers"]]
            assert agg["cycles"] == sum(s["cycles"] for s in per_layer)
            assert agg["ic"] == sum(s["ic"] for s in per_layer)
            assert agg["ipc"] == pytest.approx(agg["ic"] / agg["cycles"], abs=1e-12)

    def test_enhancement_recomputable_from_cells(self, tiny_report):
        m = tiny_report.models["custom"]
        agg = m["aggregates"]
        for refv in ("rv64f", "baseline"):
            row = m["enhancements"]["rv64r_over_%s" % refv]
            for key, higher in bench.METRICS:
                r, n = agg[refv][key], agg["rv64r"][key]
                want = ((n - r) if higher else (r - n)) / r * 100.0
                assert row[key] == pytest.approx(want, rel=1e-12)

    def test_determinism_byte_identical(self):
        cfg = lambda: RunConfig(specs=[TINY_SPECS[0]], seed=123)
        a = run_benchmark(cfg()).to_json()
        b = run_benchmark(cfg()).to_json()
        assert a == b

    def test_seed_changes_data_not_counts(self):
        r1 = run_benchmark(RunConfig(specs=[TINY_SPECS[0]], seed=1))
        r2 = run_benchmark(RunConfig(specs=[TINY_SPECS[0]], seed=2))
        a1 = r1.models["custom"]["aggregates"]["rv64r"]
        a2 = r2.models["custom"]["aggregates"]["rv64r"]
        assert a1["ic"] == a2["ic"] and a1["cycles"] == a2["cycles"]

    def test_oracle_gate_trips_on_corruption(self):
        spec = TINY_SPECS[0]
        cfg = RunConfig(specs=[spec])
        wrong = np.ones(spec.output_shape, dtype=np.float32)
        with pytest.raises(OracleMismatchError):
            run_layer(spec, Variant.RV64R, cfg, seed=5, ref=wrong)

    def test_empty_layer_list_rejected(self):
        with pytest.raises(BenchError):
            RunConfig(models={})
        with pytest.raises(BenchError):
            run_benchmark(RunConfig(specs=[]))

    def test_no_variant_rejected(self):
        with pytest.raises(BenchError):
            RunConfig(variants=[])


class TestFormats:
    def test_json_roundtrip_and_markdown_consistency(self, tiny_report):
        doc = json.loads(tiny_report.to_json())
        md = tiny_report.to_markdown()
        enh = doc["models"]["custom"]["enhancements"]["rv64r_over_rv64f"]
        assert ("%.2f %%" % enh["cycles"]) in md
        assert "| RV64F |" in md and "| RV64R |" in md

    def test_csv_flattening(self, tiny_report):
        lines = tiny_report.to_csv().splitlines()
        assert lines[0] == "model,layer,variant,metric,value"
        assert any(line.startswith("custom,0,rv64r,cycles,") for line in lines)
        assert any(line.startswith("custom,aggregate,rv64f,ipc,") for line in lines)

    def test_emit_report_writes_file(self, tiny_report, tmp_path):
        p = tmp_path / "r.json"
        emit_report(tiny_report, "json", p)
        assert json.loads(p.read_text())["models"]

    def test_unknown_format_rejected(self, tiny_report):
        with pytest.raises(BenchError):
            emit_report(tiny_report, "xml")


class TestConfig:
    def test_from_file_defaults(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({
            "models": {"lenet": 1.0},
            "l1d": {"size_bytes": 4096, "associativity": 1, "line_bytes": 32, "hit_latency": 1},
            "seed": 9,
        }))
        cfg = RunConfig.from_file(p)
        assert cfg.l1d.associativity == 1
        assert cfg.l1i.associativity == 2  # untouched default
        assert cfg.seed == 9

    def test_shipped_table2_config_loads(self):
        import pathlib

        root = pathlib.Path(__file__).parent.parent
        cfg = RunConfig.from_file(root / "configs" / "table2.json")
        assert cfg.l1i.size_bytes == 512 * 1024
        assert cfg.l1d.hit_latency == 2
        assert cfg.memory.latency_cycles == 80
        assert cfg.clock_hz == 1e9
        assert cfg.models == {"lenet": 1.0, "resnet20": 0.25, "mobilenetv1": 0.25}

    def test_bad_scale_rejected(self):
        with pytest.raises(BenchError):
            RunConfig(models={"lenet": 0})


class TestCli:
    def test_registry_export(self, capsys):
        from rpipe.cli import main

        assert main(["registry", "--export"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert any(e["mnemonic"] == "rfmac.s" for e in doc["entries"])

    def test_asm_disasm_roundtrip(self, tmp_path, capsys):
        from rpipe.cli import main

        src = tmp_path / "p.s"
        src.write_text("addi a0, zero, 1\nloop: blt a0, a0, loop\nebreak\n")
        binp = tmp_path / "p.bin"
        assert main(["asm", str(src), "-o", str(binp), "--base", "0x2000"]) == 0
        capsys.readouterr()
        assert main(["disasm", str(binp)]) == 0
        out = capsys.readouterr().out
        assert "addi a0, zero, 1" in out and "ebreak" in out

    def test_run_custom_markdown(self, capsys, tmp_path):
        from rpipe.cli import main

        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "specs": [{"M": 1, "C": 1, "H_in": 4, "W_in": 4, "H_fil": 2, "W_fil": 2, "S": 1}],
        }))
        assert main(["run", "--config", str(cfg), "--format", "markdown"]) == 0
        out = capsys.readouterr().out
        assert "| RV64R |" in out

    def test_run_oracle_failure_exit_code(self, monkeypatch, tmp_path):
        from rpipe import cli

        def bad_ref(inp, fil, spec):
            out = np.zeros(spec.output_shape, dtype=np.float32)
            out += np.float32(42.0)
            return out

        monkeypatch.setattr(bench, "conv_ref", bad_ref)
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({
            "specs": [{"M": 1, "C": 1, "H_in": 3, "W_in": 3, "H_fil": 2, "W_fil": 2, "S": 1}],
        }))
        assert cli.main(["run", "--config", str(cfg)]) == 2

    def test_layers_subcommand(self, capsys):
        from rpipe.cli import main

        assert main(["layers", "--model", "resnet20", "--scale", "0.25"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert len(doc["layers"]) == 19

    def test_gen_subcommand_emits_assemblable_source(self, tmp_path):
        from rpipe.asm import assemble
        from rpipe.cli import main

        out = tmp_path / "k.s"
        rc = main([
            "gen", "--variant", "baseline", "--m", "2", "--c", "1",
            "--h-in", "4", "--w-in", "4", "--h-fil", "2", "--w-fil", "2",
            "-o", str(out),
        ])
        assert rc == 0
        img = assemble(out.read_text(), base=0x1000)
        assert len(img.words) > 20

    def test_trace_subcommand(self, capsys, tmp_path):
        from rpipe.cli import main

        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"models": {"lenet": 0.125}}))
        rc = main([
            "run", "--config", str(cfg), "--trace", "--variant", "rv64r",
            "--model", "lenet", "--scale", "0.125", "--trace-cycles", "50",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "cycle" in out and "apr=0x" in out
