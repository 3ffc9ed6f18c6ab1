"""Assembler/disassembler roundtrips, label resolution, image file format."""

import pytest

from rpipe.asm import AsmError, MAGIC, ProgramImage, assemble, disassemble
from rpipe.isa import Mnemonic, decode
from rpipe.kernelgen import ConvSpec, Variant, default_binding, gen_conv


def test_rfmac_field_placement():
    img = assemble("rfmac.s fa5, fa4\nebreak", base=0x1000)
    di = decode(img.words[0])
    assert di.mnemonic is Mnemonic.RFMAC_S
    assert (di.rs1, di.rs2, di.rd) == (15, 14, 0)


def test_self_branch_offset_zero():
    img = assemble("loop: bge a5, a4, loop\nebreak", base=0x1000)
    di = decode(img.words[0])
    assert di.mnemonic is Mnemonic.BGE and di.imm == 0


def test_forward_branch_over_one_instruction():
    src = """
        beq a0, a1, done
        addi a2, a2, 1
    done:
        ebreak
    """
    img = assemble(src, base=0x1000)
    assert decode(img.words[0]).imm == 8


def test_label_arithmetic_against_base():
    img = assemble("start:\n    addi a0, zero, 1\n    j start\n    ebreak", base=0x2000)
    assert img.symbols["start"] == 0x2000
    di = decode(img.words[1])
    assert di.mnemonic is Mnemonic.JAL and di.rd == 0 and di.imm == -4


def test_duplicate_label_rejected():
    with pytest.raises(AsmError, match="duplicate"):
        assemble("a:\na:\nebreak", base=0)


def test_undefined_label_rejected():
    with pytest.raises(AsmError, match="undefined"):
        assemble("beq a0, a1, nowhere\nebreak", base=0)


def test_unknown_mnemonic_rejected():
    with pytest.raises(AsmError, match="unknown mnemonic"):
        assemble("frobnicate a0, a1", base=0)


def test_branch_target_outside_image_rejected():
    with pytest.raises(AsmError, match="outside image"):
        assemble("beq a0, a1, 64\nebreak", base=0x1000)


def test_branch_offset_out_of_range():
    body = ["beq a0, a1, far"] + ["addi zero, zero, 0"] * 1200 + ["far:", "ebreak"]
    with pytest.raises(AsmError, match="out of range"):
        assemble("\n".join(body), base=0x1000)


def test_empty_source_rejected():
    with pytest.raises(AsmError):
        assemble("# only a comment\n", base=0)


def test_raw_register_names_accepted():
    img = assemble("add x31, x15, x8\nflw f13, 0(x15)\nebreak", base=0)
    di = decode(img.words[0])
    assert (di.rd, di.rs1, di.rs2) == (31, 15, 8)
    di2 = decode(img.words[1])
    assert (di2.rd, di2.rs1) == (13, 15)


def test_static_rne_rounding_operand():
    img = assemble("fadd.s fa0, fa1, fa2, rne\nebreak", base=0)
    assert decode(img.words[0]).rm == 0
    assert "rne" in disassemble(img)


class TestRoundtrip:
    def roundtrip(self, src, base=0x1000):
        img = assemble(src, base=base)
        text = disassemble(img)
        img2 = assemble(text, base=base)
        assert img2.words == img.words
        return text

    def test_simple_program(self):
        self.roundtrip(
            """
            lui a5, 0x100
            addi a5, a5, 16
            flw fa4, 0(a5)
            fmul.s fa5, fa4, fa5
            fsw fa5, 4(a5)
            sd a5, 8(a5)
            ebreak
            """
        )

    def test_branches_get_labels(self):
        text = self.roundtrip(
            """
            addi a0, zero, 4
            addi a1, zero, 0
        loop:
            addi a1, a1, 1
            blt a1, a0, loop
            ebreak
            """
        )
        assert "loop" not in text and "L0" in text  # disasm invents local names

    def test_generated_kernels_all_variants(self):
        spec = ConvSpec(M=2, C=2, H_in=5, W_in=5, H_fil=3, W_fil=3, S=2)
        bind = default_binding(spec)
        for variant in Variant:
            self.roundtrip(gen_conv(variant, spec, bind))

    def test_rfsmac_rendering(self):
        img = assemble("rfsmac.s fa5\nebreak", base=0)
        assert "rfsmac.s fa5" in disassemble(img)


class TestImageFormat:
    def test_bytes_roundtrip(self, tmp_path):
        img = assemble("addi a0, zero, 7\nebreak", base=0x4000)
        blob = img.to_bytes()
        assert blob[:8] == MAGIC
        assert int.from_bytes(blob[8:16], "little") == 0x4000
        img2 = ProgramImage.from_bytes(blob)
        assert img2.base == img.base and img2.words == img.words
        p = tmp_path / "prog.bin"
        img.save(p)
        assert ProgramImage.load(p).words == img.words

    def test_bad_magic_rejected(self):
        with pytest.raises(AsmError, match="magic"):
            ProgramImage.from_bytes(b"NOTMAGIC" + b"\x00" * 12)

    def test_empty_image_rejected(self):
        with pytest.raises(AsmError):
            ProgramImage(base=0, words=[])

    def test_zero_word_reports_offset(self):
        img = ProgramImage(base=0, words=[0x00000000])
        with pytest.raises(AsmError, match="offset 0"):
            disassemble(img)
