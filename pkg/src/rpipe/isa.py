"""Instruction subset, binary encodings and the MASK/MATCH decode registry.

The supported set is a small slice of RV64I plus the F-extension single
precision operations needed for convolution kernels, one accumulating
multiply-add computed entirely in EX (``fmac.s``), and the two rented-MEM
accumulator instructions (``rfmac.s``, ``rfsmac.s``).  All three customs
live under the OP-FP major opcode (0b1010011) with otherwise unused funct7
values, so they cannot collide with ratified F/D/Q/H encodings.

Every instruction is identified by a 32-bit MASK/MATCH pair: a word ``w``
is instruction X iff ``(w & X.mask) == X.match``.  The registry leaves only
the essential operand fields (rm, rs1, rs2, rd) outside the mask.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass


class IsaError(Exception):
    """Base class for ISA-level errors."""


class EncodingError(IsaError):
    """Raised by encode() for out-of-range fields or invariant violations."""


class IllegalInstructionError(IsaError):
    """Raised by decode() when no registry entry matches a word."""


class Mnemonic(enum.IntEnum):
    """Closed instruction set; the integer value doubles as the kernel op id."""

    ADD = 0
    ADDI = 1
    SLLI = 2
    LUI = 3
    AUIPC = 4
    JAL = 5
    BEQ = 6
    BNE = 7
    BLT = 8
    BGE = 9
    LW = 10
    SW = 11
    LD = 12
    SD = 13
    FLW = 14
    FSW = 15
    FADD_S = 16
    FMUL_S = 17
    FMAC_S = 18
    RFMAC_S = 19
    RFSMAC_S = 20
    EBREAK = 21

    @property
    def text(self) -> str:
        return _MNEMONIC_TEXT[self]

    @classmethod
    def from_text(cls, text: str) -> "Mnemonic":
        try:
            return _TEXT_TO_MNEMONIC[text]
        except KeyError:
            raise IllegalInstructionError("unknown mnemonic %r" % text) from None


_MNEMONIC_TEXT = {
    Mnemonic.ADD: "add",
    Mnemonic.ADDI: "addi",
    Mnemonic.SLLI: "slli",
    Mnemonic.LUI: "lui",
    Mnemonic.AUIPC: "auipc",
    Mnemonic.JAL: "jal",
    Mnemonic.BEQ: "beq",
    Mnemonic.BNE: "bne",
    Mnemonic.BLT: "blt",
    Mnemonic.BGE: "bge",
    Mnemonic.LW: "lw",
    Mnemonic.SW: "sw",
    Mnemonic.LD: "ld",
    Mnemonic.SD: "sd",
    Mnemonic.FLW: "flw",
    Mnemonic.FSW: "fsw",
    Mnemonic.FADD_S: "fadd.s",
    Mnemonic.FMUL_S: "fmul.s",
    Mnemonic.FMAC_S: "fmac.s",
    Mnemonic.RFMAC_S: "rfmac.s",
    Mnemonic.RFSMAC_S: "rfsmac.s",
    Mnemonic.EBREAK: "ebreak",
}
_TEXT_TO_MNEMONIC = {t: m for m, t in _MNEMONIC_TEXT.items()}

MEM_TYPE_MNEMONICS = frozenset(
    {Mnemonic.LW, Mnemonic.SW, Mnemonic.LD, Mnemonic.SD, Mnemonic.FLW, Mnemonic.FSW}
)


class RoundingMode(enum.IntEnum):
    """rm field values accepted by decode.

    Only round-to-nearest-even is implemented.  DYNAMIC (0b111) resolves
    through the frm CSR, which this machine pins to RNE; any other rm value
    is rejected at decode time.
    """

    RNE = 0
    DYNAMIC = 7


class FormatClass(enum.Enum):
    R = "R"
    I = "I"
    S = "S"
    B = "B"
    U = "U"
    J = "J"
    FP_R = "FP-R"


@dataclass(frozen=True)
class EncodingEntry:
    mnemonic: Mnemonic
    mask: int
    match: int
    format_class: FormatClass


@dataclass
class DecodedInstruction:
    """One instruction after decode.

    ``imm`` carries the fully sign-extended immediate: byte offsets for
    I/S/B/J forms, the complete shifted value for U forms, and the shift
    amount for slli.  ``rm`` is the rounding-mode field of OP-FP forms and
    0 elsewhere; ``fmt`` is always 0 (single precision).
    """

    mnemonic: Mnemonic
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    rm: int = 0
    fmt: int = 0


# Major opcodes (7-bit).
_OPC_OP = 0b0110011
_OPC_OP_IMM = 0b0010011
_OPC_LUI = 0b0110111
_OPC_AUIPC = 0b0010111
_OPC_JAL = 0b1101111
_OPC_BRANCH = 0b1100011
_OPC_LOAD = 0b0000011
_OPC_STORE = 0b0100011
_OPC_LOAD_FP = 0b0000111
_OPC_STORE_FP = 0b0100111
_OPC_OP_FP = 0b1010011
_OPC_SYSTEM = 0b1110011

# funct7 values under OP-FP.  fadd.s/fmul.s are the ratified encodings;
# the three accumulator instructions take unused funct7 slots whose low
# two bits (the fmt field) are 00 = single precision.
_F7_FADD_S = 0b0000000
_F7_FMUL_S = 0b0001000
_F7_FMAC_S = 0b0110000
_F7_RFMAC_S = 0b0110100
_F7_RFSMAC_S = 0b0111000

_MASK_R = 0xFE00707F  # funct7 + funct3 + opcode
_MASK_I = 0x0000707F  # funct3 + opcode
_MASK_SHIFT64 = 0xFC00707F  # funct6 + funct3 + opcode (6-bit shamt)
_MASK_OPC = 0x0000007F  # opcode only (U/J forms)
_MASK_FP_R = 0xFE00007F  # funct7 + opcode (rm, rs1, rs2, rd free)
_MASK_RFSMAC = 0xFFFF807F  # funct7 + rs2 + rs1 + opcode (rm, rd free)


def _r(f7, f3, opc):
    return (f7 << 25) | (f3 << 12) | opc


def _i(f3, opc):
    return (f3 << 12) | opc


_ENTRIES = [
    EncodingEntry(Mnemonic.ADD, _MASK_R, _r(0, 0b000, _OPC_OP), FormatClass.R),
    EncodingEntry(Mnemonic.ADDI, _MASK_I, _i(0b000, _OPC_OP_IMM), FormatClass.I),
    EncodingEntry(Mnemonic.SLLI, _MASK_SHIFT64, _i(0b001, _OPC_OP_IMM), FormatClass.I),
    EncodingEntry(Mnemonic.LUI, _MASK_OPC, _OPC_LUI, FormatClass.U),
    EncodingEntry(Mnemonic.AUIPC, _MASK_OPC, _OPC_AUIPC, FormatClass.U),
    EncodingEntry(Mnemonic.JAL, _MASK_OPC, _OPC_JAL, FormatClass.J),
    EncodingEntry(Mnemonic.BEQ, _MASK_I, _i(0b000, _OPC_BRANCH), FormatClass.B),
    EncodingEntry(Mnemonic.BNE, _MASK_I, _i(0b001, _OPC_BRANCH), FormatClass.B),
    EncodingEntry(Mnemonic.BLT, _MASK_I, _i(0b100, _OPC_BRANCH), FormatClass.B),
    EncodingEntry(Mnemonic.BGE, _MASK_I, _i(0b101, _OPC_BRANCH), FormatClass.B),
    EncodingEntry(Mnemonic.LW, _MASK_I, _i(0b010, _OPC_LOAD), FormatClass.I),
    EncodingEntry(Mnemonic.SW, _MASK_I, _i(0b010, _OPC_STORE), FormatClass.S),
    EncodingEntry(Mnemonic.LD, _MASK_I, _i(0b011, _OPC_LOAD), FormatClass.I),
    EncodingEntry(Mnemonic.SD, _MASK_I, _i(0b011, _OPC_STORE), FormatClass.S),
    EncodingEntry(Mnemonic.FLW, _MASK_I, _i(0b010, _OPC_LOAD_FP), FormatClass.I),
    EncodingEntry(Mnemonic.FSW, _MASK_I, _i(0b010, _OPC_STORE_FP), FormatClass.S),
    EncodingEntry(Mnemonic.FADD_S, _MASK_FP_R, _F7_FADD_S << 25 | _OPC_OP_FP, FormatClass.FP_R),
    EncodingEntry(Mnemonic.FMUL_S, _MASK_FP_R, _F7_FMUL_S << 25 | _OPC_OP_FP, FormatClass.FP_R),
    EncodingEntry(Mnemonic.FMAC_S, _MASK_FP_R, _F7_FMAC_S << 25 | _OPC_OP_FP, FormatClass.FP_R),
    EncodingEntry(Mnemonic.RFMAC_S, _MASK_FP_R, _F7_RFMAC_S << 25 | _OPC_OP_FP, FormatClass.FP_R),
    EncodingEntry(Mnemonic.RFSMAC_S, _MASK_RFSMAC, _F7_RFSMAC_S << 25 | _OPC_OP_FP, FormatClass.FP_R),
    EncodingEntry(Mnemonic.EBREAK, 0xFFFFFFFF, 0x00100073, FormatClass.I),
]

_BY_MNEMONIC = {e.mnemonic: e for e in _ENTRIES}

assert len(_BY_MNEMONIC) == len(Mnemonic), "exactly one entry per mnemonic"


def registry() -> list[EncodingEntry]:
    """The complete decode registry in stable (Mnemonic) order."""
    return list(_ENTRIES)


def entry(mnemonic: Mnemonic) -> EncodingEntry:
    return _BY_MNEMONIC[mnemonic]


def registry_to_json(indent: int | None = 2) -> str:
    """Export the registry as a JSON document (masks/matches in hex)."""
    doc = {
        "entries": [
            {
                "mnemonic": e.mnemonic.text,
                "mask": "0x%08X" % e.mask,
                "match": "0x%08X" % e.match,
                "format": e.format_class.value,
            }
            for e in _ENTRIES
        ]
    }
    return json.dumps(doc, indent=indent)


def sign_extend(value: int, bits: int) -> int:
    """Interpret the low `bits` of value as two's complement."""
    value &= (1 << bits) - 1
    if value & (1 << (bits - 1)):
        value -= 1 << bits
    return value


def _check_reg(name, v):
    if not 0 <= v <= 31:
        raise EncodingError("%s register index %d out of range 0..31" % (name, v))


def _check_imm_range(mn, imm, lo, hi):
    if not lo <= imm <= hi:
        raise EncodingError(
            "%s immediate %d out of range [%d, %d]" % (mn.text, imm, lo, hi)
        )


def _enc_b_imm(imm: int) -> int:
    v = imm & 0x1FFF
    return (
        ((v >> 12) & 0x1) << 31
        | ((v >> 5) & 0x3F) << 25
        | ((v >> 1) & 0xF) << 8
        | ((v >> 11) & 0x1) << 7
    )


def _dec_b_imm(word: int) -> int:
    v = (
        ((word >> 31) & 0x1) << 12
        | ((word >> 7) & 0x1) << 11
        | ((word >> 25) & 0x3F) << 5
        | ((word >> 8) & 0xF) << 1
    )
    return sign_extend(v, 13)


def _enc_j_imm(imm: int) -> int:
    v = imm & 0x1FFFFF
    return (
        ((v >> 20) & 0x1) << 31
        | ((v >> 1) & 0x3FF) << 21
        | ((v >> 11) & 0x1) << 20
        | ((v >> 12) & 0xFF) << 12
    )


def _dec_j_imm(word: int) -> int:
    v = (
        ((word >> 31) & 0x1) << 20
        | ((word >> 12) & 0xFF) << 12
        | ((word >> 20) & 0x1) << 11
        | ((word >> 21) & 0x3FF) << 1
    )
    return sign_extend(v, 21)


def encode(instr: DecodedInstruction) -> int:
    """Encode to a 32-bit word; raises EncodingError on any invalid field."""
    mn = instr.mnemonic
    e = _BY_MNEMONIC[mn]
    _check_reg("rd", instr.rd)
    _check_reg("rs1", instr.rs1)
    _check_reg("rs2", instr.rs2)
    if instr.fmt != 0:
        raise EncodingError("fmt must be 0b00 (single precision)")

    if e.format_class is FormatClass.FP_R:
        if instr.rm not in (int(RoundingMode.RNE), int(RoundingMode.DYNAMIC)):
            raise EncodingError("rm %d unsupported (only RNE/dynamic)" % instr.rm)
        if mn is Mnemonic.RFMAC_S and instr.rd != 0:
            raise EncodingError("rfmac.s has no destination; rd field must be 0")
        if mn is Mnemonic.RFSMAC_S and (instr.rs1 != 0 or instr.rs2 != 0):
            raise EncodingError("rfsmac.s has no sources; rs1/rs2 fields must be 0")
        word = (
            e.match
            | (instr.rs2 << 20)
            | (instr.rs1 << 15)
            | (instr.rm << 12)
            | (instr.rd << 7)
        )
    elif instr.rm != 0:
        raise EncodingError("rm field only exists on OP-FP instructions")
    elif mn is Mnemonic.EBREAK:
        if instr.rd or instr.rs1 or instr.rs2 or instr.imm:
            raise EncodingError("ebreak takes no operands")
        word = e.match
    elif e.format_class is FormatClass.R:
        word = e.match | (instr.rs2 << 20) | (instr.rs1 << 15) | (instr.rd << 7)
    elif e.format_class is FormatClass.I:
        if mn is Mnemonic.SLLI:
            _check_imm_range(mn, instr.imm, 0, 63)
        else:
            _check_imm_range(mn, instr.imm, -2048, 2047)
        word = e.match | ((instr.imm & 0xFFF) << 20) | (instr.rs1 << 15) | (instr.rd << 7)
    elif e.format_class is FormatClass.S:
        _check_imm_range(mn, instr.imm, -2048, 2047)
        v = instr.imm & 0xFFF
        word = (
            e.match
            | ((v >> 5) << 25)
            | (instr.rs2 << 20)
            | (instr.rs1 << 15)
            | ((v & 0x1F) << 7)
        )
    elif e.format_class is FormatClass.B:
        _check_imm_range(mn, instr.imm, -4096, 4094)
        if instr.imm & 1:
            raise EncodingError("branch offset must be even")
        word = e.match | _enc_b_imm(instr.imm) | (instr.rs2 << 20) | (instr.rs1 << 15)
    elif e.format_class is FormatClass.U:
        if instr.imm & 0xFFF:
            raise EncodingError("%s immediate must have low 12 bits clear" % mn.text)
        _check_imm_range(mn, instr.imm, -(1 << 31), (1 << 31) - 4096)
        word = e.match | (((instr.imm >> 12) & 0xFFFFF) << 12) | (instr.rd << 7)
    elif e.format_class is FormatClass.J:
        _check_imm_range(mn, instr.imm, -(1 << 20), (1 << 20) - 2)
        if instr.imm & 1:
            raise EncodingError("jump offset must be even")
        word = e.match | _enc_j_imm(instr.imm) | (instr.rd << 7)
    else:  # pragma: no cover
        raise EncodingError("unhandled format %s" % e.format_class)

    assert (word & e.mask) == e.match
    return word


def decode(word: int) -> DecodedInstruction:
    """Decode a 32-bit word by registry scan; raises IllegalInstructionError."""
    word &= 0xFFFFFFFF
    for e in _ENTRIES:
        if (word & e.mask) != e.match:
            continue
        mn = e.mnemonic
        rd = (word >> 7) & 0x1F
        rs1 = (word >> 15) & 0x1F
        rs2 = (word >> 20) & 0x1F
        if e.format_class is FormatClass.FP_R:
            rm = (word >> 12) & 0x7
            if rm not in (int(RoundingMode.RNE), int(RoundingMode.DYNAMIC)):
                raise IllegalInstructionError(
                    "word 0x%08X: rounding mode %d not implemented" % (word, rm)
                )
            if mn is Mnemonic.RFMAC_S and rd != 0:
                raise IllegalInstructionError(
                    "word 0x%08X: rfmac.s requires rd field 0" % word
                )
            return DecodedInstruction(mn, rd=rd, rs1=rs1, rs2=rs2, rm=rm, fmt=(word >> 25) & 3)
        if mn is Mnemonic.EBREAK:
            return DecodedInstruction(mn)
        if e.format_class is FormatClass.R:
            return DecodedInstruction(mn, rd=rd, rs1=rs1, rs2=rs2)
        if e.format_class is FormatClass.I:
            if mn is Mnemonic.SLLI:
                imm = (word >> 20) & 0x3F
            else:
                imm = sign_extend(word >> 20, 12)
            return DecodedInstruction(mn, rd=rd, rs1=rs1, imm=imm)
        if e.format_class is FormatClass.S:
            imm = sign_extend(((word >> 25) << 5) | rd, 12)
            return DecodedInstruction(mn, rs1=rs1, rs2=rs2, imm=imm)
        if e.format_class is FormatClass.B:
            return DecodedInstruction(mn, rs1=rs1, rs2=rs2, imm=_dec_b_imm(word))
        if e.format_class is FormatClass.U:
            return DecodedInstruction(mn, rd=rd, imm=sign_extend(word & 0xFFFFF000, 32))
        if e.format_class is FormatClass.J:
            return DecodedInstruction(mn, rd=rd, imm=_dec_j_imm(word))
    raise IllegalInstructionError("word 0x%08X matches no registry entry" % word)
