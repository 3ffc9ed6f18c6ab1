"""Two-pass assembler and disassembler for the simulator's dialect.

The dialect is deliberately small: one instruction per line, optional
``label:`` prefixes, ``#`` comments, ABI register names (or raw ``x13`` /
``f13``), decimal or hex immediates, and ``j label`` as an alias for
``jal zero, label``.  There are no sections, macros or relocations.

Images serialize to a flat little-endian word stream behind a 16-byte
header: the 8-byte magic ``RPIPEIMG`` followed by the base address as an
8-byte little-endian integer.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from .isa import (
    DecodedInstruction,
    FormatClass,
    IllegalInstructionError,
    Mnemonic,
    RoundingMode,
    decode,
    encode,
    entry,
    sign_extend,
)

MAGIC = b"RPIPEIMG"
HEADER_LEN = 16


class AsmError(Exception):
    """Assembly/disassembly failure; carries a line or word offset."""


X_ABI = (
    "zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
    "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6"
).split()
F_ABI = (
    "ft0 ft1 ft2 ft3 ft4 ft5 ft6 ft7 fs0 fs1 fa0 fa1 fa2 fa3 fa4 fa5 fa6 fa7 "
    "fs2 fs3 fs4 fs5 fs6 fs7 fs8 fs9 fs10 fs11 ft8 ft9 ft10 ft11"
).split()

_X_INDEX = {name: i for i, name in enumerate(X_ABI)}
_X_INDEX["fp"] = 8
_X_INDEX.update({"x%d" % i: i for i in range(32)})
_F_INDEX = {name: i for i, name in enumerate(F_ABI)}
_F_INDEX.update({"f%d" % i: i for i in range(32)})

_MEM_OPERAND = re.compile(r"^(-?(?:0x[0-9a-fA-F]+|\d+))\((\w+)\)$")
_LABEL_DEF = re.compile(r"^([A-Za-z_.][\w.]*):")
_LABEL_REF = re.compile(r"^[A-Za-z_.][\w.]*$")


@dataclass
class ProgramImage:
    """A loadable program: base address, instruction words, symbol table."""

    base: int
    words: list[int]
    symbols: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.words:
            raise AsmError("empty program image")
        if self.base % 4 != 0 or self.base < 0:
            raise AsmError("image base must be a non-negative multiple of 4")

    @property
    def end(self) -> int:
        return self.base + 4 * len(self.words)

    def to_bytes(self) -> bytes:
        head = MAGIC + struct.pack("<Q", self.base)
        return head + b"".join(struct.pack("<I", w & 0xFFFFFFFF) for w in self.words)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ProgramImage":
        if len(blob) < HEADER_LEN or blob[:8] != MAGIC:
            raise AsmError("not a program image (bad magic)")
        (base,) = struct.unpack("<Q", blob[8:HEADER_LEN])
        body = blob[HEADER_LEN:]
        if len(body) == 0 or len(body) % 4 != 0:
            raise AsmError("image body must be a non-empty multiple of 4 bytes")
        words = list(struct.unpack("<%dI" % (len(body) // 4), body))
        return cls(base=base, words=words)

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "ProgramImage":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def _parse_int(text: str, lineno: int) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise AsmError("line %d: bad immediate %r" % (lineno, text)) from None


def _xreg(name: str, lineno: int) -> int:
    try:
        return _X_INDEX[name]
    except KeyError:
        raise AsmError("line %d: unknown integer register %r" % (lineno, name)) from None


def _freg(name: str, lineno: int) -> int:
    try:
        return _F_INDEX[name]
    except KeyError:
        raise AsmError("line %d: unknown FP register %r" % (lineno, name)) from None


def _split_operands(rest: str) -> list[str]:
    rest = rest.strip()
    if not rest:
        return []
    return [op.strip() for op in rest.split(",")]


def _parse_rm(tok: str, lineno: int) -> int:
    if tok == "rne":
        return int(RoundingMode.RNE)
    if tok == "dyn":
        return int(RoundingMode.DYNAMIC)
    raise AsmError("line %d: bad rounding mode %r (rne|dyn)" % (lineno, tok))


@dataclass
class _Stmt:
    lineno: int
    mnemonic: Mnemonic
    operands: list[str]
    addr: int


def _scan(source: str, base: int) -> tuple[list[_Stmt], dict[str, int]]:
    """First pass: strip comments, collect labels, assign addresses."""
    stmts: list[_Stmt] = []
    symbols: dict[str, int] = {}
    addr = base
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        while True:
            m = _LABEL_DEF.match(line)
            if not m:
                break
            name = m.group(1)
            if name in symbols:
                raise AsmError("line %d: duplicate label %r" % (lineno, name))
            symbols[name] = addr
            line = line[m.end():].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        mtext = parts[0].lower()
        rest = parts[1] if len(parts) > 1 else ""
        if mtext == "j":  # alias: j label == jal zero, label
            mtext = "jal"
            rest = "zero, " + rest
        try:
            mn = Mnemonic.from_text(mtext)
        except IllegalInstructionError:
            raise AsmError("line %d: unknown mnemonic %r" % (lineno, mtext)) from None
        stmts.append(_Stmt(lineno, mn, _split_operands(rest), addr))
        addr += 4
    return stmts, symbols


def _target_offset(tok: str, st: _Stmt, symbols: dict[str, int]) -> int:
    """Branch/jump target: a label or a numeric byte offset from this pc."""
    if _LABEL_REF.match(tok) and tok in symbols:
        return symbols[tok] - st.addr
    if _LABEL_REF.match(tok) and not re.match(r"^-?(0x)?[0-9a-fA-F]+$", tok):
        raise AsmError("line %d: undefined label %r" % (st.lineno, tok))
    return _parse_int(tok, st.lineno)


def _need(st: _Stmt, n: int):
    if len(st.operands) != n:
        raise AsmError(
            "line %d: %s expects %d operand(s), got %d"
            % (st.lineno, st.mnemonic.text, n, len(st.operands))
        )


def _mem_operand(tok: str, st: _Stmt) -> tuple[int, int]:
    m = _MEM_OPERAND.match(tok)
    if not m:
        raise AsmError("line %d: expected offset(reg), got %r" % (st.lineno, tok))
    return _parse_int(m.group(1), st.lineno), _xreg(m.group(2), st.lineno)


def assemble(source: str, base: int = 0x1000) -> ProgramImage:
    """Translate source text into a ProgramImage loaded at `base`."""
    stmts, symbols = _scan(source, base)
    if not stmts:
        raise AsmError("no instructions in source")
    end = base + 4 * len(stmts)
    words: list[int] = []
    for st in stmts:
        mn = st.mnemonic
        ln = st.lineno
        ops = st.operands
        try:
            if mn is Mnemonic.EBREAK:
                _need(st, 0)
                di = DecodedInstruction(mn)
            elif mn is Mnemonic.ADD:
                _need(st, 3)
                di = DecodedInstruction(
                    mn, rd=_xreg(ops[0], ln), rs1=_xreg(ops[1], ln), rs2=_xreg(ops[2], ln)
                )
            elif mn in (Mnemonic.ADDI, Mnemonic.SLLI):
                _need(st, 3)
                di = DecodedInstruction(
                    mn,
                    rd=_xreg(ops[0], ln),
                    rs1=_xreg(ops[1], ln),
                    imm=_parse_int(ops[2], ln),
                )
            elif mn in (Mnemonic.LUI, Mnemonic.AUIPC):
                _need(st, 2)
                imm20 = _parse_int(ops[1], ln)
                if not -0x80000 <= imm20 <= 0xFFFFF:
                    raise AsmError("line %d: lui/auipc immediate out of 20-bit range" % ln)
                di = DecodedInstruction(
                    mn, rd=_xreg(ops[0], ln), imm=sign_extend(imm20 & 0xFFFFF, 20) << 12
                )
            elif mn is Mnemonic.JAL:
                _need(st, 2)
                off = _target_offset(ops[1], st, symbols)
                if off % 4 or not base <= st.addr + off < end:
                    raise AsmError("line %d: jump target outside image" % ln)
                di = DecodedInstruction(mn, rd=_xreg(ops[0], ln), imm=off)
            elif mn in (Mnemonic.BEQ, Mnemonic.BNE, Mnemonic.BLT, Mnemonic.BGE):
                _need(st, 3)
                off = _target_offset(ops[2], st, symbols)
                if off % 4 or not base <= st.addr + off < end:
                    raise AsmError("line %d: branch target outside image" % ln)
                di = DecodedInstruction(
                    mn, rs1=_xreg(ops[0], ln), rs2=_xreg(ops[1], ln), imm=off
                )
            elif mn in (Mnemonic.LW, Mnemonic.LD):
                _need(st, 2)
                off, rs1 = _mem_operand(ops[1], st)
                di = DecodedInstruction(mn, rd=_xreg(ops[0], ln), rs1=rs1, imm=off)
            elif mn in (Mnemonic.SW, Mnemonic.SD):
                _need(st, 2)
                off, rs1 = _mem_operand(ops[1], st)
                di = DecodedInstruction(mn, rs2=_xreg(ops[0], ln), rs1=rs1, imm=off)
            elif mn is Mnemonic.FLW:
                _need(st, 2)
                off, rs1 = _mem_operand(ops[1], st)
                di = DecodedInstruction(mn, rd=_freg(ops[0], ln), rs1=rs1, imm=off)
            elif mn is Mnemonic.FSW:
                _need(st, 2)
                off, rs1 = _mem_operand(ops[1], st)
                di = DecodedInstruction(mn, rs2=_freg(ops[0], ln), rs1=rs1, imm=off)
            elif mn in (Mnemonic.FADD_S, Mnemonic.FMUL_S, Mnemonic.FMAC_S):
                rm = int(RoundingMode.DYNAMIC)
                if len(ops) == 4:
                    rm = _parse_rm(ops[3], ln)
                    ops = ops[:3]
                _need(_Stmt(ln, mn, ops, st.addr), 3)
                di = DecodedInstruction(
                    mn,
                    rd=_freg(ops[0], ln),
                    rs1=_freg(ops[1], ln),
                    rs2=_freg(ops[2], ln),
                    rm=rm,
                )
            elif mn is Mnemonic.RFMAC_S:
                rm = int(RoundingMode.DYNAMIC)
                if len(ops) == 3:
                    rm = _parse_rm(ops[2], ln)
                    ops = ops[:2]
                _need(_Stmt(ln, mn, ops, st.addr), 2)
                di = DecodedInstruction(
                    mn, rs1=_freg(ops[0], ln), rs2=_freg(ops[1], ln), rm=rm
                )
            elif mn is Mnemonic.RFSMAC_S:
                rm = int(RoundingMode.DYNAMIC)
                if len(ops) == 2:
                    rm = _parse_rm(ops[1], ln)
                    ops = ops[:1]
                _need(_Stmt(ln, mn, ops, st.addr), 1)
                di = DecodedInstruction(mn, rd=_freg(ops[0], ln), rm=rm)
            else:  # pragma: no cover
                raise AsmError("line %d: unhandled mnemonic %s" % (ln, mn.text))
            words.append(encode(di))
        except AsmError:
            raise
        except Exception as exc:
            raise AsmError("line %d: %s" % (ln, exc)) from exc
    return ProgramImage(base=base, words=words, symbols=symbols)


def _fmt_target(addr_map: dict[int, str], target: int, offset: int) -> str:
    if target in addr_map:
        return addr_map[target]
    return str(offset)


def disassemble(image: ProgramImage) -> str:
    """Render an image back to assembly text.

    Branch/jump targets inside the image become local labels, so the output
    reassembles to the identical word sequence at the same base.
    """
    decoded = []
    for i, w in enumerate(image.words):
        try:
            decoded.append(decode(w))
        except IllegalInstructionError as exc:
            raise AsmError("illegal instruction at offset %d: %s" % (4 * i, exc)) from exc

    targets = set()
    for i, di in enumerate(decoded):
        if di.mnemonic in (Mnemonic.BEQ, Mnemonic.BNE, Mnemonic.BLT, Mnemonic.BGE, Mnemonic.JAL):
            t = image.base + 4 * i + di.imm
            if image.base <= t < image.end:
                targets.add(t)
    addr_map = {t: "L%d" % n for n, t in enumerate(sorted(targets))}

    lines = []
    for i, di in enumerate(decoded):
        addr = image.base + 4 * i
        if addr in addr_map:
            lines.append(addr_map[addr] + ":")
        mn = di.mnemonic
        rm_suffix = ", rne" if (entry(mn).format_class is FormatClass.FP_R and di.rm == 0) else ""
        if mn is Mnemonic.EBREAK:
            text = "ebreak"
        elif mn is Mnemonic.ADD:
            text = "add %s, %s, %s" % (X_ABI[di.rd], X_ABI[di.rs1], X_ABI[di.rs2])
        elif mn in (Mnemonic.ADDI, Mnemonic.SLLI):
            text = "%s %s, %s, %d" % (mn.text, X_ABI[di.rd], X_ABI[di.rs1], di.imm)
        elif mn in (Mnemonic.LUI, Mnemonic.AUIPC):
            text = "%s %s, 0x%x" % (mn.text, X_ABI[di.rd], (di.imm >> 12) & 0xFFFFF)
        elif mn is Mnemonic.JAL:
            text = "jal %s, %s" % (X_ABI[di.rd], _fmt_target(addr_map, addr + di.imm, di.imm))
        elif mn in (Mnemonic.BEQ, Mnemonic.BNE, Mnemonic.BLT, Mnemonic.BGE):
            text = "%s %s, %s, %s" % (
                mn.text,
                X_ABI[di.rs1],
                X_ABI[di.rs2],
                _fmt_target(addr_map, addr + di.imm, di.imm),
            )
        elif mn in (Mnemonic.LW, Mnemonic.LD):
            text = "%s %s, %d(%s)" % (mn.text, X_ABI[di.rd], di.imm, X_ABI[di.rs1])
        elif mn in (Mnemonic.SW, Mnemonic.SD):
            text = "%s %s, %d(%s)" % (mn.text, X_ABI[di.rs2], di.imm, X_ABI[di.rs1])
        elif mn is Mnemonic.FLW:
            text = "flw %s, %d(%s)" % (F_ABI[di.rd], di.imm, X_ABI[di.rs1])
        elif mn is Mnemonic.FSW:
            text = "fsw %s, %d(%s)" % (F_ABI[di.rs2], di.imm, X_ABI[di.rs1])
        elif mn in (Mnemonic.FADD_S, Mnemonic.FMUL_S, Mnemonic.FMAC_S):
            text = "%s %s, %s, %s%s" % (mn.text, F_ABI[di.rd], F_ABI[di.rs1], F_ABI[di.rs2], rm_suffix)
        elif mn is Mnemonic.RFMAC_S:
            text = "rfmac.s %s, %s%s" % (F_ABI[di.rs1], F_ABI[di.rs2], rm_suffix)
        elif mn is Mnemonic.RFSMAC_S:
            text = "rfsmac.s %s%s" % (F_ABI[di.rd], rm_suffix)
        else:  # pragma: no cover
            raise AsmError("cannot render %s" % mn.text)
        lines.append("    " + text)
    return "\n".join(lines) + "\n"
