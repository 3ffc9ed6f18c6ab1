"""Convolution kernel generator, reference oracle and layer suites.

`gen_conv` emits the 6-deep convolution loop nest as assembly in one of
three shapes sharing identical loop structure and differing only in the
inner MAC body:

  rv64f     flw in, flw fil, fmul, flw out, fadd, fsw out   (4 mem / MAC)
  baseline  flw in, flw fil, fmac, fsw out                  (3 mem / MAC,
            plus one flw per output element to seed the accumulator)
  rv64r     flw in, flw fil... rfmac                        (2 mem / MAC,
            plus rfsmac + fsw once per output element)

Address arithmetic is fully strength-reduced: running pointers stepped by
add/addi with precomputed byte strides, no multiplies.  Strides that do not
fit a 12-bit immediate are materialized once in the prologue (lui+addi) and
applied with `add`.  All variants accumulate in the same (l, m, n) order
with two-step float32 rounding, so their output memory is bit-identical to
each other and to `conv_ref`.

`expected_counts` computes the per-mnemonic retired counts in closed form
from the same emission plan; the simulator's counters must match exactly.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .isa import Mnemonic

_MASK64 = (1 << 64) - 1
_IMM_MIN, _IMM_MAX = -2048, 2047


class Variant(enum.Enum):
    RV64F = "rv64f"
    BASELINE = "baseline"
    RV64R = "rv64r"

    @classmethod
    def from_text(cls, text: str) -> "Variant":
        for v in cls:
            if v.value == text.lower():
                return v
        raise ValueError("unknown variant %r (rv64f|baseline|rv64r)" % text)


@dataclass(frozen=True)
class ConvSpec:
    """Loop-nest geometry: M filters over C channels, H_in x W_in input,
    H_fil x W_fil filter, stride S."""

    M: int
    C: int
    H_in: int
    W_in: int
    H_fil: int
    W_fil: int
    S: int = 1

    def __post_init__(self):
        for name in ("M", "C", "H_in", "W_in", "H_fil", "W_fil", "S"):
            if getattr(self, name) < 1:
                raise ValueError("%s must be >= 1" % name)
        if self.H < 1 or self.W < 1:
            raise ValueError("filter larger than input")

    @property
    def H(self) -> int:
        return self.H_in - self.H_fil + 1

    @property
    def W(self) -> int:
        return self.W_in - self.W_fil + 1

    @property
    def H_out(self) -> int:
        return (self.H + self.S - 1) // self.S

    @property
    def W_out(self) -> int:
        return (self.W + self.S - 1) // self.S

    @property
    def outputs(self) -> int:
        return self.M * self.H_out * self.W_out

    @property
    def macs(self) -> int:
        return self.outputs * self.C * self.H_fil * self.W_fil

    @property
    def input_shape(self) -> tuple:
        return (self.C, self.H_in, self.W_in)

    @property
    def filter_shape(self) -> tuple:
        return (self.M, self.C, self.H_fil, self.W_fil)

    @property
    def output_shape(self) -> tuple:
        return (self.M, self.H_out, self.W_out)

    def as_dict(self) -> dict:
        return {
            "M": self.M, "C": self.C, "H_in": self.H_in, "W_in": self.W_in,
            "H_fil": self.H_fil, "W_fil": self.W_fil, "S": self.S,
        }


@dataclass(frozen=True)
class TensorBinding:
    """Base addresses of the three row-major float32 tensors."""

    input_base: int
    filter_base: int
    output_base: int

    def regions(self, spec: ConvSpec) -> list:
        return [
            (self.input_base, 4 * spec.C * spec.H_in * spec.W_in),
            (self.filter_base, 4 * spec.M * spec.C * spec.H_fil * spec.W_fil),
            (self.output_base, 4 * spec.outputs),
        ]

    def validate(self, spec: ConvSpec) -> None:
        regs = self.regions(spec)
        for base, size in regs:
            if base % 4 != 0:
                raise ValueError("tensor base 0x%x not 4-byte aligned" % base)
            if base < 0 or base + size > (1 << 31) - 4096:
                raise ValueError("tensor region overflows the address space")
        for i, (b1, s1) in enumerate(regs):
            for b2, s2 in regs[i + 1:]:
                if b1 < b2 + s2 and b2 < b1 + s1:
                    raise ValueError("tensor regions overlap")


def default_binding(spec: ConvSpec, data_base: int = 0x0010_0000) -> TensorBinding:
    def align(v):
        return (v + 63) & ~63

    in_b = align(data_base)
    fil_b = align(in_b + 4 * spec.C * spec.H_in * spec.W_in)
    out_b = align(fil_b + 4 * spec.M * spec.C * spec.H_fil * spec.W_fil)
    b = TensorBinding(in_b, fil_b, out_b)
    b.validate(spec)
    return b


# Register roles (ABI names).  Loop counters in t0..t5, trip bounds in
# a0..a5, running pointers in a6/a7/s2..s6, spilled strides in s7..s11.
_R_CNT = ("t0", "t1", "t2", "t3", "t4", "t5")
_R_BND = ("a0", "a1", "a2", "a3", "a4", "a5")
_P_IN = "a6"
_P_FIL = "a7"
_P_OUT = "s2"
_IN_J = "s3"
_IN_JK = "s4"
_FIL_I = "s5"
_IN_BASE = "s6"
_STRIDE_POOL = ("s7", "s8", "s9", "s10", "s11")


def _fits12(v: int) -> bool:
    return _IMM_MIN <= v <= _IMM_MAX


@dataclass
class _Plan:
    spec: ConvSpec
    bind: TensorBinding

    def __post_init__(self):
        s = self.spec
        self.NI = s.M
        self.NJ = s.H_out
        self.NK = s.W_out
        self.NOUT = s.outputs
        self.TL = self.NOUT * s.C
        self.TM = self.TL * s.H_fil
        self.NMAC = s.macs
        self.bounds = [self.NI, self.NJ, self.NK, s.C, s.H_fil, s.W_fil]
        # Byte strides applied at each loop tail.  The n/m tails run on every
        # iteration (including the last), so after a full window scan the
        # input pointer sits at window_start + 4*H_fil*W_in; the l fixup
        # advances it to the next channel's window from there.
        self.strides = {
            "i": 4 * s.C * s.H_fil * s.W_fil,    # filter block per filter index
            "j": 4 * s.S * s.W_in,               # input rows per j step
            "k": 4 * s.S,                        # input columns per k step
            "l": 4 * s.W_in * (s.H_in - s.H_fil),
            "m": 4 * (s.W_in - s.W_fil),         # to the next window row
        }
        self.stride_regs = {}
        pool = list(_STRIDE_POOL)
        for name in ("i", "j", "k", "l", "m"):
            if not _fits12(self.strides[name]):
                self.stride_regs[name] = pool.pop(0)

    def trips(self, name: str) -> int:
        return {"i": self.NI, "j": self.NI * self.NJ, "k": self.NOUT,
                "l": self.TL, "m": self.TM, "n": self.NMAC}[name]


def _mat_addr(lines, reg, value):
    """Materialize an absolute address as a lui+addi pair."""
    hi = (value + 0x800) >> 12
    lo = value - (hi << 12)
    lines.append("    lui %s, 0x%x" % (reg, hi & 0xFFFFF))
    lines.append("    addi %s, %s, %d" % (reg, reg, lo))


def _mat_int(lines, reg, value):
    if _fits12(value):
        lines.append("    addi %s, zero, %d" % (reg, value))
    else:
        _mat_addr(lines, reg, value)


def _step(lines, plan, reg, stride_name):
    v = plan.strides[stride_name]
    if stride_name in plan.stride_regs:
        lines.append("    add %s, %s, %s" % (reg, reg, plan.stride_regs[stride_name]))
    else:
        lines.append("    addi %s, %s, %d" % (reg, reg, v))


def gen_conv(variant: Variant, spec: ConvSpec, bind: TensorBinding) -> str:
    """Emit the convolution program for one variant as assembly text."""
    if isinstance(variant, str):
        variant = Variant.from_text(variant)
    bind.validate(spec)
    p = _Plan(spec, bind)
    L: list[str] = []
    _mat_addr(L, _IN_BASE, bind.input_base)
    _mat_addr(L, _FIL_I, bind.filter_base)
    _mat_addr(L, _P_OUT, bind.output_base)
    for reg, v in zip(_R_BND, p.bounds):
        _mat_int(L, reg, v)
    for name in ("i", "j", "k", "l", "m"):
        if name in p.stride_regs:
            _mat_int(L, p.stride_regs[name], p.strides[name])
    L.append("    addi %s, zero, 0" % _R_CNT[0])
    L.append("loop_i:")
    L.append("    addi %s, %s, 0" % (_IN_J, _IN_BASE))
    L.append("    addi %s, zero, 0" % _R_CNT[1])
    L.append("loop_j:")
    L.append("    addi %s, %s, 0" % (_IN_JK, _IN_J))
    L.append("    addi %s, zero, 0" % _R_CNT[2])
    L.append("loop_k:")
    L.append("    addi %s, %s, 0" % (_P_FIL, _FIL_I))
    L.append("    addi %s, %s, 0" % (_P_IN, _IN_JK))
    if variant is Variant.BASELINE:
        L.append("    flw fa5, 0(%s)" % _P_OUT)  # seed the register accumulator
    L.append("    addi %s, zero, 0" % _R_CNT[3])
    L.append("loop_l:")
    L.append("    addi %s, zero, 0" % _R_CNT[4])
    L.append("loop_m:")
    L.append("    addi %s, zero, 0" % _R_CNT[5])
    L.append("loop_n:")
    if variant is Variant.RV64F:
        L.append("    flw fa4, 0(%s)" % _P_IN)
        L.append("    flw fa3, 0(%s)" % _P_FIL)
        L.append("    fmul.s fa4, fa4, fa3")
        L.append("    flw fa5, 0(%s)" % _P_OUT)
        L.append("    fadd.s fa5, fa5, fa4")
        L.append("    fsw fa5, 0(%s)" % _P_OUT)
    elif variant is Variant.BASELINE:
        L.append("    flw fa4, 0(%s)" % _P_IN)
        L.append("    flw fa3, 0(%s)" % _P_FIL)
        L.append("    fmac.s fa5, fa4, fa3")
        L.append("    fsw fa5, 0(%s)" % _P_OUT)
    else:  # RV64R
        L.append("    flw fa5, 0(%s)" % _P_IN)
        L.append("    flw fa4, 0(%s)" % _P_FIL)
        L.append("    rfmac.s fa5, fa4")
    L.append("    addi %s, %s, 4" % (_P_IN, _P_IN))
    L.append("    addi %s, %s, 4" % (_P_FIL, _P_FIL))
    L.append("    addi %s, %s, 1" % (_R_CNT[5], _R_CNT[5]))
    L.append("    blt %s, %s, loop_n" % (_R_CNT[5], _R_BND[5]))
    _step(L, p, _P_IN, "m")
    L.append("    addi %s, %s, 1" % (_R_CNT[4], _R_CNT[4]))
    L.append("    blt %s, %s, loop_m" % (_R_CNT[4], _R_BND[4]))
    _step(L, p, _P_IN, "l")
    L.append("    addi %s, %s, 1" % (_R_CNT[3], _R_CNT[3]))
    L.append("    blt %s, %s, loop_l" % (_R_CNT[3], _R_BND[3]))
    if variant is Variant.RV64R:
        L.append("    rfsmac.s fa5")
        L.append("    fsw fa5, 0(%s)" % _P_OUT)
    L.append("    addi %s, %s, 4" % (_P_OUT, _P_OUT))
    _step(L, p, _IN_JK, "k")
    L.append("    addi %s, %s, 1" % (_R_CNT[2], _R_CNT[2]))
    L.append("    blt %s, %s, loop_k" % (_R_CNT[2], _R_BND[2]))
    _step(L, p, _IN_J, "j")
    L.append("    addi %s, %s, 1" % (_R_CNT[1], _R_CNT[1]))
    L.append("    blt %s, %s, loop_j" % (_R_CNT[1], _R_BND[1]))
    _step(L, p, _FIL_I, "i")
    L.append("    addi %s, %s, 1" % (_R_CNT[0], _R_CNT[0]))
    L.append("    blt %s, %s, loop_i" % (_R_CNT[0], _R_BND[0]))
    L.append("    ebreak")
    return "\n".join(L) + "\n"


def expected_counts(variant: Variant, spec: ConvSpec) -> dict:
    """Closed-form per-mnemonic retired counts for a gen_conv program.

    Derived from the emission plan (inner mix x trip counts + loop
    bookkeeping); must equal the simulator's retirement counters exactly.
    """
    if isinstance(variant, str):
        variant = Variant.from_text(variant)
    p = _Plan(spec, default_binding(spec))
    c = {m.text: 0 for m in Mnemonic}

    big_bounds = sum(1 for b in p.bounds if not _fits12(b))
    n_stride_regs = len(p.stride_regs)
    c["lui"] = 3 + big_bounds + n_stride_regs
    c["ebreak"] = 1

    small = {name: (name not in p.stride_regs) for name in ("i", "j", "k", "l", "m")}
    addi = 3 + len(p.bounds) + n_stride_regs + 1  # prologue + i-counter init
    addi += p.trips("i") * (2 + 1 + (1 if small["i"] else 0))
    addi += p.trips("j") * (2 + 1 + (1 if small["j"] else 0))
    addi += p.trips("k") * (3 + 1 + 1 + (1 if small["k"] else 0))
    addi += p.trips("l") * (1 + 1 + (1 if small["l"] else 0))
    addi += p.trips("m") * (1 + 1 + (1 if small["m"] else 0))
    addi += p.trips("n") * 3
    c["addi"] = addi

    c["add"] = sum(p.trips(name) for name in ("i", "j", "k", "l", "m") if not small[name])
    c["blt"] = sum(p.trips(name) for name in ("i", "j", "k", "l", "m", "n"))

    if variant is Variant.RV64F:
        c["flw"] = 3 * p.NMAC
        c["fsw"] = p.NMAC
        c["fmul.s"] = p.NMAC
        c["fadd.s"] = p.NMAC
    elif variant is Variant.BASELINE:
        c["flw"] = 2 * p.NMAC + p.NOUT
        c["fsw"] = p.NMAC
        c["fmac.s"] = p.NMAC
    else:
        c["flw"] = 2 * p.NMAC
        c["fsw"] = p.NOUT
        c["rfmac.s"] = p.NMAC
        c["rfsmac.s"] = p.NOUT

    c = {k: v for k, v in c.items() if v}
    c["total"] = sum(v for k, v in c.items() if k != "total")
    c["mem_type"] = c.get("flw", 0) + c.get("fsw", 0)
    return c


def conv_ref(inp: np.ndarray, fil: np.ndarray, spec: ConvSpec) -> np.ndarray:
    """Reference convolution, bit-exact against every simulated variant."""
    if inp.shape != spec.input_shape or inp.dtype != np.float32:
        raise ValueError("input tensor must be float32 with shape %s" % (spec.input_shape,))
    if fil.shape != spec.filter_shape or fil.dtype != np.float32:
        raise ValueError("filter tensor must be float32 with shape %s" % (spec.filter_shape,))
    out = np.zeros(spec.output_shape, dtype=np.float32)
    kernels.conv_ref_kernel(
        np.ascontiguousarray(inp), np.ascontiguousarray(fil), out, np.int64(spec.S)
    )
    return out


def derive_seed(*parts) -> int:
    """Mix arbitrary ints/strings into a 64-bit seed (splitmix-style)."""
    h = 0x9E3779B97F4A7C15
    for part in parts:
        if isinstance(part, str):
            data = part.encode()
        else:
            data = int(part).to_bytes(8, "little", signed=False)
        for byte in data:
            h = (h ^ byte) * 0xBF58476D1CE4E5B9 & _MASK64
            h ^= h >> 27
    return h & _MASK64


def lcg_values(n: int, seed: int) -> np.ndarray:
    """Deterministic float32 stream in [-1, 1) from a 64-bit LCG."""
    out = np.empty(n, dtype=np.float32)
    state = seed & _MASK64
    for i in range(n):
        state = (state * 6364136223846793005 + 1442695040888963407) & _MASK64
        out[i] = np.float32((state >> 40) * (2.0 ** -23) - 1.0)
    return out


def init_tensors(spec: ConvSpec, seed: int) -> tuple:
    """Input and filter tensors for one benchmark run (output starts zeroed)."""
    inp = lcg_values(spec.C * spec.H_in * spec.W_in, derive_seed(seed, "input"))
    fil = lcg_values(
        spec.M * spec.C * spec.H_fil * spec.W_fil, derive_seed(seed, "filter")
    )
    return inp.reshape(spec.input_shape), fil.reshape(spec.filter_shape)


def _scale_ch(v: int, scale: float) -> int:
    return max(1, math.ceil(v * scale - 1e-9))


_LENET = [
    (6, 1, 32, 5, 1),
    (16, 6, 14, 5, 1),
    (120, 16, 5, 5, 1),
]

_RESNET20 = (
    [(16, 3, 32, 3, 1)]
    + [(16, 16, 32, 3, 1)] * 6
    + [(32, 16, 32, 3, 2)]
    + [(32, 32, 16, 3, 1)] * 5
    + [(64, 32, 16, 3, 2)]
    + [(64, 64, 8, 3, 1)] * 5
)

# (kind, out_ch, in_ch, feature size, stride); dw entries carry the channel
# count in out_ch and expand into per-channel single-group specs.
_MOBILENETV1 = [
    ("conv", 32, 3, 224, 2),
    ("dw", 32, 0, 112, 1), ("pw", 64, 32, 112, 1),
    ("dw", 64, 0, 112, 2), ("pw", 128, 64, 56, 1),
    ("dw", 128, 0, 56, 1), ("pw", 128, 128, 56, 1),
    ("dw", 128, 0, 56, 2), ("pw", 256, 128, 28, 1),
    ("dw", 256, 0, 28, 1), ("pw", 256, 256, 28, 1),
    ("dw", 256, 0, 28, 2), ("pw", 512, 256, 14, 1),
    ("dw", 512, 0, 14, 1), ("pw", 512, 512, 14, 1),
    ("dw", 512, 0, 14, 1), ("pw", 512, 512, 14, 1),
    ("dw", 512, 0, 14, 1), ("pw", 512, 512, 14, 1),
    ("dw", 512, 0, 14, 1), ("pw", 512, 512, 14, 1),
    ("dw", 512, 0, 14, 1), ("pw", 512, 512, 14, 1),
    ("dw", 512, 0, 14, 2), ("pw", 1024, 512, 7, 1),
    ("dw", 1024, 0, 7, 1), ("pw", 1024, 1024, 7, 1),
]

MODEL_NAMES = ("lenet", "resnet20", "mobilenetv1")


def model_layers(model: str, scale: float = 1.0) -> list[ConvSpec]:
    """Convolution-layer geometry list for a named architecture.

    `scale` multiplies channel counts (rounded up); depthwise layers expand
    into one single-channel group per scaled channel.
    """
    if not 0.0 < scale <= 1.0:
        raise ValueError("scale must be in (0, 1]")
    model = model.lower()
    if model == "lenet":
        return [
            ConvSpec(_scale_ch(m, scale), _scale_ch(ci, scale), hw, hw, f, f, s)
            for m, ci, hw, f, s in _LENET
        ]
    if model == "resnet20":
        return [
            ConvSpec(_scale_ch(m, scale), _scale_ch(ci, scale), hw, hw, f, f, s)
            for m, ci, hw, f, s in _RESNET20
        ]
    if model == "mobilenetv1":
        specs = []
        for kind, out_ch, in_ch, hw, s in _MOBILENETV1:
            if kind == "conv":
                specs.append(
                    ConvSpec(_scale_ch(out_ch, scale), _scale_ch(in_ch, scale), hw, hw, 3, 3, s)
                )
            elif kind == "dw":
                specs.extend(
                    ConvSpec(1, 1, hw, hw, 3, 3, s)
                    for _ in range(_scale_ch(out_ch, scale))
                )
            else:  # pw
                specs.append(
                    ConvSpec(_scale_ch(out_ch, scale), _scale_ch(in_ch, scale), hw, hw, 1, 1, s)
                )
        return specs
    raise ValueError("unknown model %r (expected one of %s)" % (model, ", ".join(MODEL_NAMES)))


def layers_to_json(model: str, scale: float = 1.0, indent: int | None = 2) -> str:
    specs = model_layers(model, scale)
    return json.dumps(
        {"model": model, "scale": scale, "layers": [s.as_dict() for s in specs]},
        indent=indent,
    )
