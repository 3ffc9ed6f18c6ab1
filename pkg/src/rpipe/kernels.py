"""Hot simulation loops, shared by the numba and pure-Python backends.

Everything here is written in the numba-compatible subset: scalar locals,
numpy arrays, explicit int64/float32 casts ("RPIPE_BACKEND=python" runs the
identical code uncompiled).  Integer state is int64 throughout; FP register
values are float32 so every multiply and add rounds to nearest-even single
precision exactly once (two-step rounding: round the product, then round
the sum -- never fused).

The timed loop models the 5-stage in-order pipeline:

  * forwarding into EX from the EX/MEM and MEM/WB latches (register file
    is written before it is read within a cycle),
  * a 1-bubble load-use interlock (a load's data cannot be forwarded while
    it still occupies MEM),
  * rfmac.s: EX rounds the product, MEM accumulates it into the APR in the
    rented slot instead of touching the data cache,
  * rfsmac.s: reads the APR in ID, carries the value to WB for the register
    write, and drives the APR input to zero during its own MEM cycle; it
    stalls in ID while any rfmac.s/rfsmac.s occupies EX or MEM so the ID
    read always observes a settled APR,
  * branches resolve in EX, predict-not-taken, flushing IF and ID (2 bubbles),
  * data accesses occupy MEM for the full access latency (latency-1 extra
    stall cycles); instruction fetch hides the hit latency and stalls only
    for the miss penalty.
"""

import numpy as np

from .backend import njit

# Op ids: must mirror isa.Mnemonic values.  OP_ILLEGAL marks undecodable
# words; it only traps if it reaches retirement (wrong-path fetches of
# garbage past the program end are squashed harmlessly).
OP_ADD = 0
OP_ADDI = 1
OP_SLLI = 2
OP_LUI = 3
OP_AUIPC = 4
OP_JAL = 5
OP_BEQ = 6
OP_BNE = 7
OP_BLT = 8
OP_BGE = 9
OP_LW = 10
OP_SW = 11
OP_LD = 12
OP_SD = 13
OP_FLW = 14
OP_FSW = 15
OP_FADD_S = 16
OP_FMUL_S = 17
OP_FMAC_S = 18
OP_RFMAC_S = 19
OP_RFSMAC_S = 20
OP_EBREAK = 21
OP_ILLEGAL = 22
NUM_OPS = 23

# Counter slots (per-mnemonic retire counts live at C_MNEM_BASE + op).
C_CYCLES = 0
C_RETIRED = 1
C_MEMTYPE = 2
C_STALL_LOAD_USE = 3
C_STALL_APR = 4
C_STALL_CACHE = 5
C_FLUSH_BRANCH = 6
C_MNEM_BASE = 7
NUM_COUNTERS = C_MNEM_BASE + NUM_OPS

# Cache stats slots.
CS_ACCESSES = 0
CS_HITS = 1
CS_MISSES = 2
CS_WRITEBACKS = 3
CS_TICK = 4

# Access kinds.
K_IFETCH = 0
K_LOAD = 1
K_STORE = 2

# Engine exit statuses.
ST_HALT = 0
ST_MAX_CYCLES = 1
ST_ILLEGAL = 2
ST_MISALIGNED = 3
ST_OOB = 4

# Trace columns: cycle, IF pc, ID op, EX op, MEM op, WB op, stall code, APR bits.
TRACE_COLS = 8
TR_NONE = -1
STALL_NONE = 0
STALL_LOAD_USE = 1
STALL_APR = 2
STALL_DCACHE = 3
STALL_ICACHE = 4
STALL_FLUSH = 5


@njit
def _writes_x(op):
    return (
        op == OP_ADD
        or op == OP_ADDI
        or op == OP_SLLI
        or op == OP_LUI
        or op == OP_AUIPC
        or op == OP_JAL
        or op == OP_LW
        or op == OP_LD
    )


@njit
def _writes_f(op):
    return (
        op == OP_FLW
        or op == OP_FADD_S
        or op == OP_FMUL_S
        or op == OP_FMAC_S
        or op == OP_RFSMAC_S
    )


@njit
def _is_load(op):
    return op == OP_LW or op == OP_LD or op == OP_FLW


@njit
def _is_store(op):
    return op == OP_SW or op == OP_SD or op == OP_FSW


@njit
def _is_memtype(op):
    return _is_load(op) or _is_store(op)


@njit
def _is_branch(op):
    return op == OP_BEQ or op == OP_BNE or op == OP_BLT or op == OP_BGE


@njit
def _needs_x_rs1(op):
    return (
        op == OP_ADD
        or op == OP_ADDI
        or op == OP_SLLI
        or _is_branch(op)
        or _is_memtype(op)
    )


@njit
def _needs_x_rs2(op):
    return op == OP_ADD or _is_branch(op) or op == OP_SW or op == OP_SD


@njit
def _needs_f_rs1(op):
    return op == OP_FADD_S or op == OP_FMUL_S or op == OP_FMAC_S or op == OP_RFMAC_S


@njit
def _needs_f_rs2(op):
    return (
        op == OP_FADD_S
        or op == OP_FMUL_S
        or op == OP_FMAC_S
        or op == OP_RFMAC_S
        or op == OP_FSW
    )


@njit
def _load_u32(mem, a):
    return (
        np.int64(mem[a])
        | (np.int64(mem[a + 1]) << 8)
        | (np.int64(mem[a + 2]) << 16)
        | (np.int64(mem[a + 3]) << 24)
    )


@njit
def _load_i64(mem, a):
    lo = _load_u32(mem, a)
    hi = _load_u32(mem, a + 4)
    if hi >= 0x80000000:
        hi -= 0x100000000
    return lo | (hi << 32)


@njit
def _store_u32(mem, a, v):
    mem[a] = np.uint8(v & 0xFF)
    mem[a + 1] = np.uint8((v >> 8) & 0xFF)
    mem[a + 2] = np.uint8((v >> 16) & 0xFF)
    mem[a + 3] = np.uint8((v >> 24) & 0xFF)


@njit
def _store_i64(mem, a, v):
    for k in range(8):
        mem[a + k] = np.uint8((v >> (8 * k)) & 0xFF)


@njit
def cache_access(tags, age, dirty, stats, meta, mem_lat, addr, kind):
    """One cache lookup: update LRU/dirty/stats, return the access latency."""
    line_shift = meta[0]
    set_mask = meta[1]
    set_bits = meta[2]
    hit_lat = meta[3]
    line = addr >> line_shift
    sidx = line & set_mask
    tag = line >> set_bits
    stats[CS_ACCESSES] += 1
    stats[CS_TICK] += 1
    tick = stats[CS_TICK]
    ways = tags.shape[1]
    for w in range(ways):
        if tags[sidx, w] == tag:
            stats[CS_HITS] += 1
            age[sidx, w] = tick
            if kind == K_STORE:
                dirty[sidx, w] = 1
            return hit_lat
    stats[CS_MISSES] += 1
    victim = 0
    oldest = age[sidx, 0]
    for w in range(1, ways):
        if age[sidx, w] < oldest:
            oldest = age[sidx, w]
            victim = w
    if tags[sidx, victim] >= 0 and dirty[sidx, victim] == 1:
        stats[CS_WRITEBACKS] += 1
    tags[sidx, victim] = tag
    age[sidx, victim] = tick
    if kind == K_STORE:
        dirty[sidx, victim] = 1
    else:
        dirty[sidx, victim] = 0
    return hit_lat + mem_lat


@njit
def _fwd_x(r, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x):
    if r == 0:
        return np.int64(0)
    if s3v and s3rd == r and _writes_x(s3op) and not _is_load(s3op):
        return s3i
    if s4v and s4rd == r and _writes_x(s4op):
        return s4i
    return x[r]


@njit
def _fwd_f(r, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f):
    if s3v and s3rd == r and _writes_f(s3op) and s3op != OP_FLW:
        return s3f
    if s4v and s4rd == r and _writes_f(s4op):
        return s4f
    return f[r]


@njit
def conv_ref_kernel(inp, fil, out, stride):
    """Direct convolution in the generator's exact accumulation order.

    Accumulates channel-major (l, m, n) per output element, product rounded
    to f32 then sum rounded to f32, so the result is bit-identical to every
    simulated variant.
    """
    m_count = fil.shape[0]
    c_count = fil.shape[1]
    h_fil = fil.shape[2]
    w_fil = fil.shape[3]
    h_out = out.shape[1]
    w_out = out.shape[2]
    for i in range(m_count):
        for jo in range(h_out):
            for ko in range(w_out):
                acc = np.float32(0.0)
                j = jo * stride
                k = ko * stride
                for l in range(c_count):
                    for m in range(h_fil):
                        for n in range(w_fil):
                            prod = inp[l, j + m, k + n] * fil[i, l, m, n]
                            acc = acc + prod
                out[i, jo, ko] = acc


@njit
def run_functional(
    p_op, p_rd, p_rs1, p_rs2, p_imm, base, n_words,
    x, f, apr, mem, scr_f, scr_u, counters, pc_out, max_retire,
):
    """Untimed architectural executor; the semantic oracle for the pipeline."""
    mem_size = mem.shape[0]
    pc = base
    retired = np.int64(0)
    while retired < max_retire:
        if pc < base or (pc & 3) != 0 or ((pc - base) >> 2) >= n_words:
            pc_out[0] = pc
            return ST_ILLEGAL
        i = (pc - base) >> 2
        o = p_op[i]
        if o == OP_ILLEGAL:
            pc_out[0] = pc
            return ST_ILLEGAL
        rd = p_rd[i]
        rs1 = p_rs1[i]
        rs2 = p_rs2[i]
        imm = p_imm[i]
        nxt = pc + 4
        if o == OP_ADD:
            if rd != 0:
                x[rd] = x[rs1] + x[rs2]
        elif o == OP_ADDI:
            if rd != 0:
                x[rd] = x[rs1] + imm
        elif o == OP_SLLI:
            if rd != 0:
                x[rd] = x[rs1] << imm
        elif o == OP_LUI:
            if rd != 0:
                x[rd] = imm
        elif o == OP_AUIPC:
            if rd != 0:
                x[rd] = pc + imm
        elif o == OP_JAL:
            if rd != 0:
                x[rd] = pc + 4
            nxt = pc + imm
        elif o == OP_BEQ:
            if x[rs1] == x[rs2]:
                nxt = pc + imm
        elif o == OP_BNE:
            if x[rs1] != x[rs2]:
                nxt = pc + imm
        elif o == OP_BLT:
            if x[rs1] < x[rs2]:
                nxt = pc + imm
        elif o == OP_BGE:
            if x[rs1] >= x[rs2]:
                nxt = pc + imm
        elif _is_memtype(o):
            addr = x[rs1] + imm
            size = np.int64(4)
            if o == OP_LD or o == OP_SD:
                size = np.int64(8)
            if addr < 0 or addr + size > mem_size:
                pc_out[0] = pc
                return ST_OOB
            if (addr & (size - 1)) != 0:
                pc_out[0] = pc
                return ST_MISALIGNED
            if o == OP_LW:
                v = _load_u32(mem, addr)
                if v >= 0x80000000:
                    v -= 0x100000000
                if rd != 0:
                    x[rd] = v
            elif o == OP_LD:
                if rd != 0:
                    x[rd] = _load_i64(mem, addr)
            elif o == OP_FLW:
                scr_u[0] = np.uint32(_load_u32(mem, addr))
                f[rd] = scr_f[0]
            elif o == OP_SW:
                _store_u32(mem, addr, x[rs2] & 0xFFFFFFFF)
            elif o == OP_SD:
                _store_i64(mem, addr, x[rs2])
            else:  # OP_FSW
                scr_f[0] = f[rs2]
                _store_u32(mem, addr, np.int64(scr_u[0]))
        elif o == OP_FADD_S:
            f[rd] = f[rs1] + f[rs2]
        elif o == OP_FMUL_S:
            f[rd] = f[rs1] * f[rs2]
        elif o == OP_FMAC_S:
            prod = f[rs1] * f[rs2]
            f[rd] = f[rd] + prod
        elif o == OP_RFMAC_S:
            prod = f[rs1] * f[rs2]
            apr[0] = apr[0] + prod
        elif o == OP_RFSMAC_S:
            f[rd] = apr[0]
            apr[0] = np.float32(0.0)
        retired += 1
        counters[C_RETIRED] += 1
        counters[C_MNEM_BASE + o] += 1
        if _is_memtype(o):
            counters[C_MEMTYPE] += 1
        if o == OP_EBREAK:
            pc_out[0] = pc
            return ST_HALT
        pc = nxt
    pc_out[0] = pc
    return ST_MAX_CYCLES


@njit
def run_timed(
    p_op, p_rd, p_rs1, p_rs2, p_imm, base, n_words,
    x, f, apr, mem, scr_f, scr_u,
    i_tags, i_age, i_dirty, i_stats, i_meta,
    d_tags, d_age, d_dirty, d_stats, d_meta,
    mem_lat, counters, pc_out, max_cycles,
    trace, trace_cap,
):
    """Cycle loop of the 5-stage engine.  Returns an ST_* status code."""
    mem_size = mem.shape[0]
    i_hit_lat = i_meta[3]
    pc = np.int64(base)

    # IF/ID latch: predecoded word index (-1 = fetch fault poison) plus pc.
    v1 = False
    idx1 = np.int64(0)
    pc1 = np.int64(0)
    # ID/EX latch.
    v2 = False
    op2 = np.int64(0)
    rd2 = np.int64(0)
    rs1_2 = np.int64(0)
    rs2_2 = np.int64(0)
    imm2 = np.int64(0)
    pc2 = np.int64(0)
    fval2 = np.float32(0.0)  # APR value captured at ID by rfsmac.s
    # EX/MEM latch.
    v3 = False
    op3 = np.int64(0)
    rd3 = np.int64(0)
    ires3 = np.int64(0)  # int result or memory address
    sdata3 = np.int64(0)  # integer store data
    fres3 = np.float32(0.0)  # FP result / product / FP store data
    pc3 = np.int64(0)
    # MEM/WB latch.
    v4 = False
    op4 = np.int64(0)
    rd4 = np.int64(0)
    ires4 = np.int64(0)
    fres4 = np.float32(0.0)
    pc4 = np.int64(0)

    mem_busy = np.int64(0)
    if_busy = np.int64(0)
    pend_valid = False
    pend_idx = np.int64(0)
    pend_pc = np.int64(0)
    frozen = False

    cycle = np.int64(0)
    while cycle < max_cycles:
        cycle += 1
        # Start-of-cycle snapshots: the latch contents are what each stage
        # holds during this cycle; EX forwarding and the interlocks must see
        # these values, not the shifted ones.
        s1v = v1
        s1idx = idx1
        s2v = v2
        s2op = op2
        s3v = v3
        s3op = op3
        s3rd = rd3
        s3i = ires3
        s3f = fres3
        s4v = v4
        s4op = op4
        s4rd = rd4
        s4i = ires4
        s4f = fres4
        mem_busy_start = mem_busy
        if_busy_start = if_busy
        flush = False
        redirect = np.int64(0)
        lu_stall = False
        apr_stall = False
        if_pc_this = np.int64(TR_NONE)

        # ---------------- WB ----------------
        if v4:
            if op4 == OP_ILLEGAL:
                pc_out[0] = pc4
                counters[C_CYCLES] = cycle
                return ST_ILLEGAL
            counters[C_RETIRED] += 1
            counters[C_MNEM_BASE + op4] += 1
            if _is_memtype(op4):
                counters[C_MEMTYPE] += 1
            if op4 == OP_EBREAK:
                pc_out[0] = pc4
                counters[C_CYCLES] = cycle
                if trace_cap > 0 and cycle <= trace_cap:
                    scr_f[0] = apr[0]
                    row = cycle - 1
                    trace[row, 0] = cycle
                    trace[row, 1] = TR_NONE
                    trace[row, 2] = (p_op[s1idx] if s1idx >= 0 else OP_ILLEGAL) if s1v else TR_NONE
                    trace[row, 3] = s2op if s2v else TR_NONE
                    trace[row, 4] = s3op if s3v else TR_NONE
                    trace[row, 5] = s4op if s4v else TR_NONE
                    trace[row, 6] = STALL_NONE
                    trace[row, 7] = np.int64(scr_u[0])
                return ST_HALT
            if _writes_x(op4):
                if rd4 != 0:
                    x[rd4] = ires4
            elif _writes_f(op4):
                f[rd4] = fres4
            v4 = False

        # ---------------- MEM ----------------
        mem_vacated = not v3
        if v3:
            advance = False
            if mem_busy > 0:
                mem_busy -= 1
                if mem_busy == 0:
                    advance = True
            elif _is_memtype(op3):
                addr = ires3
                size = np.int64(4)
                if op3 == OP_LD or op3 == OP_SD:
                    size = np.int64(8)
                if addr < 0 or addr + size > mem_size:
                    pc_out[0] = pc3
                    counters[C_CYCLES] = cycle
                    return ST_OOB
                if (addr & (size - 1)) != 0:
                    pc_out[0] = pc3
                    counters[C_CYCLES] = cycle
                    return ST_MISALIGNED
                kind = K_STORE if _is_store(op3) else K_LOAD
                lat = cache_access(d_tags, d_age, d_dirty, d_stats, d_meta, mem_lat, addr, kind)
                if op3 == OP_LW:
                    v = _load_u32(mem, addr)
                    if v >= 0x80000000:
                        v -= 0x100000000
                    ires3 = v
                elif op3 == OP_LD:
                    ires3 = _load_i64(mem, addr)
                elif op3 == OP_FLW:
                    scr_u[0] = np.uint32(_load_u32(mem, addr))
                    fres3 = scr_f[0]
                elif op3 == OP_SW:
                    _store_u32(mem, addr, sdata3 & 0xFFFFFFFF)
                elif op3 == OP_SD:
                    _store_i64(mem, addr, sdata3)
                else:  # OP_FSW
                    scr_f[0] = fres3
                    _store_u32(mem, addr, np.int64(scr_u[0]))
                extra = lat - 1
                if extra > 0:
                    mem_busy = extra
                    counters[C_STALL_CACHE] += extra
                else:
                    advance = True
            elif op3 == OP_RFMAC_S:
                apr[0] = apr[0] + fres3  # rented slot: accumulate, no D access
                advance = True
            elif op3 == OP_RFSMAC_S:
                apr[0] = np.float32(0.0)  # APR input mux selects zero
                advance = True
            else:
                advance = True
            if advance:
                v4 = True
                op4 = op3
                rd4 = rd3
                ires4 = ires3
                fres4 = fres3
                pc4 = pc3
                v3 = False
                mem_vacated = True

        # ---------------- EX ----------------
        ex_vacated = not v2
        if v2 and mem_vacated:
            # Load-use: an operand whose producer is a load still in MEM.
            if s3v and _is_load(s3op):
                lrd = s3rd
                if s3op == OP_FLW:
                    if _needs_f_rs1(op2) and rs1_2 == lrd:
                        lu_stall = True
                    if _needs_f_rs2(op2) and rs2_2 == lrd:
                        lu_stall = True
                    if op2 == OP_FMAC_S and rd2 == lrd:
                        lu_stall = True
                elif lrd != 0:
                    if _needs_x_rs1(op2) and rs1_2 == lrd:
                        lu_stall = True
                    if _needs_x_rs2(op2) and rs2_2 == lrd:
                        lu_stall = True
            if lu_stall:
                counters[C_STALL_LOAD_USE] += 1
            else:
                o = op2
                nires = np.int64(0)
                nsdata = np.int64(0)
                nfres = np.float32(0.0)
                if o == OP_ADD:
                    nires = _fwd_x(rs1_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x) + _fwd_x(
                        rs2_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x
                    )
                elif o == OP_ADDI:
                    nires = _fwd_x(rs1_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x) + imm2
                elif o == OP_SLLI:
                    nires = _fwd_x(rs1_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x) << imm2
                elif o == OP_LUI:
                    nires = imm2
                elif o == OP_AUIPC:
                    nires = pc2 + imm2
                elif o == OP_JAL:
                    nires = pc2 + 4
                    flush = True
                    redirect = pc2 + imm2
                    counters[C_FLUSH_BRANCH] += 1
                elif _is_branch(o):
                    a = _fwd_x(rs1_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x)
                    b = _fwd_x(rs2_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x)
                    taken = False
                    if o == OP_BEQ:
                        taken = a == b
                    elif o == OP_BNE:
                        taken = a != b
                    elif o == OP_BLT:
                        taken = a < b
                    else:
                        taken = a >= b
                    if taken:
                        flush = True
                        redirect = pc2 + imm2
                        counters[C_FLUSH_BRANCH] += 1
                elif _is_memtype(o):
                    nires = _fwd_x(rs1_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x) + imm2
                    if o == OP_SW or o == OP_SD:
                        nsdata = _fwd_x(rs2_2, s3v, s3op, s3rd, s3i, s4v, s4op, s4rd, s4i, x)
                    elif o == OP_FSW:
                        nfres = _fwd_f(rs2_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                elif o == OP_FADD_S:
                    fa = _fwd_f(rs1_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    fb = _fwd_f(rs2_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    nfres = fa + fb
                elif o == OP_FMUL_S:
                    fa = _fwd_f(rs1_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    fb = _fwd_f(rs2_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    nfres = fa * fb
                elif o == OP_FMAC_S:
                    fa = _fwd_f(rs1_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    fb = _fwd_f(rs2_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    fc = _fwd_f(rd2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    prod = fa * fb
                    nfres = fc + prod
                elif o == OP_RFMAC_S:
                    fa = _fwd_f(rs1_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    fb = _fwd_f(rs2_2, s3v, s3op, s3rd, s3f, s4v, s4op, s4rd, s4f, f)
                    nfres = fa * fb  # product only; accumulation happens in R_EX
                elif o == OP_RFSMAC_S:
                    nfres = fval2
                # OP_EBREAK / OP_ILLEGAL carry nothing.
                v3 = True
                op3 = o
                rd3 = rd2
                ires3 = nires
                sdata3 = nsdata
                fres3 = nfres
                pc3 = pc2
                v2 = False
                ex_vacated = True

        # ---------------- ID ----------------
        id_vacated = not v1
        if flush:
            v1 = False
            id_vacated = True
        elif v1 and ex_vacated:
            o = p_op[idx1] if idx1 >= 0 else np.int64(OP_ILLEGAL)
            if o == OP_RFSMAC_S and (
                (s2v and (s2op == OP_RFMAC_S or s2op == OP_RFSMAC_S))
                or (s3v and (s3op == OP_RFMAC_S or s3op == OP_RFSMAC_S))
            ):
                apr_stall = True
                counters[C_STALL_APR] += 1
            else:
                v2 = True
                op2 = o
                if idx1 >= 0:
                    rd2 = p_rd[idx1]
                    rs1_2 = p_rs1[idx1]
                    rs2_2 = p_rs2[idx1]
                    imm2 = p_imm[idx1]
                else:
                    rd2 = np.int64(0)
                    rs1_2 = np.int64(0)
                    rs2_2 = np.int64(0)
                    imm2 = np.int64(0)
                pc2 = pc1
                if o == OP_RFSMAC_S:
                    fval2 = apr[0]  # ID-stage APR read
                if o == OP_EBREAK:
                    frozen = True  # stop fetching behind the halt
                v1 = False
                id_vacated = True

        # ---------------- IF ----------------
        if flush:
            pc = redirect
            if_busy = np.int64(0)
            pend_valid = False
            frozen = False
        else:
            if if_busy > 0:
                if_busy -= 1
            if if_busy == 0 and pend_valid and id_vacated:
                v1 = True
                idx1 = pend_idx
                pc1 = pend_pc
                pend_valid = False
            elif if_busy == 0 and not pend_valid and id_vacated and not frozen:
                if_pc_this = pc
                if pc < base or (pc & 3) != 0 or ((pc - base) >> 2) >= n_words:
                    # Fetch fault: poison entry, traps only if it retires.
                    v1 = True
                    idx1 = np.int64(-1)
                    pc1 = pc
                    pc += 4
                else:
                    widx = (pc - base) >> 2
                    lat = cache_access(i_tags, i_age, i_dirty, i_stats, i_meta, mem_lat, pc, K_IFETCH)
                    if lat <= i_hit_lat:
                        v1 = True
                        idx1 = widx
                        pc1 = pc
                        pc += 4
                    else:
                        extra = lat - i_hit_lat
                        if_busy = extra
                        counters[C_STALL_CACHE] += extra
                        pend_valid = True
                        pend_idx = widx
                        pend_pc = pc
                        pc += 4

        # ---------------- trace ----------------
        if trace_cap > 0 and cycle <= trace_cap:
            stall_code = STALL_NONE
            if flush:
                stall_code = STALL_FLUSH
            elif lu_stall:
                stall_code = STALL_LOAD_USE
            elif apr_stall:
                stall_code = STALL_APR
            elif mem_busy_start > 0 or mem_busy > 0:
                stall_code = STALL_DCACHE
            elif if_busy_start > 0 or if_busy > 0:
                stall_code = STALL_ICACHE
            scr_f[0] = apr[0]
            row = cycle - 1
            trace[row, 0] = cycle
            trace[row, 1] = if_pc_this
            trace[row, 2] = (p_op[s1idx] if s1idx >= 0 else OP_ILLEGAL) if s1v else TR_NONE
            trace[row, 3] = s2op if s2v else TR_NONE
            trace[row, 4] = s3op if s3v else TR_NONE
            trace[row, 5] = s4op if s4v else TR_NONE
            trace[row, 6] = stall_code
            trace[row, 7] = np.int64(scr_u[0])

    pc_out[0] = pc
    counters[C_CYCLES] = cycle
    return ST_MAX_CYCLES
