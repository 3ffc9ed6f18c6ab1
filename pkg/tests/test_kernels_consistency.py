"""The kernel module's integer op ids must mirror isa.Mnemonic exactly."""

from rpipe import kernels
from rpipe.isa import MEM_TYPE_MNEMONICS, Mnemonic


def test_op_ids_mirror_mnemonic_enum():
    for m in Mnemonic:
        const = "OP_" + m.name
        assert getattr(kernels, const) == int(m), const
    assert kernels.OP_ILLEGAL == len(Mnemonic)
    assert kernels.NUM_OPS == len(Mnemonic) + 1


def test_memtype_classifier_matches_isa_set():
    for m in Mnemonic:
        assert kernels._is_memtype(int(m)) == (m in MEM_TYPE_MNEMONICS)


def test_counter_layout_covers_all_ops():
    assert kernels.NUM_COUNTERS == kernels.C_MNEM_BASE + kernels.NUM_OPS
