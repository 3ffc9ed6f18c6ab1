import pathlib

import numpy as np
import pytest

from rpipe.asm import assemble
from rpipe.pipeline import MachineState, SimConfig, exec_functional, run

DATA_DIR = pathlib.Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


def run_src(src, data=None, init_state=None, base=0x1000, **cfg_kwargs):
    """Assemble and run on the timed engine; warm caches by default."""
    cfg_kwargs.setdefault("warm_icache", True)
    cfg = SimConfig(**cfg_kwargs)
    img = assemble(src, base=base)
    return run(img, data=data, config=cfg, init_state=init_state)


def func_src(src, data=None, init_state=None, base=0x1000):
    img = assemble(src, base=base)
    return exec_functional(img, data=data, init_state=init_state)


def fstate(**fregs):
    """MachineState with named FP/int registers preset (f14=..., x15=...)."""
    st = MachineState()
    for name, value in fregs.items():
        idx = int(name[1:])
        if name.startswith("f"):
            st.fregs[idx] = np.float32(value)
        elif name.startswith("x"):
            st.xregs[idx] = value
        else:
            raise ValueError(name)
    return st
