"""rpipe: cycle-accurate RV64 pipeline simulator with a MAC-accumulator extension.

Subpackages:
  isa        instruction subset, MASK/MATCH registry, encode/decode
  asm        two-pass assembler and disassembler, image file format
  memhier    L1 caches and flat main memory timing model
  pipeline   the 5-stage timed engine and the untimed functional executor
  kernelgen  convolution kernel generator, reference oracle, layer suites
  bench      benchmark orchestration and Table-style reports
"""

from .backend import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
