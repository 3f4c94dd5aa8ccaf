"""Kernel backend selection.

The hot causal-convolution kernels exist twice: a compiled Cython module
(reprogait._ckernels) and a pure numpy fallback (reprogait.kernels_py).
The compiled one is preferred when importable; set REPROGAIT_KERNELS to
"py" or "c" to force a choice (forcing "c" fails loudly when the
extension was not built).  benchmarks/bench_kernels.py compares the two.
"""

import os

from . import kernels_py

_FORCED = os.environ.get("REPROGAIT_KERNELS", "auto").lower()

try:
    from . import _ckernels
except ImportError:
    _ckernels = None

if _FORCED == "py":
    _active, _name = kernels_py, "python"
elif _FORCED == "c":
    if _ckernels is None:
        raise ImportError(
            "REPROGAIT_KERNELS=c but the compiled kernels are not built; "
            "reinstall with a working C toolchain or unset the variable"
        )
    _active, _name = _ckernels, "cython"
elif _ckernels is not None:
    _active, _name = _ckernels, "cython"
else:
    _active, _name = kernels_py, "python"

conv1d_forward = _active.conv1d_forward
conv1d_backward = _active.conv1d_backward


def backend_name():
    """Name of the active kernel backend: "cython" or "python"."""
    return _name


def available_backends():
    """Mapping of backend name -> kernel module, for parity tests/benchmarks."""
    out = {"python": kernels_py}
    if _ckernels is not None:
        out["cython"] = _ckernels
    return out
