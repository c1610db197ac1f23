"""Propagation backend selection.

The compiled kernel is used when importable; set ``SRPSORT_PURE_PYTHON=1`` to
force the pure-Python fallback. Both return identical step sequences.
"""

import os

import numpy as np

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

REIMPACT = _pykernel.REIMPACT
ESCAPE = _pykernel.ESCAPE
TIMEOUT = _pykernel.TIMEOUT
FAILED = _pykernel.FAILED

_BACKENDS = {"python": _pykernel}
if _ckernel is not None:
    _BACKENDS["compiled"] = _ckernel

if os.environ.get("SRPSORT_PURE_PYTHON") or _ckernel is None:
    BACKEND = "python"
else:
    BACKEND = "compiled"


def available_backends():
    return sorted(_BACKENDS)


def propagate(y0, params, t_max, rtol, atol, r_escape, max_steps=2_000_000, sample_every=1,
              backend=None):
    """Run the kernel; samples and apsis events come back as (n, 7) arrays."""
    impl = _BACKENDS[backend or BACKEND]
    out = impl.propagate(
        [float(v) for v in y0], tuple(float(p) for p in params), float(t_max),
        float(rtol), float(atol), float(r_escape), int(max_steps), int(sample_every),
    )
    for key in ("samples", "peri", "apo"):
        out[key] = np.asarray(out[key], dtype=float).reshape(-1, 7)
    return out


def rhs(y, params, backend="python"):
    if backend == "compiled":
        return _BACKENDS["compiled"].eval_rhs([float(v) for v in y], tuple(float(p) for p in params))
    return _pykernel.rhs(list(y), tuple(params))


def reduced_jacobi(y, params):
    return _pykernel.reduced_jacobi(list(y), tuple(params))
