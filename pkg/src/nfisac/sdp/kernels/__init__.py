"""Hot kernels of the interior-point solver with backend selection at import.

The per-iteration bottleneck is assembling the Schur complement
H[i, j] = tr(A_i W^-1 A_j W^-1) over every PSD cone block.  A compiled
extension (``_native``, Cython) walks the sparse coefficient triplets
directly; the pure-numpy fallback contracts dense coefficient stacks with
BLAS.  Both produce identical results; ``benchmarks/bench_kernels.py``
compares them.

Set the environment variable ``NFISAC_KERNELS=numpy`` (or ``native``) to pin
a backend, or call :func:`set_backend` at runtime.
"""

import os

from . import numpy_backend

try:
    from . import _native

    HAVE_NATIVE = True
except ImportError:  # pragma: no cover - build dependent
    _native = None
    HAVE_NATIVE = False

_ACTIVE = "native" if HAVE_NATIVE else "numpy"
_env = os.environ.get("NFISAC_KERNELS")
if _env:
    if _env not in ("numpy", "native"):
        raise ValueError("NFISAC_KERNELS must be 'numpy' or 'native'")
    if _env == "native" and not HAVE_NATIVE:
        raise ImportError("native kernels requested but the extension is missing")
    _ACTIVE = _env


def backend_name() -> str:
    return _ACTIVE


def set_backend(name: str) -> None:
    global _ACTIVE
    if name not in ("numpy", "native"):
        raise ValueError("backend must be 'numpy' or 'native'")
    if name == "native" and not HAVE_NATIVE:
        raise ImportError("native kernel extension is not available")
    _ACTIVE = name


def schur_block(winv, block):
    """Dense (n_active, n_active) matrix with entries tr(A_i W^-1 A_j W^-1)."""
    if _ACTIVE == "native":
        return _native_schur(winv, block)
    return numpy_backend.schur_block(winv, block)


def block_apply(block, y):
    """sum_j y_j A_j as a dense (dim, dim) matrix."""
    if _ACTIVE == "native":
        return _native_apply(block, y)
    return numpy_backend.block_apply(block, y)


def block_adjoint_into(block, z, out):
    """out[j] += <A_j, Z> for every parameter j referenced by the block."""
    if _ACTIVE == "native":
        _native_adjoint(block, z, out)
    else:
        numpy_backend.block_adjoint_into(block, z, out)


def _native_schur(winv, block):
    import numpy as np

    na = block.uniq.size
    out = np.zeros((na, na))
    if na:
        _native.schur_block(
            np.ascontiguousarray(winv),
            block.ptr,
            block.srows,
            block.scols,
            block.svals,
            out,
        )
    return out


def _native_apply(block, y):
    import numpy as np

    out = np.zeros((block.dim, block.dim))
    if block.uniq.size:
        _native.apply_block(
            np.ascontiguousarray(np.asarray(y)[block.uniq]),
            block.ptr,
            block.srows,
            block.scols,
            block.svals,
            out,
        )
    return out


def _native_adjoint(block, z, out):
    import numpy as np

    if block.uniq.size:
        acc = np.zeros(block.uniq.size)
        _native.adjoint_block(
            np.ascontiguousarray(z),
            block.ptr,
            block.srows,
            block.scols,
            block.svals,
            acc,
        )
        out[block.uniq] += acc
