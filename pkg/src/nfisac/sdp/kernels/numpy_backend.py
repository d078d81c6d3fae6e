"""Pure-numpy kernel implementations.

Each cone block caches a dense (n_active, dim, dim) coefficient stack; the
Schur contribution is then two batched matmuls and one GEMM, all BLAS-backed.
"""

import numpy as np


def schur_block(winv, block):
    na = block.uniq.size
    if na == 0:
        return np.zeros((0, 0))
    st = block.stack()
    congr = np.matmul(winv, np.matmul(st, winv))
    flat = st.reshape(na, -1)
    return flat @ congr.reshape(na, -1).T


def block_apply(block, y):
    na = block.uniq.size
    if na == 0:
        return np.zeros((block.dim, block.dim))
    st = block.stack()
    yact = np.asarray(y)[block.uniq]
    return np.tensordot(yact, st, axes=1)


def block_adjoint_into(block, z, out):
    na = block.uniq.size
    if na == 0:
        return
    st = block.stack()
    out[block.uniq] += st.reshape(na, -1) @ np.asarray(z).reshape(-1)
