"""Sampling-operator kernel backends.

The compiled Cython extension is preferred when present; otherwise the
NumPy/SciPy implementation takes over.  Both produce bit-identical results
for any thread count.
"""

import os

import numpy as np

from ._kernels_np import NumpySamplingOps

try:
    from . import _kernels as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_num_threads = min(os.cpu_count() or 1, 8)
# below this sample count the parallel regions cost more than they save
_PARALLEL_CUTOFF = 100_000


def have_compiled():
    return _compiled is not None


def backend_name():
    return "cython" if _compiled is not None else "numpy"


def set_num_threads(n):
    global _num_threads
    _num_threads = max(1, int(n))


def get_num_threads():
    return _num_threads


class CythonSamplingOps:
    backend = "cython"

    def __init__(self, I, J, n1, n2):
        if _compiled is None:
            raise RuntimeError("compiled kernels unavailable")
        self.I = np.ascontiguousarray(I, dtype=np.int64)
        self.J = np.ascontiguousarray(J, dtype=np.int64)
        self.n1, self.n2 = int(n1), int(n2)
        self.m = self.I.shape[0]
        # stable row/column segmentations for the deterministic adjoint scatter
        self._perm_r = np.argsort(self.I, kind="stable").astype(np.int64)
        self._indptr_r = np.searchsorted(self.I[self._perm_r], np.arange(self.n1 + 1)).astype(np.int64)
        self._perm_c = np.argsort(self.J, kind="stable").astype(np.int64)
        self._indptr_c = np.searchsorted(self.J[self._perm_c], np.arange(self.n2 + 1)).astype(np.int64)

    def _threads(self):
        return _num_threads if self.m >= _PARALLEL_CUTOFF else 1

    def gather_dot(self, A, B):
        out = np.empty(self.m)
        _compiled.pair_dot(np.ascontiguousarray(A), np.ascontiguousarray(B),
                           self.I, self.J, out, self._threads())
        return out

    def gather_dot2(self, H, V, U, K):
        out = np.empty(self.m)
        _compiled.pair_dot2(np.ascontiguousarray(H), np.ascontiguousarray(V),
                            np.ascontiguousarray(U), np.ascontiguousarray(K),
                            self.I, self.J, out, self._threads())
        return out

    def scatter_products(self, w, U, V):
        w = np.ascontiguousarray(w)
        r = U.shape[1]
        SV = np.zeros((self.n1, r))
        STU = np.zeros((self.n2, r))
        nt = self._threads()
        _compiled.scatter_segments(w, np.ascontiguousarray(V), self.J,
                                   self._perm_r, self._indptr_r, SV, nt)
        _compiled.scatter_segments(w, np.ascontiguousarray(U), self.I,
                                   self._perm_c, self._indptr_c, STU, nt)
        return SV, STU


def sampling_ops(I, J, n1, n2, backend=None):
    """Build the sampling-operator kernel set for index lists (I, J)."""
    if backend is None:
        backend = backend_name()
    if backend == "cython":
        return CythonSamplingOps(I, J, n1, n2)
    if backend == "numpy":
        return NumpySamplingOps(I, J, n1, n2)
    raise ValueError(f"unknown kernel backend {backend!r}")
