"""NumPy/SciPy fallback for the sampling-operator kernels.

Same contract as the compiled backend: all reductions accumulate in a fixed
order, so results are bit-reproducible.  A ``SamplingOps`` instance is not
safe for concurrent use (the scatter reuses one CSR buffer); parallel runs
each build their own instance.
"""

import numpy as np
import scipy.sparse as sp


class NumpySamplingOps:
    backend = "numpy"

    def __init__(self, I, J, n1, n2):
        self.I = np.ascontiguousarray(I, dtype=np.int64)
        self.J = np.ascontiguousarray(J, dtype=np.int64)
        self.n1, self.n2 = int(n1), int(n2)
        self.m = self.I.shape[0]
        lin = self.I * self.n2 + self.J
        uniq, inverse = np.unique(lin, return_inverse=True)
        self._inverse = inverse
        rows = (uniq // self.n2).astype(np.int64)
        cols = (uniq % self.n2).astype(np.int32)
        indptr = np.searchsorted(rows, np.arange(self.n1 + 1))
        self._pattern = sp.csr_matrix(
            (np.zeros(uniq.size), cols, indptr), shape=(self.n1, self.n2)
        )

    def gather_dot(self, A, B):
        return np.einsum("tj,tj->t", A[self.I], B[self.J])

    def gather_dot2(self, H, V, U, K):
        return np.einsum("tj,tj->t", H[self.I], V[self.J]) + np.einsum(
            "tj,tj->t", U[self.I], K[self.J]
        )

    def scatter_products(self, w, U, V):
        S = self._pattern
        S.data = np.bincount(self._inverse, weights=w, minlength=S.data.size)
        return S @ V, S.T @ U
