"""Two-dimensional Hermite basis truncated by total degree."""
from __future__ import annotations

import numpy as np


class HermiteBasis2D:
    """Products phi_{n1}(x1) phi_{n2}(x2) with n1 + n2 <= N.

    Flat indices run over total degree first, then n1 descending inside a
    degree band, so the first (k+1)(k+2)/2 entries span degrees <= k.
    """

    def __init__(self, N: int):
        if N < 0:
            raise ValueError("truncation degree must be non-negative")
        self.N = int(N)
        n1, n2 = [], []
        for deg in range(self.N + 1):
            for a in range(deg, -1, -1):
                n1.append(a)
                n2.append(deg - a)
        self.n1 = np.array(n1, dtype=np.int64)
        self.n2 = np.array(n2, dtype=np.int64)
        self.degree = self.n1 + self.n2
        self._index = -np.ones((self.N + 1, self.N + 1), dtype=np.int64)
        self._index[self.n1, self.n2] = np.arange(len(self.n1))

    @property
    def dimension(self) -> int:
        return len(self.n1)

    def __len__(self) -> int:
        return self.dimension

    def index(self, n1: int, n2: int) -> int:
        if n1 < 0 or n2 < 0 or n1 + n2 > self.N:
            raise IndexError(f"({n1}, {n2}) is outside the degree-{self.N} basis")
        return int(self._index[n1, n2])

    def indices(self, n1: np.ndarray, n2: np.ndarray) -> np.ndarray:
        """Vectorised index lookup; -1 where (n1, n2) is outside the basis."""
        n1 = np.asarray(n1)
        n2 = np.asarray(n2)
        ok = (n1 >= 0) & (n2 >= 0) & (n1 + n2 <= self.N)
        shape = np.broadcast(n1, n2).shape
        out = np.full(shape, -1, dtype=np.int64)
        out[ok] = self._index[np.broadcast_to(n1, shape)[ok], np.broadcast_to(n2, shape)[ok]]
        return out if shape else out[()]

    def energies(self) -> np.ndarray:
        """H0 eigenvalues n1 + n2 + 1."""
        return (self.degree + 1).astype(float)

    def __eq__(self, other) -> bool:
        return isinstance(other, HermiteBasis2D) and other.N == self.N

    def __hash__(self) -> int:
        return hash(("HermiteBasis2D", self.N))

    def __repr__(self) -> str:
        return f"HermiteBasis2D(N={self.N}, dimension={self.dimension})"
