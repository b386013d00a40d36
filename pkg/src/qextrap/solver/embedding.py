"""Complex Hermitian matrices as real symmetric blocks of twice the order."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qextrap.solver.program import svec, svec_order


@dataclass(frozen=True)
class HermitianEmbedding:
    """Map ``X -> [[Re X, -Im X], [Im X, Re X]]`` for ``d x d`` matrices.

    The embedded matrix has each eigenvalue of ``X`` twice, so it is PSD iff
    ``X`` is. ``functional(C) @ svec(embed(X)) == tr(C X)``.
    """

    d: int

    def embed(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=complex)
        if X.shape != (self.d, self.d):
            raise ValueError(f"expected a {self.d}x{self.d} matrix")
        return np.block([[X.real, -X.imag], [X.imag, X.real]])

    def extract(self, Y: np.ndarray) -> np.ndarray:
        """Hermitian matrix represented by a real symmetric ``Y`` (any ``Y``)."""
        d = self.d
        return 0.5 * (Y[:d, :d] + Y[d:, d:]) + 0.5j * (Y[d:, :d] - Y[:d, d:])

    def functional(self, C: np.ndarray) -> np.ndarray:
        """Coefficients on the upper-triangle storage of ``Y`` giving ``tr(C X)``."""
        emb = self.embed(np.asarray(C, dtype=complex))
        iu, ju = svec_order(2 * self.d)
        vals = emb[iu, ju].copy()
        vals[iu == ju] *= 0.5
        return vals

    def svec(self, X: np.ndarray) -> np.ndarray:
        return svec(self.embed(X))


def embed_hermitian(d: int) -> HermitianEmbedding:
    if d < 1:
        raise ValueError("block size must be at least 1")
    return HermitianEmbedding(d)
