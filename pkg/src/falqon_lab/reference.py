"""Dense-matrix reference implementations for self-checks.

Deliberately the opposite of engine.py: operators are built as explicit
2^n x 2^n matrices and expectations come from matrix products, so agreement
with the matrix-free engine is a meaningful cross-check. Usable only for
small n.
"""
from __future__ import annotations

import numpy as np

from .engine import FeedbackScalars

_X = np.array([[0.0, 1.0], [1.0, 0.0]])


def dense_driver(n: int) -> np.ndarray:
    """-sum_i X_i as a dense matrix (qubit i on bit i of the index)."""
    dim = 1 << n
    hd = np.zeros((dim, dim))
    for i in range(n):
        m = np.array([[1.0]])
        for j in range(n):
            m = np.kron(_X if j == i else np.eye(2), m)
        hd -= m
    return hd


def dense_scalars(psi: np.ndarray, diag: np.ndarray) -> FeedbackScalars:
    """Commutator expectations via explicit matrix products."""
    hd = dense_driver(int(np.log2(diag.size) + 0.5))
    hp = np.diag(diag)
    k = hd @ hp - hp @ hd

    def expect(m: np.ndarray) -> float:
        val = np.vdot(psi, m @ psi)
        assert abs(val.imag) < 1e-9 * max(1.0, abs(val)), "Hermitian expectation not real"
        return float(val.real)

    a = expect(1j * k)
    b = expect(0.5 * (k @ hd - hd @ k))
    c = expect(k @ hp - hp @ k)
    return FeedbackScalars(a=a, b=b, c=c)
