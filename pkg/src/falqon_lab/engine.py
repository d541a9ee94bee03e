"""Exact statevector simulation of alternating cost-phase / driver-mixing layers.

States are flat numpy complex128 arrays of 2^n amplitudes, qubit i on bit i.
The cost operator is diagonal (see problem.DiagonalHamiltonian); the driver
is the negated sum of single-qubit bit flips. All operators are applied
matrix-free; dense matrices exist only in reference.py and in test oracles.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .problem import DEFAULT_MAX_QUBITS, DiagonalHamiltonian, ResourceLimitError


class DimensionError(ValueError):
    """State length does not match the operator dimension."""


@dataclass(frozen=True)
class FeedbackScalars:
    """The three commutator expectations measured on one state.

    a = <i[Hd, Hp]>, b = <[[Hd, Hp], Hd]>/2, c = <[[Hd, Hp], Hp]>.
    """

    a: float
    b: float
    c: float


# Relative imaginary residue allowed on Hermitian expectations.
RESIDUE_TOL = 1e-10


def _qubits_of(psi: np.ndarray) -> int:
    n = int(psi.shape[0]).bit_length() - 1
    if psi.ndim != 1 or (1 << n) != psi.shape[0]:
        raise DimensionError(f"state length {psi.shape} is not a power of two")
    return n


def _check_match(psi: np.ndarray, h: DiagonalHamiltonian) -> None:
    if psi.shape[0] != h.dim:
        raise DimensionError(f"state has {psi.shape[0]} amplitudes, operator needs {h.dim}")


def init_plus_state(n: int, max_qubits: int = DEFAULT_MAX_QUBITS) -> np.ndarray:
    """Uniform superposition |+>^n, the ground state of the driver."""
    if n < 1:
        raise DimensionError(f"need at least one qubit, got {n}")
    if n > max_qubits:
        raise ResourceLimitError(f"n={n} exceeds qubit limit {max_qubits}")
    return np.full(1 << n, 2.0 ** (-n / 2.0), dtype=np.complex128)


def up_phases(h: DiagonalHamiltonian, dt: float) -> np.ndarray:
    """Per-amplitude phases exp(-i*diag*dt) implementing the cost layer."""
    return np.exp(-1j * dt * h.diag)


def apply_up(psi: np.ndarray, h: DiagonalHamiltonian, dt: float) -> np.ndarray:
    """Cost layer: amp[z] *= exp(-i*diag[z]*dt). Returns a new array."""
    _check_match(psi, h)
    return psi * up_phases(h, dt)


def apply_ud(psi: np.ndarray, beta: float, dt: float) -> np.ndarray:
    """Driver layer exp(+i*beta*dt*X) on every qubit. Returns a new array."""
    n = _qubits_of(psi)
    out = np.array(psi, dtype=np.complex128, copy=True)
    _kernels.driver_rotate(out, beta * dt, n)
    return out


def apply_driver(psi: np.ndarray) -> np.ndarray:
    """Image of the state under the driver -sum_i X_i (not unitary)."""
    n = _qubits_of(psi)
    out = np.empty_like(psi, dtype=np.complex128)
    _kernels.driver_apply(np.ascontiguousarray(psi, dtype=np.complex128), out, n)
    return out


def energy(psi: np.ndarray, h: DiagonalHamiltonian) -> float:
    """<psi|Hp|psi> = sum_z diag[z] |amp[z]|^2."""
    _check_match(psi, h)
    return float(np.vdot(psi, h.diag * psi).real)


def measure(psi: np.ndarray, h: DiagonalHamiltonian) -> tuple[FeedbackScalars, float]:
    """Feedback scalars and energy of one state in a single fused pass."""
    _check_match(psi, h)
    n = _qubits_of(psi)
    flat = np.ascontiguousarray(psi, dtype=np.complex128)
    a, b, c, en, residue = _kernels.scalars_energy(flat, h.diag, n)
    if residue > RESIDUE_TOL:
        raise RuntimeError(f"Hermitian expectation acquired imaginary part (residue {residue:.3e})")
    if not (np.isfinite(a) and np.isfinite(b) and np.isfinite(c)):
        raise RuntimeError(f"non-finite feedback scalars ({a}, {b}, {c})")
    return FeedbackScalars(a=a, b=b, c=c), en


def feedback_scalars(psi: np.ndarray, h: DiagonalHamiltonian) -> FeedbackScalars:
    """The commutator expectations (a, b, c) of one state."""
    return measure(psi, h)[0]
