"""Numba inner loops for statevector updates and operator expectations.

Everything here works on flat complex128 arrays of length 2^n with qubit i
living on bit i of the index. These are the only hot paths in the package;
all callers go through engine.py.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def phase_multiply(psi, phases):
    for z in range(psi.shape[0]):
        psi[z] = psi[z] * phases[z]


@njit(cache=True)
def driver_rotate(psi, theta, n):
    """In-place product of single-qubit rotations cos(theta)*I + i*sin(theta)*X.

    The per-qubit factors commute, so the sequential sweep is exact.
    """
    c = np.cos(theta)
    s = np.sin(theta)
    for i in range(n):
        step = 1 << i
        block = step << 1
        for base in range(0, psi.shape[0], block):
            for z in range(base, base + step):
                x0 = psi[z]
                x1 = psi[z + step]
                psi[z] = c * x0 + 1j * s * x1
                psi[z + step] = c * x1 + 1j * s * x0


@njit(cache=True)
def driver_apply(psi, out, n):
    """out[z] = -sum_i psi[z ^ (1 << i)], i.e. the image under -sum_i X_i."""
    for z in range(psi.shape[0]):
        acc = 0.0j
        for i in range(n):
            acc += psi[z ^ (1 << i)]
        out[z] = -acc


@njit(cache=True)
def scalars_energy(psi, diag, n):
    """Fused expectations on one state.

    Returns (A, B, C, energy, residue) where, with a = Hd|psi>, b = Hp|psi>,
    d = Hd|b>, f = Hp|b>:
      A = -2 Im<a|b>,  B = <a|Hp|a> - Re<a|d>,  C = 2 Re<a|f> - 2 Re<b|d>,
      energy = <psi|Hp|psi>.
    Re<a|d> equals the double-driver form Re<Hd^2 psi|b> because Hd is
    Hermitian. residue is the relative imaginary part of <b|d>, which is an
    expectation of a Hermitian operator and must vanish.
    """
    big = psi.shape[0]
    ab = 0.0j
    ada = 0.0
    ad = 0.0j
    af = 0.0j
    bd = 0.0j
    en = 0.0
    for z in range(big):
        az = 0.0j
        dz = 0.0j
        for i in range(n):
            w = z ^ (1 << i)
            p = psi[w]
            az -= p
            dz -= diag[w] * p
        pz = psi[z]
        bz = diag[z] * pz
        ca = np.conj(az)
        ab += ca * bz
        ada += diag[z] * (az.real * az.real + az.imag * az.imag)
        ad += ca * dz
        af += ca * diag[z] * bz
        bd += np.conj(bz) * dz
        en += diag[z] * (pz.real * pz.real + pz.imag * pz.imag)
    a_val = -2.0 * ab.imag
    b_val = ada - ad.real
    c_val = 2.0 * af.real - 2.0 * bd.real
    residue = abs(bd.imag) / max(1.0, abs(bd))
    return a_val, b_val, c_val, en, residue


def warmup() -> None:
    """Force-compile all kernels (cheap after the first on-disk cache hit).

    Called before forking worker pools so children inherit compiled code.
    """
    psi = np.full(4, 0.5, dtype=np.complex128)
    diag = np.array([0.0, -1.0, -1.0, 0.0])
    phase_multiply(psi, np.exp(-1j * 0.1 * diag))
    driver_rotate(psi, 0.1, 2)
    out = np.empty_like(psi)
    driver_apply(psi, out, 2)
    scalars_energy(psi, diag, 2)
