"""Closed-form sensing receive filters via generalized Rayleigh-quotient maximization."""

from __future__ import annotations

import numpy as np

from .geometry import SPACES
from .metrics import SensingFilters, sensing_covariances

_PD_FLOOR = 1e-12
_ZERO_NUMERATOR = 1e-300


def build_quotient_matrices(d, channels, ris, tx, cfg):
    """(signal, noise) covariance pair whose Rayleigh quotient is the echo SINR."""
    return sensing_covariances(d, channels, ris, tx, cfg)


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a vector's free global phase so its largest entry is real positive."""
    i = int(np.argmax(np.abs(v)))
    if np.abs(v[i]) == 0.0:
        return v
    return v * np.exp(-1j * np.angle(v[i]))


def generalized_rayleigh_argmax(A: np.ndarray, B: np.ndarray, p: float = 1.0) -> np.ndarray:
    """Vector of norm p maximizing (x^H A x) / (x^H B x) for Hermitian A, B > 0.

    Solved through the Hermitian reduction B^{-1/2} A B^{-1/2}: its top
    eigenvector, mapped back by B^{-1/2}, is the quotient maximizer. The
    returned vector's free phase is pinned for reproducibility.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    b_eigs, b_vecs = np.linalg.eigh(B)
    if b_eigs.min() <= _PD_FLOOR * max(b_eigs.max(), 1.0):
        raise np.linalg.LinAlgError("denominator matrix is not positive definite")
    inv_sqrt = (b_vecs / np.sqrt(b_eigs)) @ b_vecs.conj().T
    reduced = inv_sqrt @ A @ inv_sqrt
    reduced = 0.5 * (reduced + reduced.conj().T)
    eigvals, eigvecs = np.linalg.eigh(reduced)
    top = inv_sqrt @ eigvecs[:, -1]
    return canonical_phase(p * top / np.linalg.norm(top))


def optimal_filters(channels, ris, tx, cfg) -> SensingFilters:
    """Per-space optimal receive filters at constant power p_sense.

    The two spaces decouple, so each filter is the top generalized eigenvector
    of its own (signal, noise) pair, scaled to norm sqrt(p_sense). A zero
    transmit design makes the quotient identically zero; the first canonical
    basis vector is returned and flagged degenerate.
    """
    out = {}
    degenerate = {}
    for d in SPACES:
        signal, noise = build_quotient_matrices(d, channels, ris, tx, cfg)
        scale = float(np.abs(signal).max(initial=0.0))
        if scale <= _ZERO_NUMERATOR:
            m = np.zeros(cfg.m_sense, dtype=complex)
            m[0] = np.sqrt(cfg.p_sense)
            degenerate[d] = True
        else:
            m = generalized_rayleigh_argmax(signal, noise, p=np.sqrt(cfg.p_sense))
            degenerate[d] = False
        out[d] = m
    return SensingFilters(m_r=out["r"], m_t=out["t"], degenerate=degenerate)
