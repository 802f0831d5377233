"""Triplet accumulator for affine slices over the real embedding of complex variables.

A complex vector z of length n occupies real indices [re_off, re_off+n) for its
real part and [im_off, im_off+n) for its imaginary part. The helpers append the
real rows of complex scalars a^H z (conjugated inner product) and of stacked
complex maps V z.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class RowBlock:
    """Rows of an affine slice F x + g collected as sparse triplets."""

    def __init__(self, n_vars: int):
        self.n_vars = n_vars
        self._r: list = []
        self._c: list = []
        self._v: list = []
        self._g: list = []

    @property
    def n_rows(self) -> int:
        return len(self._g)

    def const(self, value: float):
        """Row with no variable coefficients."""
        self._g.append(float(value))

    def var(self, index: int, coef: float = 1.0, const: float = 0.0):
        self.row([index], [coef], const)

    def row(self, cols, vals, const: float = 0.0):
        r = self.n_rows
        for c, v in zip(cols, vals):
            if v != 0.0:
                self._r.append(r)
                self._c.append(int(c))
                self._v.append(float(v))
        self._g.append(float(const))

    def dense_row(self, coefs: np.ndarray, const: float = 0.0):
        """Row over all variables from a dense coefficient vector."""
        nz = np.nonzero(coefs)[0]
        self.row(nz, coefs[nz], const)

    def complex_inner(self, a: np.ndarray, re_off: int, im_off: int,
                      scale: float = 1.0):
        """Two rows carrying Re and Im of scale * (a^H z)."""
        a = np.asarray(a, dtype=complex)
        idx = np.arange(len(a))
        self.row(np.concatenate([re_off + idx, im_off + idx]),
                 scale * np.concatenate([a.real, a.imag]))
        self.row(np.concatenate([re_off + idx, im_off + idx]),
                 scale * np.concatenate([-a.imag, a.real]))

    def complex_map(self, V: np.ndarray, re_off: int, im_off: int,
                    scale: float = 1.0):
        """2m rows carrying [Re(V z); Im(V z)] for a complex m x n map."""
        V = np.atleast_2d(np.asarray(V, dtype=complex))
        m, n = V.shape
        base = self.n_rows
        re_idx, im_idx = np.arange(n) + re_off, np.arange(n) + im_off
        for i in range(m):
            self.row(np.concatenate([re_idx, im_idx]),
                     scale * np.concatenate([V[i].real, -V[i].imag]))
        for i in range(m):
            self.row(np.concatenate([re_idx, im_idx]),
                     scale * np.concatenate([V[i].imag, V[i].real]))
        return base

    def build(self):
        F = sp.csr_matrix((self._v, (self._r, self._c)),
                          shape=(self.n_rows, self.n_vars))
        return F, np.asarray(self._g, dtype=float)


def linear_2re(coefs: np.ndarray, c: np.ndarray, re_off: int, im_off: int,
               scale: float = 1.0):
    """Accumulate scale * 2 Re{c^H z} into a dense objective/constraint row."""
    c = np.asarray(c, dtype=complex)
    idx = np.arange(len(c))
    coefs[re_off + idx] += 2.0 * scale * c.real
    coefs[im_off + idx] += 2.0 * scale * c.imag


def embed_complex(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex).ravel()
    return np.concatenate([z.real, z.imag])


def extract_complex(x: np.ndarray, re_off: int, n: int) -> np.ndarray:
    return x[re_off: re_off + n] + 1j * x[re_off + n: re_off + 2 * n]
