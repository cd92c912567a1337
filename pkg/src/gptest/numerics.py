"""Linear-algebra, random-number, and quadrature primitives.

Everything here is deterministic given its inputs (and, for random
streams, the seed).  Dense symmetric problems in this package are small
(J up to a few dozen), so the numpy/scipy routines are used directly
behind the contracts below.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import InvalidInput, NotPSD

# Odd 64-bit constant used to derive child stream seeds (splitmix64 increment).
_STREAM_SALT = 0x9E3779B97F4A7C15


def _as_sym(a) -> np.ndarray:
    """Validate and symmetrize a square matrix: returns (A + A.T) / 2."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise InvalidInput(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput("matrix has non-finite entries")
    return (a + a.T) / 2.0


@dataclass(frozen=True)
class EigenDecomposition:
    """Spectral decomposition A = V diag(values) V^T.

    ``values`` is sorted in descending order; columns of ``vectors`` are
    the matching orthonormal eigenvectors.
    """

    values: np.ndarray
    vectors: np.ndarray


def sym_eigen(a) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    a = _as_sym(a)
    vals, vecs = np.linalg.eigh(a)
    order = np.argsort(vals)[::-1]
    return EigenDecomposition(values=vals[order], vectors=vecs[:, order])


def psd_sqrt(a) -> np.ndarray:
    """Square root M of a PSD matrix with M^T M = A.

    Convention: M = diag(sqrt(lambda)) V^T, i.e. the rows of M are the
    eigenvectors scaled by the root eigenvalues.  Eigenvalues that are
    negative by no more than 1e-10 * ||A|| are treated as rounding noise
    and clipped to zero; anything more negative raises NotPSD.
    """
    a = _as_sym(a)
    dec = sym_eigen(a)
    tol = 1e-10 * max(1.0, float(np.linalg.norm(a)))
    if dec.values.min() < -tol:
        raise NotPSD(f"eigenvalue {dec.values.min():.3e} below -{tol:.3e}")
    vals = np.clip(dec.values, 0.0, None)
    return np.sqrt(vals)[:, None] * dec.vectors.T


def frob_and_trace(a) -> tuple[float, float]:
    """Return (trace, Frobenius norm) of a symmetric matrix."""
    a = _as_sym(a)
    return float(np.trace(a)), float(np.linalg.norm(a))


class RngStream:
    """Seeded random stream; identical seeds reproduce identical draws.

    Thin wrapper over numpy's PCG64 generator.  Normal draws use numpy's
    ziggurat algorithm, which is fixed for a given numpy version, so all
    sequences are bit-reproducible within one build.  A stream is
    single-owner; use :meth:`spawn` to derive independent child streams
    for parallel work.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def chisq1(self, size=None):
        return np.square(self._gen.standard_normal(size))

    def integers(self, low, high, size=None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def spawn(self, index: int) -> "RngStream":
        """Derive a child stream; deterministic in (seed, index)."""
        mixed = (self.seed ^ ((index + 1) * _STREAM_SALT)) & 0xFFFFFFFFFFFFFFFF
        return RngStream(mixed)


def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    """m-point Gauss-Legendre nodes and weights on [-1, 1]."""
    if not (1 <= m <= 64):
        raise InvalidInput(f"quadrature order {m} outside [1, 64]")
    nodes, weights = np.polynomial.legendre.leggauss(m)
    return nodes, weights


def normal_cdf(x):
    """Standard normal CDF via erfc (accurate to machine precision)."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * np.vectorize(math.erfc)(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def chi2_sf(x: float, df: int) -> float:
    """Upper tail of chi-square(df) via the regularized incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))
