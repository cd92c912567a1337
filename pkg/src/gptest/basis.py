"""Growing basis construction: orthonormal Legendre and Fourier families.

Both families are orthonormal under the uniform probability measure on
[-1, 1], i.e. (1/2) * integral of b_j * b_k over [-1, 1] equals
delta_jk.  Covariates on an arbitrary interval [lo, hi] are affinely
rescaled to [-1, 1] before evaluation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, OutOfRange, Unsupported

LEGENDRE = "legendre"
FOURIER = "fourier"
ADDITIVE = "additive"
TENSOR = "tensor"

_MAX_DEGREE = 64
_BOUNDARY_SLACK = 1e-9


@dataclass(frozen=True)
class BasisSpec:
    """Basis family, per-covariate count J*, and combination rule.

    ``ranges`` holds one (lo, hi) pair per covariate; covariates are
    rescaled from [lo, hi] to [-1, 1] before basis evaluation.  Total
    column count: additive -> 1 + d*(J*-1) (one shared constant);
    tensor -> (J*)^d.
    """

    family: str = LEGENDRE
    j_star: int = 3
    combination: str = ADDITIVE
    ranges: tuple[tuple[float, float], ...] = field(default=((-1.0, 1.0), (-1.0, 1.0)))

    def __post_init__(self):
        if self.family not in (LEGENDRE, FOURIER):
            raise InvalidInput(f"unknown basis family {self.family!r}")
        if self.combination not in (ADDITIVE, TENSOR):
            raise InvalidInput(f"unknown combination {self.combination!r}")
        if self.j_star < 1:
            raise InvalidInput("j_star must be >= 1")
        for lo, hi in self.ranges:
            if not lo < hi:
                raise InvalidInput(f"bad covariate range ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.ranges)

    @property
    def n_columns(self) -> int:
        if self.combination == ADDITIVE:
            return 1 + self.dim * (self.j_star - 1)
        return self.j_star ** self.dim


@dataclass(frozen=True)
class DesignMatrix:
    """Realized n x J basis evaluation matrix."""

    values: np.ndarray
    spec: BasisSpec

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]


def legendre_orthonormal(j: int, x):
    """Orthonormal Legendre polynomial p_j on [-1, 1].

    p_j = sqrt(2j + 1) * P_j with P_j the classical Legendre polynomial
    from the three-term recurrence; the scaling makes (1/2) * int p_j^2 = 1.
    """
    if j > _MAX_DEGREE:
        raise InvalidInput(f"degree {j} exceeds recurrence budget {_MAX_DEGREE}")
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    if j == 0:
        return np.ones_like(x)
    p_prev = np.ones_like(x)
    p_cur = x.copy()
    for k in range(1, j):
        p_prev, p_cur = p_cur, ((2 * k + 1) * x * p_cur - k * p_prev) / (k + 1)
    return np.sqrt(2.0 * j + 1.0) * p_cur


def fourier_basis(j: int, x):
    """Orthonormal Fourier element on [-1, 1].

    j=0 -> 1; j=2k-1 -> sqrt(2) cos(k pi x); j=2k -> sqrt(2) sin(k pi x).
    """
    x = np.clip(np.asarray(x, dtype=float), -1.0, 1.0)
    if j == 0:
        return np.ones_like(x)
    k = (j + 1) // 2
    if j % 2 == 1:
        return np.sqrt(2.0) * np.cos(k * np.pi * x)
    return np.sqrt(2.0) * np.sin(k * np.pi * x)


def _eval_1d(family: str, j: int, x):
    if family == LEGENDRE:
        return legendre_orthonormal(j, x)
    return fourier_basis(j, x)


def _rescale(x: np.ndarray, lo: float, hi: float, axis_idx: int) -> np.ndarray:
    z = 2.0 * (x - lo) / (hi - lo) - 1.0
    bad = np.abs(z) > 1.0 + _BOUNDARY_SLACK
    if np.any(bad):
        row = int(np.argmax(bad))
        raise OutOfRange(
            f"covariate {axis_idx} out of range at row {row}: value {x[row]!r}"
        )
    return np.clip(z, -1.0, 1.0)


def build_design(x_matrix, spec: BasisSpec) -> DesignMatrix:
    """Evaluate the basis over an n x d covariate matrix.

    Additive mode emits one shared constant column followed by the
    degree 1..J*-1 functions of each covariate in turn; tensor mode
    emits all products of per-covariate functions in lexicographic
    order of the degree tuple.
    """
    x_matrix = np.asarray(x_matrix, dtype=float)
    if x_matrix.ndim == 1:
        x_matrix = x_matrix[:, None]
    n, d = x_matrix.shape
    if n < 1 or d != spec.dim:
        raise InvalidInput(
            f"covariate matrix is {n}x{d}, spec declares {spec.dim} covariates"
        )
    z = np.column_stack(
        [
            _rescale(x_matrix[:, k], spec.ranges[k][0], spec.ranges[k][1], k)
            for k in range(d)
        ]
    )
    if spec.combination == ADDITIVE:
        cols = [np.ones(n)]
        for k in range(d):
            for j in range(1, spec.j_star):
                cols.append(_eval_1d(spec.family, j, z[:, k]))
    else:
        per_axis = [
            [_eval_1d(spec.family, j, z[:, k]) for j in range(spec.j_star)]
            for k in range(d)
        ]
        cols = [
            np.prod(np.stack([per_axis[k][jk] for k, jk in enumerate(degrees)]), axis=0)
            for degrees in itertools.product(range(spec.j_star), repeat=d)
        ]
    return DesignMatrix(values=np.column_stack(cols), spec=spec)


def basis_bound_diagnostics(spec: BasisSpec, grid_points: int = 1001):
    """Grid-search estimates of sup |b_j| and sup ||B_n(x)||_2.

    Reported for diagnostics only.  Tensor combination is limited to
    d <= 3 to keep the grid tractable; additive mode scans each axis
    coordinate-wise (the additive sup decomposes across axes).
    """
    grid = np.linspace(-1.0, 1.0, grid_points)
    if spec.combination == ADDITIVE:
        per_fn_sup = [1.0]
        sq_sum = np.zeros(grid_points)
        for j in range(1, spec.j_star):
            vals = _eval_1d(spec.family, j, grid)
            per_fn_sup.append(float(np.max(np.abs(vals))))
            sq_sum += vals ** 2
        xi_hat = max(per_fn_sup)
        omega_hat = float(np.sqrt(1.0 + spec.dim * np.max(sq_sum)))
        return xi_hat, omega_hat
    if spec.dim > 3:
        raise Unsupported("tensor-product grid diagnostics limited to d <= 3")
    axes = [grid] * spec.dim
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, spec.dim)
    unit_spec = BasisSpec(
        family=spec.family,
        j_star=spec.j_star,
        combination=spec.combination,
        ranges=tuple(((-1.0, 1.0),) * spec.dim),
    )
    design = build_design(mesh, unit_spec).values
    xi_hat = float(np.max(np.abs(design)))
    omega_hat = float(np.max(np.linalg.norm(design, axis=1)))
    return xi_hat, omega_hat
