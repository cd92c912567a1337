"""Conditionally Neyman-orthogonal score functions and diagnostics.

Each score maps a dataset plus a nuisance bundle to a vector of
per-observation pseudo-outcomes g(O_i; eta).  Nuisance bundles are
dictionaries of vectorized callables of the covariate matrix; the same
keys are produced by cross-fitting and by the oracle constructors in
:mod:`gptest.dgp`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, SchemaError
from .dgp import Dataset

MEAN_EXCHANGEABILITY = "mean_exchangeability"
IV_COMPATIBILITY = "iv_compatibility"
PARAMETRIC_SPEC = "parametric_spec"
CONDITIONAL_COVARIANCE = "conditional_covariance"

SCORE_KINDS = (
    MEAN_EXCHANGEABILITY,
    IV_COMPATIBILITY,
    PARAMETRIC_SPEC,
    CONDITIONAL_COVARIANCE,
)


@dataclass
class ScoreSpec:
    """Which score to evaluate and how dataset columns map to its roles."""

    kind: str = MEAN_EXCHANGEABILITY
    arm: int = 0  # treatment arm a for the mean-exchangeability score
    covariates: tuple[str, ...] = ("X1", "X2")
    columns: dict[str, str] = field(default_factory=dict)
    clip_propensity: float = 0.01
    clip_denominator: float = 0.05
    nuisance_mode: str = "crossfit"  # "crossfit" or "oracle"
    oracle: dict | None = None

    _DEFAULT_COLUMNS = {
        "y": "Y", "a": "A", "s": "S", "d": "D",
        "z1": "Z1", "z2": "Z2", "z": "Z",
    }

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise InvalidInput(f"unknown score kind {self.kind!r}")
        if not (0.0 < self.clip_propensity < 0.5):
            raise InvalidInput("clip_propensity must lie in (0, 0.5)")
        if self.clip_denominator <= 0.0:
            raise InvalidInput("clip_denominator must be positive")
        if self.nuisance_mode not in ("crossfit", "oracle"):
            raise InvalidInput(f"unknown nuisance_mode {self.nuisance_mode!r}")
        if self.nuisance_mode == "oracle" and self.oracle is None:
            raise InvalidInput("oracle mode requires an oracle nuisance bundle")
        if self.arm not in (0, 1):
            raise InvalidInput("arm must be 0 or 1")

    def column(self, role: str) -> str:
        return self.columns.get(role, self._DEFAULT_COLUMNS[role])


def _clip_prob(p, clip):
    return np.clip(p, clip, 1.0 - clip)


def _clip_signed(x, floor):
    """Sign-preserving magnitude floor for IV compliance denominators."""
    sign = np.where(x >= 0.0, 1.0, -1.0)
    return sign * np.maximum(np.abs(x), floor)


def _need(bundle: dict, key: str):
    if key not in bundle:
        raise SchemaError(f"nuisance bundle is missing {key!r}")
    return bundle[key]


def g_mean_exchangeability(data: Dataset, bundle: dict, spec: ScoreSpec) -> np.ndarray:
    """AIPW contrast of the arm-a outcome mean across the two sources."""
    x = data.covariate_matrix(spec.covariates)
    y = data.col(spec.column("y"))
    a = data.col(spec.column("a"))
    s = data.col(spec.column("s"))
    cp = spec.clip_propensity
    pi1 = _clip_prob(_need(bundle, "pi_s1")(x), cp)
    pi0 = _clip_prob(_need(bundle, "pi_s0")(x), cp)
    mu1 = _need(bundle, "mu_s1")(x)
    mu0 = _need(bundle, "mu_s0")(x)
    in_arm = (a == spec.arm).astype(float)
    ind1 = in_arm * (s == 1.0)
    ind0 = in_arm * (s == 0.0)
    return ind1 / pi1 * (y - mu1) + mu1 - ind0 / pi0 * (y - mu0) - mu0


def g_iv_component(data: Dataset, bundle: dict, spec: ScoreSpec, j: int) -> np.ndarray:
    """Orthogonal score for the complier effect identified by instrument j."""
    if j not in (1, 2):
        raise InvalidInput("instrument index must be 1 or 2")
    x = data.covariate_matrix(spec.covariates)
    y = data.col(spec.column("y"))
    d = data.col(spec.column("d"))
    z = data.col(spec.column(f"z{j}"))
    cp = spec.clip_propensity
    pz = _clip_prob(_need(bundle, f"pz{j}")(x), cp)
    d1 = _need(bundle, f"mu_d{j}_1")(x)
    d0 = _need(bundle, f"mu_d{j}_0")(x)
    y1 = _need(bundle, f"mu_y{j}_1")(x)
    y0 = _need(bundle, f"mu_y{j}_0")(x)
    compliance = _clip_signed(d1 - d0, spec.clip_denominator)
    effect_num = y1 - y0
    aipw_y = z / pz * (y - y1) - (1.0 - z) / (1.0 - pz) * (y - y0)
    aipw_d = z / pz * (d - d1) - (1.0 - z) / (1.0 - pz) * (d - d0)
    return (
        aipw_y / compliance
        - effect_num / compliance ** 2 * aipw_d
        + effect_num / compliance
    )


def g_iv_compatibility(data: Dataset, bundle: dict, spec: ScoreSpec) -> np.ndarray:
    """Difference of the two instrument-specific complier-effect scores."""
    return g_iv_component(data, bundle, spec, 1) - g_iv_component(data, bundle, spec, 2)


def g_parametric_spec(data: Dataset, bundle: dict, spec: ScoreSpec) -> np.ndarray:
    """Orthogonalized residual for a linear-model specification test.

    The bundle carries ``h`` (the fitted mean), ``features`` (the linear
    feature map) and ``gram_inv`` (the inverse empirical feature Gram
    matrix driving the OLS influence adjustment).
    """
    x = data.covariate_matrix(spec.covariates)
    y = data.col(spec.column("y"))
    resid = y - _need(bundle, "h")(x)
    feats = _need(bundle, "features")(x)
    gram_inv = _need(bundle, "gram_inv")
    leverage = np.einsum("ij,jk,ik->i", feats, gram_inv, feats)
    return resid * (1.0 - leverage)


def g_conditional_covariance(data: Dataset, bundle: dict, spec: ScoreSpec) -> np.ndarray:
    """Product of the Y- and Z-residuals given X."""
    x = data.covariate_matrix(spec.covariates)
    y = data.col(spec.column("y"))
    z = data.col(spec.column("z"))
    return (y - _need(bundle, "mean_y")(x)) * (z - _need(bundle, "mean_z")(x))


def evaluate_score(data: Dataset, bundle: dict, spec: ScoreSpec) -> np.ndarray:
    """Dispatch to the score named by ``spec.kind``."""
    if spec.kind == MEAN_EXCHANGEABILITY:
        return g_mean_exchangeability(data, bundle, spec)
    if spec.kind == IV_COMPATIBILITY:
        return g_iv_compatibility(data, bundle, spec)
    if spec.kind == PARAMETRIC_SPEC:
        return g_parametric_spec(data, bundle, spec)
    return g_conditional_covariance(data, bundle, spec)


def combine_bundles(truth: dict, perturbation: dict, t: float) -> dict:
    """Pointwise convex combination (1-t) * truth + t * perturbation."""
    if set(truth) != set(perturbation):
        raise InvalidInput("bundles carry different nuisance keys")
    combined = {}
    for key in truth:
        f0, f1 = truth[key], perturbation[key]
        if callable(f0):
            combined[key] = (lambda a, b: lambda x: (1.0 - t) * a(x) + t * b(x))(f0, f1)
        else:
            combined[key] = (1.0 - t) * np.asarray(f0) + t * np.asarray(f1)
    return combined


def orthogonality_diagnostic(
    data: Dataset,
    spec: ScoreSpec,
    truth: dict,
    perturbation: dict,
    t_grid,
    weight=None,
    score_fn=None,
) -> np.ndarray:
    """Path D(t) = mean of g(O; (1-t) truth + t pert) * w(X) over the sample.

    Callers check first-order insensitivity by symmetric finite
    differences around t = 0 and the quadratic scaling of the curvature.
    ``score_fn`` defaults to the orthogonal score named by ``spec``; pass
    a different evaluator to probe non-orthogonal comparators.
    """
    if score_fn is None:
        score_fn = evaluate_score
    x = data.covariate_matrix(spec.covariates)
    w = np.ones(data.n) if weight is None else np.asarray(weight(x), dtype=float)
    out = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        bundle = combine_bundles(truth, perturbation, float(t))
        out[i] = float(np.mean(score_fn(data, bundle, spec) * w))
    return out
