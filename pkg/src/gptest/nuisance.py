"""Built-in regression learners and K-fold cross-fitting.

The learner roster is deliberately small: ordinary least squares for
continuous targets and iteratively reweighted least squares logistic
regression for binary ones.  Cross-fitting trains every nuisance model a
score needs on the out-of-fold data and evaluates the pseudo-outcome on
the held-out fold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateLabels,
    InsufficientStratum,
    InvalidInput,
    SingularDesign,
)
from .dgp import Dataset, expit
from .numerics import RngStream
from . import scores as sc

_RIDGE_JITTER = 1e-10
_LOGIT_MAX_ITER = 100
_LOGIT_TOL = 1e-8
_LOGIT_COEF_CAP = 30.0


@dataclass
class LinearFit:
    """Fitted linear model; ``link`` is 'identity' or 'logit'."""

    coefficients: np.ndarray  # intercept first
    link: str = "identity"
    converged: bool = True

    def predict(self, features: np.ndarray) -> np.ndarray:
        eta = features @ self.coefficients
        return expit(eta) if self.link == "logit" else eta


@dataclass
class FoldAssignment:
    n: int
    K: int
    fold_of: np.ndarray


@dataclass
class CrossFitResult:
    pseudo_outcomes: np.ndarray
    folds: FoldAssignment | None
    per_fold_fits: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)


def _with_intercept(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(x.shape[0]), x])


def _solve_normal(gram: np.ndarray, moment: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(gram, moment)
    except np.linalg.LinAlgError:
        jittered = gram + _RIDGE_JITTER * np.eye(gram.shape[0])
        try:
            return np.linalg.solve(jittered, moment)
        except np.linalg.LinAlgError:
            raise SingularDesign("design matrix is rank deficient") from None


def fit_ols(features: np.ndarray, y: np.ndarray) -> LinearFit:
    """Least squares fit; near-singular designs get a 1e-10 ridge jitter."""
    features = np.asarray(features, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = features.shape
    if n <= p:
        raise SingularDesign(f"need n > p, got n={n}, p={p}")
    beta = _solve_normal(features.T @ features, features.T @ y)
    return LinearFit(coefficients=beta, link="identity")


def fit_logistic(features: np.ndarray, y: np.ndarray) -> LinearFit:
    """Logistic regression by iteratively reweighted least squares.

    Coefficients are capped at magnitude 30 as a separation guard; a fit
    that hits the cap or the iteration budget is returned with
    ``converged=False`` rather than raising.
    """
    features = np.asarray(features, dtype=float)
    y = np.asarray(y, dtype=float)
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateLabels("logistic fit needs both classes present")
    beta = np.zeros(features.shape[1])
    converged = False
    for _ in range(_LOGIT_MAX_ITER):
        p = expit(features @ beta)
        w = np.clip(p * (1.0 - p), 1e-10, None)
        gram = features.T @ (w[:, None] * features)
        grad = features.T @ (y - p)
        step = _solve_normal(gram, grad)
        beta = beta + step
        if np.max(np.abs(beta)) > _LOGIT_COEF_CAP:
            beta = np.clip(beta, -_LOGIT_COEF_CAP, _LOGIT_COEF_CAP)
            break
        if np.max(np.abs(step)) < _LOGIT_TOL:
            converged = True
            break
    return LinearFit(coefficients=beta, link="logit", converged=converged)


def make_folds(n: int, K: int, rng: RngStream) -> FoldAssignment:
    """Random permutation chunked into K near-equal folds."""
    if not (2 <= K <= n):
        raise InvalidInput(f"need 2 <= K <= n, got K={K}, n={n}")
    fold_of = np.empty(n, dtype=int)
    perm = rng.permutation(n)
    sizes = np.full(K, n // K)
    sizes[: n % K] += 1
    start = 0
    for k, size in enumerate(sizes):
        fold_of[perm[start : start + size]] = k
        start += size
    return FoldAssignment(n=n, K=K, fold_of=fold_of)


def _subset(data: Dataset, mask: np.ndarray) -> Dataset:
    return Dataset(
        columns={k: v[mask] for k, v in data.columns.items()},
        binary=data.binary,
        provenance=data.provenance,
    )


def _stratum_fit(features, y, mask, learner, fold: int, label: str):
    if np.sum(mask) < features.shape[1] + 1:
        raise InsufficientStratum(
            f"training data for fold {fold} has too few rows in stratum {label}"
        )
    try:
        return learner(features[mask], y[mask])
    except DegenerateLabels:
        raise InsufficientStratum(
            f"training data for fold {fold} is single-class in stratum {label}"
        ) from None


def _fit_bundle_me(train: Dataset, spec: sc.ScoreSpec, fold: int):
    x = train.covariate_matrix(spec.covariates)
    feats = _with_intercept(x)
    y = train.col(spec.column("y"))
    a = train.col(spec.column("a"))
    s = train.col(spec.column("s"))
    arm = float(spec.arm)
    s_model = _stratum_fit(feats, s, np.ones(len(s), bool), fit_logistic, fold, "S")
    fits = {"s_model": s_model}
    for sv in (0, 1):
        in_s = s == sv
        fits[f"a_model_s{sv}"] = _stratum_fit(feats, a, in_s, fit_logistic, fold, f"S={sv}")
        cell = in_s & (a == arm)
        outcome_learner = fit_logistic if spec.column("y") in train.binary else fit_ols
        fits[f"mu_s{sv}"] = _stratum_fit(feats, y, cell, outcome_learner, fold, f"(A={spec.arm},S={sv})")

    def make_pi(sv):
        def f(xq):
            fq = _with_intercept(xq)
            ps1 = fits["s_model"].predict(fq)
            ps = ps1 if sv == 1 else 1.0 - ps1
            pa1 = fits[f"a_model_s{sv}"].predict(fq)
            return ps * (pa1 if spec.arm == 1 else 1.0 - pa1)

        return f

    def make_mu(sv):
        return lambda xq: fits[f"mu_s{sv}"].predict(_with_intercept(xq))

    bundle = {
        "pi_s1": make_pi(1), "pi_s0": make_pi(0),
        "mu_s1": make_mu(1), "mu_s0": make_mu(0),
    }
    return bundle, fits


def _fit_bundle_iv(train: Dataset, spec: sc.ScoreSpec, fold: int):
    x = train.covariate_matrix(spec.covariates)
    feats = _with_intercept(x)
    y = train.col(spec.column("y"))
    d = train.col(spec.column("d"))
    fits = {}
    bundle = {}
    d_learner = fit_logistic if spec.column("d") in train.binary else fit_ols
    y_learner = fit_logistic if spec.column("y") in train.binary else fit_ols
    for j in (1, 2):
        z = train.col(spec.column(f"z{j}"))
        fits[f"pz{j}"] = _stratum_fit(feats, z, np.ones(len(z), bool), fit_logistic, fold, f"Z{j}")
        for zv in (0, 1):
            arm = z == zv
            fits[f"mu_d{j}_{zv}"] = _stratum_fit(feats, d, arm, d_learner, fold, f"Z{j}={zv}")
            fits[f"mu_y{j}_{zv}"] = _stratum_fit(feats, y, arm, y_learner, fold, f"Z{j}={zv}")
    for name, fit in fits.items():
        bundle[name] = (lambda f: lambda xq: f.predict(_with_intercept(xq)))(fit)
    return bundle, fits


def _fit_bundle_parametric(train: Dataset, spec: sc.ScoreSpec, fold: int):
    x = train.covariate_matrix(spec.covariates)
    feats = _with_intercept(x)
    y = train.col(spec.column("y"))
    fit = fit_ols(feats, y)
    gram = feats.T @ feats / feats.shape[0]
    gram_inv = np.linalg.inv(gram + _RIDGE_JITTER * np.eye(gram.shape[0]))
    bundle = {
        "h": lambda xq: fit.predict(_with_intercept(xq)),
        "features": _with_intercept,
        "gram_inv": gram_inv,
    }
    return bundle, {"h": fit}


def _fit_bundle_condcov(train: Dataset, spec: sc.ScoreSpec, fold: int):
    x = train.covariate_matrix(spec.covariates)
    feats = _with_intercept(x)
    fits = {}
    bundle = {}
    for key, role in (("mean_y", "y"), ("mean_z", "z")):
        target = train.col(spec.column(role))
        learner = fit_logistic if spec.column(role) in train.binary else fit_ols
        fits[key] = _stratum_fit(feats, target, np.ones(len(target), bool), learner, fold, role)
        bundle[key] = (lambda f: lambda xq: f.predict(_with_intercept(xq)))(fits[key])
    return bundle, fits


_BUNDLE_FITTERS = {
    sc.MEAN_EXCHANGEABILITY: _fit_bundle_me,
    sc.IV_COMPATIBILITY: _fit_bundle_iv,
    sc.PARAMETRIC_SPEC: _fit_bundle_parametric,
    sc.CONDITIONAL_COVARIANCE: _fit_bundle_condcov,
}


def crossfit(data: Dataset, spec: sc.ScoreSpec, K: int, rng: RngStream) -> CrossFitResult:
    """Out-of-fold pseudo-outcomes g(O_i; eta-hat) for the given score.

    In oracle mode the analytic bundle is evaluated directly and no
    models are fit.
    """
    if spec.nuisance_mode == "oracle":
        pseudo = sc.evaluate_score(data, spec.oracle, spec)
        return CrossFitResult(pseudo_outcomes=pseudo, folds=None)
    folds = make_folds(data.n, K, rng)
    fitter = _BUNDLE_FITTERS[spec.kind]
    pseudo = np.empty(data.n)
    per_fold_fits = []
    for k in range(K):
        hold = folds.fold_of == k
        bundle, fits = fitter(_subset(data, ~hold), spec, k)
        pseudo[hold] = sc.evaluate_score(_subset(data, hold), bundle, spec)
        per_fold_fits.append(fits)
    if not np.all(np.isfinite(pseudo)):
        raise InvalidInput("cross-fitting produced non-finite pseudo-outcomes")
    return CrossFitResult(
        pseudo_outcomes=pseudo,
        folds=folds,
        per_fold_fits=per_fold_fits,
        diagnostics={"K": K},
    )
