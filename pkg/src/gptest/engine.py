"""Test statistics and calibration: the growing-basis projection tests
and the fixed-dimension Wald baseline.

The projection statistic is S = n * a' Omega a with a the empirical
projection of the pseudo-outcomes onto the basis.  Calibration is
either against a Monte Carlo weighted chi-square mixture (eigenvalues
of Sigma-hat) or by standardizing with the trace and Frobenius norm of
Sigma-hat and comparing to the upper normal tail.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSpec, DesignMatrix, build_design
from .errors import DegenerateScale, InvalidInput, NotPSD
from .dgp import Dataset
from .nuisance import crossfit, _with_intercept
from .numerics import RngStream, chi2_sf, normal_cdf, psd_sqrt, sym_eigen
from .scores import ScoreSpec

GP_STANDARDIZED = "gp_standardized"
GP_UNSTANDARDIZED = "gp_unstandardized"
WALD_PROJECTION = "wald"

METHODS = (GP_STANDARDIZED, GP_UNSTANDARDIZED, WALD_PROJECTION)


@dataclass
class TestConfig:
    alpha: float = 0.05
    weighting: np.ndarray | None = None  # None means identity
    mc_draws: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise InvalidInput("alpha must lie in (0, 1)")
        if self.mc_draws < 1:
            raise InvalidInput("mc_draws must be positive")


@dataclass
class TestResult:
    method: str
    statistic: float
    p_value: float
    reject: bool
    J: int
    tau_hat: np.ndarray | None = None
    rho_hat: float | None = None
    gamma_hat: float | None = None
    t_hat: float | None = None
    theta_ls: np.ndarray | None = None
    wald_df: int | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "reject": self.reject,
            "J": self.J,
        }
        if self.tau_hat is not None:
            out["tau_hat"] = [float(t) for t in self.tau_hat]
        for name in ("rho_hat", "gamma_hat", "t_hat", "wald_df"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val
        if self.theta_ls is not None:
            out["theta_ls"] = [float(t) for t in self.theta_ls]
        if self.diagnostics:
            out["diagnostics"] = self.diagnostics
        return out


def projection_vector(design: DesignMatrix, g: np.ndarray) -> np.ndarray:
    """a = (1/n) * sum_i B(X_i) g_i."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != design.n:
        raise InvalidInput(f"{design.n} design rows but {g.shape[0]} pseudo-outcomes")
    return design.values.T @ g / design.n


def _omega_or_identity(omega, J: int) -> np.ndarray:
    if omega is None:
        return np.eye(J)
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (J, J):
        raise InvalidInput(f"weighting matrix is {omega.shape}, expected ({J}, {J})")
    return omega


def statistic(a: np.ndarray, omega, n: int) -> float:
    """S = n * a' Omega a; validates PSD-ness of the weighting."""
    a = np.asarray(a, dtype=float)
    omega = _omega_or_identity(omega, a.shape[0])
    if sym_eigen(omega).values.min() < -1e-10 * max(1.0, np.linalg.norm(omega)):
        raise NotPSD("weighting matrix has a negative eigenvalue")
    return float(n * a @ omega @ a)


def sigma_hat(design: DesignMatrix, g: np.ndarray, omega=None) -> np.ndarray:
    """(1/n) sum_i g_i^2 (Omega^{1/2} B_i)(Omega^{1/2} B_i)'."""
    g = np.asarray(g, dtype=float)
    if g.shape[0] != design.n:
        raise InvalidInput(f"{design.n} design rows but {g.shape[0]} pseudo-outcomes")
    b = design.values
    if omega is not None:
        b = b @ psd_sqrt(_omega_or_identity(omega, design.J)).T
    weighted = b * g[:, None]
    return weighted.T @ weighted / design.n


def weighted_chisq_pvalue(taus, s: float, draws: int, rng: RngStream) -> float:
    """Monte Carlo upper-tail probability of sum_j tau_j chi2_j(1) at s."""
    taus = np.asarray(taus, dtype=float)
    if draws < 10_000:
        raise InvalidInput("need at least 1e4 Monte Carlo draws")
    if np.any(taus < -1e-10 * max(1.0, np.abs(taus).max())):
        raise InvalidInput("mixture weights must be nonnegative")
    taus = np.clip(taus, 0.0, None)
    if np.all(taus == 0.0):
        if s > 0:
            warnings.warn("all mixture weights are zero", RuntimeWarning)
            return 0.0
        return 1.0
    if s <= 0:
        return 1.0
    # Chunked so J * draws never allocates more than ~8e6 doubles.
    chunk = max(1, int(8e6 // max(1, len(taus))))
    exceed = 0
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        mix = rng.chisq1((m, len(taus))) @ taus
        exceed += int(np.sum(mix >= s))
        done += m
    return exceed / draws


def gp_test_unstandardized(design: DesignMatrix, g, config: TestConfig) -> TestResult:
    """Projection test calibrated against the weighted chi-square mixture."""
    a = projection_vector(design, g)
    s = statistic(a, config.weighting, design.n)
    sig = sigma_hat(design, g, config.weighting)
    taus = sym_eigen(sig).values
    rng = RngStream(config.seed)
    p = weighted_chisq_pvalue(taus, s, config.mc_draws, rng)
    return TestResult(
        method=GP_UNSTANDARDIZED,
        statistic=s,
        p_value=p,
        reject=p < config.alpha,
        J=design.J,
        tau_hat=taus,
    )


def gp_test_standardized(design: DesignMatrix, g, config: TestConfig) -> TestResult:
    """Projection test standardized by trace/Frobenius of Sigma-hat.

    T = (S - trace Sigma) / (sqrt(2) ||Sigma||_F); rejects one-sided when
    T exceeds the upper-alpha normal quantile.
    """
    a = projection_vector(design, g)
    s = statistic(a, config.weighting, design.n)
    sig = sigma_hat(design, g, config.weighting)
    rho = float(np.trace(sig))
    gamma = float(np.linalg.norm(sig))
    if gamma == 0.0:
        raise DegenerateScale("Sigma-hat is identically zero")
    t = (s - rho) / (np.sqrt(2.0) * gamma)
    p = float(1.0 - normal_cdf(t))
    return TestResult(
        method=GP_STANDARDIZED,
        statistic=s,
        p_value=p,
        reject=p < config.alpha,
        J=design.J,
        rho_hat=rho,
        gamma_hat=gamma,
        t_hat=t,
    )


def wald_projection_test(x_features, g, alpha: float = 0.05) -> TestResult:
    """Fixed-dimension Wald test with the Huber-White sandwich.

    The caller supplies the feature matrix (including any intercept); the
    statistic reduces to n * a' M^{-1} a with M the meat of the sandwich.
    """
    x_features = np.asarray(x_features, dtype=float)
    g = np.asarray(g, dtype=float)
    n, d = x_features.shape
    if n <= d:
        raise InvalidInput(f"need n > d, got n={n}, d={d}")
    gram = x_features.T @ x_features / n
    moment = x_features.T @ g / n
    jitter = _RIDGE * np.eye(d)
    theta = np.linalg.solve(gram + jitter, moment)
    resid = g - x_features @ theta
    meat = (x_features * resid[:, None] ** 2).T @ x_features / n
    w = float(n * moment @ np.linalg.solve(meat + jitter, moment))
    p = chi2_sf(w, d)
    return TestResult(
        method=WALD_PROJECTION,
        statistic=w,
        p_value=p,
        reject=p < alpha,
        J=d,
        theta_ls=theta,
        wald_df=d,
    )


_RIDGE = 1e-10


def run_gp_test(
    data: Dataset,
    score: ScoreSpec,
    basis_spec: BasisSpec,
    config: TestConfig,
    variant: str = GP_STANDARDIZED,
    K: int = 5,
    rng: RngStream | None = None,
) -> TestResult:
    """Cross-fit the score, build the design, and run the chosen variant."""
    if variant not in METHODS:
        raise InvalidInput(f"unknown test variant {variant!r}")
    if rng is None:
        rng = RngStream(config.seed)
    fit = crossfit(data, score, K, rng)
    g = fit.pseudo_outcomes
    x = data.covariate_matrix(score.covariates)
    if variant == WALD_PROJECTION:
        result = wald_projection_test(_with_intercept(x), g, alpha=config.alpha)
    else:
        design = build_design(x, basis_spec)
        if variant == GP_STANDARDIZED:
            result = gp_test_standardized(design, g, config)
        else:
            result = gp_test_unstandardized(design, g, config)
    result.diagnostics.update(fit.diagnostics)
    return result
