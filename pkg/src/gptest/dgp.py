"""Simulation data-generating processes and CSV interchange.

Panel A: two-source data fusion with a binary treatment, used for the
mean-exchangeability test.  Panel B: two binary instruments with five
principal strata, used for the compatibility test.  Both generators
ship analytic (oracle) nuisance functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig, SchemaError
from .numerics import RngStream

PANEL_A_COLUMNS = ("X1", "X2", "S", "A", "Y")
PANEL_A_BINARY = ("S", "A")
PANEL_B_COLUMNS = ("X1", "X2", "Z1", "Z2", "D", "Y")
PANEL_B_BINARY = ("Z1", "Z2", "D")

# Panel B principal strata, in the order used for membership sampling.
STRATA = ("ANT", "SCO1", "SCO2", "RCO", "ECO")


def expit(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


@dataclass
class Dataset:
    """Column-named observation matrix with declared binary columns."""

    columns: dict[str, np.ndarray]
    binary: tuple[str, ...] = ()
    provenance: str = ""

    def __post_init__(self):
        if not self.columns:
            raise SchemaError("dataset has no columns")
        lengths = {name: len(np.asarray(v)) for name, v in self.columns.items()}
        if len(set(lengths.values())) != 1:
            raise SchemaError(f"column lengths differ: {lengths}")
        for name in self.columns:
            arr = np.asarray(self.columns[name], dtype=float)
            if not np.all(np.isfinite(arr)):
                row = int(np.argmax(~np.isfinite(arr)))
                raise SchemaError(f"non-finite value in column {name!r} at row {row}")
            self.columns[name] = arr
        for name in self.binary:
            if name not in self.columns:
                raise SchemaError(f"declared binary column {name!r} is missing")
            vals = self.columns[name]
            bad = ~np.isin(vals, (0.0, 1.0))
            if np.any(bad):
                row = int(np.argmax(bad))
                raise SchemaError(
                    f"binary column {name!r} has value {vals[row]!r} at row {row}"
                )

    @property
    def n(self) -> int:
        return len(next(iter(self.columns.values())))

    def col(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise SchemaError(f"missing required column {name!r}")
        return self.columns[name]

    def covariate_matrix(self, names) -> np.ndarray:
        return np.column_stack([self.col(name) for name in names])


@dataclass(frozen=True)
class PanelAConfig:
    n: int
    alpha1: float = 0.0
    alpha2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig("sample size must be >= 1")


@dataclass(frozen=True)
class PanelBConfig:
    n: int
    beta1: float = 0.0
    beta2: float = 0.0
    seed: int = 0
    u_param: str = "var"  # second parameter of U's normal law: "var" or "sd"

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig("sample size must be >= 1")
        if self.u_param not in ("var", "sd"):
            raise InvalidConfig("u_param must be 'var' or 'sd'")


def _panel_a_outcome_mean(x1, x2, s, a, alpha1, alpha2):
    """E[Y | A=a, S=s, X]; misalignment terms enter only in the S=1 source."""
    base = x1 + x2 + expit(x1)
    shift = s * (alpha1 * (np.cos(np.pi * x1) + np.cos(np.pi * x2)) + alpha2 * (x1 + x2))
    return base + shift + a * (2.0 * x1 - 2.0 * x2)


def gen_panel_a(cfg: PanelAConfig) -> Dataset:
    """Two-source data fusion sample: columns (X1, X2, S, A, Y)."""
    rng = RngStream(cfg.seed)
    x1 = 2.0 * rng.uniform(cfg.n) - 1.0
    x2 = 2.0 * rng.uniform(cfg.n) - 1.0
    s = (rng.uniform(cfg.n) < expit(x1 - x2)).astype(float)
    p_a1 = s * expit(1.5 * x1 - 0.5 * x2) + (1.0 - s) * expit(x1 + 0.5 * x2)
    a = (rng.uniform(cfg.n) < p_a1).astype(float)
    eps = rng.normal(cfg.n)
    y0 = _panel_a_outcome_mean(x1, x2, s, 0.0, cfg.alpha1, cfg.alpha2) + 0.5 * eps
    y1 = y0 + 2.0 * x1 - 2.0 * x2
    y = a * y1 + (1.0 - a) * y0
    return Dataset(
        columns={"X1": x1, "X2": x2, "S": s, "A": a, "Y": y},
        binary=PANEL_A_BINARY,
        provenance=f"panel_a(n={cfg.n}, alpha=({cfg.alpha1},{cfg.alpha2}), seed={cfg.seed})",
    )


def oracle_nuisances_panel_a(cfg: PanelAConfig, a: int = 0) -> dict:
    """Analytic nuisance functions for Panel A, arm ``a``.

    Keys: pi_s1/pi_s0 = P(A=a, S=s | X); mu_s1/mu_s0 = E[Y | A=a, S=s, X].
    Each maps an n x 2 covariate matrix to an n-vector.
    """
    a1, a2 = cfg.alpha1, cfg.alpha2

    def pi(s):
        def f(x):
            x1, x2 = x[:, 0], x[:, 1]
            ps1 = expit(x1 - x2)
            pa1 = expit(1.5 * x1 - 0.5 * x2) if s == 1 else expit(x1 + 0.5 * x2)
            ps = ps1 if s == 1 else 1.0 - ps1
            return ps * (pa1 if a == 1 else 1.0 - pa1)

        return f

    def mu(s):
        def f(x):
            return _panel_a_outcome_mean(x[:, 0], x[:, 1], float(s), float(a), a1, a2)

        return f

    return {"pi_s1": pi(1), "pi_s0": pi(0), "mu_s1": mu(1), "mu_s0": mu(0)}


def _stratum_probs(x1, x2):
    """P(S = j | X) for the five Panel B strata (n x 5).

    The 0.3 * 1{U > 0} term is common to all five stratum weights and
    cancels in the softmax, so membership is independent of U given X.
    """
    xs1 = (x1 > 0).astype(float)
    xs2 = (x2 > 0).astype(float)
    logw = np.column_stack(
        [
            1.0 - xs2,                      # ANT
            3.5 + 0.5 * xs1 + xs2,          # SCO1
            3.5 + 0.5 * xs1 + xs2,          # SCO2
            2.0 + xs1 + xs2,                # RCO
            2.0 + xs1 + xs2,                # ECO
        ]
    )
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    return w / w.sum(axis=1, keepdims=True)


def _treatment_from_stratum(z1, z2, stratum):
    """Treatment uptake D determined by (Z1, Z2) and stratum membership."""
    d = np.zeros_like(z1)
    d = np.where(stratum == 1, z1, d)                # SCO1: D = Z1
    d = np.where(stratum == 2, z2, d)                # SCO2: D = Z2
    d = np.where(stratum == 3, z1 * z2, d)           # RCO: D = Z1 * Z2
    d = np.where(stratum == 4, np.maximum(z1, z2), d)  # ECO: D = max(Z1, Z2)
    return d


def _sco2_effect(x1, x2, beta1, beta2):
    """Treatment effect in the SCO2 stratum; other complier strata get -2*X1."""
    return (
        -2.0 * x1
        + beta1 * (np.cos(np.pi * x1) + np.cos(np.pi * x2))
        + beta2 * (x1 + x2)
    )


def _u_sd(cfg: PanelBConfig) -> float:
    return np.sqrt(0.3) if cfg.u_param == "var" else 0.3


def gen_panel_b(cfg: PanelBConfig) -> Dataset:
    """Two-instrument principal-strata sample: columns (X1, X2, Z1, Z2, D, Y)."""
    rng = RngStream(cfg.seed)
    n = cfg.n
    x1 = 2.0 * rng.uniform(n) - 1.0
    x2 = 2.0 * rng.uniform(n) - 1.0
    z1 = (rng.uniform(n) < expit(0.5 + 0.5 * x1 + 0.5 * x2)).astype(float)
    z2 = (rng.uniform(n) < expit(0.5 + 0.5 * x1 - 0.5 * x2)).astype(float)
    u = -0.3 + _u_sd(cfg) * rng.normal(n)
    probs = _stratum_probs(x1, x2)
    draws = rng.uniform(n)
    stratum = (draws[:, None] >= np.cumsum(probs, axis=1)).sum(axis=1)
    d = _treatment_from_stratum(z1, z2, stratum)
    eps = rng.normal(n)
    y0 = 1.0 + x1 + x2 + u + eps
    effect = np.where(
        stratum == 0,
        0.0,
        np.where(stratum == 2, _sco2_effect(x1, x2, cfg.beta1, cfg.beta2), -2.0 * x1),
    )
    y = d * (y0 + effect) + (1.0 - d) * y0
    return Dataset(
        columns={"X1": x1, "X2": x2, "Z1": z1, "Z2": z2, "D": d, "Y": y},
        binary=PANEL_B_BINARY,
        provenance=f"panel_b(n={cfg.n}, beta=({cfg.beta1},{cfg.beta2}), seed={cfg.seed})",
    )


def oracle_nuisances_panel_b(cfg: PanelBConfig) -> dict:
    """Analytic nuisance functions for Panel B.

    All conditional means are closed-form: stratum membership is
    independent of U given X (common U-term cancels in the softmax), and
    E[U] = -0.3.  Keys per instrument j in {1, 2}: pz{j} = P(Z_j=1 | X),
    mu_d{j}_{z} = E[D | Z_j=z, X], mu_y{j}_{z} = E[Y | Z_j=z, X].
    """
    b1, b2 = cfg.beta1, cfg.beta2

    def pz(j):
        sign = 1.0 if j == 1 else -1.0

        def f(x):
            return expit(0.5 + 0.5 * x[:, 0] + sign * 0.5 * x[:, 1])

        return f

    def _pieces(x, j, z):
        """Per-stratum E[D | Z_j=z, S, X] for the compliance strata."""
        x1, x2 = x[:, 0], x[:, 1]
        probs = _stratum_probs(x1, x2)
        other = pz(2 if j == 1 else 1)(x)
        own_sco = probs[:, 1] if j == 1 else probs[:, 2]     # own strict compliers
        cross_sco = probs[:, 2] if j == 1 else probs[:, 1]   # other instrument's
        d_own = float(z)
        d_cross = other
        d_rco = float(z) * other
        d_eco = float(z) + (1.0 - float(z)) * other
        return probs, own_sco, cross_sco, d_own, d_cross, d_rco, d_eco

    def mu_d(j, z):
        def f(x):
            probs, own_sco, cross_sco, d_own, d_cross, d_rco, d_eco = _pieces(x, j, z)
            return own_sco * d_own + cross_sco * d_cross + probs[:, 3] * d_rco + probs[:, 4] * d_eco

        return f

    def mu_y(j, z):
        def f(x):
            x1, x2 = x[:, 0], x[:, 1]
            probs, own_sco, cross_sco, d_own, d_cross, d_rco, d_eco = _pieces(x, j, z)
            base = 1.0 + x1 + x2 - 0.3
            eff_lin = -2.0 * x1
            eff_sco2 = _sco2_effect(x1, x2, b1, b2)
            if j == 1:
                lift = (
                    (own_sco * d_own + probs[:, 3] * d_rco + probs[:, 4] * d_eco) * eff_lin
                    + cross_sco * d_cross * eff_sco2
                )
            else:
                lift = (
                    (cross_sco * d_cross + probs[:, 3] * d_rco + probs[:, 4] * d_eco) * eff_lin
                    + own_sco * d_own * eff_sco2
                )
            return base + lift

        return f

    bundle = {}
    for j in (1, 2):
        bundle[f"pz{j}"] = pz(j)
        for z in (0, 1):
            bundle[f"mu_d{j}_{z}"] = mu_d(j, z)
            bundle[f"mu_y{j}_{z}"] = mu_y(j, z)
    return bundle


def write_csv(data: Dataset, path: str) -> None:
    """Write a dataset as CSV with 17-significant-digit decimals."""
    names = list(data.columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        mat = np.column_stack([data.columns[name] for name in names])
        for row in mat:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_csv(path: str, binary: tuple[str, ...] = (), required: tuple[str, ...] = ()) -> Dataset:
    """Read a strictly numeric CSV with a header row into a Dataset."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [line.rstrip("\n") for line in fh if line.strip() != ""]
    except OSError as exc:
        raise SchemaError(f"cannot read {path!r}: {exc}") from None
    if not lines:
        raise SchemaError(f"empty input file {path!r}")
    names = [name.strip() for name in lines[0].split(",")]
    for name in required:
        if name not in names:
            raise SchemaError(f"missing required column {name!r} in {path!r}")
    cols = {name: [] for name in names}
    for r, line in enumerate(lines[1:], start=1):
        cells = line.split(",")
        if len(cells) != len(names):
            raise SchemaError(f"row {r} has {len(cells)} cells, expected {len(names)}")
        for name, cell in zip(names, cells):
            try:
                cols[name].append(float(cell))
            except ValueError:
                raise SchemaError(
                    f"non-numeric cell {cell!r} at row {r}, column {name!r}"
                ) from None
    arrays = {name: np.asarray(vals, dtype=float) for name, vals in cols.items()}
    present_binary = tuple(name for name in binary if name in arrays)
    return Dataset(columns=arrays, binary=present_binary, provenance=f"csv:{path}")
