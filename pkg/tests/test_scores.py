import numpy as np
import pytest

from gptest.basis import legendre_orthonormal
from gptest.dgp import (
    Dataset,
    PanelAConfig,
    PanelBConfig,
    expit,
    gen_panel_a,
    gen_panel_b,
    oracle_nuisances_panel_a,
    oracle_nuisances_panel_b,
)
from gptest.errors import InvalidInput
from gptest.scores import (
    ScoreSpec,
    g_conditional_covariance,
    g_iv_compatibility,
    g_iv_component,
    g_mean_exchangeability,
    g_parametric_spec,
    orthogonality_diagnostic,
)


def logit(p):
    return np.log(p / (1.0 - p))


def const_fn(c):
    return lambda x: np.full(x.shape[0], float(c))


class TestSpecValidation:
    def test_bad_kind(self):
        with pytest.raises(InvalidInput):
            ScoreSpec(kind="nope")

    def test_bad_clip(self):
        with pytest.raises(InvalidInput):
            ScoreSpec(clip_propensity=0.7)

    def test_oracle_mode_needs_bundle(self):
        with pytest.raises(InvalidInput):
            ScoreSpec(nuisance_mode="oracle")


class TestMeanExchangeability:
    def test_constant_world_vanishes(self):
        n = 40
        rng = np.random.default_rng(0)
        data = Dataset(
            columns={
                "X1": rng.uniform(-1, 1, n),
                "X2": rng.uniform(-1, 1, n),
                "S": (rng.random(n) < 0.5).astype(float),
                "A": (rng.random(n) < 0.5).astype(float),
                "Y": np.full(n, 2.5),
            },
            binary=("S", "A"),
        )
        bundle = {
            "pi_s1": const_fn(0.25), "pi_s0": const_fn(0.25),
            "mu_s1": const_fn(2.5), "mu_s0": const_fn(2.5),
        }
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        assert np.allclose(g_mean_exchangeability(data, bundle, spec), 0.0)

    def test_off_arm_reduces_to_mu_difference(self):
        data = Dataset(
            columns={
                "X1": np.array([0.1]), "X2": np.array([0.2]),
                "S": np.array([1.0]), "A": np.array([1.0]),
                "Y": np.array([9.0]),
            },
            binary=("S", "A"),
        )
        bundle = {
            "pi_s1": const_fn(0.3), "pi_s0": const_fn(0.3),
            "mu_s1": const_fn(4.0), "mu_s0": const_fn(1.5),
        }
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        assert g_mean_exchangeability(data, bundle, spec)[0] == pytest.approx(2.5)

    def test_null_oracle_mean_near_zero(self):
        cfg = PanelAConfig(n=100_000, seed=30)
        data = gen_panel_a(cfg)
        nb = oracle_nuisances_panel_a(cfg, a=0)
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        g = g_mean_exchangeability(data, nb, spec)
        assert abs(g.mean()) < 3.0 * g.std() / np.sqrt(len(g))

    def test_null_oracle_basis_moments_near_zero(self):
        cfg = PanelAConfig(n=100_000, seed=31)
        data = gen_panel_a(cfg)
        nb = oracle_nuisances_panel_a(cfg, a=0)
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        g = g_mean_exchangeability(data, nb, spec)
        x = data.covariate_matrix(("X1", "X2"))
        for j in range(10):
            b = legendre_orthonormal(j % 5, x[:, j // 5])
            gb = g * b
            assert abs(gb.mean()) < 4.0 * gb.std() / np.sqrt(len(gb)), j

    def test_clipping_keeps_outputs_finite(self):
        cfg = PanelAConfig(n=5000, seed=32)
        data = gen_panel_a(cfg)
        nb = dict(oracle_nuisances_panel_a(cfg, a=0))
        nb["pi_s1"] = const_fn(1e-9)  # degenerate propensity, clip must save it
        for clip in (0.01, 0.05, 0.2):
            spec = ScoreSpec(kind="mean_exchangeability", arm=0, clip_propensity=clip)
            assert np.all(np.isfinite(g_mean_exchangeability(data, nb, spec)))


class TestIvScores:
    def _perfect_compliance_data(self, n, seed):
        rng = np.random.default_rng(seed)
        x1 = rng.uniform(-1, 1, n)
        x2 = rng.uniform(-1, 1, n)
        z1 = (rng.random(n) < 0.5).astype(float)
        y = x1 + rng.standard_normal(n)  # independent of Z1 given X
        return Dataset(
            columns={"X1": x1, "X2": x2, "Z1": z1, "Z2": z1, "D": z1, "Y": y},
            binary=("Z1", "Z2", "D"),
        )

    def _perfect_compliance_bundle(self):
        bundle = {}
        for j in (1, 2):
            bundle[f"pz{j}"] = const_fn(0.5)
            bundle[f"mu_d{j}_1"] = const_fn(1.0)
            bundle[f"mu_d{j}_0"] = const_fn(0.0)
            bundle[f"mu_y{j}_1"] = lambda x: x[:, 0]
            bundle[f"mu_y{j}_0"] = lambda x: x[:, 0]
        return bundle

    def test_perfect_compliance_null_mean(self):
        data = self._perfect_compliance_data(100_000, 33)
        spec = ScoreSpec(kind="iv_compatibility")
        g = g_iv_component(data, self._perfect_compliance_bundle(), spec, 1)
        assert abs(g.mean()) < 3.0 * g.std() / np.sqrt(len(g))

    def test_z0_indicator_brackets_vanish(self):
        data = self._perfect_compliance_data(50, 34)
        bundle = self._perfect_compliance_bundle()
        spec = ScoreSpec(kind="iv_compatibility")
        g = g_iv_component(data, bundle, spec, 1)
        z1 = data.col("Z1")
        y, x1 = data.col("Y"), data.col("X1")
        # with perfect compliance the score for Z1=1 rows is the plug-in
        # effect (zero here) plus the Y bracket only
        manual = (y - x1) / 0.5
        assert np.allclose(g[z1 == 1.0], manual[z1 == 1.0])

    def test_identical_bundles_and_instruments_cancel(self):
        data = self._perfect_compliance_data(100, 35)
        spec = ScoreSpec(kind="iv_compatibility")
        g = g_iv_compatibility(data, self._perfect_compliance_bundle(), spec)
        assert np.allclose(g, 0.0, atol=1e-12)

    def test_panel_b_null_mean(self):
        cfg = PanelBConfig(n=100_000, seed=36)
        data = gen_panel_b(cfg)
        nb = oracle_nuisances_panel_b(cfg)
        spec = ScoreSpec(kind="iv_compatibility")
        g = g_iv_compatibility(data, nb, spec)
        assert abs(g.mean()) < 3.0 * g.std() / np.sqrt(len(g))

    def test_alternative_loads_on_linear_weight(self):
        cfg = PanelBConfig(n=100_000, seed=37, beta1=0.5, beta2=0.5)
        data = gen_panel_b(cfg)
        nb = oracle_nuisances_panel_b(cfg)
        spec = ScoreSpec(kind="iv_compatibility")
        g = g_iv_compatibility(data, nb, spec)
        gw = g * (data.col("X1") + data.col("X2"))
        assert abs(gw.mean()) > 5.0 * gw.std() / np.sqrt(len(gw))

    def test_swap_antisymmetry(self):
        cfg = PanelBConfig(n=2000, seed=38)
        data = gen_panel_b(cfg)
        nb = oracle_nuisances_panel_b(cfg)
        swapped_nb = {}
        for j, other in ((1, 2), (2, 1)):
            swapped_nb[f"pz{j}"] = nb[f"pz{other}"]
            for z in (0, 1):
                swapped_nb[f"mu_d{j}_{z}"] = nb[f"mu_d{other}_{z}"]
                swapped_nb[f"mu_y{j}_{z}"] = nb[f"mu_y{other}_{z}"]
        spec = ScoreSpec(kind="iv_compatibility")
        swapped_spec = ScoreSpec(
            kind="iv_compatibility", columns={"z1": "Z2", "z2": "Z1"}
        )
        g = g_iv_compatibility(data, nb, spec)
        g_swapped = g_iv_compatibility(data, swapped_nb, swapped_spec)
        assert np.allclose(g, -g_swapped, atol=1e-12)


class TestParametricSpec:
    def _bundle(self, x_train, y_train):
        feats = np.column_stack([np.ones(len(x_train)), x_train])
        beta = np.linalg.lstsq(feats, y_train, rcond=None)[0]
        gram_inv = np.linalg.inv(feats.T @ feats / len(x_train))
        return {
            "h": lambda x: np.column_stack([np.ones(x.shape[0]), x[:, 0]]) @ beta,
            "features": lambda x: np.column_stack([np.ones(x.shape[0]), x[:, 0]]),
            "gram_inv": gram_inv,
        }

    def test_exact_linear_vanishes(self):
        rng = np.random.default_rng(39)
        x = rng.uniform(-1, 1, 200)
        y = 1.0 + 2.0 * x
        data = Dataset(columns={"X1": x, "Y": y})
        spec = ScoreSpec(kind="parametric_spec", covariates=("X1",))
        g = g_parametric_spec(data, self._bundle(x, y), spec)
        assert np.allclose(g, 0.0, atol=1e-10)

    def test_correct_specification_moments_near_zero(self):
        rng = np.random.default_rng(40)
        n = 100_000
        x = rng.uniform(-1, 1, n)
        y = 1.0 + 2.0 * x + rng.standard_normal(n)
        data = Dataset(columns={"X1": x, "Y": y})
        spec = ScoreSpec(kind="parametric_spec", covariates=("X1",))
        g = g_parametric_spec(data, self._bundle(x, y), spec)
        for j in range(1, 4):
            gb = g * legendre_orthonormal(j, x)
            assert abs(gb.mean()) < 3.0 * gb.std() / np.sqrt(n)

    def test_quadratic_misspecification_detected(self):
        rng = np.random.default_rng(41)
        n = 100_000
        x = rng.uniform(-1, 1, n)
        y = x ** 2 + 0.1 * rng.standard_normal(n)
        data = Dataset(columns={"X1": x, "Y": y})
        spec = ScoreSpec(kind="parametric_spec", covariates=("X1",))
        g = g_parametric_spec(data, self._bundle(x, y), spec)
        gb = g * legendre_orthonormal(2, x)
        assert abs(gb.mean()) > 5.0 * gb.std() / np.sqrt(n)


class TestConditionalCovariance:
    def test_exact_mean_vanishes(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(-1, 1, 100)
        data = Dataset(columns={"X1": x, "X2": x, "Y": 2.0 * x, "Z": rng.standard_normal(100)})
        bundle = {"mean_y": lambda q: 2.0 * q[:, 0], "mean_z": const_fn(0.0)}
        spec = ScoreSpec(kind="conditional_covariance")
        assert np.allclose(g_conditional_covariance(data, bundle, spec), 0.0)

    def test_independent_null(self):
        rng = np.random.default_rng(43)
        n = 100_000
        data = Dataset(
            columns={
                "X1": rng.standard_normal(n), "X2": rng.standard_normal(n),
                "Y": rng.standard_normal(n), "Z": rng.standard_normal(n),
            }
        )
        bundle = {"mean_y": const_fn(0.0), "mean_z": const_fn(0.0)}
        spec = ScoreSpec(kind="conditional_covariance")
        g = g_conditional_covariance(data, bundle, spec)
        assert abs(g.mean()) < 3.0 * g.std() / np.sqrt(n)

    def test_equal_variables_give_variance(self):
        rng = np.random.default_rng(44)
        n = 100_000
        y = rng.standard_normal(n)
        data = Dataset(columns={"X1": rng.uniform(-1, 1, n), "X2": rng.uniform(-1, 1, n), "Y": y, "Z": y})
        bundle = {"mean_y": const_fn(0.0), "mean_z": const_fn(0.0)}
        spec = ScoreSpec(kind="conditional_covariance")
        g = g_conditional_covariance(data, bundle, spec)
        assert g.mean() == pytest.approx(1.0, abs=0.02)


def me_perturbation(truth):
    return {
        "pi_s1": lambda x: expit(logit(truth["pi_s1"](x)) + 0.3),
        "pi_s0": lambda x: expit(logit(truth["pi_s0"](x)) + 0.3),
        "mu_s1": lambda x: truth["mu_s1"](x) + 0.3,
        "mu_s0": truth["mu_s0"],
    }


def com_perturbation(truth):
    pert = dict(truth)
    pert["pz1"] = lambda x: expit(logit(truth["pz1"](x)) + 0.3)
    pert["mu_y1_1"] = lambda x: truth["mu_y1_1"](x) + 0.3
    pert["mu_d1_1"] = lambda x: truth["mu_d1_1"](x) - 0.1
    return pert


class TestOrthogonalityDiagnostic:
    T_GRID = (-0.2, -0.1, 0.0, 0.1, 0.2)

    @staticmethod
    def _curvatures(d):
        c_small = d[3] + d[1] - 2 * d[2]
        c_large = d[4] + d[0] - 2 * d[2]
        return c_small, c_large

    def test_identical_bundles_constant_path(self):
        cfg = PanelAConfig(n=2000, seed=45)
        data = gen_panel_a(cfg)
        truth = oracle_nuisances_panel_a(cfg, a=0)
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        d = orthogonality_diagnostic(data, spec, truth, dict(truth), self.T_GRID)
        assert np.allclose(d, d[0], atol=1e-12)

    def test_me_quadratic_scaling(self):
        cfg = PanelAConfig(n=100_000, seed=21)
        data = gen_panel_a(cfg)
        truth = oracle_nuisances_panel_a(cfg, a=0)
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        d = orthogonality_diagnostic(data, spec, truth, me_perturbation(truth), self.T_GRID)
        c_small, c_large = self._curvatures(d)
        ratio = abs(c_large) / abs(c_small)
        assert 4.0 / 1.6 <= ratio <= 4.0 * 1.6

    def test_me_derivative_much_smaller_than_plugin(self):
        cfg = PanelAConfig(n=100_000, seed=21)
        data = gen_panel_a(cfg)
        truth = oracle_nuisances_panel_a(cfg, a=0)
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        pert = me_perturbation(truth)
        d = orthogonality_diagnostic(data, spec, truth, pert, self.T_GRID)
        deriv = (d[3] - d[1]) / 0.2

        def plug(data, bundle, spec):
            x = data.covariate_matrix(spec.covariates)
            return bundle["mu_s1"](x) - bundle["mu_s0"](x)

        d_plug = orthogonality_diagnostic(
            data, spec, truth, pert, self.T_GRID, score_fn=plug
        )
        deriv_plug = (d_plug[3] - d_plug[1]) / 0.2
        assert abs(deriv_plug) > 10.0 * abs(deriv)

    def test_com_quadratic_scaling(self):
        cfg = PanelBConfig(n=100_000, seed=22)
        data = gen_panel_b(cfg)
        truth = oracle_nuisances_panel_b(cfg)
        spec = ScoreSpec(kind="iv_compatibility")
        d = orthogonality_diagnostic(data, spec, truth, com_perturbation(truth), self.T_GRID)
        c_small, c_large = self._curvatures(d)
        ratio = abs(c_large) / abs(c_small)
        assert 2.5 <= ratio <= 6.5

    def test_weighted_path_also_flat(self):
        cfg = PanelAConfig(n=100_000, seed=46)
        data = gen_panel_a(cfg)
        truth = oracle_nuisances_panel_a(cfg, a=0)
        spec = ScoreSpec(kind="mean_exchangeability", arm=0)
        d = orthogonality_diagnostic(
            data, spec, truth, me_perturbation(truth), self.T_GRID,
            weight=lambda x: legendre_orthonormal(1, x[:, 0]),
        )
        deriv = (d[3] - d[1]) / 0.2
        assert abs(deriv) < 0.01
