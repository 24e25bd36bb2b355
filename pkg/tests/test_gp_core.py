import math

import numpy as np
import pytest

from common.exceptions import DataFormatError, ParameterDomainError
from gp_core.gaussian_process import GaussianProcess, log_marginal_likelihood, posterior
from gp_core.hyperparams import (
    ControllerParams,
    Dataset,
    HyperPrior,
    Hyperparams,
    KernelKind,
    PriorEntry,
)
from gp_core.kernels import BaseKernel, RadialKernel, get_kernel, kernel_eval, kernel_matrix
from gp_core.map_estimation import MapObjective, map_fit

ALL_KINDS = list(KernelKind)


def _hp(kind, signal_std=1.0, length_scale=0.25, noise_std=0.1, mean_const=2.0):
    return Hyperparams.default(kind, signal_std=signal_std, length_scale=length_scale, noise_std=noise_std, mean_const=mean_const)


def _oracle_kernel(hp: Hyperparams, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    def radial(kind, ls, s):
        r2 = (((X[:, None, :] - Z[None, :, :]) / np.asarray(ls)) ** 2).sum(-1)
        r = np.sqrt(r2)
        if kind == KernelKind.SE:
            g = np.exp(-r2 / 2)
        elif kind == KernelKind.RQ:
            g = (1 + r2 / (2 * hp.rq_alpha)) ** -hp.rq_alpha
        elif kind == KernelKind.M32:
            g = (1 + math.sqrt(3) * r) * np.exp(-math.sqrt(3) * r)
        else:
            g = (1 + math.sqrt(5) * r + 5 * r2 / 3) * np.exp(-math.sqrt(5) * r)
        return s * s * g

    if hp.kernel == KernelKind.TWO_MAT:
        return radial(KernelKind.M52, hp.length_scales, hp.signal_std) + radial(KernelKind.M32, hp.length_scales_m32, hp.signal_std_m32)
    return radial(hp.kernel, hp.length_scales, hp.signal_std)


def _oracle_posterior(hp, data, U):
    X = data.unit_inputs()
    K = _oracle_kernel(hp, X, X) + hp.noise_std ** 2 * np.eye(len(data))
    k = _oracle_kernel(hp, U, X)
    y = data.costs() - hp.mean_const
    mean = hp.mean_const + k @ np.linalg.solve(K, y)
    var = np.diag(_oracle_kernel(hp, U, U)) - np.einsum("ij,ji->i", k, np.linalg.solve(K, k.T))
    _, logdet = np.linalg.slogdet(K)
    lml = -0.5 * y @ np.linalg.solve(K, y) - 0.5 * logdet - 0.5 * len(data) * math.log(2 * math.pi)
    return mean, var, lml


class TestControllerParams:
    def test_box_bounds(self):
        ControllerParams(wavelength_um=258.0, duty_cycle_pct=50.0)
        with pytest.raises(ValueError):
            ControllerParams(wavelength_um=257.9, duty_cycle_pct=30.0)
        with pytest.raises(ValueError):
            ControllerParams(wavelength_um=645.0, duty_cycle_pct=50.5)

    def test_parse_and_format(self):
        theta = ControllerParams.parse(" 645.0, 30 ")
        assert theta.format() == "645.0,30.0"
        with pytest.raises(DataFormatError):
            ControllerParams.parse("645.0")

    def test_unit_mapping(self):
        theta = ControllerParams(wavelength_um=645.0, duty_cycle_pct=35.0)
        u = theta.to_unit()
        assert u == pytest.approx([0.5, 0.5])
        assert ControllerParams.from_unit(u) == theta


class TestKernels:
    def test_se_at_zero_distance(self):
        theta = ControllerParams(wavelength_um=500.0, duty_cycle_pct=25.0)
        hp = _hp(KernelKind.SE, signal_std=1.7)
        assert kernel_eval(KernelKind.SE, hp, theta, theta) == pytest.approx(1.7 ** 2, rel=1e-15)

    def test_two_matern_at_zero_distance(self):
        theta = ControllerParams(wavelength_um=500.0, duty_cycle_pct=25.0)
        hp = _hp(KernelKind.TWO_MAT, signal_std=1.5)
        expected = hp.signal_std ** 2 + hp.signal_std_m32 ** 2
        assert kernel_eval(KernelKind.TWO_MAT, hp, theta, theta) == pytest.approx(expected, rel=1e-14)
        assert expected == pytest.approx(1.5 ** 2)

    def test_se_and_m32_at_unit_distance(self):
        a = ControllerParams.from_unit([0.0, 0.3])
        b = ControllerParams.from_unit([1.0, 0.3])
        se = _hp(KernelKind.SE, length_scale=1.0)
        m32 = _hp(KernelKind.M32, length_scale=1.0)
        assert kernel_eval(KernelKind.SE, se, a, b) == pytest.approx(0.606531, abs=1e-6)
        assert kernel_eval(KernelKind.M32, m32, a, b) == pytest.approx(0.484600, abs=1e-6)

    def test_kind_mismatch_and_bad_values(self):
        a = ControllerParams.from_unit([0.1, 0.2])
        with pytest.raises(ParameterDomainError):
            kernel_eval(KernelKind.SE, _hp(KernelKind.M52), a, a)
        with pytest.raises(ValueError):
            _hp(KernelKind.SE, signal_std=-1.0)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_symmetry_and_psd(self, kind, rng):
        hp = _hp(kind, signal_std=1.3)
        thetas = [ControllerParams.from_unit(u) for u in rng.uniform(size=(8, 2))]
        for a in thetas[:3]:
            for b in thetas[3:]:
                assert kernel_eval(kind, hp, a, b) == kernel_eval(kind, hp, b, a)
        X = np.vstack([t.to_unit() for t in thetas])
        eig = np.linalg.eigvalsh(kernel_matrix(hp, X, X))
        assert eig.min() >= -1e-8 * hp.total_signal_variance

    @pytest.mark.parametrize("kind", [KernelKind.SE, KernelKind.RQ, KernelKind.M32, KernelKind.M52])
    def test_ard_rescaling_invariance(self, kind, rng):
        kernel = get_kernel(kind)
        params = _hp(kind).free_parameters()
        X, Z = rng.uniform(size=(4, 2)), rng.uniform(size=(3, 2))
        scaled = dict(params)
        scaled["length_scale.duty_cycle"] *= 7.5
        factor = np.array([1.0, 7.5])
        np.testing.assert_allclose(kernel.covariance(params, X, Z), kernel.covariance(scaled, X * factor, Z * factor), rtol=0, atol=1e-12)

    def test_two_matern_is_sum_of_summands(self, rng):
        hp = _hp(KernelKind.TWO_MAT)
        X, Z = rng.uniform(size=(5, 2)), rng.uniform(size=(4, 2))
        m52 = Hyperparams(kernel=KernelKind.M52, length_scales=hp.length_scales, signal_std=hp.signal_std, noise_std=0.1, mean_const=2.0)
        m32 = Hyperparams(kernel=KernelKind.M32, length_scales=hp.length_scales_m32, signal_std=hp.signal_std_m32, noise_std=0.1, mean_const=2.0)
        np.testing.assert_array_equal(kernel_matrix(hp, X, Z), kernel_matrix(m52, X, Z) + kernel_matrix(m32, X, Z))

    def test_only_single_kernels_have_radial_profiles(self):
        assert not isinstance(get_kernel(KernelKind.TWO_MAT), RadialKernel)
        assert not hasattr(get_kernel(KernelKind.TWO_MAT), "_profile")
        for kind in (KernelKind.SE, KernelKind.RQ, KernelKind.M32, KernelKind.M52):
            assert isinstance(get_kernel(kind), RadialKernel)
        with pytest.raises(TypeError):
            BaseKernel()

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_gradients_match_finite_differences(self, kind, rng):
        kernel = get_kernel(kind)
        params = _hp(kind).free_parameters()
        X = rng.uniform(size=(4, 2))
        _, grads = kernel.covariance_with_grads(params, X)
        for name in params:
            h = 1e-6
            up, down = dict(params), dict(params)
            up[name] = params[name] * math.exp(h)
            down[name] = params[name] * math.exp(-h)
            fd = (kernel.covariance(up, X, X) - kernel.covariance(down, X, X)) / (2 * h)
            np.testing.assert_allclose(grads[name], fd, rtol=1e-5, atol=1e-8)


class TestPosterior:
    def test_empty_data_is_prior(self):
        hp = _hp(KernelKind.SE, signal_std=2.0)
        stats = posterior(hp, Dataset(), ControllerParams(wavelength_um=645.0, duty_cycle_pct=30.0))
        assert stats.mean == 2.0
        assert stats.variance == pytest.approx(4.0)

    def test_single_observation_by_hand(self):
        theta = ControllerParams(wavelength_um=645.0, duty_cycle_pct=30.0)
        hp = _hp(KernelKind.SE, signal_std=2.0, noise_std=0.1)
        stats = posterior(hp, Dataset().append(theta, 0.0), theta)
        assert stats.mean == pytest.approx(2 - 2 * 4 / 4.01, rel=1e-12)
        assert stats.variance == pytest.approx(4 - 16 / 4.01, rel=1e-10)

    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_matches_dense_oracle(self, kind, make_dataset):
        rng = np.random.default_rng(7)
        for _ in range(20):
            data = make_dataset(rng, int(rng.integers(1, 11)))
            hp = _hp(kind, signal_std=float(rng.uniform(0.5, 2.0)), length_scale=float(rng.uniform(0.1, 0.6)))
            U = rng.uniform(size=(3, 2))
            gp = GaussianProcess(hp, data)
            mean, var = gp.predict(U)
            o_mean, o_var, o_lml = _oracle_posterior(hp, data, U)
            np.testing.assert_allclose(mean, o_mean, rtol=1e-10)
            np.testing.assert_allclose(var, np.maximum(o_var, 0), rtol=1e-8, atol=1e-12)
            assert gp.log_marginal_likelihood() == pytest.approx(o_lml, rel=1e-10)

    def test_interpolates_with_tiny_noise(self, make_dataset):
        data = make_dataset(np.random.default_rng(3), 4)
        hp = _hp(KernelKind.M52, noise_std=1e-9)
        gp = GaussianProcess(hp, data)
        mean, var = gp.predict(data.unit_inputs())
        np.testing.assert_allclose(mean, data.costs(), atol=1e-6)
        assert np.all(var <= hp.noise_std ** 2 + 1e-8)

    def test_joint_diagonal_matches_predict(self, small_dataset, rng):
        gp = GaussianProcess(_hp(KernelKind.TWO_MAT), small_dataset)
        U = rng.uniform(size=(4, 2))
        mean, cov = gp.joint(U)
        m, v = gp.predict(U)
        np.testing.assert_allclose(mean, m)
        np.testing.assert_allclose(np.diag(cov), v, atol=1e-12)
        np.testing.assert_allclose(gp.cross_covariance(U, U), cov, atol=1e-12)


class TestLogMarginalLikelihood:
    def test_single_observation_at_prior_mean(self):
        theta = ControllerParams(wavelength_um=400.0, duty_cycle_pct=40.0)
        hp = _hp(KernelKind.M32, signal_std=1.5, noise_std=0.1)
        v = 1.5 ** 2 + 0.1 ** 2
        lml = log_marginal_likelihood(hp, Dataset().append(theta, 2.0))
        assert lml == pytest.approx(-0.5 * math.log(v) - 0.5 * math.log(2 * math.pi), rel=1e-12)

    def test_inflated_noise_lowers_likelihood(self):
        data = Dataset()
        for u, c in [([0.4, 0.4], 1.00), ([0.45, 0.42], 1.02), ([0.42, 0.47], 0.99)]:
            data = data.append(ControllerParams.from_unit(u), c)
        values = [log_marginal_likelihood(_hp(KernelKind.SE, noise_std=s), data) for s in (0.05, 0.5, 5.0, 50.0)]
        assert all(a > b for a, b in zip(values[1:], values[2:]))


class TestHyperparamsDocument:
    @pytest.mark.parametrize("kind", ALL_KINDS)
    def test_document_keys(self, kind):
        hp = _hp(kind)
        doc = {k: repr(v) if isinstance(v, float) else str(v) for k, v in hp.to_document().items()}
        assert Hyperparams.from_document(doc) == hp
        if kind == KernelKind.TWO_MAT:
            assert "signal_std.m32" in doc and "length_scale.wavelength.m52" in doc

    def test_incomplete_document(self):
        with pytest.raises(DataFormatError):
            Hyperparams.from_document({"kernel": "SE", "noise_std": "0.1"})

    def test_prior_from_estimate_uses_quarter(self):
        prior = HyperPrior.from_estimate(_hp(KernelKind.RQ))
        assert prior.entries["rq_alpha"].mean == 2.0
        assert prior.entries["rq_alpha"].std == 0.5
        assert prior.entries["length_scale.wavelength"].std == pytest.approx(0.0625)


class TestMapFit:
    def test_strong_prior_pins_result(self, small_dataset):
        start = _hp(KernelKind.TWO_MAT, signal_std=1.5)
        target = {name: value * 1.3 for name, value in start.free_parameters().items()}
        prior = HyperPrior(entries={name: PriorEntry(mean=m, std=1e-6 * m) for name, m in target.items()})
        fit = map_fit(start, small_dataset, prior, seed=1)
        for name, value in fit.hyperparams.free_parameters().items():
            assert value == pytest.approx(target[name], rel=1e-3)

    def test_never_worse_than_start(self, small_dataset):
        start = _hp(KernelKind.RQ)
        prior = HyperPrior.from_estimate(start)
        fit = map_fit(start, small_dataset, prior, seed=0)
        objective = MapObjective(start, small_dataset, prior)
        start_vec = np.log(list(start.free_parameters().values()))
        fitted_vec = np.log(list(fit.hyperparams.free_parameters().values()))
        assert objective(fitted_vec) <= objective(start_vec) + 1e-12
        assert fit.success
        assert fit.hyperparams.noise_std == start.noise_std
        assert fit.hyperparams.mean_const == start.mean_const

    def test_deterministic_for_a_seed(self, small_dataset):
        start = _hp(KernelKind.M52)
        prior = HyperPrior.from_estimate(start)
        assert map_fit(start, small_dataset, prior, seed=4) == map_fit(start, small_dataset, prior, seed=4)

    def test_recovers_length_scales(self):
        rng = np.random.default_rng(2024)
        truth = Hyperparams(kernel=KernelKind.M52, length_scales=(0.3, 0.15), signal_std=1.0, noise_std=0.02, mean_const=2.0)
        U = rng.uniform(size=(40, 2))
        K = kernel_matrix(truth, U, U) + truth.noise_std ** 2 * np.eye(40)
        y = 2.0 + np.linalg.cholesky(K) @ rng.normal(size=40)
        data = Dataset()
        for u, c in zip(U, y):
            data = data.append(ControllerParams.from_unit(u), float(c))
        start = _hp(KernelKind.M52, signal_std=1.0, noise_std=0.02)
        prior = HyperPrior(entries={n: PriorEntry(mean=v, std=2.0 * v) for n, v in start.free_parameters().items()})
        fitted = map_fit(start, data, prior, seed=0).hyperparams
        for got, want in zip(fitted.length_scales, truth.length_scales):
            assert want / 2 <= got <= want * 2

    def test_requires_data_and_full_prior(self, small_dataset):
        start = _hp(KernelKind.RQ)
        with pytest.raises(ValueError):
            map_fit(start, Dataset(), HyperPrior.from_estimate(start))
        partial = HyperPrior.from_estimate(_hp(KernelKind.SE))
        with pytest.raises(ParameterDomainError):
            map_fit(start, small_dataset, partial)
