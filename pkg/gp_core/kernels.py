"""
Covariance kernels on the normalized controller box.

Every kernel is stationary with ARD length scales. The single kernels are
written as ``k = s^2 * g(r^2)`` where ``r^2 = sum_d ((x_d - z_d) / l_d)^2``;
the sum-of-Matern kernel adds two of them. Gradients are taken with respect
to the logarithm of each free hyperparameter, which is the parameterization
MAP estimation optimizes over.
"""
from abc import ABC, abstractmethod
from typing import Dict, List, Tuple

import numpy as np

from common.exceptions import ParameterDomainError
from gp_core.hyperparams import AXES, ControllerParams, Hyperparams, KernelKind

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)


def _axis_sq_diffs(X: np.ndarray, Z: np.ndarray, length_scales) -> np.ndarray:
    """Per-axis scaled squared differences, shape (n, m, d)."""
    ls = np.asarray(length_scales, dtype=float)
    diff = (X[:, None, :] - Z[None, :, :]) / ls
    return diff * diff


class BaseKernel(ABC):
    kind: KernelKind

    @abstractmethod
    def parameter_names(self) -> List[str]:
        """Names of the free hyperparameters, as keyed in ``Hyperparams.free_parameters``."""

    @abstractmethod
    def covariance(self, params: Dict[str, float], X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        """Cross-covariance matrix between the rows of X and Z."""

    @abstractmethod
    def diagonal(self, params: Dict[str, float], n: int) -> np.ndarray:
        pass

    @abstractmethod
    def covariance_with_grads(self, params: Dict[str, float], X: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        """K(X, X) and its gradient with respect to each log hyperparameter."""


class RadialKernel(BaseKernel):
    """A kernel ``s^2 * g(r^2)`` defined by its radial profile ``g``."""

    def __init__(self, suffix: str = ""):
        self.suffix = suffix

    def _name(self, base: str) -> str:
        return base + self.suffix

    def parameter_names(self) -> List[str]:
        names = [self._name(f"length_scale.{axis}") for axis in AXES]
        names.append(self._name("signal_std"))
        return names + self._shape_parameter_names()

    def _shape_parameter_names(self) -> List[str]:
        return []

    @abstractmethod
    def _profile(self, r2: np.ndarray, params: Dict[str, float]) -> Tuple[np.ndarray, np.ndarray, Dict[str, np.ndarray]]:
        """Return g(r2), dg/dr2 and d g / d log(shape parameter) for extra parameters."""

    def _length_scales(self, params: Dict[str, float]):
        return [params[self._name(f"length_scale.{axis}")] for axis in AXES]

    def covariance(self, params: Dict[str, float], X: np.ndarray, Z: np.ndarray) -> np.ndarray:
        r2 = _axis_sq_diffs(X, Z, self._length_scales(params)).sum(axis=-1)
        g, _, _ = self._profile(r2, params)
        s = params[self._name("signal_std")]
        return s * s * g

    def diagonal(self, params: Dict[str, float], n: int) -> np.ndarray:
        s = params[self._name("signal_std")]
        return np.full(n, s * s)

    def covariance_with_grads(self, params: Dict[str, float], X: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        per_axis = _axis_sq_diffs(X, X, self._length_scales(params))
        r2 = per_axis.sum(axis=-1)
        g, dg_dr2, extra = self._profile(r2, params)
        s2 = params[self._name("signal_std")] ** 2
        K = s2 * g
        grads: Dict[str, np.ndarray] = {}
        for d, axis in enumerate(AXES):
            # d r2 / d log l_d = -2 r_d^2
            grads[self._name(f"length_scale.{axis}")] = s2 * dg_dr2 * (-2.0 * per_axis[..., d])
        grads[self._name("signal_std")] = 2.0 * K
        for name, dg in extra.items():
            grads[name] = s2 * dg
        return K, grads


class SquaredExponentialKernel(RadialKernel):
    kind = KernelKind.SE

    def _profile(self, r2, params):
        g = np.exp(-0.5 * r2)
        return g, -0.5 * g, {}


class RationalQuadraticKernel(RadialKernel):
    kind = KernelKind.RQ

    def _shape_parameter_names(self) -> List[str]:
        return [self._name("rq_alpha")]

    def _profile(self, r2, params):
        alpha = params[self._name("rq_alpha")]
        u = r2 / (2.0 * alpha)
        base = 1.0 + u
        g = base ** (-alpha)
        dg_dr2 = -0.5 * base ** (-alpha - 1.0)
        # d g / d log alpha = alpha * g * (u / (1 + u) - log(1 + u))
        dg_dlog_alpha = alpha * g * (u / base - np.log1p(u))
        return g, dg_dr2, {self._name("rq_alpha"): dg_dlog_alpha}


class Matern32Kernel(RadialKernel):
    kind = KernelKind.M32

    def _profile(self, r2, params):
        r = np.sqrt(r2)
        e = np.exp(-SQRT3 * r)
        return (1.0 + SQRT3 * r) * e, -1.5 * e, {}


class Matern52Kernel(RadialKernel):
    kind = KernelKind.M52

    def _profile(self, r2, params):
        r = np.sqrt(r2)
        e = np.exp(-SQRT5 * r)
        g = (1.0 + SQRT5 * r + 5.0 * r2 / 3.0) * e
        return g, -(5.0 / 6.0) * (1.0 + SQRT5 * r) * e, {}


class TwoMaternKernel(BaseKernel):
    """Sum of a long-scale Matern-5/2 and a short-scale Matern-3/2 term, sharing nothing."""

    kind = KernelKind.TWO_MAT

    def __init__(self):
        self.smooth = Matern52Kernel(suffix=".m52")
        self.rough = Matern32Kernel(suffix=".m32")

    def parameter_names(self) -> List[str]:
        return self.smooth.parameter_names() + self.rough.parameter_names()

    def covariance(self, params, X, Z):
        return self.smooth.covariance(params, X, Z) + self.rough.covariance(params, X, Z)

    def diagonal(self, params, n):
        return self.smooth.diagonal(params, n) + self.rough.diagonal(params, n)

    def covariance_with_grads(self, params, X):
        K1, g1 = self.smooth.covariance_with_grads(params, X)
        K2, g2 = self.rough.covariance_with_grads(params, X)
        return K1 + K2, {**g1, **g2}


_REGISTRY = {
    KernelKind.SE: SquaredExponentialKernel,
    KernelKind.RQ: RationalQuadraticKernel,
    KernelKind.M32: Matern32Kernel,
    KernelKind.M52: Matern52Kernel,
    KernelKind.TWO_MAT: TwoMaternKernel,
}


def get_kernel(kind) -> BaseKernel:
    return _REGISTRY[KernelKind(kind)]()


def kernel_matrix(hp: Hyperparams, X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    return get_kernel(hp.kernel).covariance(hp.free_parameters(), np.atleast_2d(X), np.atleast_2d(Z))


def kernel_eval(kind, hp: Hyperparams, a: ControllerParams, b: ControllerParams) -> float:
    """k(a, b) for one pair of controllers."""
    kind = KernelKind(kind)
    if hp.kernel != kind:
        raise ParameterDomainError(f"hyperparameters describe a {hp.kernel.value} kernel, not {kind.value}")
    for name, value in hp.free_parameters().items():
        if not (value > 0 and np.isfinite(value)):
            raise ParameterDomainError(f"{name} must be positive, got {value}")
    return float(kernel_matrix(hp, a.to_unit()[None, :], b.to_unit()[None, :])[0, 0])
