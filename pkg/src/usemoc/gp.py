"""Exact Gaussian-process regression with an ARD squared-exponential kernel.

Targets are standardized before conditioning and the prior mean is zero in
the standardized space. Inputs are mapped to the unit box when bounds are
given. Every public method takes and returns values in original units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize

from .errors import InputError, NumericalConditioningError

__all__ = [
    "KernelParams",
    "GPConfig",
    "GPModel",
    "se_kernel",
    "condition",
    "fit",
    "predict",
    "log_marginal_likelihood",
]

LOG_2PI = np.log(2.0 * np.pi)
JITTER_START = 1e-8
JITTER_MAX = 1e-2


@dataclass(frozen=True)
class KernelParams:
    lengthscales: np.ndarray
    signal_variance: float = 1.0
    noise_variance: float = 0.0

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        if np.any(~np.isfinite(ls)) or np.any(ls <= 0):
            raise InputError("lengthscales must be finite and positive")
        if not self.signal_variance > 0:
            raise InputError("signal_variance must be positive")
        if not self.noise_variance >= 0:
            raise InputError("noise_variance must be non-negative")


@dataclass(frozen=True)
class GPConfig:
    """Hyperparameter search settings.

    ``noise_variance`` pins the (standardized) noise level when not None;
    otherwise it is fitted within ``noise_bounds``.
    """

    lengthscale_bounds: tuple[float, float] = (1e-3, 1e3)
    signal_variance_bounds: tuple[float, float] = (1e-3, 1e3)
    noise_bounds: tuple[float, float] = (1e-10, 1e-1)
    noise_variance: float | None = None
    restarts: int = 5
    seed: int = 0
    max_iter: int = 200


def se_kernel(A, B, lengthscales, signal_variance):
    """ARD squared-exponential covariance between the rows of ``A`` and ``B``."""
    A = np.asarray(A, dtype=float) / lengthscales
    B = np.asarray(B, dtype=float) / lengthscales
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    np.maximum(sq, 0.0, out=sq)
    return signal_variance * np.exp(-0.5 * sq)


def _factorize(K, y, noise):
    """Cholesky of ``K + noise*I`` with escalating jitter.

    A factor is accepted only if it solves the unjittered system to
    1e-6 (relative to the largest target), so rank-deficient interpolation
    problems fail loudly instead of returning huge weights.
    """
    n = K.shape[0]
    eye = np.eye(n)
    jitter = 0.0
    while True:
        try:
            L = cholesky(K + (noise + jitter) * eye, lower=True, check_finite=False)
            alpha = cho_solve((L, True), y, check_finite=False)
            if np.all(np.isfinite(alpha)) and np.all(np.diag(L) > 0):
                # rounding can leave a tiny positive pivot on a singular
                # matrix, so the plain factor is checked the same way
                resid = (K + noise * eye) @ alpha - y
                if np.max(np.abs(resid)) <= 1e-6 * max(1.0, np.max(np.abs(y))):
                    return L, alpha, jitter
        except (LinAlgError, ValueError):
            pass
        jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > JITTER_MAX * (1 + 1e-9):
            raise NumericalConditioningError(
                f"kernel matrix of size {n} is singular up to jitter {JITTER_MAX:g}"
            )


@dataclass(frozen=True, eq=False)
class GPModel:
    """Posterior of a zero-mean GP on standardized targets.

    Immutable once built; safe to share between threads for prediction.
    """

    train_inputs: np.ndarray
    train_targets: np.ndarray
    kernel: KernelParams
    bounds: np.ndarray | None
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    target_mean: float = 0.0
    target_std: float = 1.0
    jitter: float = 0.0

    @property
    def n(self):
        return self.train_inputs.shape[0]

    @property
    def dim(self):
        return self.train_inputs.shape[1]

    @property
    def standardized_targets(self):
        return (self.train_targets - self.target_mean) / self.target_std

    def _scale(self, X):
        if self.bounds is None:
            return X
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        return (X - lo) / (hi - lo)

    def predict(self, X):
        """Predictive mean and standard deviation of the latent function.

        Accepts a single ``d``-vector (returns two floats) or an ``(m, d)``
        array (returns two ``(m,)`` arrays).
        """
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.dim:
            raise InputError(f"expected inputs of dimension {self.dim}, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise InputError("query inputs must be finite")
        Ks = se_kernel(
            self._scale(X),
            self._scale(self.train_inputs),
            self.kernel.lengthscales,
            self.kernel.signal_variance,
        )
        mean = Ks @ self.alpha
        v = solve_triangular(self.chol, Ks.T, lower=True, check_finite=False)
        var = self.kernel.signal_variance - np.sum(v**2, axis=0)
        np.maximum(var, 0.0, out=var)
        mean = mean * self.target_std + self.target_mean
        std = np.sqrt(var) * self.target_std
        if single:
            return float(mean[0]), float(std[0])
        return mean, std

    def log_marginal_likelihood(self):
        """Log evidence of the standardized targets under the fitted kernel."""
        y = self.standardized_targets
        return float(
            -0.5 * y @ self.alpha
            - np.sum(np.log(np.diag(self.chol)))
            - 0.5 * self.n * LOG_2PI
        )


def _check_data(inputs, targets, bounds):
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float).ravel()
    if X.shape[0] < 1:
        raise InputError("at least one training point is required")
    if X.shape[0] != y.shape[0]:
        raise InputError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    if not np.all(np.isfinite(y)):
        raise InputError("targets must be finite")
    if not np.all(np.isfinite(X)):
        raise InputError("inputs must be finite")
    if bounds is not None:
        bounds = np.asarray(bounds, dtype=float)
        if bounds.shape != (X.shape[1], 2) or np.any(bounds[:, 0] >= bounds[:, 1]):
            raise InputError("bounds must be a (d, 2) array with lo < hi")
        span = bounds[:, 1] - bounds[:, 0]
        tol = 1e-9 * span
        if np.any(X < bounds[:, 0] - tol) or np.any(X > bounds[:, 1] + tol):
            raise InputError("training inputs lie outside the bounds")
    return X, y, bounds


def _standardize(y):
    mean = float(np.mean(y))
    std = float(np.std(y))
    if not std > 1e-12 * max(1.0, abs(mean)):
        std = 1.0
    return mean, std


def condition(inputs, targets, kernel, bounds=None):
    """Build the posterior for fixed hyperparameters (no fitting)."""
    X, y, bounds = _check_data(inputs, targets, bounds)
    if kernel.lengthscales.shape[0] != X.shape[1]:
        raise InputError("one lengthscale per input dimension is required")
    mean, std = _standardize(y)
    ys = (y - mean) / std
    Xs = X if bounds is None else (X - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])
    K = se_kernel(Xs, Xs, kernel.lengthscales, kernel.signal_variance)
    L, alpha, jitter = _factorize(K, ys, kernel.noise_variance)
    return GPModel(
        train_inputs=X,
        train_targets=y,
        kernel=kernel,
        bounds=bounds,
        chol=L,
        alpha=alpha,
        target_mean=mean,
        target_std=std,
        jitter=jitter,
    )


def _neg_lml_and_grad(theta, Xs, ys, sqdiffs, pinned_noise):
    d = Xs.shape[1]
    n = Xs.shape[0]
    ls = np.exp(theta[:d])
    sf2 = np.exp(theta[d])
    noise = pinned_noise if pinned_noise is not None else np.exp(theta[d + 1])
    # same kernel as se_kernel, from the cached squared differences
    K = sf2 * np.exp(-0.5 * np.tensordot(ls**-2, sqdiffs, axes=1))
    try:
        L, alpha, _ = _factorize(K, ys, noise)
    except NumericalConditioningError:
        return 1e25, np.zeros_like(theta)
    lml = -0.5 * ys @ alpha - np.sum(np.log(np.diag(L))) - 0.5 * n * LOG_2PI
    Kinv = cho_solve((L, True), np.eye(n), check_finite=False)
    W = np.outer(alpha, alpha) - Kinv
    grad = np.empty_like(theta)
    # dK/dlog(l_j) = K * sqdiff_j / l_j^2
    grad[:d] = 0.5 * np.einsum("ij,ij,kij->k", W, K, sqdiffs) / ls**2
    grad[d] = 0.5 * np.sum(W * K)
    if pinned_noise is None:
        grad[d + 1] = 0.5 * noise * np.trace(W)
    return -lml, -grad


def fit(inputs, targets, config=None, bounds=None):
    """Fit a GP by multi-start bounded maximization of the log evidence.

    The first start is the unit setting (lengthscales 1, signal variance 1);
    the remaining ``restarts - 1`` are drawn log-uniformly from ``config.seed``.
    Returns the best local optimum.

    Raises:
        InputError: non-finite targets or malformed inputs.
        NumericalConditioningError: no hyperparameter setting yields a
            factorizable kernel matrix.
    """
    config = config or GPConfig()
    X, y, bounds = _check_data(inputs, targets, bounds)
    d = X.shape[1]
    mean, std = _standardize(y)
    ys = (y - mean) / std
    Xs = X if bounds is None else (X - bounds[:, 0]) / (bounds[:, 1] - bounds[:, 0])
    sqdiffs = (Xs.T[:, :, None] - Xs.T[:, None, :]) ** 2

    pinned = config.noise_variance
    log_bounds = [np.log(config.lengthscale_bounds)] * d + [
        np.log(config.signal_variance_bounds)
    ]
    if pinned is None:
        log_bounds.append(np.log(config.noise_bounds))
    log_bounds = np.array(log_bounds)

    rng = np.random.default_rng(config.seed)
    starts = []
    first = np.zeros(len(log_bounds))
    if pinned is None:
        first[-1] = np.log(1e-3)
    starts.append(np.clip(first, log_bounds[:, 0], log_bounds[:, 1]))
    # draw from a plausible sub-range; the optimizer still sees the full bounds
    lo = np.maximum(log_bounds[:, 0], np.log(0.05))
    hi = np.minimum(log_bounds[:, 1], np.log(5.0))
    if pinned is None:
        lo[-1], hi[-1] = log_bounds[-1]
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    for _ in range(max(config.restarts, 1) - 1):
        starts.append(rng.uniform(lo, hi))

    best = None
    for theta0 in starts:
        res = minimize(
            _neg_lml_and_grad,
            theta0,
            args=(Xs, ys, sqdiffs, pinned),
            jac=True,
            method="L-BFGS-B",
            bounds=log_bounds,
            options={"maxiter": config.max_iter},
        )
        if not np.isfinite(res.fun) or res.fun >= 1e24:
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NumericalConditioningError(
            "kernel matrix could not be factorized for any hyperparameter start"
        )
    theta = best.x
    kernel = KernelParams(
        lengthscales=np.exp(theta[:d]),
        signal_variance=float(np.exp(theta[d])),
        noise_variance=float(pinned if pinned is not None else np.exp(theta[d + 1])),
    )
    return condition(X, y, kernel, bounds)


def predict(model, x):
    """Functional alias for :meth:`GPModel.predict`."""
    return model.predict(x)


def log_marginal_likelihood(model):
    """Functional alias for :meth:`GPModel.log_marginal_likelihood`."""
    return model.log_marginal_likelihood()
