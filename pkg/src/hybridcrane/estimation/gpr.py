"""Gaussian process regression of breakaway voltage over axis position."""
from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils import check_random_state

from ..core import Polynomial4

JITTER = 1e-10


class GprNumericalError(ArithmeticError):
    pass


def se_kernel(a, b, sigma_f, length):
    d = np.subtract.outer(np.asarray(a, float), np.asarray(b, float))
    return sigma_f**2 * np.exp(-0.5 * (d / length) ** 2)


def _factor(x, sigma_f, length, sigma_n):
    K = se_kernel(x, x, sigma_f, length)
    K[np.diag_indices_from(K)] += sigma_n**2 + JITTER
    try:
        return cho_factor(K, lower=True)
    except np.linalg.LinAlgError as exc:
        raise GprNumericalError("Gram matrix not positive definite") from exc


def log_marginal_likelihood(x, y, sigma_f, length, sigma_n) -> float:
    cf = _factor(x, sigma_f, length, sigma_n)
    alpha = cho_solve(cf, y)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    return float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * y.size * math.log(2 * math.pi))


class GaussianProcessFriction(BaseEstimator, RegressorMixin):
    """Squared-exponential GP on one input; targets are centred on their mean.

    Hyperparameters left as ``None`` are chosen by maximising the log
    marginal likelihood with a multi-start Nelder-Mead search in log space.
    ``domain`` fixes the length-scale bounds; it defaults to the data span.
    """

    def __init__(self, sigma_f=None, length_scale=None, sigma_n=None, n_restarts=8,
                 domain=None, random_state=0):
        self.sigma_f = sigma_f
        self.length_scale = length_scale
        self.sigma_n = sigma_n
        self.n_restarts = n_restarts
        self.domain = domain
        self.random_state = random_state

    def _bounds(self, x):
        span = (self.domain[1] - self.domain[0]) if self.domain is not None else np.ptp(x)
        span = span if span > 0 else 1.0
        return np.log([[1e-3, 1e3], [1e-2 * span, span], [1e-4, 1.0]])

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if x.size < 3 or x.size != y.size:
            raise ValueError("need at least 3 matching samples")
        self.X_train_, self.y_mean_ = x, float(y.mean())
        yc = y - self.y_mean_
        fixed = [self.sigma_f, self.length_scale, self.sigma_n]
        bounds = self._bounds(x)
        free = [i for i, v in enumerate(fixed) if v is None]

        def unpack(z):
            theta = [math.log(v) if v is not None else 0.0 for v in fixed]
            for j, i in enumerate(free):
                theta[i] = z[j]
            return np.exp(theta)

        def nll(z):
            if np.any(z < bounds[free, 0]) or np.any(z > bounds[free, 1]):
                return 1e25
            try:
                return -log_marginal_likelihood(x, yc, *unpack(z))
            except GprNumericalError:
                return 1e25

        if free:
            rng = check_random_state(self.random_state)
            lo, hi = bounds[free, 0], bounds[free, 1]
            sd = yc.std() if yc.std() > 0 else 1.0
            guess = np.log([sd, 0.3 * math.exp(bounds[1, 1]), 0.1 * sd + 1e-4])
            starts = [np.clip(guess[free], lo, hi)]
            starts += [rng.uniform(lo, hi) for _ in range(max(self.n_restarts - 1, 0))]
            best = None
            for z0 in starts:
                res = minimize(nll, z0, method="Nelder-Mead", bounds=list(zip(lo, hi)),
                               options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000})
                if best is None or res.fun < best.fun:
                    best = res
            theta = unpack(best.x)
        else:
            theta = np.array(fixed, dtype=float)
        if np.any(theta <= 0):
            raise ValueError("hyperparameters must be positive")
        self.sigma_f_, self.length_scale_, self.sigma_n_ = (float(v) for v in theta)
        self._cf = _factor(x, *theta)
        self.alpha_ = cho_solve(self._cf, yc)
        self.log_marginal_likelihood_ = log_marginal_likelihood(x, yc, *theta)
        return self

    def predict(self, X, return_std=False):
        q = np.asarray(X, dtype=float).ravel()
        ks = se_kernel(q, self.X_train_, self.sigma_f_, self.length_scale_)
        mean = self.y_mean_ + ks @ self.alpha_
        if not return_std:
            return mean
        return mean, np.sqrt(self.predictive_variance(q, ks))

    def predictive_variance(self, X, ks=None, include_noise=True):
        """Posterior variance of a new noisy measurement at ``X`` (of the
        latent friction value with ``include_noise=False``)."""
        q = np.asarray(X, dtype=float).ravel()
        if ks is None:
            ks = se_kernel(q, self.X_train_, self.sigma_f_, self.length_scale_)
        v = cho_solve(self._cf, ks.T)
        var = self.sigma_f_**2 - np.sum(ks * v.T, axis=1)
        if include_noise:
            var = var + self.sigma_n_**2
        return np.maximum(var, 0.0)

    @property
    def hyperparameters(self) -> dict:
        return {"sigma_f": self.sigma_f_, "length_scale": self.length_scale_,
                "sigma_n": self.sigma_n_}


def gpr_fit(positions, voltages, domain=None, random_state=0) -> GaussianProcessFriction:
    return GaussianProcessFriction(domain=domain, random_state=random_state).fit(
        positions, voltages)


def gpr_predict(model: GaussianProcessFriction, position):
    mean, std = model.predict(position, return_std=True)
    return mean, std**2


def fit_poly4(model, domain, n_grid: int = 201) -> tuple[Polynomial4, float]:
    """Quartic least-squares fit to the posterior mean on a uniform grid.

    Returns the polynomial and its largest deviation from the mean.
    """
    grid = np.linspace(domain[0], domain[1], n_grid)
    mean = model.predict(grid)
    # fit in a centred, scaled variable for conditioning, then expand
    c, h = 0.5 * (domain[0] + domain[1]), 0.5 * (domain[1] - domain[0])
    s = (grid - c) / h
    coef_s = np.polynomial.polynomial.polyfit(s, mean, 4)
    shift = np.polynomial.Polynomial(coef_s)(np.polynomial.Polynomial([-c / h, 1 / h]))
    coef = np.zeros(5)
    coef[: shift.coef.size] = shift.coef
    poly = Polynomial4(tuple(coef), tuple(domain))
    return poly, float(np.max(np.abs(poly(grid) - mean)))
