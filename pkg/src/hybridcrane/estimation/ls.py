"""Linear least squares with estimate-correlation diagnostics."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

log = logging.getLogger(__name__)

MAX_CONDITION = 1e10


class IllConditionedError(ValueError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


@dataclass(frozen=True)
class RegressionProblem:
    phi: np.ndarray
    y: np.ndarray
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        if phi.shape[0] == 1 and np.ndim(self.phi) == 1:
            phi = phi.T
        y = np.asarray(self.y, dtype=float).ravel()
        if phi.shape[0] != y.size:
            raise ValueError(f"{phi.shape[0]} regressor rows but {y.size} targets")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(y))):
            raise ValueError("regression data must be finite")
        labels = tuple(self.labels) or tuple(f"theta{i}" for i in range(phi.shape[1]))
        if len(labels) != phi.shape[1]:
            raise ValueError("one label per column required")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "labels", labels)
        if phi.shape[0] < 10 * phi.shape[1]:
            log.warning("only %d rows for %d parameters", phi.shape[0], phi.shape[1])

    @classmethod
    def stack(cls, problems) -> "RegressionProblem":
        problems = list(problems)
        return cls(np.vstack([p.phi for p in problems]),
                   np.concatenate([p.y for p in problems]), problems[0].labels)


@dataclass(frozen=True)
class LsResult:
    theta: np.ndarray
    residual_rms: float
    corr: np.ndarray
    labels: tuple[str, ...] = ()
    cov: np.ndarray = field(default=None, repr=False)

    def __getitem__(self, label: str) -> float:
        return float(self.theta[self.labels.index(label)])

    def as_dict(self) -> dict:
        return {k: float(v) for k, v in zip(self.labels, self.theta)}

    def max_offdiag(self) -> float:
        c = np.abs(self.corr - np.eye(self.corr.shape[0]))
        return float(c.max()) if c.size else 0.0


def _collinear_columns(phi, labels):
    # the smallest right singular vector names the columns that nearly cancel
    _, _, vt = np.linalg.svd(phi / np.linalg.norm(phi, axis=0), full_matrices=False)
    v = np.abs(vt[-1])
    return [labels[i] for i in np.nonzero(v > 0.1 * v.max())[0]]


def ls_solve(problem: RegressionProblem) -> LsResult:
    """Least-squares estimate with covariance-derived correlation matrix."""
    phi, y, labels = problem.phi, problem.y, problem.labels
    norms = np.linalg.norm(phi, axis=0)
    if np.any(norms == 0):
        zero = [labels[i] for i in np.nonzero(norms == 0)[0]]
        raise IllConditionedError(f"all-zero regressor column(s): {', '.join(zero)}", zero)
    scaled = phi / norms
    cond = np.linalg.cond(scaled)
    if not cond < MAX_CONDITION:
        cols = _collinear_columns(phi, labels)
        raise IllConditionedError(
            f"condition number {cond:.3g}; near-collinear columns: {', '.join(cols)}", cols)
    q, r = np.linalg.qr(scaled)
    theta_s = np.linalg.solve(r, q.T @ y)
    theta = theta_s / norms
    resid = y - phi @ theta
    n, p = phi.shape
    rinv = np.linalg.inv(r)
    cov_s = rinv @ rinv.T
    sigma2 = float(resid @ resid) / max(n - p, 1)
    cov = sigma2 * cov_s / np.outer(norms, norms)
    d = np.sqrt(np.diag(cov_s))
    corr = cov_s / np.outer(d, d)
    corr = 0.5 * (corr + corr.T)
    np.fill_diagonal(corr, 1.0)
    return LsResult(theta, float(np.sqrt(np.mean(resid**2))), np.clip(corr, -1, 1), labels, cov)


class LinearLS(BaseEstimator, RegressorMixin):
    """Least-squares regressor exposing the correlation of its estimates.

    No intercept is fitted; include a column of ones if one is wanted.
    """

    def __init__(self, labels=None):
        self.labels = labels

    def fit(self, X, y):
        res = ls_solve(RegressionProblem(X, y, tuple(self.labels or ())))
        self.coef_ = res.theta
        self.corr_ = res.corr
        self.residual_rms_ = res.residual_rms
        self.result_ = res
        self.n_features_in_ = res.theta.size
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return (X.reshape(-1, 1) if X.ndim == 1 else X) @ self.coef_
