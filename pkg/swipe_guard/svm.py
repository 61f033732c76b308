"""RBF support vector machines solved by sequential minimal optimization.

Both the soft-margin binary SVM and the nu one-class SVM reduce to

    min 1/2 a'Qa + p'a   s.t.  y'a = const,  0 <= a_i <= C

with Q_ij = y_i y_j K(x_i, x_j). The solver picks the maximal violating pair
each iteration and stops when the KKT gap falls below the tolerance.
"""
import logging
from typing import NamedTuple

import numpy as np

from .errors import EmptyTrainingSet, SingleClassTrainingSet, SmoNonConvergence, ValidationError

LOGGER = logging.getLogger('swg.svm')

TAU = 1e-12
KKT_TOL = 1e-3
MAX_ITER = 100_000


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.sum(a * a, axis=1)[:, None] + np.sum(b * b, axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


class SmoResult(NamedTuple):
    alpha: np.ndarray
    rho: float
    iterations: int
    kkt_gap: float


def _violating_pair(alpha, grad, y, upper):
    minus_yg = -y * grad
    up = ((y > 0) & (alpha < upper)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < upper))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    up_idx = np.flatnonzero(up)
    low_idx = np.flatnonzero(low)
    ii = up_idx[np.argmax(minus_yg[up_idx])]
    jj = low_idx[np.argmin(minus_yg[low_idx])]
    return int(ii), int(jj), float(minus_yg[ii] - minus_yg[jj])


def kkt_gap(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, upper: float) -> float:
    return max(_violating_pair(alpha, grad, y, upper)[2], 0.0)


def smo_solve(kernel: np.ndarray, y: np.ndarray, p: np.ndarray, alpha0: np.ndarray, upper: float,
              tol: float = KKT_TOL, max_iter: int = MAX_ITER) -> SmoResult:
    y = y.astype(np.float64)
    Q = (y[:, None] * y[None, :]) * kernel
    QD = np.diag(Q).copy()
    alpha = alpha0.astype(np.float64).copy()
    grad = Q @ alpha + p
    for iteration in range(max_iter):
        ii, jj, gap = _violating_pair(alpha, grad, y, upper)
        if ii < 0 or gap < tol:
            break
        old_i, old_j = alpha[ii], alpha[jj]
        if y[ii] != y[jj]:
            quad = max(QD[ii] + QD[jj] + 2.0 * Q[ii, jj], TAU)
            delta = (-grad[ii] - grad[jj]) / quad
            diff = alpha[ii] - alpha[jj]
            alpha[ii] += delta
            alpha[jj] += delta
            if diff > 0:
                if alpha[jj] < 0:
                    alpha[jj], alpha[ii] = 0.0, diff
            elif alpha[ii] < 0:
                alpha[ii], alpha[jj] = 0.0, -diff
            if diff > 0:
                if alpha[ii] > upper:
                    alpha[ii], alpha[jj] = upper, upper - diff
            elif alpha[jj] > upper:
                alpha[jj], alpha[ii] = upper, upper + diff
        else:
            quad = max(QD[ii] + QD[jj] - 2.0 * Q[ii, jj], TAU)
            delta = (grad[ii] - grad[jj]) / quad
            total = alpha[ii] + alpha[jj]
            alpha[ii] -= delta
            alpha[jj] += delta
            if total > upper:
                if alpha[ii] > upper:
                    alpha[ii], alpha[jj] = upper, total - upper
            elif alpha[jj] < 0:
                alpha[jj], alpha[ii] = 0.0, total
            if total > upper:
                if alpha[jj] > upper:
                    alpha[jj], alpha[ii] = upper, total - upper
            elif alpha[ii] < 0:
                alpha[ii], alpha[jj] = 0.0, total
        grad += Q[:, ii] * (alpha[ii] - old_i) + Q[:, jj] * (alpha[jj] - old_j)
    else:
        gap = kkt_gap(alpha, grad, y, upper)
        raise SmoNonConvergence('SMO did not reach the KKT tolerance', max_iter, gap)
    gap = kkt_gap(alpha, grad, y, upper)
    return SmoResult(alpha, _rho(alpha, grad, y, upper), iteration, gap)


def _rho(alpha, grad, y, upper) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < upper)
    if free.any():
        return float(np.mean(yg[free]))
    ub, lb = np.inf, -np.inf
    for idx in range(len(alpha)):
        at_upper, at_lower = alpha[idx] >= upper, alpha[idx] <= 0
        if (at_upper and y[idx] < 0) or (at_lower and y[idx] > 0):
            ub = min(ub, yg[idx])
        elif (at_upper and y[idx] > 0) or (at_lower and y[idx] < 0):
            lb = max(lb, yg[idx])
    if np.isinf(ub) and np.isinf(lb):
        return 0.0
    if np.isinf(ub):
        return float(lb)
    if np.isinf(lb):
        return float(ub)
    return float((ub + lb) / 2.0)


class SvmRbf:
    """Binary soft-margin SVM; positive decision values mean bot."""

    def __init__(self, support_vectors, dual_coef, bias: float, gamma: float, kkt_gap: float = 0.0):
        self._support_vectors = np.array(support_vectors, dtype=np.float64)
        self._dual_coef = np.array(dual_coef, dtype=np.float64)
        self._bias = float(bias)
        self._gamma = float(gamma)
        self._kkt_gap = float(kkt_gap)

    @property
    def support_vectors(self) -> np.ndarray:
        return self._support_vectors

    @property
    def dual_coef(self) -> np.ndarray:
        return self._dual_coef

    @property
    def bias(self) -> float:
        return self._bias

    @property
    def kkt_gap(self) -> float:
        return self._kkt_gap

    @classmethod
    def fit(cls, X: np.ndarray, is_bot: np.ndarray, C: float, gamma: float, tol: float = KKT_TOL,
            max_iter: int = MAX_ITER) -> 'SvmRbf':
        if len(X) == 0:
            raise EmptyTrainingSet('SVM training set is empty')
        y = np.where(is_bot, 1.0, -1.0)
        if np.all(y > 0) or np.all(y < 0):
            raise SingleClassTrainingSet('SVM training needs both human and bot samples')
        if not C > 0 or not gamma > 0:
            raise ValidationError('SVM needs C > 0 and gamma > 0')
        kernel = rbf_kernel(X, X, gamma)
        result = smo_solve(kernel, y, -np.ones(len(X)), np.zeros(len(X)), C, tol, max_iter)
        support = result.alpha > 0
        LOGGER.debug('SVM converged in %d iterations with %d support vectors (gap %.2g)', result.iterations,
                     int(support.sum()), result.kkt_gap)
        return cls(X[support], result.alpha[support] * y[support], -result.rho, gamma, result.kkt_gap)

    def decision(self, X: np.ndarray) -> np.ndarray:
        return rbf_kernel(np.atleast_2d(X), self._support_vectors, self._gamma) @ self._dual_coef + self._bias

    def to_dict(self) -> dict:
        return {'support_vectors': self._support_vectors.tolist(), 'dual_coef': self._dual_coef.tolist(),
                'bias': self._bias, 'gamma': self._gamma, 'kkt_gap': self._kkt_gap}

    @classmethod
    def from_dict(cls, doc: dict) -> 'SvmRbf':
        return cls(np.array(doc['support_vectors']).reshape(len(doc['dual_coef']), -1), doc['dual_coef'],
                   doc['bias'], doc['gamma'], doc.get('kkt_gap', 0.0))


class OneClassSvm:
    """nu one-class SVM; positive anomaly scores fall outside the learned region."""

    def __init__(self, support_vectors, dual_coef, rho: float, gamma: float, kkt_gap: float = 0.0):
        self._support_vectors = np.array(support_vectors, dtype=np.float64)
        self._dual_coef = np.array(dual_coef, dtype=np.float64)
        self._rho = float(rho)
        self._gamma = float(gamma)
        self._kkt_gap = float(kkt_gap)

    @property
    def support_vectors(self) -> np.ndarray:
        return self._support_vectors

    @property
    def rho(self) -> float:
        return self._rho

    @property
    def kkt_gap(self) -> float:
        return self._kkt_gap

    @classmethod
    def fit(cls, X: np.ndarray, nu: float, gamma: float, tol: float = KKT_TOL,
            max_iter: int = MAX_ITER) -> 'OneClassSvm':
        count = len(X)
        if count == 0:
            raise EmptyTrainingSet('one-class SVM training set is empty')
        if not 0 < nu <= 1 or not gamma > 0:
            raise ValidationError('one-class SVM needs nu in (0, 1] and gamma > 0')
        # alpha in [0, 1] summing to nu * l
        alpha0 = np.zeros(count)
        full = int(nu * count)
        alpha0[:full] = 1.0
        if full < count:
            alpha0[full] = nu * count - full
        kernel = rbf_kernel(X, X, gamma)
        result = smo_solve(kernel, np.ones(count), np.zeros(count), alpha0, 1.0, tol, max_iter)
        support = result.alpha > 0
        LOGGER.debug('one-class SVM converged in %d iterations with %d support vectors', result.iterations,
                     int(support.sum()))
        return cls(X[support], result.alpha[support], result.rho, gamma, result.kkt_gap)

    def decision(self, X: np.ndarray) -> np.ndarray:
        return rbf_kernel(np.atleast_2d(X), self._support_vectors, self._gamma) @ self._dual_coef - self._rho

    def anomaly_score(self, X: np.ndarray) -> np.ndarray:
        return -self.decision(X)

    def to_dict(self) -> dict:
        return {'support_vectors': self._support_vectors.tolist(), 'dual_coef': self._dual_coef.tolist(),
                'rho': self._rho, 'gamma': self._gamma, 'kkt_gap': self._kkt_gap}

    @classmethod
    def from_dict(cls, doc: dict) -> 'OneClassSvm':
        return cls(np.array(doc['support_vectors']).reshape(len(doc['dual_coef']), -1), doc['dual_coef'],
                   doc['rho'], doc['gamma'], doc.get('kkt_gap', 0.0))
