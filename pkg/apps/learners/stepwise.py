import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.linear_model import LinearRegression
from sklearn.utils.validation import check_is_fitted, check_X_y, check_array


def aic(sse: float, n: int, k: int) -> float:
    """Gaussian AIC up to a constant; k counts the intercept."""
    return n * np.log(max(sse, np.finfo(float).tiny) / n) + 2 * k


class ForwardStepwiseRegression(RegressorMixin, BaseEstimator):
    """Least squares grown one feature at a time while the AIC keeps improving."""

    def __init__(self, max_steps=None):
        self.max_steps = max_steps

    def _sse(self, X, y, columns):
        if not columns:
            return float(np.sum((y - y.mean()) ** 2))
        model = LinearRegression().fit(X[:, columns], y)
        return float(np.sum((y - model.predict(X[:, columns])) ** 2))

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        n, p = X.shape
        limit = p if self.max_steps is None else min(p, self.max_steps)
        chosen = []
        best = aic(self._sse(X, y, chosen), n, 1)
        self.path_ = [best]
        while len(chosen) < limit:
            candidates = [j for j in range(p) if j not in chosen]
            scores = [aic(self._sse(X, y, chosen + [j]), n, len(chosen) + 2) for j in candidates]
            step = int(np.argmin(scores))
            if scores[step] >= best:
                break
            best = scores[step]
            chosen.append(candidates[step])
            self.path_.append(best)

        self.support_ = np.array(chosen, dtype=int)
        self.n_features_in_ = p
        if chosen:
            model = LinearRegression().fit(X[:, chosen], y)
            self.coef_ = np.zeros(p)
            self.coef_[chosen] = model.coef_
            self.intercept_ = float(model.intercept_)
        else:
            self.coef_ = np.zeros(p)
            self.intercept_ = float(y.mean())
        return self

    def predict(self, X):
        check_is_fitted(self, 'coef_')
        X = check_array(X)
        return X @ self.coef_ + self.intercept_
