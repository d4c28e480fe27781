"""
Built-in learners. Each entry maps a library name to the scikit-learn
estimator it builds, the outcome types it supports and its tunable
hyperparameters with their defaults.
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Tuple

import numpy as np
from sklearn.dummy import DummyRegressor
from sklearn.ensemble import (
    GradientBoostingClassifier,
    GradientBoostingRegressor,
    RandomForestClassifier,
    RandomForestRegressor,
)
from sklearn.linear_model import Lasso, LassoCV, LinearRegression, LogisticRegression, RidgeCV
from sklearn.neighbors import KNeighborsRegressor
from sklearn.tree import DecisionTreeClassifier, DecisionTreeRegressor

from .stepwise import ForwardStepwiseRegression

REGRESSION = 'regression'
WEIGHTED_BINARY = 'weighted-binary'
BOTH = 'both'

PSEUDO = 'pseudo'
BINARY = 'binary'
MODES = (PSEUDO, BINARY)

SINGULAR_RIDGE_ALPHA = 1e-6
RIDGE_ALPHAS = tuple(float(a) for a in np.logspace(-3, 3, 13))


@dataclass(frozen=True)
class LearnerSpec:
    kind: str
    defaults: Dict[str, Any] = field(default_factory=dict)
    build: Callable[[Dict[str, Any], str, int], Any] = None
    screening: Any = None
    description: str = ''

    def supports(self, mode: str) -> bool:
        if mode == PSEUDO:
            return self.kind in (REGRESSION, BOTH)
        return self.kind in (WEIGHTED_BINARY, BOTH)


def _mean(params, mode, seed):
    return DummyRegressor(strategy='mean')


def _ols(params, mode, seed):
    return LinearRegression()


def _stepwise(params, mode, seed):
    return ForwardStepwiseRegression(max_steps=params['max_steps'])


def _ridge(params, mode, seed):
    return RidgeCV(alphas=params['alphas'])


def _lasso(params, mode, seed):
    if params['alpha'] is None:
        return LassoCV(cv=params['cv'], max_iter=params['max_iter'])
    return Lasso(alpha=params['alpha'], tol=params['tol'], max_iter=params['max_iter'])


def _knn(params, mode, seed):
    return KNeighborsRegressor(n_neighbors=params['n_neighbors'])


def _cart(params, mode, seed):
    shared = dict(
        min_samples_leaf=params['min_samples_leaf'],
        min_samples_split=params['min_samples_split'],
        max_depth=params['max_depth'],
        random_state=seed,
    )
    if mode == BINARY:
        return DecisionTreeClassifier(criterion='gini', **shared)
    return DecisionTreeRegressor(**shared)


def _random_forest(params, mode, seed):
    shared = dict(
        n_estimators=params['n_estimators'],
        min_samples_leaf=params['min_samples_leaf'],
        max_features=params['max_features'],
        random_state=seed,
        n_jobs=1,
    )
    if mode == BINARY:
        return RandomForestClassifier(**shared)
    return RandomForestRegressor(**shared)


def _boosting(learning_rate):
    def build(params, mode, seed):
        shared = dict(
            n_estimators=params['n_estimators'],
            max_depth=params['max_depth'],
            learning_rate=params['learning_rate'],
            random_state=seed,
        )
        if mode == BINARY:
            return GradientBoostingClassifier(**shared)
        return GradientBoostingRegressor(**shared)

    return LearnerSpec(
        kind=BOTH,
        defaults={'n_estimators': 200, 'max_depth': 2, 'learning_rate': learning_rate},
        build=build,
        description=f"gradient boosted depth-2 trees, 200 rounds, learning rate {learning_rate}",
    )


def _logistic(params, mode, seed):
    return LogisticRegression(penalty=None, max_iter=params['max_iter'])


def _lasso_logistic(params, mode, seed):
    return LogisticRegression(penalty='l1', C=params['C'], solver='liblinear', random_state=seed,
                              max_iter=params['max_iter'])


CATALOGUE: Dict[str, LearnerSpec] = {
    'mean': LearnerSpec(REGRESSION, {}, _mean, description="intercept only"),
    'ols_screen': LearnerSpec(REGRESSION, {}, _ols, screening=0.1,
                              description="least squares on correlation-screened features"),
    'stepwise': LearnerSpec(REGRESSION, {'max_steps': None}, _stepwise,
                            description="forward selection by AIC"),
    'ridge': LearnerSpec(REGRESSION, {'alphas': RIDGE_ALPHAS}, _ridge,
                         description="ridge regression, penalty chosen by leave-one-out"),
    'lasso': LearnerSpec(REGRESSION, {'alpha': None, 'cv': 5, 'tol': 1e-10, 'max_iter': 100000}, _lasso,
                         description="lasso, penalty chosen by 5-fold CV unless alpha is fixed"),
    'cart': LearnerSpec(BOTH, {'min_samples_leaf': 5, 'min_samples_split': 20, 'max_depth': None}, _cart,
                        description="single regression/classification tree"),
    'random_forest': LearnerSpec(BOTH, {'n_estimators': 100, 'min_samples_leaf': 5, 'max_features': 1.0},
                                 _random_forest, description="bagged trees"),
    'knn': LearnerSpec(REGRESSION, {'n_neighbors': 10}, _knn, description="k nearest neighbours"),
    'xgb_200_2_0.01': _boosting(0.01),
    'xgb_200_2_0.1': _boosting(0.1),
    'xgb_200_2_0.2': _boosting(0.2),
    'logistic': LearnerSpec(WEIGHTED_BINARY, {'max_iter': 1000}, _logistic,
                            description="unpenalised logistic regression"),
    'lasso_logistic': LearnerSpec(WEIGHTED_BINARY, {'C': 1.0, 'max_iter': 1000}, _lasso_logistic,
                                  description="L1-penalised logistic regression"),
}

PSEUDO_LIBRARY: Tuple[str, ...] = (
    'ols_screen', 'stepwise', 'ridge', 'lasso', 'cart', 'random_forest', 'knn',
    'xgb_200_2_0.01', 'xgb_200_2_0.1', 'xgb_200_2_0.2',
)
BINARY_LIBRARY: Tuple[str, ...] = (
    'logistic', 'lasso_logistic', 'cart', 'random_forest',
    'xgb_200_2_0.01', 'xgb_200_2_0.1', 'xgb_200_2_0.2',
)
