"""Classical significance tests used as comparison columns.

Three baselines: the t-test on a linear model's coefficients, a
bootstrap Z-test over network refits, and a likelihood ratio test
between an unconstrained network and one with the tested feature's
first-layer weights pinned to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from . import network
from .network import NetworkArchitecture
from .optim import Adam
from .validation import (
    as_float_matrix,
    as_float_vector,
    check_feature_index,
    check_matching_rows,
)


# -- tail areas ---------------------------------------------------------

def normal_sf(z) -> float:
    """Upper tail of the standard normal."""
    return float(0.5 * special.erfc(z / np.sqrt(2.0)))


def student_t_sf(t, df) -> float:
    """Upper tail of Student's t via the regularized incomplete beta."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    t = float(t)
    x = df / (df + t * t)
    tail = 0.5 * special.betainc(df / 2.0, 0.5, x)
    return float(tail if t >= 0 else 1.0 - tail)


def chi2_sf(x, df) -> float:
    """Upper tail of chi-square via the regularized incomplete gamma."""
    if df < 1:
        raise ValueError(f"df must be >= 1, got {df}")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


# -- linear model -------------------------------------------------------

@dataclass
class LinearFit:
    """OLS fit with intercept first in the coefficient vector."""

    coefficients: np.ndarray  # length d+1, intercept at index 0
    standard_errors: np.ndarray
    residual_variance: float
    n: int
    d: int


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    feature_index: int
    df: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


def ols_fit(X, y) -> LinearFit:
    """Least squares with intercept; errors name near-dependent columns."""
    X = as_float_matrix(X)
    y = as_float_vector(y, "y")
    check_matching_rows(X, y)
    n, d = X.shape
    if n <= d + 1:
        raise ValueError(f"need n > d+1 rows for OLS, got n={n}, d={d}")
    A = np.column_stack([np.ones(n), X])
    Q, R = np.linalg.qr(A)
    diag = np.abs(np.diag(R))
    tol = np.finfo(np.float64).eps * max(n, d + 1) * (diag.max() if diag.size else 1.0)
    dependent = np.nonzero(diag <= tol)[0]
    if dependent.size:
        names = ", ".join(
            "intercept" if k == 0 else f"feature {k - 1}" for k in dependent
        )
        raise ValueError(f"design matrix is rank deficient; dependent columns: {names}")
    beta = np.linalg.solve(R, Q.T @ y)
    resid = y - A @ beta
    dof = n - d - 1
    sigma2 = float(resid @ resid) / dof
    r_inv = np.linalg.solve(R, np.eye(d + 1))
    cov_diag = sigma2 * np.sum(r_inv * r_inv, axis=1)
    return LinearFit(
        coefficients=beta,
        standard_errors=np.sqrt(cov_diag),
        residual_variance=sigma2,
        n=n,
        d=d,
    )


def ttest_linear(X, y, j: int) -> TestResult:
    """Two-sided t-test of the linear coefficient of feature j."""
    X = as_float_matrix(X)
    j = check_feature_index(j, X.shape[1])
    fit = ols_fit(X, y)
    t = fit.coefficients[j + 1] / fit.standard_errors[j + 1]
    df = fit.n - fit.d - 1
    p = 2.0 * student_t_sf(abs(t), df)
    return TestResult(
        statistic=float(t), p_value=min(p, 1.0), method="ttest", feature_index=j, df=df
    )


# -- network refits -----------------------------------------------------

@dataclass(frozen=True)
class PointFitConfig:
    """Budget for deterministic (non-Bayesian) network fits."""

    epochs: int = 30
    batch_size: int = 64
    learning_rate: float = 1e-2

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


def fit_point_network(
    arch: NetworkArchitecture,
    X,
    y,
    config: PointFitConfig,
    seed: int,
    frozen_feature: int | None = None,
) -> np.ndarray:
    """Adam on batch MSE; optionally pins one input feature's first-layer
    weights to zero throughout training (the restricted model of the LRT)."""
    X = as_float_matrix(X)
    y = as_float_vector(y, "y")
    check_matching_rows(X, y)
    rng = np.random.default_rng(seed)
    params = network.init_parameters(arch, rng)
    w_sl, _, (fan_in, fan_out) = arch.layer_slices()[0]
    mask_rows = None
    if frozen_feature is not None:
        frozen_feature = check_feature_index(frozen_feature, arch.input_dim)
        # row `frozen_feature` of the first weight matrix, flattened C-order
        mask_rows = w_sl.start + frozen_feature * fan_out + np.arange(fan_out)
        params[mask_rows] = 0.0
    optimizer = Adam(params.shape[0], config.learning_rate)
    n = X.shape[0]
    batch = min(config.batch_size, n)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            grad = network.param_gradient(arch, params, X[idx], y[idx])
            if mask_rows is not None:
                grad[mask_rows] = 0.0
            params -= optimizer.step(grad)
            if mask_rows is not None:
                params[mask_rows] = 0.0
    return params


def _bootstrap_statistics(
    X, y, arch: NetworkArchitecture, config: PointFitConfig, b_resamples: int, seed: int
) -> np.ndarray:
    """(B, d) matrix of global squared-gradient statistics, one row per refit."""
    X = as_float_matrix(X)
    y = as_float_vector(y, "y")
    n = X.shape[0]
    root = np.random.SeedSequence(seed)
    stats = np.empty((b_resamples, X.shape[1]))
    for b, child in enumerate(root.spawn(b_resamples)):
        rng = np.random.default_rng(child)
        idx = rng.integers(0, n, size=n)
        Xb, yb = X[idx], y[idx]
        fit_seed = int(rng.integers(0, 2**63 - 1))
        params = fit_point_network(arch, Xb, yb, config, fit_seed)
        grads = network.input_gradient_batch(arch, params, Xb)
        stats[b] = np.mean(grads * grads, axis=0)
    return stats


def bootstrap_test(
    X,
    y,
    arch: NetworkArchitecture,
    config: PointFitConfig,
    b_resamples: int,
    j: int,
    seed: int,
    statistics_matrix: np.ndarray | None = None,
) -> TestResult:
    """Z-test of the global squared-gradient statistic over B refits.

    Pass a precomputed ``statistics_matrix`` (from
    :func:`_bootstrap_statistics`) to share the refits across features.
    """
    if b_resamples < 20:
        raise ValueError(f"need at least 20 resamples, got {b_resamples}")
    X = as_float_matrix(X)
    j = check_feature_index(j, X.shape[1])
    if statistics_matrix is None:
        statistics_matrix = _bootstrap_statistics(X, y, arch, config, b_resamples, seed)
    values = statistics_matrix[:, j]
    mean = float(values.mean())
    std = float(values.std(ddof=1))
    if std == 0.0:
        p = 1.0 if mean == 0.0 else 0.0
        z = 0.0 if mean == 0.0 else np.inf
    else:
        z = mean / std
        p = 2.0 * normal_sf(abs(z))
    return TestResult(
        statistic=float(z), p_value=min(p, 1.0), method="bootstrap", feature_index=j
    )


def likelihood_ratio_test(
    X,
    y,
    arch: NetworkArchitecture,
    config: PointFitConfig,
    j: int,
    seed: int,
) -> TestResult:
    """Chi-square test of nested fits with feature j's first-layer weights
    pinned at zero; degrees of freedom equal the number of pinned weights."""
    X = as_float_matrix(X)
    y = as_float_vector(y, "y")
    j = check_feature_index(j, X.shape[1])
    n = X.shape[0]
    full = fit_point_network(arch, X, y, config, seed)
    restricted = fit_point_network(arch, X, y, config, seed, frozen_feature=j)
    rss_full = float(np.sum((network.forward_batch(arch, full, X) - y) ** 2))
    rss_restricted = float(np.sum((network.forward_batch(arch, restricted, X) - y) ** 2))
    if rss_full == 0.0:
        raise ValueError("perfect unconstrained fit; likelihood ratio undefined")
    lr = n * np.log(rss_restricted / rss_full)
    df = arch.hidden_widths[0]
    p = chi2_sf(max(lr, 0.0), df)
    return TestResult(
        statistic=float(lr), p_value=p, method="lrt", feature_index=j, df=float(df)
    )
