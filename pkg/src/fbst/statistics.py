"""Feature importance statistics evaluated at one parameter realization.

Each statistic maps (network parameters, data context, feature index) to
a scalar.  Applying a statistic across posterior parameter draws yields
the sample its evidence is computed from.  Granularities:

* ``grad_instance``: d f(x) / d x_j at a single input.
* ``sqgrad_local``: mean squared gradient over a subset of inputs, the
  subset's empirical distribution acting as the weighting measure.
* ``sqgrad_global``: the same over the whole dataset.
* ``lrp``: epsilon-stabilized layer-wise relevance propagation.
* ``deeplift``: rescale-rule contribution against a reference input.
* ``lime``: weighted ridge coefficient of a local surrogate model.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import network
from .network import NetworkArchitecture, _activate_grad
from .validation import as_float_matrix, as_float_vector, check_feature_index

STATISTIC_KINDS = (
    "grad_instance",
    "sqgrad_local",
    "sqgrad_global",
    "lrp",
    "deeplift",
    "lime",
)

# instance-level statistic kinds usable in the batched pipeline
INSTANCE_KINDS = ("grad_instance", "lrp", "deeplift", "lime")


@dataclass(frozen=True)
class LimeConfig:
    """Local surrogate settings.

    ``perturbation_sigma`` is the per-feature Gaussian perturbation
    scale; leave it None and call :meth:`resolved` with the feature
    standard deviations to get the default of 0.3 of each feature's
    std.  ``kernel_width`` of None resolves to 0.75 * sqrt(n_features).
    """

    num_perturbations: int = 500
    perturbation_scale: float = 0.3
    perturbation_sigma: tuple | None = None
    kernel_width: float | None = None
    ridge_penalty: float = 1e-3

    def resolved(self, feature_stds) -> "LimeConfig":
        if self.perturbation_sigma is not None:
            return self
        stds = np.asarray(feature_stds, dtype=np.float64)
        return replace(self, perturbation_sigma=tuple(self.perturbation_scale * stds))


@dataclass(frozen=True)
class StatisticQuery:
    """One (statistic kind, feature, target) request.

    Exactly one of ``x`` (instance kinds), ``subset`` (sqgrad_local) or
    ``dataset`` (sqgrad_global) must be provided, matching the kind.
    """

    kind: str
    feature: int
    x: np.ndarray | None = None
    subset: np.ndarray | None = None
    dataset: np.ndarray | None = None
    reference: np.ndarray | None = None
    lrp_epsilon: float = 1e-6
    lime: LimeConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STATISTIC_KINDS:
            raise ValueError(f"unknown statistic kind {self.kind!r}")
        needs = {
            "grad_instance": "x",
            "lrp": "x",
            "deeplift": "x",
            "lime": "x",
            "sqgrad_local": "subset",
            "sqgrad_global": "dataset",
        }[self.kind]
        if getattr(self, needs) is None:
            raise ValueError(f"statistic {self.kind!r} requires a {needs} target")
        if self.kind == "deeplift" and self.reference is None:
            raise ValueError("deeplift requires a reference input")


@dataclass
class StatisticSample:
    """Posterior sample of one statistic: values[i] belongs to draw i."""

    values: np.ndarray
    query: StatisticQuery

    def __post_init__(self):
        self.values = as_float_vector(self.values, "statistic values")


def stat_grad_instance(arch: NetworkArchitecture, params, x, j: int) -> float:
    j = check_feature_index(j, arch.input_dim)
    return float(network.input_gradient(arch, params, x)[j])


def stat_sqgrad_local(arch: NetworkArchitecture, params, subset, j: int) -> float:
    """Mean of (d f / d x_j)^2 over the subset's empirical distribution."""
    j = check_feature_index(j, arch.input_dim)
    subset = as_float_matrix(subset, "subset")
    if subset.shape[0] == 0:
        raise ValueError("subset must be non-empty")
    grads = network.input_gradient_batch(arch, params, subset)
    return float(np.mean(grads[:, j] ** 2))


def stat_sqgrad_global(arch: NetworkArchitecture, params, dataset, j: int) -> float:
    return stat_sqgrad_local(arch, params, dataset, j)


def lrp_relevances(arch: NetworkArchitecture, params, X, epsilon: float = 1e-6) -> np.ndarray:
    """Input relevances under the epsilon rule, one row per instance.

    Relevance starts at the output value and is redistributed through
    each layer as R_i = a_i * sum_k w_ik / (z_k + eps * sign(z_k)) * R_k;
    biases absorb no relevance.
    """
    X = as_float_matrix(X)
    _, trace = network.forward_batch(arch, params, X, return_trace=True)
    layers = network.unpack_parameters(arch, params)
    relevance = trace.pre_activations[-1].copy()  # output head is linear
    for idx in range(len(layers) - 1, -1, -1):
        W, _ = layers[idx]
        z = trace.pre_activations[idx]
        stabilized = z + epsilon * np.where(z >= 0.0, 1.0, -1.0)
        message = relevance / stabilized
        a_prev = trace.inputs if idx == 0 else trace.activations[idx - 1]
        relevance = a_prev * (message @ W.T)
    return relevance


def stat_lrp(arch: NetworkArchitecture, params, x, j: int, epsilon: float = 1e-6) -> float:
    j = check_feature_index(j, arch.input_dim)
    x = as_float_vector(x, "x")
    return float(lrp_relevances(arch, params, x.reshape(1, -1), epsilon)[0, j])


def deeplift_contributions(arch: NetworkArchitecture, params, X, reference) -> np.ndarray:
    """Rescale-rule contributions against a reference, one row per instance.

    Nonlinearities use the secant multiplier (a - a_ref) / (z - z_ref),
    falling back to the exact derivative when |z - z_ref| < 1e-7, so the
    contributions sum to f(x) - f(reference).
    """
    X = as_float_matrix(X)
    reference = as_float_vector(reference, "reference")
    if reference.shape[0] != arch.input_dim:
        raise ValueError(
            f"reference has {reference.shape[0]} features, expected {arch.input_dim}"
        )
    _, trace = network.forward_batch(arch, params, X, return_trace=True)
    _, ref_trace = network.forward_batch(
        arch, params, reference.reshape(1, -1), return_trace=True
    )
    layers = network.unpack_parameters(arch, params)
    multiplier = np.ones((X.shape[0], 1))  # d out / d z_last
    for idx in range(len(layers) - 1, 0, -1):
        W, _ = layers[idx]
        multiplier = multiplier @ W.T
        z = trace.pre_activations[idx - 1]
        a = trace.activations[idx - 1]
        dz = z - ref_trace.pre_activations[idx - 1]
        da = a - ref_trace.activations[idx - 1]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            secant = np.where(
                np.abs(dz) < 1e-7,
                _activate_grad(z, arch.activation),
                da / np.where(dz == 0.0, 1.0, dz),
            )
        multiplier = multiplier * secant
    W0, _ = layers[0]
    return (X - reference) * (multiplier @ W0.T)


def stat_deeplift(arch: NetworkArchitecture, params, x, reference, j: int) -> float:
    j = check_feature_index(j, arch.input_dim)
    x = as_float_vector(x, "x")
    return float(deeplift_contributions(arch, params, x.reshape(1, -1), reference)[0, j])


def lime_coefficients(
    arch: NetworkArchitecture,
    params,
    x,
    config: LimeConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """All surrogate coefficients for one instance; deterministic per rng."""
    x = as_float_vector(x, "x")
    d = x.shape[0]
    if config.perturbation_sigma is None:
        raise ValueError(
            "LimeConfig.perturbation_sigma is unresolved; call resolved(feature_stds)"
        )
    sigma = np.asarray(config.perturbation_sigma, dtype=np.float64)
    if sigma.ndim == 0:
        sigma = np.full(d, float(sigma))
    if np.all(sigma == 0.0):
        raise ValueError("degenerate perturbations: all perturbation sigmas are zero")
    n = config.num_perturbations
    Z = x + rng.standard_normal((n, d)) * sigma
    preds = network.forward_batch(arch, params, Z)
    kernel_width = (
        0.75 * np.sqrt(d) if config.kernel_width is None else config.kernel_width
    )
    dist_sq = np.sum((Z - x) ** 2, axis=1)
    weights = np.exp(-dist_sq / kernel_width**2)

    # weighted ridge with an unpenalized intercept
    A = np.column_stack([np.ones(n), Z])
    WA = A * weights[:, None]
    gram = A.T @ WA
    penalty = np.full(d + 1, config.ridge_penalty)
    penalty[0] = 0.0
    gram[np.diag_indices_from(gram)] += penalty
    rhs = WA.T @ preds
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"singular surrogate regression: {exc}") from exc
    return beta[1:]


def stat_lime(
    arch: NetworkArchitecture,
    params,
    x,
    j: int,
    config: LimeConfig,
    rng: np.random.Generator,
) -> float:
    j = check_feature_index(j, arch.input_dim)
    return float(lime_coefficients(arch, params, x, config, rng)[j])


def _instance_row(arch, params, X, kind, reference, lrp_epsilon) -> np.ndarray:
    if kind == "grad_instance":
        return network.input_gradient_batch(arch, params, X)
    if kind == "lrp":
        return lrp_relevances(arch, params, X, lrp_epsilon)
    if kind == "deeplift":
        return deeplift_contributions(arch, params, X, reference)
    raise ValueError(f"{kind!r} is not an instance statistic")


def statistic_distribution(
    draws, arch: NetworkArchitecture, query: StatisticQuery
) -> StatisticSample:
    """Apply the query's statistic once per posterior draw."""
    parameters = draws.parameters
    m = parameters.shape[0]
    values = np.empty(m)
    for i in range(m):
        try:
            theta = parameters[i]
            if query.kind == "grad_instance":
                values[i] = stat_grad_instance(arch, theta, query.x, query.feature)
            elif query.kind == "sqgrad_local":
                values[i] = stat_sqgrad_local(arch, theta, query.subset, query.feature)
            elif query.kind == "sqgrad_global":
                values[i] = stat_sqgrad_global(arch, theta, query.dataset, query.feature)
            elif query.kind == "lrp":
                values[i] = stat_lrp(arch, theta, query.x, query.feature, query.lrp_epsilon)
            elif query.kind == "deeplift":
                values[i] = stat_deeplift(
                    arch, theta, query.x, query.reference, query.feature
                )
            else:  # lime, independent stream per draw
                rng = np.random.default_rng(np.random.SeedSequence((query.seed, i)))
                values[i] = stat_lime(
                    arch, theta, query.x, query.feature, query.lime, rng
                )
        except Exception as exc:
            raise RuntimeError(f"statistic failed at posterior draw {i}: {exc}") from exc
    return StatisticSample(values=values, query=query)


def instance_statistics(
    arch: NetworkArchitecture,
    draws,
    X,
    kind: str,
    *,
    reference=None,
    lrp_epsilon: float = 1e-6,
    lime_config: LimeConfig | None = None,
    seed: int = 0,
    features=None,
) -> np.ndarray:
    """Instance-level statistic for every (draw, instance, feature).

    Returns an (m, n, k) array where k is the number of requested
    features (all of them by default).  One forward/backward pass per
    draw covers every instance and feature at once, except for lime
    which needs a surrogate fit per (draw, instance).
    """
    if kind not in INSTANCE_KINDS:
        raise ValueError(f"{kind!r} is not an instance statistic kind")
    X = as_float_matrix(X)
    parameters = draws.parameters
    m = parameters.shape[0]
    cols = np.arange(arch.input_dim) if features is None else np.asarray(features)
    out = np.empty((m, X.shape[0], cols.shape[0]))
    if kind == "lime":
        config = (lime_config or LimeConfig()).resolved(X.std(axis=0, ddof=0))
        for i in range(m):
            for r in range(X.shape[0]):
                rng = np.random.default_rng(np.random.SeedSequence((seed, i, r)))
                coefs = lime_coefficients(arch, parameters[i], X[r], config, rng)
                out[i, r] = coefs[cols]
        return out
    if kind == "deeplift" and reference is None:
        raise ValueError("deeplift requires a reference input")
    for i in range(m):
        out[i] = _instance_row(arch, parameters[i], X, kind, reference, lrp_epsilon)[:, cols]
    return out
