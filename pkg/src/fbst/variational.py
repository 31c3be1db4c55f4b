"""Variational Bayesian training of the network.

The posterior over all weights and biases is a diagonal Gaussian with
location ``mu`` and scale ``softplus(rho)``, fit by stochastic gradient
descent on the negative evidence lower bound: a reparameterized Monte
Carlo estimate of the Gaussian negative log likelihood of each batch
plus a closed-form KL penalty against the prior.  The KL penalty is
scaled so that one pass over the data counts it exactly once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from . import network
from .network import NetworkArchitecture
from .optim import Adam
from .validation import as_float_matrix, as_float_vector, check_matching_rows


class TrainingDiverged(RuntimeError):
    """Raised when the training loss becomes non-finite."""


@dataclass(frozen=True)
class GaussianPrior:
    """Independent Gaussian prior over every parameter."""

    mean: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.mean):
            raise ValueError(f"prior mean must be finite, got {self.mean}")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"prior sigma must be positive, got {self.sigma}")


@dataclass
class VariationalPosterior:
    """Diagonal Gaussian over the flat parameter vector.

    The per-parameter standard deviation is softplus(rho), which keeps
    it strictly positive under unconstrained optimization.
    """

    mu: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.mu = as_float_vector(self.mu, "mu")
        self.rho = as_float_vector(self.rho, "rho")
        if self.mu.shape != self.rho.shape:
            raise ValueError(
                f"mu and rho lengths differ: {self.mu.shape[0]} vs {self.rho.shape[0]}"
            )

    @property
    def std(self) -> np.ndarray:
        return softplus(self.rho)

    def __len__(self) -> int:
        return self.mu.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 128
    learning_rate: float = 1e-2
    mc_samples_per_step: int = 1
    kl_scale: float | None = None  # None resolves to 1/num_batches at fit time
    observation_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "mc_samples_per_step"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        for name in ("learning_rate", "observation_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.kl_scale is not None and not self.kl_scale > 0:
            raise ValueError("kl_scale must be positive when given")


@dataclass
class PosteriorDraws:
    """m joint samples of the flat parameter vector, one per row."""

    parameters: np.ndarray  # (m, parameter_count)
    source_seed: int

    def __post_init__(self):
        self.parameters = np.asarray(self.parameters, dtype=np.float64)
        if self.parameters.ndim != 2 or self.parameters.shape[0] < 2:
            raise ValueError("draws must be a (m >= 2, parameter_count) matrix")

    @property
    def m(self) -> int:
        return self.parameters.shape[0]


def softplus(x) -> np.ndarray:
    # log(1 + exp(x)), stable for large |x|
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def kl_diag_gaussians(posterior: VariationalPosterior, prior: GaussianPrior) -> float:
    """Closed-form KL(q || prior) between diagonal Gaussians; >= 0."""
    std = posterior.std
    if not np.all(np.isfinite(std)):
        raise ValueError("posterior scale is non-finite")
    var_ratio = (std / prior.sigma) ** 2
    shift = (posterior.mu - prior.mean) / prior.sigma
    return float(0.5 * np.sum(var_ratio + shift * shift - 1.0 - np.log(var_ratio)))


def _gaussian_nll(residuals: np.ndarray, sigma: float) -> float:
    # negative log likelihood summed over the batch
    n = residuals.shape[0]
    return float(
        0.5 * np.sum(residuals * residuals) / (sigma * sigma)
        + n * (0.5 * np.log(2.0 * np.pi) + np.log(sigma))
    )


def elbo_loss(
    posterior: VariationalPosterior,
    prior: GaussianPrior,
    arch: NetworkArchitecture,
    X,
    y,
    config: TrainConfig,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo negative ELBO for one batch.

    Averages the batch-summed Gaussian negative log likelihood over
    ``mc_samples_per_step`` reparameterized draws, then adds
    ``kl_scale * KL(q || prior)``.  The constant model-evidence term is
    dropped.  A kl_scale of None counts the KL once here (scale 1).
    """
    X = as_float_matrix(X)
    y = as_float_vector(y, "y")
    if X.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    check_matching_rows(X, y)
    std = posterior.std
    kl_scale = 1.0 if config.kl_scale is None else config.kl_scale
    data_term = 0.0
    for _ in range(config.mc_samples_per_step):
        eps = rng.standard_normal(len(posterior))
        theta = posterior.mu + std * eps
        preds = network.forward_batch(arch, theta, X)
        data_term += _gaussian_nll(preds - y, config.observation_sigma)
    data_term /= config.mc_samples_per_step
    return data_term + kl_scale * kl_diag_gaussians(posterior, prior)


def train(
    arch: NetworkArchitecture,
    X,
    y,
    prior: GaussianPrior,
    config: TrainConfig,
    loss_history: list | None = None,
) -> VariationalPosterior:
    """Fit the variational posterior by stochastic gradient descent.

    Deterministic given the config seed.  When ``loss_history`` is a
    list, the mean per-step loss of each epoch is appended to it.
    """
    X = as_float_matrix(X)
    y = as_float_vector(y, "y")
    check_matching_rows(X, y)
    n = X.shape[0]
    if n < config.batch_size:
        raise ValueError(
            f"dataset has {n} rows, fewer than batch_size {config.batch_size}"
        )
    rng = np.random.default_rng(config.seed)
    p_count = arch.parameter_count
    mu = network.init_parameters(arch, rng)
    rho = np.full(p_count, -5.0)

    num_batches = int(np.ceil(n / config.batch_size))
    kl_scale = (1.0 / num_batches) if config.kl_scale is None else config.kl_scale
    sigma2 = config.observation_sigma**2
    nll_const = 0.5 * np.log(2.0 * np.pi) + np.log(config.observation_sigma)
    optimizer = Adam(2 * p_count, config.learning_rate)
    prior_var = prior.sigma**2

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            Xb, yb = X[idx], y[idx]
            std = softplus(rho)
            sig_rho = _sigmoid(rho)

            grad_mu = np.zeros(p_count)
            grad_rho = np.zeros(p_count)
            data_term = 0.0
            for _ in range(config.mc_samples_per_step):
                eps = rng.standard_normal(p_count)
                theta = mu + std * eps
                preds, trace = network.forward_batch(arch, theta, Xb, return_trace=True)
                resid = preds - yb
                data_term += (
                    0.5 * np.sum(resid * resid) / sigma2 + Xb.shape[0] * nll_const
                )
                d_out = resid / sigma2
                g_theta = network.backprop_parameters(arch, theta, trace, d_out)
                grad_mu += g_theta
                grad_rho += g_theta * eps * sig_rho
            grad_mu /= config.mc_samples_per_step
            grad_rho /= config.mc_samples_per_step
            data_term /= config.mc_samples_per_step

            # closed-form KL gradient
            grad_mu += kl_scale * (mu - prior.mean) / prior_var
            grad_rho += kl_scale * (std / prior_var - 1.0 / std) * sig_rho

            step = optimizer.step(np.concatenate([grad_mu, grad_rho]))
            mu -= step[:p_count]
            rho -= step[p_count:]

            kl = 0.5 * np.sum(
                (std / prior.sigma) ** 2
                + ((mu - prior.mean) / prior.sigma) ** 2
                - 1.0
                - 2.0 * (np.log(std) - np.log(prior.sigma))
            )
            epoch_loss += data_term + kl_scale * kl
        epoch_loss /= num_batches
        if not np.isfinite(epoch_loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}")
        if loss_history is not None:
            loss_history.append(float(epoch_loss))
    return VariationalPosterior(mu=mu, rho=rho)


def sample_parameters(posterior: VariationalPosterior, m: int, seed: int) -> PosteriorDraws:
    """m independent reparameterized draws; deterministic given seed."""
    if m < 2:
        raise ValueError(f"need at least 2 draws, got {m}")
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((m, len(posterior)))
    return PosteriorDraws(parameters=posterior.mu + posterior.std * eps, source_seed=seed)


def ensemble_predict(
    posterior: VariationalPosterior,
    arch: NetworkArchitecture,
    X,
    m: int = 1000,
    seed: int = 0,
):
    """Monte Carlo posterior predictive mean and epistemic variance per row."""
    X = as_float_matrix(X)
    draws = sample_parameters(posterior, m, seed)
    preds = np.empty((m, X.shape[0]))
    for i in range(m):
        preds[i] = network.forward_batch(arch, draws.parameters[i], X)
    return preds.mean(axis=0), preds.var(axis=0)


def save_posterior(
    path,
    arch: NetworkArchitecture,
    posterior: VariationalPosterior,
    prior: GaussianPrior,
    config: TrainConfig,
) -> None:
    """Write a JSON artifact that round-trips bit-exactly via repr floats."""
    payload = {
        "architecture": {
            "input_dim": arch.input_dim,
            "hidden_widths": list(arch.hidden_widths),
            "activation": arch.activation,
        },
        "mu": [float(v) for v in posterior.mu],
        "rho": [float(v) for v in posterior.rho],
        "prior": asdict(prior),
        "train_config": asdict(config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_posterior(path):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    arch = NetworkArchitecture(
        input_dim=payload["architecture"]["input_dim"],
        hidden_widths=tuple(payload["architecture"]["hidden_widths"]),
        activation=payload["architecture"]["activation"],
    )
    posterior = VariationalPosterior(
        mu=np.array(payload["mu"]), rho=np.array(payload["rho"])
    )
    prior = GaussianPrior(**payload["prior"])
    config = TrainConfig(**payload["train_config"])
    return arch, posterior, prior, config


class VariationalMLPRegressor(BaseEstimator, RegressorMixin):
    """Bayesian MLP regressor with a diagonal Gaussian parameter posterior.

    Follows the scikit-learn estimator contract: hyperparameters are
    stored verbatim on the instance, ``fit`` returns self and exposes
    fitted state through trailing-underscore attributes.

    Parameters
    ----------
    hidden_widths : tuple of int
        Hidden layer widths.
    activation : {"relu", "tanh"}
    epochs, batch_size, learning_rate, mc_samples_per_step :
        Stochastic training controls.
    kl_scale : float or None
        Weight of the KL penalty per batch; None counts the KL exactly
        once per epoch (1/num_batches).
    observation_sigma : float
        Fixed observation noise scale of the Gaussian likelihood.
    prior_mean, prior_sigma : float
        Parameter prior.
    seed : int
        Seed controlling initialization, shuffling and MC draws.
    """

    def __init__(
        self,
        hidden_widths=(20, 20, 20),
        activation="relu",
        epochs=200,
        batch_size=128,
        learning_rate=1e-2,
        mc_samples_per_step=1,
        kl_scale=None,
        observation_sigma=1.0,
        prior_mean=0.0,
        prior_sigma=1.0,
        seed=0,
    ):
        self.hidden_widths = hidden_widths
        self.activation = activation
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.mc_samples_per_step = mc_samples_per_step
        self.kl_scale = kl_scale
        self.observation_sigma = observation_sigma
        self.prior_mean = prior_mean
        self.prior_sigma = prior_sigma
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            mc_samples_per_step=self.mc_samples_per_step,
            kl_scale=self.kl_scale,
            observation_sigma=self.observation_sigma,
            seed=self.seed,
        )

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_matching_rows(X, y)
        self.arch_ = NetworkArchitecture(
            input_dim=X.shape[1],
            hidden_widths=tuple(self.hidden_widths),
            activation=self.activation,
        )
        self.prior_ = GaussianPrior(mean=self.prior_mean, sigma=self.prior_sigma)
        self.loss_history_ = []
        self.posterior_ = train(
            self.arch_, X, y, self.prior_, self._train_config(), self.loss_history_
        )
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Point predictions at the posterior location parameters."""
        self._check_fitted()
        return network.forward_batch(self.arch_, self.posterior_.mu, X)

    def predict_posterior(self, X, m: int = 1000, seed: int = 0):
        """Ensemble predictive (mean, variance) over m posterior draws."""
        self._check_fitted()
        return ensemble_predict(self.posterior_, self.arch_, X, m=m, seed=seed)

    def sample_parameters(self, m: int, seed: int = 0) -> PosteriorDraws:
        self._check_fitted()
        return sample_parameters(self.posterior_, m, seed)

    def save(self, path) -> None:
        self._check_fitted()
        save_posterior(path, self.arch_, self.posterior_, self.prior_, self._train_config())

    def _check_fitted(self):
        if not hasattr(self, "posterior_"):
            raise RuntimeError("estimator is not fitted; call fit first")
