"""High-level estimator running the full significance test on a dataset.

Composes the variational regressor with the statistic and evidence
machinery behind a scikit-learn style fit interface: ``fit(X, y)``
trains the posterior, draws parameters, evaluates the configured
statistic per draw and instance, and stores instance evidence plus
global aggregates as fitted attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import evidence as evidence_mod
from . import statistics as stats_mod
from . import variational
from .seeding import stage_seed
from .validation import as_float_matrix, as_float_vector, check_matching_rows


class FeatureSignificanceTester(BaseEstimator):
    """Instance-wise and global Bayesian significance of every feature.

    Parameters mirror :class:`~fbst.variational.VariationalMLPRegressor`
    plus the testing controls: the statistic kind ("grad", "lrp",
    "deeplift" or "lime"), the number of posterior draws ``m``, and the
    evidence quantile ``lam`` used by :meth:`qgs`.

    Fitted attributes
    -----------------
    instance_evidence_ : (n, d) evidence per instance and feature
    statistic_mean_ : (n, d) posterior mean of the statistic
    global_evidence_ : (d,) evidence of the dataset-mean squared statistic
    qgs_ : (d,) quantile-based global significance at ``lam``
    """

    def __init__(
        self,
        statistic="grad",
        m=1000,
        lam=0.5,
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
        lrp_epsilon=1e-6,
        deeplift_reference="mean",
        lime_config=None,
        seed=0,
    ):
        self.statistic = statistic
        self.m = m
        self.lam = lam
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
        self.lrp_epsilon = lrp_epsilon
        self.deeplift_reference = deeplift_reference
        self.lime_config = lime_config
        self.seed = seed

    def fit(self, X, y):
        X = as_float_matrix(X)
        y = as_float_vector(y, "y")
        check_matching_rows(X, y)
        kind = {"grad": "grad_instance"}.get(self.statistic, self.statistic)
        if kind not in stats_mod.INSTANCE_KINDS:
            raise ValueError(
                f"statistic must be one of {'grad', 'lrp', 'deeplift', 'lime'}, "
                f"got {self.statistic!r}"
            )
        self.regressor_ = variational.VariationalMLPRegressor(
            hidden_widths=self.hidden_widths,
            activation=self.activation,
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            mc_samples_per_step=self.mc_samples_per_step,
            kl_scale=self.kl_scale,
            observation_sigma=self.observation_sigma,
            prior_mean=self.prior_mean,
            prior_sigma=self.prior_sigma,
            seed=stage_seed(self.seed, "train"),
        )
        self.regressor_.fit(X, y)
        draws = self.regressor_.sample_parameters(
            self.m, seed=stage_seed(self.seed, "sample")
        )
        reference = None
        if kind == "deeplift":
            reference = (
                X.mean(axis=0)
                if self.deeplift_reference == "mean"
                else np.zeros(X.shape[1])
            )
        stat_values = stats_mod.instance_statistics(
            self.regressor_.arch_,
            draws,
            X,
            kind,
            reference=reference,
            lrp_epsilon=self.lrp_epsilon,
            lime_config=self.lime_config,
            seed=stage_seed(self.seed, "lime"),
        )
        n, d = X.shape
        ev, ties = evidence_mod.evidence_matrix(stat_values.reshape(self.m, n * d))
        self.instance_evidence_ = ev.reshape(n, d)
        self.tie_counts_ = ties.reshape(n, d)
        self.statistic_mean_ = stat_values.mean(axis=0)
        global_stats = np.mean(stat_values**2, axis=1)  # (m, d)
        g_ev, _ = evidence_mod.evidence_matrix(global_stats)
        self.global_evidence_ = g_ev
        self.qgs_ = self.qgs(self.lam)
        self.n_features_in_ = d
        return self

    def qgs(self, lam: float) -> np.ndarray:
        """Per-feature quantile-based global significance at ``lam``."""
        self._check_fitted()
        return np.array(
            [
                evidence_mod.qgs(self.instance_evidence_[:, j], lam)
                for j in range(self.instance_evidence_.shape[1])
            ]
        )

    def _check_fitted(self):
        if not hasattr(self, "instance_evidence_"):
            raise RuntimeError("tester is not fitted; call fit first")
