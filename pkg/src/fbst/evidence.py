"""Bayesian evidence for the sharp null "statistic equals zero".

Given m posterior draws of a testing statistic, a Gaussian kernel
density estimate over those draws approximates the statistic's
posterior density.  The evidence in favor of the null is one minus the
fraction of draws whose estimated density strictly exceeds the density
at zero, i.e. one minus the posterior mass of the highest-density
region that excludes zero.  Values near 1 support insignificance, near
0 significance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_vector

_SQRT_2PI = np.sqrt(2.0 * np.pi)


def silverman_bandwidth(samples) -> float:
    """Plug-in bandwidth 0.9 * min(std, IQR/1.34) * m**(-1/5).

    A spread term of zero is skipped in favor of the other (an all-ties
    quartile range says nothing about spread when the std is positive);
    if both vanish the sample is a point mass and 0.0 is returned as
    the degenerate marker.
    """
    samples = as_float_vector(samples, "samples")
    m = samples.shape[0]
    if m < 2:
        raise ValueError(f"bandwidth needs at least 2 samples, got {m}")
    std = float(np.std(samples, ddof=1))
    q75, q25 = np.percentile(samples, [75, 25])
    iqr_term = float(q75 - q25) / 1.34
    terms = [t for t in (std, iqr_term) if t > 0.0]
    if not terms:
        return 0.0
    return 0.9 * min(terms) * m ** (-0.2)


@dataclass
class GaussianKDE:
    """Gaussian-kernel density estimate with a fixed bandwidth."""

    samples: np.ndarray
    bandwidth: float

    def __post_init__(self):
        self.samples = as_float_vector(self.samples, "samples")
        if not self.bandwidth > 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    def density(self, points):
        """(1/(m h)) * sum_i K((point - sample_i) / h) with Gaussian K."""
        pts = np.atleast_1d(np.asarray(points, dtype=np.float64))
        z = (pts[:, None] - self.samples[None, :]) / self.bandwidth
        dens = np.exp(-0.5 * z * z).sum(axis=1) / (
            self.samples.shape[0] * self.bandwidth * _SQRT_2PI
        )
        if np.isscalar(points) or np.asarray(points).ndim == 0:
            return float(dens[0])
        return dens


def kde_density(estimate: GaussianKDE, point) -> float:
    return estimate.density(point)


@dataclass(frozen=True)
class EvidenceValue:
    """Evidence for the null plus bookkeeping of the threshold test."""

    value: float
    m_used: int
    tie_count: int

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"evidence {self.value} outside [0, 1]")


def _column_counts(samples: np.ndarray, h: float) -> tuple[int, int]:
    """(#densities strictly above density at 0, #exact ties) for one sample."""
    scaled = samples * (1.0 / h)
    # raw kernel sums; the 1/(m h sqrt(2 pi)) factor cancels in comparisons
    at_zero = float(np.exp(-0.5 * scaled * scaled).sum())
    if at_zero < 1.0:
        # every sample's own kernel already contributes 1.0 to its sum,
        # so all m densities strictly exceed the density at zero
        return samples.shape[0], 0
    diff = scaled[:, None] - scaled[None, :]
    np.multiply(diff, diff, out=diff)
    np.multiply(diff, -0.5, out=diff)
    np.exp(diff, out=diff)
    at_samples = diff.sum(axis=1)
    above = int(np.count_nonzero(at_samples > at_zero))
    ties = int(np.count_nonzero(at_samples == at_zero))
    return above, ties


def evidence(sample) -> EvidenceValue:
    """Evidence for the null from one statistic sample (vector of draws).

    Ties (density exactly equal to the density at zero) count toward
    the null, matching the strict inequality in the region membership
    test.  A zero-spread sample bypasses the KDE: the evidence is 1
    when the point mass sits at zero and 0 otherwise.
    """
    values = getattr(sample, "values", sample)
    values = as_float_vector(values, "statistic sample")
    m = values.shape[0]
    if m < 2:
        raise ValueError(f"evidence needs at least 2 draws, got {m}")
    h = silverman_bandwidth(values)
    if h == 0.0:
        if values[0] == 0.0:
            return EvidenceValue(value=1.0, m_used=m, tie_count=m)
        return EvidenceValue(value=0.0, m_used=m, tie_count=0)
    above, ties = _column_counts(values, h)
    return EvidenceValue(value=1.0 - above / m, m_used=m, tie_count=ties)


def evidence_matrix(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column-wise evidence for an (m, n_queries) matrix of draws.

    Identical arithmetic to :func:`evidence` applied per column;
    returns (evidence values, tie counts).
    """
    S = np.asarray(samples, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] < 2:
        raise ValueError("samples must be an (m >= 2, n) matrix")
    if not np.all(np.isfinite(S)):
        raise ValueError("samples contain non-finite entries")
    m, n = S.shape
    ev = np.empty(n)
    ties = np.zeros(n, dtype=np.int64)
    for c in range(n):
        column = np.ascontiguousarray(S[:, c])
        result = evidence(column)
        ev[c] = result.value
        ties[c] = result.tie_count
    return ev, ties


def qgs(evidences, lam: float) -> float:
    """Quantile-based global significance of instance evidences.

    Sorts the evidences in descending order and returns the entry at
    rank ceil(lam * n): the largest value such that at least a ``lam``
    fraction of the evidences reach it.
    """
    evidences = as_float_vector(evidences, "evidences")
    n = evidences.shape[0]
    if n == 0:
        raise ValueError("evidences must be non-empty")
    if not 0.0 < lam <= 1.0:
        raise ValueError(f"lambda must lie in (0, 1], got {lam}")
    rank = int(np.ceil(lam * n))
    ordered = np.sort(evidences)[::-1]
    return float(ordered[rank - 1])
