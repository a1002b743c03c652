"""Closed-form moments of the dual-frequency multitaper estimator.

For a Gaussian harmonizable process the tapered coefficients at a frequency
pair are jointly complex Gaussian, so the moments of the averaged
periodogram follow from Isserlis' theorem.  With S the covariance and C the
relation (pseudo-covariance) of the coefficients,

    mean      = S(f1, f2)
    variance  = [S(f1, f1) S(f2, f2) + |C(f1, f2)|^2] / K
    relation  = [C(f1, f1) C*(f2, f2) + S(f1, f2)^2] / K

These serve as the analytic oracle for the estimator's distributional tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ValidationError

__all__ = ["ComplexMoment", "KSReport", "periodogram_moments", "null_coherence_distribution_check"]


@dataclass(frozen=True)
class ComplexMoment:
    """First and second moments of a complex-valued statistic.

    The 2x2 augmented covariance [[variance, relation], [conj(relation),
    variance]] must be positive semidefinite, i.e. variance >= |relation|.
    """

    mean: complex
    variance: float
    relation: complex

    def __post_init__(self):
        if self.variance < 0.0:
            raise ValidationError("a variance cannot be negative")

    def augmented_covariance(self) -> np.ndarray:
        return np.array(
            [
                [self.variance, self.relation],
                [np.conj(self.relation), self.variance],
            ]
        )

    def is_proper_psd(self, tol: float = 1e-12) -> bool:
        return self.variance + tol >= abs(self.relation)


@dataclass(frozen=True)
class KSReport:
    """Outcome of a one-sample Kolmogorov-Smirnov test."""

    statistic: float
    pvalue: float
    num_samples: int
    alpha: float
    passed: bool


def _as_nonnegative_real(value, name: str) -> float:
    value = complex(value)
    if abs(value.imag) > 1e-9 * max(1.0, abs(value.real)):
        raise ValidationError(f"{name} must be real")
    if value.real < 0.0:
        raise ValidationError(f"{name} must be nonnegative")
    return value.real


def periodogram_moments(
    s11, s22, s12, c11, c22, c12, num_tapers: int
) -> ComplexMoment:
    """Moments of the taper-averaged dual-frequency periodogram.

    Parameters are the covariance values S(f1,f1), S(f2,f2), S(f1,f2) and
    relation values C(f1,f1), C(f2,f2), C(f1,f2) of the tapered Fourier
    coefficients, plus the number of tapers averaged.
    """
    if num_tapers < 1:
        raise ValidationError("need at least one taper")
    s11 = _as_nonnegative_real(s11, "S(f1, f1)")
    s22 = _as_nonnegative_real(s22, "S(f2, f2)")
    s12 = complex(s12)
    c11 = complex(c11)
    c22 = complex(c22)
    c12 = complex(c12)
    variance = (s11 * s22 + abs(c12) ** 2) / num_tapers
    relation = (c11 * np.conj(c22) + s12**2) / num_tapers
    return ComplexMoment(mean=s12, variance=float(variance), relation=complex(relation))


def null_coherence_distribution_check(samples, alpha: float = 0.01) -> KSReport:
    """KS test of scaled squared coherences against their stationary null.

    ``samples`` are independent draws of K |tau|^2 at a fixed off-diagonal
    pair; the null is chi^2_2 / 2, i.e. the unit-mean exponential.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 1 or samples.size < 100:
        raise ValidationError("need at least 100 samples for a meaningful KS test")
    if np.any(samples < 0.0):
        raise ValidationError("scaled squared coherences cannot be negative")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    statistic, pvalue = stats.kstest(samples, "expon")
    return KSReport(
        statistic=float(statistic),
        pvalue=float(pvalue),
        num_samples=samples.size,
        alpha=float(alpha),
        passed=bool(pvalue >= alpha),
    )
