"""
Two-time sign correlators and Leggett-Garg quantities.

For zero-mean jointly Gaussian readouts ``y_i, y_j`` with covariance
``[[a, b], [b, c]]`` the dichotomized correlator is

    <sgn(y_i) sgn(y_j)> = (1 - 2*alpha/pi) * sgn(b),   alpha = arctan(sqrt(a*c/b**2 - 1)).

Writing ``rho = b / sqrt(a*c)`` gives ``tan(alpha) = sqrt(1 - rho**2) / |rho|``,
i.e. ``alpha = arccos|rho|`` and therefore

    1 - 2*alpha/pi = (2/pi) * arcsin|rho|,

so the correlator equals ``(2/pi) * arcsin(rho)``.  That form is used here
because it stays well conditioned near ``|rho| = 1`` and is continuous at
``b = 0``.

Slot labels passed to :func:`k3_triple` are 1-based, as are the labels stored
in :class:`MeasurementRecord`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

PSD_SLACK = 1e-9


@dataclass(frozen=True)
class MeasurementRecord:
    """Joint Gaussian statistics of a set of S_y readouts.

    ``labels`` are the 1-based slot (or pulse) numbers of the readouts, in the
    order used by ``mu`` and ``gamma_y``.
    """

    labels: tuple
    mu: np.ndarray
    gamma_y: np.ndarray

    def __post_init__(self):
        n = len(self.labels)
        mu = np.asarray(self.mu, dtype=float).reshape(n)
        gamma = np.asarray(self.gamma_y, dtype=float).reshape(n, n)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma_y", gamma)
        if n and np.any(np.diag(gamma) <= 0):
            raise DomainError("readout variances must be strictly positive")
        if n and np.max(np.abs(gamma - gamma.T)) > 1e-12 * np.max(np.abs(gamma)):
            raise DomainError("gamma_y is not symmetric")

    def __len__(self):
        return len(self.labels)

    def submatrix(self, labels) -> np.ndarray:
        pos = [self.labels.index(l) for l in labels]
        return self.gamma_y[np.ix_(pos, pos)]


@dataclass(frozen=True)
class LgiResult:
    """Leggett-Garg evaluation of ``n`` dichotomic measurements.

    ``correlators`` is the full symmetric ``n x n`` matrix with unit diagonal;
    only the strictly lower triangle enters ``k_value``.
    """

    n: int
    correlators: np.ndarray
    k_value: float
    k_reduced: float

    @property
    def violated(self) -> bool:
        return self.k_value < 0


def sign_correlation(rho):
    """Vectorized ``(2/pi) * arcsin(rho)`` with ``rho`` clipped to [-1, 1]."""
    return (2.0 / np.pi) * np.arcsin(np.clip(rho, -1.0, 1.0))


def corr_sign(a: float, b: float, c: float) -> float:
    """Correlator of ``sgn(y_1) sgn(y_2)`` for covariance ``[[a, b], [b, c]]``.

    Raises
    ------
    DomainError
        If ``a`` or ``c`` is not positive, or ``b**2`` exceeds ``a*c`` by
        more than a relative ``1e-9``.
    """
    if not (a > 0 and c > 0):
        raise DomainError(f"variances must be positive, got a={a}, c={c}")
    ac = a * c
    if b * b > ac * (1 + PSD_SLACK):
        raise DomainError(f"covariance [[{a}, {b}], [{b}, {c}]] is not positive semidefinite")
    if b == 0:
        return 0.0
    rho = b / math.sqrt(ac)
    if abs(rho) >= 1.0:
        return math.copysign(1.0, b)
    return 2.0 / math.pi * math.asin(rho)


def pairwise_correlators(record: MeasurementRecord) -> np.ndarray:
    """Matrix of sign correlators for every pair of readouts in ``record``."""
    n = len(record)
    if n < 2:
        raise ParameterError("need at least two readouts for correlators")
    g = record.gamma_y
    C = np.eye(n)
    for i in range(n):
        for j in range(i):
            C[i, j] = C[j, i] = corr_sign(g[i, i], g[i, j], g[j, j])
    return C


def k_n(correlators) -> LgiResult:
    """Evaluate ``K_n = sum_{j<i} C_ij + floor(n/2)`` and ``K'_n = K_n / floor(n/2)``."""
    C = np.asarray(correlators, dtype=float)
    n = C.shape[0]
    if C.shape != (n, n):
        raise ParameterError("correlators must be a square matrix")
    if n < 3:
        raise ParameterError(f"K_n needs n >= 3, got {n}")
    half = n // 2
    total = float(np.sum(C[np.tril_indices(n, -1)]))
    k_value = total + half
    return LgiResult(n=n, correlators=C, k_value=k_value, k_reduced=k_value / half)


def k3_triple(correlators, a: int, b: int, c: int) -> float:
    """Three-term inequality ``C_ab + C_bc + C_ac + 1`` for 1-based slots ``a < b < c``."""
    C = np.asarray(correlators, dtype=float)
    n = C.shape[0]
    if not (1 <= a < b < c <= n):
        raise ParameterError(f"need 1 <= a < b < c <= {n}, got ({a}, {b}, {c})")
    a, b, c = a - 1, b - 1, c - 1
    return float(C[a, b] + C[b, c] + C[a, c] + 1.0)
