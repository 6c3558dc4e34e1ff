"""
Monte-Carlo cross-checks that share no code path with the analytic pipeline.

* :func:`mc_sign_corr` and :func:`mc_gaussian_kn` sample Gaussian readouts and
  dichotomize them directly.
* :func:`mc_propagate` pushes individual samples through the per-sample
  input-output relations and returns their empirical covariance.
* :func:`mc_macrorealist_kn` is a classical, non-invasive rotating-spin model:
  a random spin vector precesses and is read with independent noise, and
  nothing the readout does feeds back on the spin.

Sampling is chunked; every chunk draws from its own child of a
``numpy.random.SeedSequence`` so results depend only on the seed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError
from .gaussian_dynamics import PhysicalParams
from .lgi_metrics import MeasurementRecord

CHUNK = 250_000
CLAMP = 1e-9


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int

    def within(self, target: float, n_sigma: float) -> bool:
        return abs(self.value - target) <= n_sigma * self.std_error


def _chunks(n_samples: int, seed: int):
    n_chunks = -(-n_samples // CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    for k, ss in enumerate(children):
        size = min(CHUNK, n_samples - k * CHUNK)
        yield np.random.Generator(np.random.PCG64(ss)), size


def gaussian_factor(cov) -> np.ndarray:
    """Matrix ``L`` with ``L @ L.T == cov`` via a clamped eigendecomposition.

    Eigenvalues down to ``-1e-9 * trace`` are set to zero; anything more
    negative raises :class:`DomainError`.
    """
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    if w.min() < -CLAMP * max(np.trace(cov), 0.0):
        raise DomainError(f"covariance not positive semidefinite (min eigenvalue {w.min():.3g})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def _sample(rng, L, size):
    return rng.standard_normal((size, L.shape[1])) @ L.T


def _mean_and_error(sums: float, sq_sums: float, n: int):
    mean = sums / n
    var = max(sq_sums / n - mean * mean, 0.0)
    return float(mean), math.sqrt(var / max(n - 1, 1))


def mc_sign_corr(gamma_2x2, n_samples: int = 1_000_000, seed: int = 0) -> McEstimate:
    """Empirical ``<sgn(y_1) sgn(y_2)>`` for zero-mean Gaussian ``(y_1, y_2)``."""
    gamma = np.asarray(gamma_2x2, dtype=float)
    if gamma.shape != (2, 2):
        raise DomainError("expected a 2x2 covariance")
    if n_samples < 1000:
        raise ParameterError("n_samples must be at least 1000")
    L = gaussian_factor(gamma)
    total = sq = 0.0
    for rng, size in _chunks(n_samples, seed):
        y = _sample(rng, L, size)
        q = np.sign(y[:, 0]) * np.sign(y[:, 1])
        total += q.sum()
        sq += (q * q).sum()
    value, err = _mean_and_error(total, sq, n_samples)
    return McEstimate(value, err, n_samples, seed)


def mc_correlator_matrix(record: MeasurementRecord, n_samples: int = 1_000_000, seed: int = 0):
    """Empirical sign-correlator matrix and its standard errors for a record."""
    L = gaussian_factor(record.gamma_y)
    n = len(record)
    s = np.zeros((n, n))
    s2 = np.zeros((n, n))
    for rng, size in _chunks(n_samples, seed):
        q = np.sign(_sample(rng, L, size) + record.mu)
        prod = q.T @ q
        s += prod
        s2 += (q * q).T @ (q * q)
    mean = s / n_samples
    err = np.sqrt(np.clip(s2 / n_samples - mean ** 2, 0, None) / (n_samples - 1))
    return mean, err


def _kn_from_signs(q: np.ndarray) -> np.ndarray:
    n = q.shape[1]
    total = q.sum(axis=1)
    # sum_{j<i} q_i q_j = ((sum q)^2 - sum q^2) / 2
    return (total * total - (q * q).sum(axis=1)) / 2.0 + n // 2


def mc_gaussian_kn(record: MeasurementRecord, n_samples: int = 1_000_000, seed: int = 0) -> McEstimate:
    """Empirical ``K_n`` of the dichotomized joint readouts of ``record``.

    For a two-readout record the estimate is the single correlator
    ``<Q_1 Q_2>`` (no ``floor(n/2)`` offset), matching :func:`mc_sign_corr`.
    """
    n = len(record)
    if n < 2:
        raise ParameterError("record needs at least two readouts")
    L = gaussian_factor(record.gamma_y)
    total = sq = 0.0
    for rng, size in _chunks(n_samples, seed):
        q = np.sign(_sample(rng, L, size) + record.mu)
        k = q[:, 0] * q[:, 1] if n == 2 else _kn_from_signs(q)
        total += k.sum()
        sq += (k * k).sum()
    value, err = _mean_and_error(total, sq, n_samples)
    return McEstimate(value, err, n_samples, seed)


def default_readout_noise(params: PhysicalParams) -> float:
    """Shot-noise standard deviation of S_y expressed in units of J_z."""
    return math.sqrt(params.n_photons / 4.0) / params.readout_gain


def mc_macrorealist_signs(n: int, theta: float, readout_noise: float, n_samples: int,
                          seed: int, performed=None, spin_variance: float = 5e5) -> np.ndarray:
    """Dichotomized readouts of the classical rotating-spin model.

    Returns a ``(n_samples, k)`` array of +-1 for the ``k`` performed slots.
    """
    if n < 2:
        raise ParameterError("need at least two slots")
    if readout_noise < 0 or spin_variance <= 0:
        raise ParameterError("noise and spin variance must be non-negative / positive")
    performed = np.ones(n, bool) if performed is None else np.asarray(performed, bool)
    slots = np.flatnonzero(performed)
    angles = theta * slots
    out = []
    for rng, size in _chunks(n_samples, seed):
        jy, jz = rng.standard_normal((2, size)) * math.sqrt(spin_variance)
        # J_z(t) for positive rotation: J_y sin + J_z cos
        z = np.outer(jy, np.sin(angles)) + np.outer(jz, np.cos(angles))
        y = z + readout_noise * rng.standard_normal((size, slots.size))
        q = np.sign(y)
        q[q == 0] = 1.0
        out.append(q)
    return np.concatenate(out)


def mc_macrorealist_kn(n: int, theta: float, readout_noise: float, n_samples: int = 1_000_000,
                       seed: int = 0, spin_variance: float = 5e5) -> McEstimate:
    """Empirical ``K_n`` of the non-invasive classical model with every slot read."""
    if n < 3:
        raise ParameterError(f"need n >= 3, got {n}")
    q = mc_macrorealist_signs(n, theta, readout_noise, n_samples, seed,
                              spin_variance=spin_variance)
    k = _kn_from_signs(q)
    total, sq = float(k.sum()), float((k * k).sum())
    value, err = _mean_and_error(total, sq, n_samples)
    return McEstimate(value, err, n_samples, seed)


def mc_macrorealist_correlators(n: int, theta: float, readout_noise: float, performed,
                                n_samples: int = 1_000_000, seed: int = 0,
                                spin_variance: float = 5e5):
    """Pair correlators of the classical model among the performed slots.

    Returns ``(labels, values, std_errors)`` with 1-based slot labels.
    """
    performed = np.asarray(performed, bool)
    q = mc_macrorealist_signs(n, theta, readout_noise, n_samples, seed, performed, spin_variance)
    mean = q.T @ q / n_samples
    err = np.sqrt(np.clip(1 - mean ** 2, 0, None) / (n_samples - 1))
    return tuple(int(i) + 1 for i in np.flatnonzero(performed)), mean, err


def mc_propagate(n_slots: int, theta: float, performed, params: PhysicalParams,
                 back_action_on: bool = True, scattering_on: bool = True,
                 n_samples: int = 100_000, seed: int = 0) -> np.ndarray:
    """Empirical covariance of the full state vector after a sequence.

    Samples of ``(J_y, J_z, S_y^(k), S_z^(k) ...)`` are drawn from the initial
    product state and moved through the per-sample relations

    * rotation: ``J_y, J_z -> c J_y - s J_z, s J_y + c J_z``,
    * QND: ``S_y += g <S_x> J_z`` and ``J_y += g J_x S_z``,
    * scattering: ``J -> chi J + xi`` with ``xi`` white of variance
      ``N_A (1-chi)(chi/2 + 2/3)``.

    The state has one pulse mode per performed slot, in order.
    """
    performed = [bool(p) for p in performed]
    if len(performed) != n_slots:
        raise ParameterError(f"mask has {len(performed)} entries for {n_slots} slots")
    n_pulses = sum(performed)
    dim = 2 + 2 * n_pulses
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    sd = np.full(dim, math.sqrt(params.n_photons / 4.0))
    sd[:2] = math.sqrt(params.n_atoms / 2.0)
    V = rng.standard_normal((n_samples, dim)) * sd
    c, s = math.cos(theta), math.sin(theta)
    jx = float(params.n_atoms)
    sx = params.n_photons / 2.0
    chi = params.chi
    noise_sd = math.sqrt(params.n_atoms * (1 - chi) * (chi / 2 + 2 / 3))
    pulse = 0
    for k, fire in enumerate(performed):
        if k > 0:
            jy, jz = V[:, 0].copy(), V[:, 1].copy()
            V[:, 0] = c * jy - s * jz
            V[:, 1] = s * jy + c * jz
        if not fire:
            continue
        iy, iz = 2 + 2 * pulse, 3 + 2 * pulse
        V[:, iy] = V[:, iy] + params.g * sx * V[:, 1]
        if back_action_on:
            V[:, 0] = V[:, 0] + params.g * jx * V[:, iz]
        if scattering_on and chi != 1.0:
            V[:, :2] = chi * V[:, :2] + noise_sd * rng.standard_normal((n_samples, 2))
            if params.polarization_decay:
                jx *= chi
        pulse += 1
    return np.cov(V, rowvar=False)


def cov_standard_error(cov: np.ndarray, n_samples: int) -> np.ndarray:
    """Gaussian standard error of each entry of a sample covariance."""
    d = np.diag(cov)
    return np.sqrt((np.outer(d, d) + cov ** 2) / (n_samples - 1))
