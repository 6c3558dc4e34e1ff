"""
Gaussian covariance-matrix model of an atomic spin ensemble probed by light pulses.

The state tracks the quantum components

    V = (J_y, J_z, S_y^(1), S_z^(1), ..., S_y^(n), S_z^(n))

of a collective spin polarized along x and of ``n`` probe pulses polarized
along S_x.  The large x-components (``jx`` and ``sx``) are treated as
c-numbers.  Three primitive maps act on the state:

* :func:`rotate` -- Larmor precession about x by an angle ``theta``,
* :func:`qnd_update` -- the Faraday (QND) interaction with one pulse,
* :func:`loss_update` -- spontaneous scattering of probe photons.

All operations return new :class:`CollectiveState` objects; inputs are never
modified.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, SequencingError
from .lgi_metrics import MeasurementRecord

JY = 0
JZ = 1

# relative slack used by the state validity checks
PSD_TOLERANCE = 1e-9


def sy_index(pulse: int) -> int:
    """Position of S_y of the 1-based ``pulse`` in the state vector."""
    return 2 + 2 * (pulse - 1)


def sz_index(pulse: int) -> int:
    """Position of S_z of the 1-based ``pulse`` in the state vector."""
    return 3 + 2 * (pulse - 1)


@dataclass(frozen=True)
class PhysicalParams:
    """Physical parameters of the atom-light system.

    Parameters
    ----------
    g : float
        Atom-light coupling per pulse.
    n_atoms : float
        Number of atoms N_A.
    n_photons : float
        Number of photons per probe pulse N_L.
    eta : float
        Scattering parameter; the surviving fraction per pulse is
        ``chi = exp(-eta * n_photons)``.
    polarization_decay : bool
        If True, scattering also shrinks the classical polarization ``jx``
        by ``chi`` per pulse.  The default keeps ``jx = n_atoms``.
    """

    g: float = 1e-7
    n_atoms: float = 1e6
    n_photons: float = 5e8
    eta: float = 0.5e-9
    polarization_decay: bool = False

    def __post_init__(self):
        for name in ("g", "n_atoms", "n_photons", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite")
        if self.n_atoms <= 0:
            raise ParameterError(f"n_atoms must be positive, got {self.n_atoms}")
        if self.n_photons <= 0:
            raise ParameterError(f"n_photons must be positive, got {self.n_photons}")
        if self.eta < 0:
            raise ParameterError(f"eta must be non-negative, got {self.eta}")

    @property
    def chi(self) -> float:
        return math.exp(-self.eta * self.n_photons)

    @property
    def scattering_noise(self) -> float:
        """Variance added to J_y and J_z by one scattering event."""
        chi = self.chi
        return self.n_atoms * (1.0 - chi) * (chi / 2.0 + 2.0 / 3.0)

    @property
    def readout_gain(self) -> float:
        """Gain ``g * <S_x>`` mapping J_z onto the S_y readout."""
        return self.g * self.n_photons / 2.0


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CollectiveState:
    """Mean vector and covariance matrix of the atom-light quantum components."""

    params: PhysicalParams
    n_slots: int
    mean: np.ndarray
    cov: np.ndarray
    jx: float
    sx: float
    pulses_used: int = 0

    def __post_init__(self):
        dim = 2 + 2 * self.n_slots
        if self.mean.shape != (dim,) or self.cov.shape != (dim, dim):
            raise ParameterError(f"state arrays must have dimension {dim}")
        if not 0 <= self.pulses_used <= self.n_slots:
            raise SequencingError(f"pulses_used={self.pulses_used} outside [0, {self.n_slots}]")
        object.__setattr__(self, "mean", _frozen(self.mean))
        object.__setattr__(self, "cov", _frozen(self.cov))

    @property
    def dim(self) -> int:
        return 2 + 2 * self.n_slots

    @property
    def atomic_cov(self) -> np.ndarray:
        return self.cov[:2, :2]

    def _replace(self, **changes) -> "CollectiveState":
        kw = dict(params=self.params, n_slots=self.n_slots, mean=self.mean, cov=self.cov,
                  jx=self.jx, sx=self.sx, pulses_used=self.pulses_used)
        kw.update(changes)
        return CollectiveState(**kw)

    def check(self) -> list[str]:
        """Return a list of violated state invariants (empty when valid)."""
        problems = []
        cov = self.cov
        scale = max(float(np.max(np.abs(cov))), 1.0)
        if np.max(np.abs(cov - cov.T)) > 1e-12 * scale:
            problems.append("covariance not symmetric")
        tr = float(np.trace(cov))
        if np.linalg.eigvalsh(cov).min() < -PSD_TOLERANCE * tr:
            problems.append("covariance not positive semidefinite")
        if not 0 <= self.jx <= self.params.n_atoms * (1 + 1e-12):
            problems.append("jx outside [0, N_A]")
        if cov[JY, JY] * cov[JZ, JZ] < (self.jx ** 2 / 4.0) * (1 - PSD_TOLERANCE):
            problems.append("collective-spin uncertainty relation violated")
        return problems


def init_state(params: PhysicalParams, n_slots: int) -> CollectiveState:
    """Fully x-polarized coherent spin state and ``n_slots`` shot-noise-limited pulses.

    Variances are N_A/2 for J_y, J_z and N_L/4 for each S_y, S_z; all means
    and covariances vanish.
    """
    if int(n_slots) != n_slots or n_slots < 1:
        raise ParameterError(f"n_slots must be a positive integer, got {n_slots}")
    n_slots = int(n_slots)
    dim = 2 + 2 * n_slots
    diag = np.full(dim, params.n_photons / 4.0)
    diag[:2] = params.n_atoms / 2.0
    return CollectiveState(
        params=params,
        n_slots=n_slots,
        mean=np.zeros(dim),
        cov=np.diag(diag),
        jx=float(params.n_atoms),
        sx=params.n_photons / 2.0,
    )


def rotation_matrix(theta: float) -> np.ndarray:
    """2x2 rotation acting on (J_y, J_z).

    Positive ``theta`` maps J_y -> J_y cos(theta) - J_z sin(theta).
    """
    theta = math.remainder(theta, 2 * math.pi)
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _apply(state: CollectiveState, M: np.ndarray, **changes) -> CollectiveState:
    cov = M @ state.cov @ M.T
    cov = 0.5 * (cov + cov.T)
    return state._replace(mean=M @ state.mean, cov=cov, **changes)


def rotate(state: CollectiveState, theta: float) -> CollectiveState:
    """Precess the atomic spin about x by ``theta``. Light components are untouched."""
    M = np.eye(state.dim)
    M[:2, :2] = rotation_matrix(theta)
    return _apply(state, M)


def qnd_matrix(state: CollectiveState, pulse_index: int, back_action_on: bool = True) -> np.ndarray:
    """Linear map of the QND interaction with pulse ``pulse_index``.

    The atom block is the identity, the light block is the identity, and the two
    off-diagonal blocks carry the coupling: S_y gains ``g*sx*J_z`` and (only with
    back action) J_y gains ``g*jx*S_z``.
    """
    g = state.params.g
    M = np.eye(state.dim)
    M[sy_index(pulse_index), JZ] = g * state.sx
    if back_action_on:
        M[JY, sz_index(pulse_index)] = g * state.jx
    return M


def qnd_update(state: CollectiveState, pulse_index: int, back_action_on: bool = True) -> CollectiveState:
    """Interact the next probe pulse with the atoms.

    Pulses must be used in order: ``pulse_index`` has to equal
    ``state.pulses_used + 1``.
    """
    if pulse_index != state.pulses_used + 1 or pulse_index > state.n_slots:
        raise SequencingError(
            f"expected pulse {state.pulses_used + 1} (of {state.n_slots}), got {pulse_index}"
        )
    M = qnd_matrix(state, pulse_index, back_action_on)
    # the J_z row of M is a unit vector, so J_z moments pass through exactly
    return _apply(state, M, pulses_used=pulse_index)


def loss_update(state: CollectiveState, params: PhysicalParams | None = None) -> CollectiveState:
    """Apply off-resonant scattering of one probe pulse to the atoms.

    The atomic block becomes ``chi**2 * Gamma_J + N_A (1 - chi)(chi/2 + 2/3) * I``.
    Atom-light cross covariances and the atomic means shrink by ``chi``.  The
    classical polarization ``jx`` shrinks by ``chi`` only when
    ``params.polarization_decay`` is set.
    """
    params = state.params if params is None else params
    chi = params.chi
    if chi == 1.0:
        return state
    cov = np.array(state.cov)
    cov[:2, :] *= chi
    cov[:, :2] *= chi
    cov[0, 0] += params.scattering_noise
    cov[1, 1] += params.scattering_noise
    mean = np.array(state.mean)
    mean[:2] *= chi
    jx = state.jx * chi if params.polarization_decay else state.jx
    return state._replace(mean=mean, cov=cov, jx=jx)


def pulse_step(state: CollectiveState, params: PhysicalParams | None = None,
               back_action_on: bool = True, scattering_on: bool = True) -> CollectiveState:
    """Fire the next pulse: QND interaction, then scattering loss if enabled."""
    state = qnd_update(state, state.pulses_used + 1, back_action_on)
    if scattering_on:
        state = loss_update(state, params)
    return state


def readout_cov(state: CollectiveState, performed) -> MeasurementRecord:
    """Joint statistics of the S_y readouts of the listed (already fired) pulses."""
    performed = [int(p) for p in performed]
    for p in performed:
        if not 1 <= p <= state.pulses_used:
            raise SequencingError(f"pulse {p} has not been fired (pulses_used={state.pulses_used})")
    idx = [sy_index(p) for p in performed]
    return MeasurementRecord(
        labels=tuple(performed),
        mu=state.mean[idx].copy(),
        gamma_y=state.cov[np.ix_(idx, idx)].copy(),
    )
