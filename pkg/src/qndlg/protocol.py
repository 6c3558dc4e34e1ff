"""
Measurement protocols on an equally spaced time grid.

A sequence has ``n_slots`` time slots separated by a precession angle
``theta``; slot 1 sits at t = 0.  A boolean *mask* says in which slots a probe
pulse is fired.  Slots without a pulse still advance time but inject neither
back action nor scattering.

Correlators ``C_ij`` are obtained from separate measurement sequences, as in a
Leggett-Garg experiment.  Three ways of choosing those sequences are provided
(``scheme`` argument):

``"optimized"``
    for each pair, the mask (containing ``i`` and ``j``) that minimizes
    ``C_ij``.  Pulses other than ``i`` and ``j`` are fired but their
    readouts are discarded.  This is the default.
``"pairwise"``
    only the pulses ``i`` and ``j`` are fired.
``"joint"``
    every correlator is read from one sequence with all slots fired.  The
    readouts then share one joint distribution, so ``K_n >= 0`` always.

Two propagation routes exist.  :func:`run_sequence` composes the primitive
maps of :mod:`qndlg.gaussian_dynamics` on the full state.  The batched
:func:`readout_covariances` works on the marginal (J_y, J_z, y_1..y_n), which
is exact because the S_z of a pulse is never touched after it has driven the
back action, and propagates many masks at once.
"""
from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import gaussian_dynamics as gd
from .errors import ParameterError
from .gaussian_dynamics import PhysicalParams
from .lgi_metrics import LgiResult, MeasurementRecord, k_n, pairwise_correlators, sign_correlation

SCHEMES = ("optimized", "pairwise", "joint")
MAX_OPT_SLOTS = 12
DEFAULT_GRID_POINTS = 512


def default_theta_grid(points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """``points`` uniform angles on (0, 2*pi], the last one equal to 2*pi."""
    return 2 * np.pi * np.arange(1, points + 1) / points


def worker_count() -> int:
    """Worker cap from ``QND_LG_THREADS`` (default 1)."""
    raw = os.environ.get("QND_LG_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"QND_LG_THREADS must be an integer, got {raw!r}") from None
    return max(n, 1)


@dataclass(frozen=True)
class SequenceSpec:
    """An equally spaced sequence of ``n_slots`` measurement slots."""

    n_slots: int
    theta: float
    performed: tuple | None = None
    back_action_on: bool = True
    scattering_on: bool = True

    def __post_init__(self):
        if int(self.n_slots) != self.n_slots or self.n_slots < 1:
            raise ParameterError(f"n_slots must be a positive integer, got {self.n_slots}")
        if not math.isfinite(self.theta):
            raise ParameterError("theta must be finite")
        performed = (True,) * int(self.n_slots) if self.performed is None else tuple(
            bool(p) for p in self.performed)
        if len(performed) != self.n_slots:
            raise ParameterError(f"mask has {len(performed)} entries for {self.n_slots} slots")
        object.__setattr__(self, "n_slots", int(self.n_slots))
        object.__setattr__(self, "performed", performed)

    @property
    def performed_slots(self) -> tuple:
        return tuple(i + 1 for i, p in enumerate(self.performed) if p)


def run_sequence(spec: SequenceSpec, params: PhysicalParams) -> MeasurementRecord:
    """Propagate the full atom-light state through one sequence.

    The record is labelled by 1-based slot numbers of the performed slots.
    """
    slots = spec.performed_slots
    if len(slots) < 2:
        raise ParameterError("a sequence needs at least two performed slots")
    state = gd.init_state(params, len(slots))
    for i, fire in enumerate(spec.performed):
        if i > 0:
            state = gd.rotate(state, spec.theta)
        if fire:
            state = gd.pulse_step(state, params, spec.back_action_on, spec.scattering_on)
    rec = gd.readout_cov(state, range(1, len(slots) + 1))
    return MeasurementRecord(labels=slots, mu=rec.mu, gamma_y=rec.gamma_y)


def all_masks(n_slots: int, min_performed: int = 2) -> np.ndarray:
    """Every mask with at least ``min_performed`` pulses, in lexicographic order."""
    masks = np.array(list(itertools.product((False, True), repeat=n_slots)), dtype=bool)
    return masks[masks.sum(axis=1) >= min_performed]


def readout_covariances(n_slots: int, theta: float, masks, params: PhysicalParams,
                        back_action_on: bool = True, scattering_on: bool = True) -> np.ndarray:
    """Readout covariance matrices for a batch of masks.

    Returns an array of shape ``(len(masks), n_slots, n_slots)`` indexed by
    slot; rows and columns of slots without a pulse are zero.
    """
    masks = np.atleast_2d(np.asarray(masks, dtype=bool))
    if masks.shape[1] != n_slots:
        raise ParameterError(f"masks must have {n_slots} columns")
    batch = masks.shape[0]
    dim = 2 + n_slots
    cov = np.zeros((batch, dim, dim))
    cov[:, 0, 0] = cov[:, 1, 1] = params.n_atoms / 2.0
    jx = np.full(batch, float(params.n_atoms))
    gain = params.readout_gain
    shot = params.n_photons / 4.0
    chi = params.chi
    noise = params.scattering_noise
    R = gd.rotation_matrix(theta)
    c, s = R[1, 1], R[1, 0]

    for k in range(n_slots):
        if k > 0:
            y, z = cov[:, 0, :].copy(), cov[:, 1, :].copy()
            cov[:, 0, :] = c * y - s * z
            cov[:, 1, :] = s * y + c * z
            y, z = cov[:, :, 0].copy(), cov[:, :, 1].copy()
            cov[:, :, 0] = c * y - s * z
            cov[:, :, 1] = s * y + c * z
        fire = masks[:, k]
        f = np.where(fire, gain, 0.0)
        row = f[:, None] * cov[:, 1, :]
        var_y = f * row[:, 1] + np.where(fire, shot, 0.0)
        cov[:, 2 + k, :] = row
        cov[:, :, 2 + k] = row
        cov[:, 2 + k, 2 + k] = var_y
        if back_action_on:
            cov[:, 0, 0] += np.where(fire, (params.g * jx) ** 2 * shot, 0.0)
        if scattering_on:
            lam = np.where(fire, chi, 1.0)
            cov[:, :2, :] *= lam[:, None, None]
            cov[:, :, :2] *= lam[:, None, None]
            cov[:, 0, 0] += np.where(fire, noise, 0.0)
            cov[:, 1, 1] += np.where(fire, noise, 0.0)
            if params.polarization_decay:
                jx = jx * lam
    return cov[:, 2:, 2:]


def _correlators_from_cov(gamma: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Sign correlators per mask; pairs not both fired are +inf."""
    var = np.einsum("mii->mi", gamma)
    denom = np.sqrt(var[:, :, None] * var[:, None, :])
    both = masks[:, :, None] & masks[:, None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(both, gamma / np.where(both, denom, 1.0), 0.0)
    return np.where(both, sign_correlation(rho), np.inf)


@dataclass(frozen=True)
class CorrelatorTable:
    """Pair correlators on an ``n_slots`` grid and the masks that produced them.

    ``values`` is symmetric with unit diagonal.  ``masks`` maps a 1-based pair
    ``(i, j)`` with ``i < j`` to the performed mask of its sequence.
    """

    n_slots: int
    theta: float
    scheme: str
    values: np.ndarray
    masks: dict = field(repr=False)

    def lgi(self) -> LgiResult:
        return k_n(self.values)


def _pair_masks(n_slots: int) -> tuple[list, np.ndarray]:
    pairs = list(itertools.combinations(range(n_slots), 2))
    masks = np.zeros((len(pairs), n_slots), dtype=bool)
    for m, (i, j) in enumerate(pairs):
        masks[m, [i, j]] = True
    return pairs, masks


def correlator_table(n_slots: int, theta: float, params: PhysicalParams,
                     scheme: str = "optimized", back_action_on: bool = True,
                     scattering_on: bool = True) -> CorrelatorTable:
    """Pair correlators on the slot grid under the chosen sequence scheme."""
    if scheme not in SCHEMES:
        raise ParameterError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if n_slots < 2:
        raise ParameterError("need at least two slots")
    if scheme == "optimized" and n_slots > MAX_OPT_SLOTS:
        raise ParameterError(f"exhaustive mask search is capped at {MAX_OPT_SLOTS} slots")

    values = np.eye(n_slots)
    witness = {}
    if scheme == "pairwise":
        pairs, masks = _pair_masks(n_slots)
        C = _correlators_from_cov(
            readout_covariances(n_slots, theta, masks, params, back_action_on, scattering_on), masks)
        for m, (i, j) in enumerate(pairs):
            values[i, j] = values[j, i] = C[m, i, j]
            witness[(i + 1, j + 1)] = tuple(bool(x) for x in masks[m])
    else:
        masks = (np.ones((1, n_slots), dtype=bool) if scheme == "joint"
                 else all_masks(n_slots))
        C = _correlators_from_cov(
            readout_covariances(n_slots, theta, masks, params, back_action_on, scattering_on), masks)
        best = np.argmin(C, axis=0)  # first minimum = lexicographically smallest mask
        for i, j in itertools.combinations(range(n_slots), 2):
            m = best[i, j]
            values[i, j] = values[j, i] = C[m, i, j]
            witness[(i + 1, j + 1)] = tuple(bool(x) for x in masks[m])
    return CorrelatorTable(n_slots=n_slots, theta=float(theta), scheme=scheme,
                           values=values, masks=witness)


def evaluate_lgi(n_slots: int, theta: float, params: PhysicalParams, scheme: str = "optimized",
                 back_action_on: bool = True, scattering_on: bool = True) -> LgiResult:
    """``K_n`` and ``K'_n`` for ``n_slots`` equally delayed measurements."""
    if n_slots < 3:
        raise ParameterError(f"LGI runs need n_slots >= 3, got {n_slots}")
    return correlator_table(n_slots, theta, params, scheme, back_action_on, scattering_on).lgi()


@dataclass(frozen=True)
class SweepRow:
    theta: float
    n: int
    k_value: float
    k_reduced: float
    back_action: bool
    scattering: bool


@dataclass(frozen=True)
class SweepResult:
    rows: tuple

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def min_reduced(self) -> SweepRow:
        return min(self.rows, key=lambda r: r.k_reduced)


def _check_grid(theta_grid) -> np.ndarray:
    grid = np.asarray(theta_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ParameterError("theta grid is empty")
    if not np.all(np.isfinite(grid)):
        raise ParameterError("theta grid contains non-finite values")
    if np.any(np.diff(grid) <= 0):
        raise ParameterError("theta grid must be strictly increasing")
    return grid


def _map(fn, items, workers):
    workers = worker_count() if workers is None else max(int(workers), 1)
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sweep_theta(template: SequenceSpec, params: PhysicalParams, theta_grid=None,
                scheme: str = "optimized", workers: int | None = None) -> SweepResult:
    """Evaluate ``K_n`` at every angle of ``theta_grid``.

    ``template`` supplies the slot count and the toggles; its ``theta`` is
    ignored.  With ``scheme="joint"`` the template mask selects the readouts.
    """
    grid = _check_grid(default_theta_grid() if theta_grid is None else theta_grid)
    n = template.n_slots
    ba, sc = template.back_action_on, template.scattering_on

    def one(theta):
        if scheme == "joint":
            spec = SequenceSpec(n, theta, template.performed, ba, sc)
            rec = run_sequence(spec, params)
            res = k_n(pairwise_correlators(rec))
        else:
            res = evaluate_lgi(n, theta, params, scheme, ba, sc)
        return SweepRow(float(theta), res.n, res.k_value, res.k_reduced, ba, sc)

    return SweepResult(rows=tuple(_map(one, grid, workers)))


@dataclass(frozen=True)
class TripleResult:
    """Best three-slot inequality on one grid.

    ``masks`` holds the sequence used for each of the three correlators, keyed
    by the 1-based pairs ``(a, b)``, ``(b, c)`` and ``(a, c)``.
    """

    n_slots: int
    theta: float
    triple: tuple
    k3: float
    masks: dict
    all_k3: dict = field(repr=False)
    table: CorrelatorTable = field(repr=False)

    def optima(self, tol: float = 1e-9) -> list:
        """All triples whose value is within ``tol`` of the best one."""
        return sorted(t for t, v in self.all_k3.items() if v <= self.k3 + tol)


def optimize_triple(n_slots: int, theta: float, params: PhysicalParams,
                    back_action_on: bool = True, scattering_on: bool = True) -> TripleResult:
    """Minimize ``C_ab + C_bc + C_ac + 1`` over triples and measurement sequences.

    Each correlator comes from its own sequence, so the mask search decouples
    per pair.  Ties go to the lexicographically smallest triple and, per pair,
    the lexicographically smallest mask.
    """
    if n_slots < 3:
        raise ParameterError(f"need n_slots >= 3, got {n_slots}")
    table = correlator_table(n_slots, theta, params, "optimized", back_action_on, scattering_on)
    C = table.values
    all_k3 = {}
    for a, b, c in itertools.combinations(range(n_slots), 3):
        all_k3[(a + 1, b + 1, c + 1)] = float(C[a, b] + C[b, c] + C[a, c] + 1.0)
    triple = min(all_k3, key=lambda t: (all_k3[t], t))
    a, b, c = triple
    masks = {p: table.masks[p] for p in ((a, b), (b, c), (a, c))}
    return TripleResult(n_slots=n_slots, theta=float(theta), triple=triple, k3=all_k3[triple],
                        masks=masks, all_k3=all_k3, table=table)


def sweep_triple(n_slots: int, params: PhysicalParams, theta_grid=None,
                 back_action_on: bool = True, scattering_on: bool = True,
                 workers: int | None = None) -> list:
    """:func:`optimize_triple` at every angle of ``theta_grid``."""
    grid = _check_grid(default_theta_grid() if theta_grid is None else theta_grid)
    return _map(lambda t: optimize_triple(n_slots, t, params, back_action_on, scattering_on),
                grid, workers)


@dataclass(frozen=True)
class AuditResult:
    mean_diff: float
    var_diff: float


def disturbance_audit(params: PhysicalParams, back_action_on: bool = True,
                      scattering_on: bool = True) -> AuditResult:
    """Two identical pulses with no precession in between.

    Returns ``<S_y^(2)> - <S_y^(1)>`` and ``var(S_y^(2)) - var(S_y^(1))``,
    which measure the mean and ``g**2 * <S_x>**2`` times the variance of the
    disturbance to J_z.
    """
    state = gd.init_state(params, 2)
    state = gd.pulse_step(state, params, back_action_on, scattering_on)
    state = gd.pulse_step(state, params, back_action_on, scattering_on)
    rec = gd.readout_cov(state, [1, 2])
    return AuditResult(mean_diff=float(rec.mu[1] - rec.mu[0]),
                       var_diff=float(rec.gamma_y[1, 1] - rec.gamma_y[0, 0]))


def audit_var_diff_closed_form(params: PhysicalParams) -> float:
    """Expected variance difference of the audit when scattering acts between the pulses."""
    chi = params.chi
    return params.readout_gain ** 2 * ((chi ** 2 - 1) * params.n_atoms / 2 + params.scattering_noise)
