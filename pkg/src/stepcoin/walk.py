"""Walker state, coin, shift and time evolution.

The walker lives on Z^2 with a four-dimensional coin space. Components 0 and 3
hop along the diagonal (1, 1), components 1 and 2 along the anti-diagonal
(1, -1)::

    |0, x> -> |0, x + (1, 1)>      |1, x> -> |1, x + (1, -1)>
    |2, x> -> |2, x - (1, -1)>     |3, x> -> |3, x - (1, 1)>

One step is ``U_t = S (C_t x I)``. The coin advancing the walk from step t-1
to step t is ``C_t``, so the first coin applied is ``C_1`` and the
step-dependent and step-independent walks agree after one step.

States are stored sparsely: a sorted array of occupied sites plus the matching
(K, 4) amplitude block. Localized walks occupy only a handful of sites.
"""

from __future__ import annotations

import enum
import math
from collections.abc import Iterator
from dataclasses import dataclass, field, replace

import numpy as np

from stepcoin.errors import ResourceBudgetError, ValidationError

__all__ = [
    "Mode",
    "CoinParams",
    "CoinMatrix",
    "Wavefunction",
    "InitialState",
    "SHIFTS",
    "PRUNE_THRESHOLD",
    "DEFAULT_SITE_BUDGET",
    "canonical_angle",
    "coin_matrix",
    "apply_coin",
    "apply_shift",
    "step",
    "trajectory",
    "evolve",
]

#: Lattice displacement of each coin component under the shift.
SHIFTS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=np.int64)

#: Sites whose total probability drops below this are removed after a step.
PRUNE_THRESHOLD = 1e-30

DEFAULT_SITE_BUDGET = 1_000_000

_COIN_PATTERN = np.array(
    [
        [1, 0, 0, 1],
        [0, 1, 1, 0],
        [0, 1, 1, 0],
        [1, 0, 0, 1],
    ],
    dtype=bool,
)


class Mode(str, enum.Enum):
    SDC = "sdc"
    SIC = "sic"


def canonical_angle(x: float) -> float:
    """Reduce an angle into (-pi, pi]."""
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"angle must be finite, got {x!r}")
    r = math.remainder(x, 2.0 * math.pi)
    if r <= -math.pi:
        r += 2.0 * math.pi
    return r


@dataclass(frozen=True)
class CoinParams:
    """Coin angles (radians) and the coin schedule.

    Angles are canonicalized into (-pi, pi] on construction; every matrix
    entry is 2*pi periodic in t*angle for integer t so this loses nothing.
    """

    theta1: float
    theta2: float
    phi: float = 0.0
    mode: Mode = Mode.SDC

    def __post_init__(self):
        object.__setattr__(self, "theta1", canonical_angle(self.theta1))
        object.__setattr__(self, "theta2", canonical_angle(self.theta2))
        object.__setattr__(self, "phi", canonical_angle(self.phi))
        object.__setattr__(self, "mode", Mode(self.mode))

    @classmethod
    def symmetric(cls, theta: float, phi: float = 0.0, mode: Mode = Mode.SDC) -> "CoinParams":
        return cls(theta, theta, phi, mode)

    def with_mode(self, mode: Mode | str) -> "CoinParams":
        return replace(self, mode=Mode(mode))

    def effective_step(self, t: int) -> int:
        """The step whose coin is used at step t (always 1 for SIC)."""
        if t < 1:
            raise ValidationError(f"coin step must be >= 1, got {t}")
        return 1 if self.mode is Mode.SIC else int(t)


@dataclass(frozen=True)
class CoinMatrix:
    entries: np.ndarray
    step: int

    def is_unitary(self, tol: float = 1e-12) -> bool:
        c = self.entries
        return bool(np.max(np.abs(c @ c.conj().T - np.eye(4))) <= tol)


def coin_matrix(params: CoinParams, t: int) -> CoinMatrix:
    """Build the 4x4 coin applied at step ``t``.

    Parameters
    ----------
    params : CoinParams
        Angles and schedule. In SIC mode the step-1 matrix is returned for
        every ``t``.
    t : int
        Step number, ``t >= 1``.

    Returns
    -------
    CoinMatrix
        Block-structured unitary acting on the (0, 3) and (1, 2) coin pairs.
    """
    te = params.effective_step(t)
    a1 = te * params.theta1
    a2 = te * params.theta2
    outer = np.exp(-1j * te * params.phi)
    inner = np.exp(1j * te * params.phi)
    c = np.zeros((4, 4), dtype=np.complex128)
    c[0, 0] = c[3, 3] = outer * math.cos(a1)
    c[0, 3] = c[3, 0] = -1j * outer * math.sin(a1)
    c[1, 1] = c[2, 2] = inner * math.cos(a2)
    c[1, 2] = c[2, 1] = -1j * inner * math.sin(a2)
    c.setflags(write=False)
    return CoinMatrix(c, te)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Wavefunction:
    """Immutable sparse walker state at a given step.

    ``sites`` is a (K, 2) integer array of lattice points (m, n), unique and in
    lexicographic order; ``amplitudes`` is the (K, 4) complex block holding
    the coin components at those sites. ``origin`` records where the walk
    started, which fixes the parity and light-cone constraints.
    """

    step: int
    sites: np.ndarray
    amplitudes: np.ndarray
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=np.int64).reshape(-1, 2)
        amps = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1, 4)
        if len(sites) != len(amps):
            raise ValidationError("sites and amplitudes must have the same length")
        if len(sites) > 1:
            order = np.lexsort((sites[:, 1], sites[:, 0]))
            sites, amps = sites[order], amps[order]
            if np.any(np.all(sites[1:] == sites[:-1], axis=1)):
                raise ValidationError("duplicate lattice site in wavefunction")
        object.__setattr__(self, "sites", _frozen(sites))
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    @classmethod
    def from_mapping(cls, mapping, step: int = 0, origin=(0, 0)) -> "Wavefunction":
        """Build from ``{(m, n): 4-vector}``."""
        if not mapping:
            return cls(step, np.empty((0, 2), np.int64), np.empty((0, 4), np.complex128), origin)
        keys = sorted(mapping)
        return cls(step, np.array(keys), np.array([mapping[k] for k in keys]), origin)

    def as_mapping(self) -> dict[tuple[int, int], np.ndarray]:
        return {(int(m), int(n)): a.copy() for (m, n), a in zip(self.sites, self.amplitudes)}

    def amplitude_at(self, m: int, n: int) -> np.ndarray:
        hit = np.nonzero((self.sites[:, 0] == m) & (self.sites[:, 1] == n))[0]
        if len(hit) == 0:
            return np.zeros(4, dtype=np.complex128)
        return self.amplitudes[hit[0]].copy()

    def site_probabilities(self) -> np.ndarray:
        return np.sum(np.abs(self.amplitudes) ** 2, axis=1)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def __len__(self):
        return len(self.sites)

    def check_invariants(self, norm_tol: float = 1e-10) -> None:
        """Raise ValidationError unless norm, parity and light cone hold."""
        if abs(self.norm_squared() - 1.0) > norm_tol:
            raise ValidationError(f"norm drifted: |psi|^2 = {self.norm_squared()!r}")
        rel = self.sites - np.array(self.origin)
        if np.any((rel - self.step) % 2 != 0):
            raise ValidationError("occupied site with wrong parity")
        if np.any(np.abs(rel) > self.step):
            raise ValidationError("occupied site outside the light cone")


@dataclass(frozen=True)
class InitialState:
    """Product state ``spinor (x) |origin>``; defaults to (1, i, 0, 0)/sqrt(2) at (0, 0)."""

    spinor: np.ndarray = field(
        default_factory=lambda: np.array([1.0, 1.0j, 0.0, 0.0]) / math.sqrt(2.0)
    )
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        s = np.asarray(self.spinor, dtype=np.complex128).reshape(-1)
        if s.shape != (4,):
            raise ValidationError(f"spinor must have 4 components, got {s.shape}")
        if abs(np.linalg.norm(s) - 1.0) > 1e-12:
            raise ValidationError(f"spinor must be normalized, |s| = {np.linalg.norm(s)!r}")
        object.__setattr__(self, "spinor", _frozen(s))
        object.__setattr__(self, "origin", (int(self.origin[0]), int(self.origin[1])))

    def wavefunction(self) -> Wavefunction:
        return Wavefunction(0, np.array([self.origin]), self.spinor[None, :], self.origin)


def apply_coin(psi: Wavefunction, c: CoinMatrix) -> Wavefunction:
    """Multiply the coin into the 4-vector at every occupied site."""
    return Wavefunction(psi.step, psi.sites, psi.amplitudes @ c.entries.T, psi.origin)


def apply_shift(psi: Wavefunction) -> Wavefunction:
    """Move each coin component by its displacement and advance the step counter.

    Exact zeros are not transported, so the result only holds sites carrying
    amplitude. Nonzero amplitudes are permuted, never combined, so the norm is
    preserved exactly.
    """
    comp_sites, comp_idx, comp_vals = [], [], []
    for i in range(4):
        col = psi.amplitudes[:, i]
        live = col != 0
        comp_sites.append(psi.sites[live] + SHIFTS[i])
        comp_idx.append(np.full(int(live.sum()), i))
        comp_vals.append(col[live])
    moved = np.concatenate(comp_sites)
    if len(moved) == 0:
        return Wavefunction(psi.step + 1, moved.reshape(0, 2), np.empty((0, 4)), psi.origin)
    new_sites, where = np.unique(moved, axis=0, return_inverse=True)
    amps = np.zeros((len(new_sites), 4), dtype=np.complex128)
    amps[where.reshape(-1), np.concatenate(comp_idx)] = np.concatenate(comp_vals)
    return Wavefunction(psi.step + 1, new_sites, amps, psi.origin)


def _prune(psi: Wavefunction, threshold: float) -> Wavefunction:
    keep = psi.site_probabilities() >= threshold
    if keep.all():
        return psi
    return Wavefunction(psi.step, psi.sites[keep], psi.amplitudes[keep], psi.origin)


def step(psi: Wavefunction, params: CoinParams, prune: float = PRUNE_THRESHOLD) -> Wavefunction:
    """Advance one step: coin C_{t} (t = psi.step + 1; C_1 for SIC), then shift."""
    c = coin_matrix(params, psi.step + 1)
    return _prune(apply_shift(apply_coin(psi, c)), prune)


def trajectory(
    init: InitialState | Wavefunction,
    params: CoinParams,
    steps: int,
    prune: float = PRUNE_THRESHOLD,
) -> Iterator[Wavefunction]:
    """Yield Psi(0), Psi(1), ..., Psi(steps)."""
    psi = init.wavefunction() if isinstance(init, InitialState) else init
    yield psi
    for _ in range(steps):
        psi = step(psi, params, prune)
        yield psi


def max_sites(steps: int) -> int:
    # The coin never mixes the (0, 3) and (1, 2) pairs, so a walk started on
    # one site stays on the two diagonals through it: at most 2*steps + 1 sites.
    return 2 * steps + 1


def evolve(
    init: InitialState,
    params: CoinParams,
    steps: int,
    snapshot_only: bool = False,
    site_budget: int = DEFAULT_SITE_BUDGET,
    prune: float = PRUNE_THRESHOLD,
) -> list[Wavefunction]:
    """Run the walk for ``steps`` steps.

    Returns the whole trajectory ``[Psi(0), ..., Psi(steps)]`` or, with
    ``snapshot_only``, the one-element list ``[Psi(steps)]``.

    Raises ResourceBudgetError when the reachable site count for ``steps``
    exceeds ``site_budget``.
    """
    if steps < 0:
        raise ValidationError(f"steps must be >= 0, got {steps}")
    if max_sites(steps) > site_budget:
        raise ResourceBudgetError(
            f"{steps} steps can reach {max_sites(steps)} sites, budget is {site_budget}"
        )
    if snapshot_only:
        last = None
        for last in trajectory(init, params, steps, prune):
            pass
        return [last]
    return list(trajectory(init, params, steps, prune))
