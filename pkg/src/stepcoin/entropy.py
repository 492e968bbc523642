"""Coin-space reduced density matrix and the entropic comparison of SDC and SIC walks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from stepcoin.errors import ValidationError
from stepcoin.observables import (
    TimeSeries,
    probability_field,
    shannon_coin,
    shannon_position,
)
from stepcoin.spectral import ZERO_TOL, as_hermitian, eig_hermitian, log_on_support
from stepcoin.walk import CoinParams, InitialState, Mode, Wavefunction, trajectory

__all__ = [
    "ReducedDensity",
    "QreResult",
    "EntropySeries",
    "reduced_density",
    "entanglement",
    "qre",
    "qre_direct",
    "smooth",
    "entropy_series",
]

SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class ReducedDensity:
    """Coin-space density matrix ``tr_pos |Psi(t)><Psi(t)|``."""

    matrix: np.ndarray
    step: int = 0

    def __post_init__(self):
        m = as_hermitian(self.matrix)
        if m.shape != (4, 4):
            raise ValidationError(f"reduced density must be 4x4, got {m.shape}")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise ValidationError(f"trace must be 1, got {np.trace(m).real!r}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class QreResult:
    """Relative entropy D(rho||sigma), its variance V and the eigenbasis overlaps |c_ik|^2.

    With ``support_violation`` set, rho has weight outside the support of
    sigma: ``d`` is +inf and ``v`` is NaN.
    """

    d: float
    v: float
    overlap: np.ndarray
    support_violation: bool = False


def reduced_density(psi: Wavefunction) -> ReducedDensity:
    """rho_ij = sum_x A_x^(i) conj(A_x^(j))."""
    a = psi.amplitudes
    return ReducedDensity(a.T @ a.conj(), psi.step)


def entanglement(rho: ReducedDensity, zero_tol: float = ZERO_TOL) -> float:
    """Von Neumann entropy -tr rho log rho (natural log)."""
    lam = eig_hermitian(rho.matrix).values
    lam = lam[lam > zero_tol]
    return max(-float(np.sum(lam * np.log(lam))), 0.0)


def smooth(sigma: ReducedDensity, eps: float) -> ReducedDensity:
    """Mix in the maximally mixed state: (1 - eps) sigma + eps I/4."""
    return ReducedDensity((1.0 - eps) * sigma.matrix + eps * np.eye(4) / 4.0, sigma.step)


def qre(
    rho: ReducedDensity,
    sigma: ReducedDensity,
    zero_tol: float = ZERO_TOL,
    support_tol: float = SUPPORT_TOL,
    smoothing: float | None = None,
) -> QreResult:
    """Quantum relative entropy and information variance from the two eigenbases.

    With ``rho = sum_i l_i |P_i><P_i|``, ``sigma = sum_k m_k |Q_k><Q_k|`` and
    ``c_ik = <P_i|Q_k>``::

        D = sum_i l_i log l_i - sum_ik l_i log m_k |c_ik|^2
        V = sum_i l_i (log l_i)^2 + sum_ik l_i (log m_k)^2 |c_ik|^2
            - 2 sum_ik l_i log l_i log m_k |c_ik|^2 - D^2

    Sums run over the supports (eigenvalues above ``zero_tol``). ``smoothing``
    replaces sigma by ``smooth(sigma, smoothing)`` first.
    """
    if rho.step != sigma.step:
        raise ValidationError(f"step mismatch: rho at {rho.step}, sigma at {sigma.step}")
    if smoothing is not None:
        sigma = smooth(sigma, smoothing)
    er = eig_hermitian(rho.matrix)
    es = eig_hermitian(sigma.matrix)
    for e in (er, es):
        if np.any(e.values < -zero_tol):
            raise ValidationError(f"density matrix has eigenvalue {e.values.min():.3e}")
    c2 = np.abs(er.vectors.conj().T @ es.vectors) ** 2
    sr = er.values > zero_tol
    ss = es.values > zero_tol
    lam = er.values[sr]
    outside = float(lam @ c2[np.ix_(sr, ~ss)].sum(axis=1)) if (~ss).any() else 0.0
    if outside > support_tol:
        return QreResult(math.inf, math.nan, c2, True)
    w = c2[np.ix_(sr, ss)]
    log_l = np.log(lam)
    log_m = np.log(es.values[ss])
    d = float(lam @ log_l - lam @ w @ log_m)
    second = float(lam @ log_l**2 + lam @ w @ log_m**2 - 2.0 * (lam * log_l) @ w @ log_m)
    return QreResult(d, second - d * d, c2, False)


def qre_direct(rho: ReducedDensity, sigma: ReducedDensity, zero_tol: float = ZERO_TOL):
    """(D, V) from explicit matrix logarithms: D = tr rho G, V = tr rho G^2 - D^2 with G = log rho - log sigma.

    Only meaningful when supp(rho) lies inside supp(sigma).
    """
    log_r, _ = log_on_support(eig_hermitian(rho.matrix), zero_tol)
    log_s, _ = log_on_support(eig_hermitian(sigma.matrix), zero_tol)
    g = log_r - log_s
    d = np.trace(rho.matrix @ g).real
    return float(d), float(np.trace(rho.matrix @ g @ g).real - d * d)


@dataclass
class EntropySeries:
    """All lockstep diagnostics of one SDC/SIC pair.

    ``series`` maps ``(quantity, walk)`` to a TimeSeries; quantities are
    ``shannon_position``, ``shannon_coin``, ``entanglement`` (walk ``sdc`` or
    ``sic``) and ``qre_d``, ``qre_v`` (walk ``sdc||sic``).
    ``zero_variance_steps`` lists the steps where V vanishes while D does not.
    """

    series: dict[tuple[str, str], TimeSeries] = field(default_factory=dict)
    zero_variance_steps: list[int] = field(default_factory=list)

    def __getitem__(self, key) -> TimeSeries:
        return self.series[key]


def entropy_series(
    params: CoinParams,
    init: InitialState,
    steps: int,
    zero_tol: float = ZERO_TOL,
    support_tol: float = SUPPORT_TOL,
    smoothing: float | None = None,
    event_tol: float = 1e-9,
) -> EntropySeries:
    """Run the SDC and SIC walks side by side and record S_P, S_C, E, D and V for t = 1..steps."""
    if steps < 1:
        raise ValidationError("entropy_series needs steps >= 1")
    walks = {
        "sdc": trajectory(init, params.with_mode(Mode.SDC), steps),
        "sic": trajectory(init, params.with_mode(Mode.SIC), steps),
    }
    for it in walks.values():
        next(it)  # skip t = 0
    rows: dict[tuple[str, str], list[float]] = {}
    ts = list(range(1, steps + 1))
    out = EntropySeries()
    for t in ts:
        rhos = {}
        for name, it in walks.items():
            psi = next(it)
            rhos[name] = reduced_density(psi)
            rows.setdefault(("shannon_position", name), []).append(
                shannon_position(probability_field(psi))
            )
            rows.setdefault(("shannon_coin", name), []).append(shannon_coin(psi))
            rows.setdefault(("entanglement", name), []).append(entanglement(rhos[name], zero_tol))
        r = qre(rhos["sdc"], rhos["sic"], zero_tol, support_tol, smoothing)
        rows.setdefault(("qre_d", "sdc||sic"), []).append(r.d)
        rows.setdefault(("qre_v", "sdc||sic"), []).append(r.v)
        if not r.support_violation and abs(r.v) <= event_tol and r.d > event_tol:
            out.zero_variance_steps.append(t)
    for key, vals in rows.items():
        # D may be +inf and V NaN at support violations
        lenient = key[0].startswith("qre_")
        out.series[key] = TimeSeries(f"{key[0]}:{key[1]}", ts, vals, allow_nonfinite=lenient)
    return out
