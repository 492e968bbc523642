"""Transfer-matrix localization: Lyapunov exponents, SIC diagonalization and the perturbative estimate.

The transfer matrix at step t is block diagonal on the coin pairs (0, 3) and
(1, 2)::

    [ e^{-it phi + i w1} sec t th1      -i tan t th1              ]   pair (0, 3)
    [  i tan t th1                       e^{it phi - i w1} sec t th1 ]

    [ e^{it phi + i w2} sec t th2       -i tan t th2              ]   pair (1, 2)
    [  i tan t th2                       e^{-it phi - i w2} sec t th2 ]

Each block has unit determinant (sec^2 - tan^2 = 1) and the SU(1, 1) form
[[a, b], [b*, a*]], so for a unit start vector ``|v|^2 = 1 + 2|v_lower|^2``
never drops below 1 and the numerical exponent is non-negative.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from stepcoin.errors import BandError, PoleError, ValidationError
from stepcoin.walk import CoinParams, canonical_angle

__all__ = [
    "POLE_TOL",
    "LAMBDA_ZERO_TOL",
    "ESTIMATORS",
    "DispersionPoint",
    "TransferMatrix",
    "LyapunovResult",
    "SicDiagonalization",
    "PerturbCoeffs",
    "dispersion",
    "transfer_matrix",
    "lyapunov",
    "lloc_sweep",
    "omega_grid",
    "sic_diagonalization",
    "perturbation_coeffs",
    "perturbed_block_matrix",
    "sec2_average",
    "analytic_lloc",
    "analytic_lloc_curve",
    "workers_from_env",
]

POLE_TOL = 1e-12
# |lambda| at or below this is free propagation: l_loc = inf
LAMBDA_ZERO_TOL = 1e-13
ESTIMATORS = ("envelope", "endpoint")
WORKERS_ENV = "STEPCOIN_WORKERS"


@dataclass(frozen=True)
class DispersionPoint:
    k1: float
    k2: float
    omega1: float
    omega2: float


def dispersion(theta1: float, theta2: float, k1: float, k2: float) -> DispersionPoint:
    """Band frequencies from cos w1 = cos th1 cos(k1 + k2), cos w2 = cos th2 cos(k1 - k2), principal branch."""
    k1 = canonical_angle(k1)
    k2 = canonical_angle(k2)
    c1 = np.clip(math.cos(theta1) * math.cos(k1 + k2), -1.0, 1.0)
    c2 = np.clip(math.cos(theta2) * math.cos(k1 - k2), -1.0, 1.0)
    return DispersionPoint(k1, k2, math.acos(c1), math.acos(c2))


@dataclass(frozen=True)
class TransferMatrix:
    entries: np.ndarray
    step: int

    def block_determinants(self) -> tuple[complex, complex]:
        e = self.entries
        outer = e[0, 0] * e[3, 3] - e[0, 3] * e[3, 0]
        inner = e[1, 1] * e[2, 2] - e[1, 2] * e[2, 1]
        return complex(outer), complex(inner)


def _check_pole(params: CoinParams, te: int, pole_tol: float) -> None:
    for th in (params.theta1, params.theta2):
        if abs(math.cos(te * th)) <= pole_tol:
            raise PoleError(f"sec({te} * {th!r}) diverges", step=te)


def transfer_matrix(
    params: CoinParams, omega1: float, omega2: float, t: int, pole_tol: float = POLE_TOL
) -> TransferMatrix:
    """Transfer matrix for step ``t`` (step 1 at every t in SIC mode).

    Raises PoleError when |cos(t theta)| <= pole_tol for either angle.
    """
    te = params.effective_step(t)
    _check_pole(params, te, pole_tol)
    a1, a2, ph = te * params.theta1, te * params.theta2, te * params.phi
    s1, s2 = 1.0 / math.cos(a1), 1.0 / math.cos(a2)
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0] = np.exp(1j * (-ph + omega1)) * s1
    m[0, 3] = -1j * math.tan(a1)
    m[3, 0] = 1j * math.tan(a1)
    m[3, 3] = np.exp(1j * (ph - omega1)) * s1
    m[1, 1] = np.exp(1j * (ph + omega2)) * s2
    m[1, 2] = -1j * math.tan(a2)
    m[2, 1] = 1j * math.tan(a2)
    m[2, 2] = np.exp(1j * (-ph - omega2)) * s2
    return TransferMatrix(m, te)


@dataclass(frozen=True)
class LyapunovResult:
    """Lyapunov exponent and localization length at one sweep coordinate.

    ``lyapunov`` is +inf and ``l_loc`` is 0 when a pole was hit
    (``divergent``); ``l_loc`` is +inf for a vanishing exponent.
    """

    lyapunov: float
    l_loc: float
    divergent: bool
    omega: float
    pole_step: int | None = None


def _first_pole(params: CoinParams, steps: int, pole_tol: float) -> int | None:
    last = 1 if params.mode.value == "sic" else steps
    for t in range(1, last + 1):
        try:
            _check_pole(params, t, pole_tol)
        except PoleError:
            return t
    return None


def _iterate(params: CoinParams, omega1: np.ndarray, omega2: np.ndarray, steps: int):
    """Renormalized transfer iteration from (1, 0, 0, 0) for many frequencies at once.

    Returns (endpoint, envelope) exponent arrays: ``(1/N) log|v_N|`` and
    ``(1/N) max_{x<=N} log|v_x|``.
    """
    w = len(omega1)
    v = np.zeros((4, w), dtype=np.complex128)
    v[0] = 1.0
    acc = np.zeros(w)
    peak = np.zeros(w)
    e1p, e1m = np.exp(1j * omega1), np.exp(-1j * omega1)
    e2p, e2m = np.exp(1j * omega2), np.exp(-1j * omega2)
    for t in range(1, steps + 1):
        te = params.effective_step(t)
        a1, a2, ph = te * params.theta1, te * params.theta2, te * params.phi
        s1, s2 = 1.0 / math.cos(a1), 1.0 / math.cos(a2)
        t1, t2 = math.tan(a1), math.tan(a2)
        pm, pp = np.exp(-1j * ph), np.exp(1j * ph)
        v0 = pm * s1 * e1p * v[0] - 1j * t1 * v[3]
        v3 = 1j * t1 * v[0] + pp * s1 * e1m * v[3]
        v1 = pp * s2 * e2p * v[1] - 1j * t2 * v[2]
        v2 = 1j * t2 * v[1] + pm * s2 * e2m * v[2]
        v = np.stack([v0, v1, v2, v3])
        g = np.sqrt(np.sum(v.real**2 + v.imag**2, axis=0))
        acc += np.log(g)
        v /= g
        np.maximum(peak, acc, out=peak)
    return acc / steps, peak / steps


def _results(params, omegas, steps, estimator, pole_tol) -> list[LyapunovResult]:
    if estimator not in ESTIMATORS:
        raise ValidationError(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}")
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    omegas = np.asarray(omegas, dtype=np.float64).reshape(-1)
    pole = _first_pole(params, steps, pole_tol)
    if pole is not None:
        return [LyapunovResult(math.inf, 0.0, True, float(w), pole) for w in omegas]
    endpoint, envelope = _iterate(params, omegas, omegas, steps)
    lam = envelope if estimator == "envelope" else endpoint
    out = []
    for w, x in zip(omegas, lam):
        x = float(x)
        l_loc = math.inf if x <= LAMBDA_ZERO_TOL else 1.0 / x
        out.append(LyapunovResult(x, l_loc, False, float(w)))
    return out


def lyapunov(
    params: CoinParams,
    omega: float,
    steps: int,
    estimator: str = "envelope",
    pole_tol: float = POLE_TOL,
) -> LyapunovResult:
    """Lyapunov exponent of the transfer product at frequency ``omega`` (w1 = w2 = omega).

    The iteration starts from v0 = (1, 0, 0, 0) and applies T_1, ..., T_N
    (T_1 throughout in SIC mode), renormalizing every step.

    Parameters
    ----------
    estimator : {"envelope", "endpoint"}
        ``endpoint`` is ``(1/N) log |T_N ... T_1 v0|``. ``envelope`` uses the
        largest log-norm reached along the way, ``(1/N) max_x log |v_x|``.
        Both converge to the same exponent in the localized regime. Inside
        a transmitting band the endpoint value depends on where the
        quasi-periodic orbit happens to sit at step N and can collapse to
        ~0 at isolated frequencies; the envelope follows the oscillation
        amplitude instead and varies smoothly.

    Returns
    -------
    LyapunovResult
        ``divergent`` with ``l_loc = 0`` if some ``T_t`` hits a pole.
    """
    return _results(params, [omega], steps, estimator, pole_tol)[0]


def workers_from_env(default: int | None = None) -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise ValidationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
        return max(1, n)
    return default or os.cpu_count() or 1


def lloc_sweep(
    params: CoinParams,
    omegas,
    steps: int,
    estimator: str = "envelope",
    pole_tol: float = POLE_TOL,
    workers: int | None = None,
) -> list[LyapunovResult]:
    """``lyapunov`` at every grid frequency.

    Grid points are independent and every operation is elementwise across
    the grid, so splitting it over ``workers`` threads (default from the
    STEPCOIN_WORKERS environment variable, else the CPU count) gives
    bit-identical results.
    """
    omegas = np.asarray(omegas, dtype=np.float64).reshape(-1)
    if len(omegas) == 0:
        raise ValidationError("omega grid is empty")
    workers = workers or workers_from_env()
    chunks = [c for c in np.array_split(omegas, min(workers, len(omegas))) if len(c)]
    if len(chunks) == 1:
        return _results(params, omegas, steps, estimator, pole_tol)
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = pool.map(lambda c: _results(params, c, steps, estimator, pole_tol), chunks)
        return [r for part in parts for r in part]


def omega_grid(lo: float, hi: float, step: float, open_interval: bool = True) -> np.ndarray:
    """Integer multiples of ``step`` inside [lo, hi] (or (lo, hi)), anchored at zero.

    Anchoring at zero puts a grid point within step/2 of +-pi/2 for the usual
    0.01 spacing and keeps the grid symmetric.
    """
    if step <= 0 or not hi > lo:
        raise ValidationError(f"bad grid: [{lo}, {hi}] step {step}")
    k_lo = math.ceil(lo / step)
    k_hi = math.floor(hi / step)
    k = np.arange(k_lo, k_hi + 1)
    g = k * step
    if open_interval:
        g = g[(g > lo) & (g < hi)]
    return g


@dataclass(frozen=True)
class SicDiagonalization:
    similarity: np.ndarray
    phases: np.ndarray
    omega_bar1: float
    omega_bar2: float
    xi1: float
    xi2: float


def _require_zero_phi(params: CoinParams) -> None:
    if params.phi != 0.0:
        raise ValidationError("the SIC diagonalization and perturbation formulas assume phi = 0")


def _omega_bar(omega: float, theta: float) -> float:
    c = math.cos(omega) / math.cos(theta)
    if abs(c) > 1.0 + 1e-12:
        raise BandError(f"cos(omega) sec(theta) = {c!r} lies outside [-1, 1]")
    return math.acos(max(-1.0, min(1.0, c)))


def _xi(omega: float, theta: float, omega_bar: float) -> float:
    return math.sin(omega) / math.cos(theta) - math.sin(omega_bar)


def _branch(omega: float, theta: float) -> tuple[float, float]:
    # principal omega_bar unless that makes S singular (xi^2 = tan^2 theta),
    # in which case the conjugate eigenvalue ordering -omega_bar is used
    wb = _omega_bar(omega, theta)
    tan2 = math.tan(theta) ** 2
    for cand in (wb, -wb):
        xi = _xi(omega, theta, cand)
        if abs(xi * xi - tan2) > 1e-12:
            return cand, xi
    raise BandError(f"band edge at omega={omega!r}, theta={theta!r}: similarity transform is singular")


def _similarity(theta1, theta2, xi1, xi2) -> np.ndarray:
    t1, t2 = math.tan(theta1), math.tan(theta2)
    return np.array(
        [
            [t1, 0, 0, -xi1],
            [0, t2, -xi2, 0],
            [0, xi2, -t2, 0],
            [xi1, 0, 0, -t1],
        ],
        dtype=np.complex128,
    )


def sic_diagonalization(
    params: CoinParams, omega1: float, omega2: float, check_tol: float = 1e-9
) -> SicDiagonalization:
    """Similarity transform bringing the step-1 transfer matrix to diag(e^{i wb1}, e^{i wb2}, e^{-i wb2}, e^{-i wb1}).

    ``cos wb_i = cos w_i sec th_i``; the columns of S are built from
    ``tan th_i`` and ``xi_i = sin w_i sec th_i - sin wb_i``. The identity
    ``S^-1 T_SIC S = diag(...)`` is checked to ``check_tol``.

    Raises BandError in the evanescent regime |cos w sec th| > 1 and
    ValidationError for phi != 0.
    """
    _require_zero_phi(params)
    wb1, xi1 = _branch(omega1, params.theta1)
    wb2, xi2 = _branch(omega2, params.theta2)
    s = _similarity(params.theta1, params.theta2, xi1, xi2)
    phases = np.exp(1j * np.array([wb1, wb2, -wb2, -wb1]))
    t_sic = transfer_matrix(params.with_mode("sic"), omega1, omega2, 1).entries
    resid = np.max(np.abs(np.linalg.solve(s, t_sic @ s) - np.diag(phases)))
    if resid > check_tol:
        raise ArithmeticError(f"diagonalization residual {resid:.3e} exceeds {check_tol}")
    return SicDiagonalization(s, phases, wb1, wb2, xi1, xi2)


@dataclass(frozen=True)
class PerturbCoeffs:
    """Entries of S^-1 T_SDC(t) S: alpha, beta on the (0, 3) pair, gamma, delta on (1, 2)."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex
    xi1: float
    xi2: float
    omega_bar1: float
    omega_bar2: float
    step: int


def _diag_coeff(theta, omega, xi, t):
    # closed forms for the diagonal / off-diagonal entry of one rotated block
    sec_t = 1.0 / math.cos(theta * t)
    tan_t = math.tan(theta * t)
    tan1 = math.tan(theta)
    den = xi * xi - tan1 * tan1
    diag = (
        xi * xi * np.exp(-1j * omega) * sec_t
        + 2j * xi * tan1 * tan_t
        - np.exp(1j * omega) * tan1 * tan1 * sec_t
    ) / den
    off = (
        1j
        * sec_t
        * (2.0 * xi * tan1 * math.sin(omega) - xi * xi * math.sin(theta * t) - tan1 * tan1 * math.sin(theta * t))
        / den
    )
    return complex(diag), complex(off)


def perturbation_coeffs(
    params: CoinParams, omega1: float, omega2: float, t: int, pole_tol: float = POLE_TOL
) -> PerturbCoeffs:
    """alpha(t), beta(t), gamma(t), delta(t) of the step-dependent transfer matrix in the SIC eigenbasis."""
    _require_zero_phi(params)
    if t < 1:
        raise ValidationError("t must be >= 1")
    _check_pole(params, t, pole_tol)
    wb1, xi1 = _branch(omega1, params.theta1)
    wb2, xi2 = _branch(omega2, params.theta2)
    alpha, beta = _diag_coeff(params.theta1, omega1, xi1, t)
    gamma, delta = _diag_coeff(params.theta2, omega2, xi2, t)
    return PerturbCoeffs(alpha, beta, gamma, delta, xi1, xi2, wb1, wb2, t)


def perturbed_block_matrix(c: PerturbCoeffs) -> np.ndarray:
    """Assemble [[a, 0, 0, b], [0, g, d, 0], [0, d*, g*, 0], [b*, 0, 0, a*]]."""
    m = np.zeros((4, 4), dtype=np.complex128)
    m[0, 0], m[0, 3] = c.alpha, c.beta
    m[3, 0], m[3, 3] = np.conj(c.beta), np.conj(c.alpha)
    m[1, 1], m[1, 2] = c.gamma, c.delta
    m[2, 1], m[2, 2] = np.conj(c.delta), np.conj(c.gamma)
    return m


def _period(theta: float, n_max: int) -> int | None:
    # sec^2(n theta) has period q when theta = (p/q) pi
    frac = Fraction(theta / math.pi).limit_denominator(n_max)
    if abs(float(frac) * math.pi - theta) <= 1e-12 * max(1.0, abs(theta)):
        return frac.denominator
    return None


def sec2_average(theta: float, n_max: int = 10_000, cap: float = 1e12) -> float:
    """(1/N) sum_{n=1}^N sec^2(n theta), the N -> infinity average; +inf if a pole is met.

    For theta a rational multiple of pi the sum is periodic and N is cut to a
    whole number of periods not exceeding ``n_max``, which makes the result
    the exact limit. Any term above ``cap`` marks a pole.
    """
    if n_max < 1:
        raise ValidationError("n_max must be >= 1")
    q = _period(theta, n_max)
    n = n_max if q is None else q * (n_max // q)
    c = np.cos(np.arange(1, n + 1) * theta)
    with np.errstate(divide="ignore"):
        terms = 1.0 / (c * c)
    if not np.all(terms <= cap):
        return math.inf
    return float(np.mean(terms))


def _analytic(cos2_1, cos2_2, avg1, avg2):
    if math.isinf(avg1) or math.isinf(avg2):
        return 0.0
    den = cos2_1 * avg1 + cos2_2 * avg2
    return math.inf if den == 0.0 else 2.0 / den


def analytic_lloc(
    params: CoinParams, omega1: float, omega2: float, n_max: int = 10_000, cap: float = 1e12
) -> float:
    """Perturbative localization length 2 / <Re(alpha)^2 + Re(gamma)^2>, up to an overall constant.

    The average is cos^2 w1 <sec^2(n th1)> + cos^2 w2 <sec^2(n th2)>; a pole in
    either average gives 0 (complete localization).
    """
    return _analytic(
        math.cos(omega1) ** 2,
        math.cos(omega2) ** 2,
        sec2_average(params.theta1, n_max, cap),
        sec2_average(params.theta2, n_max, cap),
    )


def analytic_lloc_curve(params: CoinParams, omegas, n_max: int = 10_000, cap: float = 1e12):
    """Raw and peak-normalized analytic l_loc on a grid with w1 = w2 = omega.

    The normalized curve divides by the largest finite raw value, so shapes
    can be compared without the unknown overall constant.
    """
    avg1 = sec2_average(params.theta1, n_max, cap)
    avg2 = sec2_average(params.theta2, n_max, cap)
    raw = np.array([_analytic(math.cos(w) ** 2, math.cos(w) ** 2, avg1, avg2) for w in omegas])
    finite = raw[np.isfinite(raw)]
    peak = finite.max() if len(finite) else 0.0
    norm = raw / peak if peak > 0 else np.zeros_like(raw)
    return raw, norm
