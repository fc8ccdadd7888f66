"""Weak-drive expansion, Duffing steady states and bistability onset.

Expanding the saturable spin shift to first order in the photon number turns
the dressed cavity into a Duffing oscillator with an effective Kerr
coefficient and an effective cubic damping.  The steady-state photon number
then satisfies a cubic equation whose multi-valued regime is the bistable
window; the onset is located from the discriminant of that cubic.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .cavity import SpinEnsembleGroup

_REALNESS_RTOL = 1e-12
_BRACKET_GROWTH = 4.0
_BRACKET_STEPS = 60


@dataclass(frozen=True)
class WeakExpansion:
    """First-order expansion of the spin shift in the photon number.

    Upsilon_s = omega_cs - i gamma_cs + (k_cs - i g_cs) E_c + O(E_c^2),
    with the exact ratios gamma_cs = zeta2*omega_cs and g_cs = zeta2*k_cs
    where zeta2 = 1/(delta*T2).
    """

    omega_cs: float  # rad/s
    gamma_cs: float  # rad/s
    k_cs: float      # rad/s per photon
    g_cs: float      # rad/s per photon
    zeta2: float     # 1/(delta*T2), dimensionless


def weak_expansion(group: SpinEnsembleGroup):
    """Expand the ensemble shift of ``group`` to first order in E_c.

    Requires a non-zero detuning; at delta = 0 the expansion parameter
    zeta2 = 1/(delta T2) is undefined and the full saturable form
    (:func:`cdmr.cavity.ensemble_shift`) must be used instead.
    """
    if group.delta == 0.0:
        raise ValueError(
            "weak expansion is undefined at zero detuning; evaluate ensemble_shift directly"
        )
    zeta2 = 1.0 / (group.delta * group.t2)
    lorentz = 1.0 / (1.0 + zeta2**2)
    omega_cs = group.n_eff * group.g_s**2 / group.delta * lorentz
    # 1/e_cc written out as 4 g^2 T1 T2 so a zero coupling stays finite.
    inv_e_cc = 4.0 * group.g_s**2 * group.t1 * group.t2
    k_cs = -(group.n_eff * group.g_s**2 * inv_e_cc / group.delta) * (zeta2 * lorentz) ** 2
    return WeakExpansion(
        omega_cs=omega_cs,
        gamma_cs=zeta2 * omega_cs,
        k_cs=k_cs,
        g_cs=zeta2 * k_cs,
        zeta2=zeta2,
    )


@dataclass(frozen=True)
class DuffingParams:
    """Coefficients of the driven Duffing (Kerr) oscillator.

    The steady-state photon number solves

        E_c * [(omega_p - omega_0 - kerr*E_c)^2 + (gamma_t + cubic_damping*E_c)^2] = drive

    with drive = 4 gamma_f P_p / (hbar omega_c) in photons * (rad/s)^2.
    ``cubic_damping`` may be negative: spin saturation reduces absorption, so
    an ensemble-dominated mode has a negative effective cubic damping.
    """

    omega_0: float        # linear resonance, rad/s
    gamma_t: float        # total linear damping, rad/s
    kerr: float           # rad/s per photon
    cubic_damping: float  # rad/s per photon, sign free
    drive: float          # photons * (rad/s)^2

    def __post_init__(self):
        if not (self.gamma_t > 0.0 and math.isfinite(self.gamma_t)):
            raise ValueError(f"gamma_t must be finite and positive, got {self.gamma_t!r}")
        if not (self.drive >= 0.0 and math.isfinite(self.drive)):
            raise ValueError(f"drive must be finite and >= 0, got {self.drive!r}")
        for name in ("omega_0", "kerr", "cubic_damping"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.cubic_damping < 0.0 and self.kerr == 0.0:
            warnings.warn(
                "negative cubic damping with no Kerr term gives runaway solutions "
                "at large drive; check the parameter signs",
                stacklevel=2,
            )


def _cubic_coefficients(params: DuffingParams, omega_p):
    """Ascending coefficients [c0, c1, c2, c3] of the steady-state cubic."""
    delta = omega_p - params.omega_0
    k, g = params.kerr, params.cubic_damping
    return [
        -params.drive,
        delta**2 + params.gamma_t**2,
        2.0 * (params.gamma_t * g - delta * k),
        k**2 + g**2,
    ]


def duffing_steady_states(params: DuffingParams, omega_p):
    """Real non-negative steady-state photon numbers at probe frequency omega_p.

    Roots of the cubic are taken from the companion matrix; a root counts as
    real when |Im| <= 1e-12 * max(1, |root|).  Returns a sorted array with
    one, two or three entries (two only exactly at a fold).
    """
    c0, c1, c2, c3 = _cubic_coefficients(params, omega_p)
    if c3 == 0.0:
        # No nonlinearity: plain Lorentzian response.
        return np.array([params.drive / c1])
    roots = np.roots([c3, c2, c1, c0])
    real = []
    for root in roots:
        if abs(root.imag) <= _REALNESS_RTOL * max(1.0, abs(root)):
            if root.real >= -_REALNESS_RTOL * max(1.0, abs(root)):
                real.append(max(root.real, 0.0))
    if not real:
        # A cubic with c3 > 0 and c0 <= 0 always has a non-negative real root;
        # if the threshold filtered everything, keep the most-real candidate.
        best = min(roots, key=lambda r: abs(r.imag))
        real.append(max(best.real, 0.0))
    return np.sort(np.array(real))


def _discriminant_poly(params: DuffingParams):
    """Discriminant of the steady-state cubic as a polynomial in the detuning."""
    k, g = params.kerr, params.cubic_damping
    gamma, drive = params.gamma_t, params.drive
    a3 = np.array([k**2 + g**2])
    a2 = np.array([2.0 * gamma * g, -2.0 * k])          # 2(gamma g - delta k)
    a1 = np.array([gamma**2, 0.0, 1.0])                 # delta^2 + gamma^2
    a0 = np.array([-drive])
    term1 = 18.0 * npoly.polymul(npoly.polymul(a3, a2), npoly.polymul(a1, a0))
    term2 = -4.0 * npoly.polymul(npoly.polymul(a2, a2), npoly.polymul(a2, a0))
    term3 = npoly.polymul(npoly.polymul(a2, a2), npoly.polymul(a1, a1))
    term4 = -4.0 * npoly.polymul(a3, npoly.polymul(a1, npoly.polymul(a1, a1)))
    term5 = -27.0 * npoly.polymul(npoly.polymul(a3, a3), npoly.polymul(a0, a0))
    size = max(len(t) for t in (term1, term2, term3, term4, term5))
    total = np.zeros(size)
    for term in (term1, term2, term3, term4, term5):
        total[: len(term)] += term
    return total


def _bistable_detunings(params: DuffingParams):
    """Detunings at local maxima of the cubic discriminant with three positive roots."""
    disc = _discriminant_poly(params)
    gamma = params.gamma_t
    # Work in delta = gamma * u so every coefficient carries the same units,
    # then drop leading terms buried below float precision.  A cubic damping
    # many orders smaller than the Kerr term otherwise leaves a quasi-zero
    # leading coefficient whose companion matrix overflows in polyroots.
    scaled = disc * gamma ** np.arange(disc.size)
    top = np.max(np.abs(scaled))
    if top == 0.0 or not math.isfinite(top):
        return []
    keep = scaled.size
    while keep > 1 and abs(scaled[keep - 1]) <= 1e-14 * top:
        keep -= 1
    derivative = npoly.polyder(scaled[:keep])
    if np.all(derivative == 0.0):
        return []
    candidates = npoly.polyroots(derivative)
    candidates = [gamma * c.real for c in candidates if abs(c.imag) <= 1e-8 * max(1.0, abs(c))]
    found = []
    # The discriminant spans ~gamma^6 * drive^2; deep in the bistable regime it
    # overflows to inf, which still compares correctly below.
    with np.errstate(over="ignore"):
        for delta in candidates:
            if npoly.polyval(delta, disc) <= 0.0:
                continue
            roots = duffing_steady_states(params, params.omega_0 + delta)
            if len(roots) == 3 and roots[0] > 0.0:
                found.append(delta)
    return found


def _with_drive(params: DuffingParams, drive):
    return DuffingParams(
        omega_0=params.omega_0,
        gamma_t=params.gamma_t,
        kerr=params.kerr,
        cubic_damping=params.cubic_damping,
        drive=drive,
    )


@dataclass(frozen=True)
class BistabilityOnset:
    """Critical point where the response first becomes multivalued."""

    photon_number: float  # E_co
    omega_p: float        # probe frequency at onset, rad/s
    drive: float          # drive strength at onset, photons * (rad/s)^2
    power_w: float | None = None  # drive converted to watts when requested


def _cusp_polish(params: DuffingParams, y, delta, drive, iterations=60):
    """Newton-polish the cusp system f = f_y = f_yy = 0 in (y, delta, drive)."""
    k, g = params.kerr, params.cubic_damping
    gamma = params.gamma_t
    for _ in range(iterations):
        u = delta - k * y
        v = gamma + g * y
        f = y * (u**2 + v**2) - drive
        f_y = u**2 + v**2 + 2.0 * y * (g * v - k * u)
        f_yy = 4.0 * (g * v - k * u) + 2.0 * y * (k**2 + g**2)
        jac = np.array(
            [
                [f_y, 2.0 * y * u, -1.0],
                [f_yy, 2.0 * u - 2.0 * k * y, 0.0],
                [6.0 * (k**2 + g**2), -4.0 * k, 0.0],
            ]
        )
        residual = np.array([f, f_y, f_yy])
        try:
            step = np.linalg.solve(jac, residual)
        except np.linalg.LinAlgError:
            break
        y, delta, drive = y - step[0], delta - step[1], drive - step[2]
        scale = max(abs(y), abs(delta), abs(drive), 1.0)
        if np.max(np.abs(step)) <= 1e-15 * scale:
            break
    return y, delta, drive


def bistability_onset(params: DuffingParams):
    """Smallest drive at which the steady-state response becomes bistable.

    The drive in ``params`` is ignored; the search runs over drive strength:
    geometric bracketing with a discriminant-positivity test, bisection to
    isolate the onset, then a Newton polish of the fold-merging (cusp) point.
    Returns None when no drive in the searched range produces three positive
    steady states (a Kerr term weaker than sqrt(3) times the cubic damping
    cannot ever fold the response).
    """
    if params.kerr == 0.0:
        raise ValueError("bistability onset requires a non-zero Kerr coefficient")
    scale = params.gamma_t**3 / abs(params.kerr)

    bistable_drive = None
    drive = scale
    for _ in range(_BRACKET_STEPS):
        if _bistable_detunings(_with_drive(params, drive)):
            bistable_drive = drive
            break
        drive *= _BRACKET_GROWTH
    if bistable_drive is None:
        return None
    lo = scale / _BRACKET_GROWTH
    while lo < bistable_drive and _bistable_detunings(_with_drive(params, lo)):
        lo /= _BRACKET_GROWTH
        if lo < scale * 4.0**-_BRACKET_STEPS:
            break
    hi = bistable_drive
    for _ in range(120):
        mid = math.sqrt(lo * hi)
        if _bistable_detunings(_with_drive(params, mid)):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break

    at_onset = _with_drive(params, hi)
    detunings = _bistable_detunings(at_onset)
    if not detunings:
        raise RuntimeError("onset bisection lost the bistable bracket")  # pragma: no cover
    disc = _discriminant_poly(at_onset)
    with np.errstate(over="ignore"):
        delta = max(detunings, key=lambda d: npoly.polyval(d, disc))
    # At the onset the cubic has a double root, which also nulls the cubic's
    # derivative; pick the derivative root that best satisfies the cubic.
    c0, c1, c2, c3 = _cubic_coefficients(at_onset, at_onset.omega_0 + delta)
    droots = np.roots([3.0 * c3, 2.0 * c2, c1])
    droots = [r.real for r in droots if abs(r.imag) <= 1e-6 * max(1.0, abs(r)) and r.real > 0.0]
    if not droots:
        raise RuntimeError("no positive fold candidate at the onset drive")  # pragma: no cover
    cubic = lambda y: ((c3 * y + c2) * y + c1) * y + c0
    y = min(droots, key=lambda r: abs(cubic(r)))

    y, delta, drive = _cusp_polish(params, y, delta, hi)
    if not (y > 0.0 and drive > 0.0):
        return None
    return BistabilityOnset(photon_number=y, omega_p=params.omega_0 + delta, drive=drive)


def drive_strength(power_w, gamma_f, omega_c, hbar):
    """Convert feedline power to the Duffing drive term 4 gamma_f P / (hbar omega_c)."""
    if power_w < 0.0:
        raise ValueError("power must be >= 0")
    return 4.0 * gamma_f * power_w / (hbar * omega_c)


def sensitivity(p_zs_thermal, gamma_c, g_s, t1, t2):
    """Shot-noise-limited magnetometer sensitivity figure, Hz^(-1/2).

        S_N = (2 / |P_zST|^(3/2)) * sqrt((gamma_c / g_s^2) * (2 T1 / T2))

    Smaller is better; scales as the inverse of the coupling rate.
    """
    if p_zs_thermal == 0.0:
        raise ValueError("thermal polarization must be non-zero")
    if not (-1.0 <= p_zs_thermal <= 1.0):
        raise ValueError(f"thermal polarization must lie in [-1, 1], got {p_zs_thermal!r}")
    for name, value in (("gamma_c", gamma_c), ("g_s", g_s), ("t1", t1), ("t2", t2)):
        if not (value > 0.0 and math.isfinite(value)):
            raise ValueError(f"{name} must be finite and positive, got {value!r}")
    return (2.0 / abs(p_zs_thermal) ** 1.5) * math.sqrt((gamma_c / g_s**2) * (2.0 * t1 / t2))


def cooperativity(n_eff, g_s, gamma_c, gamma_2):
    """Collective cooperativity C = n_eff g_s^2 / (gamma_c gamma_2).

    ``gamma_2`` is the transverse spin linewidth; the 1/T2 convention is used
    when deriving it from a coherence time.
    """
    for name, value in (("g_s", g_s), ("gamma_c", gamma_c), ("gamma_2", gamma_2)):
        if not (value > 0.0 and math.isfinite(value)):
            raise ValueError(f"{name} must be finite and positive, got {value!r}")
    if not (n_eff >= 0.0 and math.isfinite(n_eff)):
        raise ValueError(f"n_eff must be finite and >= 0, got {n_eff!r}")
    return n_eff * g_s**2 / (gamma_c * gamma_2)
