"""Quasiparticle dispersions, velocity profiles and infrared expansions.

Every supported regime provides an even, non-negative dispersion over
the Brillouin zone [-pi, pi].  Mott regimes house the pair excitation
energy 2E_k directly (``pair_energy_flag``); velocity profiles always
refer to single-quasiparticle velocities, so flagged dispersions are
halved before differentiating.

Long-range couplings enter through the two-sided lattice kernel

    palpha(k) = sum_{R=1}^{L} 2 cos(k R) / R^alpha,

a truncated sum evaluated either directly or, for very large L, by a
direct head plus an asymptotic integration-by-parts tail (Hurwitz zeta
at k = 0).  The closed-form dispersions consume the one-sided kernel
palpha/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import zeta as hurwitz_zeta

__all__ = [
    "REGIMES",
    "Dispersion",
    "InfraredParams",
    "VelocityProfile",
    "DomainError",
    "FitQualityError",
    "palpha",
    "dispersion_eval",
    "velocity_profile",
    "infrared_expand",
    "classify_regime",
    "closed_form_z",
    "dispersion_from_model",
]

REGIMES = (
    "SF_MF", "MI_SC", "MI_FERMI", "LRXXZ_X", "LRXY_X", "LRTI_Z", "SRTI_Z", "HEIS_FM",
)
_PAIR_REGIMES = ("MI_SC", "MI_FERMI")
_LR_REGIMES = ("LRXXZ_X", "LRXY_X", "LRTI_Z")

_DIRECT_CAP = 4_000_000  # largest L summed term by term
_IR_KERNEL_L = 10 ** 8   # kernel cutoff used by infrared fits


class DomainError(ValueError):
    """Dispersion parameters leave the stable (real, non-negative) domain."""


class FitQualityError(RuntimeError):
    """A regression produced residuals above its acceptance threshold."""


# ---------------------------------------------------------------------------
# power-law lattice kernel


def _palpha_direct(k: np.ndarray, alpha: float, r_lo: int, r_hi: int) -> np.ndarray:
    """sum_{R=r_lo..r_hi} cos(kR)/R^alpha, chunked to bound memory."""
    out = np.zeros_like(k)
    block = max(1, int(2 ** 24 // max(1, k.size)))
    r = r_lo
    while r <= r_hi:
        stop = min(r_hi, r + block - 1)
        R = np.arange(r, stop + 1, dtype=float)
        out += (np.cos(np.outer(k, R)) * R ** (-alpha)).sum(axis=1)
        r = stop + 1
    return out


def _oscillatory_tail_integral(k: float, alpha: float, a: float, b: float) -> float:
    """integral_a^b cos(k r) r^-alpha dr by the integration-by-parts series.

    Valid for k*a well above alpha; terms fall off like (alpha+n)/(k a).
    """
    ik = 1j * k

    def boundary(r: float) -> complex:
        acc = 0.0 + 0.0j
        coef = 1.0  # rising factorial (alpha)_n
        power = r ** (-alpha)
        term_scale = 1.0 / ik
        for n in range(60):
            term = coef * term_scale * power
            acc += term
            if abs(term) < 1e-18 * max(1.0, abs(acc)):
                break
            coef *= alpha + n
            term_scale /= ik
            power /= r
        return np.exp(ik * r) * acc

    return float(np.real(boundary(b) - boundary(a)))


def _palpha_tail(k: float, alpha: float, a: int, b: int) -> float:
    """sum_{R=a..b} cos(kR)/R^alpha via Euler-Maclaurin on the tail."""
    if a > b:
        return 0.0
    if k == 0.0:
        if alpha > 1.0:
            return float(hurwitz_zeta(alpha, a) - hurwitz_zeta(alpha, b + 1))
        if alpha == 1.0:
            integral = math.log(b / a)
        else:
            integral = (b ** (1.0 - alpha) - a ** (1.0 - alpha)) / (1.0 - alpha)
    else:
        integral = _oscillatory_tail_integral(k, alpha, float(a), float(b))

    def f(r: float) -> float:
        return math.cos(k * r) * r ** (-alpha)

    def fp(r: float) -> float:
        return -k * math.sin(k * r) * r ** (-alpha) - alpha * math.cos(k * r) * r ** (-alpha - 1)

    def fppp(r: float) -> float:
        return (
            k ** 3 * math.sin(k * r) * r ** (-alpha)
            + 3 * k ** 2 * alpha * math.cos(k * r) * r ** (-alpha - 1)
            - 3 * k * alpha * (alpha + 1) * math.sin(k * r) * r ** (-alpha - 2)
            - alpha * (alpha + 1) * (alpha + 2) * math.cos(k * r) * r ** (-alpha - 3)
        )

    return (
        integral
        + 0.5 * (f(a) + f(b))
        + (fp(b) - fp(a)) / 12.0
        - (fppp(b) - fppp(a)) / 720.0
    )


def palpha(k, alpha: float, L: int = 100_000):
    """Two-sided truncated power-law kernel sum_{R=1}^{L} 2 cos(kR)/R^alpha.

    Vectorized over k.  For L beyond a few million terms the evaluation
    switches to a direct head plus an asymptotic tail that reproduces the
    truncated sum to ~1e-12 relative accuracy; alpha > 1 is required for
    a convergent k = 0 value as L grows.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    L = int(L)
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    k_in = np.asarray(k, dtype=float)
    scalar = k_in.ndim == 0
    ks = np.atleast_1d(k_in).ravel()
    # kernel is even and 2pi-periodic; |k| first keeps evenness bit-exact
    kr = np.abs(np.mod(np.abs(ks) + np.pi, 2.0 * np.pi) - np.pi)

    out = np.empty_like(kr)
    if L <= _DIRECT_CAP:
        out = _palpha_direct(kr, alpha, 1, L)
    else:
        head_needed = np.maximum(
            8192.0, np.where(kr > 0.0, 40.0 * (alpha + 2.0) / np.where(kr > 0, kr, 1.0), 8192.0)
        )
        order = np.argsort(head_needed)
        out = np.empty_like(kr)
        i = 0
        while i < kr.size:
            j = i
            r0 = int(min(L, math.ceil(head_needed[order[i]])))
            while j < kr.size and head_needed[order[j]] <= r0:
                j += 1
            idx = order[i:j]
            vals = _palpha_direct(kr[idx], alpha, 1, r0)
            if r0 < L:
                for t, ki in zip(range(len(idx)), kr[idx]):
                    vals[t] += _palpha_tail(float(ki), alpha, r0 + 1, L)
            out[idx] = vals
            i = j
    out = 2.0 * out
    result = out.reshape(np.atleast_1d(k_in).shape)
    return float(result[0]) if scalar else result


# ---------------------------------------------------------------------------
# dispersions


@dataclass(frozen=True)
class Dispersion:
    """Closed-form dispersion of one regime.

    ``params`` holds the couplings entering the closed form.  When
    ``pair_energy_flag`` is set the object evaluates the pair energy
    2E_k rather than E_k.  ``kernel_L`` is the truncation length of the
    power-law kernel used by long-range regimes.
    """

    regime: str
    params: dict
    pair_energy_flag: bool = False
    kernel_L: int = 100_000

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.pair_energy_flag != (self.regime in _PAIR_REGIMES):
            raise ValueError(f"pair_energy_flag must be {self.regime in _PAIR_REGIMES} "
                             f"for {self.regime}")

    def p(self, name: str, default: float | None = None) -> float:
        if name in self.params:
            return float(self.params[name])
        if default is not None:
            return default
        raise KeyError(f"{self.regime} dispersion requires parameter {name!r}")


def dispersion(regime: str, pair=None, kernel_L: int = 100_000, **params) -> Dispersion:
    """Convenience constructor; pair flag is inferred from the regime."""
    del pair
    return Dispersion(
        regime=regime,
        params=dict(params),
        pair_energy_flag=regime in _PAIR_REGIMES,
        kernel_L=kernel_L,
    )


def _half_kernel(disp: Dispersion, k: np.ndarray, kernel_L: int | None = None) -> np.ndarray:
    # closed forms use the one-sided kernel
    return 0.5 * palpha(k, disp.p("alpha"), kernel_L or disp.kernel_L)


def dispersion_eval(disp: Dispersion, k, kernel_L: int | None = None):
    """Evaluate the dispersion on momenta k (scalar or array).

    Raises DomainError when parameters push the closed form out of its
    real, non-negative domain (negative radicand, inverted Mott band).
    """
    k_in = np.asarray(k, dtype=float)
    scalar = k_in.ndim == 0
    ks = np.atleast_1d(k_in).astype(float)
    r = disp.regime
    if r == "SF_MF":
        J, U, n_bar = disp.p("J"), disp.p("U"), disp.p("n_bar")
        gam = 4.0 * J * np.sin(0.5 * ks) ** 2
        rad = gam * (gam + 2.0 * U * n_bar)
        _check_radicand(rad, r)
        E = np.sqrt(np.maximum(rad, 0.0))
    elif r == "MI_SC":
        J, U, n_bar = disp.p("J"), disp.p("U"), disp.p("n_bar")
        E = U - 2.0 * J * (2.0 * n_bar + 1.0) * np.cos(ks)
        if np.any(E < -1e-9 * max(1.0, U)):
            raise DomainError("Mott pair band is negative; U too small for this expansion")
        E = np.maximum(E, 0.0)
    elif r == "MI_FERMI":
        J, U, n_bar = disp.p("J"), disp.p("U"), disp.p("n_bar")
        E = np.sqrt(
            (U - 2.0 * J * (2.0 * n_bar + 1.0) * np.cos(ks)) ** 2
            + 16.0 * J ** 2 * n_bar * (n_bar + 1.0) * np.sin(ks) ** 2
        )
    elif r == "LRTI_Z":
        J, h = disp.p("J"), disp.p("h")
        P = _half_kernel(disp, ks, kernel_L)
        rad = h * (h + J * P)
        _check_radicand(rad, r)
        E = 2.0 * np.sqrt(np.maximum(rad, 0.0))
    elif r == "SRTI_Z":
        J, h = disp.p("J"), disp.p("h")
        rad = h * (h + J * np.cos(ks))
        _check_radicand(rad, r)
        E = 2.0 * np.sqrt(np.maximum(rad, 0.0))
    elif r in ("LRXY_X", "LRXXZ_X"):
        J = disp.p("J")
        eps = 0.0 if r == "LRXY_X" else disp.p("epsilon")
        P = _half_kernel(disp, ks, kernel_L)
        P0 = 0.5 * palpha(0.0, disp.p("alpha"), kernel_L or disp.kernel_L)
        phat = P / P0
        rad = (1.0 - phat) * (1.0 + eps * phat)
        _check_radicand(rad, r)
        E = 0.5 * J * P0 * np.sqrt(np.maximum(rad, 0.0))
    elif r == "HEIS_FM":
        J = disp.p("J")
        E = J * (1.0 - np.cos(ks))
    else:
        raise AssertionError(r)
    return float(E[0]) if scalar else E.reshape(np.atleast_1d(k_in).shape)


def _check_radicand(rad: np.ndarray, regime: str) -> None:
    if np.any(rad < -1e-12 * max(1.0, float(np.abs(rad).max(initial=0.0)))):
        raise DomainError(f"negative radicand in {regime} dispersion")


def group_velocity(disp: Dispersion, k, step: float = 1e-5):
    """Single-quasiparticle group velocity dE/dk by Richardson-extrapolated
    centered differences (pair dispersions are halved first)."""
    k_in = np.asarray(k, dtype=float)
    scalar = k_in.ndim == 0
    ks = np.atleast_1d(k_in).astype(float)
    scale = 0.5 if disp.pair_energy_flag else 1.0

    def diff(h):
        return (dispersion_eval(disp, ks + h) - dispersion_eval(disp, ks - h)) / (2.0 * h)

    d1 = diff(step)
    d2 = diff(0.5 * step)
    v = scale * (4.0 * d2 - d1) / 3.0
    return float(v[0]) if scalar else v


# ---------------------------------------------------------------------------
# velocity profiles


@dataclass(frozen=True)
class VelocityProfile:
    """Extremal velocities of a dispersion.

    k_star maximizes the group velocity over the full zone [-pi, pi];
    Vphi_star is the phase velocity E(k_star)/k_star at that point.  By
    evenness of E the maximal slope sits at negative k when E decreases
    away from k = 0 (long-range transverse Ising), so k_star and
    Vphi_star carry a sign while Vg_star is always >= 0.  ``sound_c`` is
    the k -> 0 phase/group velocity for gapless linear regimes, None
    otherwise.  ``diverges`` marks group velocities growing without
    bound as k -> 0 (quasi-local regimes), in which case Vg_star and
    Vphi_star are +inf sentinels and k_star is 0.
    """

    k_star: float
    Vg_star: float
    Vphi_star: float
    sound_c: float | None
    diverges: bool


def velocity_profile(disp: Dispersion, grid_points: int = 256) -> VelocityProfile:
    """Scan the Brillouin zone for the fastest group velocity.

    Uses centered finite differences with Richardson extrapolation on a
    uniform grid over (0, pi], followed by local grid refinement of the
    maximum.  Requires grid_points >= 64 for a trustworthy scan.
    """
    if grid_points < 64:
        raise ValueError("grid_points must be >= 64")
    scale = 0.5 if disp.pair_energy_flag else 1.0

    # |vg| on (0, pi] covers the full zone: E is even, so slopes come in
    # +/- pairs and the signed max of dE/dk lives at sign-flipped k.
    ks = np.linspace(0.0, np.pi, grid_points + 1)[1:]
    vg = group_velocity(disp, ks)
    i = int(np.argmax(np.abs(vg)))
    vmax_grid = float(abs(vg[i]))

    # quasi-local regimes: group velocity keeps growing as k -> 0
    diverges = False
    if disp.regime in _LR_REGIMES:
        probes = np.array([1e-3, 1e-4, 1e-5])
        big = Dispersion(disp.regime, disp.params, disp.pair_energy_flag,
                         kernel_L=max(disp.kernel_L, _IR_KERNEL_L))
        vp = np.abs(group_velocity(big, probes))
        if vp[2] > 1.2 * vp[1] > 1.4 * vp[0] and vp[2] > vmax_grid:
            diverges = True
        elif vp[2] > vp[1] > vp[0] and vp[2] > 2.0 * vmax_grid:
            diverges = True
    if diverges:
        # the k -> 0 group-velocity limit does not exist here
        return VelocityProfile(0.0, math.inf, math.inf, None, True)

    lo = ks[max(0, i - 1)]
    hi = ks[min(len(ks) - 1, i + 1)]
    k_pos, vg_signed = _refine_max(disp, lo, hi)
    if abs(vg_signed) < vmax_grid:
        k_pos, vg_signed = float(ks[i]), float(vg[i])
    k_star = math.copysign(k_pos, vg_signed)
    e_star = float(dispersion_eval(disp, k_pos)) * scale
    vphi_star = e_star / k_star
    return VelocityProfile(
        k_star=k_star,
        Vg_star=abs(vg_signed),
        Vphi_star=vphi_star,
        sound_c=_sound_velocity(disp, scale),
        diverges=False,
    )


def _refine_max(disp: Dispersion, lo: float, hi: float, rounds: int = 6):
    for _ in range(rounds):
        ks = np.linspace(lo, hi, 33)
        vg = group_velocity(disp, ks)
        i = int(np.argmax(np.abs(vg)))
        lo = ks[max(0, i - 1)]
        hi = ks[min(len(ks) - 1, i + 1)]
    return float(ks[i]), float(vg[i])


def _sound_velocity(disp: Dispersion, scale: float) -> float | None:
    """Group velocity in the k -> 0 limit for gapless regimes."""
    gap = float(dispersion_eval(disp, 1e-9)) * scale
    if gap > 1e-7:
        return None
    h = 1e-4
    c1 = float(group_velocity(disp, h))
    c2 = float(group_velocity(disp, 0.5 * h))
    # quadratic bands: V_g falls off linearly with k, the limit is zero
    if abs(c1) < 1e-12 or abs(c2) < 0.6 * abs(c1):
        return 0.0
    c = (4.0 * c2 - c1) / 3.0
    if not np.isfinite(c):
        return None
    return c


# ---------------------------------------------------------------------------
# infrared expansion


@dataclass(frozen=True)
class InfraredParams:
    """Small-k expansion E(k) ~= delta + c |k|^z.

    c is signed: negative when the band bends down away from k = 0, as
    it does for the long-range transverse Ising branch.
    """

    delta: float
    c: float
    z: float


def infrared_expand(disp: Dispersion, residual_tol: float = 0.05) -> InfraredParams:
    """Fit the infrared expansion of a dispersion.

    delta is E(k -> 0); z and c come from the log-log slope of E(k) -
    delta over k in [1e-4, 1e-2].  Long-range kernels are evaluated with
    a large internal cutoff so that truncation bias does not contaminate
    the slope.  A residual above ``residual_tol`` (max abs deviation in
    log space) raises FitQualityError.
    """
    scale = 0.5 if disp.pair_energy_flag else 1.0
    kernel_L = max(disp.kernel_L, _IR_KERNEL_L) if disp.regime in _LR_REGIMES else None
    delta = float(dispersion_eval(disp, 0.0, kernel_L=kernel_L)) * scale
    ks = np.logspace(-4.0, -2.0, 13)
    E = dispersion_eval(disp, ks, kernel_L=kernel_L) * scale
    dE = E - delta
    span = float(np.max(np.abs(dE)))
    if span <= 1e-12 * max(1.0, abs(delta)):
        return InfraredParams(delta=delta, c=0.0, z=0.0)
    signs = np.sign(dE)
    if np.any(signs == 0.0) or not np.all(signs == signs[0]):
        raise FitQualityError("E(k) - delta changes sign over the fit window")
    sign = float(signs[0])
    x = np.log(ks)
    y = np.log(np.abs(dE))
    z, logc = np.polyfit(x, y, 1)
    resid = y - (z * x + logc)
    if float(np.max(np.abs(resid))) > residual_tol:
        raise FitQualityError(
            f"infrared power-law fit residual {float(np.max(np.abs(resid))):.3g} "
            f"exceeds {residual_tol}"
        )
    return InfraredParams(delta=delta, c=sign * float(np.exp(logc)), z=float(z))


def closed_form_z(disp: Dispersion) -> float:
    """Closed-form dynamical exponent for long-range regimes."""
    if disp.regime == "LRTI_Z":
        return disp.p("alpha") - 1.0
    if disp.regime in ("LRXY_X", "LRXXZ_X"):
        return 0.5 * (disp.p("alpha") - 1.0)
    raise ValueError(f"no closed-form z for regime {disp.regime}")


# ---------------------------------------------------------------------------
# regime classification and model -> dispersion mapping


def classify_regime(model) -> str:
    """Coarse dynamical classification of a model.

    Long-range spin models: 'instantaneous' (alpha <= 1), 'quasi-local'
    (0 <= z < 1) or 'local' (z >= 1) from the closed-form exponent.
    Bose-Hubbard: gamma = U / (2 J n_bar) splits 'mean-field'
    (gamma < 0.1, n_bar >= 2), 'strongly-interacting' (gamma > 10,
    non-integer n_bar) and 'strongly-correlated'.  Short-range spin
    models are 'local'.
    """
    fam = model.family
    if fam in ("LRTI", "LRXY", "LRXXZ"):
        alpha = model.alpha
        z = alpha - 1.0 if fam == "LRTI" else 0.5 * (alpha - 1.0)
        if alpha <= 1.0:
            return "instantaneous"
        return "quasi-local" if z < 1.0 else "local"
    if fam == "SRBH":
        gamma = model.U / (2.0 * model.J * model.n_bar)
        if gamma < 0.1 and model.n_bar >= 2:
            return "mean-field"
        if gamma > 10 and not float(model.n_bar).is_integer():
            return "strongly-interacting"
        return "strongly-correlated"
    return "local"


def dispersion_from_model(model, regime: str | None = None, kernel_L: int = 100_000) -> Dispersion:
    """Dispersion object for a model, with an optional regime override.

    Bose-Hubbard models default to the mean-field Bogolyubov branch when
    classified mean-field and to the Mott strong-coupling branch
    otherwise; pass regime='MI_FERMI' for the fermionized Mott band.
    """
    fam = model.family
    if regime is None:
        if fam == "SRBH":
            regime = "SF_MF" if classify_regime(model) == "mean-field" else "MI_SC"
        else:
            regime = {
                "SRTI": "SRTI_Z", "SRH": "HEIS_FM", "LRTI": "LRTI_Z",
                "LRXY": "LRXY_X", "LRXXZ": "LRXXZ_X",
            }[fam]
    params: dict = {"J": model.J}
    if regime in ("SF_MF", "MI_SC", "MI_FERMI"):
        params.update(U=model.U, n_bar=model.n_bar)
    elif regime in ("LRTI_Z",):
        params.update(h=model.h, alpha=model.alpha)
    elif regime == "SRTI_Z":
        params.update(h=model.h)
    elif regime == "LRXY_X":
        params.update(alpha=model.alpha)
    elif regime == "LRXXZ_X":
        params.update(alpha=model.alpha, epsilon=model.epsilon)
    return Dispersion(
        regime=regime,
        params=params,
        pair_energy_flag=regime in _PAIR_REGIMES,
        kernel_L=kernel_L,
    )
