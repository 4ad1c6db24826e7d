"""Closed-form quasiparticle fields after a quench.

Quadratic theories (Bogolyubov quasiparticles for bosons, linear spin
waves for magnets, fermionized pairs deep in the Mott phase) reduce
every equal-time connected correlator after a global quench to a single
Brillouin-zone integral,

    G(R, t) = int_{-pi}^{pi} dk/(2 pi) F(k) e^{i k R} [1 - cos(2 E_k t)],

with the model entering only through the amplitude function F(k) and
the post-quench dispersion E_k.  This module evaluates that integral
and its relatives: the supported amplitude functions, local-perturbation
fields (a single spin flip, a doublon-holon pair), the stationary-phase
asymptotics of the same integral, and the scaling exponents of the
quasi-local regime where the group velocity diverges at small k.

Conventions.  The equilibrium part is subtracted, so every global-quench
field vanishes identically at t = 0.  Overall positive prefactors that
affect neither front velocities nor scaling exponents are dropped.
Long-range couplings enter through the one-sided truncated kernel
P(k) = sum_{r=1..L} cos(k r) / r^alpha.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from quenchcone.models import ModelSpec
from quenchcone.spectra import (
    Dispersion,
    DomainError,
    classify_regime,
    dispersion,
    dispersion_eval,
    group_velocity,
    palpha,
)

OBSERVABLES = ("G1_SF", "G2_SF", "G1_MI", "GZ_LRXY", "GX_LRTI")

_QUAD_N0 = 2 ** 12       # initial Brillouin-zone node count
_QUAD_NMAX = 2 ** 17     # node cap before giving up
_QUAD_TOL = 1e-6         # doubling tolerance relative to the field max
_KERNEL_L = 100_000      # default truncation of the power-law kernel
_CHUNK = 8192            # momentum block size in field assembly


class QuadratureError(RuntimeError):
    """Brillouin-zone quadrature failed to stabilize within the node cap."""


class RegimeError(ValueError):
    """Observable and quench do not belong to the same regime."""


class LocalRegimeError(ValueError):
    """Quasi-local scaling forms requested for a ballistic (local) regime."""


# ---------------------------------------------------------------------------
# quench protocols


@dataclass(frozen=True)
class QuenchSpec:
    """A quench protocol: prepare the ground state of ``pre``, evolve with ``post``.

    Global quenches change a coupling everywhere at t = 0.  Local
    protocols keep the Hamiltonian fixed (pre == post) and perturb the
    ground state at single sites instead: one flipped spin, or a
    doublon-holon pair on adjacent sites.
    """

    pre: ModelSpec
    post: ModelSpec
    protocol: str = "global"
    perturbation: str | None = None
    site: int | None = None
    holon_site: int | None = None
    doublon_site: int | None = None

    def __post_init__(self):
        if self.protocol not in ("global", "local"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.pre.family != self.post.family:
            raise ValueError("pre and post models must share a family")
        if self.pre.L != self.post.L:
            raise ValueError("pre and post models must share L")
        if self.pre.family == "SRBH":
            if self.pre.n_bar != self.post.n_bar:
                raise ValueError("a quench does not change the filling n_bar")
            if self.pre.n_max != self.post.n_max:
                raise ValueError("pre and post models must share n_max")
        if self.protocol == "global":
            if self.perturbation is not None or self.site is not None \
                    or self.holon_site is not None or self.doublon_site is not None:
                raise ValueError("site perturbations require protocol='local'")
            return
        # local protocol: unquenched Hamiltonian plus a one-site perturbation
        if self.pre != self.post:
            raise ValueError("local protocols do not quench the Hamiltonian")
        if self.perturbation == "spin_flip":
            if self.site is None:
                raise ValueError("spin_flip needs a site")
            if not 0 <= self.site < self.pre.L:
                raise ValueError(f"site {self.site} outside the chain")
        elif self.perturbation == "doublon_holon":
            if self.holon_site is None or self.doublon_site is None:
                raise ValueError("doublon_holon needs holon_site and doublon_site")
            if abs(self.doublon_site - self.holon_site) != 1:
                raise ValueError("doublon and holon must sit on adjacent sites")
            for s in (self.holon_site, self.doublon_site):
                if not 0 <= s < self.pre.L:
                    raise ValueError(f"site {s} outside the chain")
        else:
            raise ValueError(f"unknown perturbation {self.perturbation!r}")


# ---------------------------------------------------------------------------
# quadratic forms and the Bogolyubov rotation


def quadratic_coefficients(model: ModelSpec, k, kernel_L: int = _KERNEL_L, P_one=None):
    """Coefficients (A_k, B_k) of the quadratic quasiparticle Hamiltonian.

    A_k multiplies the number term, B_k the anomalous pair term; the
    spectrum is E_k = sqrt(A_k^2 - B_k^2).  Forms per family:

    SRBH   A = gamma_k + U n_bar, B = U n_bar with gamma_k = 4 J sin^2(k/2)
           (weakly interacting Bogolyubov branch)
    SRH    A = J (1 - cos k), B = 0 (ferromagnetic magnons)
    SRTI   A = 2h + J cos k, B = J cos k (z-polarized paramagnet)
    LRTI   A = 2h + J P(k), B = J P(k)
    LRXY/LRXXZ  planar phase (epsilon > -1):
           A = (J/2)[P(0) + P(k)(eps - 1)/2], B = (J/4) P(k)(eps + 1);
           ferromagnetic-z phase (epsilon <= -1): A = (J/2)[-P(k) - eps P(0)],
           B = 0.

    ``P_one`` optionally supplies precomputed one-sided kernel values on
    ``k`` so repeated evaluations can share one kernel pass.
    """
    ks = np.asarray(k, dtype=float)
    fam = model.family
    if fam == "SRBH":
        gam = 4.0 * model.J * np.sin(0.5 * ks) ** 2
        A = gam + model.U * model.n_bar
        B = np.full_like(A, model.U * model.n_bar)
    elif fam == "SRH":
        A = model.J * (1.0 - np.cos(ks))
        B = np.zeros_like(A)
    elif fam == "SRTI":
        A = 2.0 * model.h + model.J * np.cos(ks)
        B = model.J * np.cos(ks)
    elif fam == "LRTI":
        P = 0.5 * palpha(ks, model.alpha, kernel_L) if P_one is None else P_one
        A = 2.0 * model.h + model.J * P
        B = model.J * np.asarray(P, dtype=float)
    elif fam in ("LRXY", "LRXXZ"):
        eps = 0.0 if fam == "LRXY" else model.epsilon
        P = 0.5 * palpha(ks, model.alpha, kernel_L) if P_one is None else P_one
        P = np.asarray(P, dtype=float)
        P0 = _kernel_zero(model.alpha, kernel_L)
        if eps <= -1.0:
            A = 0.5 * model.J * (-P - eps * P0)
            B = np.zeros_like(A)
        else:
            A = 0.5 * model.J * (P0 + 0.5 * P * (eps - 1.0))
            B = 0.25 * model.J * P * (eps + 1.0)
    else:
        raise RegimeError(f"no quadratic quasiparticle form for family {fam}")
    return A, B


def bogolyubov_uv(A, B):
    """Bogolyubov rotation of the quadratic form (A, B).

    Returns (u, v, E) with E = sqrt(A^2 - B^2), u = sqrt((A/E + 1)/2)
    and v = -sign(B) sqrt((A/E - 1)/2), so that u^2 - v^2 = 1 and
    u v = -B/(2E) hold for either sign of B.  Vectorized over arrays.

    Raises DomainError when |A| <= |B| anywhere (the quadratic form is
    unstable and has no quasiparticle spectrum) or when A <= 0.
    """
    A_in = np.asarray(A, dtype=float)
    B_in = np.asarray(B, dtype=float)
    scalar = A_in.ndim == 0 and B_in.ndim == 0
    Aa, Ba = np.broadcast_arrays(np.atleast_1d(A_in), np.atleast_1d(B_in))
    if np.any(np.abs(Aa) <= np.abs(Ba)):
        raise DomainError("unstable quadratic form: |A_k| <= |B_k|")
    if np.any(Aa <= 0.0):
        raise DomainError("quasiparticle form requires A_k > 0")
    E = np.sqrt((Aa - Ba) * (Aa + Ba))
    u = np.sqrt(0.5 * (Aa / E + 1.0))
    v = -np.sign(Ba) * np.sqrt(np.maximum(0.5 * (Aa / E - 1.0), 0.0))
    if scalar:
        return float(u[0]), float(v[0]), float(E[0])
    return u, v, E


def _uv_tables(model: ModelSpec, k, kernel_L: int, P_one=None):
    A, B = quadratic_coefficients(model, k, kernel_L, P_one=P_one)
    u, v, E = bogolyubov_uv(A, B)
    return A, B, u, v, E


# ---------------------------------------------------------------------------
# amplitude functions


@dataclass(frozen=True, eq=False)
class AmplitudeFunction:
    """Amplitude F(k) of the generic quench integral for one observable.

    ``nu`` is the infrared exponent of F, F(k) ~ |k|^nu for k -> 0; it
    feeds the quasi-local scaling exponents.
    """

    observable: str
    quench: QuenchSpec
    evaluator: Callable
    nu: float


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise RegimeError(msg)


def _validate_amplitude(observable: str, quench: QuenchSpec) -> None:
    if observable not in OBSERVABLES:
        raise ValueError(f"unknown observable {observable!r}; expected one of {OBSERVABLES}")
    pre, post = quench.pre, quench.post
    _require(quench.protocol == "global",
             f"{observable} is a global-quench correlator")
    if observable in ("G1_SF", "G2_SF"):
        _require(pre.family == "SRBH", f"{observable} needs a Bose-Hubbard model")
        _require(pre.J == post.J, f"{observable} describes an interaction quench at fixed J")
        for m, tag in ((pre, "pre"), (post, "post")):
            _require(classify_regime(m) == "mean-field",
                     f"{observable} needs mean-field conditions; {tag} model is "
                     f"{classify_regime(m)}")
    elif observable == "G1_MI":
        _require(pre.family == "SRBH", "G1_MI needs a Bose-Hubbard model")
        _require(math.isinf(pre.U), "G1_MI describes quenches from the atomic limit U_i = inf")
        _require(float(pre.n_bar).is_integer() and pre.n_bar >= 1,
                 "the Mott phase needs integer filling n_bar >= 1")
        _require(post.U > 2.0 * post.J * (2.0 * post.n_bar + 1.0),
                 "post-quench U too small for the strong-coupling Mott branch")
    elif observable == "GZ_LRXY":
        _require(pre.family in ("LRXY", "LRXXZ"),
                 "GZ_LRXY needs a long-range XY/XXZ model")
        _require(pre.alpha == post.alpha, "pre and post must share alpha")
        _require(pre.alpha > 1.0, "alpha <= 1 has no convergent kernel (instantaneous regime)")
        eps_f = 0.0 if post.family == "LRXY" else post.epsilon
        _require(eps_f == 0.0, "GZ_LRXY describes anisotropy quenches onto the XX line")
        eps_i = 0.0 if pre.family == "LRXY" else pre.epsilon
        _require(eps_i > -1.0, "planar spin waves need epsilon > -1")
    elif observable == "GX_LRTI":
        _require(pre.family == "LRTI", "GX_LRTI needs the long-range transverse Ising model")
        _require(pre.h == post.h and pre.h > 0.0,
                 "GX_LRTI describes coupling quenches at fixed field h > 0")
        _require(pre.alpha == post.alpha, "pre and post must share alpha")
        _require(pre.alpha > 1.0, "alpha <= 1 has no convergent kernel (instantaneous regime)")


def _amplitude_values(observable: str, quench: QuenchSpec, ks: np.ndarray,
                      kernel_L: int, P_one=None) -> np.ndarray:
    """Closed-form F(k) on momenta ``ks``; complex dtype throughout."""
    pre, post = quench.pre, quench.post
    if pre == post:
        # no quench, no dynamics
        return np.zeros_like(ks, dtype=complex)
    if observable == "G1_SF":
        J, nb = post.J, post.n_bar
        gam = 4.0 * J * np.sin(0.5 * ks) ** 2
        # F ~ 1/k for k -> 0 (integrable against the 1 - cos weight)
        with np.errstate(divide="ignore"):
            F = nb ** 2 * post.U * (post.U - pre.U) / (
                2.0 * np.sqrt(gam) * np.sqrt(gam + 2.0 * pre.U * nb)
                * (gam + 2.0 * post.U * nb))
        return F.astype(complex)
    if observable == "G2_SF":
        J, nb = post.J, post.n_bar
        gam = 4.0 * J * np.sin(0.5 * ks) ** 2
        F = nb ** 2 * (pre.U - post.U) * np.sqrt(gam) / (
            np.sqrt(gam + 2.0 * pre.U * nb) * (gam + 2.0 * post.U * nb))
        return F.astype(complex)
    if observable == "G1_MI":
        nb = post.n_bar
        return -4.0j * post.J * nb * (nb + 1.0) * np.sin(ks) / post.U
    if observable == "GZ_LRXY":
        eps_i = 0.0 if pre.family == "LRXY" else pre.epsilon
        P = 0.5 * palpha(ks, post.alpha, kernel_L) if P_one is None else P_one
        phat = np.asarray(P, dtype=float) / _kernel_zero(post.alpha, kernel_L)
        denom = 1.0 + eps_i * phat
        if np.any(denom <= 0.0):
            raise DomainError("pre-quench planar spin waves unstable: 1 + eps P(k)/P(0) <= 0")
        F = (eps_i / 8.0) * phat * np.sqrt(np.maximum(1.0 - phat, 0.0) / denom)
        return F.astype(complex)
    if observable == "GX_LRTI":
        h = post.h
        P = 0.5 * palpha(ks, post.alpha, kernel_L) if P_one is None else P_one
        P = np.asarray(P, dtype=float)
        rad = h * (h + pre.J * P)
        if np.any(rad <= 0.0) or np.any(h + post.J * P <= 0.0):
            raise DomainError("transverse Ising spin waves unstable: h too small")
        F = h * (pre.J - post.J) * P / (8.0 * (h + post.J * P) * np.sqrt(rad))
        return F.astype(complex)
    raise AssertionError(observable)


def amplitude_eval(observable: str, quench: QuenchSpec, k, kernel_L: int = _KERNEL_L):
    """Evaluate the closed-form amplitude F(k) for one observable.

    Vectorized over k; returns complex values (G1_MI is purely
    imaginary, the others real).  Raises RegimeError when the quench
    does not match the observable's regime.
    """
    _validate_amplitude(observable, quench)
    k_in = np.asarray(k, dtype=float)
    scalar = k_in.ndim == 0
    vals = _amplitude_values(observable, quench, np.atleast_1d(k_in).astype(float), kernel_L)
    return complex(vals[0]) if scalar else vals.reshape(k_in.shape)


def amplitude_function(observable: str, quench: QuenchSpec,
                       kernel_L: int = _KERNEL_L) -> AmplitudeFunction:
    """Package an observable's amplitude as an AmplitudeFunction."""
    _validate_amplitude(observable, quench)
    nu = {
        "G1_SF": -1.0,
        "G2_SF": 1.0,
        "G1_MI": 1.0,
        "GZ_LRXY": 0.5 * (quench.post.alpha - 1.0) if quench.post.alpha else 0.0,
        "GX_LRTI": 0.0,
    }[observable]

    def evaluator(k):
        return amplitude_eval(observable, quench, k, kernel_L)

    return AmplitudeFunction(observable=observable, quench=quench,
                             evaluator=evaluator, nu=nu)


def post_quench_dispersion(observable: str, quench: QuenchSpec,
                           kernel_L: int = _KERNEL_L) -> Dispersion:
    """The post-quench dispersion matching an observable's regime."""
    _validate_amplitude(observable, quench)
    post = quench.post
    if observable in ("G1_SF", "G2_SF"):
        return dispersion("SF_MF", J=post.J, U=post.U, n_bar=post.n_bar, kernel_L=kernel_L)
    if observable == "G1_MI":
        return dispersion("MI_SC", J=post.J, U=post.U, n_bar=post.n_bar, kernel_L=kernel_L)
    if observable == "GZ_LRXY":
        if post.family == "LRXY":
            return dispersion("LRXY_X", J=post.J, alpha=post.alpha, kernel_L=kernel_L)
        return dispersion("LRXXZ_X", J=post.J, alpha=post.alpha,
                          epsilon=post.epsilon, kernel_L=kernel_L)
    return dispersion("LRTI_Z", J=post.J, h=post.h, alpha=post.alpha, kernel_L=kernel_L)


_OBSERVABLE_REGIMES = {
    "G1_SF": ("SF_MF",),
    "G2_SF": ("SF_MF",),
    "G1_MI": ("MI_SC", "MI_FERMI"),
    "GZ_LRXY": ("LRXY_X", "LRXXZ_X"),
    "GX_LRTI": ("LRTI_Z",),
}

_LR_OBSERVABLES = ("GZ_LRXY", "GX_LRTI")


def _check_dispersion_match(F: AmplitudeFunction, disp: Dispersion) -> None:
    allowed = _OBSERVABLE_REGIMES[F.observable]
    if disp.regime not in allowed:
        raise RegimeError(f"{F.observable} expects a dispersion in {allowed}, "
                          f"got {disp.regime}")
    post = F.quench.post
    want = {"J": post.J, "U": post.U, "n_bar": post.n_bar, "h": post.h,
            "alpha": post.alpha, "epsilon": post.epsilon}
    for name, val in disp.params.items():
        if name in want and want[name] is not None \
                and not math.isclose(float(val), float(want[name]), rel_tol=1e-12, abs_tol=0.0):
            raise RegimeError(f"dispersion parameter {name}={val} does not match "
                              f"the post-quench model ({want[name]})")


# ---------------------------------------------------------------------------
# space-time fields


@dataclass(frozen=True, eq=False)
class SpacetimeField:
    """A field G(R, t) on an integer-separation / uniform-time grid.

    values[i, j] belongs to (Rs[i], ts[j]).  For global quenches Rs runs
    over 0..R_max; for local protocols it runs over -R_max..R_max and R
    is the signed separation from the perturbed site (the holon site
    for doublon-holon pairs).  ``nodes`` is the Brillouin-zone node
    count at which the quadrature stabilized.  ``warnings`` carries
    validity notices (e.g. the spin-wave depletion guard).
    """

    observable: str
    quench: QuenchSpec
    Rs: np.ndarray
    ts: np.ndarray
    values: np.ndarray
    dt: float
    R_max: int
    nodes: int
    warnings: tuple = ()


def _time_axis(T: float, dt: float) -> np.ndarray:
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if T < 0.0:
        raise ValueError(f"T must be non-negative, got {T}")
    # T is rounded to the nearest multiple of dt
    return dt * np.arange(int(round(T / dt)) + 1)


def _midpoints(n: int):
    dk = 2.0 * np.pi / n
    return -np.pi + (np.arange(n) + 0.5) * dk, dk


def _kernel_midpoint(n: int, alpha: float, L: int) -> np.ndarray:
    """One-sided kernel P(k) on the n-point midpoint grid, by an FFT fold.

    With k_j = -pi + (j + 1/2) 2 pi/n one has e^{i k_j r} =
    w_r e^{2 pi i j r / n} where w_r = e^{i r (pi/n - pi)} has period 2n
    in r, so folding w_r r^{-alpha} modulo 2n and taking a single
    inverse FFT evaluates the truncated sum at every node at once.
    This is an exact reordering of the same finite sum the direct
    evaluator computes.
    """
    r = np.arange(1, L + 1)
    w = np.exp(1j * r * (np.pi / n - np.pi)) * r.astype(float) ** (-alpha)
    c = np.zeros(2 * n, dtype=complex)
    np.add.at(c, r % (2 * n), w)
    g = np.fft.ifft(c) * (2 * n)
    return np.real(g[0::2])


@lru_cache(maxsize=32)
def _kernel_zero(alpha: float, L: int) -> float:
    """One-sided kernel at k = 0 (truncated zeta value)."""
    return 0.5 * float(palpha(0.0, alpha, L))


def _ir_patch_nodes(n: int, alpha: float):
    """Graded midpoint sub-grid replacing the uniform cells nearest k = 0.

    Long-range dispersions go as delta + c|k|^z with z < 1, so the phase
    2 E t oscillates with unbounded local frequency at the zone center
    and a uniform grid converges only algebraically there.  Substituting
    k = k_c u^p with p z >= 1.3 bounds the frequency in u; node and cell
    counts grow with n so the doubling stability test stays meaningful.
    Returns (nodes, weights, k_c) with weights summing to 2 k_c.
    """
    dk = 2.0 * np.pi / n
    kc = max(2, n // 512) * dk
    m = max(128, n // 32)
    p = min(16.0, max(2.0, 2.6 / (alpha - 1.0)))
    u = (np.arange(m) + 0.5) / m
    k_side = kc * u ** p
    w_side = kc * (p / m) * u ** (p - 1.0)
    k = np.concatenate([-k_side[::-1], k_side])
    w = np.concatenate([w_side[::-1], w_side])
    return k, w, kc


def _bz_grid(n: int, model: ModelSpec | None, kernel_L: int | None):
    """Brillouin-zone nodes, weights and kernel values for one build pass.

    Short-range models get the plain n-point midpoint grid (kernel values
    None).  Long-range models get the midpoint bulk with the zone-center
    cells replaced by the graded infrared patch; bulk kernel values come
    from the FFT fold, patch values from the direct truncated sum, which
    evaluate the identical sum.
    """
    k, dk = _midpoints(n)
    if model is None or model.alpha is None:
        return k, np.full(k.size, dk), None
    P = _kernel_midpoint(n, model.alpha, kernel_L)
    kp, wp, kc = _ir_patch_nodes(n, model.alpha)
    keep = np.abs(k) > kc
    Pp = 0.5 * palpha(kp, model.alpha, kernel_L)
    return (np.concatenate([k[keep], kp]),
            np.concatenate([np.full(int(keep.sum()), dk), wp]),
            np.concatenate([P[keep], Pp]))


def _pair_energy(disp: Dispersion, k: np.ndarray) -> np.ndarray:
    E = dispersion_eval(disp, k)
    return E if disp.pair_energy_flag else 2.0 * E


def _refine_until_stable(build, tol: float, label: str,
                         n0: int = _QUAD_N0, n_max: int = _QUAD_NMAX):
    """Re-run ``build`` on doubling midpoint grids until the field is stable.

    Midpoint grids do not nest, so successive results are independent
    estimates; agreement below ``tol`` relative to the field max is the
    acceptance test.  Returns (finer result, node count).
    """
    prev = build(n0)
    n = 2 * n0
    while n <= n_max:
        cur = build(n)
        scale = max(float(np.max(np.abs(cur))), 1e-300)
        if float(np.max(np.abs(cur - prev))) <= tol * scale:
            return cur, n
        prev = cur
        n *= 2
    raise QuadratureError(
        f"{label}: quadrature not stable below {tol:g} of the field max "
        f"at {n_max} nodes")


def _assemble_generic(Fk: np.ndarray, twoE: np.ndarray, k: np.ndarray,
                      w: np.ndarray, Rs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Quadrature of Re{ F e^{ikR} (1 - cos(2E t)) } in momentum blocks.

    ``w`` holds per-node quadrature weights (the uniform dk on plain
    midpoint grids; mixed cell sizes on the infrared-refined grid).
    """
    out = np.zeros((Rs.size, ts.size))
    Fw = Fk * w
    for s in range(0, k.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        osc = 1.0 - np.cos(np.outer(twoE[sl], ts))
        kr = np.outer(k[sl], Rs.astype(float))
        basis = (np.real(Fw[sl])[:, None] * np.cos(kr)
                 - np.imag(Fw[sl])[:, None] * np.sin(kr))
        out += basis.T @ osc
    return out / (2.0 * np.pi)


def _phase_integrals(weights: np.ndarray, E: np.ndarray, k: np.ndarray,
                     w: np.ndarray, Rs: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """I(R, t) = int dk/2pi  weight(k) e^{i E t} cos(k R), complex output."""
    out = np.zeros((Rs.size, ts.size), dtype=complex)
    fw = weights * w
    for s in range(0, k.size, _CHUNK):
        sl = slice(s, s + _CHUNK)
        C = np.cos(np.outer(k[sl], Rs.astype(float)))
        ph = np.exp(1j * np.outer(E[sl], ts))
        out += C.T @ (fw[sl][:, None] * ph)
    return out / (2.0 * np.pi)


def correlation_field(F: AmplitudeFunction, disp_post: Dispersion, R_max: int,
                      T: float, dt: float, tol: float = _QUAD_TOL,
                      kernel_L: int | None = None) -> SpacetimeField:
    """Space-time correlation field of the generic quench integral.

    G(R,t) = int dk/2pi F(k) e^{ikR} [1 - cos(2 E_k t)] on integer
    separations 0..R_max and times 0..T in steps of dt.  The
    Brillouin-zone node count starts at 2^12 and doubles until the
    field changes by less than ``tol`` relative to its max; failure to
    stabilize below 2^17 nodes raises QuadratureError.

    Long-range amplitudes are evaluated through the FFT kernel fold so
    each doubling costs one kernel pass, with the zone-center cells
    handed to the graded infrared patch (the dispersion cusp at k = 0
    defeats uniform sampling there).  For GZ_LRXY the spin-wave
    depletion guard runs on the final grid and attaches a warning when
    the transverse depletion exceeds 0.15.
    """
    _check_dispersion_match(F, disp_post)
    quench = F.quench
    Rs = np.arange(0, int(R_max) + 1)
    ts = _time_axis(T, dt)
    L = int(kernel_L) if kernel_L is not None else disp_post.kernel_L
    long_range = F.observable in _LR_OBSERVABLES

    def build(n: int) -> np.ndarray:
        k, w, P = _bz_grid(n, quench.post if long_range else None, L)
        if long_range:
            Fk = _amplitude_values(F.observable, quench, k, L, P_one=P)
            A, B = quadratic_coefficients(quench.post, k, L, P_one=P)
            if np.any(np.abs(A) <= np.abs(B)):
                raise DomainError("post-quench quasiparticle form is unstable")
            twoE = 2.0 * np.sqrt((A - B) * (A + B))
        else:
            Fk = _amplitude_values(F.observable, quench, k, L)
            twoE = _pair_energy(disp_post, k)
        return _assemble_generic(Fk, twoE, k, w, Rs, ts)

    values, nodes = _refine_until_stable(build, tol, F.observable)
    notes: tuple = ()
    if F.observable == "GZ_LRXY":
        dep = _spin_wave_depletion(quench, ts, nodes, L)
        if dep > 0.15:
            notes = (f"spin-wave depletion reaches {dep:.3f} > 0.15; "
                     "the linear spin-wave field is outside its validity window",)
    return SpacetimeField(observable=F.observable, quench=quench, Rs=Rs, ts=ts,
                          values=values, dt=float(dt), R_max=int(R_max),
                          nodes=nodes, warnings=notes)


def _spin_wave_depletion(quench: QuenchSpec, ts: np.ndarray, n: int, kernel_L: int) -> float:
    """Max transverse depletion of the time-evolved spin-wave vacuum.

    The quench populates post-quench magnons with mixing coefficients
    (M, N); the depletion integral bounds |1/2 - <S^x>| and the linear
    theory is trusted only while it stays small.
    """
    k, dk = _midpoints(n)
    P = _kernel_midpoint(n, quench.post.alpha, kernel_L)
    A_i, B_i, _, _, E_i = _uv_tables(quench.pre, k, kernel_L, P_one=P)
    A_f, B_f, u_f, v_f, E_f = _uv_tables(quench.post, k, kernel_L, P_one=P)
    M2 = (A_i * A_f + E_i * E_f - B_i * B_f) / (2.0 * E_i * E_f)
    N2 = (A_i * A_f - E_i * E_f - B_i * B_f) / (2.0 * E_i * E_f)
    MN = (B_i * A_f - B_f * A_i) / (2.0 * E_i * E_f)
    const = float(np.sum(u_f ** 2 * N2 + v_f ** 2 * M2)) * dk / (2.0 * np.pi)
    osc = (u_f * v_f * MN) @ np.cos(2.0 * np.outer(E_f, ts)) * dk / np.pi
    return float(np.max(np.abs(const - osc)))


def g2_mi_deep_field(quench: QuenchSpec, R_max: int, T: float, dt: float,
                     deep: bool | None = None, tol: float = _QUAD_TOL) -> SpacetimeField:
    """Density-density field after a quench from the atomic Mott limit.

    Fermionized-pair form G2 = -2 (|g2|^2 + |gbar2|^2) with
    g2 ~ (J/U)(R/t) int dk/2pi [e^{i(2E t + kR)} + e^{i(2E t - kR)}] and
    gbar2 ~ (J/U)^2 int dk/2pi sin^2 k [e^{i(2E t - kR)} + e^{-i(2E t + kR)}].

    ``deep`` selects the U >> J mode: |gbar2|^2 is dropped and the
    constant gap factors out of the modulus, leaving the effective pair
    band 2 Etilde_k = -2J(2 n_bar + 1) cos k.  Default: deep for
    U_f/J >= 10.  These asymptotic forms do not encode the equilibrium
    subtraction, so the t = 0 slice is pinned to zero.
    """
    pre, post = quench.pre, quench.post
    _require(quench.protocol == "global", "G2 Mott field is a global-quench correlator")
    _require(pre.family == "SRBH", "G2 Mott field needs a Bose-Hubbard model")
    _require(math.isinf(pre.U), "G2 Mott field describes quenches from the atomic limit")
    _require(float(pre.n_bar).is_integer() and pre.n_bar >= 1,
             "the Mott phase needs integer filling n_bar >= 1")
    _require(post.U / post.J >= 6.0, "post-quench model must stay in the Mott regime")
    if deep is None:
        deep = post.U / post.J >= 10.0
    J, U, nb = post.J, post.U, post.n_bar
    Rs = np.arange(0, int(R_max) + 1)
    ts = _time_axis(T, dt)
    safe_ts = np.where(ts > 0.0, ts, 1.0)

    def build(n: int) -> np.ndarray:
        k, dk = _midpoints(n)
        w = np.full(k.size, dk)
        if deep:
            twoE = -2.0 * J * (2.0 * nb + 1.0) * np.cos(k)
        else:
            twoE = np.sqrt((U - 2.0 * J * (2.0 * nb + 1.0) * np.cos(k)) ** 2
                           + 16.0 * J ** 2 * nb * (nb + 1.0) * np.sin(k) ** 2)
        # bracket of g2 is 2 int dk/2pi e^{i 2E t} cos(kR)
        I = 2.0 * _phase_integrals(np.ones_like(k), twoE, k, w, Rs, ts)
        g2 = (J / U) * (Rs[:, None] / safe_ts[None, :]) * I
        vals = np.abs(g2) ** 2
        if not deep:
            # gbar2 = 2 (J/U)^2 int dk/2pi sin^2 k cos(kR) cos(2E t), real
            gbar = np.zeros((Rs.size, ts.size))
            for s in range(0, k.size, _CHUNK):
                sl = slice(s, s + _CHUNK)
                C = np.cos(np.outer(k[sl], Rs.astype(float)))
                gbar += (C.T * np.sin(k[sl]) ** 2) @ np.cos(np.outer(twoE[sl], ts))
            gbar *= (J / U) ** 2 * dk / np.pi
            vals = vals + gbar ** 2
        out = -2.0 * vals
        out[:, ts == 0.0] = 0.0
        return out

    values, nodes = _refine_until_stable(build, tol, "G2_MI")
    return SpacetimeField(observable="G2_MI_DEEP" if deep else "G2_MI",
                          quench=quench, Rs=Rs, ts=ts, values=values,
                          dt=float(dt), R_max=int(R_max), nodes=nodes)


def gz_lrti_field(quench: QuenchSpec, R_max: int, T: float, dt: float,
                  tol: float = _QUAD_TOL, kernel_L: int = _KERNEL_L) -> SpacetimeField:
    """Longitudinal correlation field of the long-range transverse Ising chain.

    G_z(R,t) = |I1|^2 + |I2|^2 - |I3|^2 - |I4|^2 where I3, I4 are the
    static v_i^2 and u_i v_i cosine transforms and I1, I2 carry the
    quench dynamics through the pre/post Bogolyubov mixing.  The kernels
    satisfy P1 + S1 = u_i v_i and P2 + S2 = v_i^2, which makes
    G_z(R, 0) = 0 exact.
    """
    pre, post = quench.pre, quench.post
    _require(quench.protocol == "global", "G_z is a global-quench correlator")
    _require(pre.family == "LRTI", "G_z needs the long-range transverse Ising model")
    _require(pre.h == post.h and pre.h > 0.0, "G_z describes coupling quenches at fixed h > 0")
    _require(pre.alpha == post.alpha, "pre and post must share alpha")
    _require(pre.alpha > 1.0, "alpha <= 1 has no convergent kernel")
    Rs = np.arange(0, int(R_max) + 1)
    ts = _time_axis(T, dt)

    def build(n: int) -> np.ndarray:
        k, w, P = _bz_grid(n, post, kernel_L)
        wv = w / (2.0 * np.pi)
        A_i, B_i, u_i, v_i, E_i = _uv_tables(pre, k, kernel_L, P_one=P)
        A_f, B_f, _, _, E_f = _uv_tables(post, k, kernel_L, P_one=P)
        D = B_f * A_i - B_i * A_f
        P1 = D * A_f / (2.0 * E_i * E_f ** 2)
        Q1 = D / (2.0 * E_i * E_f)
        S1 = (B_i * B_f ** 2 - B_f * A_i * A_f) / (2.0 * E_i * E_f ** 2)
        P2 = (B_i * A_f * B_f - A_i * B_f ** 2) / (2.0 * E_i * E_f ** 2)
        S2 = (A_i * A_f ** 2 - B_i * B_f * A_f - E_i * E_f ** 2) / (2.0 * E_i * E_f ** 2)
        shape = (Rs.size, ts.size)
        re1, im1, i2 = np.zeros(shape), np.zeros(shape), np.zeros(shape)
        s1 = np.zeros(Rs.size)
        s2, i3, i4 = np.zeros_like(s1), np.zeros_like(s1), np.zeros_like(s1)
        for s in range(0, k.size, _CHUNK):
            sl = slice(s, s + _CHUNK)
            C = np.cos(np.outer(k[sl], Rs.astype(float)))
            cos2 = np.cos(2.0 * np.outer(E_f[sl], ts))
            sin2 = np.sin(2.0 * np.outer(E_f[sl], ts))
            re1 += (C.T * (P1 * wv)[sl]) @ cos2
            im1 += (C.T * (Q1 * wv)[sl]) @ sin2
            i2 += (C.T * (P2 * wv)[sl]) @ cos2
            s1 += C.T @ (S1 * wv)[sl]
            s2 += C.T @ (S2 * wv)[sl]
            i3 += C.T @ (v_i ** 2 * wv)[sl]
            i4 += C.T @ (u_i * v_i * wv)[sl]
        re1 = re1 + s1[:, None]
        i2 = i2 + s2[:, None]
        return re1 ** 2 + im1 ** 2 + i2 ** 2 - (i3 ** 2)[:, None] - (i4 ** 2)[:, None]

    values, nodes = _refine_until_stable(build, tol, "GZ_LRTI")
    return SpacetimeField(observable="GZ_LRTI", quench=quench, Rs=Rs, ts=ts,
                          values=values, dt=float(dt), R_max=int(R_max), nodes=nodes)


def local_magnetization_field(quench: QuenchSpec, R_max: int, T: float, dt: float,
                              tol: float = _QUAD_TOL,
                              kernel_L: int = _KERNEL_L) -> SpacetimeField:
    """1/2 - <S^z_R(t)> after a single spin flip on a polarized ground state.

    Two squared cosine transforms on top of the static quantum
    depletion,

        1/2 - <S^z_R> = int dk/2pi v^2
                        + |int dk/2pi u^2 e^{i E t} cos(k dR)|^2
                        + |int dk/2pi u v e^{i E t} cos(k dR)|^2,

    with single-magnon energies and dR the separation from the flipped
    site.  Ferromagnetic phases (SRH, XXZ with epsilon <= -1) have
    u = 1, v = 0 and reduce to one transform that starts as a Kronecker
    delta at the flip site.
    """
    _require(quench.protocol == "local" and quench.perturbation == "spin_flip",
             "this field describes a single spin flip")
    model = quench.post
    _require(model.family in ("SRH", "SRTI", "LRTI", "LRXXZ"),
             f"no spin-flip closed form for family {model.family}")
    if model.family == "LRXXZ":
        _require(model.epsilon <= -1.0,
                 "the spin-flip field needs the ferromagnetic-z phase (epsilon <= -1)")
    Rs = np.arange(-int(R_max), int(R_max) + 1)
    ts = _time_axis(T, dt)

    def build(n: int) -> np.ndarray:
        k, w, P = _bz_grid(n, model if model.alpha is not None else None, kernel_L)
        _, _, u, v, E = _uv_tables(model, k, kernel_L, P_one=P)
        static = float(np.sum(v ** 2 * w)) / (2.0 * np.pi)
        I_u = _phase_integrals(u ** 2, E, k, w, Rs, ts)
        vals = static + np.abs(I_u) ** 2
        if np.any(v != 0.0):
            I_uv = _phase_integrals(u * v, E, k, w, Rs, ts)
            vals = vals + np.abs(I_uv) ** 2
        return vals

    values, nodes = _refine_until_stable(build, tol, "spin_flip")
    return SpacetimeField(observable="LOCAL_SZ", quench=quench, Rs=Rs, ts=ts,
                          values=values, dt=float(dt), R_max=int(R_max), nodes=nodes)


def local_density_field(quench: QuenchSpec, R_max: int, T: float, dt: float,
                        tol: float = _QUAD_TOL) -> SpacetimeField:
    """<n_R(t)> after creating a doublon-holon pair deep in the Mott phase.

    <n_R> = n_bar - |I_h(dR, t)|^2 + theta |I_d(dR - d, t)|^2 with
    I_X(m, t) = int dk/2pi e^{i E_X t} cos(k m), band slopes
    E_h: 2 J n_bar sin k and E_d: 2 J (n_bar + 1) sin k (the U/2 offset
    is a pure phase under the modulus), d = doublon - holon site and the
    step theta restricting the doublon term to its own side, theta(0)=1.
    dR is the separation from the holon site.
    """
    _require(quench.protocol == "local" and quench.perturbation == "doublon_holon",
             "this field describes a doublon-holon pair")
    model = quench.post
    _require(model.family == "SRBH", "doublon-holon pairs need a Bose-Hubbard model")
    _require(float(model.n_bar).is_integer() and model.n_bar >= 1,
             "the Mott phase needs integer filling n_bar >= 1")
    _require(model.U / model.J >= 6.0, "doublon-holon closed form holds deep in the Mott phase")
    nb, J = model.n_bar, model.J
    d = quench.doublon_site - quench.holon_site
    Rs = np.arange(-int(R_max), int(R_max) + 1)
    ts = _time_axis(T, dt)
    doublon_side = ((Rs - d) * d >= 0).astype(float)

    def build(n: int) -> np.ndarray:
        k, dk = _midpoints(n)
        w = np.full(k.size, dk)
        e_h = -2.0 * J * nb * np.cos(k)
        e_d = -2.0 * J * (nb + 1.0) * np.cos(k)
        ones = np.ones_like(k)
        I_h = _phase_integrals(ones, e_h, k, w, Rs, ts)
        I_d = _phase_integrals(ones, e_d, k, w, Rs - d, ts)
        return nb - np.abs(I_h) ** 2 + doublon_side[:, None] * np.abs(I_d) ** 2

    values, nodes = _refine_until_stable(build, tol, "doublon_holon")
    return SpacetimeField(observable="LOCAL_N", quench=quench, Rs=Rs, ts=ts,
                          values=values, dt=float(dt), R_max=int(R_max), nodes=nodes)


# ---------------------------------------------------------------------------
# stationary-phase asymptotics


@dataclass(frozen=True)
class SPAResult:
    """Stationary-phase value of the quench integral at one (R, t).

    k_points and sigmas list every stationary point 2 V_g(k) = R/t in
    the zone together with the curvature sign entering each phase
    offset; outside_cone marks the absence of stationary points (the
    value is then 0).
    """

    value: float
    k_points: tuple
    sigmas: tuple
    outside_cone: bool


def _pair_energy_scalar(disp: Dispersion, k: float) -> float:
    E = float(dispersion_eval(disp, k))
    return E if disp.pair_energy_flag else 2.0 * E


def _pair_curvature(disp: Dispersion, k: float, h: float = 1e-4) -> float:
    def d2(step):
        return (_pair_energy_scalar(disp, k + step) - 2.0 * _pair_energy_scalar(disp, k)
                + _pair_energy_scalar(disp, k - step)) / step ** 2
    return (4.0 * d2(0.5 * h) - d2(h)) / 3.0


def stationary_phase_asymptote(F: AmplitudeFunction, disp: Dispersion, R: float,
                               t: float, D: int = 1) -> SPAResult:
    """Large-(R, t) asymptote of the generic quench integral.

    Solves the stationary-phase condition 2 V_g(k) = R/t over the full
    zone (sign scan plus bisection to 1e-10) and sums

        -Re[ F(k0) e^{i (k0 R - 2 E_k0 t + sigma D pi/4)} ]
            / (2 pi |d^2(2E)/dk^2| t)^{D/2},

    sigma = sgn(-d^2(2E)/dk^2), over all stationary points; the mirror
    points of the conjugate exponent are already accounted for.  With no
    stationary point the result is the outside-cone marker with value 0.
    Degenerate curvature (R/t at the extremal velocity) lies outside the
    validity of the quadratic expansion and returns a divergent value.
    """
    if t <= 0.0:
        raise ValueError("the asymptote needs t > 0")
    target = float(R) / float(t)

    # sign scan: linear grid over the zone plus log-spaced probes toward
    # k = 0 where quasi-local group velocities diverge
    lin = np.linspace(-np.pi, np.pi, 2049)[1:]
    logp = np.pi * np.logspace(-8.0, -0.5, 40)
    grid = np.unique(np.concatenate([lin, logp, -logp]))
    vg2 = 2.0 * group_velocity(disp, grid)
    psi = vg2 - target

    roots = []
    for i in np.flatnonzero(np.sign(psi[:-1]) * np.sign(psi[1:]) < 0.0):
        lo, hi = float(grid[i]), float(grid[i + 1])
        flo = float(psi[i])
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            fm = 2.0 * float(group_velocity(disp, mid)) - target
            if flo * fm <= 0.0:
                hi = mid
            else:
                lo, flo = mid, fm
            if hi - lo < 1e-10:
                break
        k0 = 0.5 * (lo + hi)
        # discard sign changes that are jumps, not zeros
        if abs(2.0 * float(group_velocity(disp, k0)) - target) < 1e-5 * max(1.0, abs(target)):
            roots.append(k0)
    for i in np.flatnonzero(psi == 0.0):
        roots.append(float(grid[i]))
    roots = sorted(roots)
    merged = []
    for k0 in roots:
        if not merged or abs(k0 - merged[-1]) > 1e-8:
            merged.append(k0)

    if not merged:
        return SPAResult(value=0.0, k_points=(), sigmas=(), outside_cone=True)

    total = 0.0
    sigmas = []
    for k0 in merged:
        curv = _pair_curvature(disp, k0)
        sigma = int(np.sign(-curv)) if curv != 0.0 else 0
        sigmas.append(sigma)
        Fk0 = complex(F.evaluator(k0))
        phase = k0 * R - _pair_energy_scalar(disp, k0) * t + sigma * D * np.pi / 4.0
        with np.errstate(divide="ignore"):
            total += -float(np.real(Fk0 * np.exp(1j * phase))) / (
                (2.0 * np.pi * abs(curv) * t) ** (0.5 * D))
    return SPAResult(value=total, k_points=tuple(merged), sigmas=tuple(sigmas),
                     outside_cone=False)


# ---------------------------------------------------------------------------
# quasi-local scaling exponents


@dataclass(frozen=True)
class ScalingExponents:
    """Twofold-structure scaling laws of the quasi-local regime.

    The correlation edge follows t ~ R^beta_CE and the extrema follow
    t ~ R^beta_m; gamma and chi are the underlying activation exponents
    and A_z the amplitude of the stationary phase at the edge (None when
    no infrared prefactor c is supplied).
    """

    beta_CE: float
    beta_m: float
    A_z: float | None
    gamma: float
    chi: float


def scaling_exponents(z: float, nu: float, D: int = 1, gapped: bool = True,
                      c: float | None = None) -> ScalingExponents:
    """Scaling exponents of the twofold spreading structure.

    Inputs are the dynamical exponent z of the infrared dispersion
    E ~= delta + c |k|^z, the infrared exponent nu of the amplitude
    F ~ |k|^nu, and the dimension D.  Valid for the quasi-local window
    0 <= z < 1; ballistic regimes (z >= 1) have velocity fronts instead
    and raise LocalRegimeError.

        gamma = (nu + D/2)/(1 - z),  chi = gamma + D/2,
        beta_CE = chi/gamma,         beta_m = 1 (gapped) or z (gapless),
        A_z = 2c(1-z)(2cz)^{z/(1-z)}.

    The scaling laws do not depend on the sign of c; A_z carries
    sign(c) so the z -> 0 limit A_z -> 2c holds for either sign.
    """
    if z >= 1.0:
        raise LocalRegimeError(
            f"z = {z} is ballistic (local); use the velocity profile instead")
    if z < 0.0:
        raise ValueError(f"z must be non-negative, got {z}")
    if nu < 0.0 and nu + D / 2.0 <= 0.0:
        raise ValueError(f"nu = {nu} leaves no integrable activation (nu + D/2 <= 0)")
    gamma = (nu + D / 2.0) / (1.0 - z)
    chi = gamma + D / 2.0
    A_z = None
    if c is not None:
        A_z = math.copysign(
            2.0 * abs(c) * (1.0 - z) * (2.0 * abs(c) * z) ** (z / (1.0 - z)), c)
    return ScalingExponents(beta_CE=chi / gamma, beta_m=1.0 if gapped else z,
                            A_z=A_z, gamma=gamma, chi=chi)
