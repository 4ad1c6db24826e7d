"""Lattice model specifications, exponential-sum fits and MPO construction.

The model families covered here are one-dimensional chains with open
boundaries: the short-range Bose-Hubbard chain, the nearest-neighbor
transverse Ising and Heisenberg chains, and the long-range transverse
Ising / XY / XXZ chains with power-law couplings 1/|R - R'|^alpha.

Long-range couplings enter matrix product operators through an
exponential-sum approximation 1/R^alpha ~= sum_m a_m b_m^R, which keeps
the MPO virtual dimension at 2 + (channels) * M instead of growing with
system size.  The MPO encodes the fitted couplings, not the raw power
law, so exact agreement with a dense Hamiltonian is only expected when
the dense matrix is built from the same fit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import hankel, lstsq, svd
from scipy.optimize import minimize

__all__ = [
    "FAMILIES",
    "ModelSpec",
    "ExpSumFit",
    "MPO",
    "FitConvergenceError",
    "DimensionCapError",
    "fit_exp_sum",
    "select_exp_sum_m",
    "build_mpo",
    "mpo_to_dense",
    "bose_ops",
    "spin_ops",
    "suggest_nmax",
    "array_to_json",
    "array_from_json",
]

FAMILIES = ("SRBH", "SRTI", "SRH", "LRTI", "LRXY", "LRXXZ")
_LONG_RANGE = ("LRTI", "LRXY", "LRXXZ")

# which optional couplings each family actually uses; anything else must
# stay at its default so configuration typos fail loudly
_USES = {
    "SRBH": {"U", "n_max"},
    "SRTI": {"h"},
    "SRH": set(),
    "LRTI": {"h", "alpha"},
    "LRXY": {"alpha"},
    "LRXXZ": {"alpha", "epsilon"},
}


class FitConvergenceError(RuntimeError):
    """Exponential-sum optimization failed to converge.

    Carries the best fit found so far in ``best``.
    """

    def __init__(self, message: str, best: "ExpSumFit"):
        super().__init__(message)
        self.best = best


class DimensionCapError(ValueError):
    """Requested dense object exceeds the configured dimension cap."""


@dataclass(frozen=True)
class ModelSpec:
    """Parameters of a 1D lattice Hamiltonian.

    J is the hopping / coupling scale (positive), U the on-site
    interaction (Bose-Hubbard), h the transverse field (Ising families),
    epsilon the z-anisotropy (LRXXZ), alpha the power-law exponent
    (long-range families), n_bar the filling and n_max the local boson
    cutoff (Bose-Hubbard).
    """

    family: str
    L: int
    J: float = 1.0
    U: float = 0.0
    h: float = 0.0
    epsilon: float = 0.0
    alpha: float | None = None
    n_bar: float = 1.0
    n_max: int | None = None
    boundary: str = "open"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if self.U < 0:
            raise ValueError(f"U must be non-negative, got {self.U}")
        if self.h < 0:
            raise ValueError(f"h must be non-negative, got {self.h}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        uses = _USES[self.family]
        if self.family in _LONG_RANGE:
            if self.alpha is None or not self.alpha > 0:
                raise ValueError(f"{self.family} requires alpha > 0, got {self.alpha}")
        elif self.alpha is not None:
            raise ValueError(f"{self.family} does not take alpha")
        if self.family == "SRBH":
            if self.n_max is not None and self.n_max < 1:
                raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        elif self.n_max is not None:
            raise ValueError(f"{self.family} does not take n_max")
        if "U" not in uses and self.U != 0.0:
            raise ValueError(f"{self.family} does not take U")
        if "h" not in uses and self.h != 0.0:
            raise ValueError(f"{self.family} does not take h")
        if "epsilon" not in uses and self.epsilon != 0.0:
            raise ValueError(f"{self.family} does not take epsilon")

    @property
    def local_dim(self) -> int:
        if self.family == "SRBH":
            if self.n_max is None:
                raise ValueError("SRBH local dimension requires n_max")
            return self.n_max + 1
        return 2

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "L": self.L,
            "J": self.J,
            "U": self.U,
            "h": self.h,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "n_bar": self.n_bar,
            "n_max": self.n_max,
            "boundary": self.boundary,
        }

    @staticmethod
    def from_dict(data: dict) -> "ModelSpec":
        allowed = {
            "family", "L", "J", "U", "h", "epsilon", "alpha", "n_bar", "n_max", "boundary",
        }
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown model keys: {sorted(unknown)}")
        return ModelSpec(**data)


def bose_ops(n_max: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Truncated boson operators (a, a_dag, n) on the basis |0>, ..., |n_max>."""
    d = n_max + 1
    a = np.zeros((d, d))
    for n in range(1, d):
        a[n - 1, n] = math.sqrt(n)
    return a, a.T.copy(), np.diag(np.arange(d, dtype=float))


def spin_ops() -> dict[str, np.ndarray]:
    """Spin-1/2 operators in the (up, down) basis."""
    sx = np.array([[0.0, 0.5], [0.5, 0.0]])
    sy = np.array([[0.0, -0.5j], [0.5j, 0.0]])
    sz = np.array([[0.5, 0.0], [0.0, -0.5]])
    sp = np.array([[0.0, 1.0], [0.0, 0.0]])
    sm = sp.T.copy()
    return {"x": sx, "y": sy, "z": sz, "+": sp, "-": sm, "I": np.eye(2)}


def suggest_nmax(n_bar: float, gamma: float | None = None, tol: float = 1e-2) -> int:
    """Boson cutoff estimate from Poissonian on-site statistics.

    Picks the smallest n with Poisson tail probability below ``tol`` and
    adds one for safety (weakly interacting regime).  When the
    interaction parameter gamma = U / (2 J n_bar) is supplied, strong
    interactions shrink the estimate: number fluctuations are frozen out
    above the Mott scale.
    """
    if n_bar <= 0:
        raise ValueError("n_bar must be positive")
    if gamma is not None:
        if gamma > 10:
            return max(1, math.ceil(n_bar))
        if gamma >= 0.1:
            return math.ceil(n_bar) + 3
    # Poisson tail: 1 - sum_{n<=m} n_bar^n e^-n_bar / n!
    cdf = 0.0
    term = math.exp(-n_bar)
    m = 0
    while True:
        cdf += term
        if 1.0 - cdf <= tol:
            return m + 1
        m += 1
        term *= n_bar / m
        if m > 1000:
            raise RuntimeError("Poisson tail failed to fall below tol")


# ---------------------------------------------------------------------------
# exponential-sum fit of power-law couplings


@dataclass(frozen=True)
class ExpSumFit:
    """Approximation f(R) ~= sum_m a_m b_m^R for R = 1..L.

    Weights a_m may be negative; rates b_m lie strictly inside (0, 1).
    ``max_rel_error`` is max_R |f - fit| / f, ``sum_abs_error`` the L1
    objective value sum_R |f - fit|, both over the fitted range.
    """

    alpha: float
    L: int
    M: int
    a: tuple[float, ...]
    b: tuple[float, ...]
    max_rel_error: float
    sum_abs_error: float
    converged: bool = True

    def __post_init__(self):
        if len(self.a) != self.M or len(self.b) != self.M:
            raise ValueError("a and b must both have length M")
        if not all(0.0 < bm < 1.0 for bm in self.b):
            raise ValueError("rates b_m must lie in (0, 1)")

    @property
    def has_negative_weights(self) -> bool:
        return any(am < 0 for am in self.a)

    def evaluate(self, R: np.ndarray | Sequence[int]) -> np.ndarray:
        """Evaluate the exponential sum at integer separations R >= 1."""
        R = np.asarray(R, dtype=float)
        b = np.asarray(self.b)
        a = np.asarray(self.a)
        return (a * b ** R[..., None]).sum(axis=-1)

    def to_dict(self) -> dict:
        return {
            "kind": "exp_sum_fit",
            "schema": 1,
            "alpha": self.alpha,
            "L": self.L,
            "M": self.M,
            "a": list(self.a),
            "b": list(self.b),
            "max_rel_error": self.max_rel_error,
            "sum_abs_error": self.sum_abs_error,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_dict(data: dict) -> "ExpSumFit":
        if data.get("kind") != "exp_sum_fit":
            raise ValueError("not an exp_sum_fit document")
        return ExpSumFit(
            alpha=data["alpha"],
            L=data["L"],
            M=data["M"],
            a=tuple(data["a"]),
            b=tuple(data["b"]),
            max_rel_error=data["max_rel_error"],
            sum_abs_error=data["sum_abs_error"],
            converged=data.get("converged", True),
        )

    @staticmethod
    def from_json(text: str) -> "ExpSumFit":
        return ExpSumFit.from_dict(json.loads(text))


def _logit(b: np.ndarray) -> np.ndarray:
    return np.log(b / (1.0 - b))


def _expit(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def _pencil_rates(f: np.ndarray, M: int) -> np.ndarray:
    """Decay-rate estimates from the matrix-pencil (Hankel / shift) method.

    Exact when f is a sum of <= M exponentials; otherwise the dominant
    rates of the best rank-M Hankel approximation.  Complex or out-of-
    range eigenvalues are discarded, so fewer than M rates may return.
    """
    N = len(f)
    p = min(max(2 * M, M + 2), N // 2)
    Y = hankel(f[: N - p], f[N - p - 1 :])
    _, _, vh = svd(Y, full_matrices=False)
    V = vh.conj().T
    nodes = np.linalg.eigvals(np.linalg.pinv(V[:-1, :M]) @ V[1:, :M])
    real = nodes.real[np.abs(nodes.imag) <= 1e-6 * (1.0 + np.abs(nodes.real))]
    rates = np.unique(np.clip(np.abs(real), 1e-4, 1.0 - 1e-9))
    return np.sort(rates)


def _laplace_rates(L: int, M: int) -> np.ndarray:
    """Rates from discretizing R^-alpha = int t^(alpha-1) e^(-t R) dt / Gamma(alpha).

    Log-spaced trapezoid nodes t_m spanning decay scales 1/4 .. 4 L give
    b_m = exp(-t_m); the weights are refit linearly, so only the rates
    matter and the grid is alpha independent.
    """
    s = np.linspace(math.log(1.0 / (4.0 * L)), math.log(4.0), M)
    return np.sort(np.exp(-np.exp(s)))


def _nm(objective, x0: np.ndarray, budget: int, restarts: int = 5):
    """Nelder-Mead with restarts; returns (x, success).

    A restart that improves the objective by less than 1e-4 relative
    counts as converged: the previous run was already sitting at a local
    optimum within the resolution of its simplex.
    """
    x, converged = np.asarray(x0, dtype=float), False
    f_prev = float(objective(x))
    for _ in range(restarts + 1):
        res = minimize(
            objective,
            x,
            method="Nelder-Mead",
            options={"maxfev": budget, "xatol": 1e-9, "fatol": 1e-12},
        )
        x = res.x
        f_new = float(res.fun)
        if res.status == 0 or f_prev - f_new <= 1e-4 * max(f_prev, 1e-300):
            converged = True
            break
        f_prev = f_new
    return x, converged


def fit_exp_sum(
    alpha: float,
    L: int,
    M: int,
    seed: int = 0,
    target: np.ndarray | None = None,
    max_iter: int = 400,
) -> ExpSumFit:
    """Fit f(R) = 1/R^alpha on R = 1..L by a sum of M decaying exponentials.

    Minimizes the absolute-error sum  sum_{R=1}^{L} |f(R) - sum_m a_m b_m^R|
    to a local optimum by variable projection: the rates b_m (kept in
    (0, 1) through a logit) are optimized with Nelder-Mead while the
    weights a_m come from linear least squares, iteratively reweighted
    towards L1.  Rate starting points are taken from the matrix-pencil
    estimate, from a quadrature of the inverse-power Laplace transform,
    and from a seeded jitter of the pencil rates; a relative-error
    pre-optimization selects the basin before the L1 descent, which keeps
    the tail of the fit accurate.  Deterministic for a fixed seed.

    ``target`` overrides the power-law samples with an arbitrary positive
    sequence f(1..L) of length L.

    Raises FitConvergenceError (carrying the best fit found) when the
    optimizer exhausts its budget without converging.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if L < M:
        raise ValueError("need at least M sample points")
    R = np.arange(1, L + 1, dtype=float)
    if target is None:
        f = R ** (-float(alpha))
    else:
        f = np.asarray(target, dtype=float)
        if f.shape != (L,):
            raise ValueError(f"target must have shape ({L},)")
    fmax = float(np.abs(f).max())
    w_rel = 1.0 / np.maximum(np.abs(f), 1e-300)

    def fill_rates(b: np.ndarray) -> np.ndarray:
        if len(b) >= M:
            return b[:M]
        pad = np.exp(-1.0 / np.geomspace(1.0, L, M - len(b)))
        return np.sort(np.concatenate([b, pad]))

    def solve_rel(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        basis = b[None, :] ** R[:, None]
        a, *_ = lstsq(basis * w_rel[:, None], f * w_rel)
        return a, basis

    def solve_l1(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a, basis = solve_rel(b)
        for _ in range(40):
            res = np.abs(f - basis @ a)
            w = 1.0 / np.sqrt(np.maximum(res, 1e-14 * fmax))
            a_new, *_ = lstsq(basis * w[:, None], f * w)
            step = float(np.max(np.abs(a_new - a)))
            a = a_new
            if step <= 1e-12 * max(1.0, float(np.max(np.abs(a)))):
                break
        return a, basis

    def obj_rel(x: np.ndarray) -> float:
        a, basis = solve_rel(_expit(x))
        return float(np.max(np.abs(basis @ a - f) * w_rel))

    def obj_l1(x: np.ndarray) -> float:
        a, basis = solve_l1(_expit(x))
        return float(np.abs(basis @ a - f).sum())

    rng = np.random.default_rng(seed)
    pencil = fill_rates(_pencil_rates(f, M))
    starts = [pencil]
    if target is None:
        starts.append(_laplace_rates(L, M))
    starts.append(_expit(_logit(pencil) + rng.normal(0.0, 0.05, M)))

    best: tuple[float, np.ndarray, bool] | None = None
    for b0 in starts:
        x0 = _logit(np.clip(b0, 1e-6, 1.0 - 1e-9))
        # basin selection on max relative error, descent on the L1 sum
        x1, ok1 = _nm(obj_rel, x0, budget=max_iter * M)
        x2, ok2 = _nm(obj_l1, x1, budget=max_iter * M)
        val = obj_l1(x2)
        if best is None or val < best[0]:
            best = (val, x2, ok1 and ok2)
    assert best is not None
    _, x, converged = best

    b = np.clip(np.sort(_expit(x))[::-1], 1e-12, 1.0 - 1e-12)
    a, basis = solve_l1(b)
    approx = basis @ a
    fit = ExpSumFit(
        alpha=float(alpha),
        L=int(L),
        M=int(M),
        a=tuple(float(v) for v in a),
        b=tuple(float(v) for v in b),
        max_rel_error=float(np.max(np.abs(f - approx) / np.abs(f))),
        sum_abs_error=float(np.abs(f - approx).sum()),
        converged=converged,
    )
    if not converged:
        raise FitConvergenceError(
            f"exp-sum fit did not converge within its evaluation budget "
            f"(best sum_abs_error {fit.sum_abs_error:.3e})",
            best=replace(fit, converged=False),
        )
    return fit


def select_exp_sum_m(
    alpha: float,
    L: int,
    target_rel: float = 0.01,
    m_max: int = 16,
    seed: int = 0,
) -> ExpSumFit:
    """Smallest-M fit with max relative error at or below ``target_rel``.

    Sweeps M upwards and returns the first fit meeting the target; raises
    FitConvergenceError with the best fit when even M = m_max misses it.
    """
    best: ExpSumFit | None = None
    for M in range(1, m_max + 1):
        try:
            fit = fit_exp_sum(alpha, L, M, seed=seed)
        except FitConvergenceError as err:
            fit = err.best
        if best is None or fit.max_rel_error < best.max_rel_error:
            best = fit
        if fit.max_rel_error <= target_rel:
            return fit
    assert best is not None
    raise FitConvergenceError(
        f"no fit with M <= {m_max} reached max_rel_error <= {target_rel}",
        best=best,
    )


# ---------------------------------------------------------------------------
# matrix product operators


@dataclass(frozen=True)
class MPO:
    """Matrix product operator with open boundaries.

    Site tensors W[R] have indices (left-virtual, right-virtual,
    ket-physical, bra-physical); the first tensor has left dimension 1
    and the last right dimension 1.
    """

    tensors: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.tensors) < 2:
            raise ValueError("MPO needs at least two sites")
        if self.tensors[0].shape[0] != 1 or self.tensors[-1].shape[1] != 1:
            raise ValueError("outer virtual dimensions must be 1")
        for i, W in enumerate(self.tensors):
            if W.ndim != 4 or W.shape[2] != W.shape[3]:
                raise ValueError(f"site {i}: expected shape (wl, wr, d, d), got {W.shape}")
            if i + 1 < len(self.tensors) and W.shape[1] != self.tensors[i + 1].shape[0]:
                raise ValueError(f"virtual dimension mismatch between sites {i} and {i + 1}")

    @property
    def L(self) -> int:
        return len(self.tensors)

    @property
    def d(self) -> int:
        return self.tensors[0].shape[2]

    @property
    def chi_tilde(self) -> int:
        return max(W.shape[0] for W in self.tensors[1:])

    def to_dict(self) -> dict:
        return {
            "kind": "mpo",
            "schema": 1,
            "tensors": [array_to_json(W) for W in self.tensors],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_dict(data: dict) -> "MPO":
        if data.get("kind") != "mpo":
            raise ValueError("not an mpo document")
        return MPO(tuple(array_from_json(t) for t in data["tensors"]))

    @staticmethod
    def from_json(text: str) -> "MPO":
        return MPO.from_dict(json.loads(text))


def array_to_json(arr: np.ndarray) -> dict:
    """Complex array as a shape plus nested (real, imag) lists."""
    arr = np.asarray(arr)
    return {
        "shape": list(arr.shape),
        "re": np.real(arr).tolist(),
        "im": np.imag(arr).tolist(),
    }


def array_from_json(data: dict) -> np.ndarray:
    re = np.asarray(data["re"], dtype=float)
    im = np.asarray(data["im"], dtype=float)
    arr = re + 1j * im
    if list(arr.shape) != list(data["shape"]):
        raise ValueError("array shape mismatch in JSON document")
    if np.all(im == 0.0):
        return re.reshape(data["shape"])
    return arr.reshape(data["shape"])


def _fsm_mpo(
    L: int,
    d: int,
    first_row: list[np.ndarray | None],
    bulk: list[list[np.ndarray | None]],
    last_col: list[np.ndarray | None],
) -> MPO:
    """Assemble an MPO from its finite-state-machine matrix blocks."""
    chi = len(bulk)
    W = np.zeros((chi, chi, d, d), dtype=complex)
    for i in range(chi):
        for j in range(chi):
            if bulk[i][j] is not None:
                W[i, j] = bulk[i][j]
    Wl = np.zeros((1, chi, d, d), dtype=complex)
    for j in range(chi):
        if first_row[j] is not None:
            Wl[0, j] = first_row[j]
    Wr = np.zeros((chi, 1, d, d), dtype=complex)
    for i in range(chi):
        if last_col[i] is not None:
            Wr[i, 0] = last_col[i]
    tensors = [Wl] + [W.copy() for _ in range(L - 2)] + [Wr]
    out = []
    for t in tensors:
        if np.all(np.imag(t) == 0.0):
            out.append(np.real(t).copy())
        else:
            out.append(t)
    return MPO(tuple(out))


def build_mpo(model: ModelSpec, fit: ExpSumFit | None = None) -> MPO:
    """MPO for the model Hamiltonian.

    Long-range families require an exponential-sum fit of the coupling
    (with matching alpha, covering separations up to L - 1); the MPO then
    represents the fitted Hamiltonian exactly.  Virtual dimensions:
    SRBH 4, SRTI 3, SRH 5, LRTI 2 + M, LRXY 2 + 2M, LRXXZ 2 + 3M.
    Only open boundaries are supported.
    """
    if model.boundary != "open":
        raise ValueError("MPO construction supports open boundaries only")
    L = model.L
    if model.family in _LONG_RANGE:
        if fit is None:
            raise ValueError(f"{model.family} requires an exponential-sum fit")
        if model.alpha is not None and not math.isclose(fit.alpha, model.alpha, rel_tol=1e-12):
            raise ValueError(f"fit alpha {fit.alpha} does not match model alpha {model.alpha}")
        if fit.L < L - 1:
            raise ValueError(f"fit range L={fit.L} does not cover separations up to {L - 1}")
    else:
        fit = None  # short-range families ignore any fit passed in

    if model.family == "SRBH":
        if model.n_max is None:
            raise ValueError("SRBH MPO requires n_max")
        a, adag, n = bose_ops(model.n_max)
        d = model.n_max + 1
        eye = np.eye(d)
        onsite = 0.5 * model.U * (n @ n - n)
        # states: 0 finished, 1 awaiting a, 2 awaiting a_dag, 3 not started
        first_row = [onsite, -model.J * adag, -model.J * a, eye]
        bulk = [
            [eye, None, None, None],
            [a, None, None, None],
            [adag, None, None, None],
            [onsite, -model.J * adag, -model.J * a, eye],
        ]
        last_col = [eye, a, adag, onsite]
        return _fsm_mpo(L, d, first_row, bulk, last_col)

    S = spin_ops()
    eye = S["I"]
    if model.family == "SRTI":
        first_row = [-2.0 * model.h * S["z"], 2.0 * model.J * S["x"], eye]
        bulk = [
            [eye, None, None],
            [S["x"], None, None],
            [-2.0 * model.h * S["z"], 2.0 * model.J * S["x"], eye],
        ]
        last_col = [eye, S["x"], -2.0 * model.h * S["z"]]
        return _fsm_mpo(L, 2, first_row, bulk, last_col)

    if model.family == "SRH":
        c = -model.J
        first_row = [None, c * S["x"], c * S["y"], c * S["z"], eye]
        bulk = [
            [eye, None, None, None, None],
            [S["x"], None, None, None, None],
            [S["y"], None, None, None, None],
            [S["z"], None, None, None, None],
            [None, c * S["x"], c * S["y"], c * S["z"], eye],
        ]
        last_col = [eye, S["x"], S["y"], S["z"], None]
        return _fsm_mpo(L, 2, first_row, bulk, last_col)

    assert fit is not None
    M = fit.M
    ab = [fit.a[m] * fit.b[m] for m in range(M)]
    if model.family == "LRTI":
        chi = 2 + M
        onsite = -2.0 * model.h * S["z"]
        first_row = [onsite] + [2.0 * model.J * ab[m] * S["x"] for m in range(M)] + [eye]
        bulk: list[list[np.ndarray | None]] = [[None] * chi for _ in range(chi)]
        bulk[0][0] = eye
        for m in range(M):
            bulk[1 + m][0] = S["x"]
            bulk[1 + m][1 + m] = fit.b[m] * eye
        bulk[chi - 1][0] = onsite
        for m in range(M):
            bulk[chi - 1][1 + m] = 2.0 * model.J * ab[m] * S["x"]
        bulk[chi - 1][chi - 1] = eye
        last_col: list[np.ndarray | None] = [eye] + [S["x"] for _ in range(M)] + [onsite]
        return _fsm_mpo(L, 2, first_row, bulk, last_col)

    if model.family in ("LRXY", "LRXXZ"):
        channels: list[tuple[np.ndarray, float]] = [
            (S["x"], -0.5 * model.J),
            (S["y"], -0.5 * model.J),
        ]
        if model.family == "LRXXZ":
            channels.append((S["z"], 0.5 * model.J * model.epsilon))
        nch = len(channels)
        chi = 2 + nch * M
        first_row = [None]
        for op, c in channels:
            for m in range(M):
                first_row.append(c * ab[m] * op)
        first_row.append(eye)
        bulk = [[None] * chi for _ in range(chi)]
        bulk[0][0] = eye
        idx = 1
        for op, c in channels:
            for m in range(M):
                bulk[idx][0] = op
                bulk[idx][idx] = fit.b[m] * eye
                bulk[chi - 1][idx] = c * ab[m] * op
                idx += 1
        bulk[chi - 1][chi - 1] = eye
        last_col = [eye]
        for op, _ in channels:
            last_col.extend([op] * M)
        last_col.append(None)
        return _fsm_mpo(L, 2, first_row, bulk, last_col)

    raise AssertionError(f"unhandled family {model.family}")


def mpo_to_dense(mpo: MPO, dim_cap: int = 2 ** 14) -> np.ndarray:
    """Contract the MPO chain into a dense matrix.

    Refuses to materialize Hilbert spaces larger than ``dim_cap``.
    """
    dim = mpo.d ** mpo.L
    if dim > dim_cap:
        raise DimensionCapError(f"dense dimension {dim} exceeds cap {dim_cap}")
    d = mpo.d
    # running contraction: (wr, D, D) with D the dimension built so far
    W = mpo.tensors[0]
    block = W[0]  # (wr, d, d)
    for Wn in mpo.tensors[1:]:
        wl, wr, _, _ = Wn.shape
        D = block.shape[1]
        new = np.zeros((wr, D * d, D * d), dtype=np.result_type(block, Wn))
        for j in range(wr):
            acc = np.zeros((D * d, D * d), dtype=new.dtype)
            for i in range(wl):
                acc += np.kron(block[i], Wn[i, j])
            new[j] = acc
        block = new
    out = block[0]
    if np.all(np.imag(out) == 0.0):
        return np.real(out).copy()
    return out
