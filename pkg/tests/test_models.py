"""Model specifications, exponential-sum fits and MPO construction.

The MPO checks compare against dense Hamiltonians assembled here with
plain Kronecker products, independently of the package's own operator
helpers.
"""

import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from quenchcone.models import (
    FAMILIES,
    MPO,
    DimensionCapError,
    ExpSumFit,
    FitConvergenceError,
    ModelSpec,
    array_from_json,
    array_to_json,
    bose_ops,
    build_mpo,
    fit_exp_sum,
    mpo_to_dense,
    select_exp_sum_m,
    spin_ops,
    suggest_nmax,
)

# ---------------------------------------------------------------------------
# local dense oracle, built from scratch

SX = np.array([[0.0, 0.5], [0.5, 0.0]])
SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
SZ = np.array([[0.5, 0.0], [0.0, -0.5]])


def bose_matrices(n_max):
    d = n_max + 1
    a = np.zeros((d, d))
    for n in range(1, d):
        a[n - 1, n] = math.sqrt(n)
    return a, a.T.copy(), np.diag(np.arange(d, dtype=float))


def embed(L, d, site_ops):
    """Kron product of identities with operators placed at given sites."""
    ops = [np.eye(d)] * L
    for s, o in site_ops:
        ops[s] = o
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


def dense_hamiltonian(model, fit=None):
    """Dense H for any family, long-range couplings from the fit."""
    L = model.L
    if model.family == "SRBH":
        a, adag, n = bose_matrices(model.n_max)
        d = model.n_max + 1
        H = np.zeros((d ** L, d ** L))
        for R in range(L - 1):
            H -= model.J * (embed(L, d, [(R, adag), (R + 1, a)])
                            + embed(L, d, [(R, a), (R + 1, adag)]))
        for R in range(L):
            H += 0.5 * model.U * embed(L, d, [(R, n @ n - n)])
        return H
    H = np.zeros((2 ** L, 2 ** L), dtype=complex)
    if model.family == "SRTI":
        for R in range(L - 1):
            H += 2.0 * model.J * embed(L, 2, [(R, SX), (R + 1, SX)])
        for R in range(L):
            H -= 2.0 * model.h * embed(L, 2, [(R, SZ)])
    elif model.family == "SRH":
        for R in range(L - 1):
            for op in (SX, SY, SZ):
                H -= model.J * embed(L, 2, [(R, op), (R + 1, op)])
    elif model.family == "LRTI":
        for R in range(L):
            for Rp in range(R + 1, L):
                c = 2.0 * model.J * float(fit.evaluate(np.array([Rp - R]))[0])
                H += c * embed(L, 2, [(R, SX), (Rp, SX)])
            H -= 2.0 * model.h * embed(L, 2, [(R, SZ)])
    elif model.family in ("LRXY", "LRXXZ"):
        eps = model.epsilon if model.family == "LRXXZ" else 0.0
        for R in range(L):
            for Rp in range(R + 1, L):
                c = float(fit.evaluate(np.array([Rp - R]))[0])
                H -= 0.5 * model.J * c * (embed(L, 2, [(R, SX), (Rp, SX)])
                                          + embed(L, 2, [(R, SY), (Rp, SY)]))
                if eps:
                    H += 0.5 * model.J * eps * c * embed(L, 2, [(R, SZ), (Rp, SZ)])
    else:
        raise AssertionError(model.family)
    return H


# fits reused across tests; small L keeps them fast
@pytest.fixture(scope="module")
def fit_cache():
    cache = {}

    def get(alpha, L=8, M=3):
        key = (alpha, L, M)
        if key not in cache:
            cache[key] = fit_exp_sum(alpha, L, M)
        return cache[key]

    return get


# ---------------------------------------------------------------------------
# ModelSpec


class TestModelSpec:
    def test_families(self):
        assert set(FAMILIES) == {"SRBH", "SRTI", "SRH", "LRTI", "LRXY", "LRXXZ"}

    def test_local_dims(self):
        assert ModelSpec(family="SRBH", L=4, U=1.0, n_max=3).local_dim == 4
        assert ModelSpec(family="SRTI", L=4, h=1.0).local_dim == 2

    def test_rejects_unused_couplings(self):
        with pytest.raises(ValueError):
            ModelSpec(family="SRTI", L=4, h=1.0, U=2.0)
        with pytest.raises(ValueError):
            ModelSpec(family="SRBH", L=4, U=1.0, n_max=2, alpha=2.0)
        with pytest.raises(ValueError):
            ModelSpec(family="LRXY", L=4, alpha=2.0, h=0.5)

    def test_long_range_needs_alpha(self):
        with pytest.raises(ValueError):
            ModelSpec(family="LRTI", L=4, h=1.0)

    def test_parameter_bounds(self):
        with pytest.raises(ValueError):
            ModelSpec(family="SRTI", L=1, h=1.0)
        with pytest.raises(ValueError):
            ModelSpec(family="SRTI", L=4, J=-1.0, h=1.0)
        with pytest.raises(ValueError):
            ModelSpec(family="LRTI", L=4, h=1.0, alpha=0.0)

    def test_dict_round_trip(self):
        m = ModelSpec(family="LRXXZ", L=12, J=0.7, alpha=2.3, epsilon=0.4)
        assert ModelSpec.from_dict(m.to_dict()) == m

    def test_from_dict_rejects_unknown_keys(self):
        d = ModelSpec(family="SRTI", L=4, h=1.0).to_dict()
        d["typo"] = 1
        with pytest.raises(ValueError):
            ModelSpec.from_dict(d)

    @given(
        L=st.integers(2, 64),
        J=st.floats(0.01, 10.0),
        h=st.floats(0.0, 10.0),
        alpha=st.floats(0.5, 6.0),
    )
    @settings(max_examples=120, deadline=None)
    def test_round_trip_property(self, L, J, h, alpha):
        m = ModelSpec(family="LRTI", L=L, J=J, h=h, alpha=alpha)
        assert ModelSpec.from_dict(json.loads(json.dumps(m.to_dict()))) == m


# ---------------------------------------------------------------------------
# operator helpers


def test_bose_ops_algebra():
    a, adag, n = bose_ops(5)
    assert np.allclose(adag, a.T)
    assert np.allclose(n, adag @ a)
    comm = a @ adag - adag @ a
    # canonical commutator away from the truncation edge
    assert np.allclose(np.diag(comm)[:-1], 1.0)


def test_spin_ops_algebra():
    S = spin_ops()
    assert np.allclose(S["x"] @ S["y"] - S["y"] @ S["x"], 1j * S["z"])
    assert np.allclose(S["+"], S["x"] + 1j * S["y"])
    assert np.allclose(S["x"] @ S["x"], 0.25 * np.eye(2))


def test_suggest_nmax():
    assert suggest_nmax(1.0, gamma=20.0) == 1      # hard-core limit
    assert suggest_nmax(1.0, gamma=1.0) == 4       # intermediate coupling
    assert suggest_nmax(5.0) == 12                 # Poisson tail at n_bar = 5
    assert suggest_nmax(2.0) >= suggest_nmax(1.0)


# ---------------------------------------------------------------------------
# exponential-sum fits


class TestExpSum:
    def test_reference_fit_quality(self):
        fit = fit_exp_sum(1.7, 50, 6)
        assert fit.converged
        assert fit.max_rel_error <= 0.02
        assert fit.M == 6 and len(fit.a) == 6 and len(fit.b) == 6
        assert all(0.0 < b < 1.0 for b in fit.b)

    def test_pure_exponential_is_exact(self):
        R = np.arange(1, 51, dtype=float)
        fit = fit_exp_sum(1.0, 50, 1, target=0.5 ** R)
        assert fit.max_rel_error <= 1e-10
        assert abs(fit.b[0] - 0.5) < 1e-8

    def test_error_non_increasing_in_m(self):
        errs = [fit_exp_sum(1.7, 50, M).max_rel_error for M in range(2, 9)]
        assert all(e2 <= e1 for e1, e2 in zip(errs, errs[1:]))

    def test_deterministic_given_seed(self):
        f1 = fit_exp_sum(2.1, 40, 4, seed=3)
        f2 = fit_exp_sum(2.1, 40, 4, seed=3)
        assert f1.a == f2.a and f1.b == f2.b

    def test_metrics_reproducible(self):
        fit = fit_exp_sum(2.5, 30, 3)
        R = np.arange(1, 31, dtype=float)
        f = R ** -2.5
        rel = np.abs(f - fit.evaluate(R)) / f
        assert abs(rel.max() - fit.max_rel_error) <= 1e-12 * max(1.0, fit.max_rel_error)
        assert abs(np.abs(f - fit.evaluate(R)).sum() - fit.sum_abs_error) <= 1e-12

    @given(
        alpha=st.floats(0.5, 4.0),
        L=st.integers(6, 24),
        M=st.integers(1, 3),
        seed=st.integers(0, 2 ** 16),
    )
    @settings(max_examples=100, deadline=None,
              suppress_health_check=[HealthCheck.too_slow])
    def test_metrics_reproducible_property(self, alpha, L, M, seed):
        try:
            fit = fit_exp_sum(alpha, L, M, seed=seed, max_iter=60)
        except FitConvergenceError as err:
            fit = err.best
        R = np.arange(1, L + 1, dtype=float)
        f = R ** -alpha
        resid = np.abs(f - fit.evaluate(R))
        assert np.isclose((resid / f).max(), fit.max_rel_error, rtol=1e-12, atol=1e-15)
        assert np.isclose(resid.sum(), fit.sum_abs_error, rtol=1e-12, atol=1e-15)

    def test_select_m(self):
        fit = select_exp_sum_m(1.7, 50, target_rel=0.01)
        assert fit.max_rel_error <= 0.01
        assert fit.M <= 6

    def test_validation(self):
        with pytest.raises(ValueError):
            fit_exp_sum(1.7, 50, 0)
        with pytest.raises(ValueError):
            fit_exp_sum(1.7, 3, 5)
        with pytest.raises(ValueError):
            fit_exp_sum(1.7, 5, 2, target=np.ones(4))

    def test_json_round_trip(self):
        fit = fit_exp_sum(2.5, 30, 3)
        assert ExpSumFit.from_json(fit.to_json()) == fit

    def test_rate_bounds_enforced(self):
        with pytest.raises(ValueError):
            ExpSumFit(alpha=2.0, L=10, M=1, a=(1.0,), b=(1.5,),
                      max_rel_error=0.0, sum_abs_error=0.0)


# ---------------------------------------------------------------------------
# MPO construction


CHI_TILDE = {"SRBH": 4, "SRTI": 3, "SRH": 5}


def small_model(family, L, alpha=None, n_max=None):
    kw = dict(family=family, L=L, J=0.8)
    if family == "SRBH":
        kw.update(U=2.3, n_max=n_max or 2)
    elif family in ("SRTI", "LRTI"):
        kw.update(h=1.1)
    if family in ("LRTI", "LRXY", "LRXXZ"):
        kw.update(alpha=alpha or 2.1)
    if family == "LRXXZ":
        kw.update(epsilon=0.4)
    return ModelSpec(**kw)


@pytest.mark.parametrize("family", FAMILIES)
def test_mpo_matches_dense_oracle(family, fit_cache):
    m = small_model(family, L=5)
    fit = fit_cache(2.1) if family in ("LRTI", "LRXY", "LRXXZ") else None
    H_mpo = mpo_to_dense(build_mpo(m, fit))
    H_ref = dense_hamiltonian(m, fit)
    assert np.abs(H_mpo - H_ref).max() < 1e-12


@pytest.mark.parametrize("family,m_terms,chi", [
    ("LRTI", 6, 8), ("LRXY", 6, 14), ("LRXXZ", 6, 20),
])
def test_long_range_bond_dimension(family, m_terms, chi):
    fit = fit_exp_sum(2.1, 12, m_terms)
    m = small_model(family, L=6)
    assert build_mpo(m, fit).chi_tilde == chi


@pytest.mark.parametrize("family", ["SRBH", "SRTI", "SRH"])
def test_short_range_bond_dimension(family):
    m = small_model(family, L=5)
    assert build_mpo(m).chi_tilde == CHI_TILDE[family]


def test_srbh_mpo_independent_of_fit(fit_cache):
    m = small_model("SRBH", L=4)
    plain = build_mpo(m)
    with_fit = build_mpo(m, fit_cache(2.1))
    for t1, t2 in zip(plain.tensors, with_fit.tensors):
        assert np.array_equal(t1, t2)


def test_mpo_errors(fit_cache):
    with pytest.raises(ValueError):
        build_mpo(small_model("LRTI", L=5))             # fit missing
    with pytest.raises(ValueError):
        build_mpo(ModelSpec(family="SRBH", L=4, U=1.0))  # n_max missing
    bad_alpha = fit_exp_sum(3.0, 8, 2)
    with pytest.raises(ValueError):
        build_mpo(small_model("LRTI", L=5), bad_alpha)   # alpha mismatch
    short = fit_exp_sum(2.1, 3, 2)
    with pytest.raises(ValueError):
        build_mpo(small_model("LRTI", L=6), short)       # range too short
    periodic = ModelSpec(family="SRTI", L=6, h=1.0, boundary="periodic")
    with pytest.raises(ValueError):
        build_mpo(periodic)


def test_dense_dimension_cap():
    m = ModelSpec(family="SRTI", L=20, J=1.0, h=1.0)
    with pytest.raises(DimensionCapError):
        mpo_to_dense(build_mpo(m))


def test_mpo_json_round_trip(fit_cache):
    mpo = build_mpo(small_model("LRXXZ", L=4), fit_cache(2.1))
    back = MPO.from_json(mpo.to_json())
    assert back.L == mpo.L and back.chi_tilde == mpo.chi_tilde
    for t1, t2 in zip(back.tensors, mpo.tensors):
        assert np.allclose(t1, t2, atol=0.0)


def test_array_json_round_trip():
    arr = np.arange(12.0).reshape(3, 4) + 1j * np.ones((3, 4))
    assert np.array_equal(array_from_json(array_to_json(arr)), arr)
    real = np.arange(6.0).reshape(2, 3)
    back = array_from_json(array_to_json(real))
    assert back.dtype.kind == "f" and np.array_equal(back, real)


# randomized Hermiticity / oracle agreement across every family; bose
# chains keep (n_max + 1)^L small enough for the dense compare
@st.composite
def mpo_cases(draw):
    family = draw(st.sampled_from(FAMILIES))
    if family == "SRBH":
        n_max = draw(st.integers(1, 3))
        L = draw(st.integers(2, {1: 6, 2: 5, 3: 4}[n_max]))
        return small_model(family, L=L, n_max=n_max), None
    L = draw(st.integers(2, 6))
    alpha = draw(st.sampled_from([1.5, 2.1, 3.0]))
    return small_model(family, L=L, alpha=alpha), alpha


@given(case=mpo_cases())
@settings(max_examples=120, deadline=None,
          suppress_health_check=[HealthCheck.too_slow])
def test_mpo_hermitian_and_faithful_property(case, fit_cache):
    model, alpha = case
    fit = fit_cache(alpha) if alpha is not None else None
    H = mpo_to_dense(build_mpo(model, fit))
    assert np.abs(H - H.conj().T).max() < 1e-12
    assert np.abs(H - dense_hamiltonian(model, fit)).max() < 1e-12
