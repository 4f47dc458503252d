import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from orthomult.canonical import GRAND, classify, extract_invariants
from orthomult.explorer import (
    COMPONENTS,
    ProbeConfig,
    chart_map,
    existence_probe,
    gradient_check,
    jacobian_rank,
    penalty,
    penalty_gradient,
    rng_for,
    sample,
)
from orthomult.hurwitz import InputError, PreconditionError, gram_from_system, hurwitz_residuals, verify_hurwitz
from orthomult.moduli import (
    AnomalousPoint,
    GrandPoint,
    T347Point,
    anomalous_construct,
    extension_construct,
    extension_solve,
    grand_construct,
    quaternion_construct,
    t347_construct,
)


# ---- sampling --------------------------------------------------------------------

def test_sample_grand_classifies():
    out = sample("Grand", 10, seed=42)
    assert len(out) == 10
    assert all(classify(H).tag == GRAND for _, H in out)


def test_sample_anomalous_diagonal():
    for _, H in sample("Anomalous", 10, seed=7):
        inv = extract_invariants(H)
        assert max(abs(inv.beta), abs(inv.a1421), abs(inv.a1422)) <= 1e-10


@pytest.mark.parametrize("component", COMPONENTS)
def test_sample_deterministic_and_valid(component):
    a = sample(component, 25, seed=3)
    b = sample(component, 25, seed=3)
    assert [P for P, _ in a] == [P for P, _ in b]
    assert all(np.array_equal(x.matrices, y.matrices) for (_, x), (_, y) in zip(a, b))
    assert all(verify_hurwitz(H, 1e-9).passed for _, H in a)


def test_sample_errors():
    with pytest.raises(InputError):
        sample("Grand", 0)
    with pytest.raises(InputError):
        sample("octonion", 3)


def test_grand_samples_fill_body():
    pts = [P for P, _ in sample("Grand", 400, seed=5)]
    assert all(P.beta_squared >= 0 for P in pts)
    # draws reach near the boundary of the admissible ball, not only its core
    assert min(P.beta_squared / ((1 - P.alpha ** 2) * (1 - P.mu ** 2)) for P in pts) < 0.05


def test_streams_are_independent():
    x = rng_for(9, 0).standard_normal(4)
    y = rng_for(9, 1).standard_normal(4)
    assert not np.allclose(x, y)
    np.testing.assert_array_equal(x, rng_for(9, 0).standard_normal(4))


# ---- Jacobian rank ---------------------------------------------------------------

def _rank_points():
    return {
        "Grand": [GrandPoint(0.3, 0.2, 0.1, 0.05, 0.05)] + [P for P, _ in sample("Grand", 2, seed=21)],
        "Anomalous": [P for P, _ in sample("Anomalous", 3, seed=21)],
        "T347": [T347Point(0.3), T347Point(-0.55, -1, 1), T347Point(0.1, 1, -1)],
        "Extension": [P for P, _ in sample("Extension", 3, seed=21)],
    }


EXPECTED_RANK = {"Grand": 5, "Anomalous": 3, "T347": 1, "Extension": 9}


@pytest.mark.parametrize("component", list(EXPECTED_RANK))
def test_jacobian_rank_stable(component):
    for P in _rank_points()[component]:
        try:
            ranks = {jacobian_rank(component, P, step=h) for h in (1e-4, 1e-5, 1e-6)}
        except PreconditionError:
            continue
        assert ranks == {EXPECTED_RANK[component]}


def test_jacobian_rank_named_grand_point():
    assert jacobian_rank("Grand", GrandPoint(0.3, 0.2, 0.1, 0.05, 0.05)) == 5


def test_jacobian_rank_boundary_guard():
    with pytest.raises(PreconditionError, match="boundary proximity"):
        jacobian_rank("T347", T347Point(1 - 1e-6))
    with pytest.raises(InputError, match="inconsistent"):
        jacobian_rank("Anomalous", AnomalousPoint(0.0, np.pi / 2, np.pi / 2, np.pi / 2))


def test_chart_map_base_point_matches_construction():
    P = GrandPoint(0.3, 0.2, 0.1, 0.05, 0.05)
    x0, f, margin = chart_map("Grand", P)
    np.testing.assert_allclose(f(x0), gram_from_system(grand_construct(P)).entries.ravel(), atol=1e-15)
    assert margin > 0


# ---- penalty ---------------------------------------------------------------------

def naive_penalty(F):
    total = 0.0
    m = F.shape[0]
    for a in range(m):
        for b in range(m):
            E = F[a] @ F[b].T + F[b] @ F[a].T - (2 * np.eye(F.shape[1]) if a == b else 0)
            total += 0.5 * np.sum(E ** 2)
    return total


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_penalty_matches_loop(seed):
    F = np.random.default_rng(seed).standard_normal((3, 4, 6))
    assert abs(penalty(F) - naive_penalty(F)) <= 1e-10 * max(1.0, naive_penalty(F))


def test_gradient_check_type_348():
    assert gradient_check(ProbeConfig(3, 4, 8), trials=20, step=1e-6) <= 1e-5


def test_gradient_check_with_floor():
    assert gradient_check(ProbeConfig(3, 4, 6, fullness_floor=2.0), trials=5, step=1e-6) <= 1e-5


def test_gradient_zero_at_exact_system():
    F = grand_construct(GrandPoint(0.3, 0.2)).matrices
    assert np.linalg.norm(penalty_gradient(F)) <= 1e-10


def test_gradient_scaling():
    F = rng_for(4, 0).standard_normal((3, 4, 8))
    P = np.einsum("anp,bkp->abnk", F, F)
    cubic = 4 * np.einsum("abnk,bkp->anp", P + P.transpose(1, 0, 2, 3), F)
    linear = -8 * F
    np.testing.assert_allclose(penalty_gradient(F), cubic + linear, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(penalty_gradient(2 * F), 8 * cubic + 2 * linear, rtol=1e-12, atol=1e-10)


# ---- probe -----------------------------------------------------------------------

def test_probe_config_validation():
    with pytest.raises(InputError):
        ProbeConfig(3, 4, 13)
    with pytest.raises(InputError):
        ProbeConfig(3, 4, 5, restarts=0)
    with pytest.raises(InputError):
        ProbeConfig(3, 4, 5, seed=-1)
    with pytest.raises(InputError):
        ProbeConfig(4, 3, 5)


@pytest.mark.parametrize("p", [4, 7])
def test_probe_feasible_types(p):
    res = existence_probe(ProbeConfig(3, 4, p, restarts=30, seed=1))
    assert res.feasible and res.best_residual <= 1e-6
    assert res.best_residual == min(res.per_restart)
    assert verify_hurwitz(res.best_system, 1e-6).passed


def test_probe_infeasible_small():
    res = existence_probe(ProbeConfig(3, 4, 5, restarts=10, seed=1))
    assert not res.feasible and res.best_residual >= 1e-2


def test_probe_deterministic():
    cfg = ProbeConfig(3, 4, 5, restarts=4, max_iters=300, seed=17)
    a, b = existence_probe(cfg), existence_probe(cfg)
    assert a.per_restart == b.per_restart
    assert np.array_equal(a.best_system.matrices, b.best_system.matrices)


def _compress(H):
    """Express the system in an orthonormal basis of its range."""
    X = H.rows()
    U, s, Vt = np.linalg.svd(X, full_matrices=False)
    k = int(np.sum(s > 1e-9))
    return (X @ Vt[:k].T).reshape(H.m, H.n, k)


def _witnesses():
    yield 4, quaternion_construct()
    yield 7, t347_construct(T347Point(0.3))
    yield 8, grand_construct(GrandPoint(0.3, 0.2, 0.1, 0.05, 0.05))
    yield 8, anomalous_construct(AnomalousPoint(0.7, 0.4, 1.1, np.pi - 2.2))
    yield 9, extension_construct(extension_solve("N3", alpha=0.05, gamma=0.03))
    yield 10, extension_construct(extension_solve("N2", alpha=0.5, nu=0.6))
    yield 11, extension_construct(extension_solve("N1", alpha=0.9, eps=-1.02))
    yield 12, sample("Extension", 1, seed=2)[0][1]


@pytest.mark.parametrize("p,H", list(_witnesses()))
def test_probe_warm_start(p, H):
    W = _compress(H)
    assert W.shape[2] == p
    res = existence_probe(ProbeConfig(3, 4, p, restarts=1, max_iters=50, polish_iters=5, fullness_floor=0.0), warm_start=W)
    assert res.best_residual <= 1e-8


def test_warm_start_shape_check():
    with pytest.raises(InputError):
        existence_probe(ProbeConfig(3, 4, 5, restarts=1), warm_start=np.zeros((3, 4, 6)))


def test_best_residual_consistent_with_residuals():
    res = existence_probe(ProbeConfig(3, 4, 4, restarts=3, seed=2, fullness_floor=0.0))
    E = hurwitz_residuals(res.best_system.matrices)
    assert abs(np.sqrt(0.5 * np.sum(E ** 2)) - res.best_residual) <= 1e-12
