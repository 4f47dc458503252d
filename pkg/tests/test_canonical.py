import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import rand_orth
from orthomult.canonical import (
    ANOMALOUS,
    GRAND,
    INTERSECTION,
    QUATERNION,
    T347,
    EXTENDED,
    bin_move,
    boundary_identify,
    boundary_orbit,
    canonical_chart,
    canonicalize,
    chart_violation,
    check_rigid_range,
    classify,
    complement_twist,
    dual_move,
    extract_invariants,
    invariants_from_parker,
    parker_from_invariants,
    rigidity_twist,
)
from orthomult.hurwitz import (
    InputError,
    PreconditionError,
    domain_transform,
    gram_from_system,
    range_transform,
    verify_hurwitz,
)
from orthomult.moduli import (
    AnomalousPoint,
    GrandPoint,
    T347Point,
    anomalous_construct,
    extension_construct,
    grand_construct,
    quaternion_construct,
    t347_construct,
)
from orthomult.parker import normalize_system, parker_of_system


def eq14_residual(w):
    """beta^2 against the unit-row-norm identity of the grand chart."""
    rhs = (1 - w.mu ** 2) * (1 - w.alpha ** 2) - (w.a1122 + w.alpha * w.mu) ** 2 - w.a1421 ** 2 - w.a1422 ** 2
    return abs(w.beta ** 2 - rhs)


def chart_of(H):
    Hn, _ = normalize_system(H)
    return canonicalize(Hn)


def moved(H, word):
    """Apply bin (0) / dual (1) moves left to right, then re-chart."""
    R, S = np.eye(3), np.eye(4)
    gens = (bin_move(), dual_move())
    for g in word:
        R, S = gens[g][0] @ R, gens[g][1] @ S
    return chart_of(domain_transform(H, R, S))


# ---- chart -----------------------------------------------------------------------

def test_canonical_fixed_point(grand_basic):
    out = canonicalize(grand_basic)
    np.testing.assert_allclose(out.matrices, grand_basic.matrices, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_rotated_grand_chart(seed):
    H = grand_construct(GrandPoint(0.4, -0.3, 0.1, 0.2, 0.05))
    Hr = range_transform(H, rand_orth(8, seed))
    out = canonicalize(Hr)
    third = np.hstack([np.zeros((4, 4)), np.eye(4)])
    np.testing.assert_allclose(out[2], third, atol=1e-12)
    assert chart_violation(out) <= 1e-10
    np.testing.assert_allclose(out.matrices, H.matrices, atol=1e-10)


def test_quaternion_chart_degenerate():
    Hn, _ = normalize_system(quaternion_construct())
    ch = canonical_chart(Hn)
    assert ch.degenerate and ch.missing == (0, 1, 2, 3)
    assert ch.system.p == 8
    np.testing.assert_allclose(ch.system[2], np.hstack([np.zeros((4, 4)), np.eye(4)]), atol=1e-12)
    assert np.abs(ch.system.matrices[:, :, :4]).max() <= 1e-12


def test_chart_requires_normal_form(grand_basic):
    H = domain_transform(grand_basic, rand_orth(3, 1, True), rand_orth(4, 2, True))
    with pytest.raises(PreconditionError):
        canonicalize(H)


def test_extension_chart_width():
    ch = canonical_chart(normalize_system(extension_construct(_generic_extension()))[0])
    assert ch.system.p == 12 and ch.extension_slots
    assert chart_violation(ch.system) <= 1e-9


def _generic_extension():
    from orthomult.explorer import sample
    return sample("Extension", 1, seed=4)[0][0]


# ---- invariants ------------------------------------------------------------------

def test_extract_grand_round_trip():
    inv = extract_invariants(grand_construct(GrandPoint(0.3, 0.2, 0.1, 0.0, 0.05)))
    got = (inv.alpha, inv.mu, inv.a1421, inv.a1422, inv.a1122)
    np.testing.assert_allclose(got, (0.3, 0.2, 0.1, 0.0, 0.05), atol=1e-10)
    assert abs(inv.gamma - 0.3) <= 1e-10 and abs(inv.nu + 0.2) <= 1e-10
    assert set(inv.extras) == {"F12,21", "F11,23", "F11,24", "F12,23", "F12,24", "F13,21", "F13,22", "F13,24"}


def test_extract_anomalous_diagonal():
    P = AnomalousPoint(np.pi / 2, np.pi / 2, np.pi / 3, 2 * np.pi / 3)
    inv = extract_invariants(anomalous_construct(P))
    assert max(abs(inv.beta), abs(inv.a1421), abs(inv.a1422)) <= 1e-12


def test_extract_t347():
    inv = extract_invariants(t347_construct(T347Point(0.5)))
    assert abs(inv.mu ** 2 - 1) <= 1e-10
    assert abs(inv.gamma ** 2 - 1) <= 1e-10
    assert abs(inv.alpha ** 2 - 0.25) <= 1e-10
    assert inv.sigma1 == 0.0


def test_extract_rejects_off_chart(grand_basic):
    with pytest.raises(PreconditionError):
        extract_invariants(range_transform(grand_basic, rand_orth(8, 3)))


def test_parker_invariant_inverse():
    inv = extract_invariants(grand_construct(GrandPoint(0.3, 0.2, 0.1, -0.15, 0.05)))
    C = parker_of_system(grand_construct(GrandPoint(0.3, 0.2, 0.1, -0.15, 0.05))).C
    np.testing.assert_allclose(parker_from_invariants(inv), C, atol=1e-14)
    back = invariants_from_parker(C)
    np.testing.assert_allclose(back.as_tuple(), inv.as_tuple(), atol=1e-14)


# ---- classify --------------------------------------------------------------------

def test_classify_grand_samples():
    from orthomult.explorer import sample
    for P, H in sample("Grand", 10, seed=7):
        tag = classify(H).tag
        assert tag in (GRAND, INTERSECTION)


def test_classify_intersection():
    P = AnomalousPoint(np.pi / 4, np.pi / 4, np.pi / 3, 2 * np.pi / 3)
    assert classify(anomalous_construct(P)).tag == INTERSECTION


def test_classify_anomalous_generic():
    ang = (0.7, 0.4, 1.1, np.pi - 2.2)
    H = anomalous_construct(AnomalousPoint(*ang))
    c = classify(H)
    assert c.tag == ANOMALOUS and c.tag != GRAND


def test_classify_quaternion_t347_extended():
    assert classify(quaternion_construct()).tag == QUATERNION
    assert classify(t347_construct(T347Point(0.3))).tag == T347
    assert classify(extension_construct(_generic_extension())).tag == EXTENDED


def test_classify_invalid_is_unclassified(grand_basic):
    F = grand_basic.matrices.copy()
    F[0, 0, 0] += 0.2
    c = classify(F)
    assert c.tag == "Unclassified" and "not an orthogonal" in c.notes


def test_grand_law_under_domain_and_range_moves():
    from orthomult.explorer import sample
    for k, (P, H) in enumerate(sample("Grand", 30, seed=11)):
        H2 = range_transform(domain_transform(H, rand_orth(3, k, True), rand_orth(4, k + 50, True)), rand_orth(8, k))
        c = classify(H2)
        assert c.tag in (GRAND, INTERSECTION)
        w = c.witness
        assert abs(w.alpha - w.gamma) <= 1e-8 and abs(w.mu + w.nu) <= 1e-8
        assert eq14_residual(w) <= 1e-8


# ---- boundary identification -----------------------------------------------------

def _one_nonzero(kind, a, mu, x):
    """Grand point with exactly one of beta, a1421, a1422 nonzero."""
    s = np.sqrt((1 - a * a) * (1 - mu * mu))
    a1122 = x * s - a * mu
    r = np.sqrt(s * s - (a1122 + a * mu) ** 2) * (1 + 1e-14)   # beta^2 <= 0 exactly
    if kind == "beta":
        return GrandPoint(a, mu, 0.0, 0.0, a1122)
    if kind == "a1421":
        return GrandPoint(a, mu, r, 0.0, a1122)
    return GrandPoint(a, mu, 0.0, r, a1122)


_PARTNER_WORD = {"beta": (0,), "a1421": (0,), "a1422": (1, 0)}


@pytest.mark.parametrize("kind", ["beta", "a1421", "a1422"])
def test_boundary_partner_coincide(kind):
    H = grand_construct(_one_nonzero(kind, 0.25, -0.4, 0.3))
    inv = extract_invariants(H)
    img = extract_invariants(moved(H, _PARTNER_WORD[kind]))
    assert (abs(inv.beta) > 1e-6) != (abs(img.beta) > 1e-6)
    np.testing.assert_allclose(boundary_identify(inv).as_tuple(), boundary_identify(img).as_tuple(), atol=1e-8)


def test_bin_dictionary():
    inv = extract_invariants(grand_construct(_one_nonzero("a1421", 0.2, 0.35, -0.2)))
    img = extract_invariants(moved(grand_construct(_one_nonzero("a1421", 0.2, 0.35, -0.2)), (0,)))
    expect = dict(mu=-inv.mu, nu=-inv.nu, beta=inv.a1421, alpha=inv.a1423, gamma=inv.a1122,
                  a1122=-inv.gamma, a1423=-inv.alpha)
    for k, v in expect.items():
        assert abs(getattr(img, k) - v) <= 1e-10, k


def test_boundary_fixed_point_and_idempotent():
    inv = extract_invariants(grand_construct(GrandPoint(0.3, 0.2, 0.1, -0.15, 0.05)))
    rep = boundary_identify(inv)
    assert len({round(rep.beta, 9), round(rep.a1421, 9), round(rep.a1422, 9)}) == 3
    again = boundary_identify(rep)
    np.testing.assert_allclose(again.as_tuple(), rep.as_tuple(), atol=0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-0.8, 0.8), st.floats(-0.8, 0.8), st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(-0.3, 0.3))
def test_boundary_preserves_parker_singular_values(a, mu, u, v, w):
    r = np.sqrt((1 - a * a) * (1 - mu * mu))
    P = GrandPoint(a, mu, u * r * 0.5, v * r * 0.5, w * r - a * mu)
    if P.beta_squared < 0:
        return
    inv = extract_invariants(grand_construct(P))
    rep = boundary_identify(inv)
    C0, C1 = parker_from_invariants(inv), parker_from_invariants(rep)
    for blk in (slice(0, 3), slice(3, 6)):
        np.testing.assert_allclose(np.linalg.svd(C0[:, blk], compute_uv=False),
                                   np.linalg.svd(C1[:, blk], compute_uv=False), atol=1e-9)
    assert len(boundary_orbit(inv)) >= 1
    np.testing.assert_allclose(boundary_identify(rep).as_tuple(), rep.as_tuple(), atol=1e-12)


# ---- rigid range -----------------------------------------------------------------

def _grand_with_ratio(lam, alpha=0.3, extras=(0.05, 0.02, 0.1)):
    mu = lam / np.sqrt(1 + lam ** 2)   # |mu| / sigma = lam
    return grand_construct(GrandPoint(alpha, mu, *extras))


def test_rigidity_twist_examples():
    lam = 0.5
    H = _grand_with_ratio(lam)
    T = rigidity_twist(H, scale=lam)
    assert np.abs(T[1] - H[1]).max() <= 1e-10
    C = T[2][:, :4]
    assert np.abs(C).max() >= lam * (1 - lam ** 2) / (1 + lam ** 2) - 1e-12
    np.testing.assert_allclose(gram_from_system(T).entries, gram_from_system(H).entries, atol=1e-12)
    assert abs(verify_hurwitz(T).max_abs - verify_hurwitz(H).max_abs) <= 1e-10


def test_rigid_check_cases():
    H = _grand_with_ratio(0.5)
    assert check_rigid_range(H)
    assert not check_rigid_range(rigidity_twist(H))


def test_rigid_check_anomalous_complement_twist():
    P = AnomalousPoint(0.7, 0.4, 1.1, np.pi - 2.2)
    H = anomalous_construct(P)
    assert abs(P.alpha) > 0
    T = complement_twist(H)
    np.testing.assert_allclose(T[1], H[1], atol=1e-12)
    assert verify_hurwitz(T).passed
    assert not check_rigid_range(T)


def test_twist_errors(grand_basic):
    with pytest.raises(PreconditionError, match="twist undefined"):
        rigidity_twist(grand_construct(GrandPoint(0.3, 0.0)))
    with pytest.raises(InputError):
        rigidity_twist(grand_basic, scale=0.9)
    with pytest.raises(InputError, match="unsupported"):
        check_rigid_range(extension_construct(_generic_extension()))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.9), st.floats(-0.8, 0.8))
def test_twist_preserves_residual(lam, alpha):
    mu = lam / np.sqrt(1 + lam ** 2)
    H = _grand_with_ratio(lam, alpha, (0.0, 0.0, -alpha * mu))
    T = rigidity_twist(H)
    assert abs(verify_hurwitz(T).max_abs - verify_hurwitz(H).max_abs) <= 1e-10
