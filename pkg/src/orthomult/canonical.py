"""Anchor chart for [3,4,p] systems, invariant extraction, classification and symmetry moves.

Chart layout (zero-based matrices, ``w`` = 8 or 12 columns, last eight are the
core coordinates u1..u8, optional first four the extension directions):

* matrix 2 is ``(0 | I)``,
* matrix 1 is ``(0 | c1 | w1)`` with ``c1 = diag(s1, s2, s2, s1)`` and ``w1``
  anti-diagonal,
* matrix 0 is ``(eps | c2 | w2)`` with ``eps`` lower triangular.

All invariants are Gram entries, so they are range independent and can also
be read straight off the Parker normal form.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.linalg import null_space

from .hurwitz import (
    DEFAULT_RANK_TOL,
    DEFAULT_TOL,
    GramTensor,
    HurwitzSystem,
    InputError,
    NumericalError,
    PreconditionError,
    domain_transform,
    gram_from_system,
    range_dimension,
    verify_hurwitz,
)
from .parker import (
    _COLS,
    _ROWS,
    ParkerMatrix,
    gram_from_parker,
    normalize_system,
    parker_of_system,
    pattern_violation,
    quat_right,
)

MEMBERSHIP_TOL = 1e-7

GRAND = "Grand"
ANOMALOUS = "Anomalous"
INTERSECTION = "Intersection"
T347 = "T347"
QUATERNION = "Quaternion"
EXTENDED = "Extended"
UNCLASSIFIED = "Unclassified"
TAGS = (GRAND, ANOMALOUS, INTERSECTION, T347, QUATERNION, EXTENDED, UNCLASSIFIED)

# one-based Gram entries (i, j, k, l) for F_{ij,kl}
INVARIANT_ENTRIES = {
    "mu": (2, 4, 3, 1),
    "nu": (2, 3, 3, 2),
    "alpha": (3, 1, 1, 3),
    "beta": (3, 1, 1, 4),
    "gamma": (3, 2, 1, 4),
    "a1421": (1, 4, 2, 1),
    "a1422": (1, 4, 2, 2),
    "a1122": (1, 1, 2, 2),
    "a1423": (1, 4, 2, 3),
}
EXTRA_ENTRIES = ((1, 2, 2, 1), (1, 1, 2, 3), (1, 1, 2, 4), (1, 2, 2, 3),
                 (1, 2, 2, 4), (1, 3, 2, 1), (1, 3, 2, 2), (1, 3, 2, 4))
TUPLE_ORDER = ("alpha", "beta", "gamma", "mu", "nu", "a1421", "a1422", "a1122", "a1423")


def _extra_name(ijkl) -> str:
    i, j, k, l = ijkl
    return f"F{i}{j},{k}{l}"


def _root(x: float) -> float:
    return float(np.sqrt(max(x, 0.0)))


@dataclass(frozen=True)
class CanonicalInvariants:
    """Chart invariants; sigma1, sigma2 are always the nonnegative roots."""

    alpha: float
    beta: float
    gamma: float
    mu: float
    nu: float
    sigma1: float
    sigma2: float
    a1421: float
    a1422: float
    a1122: float
    a1423: float
    extras: dict = field(default_factory=dict, compare=False)

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, k) for k in TUPLE_ORDER)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in TUPLE_ORDER}
        d["sigma1"] = self.sigma1
        d["sigma2"] = self.sigma2
        d["extras"] = dict(self.extras)
        return d


@dataclass(frozen=True)
class ModuliClass:
    tag: str
    witness: Optional[CanonicalInvariants]
    notes: str = ""

    def to_dict(self) -> dict:
        return {"tag": self.tag, "witness": None if self.witness is None else self.witness.to_dict(),
                "notes": self.notes}


@dataclass(frozen=True)
class CanonicalChart:
    """Output of the chart construction.

    ``missing`` lists core slots (0..3) that the second matrix did not reach,
    ``extension_slots`` the extension columns that were filled.
    """

    system: HurwitzSystem
    degenerate: bool
    missing: tuple
    extension_slots: tuple
    reconstruction_error: float


# ---- chart construction ----------------------------------------------------------

def _check_type(H: HurwitzSystem):
    if (H.m, H.n) != (3, 4):
        raise InputError(f"expected a [3,4,p] system, got m={H.m}, n={H.n}")


def canonical_chart(H: HurwitzSystem, tol: float = DEFAULT_TOL) -> CanonicalChart:
    """Build the anchor-chart range basis for a system already in Parker normal form."""
    H = H if isinstance(H, HurwitzSystem) else HurwitzSystem(H)
    _check_type(H)
    C = parker_of_system(H).C
    viol = pattern_violation(C)
    if viol > max(tol, 1e-9) * 10:
        raise PreconditionError(f"Parker matrix is not in normal form (violation {viol:.3e}); normalize first")
    F = H.matrices
    p = H.p
    basis = []                      # orthonormal vectors accepted so far

    def residual(v):
        for u in basis:
            v = v - (v @ u) * u
        return v

    core = [None] * 8
    for c in range(4):
        core[4 + c] = F[2, c]
        basis.append(F[2, c])
    missing = []
    for b in range(4):
        r = residual(F[1, b])
        nr = np.linalg.norm(r)
        if nr > tol:
            core[b] = r / nr
            basis.append(core[b])
        else:
            missing.append(b)
    ext = [None] * 4
    pending = list(missing)
    for b in range(4):
        r = residual(F[0, b])
        nr = np.linalg.norm(r)
        if nr <= tol:
            continue
        u = r / nr
        if pending:
            # the partner slot first: the anomalous chart pairs rows (0,1) and (2,3)
            slot = (b ^ 1) if (b ^ 1) in pending else pending[0]
            pending.remove(slot)
            core[slot] = u
        else:
            ext[b] = u
        basis.append(u)
    width = 12 if any(e is not None for e in ext) else 8
    rows = ([e if e is not None else np.zeros(p) for e in ext] if width == 12 else [])
    rows += [c if c is not None else np.zeros(p) for c in core]
    U = np.array(rows)
    out = F @ U.T
    err = float(np.abs(out @ U - F).max())
    if err > max(tol, 1e-9) * 100:
        raise NumericalError(f"chart reconstruction failed (error {err:.3e})")
    return CanonicalChart(HurwitzSystem(out), bool(missing), tuple(missing),
                          tuple(i for i, e in enumerate(ext) if e is not None), err)


def canonicalize(H: HurwitzSystem, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """Range-transform H into the anchor chart (Parker normal form required)."""
    return canonical_chart(H, tol).system


_W1_MASK = np.fliplr(np.eye(4, dtype=bool))
_W2_MASK = np.array([[0, 0, 1, 1], [0, 0, 1, 1], [1, 1, 0, 0], [1, 1, 0, 0]], dtype=bool)


def chart_violation(H: HurwitzSystem) -> float:
    """Largest entry that the anchor chart requires to be zero (or to equal the identity)."""
    H = H if isinstance(H, HurwitzSystem) else HurwitzSystem(H)
    _check_type(H)
    if H.p not in (8, 12):
        raise PreconditionError(f"chart width must be 8 or 12, got {H.p}")
    F = H.matrices
    off = H.p - 8
    third = np.zeros((4, H.p))
    third[:, -4:] = np.eye(4)
    parts = [np.abs(F[2] - third).ravel()]
    c1, w1 = F[1, :, off:off + 4], F[1, :, off + 4:]
    parts.append(np.abs(F[1, :, :off]).ravel())
    parts.append(np.abs(c1[~np.eye(4, dtype=bool)]))
    parts.append(np.abs(w1[~_W1_MASK]))
    w2 = F[0, :, off + 4:]
    parts.append(np.abs(w2[~_W2_MASK]))
    if off:
        parts.append(np.abs(F[0, :, :off][np.triu_indices(4, 1)]))
    return float(max(np.max(x) if x.size else 0.0 for x in parts))


# ---- invariants ------------------------------------------------------------------

def _from_gram(G: GramTensor) -> CanonicalInvariants:
    vals = {k: G.entry(*ijkl) for k, ijkl in INVARIANT_ENTRIES.items()}
    extras = {_extra_name(x): G.entry(*x) for x in EXTRA_ENTRIES}
    return CanonicalInvariants(sigma1=_root(1 - vals["mu"] ** 2), sigma2=_root(1 - vals["nu"] ** 2),
                               extras=extras, **vals)


def check_invariants(inv: CanonicalInvariants, tol: float = 1e-8) -> list[str]:
    """Names of the structural invariants that fail (empty when all hold)."""
    bad = []
    for k in ("alpha", "beta", "gamma", "mu", "nu"):
        if abs(getattr(inv, k)) > 1 + tol:
            bad.append(f"|{k}| <= 1")
    if abs(inv.beta) > tol and (abs(inv.mu) >= 1 or abs(inv.nu) >= 1):
        bad.append("beta != 0 forces |mu|, |nu| < 1")
    if inv.sigma1 <= tol:
        if max(abs(inv.beta), abs(inv.a1421), abs(inv.a1422)) > 10 * tol:
            bad.append("sigma1 = 0 forces beta = a1421 = a1422 = 0")
        if abs(inv.a1122 + inv.gamma * inv.mu) > 10 * tol or abs(inv.a1423 + inv.alpha * inv.mu) > 10 * tol:
            bad.append("sigma1 = 0 forces a1122 = -gamma mu, a1423 = -alpha mu")
    return bad


def extract_invariants(H: HurwitzSystem, tol: float = DEFAULT_TOL) -> CanonicalInvariants:
    """Read the chart invariants of a canonical system from its Gram tensor."""
    H = H if isinstance(H, HurwitzSystem) else HurwitzSystem(H)
    viol = chart_violation(H)
    if viol > max(tol, 1e-9) * 10:
        raise PreconditionError(f"system is not in the anchor chart (violation {viol:.3e})")
    inv = _from_gram(gram_from_system(H))
    bad = check_invariants(inv, max(tol, 1e-8))
    if bad:
        raise NumericalError("invariant check failed: " + "; ".join(bad))
    return inv


def invariants_from_parker(C: np.ndarray) -> CanonicalInvariants:
    """Invariants of a Parker matrix in normal form."""
    C = np.asarray(C.C if isinstance(C, ParkerMatrix) else C, float)
    return _from_gram(gram_from_parker(C))


def parker_from_invariants(inv: CanonicalInvariants) -> np.ndarray:
    """Normal-form Parker matrix (D T) carrying the given invariants."""
    i = inv
    D = np.diag([i.a1122 - i.a1423, i.alpha - i.gamma, i.mu + i.nu])
    T = np.array([
        [i.a1122 + i.a1423, -2 * i.a1422, -2 * i.a1421],
        [0.0, i.alpha + i.gamma, 2 * i.beta],
        [0.0, 0.0, i.mu - i.nu],
    ])
    return np.hstack([D, T])


# ---- signed-permutation moves -----------------------------------------------------

def _signed_perms(k: int) -> np.ndarray:
    out = []
    for perm in itertools.permutations(range(k)):
        for signs in itertools.product((1.0, -1.0), repeat=k):
            M = np.zeros((k, k))
            M[np.arange(k), perm] = signs
            out.append(M)
    return np.array(out)


def _form_action(M: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Matrix of E -> M E M^T on an orthogonal basis of 2-forms."""
    moved = np.einsum("ij,ajk,lk->ail", M, basis, M)
    norms = np.einsum("gil,gil->g", basis, basis)
    return np.einsum("ail,gil->ga", moved, basis) / norms[:, None]


@lru_cache(maxsize=1)
def _move_catalog() -> tuple[np.ndarray, np.ndarray]:
    """Row and column actions of every signed-permutation R in O(3) and S in O(4)."""
    rows = np.array([_form_action(R, _ROWS) for R in _signed_perms(3)])
    cols = np.array([_form_action(S, _COLS) for S in _signed_perms(4)])
    return rows, cols


def _batch_violation(Cs: np.ndarray) -> np.ndarray:
    off = Cs[:, :, :3][:, ~np.eye(3, dtype=bool)]
    low = Cs[:, :, 3:][:, np.tril_indices(3, -1)[0], np.tril_indices(3, -1)[1]]
    return np.maximum(np.abs(off).max(1), np.abs(low).max(1))


def _tuple_from_C(C: np.ndarray) -> np.ndarray:
    A, B = np.diag(C[:, :3]), C[:, 3:]
    return np.array([
        (A[1] + B[1, 1]) / 2, B[1, 2] / 2, (B[1, 1] - A[1]) / 2,
        (A[2] + B[2, 2]) / 2, (A[2] - B[2, 2]) / 2,
        -B[0, 2] / 2, -B[0, 1] / 2, (A[0] + B[0, 0]) / 2, (B[0, 0] - A[0]) / 2,
    ])


def sign_orbit(C: np.ndarray, tol: float = MEMBERSHIP_TOL) -> list[np.ndarray]:
    """Normal-form Parker matrices reachable by signed-permutation domain moves."""
    rows, cols = _move_catalog()
    Cs = np.einsum("rab,bc,sdc->rsad", rows, np.asarray(C, float), cols).reshape(-1, 3, 6)
    keep = _batch_violation(Cs) <= tol
    return list(Cs[keep])


def grand_test(t, tol: float = MEMBERSHIP_TOL) -> bool:
    alpha, beta, gamma, mu, nu, a21, a22, a1122, a1423 = t
    if abs(alpha - gamma) > tol or abs(mu + nu) > tol:
        return False
    if max(abs(a21), abs(a22)) > tol and abs(a1122 - a1423) > tol:
        return False
    return True


def anomalous_residual(t) -> float:
    """Smallest violation over sign choices of the anomalous consistency relations.

    With alpha = cos(phi), gamma = cos(psi), mu = cos(theta), nu = cos(eta) and
    all angles in [0, pi], the chart forces a1122 = cos(phi - s1 eta) =
    -cos(psi - s2 theta) and a1423 = cos(psi - s4 eta) = -cos(phi - s3 theta);
    cosines of differences are expanded so no arccos is needed.
    """
    alpha, beta, gamma, mu, nu, a21, a22, a1122, a1423 = t
    s, u = _root(1 - alpha ** 2), _root(1 - gamma ** 2)
    s1_, s2_ = _root(1 - mu ** 2), _root(1 - nu ** 2)
    best = np.inf
    for g1, g2, g3, g4 in itertools.product((1, -1), repeat=4):
        x1 = alpha * nu + g1 * s * s2_
        y1 = gamma * mu + g2 * u * s1_
        x2 = gamma * nu + g4 * u * s2_
        y2 = alpha * mu + g3 * s * s1_
        r = max(abs(x1 + y1), abs(x2 + y2), abs(x1 - a1122), abs(x2 - a1423))
        best = min(best, r)
    return float(max(best, abs(beta), abs(a21), abs(a22)))


def classify(H: HurwitzSystem, tol: float = MEMBERSHIP_TOL, verify_tol: float = DEFAULT_TOL,
             rank_tol: float = DEFAULT_RANK_TOL) -> ModuliClass:
    """Assign a moduli tag; priority Quaternion, T347, Extended, Intersection, Grand, Anomalous."""
    H = H if isinstance(H, HurwitzSystem) else HurwitzSystem(H)
    _check_type(H)
    rep = verify_hurwitz(H, verify_tol)
    if not rep.passed:
        return ModuliClass(UNCLASSIFIED, None, f"not an orthogonal multiplication (residual {rep.max_abs:.3e})")
    p_eff = range_dimension(H, rank_tol)
    try:
        Hn, _ = normalize_system(H, verify_tol)
        chart = canonical_chart(Hn, verify_tol)
        inv = _from_gram(gram_from_system(chart.system))
    except (PreconditionError, NumericalError) as exc:
        return ModuliClass(UNCLASSIFIED, None, f"chart construction failed: {exc}")
    if p_eff == 4:
        return ModuliClass(QUATERNION, inv, "range dimension 4")
    if p_eff == 7:
        return ModuliClass(T347, inv, "range dimension 7")
    if chart.extension_slots:
        return ModuliClass(EXTENDED, inv, f"range dimension {p_eff}; extension slots {list(chart.extension_slots)}")

    grand_hit = anom_hit = None
    for C in sign_orbit(parker_of_system(chart.system).C, tol):
        t = _tuple_from_C(C)
        if grand_hit is None and grand_test(t, tol):
            grand_hit = C
        if anom_hit is None and anomalous_residual(t) <= tol:
            anom_hit = C
        if grand_hit is not None and anom_hit is not None:
            break
    if grand_hit is not None and anom_hit is not None:
        return ModuliClass(INTERSECTION, invariants_from_parker(grand_hit), "grand and anomalous tests both pass")
    if grand_hit is not None:
        return ModuliClass(GRAND, invariants_from_parker(grand_hit), "alpha = gamma, mu = -nu")
    if anom_hit is not None:
        return ModuliClass(ANOMALOUS, invariants_from_parker(anom_hit), "diagonal Parker blocks with consistent angles")
    return ModuliClass(UNCLASSIFIED, inv, f"no rule fired at tol {tol:g} (range dimension {p_eff})")


# ---- boundary identification ------------------------------------------------------

def bin_move() -> tuple[np.ndarray, np.ndarray]:
    """Swap e2, e3; new f1 = -f4, new f4 = f1."""
    R = np.array([[1.0, 0, 0], [0, 0, 1], [0, 1, 0]])
    S = np.array([[0.0, 0, 0, -1], [0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0]])
    return R, S


def dual_move() -> tuple[np.ndarray, np.ndarray]:
    """Swap e1, e2; negate f2; swap f3, f4."""
    R = np.array([[0.0, 1, 0], [1, 0, 0], [0, 0, 1]])
    S = np.array([[1.0, 0, 0, 0], [0, -1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    return R, S


@lru_cache(maxsize=1)
def _proper_columns() -> np.ndarray:
    """Column actions of the signed permutations S with det S = +1."""
    return _move_catalog()[1][np.linalg.det(_signed_perms(4)) > 0]


def _lex_less(a, b, tol) -> bool:
    for x, y in zip(a, b):
        if abs(x - y) > tol:
            return x < y
    return False


def boundary_orbit(inv: CanonicalInvariants, tol: float = DEFAULT_TOL) -> list[np.ndarray]:
    """Invariant tuples of the pattern-preserving images under signed-permutation moves.

    The moves are all signed permutations R of the first factor and proper
    signed permutations S of the second; bin and dual are among them, and the
    sign changes needed to return to the normal form are included.
    """
    rows, cols = _move_catalog()[0], _proper_columns()
    C = parker_from_invariants(inv)
    Cs = np.einsum("rab,bc,sdc->rsad", rows, C, cols).reshape(-1, 3, 6)
    keep = _batch_violation(Cs) <= tol
    return [_tuple_from_C(x) for x in Cs[keep]]


def boundary_identify(inv: CanonicalInvariants, tol: float = DEFAULT_TOL) -> CanonicalInvariants:
    """Lexicographically smallest representative of the boundary orbit."""
    best = None
    for t in boundary_orbit(inv, tol):
        if best is None or _lex_less(t, best, tol):
            best = t
    best = np.where(np.abs(best) < 1e-14, 0.0, best)
    return invariants_from_parker(parker_from_invariants(
        CanonicalInvariants(**dict(zip(TUPLE_ORDER, map(float, best))), sigma1=0.0, sigma2=0.0)))


# ---- rigid range ----------------------------------------------------------------

def twist_matrix(J: np.ndarray, D: np.ndarray) -> np.ndarray:
    """8x8 block matrix [[I - J C, J - J D], [C, D]] with C = D J - J."""
    C = D @ J - J
    A = np.eye(4) - J @ C
    B = J - J @ D
    return np.block([[A, B], [C, D]])


def rigidity_twist(H: HurwitzSystem, scale: Optional[float] = None, tol: float = 1e-10) -> HurwitzSystem:
    """Right-multiply a grand chart system by the orthogonal twist fixing its second matrix.

    The second matrix is ``sigma (I | J)`` with ``J = (mu / sigma) R_k``; the
    lower-right block is ``D = sqrt((1 - l^2) / (1 + l^2)) R_i`` with ``R_q``
    right multiplication by a unit quaternion.
    """
    H = H if isinstance(H, HurwitzSystem) else HurwitzSystem(H)
    _check_type(H)
    if H.p != 8:
        raise PreconditionError("rigidity twist needs p = 8")
    viol = chart_violation(H)
    if viol > 1e-9:
        raise PreconditionError(f"system is not in the anchor chart (violation {viol:.3e})")
    inv = _from_gram(gram_from_system(H))
    if not grand_test(inv.as_tuple(), MEMBERSHIP_TOL):
        raise PreconditionError("rigidity twist needs a grand system")
    mu, sigma = inv.mu, inv.sigma1
    if abs(mu) <= DEFAULT_TOL or sigma <= DEFAULT_TOL:
        raise PreconditionError("twist undefined: mu = 0 (or sigma = 0)")
    lam = abs(mu) / sigma
    if scale is not None:
        if abs(scale - lam) > 1e-9:
            raise InputError(f"scale {scale} does not match |mu| / sigma = {lam:.12g} of this system")
        lam = float(scale)
    if not 0 < lam < 1:
        raise PreconditionError(f"twist undefined: scale {lam:.6g} must lie in (0, 1)")
    kappa = (1 - lam ** 2) / (1 + lam ** 2)
    J = np.sign(mu) * lam * quat_right([0.0, 0.0, 0.0, 1.0])
    D = np.sqrt(kappa) * quat_right([0.0, 1.0, 0.0, 0.0])
    O = twist_matrix(J, D)
    if np.abs(O @ O.T - np.eye(8)).max() > tol:
        raise NumericalError("internal error: twist matrix is not orthogonal")
    F = H.matrices @ O
    if np.abs(F[1] - H.matrices[1]).max() > tol:
        raise NumericalError("internal error: twist moved the second matrix")
    if np.abs(F[2] - np.hstack([O[4:, :4], O[4:, 4:]])).max() > tol:
        raise NumericalError("internal error: third matrix is not (C D)")
    return HurwitzSystem(F)


def complement_twist(H: HurwitzSystem, angle: float = np.pi / 3) -> HurwitzSystem:
    """Rotate inside the orthogonal complement of the second matrix's row space.

    The second matrix is left exactly in place while the third one generally
    leaves the fixed second summand.
    """
    H = H if isinstance(H, HurwitzSystem) else HurwitzSystem(H)
    N = null_space(H.matrices[1])
    if N.shape[1] < 2:
        raise PreconditionError("complement of the second matrix is too small to rotate in")
    a, b = N[:, 0], N[:, 1]
    c, s = np.cos(angle), np.sin(angle)
    O = np.eye(H.p) + (c - 1) * (np.outer(a, a) + np.outer(b, b)) + s * (np.outer(b, a) - np.outer(a, b))
    return HurwitzSystem(H.matrices @ O)


def check_rigid_range(H: HurwitzSystem, split: int = 4, tol: float = DEFAULT_TOL) -> bool:
    """True iff the third matrix's rows lie in the second summand of R^split + R^(8 - split)."""
    H = H if isinstance(H, HurwitzSystem) else HurwitzSystem(H)
    _check_type(H)
    if H.p != 8:
        raise InputError(f"unsupported: rigid range check needs p = 8, got {H.p}")
    if split != 4:
        raise InputError("unsupported: only the 4 + 4 splitting is defined")
    second = H.matrices[1]
    c1, w1 = second[:, :4], second[:, 4:]
    if max(np.abs(c1[~np.eye(4, dtype=bool)]).max(), np.abs(w1[~_W1_MASK]).max()) > max(tol, 1e-9) * 10:
        raise PreconditionError("second matrix is not in diagonal-plus-skew form against the splitting")
    return bool(np.abs(H.matrices[2][:, :split]).max() <= tol)
