"""Bracket matrix of a [3,4,p] system and its (diagonal | upper-triangular) normal form.

Brackets ``[ij,kl] = F_{ik,jl}`` are skew in (i, j) and in (k, l), so they define
a linear map from 2-forms on R^4 to 2-forms on R^3. Against the self-dual and
anti-self-dual bases of 2-forms on R^4 this is a 3x6 matrix ``C = (A B)``.
SO(3) acts on rows, and SO(4) acts on the columns through its two SO(3)
factors, so C can be brought to ``(D T)`` with D diagonal and T upper
triangular.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import rq

from .hurwitz import (
    DEFAULT_TOL,
    GramTensor,
    HurwitzSystem,
    InputError,
    PreconditionError,
    check_gram_symmetries,
    domain_transform,
    gram_from_system,
)


def _skew(i: int, j: int, size: int) -> np.ndarray:
    M = np.zeros((size, size))
    M[i, j] = 1.0
    M[j, i] = -1.0
    return M


def lambda2_bases() -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Self-dual and anti-self-dual 2-forms on R^4 as unnormalized skew matrices.

    Order: f1^f2 +/- f3^f4, f1^f3 +/- f4^f2, f1^f4 +/- f2^f3.
    """
    pairs = [((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2))]
    plus = [_skew(*a, 4) + _skew(*b, 4) for a, b in pairs]
    minus = [_skew(*a, 4) - _skew(*b, 4) for a, b in pairs]
    return plus, minus


def row_basis() -> list[np.ndarray]:
    """2-forms on R^3 indexing the rows: e1^e2, e3^e1, e3^e2."""
    return [_skew(0, 1, 3), _skew(2, 0, 3), _skew(2, 1, 3)]


def hodge_star4(M: np.ndarray) -> np.ndarray:
    """Hodge star of a 2-form on R^4 given as a skew matrix."""
    out = np.zeros((4, 4))
    for i, j in itertools.combinations(range(4), 2):
        k, l = [x for x in range(4) if x not in (i, j)]
        perm = [i, j, k, l]
        # sign of the permutation (i j k l)
        sign = np.linalg.det(np.eye(4)[perm])
        out[k, l] += sign * M[i, j]
        out[l, k] -= sign * M[i, j]
    return out


_ROWS = np.array(row_basis())
_PLUS, _MINUS = (np.array(x) for x in lambda2_bases())
_COLS = np.concatenate([_PLUS, _MINUS])


@dataclass(frozen=True)
class ParkerMatrix:
    C: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.shape != (3, 6):
            raise InputError(f"Parker matrix must be 3x6, got {C.shape}")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def A(self) -> np.ndarray:
        return self.C[:, :3]

    @property
    def B(self) -> np.ndarray:
        return self.C[:, 3:]


@dataclass(frozen=True)
class NormalizedParker:
    """Normal form ``rho(R) C (Splus + Sminus)^T = (D T)`` with its transforms."""

    D: np.ndarray
    T: np.ndarray
    R: np.ndarray
    Splus: np.ndarray
    Sminus: np.ndarray
    S4: np.ndarray

    @property
    def C(self) -> np.ndarray:
        return np.hstack([self.D, self.T])


def brackets(G: GramTensor) -> np.ndarray:
    """K[i, j, k, l] = [ij,kl] = F_{ik,jl}."""
    return G.tensor().transpose(0, 2, 1, 3)


def parker_matrix(G: GramTensor) -> ParkerMatrix:
    """Pair the bracket tensor with the row and column bases."""
    if (G.m, G.n) != (3, 4):
        raise InputError(f"Parker matrix is defined for m=3, n=4 only, got m={G.m}, n={G.n}")
    sym = check_gram_symmetries(G, G.tolerance)
    if not sym.passed:
        raise PreconditionError(f"Gram tensor violates the orthogonality relations (max {sym.max_abs:.3g})")
    K = brackets(G)
    return ParkerMatrix(0.25 * np.einsum("rij,ckl,ijkl->rc", _ROWS, _COLS, K))


def parker_of_system(H: HurwitzSystem, tol: float = DEFAULT_TOL) -> ParkerMatrix:
    return parker_matrix(gram_from_system(H, tol))


def gram_from_parker(P: ParkerMatrix) -> GramTensor:
    """Inverse of parker_matrix on admissible [3,4] Gram tensors.

    The bases are orthogonal with squared norms 2 (rows) and 4 (columns), so
    the bracket tensor is sum C[r, c] / 2 * rows[r] (x) cols[c].
    """
    C = np.asarray(P.C if isinstance(P, ParkerMatrix) else P, dtype=float)
    K = 0.5 * np.einsum("rc,rij,ckl->ijkl", C, _ROWS, _COLS)
    T = K.transpose(0, 2, 1, 3)          # F_{ij,kl} = K[i, k, j, l]
    G = np.eye(12) + T.reshape(12, 12)
    return GramTensor(3, 4, G)


def normal_form_identities(G: GramTensor) -> np.ndarray:
    """The nine Gram identities equivalent to C being in (D T) form.

    Six single entries and three sums, all zero exactly when A is diagonal
    and B is upper triangular.
    """
    e = G.entry
    return np.array([
        e(3, 1, 1, 2), e(3, 3, 1, 4),
        e(3, 1, 2, 2), e(3, 3, 2, 4),
        e(3, 1, 2, 3), e(3, 4, 2, 2),
        e(1, 1, 2, 3) + e(1, 4, 2, 2),
        e(1, 1, 2, 4) + e(1, 2, 2, 3),
        e(3, 1, 1, 4) + e(3, 2, 1, 3),
    ])


def pattern_violation(C: np.ndarray) -> float:
    """Largest entry that must vanish in the (D T) form."""
    C = np.asarray(C)
    A, B = C[:, :3], C[:, 3:]
    off = A[~np.eye(3, dtype=bool)]
    low = B[np.tril_indices(3, -1)]
    return float(max(np.abs(off).max(), np.abs(low).max()))


# ---- induced actions on 2-forms -------------------------------------------------

def rho_rows(R: np.ndarray) -> np.ndarray:
    """Action of R in O(3) on the row 2-forms: entry (g, a) = <R E_a R^T, E_g> / 2."""
    R = np.asarray(R, float)
    moved = np.einsum("ij,ajk,lk->ail", R, _ROWS, R)
    return 0.5 * np.einsum("ail,gil->ga", moved, _ROWS)


def rho_plus(S: np.ndarray) -> np.ndarray:
    """Action of S in O(4) on the self-dual basis (normalized by the norm 4)."""
    S = np.asarray(S, float)
    moved = np.einsum("ij,ajk,lk->ail", S, _PLUS, S)
    return 0.25 * np.einsum("ail,gil->ga", moved, _PLUS)


def rho_minus(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, float)
    moved = np.einsum("ij,ajk,lk->ail", S, _MINUS, S)
    return 0.25 * np.einsum("ail,gil->ga", moved, _MINUS)


# E_a is the cross-product matrix of W[:, a]; conjugating by R in SO(3) then
# acts on rows as W^T R W, which we invert to lift a row action back to R.
_W = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [-1.0, 0.0, 0.0]])


def so3_from_row_action(M: np.ndarray) -> np.ndarray:
    """The R in SO(3) with rho_rows(R) = M."""
    return _W @ np.asarray(M, float) @ _W.T


# ---- quaternion double cover ---------------------------------------------------

def quat_left(q) -> np.ndarray:
    """Matrix of x -> q x on H = R^4 with basis (1, i, j, k)."""
    a, b, c, d = q
    return np.array([
        [a, -b, -c, -d],
        [b, a, -d, c],
        [c, d, a, -b],
        [d, -c, b, a],
    ])


def quat_right(q) -> np.ndarray:
    """Matrix of x -> x q."""
    a, b, c, d = q
    return np.array([
        [a, -b, -c, -d],
        [b, a, d, -c],
        [c, -d, a, b],
        [d, c, -b, a],
    ])


def _canonical_sign(q: np.ndarray) -> np.ndarray:
    q = q / np.linalg.norm(q)
    nz = np.flatnonzero(np.abs(q) > 1e-12)
    if nz.size and q[nz[0]] < 0:
        q = -q
    return q


def _quat_for(target: np.ndarray, action, mult) -> np.ndarray:
    """Unit quaternion q with action(mult(q)) = target, via the q-method.

    action(mult(q)) is quadratic in q, so matching it against target is the
    top eigenvector of a symmetric 4x4 matrix.
    """
    basis = np.eye(4)
    K = np.zeros((4, 4))
    for a in range(4):
        for b in range(4):
            La, Lb = mult(basis[a]), mult(basis[b])
            # bilinear form <target, action(La, Lb)> built from polarization
            if action is rho_plus:
                forms = _PLUS
            else:
                forms = _MINUS
            moved = np.einsum("ij,ajk,lk->ail", La, forms, Lb)
            K[a, b] = 0.25 * np.einsum("ail,gil,ga->", moved, forms, target)
    K = 0.5 * (K + K.T)
    lam, vec = np.linalg.eigh(K)
    return _canonical_sign(vec[:, -1])


def so4_quaternions(Splus: np.ndarray, Sminus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit quaternions (qL, qR) with x -> qL x conj(qR) acting as (Splus, Sminus)."""
    qL = _quat_for(np.asarray(Splus, float), rho_plus, quat_left)
    # right multiplication by a unit quaternion acts only on the other factor
    qR = _quat_for(np.asarray(Sminus, float), rho_minus, lambda q: quat_right(q * np.array([1, -1, -1, -1])))
    return qL, qR


def so4_from_so3_pair(Splus, Sminus, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Lift a pair of rotations of the self-dual / anti-self-dual spaces to SO(4)."""
    for name, M in (("Splus", Splus), ("Sminus", Sminus)):
        M = np.asarray(M, float)
        if M.shape != (3, 3) or np.abs(M @ M.T - np.eye(3)).max() > tol or np.linalg.det(M) < 0:
            raise InputError(f"{name} must be a 3x3 rotation")
    qL, qR = so4_quaternions(Splus, Sminus)
    conj = qR * np.array([1, -1, -1, -1])
    Q = quat_left(qL) @ quat_right(conj)
    return _canonical_so4(Q)


def _canonical_so4(Q: np.ndarray) -> np.ndarray:
    # Q and -Q induce the same actions; keep the lift with positive leading entry
    flat = Q.ravel()
    nz = np.flatnonzero(np.abs(flat) > 1e-12)
    return -Q if nz.size and flat[nz[0]] < 0 else Q


# ---- normalization -------------------------------------------------------------

def _rq_so3(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """M = T Q with T upper triangular and Q in SO(3)."""
    T, Q = rq(M)
    if np.linalg.det(Q) < 0:
        Q[0] *= -1
        T[:, 0] *= -1
    return T, Q


_SIGNS = [np.diag(s) for s in itertools.product((1.0, -1.0), repeat=3) if np.prod(s) > 0]


def _lex_key(T: np.ndarray, tol: float):
    # upper-triangular entries row by row, compared on a tol grid
    vals = T[np.triu_indices(3)]
    return tuple(-np.round(vals / tol).astype(np.int64))


def normalize_parker(P: ParkerMatrix, tol: float = DEFAULT_TOL) -> NormalizedParker:
    """Rotate rows and columns so that A is diagonal and B upper triangular.

    A matrix already in that form is returned with identity transforms. Otherwise
    the SVD of A fixes the row rotation and the self-dual rotation (sign
    corrected into SO(3) on the last singular vectors), and an RQ factorization
    of the rotated B fixes the anti-self-dual rotation. The leftover diagonal
    sign freedom is resolved by taking the lexicographically largest T.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    C = np.asarray(P.C if isinstance(P, ParkerMatrix) else P, float)
    A, B = C[:, :3], C[:, 3:]
    if pattern_violation(C) <= tol:
        I3 = np.eye(3)
        return NormalizedParker(np.diag(np.diag(A)), np.triu(B), I3, I3, I3, np.eye(4))

    U, s, Vt = np.linalg.svd(A)
    if np.linalg.det(U) < 0:
        U[:, -1] *= -1
        s = s.copy()
        s[-1] *= -1
    if np.linalg.det(Vt) < 0:
        Vt[-1] *= -1
        s[-1] *= -1
    row = U.T
    plus = Vt

    best = None
    for Sg in _SIGNS:
        r = Sg @ row
        p = Sg @ plus
        T, Q = _rq_so3(r @ B)
        for Eg in _SIGNS:
            Tc, Qc = T @ Eg, Eg @ Q
            key = _lex_key(Tc, tol)
            if best is None or key < best[0]:
                best = (key, r, p, Qc, Tc)
    _, row, plus, minus, T = best
    D = row @ A @ plus.T
    R = so3_from_row_action(row)
    S4 = so4_from_so3_pair(plus, minus)
    return NormalizedParker(np.diag(np.diag(D)), np.triu(T), R, plus, minus, S4)


def normalize_system(H: HurwitzSystem, tol: float = DEFAULT_TOL) -> tuple[HurwitzSystem, NormalizedParker]:
    """Apply the domain change realizing the Parker normal form to H itself."""
    P = parker_of_system(H, tol)
    N = normalize_parker(P, tol)
    return domain_transform(H, N.R, N.S4, tol=1e-8), N
