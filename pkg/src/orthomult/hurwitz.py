"""Orthogonal multiplications as Hurwitz matrix systems and their Gram tensors.

A system of type [m, n, p] is stored as an array ``F`` of shape (m, n, p): row
``b`` of matrix ``a`` holds the coordinates of ``e_a o f_b`` in R^p. The Gram
tensor collects all inner products of these mn vectors, indexed by the
row-major pairing ``(i, j) -> i * n + j`` (zero-based).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-9
DEFAULT_RANK_TOL = 1e-7


class InputError(ValueError):
    """Malformed input: wrong shape, non-orthogonal transform, bad parameters."""


class PreconditionError(ValueError):
    """Input is well formed but violates a documented precondition."""


class NumericalError(RuntimeError):
    """A numerical construction failed a post-condition check."""



@dataclass(frozen=True, eq=False)
class HurwitzSystem:
    """m matrices of size n x p; ``matrices[a, b]`` is the image of (e_a, f_b)."""

    matrices: np.ndarray

    def __post_init__(self):
        arr = np.array(self.matrices, dtype=float)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise InputError(f"expected a nonempty (m, n, p) array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InputError("system contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "matrices", arr)

    @property
    def m(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def p(self) -> int:
        return self.matrices.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.matrices.shape

    def rows(self) -> np.ndarray:
        """All mn product vectors stacked as an (mn, p) matrix."""
        return self.matrices.reshape(self.m * self.n, self.p)

    def __getitem__(self, a: int) -> np.ndarray:
        return self.matrices[a]

    def __eq__(self, other) -> bool:
        if not isinstance(other, HurwitzSystem):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.matrices, other.matrices))

    __hash__ = None


@dataclass(frozen=True)
class ResidualReport:
    """Worst-case deviation plus the per-item breakdown it was taken over.

    For Hurwitz checks the items are ``(a, b, residual)`` with zero-based a <= b.
    For Gram checks the first slot names the relation family.
    """

    max_abs: float
    per_pair: tuple
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "max_abs": self.max_abs,
            "pass": self.passed,
            "tol": self.tol,
            "per_pair": [list(x) for x in self.per_pair],
        }


@dataclass(frozen=True)
class GramTensor:
    """Symmetric (mn x mn) matrix of inner products of the product vectors."""

    m: int
    n: int
    entries: np.ndarray
    tolerance: float = DEFAULT_TOL
    _eig: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        size = self.m * self.n
        if e.shape != (size, size):
            raise InputError(f"Gram entries must be {size}x{size}, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise InputError("Gram tensor contains non-finite entries")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    def tensor(self) -> np.ndarray:
        """Entries as a 4-index array ``T[i, j, k, l] = F_{ij,kl}``."""
        return self.entries.reshape(self.m, self.n, self.m, self.n)

    def entry(self, i: int, j: int, k: int, l: int) -> float:
        """One-based lookup ``F_{ij,kl}``, matching the usual index notation."""
        return float(self.entries[(i - 1) * self.n + (j - 1), (k - 1) * self.n + (l - 1)])

    @property
    def iota(self) -> np.ndarray:
        """The tensor-product part (identity)."""
        return np.eye(self.m * self.n)

    @property
    def c(self) -> np.ndarray:
        """Deviation from the tensor-product multiplication."""
        return self.entries - self.iota

    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and eigenvectors of the symmetrized entries."""
        if self._eig is None:
            sym = 0.5 * (self.entries + self.entries.T)
            lam, vecs = np.linalg.eigh(sym)
            object.__setattr__(self, "_eig", (lam, vecs))
        return self._eig

    def min_eigenvalue(self) -> float:
        return float(self.eigen()[0][0])


def _as_system(H) -> HurwitzSystem:
    return H if isinstance(H, HurwitzSystem) else HurwitzSystem(np.asarray(H))


def apply(H: HurwitzSystem, x, y) -> np.ndarray:
    """Evaluate the bilinear map at (x, y)."""
    H = _as_system(H)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (H.m,) or y.shape != (H.n,):
        raise InputError(f"expected x of length {H.m} and y of length {H.n}, got {x.shape}, {y.shape}")
    return np.einsum("a,b,abp->p", x, y, H.matrices)


def hurwitz_residuals(F: np.ndarray) -> np.ndarray:
    """E[a, b] = F_a F_b^T + F_b F_a^T - 2 delta_ab I, shape (m, m, n, n)."""
    m, n, _ = F.shape
    P = np.einsum("anp,bkp->abnk", F, F)
    return P + P.transpose(1, 0, 2, 3) - 2.0 * np.eye(m)[:, :, None, None] * np.eye(n)


def verify_hurwitz(H: HurwitzSystem, tol: float = DEFAULT_TOL) -> ResidualReport:
    """Check the Hurwitz equations for every pair a <= b."""
    if tol <= 0:
        raise InputError("tol must be positive")
    H = _as_system(H)
    E = hurwitz_residuals(H.matrices)
    per = []
    for a in range(H.m):
        for b in range(a, H.m):
            per.append((a, b, float(np.abs(E[a, b]).max())))
    worst = max(r for _, _, r in per)
    return ResidualReport(worst, tuple(per), worst <= tol, tol)


def gram_from_system(H: HurwitzSystem, tol: float = DEFAULT_TOL) -> GramTensor:
    """Inner products of all product vectors."""
    H = _as_system(H)
    X = H.rows()
    G = X @ X.T
    G = 0.5 * (G + G.T)
    return GramTensor(H.m, H.n, G, tol)


def check_gram_symmetries(G: GramTensor, tol: float = DEFAULT_TOL) -> ResidualReport:
    """Worst violation of symmetry, unit diagonal and the four linear relations.

    The relations are the polarized forms of |x o y| = |x||y|:
    F_{ij,il} = 0 (j != l), F_{ij,kj} = 0 (i != k),
    F_{ij,kl} = -F_{il,kj} (i != k) and F_{ij,kl} = -F_{kj,il} (j != l).
    The swap families are evaluated with i != k and j != l, since the
    remaining cases restate the first two.
    """
    if tol <= 0:
        raise InputError("tol must be positive")
    m, n = G.m, G.n
    T = G.tensor()
    ii = np.arange(m)
    jj = np.arange(n)
    off_n = ~np.eye(n, dtype=bool)
    off_m = ~np.eye(m, dtype=bool)

    def worst(x):
        return float(np.abs(x).max()) if np.size(x) else 0.0

    same_i = T[ii, :, ii, :]                      # (i, j, l)
    same_j = T[:, jj, :, jj]                      # (j, i, k)
    swap_cols = T + T.transpose(0, 3, 2, 1)       # F_{ij,kl} + F_{il,kj}
    swap_rows = T + T.transpose(2, 1, 0, 3)       # F_{ij,kl} + F_{kj,il}
    # with i = k or j = l the swaps collapse onto the two families above
    both_off = off_m[:, None, :, None] & off_n[None, :, None, :]
    per = (
        ("symmetric", "", worst(G.entries - G.entries.T)),
        ("unit_diagonal", "", worst(np.diag(G.entries) - 1.0)),
        ("same_first_factor", "", worst(same_i[:, off_n])),
        ("same_second_factor", "", worst(same_j[:, off_m])),
        ("swap_second_factor", "", worst(swap_cols[both_off])),
        ("swap_first_factor", "", worst(swap_rows[both_off])),
    )
    top = max(r for *_, r in per)
    return ResidualReport(top, per, top <= tol, tol)


def system_from_gram(G: GramTensor, rank_tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """Rebuild a full system from an admissible Gram tensor.

    Uses the symmetric square root restricted to the positive eigenspace, so
    the output is expressed in the eigenbasis and p equals the numerical rank.
    """
    sym = check_gram_symmetries(G, max(G.tolerance, rank_tol))
    if not sym.passed:
        raise PreconditionError(f"Gram tensor violates the orthogonality relations (max {sym.max_abs:.3g})")
    lam, Q = G.eigen()
    if lam[0] < -rank_tol:
        raise PreconditionError("not PSD: no orthogonal multiplication exists for this tensor")
    keep = lam > rank_tol
    lam = np.where(keep, lam, 0.0)
    # order columns by decreasing eigenvalue for a deterministic layout
    idx = np.flatnonzero(keep)[::-1]
    X = Q[:, idx] * np.sqrt(lam[idx])
    return HurwitzSystem(X.reshape(G.m, G.n, len(idx)))


def _check_orthogonal(M: np.ndarray, size: int, name: str, tol: float) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (size, size):
        raise InputError(f"{name} must be {size}x{size}, got {M.shape}")
    if np.abs(M @ M.T - np.eye(size)).max() > tol:
        raise InputError(f"{name} is not orthogonal")
    return M


def domain_transform(H: HurwitzSystem, R, S, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """New matrix a is sum_b R[a, b] * (S @ F_b): e'_a = R e, f'_k = S f."""
    H = _as_system(H)
    R = _check_orthogonal(R, H.m, "R", tol)
    S = _check_orthogonal(S, H.n, "S", tol)
    return HurwitzSystem(np.einsum("ab,cd,bdp->acp", R, S, H.matrices))


def range_transform(H: HurwitzSystem, Q, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """Right-multiply every matrix by an orthogonal Q (reflections allowed)."""
    H = _as_system(H)
    Q = _check_orthogonal(Q, H.p, "Q", tol)
    return HurwitzSystem(H.matrices @ Q)


def singular_values(H: HurwitzSystem) -> np.ndarray:
    """Singular values of the stacked (mn, p) product matrix, descending."""
    return np.linalg.svd(_as_system(H).rows(), compute_uv=False)


def range_dimension(H: HurwitzSystem, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Dimension of the span of all products."""
    if rank_tol <= 0:
        raise InputError("rank_tol must be positive")
    return int(np.sum(singular_values(H) > rank_tol))


def kron_action(R: np.ndarray, S: np.ndarray) -> np.ndarray:
    """R (x) S on the pair-indexed space, consistent with the row-major pairing."""
    return np.kron(R, S)


def stack(mats: Sequence[np.ndarray]) -> HurwitzSystem:
    return HurwitzSystem(np.stack([np.asarray(x, float) for x in mats]))
