"""Closed-form families of [3,4,p] orthogonal multiplications and their constraint solvers.

All [3,4,*] constructors produce systems in the anchor chart: the third matrix is
``(0 | I)``, the second is ``(c1 | w1)`` with ``c1 = diag(s1, s2, s2, s1)`` and
``w1`` the anti-diagonal skew block in (mu, nu), and the first carries the
free data. Every constructor re-verifies the Hurwitz equations before
returning.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import fsolve

from .hurwitz import DEFAULT_TOL, HurwitzSystem, InputError, NumericalError, verify_hurwitz

STANDARD = "standard"
MIRROR = "mirror"

SIGN_VECTORS = tuple(itertools.product((1, -1), repeat=4))


def _root(x: float) -> float:
    return float(np.sqrt(max(x, 0.0)))


def spin_block(mu: float, nu: float) -> np.ndarray:
    """Anti-diagonal skew block paired with c1 in the second matrix."""
    return np.array([
        [0.0, 0.0, 0.0, -mu],
        [0.0, 0.0, -nu, 0.0],
        [0.0, nu, 0.0, 0.0],
        [mu, 0.0, 0.0, 0.0],
    ])


def cross_block(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Right block of the first matrix."""
    return np.array([
        [0.0, 0.0, -alpha, -beta],
        [0.0, 0.0, beta, -gamma],
        [alpha, -beta, 0.0, 0.0],
        [beta, gamma, 0.0, 0.0],
    ])


def _checked(F: np.ndarray, what: str, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    H = HurwitzSystem(F)
    rep = verify_hurwitz(H, tol)
    if not rep.passed:
        raise NumericalError(f"assembly inconsistency in {what}: Hurwitz residual {rep.max_abs:.3e}")
    return H


def _anchor(first: np.ndarray, second: np.ndarray, width: int = 8) -> np.ndarray:
    third = np.zeros((4, width))
    third[:, -4:] = np.eye(4)
    return np.stack([first, second, third])


# ---- grand family ---------------------------------------------------------------

@dataclass(frozen=True)
class GrandPoint:
    """Five coordinates of the grand family plus the two discrete choices."""

    alpha: float
    mu: float
    a1421: float = 0.0
    a1422: float = 0.0
    a1122: float = 0.0
    branch: str = STANDARD
    beta_sign: int = 1

    @property
    def gamma(self) -> float:
        return self.alpha

    @property
    def nu(self) -> float:
        return -self.mu

    @property
    def sigma(self) -> float:
        return _root(1.0 - self.mu ** 2)

    @property
    def beta_squared(self) -> float:
        a, m = self.alpha, self.mu
        return (1 - m ** 2) * (1 - a ** 2) - (self.a1122 + a * m) ** 2 - self.a1421 ** 2 - self.a1422 ** 2

    @property
    def beta(self) -> float:
        return self.beta_sign * _root(self.beta_squared)

    @property
    def a1423(self) -> float:
        if self.branch == MIRROR:
            return -self.a1122 - 2 * self.alpha * self.mu
        return self.a1122

    @property
    def theta(self) -> float:
        """Common row norm of the skew part of c2 (so c2 c2^T-type identities close)."""
        b, s = self.beta, self.sigma
        return _root(1 - self.alpha ** 2 - b ** 2 - (b * self.mu / s) ** 2)

    def coords(self) -> tuple[float, float, float, float, float]:
        return (self.alpha, self.mu, self.a1421, self.a1422, self.a1122)


def grand_construct(P: GrandPoint, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """Assemble the grand system for a point of the five-parameter body."""
    a, mu = P.alpha, P.mu
    if abs(a) > 1 or abs(mu) >= 1:
        raise InputError("grand point needs |alpha| <= 1 and |mu| < 1")
    if P.branch not in (STANDARD, MIRROR):
        raise InputError(f"unknown branch {P.branch!r}")
    if P.branch == MIRROR and (abs(P.a1421) > tol or abs(P.a1422) > tol):
        raise InputError("invalid branch: mirror branch needs a1421 = a1422 = 0")
    if P.beta_sign not in (1, -1):
        raise InputError("beta_sign must be +1 or -1")
    if P.beta_squared < -tol:
        raise InputError(f"outside moduli body: beta^2 = {P.beta_squared:.6g} < 0")
    s, b = P.sigma, P.beta
    nu = -mu
    c1 = s * np.eye(4)
    w1 = spin_block(mu, nu)
    M = np.zeros((4, 4))
    m12 = (P.a1122 + a * mu) / s
    m13 = -P.a1422 / s
    m14 = -P.a1421 / s
    M[0, 1], M[0, 2], M[0, 3] = m12, m13, m14
    M[2, 3], M[1, 3], M[1, 2] = -m12, m13, -m14
    M = M - M.T
    if P.branch == MIRROR:
        M[2, 3], M[3, 2] = M[3, 2], M[2, 3]
    c2 = -(b * mu / s) * np.eye(4) + M
    w2 = cross_block(a, b, a)
    F = _anchor(np.hstack([c2, w2]), np.hstack([c1, w1]))
    return _checked(F, "grand_construct", tol)


# ---- anomalous family -----------------------------------------------------------

def be_residual(phi: float, psi: float, theta: float, eta: float, signs) -> float:
    """How far the two consistency identities are from holding for these signs."""
    s1, s2, s3, s4 = signs
    r1 = np.cos(phi - s1 * eta) + np.cos(psi - s2 * theta)
    r2 = np.cos(psi - s4 * eta) + np.cos(phi - s3 * theta)
    return float(max(abs(r1), abs(r2)))


def consistent_signs(phi, psi, theta, eta, tol: float = DEFAULT_TOL) -> list[tuple[int, int, int, int]]:
    return [sg for sg in SIGN_VECTORS if be_residual(phi, psi, theta, eta, sg) <= tol]


@dataclass(frozen=True)
class AnomalousPoint:
    """Angles with alpha = cos(phi), gamma = cos(psi), mu = cos(theta), nu = cos(eta)."""

    phi: float
    psi: float
    theta: float
    eta: float
    signs: Optional[tuple[int, int, int, int]] = None

    @property
    def alpha(self):
        return float(np.cos(self.phi))

    @property
    def gamma(self):
        return float(np.cos(self.psi))

    @property
    def mu(self):
        return float(np.cos(self.theta))

    @property
    def nu(self):
        return float(np.cos(self.eta))

    def angles(self) -> tuple[float, float, float, float]:
        return (self.phi, self.psi, self.theta, self.eta)


def anomalous_construct(P: AnomalousPoint, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """Both Parker blocks diagonal: c2 has four nonzero entries of size sin(phi), sin(psi)."""
    ang = P.angles()
    if any(x < -tol or x > np.pi + tol for x in ang):
        raise InputError("anomalous angles must lie in [0, pi]")
    if P.signs is None:
        cands = consistent_signs(*ang, tol=tol)
        if not cands:
            raise InputError("inconsistent angle quadruple: no sign assignment satisfies the consistency identities")
        signs = cands[0]
    else:
        signs = tuple(int(x) for x in P.signs)
        if be_residual(*ang, signs) > tol:
            raise InputError("inconsistent angle quadruple for the given signs")
    phi, psi, theta, eta = ang
    s1, s2, s3, s4 = signs
    a, g, mu, nu = np.cos(ang)
    c1 = np.diag([np.sin(theta), np.sin(eta), np.sin(eta), np.sin(theta)])
    c2 = np.zeros((4, 4))
    c2[0, 1] = s1 * np.sin(phi)
    c2[1, 0] = s2 * np.sin(psi)
    c2[2, 3] = s3 * np.sin(phi)
    c2[3, 2] = s4 * np.sin(psi)
    F = _anchor(np.hstack([c2, cross_block(a, 0.0, g)]), np.hstack([c1, spin_block(mu, nu)]))
    return _checked(F, "anomalous_construct", tol)


def resolve_signs(P: AnomalousPoint, tol: float = DEFAULT_TOL) -> AnomalousPoint:
    """Same point with the first consistent sign vector filled in."""
    if P.signs is not None:
        return P
    cands = consistent_signs(*P.angles(), tol=tol)
    if not cands:
        raise InputError("inconsistent angle quadruple")
    return AnomalousPoint(*P.angles(), signs=cands[0])


# ---- type [3,4,7] ----------------------------------------------------------------

@dataclass(frozen=True)
class T347Point:
    nu: float
    mu_sign: int = 1
    gamma_sign: int = 1

    @property
    def mu(self) -> float:
        return float(self.mu_sign)

    @property
    def gamma(self) -> float:
        return float(self.gamma_sign)

    @property
    def alpha(self) -> float:
        # alpha mu + gamma nu = 0
        return -self.gamma * self.nu / self.mu

    def anomalous(self) -> AnomalousPoint:
        theta = 0.0 if self.mu_sign > 0 else np.pi
        psi = 0.0 if self.gamma_sign > 0 else np.pi
        return AnomalousPoint(float(np.arccos(np.clip(self.alpha, -1, 1))), psi, theta,
                              float(np.arccos(np.clip(self.nu, -1, 1))))


def t347_construct(P: T347Point, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """One-parameter family spanning R^7, built in the chart with sigma1 = 0."""
    if P.mu_sign not in (1, -1) or P.gamma_sign not in (1, -1):
        raise InputError("mu_sign and gamma_sign must be +1 or -1")
    if not abs(P.nu) < 1:
        raise InputError("degeneracy contradiction: |nu| = 1 forces sigma2 = 0")
    if 1 - abs(P.nu) < 1e-5:
        warnings.warn("nu is within 1e-5 of +-1; the seventh singular value is tiny", RuntimeWarning)
    return anomalous_construct(P.anomalous(), tol)


# ---- type [2,4,8] ----------------------------------------------------------------

@dataclass(frozen=True)
class T248Point:
    mu: float
    nu: float

    @property
    def sigma1(self) -> float:
        return _root(1 - self.mu ** 2)

    @property
    def sigma2(self) -> float:
        return _root(1 - self.nu ** 2)


def t248_construct(P: T248Point, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    if abs(P.mu) > 1 or abs(P.nu) > 1:
        raise InputError("t248 needs |mu|, |nu| <= 1")
    D = np.diag([P.sigma1, P.sigma2, P.sigma2, P.sigma1])
    first = np.hstack([D, spin_block(P.mu, P.nu)])
    second = np.hstack([np.zeros((4, 4)), np.eye(4)])
    return _checked(np.stack([first, second]), "t248_construct", tol)


# ---- quaternions -----------------------------------------------------------------

def quaternion_construct() -> HurwitzSystem:
    """Left multiplication by i, j, k on H with basis (1, i, j, k)."""
    from .parker import quat_left

    units = np.eye(4)[1:]
    # row b of matrix a holds the coordinates of q_a * f_b, i.e. column b of L(q_a)
    F = np.stack([quat_left(q).T for q in units])
    return _checked(F, "quaternion_construct")


# ---- extensions to p <= 12 ------------------------------------------------------

@dataclass(frozen=True)
class ExtensionPoint:
    """Chart with beta = a1421 = a1422 = 0 plus four normal angles.

    The angles (phi_e, psi_e, zeta, xi) in [0, pi] tilt the four rows of the
    first matrix into four extra range directions.
    """

    alpha: float
    gamma: float
    mu: float
    nu: float
    phi_e: float = np.pi / 2
    psi_e: float = np.pi / 2
    zeta: float = np.pi / 2
    xi: float = np.pi / 2

    @property
    def s(self) -> float:
        return _root(1 - self.alpha ** 2)

    @property
    def t(self) -> float:
        return _root(1 - self.gamma ** 2)

    @property
    def sigma1(self) -> float:
        return _root(1 - self.mu ** 2)

    @property
    def sigma2(self) -> float:
        return _root(1 - self.nu ** 2)

    def ext_angles(self) -> tuple[float, float, float, float]:
        return (self.phi_e, self.psi_e, self.zeta, self.xi)

    def constraint_residual(self) -> np.ndarray:
        a, g, mu, nu = self.alpha, self.gamma, self.mu, self.nu
        s, t, s1, s2 = self.s, self.t, self.sigma1, self.sigma2
        r1 = t * s1 * np.cos(self.psi_e) + s * s2 * np.cos(self.phi_e) + a * nu + g * mu
        r2 = s * s1 * np.cos(self.zeta) + t * s2 * np.cos(self.xi) + a * mu + g * nu
        return np.array([r1, r2])


def extension_construct(P: ExtensionPoint, tol: float = DEFAULT_TOL) -> HurwitzSystem:
    """Twelve-column chart ``(eps2 | c2 | w2)`` over ``(0 | c1 | w1)`` and ``(0 | 0 | I)``."""
    for v in (P.alpha, P.gamma, P.mu, P.nu):
        if abs(v) > 1:
            raise InputError("extension point needs |alpha|, |gamma|, |mu|, |nu| <= 1")
    if any(x < -tol or x > np.pi + tol for x in P.ext_angles()):
        raise InputError("extension angles must lie in [0, pi]")
    res = np.abs(P.constraint_residual()).max()
    if res > tol:
        raise InputError(f"extension constraint failure (residual {res:.3e})")
    s, t = P.s, P.t
    pe, qe, ze, xe = P.ext_angles()
    eps = np.diag([s * np.sin(pe), t * np.sin(qe), s * np.sin(ze), t * np.sin(xe)])
    c2 = np.zeros((4, 4))
    c2[0, 1] = s * np.cos(pe)
    c2[1, 0] = t * np.cos(qe)
    c2[2, 3] = s * np.cos(ze)
    c2[3, 2] = t * np.cos(xe)
    c1 = np.diag([P.sigma1, P.sigma2, P.sigma2, P.sigma1])
    first = np.hstack([eps, c2, cross_block(P.alpha, 0.0, P.gamma)])
    second = np.hstack([np.zeros((4, 4)), c1, spin_block(P.mu, P.nu)])
    F = _anchor(first, second, width=12)
    return _checked(F, "extension_construct", tol)


def _angle(c: int) -> float:
    return 0.0 if c > 0 else float(np.pi)


def _solve_n1(alpha: float, eps: float) -> ExtensionPoint:
    # phi_e = 0, others pi/2: s sigma2 = -alpha nu - gamma mu and alpha mu + gamma nu = 0,
    # with nu = eps alpha (so mu = -gamma eps)
    if not (1 < eps ** 2 < 1 / alpha ** 2):
        raise InputError("infeasible family parameters: need 1 < eps^2 < 1/alpha^2")
    s = np.sqrt(1 - alpha ** 2)
    g2 = alpha ** 2 + np.sign(eps) * s * np.sqrt(1 / eps ** 2 - alpha ** 2)
    if not (0 <= g2 < 1):
        raise InputError(f"infeasible family parameters: gamma^2 = {g2:.6g}")
    gamma = np.sqrt(g2)
    nu, mu = eps * alpha, -gamma * eps
    if abs(mu) >= 1:
        raise InputError(f"infeasible family parameters: |mu| = {abs(mu):.6g} >= 1")
    return ExtensionPoint(alpha, float(gamma), float(mu), float(nu), 0.0, np.pi / 2, np.pi / 2, np.pi / 2)


def _solve_n2(alpha: float, nu: float, gamma: Optional[float] = None) -> ExtensionPoint:
    # zeta = xi = pi/2 and phi_e, psi_e in {0, pi}; then alpha mu + gamma nu = 0 and
    # t sigma1 cos(psi_e) + s sigma2 cos(phi_e) = -alpha nu - gamma mu.
    if not (abs(alpha) < 1 and abs(nu) < 1):
        raise InputError("infeasible family parameters: need |alpha|, |nu| < 1")
    a, n = np.arccos(alpha), np.arccos(nu)
    cands = []
    # equal flat angles: in the angles c, m of gamma, mu the first constraint is
    # cos(c -+ m) = -cos(a -+ n), and the second fixes m through a tangent
    for c0 in (1, -1):
        K = -np.cos(a - c0 * n)
        for d in (np.arccos(np.clip(K, -1, 1)), -np.arccos(np.clip(K, -1, 1))):
            if abs(np.sin(d)) < 1e-12 or abs(np.cos(n)) < 1e-12:
                continue
            m = np.arctan(c0 * (np.cos(a) + np.cos(d) * np.cos(n)) / (np.sin(d) * np.cos(n))) % np.pi
            c = c0 * m + d
            if 0 < m < np.pi and 0 < c < np.pi:
                ang = _angle(c0)
                cands.append(ExtensionPoint(alpha, float(np.cos(c)), float(np.cos(m)), nu, ang, ang, np.pi / 2, np.pi / 2))
    # opposite flat angles: s = t and sigma1 = sigma2 cancel the first constraint
    for pe, qe in ((0.0, np.pi), (np.pi, 0.0)):
        for g, mu in ((-alpha, nu), (alpha, -nu)):
            cands.append(ExtensionPoint(alpha, g, mu, nu, pe, qe, np.pi / 2, np.pi / 2))
    cands = [P for P in cands if np.abs(P.constraint_residual()).max() < 1e-10 and abs(P.mu) < 1 and abs(P.gamma) < 1]
    if not cands:
        raise InputError("infeasible family parameters: no admissible root")
    if gamma is not None:
        cands.sort(key=lambda P: abs(P.gamma - gamma))
    return cands[0]


def ellipse_points(alpha: float, gamma: float, tol: float = 1e-12) -> list[ExtensionPoint]:
    """All admissible points with three normal angles in {0, pi} and zeta = pi/2.

    Solving the two constraints for sigma1 and sigma2 gives two centered
    ellipses in the (mu, nu) plane; each sign pattern of the three flat
    angles is root-found from four quadrant seeds and kept when both sigmas
    come out nonnegative.
    """
    if not (abs(alpha) < 1 and abs(gamma) < 1):
        raise InputError("infeasible family parameters: need |alpha|, |gamma| < 1")
    s, t = np.sqrt(1 - alpha ** 2), np.sqrt(1 - gamma ** 2)
    found: list[ExtensionPoint] = []
    for cphi, cpsi, cxi in itertools.product((1, -1), repeat=3):

        def sig(x):
            mu, nu = x
            s2 = (-alpha * mu - gamma * nu) / (t * cxi)
            s1 = (-alpha * nu - gamma * mu - s * s2 * cphi) / (t * cpsi)
            return s1, s2

        def f(x):
            s1, s2 = sig(x)
            return [1 - x[0] ** 2 - s1 ** 2, 1 - x[1] ** 2 - s2 ** 2]

        for seed in itertools.product((0.7, -0.7), repeat=2):
            x, _, ier, _ = fsolve(f, seed, full_output=True, xtol=1e-14)
            if ier != 1 or np.abs(x).max() >= 1 or np.abs(f(x)).max() > tol:
                continue
            s1, s2 = sig(x)
            if min(s1, s2) < -1e-10:
                continue
            P = ExtensionPoint(alpha, gamma, float(x[0]), float(x[1]), _angle(cphi), _angle(cpsi), np.pi / 2, _angle(cxi))
            if np.abs(P.constraint_residual()).max() > 1e-10:
                continue
            if all(abs(P.mu - Q.mu) + abs(P.nu - Q.nu) > 1e-8 or P.ext_angles() != Q.ext_angles() for Q in found):
                found.append(P)
    found.sort(key=lambda P: (P.ext_angles(), P.mu, P.nu))
    return found


def extension_solve(family: str, **params) -> ExtensionPoint:
    """Solve one of the three reduced constraint systems.

    N1: ``alpha``, ``eps`` (one flat angle). N2: ``alpha``, ``nu`` and an
    optional ``gamma`` used to pick among roots (two flat angles). N3:
    ``alpha``, ``gamma`` (three flat angles).
    """
    fam = family.upper()
    if fam == "N1":
        return _solve_n1(float(params["alpha"]), float(params["eps"]))
    if fam == "N2":
        g = params.get("gamma")
        return _solve_n2(float(params["alpha"]), float(params["nu"]), None if g is None else float(g))
    if fam == "N3":
        pts = ellipse_points(float(params["alpha"]), float(params["gamma"]))
        if not pts:
            raise InputError("infeasible family parameters: the ellipses have no admissible intersection")
        return pts[0]
    raise InputError(f"unknown family {family!r}")


def exp_coordinates(F2tilde, tol: float = 1e-12) -> np.ndarray:
    """Signed normal angles of the four rows of a 4 x 12 first matrix.

    Each row splits as (normal part y, tangent part z) with |y|^2 + |z|^2 = 1;
    the angle is atan2(|y|, |z|), negated when the dominant entry of y is
    negative.
    """
    F = np.asarray(F2tilde, float)
    if F.shape != (4, 12):
        raise InputError(f"expected a 4 x 12 matrix, got {F.shape}")
    if np.abs(np.linalg.norm(F, axis=1) - 1).max() > 1e-8:
        raise InputError("rows must be unit vectors")
    y, z = F[:, :4], F[:, 4:]
    zn = np.linalg.norm(z, axis=1)
    if zn.min() <= tol:
        raise InputError("outside chart domain: a tangent row vanishes")
    yn = np.linalg.norm(y, axis=1)
    lead = y[np.arange(4), np.argmax(np.abs(y), axis=1)]
    sign = np.where(lead < 0, -1.0, 1.0)
    return sign * np.arctan2(yn, zn)


def exp_map(x, v) -> np.ndarray:
    """Normal exponential map at a unit tangent point x in direction v."""
    x = np.asarray(x, float)
    v = np.asarray(v, float)
    r = np.linalg.norm(v)
    if r == 0:
        return np.concatenate([np.zeros_like(v), x])
    return np.concatenate([np.sin(r) * v / r, np.cos(r) * x])


def ta_pairing_gap(grid: int = 25, margin: float = 0.3) -> tuple[float, float]:
    """Evidence for the paired degeneration in the sigma1 = 0 chart.

    With mu = +-1 and phi_e in {0, pi}, the first constraint fixes gamma from
    (alpha, nu). Returns (largest gap between |t sigma2| and the right side
    of the second constraint, smallest second-constraint residual relative
    to t sigma2 over xi kept ``margin`` away from {0, pi}) across a grid of
    (alpha, nu) and all signs.
    """
    worst_pair = 0.0
    least_resid = np.inf
    xs = np.linspace(-0.95, 0.95, grid)
    xis = np.linspace(margin, np.pi - margin, 200)
    for mu, cphi in itertools.product((1.0, -1.0), (1.0, -1.0)):
        for a, nu in itertools.product(xs, xs):
            s, s2 = np.sqrt(1 - a ** 2), np.sqrt(1 - nu ** 2)
            g = -(s * s2 * cphi + a * nu) / mu
            if abs(g) >= 1 - 1e-9:
                continue
            t = np.sqrt(1 - g ** 2)
            need = -(a * mu + g * nu)
            worst_pair = max(worst_pair, abs(abs(need) - t * s2))
            least_resid = min(least_resid, np.abs(t * s2 * np.cos(xis) - need).min() / (t * s2))
    return worst_pair, least_resid
