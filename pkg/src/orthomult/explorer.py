"""Sampling of the moduli families, Jacobian ranks, and penalty-based existence probes."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .canonical import (
    CanonicalInvariants,
    TUPLE_ORDER,
    invariants_from_parker,
    parker_from_invariants,
)
from .hurwitz import (
    DEFAULT_TOL,
    HurwitzSystem,
    InputError,
    PreconditionError,
    gram_from_system,
    hurwitz_residuals,
    verify_hurwitz,
)
from .moduli import (
    AnomalousPoint,
    ExtensionPoint,
    GrandPoint,
    T248Point,
    T347Point,
    anomalous_construct,
    be_residual,
    consistent_signs,
    extension_construct,
    grand_construct,
    t248_construct,
    t347_construct,
)
from .parker import gram_from_parker, normalize_parker, parker_of_system

COMPONENTS = ("Grand", "Anomalous", "T347", "T248", "Extension")
NONEXISTENCE_FLOOR = 1e-2
FULLNESS_FLOOR = 0.25

ModuliPoint = Union[GrandPoint, AnomalousPoint, T347Point, T248Point, ExtensionPoint]


def rng_for(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one stream; streams are keyed by seed xor index."""
    return np.random.Generator(np.random.Philox((int(seed) ^ int(stream)) & 0xFFFFFFFFFFFFFFFF))


def _component(name: str) -> str:
    for c in COMPONENTS:
        if c.lower() == str(name).lower():
            return c
    raise InputError(f"unknown component {name!r}; expected one of {COMPONENTS}")


# ---- sampling ---------------------------------------------------------------------

def _draw_grand(rng) -> Optional[GrandPoint]:
    alpha, mu = rng.uniform(-0.9, 0.9, 2)
    r = np.sqrt((1 - alpha ** 2) * (1 - mu ** 2))
    u = rng.uniform(-r, r, 3)
    if u @ u > r ** 2:
        return None
    sign = 1 if rng.random() < 0.5 else -1
    return GrandPoint(float(alpha), float(mu), float(u[1]), float(u[2]), float(u[0] - alpha * mu), beta_sign=sign)


def _draw_anomalous(rng) -> Optional[AnomalousPoint]:
    kind = rng.random()
    if kind < 0.2:
        phi, theta = rng.uniform(0, np.pi, 2)
        ang = (phi, phi, theta, np.pi - theta)
    elif kind < 0.4:
        w = rng.dirichlet(np.ones(4)) * np.pi
        ang = tuple(w)
    else:
        # three free angles; eta from a linear relation sum c_i angle_i = pi (mod 2 pi)
        phi, psi, theta = rng.uniform(0, np.pi, 3)
        c = rng.choice([-1.0, 1.0], 3)
        eta = (np.pi - c[0] * phi - c[1] * psi - c[2] * theta) % (2 * np.pi)
        if eta > np.pi:
            eta = 2 * np.pi - eta
        ang = (phi, psi, theta, eta)
    ang = tuple(float(x) for x in ang)
    signs = consistent_signs(*ang, tol=1e-11)
    if not signs:
        return None
    return AnomalousPoint(*ang, signs=signs[0])


def _draw_t347(rng) -> T347Point:
    nu = rng.uniform(-0.95, 0.95)
    return T347Point(float(nu), int(rng.choice([1, -1])), int(rng.choice([1, -1])))


def _draw_t248(rng) -> T248Point:
    mu, nu = rng.uniform(-1, 1, 2)
    return T248Point(float(mu), float(nu))


def _pair_angles(rng, lead, other, target):
    # lead * cos(x) + other * cos(y) = target with x drawn first
    cx = rng.uniform(-1, 1)
    if abs(other) < 1e-12:
        return None
    cy = (target - lead * cx) / other
    if abs(cy) > 1:
        return None
    return float(np.arccos(cx)), float(np.arccos(cy))


def _draw_extension(rng) -> Optional[ExtensionPoint]:
    alpha, gamma, mu, nu = rng.uniform(-0.9, 0.9, 4)
    s, t = np.sqrt(1 - alpha ** 2), np.sqrt(1 - gamma ** 2)
    s1, s2 = np.sqrt(1 - mu ** 2), np.sqrt(1 - nu ** 2)
    first = _pair_angles(rng, s * s2, t * s1, -alpha * nu - gamma * mu)
    second = _pair_angles(rng, s * s1, t * s2, -alpha * mu - gamma * nu)
    if first is None or second is None:
        return None
    phi_e, psi_e = first
    zeta, xi = second
    return ExtensionPoint(float(alpha), float(gamma), float(mu), float(nu), phi_e, psi_e, zeta, xi)


_DRAWERS = {
    "Grand": (_draw_grand, grand_construct),
    "Anomalous": (_draw_anomalous, anomalous_construct),
    "T347": (_draw_t347, t347_construct),
    "T248": (_draw_t248, t248_construct),
    "Extension": (_draw_extension, extension_construct),
}


def sample(component: str, count: int, seed: int = 0, max_draws: int = 10 ** 6) -> list:
    """Draw ``count`` valid (point, system) pairs; deterministic for a fixed seed."""
    comp = _component(component)
    if count < 1:
        raise InputError("count must be >= 1")
    draw, build = _DRAWERS[comp]
    rng = rng_for(seed, 0)
    out = []
    draws = 0
    while len(out) < count:
        draws += 1
        if draws > max_draws or (draws >= 1000 and len(out) < draws * 1e-3):
            raise RuntimeError(f"component sampling starved: {len(out)} accepted of {draws} draws for {comp}")
        P = draw(rng)
        if P is None:
            continue
        try:
            H = build(P)
        except InputError:
            continue
        if not verify_hurwitz(H, 1e-9).passed:
            continue
        out.append((P, H))
    return out


# ---- Jacobian rank ----------------------------------------------------------------

def _anomalous_relation(P: AnomalousPoint, tol: float = 1e-9):
    """A linear relation c . angles = pi + 2 pi k that keeps the point consistent."""
    ang = np.array(P.angles())
    signs = P.signs
    if signs is None:
        cands = consistent_signs(*ang, tol=tol)
        if not cands:
            raise InputError("inconsistent angle quadruple: no sign assignment satisfies the consistency identities")
        signs = cands[0]
    for c in itertools.product((1.0, -1.0), repeat=4):
        c = np.array(c)
        k = (c @ ang - np.pi) / (2 * np.pi)
        if abs(k - round(k)) > tol:
            continue
        k = round(k)

        def eta_of(x, c=c, k=k):
            return (np.pi + 2 * np.pi * k - c[:3] @ x) / c[3]

        probe = ang[:3] + 1e-3 * np.array([0.3, -0.2, 0.5])
        trial = (*probe, eta_of(probe))
        if be_residual(*trial, signs) < 1e-12:
            return eta_of, tuple(signs)
    raise PreconditionError("no linear consistency relation through this anomalous point")


def chart_map(component: str, point) -> tuple[np.ndarray, Callable[[np.ndarray], np.ndarray], float]:
    """(base parameters, map parameters -> flattened Gram tensor, distance to the boundary)."""
    comp = _component(component)
    if comp == "Grand":
        P = point
        x0 = np.array(P.coords())

        def f(x):
            Q = GrandPoint(*x, branch=P.branch, beta_sign=P.beta_sign)
            return gram_from_system(grand_construct(Q, tol=1e-8)).entries.ravel()

        margin = min(1 - abs(P.alpha), 1 - abs(P.mu), P.beta_squared)
        return x0, f, margin
    if comp == "Anomalous":
        P = point
        eta_of, signs = _anomalous_relation(P)
        x0 = np.array(P.angles()[:3])

        def f(x):
            Q = AnomalousPoint(*x, eta_of(x), signs=signs)
            return gram_from_system(anomalous_construct(Q, tol=1e-8)).entries.ravel()

        ang = P.angles()
        margin = min(min(a, np.pi - a) for a in ang)
        return x0, f, margin
    if comp == "T347":
        P = point

        def f(x):
            return gram_from_system(t347_construct(T347Point(float(x[0]), P.mu_sign, P.gamma_sign))).entries.ravel()

        return np.array([P.nu]), f, 1 - abs(P.nu)
    if comp == "T248":
        P = point

        def f(x):
            return gram_from_system(t248_construct(T248Point(*x))).entries.ravel()

        return np.array([P.mu, P.nu]), f, min(1 - abs(P.mu), 1 - abs(P.nu))
    # Extension: the full chart is the nine normal-form Parker coordinates
    if isinstance(point, ExtensionPoint):
        C = normalize_parker(parker_of_system(extension_construct(point))).C
        inv = invariants_from_parker(C)
    elif isinstance(point, CanonicalInvariants):
        inv = point
    else:
        inv = CanonicalInvariants(**dict(zip(TUPLE_ORDER, map(float, point))), sigma1=0.0, sigma2=0.0)
    x0 = np.array(inv.as_tuple())

    def f(x):
        I = CanonicalInvariants(**dict(zip(TUPLE_ORDER, x)), sigma1=0.0, sigma2=0.0)
        return gram_from_parker(parker_from_invariants(I)).entries.ravel()

    margin = float(np.linalg.eigvalsh(f(x0).reshape(12, 12))[0])
    return x0, f, margin


def jacobian(component: str, point, step: float = 1e-5) -> np.ndarray:
    x0, f, _ = chart_map(component, point)
    cols = []
    for i in range(len(x0)):
        e = np.zeros_like(x0)
        e[i] = step
        cols.append((f(x0 + e) - f(x0 - e)) / (2 * step))
    return np.array(cols).T


def jacobian_rank(component: str, point, step: float = 1e-5, rank_tol: float = 1e-6) -> int:
    """Numerical rank of the parameter -> Gram map by central differences."""
    if step <= 0 or rank_tol <= 0:
        raise InputError("step and rank_tol must be positive")
    _, _, margin = chart_map(component, point)
    if margin <= 10 * step:
        raise PreconditionError(f"boundary proximity: margin {margin:.3g} <= 10 * step")
    s = np.linalg.svd(jacobian(component, point, step), compute_uv=False)
    return int(np.sum(s > rank_tol * s[0])) if s[0] > 0 else 0


# ---- penalty and existence probe -----------------------------------------------------

@dataclass(frozen=True)
class ProbeConfig:
    """Target type and optimizer budget. ``seed`` keys the per-restart streams."""

    m: int = 3
    n: int = 4
    p: int = 5
    restarts: int = 20
    max_iters: int = 5000
    seed: int = 0
    penalty_tol: float = 1e-6
    polish_iters: int = 100
    fullness_floor: float = FULLNESS_FLOOR
    chunk: int = 50

    def __post_init__(self):
        if self.restarts < 1 or self.max_iters < 1 or self.polish_iters < 0:
            raise InputError("restarts and max_iters must be >= 1, polish_iters >= 0")
        if not (1 <= self.m <= self.n <= self.p <= self.m * self.n):
            raise InputError(f"need m <= n <= p <= mn, got ({self.m}, {self.n}, {self.p})")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise InputError("seed must be a 64-bit unsigned integer")
        if self.penalty_tol <= 0 or self.fullness_floor < 0:
            raise InputError("penalty_tol must be positive and fullness_floor nonnegative")


@dataclass(frozen=True)
class ProbeResult:
    best_residual: float
    best_system: HurwitzSystem
    per_restart: tuple
    feasible: bool
    config: ProbeConfig = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "best_residual": self.best_residual,
            "feasible": self.feasible,
            "per_restart": list(self.per_restart),
            "median_residual": float(np.median(self.per_restart)),
        }


def _batch_residuals(F: np.ndarray) -> np.ndarray:
    R, m, n, _ = F.shape
    P = np.einsum("ranp,rbkp->rabnk", F, F)
    return P + P.transpose(0, 2, 1, 3, 4) - 2 * np.eye(m)[None, :, :, None, None] * np.eye(n)


def _spectrum(F: np.ndarray, floor: float):
    R, m, n, p = F.shape
    X = F.reshape(R, m * n, p)
    lam, V = np.linalg.eigh(np.einsum("rip,riq->rpq", X, X))
    return X, V, np.maximum(floor - lam, 0.0)


def penalty(F: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Half the squared Frobenius norm of all E_ab, plus the squared fullness deficits.

    E_ab = F_a F_b^T + F_b F_a^T - 2 delta_ab I. The fullness term pushes every
    eigenvalue of X^T X (X the stacked product rows) up to ``floor``. Accepts a
    single (m, n, p) system or a batch.
    """
    F = np.asarray(F, float)
    single = F.ndim == 3
    Fb = F[None] if single else F
    val = 0.5 * (_batch_residuals(Fb) ** 2).sum(axis=(1, 2, 3, 4))
    if floor > 0:
        val = val + (_spectrum(Fb, floor)[2] ** 2).sum(1)
    return val[0] if single else val


def penalty_gradient(F: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Analytic gradient: 4 sum_b E_ab F_b, minus 4 sum_i d_i X v_i v_i^T for the floor."""
    F = np.asarray(F, float)
    single = F.ndim == 3
    Fb = F[None] if single else F
    g = 4 * np.einsum("rabnk,rbkp->ranp", _batch_residuals(Fb), Fb)
    if floor > 0:
        X, V, d = _spectrum(Fb, floor)
        gx = -4 * np.einsum("rip,rpk,rk,rqk->riq", X, V, d, V)
        g = g + gx.reshape(Fb.shape)
    return g[0] if single else g


def _descend(F, floor, iters, c=1e-4, shrink=0.5):
    """Gradient descent with Armijo backtracking, each restart independent."""
    R = F.shape[0]
    f = penalty(F, floor)
    t = np.full(R, 0.05)
    live = np.ones(R, bool)
    hist = f.copy()
    for it in range(iters):
        if not live.any():
            break
        idx = np.flatnonzero(live)
        Fl, fl = F[idx], f[idx]
        g = penalty_gradient(Fl, floor)
        gn = (g ** 2).sum(axis=(1, 2, 3))
        step = 2 * t[idx]
        pending = np.ones(len(idx), bool)
        for _ in range(50):
            cand = Fl - step[:, None, None, None] * g
            fc = penalty(cand, floor)
            ok = pending & (fc <= fl - c * step * gn)
            Fl[ok], fl[ok] = cand[ok], fc[ok]
            pending &= ~ok
            if not pending.any():
                break
            step[pending] *= shrink
        F[idx], f[idx], t[idx] = Fl, fl, step
        # stop a restart once it is converged or has stalled over the last 100 steps
        if (it + 1) % 100 == 0:
            stalled = f > 0.999 * hist
            live &= ~((f < 1e-28) | stalled)
            hist = f.copy()
    return F, f


def _lm_system(F, floor):
    """Residual vector and Jacobian whose squared norm is the penalty."""
    R, m, n, p = F.shape
    E = _batch_residuals(F)
    ia, ib = np.triu_indices(m)
    w = np.where(ia == ib, np.sqrt(0.5), 1.0)
    r_h = (w[None, :, None, None] * E[:, ia, ib]).reshape(R, -1)
    J = np.zeros((R, len(ia), n, n, m, n, p))
    for q, (a, b) in enumerate(zip(ia, ib)):
        for i in range(n):
            # d E_ab[i, k] / d F_a[i, :] = F_b[k, :], and the three mirrored terms
            J[:, q, i, :, a, i, :] += F[:, b]
            J[:, q, :, i, b, i, :] += F[:, a]
            J[:, q, i, :, b, i, :] += F[:, a]
            J[:, q, :, i, a, i, :] += F[:, b]
        J[:, q] *= w[q]
    J = J.reshape(R, -1, m * n * p)
    if floor > 0:
        X, V, d = _spectrum(F, floor)
        Jf = -2 * np.einsum("rik,rqk->rkiq", np.einsum("rip,rpk->rik", X, V), V) * (d > 0)[:, :, None, None]
        return np.concatenate([r_h, d], 1), np.concatenate([J, Jf.reshape(R, p, -1)], 1)
    return r_h, J


def _polish(F, floor, iters):
    """Levenberg-Marquardt on the same penalty; only accepted steps are kept."""
    if iters == 0:
        return F, penalty(F, floor)
    R = F.shape[0]
    shape = F.shape
    x = F.reshape(R, -1).copy()
    lam = np.full(R, 1e-3)
    r, J = _lm_system(F, floor)
    f = (r ** 2).sum(1)
    eye = np.eye(x.shape[1])
    for _ in range(iters):
        g = np.einsum("rij,ri->rj", J, r)
        A = np.einsum("rij,rik->rjk", J, J) + lam[:, None, None] * eye
        dx = -np.linalg.solve(A, g[..., None])[..., 0]
        xn = x + dx
        rn, Jn = _lm_system(xn.reshape(shape), floor)
        fn = (rn ** 2).sum(1)
        ok = fn < f
        x[ok], r[ok], J[ok], f[ok] = xn[ok], rn[ok], Jn[ok], fn[ok]
        lam = np.clip(np.where(ok, lam / 3, lam * 4), 1e-15, 1e8)
    F = x.reshape(shape)
    return F, penalty(F, floor)


def _initial(cfg: ProbeConfig, restart: int) -> np.ndarray:
    rng = rng_for(cfg.seed, restart)
    G = rng.standard_normal((cfg.m, cfg.p, cfg.n))
    Q, _ = np.linalg.qr(G)
    return Q.transpose(0, 2, 1)


def existence_probe(cfg: ProbeConfig, warm_start: Optional[HurwitzSystem] = None) -> ProbeResult:
    """Minimize the Hurwitz penalty from random orthonormal starts.

    Restart r draws from its own stream keyed by ``seed ^ r``; restart 0 is
    replaced by ``warm_start`` when given. Residual is the square root of the
    final penalty, fullness term included.
    """
    starts = [_initial(cfg, r) for r in range(cfg.restarts)]
    if warm_start is not None:
        W = np.asarray(warm_start.matrices if isinstance(warm_start, HurwitzSystem) else warm_start, float)
        if W.shape != (cfg.m, cfg.n, cfg.p):
            raise InputError(f"warm start has shape {W.shape}, expected {(cfg.m, cfg.n, cfg.p)}")
        starts[0] = W.copy()
    F = np.array(starts)
    finals, vals = [], []
    for lo in range(0, cfg.restarts, cfg.chunk):
        Fc = F[lo:lo + cfg.chunk].copy()
        Fc, _ = _descend(Fc, cfg.fullness_floor, cfg.max_iters)
        Fc, fc = _polish(Fc, cfg.fullness_floor, cfg.polish_iters)
        finals.append(Fc)
        vals.append(fc)
    F = np.concatenate(finals)
    res = np.sqrt(np.maximum(np.concatenate(vals), 0.0))
    best = int(np.argmin(res))
    return ProbeResult(float(res[best]), HurwitzSystem(F[best]), tuple(float(x) for x in res),
                       bool(res[best] <= cfg.penalty_tol), cfg)


def gradient_check(cfg: ProbeConfig, trials: int = 20, step: float = 1e-6) -> float:
    """Largest relative error of the analytic gradient against central differences."""
    if trials < 1:
        raise InputError("trials must be >= 1")
    worst = 0.0
    for k in range(trials):
        F = rng_for(cfg.seed, k).standard_normal((cfg.m, cfg.n, cfg.p))
        g = penalty_gradient(F, cfg.fullness_floor)
        fd = np.zeros_like(F)
        for idx in np.ndindex(F.shape):
            e = np.zeros_like(F)
            e[idx] = step
            fd[idx] = (penalty(F + e, cfg.fullness_floor) - penalty(F - e, cfg.fullness_floor)) / (2 * step)
        worst = max(worst, float(np.linalg.norm(fd - g) / max(np.linalg.norm(g), 1e-300)))
    return worst
