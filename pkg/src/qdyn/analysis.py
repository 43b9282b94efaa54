"""Fixed points, Jacobians, spectra and bifurcation scans.

Jacobian conventions
--------------------
``bql_jacobian`` is the derivative of the logit response map
``pi -> softmax(E R(pi_opp) / T)`` in cooperation coordinates
``(pi1_C, pi2_C)``: zero diagonal, off-diagonal ``c p q / (T (p + q)^2)``
with ``c = R_CC - R_CD - R_DC + R_DD``. The one-step BQL map relates to it
at the fixed point by ``J_map = (1 - alpha) I + alpha J_response``
(``bql_map_jacobian``). ``cpa_jacobian`` is the full derivative of the
CPA map, identity included.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from qdyn.detmodels import bql_map_step, cpa_map_step
from qdyn.errors import BranchError, ConvergenceError, InputDomainError
from qdyn.game import GameSpec
from qdyn.linalg import eigenvalues
from qdyn.policy import boltzmann_policy, per_agent, policy_from_cooperation, softmax, split
from qdyn.stochastic import AgentParams, agent_pair

STABILITY_TOL = 1e-8
BQL_TOL = 1e-12
CPA_TOL = 1e-10

STABLE_NODE = "stable node"
STABLE_FOCUS = "stable focus"
UNSTABLE_FOCUS = "unstable focus"
UNSTABLE_NODE = "unstable node"
SADDLE = "saddle"
NONHYPERBOLIC = "nonhyperbolic"
FAILED = "failed"


# --------------------------------------------------------------------------
# fixed points


def logit_response(pi, game, temperatures):
    """Each agent's Boltzmann response to the other's current policy."""
    temps = per_agent(temperatures, "temperatures")
    pis = split(pi, game.n_actions)
    return np.concatenate([
        softmax(game.rewards[i] @ pis[1 - i], temps[i]) for i in range(2)
    ])


def bql_residual(pi, game, temperatures):
    """Sup-norm distance between a joint policy and its logit response."""
    return float(np.max(np.abs(np.asarray(pi) - logit_response(pi, game, temperatures))))


def _free(pi, n0):
    return np.concatenate([pi[: n0 - 1], pi[n0:-1]])


def _full(x, n0):
    a, b = x[: n0 - 1], x[n0 - 1:]
    return np.concatenate([a, [1.0 - a.sum()], b, [1.0 - b.sum()]])


def _newton_polish(pi, game, temps, tol, max_iter=20):
    n0 = game.n_actions[0]

    def g(x):
        full = _full(x, n0)
        return x - _free(logit_response(full, game, temps), n0)

    x = _free(pi, n0)
    best = (bql_residual(pi, game, temps), pi)
    for _ in range(max_iter):
        if best[0] <= 0.1 * tol:
            break
        jac = finite_difference_jacobian(g, x, h=1e-7)
        try:
            dx = np.linalg.solve(jac, -g(x))
        except np.linalg.LinAlgError:
            break
        x_new = x + dx
        full = _full(x_new, n0)
        if not np.all((full > 0.0) & (full < 1.0)):
            break
        res = bql_residual(full, game, temps)
        x = x_new
        if res < best[0]:
            best = (res, full)
        elif res >= best[0]:
            break
    return best[1], best[0]


def _symmetric_bisection(game, temp, tol):
    r = game.rewards[0]

    def excess(x):
        opp = np.array([x, 1.0 - x])
        return x - softmax(r @ opp, temp)[0]

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 0.01 * tol:
            break
    x = 0.5 * (lo + hi)
    return np.array([x, 1.0 - x, x, 1.0 - x])


def _response_2x2(r0, r1, t0, t1, x, y):
    # cooperation probability of each agent's logit response; r* are flat 2x2 rows
    e0 = (r0[2] - r0[0]) * y + (r0[3] - r0[1]) * (1.0 - y)
    e1 = (r1[2] - r1[0]) * x + (r1[3] - r1[1]) * (1.0 - x)
    return _logistic(-e0 / t0), _logistic(-e1 / t1)


def _logistic(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def _solve_2x2(game, temps, tol, damping, max_iter):
    r0 = [float(v) for v in game.rewards[0].ravel()]
    r1 = [float(v) for v in game.rewards[1].ravel()]
    t0, t1 = temps
    x = y = 0.5
    res = math.inf
    for _ in range(max_iter):
        rx, ry = _response_2x2(r0, r1, t0, t1, x, y)
        res = max(abs(x - rx), abs(y - ry))
        if res <= tol:
            break
        x += damping * (rx - x)
        y += damping * (ry - y)
    if res > tol and game.is_symmetric() and t0 == t1:
        pi = _symmetric_bisection(game, t0, tol)
        x = y = float(pi[0])
        rx, ry = _response_2x2(r0, r1, t0, t1, x, y)
        res = max(abs(x - rx), abs(y - ry))
    for _ in range(20):
        if res <= 0.1 * tol:
            break
        # Newton on (x - rx, y - ry) with central-difference derivatives
        h = 1e-7
        gx = []
        for dx, dy in ((h, 0.0), (-h, 0.0), (0.0, h), (0.0, -h)):
            ax, ay = _response_2x2(r0, r1, t0, t1, x + dx, y + dy)
            gx.append((x + dx - ax, y + dy - ay))
        j00 = (gx[0][0] - gx[1][0]) / (2 * h)
        j10 = (gx[0][1] - gx[1][1]) / (2 * h)
        j01 = (gx[2][0] - gx[3][0]) / (2 * h)
        j11 = (gx[2][1] - gx[3][1]) / (2 * h)
        det = j00 * j11 - j01 * j10
        if det == 0.0:
            break
        fx, fy = x - rx, y - ry
        nx = x - (j11 * fx - j01 * fy) / det
        ny = y - (-j10 * fx + j00 * fy) / det
        if not (0.0 < nx < 1.0 and 0.0 < ny < 1.0):
            # overshoot past the boundary: the plain response is always interior
            nx, ny = rx, ry
        nrx, nry = _response_2x2(r0, r1, t0, t1, nx, ny)
        nres = max(abs(nx - nrx), abs(ny - nry))
        if nres >= res:
            break
        x, y, rx, ry, res = nx, ny, nrx, nry, nres
    return np.array([x, 1.0 - x, y, 1.0 - y]), res


def solve_bql_fixed_point(game: GameSpec, temperature, tol=BQL_TOL, damping=0.5,
                          max_iter=20_000, start=None):
    """Logit quantal response equilibrium of ``game``.

    Damped self-consistent iteration from the uniform policy, a bisection
    on the symmetric one-dimensional reduction if that stalls (symmetric
    2x2 games only), then Newton polishing with finite-difference
    derivatives.

    Returns
    -------
    numpy.ndarray
        Flat joint policy with ``bql_residual <= tol``.

    Raises
    ------
    ConvergenceError
        If the residual cannot be brought below ``tol``.
    """
    temps = per_agent(temperature, "temperature")
    if min(temps) <= 0.0 or not all(math.isfinite(t) for t in temps):
        raise InputDomainError(f"temperature must be positive, got {temperature}")
    if game.n_actions == (2, 2) and start is None:
        pi, res = _solve_2x2(game, temps, tol, damping, max_iter)
    else:
        n0, n1 = game.n_actions
        if start is None:
            pi = np.concatenate([np.full(n0, 1.0 / n0), np.full(n1, 1.0 / n1)])
        else:
            pi = np.array(start, dtype=np.float64)
        res = np.inf
        for _ in range(max_iter):
            resp = logit_response(pi, game, temps)
            res = float(np.max(np.abs(pi - resp)))
            if res <= tol:
                break
            pi = (1.0 - damping) * pi + damping * resp
        if res > tol:
            pi, res = _newton_polish(pi, game, temps, tol)
    # report the residual of the returned point in the common sup-norm
    res = max(res, bql_residual(pi, game, temps))
    if res > tol:
        raise ConvergenceError("logit equilibrium did not converge", res)
    return pi


def target_values(game, agent, opponent_policy, params):
    """Values a Q-table relaxes to when the opponent plays ``opponent_policy``.

    ``E R_a + gamma / (1 - gamma) * max_b E R_b`` for every own action.
    """
    p = agent_pair(params)[agent]
    er = game.rewards[agent] @ np.asarray(opponent_policy, dtype=np.float64)
    return er + p.gamma / (1.0 - p.gamma) * er.max()


def cpa_bracket(q, game, params):
    """The TD-target bracket of the CPA map, ``E R_a + gamma max Q - Q_a``."""
    p = agent_pair(params)
    pi = boltzmann_policy(q, (p[0].temperature, p[1].temperature), game.n_actions)
    qs = split(q, game.n_actions)
    pis = split(pi, game.n_actions)
    return np.concatenate([
        game.rewards[i] @ pis[1 - i] + p[i].gamma * qs[i].max() - qs[i] for i in range(2)
    ])


def solve_cpa_fixed_point(game: GameSpec, params, tol=CPA_TOL, pi_star=None):
    """Fixed point of the CPA map in Q-space.

    Built from the logit equilibrium: each agent's Q-values are its target
    values against the equilibrium opponent policy.
    """
    p = agent_pair(params)
    temps = (p[0].temperature, p[1].temperature)
    if pi_star is None:
        pi_star = solve_bql_fixed_point(game, temps)
    pis = split(pi_star, game.n_actions)
    q = np.concatenate([target_values(game, i, pis[1 - i], p) for i in range(2)])
    res = float(np.max(np.abs(cpa_bracket(q, game, p))))
    if res > tol:
        raise ConvergenceError("CPA fixed point bracket above tolerance", res)
    return q


# --------------------------------------------------------------------------
# Jacobians


def finite_difference_jacobian(fun, x, h=None):
    """Central-difference Jacobian of ``fun`` at ``x``.

    ``h`` defaults to ``1e-6 * (1 + |x_j|)`` per coordinate; a scalar or a
    vector overrides it.
    """
    x = np.asarray(x, dtype=np.float64)
    if h is None:
        steps = 1e-6 * (1.0 + np.abs(x))
    else:
        steps = np.broadcast_to(np.asarray(h, dtype=np.float64), x.shape)
        if np.any(steps <= 0.0):
            raise InputDomainError("perturbation must be positive")
    f0 = np.asarray(fun(x), dtype=np.float64)
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += steps[j]
        xm[j] -= steps[j]
        # divide by the step actually taken, not the requested one
        jac[:, j] = (np.asarray(fun(xp)) - np.asarray(fun(xm))) / (xp[j] - xm[j])
    return jac


def _require_2x2(game):
    if game.n_actions != (2, 2):
        raise InputDomainError("analytic Jacobians are implemented for 2x2 games")


def bql_jacobian(pi_star, game, temperature):
    """Jacobian of the logit response map in ``(pi1_C, pi2_C)`` coordinates."""
    _require_2x2(game)
    temps = per_agent(temperature, "temperature")
    pi = np.asarray(pi_star, dtype=np.float64)
    if pi.size == 2:
        pi = policy_from_cooperation(pi)
    pis = split(pi, game.n_actions)
    jac = np.zeros((2, 2))
    for i in range(2):
        er = game.rewards[i] @ pis[1 - i]
        # p q / (p + q)^2 written as a logistic product to avoid overflow
        s = 1.0 / (1.0 + math.exp((er[1] - er[0]) / temps[i]))
        jac[i, 1 - i] = game.interaction_prefactor(i) * s * (1.0 - s) / temps[i]
    return jac


def bql_map_jacobian(pi_star, game, params):
    """Jacobian of the one-step BQL map at its fixed point (cooperation coords)."""
    p = agent_pair(params)
    response = bql_jacobian(pi_star, game, (p[0].temperature, p[1].temperature))
    alpha = np.array([p[0].alpha, p[1].alpha])
    return np.diag(1.0 - alpha) + alpha[:, None] * response


def logit_response_c(pi_c, game, temperatures):
    """Logit response restricted to cooperation coordinates (2x2 games)."""
    out = logit_response(policy_from_cooperation(pi_c), game, temperatures)
    return out[[0, 2]]


def bql_map_step_c(pi_c, game, params):
    """BQL map restricted to cooperation coordinates (2x2 games)."""
    return bql_map_step(policy_from_cooperation(pi_c), game, params)[[0, 2]]


def cpa_jacobian(q_star, game, params):
    """Analytic 4x4 Jacobian of the CPA map on the branch ``Q_C < Q_D``.

    The expression holds at any state where each agent's defect value is
    strictly the larger one, not only at the fixed point.
    """
    _require_2x2(game)
    p = agent_pair(params)
    q = np.asarray(q_star, dtype=np.float64)
    if q.shape != (4,):
        raise InputDomainError("Q-state must have four entries")
    if not (q[0] < q[1] and q[2] < q[3]):
        raise BranchError(
            f"analytic Jacobian assumes Q_C < Q_D for both agents, got {q}"
        )
    temps = (p[0].temperature, p[1].temperature)
    pi = boltzmann_policy(q, temps)
    pc = pi[[0, 2]]
    qc = q[[0, 2]]
    qd = q[[1, 3]]
    dpi = pc * (1.0 - pc) / np.array(temps)
    f = np.empty(2)
    g = np.empty(2)
    h = np.empty(2)
    k = np.empty(2)
    for i in range(2):
        o = 1 - i
        r = game.rewards[i]
        a, gam = p[i].alpha, p[i].gamma
        f[i] = a * dpi[i] * (pc[o] * r[0, 0] + (1.0 - pc[o]) * r[0, 1] + gam * qd[i] - qc[i])
        g[i] = a * pc[i] * dpi[o] * (r[0, 0] - r[0, 1])
        h[i] = a * dpi[i] * (pc[o] * r[1, 0] + (1.0 - pc[o]) * r[1, 1] - (1.0 - gam) * qd[i])
        k[i] = a * (1.0 - pc[i]) * dpi[o] * (r[1, 0] - r[1, 1])
    jac = np.zeros((4, 4))
    for i in range(2):
        o = 1 - i
        a, gam = p[i].alpha, p[i].gamma
        rc, rd = 2 * i, 2 * i + 1
        oc, od = 2 * o, 2 * o + 1
        jac[rc, rc] = f[i] - a * pc[i] + 1.0
        jac[rc, rd] = -f[i] + a * gam * pc[i]
        jac[rc, oc] = g[i]
        jac[rc, od] = -g[i]
        jac[rd, rc] = -h[i]
        jac[rd, rd] = h[i] - a * (1.0 - gam) * (1.0 - pc[i]) + 1.0
        jac[rd, oc] = k[i]
        jac[rd, od] = -k[i]
    return jac


# --------------------------------------------------------------------------
# spectra and classification


def classify_fixed_point(eigs, tol=STABILITY_TOL):
    """Classify a fixed point of a discrete-time map from its spectrum."""
    lam = np.asarray(eigs, dtype=np.complex128)
    if lam.size == 0:
        raise InputDomainError("need at least one eigenvalue")
    mods = np.abs(lam)
    if np.any(np.abs(mods - 1.0) <= tol):
        return NONHYPERBOLIC
    is_complex = np.abs(lam.imag) > 0.0
    if np.all(mods < 1.0):
        return STABLE_FOCUS if np.any(is_complex) else STABLE_NODE
    top = mods.max()
    dominant = np.abs(mods - top) <= tol * top
    if np.any(is_complex & dominant):
        return UNSTABLE_FOCUS
    return SADDLE if np.any(mods < 1.0) else UNSTABLE_NODE


def _cplx(lam):
    return [{"re": float(z.real), "im": float(z.imag)} for z in lam]


@dataclass
class StabilityReport:
    """Linearisation of a deterministic map at its fixed point."""

    model: str
    params: tuple
    fixed_point_policy: np.ndarray
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    spectral_radius: float
    classification: str
    fixed_point_q: np.ndarray | None = None

    def to_dict(self):
        return {
            "model": self.model,
            "params": [vars(p).copy() for p in self.params],
            "fixed_point_policy": self.fixed_point_policy.tolist(),
            "pi_c_star": [float(self.fixed_point_policy[0]), float(self.fixed_point_policy[2])],
            "fixed_point_q": None if self.fixed_point_q is None else self.fixed_point_q.tolist(),
            "jacobian": self.jacobian.tolist(),
            "eigenvalues": _cplx(self.eigenvalues),
            "spectral_radius": self.spectral_radius,
            "classification": self.classification,
        }


def _report(model, params, pi, jac, q=None):
    lam = eigenvalues(jac)
    return StabilityReport(
        model=model, params=agent_pair(params), fixed_point_policy=pi, jacobian=jac,
        eigenvalues=lam, spectral_radius=float(np.max(np.abs(lam))),
        classification=classify_fixed_point(lam), fixed_point_q=q,
    )


def bql_stability(game, params):
    """Stability of the BQL map's fixed point (one-step map Jacobian)."""
    p = agent_pair(params)
    pi = solve_bql_fixed_point(game, (p[0].temperature, p[1].temperature))
    return _report("bql", p, pi, bql_map_jacobian(pi, game, p))


def cpa_stability(game, params, pi_star=None):
    """Stability of the CPA map's fixed point (4x4 analytic Jacobian)."""
    p = agent_pair(params)
    temps = (p[0].temperature, p[1].temperature)
    if pi_star is None:
        pi_star = solve_bql_fixed_point(game, temps)
    q = solve_cpa_fixed_point(game, p, pi_star=pi_star)
    return _report("cpa", p, boltzmann_policy(q, temps), cpa_jacobian(q, game, p), q)


# --------------------------------------------------------------------------
# bifurcation scan


@dataclass
class Crossing:
    """A change in the number of eigenvalues outside the unit circle."""

    gamma_lo: float
    gamma_hi: float
    kind: str
    direction: str
    eigenvalues_lo: np.ndarray
    eigenvalues_hi: np.ndarray

    @property
    def gamma(self):
        return 0.5 * (self.gamma_lo + self.gamma_hi)

    def to_dict(self):
        return {
            "gamma": self.gamma, "gamma_lo": self.gamma_lo, "gamma_hi": self.gamma_hi,
            "kind": self.kind, "direction": self.direction,
            "eigenvalues_lo": _cplx(self.eigenvalues_lo),
            "eigenvalues_hi": _cplx(self.eigenvalues_hi),
        }


@dataclass
class TypeChange:
    """A change of fixed-point type without an eigenvalue crossing |z| = 1.

    Typically a complex pair colliding on the real axis (focus -> node or
    saddle).
    """

    gamma_lo: float
    gamma_hi: float
    before: str
    after: str
    eigenvalues_lo: np.ndarray
    eigenvalues_hi: np.ndarray

    @property
    def gamma(self):
        return 0.5 * (self.gamma_lo + self.gamma_hi)

    def to_dict(self):
        return {
            "gamma": self.gamma, "gamma_lo": self.gamma_lo, "gamma_hi": self.gamma_hi,
            "before": self.before, "after": self.after,
            "eigenvalues_lo": _cplx(self.eigenvalues_lo),
            "eigenvalues_hi": _cplx(self.eigenvalues_hi),
        }


@dataclass
class BifurcationScan:
    gamma_grid: np.ndarray
    spectral_radii: np.ndarray
    eigenvalues: list
    classifications: list
    pi_c_star: np.ndarray
    crossings: list = field(default_factory=list)
    type_changes: list = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    @property
    def critical_gammas(self):
        return [c.gamma for c in self.crossings]

    def first_neimark_sacker(self):
        for c in self.crossings:
            if c.kind == "neimark-sacker" and c.direction == "destabilising":
                return c
        return None

    def csv_rows(self):
        width = max((len(l) for l in self.eigenvalues if l is not None), default=4)
        header = ["gamma"] + [f"lambda{k + 1}_abs" for k in range(width)] + ["classification"]
        rows = [header]
        for g, lam, cls in zip(self.gamma_grid, self.eigenvalues, self.classifications):
            mods = [repr(float(abs(z))) for z in lam] if lam is not None else ["nan"] * width
            rows.append([repr(float(g))] + mods + [cls])
        return rows

    def to_dict(self):
        return {
            "gamma_grid": [float(g) for g in self.gamma_grid],
            "spectral_radii": [float(r) for r in self.spectral_radii],
            "eigenvalues": [None if l is None else _cplx(l) for l in self.eigenvalues],
            "classifications": list(self.classifications),
            "pi_c_star": [float(x) for x in self.pi_c_star],
            "crossings": [c.to_dict() for c in self.crossings],
            "type_changes": [c.to_dict() for c in self.type_changes],
            "failures": {str(k): v for k, v in self.failures.items()},
        }


def _with_gamma(params, gamma):
    return tuple(
        AgentParams(alpha=p.alpha, gamma=float(gamma), temperature=p.temperature, beta=p.beta)
        for p in agent_pair(params)
    )


def _spectrum_at(game, params, gamma, pi_star):
    rep = cpa_stability(game, _with_gamma(params, gamma), pi_star=pi_star)
    return rep


def _n_unstable(lam):
    return int(np.sum(np.abs(lam) > 1.0))


def _crossing_kind(lam_lo, lam_hi):
    # the eigenvalue(s) nearest the unit circle at the bracket ends
    lam = np.concatenate([lam_lo, lam_hi])
    z = lam[np.argmin(np.abs(np.abs(lam) - 1.0))]
    if abs(z.imag) > 0.0:
        return "neimark-sacker"
    return "fold" if z.real > 0.0 else "flip"


def bifurcation_scan(game, params, gamma_grid, interval_tol=1e-4, jobs=1):
    """Spectrum of the CPA fixed point over a grid of discount factors.

    Every change in the number of eigenvalues outside the unit circle
    between neighbouring grid points is refined by bisection until the
    bracket is no wider than ``interval_tol``. Solver failures are recorded
    in ``failures`` and the scan carries on.
    """
    grid = np.asarray(gamma_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise InputDomainError("gamma grid must be a non-empty vector")
    if np.any(np.diff(grid) <= 0.0):
        raise InputDomainError("gamma grid must be strictly increasing")
    if grid[0] < 0.0 or grid[-1] >= 1.0:
        raise InputDomainError("gamma grid must lie in [0, 1)")
    p = agent_pair(params)
    temps = (p[0].temperature, p[1].temperature)
    # the projected fixed point does not depend on gamma
    pi_star = solve_bql_fixed_point(game, temps)

    def one(g):
        try:
            return _spectrum_at(game, p, g, pi_star), None
        except (ConvergenceError, BranchError, InputDomainError) as exc:
            return None, str(exc)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, grid))
    else:
        results = [one(g) for g in grid]

    radii = np.full(grid.size, np.nan)
    spectra, classes, failures = [], [], {}
    for k, (rep, err) in enumerate(results):
        if rep is None:
            spectra.append(None)
            classes.append(FAILED)
            failures[float(grid[k])] = err
            continue
        radii[k] = rep.spectral_radius
        spectra.append(rep.eigenvalues)
        classes.append(rep.classification)

    crossings, type_changes = [], []
    for k in range(grid.size - 1):
        if spectra[k] is None or spectra[k + 1] is None:
            continue
        n_lo, n_hi = _n_unstable(spectra[k]), _n_unstable(spectra[k + 1])
        if n_lo != n_hi:
            same = lambda rep, n_lo=n_lo: _n_unstable(rep.eigenvalues) == n_lo
        elif classes[k] != classes[k + 1]:
            same = lambda rep, c=classes[k]: rep.classification == c
        else:
            continue
        lo, hi = float(grid[k]), float(grid[k + 1])
        lam_lo, lam_hi = spectra[k], spectra[k + 1]
        while hi - lo > interval_tol:
            mid = 0.5 * (lo + hi)
            rep, _ = one(mid)
            if rep is None:
                break
            if same(rep):
                lo, lam_lo = mid, rep.eigenvalues
            else:
                hi, lam_hi = mid, rep.eigenvalues
        if n_lo != n_hi:
            crossings.append(Crossing(
                gamma_lo=lo, gamma_hi=hi, kind=_crossing_kind(lam_lo, lam_hi),
                direction="destabilising" if n_hi > n_lo else "stabilising",
                eigenvalues_lo=lam_lo, eigenvalues_hi=lam_hi,
            ))
        else:
            type_changes.append(TypeChange(
                gamma_lo=lo, gamma_hi=hi, before=classes[k], after=classes[k + 1],
                eigenvalues_lo=lam_lo, eigenvalues_hi=lam_hi,
            ))
    return BifurcationScan(
        gamma_grid=grid, spectral_radii=radii, eigenvalues=spectra, classifications=classes,
        pi_c_star=pi_star[[0, game.n_actions[0]]], crossings=crossings,
        type_changes=type_changes, failures=failures,
    )
