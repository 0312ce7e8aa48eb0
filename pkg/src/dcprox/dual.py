"""Dual subproblem engine: the dual objective of the linearized proximal
subproblem, an inexact proximal-point outer loop, and a semismooth Newton
inner solver with CG and a Wolfe-type line search."""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, LineSearchStallError, SubsolverFailureError
from .numerics import LinearMap, cg_solve


@dataclass
class DualSubproblem:
    """Frozen data defining one dual problem min Psi(zeta).

    A is F'(x_k); c = F(x_k); b = A x_k - c; u = grad G(x_k) applied to the
    selected subgradient; theta2_x = theta2(G(x_k)).  The constant term of
    Psi is +theta2_x, which makes q(x(zeta*)) + Psi(zeta*) vanish at the
    solution (exact strong duality against the primal model q).
    """

    A: object
    x_k: np.ndarray
    c: np.ndarray
    b: np.ndarray
    Ax_k: np.ndarray
    u: np.ndarray
    gamma: float
    alpha: float
    theta1: object
    h: object
    theta2_x: float = 0.0

    def __post_init__(self):
        if self.gamma <= 0 or self.alpha <= 0:
            raise InvalidInputError("DualSubproblem: gamma and alpha must be positive")


@dataclass
class PpaConfig:
    """Proximal-point and Newton parameters (admissible ranges per the method)."""

    tau0: float = 1.0
    tau_min: float = 1e-6
    tau_decay: float = 0.1
    eta_bar: float = 1e-2      # CG tolerance cap
    beta: float = 0.5          # line-search backtracking factor
    varsigma: float = 0.5      # CG tolerance exponent
    c1: float = 1e-4
    c2: float = 0.25
    newton_max: int = 100
    cg_max: int = 100
    ls_max: int = 60
    ppa_max: int = 100
    fallback_tol: float = 1e-9     # absolute dual-gradient exit, scaled by 1+||c||
    inner_factor: float = 0.1      # Newton exit: ||grad|| <= max(inner_factor*tau*||move||, inner_abs)
    inner_abs: float = 1e-12
    newton_budget: int = 0         # >0: per-solve Newton-step budget; exhausting it
                                   # returns status "budget" for the caller to handle
    tau0_adaptive: bool = True     # scale the first proximal weight to the warm
                                   # start's gradient so good starts skip the
                                   # heavily regularized rounds
    cg_rel_floor: float = 0.0      # >0: never ask CG for more than this relative
                                   # accuracy (the absolute rule over-solves when
                                   # the gradient is large); 0 keeps the pure rule

    def __post_init__(self):
        if not (0 < self.c1 < self.c2 < 0.5):
            raise InvalidInputError("PpaConfig: need 0 < c1 < c2 < 1/2")
        if not (0 < self.beta < 1 and 0 < self.eta_bar < 1 and 0 < self.varsigma <= 1):
            raise InvalidInputError("PpaConfig: line-search/CG parameters out of range")


class _Eval:
    """All quantities derived from one dual point zeta (shared prox evaluations).

    The gradient needs one extra forward application, so it materializes
    lazily; line-search trials that fail the sufficient-decrease test never
    pay for it."""

    __slots__ = ("zeta", "v", "z1", "zh", "x", "y", "psi", "_d", "_Ax")

    def __init__(self, d, zeta):
        self.zeta = zeta
        self._d = d
        self._Ax = None
        self.v = d.A.apply_adjoint(zeta) + d.u
        self.z1 = zeta / d.alpha + d.c
        self.zh = d.x_k - self.v / d.gamma
        self.y = d.theta1.prox(self.z1, 1.0 / d.alpha)
        self.x = d.h.prox(self.zh, 1.0 / d.gamma)
        dy = self.y - self.z1
        dx = self.x - self.zh
        env1 = d.theta1.value(self.y) + 0.5 * d.alpha * float(dy @ dy)
        envh = d.h.value(self.x) + 0.5 * d.gamma * float(dx @ dx)
        self.psi = (float(zeta @ zeta) / (2.0 * d.alpha) - env1
                    + float(self.v @ self.v) / (2.0 * d.gamma) - envh + d.theta2_x)

    @property
    def Ax(self):
        if self._Ax is None:
            self._Ax = self._d.A.apply(self.x)
        return self._Ax

    @property
    def grad(self):
        return self.y - (self.Ax - self._d.b)


def eval_psi(d, zeta):
    """Dual objective Psi(zeta), assembled from Moreau envelopes of theta1 and h."""
    return _Eval(d, np.asarray(zeta, dtype=float)).psi


def eval_grad_psi(d, zeta):
    """Closed-form gradient P_{1/alpha}theta1(zeta/alpha + c) - (A x(zeta) - b);
    validated against finite differences by the test suite before use."""
    return _Eval(d, np.asarray(zeta, dtype=float)).grad


def recover_primal(d, zeta):
    """Primal pair from a dual point: x = P_{1/gamma}h(x_k - (A*zeta+u)/gamma),
    y = P_{1/alpha}theta1(zeta/alpha + c)."""
    ev = _Eval(d, np.asarray(zeta, dtype=float))
    return ev.x, ev.y


def _newton_operator(d, ev, tau):
    def apply(dd):
        t1 = d.theta1.prox_jacobian_apply(ev.z1, 1.0 / d.alpha, dd) / d.alpha
        inner = d.h.prox_jacobian_apply(ev.zh, 1.0 / d.gamma, d.A.apply_adjoint(dd))
        return tau * dd + t1 + d.A.apply(inner) / d.gamma

    m = d.c.shape[0]
    return LinearMap(m, m, apply, apply)


def newton_step(d, zeta, tau, zeta_ref, cfg):
    """One semismooth Newton step on Psi + (tau/2)||. - zeta_ref||^2 from zeta.

    Returns (zeta_next, cg_iterations)."""
    ev, cg_iters, _ = _newton_step(d, _Eval(d, np.asarray(zeta, dtype=float)), tau,
                                   np.asarray(zeta_ref, dtype=float), cfg)
    return ev.zeta, cg_iters


def _newton_step(d, ev, tau, zeta_ref, cfg):
    """Newton step on a prepared evaluation; returns (new _Eval, cg_iters, backtracks).

    The CG tolerance is min(eta_bar, ||grad||^(1+varsigma)); the step must
    pass both the Armijo and the curvature condition at the same trial point.
    """
    move = ev.zeta - zeta_ref
    g_l = ev.grad + tau * move
    ng = float(np.linalg.norm(g_l))
    if ng == 0.0:
        return ev, 0, 0
    W = _newton_operator(d, ev, tau)
    tol = min(cfg.eta_bar, ng ** (1.0 + cfg.varsigma))
    if cfg.cg_rel_floor > 0.0:
        tol = max(tol, cfg.cg_rel_floor * ng)
    direction, _, cg_iters = cg_solve(W, -g_l, tol, cfg.cg_max)
    gd = float(g_l @ direction)
    if gd >= 0.0:
        raise LineSearchStallError(f"non-descent Newton direction (<g,d> = {gd:.3e})")
    psi_l = ev.psi + 0.5 * tau * float(move @ move)
    if cfg.c1 * abs(gd) <= 8.0 * np.finfo(float).eps * (1.0 + abs(psi_l)):
        # the sufficient-decrease test is below float resolution: take the
        # unit Newton step (local quadratic convergence regime)
        return _Eval(d, ev.zeta + direction), cg_iters, 0
    step = 1.0
    armijo_only = None
    for backtracks in range(cfg.ls_max + 1):
        trial = ev.zeta + step * direction
        ev_t = _Eval(d, trial)
        move_t = trial - zeta_ref
        psi_l_t = ev_t.psi + 0.5 * tau * float(move_t @ move_t)
        if psi_l_t <= psi_l + cfg.c1 * step * gd:
            g_l_t = ev_t.grad + tau * move_t
            if abs(float(g_l_t @ direction)) <= cfg.c2 * abs(gd):
                return ev_t, cg_iters, backtracks
            if armijo_only is None:
                armijo_only = (ev_t, backtracks)
        step *= cfg.beta
    if armijo_only is not None:
        # the dyadic grid can skip the curvature window entirely when the
        # generalized Hessian jumps across prox kinks; sufficient decrease
        # alone keeps every monotonicity invariant, so take that step
        ev_t, backtracks = armijo_only
        return ev_t, cg_iters, backtracks
    raise LineSearchStallError(
        f"line search exhausted {cfg.ls_max} backtracks (||g||={ng:.3e}, tau={tau:.3e})")


@dataclass
class PpaResult:
    zeta: np.ndarray
    x: np.ndarray
    y: np.ndarray
    Ax: np.ndarray
    psi: float
    gap: float
    status: str                # "accepted" or "fallback"
    ppa_iters: int = 0
    newton_iters: int = 0
    cg_iters: int = 0


def ppa_solve(d, cfg, zeta_init, accept):
    """Inexact dual PPA: Newton-solve successive proximal subproblems until the
    caller's certificate fires or the dual gradient is numerically zero.

    ``accept(ev)`` receives the current evaluation (exposing the recovered
    primal ``ev.x``, its image ``ev.Ax`` and ``ev.psi``) and returns
    ``(accepted, gap)``.  The certificate is re-checked after every Newton
    step: the needed quantities are already on hand, and any point passing it
    is valid.  The gradient fallback is mandatory: near outer convergence the
    certificate's right-hand side vanishes and may never fire in floats.

    With a positive ``newton_budget`` the solve returns status "budget" after
    that many Newton steps without a certificate; the outer loop treats this
    like a failed descent test and escalates its proximal weight, which makes
    the next subproblem easier.
    """
    zeta = np.array(zeta_init, dtype=float, copy=True)
    ev = _Eval(d, zeta)
    fallback_cut = cfg.fallback_tol * (1.0 + float(np.linalg.norm(d.c)))
    eps = np.finfo(float).eps
    tau = cfg.tau0
    if cfg.tau0_adaptive:
        g0 = float(np.linalg.norm(ev.grad)) / (1.0 + float(np.linalg.norm(zeta)))
        tau = min(cfg.tau0, max(cfg.tau_min, g0))
    ppa_iters = newton_total = cg_total = 0
    best_gap = math.inf

    def finish(status, gap):
        return PpaResult(ev.zeta, ev.x, ev.y, ev.Ax, ev.psi, gap, status,
                         ppa_iters, newton_total, cg_total)

    while True:
        ok, gap = accept(ev)
        best_gap = min(best_gap, gap)
        if ok:
            return finish("accepted", gap)
        if float(np.linalg.norm(ev.grad)) <= fallback_cut:
            return finish("fallback", gap)
        if ppa_iters >= cfg.ppa_max:
            raise SubsolverFailureError(
                f"dual PPA hit its iteration cap ({cfg.ppa_max})", best_gap=best_gap,
                context={"gamma": d.gamma, "alpha": d.alpha})
        zeta_ref = ev.zeta.copy()
        psi_round_start = ev.psi
        for _ in range(cfg.newton_max):
            move = ev.zeta - zeta_ref
            g_l = ev.grad + tau * move
            ng_l = float(np.linalg.norm(g_l))
            if ng_l <= max(cfg.inner_factor * tau * float(np.linalg.norm(move)),
                           cfg.inner_abs):
                break
            if 0 < cfg.newton_budget <= newton_total:
                return finish("budget", gap)
            psi_l_before = ev.psi + 0.5 * tau * float(move @ move)
            try:
                ev, cg_i, _ = _newton_step(d, ev, tau, zeta_ref, cfg)
            except LineSearchStallError:
                if cfg.newton_budget > 0:
                    # budgeted mode treats an unusable direction like an
                    # exhausted budget; strict mode keeps the error contract
                    return finish("budget", gap)
                raise
            newton_total += 1
            cg_total += cg_i
            ok, gap = accept(ev)
            best_gap = min(best_gap, gap)
            if ok:
                return finish("accepted", gap)
            if float(np.linalg.norm(ev.grad)) <= fallback_cut:
                return finish("fallback", gap)
            move = ev.zeta - zeta_ref
            psi_l_after = ev.psi + 0.5 * tau * float(move @ move)
            if psi_l_after > psi_l_before - 4.0 * eps * (1.0 + abs(psi_l_before)):
                break  # no representable decrease left at this precision
        if (tau <= cfg.tau_min
                and ev.psi > psi_round_start - 4.0 * eps * (1.0 + abs(psi_round_start))):
            # a full proximal round at the terminal weight produced no
            # representable progress: float64 floor, return the best point
            return finish("fallback", gap)
        tau = max(cfg.tau_min, tau * cfg.tau_decay)
        ppa_iters += 1
