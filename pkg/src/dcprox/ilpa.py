"""Outer inexact linearized proximal loop: subgradient selection for the
concave part, the gamma-escalation inner loop with the descent test, the
shared stopping rules, and full trace recording."""

import csv
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dual import DualSubproblem, PpaConfig, ppa_solve
from .exceptions import ContractViolationError, GammaCapError, InvalidInputError
from .model import eval_phi, theta2_value, theta2_xi
from .numerics import RandomSource, power_iteration

STATUS_STEP = "step-tol"
STATUS_OBJECTIVE = "objective-tol"
STATUS_ITER = "iter-cap"
STATUS_ABORTED = "aborted"

TRACE_COLUMNS = ("k", "phi", "xi", "gamma_k", "j_k", "step_norm", "dual_gap",
                 "ppa_iters", "newton_iters", "cg_iters", "wall_ms")


@dataclass
class IlpaConfig:
    rho: float = 2.0
    gamma_min: float = 10.0
    gamma_max: float = 1e6
    mu: float | None = None            # None -> gamma_min/8
    gamma0: object = None              # None -> gamma_min; a float fixes the
                                       # per-iteration start; "adaptive" warm-starts
                                       # it from the last accepted level (shrinking
                                       # by rho after escalation-free iterations)
    alpha0: float = 0.5
    alpha_decay: float = 1.2
    alpha_floor: float = 1e-3
    alpha_period: int = 3
    eps1: float = 5e-6
    eps2: float = 5e-4
    kbar: int = 10
    kmax: int = 2000
    inexact_mode: str = "paper"        # "paper": gamma_min/2 threshold, "theory": mu/2
    tight_gap: float | None = None     # extra absolute certificate cap (diagnostics mode)
    ppa: PpaConfig = field(default_factory=PpaConfig)
    step_accept: object = None         # optional extra predicate for the step-tol stop
    check_q_bound: bool = True

    def __post_init__(self):
        if self.rho <= 1:
            raise InvalidInputError("IlpaConfig: rho must exceed 1")
        if not (0 < self.gamma_min < self.gamma_max):
            raise InvalidInputError("IlpaConfig: need 0 < gamma_min < gamma_max")
        if self.mu is not None and not (0 < self.mu < self.gamma_min / 4):
            raise InvalidInputError("IlpaConfig: need 0 < mu < gamma_min/4")
        if self.inexact_mode not in ("paper", "theory"):
            raise InvalidInputError(f"IlpaConfig: unknown inexact mode {self.inexact_mode!r}")

    @property
    def mu_value(self):
        return self.mu if self.mu is not None else self.gamma_min / 8.0

    @property
    def certificate_coeff(self):
        return self.mu_value / 2.0 if self.inexact_mode == "theory" else self.gamma_min / 2.0


@dataclass
class TraceRecord:
    k: int
    phi: float
    xi: float
    gamma_k: float
    j_k: int
    step_norm: float
    dual_gap: float
    ppa_iters: int
    newton_iters: int
    cg_iters: int
    wall_ms: float


def write_trace_csv(records, path, header_fields=None):
    """Serialize trace records with the fixed column order; ``header_fields``
    (e.g. thread count, backend) go into a leading comment line."""
    with open(path, "w", newline="") as fh:
        if header_fields:
            fh.write("# " + ",".join(f"{k}={v}" for k, v in header_fields.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in records:
            writer.writerow([r.k, repr(r.phi), repr(r.xi), repr(r.gamma_k), r.j_k,
                             repr(r.step_norm), repr(r.dual_gap), r.ppa_iters,
                             r.newton_iters, r.cg_iters, f"{r.wall_ms:.3f}"])


def update_alpha(k, alpha_prev, cfg):
    """alpha_k = max(alpha_{k-1}/decay, floor) on iterations with k % period == 0."""
    if k >= 1 and k % cfg.alpha_period == 0:
        return max(alpha_prev / cfg.alpha_decay, cfg.alpha_floor)
    return alpha_prev


class _Frozen:
    """Per-outer-iteration linearization data shared across the gamma loop."""

    __slots__ = ("x", "Fx", "Gx", "A", "Gjac", "xi", "u", "theta2_x", "Ax", "phi")

    def __init__(self, p, x, phi):
        self.x = x
        self.phi = phi
        self.Fx = p.F.eval(x)
        self.A = p.F.jacobian_at(x)
        self.Ax = self.A.apply(x)
        if p.theta2 is None:
            self.Gx = None
            self.Gjac = None
            self.xi = None
            self.u = np.zeros(p.dim)
            self.theta2_x = 0.0
        else:
            self.Gx = self.Fx if p.G is p.F else p.G.eval(x)
            self.Gjac = self.A if p.G is p.F else p.G.jacobian_at(x)
            self.xi = theta2_xi(p, self.Gx)
            self.u = self.Gjac.apply_adjoint(self.xi)
            self.theta2_x = theta2_value(p, self.Gx)


def _q_pieces(p, frozen, gamma, alpha, x_new, Ax_new):
    """Model value q_{k,j}(x_new) plus the shared intermediates."""
    d = x_new - frozen.x
    Ad = Ax_new - frozen.Ax
    ellF = Ax_new - (frozen.Ax - frozen.Fx)
    dQ2 = gamma * float(d @ d) + alpha * float(Ad @ Ad)
    h_new = p.h.value(x_new)
    q = (p.theta1.value(ellF) + float(frozen.u @ d) + h_new + 0.5 * dQ2
         - frozen.theta2_x)
    return q, ellF, dQ2, d, h_new


def inner_gamma_loop(p, cfg, frozen, alpha_k, gamma0, zeta_init):
    """Escalate gamma by rho until the certificate and the descent test both
    hold; returns the accepted candidate and its diagnostics."""
    coeff = cfg.certificate_coeff
    zeta = zeta_init
    ppa_total = newton_total = cg_total = 0
    j = 0
    while True:
        gamma_j = gamma0 * cfg.rho**j
        if gamma_j > cfg.gamma_max * (1.0 + 1e-12):
            raise GammaCapError(
                f"gamma escalation passed gamma_max={cfg.gamma_max:.3e} at j={j}",
                diagnostics={"gamma0": gamma0, "rho": cfg.rho, "j": j,
                             "phi": frozen.phi, "alpha": alpha_k})
        dual = DualSubproblem(A=frozen.A, x_k=frozen.x, c=frozen.Fx,
                              b=frozen.Ax - frozen.Fx, Ax_k=frozen.Ax, u=frozen.u,
                              gamma=gamma_j, alpha=alpha_k,
                              theta1=p.theta1, h=p.h, theta2_x=frozen.theta2_x)

        def accept(ev, _gamma=gamma_j):
            q, _, _, d, _ = _q_pieces(p, frozen, _gamma, alpha_k, ev.x, ev.Ax)
            gap = q + ev.psi
            ok = gap < coeff * float(d @ d)
            if cfg.tight_gap is not None:
                ok = ok and gap <= cfg.tight_gap
            return ok, gap

        res = ppa_solve(dual, cfg.ppa, zeta, accept)
        zeta = res.zeta
        ppa_total += res.ppa_iters
        newton_total += res.newton_iters
        cg_total += res.cg_iters

        q, ellF, dQ2, d, h_new = _q_pieces(p, frozen, gamma_j, alpha_k, res.x, res.Ax)
        # descent test: Theta(x_cand) <= theta1(ellF) - theta2(ellG) + dQ2/2
        F_new = p.F.eval(res.x)
        theta1_new = p.theta1.value(F_new)
        if p.theta2 is None:
            theta2_new = 0.0
            ell_term = p.theta1.value(ellF)
        else:
            G_new = F_new if p.G is p.F else p.G.eval(res.x)
            theta2_new = theta2_value(p, G_new)
            ellG = ellF if p.G is p.F else frozen.Gx + frozen.Gjac.apply(d)
            ell_term = p.theta1.value(ellF) - theta2_value(p, ellG)
        descent_ok = theta1_new - theta2_new <= ell_term + 0.5 * dQ2
        phi_new = theta1_new - theta2_new + h_new
        if res.status == "budget":
            # no certificate within the work budget: keep the candidate only
            # if it still decreases the objective and passes the descent
            # test, otherwise make the subproblem easier by escalating
            if not (descent_ok and phi_new < frozen.phi):
                j += 1
                continue
        elif not descent_ok:
            j += 1
            continue
        xi_new = (p.theta1.value(ellF) + float(frozen.u @ d) + h_new
                  - frozen.theta2_x + dQ2)
        return {"x": res.x, "gamma": gamma_j, "j": j, "zeta": zeta,
                "gap": res.gap, "phi": phi_new, "xi": xi_new,
                "step_norm": float(np.linalg.norm(d)),
                "ppa": ppa_total, "newton": newton_total, "cg": cg_total}


def ilpa_run(p, cfg, x0):
    """Run the outer loop from x0; returns (x_final, trace, status)."""
    x = np.array(x0, dtype=float).copy()
    phi = eval_phi(p, x)
    if not np.isfinite(phi):
        raise InvalidInputError("ilpa_run: Phi(x0) must be finite (x0 in dom h)")
    trace = [TraceRecord(0, phi, phi, 0.0, 0, math.nan, math.nan, 0, 0, 0, 0.0)]
    zeta = np.zeros(p.F.dim_out)
    alpha = cfg.alpha0
    adaptive_gamma0 = cfg.gamma0 == "adaptive"
    gamma0 = cfg.gamma_min if (cfg.gamma0 is None or adaptive_gamma0) else cfg.gamma0
    norm_rng = RandomSource(0x5EED)
    power_vec = None
    q_bound_warned = False
    phis = [phi]
    status = STATUS_ITER

    for k in range(1, cfg.kmax + 1):
        t0 = time.perf_counter()
        if k > 1:
            alpha = update_alpha(k - 1, alpha, cfg)
        frozen = _Frozen(p, x, phi)

        # conjugate-cache identity: Xi collapses to Phi at s = x
        phi_check = p.theta1.value(frozen.Fx) - frozen.theta2_x + p.h.value(x)
        if abs(phi_check - phi) > 1e-9 * max(1.0, abs(phi)):
            raise ContractViolationError(
                f"potential identity Xi(x,x) = Phi(x) violated at k={k}: "
                f"{phi_check!r} vs {phi!r}")

        if cfg.check_q_bound and not q_bound_warned:
            sigma, power_vec = power_iteration(frozen.A, 2, norm_rng, v0=power_vec)
            if alpha * sigma**2 > (cfg.rho - 1.0) * gamma0 * (1.0 + 1e-9):
                q_bound_warned = True
                warnings.warn(
                    f"Q_k bound alpha*||A||^2 <= (rho-1)*gamma violated at k={k} "
                    f"({alpha * sigma**2:.3e} > {(cfg.rho - 1) * gamma0:.3e}); proceeding",
                    RuntimeWarning, stacklevel=2)

        inner = inner_gamma_loop(p, cfg, frozen, alpha, gamma0, zeta)
        zeta = inner["zeta"]
        phi_new = inner["phi"]
        if phi_new > phi + 1e-12 * max(1.0, abs(phi)):
            raise ContractViolationError(
                f"objective increased at k={k}: {phi!r} -> {phi_new!r}")

        wall = (time.perf_counter() - t0) * 1e3
        trace.append(TraceRecord(k, phi_new, inner["xi"], inner["gamma"],
                                 inner["j"], inner["step_norm"], inner["gap"],
                                 inner["ppa"], inner["newton"], inner["cg"], wall))
        if adaptive_gamma0:
            # trust-region flavor within the algorithm's stated freedom
            # (gamma_{k,0} may be any value in [gamma_min, gamma_max])
            gamma0 = inner["gamma"] / cfg.rho if inner["j"] == 0 else inner["gamma"]
            gamma0 = min(max(gamma0, cfg.gamma_min), cfg.gamma_max)
        x = inner["x"]
        phi = phi_new
        phis.append(phi)

        if p.lower_bound_hint is not None and phi < p.lower_bound_hint - 1e-6:
            status = STATUS_ABORTED
            break
        if inner["step_norm"] / p.step_scale <= cfg.eps1 and (
                cfg.step_accept is None or cfg.step_accept(x)):
            status = STATUS_STEP
            break
        if k >= cfg.kbar:
            window = max(abs(phi - phis[max(0, k - j)]) for j in range(1, 10))
            if window / max(1.0, phi) <= cfg.eps2:
                status = STATUS_OBJECTIVE
                break
    return x, trace, status
