"""Polyak-type subgradient baseline sharing the problem contract and the
stopping rules.  The surrogate step 0.05*Phi/||g||^2 assumes min Phi is close
to zero, which holds for the factorization losses it is paired with."""

import math
import time
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .ilpa import STATUS_ITER, STATUS_OBJECTIVE, STATUS_STEP, TraceRecord
from .model import SmoothFunction, theta2_value


@dataclass
class SubgmConfig:
    step_fraction: float = 0.05
    eps1: float = 5e-6
    eps2: float = 5e-4
    kbar: int = 500
    kmax: int = 2000

    def __post_init__(self):
        if self.step_fraction <= 0:
            raise InvalidInputError("SubgmConfig: step_fraction must be positive")


def _subgradient(p, x, Fx):
    """Deterministic element of dPhi(x) assembled from the selected pieces."""
    A = p.F.jacobian_at(x)
    g1 = p.theta1.subgrad_select(Fx)
    if p.theta2 is None:
        g = A.apply_adjoint(g1)
    else:
        Gx = Fx if p.G is p.F else p.G.eval(x)
        if isinstance(p.theta2, SmoothFunction):
            g2 = np.asarray(p.theta2.gradient(Gx), dtype=float)
        else:
            g2 = p.theta2.subgrad_select(Gx)
        if p.G is p.F:
            g = A.apply_adjoint(g1 - g2)
        else:
            g = A.apply_adjoint(g1) - p.G.jacobian_at(x).apply_adjoint(g2)
    return g + p.h.subgrad_select(x)


def _phi_at(p, x, Fx):
    phi = p.theta1.value(Fx) + p.h.value(x)
    if p.theta2 is not None:
        phi -= theta2_value(p, Fx if p.G is p.F else p.G.eval(x))
    return float(phi)


def subgm_run(p, cfg, x0):
    """Run the baseline from x0; returns (x_final, trace, status).

    The trace reuses the shared schema; the potential column holds Phi and
    the subproblem counters stay at zero.
    """
    x = np.array(x0, dtype=float).copy()
    trace = []
    phis = []
    status = STATUS_ITER
    prev_step = math.nan
    for k in range(cfg.kmax + 1):
        t0 = time.perf_counter()
        Fx = p.F.eval(x)
        phi = _phi_at(p, x, Fx)
        phis.append(phi)
        rec = TraceRecord(k, phi, phi, 0.0, 0, prev_step, math.nan, 0, 0, 0, 0.0)
        trace.append(rec)
        if k >= 1 and prev_step / p.step_scale <= cfg.eps1:
            status = STATUS_STEP
            break
        if k >= cfg.kbar:
            window = max(abs(phi - phis[max(0, k - j)]) for j in range(1, 10))
            if window / max(1.0, phi) <= cfg.eps2:
                status = STATUS_OBJECTIVE
                break
        if k == cfg.kmax:
            status = STATUS_ITER
            break
        g = _subgradient(p, x, Fx)
        g2 = float(g @ g)
        if g2 == 0.0:
            status = STATUS_STEP  # stationary for the selected subgradient
            break
        step_vec = (cfg.step_fraction * phi / g2) * g
        x = x - step_vec
        prev_step = float(np.linalg.norm(step_vec))
        rec.wall_ms = (time.perf_counter() - t0) * 1e3
    return x, trace, status
