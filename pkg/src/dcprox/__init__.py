"""Solver toolkit for DC composite optimization problems
Phi(x) = theta1(F(x)) - theta2(G(x)) + h(x): an inexact linearized proximal
algorithm with a dual proximal-point / semismooth-Newton subproblem engine,
a Polyak subgradient baseline, robust matrix completion with a clipped
absolute-deviation loss, and a suite of nonsmooth DC benchmark programs."""

from .atoms import (AffinePrecomposeAtom, BoxAtom, CoordMaxAtom, GroupL21Atom,
                    HingeSumAtom, L1Atom, LinearAddAtom, LinearAtom, ProxAtom,
                    SeparableSumAtom, SquaredL2Atom, ZeroAtom, project_simplex,
                    prox_box, prox_coordmax, prox_group_l21, prox_hinge_sum,
                    prox_jacobian_apply, prox_l1, subgrad_select)
from .dual import (DualSubproblem, PpaConfig, eval_grad_psi, eval_psi,
                   newton_step, ppa_solve, recover_primal)
from .ilpa import (IlpaConfig, TraceRecord, ilpa_run, inner_gamma_loop,
                   update_alpha, write_trace_csv)
from .model import (PotentialPoint, ProblemInstance, SmoothFunction, SmoothMap,
                    eval_phi, linearize, make_potential_point, xi_potential)
from .numerics import (LinearMap, RandomSource, cg_solve, estimate_op_norm,
                       finite_diff_gradient, sample_noise)
from .subgm import SubgmConfig, subgm_run

__version__ = "0.1.0"
