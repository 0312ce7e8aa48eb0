"""The DC composite problem contract: objective evaluation, linearizations,
and the four-argument potential function driving the solver's diagnostics."""

from dataclasses import dataclass

import numpy as np

from .atoms import ProxAtom, ZeroAtom
from .exceptions import ContractViolationError, InvalidEvaluationError, InvalidInputError
from .numerics import LinearMap


class SmoothMap:
    """A continuously differentiable map with an explicit differential."""

    def __init__(self, dim_in, dim_out, eval_fn, jacobian_fn):
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        self._eval = eval_fn
        self._jac = jacobian_fn

    def eval(self, x):
        return self._eval(np.asarray(x, dtype=float))

    def jacobian_at(self, x):
        """The differential at x as a LinearMap (its adjoint is the gradient map)."""
        return self._jac(np.asarray(x, dtype=float))

    @classmethod
    def from_dense(cls, dim_in, dim_out, eval_fn, jac_matrix_fn):
        """Convenience constructor for maps with small dense Jacobians."""
        return cls(dim_in, dim_out, eval_fn,
                   lambda x: LinearMap.from_matrix(jac_matrix_fn(np.asarray(x, dtype=float))))


class SmoothFunction:
    """A smooth scalar function of a vector, with gradient (used for smooth theta2)."""

    def __init__(self, value_fn, grad_fn):
        self.value = value_fn
        self.gradient = grad_fn


class ProblemInstance:
    """Phi(x) = theta1(F(x)) - theta2(G(x)) + h(x).

    ``theta2`` is either a :class:`SmoothFunction`, a :class:`ProxAtom`
    (B-subgradient selection is used), or None for a vanishing DC part; G may
    alias F when the two maps coincide.  ``step_scale`` feeds the step-norm
    stopping rule (1 + ||observation|| for matrix completion, 1 otherwise).
    """

    def __init__(self, theta1, F, h=None, theta2=None, G=None,
                 lower_bound_hint=None, step_scale=1.0, name=""):
        self.theta1 = theta1
        self.F = F
        self.h = h if h is not None else ZeroAtom()
        self.theta2 = theta2
        self.G = G
        self.lower_bound_hint = lower_bound_hint
        self.step_scale = float(step_scale)
        self.name = name
        if (theta2 is None) != (G is None):
            raise InvalidInputError("theta2 and G must be provided together")
        if G is not None and G.dim_in != F.dim_in:
            raise InvalidInputError("F and G disagree on the domain dimension")

    @property
    def dim(self):
        return self.F.dim_in


def theta2_value(p, z):
    if p.theta2 is None:
        return 0.0
    return float(p.theta2.value(z))


def theta2_xi(p, z):
    """A deterministic element of the subdifferential of -theta2 at z.

    For smooth theta2 this is -grad; for an atom it is minus the selected
    B-subgradient (the two sets coincide up to sign).
    """
    if p.theta2 is None:
        return None
    if isinstance(p.theta2, SmoothFunction):
        return -np.asarray(p.theta2.gradient(z), dtype=float)
    return -p.theta2.subgrad_select(z)


def eval_phi(p, x):
    """Objective value; +inf when h excludes the point."""
    Fx = p.F.eval(x)
    if not np.all(np.isfinite(Fx)):
        raise InvalidEvaluationError("eval_phi: F produced non-finite values")
    val = p.theta1.value(Fx)
    if p.theta2 is not None:
        Gx = Fx if p.G is p.F else p.G.eval(x)
        if not np.all(np.isfinite(Gx)):
            raise InvalidEvaluationError("eval_phi: G produced non-finite values")
        val -= theta2_value(p, Gx)
    hv = p.h.value(x)
    if hv == np.inf:
        return np.inf
    return float(val + hv)


def linearize(p, x, s):
    """(ell_F(x,s), ell_G(x,s)): first-order expansions of F and G at x, read at s."""
    x = np.asarray(x, dtype=float)
    s = np.asarray(s, dtype=float)
    d = s - x
    A = p.F.jacobian_at(x)
    ellF = p.F.eval(x) + A.apply(d)
    if p.G is None:
        return ellF, None
    if p.G is p.F:
        return ellF, ellF.copy()
    ellG = p.G.eval(x) + p.G.jacobian_at(x).apply(d)
    return ellF, ellG


@dataclass
class PotentialPoint:
    """Argument bundle for the potential function.

    ``conj_value`` caches theta2*(-z); it is valid only when z was selected
    from the subdifferential of -theta2 at G(x), in which case the Fenchel
    identity theta2(G(x)) + theta2*(-z) = -<z, G(x)> pins it without ever
    evaluating the conjugate.
    """

    x: np.ndarray
    s: np.ndarray
    z: np.ndarray | None
    gamma: float
    alpha: float
    conj_value: float = 0.0
    valid: bool = True


def make_potential_point(p, x, s, z, gamma, alpha):
    if z is None:
        return PotentialPoint(np.asarray(x, float), np.asarray(s, float), None, gamma, alpha, 0.0)
    Gx = p.G.eval(x)
    conj = -float(np.asarray(z) @ Gx) - theta2_value(p, Gx)
    return PotentialPoint(np.asarray(x, float), np.asarray(s, float),
                          np.asarray(z, float), gamma, alpha, conj)


def xi_potential(p, w):
    """theta1(ell_F) + <ell_G, z> + h(s) + theta2*(-z) + ||s-x||^2_Q,
    with Q = gamma*I + alpha*A*A for A = F'(x) (the squared norm carries no 1/2)."""
    if not w.valid:
        raise ContractViolationError("xi_potential: stale conjugate cache")
    d = w.s - w.x
    A = p.F.jacobian_at(w.x)
    Ad = A.apply(d)
    ellF = p.F.eval(w.x) + Ad
    val = p.theta1.value(ellF) + p.h.value(w.s)
    val += w.gamma * float(d @ d) + w.alpha * float(Ad @ Ad)
    if w.z is not None:
        if p.G is p.F:
            ellG = ellF
        else:
            ellG = p.G.eval(w.x) + p.G.jacobian_at(w.x).apply(d)
        val += float(w.z @ ellG) + w.conj_value
    return float(val)
