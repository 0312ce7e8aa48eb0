"""Convex nonsmooth calculus: values, prox maps, Moreau envelopes, Clarke
Jacobians of prox maps, and deterministic subgradient selections.

Conventions, fixed once for reproducible traces:

* ``prox(v, lam)`` solves argmin_w f(w) + ||w - v||^2 / (2 lam), i.e. the
  proximal mapping with parameter ``lam``.
* Subgradient selection at kinks: sign(0) = +1 for the l1 norm, the smallest
  index attaining the max for coordinate-max, boundary -> 1 for the hinge.
* Prox-Jacobian selection at kinks: the boundary case maps to 0 (l1, hinge,
  box); the coordinate-max Jacobian averages over the active set of the
  simplex projection.
"""

import numpy as np

from .exceptions import InvalidInputError, UnsupportedOperationError


def project_simplex(v, radius):
    """Euclidean projection onto {y >= 0, sum(y) = radius} (sort-and-threshold)."""
    if radius <= 0:
        raise InvalidInputError("project_simplex: radius must be positive")
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def prox_l1(v, lam):
    """Componentwise soft threshold sign(v) max(|v| - lam, 0)."""
    if lam <= 0:
        raise InvalidInputError("prox_l1: lam must be positive")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)


def prox_group_l21(M, lam):
    """Columnwise radial shrinkage c * max(1 - lam/||c||, 0); zero columns stay zero."""
    if lam <= 0:
        raise InvalidInputError("prox_group_l21: lam must be positive")
    M = np.asarray(M, dtype=float)
    norms = np.linalg.norm(M, axis=0)
    scale = np.zeros_like(norms)
    np.divide(norms - lam, norms, out=scale, where=norms > lam)
    return M * scale


def prox_hinge_sum(v, lam, beta):
    """Prox of beta * sum(max(y_i, 0)): identity below 0, clamp on (0, lam*beta], shift above."""
    if lam <= 0 or beta <= 0:
        raise InvalidInputError("prox_hinge_sum: lam and beta must be positive")
    v = np.asarray(v, dtype=float)
    t = lam * beta
    return np.where(v <= 0, v, np.maximum(v - t, 0.0))


def prox_coordmax(v, lam):
    """Prox of max_i y_i: v minus the projection of v onto {y >= 0, sum y = lam}."""
    if lam <= 0:
        raise InvalidInputError("prox_coordmax: lam must be positive")
    v = np.asarray(v, dtype=float)
    return v - project_simplex(v, lam)


def prox_box(v, lower, upper):
    """Componentwise clamp onto [lower, upper]; lam-independent for indicators."""
    v = np.asarray(v, dtype=float)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), v.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), v.shape)
    if np.any(lower > upper):
        raise InvalidInputError("prox_box: lower > upper in some component")
    return np.minimum(np.maximum(v, lower), upper)


class ProxAtom:
    """A closed convex function with prox-centric oracles.

    Subclasses provide ``value`` and ``prox``; the Moreau envelope comes from
    the generic identity.  ``prox_jacobian_apply`` and ``subgrad_select`` are
    optional and raise :class:`UnsupportedOperationError` by default.
    """

    def value(self, v):
        raise NotImplementedError

    def prox(self, v, lam):
        raise NotImplementedError

    def envelope(self, v, lam):
        p = self.prox(v, lam)
        d = p - np.asarray(v, dtype=float)
        return self.value(p) + float(d.ravel() @ d.ravel()) / (2.0 * lam)

    def prox_jacobian_apply(self, v, lam, d):
        raise UnsupportedOperationError(f"{type(self).__name__} has no prox Jacobian")

    def subgrad_select(self, v):
        raise UnsupportedOperationError(f"{type(self).__name__} has no subgradient selection")


class ZeroAtom(ProxAtom):
    """The zero function: prox is the identity."""

    def value(self, v):
        return 0.0

    def prox(self, v, lam):
        return np.array(v, dtype=float, copy=True)

    def prox_jacobian_apply(self, v, lam, d):
        return np.array(d, dtype=float, copy=True)

    def subgrad_select(self, v):
        return np.zeros_like(np.asarray(v, dtype=float))


class L1Atom(ProxAtom):
    """weight * ||.||_1."""

    def __init__(self, weight=1.0):
        if weight <= 0:
            raise InvalidInputError("L1Atom: weight must be positive")
        self.weight = float(weight)

    def value(self, v):
        return self.weight * float(np.abs(v).sum())

    def prox(self, v, lam):
        return prox_l1(v, lam * self.weight)

    def prox_jacobian_apply(self, v, lam, d):
        # |v_i| == lam*w (kink) deliberately maps to 0
        mask = np.abs(np.asarray(v, dtype=float)) > lam * self.weight
        return np.where(mask, d, 0.0)

    def subgrad_select(self, v):
        v = np.asarray(v, dtype=float)
        s = np.sign(v)
        s[s == 0] = 1.0  # sign(0) := +1
        return self.weight * s


class SquaredL2Atom(ProxAtom):
    """(weight/2) ||.||^2; smooth, included for least-squares style tests."""

    def __init__(self, weight=1.0):
        self.weight = float(weight)

    def value(self, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * self.weight * float(v @ v)

    def prox(self, v, lam):
        return np.asarray(v, dtype=float) / (1.0 + lam * self.weight)

    def prox_jacobian_apply(self, v, lam, d):
        return np.asarray(d, dtype=float) / (1.0 + lam * self.weight)

    def subgrad_select(self, v):
        return self.weight * np.asarray(v, dtype=float)


class LinearAtom(ProxAtom):
    """<c, .>, a linear functional; its prox is a shift."""

    def __init__(self, c):
        self.c = np.asarray(c, dtype=float)

    def value(self, v):
        return float(self.c @ np.asarray(v, dtype=float))

    def prox(self, v, lam):
        return np.asarray(v, dtype=float) - lam * self.c

    def prox_jacobian_apply(self, v, lam, d):
        return np.array(d, dtype=float, copy=True)

    def subgrad_select(self, v):
        return self.c.copy()


class HingeSumAtom(ProxAtom):
    """beta * sum_i max(y_i, 0)."""

    def __init__(self, beta):
        if beta <= 0:
            raise InvalidInputError("HingeSumAtom: beta must be positive")
        self.beta = float(beta)

    def value(self, v):
        return self.beta * float(np.maximum(np.asarray(v, dtype=float), 0.0).sum())

    def prox(self, v, lam):
        return prox_hinge_sum(v, lam, self.beta)

    def prox_jacobian_apply(self, v, lam, d):
        v = np.asarray(v, dtype=float)
        mask = (v < 0) | (v > lam * self.beta)
        return np.where(mask, d, 0.0)

    def subgrad_select(self, v):
        # boundary 0 -> 1 by convention
        return self.beta * (np.asarray(v, dtype=float) >= 0).astype(float)


class CoordMaxAtom(ProxAtom):
    """phi(y) = max_i y_i, the support function of the unit simplex."""

    def value(self, v):
        return float(np.max(v))

    def prox(self, v, lam):
        return prox_coordmax(v, lam)

    def prox_jacobian_apply(self, v, lam, d):
        v = np.asarray(v, dtype=float)
        d = np.asarray(d, dtype=float)
        p = project_simplex(v, lam)
        active = p > 0
        out = d.copy()
        out[active] = d[active].mean()
        return out

    def subgrad_select(self, v):
        v = np.asarray(v, dtype=float)
        out = np.zeros_like(v)
        out[int(np.argmax(v))] = 1.0  # argmax returns the smallest maximizing index
        return out


class BoxAtom(ProxAtom):
    """Indicator of the box [lower, upper]; the prox is the clamp, lam-free."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise InvalidInputError("BoxAtom: lower > upper in some component")

    def value(self, v):
        v = np.asarray(v, dtype=float)
        return 0.0 if np.all(v >= self.lower) and np.all(v <= self.upper) else np.inf

    def prox(self, v, lam):
        return prox_box(v, self.lower, self.upper)

    def prox_jacobian_apply(self, v, lam, d):
        v = np.asarray(v, dtype=float)
        mask = (v > self.lower) & (v < self.upper)
        return np.where(mask, d, 0.0)

    def subgrad_select(self, v):
        # minimum-norm element of the normal cone
        return np.zeros_like(np.asarray(v, dtype=float))


class SeparableSumAtom(ProxAtom):
    """Blockwise sum of atoms over a partition of the coordinates.

    ``blocks`` is a list of (atom, start, stop) with contiguous, disjoint
    index ranges covering the vector.
    """

    def __init__(self, blocks):
        self.blocks = [(atom, int(a), int(b)) for atom, a, b in blocks]

    def value(self, v):
        v = np.asarray(v, dtype=float)
        return sum(atom.value(v[a:b]) for atom, a, b in self.blocks)

    def prox(self, v, lam):
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        for atom, a, b in self.blocks:
            out[a:b] = atom.prox(v[a:b], lam)
        return out

    def prox_jacobian_apply(self, v, lam, d):
        v = np.asarray(v, dtype=float)
        d = np.asarray(d, dtype=float)
        out = np.empty_like(d)
        for atom, a, b in self.blocks:
            out[a:b] = atom.prox_jacobian_apply(v[a:b], lam, d[a:b])
        return out

    def subgrad_select(self, v):
        v = np.asarray(v, dtype=float)
        out = np.empty_like(v)
        for atom, a, b in self.blocks:
            out[a:b] = atom.subgrad_select(v[a:b])
        return out


class AffinePrecomposeAtom(ProxAtom):
    """g(y) = f(a*y + s) for scalar a != 0 and shift s; prox stays closed-form."""

    def __init__(self, atom, scale, shift=0.0):
        if scale == 0:
            raise InvalidInputError("AffinePrecomposeAtom: scale must be nonzero")
        self.atom = atom
        self.scale = float(scale)
        self.shift = shift

    def _inner(self, v):
        return self.scale * np.asarray(v, dtype=float) + self.shift

    def value(self, v):
        return self.atom.value(self._inner(v))

    def prox(self, v, lam):
        u = self.atom.prox(self._inner(v), lam * self.scale**2)
        return (u - self.shift) / self.scale

    def prox_jacobian_apply(self, v, lam, d):
        return self.atom.prox_jacobian_apply(self._inner(v), lam * self.scale**2, d)

    def subgrad_select(self, v):
        return self.scale * self.atom.subgrad_select(self._inner(v))


class LinearAddAtom(ProxAtom):
    """f + <c, .>; the prox shifts its argument by -lam*c."""

    def __init__(self, atom, c):
        self.atom = atom
        self.c = np.asarray(c, dtype=float)

    def value(self, v):
        v = np.asarray(v, dtype=float)
        return self.atom.value(v) + float(self.c @ v)

    def prox(self, v, lam):
        return self.atom.prox(np.asarray(v, dtype=float) - lam * self.c, lam)

    def prox_jacobian_apply(self, v, lam, d):
        return self.atom.prox_jacobian_apply(np.asarray(v, dtype=float) - lam * self.c, lam, d)

    def subgrad_select(self, v):
        return self.atom.subgrad_select(v) + self.c


class GroupL21Atom(ProxAtom):
    """weight * sum of column Euclidean norms of a matrix point."""

    def __init__(self, weight=1.0):
        if weight <= 0:
            raise InvalidInputError("GroupL21Atom: weight must be positive")
        self.weight = float(weight)

    def value(self, M):
        return self.weight * float(np.linalg.norm(np.asarray(M, dtype=float), axis=0).sum())

    def prox(self, M, lam):
        return prox_group_l21(M, lam * self.weight)

    def prox_jacobian_apply(self, M, lam, D):
        return group_l21_jacobian_apply(M, lam * self.weight, D)

    def subgrad_select(self, M):
        M = np.asarray(M, dtype=float)
        norms = np.linalg.norm(M, axis=0)
        scale = np.zeros_like(norms)
        np.divide(self.weight, norms, out=scale, where=norms > 0)
        return M * scale


def group_l21_jacobian_apply(M, lam, D):
    """Clarke-Jacobian element of the columnwise shrinkage, applied to D.

    Per column c with ||c|| > lam: (1 - lam/||c||) I + (lam/||c||^3) c c^T;
    columns at or inside the threshold map to 0.
    """
    M = np.asarray(M, dtype=float)
    D = np.asarray(D, dtype=float)
    norms = np.linalg.norm(M, axis=0)
    out = np.zeros_like(D)
    act = norms > lam
    if np.any(act):
        n = norms[act]
        t = lam / n
        cd = np.einsum("ij,ij->j", M[:, act], D[:, act])
        out[:, act] = (1.0 - t) * D[:, act] + (t * cd / n**2) * M[:, act]
    return out


def prox_jacobian_apply(atom, v, lam, d):
    """One element of the Clarke Jacobian of atom.prox(., lam) at v, applied to d."""
    return atom.prox_jacobian_apply(v, lam, d)


def subgrad_select(atom, v):
    """A deterministic element of the B-subdifferential of the atom at v."""
    return atom.subgrad_select(v)
