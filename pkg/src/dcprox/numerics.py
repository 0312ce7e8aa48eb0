"""Shared numerical substrate: abstract linear maps, conjugate gradient,
operator-norm estimation, finite differences, and seeded random streams."""

import numpy as np

from .exceptions import IndefiniteOperatorError, InvalidEvaluationError, InvalidInputError

NOISE_KINDS = ("I", "II", "III", "IV", "V")


class RandomSource:
    """Deterministic random stream.

    Identical seeds produce identical draw sequences (PCG64 is stable across
    platforms).  A source must not be shared between threads; use
    :meth:`spawn` to derive independent child streams for parallel work.
    """

    def __init__(self, seed, _bitgen=None):
        self.seed = int(seed)
        self.gen = np.random.Generator(_bitgen if _bitgen is not None else np.random.PCG64(self.seed))

    def spawn(self, n):
        children = np.random.SeedSequence(self.seed).spawn(n)
        return [RandomSource(self.seed, _bitgen=np.random.PCG64(c)) for c in children]

    # thin passthroughs used throughout the package
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def normal(self, size=None):
        return self.gen.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)

    def choice(self, n, size, p=None):
        return self.gen.choice(n, size=size, p=p)

    def permutation(self, n):
        return self.gen.permutation(n)


class LinearMap:
    """A linear operator given by its action and the action of its adjoint."""

    def __init__(self, in_dim, out_dim, apply, apply_adjoint):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self.apply = apply
        self.apply_adjoint = apply_adjoint

    @classmethod
    def from_matrix(cls, mat):
        mat = np.asarray(mat, dtype=float)
        return cls(mat.shape[1], mat.shape[0], lambda u: mat @ u, lambda v: mat.T @ v)

    @classmethod
    def identity(cls, dim):
        return cls(dim, dim, lambda u: np.array(u, copy=True), lambda v: np.array(v, copy=True))

    def dense(self):
        """Materialize as a dense matrix (test/diagnostic use only)."""
        cols = [self.apply(e) for e in np.eye(self.in_dim)]
        return np.array(cols).T


def cg_solve(W, rhs, tol, max_iter):
    """Conjugate gradient for W x = rhs with a self-adjoint PD operator W.

    Stops on the absolute residual norm ``||W x - rhs|| <= tol``; callers pass
    scaled tolerances.  Returns ``(solution, residual_norm, iters)``.  When the
    iteration cap is hit the final iterate comes back: it is the best point
    seen in the energy norm (which decreases monotonically along CG, unlike
    the residual norm) and, from a zero start, always a descent direction for
    the quadratic model.
    """
    rhs = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(rhs)):
        raise InvalidInputError("cg_solve: non-finite right-hand side")
    x = np.zeros_like(rhs)
    r = rhs.copy()
    rs = float(r @ r)
    res = np.sqrt(rs)
    if res <= tol:
        return x, res, 0
    p = r.copy()
    for it in range(1, max_iter + 1):
        Wp = W.apply(p)
        if not np.all(np.isfinite(Wp)):
            raise InvalidInputError("cg_solve: operator produced non-finite values")
        curv = float(p @ Wp)
        if curv <= 0.0:
            raise IndefiniteOperatorError(f"cg_solve: <d, Wd> = {curv:.3e} <= 0 at iteration {it}")
        a = rs / curv
        x += a * p
        r -= a * Wp
        rs_new = float(r @ r)
        res = np.sqrt(rs_new)
        if res <= tol:
            return x, res, it
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, res, max_iter


def estimate_op_norm(A, iters, rng):
    """Estimate ||A|| = sigma_max(A) by power iteration on A*A.

    The Rayleigh-quotient estimate is nondecreasing in ``iters`` and never
    exceeds the true norm (up to round-off).
    """
    sigma, _ = power_iteration(A, iters, rng)
    return sigma


def power_iteration(A, iters, rng, v0=None):
    """Power iteration on A*A; returns (sigma_estimate, last_vector).

    The vector return value lets callers warm-start repeated estimates on a
    slowly varying operator family.
    """
    if iters < 1:
        raise InvalidInputError("power_iteration: iters must be >= 1")
    if v0 is not None and np.linalg.norm(v0) > 0:
        v = np.asarray(v0, dtype=float).copy()
    else:
        v = rng.normal(A.in_dim)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return 0.0, v
    v /= nv
    sigma = 0.0
    for _ in range(iters):
        w = A.apply(v)
        s = np.linalg.norm(w)
        if s == 0.0:
            return 0.0, v
        sigma = s
        v = A.apply_adjoint(w)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return sigma, v
        v /= nv
    return sigma, v


def finite_diff_gradient(f, x, step):
    """Central-difference gradient: component i is (f(x+h e_i) - f(x-h e_i)) / 2h."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise InvalidEvaluationError(f"finite_diff_gradient: non-finite evaluation at component {i}")
        g[i] = (fp - fm) / (2.0 * step)
    return g


def sample_noise(kind, count, rng):
    """Draw ``count`` i.i.d. values from one of the five outlier distributions.

    I: N(0, 10^2); II: 2 x Student-t(4); III: standard Cauchy; IV: N(0, s^2)
    with s ~ Unif(1,5) per entry; V: Laplace with density 0.5 exp(-|u|).
    Heavy-tailed draws go through explicit constructions (inverse CDF for
    Cauchy/Laplace, ratio of normals for Student-t) for cross-run stability.
    """
    if kind not in NOISE_KINDS:
        raise InvalidInputError(f"sample_noise: unknown kind {kind!r}")
    count = int(count)
    if count < 0:
        raise InvalidInputError("sample_noise: count must be >= 0")
    if count == 0:
        return np.zeros(0)
    if kind == "I":
        return 10.0 * rng.normal(count)
    if kind == "II":
        z = rng.normal((count, 5))
        return 2.0 * z[:, 0] / np.sqrt((z[:, 1:] ** 2).sum(axis=1) / 4.0)
    if kind == "III":
        u = rng.uniform(size=count)
        return np.tan(np.pi * (u - 0.5))
    if kind == "IV":
        sigma = rng.uniform(1.0, 5.0, size=count)
        return sigma * rng.normal(count)
    # V: inverse CDF of the unit Laplace
    u = rng.uniform(size=count)
    centered = u - 0.5
    return -np.sign(centered) * np.log1p(-2.0 * np.abs(centered))
