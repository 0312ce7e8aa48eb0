"""Independent oracles for the test suite.

The primal reference solver is a Condat-Vu primal-dual proximal-gradient
iteration on the linearized proximal subproblem

    min_x  theta1(A x - b) + <u, x - x_k> + h(x)
           + (gamma/2)||x - x_k||^2 + (alpha/2)||A (x - x_k)||^2

using only atom proxes and A/A* applications; it never touches the dual
objective or the Newton machinery it is used to check.
"""

import numpy as np


def condat_vu_reference(d, iters=100_000):
    """Solve the subproblem held by a DualSubproblem to high accuracy."""
    A, b, u, xk = d.A, d.b, d.u, d.x_k
    gamma, alpha = d.gamma, d.alpha
    dense = np.array([A.apply(e) for e in np.eye(A.in_dim)]).T
    normA = np.linalg.norm(dense, 2) if dense.size else 0.0
    normA = max(normA, 1e-12)
    L = gamma + alpha * normA**2
    sigma = 1.0 / (2.0 * normA)
    tau = 0.95 / (L / 2.0 + sigma * normA**2)

    x = xk.copy()
    y = np.zeros(A.out_dim)
    for _ in range(iters):
        diff = x - xk
        grad = u + gamma * diff + alpha * A.apply_adjoint(A.apply(diff))
        x_new = d.h.prox(x - tau * (grad + A.apply_adjoint(y)), tau)
        v = y + sigma * A.apply(2.0 * x_new - x)
        # Moreau: prox of sigma * f^* with f = theta1(. - b)
        w = v / sigma
        y = v - sigma * (b + d.theta1.prox(w - b, 1.0 / sigma))
        x = x_new
    return x


def subproblem_value(d, x):
    """q_{k,j}(x) evaluated directly from the frozen pieces."""
    diff = x - d.x_k
    Ad = d.A.apply(diff)
    return (d.theta1.value(d.A.apply(x) - d.b) + float(d.u @ diff) + d.h.value(x)
            + 0.5 * (d.gamma * float(diff @ diff) + d.alpha * float(Ad @ Ad))
            - d.theta2_x)
