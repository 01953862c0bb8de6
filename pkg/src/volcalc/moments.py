"""Closed-form Gaussian moment integrals.

gaussian_moment computes int_{R^d} xi^beta exp(-G(xi, xi)) dxi exactly:
zero for odd total degree, otherwise the Wick/Isserlis pairing sum with
covariance (1/2) G^{-1} and normalization pi^(d/2) det(G)^(-1/2).  The
pairing sum is evaluated by the Stein recursion

    E[xi_i * xi^gamma] = sum_j Sigma_ij * gamma_j * E[xi^(gamma - e_j)]

with memoization, which stays polynomial in |beta|.
"""

from __future__ import annotations

import numpy as np

__all__ = ["gaussian_moment", "central_moment"]


def central_moment(beta, sigma) -> complex:
    """E[xi^beta] for a centered Gaussian with covariance matrix `sigma`."""
    beta = tuple(int(b) for b in beta)
    if any(b < 0 for b in beta):
        raise ValueError("multi-index must be nonnegative")
    sigma = np.asarray(sigma)
    cache = {}

    def rec(gamma):
        if sum(gamma) == 0:
            return 1.0
        if sum(gamma) % 2 == 1:
            return 0.0
        val = cache.get(gamma)
        if val is not None:
            return val
        i = next(a for a, g in enumerate(gamma) if g > 0)
        rest = list(gamma)
        rest[i] -= 1
        total = 0.0
        for j, gj in enumerate(rest):
            if gj == 0:
                continue
            nxt = list(rest)
            nxt[j] -= 1
            total += sigma[i, j] * gj * rec(tuple(nxt))
        cache[gamma] = total
        return total

    return rec(beta)


def gaussian_moment(beta, form_matrix) -> float:
    """int xi^beta exp(-<G xi, xi>) dxi for a positive definite matrix G."""
    beta = tuple(int(b) for b in beta)
    g = np.atleast_2d(np.asarray(form_matrix, dtype=float))
    d = g.shape[0]
    if g.shape != (d, d) or len(beta) != d:
        raise ValueError("shape mismatch between beta and form matrix")
    if np.max(np.abs(g - g.T)) > 1e-12 * max(1.0, np.max(np.abs(g))):
        raise ValueError("form matrix must be symmetric")
    eigs = np.linalg.eigvalsh(g)
    if eigs.min() <= 0:
        raise ValueError(f"form matrix not positive definite (min eig {eigs.min():.3e})")
    if sum(beta) % 2 == 1:
        return 0.0
    norm = np.pi ** (d / 2.0) / np.sqrt(np.prod(eigs))
    sigma = 0.5 * np.linalg.inv(g)
    return float(norm * central_moment(beta, sigma))
