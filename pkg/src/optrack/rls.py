"""Recursive least squares over packed quadratic parameters.

Each agent fits the packed vector ``xi = (r, q, rows of P)`` of its unknown
quadratic cost from scalar evaluations ``y = xi'chi + noise``.  The recursion
maintains the inverse Gram matrix ``R_t = (I/eta + sum chi chi')^{-1}`` through
rank-one updates, so after t samples the estimate equals the ridge-initialized
batch least-squares solution over all data seen so far:

    xi_t = argmin  sum_s (xi'chi_s - y_s)^2 + ||xi||^2 / eta.

``batch_ls`` solves the same problem directly (SVD on the augmented system)
and serves as the independent oracle the recursion is validated against.
"""

from __future__ import annotations

import numpy as np

from .quadratics import QuadraticFunction, decision_dim, param_dim, unpack

__all__ = ["RlsState", "batch_ls"]


class RlsState:
    """Ridge-initialized RLS estimator state for one agent.

    Parameters
    ----------
    dim : int
        Dimension of the packed parameter vector.
    eta : float
        Initialization scale: R_0 = eta * I, xi_0 = 0.  Must be positive;
        large eta makes the implicit ridge ``||xi||^2/eta`` negligible after
        a few samples.
    """

    __slots__ = ("xi", "R", "count")

    def __init__(self, dim: int, eta: float):
        if not eta > 0:
            raise ValueError(f"eta must be positive, got {eta}")
        self.xi = np.zeros(dim)
        self.R = np.eye(dim) * float(eta)
        self.count = 0

    @classmethod
    def for_dimension(cls, n: int, eta: float) -> "RlsState":
        """State sized for decision dimension n (packed length 1+n+n^2)."""
        return cls(param_dim(n), eta)

    @property
    def dim(self) -> int:
        return self.xi.size

    def update(self, chi, y: float) -> np.ndarray:
        """One rank-one update with sample (chi, y); returns the new estimate.

        Implements
            s    = R chi / (1 + chi' R chi)
            R   <- R - (1 + chi' R chi) s s'
            xi  <- xi + (y - chi' xi) s
        and re-symmetrizes R to suppress floating-point drift over long runs.
        """
        chi = np.asarray(chi, dtype=float).reshape(-1)
        if chi.size != self.xi.size:
            raise ValueError(f"regressor dimension {chi.size} != state dimension {self.xi.size}")
        if not (np.isfinite(chi).all() and np.isfinite(y)):
            raise ValueError("non-finite sample passed to RLS update")
        R = self.R
        Rchi = R @ chi
        denom = 1.0 + chi @ Rchi
        s = Rchi / denom
        R -= np.outer(Rchi, Rchi) / denom
        self.R = (R + R.T) * 0.5
        self.xi = self.xi + (float(y) - chi @ self.xi) * s
        self.count += 1
        return self.xi

    def quad_parts(self) -> tuple[np.ndarray, np.ndarray, float]:
        """Current (P, q, r) with P symmetrized, as plain arrays (hot-path form)."""
        n = decision_dim(self.xi.size)
        r = float(self.xi[0])
        q = self.xi[1 : 1 + n].copy()
        A = self.xi[1 + n :].reshape(n, n)
        return (A + A.T) * 0.5, q, r

    def estimate(self) -> QuadraticFunction:
        """Current estimate unpacked into a (symmetrized) QuadraticFunction."""
        return unpack(self.xi)

    def curvature_bounds(self) -> tuple[float, float]:
        """(min, max) eigenvalue of the current curvature estimate."""
        eigs = self.estimate().eigenvalues()
        return float(eigs[0]), float(eigs[-1])


def batch_ls(samples, eta: float) -> np.ndarray:
    """Ridge least squares solved directly: the oracle for the RLS recursion.

    ``samples`` is a nonempty sequence of (chi, y) pairs.  Returns
    argmin over xi of ``sum (xi'chi - y)^2 + ||xi||^2/eta``, computed by SVD
    on the augmented system [X; I/sqrt(eta)] xi = [y; 0] -- a deliberately
    different route from the recursion it cross-checks.
    """
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    samples = list(samples)
    if not samples:
        raise ValueError("batch_ls needs at least one sample")
    X = np.vstack([np.asarray(chi, dtype=float).reshape(-1) for chi, _ in samples])
    y = np.array([float(v) for _, v in samples])
    dim = X.shape[1]
    A = np.vstack([X, np.eye(dim) / np.sqrt(eta)])
    b = np.concatenate([y, np.zeros(dim)])
    xi, *_ = np.linalg.lstsq(A, b, rcond=None)
    return xi
