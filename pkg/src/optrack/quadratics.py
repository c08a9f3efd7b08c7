"""Quadratic cost models and their packed linear-regression view.

A quadratic cost ``0.5*x'Px + q'x + r`` can be written as an inner product
``xi'chi`` between a packed parameter vector ``xi = (r, q, rows of P)`` and a
lifted regressor ``chi = (1, x, x_1*x/2, ..., x_n*x/2)``.  That identity is
what lets the unknown cost be estimated by linear least squares from scalar
evaluations.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass

import numpy as np

__all__ = [
    "QuadraticFunction",
    "param_dim",
    "decision_dim",
    "pack_regressor",
    "pack_params",
    "unpack",
]


def param_dim(n: int) -> int:
    """Length of the packed parameter/regressor vector for decision dimension n."""
    return 1 + n + n * n


def decision_dim(length: int) -> int:
    """Invert ``param_dim``; raise if ``length`` is not of the form 1+n+n^2."""
    if length < 3:
        raise ValueError(f"packed length {length} is too short for any dimension")
    # n^2 + n - (length-1) = 0
    n = (math.isqrt(4 * (length - 1) + 1) - 1) // 2
    if param_dim(n) != length:
        raise ValueError(f"packed length {length} is not of the form 1+n+n^2")
    return n


@dataclass(frozen=True)
class QuadraticFunction:
    """Quadratic cost ``0.5*x'Px + q'x + r`` with symmetric curvature P.

    Asymmetric P is rejected unless ``symmetrize=True``, in which case
    ``(P + P') / 2`` is stored (exactly symmetric in floating point).
    Instances are immutable and safe to share.
    """

    P: np.ndarray
    q: np.ndarray
    r: float
    symmetrize: InitVar[bool] = False

    def __post_init__(self, symmetrize: bool):
        q = np.array(self.q, dtype=float).reshape(-1)
        n = q.size
        P = np.array(self.P, dtype=float).reshape(n, n)
        if symmetrize:
            P = (P + P.T) / 2.0
        elif not np.array_equal(P, P.T):
            raise ValueError(
                "curvature matrix is not symmetric; pass symmetrize=True to average it"
            )
        P.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", float(self.r))

    @property
    def n(self) -> int:
        return self.q.size

    @classmethod
    def zero(cls, n: int) -> "QuadraticFunction":
        return cls(np.zeros((n, n)), np.zeros(n), 0.0)

    @classmethod
    def squared_distance(cls, point) -> "QuadraticFunction":
        """The cost ``||x - point||^2`` (curvature 2I, minimum 0 at ``point``)."""
        v = np.asarray(point, dtype=float).reshape(-1)
        n = v.size
        return cls(2.0 * np.eye(n), -2.0 * v, float(v @ v))

    def _check_dim(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise ValueError(f"expected a vector of dimension {self.n}, got {x.size}")
        return x

    def __call__(self, x) -> float:
        """Evaluate ``0.5*x'Px + q'x + r``."""
        x = self._check_dim(x)
        return float(0.5 * (x @ self.P @ x) + self.q @ x + self.r)

    def gradient(self, x) -> np.ndarray:
        """Gradient ``Px + q`` (P symmetric, so P'x = Px)."""
        x = self._check_dim(x)
        return self.P @ x + self.q

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues of the curvature matrix."""
        return np.linalg.eigvalsh(self.P)


def pack_regressor(x) -> np.ndarray:
    """Lift a decision vector into the regressor ``(1, x, x_1*x/2, ..., x_n*x/2)``.

    For any quadratic f, ``pack_params(f) @ pack_regressor(x) == f(x)``.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    return np.concatenate(([1.0], x, np.outer(x, x).ravel() / 2.0))


def pack_params(f: QuadraticFunction) -> np.ndarray:
    """Pack (r, q, P) into a vector of length 1+n+n^2, P row-major."""
    return np.concatenate(([f.r], f.q, f.P.ravel()))


def unpack(v) -> QuadraticFunction:
    """Inverse of ``pack_params``, symmetrizing the curvature block.

    Symmetrization is part of the contract: the raw row-major block A is
    replaced by ``(A + A') / 2``, so the result is always a valid
    QuadraticFunction even when the packed vector came from a noisy
    least-squares fit.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    n = decision_dim(v.size)
    r = v[0]
    q = v[1 : 1 + n]
    A = v[1 + n :].reshape(n, n)
    return QuadraticFunction(A, q, r, symmetrize=True)
