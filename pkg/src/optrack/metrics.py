"""Optimum oracle and run metrics: regret, consensus, tracking error.

Regret is always evaluated with the *true* costs at the network average, so
it measures what the users actually experience; the estimated problem's
optimum is available separately for diagnosing how much of the gap comes from
learning versus tracking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "OptimumOracle",
    "MetricsRecord",
    "MetricsAccumulator",
    "record",
    "agent_regret_increment",
    "plateau_detector",
    "certify_plateau",
]


class OptimumOracle:
    """Instantaneous minimizer and value of the aggregate cost.

    Closed form when every engineering cost is a tracking quadratic and every
    user cost quadratic (dense solve against the cached total curvature);
    otherwise a numerically minimized reference (BFGS to gradient norm 1e-10)
    is used and its tolerance recorded in ``mode``.
    """

    def __init__(self, scenario):
        self.scenario = scenario
        N, n = scenario.N, scenario.n
        self._sumP = np.sum([u.truth.P for u in scenario.user], axis=0)
        self._sumq = np.sum([u.truth.q for u in scenario.user], axis=0)
        self._sumr = float(np.sum([u.truth.r for u in scenario.user]))
        if scenario.all_tracking_quadratic():
            self.mode = "closed-form-quadratic"
            self._Z = np.stack([c.anchor for c in scenario.engineering])      # (N, n)
            self._PSI = np.stack([c.amplitude for c in scenario.engineering])  # (N, n)
            self._M = np.array([c.timescale for c in scenario.engineering], dtype=float)
            H = 2.0 * N * np.eye(n) + self._sumP
            eigs = np.linalg.eigvalsh(H)
            if eigs[0] <= 0:
                raise ValueError(f"total curvature is singular (min eigenvalue {eigs[0]})")
            self._Hinv = np.linalg.inv(H)
            self._target_cache = (None, None, None)
        else:
            self.mode = "numeric"
        self._UP = np.stack([u.truth.P for u in scenario.user])  # (N, n, n)
        self._Uq = np.stack([u.truth.q for u in scenario.user])  # (N, n)
        self._Ur = np.array([u.truth.r for u in scenario.user])

    def _targets(self, t: int):
        """(sum of p_i(t), sum of ||p_i(t)||^2), cached for the current t."""
        if self._target_cache[0] == t:
            return self._target_cache[1], self._target_cache[2]
        P = self._Z + self._PSI * np.sin(t / self._M)[:, None]
        p_sum = P.sum(axis=0)
        p_sq = float(np.einsum("ij,ij->", P, P))
        self._target_cache = (t, p_sum, p_sq)
        return p_sum, p_sq

    def total_value(self, x, t: int) -> float:
        """Sum over agents of the true cost at x (closed-form path)."""
        x = np.asarray(x, dtype=float)
        if self.mode == "numeric":
            return self.scenario.total_true_value(x, t)
        p_sum, p_sq = self._targets(t)
        N = self.scenario.N
        v_part = N * float(x @ x) - 2.0 * float(x @ p_sum) + p_sq
        u_part = 0.5 * float(x @ self._sumP @ x) + float(self._sumq @ x) + self._sumr
        return v_part + u_part

    def per_agent_true_values(self, x) -> np.ndarray:
        """Each agent's hidden-cost value at x (vectorized over agents)."""
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("nij,i,j->n", self._UP, x, x) + self._Uq @ x + self._Ur

    def solve(self, t: int, estimates=None) -> tuple[np.ndarray, float]:
        """Minimizer and minimum of the aggregate cost at time t.

        With ``estimates`` (a list of (P, q, r) triples) the *estimated*
        problem is solved instead; its curvature must be positive definite.
        """
        if self.mode == "numeric":
            if estimates is not None:
                raise ValueError("estimated-problem optimum requires the closed-form oracle")
            return self._solve_numeric(t)
        N, n = self.scenario.N, self.scenario.n
        p_sum, _ = self._targets(t)
        if estimates is None:
            x_star = self._Hinv @ (2.0 * p_sum - self._sumq)
            return x_star, self.total_value(x_star, t)
        Pe = np.sum([e[0] for e in estimates], axis=0)
        qe = np.sum([e[1] for e in estimates], axis=0)
        H = 2.0 * N * np.eye(n) + Pe
        eigs = np.linalg.eigvalsh(H)
        if eigs[0] <= 0:
            raise ValueError(
                f"estimated total curvature is not positive definite (min eigenvalue {eigs[0]})"
            )
        x_hat = np.linalg.solve(H, 2.0 * p_sum - qe)
        re = float(np.sum([e[2] for e in estimates]))
        _, p_sq = self._targets(t)
        v_part = N * float(x_hat @ x_hat) - 2.0 * float(x_hat @ p_sum) + p_sq
        u_part = 0.5 * float(x_hat @ Pe @ x_hat) + float(qe @ x_hat) + re
        return x_hat, v_part + u_part

    def _solve_numeric(self, t: int):
        from scipy.optimize import minimize

        scen = self.scenario

        def fun(x):
            return scen.total_true_value(x, t)

        def jac(x):
            g = np.zeros_like(x)
            for i in range(scen.N):
                g += scen.grad_V(i, x, t) + scen.user[i].truth.gradient(x)
            return g

        res = minimize(fun, np.zeros(scen.n), jac=jac, method="BFGS", options={"gtol": 1e-10})
        return res.x, float(res.fun)


@dataclass
class MetricsRecord:
    """Per-iteration measurements at the network average.

    ``regret_increment`` is the true aggregate cost at the average minus the
    instantaneous optimum; ``consensus`` is the sum of squared deviations
    from the average; ``est_error_sum`` is the running sum over time and
    agents of the hidden-cost estimation error at the average.
    """

    t: int
    regret_increment: float
    cum_regret: float
    avg_regret: float
    consensus: float
    tracking_error: float
    est_error_sum: float
    eig_min: float
    eig_max: float
    est_regret: float | None = None
    per_agent_cum_regret: np.ndarray | None = None

    CSV_FIELDS = (
        "t",
        "regret",
        "avg_regret",
        "consensus",
        "tracking_error",
        "est_error_sum",
        "eig_min",
        "eig_max",
    )

    def csv_values(self):
        return (
            self.t,
            self.cum_regret,
            self.avg_regret,
            self.consensus,
            self.tracking_error,
            self.est_error_sum,
            self.eig_min,
            self.eig_max,
        )


class MetricsAccumulator:
    """Accumulates regret and estimation-error sums every iteration.

    ``step`` is called once per round and keeps the cumulative quantities
    exact regardless of the logging cadence; ``snapshot`` produces a full
    record (including the curvature-spectrum diagnostics) at log points.
    """

    def __init__(self, scenario, oracle, track_agents=False, log_estimated=False):
        self.scenario = scenario
        self.oracle = oracle
        self.cum_regret = 0.0
        self.est_error_sum = 0.0
        self.track_agents = track_agents
        self.log_estimated = log_estimated
        self.per_agent = np.zeros(scenario.N) if track_agents else None
        self._last = None

    def step(self, t: int, teff: int, states) -> None:
        X = np.stack([s.x for s in states])
        xbar = X.mean(axis=0)
        x_star, f_star = self.oracle.solve(teff)
        increment = self.oracle.total_value(xbar, teff) - f_star
        self.cum_regret += increment
        true_vals = self.oracle.per_agent_true_values(xbar)
        est_vals = np.array([s.estimated_U(xbar) for s in states])
        self.est_error_sum += float(np.abs(est_vals - true_vals).sum())
        if self.track_agents:
            for j, s in enumerate(states):
                self.per_agent[j] += self.oracle.total_value(s.x, teff) - f_star
        est_regret = None
        if self.log_estimated:
            try:
                _, f_hat = self.oracle.solve(
                    teff, estimates=[(s.est_P, s.est_q, s.est_r) for s in states]
                )
                total_est = sum(
                    self.scenario.value_V(i, xbar, teff) + s.estimated_U(xbar)
                    for i, s in enumerate(states)
                )
                est_regret = total_est - f_hat
            except ValueError:
                est_regret = float("nan")
        self._last = (t, increment, X, xbar, x_star, est_regret)

    def record_at(self, states) -> MetricsRecord:
        """Full record for the iteration last passed to ``step``."""
        t, increment, X, xbar, x_star, est_regret = self._last
        consensus = float(((X - xbar) ** 2).sum())
        tracking = float(np.linalg.norm(xbar - x_star))
        lo, hi = np.inf, -np.inf
        for s in states:
            eigs = np.linalg.eigvalsh(s.est_P)
            lo = min(lo, float(eigs[0]))
            hi = max(hi, float(eigs[-1]))
        return MetricsRecord(
            t=t,
            regret_increment=increment,
            cum_regret=self.cum_regret,
            avg_regret=self.cum_regret / t,
            consensus=consensus,
            tracking_error=tracking,
            est_error_sum=self.est_error_sum,
            eig_min=lo,
            eig_max=hi,
            est_regret=est_regret,
            per_agent_cum_regret=None if self.per_agent is None else self.per_agent.copy(),
        )


def record(states, scenario, t: int, oracle=None, cum_regret=0.0, est_error_sum=0.0) -> MetricsRecord:
    """One-shot metrics record for the given states at time t.

    Cumulative fields are the supplied priors plus this iteration's
    contributions; pass the running totals to chain records.
    """
    oracle = OptimumOracle(scenario) if oracle is None else oracle
    acc = MetricsAccumulator(scenario, oracle)
    acc.cum_regret = cum_regret
    acc.est_error_sum = est_error_sum
    acc.step(t, t, states)
    return acc.record_at(states)


def agent_regret_increment(states, scenario, t: int, j: int, oracle=None) -> float:
    """Aggregate true cost at agent j's own estimate minus the optimum."""
    oracle = OptimumOracle(scenario) if oracle is None else oracle
    _, f_star = oracle.solve(t)
    return oracle.total_value(states[j].x, t) - f_star


def plateau_detector(ts, values, window_frac: float = 0.2, min_len: int = 10_000):
    """Mean and least-squares slope of the final window of a series.

    Returns ``(plateau_value, slope)`` with slope in units of value per one
    step of ``ts``.  Raises on series shorter than ``min_len``.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    if ts.shape != values.shape or ts.ndim != 1:
        raise ValueError("ts and values must be 1-d arrays of equal length")
    if ts.size < min_len:
        raise ValueError(f"series too short for plateau detection: {ts.size} < {min_len}")
    k = max(2, int(round(ts.size * window_frac)))
    tw, vw = ts[-k:], values[-k:]
    slope = float(np.polyfit(tw, vw, 1)[0])
    return float(vw.mean()), slope


def certify_plateau(
    ts,
    values,
    rel_slope_tol: float = 1e-3,
    per_iterations: float = 1e4,
    window_frac: float = 0.2,
    min_len: int = 10_000,
) -> dict:
    """Check that the series has flattened to a positive constant.

    Certifies when ``|slope| * per_iterations <= rel_slope_tol * plateau``
    and the plateau value is positive.
    """
    plateau, slope = plateau_detector(ts, values, window_frac=window_frac, min_len=min_len)
    drift = abs(slope) * per_iterations
    return {
        "certified": bool(plateau > 0 and drift <= rel_slope_tol * plateau),
        "plateau": plateau,
        "slope_per_iteration": slope,
        "drift_per_window": drift,
        "threshold": rel_slope_tol * plateau,
    }
