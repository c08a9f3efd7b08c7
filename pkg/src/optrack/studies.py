"""Statistical studies that are not single simulation runs.

``rls_rate_study`` checks the estimator's error-decay rate on synthetic
persistently exciting data, where the stationarity/ergodicity conditions the
rate relies on hold by construction (the simulator's own trajectories need
not satisfy them).  ``conservation_audit`` hammers the tracker/average
identities across random instances and topologies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .quadratics import QuadraticFunction, pack_params, pack_regressor
from .rls import RlsState
from .simulate import SimConfig, run

__all__ = ["RateStudyResult", "rls_rate_study", "ConservationAuditResult", "conservation_audit"]


@dataclass
class RateStudyResult:
    """Per-seed estimation errors at the half and full horizons."""

    t_half: int
    t_full: int
    errors_half: np.ndarray
    errors_full: np.ndarray

    @property
    def ratios(self) -> np.ndarray:
        return self.errors_half / self.errors_full

    @property
    def median_ratio(self) -> float:
        return float(np.median(self.ratios))

    def rows(self):
        for k, (eh, ef) in enumerate(zip(self.errors_half, self.errors_full)):
            yield k, eh, ef, eh / ef


def rls_rate_study(
    seeds: int = 20,
    t_half: int = 2000,
    n: int = 2,
    noise_std: float = 0.447,
    eta: float = 1e4,
    excitation_range: float = 1.5,
    base_seed: int = 0,
) -> RateStudyResult:
    """Error decay of the estimator under i.i.d. excitation.

    For each seed, a hidden quadratic is fit from noisy evaluations at
    uniform random points; the error to the true packed parameters is
    snapshotted at ``t_half`` and ``4 * t_half``.  A square-root decay rate
    makes the error ratio between the two snapshots concentrate near 2.
    """
    errors_half = np.zeros(seeds)
    errors_full = np.zeros(seeds)
    t_full = 4 * t_half
    for k in range(seeds):
        rng = np.random.default_rng((base_seed, k))
        v = rng.uniform(-1.0, 1.0, size=n)
        truth = QuadraticFunction.squared_distance(v)
        xi_true = pack_params(truth)
        est = RlsState.for_dimension(n, eta)
        for t in range(1, t_full + 1):
            x = rng.uniform(-excitation_range, excitation_range, size=n)
            y = truth(x) + rng.normal(0.0, noise_std)
            est.update(pack_regressor(x), y)
            if t == t_half:
                errors_half[k] = np.linalg.norm(est.xi - xi_true)
        errors_full[k] = np.linalg.norm(est.xi - xi_true)
    return RateStudyResult(t_half, t_full, errors_half, errors_full)


@dataclass
class ConservationAuditResult:
    """Worst-case identity residuals over the audited instances."""

    instances: list
    max_conservation: float
    max_mean_dynamics: float

    def rows(self):
        for inst in self.instances:
            yield (
                inst["index"],
                inst["topology"],
                inst["N"],
                inst["n"],
                inst["conservation_max"],
                inst["mean_dynamics_max"],
            )


def conservation_audit(
    instances: int = 20,
    rounds: int = 200,
    topologies=("complete", "ring", "erdos_renyi"),
    base_seed: int = 0,
    max_agents: int = 10,
    max_dim: int = 3,
) -> ConservationAuditResult:
    """Run random instances and report the worst identity residuals.

    Each instance draws a size (N <= ``max_agents``, n <= ``max_dim``) and a
    seed, then runs the full learning loop for ``rounds`` iterations on each
    topology, collecting the per-run maxima of the conservation and
    mean-dynamics residuals.
    """
    rng = np.random.default_rng(base_seed)
    results = []
    max_cons = 0.0
    max_mean = 0.0
    index = 0
    for _ in range(instances):
        N = int(rng.integers(2, max_agents + 1))
        n = int(rng.integers(1, max_dim + 1))
        seed = int(rng.integers(0, 2**31 - 1))
        for topo in topologies:
            topology = {"kind": topo}
            if topo == "erdos_renyi":
                topology["p"] = 0.4
            config = SimConfig(
                N=N,
                n=n,
                T=rounds,
                alpha=0.01,
                seed=seed,
                log_interval=rounds,
                topology=topology,
                scenario={"kind": "benchmark"},
            )
            res = run(config)
            cons = res.metadata["conservation_residual_max"]
            mean = res.metadata["mean_dynamics_residual_max"]
            max_cons = max(max_cons, cons)
            max_mean = max(max_mean, mean)
            results.append(
                {
                    "index": index,
                    "topology": topo,
                    "N": N,
                    "n": n,
                    "seed": seed,
                    "conservation_max": cons,
                    "mean_dynamics_max": mean,
                }
            )
            index += 1
    return ConservationAuditResult(results, max_cons, max_mean)
