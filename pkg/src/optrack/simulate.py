"""End-to-end simulation runs: configuration, round loop, outputs.

A run executes the per-iteration order fixed by the data dependencies of the
algorithm: solution exchange, user feedback at the fresh estimate, estimator
update, gradient refresh, tracker exchange, metrics.  Runs are deterministic
given (config, seed): the noise stream is indexed by (seed, agent, t) and all
topology/scenario draws are seeded, so equal configs give bit-identical CSV
output and checkpointed runs resume exactly.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graphs import build_mixing
from .metrics import MetricsAccumulator, MetricsRecord, OptimumOracle
from .quadratics import pack_regressor, param_dim
from .rls import RlsState
from .scenarios import ScenarioError, scenario_from_spec, scenario_to_spec
from .tracking import (
    AgentState,
    BroadcastChannel,
    d_step,
    g_step,
    step_size_advisor,
    x_step,
)

__all__ = [
    "ConfigError",
    "DivergenceError",
    "CheckpointError",
    "SimConfig",
    "RunResult",
    "run",
    "resume",
    "load_checkpoint",
]

ENGINES = ("message", "matrix")
DEFAULT_LOG_ROWS = 10_000


class ConfigError(ValueError):
    """Invalid or unknown simulation configuration."""


class CheckpointError(RuntimeError):
    """Checkpoint does not match the configuration it is resumed with."""


class DivergenceError(RuntimeError):
    """An agent state exceeded the divergence limit (step size too large).

    Carries the partial results accumulated before the abort in ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class SimConfig:
    """Everything needed to reproduce a run; JSON round-trippable.

    Mode flags isolate the two halves of the algorithm: with
    ``learning_enabled=False`` the estimator never runs (estimates stay at
    their initial values), and with ``oracle_estimates=True`` the true hidden
    costs are handed to the agents, reducing the loop to pure gradient
    tracking.  ``static_time=True`` freezes the engineering costs at t=0.
    """

    N: int
    n: int
    T: int
    alpha: float
    eta: float = 1e4
    mu: float = 1.5
    seed: int = 0
    log_interval: int | None = None
    learning_enabled: bool = True
    oracle_estimates: bool = False
    static_time: bool = False
    engine: str = "message"
    conservation_tol: float = 1e-8
    divergence_limit: float = 1e6
    checkpoint_interval: int | None = None
    log_estimated_regret: bool = False
    track_agent_regret: bool = False
    topology: dict = field(default_factory=lambda: {"kind": "erdos_renyi", "p": 0.2})
    scenario: dict = field(default_factory=lambda: {"kind": "benchmark"})

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        """Fail-closed parsing: unknown keys are rejected, not ignored."""
        if not isinstance(data, dict):
            raise ConfigError(f"config must be a mapping, got {type(data).__name__}")
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"N", "n", "T", "alpha"} - set(data)
        if missing:
            raise ConfigError(f"missing required config keys: {sorted(missing)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def resolved_log_interval(self) -> int:
        if self.log_interval is not None:
            return int(self.log_interval)
        return max(1, self.T // DEFAULT_LOG_ROWS)

    def validate(self) -> None:
        if self.N < 1:
            raise ConfigError(f"N must be at least 1, got {self.N}")
        if self.n < 1:
            raise ConfigError(f"n must be at least 1, got {self.n}")
        if self.T < 1:
            raise ConfigError(f"T must be at least 1, got {self.T}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not self.eta > 0:
            raise ConfigError(f"eta must be positive, got {self.eta}")
        if not self.mu > 1:
            raise ConfigError(f"mu must exceed 1, got {self.mu}")
        if int(self.seed) < 0:
            raise ConfigError(f"seed must be nonnegative, got {self.seed}")
        if self.log_interval is not None and self.log_interval < 1:
            raise ConfigError(f"log_interval must be at least 1, got {self.log_interval}")
        if self.engine not in ENGINES:
            raise ConfigError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.learning_enabled and self.oracle_estimates:
            raise ConfigError(
                "oracle_estimates hands agents the true costs; combining it with "
                "learning_enabled is contradictory"
            )
        if not isinstance(self.topology, dict) or not isinstance(self.scenario, dict):
            raise ConfigError("topology and scenario must be mappings")


@dataclass
class RunResult:
    """Outputs of a (possibly partial) run."""

    config: SimConfig
    rows: list
    states: list
    metadata: dict
    state_log: list | None = None
    checkpoint_path: str | None = None

    def write(self, out_dir) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(out_dir / "metrics.csv", self.rows, self.config)
        write_metadata(out_dir / "metadata.txt", self.metadata)
        return out_dir


# -- output formatting --------------------------------------------------------


def _fmt(v) -> str:
    return repr(float(v))


def write_metrics_csv(path, rows, config: SimConfig) -> None:
    header = list(MetricsRecord.CSV_FIELDS)
    if config.log_estimated_regret:
        header.append("est_regret")
    if config.track_agent_regret:
        header.extend(f"agent{j}_regret" for j in range(config.N))
    lines = [",".join(header)]
    for r in rows:
        vals = r.csv_values()
        parts = [str(int(vals[0]))] + [_fmt(v) for v in vals[1:]]
        if config.log_estimated_regret:
            parts.append(_fmt(r.est_regret if r.est_regret is not None else float("nan")))
        if config.track_agent_regret:
            parts.extend(_fmt(v) for v in r.per_agent_cum_regret)
        lines.append(",".join(parts))
    Path(path).write_text("\n".join(lines) + "\n")


def read_metrics_csv(path) -> dict:
    """Read a metrics CSV back into named columns (float arrays)."""
    text = Path(path).read_text().strip().splitlines()
    header = text[0].split(",")
    data = np.array([[float(v) for v in line.split(",")] for line in text[1:]])
    if data.size == 0:
        raise ValueError(f"metrics file {path} has no data rows")
    return {name: data[:, k] for k, name in enumerate(header)}


def write_metadata(path, metadata: dict) -> None:
    lines = []
    for key, value in metadata.items():
        if isinstance(value, (dict, list)):
            value = json.dumps(value, sort_keys=True, separators=(",", ":"))
        lines.append(f"{key} = {value}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_metadata(path) -> dict:
    """Parse a flat key = value metadata document back into strings."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        out[key] = value
    return out


def config_from_metadata(path) -> SimConfig:
    """Recover the exact SimConfig a run directory was produced with."""
    meta = read_metadata(path)
    return SimConfig.from_dict(json.loads(meta["config"]))


# -- state (de)serialization for checkpoints ---------------------------------


def _states_to_arrays(states, config: SimConfig) -> dict:
    N, n = config.N, config.n
    p = param_dim(n)
    out = {
        "X": np.stack([s.x for s in states]),
        "G": np.stack([s.g for s in states]),
        "D": np.stack([s.d for s in states]),
        "est_P": np.stack([s.est_P for s in states]),
        "est_q": np.stack([s.est_q for s in states]),
        "est_r": np.array([s.est_r for s in states]),
    }
    if config.learning_enabled:
        out["rls_xi"] = np.stack([s.rls.xi for s in states])
        out["rls_R"] = np.stack([s.rls.R for s in states])
        out["rls_count"] = np.array([s.rls.count for s in states])
    else:
        out["rls_xi"] = np.zeros((N, p))
        out["rls_R"] = np.zeros((N, p, p))
        out["rls_count"] = np.zeros(N, dtype=int)
    return out


def _states_from_arrays(arrays, config: SimConfig) -> list:
    states = []
    for i in range(config.N):
        rls = None
        if config.learning_enabled:
            rls = RlsState.for_dimension(config.n, config.eta)
            rls.xi = arrays["rls_xi"][i].copy()
            rls.R = arrays["rls_R"][i].copy()
            rls.count = int(arrays["rls_count"][i])
        s = AgentState(arrays["X"][i], arrays["G"][i], arrays["D"][i], rls)
        s.est_P = arrays["est_P"][i].copy()
        s.est_q = arrays["est_q"][i].copy()
        s.est_r = float(arrays["est_r"][i])
        states.append(s)
    return states


def save_checkpoint(path, config: SimConfig, t: int, states, acc, rows) -> None:
    rows_main = np.array([r.csv_values() for r in rows], dtype=float).reshape(len(rows), 8)
    rows_est = np.array(
        [float("nan") if r.est_regret is None else r.est_regret for r in rows], dtype=float
    )
    if config.track_agent_regret and rows:
        rows_agents = np.stack([r.per_agent_cum_regret for r in rows])
    else:
        rows_agents = np.zeros((len(rows), 0))
    payload = _states_to_arrays(states, config)
    np.savez(
        path,
        t=t,
        cum_regret=acc.cum_regret,
        est_error_sum=acc.est_error_sum,
        per_agent=acc.per_agent if acc.per_agent is not None else np.zeros(0),
        rows_main=rows_main,
        rows_est=rows_est,
        rows_agents=rows_agents,
        config_json=config.canonical_json(),
        config_hash=config.config_hash(),
        **payload,
    )


def load_checkpoint(path) -> tuple[SimConfig, dict]:
    with np.load(path, allow_pickle=False) as data:
        arrays = {k: data[k] for k in data.files}
    config = SimConfig.from_dict(json.loads(str(arrays["config_json"])))
    return config, arrays


def _rows_from_arrays(arrays, config: SimConfig) -> list:
    rows = []
    for k in range(arrays["rows_main"].shape[0]):
        t, cum, avg, cons, track, est_sum, lo, hi = arrays["rows_main"][k]
        est = float(arrays["rows_est"][k])
        per = arrays["rows_agents"][k] if config.track_agent_regret else None
        rows.append(
            MetricsRecord(
                t=int(t),
                regret_increment=float("nan"),
                cum_regret=cum,
                avg_regret=avg,
                consensus=cons,
                tracking_error=track,
                est_error_sum=est_sum,
                eig_min=lo,
                eig_max=hi,
                est_regret=None if np.isnan(est) else est,
                per_agent_cum_regret=per,
            )
        )
    return rows


# -- the run loop -------------------------------------------------------------


def _init_states(config: SimConfig, scenario) -> list:
    states = []
    for i in range(config.N):
        rls = RlsState.for_dimension(config.n, config.eta) if config.learning_enabled else None
        x0 = scenario.x0[i]
        if config.oracle_estimates:
            truth = scenario.user[i].truth
            P, q, r = truth.P.copy(), truth.q.copy(), truth.r
        else:
            P = np.zeros((config.n, config.n))
            q = np.zeros(config.n)
            r = 0.0
        g0 = scenario.grad_V(i, x0, 0) + P @ x0 + q
        s = AgentState(x0, g0, g0, rls)
        s.est_P, s.est_q, s.est_r = P, q, r
        states.append(s)
    return states


def run(
    config: SimConfig,
    out_dir=None,
    stop_after: int | None = None,
    record_states: bool = False,
    _resume: dict | None = None,
) -> RunResult:
    """Execute a configured run; see the module docstring for the loop order.

    ``stop_after`` halts early and writes a checkpoint (requires ``out_dir``),
    so long reference runs can be split; ``record_states`` keeps (t, X, D)
    snapshots at every logged iteration for cross-validation.
    """
    config.validate()
    started = time.perf_counter()
    scenario = scenario_from_spec(config.scenario, config.N, config.n, config.seed)
    mixing = build_mixing(config.topology, config.N, default_seed=config.seed)
    oracle = OptimumOracle(scenario)
    log_interval = config.resolved_log_interval()

    warnings = []
    try:
        L_total, alpha_max = step_size_advisor(scenario, config.mu)
        if config.alpha > alpha_max:
            warnings.append(
                f"alpha {config.alpha} exceeds the advisory bound N/L = {alpha_max:.6g}"
            )
    except (ScenarioError, ValueError) as exc:
        L_total, alpha_max = float("nan"), float("nan")
        warnings.append(f"step-size advisory unavailable: {exc}")

    acc = MetricsAccumulator(
        scenario,
        oracle,
        track_agents=config.track_agent_regret,
        log_estimated=config.log_estimated_regret,
    )
    if _resume is None:
        states = _init_states(config, scenario)
        t_start = 0
        rows: list[MetricsRecord] = []
    else:
        states = _states_from_arrays(_resume, config)
        t_start = int(_resume["t"])
        acc.cum_regret = float(_resume["cum_regret"])
        acc.est_error_sum = float(_resume["est_error_sum"])
        if config.track_agent_regret:
            acc.per_agent = _resume["per_agent"].copy()
        rows = _rows_from_arrays(_resume, config)

    channel = BroadcastChannel(mixing) if config.engine == "message" else None
    state_log = [] if record_states else None
    audit = {"conservation_max": 0.0, "mean_dynamics_max": 0.0}
    prev_xbar = np.mean([s.x for s in states], axis=0)
    prev_dbar = np.mean([s.d for s in states], axis=0)

    t_end = config.T if stop_after is None else min(config.T, int(stop_after))
    if stop_after is not None and out_dir is None:
        raise ConfigError("stop_after needs an out_dir to hold the checkpoint")

    def _partial() -> RunResult:
        meta = _build_metadata(config, scenario, mixing, channel, L_total, alpha_max,
                               warnings, audit, started, status="diverged")
        return RunResult(config, rows, states, meta, state_log)

    checkpoint_path = None
    for t in range(t_start + 1, t_end + 1):
        teff = 0 if config.static_time else t

        x_step(states, mixing, config.alpha, channel)
        for i, s in enumerate(states):
            if not np.all(np.abs(s.x) <= config.divergence_limit):
                raise DivergenceError(
                    f"agent {i} diverged at iteration {t} "
                    f"(|x| reached {np.abs(s.x).max():.3e}; try a smaller alpha)",
                    partial=_partial(),
                )
        xbar = np.mean([s.x for s in states], axis=0)
        res = float(np.linalg.norm(xbar - (prev_xbar - config.alpha * prev_dbar)))
        if res > audit["mean_dynamics_max"]:
            audit["mean_dynamics_max"] = res

        if config.learning_enabled:
            for i, s in enumerate(states):
                y = scenario.feedback(i, s.x, t)
                s.rls.update(pack_regressor(s.x), y)
                s.est_P, s.est_q, s.est_r = s.rls.quad_parts()

        g_old = [s.g for s in states]
        g_step(states, scenario, teff)
        cons = d_step(states, mixing, g_old, channel, config.conservation_tol)
        if cons > audit["conservation_max"]:
            audit["conservation_max"] = cons

        prev_xbar = xbar
        prev_dbar = np.mean([s.d for s in states], axis=0)

        acc.step(t, teff, states)
        if t % log_interval == 0 or t == config.T:
            rows.append(acc.record_at(states))
            if record_states:
                state_log.append(
                    (t, np.stack([s.x for s in states]), np.stack([s.d for s in states]))
                )

        due_checkpoint = (
            config.checkpoint_interval
            and out_dir is not None
            and t % config.checkpoint_interval == 0
        )
        if due_checkpoint or (stop_after is not None and t == t_end):
            checkpoint_path = str(Path(out_dir) / "checkpoint.npz")
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            save_checkpoint(checkpoint_path, config, t, states, acc, rows)

    status = "complete" if t_end == config.T else f"stopped at t={t_end}"
    metadata = _build_metadata(
        config, scenario, mixing, channel, L_total, alpha_max, warnings, audit, started,
        status=status,
    )
    result = RunResult(config, rows, states, metadata, state_log, checkpoint_path)
    if out_dir is not None and t_end == config.T:
        result.write(out_dir)
    return result


def resume(checkpoint_path, out_dir=None, config: SimConfig | None = None) -> RunResult:
    """Continue a checkpointed run to its configured horizon.

    The stored configuration is used; if ``config`` is supplied it must hash
    identically (resuming under altered parameters would silently change the
    experiment).  Results are bit-identical to an uninterrupted run.
    """
    stored_config, arrays = load_checkpoint(checkpoint_path)
    if config is not None and config.config_hash() != str(arrays["config_hash"]):
        raise CheckpointError(
            "checkpoint was produced by a different configuration "
            f"(hash {arrays['config_hash']} != {config.config_hash()})"
        )
    return run(stored_config, out_dir=out_dir, _resume=arrays)


def _build_metadata(
    config, scenario, mixing, channel, L_total, alpha_max, warnings, audit, started, status
) -> dict:
    meta = {
        "tool": "optrack",
        "status": status,
        "config": json.loads(config.canonical_json()),
        "config_hash": config.config_hash(),
        "log_interval_resolved": config.resolved_log_interval(),
        "scenario_resolved": scenario_to_spec(scenario),
        "topology_matrix": np.asarray(mixing.W).tolist(),
        "sigma_w": mixing.sigma,
        "smoothness_total": L_total,
        "alpha_max_advisory": alpha_max,
        "warnings": warnings,
        "noise_variance": scenario.noise.variance,
        "noise_std": scenario.noise.std,
        "conservation_residual_max": audit["conservation_max"],
        "mean_dynamics_residual_max": audit["mean_dynamics_max"],
        "directed_edges": mixing.directed_edge_count(),
        "scalars_per_round": 2 * scenario.n * mixing.directed_edge_count(),
        "runtime_seconds": round(time.perf_counter() - started, 3),
    }
    if channel is not None:
        meta["scalars_sent_total"] = channel.scalars_sent
        meta["messages_sent_total"] = channel.messages_sent
    return meta
