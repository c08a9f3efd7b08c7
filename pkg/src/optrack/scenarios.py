"""Problem definitions: known time-varying costs, hidden user costs, noise.

Each agent carries a known engineering cost (by default a squared distance to
a slowly moving target), a hidden quadratic user cost evaluated only through
noisy scalar feedback, and a per-agent noise stream.  Noise draws are indexed
by (seed, agent, t), so runs are reproducible and resumable regardless of
evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadratics import QuadraticFunction

__all__ = [
    "ScenarioError",
    "TrackingCost",
    "CallbackCost",
    "UserCost",
    "NoiseModel",
    "Scenario",
    "benchmark_scenario",
    "static_scenario",
    "scenario_from_spec",
    "scenario_to_spec",
]


class ScenarioError(ValueError):
    """A scenario violates one of the problem-structure requirements."""


@dataclass(frozen=True)
class TrackingCost:
    """Engineering cost ``||x - p(t)||^2`` with target ``p(t) = z + psi*sin(t/m)``.

    ``psi`` multiplies componentwise; ``timescale`` m must be at least 2.
    Smoothness and strong convexity are both 2 (curvature 2I).
    """

    anchor: np.ndarray       # z
    amplitude: np.ndarray    # psi
    timescale: int           # m

    lipschitz = 2.0
    strong_convexity = 2.0

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(-1))
        object.__setattr__(self, "amplitude", np.asarray(self.amplitude, dtype=float).reshape(-1))
        if self.amplitude.size != self.anchor.size:
            raise ScenarioError("anchor and amplitude dimensions differ")
        if int(self.timescale) < 2:
            raise ScenarioError(f"timescale must be an integer >= 2, got {self.timescale}")
        object.__setattr__(self, "timescale", int(self.timescale))

    def target(self, t: int) -> np.ndarray:
        """Target position p(t)."""
        return self.anchor + self.amplitude * np.sin(t / self.timescale)

    def value(self, x, t: int) -> float:
        d = np.asarray(x, dtype=float) - self.target(t)
        return float(d @ d)

    def gradient(self, x, t: int) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype=float) - self.target(t))


@dataclass(frozen=True)
class CallbackCost:
    """Engineering cost given by a user-supplied gradient callback.

    The closed-form optimum oracle cannot handle these; runs fall back to a
    numerically minimized reference.  ``lipschitz``/``strong_convexity``
    metadata may be None, in which case the step-size advisor refuses.
    """

    gradient_fn: object
    value_fn: object = None
    lipschitz: float | None = None
    strong_convexity: float | None = None

    def value(self, x, t: int) -> float:
        if self.value_fn is None:
            raise ScenarioError("callback cost has no value function")
        return float(self.value_fn(np.asarray(x, dtype=float), t))

    def gradient(self, x, t: int) -> np.ndarray:
        return np.asarray(self.gradient_fn(np.asarray(x, dtype=float), t), dtype=float)


@dataclass(frozen=True)
class UserCost:
    """Hidden quadratic cost with certified curvature bounds.

    The curvature eigenvalues must lie in [strong_convexity, smoothness] with
    a strictly positive floor; bounds default to the exact spectrum.
    """

    truth: QuadraticFunction
    smoothness: float = None
    strong_convexity: float = None

    def __post_init__(self):
        eigs = self.truth.eigenvalues()
        lo = float(eigs[0]) if self.strong_convexity is None else float(self.strong_convexity)
        hi = float(eigs[-1]) if self.smoothness is None else float(self.smoothness)
        if not lo > 0:
            raise ScenarioError(
                f"user cost must be strongly convex: curvature floor {lo} is not positive"
            )
        if eigs[0] < lo - 1e-12 or eigs[-1] > hi + 1e-12:
            raise ScenarioError(
                f"user-cost curvature eigenvalues [{eigs[0]}, {eigs[-1]}] "
                f"violate the declared bounds [{lo}, {hi}]"
            )
        object.__setattr__(self, "strong_convexity", lo)
        object.__setattr__(self, "smoothness", hi)


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian feedback noise with (seed, agent, t)-indexed draws."""

    variance: float
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise ScenarioError(f"noise variance must be nonnegative, got {self.variance}")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def sample(self, agent: int, t: int) -> float:
        """Deterministic draw for (agent, t); identical on repeated calls."""
        if self.variance == 0.0:
            return 0.0
        rng = np.random.default_rng((self.seed, agent, t))
        return float(rng.normal(0.0, self.std))


@dataclass(frozen=True)
class Scenario:
    """A full problem instance: N agents, costs, noise, initial conditions."""

    n: int
    engineering: tuple
    user: tuple
    noise: NoiseModel
    x0: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "engineering", tuple(self.engineering))
        object.__setattr__(self, "user", tuple(self.user))
        if len(self.engineering) != len(self.user):
            raise ScenarioError("engineering and user cost lists must have equal length")
        x0 = np.asarray(self.x0, dtype=float).reshape(len(self.user), self.n)
        x0.setflags(write=False)
        object.__setattr__(self, "x0", x0)

    @property
    def N(self) -> int:
        return len(self.user)

    def grad_V(self, i: int, x, t: int) -> np.ndarray:
        return self.engineering[i].gradient(x, t)

    def value_V(self, i: int, x, t: int) -> float:
        return self.engineering[i].value(x, t)

    def feedback(self, i: int, x, t: int) -> float:
        """Noisy scalar evaluation of agent i's hidden cost at x."""
        return self.user[i].truth(x) + self.noise.sample(i, t)

    def total_true_value(self, x, t: int) -> float:
        """Sum over agents of the true aggregate cost at x."""
        return sum(
            self.value_V(i, x, t) + self.user[i].truth(x) for i in range(self.N)
        )

    def smoothness_bounds(self) -> tuple[float, list[float]]:
        """(engineering smoothness bound, per-agent user smoothness bounds)."""
        l_eng = []
        for cost in self.engineering:
            if cost.lipschitz is None:
                raise ScenarioError("engineering cost is missing a smoothness bound")
            l_eng.append(float(cost.lipschitz))
        return max(l_eng), [u.smoothness for u in self.user]

    def all_tracking_quadratic(self) -> bool:
        return all(isinstance(c, TrackingCost) for c in self.engineering)


def benchmark_scenario(
    N: int,
    n: int,
    seed: int,
    noise_variance: float = 0.2,
    preference_range: float = 1.5,
    anchor_range: float = 5.0,
    timescale_range: tuple[int, int] = (100, 150),
    amplitude_range: tuple[float, float] = (0.5, 0.6),
    x0_range: float = 1.5,
) -> Scenario:
    """Random tracking benchmark: moving targets plus hidden preference points.

    Agent i tracks ``p_i(t) = z_i + psi_i sin(t/m_i)`` while its hidden cost is
    ``||x - v_i||^2`` for a preference point v_i it never reveals directly.
    Draws: v_i, x_{i,0} uniform in [-1.5, 1.5]^n; z_i uniform in [-5, 5]^n;
    m_i uniform integers in {100..150}; psi_i uniform in [0.5, 0.6] per
    component; feedback noise N(0, 0.2) -- 0.2 read as the variance.
    Equal seeds give identical scenarios.
    """
    if N < 1 or n < 1:
        raise ScenarioError("need N >= 1 agents and dimension n >= 1")
    rng = np.random.default_rng(seed)
    engineering = []
    user = []
    for _ in range(N):
        v = rng.uniform(-preference_range, preference_range, size=n)
        z = rng.uniform(-anchor_range, anchor_range, size=n)
        m = int(rng.integers(timescale_range[0], timescale_range[1] + 1))
        psi = rng.uniform(amplitude_range[0], amplitude_range[1], size=n)
        engineering.append(TrackingCost(z, psi, m))
        user.append(UserCost(QuadraticFunction.squared_distance(v)))
    x0 = rng.uniform(-x0_range, x0_range, size=(N, n))
    meta = {
        "kind": "benchmark",
        "seed": int(seed),
        "noise_variance": float(noise_variance),
        "noise_note": "gaussian noise parameter read as variance (std %.4f)" % np.sqrt(noise_variance),
        "amplitude_note": "amplitude drawn i.i.d. per component",
    }
    return Scenario(
        n=n,
        engineering=engineering,
        user=user,
        noise=NoiseModel(noise_variance, seed=int(seed)),
        x0=x0,
        meta=meta,
    )


def static_scenario(N: int, n: int, seed: int, x0_range: float = 1.5) -> Scenario:
    """Time-invariant, noise-free variant for convergence sanity checks.

    Targets do not move (zero amplitude) and feedback is exact, so with
    learning disabled and true costs supplied the simulator reduces to
    classical static gradient tracking.
    """
    if N < 1 or n < 1:
        raise ScenarioError("need N >= 1 agents and dimension n >= 1")
    rng = np.random.default_rng(seed)
    engineering = []
    user = []
    for _ in range(N):
        v = rng.uniform(-1.5, 1.5, size=n)
        z = rng.uniform(-5.0, 5.0, size=n)
        engineering.append(TrackingCost(z, np.zeros(n), 100))
        user.append(UserCost(QuadraticFunction.squared_distance(v)))
    x0 = rng.uniform(-x0_range, x0_range, size=(N, n))
    return Scenario(
        n=n,
        engineering=engineering,
        user=user,
        noise=NoiseModel(0.0, seed=int(seed)),
        x0=x0,
        meta={"kind": "static", "seed": int(seed)},
    )


def scenario_from_spec(spec: dict, N: int, n: int, default_seed: int) -> Scenario:
    """Build a Scenario from a config-file description (fail-closed keys).

    Kinds: ``benchmark`` (random tracking benchmark), ``static`` (frozen
    targets, no noise), ``explicit`` (every cost and the initial conditions
    spelled out, as echoed into run metadata).
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "benchmark":
        seed = int(spec.pop("seed", default_seed))
        variance = float(spec.pop("noise_variance", 0.2))
        if spec:
            raise ScenarioError(f"unknown scenario keys: {sorted(spec)}")
        return benchmark_scenario(N, n, seed, noise_variance=variance)
    if kind == "static":
        seed = int(spec.pop("seed", default_seed))
        if spec:
            raise ScenarioError(f"unknown scenario keys: {sorted(spec)}")
        return static_scenario(N, n, seed)
    if kind == "explicit":
        engineering = [
            TrackingCost(e["anchor"], e["amplitude"], e["timescale"])
            for e in spec.pop("engineering")
        ]
        user = [
            UserCost(QuadraticFunction(u["P"], u["q"], u["r"])) for u in spec.pop("user")
        ]
        noise = NoiseModel(
            float(spec.pop("noise_variance", 0.0)),
            seed=int(spec.pop("noise_seed", default_seed)),
        )
        x0 = np.asarray(spec.pop("x0"), dtype=float)
        if spec:
            raise ScenarioError(f"unknown scenario keys: {sorted(spec)}")
        scen = Scenario(n=n, engineering=engineering, user=user, noise=noise, x0=x0)
        if scen.N != N:
            raise ScenarioError(f"scenario lists {scen.N} agents but config says N={N}")
        return scen
    raise ScenarioError(f"unknown scenario kind {kind!r}")


def scenario_to_spec(scenario: Scenario) -> dict:
    """Serialize a scenario to the explicit config form (costs spelled out).

    Callback-based engineering costs cannot be serialized and raise.
    """
    engineering = []
    for cost in scenario.engineering:
        if not isinstance(cost, TrackingCost):
            raise ScenarioError("callback costs cannot be serialized to a config")
        engineering.append(
            {
                "anchor": cost.anchor.tolist(),
                "amplitude": cost.amplitude.tolist(),
                "timescale": cost.timescale,
            }
        )
    user = [
        {"P": u.truth.P.tolist(), "q": u.truth.q.tolist(), "r": u.truth.r}
        for u in scenario.user
    ]
    return {
        "kind": "explicit",
        "engineering": engineering,
        "user": user,
        "noise_variance": scenario.noise.variance,
        "noise_seed": scenario.noise.seed,
        "x0": scenario.x0.tolist(),
    }
