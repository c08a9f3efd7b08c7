"""Dynamic gradient tracking: per-agent states and the two-exchange round.

Every round each agent (1) mixes neighbors' solution estimates and takes a
step against its tracker d, (2) refreshes its local gradient g from the
current time index and parameter estimates, and (3) mixes neighbors' trackers
and adds its own gradient innovation.  With doubly-stochastic weights the
tracker average equals the gradient average after every round, and the
network average obeys ``xbar_t = xbar_{t-1} - alpha * dbar_{t-1}`` exactly;
both identities are asserted numerically while running.

The default execution path is a faithful message-passing simulation with
per-agent inboxes and scalar accounting; a stacked matrix form is available
for cross-validation.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "AgentState",
    "BroadcastChannel",
    "ConservationError",
    "init_agents",
    "x_step",
    "g_step",
    "d_step",
    "step_size_advisor",
]

CONSERVATION_TOL = 1e-8


class ConservationError(RuntimeError):
    """Tracker average drifted from the gradient average.

    Signals a weight matrix that is not column-stochastic or an update
    ordering bug; the identity is exact in real arithmetic.
    """


class AgentState:
    """One agent's solution estimate x, local gradient g and tracker d.

    ``est_P``/``est_q`` cache the agent's current curvature/slope estimates of
    its hidden cost so the gradient step does not re-unpack them; ``rls``
    holds the estimator when learning is enabled.
    """

    __slots__ = ("x", "g", "d", "rls", "est_P", "est_q", "est_r")

    def __init__(self, x, g, d, rls=None):
        self.x = np.asarray(x, dtype=float).copy()
        self.g = np.asarray(g, dtype=float).copy()
        self.d = np.asarray(d, dtype=float).copy()
        self.rls = rls
        n = self.x.size
        self.est_P = np.zeros((n, n))
        self.est_q = np.zeros(n)
        self.est_r = 0.0

    def estimated_grad_U(self, x) -> np.ndarray:
        return self.est_P @ x + self.est_q

    def estimated_U(self, x) -> float:
        return float(0.5 * (x @ self.est_P @ x) + self.est_q @ x + self.est_r)


def init_agents(x0, grads0, rls_states=None) -> list[AgentState]:
    """Build agent states with trackers seeded by the initial gradients.

    ``grads0[i]`` must be agent i's estimated aggregate gradient at x0[i] and
    time 0; both g and d start there so the tracker/gradient average identity
    holds from round zero.
    """
    x0 = [np.asarray(x, dtype=float).reshape(-1) for x in x0]
    grads0 = [np.asarray(g, dtype=float).reshape(-1) for g in grads0]
    if len(x0) != len(grads0):
        raise ValueError(f"got {len(x0)} initial points but {len(grads0)} initial gradients")
    n = x0[0].size
    for v in (*x0, *grads0):
        if v.size != n:
            raise ValueError("inconsistent vector dimensions in initial data")
    if rls_states is None:
        rls_states = [None] * len(x0)
    return [AgentState(x, g, g, rls) for x, g, rls in zip(x0, grads0, rls_states)]


class BroadcastChannel:
    """Point-to-point delivery along the directed edges, with accounting.

    Each ``exchange`` delivers one n-vector per directed edge (self-loops need
    no message) and tallies the scalars sent.  Per iteration the tracking
    update uses two exchanges, so any agent sends and receives at most
    ``4*(N-1)*n`` scalars in total.
    """

    def __init__(self, mixing):
        self.mixing = mixing
        # out_edges[j]: agents (other than j) that receive j's broadcasts
        self.out_edges = [
            [i for i in range(mixing.N) if j in mixing.neighbors[i] and i != j]
            for j in range(mixing.N)
        ]
        self.scalars_sent = 0
        self.messages_sent = 0

    def exchange(self, values) -> list[dict]:
        """Deliver each agent's value to its out-neighbors; returns inboxes."""
        inboxes = [dict() for _ in range(self.mixing.N)]
        for j, value in enumerate(values):
            for i in self.out_edges[j]:
                inboxes[i][j] = value
                self.messages_sent += 1
                self.scalars_sent += value.size
        return inboxes

    def scalars_per_round(self, n: int) -> int:
        """Scalars moved by the two exchanges of one iteration."""
        return 2 * n * self.mixing.directed_edge_count()


def _mix(mixing, own_index, own_value, inbox):
    # assemble the weight row's operand from the inbox only (locality keeps
    # non-neighbor slots at zero, which contribute exactly +0.0), then use the
    # same row-vector product as the matrix engine so the two paths round
    # identically
    stacked = np.zeros((mixing.N, own_value.size))
    stacked[own_index] = own_value
    for j, value in inbox.items():
        stacked[j] = value
    return mixing.W[own_index] @ stacked


def x_step(states, mixing, alpha: float, channel: BroadcastChannel | None = None) -> None:
    """Solution update: mix neighbor estimates, step against the tracker.

    All agents read the pre-round snapshot and commit simultaneously
    (synchronous semantics).
    """
    if not alpha > 0:
        raise ValueError(f"step size must be positive, got {alpha}")
    snapshot = [s.x for s in states]
    if channel is not None:
        inboxes = channel.exchange(snapshot)
        new_x = [
            _mix(mixing, i, snapshot[i], inboxes[i]) - alpha * states[i].d
            for i in range(len(states))
        ]
    else:
        X = np.asarray(snapshot)
        new_x = [mixing.W[i] @ X - alpha * states[i].d for i in range(len(states))]
    for s, x in zip(states, new_x):
        s.x = x


def g_step(states, scenario, t: int) -> None:
    """Gradient refresh at time t: known part plus current estimated part.

    Requires the parameter estimates already updated for time t (the cached
    est_P/est_q on each agent).
    """
    for i, s in enumerate(states):
        s.g = scenario.grad_V(i, s.x, t) + s.estimated_grad_U(s.x)


def d_step(
    states,
    mixing,
    g_old,
    channel: BroadcastChannel | None = None,
    conservation_tol: float = CONSERVATION_TOL,
) -> float:
    """Tracker update: mix neighbor trackers, add the gradient innovation.

    ``g_old`` is the pre-round gradient snapshot.  Returns the conservation
    residual ``||mean(d) - mean(g)||`` and raises ConservationError if it
    exceeds ``conservation_tol``.
    """
    snapshot = [s.d for s in states]
    if channel is not None:
        inboxes = channel.exchange(snapshot)
        new_d = [
            _mix(mixing, i, snapshot[i], inboxes[i]) + (states[i].g - g_old[i])
            for i in range(len(states))
        ]
    else:
        D = np.asarray(snapshot)
        new_d = [
            mixing.W[i] @ D + (states[i].g - g_old[i]) for i in range(len(states))
        ]
    for s, d in zip(states, new_d):
        s.d = d
    residual = float(
        np.linalg.norm(
            np.mean([s.d for s in states], axis=0) - np.mean([s.g for s in states], axis=0)
        )
    )
    if residual > conservation_tol:
        raise ConservationError(
            f"tracker/gradient average conservation violated: residual {residual:.3e} "
            f"(weights not column-stochastic, or update ordering bug)"
        )
    return residual


def step_size_advisor(scenario, mu: float) -> tuple[float, float]:
    """Advisory smoothness total L and step-size bound N/L.

    ``L = N * L_V + mu * sum_i L_i`` where L_V bounds the engineering
    gradients' Lipschitz constants, L_i the user costs', and mu > 1 covers
    curvature overshoot of the learned estimates.  Convergence needs a "small
    enough" step, so the bound is advisory, not a hard limit.
    """
    if not mu > 1:
        raise ValueError(f"mu must exceed 1, got {mu}")
    l_eng, l_user = scenario.smoothness_bounds()
    N = scenario.N
    L = N * l_eng + mu * float(np.sum(l_user))
    return L, N / L
