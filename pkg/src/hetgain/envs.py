"""Experiment environments: one-step matrix games and a miniature
multi-goal-capture arena, both with reward-parameterization hooks.

Only the reward depends on the learnable parameters (tau1 for the inner
aggregator, tau2 for the outer one), so reward gradients with respect to
those parameters never differentiate through the dynamics.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from ._kernels import batch_reward, batch_scores
from .aggregators import AggregatorSpec, Family, gradient_input, gradient_parameter
from .errors import DomainError
from .gains import CONTINUOUS, DISCRETE, AllocationMatrix, RewardStructure

THETA_CLAMPS = {
    Family.POWER_SUM: (0.3, 6.0),
    Family.SOFTMAX: (-50.0, 50.0),
}


@dataclass(frozen=True)
class EnvTheta:
    """Learnable reward parameters (tau1 inner, tau2 outer) with clamping."""

    family: Family
    tau_inner: float
    tau_outer: float

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam not in THETA_CLAMPS:
            raise DomainError(f"family {fam.value} is not reward-parameterizable")
        lo, hi = THETA_CLAMPS[fam]
        object.__setattr__(self, "tau_inner", float(np.clip(self.tau_inner, lo, hi)))
        object.__setattr__(self, "tau_outer", float(np.clip(self.tau_outer, lo, hi)))

    @property
    def bounds(self) -> tuple[float, float]:
        return THETA_CLAMPS[self.family]

    def structure(self, n_agents: int, n_tasks: int) -> RewardStructure:
        return RewardStructure(
            outer=AggregatorSpec(self.family, self.tau_outer),
            inner=AggregatorSpec(self.family, self.tau_inner),
            n_agents=n_agents,
            n_tasks=n_tasks,
        )

    def stepped(self, g1: float, g2: float) -> "EnvTheta":
        return replace(self, tau_inner=self.tau_inner + g1, tau_outer=self.tau_outer + g2)


# ---------------------------------------------------------------------------
# one-step matrix game
# ---------------------------------------------------------------------------


class MatrixGameEnv:
    """One-step observationless game: actions are effort allocations and all
    agents receive the identical scalar reward of the assembled matrix."""

    def __init__(self, structure: RewardStructure, mode: str = DISCRETE):
        if mode not in (DISCRETE, CONTINUOUS):
            raise DomainError(f"unknown mode {mode!r}")
        self.structure = structure
        self.mode = mode


def matrix_step(env: MatrixGameEnv, actions) -> dict:
    """Play the single step: discrete actions are task indices, continuous
    actions are simplex rows.  Returns the shared reward and the matrix."""
    n, m = env.structure.n_agents, env.structure.n_tasks
    if env.mode == DISCRETE:
        idx = np.asarray(actions, dtype=np.int64)
        if idx.shape != (n,) or np.any(idx < 0) or np.any(idx >= m):
            raise DomainError("discrete actions must be N task indices")
        a = np.eye(m)[idx]
        allocation = AllocationMatrix(a, DISCRETE)
    else:
        a = np.asarray(actions, dtype=np.float64)
        if a.shape != (n, m):
            raise DomainError("continuous actions must be an (N, M) matrix")
        if np.any(a < 0) or np.any(np.abs(a.sum(axis=1) - 1.0) > 1e-6):
            raise DomainError("continuous actions must be simplex rows")
        allocation = AllocationMatrix(a, CONTINUOUS)
    reward = float(batch_reward(a[None], env.structure.inner, env.structure.outer)[0])
    return {"reward": reward, "allocation": allocation}


# ---------------------------------------------------------------------------
# multi-goal capture
# ---------------------------------------------------------------------------


def mgc_efforts(agent_positions, goal_positions) -> np.ndarray:
    """Proximity-based efforts: r_ij = (1 - d_ij / sum_j d_ij) / (M - 1).

    Rows sum to one by construction.  Supports batched positions
    ((B, N, 2), (B, M, 2)) as well as single configurations.
    """
    p = np.asarray(agent_positions, dtype=np.float64)
    g = np.asarray(goal_positions, dtype=np.float64)
    single = p.ndim == 2
    if single:
        p, g = p[None], g[None]
    m = g.shape[1]
    if m < 2:
        raise DomainError("need at least two goals")
    d = np.linalg.norm(p[:, :, None, :] - g[:, None, :, :], axis=-1)  # (B, N, M)
    totals = d.sum(axis=2, keepdims=True)
    if np.any(totals <= 0):
        raise DomainError("agent coincides with every goal; distances are all zero")
    r = (1.0 - d / totals) / (m - 1)
    return r[0] if single else r


class MultiGoalCaptureEnv:
    """Point-mass agents in the [-1, 1]^2 arena chasing M fixed goals.

    The environment is batched: ``batch_size`` independent episodes advance
    in lockstep.  Observations are each agent's relative displacements to
    all goals.  First-order dynamics: p <- clip(p + v * dt).
    """

    def __init__(
        self,
        structure: RewardStructure,
        batch_size: int = 1,
        horizon: int = 50,
        dt: float = 0.1,
        v_max: float = 0.5,
        goal_min_sep: float = 0.5,
        seed: int = 0,
    ):
        if structure.n_tasks < 2:
            raise DomainError("multi-goal capture needs M >= 2")
        self.structure = structure
        self.batch_size = batch_size
        self.horizon = horizon
        self.dt = dt
        self.v_max = v_max
        self.goal_min_sep = goal_min_sep
        self.rng = np.random.default_rng(seed)
        self.t = 0
        self.positions = None
        self.goals = None

    @property
    def obs_dim(self) -> int:
        return 2 * self.structure.n_tasks

    def _sample_goals(self) -> np.ndarray:
        b, m = self.batch_size, self.structure.n_tasks
        goals = self.rng.uniform(-1.0, 1.0, size=(b, m, 2))
        for k in range(b):
            for j in range(1, m):
                for _ in range(200):
                    sep = np.linalg.norm(goals[k, j] - goals[k, :j], axis=1).min()
                    if sep >= self.goal_min_sep:
                        break
                    goals[k, j] = self.rng.uniform(-1.0, 1.0, size=2)
        return goals

    def reset(self) -> np.ndarray:
        b, n = self.batch_size, self.structure.n_agents
        self.goals = self._sample_goals()
        self.positions = self.rng.uniform(-1.0, 1.0, size=(b, n, 2))
        self.t = 0
        return self._observations()

    def _observations(self) -> np.ndarray:
        rel = self.goals[:, None, :, :] - self.positions[:, :, None, :]  # (B, N, M, 2)
        return rel.reshape(self.batch_size, self.structure.n_agents, self.obs_dim)

    def step(self, velocities) -> dict:
        v = np.clip(np.asarray(velocities, dtype=np.float64), -self.v_max, self.v_max)
        if v.shape != self.positions.shape:
            raise DomainError(f"velocities must have shape {self.positions.shape}")
        self.positions = np.clip(self.positions + v * self.dt, -1.0, 1.0)
        efforts = mgc_efforts(self.positions, self.goals)
        rewards = batch_reward(efforts, self.structure.inner, self.structure.outer)
        self.t += 1
        return {
            "observations": self._observations(),
            "rewards": rewards,
            "done": self.t >= self.horizon,
            "allocations": efforts,
        }


def mgc_step(env: MultiGoalCaptureEnv, velocities) -> dict:
    return env.step(velocities)


def trace_to_csv(positions, efforts, rewards) -> str:
    """Serialize one episode: rows (t, agent, x, y, r_i1..r_iM, reward).

    ``positions`` is (H, N, 2), ``efforts`` (H, N, M), ``rewards`` (H,).
    """
    positions = np.asarray(positions)
    efforts = np.asarray(efforts)
    rewards = np.asarray(rewards)
    h, n, m = efforts.shape
    buf = io.StringIO()
    cols = ["t", "agent", "x", "y"] + [f"r_{j + 1}" for j in range(m)] + ["reward"]
    buf.write(",".join(cols) + "\n")
    for t in range(h):
        for i in range(n):
            row = [str(t), str(i)]
            row += [repr(float(positions[t, i, 0])), repr(float(positions[t, i, 1]))]
            row += [repr(float(efforts[t, i, j])) for j in range(m)]
            row.append(repr(float(rewards[t])))
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# reward-parameter gradients
# ---------------------------------------------------------------------------


def reward_theta_gradient(theta: EnvTheta, allocation) -> tuple[float, float]:
    """Exact (dR/dtau1, dR/dtau2) at a fixed allocation matrix.

    Chain rule through the nested aggregators; valid because the parameters
    enter only the reward.
    """
    a = allocation.values if isinstance(allocation, AllocationMatrix) else np.asarray(allocation)
    n, m = a.shape
    structure = theta.structure(n, m)
    scores = np.array(
        [float(batch_scores(a[None], structure.inner)[0, j]) for j in range(m)]
    )
    gu = gradient_input(structure.outer, scores)
    g_inner = sum(
        gu[j] * gradient_parameter(structure.inner, a[:, j]) for j in range(m)
    )
    g_outer = gradient_parameter(structure.outer, scores)
    return float(g_inner), float(g_outer)


def batch_theta_gradient(theta: EnvTheta, batch) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-episode (dR/dtau1, dR/dtau2) over a (B, N, M) batch."""
    a = np.asarray(batch, dtype=np.float64)
    fam = theta.family
    t1, t2 = theta.tau_inner, theta.tau_outer
    if fam is Family.SOFTMAX:
        scores, dscore_dt1 = _softmax_value_and_tgrad(a, t1, axis=1)
        _, dout_dt2 = _softmax_value_and_tgrad(scores, t2, axis=1)
        w2 = _softmax_w(scores, t2, axis=1)
        f = (w2 * scores).sum(axis=1, keepdims=True)
        du_ds = w2 * (1.0 + t2 * (scores - f))  # (B, M)
        g1 = (du_ds * dscore_dt1).sum(axis=1)
        return g1, dout_dt2
    if fam is Family.POWER_SUM:
        with np.errstate(divide="ignore", invalid="ignore"):
            loga = np.where(a > 0, np.log(np.where(a > 0, a, 1.0)), 0.0)
            at = a**t1
            scores = at.sum(axis=1)  # (B, M)
            dscore_dt1 = (at * loga).sum(axis=1)
            du_ds = t2 * scores ** (t2 - 1.0)
            logs = np.where(scores > 0, np.log(np.where(scores > 0, scores, 1.0)), 0.0)
            dout_dt2 = (scores**t2 * logs).sum(axis=1)
        g1 = (du_ds * dscore_dt1).sum(axis=1)
        return g1, dout_dt2
    raise DomainError(f"family {fam.value} is not reward-parameterizable")


def _softmax_w(values: np.ndarray, t: float, axis: int) -> np.ndarray:
    z = t * values
    z = z - z.max(axis=axis, keepdims=True)
    w = np.exp(z)
    return w / w.sum(axis=axis, keepdims=True)


def _softmax_value_and_tgrad(values: np.ndarray, t: float, axis: int):
    w = _softmax_w(values, t, axis)
    f = (w * values).sum(axis=axis)
    tgrad = (w * values**2).sum(axis=axis) - f**2
    return f, tgrad
