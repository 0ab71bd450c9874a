"""Finite average-reward MDPs: relative value iteration and Lagrangian duals.

Transitions are stored in successor-list form: for every (state, action)
pair a fixed number of candidate successors with probabilities, padded
with zero-probability entries.  This keeps the per-iteration work
proportional to the number of genuine outcomes, which for the coding
chains is tiny compared to the state count.

The solver maximizes average reward.  Callers encode distortion as a
negated reward and flip the sign of the reported gain.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import CapacityError, NonConvergenceError, SpecValidationError

PROB_TOL = 1e-12
DAMPING = 0.5


@dataclass(frozen=True)
class FiniteMdp:
    """Average-reward MDP with successor-list transitions.

    next_states and next_probs have shape (S, A, K); rewards has shape
    (S, A).  For each (s, a) the probabilities over the K slots sum to 1.
    """

    next_states: np.ndarray
    next_probs: np.ndarray
    rewards: np.ndarray

    @property
    def num_states(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_actions(self) -> int:
        return self.rewards.shape[1]

    @classmethod
    def from_dense(cls, transition, rewards) -> "FiniteMdp":
        """Build from a dense (S, A, S) transition tensor."""
        t = np.asarray(transition, dtype=float)
        r = np.asarray(rewards, dtype=float)
        if t.ndim != 3 or t.shape[0] != t.shape[2]:
            raise SpecValidationError(["transition tensor must have shape (S, A, S)"])
        s, a, _ = t.shape
        next_states = np.broadcast_to(np.arange(s), (s, a, s)).copy()
        return cls(next_states, t.copy(), r)

    def check(self) -> list[str]:
        out = []
        ns, p, r = self.next_states, self.next_probs, self.rewards
        if r.ndim != 2:
            return ["rewards must have shape (S, A)"]
        if ns.shape != p.shape or ns.shape[:2] != r.shape:
            return ["transition arrays inconsistent with rewards shape"]
        if not np.all(np.isfinite(p)) or not np.all(np.isfinite(r)):
            out.append("non-finite transition probability or reward")
            return out
        if np.any(p < 0):
            out.append("negative transition probability")
        sums = p.sum(axis=2)
        worst = np.abs(sums - 1.0).max()
        if worst > PROB_TOL:
            out.append(f"transition rows off stochastic by {worst:.3e}")
        if ns.min(initial=0) < 0 or ns.max(initial=0) >= self.num_states:
            out.append("successor index outside the state space")
        return out

    def dense(self) -> np.ndarray:
        """Dense (S, A, S) transition tensor, summing duplicate successors."""
        s, a, k = self.next_states.shape
        out = np.zeros((s, a, s))
        flat = (np.arange(s * a).repeat(k) * s) + self.next_states.ravel()
        np.add.at(out.reshape(-1), flat, self.next_probs.ravel())
        return out


@dataclass(frozen=True)
class SolveResult:
    """Outcome of relative value iteration."""

    gain: float
    bias: np.ndarray
    policy: np.ndarray
    iterations: int
    final_span: float


def _validated(mdp: FiniteMdp) -> FiniteMdp:
    problems = mdp.check()
    if problems:
        raise SpecValidationError(problems)
    return mdp


def relative_value_iteration(mdp: FiniteMdp, tol: float = 1e-9,
                             max_iter: int = 10**6,
                             ref_state: int = 0) -> SolveResult:
    """Solve for the optimal average reward by span-contracting sweeps.

    Each sweep applies the Bellman operator, measures the span of the
    one-step improvement, and renormalizes the bias at ref_state.  For a
    unichain model the span brackets the optimal gain, and the reported
    gain is the midpoint of the final bracket, so its error is at most
    half the stopping tolerance.

    Sweeps run on the chain with a (1 - DAMPING) self-loop blended into
    every row.  That leaves each policy's stationary law, the gain, and
    the maximizing actions untouched, but makes every induced chain
    aperiodic, so the iteration also converges on periodic instances
    such as deterministic cycles.
    """
    _validated(mdp)
    if tol <= 0:
        raise SpecValidationError([f"tolerance {tol} must be positive"])
    if not 0 <= ref_state < mdp.num_states:
        raise SpecValidationError([f"reference state {ref_state} out of range"])
    h = np.zeros(mdp.num_states)
    ns, probs, rewards = mdp.next_states, mdp.next_probs, mdp.rewards
    span = np.inf
    lo = hi = np.nan
    for it in range(1, int(max_iter) + 1):
        q = rewards + DAMPING * (probs * h[ns]).sum(axis=2)
        th = (1.0 - DAMPING) * h + q.max(axis=1)
        diff = th - h
        lo = float(diff.min())
        hi = float(diff.max())
        span = hi - lo
        h = th - th[ref_state]
        if span < tol:
            policy = q.argmax(axis=1)
            return SolveResult((lo + hi) / 2.0, h, policy, it, span)
    raise NonConvergenceError(
        f"relative value iteration exceeded {max_iter} sweeps (span {span:.3e})",
        span=span, gain_bracket=(lo, hi),
    )


def rvi_batch(next_states: np.ndarray, next_probs: np.ndarray,
              rewards: np.ndarray, tol: float = 1e-9, max_iter: int = 10**6,
              ref_state: int = 0):
    """Relative value iteration over a batch of reward tables that share
    one transition structure.

    rewards has shape (B, S, A).  Returns (gains, policies, iterations,
    spans).  All problems iterate until the slowest one converges, which
    keeps the extraction of every policy deterministic.  Sweeps apply
    the same self-loop damping as relative_value_iteration.
    """
    b, s, a = rewards.shape
    h = np.zeros((b, s))
    span = np.full(b, np.inf)
    lo = hi = None
    for it in range(1, int(max_iter) + 1):
        ev = (next_probs[None, :, :, :] * h[:, next_states]).sum(axis=3)
        q = rewards + DAMPING * ev
        th = (1.0 - DAMPING) * h + q.max(axis=2)
        diff = th - h
        lo = diff.min(axis=1)
        hi = diff.max(axis=1)
        span = hi - lo
        h = th - th[:, ref_state][:, None]
        if span.max() < tol:
            policies = q.argmax(axis=2)
            return (lo + hi) / 2.0, policies, it, span
    raise NonConvergenceError(
        f"batched value iteration exceeded {max_iter} sweeps "
        f"(worst span {span.max():.3e})",
        span=float(span.max()),
        gain_bracket=(float(lo[span.argmax()]), float(hi[span.argmax()])),
    )


def _stationary_classes(next_states, next_probs, tol=1e-13, max_iter=10**6):
    """Closed recurrent classes of a finite chain in successor-list form,
    each with its stationary distribution.

    Chains are made lazy before power iteration so periodicity cannot
    stall convergence; laziness leaves the stationary law unchanged.
    """
    s, k = next_states.shape
    mask = next_probs > 0.0
    rows = np.repeat(np.arange(s), k)[mask.ravel()]
    cols = next_states.ravel()[mask.ravel()]
    vals = next_probs.ravel()[mask.ravel()]
    graph = csr_matrix((vals, (rows, cols)), shape=(s, s))
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    closed = []
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        targets = labels[cols[np.isin(rows, members)]]
        if np.all(targets == c):
            closed.append(members)
    closed.sort(key=lambda m: int(m[0]))
    out = []
    for members in closed:
        pos = {int(st): i for i, st in enumerate(members)}
        sub = np.zeros((members.size, members.size))
        for i, st in enumerate(members):
            for slot in range(k):
                pr = next_probs[st, slot]
                if pr > 0.0:
                    sub[i, pos[int(next_states[st, slot])]] += pr
        sub = 0.5 * (sub + np.eye(members.size))
        mu = np.full(members.size, 1.0 / members.size)
        for _ in range(int(max_iter)):
            nxt = mu @ sub
            if np.abs(nxt - mu).sum() < tol:
                mu = nxt
                break
            mu = nxt
        else:
            raise NonConvergenceError(
                "power iteration for a stationary distribution did not converge"
            )
        out.append((members, mu / mu.sum()))
    return out


@dataclass(frozen=True)
class PolicyEvaluation:
    """Average reward of a fixed policy, reported per recurrent class."""

    gain: float
    class_gains: tuple[float, ...]
    multichain: bool
    classes_disagree: bool


def evaluate_policy(mdp: FiniteMdp, policy, tol: float = 1e-13,
                    max_iter: int = 10**6) -> PolicyEvaluation:
    """Stationary average reward of the chain a fixed policy induces.

    Returns the best recurrent-class gain, which matches optimizing the
    initial state, together with all class gains and a disagreement flag
    for multichain instances.
    """
    _validated(mdp)
    pol = np.asarray(policy, dtype=int)
    if pol.shape != (mdp.num_states,):
        raise SpecValidationError([f"policy has shape {pol.shape}, "
                                   f"expected ({mdp.num_states},)"])
    if pol.min(initial=0) < 0 or pol.max(initial=0) >= mdp.num_actions:
        raise SpecValidationError(["policy action index out of range"])
    idx = np.arange(mdp.num_states)
    ns = mdp.next_states[idx, pol]
    probs = mdp.next_probs[idx, pol]
    r = mdp.rewards[idx, pol]
    classes = _stationary_classes(ns, probs, tol=tol, max_iter=max_iter)
    gains = tuple(float(mu @ r[members]) for members, mu in classes)
    best = max(gains)
    spread = max(gains) - min(gains)
    return PolicyEvaluation(best, gains, len(gains) > 1, spread > 1e-10)


def exhaustive_policy_search(mdp: FiniteMdp, limit: int = 10**6):
    """Best stationary deterministic policy by full enumeration.

    Ties keep the lexicographically smallest action table.  Only usable
    when num_actions ** num_states stays within limit.
    """
    _validated(mdp)
    total = mdp.num_actions**mdp.num_states
    if total > limit:
        raise CapacityError("policy enumeration", total, limit)
    best_gain = -np.inf
    best_policy = None
    for tbl in itertools.product(range(mdp.num_actions), repeat=mdp.num_states):
        gain = evaluate_policy(mdp, np.array(tbl)).gain
        if gain > best_gain:
            best_gain = gain
            best_policy = tbl
    return np.array(best_policy, dtype=int), float(best_gain)


@dataclass(frozen=True)
class ConstrainedMdp:
    """MDP with a per-step constraint cost and an average-cost budget."""

    mdp: FiniteMdp
    cost: np.ndarray
    budget: float

    def check(self) -> list[str]:
        out = self.mdp.check()
        cost = np.asarray(self.cost)
        if cost.shape != self.mdp.rewards.shape:
            out.append("constraint cost table must match the reward shape")
            return out
        if not np.all(np.isfinite(cost)) or np.any(cost < 0):
            out.append("constraint costs must be finite and nonnegative")
        if self.budget < 0:
            out.append("budget must be nonnegative")
        return out


def lagrangian_mdp(cmdp: ConstrainedMdp, lam: float) -> FiniteMdp:
    """Unconstrained MDP whose reward absorbs the budget constraint at
    multiplier lam: reward + lam * (budget - cost)."""
    if lam < 0:
        raise SpecValidationError([f"multiplier {lam} must be nonnegative"])
    base = cmdp.mdp
    rewards = base.rewards + lam * (cmdp.budget - cmdp.cost)
    return FiniteMdp(base.next_states, base.next_probs, rewards)


@dataclass(frozen=True)
class DualResult:
    """Outcome of the scalar dual search over the constraint multiplier."""

    lambda_star: float
    dual_value: float
    gain_at_lambda_star: float
    avg_constraint_cost: float
    bracket_edge: bool
    evaluations: int


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def constrained_solve(cmdp: ConstrainedMdp, lambda_max: Optional[float] = None,
                      dual_tol: float = 1e-8, rvi_tol: float = 1e-10,
                      max_iter: int = 10**6) -> DualResult:
    """Minimize the Lagrangian dual of a budget-constrained MDP.

    The dual value d(lam) is the optimal gain of the Lagrangian MDP; it is
    convex in lam, so a golden-section search over [0, lambda_max] finds
    its minimum.  The search stops once the bracket width times the
    largest possible dual slope is below dual_tol.  A minimizer pinned at
    lambda_max usually signals an infeasible instance or a bracket chosen
    too small, and is flagged.
    """
    problems = cmdp.check()
    if problems:
        raise SpecValidationError(problems)
    if lambda_max is None:
        rng = float(cmdp.mdp.rewards.max() - cmdp.mdp.rewards.min())
        pos = cmdp.cost[cmdp.cost > 0]
        lambda_max = (rng if rng > 0 else 1.0) / (float(pos.min()) if pos.size else 1.0)
    if lambda_max <= 0:
        raise SpecValidationError([f"lambda_max {lambda_max} must be positive"])
    slack = np.abs(cmdp.budget - cmdp.cost)
    slope = float(slack.max()) if slack.size else 1.0
    cache: dict[float, tuple[float, SolveResult]] = {}

    def dual(lam: float) -> float:
        if lam not in cache:
            res = relative_value_iteration(lagrangian_mdp(cmdp, lam),
                                           tol=rvi_tol, max_iter=max_iter)
            cache[lam] = (res.gain, res)
        return cache[lam][0]

    a, b = 0.0, float(lambda_max)
    dual(a)
    dual(b)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = dual(c), dual(d)
    for _ in range(200):
        if slope * (b - a) <= max(dual_tol, 0.0) or (b - a) <= 1e-14:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = dual(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = dual(d)
    lambda_star = min(cache, key=lambda lam: (cache[lam][0], lam))
    dual_value, best = cache[lambda_star]
    edge = lambda_star >= float(lambda_max) - max(b - a, 1e-14)
    if edge:
        warnings.warn(
            "dual minimizer at lambda_max; the bracket may be too small",
            RuntimeWarning, stacklevel=2,
        )

    idx = np.arange(cmdp.mdp.num_states)
    ns = cmdp.mdp.next_states[idx, best.policy]
    probs = cmdp.mdp.next_probs[idx, best.policy]
    base_r = cmdp.mdp.rewards[idx, best.policy]
    cost_r = cmdp.cost[idx, best.policy]
    classes = _stationary_classes(ns, probs)
    lag_r = base_r + lambda_star * (cmdp.budget - cost_r)
    stats = [
        (float(mu @ lag_r[members]), float(mu @ base_r[members]),
         float(mu @ cost_r[members]))
        for members, mu in classes
    ]
    _, gain_g, avg_cost = max(stats, key=lambda t: t[0])
    return DualResult(float(lambda_star), float(dual_value), gain_g, avg_cost,
                      bool(edge), len(cache))
