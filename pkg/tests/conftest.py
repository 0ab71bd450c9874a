"""Shared factories for the test suite."""
import numpy as np

from rtcode import FiniteMdp


def random_unichain_mdp(rng, max_states=4, max_actions=3, mixing=0.1):
    """Random MDP whose induced chain is irreducible under every policy.

    Blending each transition row with the uniform distribution keeps all
    states mutually reachable no matter which actions a policy picks, so
    the instance is unichain and the average reward is well defined.
    """
    s = int(rng.integers(1, max_states + 1))
    a = int(rng.integers(1, max_actions + 1))
    raw = rng.random((s, a, s)) + 1e-3
    raw /= raw.sum(axis=2, keepdims=True)
    dense = (1.0 - mixing) * raw + mixing / s
    rewards = rng.uniform(-1.0, 1.0, size=(s, a))
    return FiniteMdp.from_dense(dense, rewards)


def random_belief(rng, dim):
    """Random point in the interior of the probability simplex."""
    raw = rng.random(dim) + 1e-3
    return raw / raw.sum()
