"""Seeded synthetic worlds with known ground truth.

Each world has a set of topics; every topic has one tool that is clearly
best at it, and the gap between tools scales with the complementarity knob.
Queries are bags of topic-biased pseudo-words, so a text model can learn the
query-to-topic signal, and labels are the underlying quality values plus
clamped gaussian jitter. Everything derives from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import LabeledQuery, ToolRegistry, ToolSpec
from .errors import InvalidConfigError

# Quality-table shape constants. The best tool for a topic sits BEST_BONUS
# above the topic center; other tools fall below it by a per-tool penalty
# drawn from [base, base + PENALTY_JITTER]. The zero-cost tool is mediocre
# everywhere so cost-saving has a meaningful cheap floor, and the cheapest
# paid tool is the weakest off-topic so the mid-cost generalist stays the
# best single tool. All offsets scale with complementarity.
BEST_BONUS = 0.35
PENALTY_JITTER = 0.15
ZERO_COST_BASE_PENALTY = 0.15
CHEAPEST_PAID_BASE_PENALTY = 0.28
PRICIEST_PAID_BASE_PENALTY = 0.16
OTHER_PAID_BASE_PENALTY = 0.10
TOPIC_WORD_PROB = 0.75


@dataclass(frozen=True)
class WorldConfig:
    n_topics: int = 8
    n_tools: int = 4
    complementarity: float = 0.5
    noise: float = 0.05
    n_queries: int = 1000
    seed: int = 42
    vocab_size: int = 500

    def __post_init__(self):
        if self.n_topics < 1 or self.n_tools < 1 or self.n_queries < 1:
            raise InvalidConfigError("n_topics, n_tools and n_queries must be positive")
        if not (0.0 <= self.complementarity <= 1.0):
            raise InvalidConfigError("complementarity must be in [0,1]")
        if self.noise < 0:
            raise InvalidConfigError("noise must be >= 0")
        if self.vocab_size < self.n_topics:
            raise InvalidConfigError("vocab_size must be at least n_topics")


_TOOL_LADDER = [
    ("llm-only", "LLM only (no retrieval)", 0.0),
    ("quark", "Quark search", 0.33),
    ("google", "Google search", 1.0),
    ("bing", "Bing search", 2.0),
]


def _world_registry(n_tools: int) -> ToolRegistry:
    specs = []
    for k in range(n_tools):
        if k < len(_TOOL_LADDER):
            specs.append(ToolSpec(*_TOOL_LADDER[k]))
        else:
            specs.append(ToolSpec(f"tool-{k}", f"Synthetic tool {k}", float(k)))
    return ToolRegistry(tuple(specs))


def _quality_table(config: WorldConfig, registry: ToolRegistry, rng: np.random.Generator) -> np.ndarray:
    """Per-topic, per-tool expected score in [0, 1]."""
    t, m = config.n_topics, config.n_tools
    delta = config.complementarity
    costs = np.array([spec.unit_cost for spec in registry], dtype=np.float64)
    paid = [j for j in range(m) if costs[j] > 0] or list(range(m))
    by_cost = sorted(paid, key=lambda j: (costs[j], j))
    base_penalty = np.full(m, OTHER_PAID_BASE_PENALTY)
    base_penalty[by_cost[0]] = CHEAPEST_PAID_BASE_PENALTY
    if len(by_cost) > 1:
        base_penalty[by_cost[-1]] = PRICIEST_PAID_BASE_PENALTY
    for j in range(m):
        if costs[j] == 0:
            base_penalty[j] = ZERO_COST_BASE_PENALTY

    centers = rng.uniform(0.45, 0.55, size=t)
    jitter = rng.uniform(0.0, 1.0, size=(t, m))
    q = centers[:, None] - delta * (base_penalty[None, :] + PENALTY_JITTER * jitter)
    for topic in range(t):
        best = paid[topic % len(paid)]
        q[topic, best] = centers[topic] + delta * BEST_BONUS
    return np.clip(q, 0.0, 1.0)


def generate(config: WorldConfig) -> tuple[ToolRegistry, list[LabeledQuery], list[int]]:
    """Build (registry, labeled queries, per-query topic ids).

    Deterministic given the config. With complementarity 0 every tool shares
    the topic center, so no routing policy can beat a fixed tool by more
    than the label noise.
    """
    rng = np.random.default_rng(config.seed)
    registry = _world_registry(config.n_tools)
    quality = _quality_table(config, registry, rng)

    vocab = [f"w{k:04d}" for k in range(config.vocab_size)]
    slice_size = config.vocab_size // config.n_topics
    topic_slices = [
        vocab[t * slice_size : (t + 1) * slice_size] or vocab for t in range(config.n_topics)
    ]

    queries: list[LabeledQuery] = []
    topics: list[int] = []
    for i in range(config.n_queries):
        topic = int(rng.integers(config.n_topics))
        length = int(rng.integers(4, 10))
        words = []
        for _ in range(length):
            if rng.random() < TOPIC_WORD_PROB:
                words.append(topic_slices[topic][int(rng.integers(len(topic_slices[topic])))])
            else:
                words.append(vocab[int(rng.integers(config.vocab_size))])
        labels = {}
        for j, tid in enumerate(registry.ids):
            value = quality[topic, j]
            if config.noise > 0:
                value = value + rng.normal(0.0, config.noise)
            labels[tid] = float(np.clip(value, 0.0, 1.0))
        queries.append(LabeledQuery(id=f"q{i:05d}", query=" ".join(words), labels=labels))
        topics.append(topic)
    return registry, queries, topics


def quality_table(config: WorldConfig) -> np.ndarray:
    """The expected-score table of the world ``generate`` builds for this
    config, without the queries. Useful as a test oracle."""
    rng = np.random.default_rng(config.seed)
    registry = _world_registry(config.n_tools)
    return _quality_table(config, registry, rng)


def split(
    queries: Sequence[LabeledQuery], train_fraction: float, seed: int
) -> tuple[list[LabeledQuery], list[LabeledQuery]]:
    """Seeded uniform shuffle then split; the two sides are disjoint and
    exhaustive, and both must be nonempty."""
    if not (0.0 < train_fraction < 1.0):
        raise InvalidConfigError("train_fraction must be strictly between 0 and 1")
    n = len(queries)
    k = int(round(n * train_fraction))
    if k <= 0 or k >= n:
        raise InvalidConfigError(
            f"split of {n} queries at {train_fraction} leaves one side empty"
        )
    perm = np.random.default_rng(seed).permutation(n)
    train = [queries[i] for i in perm[:k]]
    rest = [queries[i] for i in perm[k:]]
    return train, rest
