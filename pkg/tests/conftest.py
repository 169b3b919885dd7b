import numpy as np
import pytest

from toolrouter.core import ScoreMatrix, ToolRegistry, ToolSpec


@pytest.fixture
def two_tool_registry():
    return ToolRegistry((ToolSpec("t1", "Tool one", 1.0), ToolSpec("t2", "Tool two", 2.0)))


@pytest.fixture
def example_matrix(two_tool_registry):
    # the worked routing instance used across the assignment tests
    return ScoreMatrix(
        ("q1", "q2"), ("t1", "t2"), np.array([[0.2, 0.9], [0.8, 0.85]])
    )


def registry_from_costs(costs):
    return ToolRegistry(tuple(ToolSpec(f"t{i}", f"Tool {i}", float(c)) for i, c in enumerate(costs)))


def matrix_from_array(arr, registry):
    arr = np.asarray(arr, dtype=float)
    return ScoreMatrix(tuple(f"q{i}" for i in range(arr.shape[0])), registry.ids, arr)
