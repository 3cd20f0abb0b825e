import itertools
import textwrap
from functools import lru_cache
from pathlib import Path
from typing import Sequence, Tuple

import numpy as np
import pytest

from app.services.congestion import compile_instance, routing_instance
from app.services.constraints import AffineConstraint, ConstraintSet
from app.services.game import ActionSpace, Game


@lru_cache(maxsize=None)
def _compiled_routing(budgets: Tuple[float, ...], hw_slope: float) -> Tuple[Game, ConstraintSet]:
    return compile_instance(routing_instance(budgets, hw_slope=hw_slope))


def compile_routing(budgets=(2, 3, 4, 6, 9), hw_slope: float = 0.01) -> Tuple[Game, ConstraintSet]:
    """Compiled five-player routing instance; scalar budgets apply to every player."""
    if np.isscalar(budgets):
        budgets = (budgets,) * 5
    return _compiled_routing(tuple(float(b) for b in budgets), float(hw_slope))


def make_potential_game(rng: np.random.Generator, actions: Sequence[int]) -> Game:
    """Random exact potential game: C_i = Phi + a term that ignores player i's action."""
    actions = tuple(actions)
    potential = rng.integers(-8, 9, size=actions) / 4
    costs = []
    for i in range(len(actions)):
        shape = tuple(1 if j == i else k for j, k in enumerate(actions))
        costs.append(potential + rng.integers(-8, 9, size=shape) / 4)
    return Game(ActionSpace(actions), potential, np.stack(costs))


def make_single_player_game(costs: Sequence[float]) -> Game:
    costs = np.asarray(costs, dtype=float)
    return Game(ActionSpace((costs.size,)), costs, costs[None, :])


def single_constraint(coefficients, offset) -> ConstraintSet:
    return ConstraintSet(((AffineConstraint(np.asarray(coefficients, dtype=float), offset),),))


def simplex_grid(dim: int, steps: int) -> np.ndarray:
    """Every point of the simplex with coordinates in multiples of 1/steps."""
    points = []
    for bars in itertools.combinations(range(steps + dim - 1), dim - 1):
        edges = (-1,) + bars + (steps + dim - 1,)
        points.append([edges[k + 1] - edges[k] - 1 for k in range(dim)])
    return np.array(points, dtype=float) / steps


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def routing_game():
    return compile_routing()


@pytest.fixture
def tiny_game():
    """One player, two actions with costs (0, 1)."""
    return make_single_player_game([0.0, 1.0])


@pytest.fixture
def write_config(tmp_path: Path):
    """Write a TOML experiment config under tmp_path and return its path."""
    def _write(body: str, name: str = "experiment.toml") -> Path:
        path = tmp_path / name
        path.write_text(textwrap.dedent(body), encoding="utf8")
        return path
    return _write


@pytest.fixture
def small_config(write_config):
    return write_config(
        """
        [instance]
        players = 2
        budgets = [3, 13]
        paths = [
            { name = "R1", edges = 2 },
            { name = "R2", edges = 3 },
            { name = "HW", edges = 10, highway = true },
        ]

        [solver]
        mu = 0.001
        iterations = 200
        record_every = 50
        """
    )
