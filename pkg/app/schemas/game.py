from typing import List

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.services.game import ActionSpace, Game


class GameDocument(BaseModel):
    """Dense game tensors flattened row-major, player 1 on the slowest axis."""

    players: int = Field(ge=1)
    actions: List[int]
    potential: List[float]
    costs: List[List[float]]

    @model_validator(mode="after")
    def check_sizes(self) -> "GameDocument":
        if len(self.actions) != self.players:
            raise ValueError(f"'actions' lists {len(self.actions)} players, expected {self.players}")
        if any(k < 1 for k in self.actions):
            raise ValueError("every player needs at least one action")
        size = int(np.prod(self.actions))
        if len(self.potential) != size:
            raise ValueError(f"'potential' has {len(self.potential)} entries, expected {size}")
        if len(self.costs) != self.players or any(len(c) != size for c in self.costs):
            raise ValueError(f"'costs' must hold {self.players} arrays of {size} entries")
        return self

    @classmethod
    def from_game(cls, game: Game) -> "GameDocument":
        return cls(
            players=game.players,
            actions=list(game.space.actions),
            potential=game.potential.ravel().tolist(),
            costs=[c.ravel().tolist() for c in game.costs],
        )

    def to_game(self) -> Game:
        space = ActionSpace(tuple(self.actions))
        potential = np.asarray(self.potential, dtype=float).reshape(space.actions)
        costs = np.asarray(self.costs, dtype=float).reshape((self.players,) + space.actions)
        return Game(space, potential, costs)
