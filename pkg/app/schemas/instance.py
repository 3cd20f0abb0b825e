from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

from app.services.congestion import (
    DEFAULT_BUDGETS,
    HW_SLOPE,
    ROUTING_PATHS,
    YELLOW_SLOPE,
    CongestionInstance,
    Network,
)


class PathSpec(BaseModel):
    name: Optional[str] = None
    edges: int = Field(ge=1)
    # Unset: the instance's hw_slope for the highway, yellow_slope otherwise.
    slope: Optional[float] = Field(default=None, ge=0)
    # Unset: one unit of gas per unit edge.
    gas: Optional[float] = None
    highway: bool = False

    model_config = ConfigDict(extra="forbid")


def _routing_paths() -> List[PathSpec]:
    return [PathSpec(name=name, edges=length, highway=name == "HW") for name, length in ROUTING_PATHS]


class InstanceSpec(BaseModel):
    paths: List[PathSpec] = Field(default_factory=_routing_paths, min_length=1)
    players: int = Field(default=5, ge=1)
    budgets: Union[float, List[float]] = Field(default_factory=lambda: list(DEFAULT_BUDGETS))
    hw_slope: float = Field(default=HW_SLOPE, ge=0)
    yellow_slope: float = Field(default=YELLOW_SLOPE, ge=0)

    game_file: Optional[str] = None
    constraints_file: Optional[str] = None

    model_config = ConfigDict(extra="forbid")

    @property
    def is_file_based(self) -> bool:
        return self.game_file is not None

    def budget_list(self) -> List[float]:
        if isinstance(self.budgets, list):
            return list(self.budgets)
        return [self.budgets] * self.players

    def path_names(self) -> List[str]:
        return [p.name or f"P{k + 1}" for k, p in enumerate(self.paths)]

    def to_network(self) -> Network:
        slopes = [
            p.slope if p.slope is not None else (self.hw_slope if p.highway else self.yellow_slope)
            for p in self.paths
        ]
        gas = [p.gas if p.gas is not None else float(p.edges) for p in self.paths]
        return Network.from_chains([p.edges for p in self.paths], slopes, self.path_names(), gas)

    def to_instance(self) -> CongestionInstance:
        return CongestionInstance(self.to_network(), self.players, tuple(self.budget_list()))
