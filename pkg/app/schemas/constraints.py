from typing import List, Union

from pydantic import BaseModel, ConfigDict

from app.services.constraints import AffineConstraint, ConstraintSet, gas_budget


class AffineConstraintSpec(BaseModel):
    coefficients: List[float]
    offset: float

    model_config = ConfigDict(extra="forbid")

    def to_constraint(self) -> AffineConstraint:
        return AffineConstraint(self.coefficients, self.offset)


class GasBudgetSpec(BaseModel):
    """Shorthand for consumption^T x_i - budget <= 0."""

    consumption: List[float]
    budget: float

    model_config = ConfigDict(extra="forbid")

    def to_constraint(self) -> AffineConstraint:
        return gas_budget(self.consumption, self.budget)


ConstraintSpec = Union[AffineConstraintSpec, GasBudgetSpec]


class ConstraintDocument(BaseModel):
    players: List[List[ConstraintSpec]]

    @classmethod
    def from_constraint_set(cls, cs: ConstraintSet) -> "ConstraintDocument":
        return cls(players=[
            [AffineConstraintSpec(coefficients=c.coefficients.tolist(), offset=c.offset) for c in constraints]
            for constraints in cs.per_player
        ])

    def to_constraint_set(self) -> ConstraintSet:
        return ConstraintSet(tuple(tuple(spec.to_constraint() for spec in specs) for specs in self.players))
