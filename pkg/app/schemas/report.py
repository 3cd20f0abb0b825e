from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict

from app.services.game import MixedProfile
from app.services.metrics import NashGapReport


class ProfileDocument(BaseModel):
    players: List[List[float]]
    actions: Optional[List[str]] = None
    iteration: Optional[int] = None

    @classmethod
    def from_profile(cls, x: MixedProfile, actions: Optional[List[str]] = None,
                     iteration: Optional[int] = None) -> "ProfileDocument":
        return cls(players=[s.tolist() for s in x.strategies], actions=actions, iteration=iteration)

    def to_profile(self) -> MixedProfile:
        return MixedProfile(tuple(self.players))


class PlayerGap(BaseModel):
    player: int
    gap: float
    best_value: float
    best_response: List[float]


class NashGapDocument(BaseModel):
    total: float
    relax: float
    players: List[PlayerGap]

    @classmethod
    def from_report(cls, report: NashGapReport) -> "NashGapDocument":
        return cls(
            total=report.total,
            relax=report.relax,
            players=[
                PlayerGap(player=i, gap=gap, best_value=value, best_response=response.tolist())
                for i, (gap, value, response) in enumerate(
                    zip(report.per_player, report.best_values, report.best_responses)
                )
            ],
        )


class RunRecord(BaseModel):
    fingerprint: str
    output_dir: str
    trajectory_path: str
    profile_path: str
    iterations: int
    eta: float
    initial_gap: float
    final_gap: float
    final_violation: float
    final_lambda_sum: float
    best_displacement: float
    gradient_mapping: float
    descent_violations: int

    model_config = ConfigDict(from_attributes=True)


class SweepFailure(BaseModel):
    index: int
    point: dict
    error: str


class Diagnostic(BaseModel):
    level: Literal["error", "warning", "info"]
    message: str

    def __str__(self) -> str:
        return f"{self.level}: {self.message}"


class InfoReport(BaseModel):
    players: int
    actions: List[int]
    profiles: int
    phi_max: float
    phi_min: float
    constraints: int
    g_max: Optional[float] = None
    lambda_max: float
    step_rule: str
    eta: float
    lemma_eta: Optional[float] = None
    recommended_T: int
    eps: float
    slater_margins: List[Optional[float]]
    multiplier_bounds: List[Optional[float]]
