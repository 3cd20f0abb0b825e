import hashlib
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.schemas.instance import InstanceSpec
from app.services.solver import SolverParams


class SolverSpec(BaseModel):
    # Ranges are checked by validate_config so bad values become diagnostics.
    mu: float = 1e-4
    eta: Optional[float] = None
    step_rule: Literal["smoothness", "lemma"] = "smoothness"
    iterations: int = 20000
    record_every: int = 100
    seed: Optional[int] = 0
    init: Literal["uniform", "dirichlet"] = "uniform"

    model_config = ConfigDict(extra="forbid")

    def to_params(self) -> SolverParams:
        return SolverParams(
            mu=self.mu,
            eta=self.eta,
            iterations=self.iterations,
            record_every=self.record_every,
            step_rule=self.step_rule,
            init=self.init,
            seed=self.seed,
        )


class SweepSpec(BaseModel):
    """Grids over the hyperparameters; a budget value applies to every player."""

    budgets: Optional[List[float]] = None
    eta: Optional[List[float]] = None
    mu: Optional[List[float]] = None
    hw_slope: Optional[List[float]] = None

    model_config = ConfigDict(extra="forbid")

    def grids(self) -> Dict[str, List[float]]:
        return {name: values for name, values in self.model_dump().items() if values is not None}


class ExperimentConfig(BaseModel):
    instance: InstanceSpec = Field(default_factory=InstanceSpec)
    solver: SolverSpec = Field(default_factory=SolverSpec)
    sweep: Optional[SweepSpec] = None
    output_dir: Optional[str] = None

    # Directory of the config file; relative instance files resolve against it.
    base_dir: Optional[str] = Field(default=None, exclude=True)

    model_config = ConfigDict(extra="forbid")

    def resolve_path(self, name: str) -> Path:
        path = Path(name)
        if not path.is_absolute() and self.base_dir:
            path = Path(self.base_dir) / path
        return path

    def _instance_files(self) -> List[Dict[str, Optional[str]]]:
        """Resolved location and content hash of each instance file; a missing file hashes to None."""
        files = []
        for name in filter(None, (self.instance.game_file, self.instance.constraints_file)):
            path = self.resolve_path(name).resolve()
            digest = hashlib.md5(path.read_bytes()).hexdigest() if path.is_file() else None
            files.append({"path": str(path), "md5": digest})
        return files

    def fingerprint(self) -> str:
        """Hash of the resolved problem and solver settings; output locations excluded."""
        payload = self.model_dump(mode="json", exclude={"output_dir", "sweep"})
        if self.instance.is_file_based:
            payload["files"] = self._instance_files()
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.md5(canonical.encode("utf8")).hexdigest()
