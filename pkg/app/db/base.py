from typing import List, Optional

from sqlalchemy import Column, DateTime, Float, Integer, String, func, select
from sqlalchemy.ext.declarative import declared_attr
from sqlalchemy.orm import Session, declarative_base

from app.schemas.report import RunRecord

Base = declarative_base()


class TimestampMixin:
    @declared_attr
    def created_at(cls):
        return Column(DateTime, default=func.now(), nullable=False)


class RunRow(TimestampMixin, Base):
    __tablename__ = "runs"

    run_id = Column(Integer, primary_key=True, autoincrement=True)
    fingerprint = Column(String(32), index=True, nullable=False)
    output_dir = Column(String, nullable=False)
    trajectory_path = Column(String, nullable=False)
    profile_path = Column(String, nullable=False)
    iterations = Column(Integer, nullable=False)
    eta = Column(Float, nullable=False)
    initial_gap = Column(Float, nullable=False)
    final_gap = Column(Float, nullable=False)
    final_violation = Column(Float, nullable=False)
    final_lambda_sum = Column(Float, nullable=False)
    best_displacement = Column(Float, nullable=False)
    gradient_mapping = Column(Float, nullable=False)
    descent_violations = Column(Integer, nullable=False)


def record_run(session: Session, record: RunRecord) -> RunRow:
    row = RunRow(**record.model_dump())
    session.add(row)
    session.commit()
    session.refresh(row)
    return row


def get_runs(session: Session, fingerprint: Optional[str] = None, limit: int = 20) -> List[RunRow]:
    stmt = select(RunRow)
    if fingerprint is not None:
        stmt = stmt.where(RunRow.fingerprint == fingerprint)
    stmt = stmt.order_by(RunRow.run_id.desc()).limit(limit)
    return list(session.execute(stmt).scalars().all())
