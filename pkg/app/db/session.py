from contextlib import contextmanager
from functools import lru_cache
from typing import Iterator, Optional

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, sessionmaker

from app.core.config import settings
from app.core.exceptions import ConfigError
from app.db.base import Base


@lru_cache(maxsize=None)
def get_engine(url: str) -> Engine:
    engine = create_engine(url, echo=settings.DEBUG)
    Base.metadata.create_all(engine)
    return engine


@contextmanager
def get_db(url: Optional[str] = None) -> Iterator[Session]:
    url = url or settings.DATABASE_URL
    if not url:
        raise ConfigError("no run registry configured; set CPG_DATABASE_URL")
    session = sessionmaker(bind=get_engine(url), expire_on_commit=False)()
    try:
        yield session
    finally:
        session.close()
