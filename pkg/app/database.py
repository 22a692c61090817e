from pathlib import Path

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import declarative_base, sessionmaker

# Create Base class
Base = declarative_base()


def sqlite_url(path: str) -> str:
    return "sqlite://" if path == ":memory:" else f"sqlite:///{Path(path)}"


def create_store_engine(path: str, fresh: bool = False) -> Engine:
    """Engine for the chunk store at ``path``; ``fresh`` drops any previous file first."""
    if fresh and path != ":memory:":
        Path(path).unlink(missing_ok=True)
    engine = create_engine(sqlite_url(path), future=True)

    # Tables are owned by this package; importing registers them on Base
    from app.models import models  # noqa: F401

    Base.metadata.create_all(engine)
    return engine


def get_session_factory(engine: Engine) -> sessionmaker:
    return sessionmaker(autocommit=False, autoflush=False, bind=engine)