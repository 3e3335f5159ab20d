"""SQLAlchemy engine and session helpers for the on-disk embedding cache."""
from contextlib import contextmanager
from functools import lru_cache
from typing import Iterator

from sqlalchemy import create_engine
from sqlalchemy.engine import Engine
from sqlalchemy.orm import Session, declarative_base, sessionmaker

Base = declarative_base()


@lru_cache(maxsize=8)
def get_engine(database_url: str) -> Engine:
    """Create (once per URL) the engine and make sure the cache tables exist."""

    connect_args = {"check_same_thread": False} if database_url.startswith("sqlite") else {}
    engine = create_engine(database_url, future=True, connect_args=connect_args)
    Base.metadata.create_all(bind=engine)
    return engine


@contextmanager
def session_scope(database_url: str) -> Iterator[Session]:
    """Yield a session that commits on success and rolls back on error."""

    factory = sessionmaker(bind=get_engine(database_url), autocommit=False, autoflush=False, future=True)
    db = factory()
    try:
        yield db
        db.commit()
    except Exception:
        db.rollback()
        raise
    finally:
        db.close()
