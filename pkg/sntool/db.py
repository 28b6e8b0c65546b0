# sntool/db.py
"""
Run store. SQLite by default; persistence is best-effort and a database
failure never fails an experiment.
"""
from __future__ import annotations

import logging
import os

from sqlalchemy import JSON, Column, DateTime, Float, Integer, MetaData, String, Table, create_engine
from sqlalchemy.sql import func

logger = logging.getLogger(__name__)

DATABASE_URL = os.getenv("DATABASE_URL", "sqlite:///sntool_runs.db")
DB_ENABLED = os.getenv("SNTOOL_DB_ENABLED", "1") != "0"

metadata = MetaData()


# ---------------------------
# Define tables
# ---------------------------

runs = Table(
    "runs", metadata,
    Column("id", Integer, primary_key=True),
    Column("dataset", String),
    Column("solver", String),
    Column("seed", Integer),
    Column("status", String),
    Column("passes", Float),
    Column("grad_norm", Float),
    Column("fval", Float),
    Column("wall_s", Float),
    Column("created_at", DateTime, server_default=func.now()),
)

grids = Table(
    "grids", metadata,
    Column("id", Integer, primary_key=True),
    Column("dataset", String),
    Column("solver", String),
    Column("table_json", JSON),
    Column("created_at", DateTime, server_default=func.now()),
)


class RunStore:
    """Thin wrapper around one engine; `available` drops to False on the first failure."""

    def __init__(self, url: str = DATABASE_URL, enabled: bool = DB_ENABLED):
        self.url = url
        self.engine = None
        self.available = enabled
        if not enabled:
            return
        try:
            connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
            self.engine = create_engine(url, connect_args=connect_args)
            metadata.create_all(self.engine)
        except Exception as exc:
            self._disable(exc)

    def _disable(self, exc: Exception) -> None:
        logger.warning("Run database %s unavailable, skipping persistence: %s", self.url, exc)
        self.available = False

    # ---------------------------
    # Runs
    # ---------------------------

    def save_runs(self, dataset: str, summary) -> int:
        """Insert one row per run from a traces.summarize() frame."""
        if not self.available or summary.empty:
            return 0
        rows = [
            {
                "dataset": dataset,
                "solver": r["solver"],
                "seed": int(r["seed"]),
                "status": r["status"],
                "passes": float(r["passes"]),
                "grad_norm": float(r["grad_norm"]),
                "fval": float(r["fval"]),
                "wall_s": float(r["wall_s"]),
            }
            for r in summary.to_dict(orient="records")
        ]
        try:
            with self.engine.begin() as conn:
                conn.execute(runs.insert(), rows)
            return len(rows)
        except Exception as exc:
            self._disable(exc)
            return 0

    # ---------------------------
    # Grids
    # ---------------------------

    def save_grid(self, dataset: str, solver: str, table) -> int:
        """Store a grid table (DataFrame) as JSON; returns the row id, 0 when skipped."""
        if not self.available:
            return 0
        try:
            with self.engine.begin() as conn:
                res = conn.execute(
                    grids.insert().values(
                        dataset=dataset,
                        solver=solver,
                        table_json=table.to_dict(orient="split"),
                    )
                )
                return res.inserted_primary_key[0]
        except Exception as exc:
            self._disable(exc)
            return 0
