"""
Results store for wildfire evaluation runs.
Keeps every repeat of every (l_w, model) cell in SQLite so reports can be
rebuilt without retraining.
"""
import json
import logging
import sqlite3
from typing import Dict, List, Optional

from config import ModelKind, Task
from errors import ExperimentError
from experiment import CellResult, Metrics, RunReport

logger = logging.getLogger(__name__)


class ResultsDatabase:
    """
    Handles storage of evaluation runs.
    One row per run, one per (cell, repeat) outcome and one per absent cell.
    """

    def __init__(self, db_path: str = "results.db"):
        """
        Open (and create if needed) the results database.

        Args:
            db_path: Path to the SQLite database file
        """
        self.db_path = db_path
        self.conn = None
        self.initialize_db()

    def get_connection(self) -> sqlite3.Connection:
        if self.conn is None:
            try:
                self.conn = sqlite3.connect(self.db_path)
                self.conn.row_factory = sqlite3.Row
            except sqlite3.Error as e:
                logger.error("Database connection error: %s", e)
                raise
        return self.conn

    def close_connection(self) -> None:
        if self.conn:
            self.conn.close()
            self.conn = None

    def initialize_db(self) -> None:
        """Create tables if they don't exist."""
        conn = self.get_connection()
        cursor = conn.cursor()

        cursor.execute("""
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            task TEXT NOT NULL,
            master_seed INTEGER NOT NULL,
            models TEXT NOT NULL,       -- JSON list of model kinds
            lw_values TEXT NOT NULL,    -- JSON list of ints
            seeds TEXT NOT NULL,        -- JSON object of derived seeds
            config TEXT NOT NULL,       -- resolved RunConfig JSON
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
        """)

        cursor.execute("""
        CREATE TABLE IF NOT EXISTS cell_results (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id INTEGER NOT NULL,
            l_w INTEGER NOT NULL,
            model TEXT NOT NULL,
            repeat INTEGER NOT NULL,
            accuracy REAL NOT NULL,
            precision REAL NOT NULL,
            recall REAL NOT NULL,
            selected_fold INTEGER,
            n_samples INTEGER,
            n_train INTEGER,
            n_test INTEGER,
            FOREIGN KEY (run_id) REFERENCES runs (id)
        )
        """)

        cursor.execute("""
        CREATE TABLE IF NOT EXISTS absent_cells (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            run_id INTEGER NOT NULL,
            l_w INTEGER NOT NULL,
            model TEXT NOT NULL,
            n_samples INTEGER,
            reason TEXT NOT NULL,
            FOREIGN KEY (run_id) REFERENCES runs (id)
        )
        """)

        conn.commit()

    def record_run(self, report: RunReport, config_json: str = "{}") -> int:
        """
        Store a complete RunReport.

        Args:
            report: Finished experiment
            config_json: Resolved configuration as JSON

        Returns:
            ID of the new run
        """
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute(
            "INSERT INTO runs (task, master_seed, models, lw_values, seeds, config) VALUES (?, ?, ?, ?, ?, ?)",
            (
                report.task.value,
                report.master_seed,
                json.dumps([m.value for m in report.models]),
                json.dumps(list(report.lw_values)),
                json.dumps(report.seeds, sort_keys=True),
                config_json,
            ),
        )
        run_id = cursor.lastrowid

        for (l_w, kind), cell in sorted(report.cells.items(), key=lambda item: (item[0][0], item[0][1].value)):
            if cell.absent:
                cursor.execute(
                    "INSERT INTO absent_cells (run_id, l_w, model, n_samples, reason) VALUES (?, ?, ?, ?, ?)",
                    (run_id, l_w, kind.value, cell.n_samples, cell.absent_reason),
                )
                continue
            for repeat, metrics in enumerate(cell.repeats):
                fold = cell.selected_folds[repeat] if repeat < len(cell.selected_folds) else None
                cursor.execute(
                    """
                    INSERT INTO cell_results
                        (run_id, l_w, model, repeat, accuracy, precision, recall, selected_fold, n_samples, n_train, n_test)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                    """,
                    (run_id, l_w, kind.value, repeat, metrics.accuracy, metrics.precision, metrics.recall,
                     fold, cell.n_samples, cell.n_train, cell.n_test),
                )
        conn.commit()
        logger.info("Stored %s run %d", report.task.value, run_id)
        return run_id

    def latest_run_id(self, task: Task) -> Optional[int]:
        """ID of the most recent run for a task, or None."""
        cursor = self.get_connection().cursor()
        cursor.execute("SELECT MAX(id) FROM runs WHERE task = ?", (Task(task).value,))
        row = cursor.fetchone()
        return row[0] if row else None

    def list_runs(self, task: Optional[Task] = None) -> List[Dict]:
        cursor = self.get_connection().cursor()
        if task is None:
            cursor.execute("SELECT id, task, master_seed, created_at FROM runs ORDER BY id DESC")
        else:
            cursor.execute(
                "SELECT id, task, master_seed, created_at FROM runs WHERE task = ? ORDER BY id DESC",
                (Task(task).value,),
            )
        return [dict(row) for row in cursor.fetchall()]

    def get_run_config(self, run_id: int) -> str:
        cursor = self.get_connection().cursor()
        cursor.execute("SELECT config FROM runs WHERE id = ?", (run_id,))
        row = cursor.fetchone()
        if row is None:
            raise ExperimentError(f"no stored run with id {run_id}")
        return row["config"]

    def load_report(self, run_id: int) -> RunReport:
        """
        Rebuild a RunReport from stored rows.

        Per-class metrics are not stored, so rebuilt Metrics carry only the
        three aggregate values.
        """
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM runs WHERE id = ?", (run_id,))
        run = cursor.fetchone()
        if run is None:
            raise ExperimentError(f"no stored run with id {run_id}")

        report = RunReport(
            task=Task(run["task"]),
            models=[ModelKind(m) for m in json.loads(run["models"])],
            lw_values=json.loads(run["lw_values"]),
            master_seed=run["master_seed"],
            seeds=json.loads(run["seeds"]),
        )

        cursor.execute("SELECT * FROM cell_results WHERE run_id = ? ORDER BY l_w, model, repeat", (run_id,))
        for row in cursor.fetchall():
            key = (row["l_w"], ModelKind(row["model"]))
            cell = report.cells.get(key)
            if cell is None:
                cell = CellResult(row["l_w"], ModelKind(row["model"]), n_samples=row["n_samples"],
                                  n_train=row["n_train"], n_test=row["n_test"])
                report.cells[key] = cell
            cell.repeats.append(Metrics(row["accuracy"], row["precision"], row["recall"]))
            if row["selected_fold"] is not None:
                cell.selected_folds.append(row["selected_fold"])

        cursor.execute("SELECT * FROM absent_cells WHERE run_id = ?", (run_id,))
        for row in cursor.fetchall():
            kind = ModelKind(row["model"])
            report.cells[(row["l_w"], kind)] = CellResult(
                row["l_w"], kind, n_samples=row["n_samples"], absent_reason=row["reason"]
            )
        return report
