"""
Run log for the command line.
Uses SQLite to keep a history of experiment runs next to their reports.
"""

import json
import os
import sqlite3
import threading
from typing import Optional

from config import get_app_dir


def get_db_dir() -> str:
    """Get the DB folder path, creating it if needed."""
    db_dir = os.path.join(get_app_dir(), "DB")
    if not os.path.exists(db_dir):
        os.makedirs(db_dir)
    return db_dir


class ExperimentDatabase:
    """SQLite database of experiment runs.

    Thread-safe implementation using connection per thread.
    """

    def __init__(self, db_path: Optional[str] = None):
        self.db_path = db_path or os.path.join(get_db_dir(), "gengrad_runs.db")
        self._local = threading.local()
        self._get_conn()
        self._create_tables()

    def _get_conn(self) -> sqlite3.Connection:
        """Get thread-local database connection."""
        if not hasattr(self._local, 'conn') or self._local.conn is None:
            self._local.conn = sqlite3.connect(self.db_path, check_same_thread=False)
            self._local.conn.row_factory = sqlite3.Row
        return self._local.conn

    @property
    def conn(self) -> sqlite3.Connection:
        return self._get_conn()

    def _create_tables(self):
        cursor = self.conn.cursor()
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS experiment_runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                command TEXT NOT NULL,
                fixture TEXT,
                seed INTEGER DEFAULT 0,
                exit_code INTEGER NOT NULL,
                summary TEXT DEFAULT '',
                report_json TEXT,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')
        cursor.execute('CREATE INDEX IF NOT EXISTS idx_runs_command ON experiment_runs(command)')
        self.conn.commit()

    def close(self):
        """Close the database connection for current thread."""
        if hasattr(self._local, 'conn') and self._local.conn:
            self._local.conn.close()
            self._local.conn = None

    # ==================== Run History ====================

    def save_run(self, run_data: dict) -> int:
        """Save a run. Returns the run ID."""
        cursor = self.conn.cursor()
        cursor.execute('''
            INSERT INTO experiment_runs (command, fixture, seed, exit_code, summary, report_json)
            VALUES (?, ?, ?, ?, ?, ?)
        ''', (
            run_data['command'],
            run_data.get('fixture'),
            run_data.get('seed', 0),
            run_data['exit_code'],
            run_data.get('summary', ''),
            json.dumps(run_data['report']) if run_data.get('report') is not None else None,
        ))
        self.conn.commit()
        return cursor.lastrowid

    def _row_to_run(self, row: sqlite3.Row) -> dict:
        return {
            'id': row['id'],
            'command': row['command'],
            'fixture': row['fixture'],
            'seed': row['seed'],
            'exit_code': row['exit_code'],
            'summary': row['summary'],
            'report': json.loads(row['report_json']) if row['report_json'] else None,
            'created_at': row['created_at'],
        }

    def get_run_history(self, limit: int = 50, command: str = None) -> list[dict]:
        """Get runs, newest first. Optionally filter by command."""
        cursor = self.conn.cursor()
        if command:
            cursor.execute('''
                SELECT * FROM experiment_runs WHERE command = ? ORDER BY id DESC LIMIT ?
            ''', (command, limit))
        else:
            cursor.execute('SELECT * FROM experiment_runs ORDER BY id DESC LIMIT ?', (limit,))
        return [self._row_to_run(row) for row in cursor.fetchall()]

    def get_run(self, run_id: int) -> Optional[dict]:
        cursor = self.conn.cursor()
        cursor.execute('SELECT * FROM experiment_runs WHERE id = ?', (run_id,))
        row = cursor.fetchone()
        return self._row_to_run(row) if row else None

    def delete_run(self, run_id: int):
        cursor = self.conn.cursor()
        cursor.execute('DELETE FROM experiment_runs WHERE id = ?', (run_id,))
        self.conn.commit()

    def get_run_stats(self) -> dict:
        """Run counts per command and how many passed."""
        cursor = self.conn.cursor()
        cursor.execute('''
            SELECT command, COUNT(*) AS runs, COALESCE(SUM(exit_code = 0), 0) AS passed
            FROM experiment_runs GROUP BY command ORDER BY command
        ''')
        per_command = {row['command']: {'runs': row['runs'], 'passed': row['passed']}
                       for row in cursor.fetchall()}
        return {
            'total_runs': sum(v['runs'] for v in per_command.values()),
            'total_passed': sum(v['passed'] for v in per_command.values()),
            'by_command': per_command,
        }
