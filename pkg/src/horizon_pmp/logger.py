#!/usr/bin/env python3
"""
Run logger: one record goes to the terminal, run.log, logs.jsonl and an
SQLite table, all inside the run's output directory.
"""

import fcntl
import sqlite3
import sys
import threading
from contextlib import suppress
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Optional

from .config import LOG_LEVELS
from .utils import JSON_BACKEND, ensure_dir, json_dumps

# Optional color support
try:
    import colorama
    from colorama import Fore, Style

    colorama.init(autoreset=True)
    HAS_COLORS = True
except ImportError:

    class _NoColor:
        RED = GREEN = YELLOW = CYAN = MAGENTA = ""
        RESET_ALL = ""

    Fore = Style = _NoColor()  # type: ignore[assignment,misc]
    HAS_COLORS = False


_LEVEL_COLORS = {
    "ERROR": Fore.RED,
    "WARN": Fore.YELLOW,
    "SUCCESS": Fore.GREEN,
    "INFO": Fore.CYAN,
    "DEBUG": Fore.MAGENTA,
}


def _rank(level: str) -> int:
    level = level.upper()
    if level == "WARNING":
        level = "WARN"
    return LOG_LEVELS.index(level) if level in LOG_LEVELS else LOG_LEVELS.index("INFO")


class StructuredLogger:
    """Thread-safe logger fanning records out to text, JSON Lines and SQLite"""

    def __init__(
        self,
        run_dir: Path,
        enable_colors: bool = True,
        enable_sqlite: bool = True,
        enable_json: bool = True,
        min_level: str = "INFO",
        echo: bool = True,
    ):
        self.run_dir = ensure_dir(Path(run_dir))

        self.enable_colors = enable_colors and HAS_COLORS
        self.enable_sqlite = enable_sqlite
        self.enable_json = enable_json
        self.min_level = min_level.upper()
        self.echo = echo

        self.log_file = self.run_dir / "run.log"
        self.json_file = self.run_dir / "logs.jsonl"
        self.db_file = self.run_dir / "logs.sqlite"

        self._lock = threading.Lock()
        self._db_connection: Optional[sqlite3.Connection] = None
        self._threshold = _rank(self.min_level)

        self._init_sqlite()
        self._init_json()

        self.session_start = datetime.now()
        self.session_id = self.session_start.isoformat()
        self.log_count = 0
        self.dropped_count = 0

    def _init_sqlite(self) -> None:
        if not self.enable_sqlite:
            return

        try:
            self._db_connection = sqlite3.connect(str(self.db_file), check_same_thread=False, timeout=30.0)
            self._db_connection.executescript(
                """
                PRAGMA journal_mode=WAL;
                PRAGMA synchronous=NORMAL;

                CREATE TABLE IF NOT EXISTS logs (
                    id INTEGER PRIMARY KEY AUTOINCREMENT,
                    ts TEXT NOT NULL,
                    level TEXT NOT NULL,
                    source TEXT NOT NULL,
                    content TEXT NOT NULL,
                    session_id TEXT NOT NULL,
                    metadata TEXT
                );

                CREATE INDEX IF NOT EXISTS idx_logs_level ON logs(level);
                CREATE INDEX IF NOT EXISTS idx_logs_source ON logs(source);
            """
            )
            self._db_connection.commit()
        except sqlite3.Error as e:
            print(f"Warning: SQLite initialization failed: {e}", file=sys.stderr)
            self.enable_sqlite = False
            self._db_connection = None

    def _init_json(self) -> None:
        if not self.enable_json:
            return

        try:
            self.json_file.touch(exist_ok=True)
        except OSError as e:
            print(f"Warning: JSON log initialization failed: {e}", file=sys.stderr)
            self.enable_json = False

    def _colorize(self, text: str, level: str) -> str:
        if not self.enable_colors:
            return text
        color = _LEVEL_COLORS.get(level, "")
        return f"{color}{text}{Style.RESET_ALL}" if color else text

    @staticmethod
    def _append_locked(path: Path, line: str) -> None:
        with open(path, "a", encoding="utf-8") as f:
            fcntl.flock(f.fileno(), fcntl.LOCK_EX)
            try:
                f.write(line + "\n")
            finally:
                fcntl.flock(f.fileno(), fcntl.LOCK_UN)

    def _write_to_sqlite(
        self, timestamp: str, level: str, source: str, content: str, metadata: Optional[Dict[str, Any]]
    ) -> None:
        if not self.enable_sqlite or self._db_connection is None:
            return

        try:
            self._db_connection.execute(
                "INSERT INTO logs (ts, level, source, content, session_id, metadata) VALUES (?, ?, ?, ?, ?, ?)",
                (timestamp, level, source, content, self.session_id, json_dumps(metadata) if metadata else None),
            )
            self._db_connection.commit()
        except sqlite3.Error as e:
            print(f"SQLite write error: {e}", file=sys.stderr)

    def _write_to_json(
        self, timestamp: str, level: str, source: str, content: str, metadata: Optional[Dict[str, Any]]
    ) -> None:
        if not self.enable_json:
            return

        entry: Dict[str, Any] = {
            "ts": timestamp,
            "level": level,
            "source": source,
            "content": content,
            "session_id": self.session_id,
        }
        if metadata:
            entry["metadata"] = metadata

        try:
            self._append_locked(self.json_file, json_dumps(entry))
        except (OSError, TypeError, ValueError) as e:
            print(f"JSON write error: {e}", file=sys.stderr)

    def _write_to_terminal(self, timestamp: str, level: str, source: str, content: str) -> None:
        formatted = f"[{timestamp}][{level}][{source}] {content}"
        if self.echo:
            print(self._colorize(formatted, level), file=sys.stderr, flush=True)

        try:
            self._append_locked(self.log_file, formatted)
        except OSError as e:
            print(f"Text log write error: {e}", file=sys.stderr)

    def enabled_for(self, level: str) -> bool:
        return _rank(level) >= self._threshold

    def log(self, level: str, source: str, content: str, metadata: Optional[Dict[str, Any]] = None) -> None:
        """Write one record to every enabled sink, or drop it below min_level"""
        level = level.upper()
        if level == "WARNING":
            level = "WARN"
        with self._lock:
            if not self.enabled_for(level):
                self.dropped_count += 1
                return
            timestamp = datetime.now().astimezone().isoformat()
            self.log_count += 1

            self._write_to_terminal(timestamp, level, source, content)
            self._write_to_sqlite(timestamp, level, source, content, metadata)
            self._write_to_json(timestamp, level, source, content, metadata)

    def debug(self, source: str, content: str, metadata: Optional[Dict[str, Any]] = None) -> None:
        self.log("DEBUG", source, content, metadata)

    def info(self, source: str, content: str, metadata: Optional[Dict[str, Any]] = None) -> None:
        self.log("INFO", source, content, metadata)

    def warn(self, source: str, content: str, metadata: Optional[Dict[str, Any]] = None) -> None:
        self.log("WARN", source, content, metadata)

    def warning(self, source: str, content: str, metadata: Optional[Dict[str, Any]] = None) -> None:
        """Alias of warn"""
        self.warn(source, content, metadata)

    def error(self, source: str, content: str, metadata: Optional[Dict[str, Any]] = None) -> None:
        self.log("ERROR", source, content, metadata)

    def success(self, source: str, content: str, metadata: Optional[Dict[str, Any]] = None) -> None:
        self.log("SUCCESS", source, content, metadata)

    def close(self) -> None:
        with self._lock:
            if self._db_connection is not None:
                with suppress(sqlite3.Error):
                    self._db_connection.close()
                self._db_connection = None

    def __enter__(self) -> "StructuredLogger":
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        self.close()

    def get_stats(self) -> Dict[str, Any]:
        files: Dict[str, Any] = {
            "log_file": str(self.log_file),
            "json_file": str(self.json_file),
            "db_file": str(self.db_file),
        }
        for key, path in list(files.items()):
            p = Path(path)
            if p.exists():
                files[f"{key}_size"] = p.stat().st_size

        return {
            "session_start": self.session_id,
            "log_count": self.log_count,
            "dropped_count": self.dropped_count,
            "min_level": self.min_level,
            "sqlite_enabled": self.enable_sqlite,
            "json_enabled": self.enable_json,
            "json_backend": JSON_BACKEND,
            "colors_enabled": self.enable_colors,
            "files": files,
        }


__all__ = ["HAS_COLORS", "StructuredLogger"]
