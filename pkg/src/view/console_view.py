# Console View - Renders tables, documents and messages for the command line.
import sys
from typing import Any, Optional, TextIO

import pandas as pd

from src.model.distance_profile import DistanceProfile
from src.services.file_service import FileService
from src.services.log_service import get_logger

# Initialize logger for this module
logger = get_logger(__name__)


class ConsoleView:
    """Data goes to stdout (or the ``--out`` file); messages go to stderr."""

    def __init__(self, out_path: Optional[str] = None,
                 stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> None:
        self.out_path = out_path
        self.stdout = stdout if stdout is not None else sys.stdout
        self.stderr = stderr if stderr is not None else sys.stderr

    def emit_text(self, text: str) -> bool:
        # Single sink for every data document.
        if self.out_path:
            return FileService.save_text(text, self.out_path) is not None
        self.stdout.write(text)
        self.stdout.flush()
        return True

    def emit_profile(self, profile: DistanceProfile, fmt: str = 'csv') -> bool:
        if fmt == 'json':
            return self.emit_text(FileService.to_json(profile.to_dict()))
        return self.emit_text(FileService.profile_to_csv(profile))

    def emit_table(self, frame: pd.DataFrame, fmt: str = 'csv') -> bool:
        if fmt == 'json':
            return self.emit_text(FileService.to_json(frame.to_dict(orient='records')))
        return self.emit_text(FileService.table_to_csv(frame))

    def emit_json(self, payload: Any) -> bool:
        return self.emit_text(FileService.to_json(payload))

    def show_message(self, message: str) -> None:
        self.stderr.write(f"{message}\n")

    def show_warning(self, message: str) -> None:
        logger.debug(f"Shown warning: {message}")
        self.stderr.write(f"warning: {message}\n")

    def show_error(self, message: str) -> None:
        self.stderr.write(f"error: {message}\n")
