import logging
import os
from contextlib import contextmanager

PACKAGE_LOGGER = "heart_cohorts"


class KeyValueFormatter(logging.Formatter):
    """Renders records as `time=... level=... case=... stage=... msg=...` lines."""

    def format(self, record):
        fields = [
            ("time", self.formatTime(record, "%Y-%m-%dT%H:%M:%S")),
            ("level", record.levelname),
            ("logger", record.name),
            ("case", getattr(record, "case", "-")),
            ("stage", getattr(record, "stage", "-")),
        ]
        text = " ".join(f"{k}={v}" for k, v in fields)
        message = record.getMessage().replace("\n", " | ")
        text += f' msg="{message}"'
        if record.exc_info:
            exc = self.formatException(record.exc_info).replace("\n", " | ")
            text += f' exc="{exc}"'
        return text


class _CaseFilter(logging.Filter):

    def __init__(self, case_id):
        super().__init__()
        self.case_id = case_id
        self.stage = "-"

    def filter(self, record):
        if not hasattr(record, "case"):
            record.case = self.case_id
        if not hasattr(record, "stage"):
            record.stage = self.stage
        return True


@contextmanager
def case_logging(case_id, log_path, level=logging.INFO):
    """
    Attaches a per-case file handler to the package logger for the duration of the block.
    Args:
        - case_id (str): identifier written on every record
        - log_path (str): log file, truncated on entry
    Output:
        - case_filter (_CaseFilter): set `case_filter.stage` to tag subsequent records
    """
    os.makedirs(os.path.dirname(os.path.abspath(log_path)), exist_ok=True)
    handler = logging.FileHandler(log_path, mode="w", encoding="utf-8")
    handler.setFormatter(KeyValueFormatter())
    handler.setLevel(level)
    case_filter = _CaseFilter(case_id)
    handler.addFilter(case_filter)

    package_logger = logging.getLogger(PACKAGE_LOGGER)
    previous_level = package_logger.level
    if package_logger.level == logging.NOTSET or package_logger.level > level:
        package_logger.setLevel(level)
    package_logger.addHandler(handler)
    try:
        yield case_filter
    finally:
        package_logger.removeHandler(handler)
        package_logger.setLevel(previous_level)
        handler.close()


_console_handler = None


def configure_console(verbosity=0):
    """Console handler on the package logger; calling it again replaces the previous one."""
    global _console_handler
    level = logging.WARNING if verbosity <= 0 else (logging.INFO if verbosity == 1 else logging.DEBUG)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    if _console_handler is not None:
        package_logger.removeHandler(_console_handler)
    package_logger.addHandler(handler)
    package_logger.setLevel(level)
    _console_handler = handler
    return handler
