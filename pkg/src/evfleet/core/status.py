"""Status events for solver progress.

Long runs (column generation, annealing restarts, bench sweeps) report
progress through here so a caller can follow them without parsing logs.
"""

from collections import deque
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Callable, Optional
import logging
import threading
import time

logger = logging.getLogger(__name__)

HISTORY_SIZE = 100


class StatusCategory(Enum):
    """Which part of the solver an event comes from."""
    GENERATE = "generate"
    COLGEN = "colgen"
    MASTER = "master"
    ORACLE = "oracle"
    BENCH = "bench"
    EXPORT = "export"
    SYSTEM = "system"


class StatusLevel(Enum):
    INFO = "info"
    SUCCESS = "success"
    WARNING = "warning"
    ERROR = "error"
    PROGRESS = "progress"


@dataclass
class StatusEvent:
    """A single status update.

    ``metrics`` carries numbers worth keeping apart from the message text
    (LP value, columns added, cost), so listeners need not parse strings.
    """
    category: StatusCategory
    message: str
    level: StatusLevel = StatusLevel.INFO
    progress: Optional[float] = None  # 0.0-1.0
    metrics: dict[str, float] = field(default_factory=dict)
    timestamp: datetime = field(default_factory=datetime.now)

    def format_message(self) -> str:
        text = f"{self.timestamp:%H:%M:%S} [{self.category.value}] {self.level.value}: {self.message}"
        if self.metrics:
            text += " (" + ", ".join(f"{k}={v:.6g}" for k, v in self.metrics.items()) + ")"
        return text


@dataclass
class Operation:
    name: str
    total_steps: int
    started: float = field(default_factory=time.perf_counter)
    completed_steps: int = 0

    @property
    def elapsed_s(self) -> float:
        return time.perf_counter() - self.started


class StatusManager:
    """Fan-out of status events to listeners, with a bounded history.

    Emission is guarded by a lock; bench workers share one manager.

    Usage:
        status = StatusManager()
        status.add_listener(lambda event: print(event.format_message()))
        status.progress("colgen", "iteration 3", 0.1, lp_obj=12.5)
    """

    def __init__(self):
        self._listeners: list[Callable[[StatusEvent], None]] = []
        self._history: deque[StatusEvent] = deque(maxlen=HISTORY_SIZE)
        self._lock = threading.Lock()
        self._operation: Optional[Operation] = None

    def add_listener(self, callback: Callable[[StatusEvent], None]) -> None:
        with self._lock:
            self._listeners.append(callback)

    def remove_listener(self, callback: Callable[[StatusEvent], None]) -> None:
        with self._lock:
            if callback in self._listeners:
                self._listeners.remove(callback)

    def emit(self, category: str, level: StatusLevel, message: str,
             progress: Optional[float] = None, **metrics: float) -> StatusEvent:
        """Build an event and deliver it; a failing listener never stops the others.

        Raises:
            ValueError: If ``category`` is not a :class:`StatusCategory` value.
        """
        if progress is not None:
            progress = min(1.0, max(0.0, progress))
        event = StatusEvent(StatusCategory(category), message, level, progress, dict(metrics))
        with self._lock:
            self._history.append(event)
            listeners = list(self._listeners)
        for listener in listeners:
            try:
                listener(event)
            except Exception as e:
                logger.debug(f"Status listener failed: {e}")
        return event

    def info(self, category: str, message: str, **metrics: float) -> None:
        self.emit(category, StatusLevel.INFO, message, **metrics)

    def success(self, category: str, message: str, **metrics: float) -> None:
        self.emit(category, StatusLevel.SUCCESS, message, **metrics)

    def warning(self, category: str, message: str, **metrics: float) -> None:
        self.emit(category, StatusLevel.WARNING, message, **metrics)

    def error(self, category: str, message: str, **metrics: float) -> None:
        self.emit(category, StatusLevel.ERROR, message, **metrics)

    def progress(self, category: str, message: str, progress: float, **metrics: float) -> None:
        """Progress update; ``progress`` is clamped to [0, 1]."""
        self.emit(category, StatusLevel.PROGRESS, message, progress, **metrics)

    # ==========================================================================
    # Operation tracking
    # ==========================================================================

    def start_operation(self, name: str, total_steps: int) -> None:
        self._operation = Operation(name, total_steps)
        self.info("system", f"Starting: {name}")

    def step_completed(self, message: str = None) -> None:
        op = self._operation
        if op is None:
            return
        op.completed_steps += 1
        if message:
            self.progress("system", message, self.current_progress)

    def end_operation(self, success: bool = True) -> Optional[float]:
        """Close the current operation; returns its wall time, or None if none was open."""
        op, self._operation = self._operation, None
        if op is None:
            return None
        elapsed = op.elapsed_s
        if success:
            self.success("system", f"Completed: {op.name} ({elapsed:.1f}s)", elapsed_s=elapsed)
        else:
            self.error("system", f"Failed: {op.name} ({elapsed:.1f}s)", elapsed_s=elapsed)
        return elapsed

    @property
    def current_operation(self) -> Optional[str]:
        return self._operation.name if self._operation else None

    @property
    def current_progress(self) -> float:
        op = self._operation
        if op is None or op.total_steps == 0:
            return 0.0
        return op.completed_steps / op.total_steps

    def get_history(self, limit: int = 50) -> list[StatusEvent]:
        with self._lock:
            return list(self._history)[-limit:]

    def clear_history(self) -> None:
        with self._lock:
            self._history.clear()


_global_status: Optional[StatusManager] = None


def get_status_manager() -> StatusManager:
    """Process-wide status manager."""
    global _global_status
    if _global_status is None:
        _global_status = StatusManager()
    return _global_status
