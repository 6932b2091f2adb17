"""
Thread pool for independent randomized tasks (restarts, elemental starts, replications).

Results always come back in task-index order, so any reduction over them is
independent of the number of threads.
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, TypeVar

from . import config

logger = logging.getLogger(__name__)

T = TypeVar("T")


class IterationPool:
    """Worker pool that evaluates indexed tasks and tracks utilisation."""

    def __init__(self, max_workers: Optional[int] = None):
        """
        Initialize the iteration pool.

        Args:
            max_workers: Maximum number of concurrent threads (None reads PTS_THREADS)
        """
        self.max_workers = config.resolve_threads(max_workers)
        self.active_workers = 0
        self.completed_tasks = 0
        self.lock = threading.Lock()

        logger.debug(f"IterationPool initialized with max_workers={self.max_workers}")

    def _run_one(self, fn: Callable[[int], T], index: int) -> T:
        with self.lock:
            self.active_workers += 1
        try:
            return fn(index)
        finally:
            with self.lock:
                self.active_workers -= 1
                self.completed_tasks += 1

    def map(self, fn: Callable[[int], T], count: int) -> List[T]:
        """
        Evaluate fn(0), ..., fn(count - 1).

        Args:
            fn: Task function taking the task index
            count: Number of tasks

        Returns:
            Results ordered by task index
        """
        if count <= 0:
            return []
        if self.max_workers == 1 or count == 1:
            return [self._run_one(fn, i) for i in range(count)]

        with ThreadPoolExecutor(max_workers=min(self.max_workers, count)) as executor:
            futures = [executor.submit(self._run_one, fn, i) for i in range(count)]
            return [future.result() for future in futures]

    def get_status(self) -> Dict[str, int]:
        """
        Get current pool status.

        Returns:
            Dictionary with pool statistics
        """
        with self.lock:
            return {
                'max_workers': self.max_workers,
                'active_workers': self.active_workers,
                'completed_tasks': self.completed_tasks,
            }
