"""
Stage Manager - runs pipeline stages in dependency order
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from uqtab.core.errors import StageDependencyMissing, StageFailure, UqtabError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class StageManager:
    """
    Registry of named stages with dependencies
    Stages run sequentially; results are kept by name for dependent stages
    """

    def __init__(self):
        """Initialize the manager"""
        self.stages: Dict[str, Dict[str, Any]] = {}  # name -> {function, requires}
        self.results: Dict[str, Any] = {}
        self.timings: Dict[str, float] = {}

    def register_stage(
        self,
        name: str,
        function: Callable[[Dict[str, Any]], Any],
        requires: Sequence[str] = (),
    ) -> bool:
        """
        Register a new stage
        Args:
            name: Stage name (e.g., "boruta")
            function: Callable receiving the results of earlier stages
            requires: Names of stages that must have completed first
        Returns:
            True if registration succeeded, False if already exists
        """
        if name in self.stages:
            logger.warning(f"Stage '{name}' already registered")
            return False

        self.stages[name] = {"function": function, "requires": tuple(requires)}
        logger.debug(f"Registered stage '{name}' requiring {list(requires)}")
        return True

    def run(self, name: str) -> Any:
        """
        Run one stage
        Raises:
            StageDependencyMissing: If a required stage has no result yet
            StageFailure: Wrapping any error raised by the stage
        """
        stage = self.stages.get(name)
        if stage is None:
            raise StageDependencyMissing(f"Stage '{name}' is not registered")

        for dependency in stage["requires"]:
            if dependency not in self.results:
                raise StageDependencyMissing(
                    f"Stage '{name}' requires '{dependency}' which has not run"
                )

        logger.info(f"Starting stage '{name}'")
        started = time.perf_counter()
        try:
            result = stage["function"](self.results)
        except StageFailure:
            raise
        except UqtabError as e:
            logger.error(f"Stage '{name}' failed: {e}")
            raise StageFailure(name, e) from e
        except Exception as e:
            logger.error(f"Stage '{name}' failed: {e}", exc_info=True)
            raise StageFailure(name, e) from e

        self.timings[name] = time.perf_counter() - started
        self.results[name] = result
        logger.info(f"Finished stage '{name}' in {self.timings[name]:.1f}s")
        return result

    def run_all(self, names: Optional[Sequence[str]] = None) -> Dict[str, Any]:
        """Run stages in registration order (or the given order)"""
        for name in names or list(self.stages.keys()):
            self.run(name)
        return self.results


def run_parallel(function: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """
    Map a function over items, preserving order
    Each item must carry its own seed so results don't depend on scheduling
    """
    if workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, items))
