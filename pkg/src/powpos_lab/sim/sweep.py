from __future__ import annotations

import asyncio
from collections.abc import Callable, Sequence
from concurrent.futures import Executor, ProcessPoolExecutor

from powpos_lab.logs import logger
from powpos_lab.sim.config import ScenarioConfig
from powpos_lab.sim.report import Outcome, ScenarioReport
from powpos_lab.sim.scenarios import run_report

ReportCallback = Callable[[ScenarioReport], None]


class SweepError(Exception):
    """Raised when one or more sweep cells fail in collect-all mode."""

    def __init__(self, failures: dict[int, BaseException]):
        super().__init__(
            f"{len(failures)} run(s) failed: {', '.join(f'#{i}' for i in failures)}"
        )
        self.failures = failures


class SweepRunner:
    """
    Run many independent scenario configurations, e.g. one per seed.

    Scheduling policy:
      - Each run is single threaded; up to `workers` runs execute at once
        (guarded by a semaphore), in worker processes when `workers > 1`.
      - If `fail_fast=True`, the first failing run cancels the others and its
        exception propagates. Otherwise every run is attempted and failures are
        raised together as SweepError at the end.
      - Results come back in the order of `configs`, whatever the completion order.
    """

    def __init__(
        self,
        configs: Sequence[ScenarioConfig],
        *,
        workers: int = 1,
        fail_fast: bool = True,
        on_report: ReportCallback | None = None,
    ) -> None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self._configs = list(configs)
        self._workers = workers
        self._fail_fast = fail_fast
        self._on_report = on_report or (lambda r: None)

    async def _run_one(
        self,
        position: int,
        sem: asyncio.Semaphore,
        executor: Executor | None,
        results: dict[int, ScenarioReport],
    ) -> None:
        config = self._configs[position]
        async with sem:
            if executor is None:
                report = await asyncio.to_thread(run_report, config)
            else:
                loop = asyncio.get_running_loop()
                report = await loop.run_in_executor(executor, run_report, config)
        results[position] = report
        if report.outcome is Outcome.STALLED:
            logger.warning(f"Seed {config.seed} stalled at height {report.best_height}")
        else:
            logger.log(f"Seed {config.seed}: {report.outcome.name.lower()}")
        self._on_report(report)

    async def run(self) -> list[ScenarioReport]:
        sem = asyncio.Semaphore(self._workers)
        results: dict[int, ScenarioReport] = {}
        failures: dict[int, BaseException] = {}
        executor = ProcessPoolExecutor(self._workers) if self._workers > 1 else None
        try:
            if self._fail_fast:
                async with asyncio.TaskGroup() as tg:
                    for position in range(len(self._configs)):
                        tg.create_task(self._run_one(position, sem, executor, results))
            else:
                tasks = [
                    asyncio.create_task(self._run_one(position, sem, executor, results))
                    for position in range(len(self._configs))
                ]
                done = await asyncio.gather(*tasks, return_exceptions=True)
                for position, res in enumerate(done):
                    if isinstance(res, BaseException):
                        failures[position] = res
        finally:
            if executor is not None:
                executor.shutdown(cancel_futures=True)

        if failures:
            raise SweepError(failures)
        return [results[i] for i in sorted(results)]

    def run_sync(self) -> list[ScenarioReport]:
        return asyncio.run(self.run())
