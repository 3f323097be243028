"""Process-pool fan-out with results in input order."""

import logging
import os
from multiprocessing import Pool

from .errors import ConfigError

logger = logging.getLogger(__name__)

WORKERS_ENV = "DRIFT_DYNAMICS_WORKERS"


def worker_count():
    """Pool size from ``DRIFT_DYNAMICS_WORKERS`` (default: CPU count)."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        count = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got '{raw}'") from exc
    if count < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {count}")
    return count


def map_ordered(fn, items, workers=None):
    """Apply a picklable ``fn`` to every item; the result list follows the input order.

    Runs serially for a single worker or a single item, so results never depend
    on the pool size.
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    workers = min(workers, len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    logger.debug("Dispatching %d task(s) to %d worker process(es)", len(items), workers)
    with Pool(processes=workers) as pool:
        return pool.map(fn, items)
