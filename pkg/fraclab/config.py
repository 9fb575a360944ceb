"""
Runtime configuration for fraclab.

Environment variables, logging setup and the ordered worker pool shared by
every module that evaluates many independent points.
"""

import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

T = TypeVar('T')
R = TypeVar('R')

# === ENVIRONMENT ===
# Several names are accepted for the cache URL so a plain REDIS_URL (as set by
# most hosting providers) works without extra configuration.

THREADS_ENV = 'FRACLAB_THREADS'
LOG_LEVEL_ENV = 'FRACLAB_LOG_LEVEL'
CACHE_URL_ENVS = ('FRACLAB_CACHE_URL', 'REDIS_URL')
CACHE_TTL_ENV = 'FRACLAB_CACHE_TTL'

# Cache entries expire after 24 hours; values are deterministic so a stale
# entry is never wrong, only wasted memory.
DEFAULT_CACHE_TTL = 24 * 60 * 60

# Same layout as the live-log format in pytest.ini
LOG_FORMAT = '%(asctime)s [%(levelname)8s] %(message)s'
LOG_DATE_FORMAT = '%H:%M:%S'


def resolve_threads(cli_value: Optional[int] = None) -> int:
    """
    Resolve the worker cap

    Args:
        cli_value: Value of --threads, if given

    Returns:
        Number of workers, at least 1. Falls back to FRACLAB_THREADS, then 1.
    """
    if cli_value is not None:
        return max(1, int(cli_value))

    raw = os.environ.get(THREADS_ENV, '').strip()
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        logging.getLogger(__name__).warning(
            "Ignoring non-integer %s=%r", THREADS_ENV, raw)
        return 1


def cache_url() -> str:
    """First non-empty cache URL from the environment, or ''"""
    for name in CACHE_URL_ENVS:
        value = os.environ.get(name, '').strip()
        if value:
            return value
    return ''


def cache_ttl() -> int:
    raw = os.environ.get(CACHE_TTL_ENV, '').strip()
    return int(raw) if raw.isdigit() else DEFAULT_CACHE_TTL


def configure_logging(level: Optional[str] = None) -> None:
    """
    Install a stderr handler on the fraclab logger

    Args:
        level: Level name; defaults to FRACLAB_LOG_LEVEL or WARNING
    """
    level_name = (level or os.environ.get(LOG_LEVEL_ENV) or 'WARNING').upper()
    root = logging.getLogger('fraclab')
    root.setLevel(getattr(logging, level_name, logging.WARNING))

    if not any(getattr(h, '_fraclab', False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(LOG_FORMAT, LOG_DATE_FORMAT))
        handler._fraclab = True
        root.addHandler(handler)


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """
    Map fn over items, keeping input order

    Results never depend on the worker count: each item is evaluated
    independently and collected by position.

    Args:
        fn: Pure function of one item
        items: Work items
        threads: Worker cap (1 = run inline)

    Returns:
        List of results in input order
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))
