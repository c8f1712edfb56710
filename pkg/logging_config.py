# -*- coding: utf-8 -*-
"""
הגדרות לוגים מרכזיות - Centralized logging for the optomech tools
Quadrature sweeps and path sampling can emit thousands of DEBUG records per
second, so the console handler is throttled by a token bucket and chatty
third-party loggers are held at WARNING.
"""

import logging
import threading
import time
from typing import Callable, Dict, Optional

import config

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

# Loggers of this package; they follow OPTOMECH_LOG_LEVEL
APP_LOGGERS = (
    'units_core', 'quadrature', 'modes', 'coupling', 'geomphase', 'dynamics',
    'reporting', 'config', 'paper_repro', 'main', '__main__',
)

NOISY_LOGGERS = {
    'numexpr': logging.WARNING,
    'asyncio': logging.WARNING,
    'concurrent.futures': logging.WARNING,
}


class TokenBucketRateLimiter:
    """Admits `rate` records per second with bursts up to `burst`"""

    def __init__(self, rate: float, burst: Optional[float] = None,
                 clock: Callable[[], float] = time.monotonic):
        self.rate = rate
        self.burst = burst if burst is not None else 2.0 * rate
        self._clock = clock
        self._tokens = self.burst
        self._stamp = clock()
        self._lock = threading.Lock()

    def take(self) -> bool:
        with self._lock:
            now = self._clock()
            self._tokens = min(self.burst, self._tokens + (now - self._stamp) * self.rate)
            self._stamp = now
            if self._tokens < 1.0:
                return False
            self._tokens -= 1.0
            return True


class RateLimitingFilter(logging.Filter):
    """Drops records over the limit; the next record that passes says how many were lost"""

    def __init__(self, max_rate: float, clock: Callable[[], float] = time.monotonic):
        super().__init__()
        self.bucket = TokenBucketRateLimiter(max_rate, clock=clock)
        self.dropped_count = 0

    def filter(self, record: logging.LogRecord) -> bool:
        if not self.bucket.take():
            self.dropped_count += 1
            return False
        if self.dropped_count:
            record.msg = f"[{self.dropped_count} messages dropped] {record.msg}"
            self.dropped_count = 0
        return True


class SuppressingFilter(logging.Filter):
    """Minimum level per logger-name prefix"""

    def __init__(self, thresholds: Dict[str, int]):
        super().__init__()
        self.thresholds = thresholds

    def filter(self, record: logging.LogRecord) -> bool:
        for prefix, floor in self.thresholds.items():
            if record.name == prefix or record.name.startswith(prefix + '.'):
                return record.levelno >= floor
        return True


def setup_logging(level: Optional[str] = None, max_per_sec: Optional[float] = None) -> logging.Logger:
    """
    Configure the root logger.

    Defaults come from config.LOG_LEVEL / config.LOGS_MAX_PER_SEC (the
    OPTOMECH_* environment, .env included); explicit arguments win. A rate
    of 0 disables throttling. Safe to call repeatedly: earlier handlers are
    replaced, not stacked.
    """
    name = (level or config.LOG_LEVEL).upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        numeric = logging.INFO
    rate = config.LOGS_MAX_PER_SEC if max_per_sec is None else max_per_sec

    root = logging.getLogger()
    root.setLevel(numeric)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    # stderr, so stdout stays free for tables printed by paper-repro
    handler = logging.StreamHandler()
    handler.setLevel(numeric)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    if rate > 0:
        handler.addFilter(RateLimitingFilter(rate))
    handler.addFilter(SuppressingFilter(NOISY_LOGGERS))
    root.addHandler(handler)

    for logger_name, floor in NOISY_LOGGERS.items():
        logging.getLogger(logger_name).setLevel(floor)
    for logger_name in APP_LOGGERS:
        logging.getLogger(logger_name).setLevel(numeric)

    logging.getLogger(__name__).debug(f"logging at {logging.getLevelName(numeric)}, limit {rate:g}/s")
    return root


def get_logger(name: str) -> logging.Logger:
    """Named logger; configures logging on first use"""
    if not logging.getLogger().handlers:
        setup_logging()
    return logging.getLogger(name)
