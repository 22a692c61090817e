import logging
import time
from contextlib import contextmanager
from typing import Dict, Optional

import statsd as st

from app.config import STATSD
from app.constants.metrics import Constants

logger = logging.getLogger("metrics")


class StatsdClient:
    """Thin statsd wrapper; every call is a no-op unless STATSD_ENABLED=1."""

    def __init__(self, enabled: bool = STATSD.ENABLED):
        self.enabled = enabled
        self.client = None
        if enabled:
            self.client = st.StatsClient(
                host=STATSD.HOST,
                port=STATSD.PORT,
                prefix=Constants.Metric.PREFIX,
            )

    def timing(self, stat: str, delta: float, rate: int = 1, tags: Optional[Dict[str, str]] = None):
        if not self.client:
            return
        stat = self._sanitize_metric(stat)
        self.client.timing(stat=stat, delta=delta, rate=rate, tags=tags)

    def increment(
        self, stat: str, count: int = 1, rate: int = 1, tags: Optional[Dict[str, str]] = None
    ):
        if not self.client:
            return
        stat = self._sanitize_metric(stat)
        self.client.incr(stat=stat, count=count, rate=rate, tags=tags)

    @contextmanager
    def timed(self, stat: str, tags: Optional[Dict[str, str]] = None):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timing(stat, (time.perf_counter() - start) * 1000, tags=tags)

    def _sanitize_metric(self, metric: str) -> str:
        return metric.replace("/", ".").replace("-", "_").replace(" ", "_")


statsd = StatsdClient()
