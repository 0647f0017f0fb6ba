"""Controller fault catalog and the seqnum-indexed error log.

Five coded fault types plus an Unknown catch-all.  Each recorded event
gets a per-domain monotonically increasing sequence number; consumers are
pushed only the seqnum and fetch the detail through a second lookup.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

ERROR_TITLES = {
    90518: "Emergency Stop",
    90515: "Speed Violation",
    50456: "Proximity to Singularity",
    50027: "Joint Out of Range",
    50055: "Joint Load Too High",
    0: "Unknown",
}

KNOWN_FAULT_CODES = (90518, 90515, 50456, 50027, 50055)


def domain_for_code(code: int) -> int:
    """Fault domain: 9xxxx codes are operational (domain 9), the rest motion (5)."""
    return 9 if code >= 90000 else 5


@dataclass
class ErrorEvent:
    code: int
    title: str
    description: str
    domain: int
    seqnum: int
    timestamp_us: int

    def detail_text(self) -> str:
        return (f"code={self.code}\ntitle={self.title}\n"
                f"description={self.description}\ndomain={self.domain}\n"
                f"seqnum={self.seqnum}\ntimestamp_us={self.timestamp_us}\n")


@dataclass
class ErrorLog:
    """Thread-safe store of error events, seqnum-indexed per domain."""

    _lock: threading.Lock = field(default_factory=threading.Lock)
    _seq: dict = field(default_factory=lambda: {5: 0, 9: 0})
    _events: dict = field(default_factory=dict)
    listeners: list = field(default_factory=list)

    def record(self, code: int, description: str = "") -> ErrorEvent:
        title = ERROR_TITLES.get(code, ERROR_TITLES[0])
        domain = domain_for_code(code)
        with self._lock:
            self._seq[domain] += 1
            event = ErrorEvent(code, title, description or title, domain,
                               self._seq[domain], time.time_ns() // 1000)
            self._events[(domain, event.seqnum)] = event
        for fn in list(self.listeners):
            fn(event)
        return event

    def get(self, domain: int, seqnum: int) -> ErrorEvent | None:
        with self._lock:
            return self._events.get((domain, seqnum))
