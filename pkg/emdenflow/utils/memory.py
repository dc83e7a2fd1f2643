import platform
import time
from typing import Optional

import humanize

# 'resource' isn't supported on Windows
try:
    import resource
except ModuleNotFoundError:  # pragma: no cover
    pass


def _maxrss_bytes() -> Optional[int]:
    if platform.system() == "Windows":  # pragma: no cover
        return None
    rss = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # ru_maxrss is in bytes on macOS, kilobytes elsewhere
    return rss if platform.system() == "Darwin" else rss * 1024


class PerformanceTracker:
    """Wall time and peak-RSS growth of a block, e.g. one verify suite."""

    def __init__(self, label: str = "") -> None:
        self.label = label
        self.time = 0.0
        self.increment: Optional[int] = None

    def __enter__(self):
        self.start_time = time.perf_counter()
        self.pre_maxrss_bytes = _maxrss_bytes()
        return self

    def __exit__(self, *args):
        self.time = time.perf_counter() - self.start_time
        post = _maxrss_bytes()
        if post is not None and self.pre_maxrss_bytes is not None:
            self.increment = post - self.pre_maxrss_bytes

    def describe(self) -> str:
        duration = humanize.precisedelta(
            self.time, minimum_unit="milliseconds", format="%0.2f"
        )
        if self.increment is None:
            return f"{self.label} took {duration}"
        return (
            f"{self.label} took {duration}, peak memory "
            f"+{humanize.naturalsize(self.increment)}"
        )
