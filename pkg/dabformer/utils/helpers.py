"""
Utility Helpers

This module contains helper functions shared by the services.
"""

import csv
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np


def format_timestamp(dt: Optional[datetime] = None) -> str:
    """Format datetime as ISO string"""
    if dt is None:
        dt = datetime.now(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + "Z"


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def format_value(value: Any) -> str:
    """CSV cell text; floats use repr so reruns compare bit-for-bit, +inf is written as ``inf``"""
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


class CsvLog:
    """Append-only CSV file with a fixed header"""

    def __init__(self, path: Union[str, Path], fields: Sequence[str], append: bool = False):
        self.path = Path(path)
        self.fields = list(fields)
        ensure_dir(self.path.parent)
        if not append or not self.path.exists():
            with self.path.open("w", newline="") as f:
                csv.writer(f).writerow(self.fields)

    def write(self, row: Dict[str, Any]) -> None:
        with self.path.open("a", newline="") as f:
            csv.writer(f).writerow([format_value(row.get(k, "")) for k in self.fields])


def write_csv(path: Union[str, Path], fields: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    log = CsvLog(path, fields)
    for row in rows:
        log.write(row)
    return log.path


def read_csv(path: Union[str, Path]) -> List[Dict[str, str]]:
    with Path(path).open(newline="") as f:
        return list(csv.DictReader(f))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)"""
    slope, _ = np.polyfit(np.log(np.asarray(xs, dtype=np.float64)), np.log(np.asarray(ys, dtype=np.float64)), 1)
    return float(slope)


def mean_ignoring_nan(values: Iterable[float]) -> float:
    """Mean ignoring NaN entries; NaN when nothing is left"""
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan
    return float(np.mean(values))
