import math
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence, Union

import numpy as np
import orjson
import pydantic
from scipy.integrate import trapezoid as _trapezoid

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def finite_or_tag(obj: Any) -> Any:
    """
    orjson writes non-finite floats as null. Reports need to tell an infinite
    exponent from a missing value, so non-finite floats become strings.
    """
    if isinstance(obj, pydantic.BaseModel):
        return finite_or_tag(obj.dict())
    if isinstance(obj, dict):
        return {str(k): finite_or_tag(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [finite_or_tag(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    if isinstance(obj, np.integer):
        return int(obj)
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    return obj


def dumps(obj: Any) -> bytes:
    return orjson.dumps(finite_or_tag(obj), option=JSON_OPTIONS)


def write_json(obj: Any, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_bytes(dumps(obj) + b"\n")
    return path


def write_json_lines(objs: Iterable[Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    with path.open("wb") as f:
        for obj in objs:
            f.write(orjson.dumps(finite_or_tag(obj), option=orjson.OPT_SORT_KEYS))
            f.write(b"\n")
    return path


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Least-squares slope of log(y) against log(x); None below two usable points."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(x) & np.isfinite(y)
    if keep.sum() < 2:
        return None
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def trapezoid(values: Sequence[float], times: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(_trapezoid(values, np.asarray(times, dtype=float)))
