"""Deterministic number formatting for CSV/JSON emission."""

import numpy as np


def fmt_f32(x):
    """Shortest decimal string that round-trips to the same float32."""
    return np.format_float_positional(np.float32(x), unique=True, trim="-")


def fmt_f64(x):
    """Shortest decimal string that round-trips to the same float64."""
    return repr(float(x))


def json_float(x):
    """JSON-safe float: numbers stay numbers, infinities become strings."""
    x = float(x)
    if x == float("inf"):
        return "inf"
    if x == float("-inf"):
        return "-inf"
    return x
