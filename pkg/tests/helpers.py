# helpers.py
import csv
import io

import numpy as np


def rk4(rhs, y0, t, steps):
    """Fixed-step classical Runge-Kutta for dy/dt = rhs(y) on [0, t]."""
    h = t / steps
    y = np.array(y0, dtype=complex)
    for _ in range(steps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def read_csv(text):
    """(metadata, rows) from a rendered CsvTable; repeated keys collect into lists."""
    metadata, body = {}, []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            metadata.setdefault(key, []).append(value)
        else:
            body.append(line)
    rows = list(csv.DictReader(io.StringIO("\n".join(body))))
    return {k: v[0] if len(v) == 1 else v for k, v in metadata.items()}, rows
