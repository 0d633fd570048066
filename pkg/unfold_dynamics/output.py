"""Artifact writers and the worker pool used by the command-line commands."""
import concurrent.futures
import csv
import io
import json
import logging
import math
import os
import tempfile
from typing import Any, Callable, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

THREADS_ENV = "UNFOLD_THREADS"


def _finite(v: float) -> Optional[float]:
    return v if math.isfinite(v) else None


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; complex numbers become [re, im] pairs."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        return [_finite(z.real), _finite(z.imag)]
    if isinstance(value, (float, np.floating)):
        return _finite(float(value))
    return value


def _atomic_write(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix='.' + os.path.basename(path), suffix='.tmp', dir=directory)
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug('wrote %s', path)


def write_json(path: str, payload: Any) -> str:
    _atomic_write(path, json.dumps(to_jsonable(payload), indent=2, allow_nan=False) + "\n")
    return path


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return 'nan'
        return format(v, '.17g')
    if value is None:
        return ''
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator='\n')
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    _atomic_write(path, buf.getvalue())
    return path


def complex_columns(name: str) -> List[str]:
    return [f"{name}_re", f"{name}_im"]


def split_complex(z: complex) -> List[float]:
    z = complex(z)
    return [z.real, z.imag]


def write_error_json(path: str, error) -> str:
    return write_json(path, error.as_dict())


# Plots

def write_portrait_svg(path: str, portrait, title: Optional[str] = None) -> str:
    """Separatrices and seeded trajectories of a polynomial field on the w-plane."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    # fixed salt and no date keep repeated runs byte-identical
    matplotlib.rcParams['svg.hashsalt'] = 'unfold-dynamics'
    fig, ax = plt.subplots(figsize=(6, 6))
    R = portrait.fan.escape_radius
    for name, traj in portrait.trajectories:
        pts = np.asarray(traj.points, dtype=complex)
        pts = pts[np.abs(pts) <= R]
        if pts.size < 2:
            continue
        if name.startswith('separatrix'):
            ax.plot(pts.real, pts.imag, '-', color='red', lw=1.2)
        else:
            ax.plot(pts.real, pts.imag, '-', color='steelblue', lw=0.5, alpha=0.7)
    singular = np.array(portrait.singular, dtype=complex)
    if singular.size:
        ax.scatter(singular.real, singular.imag, color='black', s=18, zorder=3)
    theta = np.linspace(0, 2 * np.pi, 200)
    ax.plot(R * np.cos(theta), R * np.sin(theta), 'k--', lw=0.5)
    ax.set(xlim=(-R, R), ylim=(-R, R), aspect='equal')
    ax.set_xlabel('Re w')
    ax.set_ylabel('Im w')
    if title:
        ax.set_title(title)
    buf = io.StringIO()
    fig.savefig(buf, format='svg', metadata={'Date': None})
    plt.close(fig)
    _atomic_write(path, buf.getvalue())
    return path


# Worker pool

def worker_count(requested: Optional[int] = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            logger.warning('ignoring non-integer %s=%r', THREADS_ENV, cap)
    return max(1, n)


def map_tasks(func: Callable, items: Sequence, workers: Optional[int] = None) -> List:
    """Ordered results of func over items; results do not depend on the worker count."""
    items = list(items)
    n = min(worker_count(workers), max(1, len(items)))
    if n == 1:
        return [func(item) for item in items]
    with concurrent.futures.ThreadPoolExecutor(max_workers=n) as executor:
        return list(executor.map(func, items))

