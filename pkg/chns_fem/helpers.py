import hashlib
import os
from typing import Optional

import numpy as np
import psutil

from chns_fem.log_engine import ROOT_LOGGER as PARENT_LOGGER


MOD_LOGGER = PARENT_LOGGER.get_child('helpers')

THREADS_ENV_VAR = 'CHNS_THREADS'


def worker_count(environ: Optional[dict] = None) -> int:
    """
    Determine how many worker threads independent runs may use.

    Parameters:
        environ (Optional[dict]):
            Mapping to read `CHNS_THREADS` from. Defaults to `os.environ`.

    Returns:
        int:
            `CHNS_THREADS` when set to a positive integer; otherwise the physical core count reported by
            `psutil`, falling back to 1.

    Examples:
        >>> worker_count({'CHNS_THREADS': '2'})
        2
    """
    log = MOD_LOGGER.get_child('worker_count')
    environ = os.environ if environ is None else environ
    raw = environ.get(THREADS_ENV_VAR)

    cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1

    if raw is None:
        return max(1, cores)

    try:
        requested = int(raw)
    except ValueError:
        log.warning(f'Ignoring non-integer {THREADS_ENV_VAR}={raw!r}')
        return max(1, cores)

    if requested < 1:
        log.warning(f'Ignoring non-positive {THREADS_ENV_VAR}={raw!r}')
        return max(1, cores)

    return requested


def format_float(value: float) -> str:
    """
    Format a real with 17 significant digits in scientific notation (bit-stable round-trip).
    """
    return f'{float(value):.16e}'


def fingerprint_arrays(*arrays: np.ndarray) -> str:
    """
    Hash the raw bytes (and shapes) of a collection of arrays.

    Returns:
        str:
            Hex digest identifying the arrays' contents.
    """
    digest = hashlib.sha1()
    for arr in arrays:
        arr = np.ascontiguousarray(arr)
        digest.update(str(arr.shape).encode())
        digest.update(str(arr.dtype).encode())
        digest.update(arr.tobytes())

    return digest.hexdigest()


__all__ = [
    'THREADS_ENV_VAR',
    'fingerprint_arrays',
    'format_float',
    'worker_count',
]
