"""Pure-numpy implementations of the sampler's hot numeric kernels.

These are the reference implementations; `laggard.kernels` swaps in the
compiled Cython versions when available.
"""

import numpy as np

BACKEND = "python"


def interval_sums(cumsum: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Per-row sums of lag columns over closed intervals [lo_c, hi_c].

    Parameters
    ----------
    cumsum : (n, T+1) array
        Row-wise cumulative sums of the exposure matrix with a leading
        zero column, i.e. cumsum[:, k] = sum of the first k lag columns.
    lo, hi : (C,) int arrays
        1-based inclusive interval bounds.

    Returns
    -------
    (n, C) array of interval sums.
    """
    return cumsum[:, hi] - cumsum[:, lo - 1]


def gram_moment(U: np.ndarray, w: np.ndarray, r: np.ndarray):
    """Weighted Gram matrix and moment vector in one pass.

    Returns (U' diag(w) U, U' diag(w) r) for design U (n, K),
    precision weights w (n,) and residual r (n,).
    """
    wU = U * w[:, None]
    return wU.T @ U, wU.T @ r


def add_block(grid: np.ndarray, lo1: int, hi1: int, lo2: int, hi2: int, value: float) -> None:
    """Add a constant onto a rectangular block of a T x T grid (1-based bounds)."""
    grid[lo1 - 1 : hi1, lo2 - 1 : hi2] += value
