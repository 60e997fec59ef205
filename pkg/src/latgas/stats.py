"""Batch-means error bars for time averages of stationary series."""
import numpy as np

from .errors import ValidationError

MIN_BATCHES = 20


def batch_means(batches, min_batches=MIN_BATCHES):
    """Mean and standard error from equal-length batch averages.

    ``batches`` has the batch index on axis 0; any trailing shape is kept.
    """
    batches = np.asarray(batches, dtype=float)
    nb = batches.shape[0]
    if nb < min_batches:
        raise ValidationError(
            f"batch means needs at least {min_batches} batches, got {nb}")
    mean = batches.mean(axis=0)
    stderr = batches.std(axis=0, ddof=1) / np.sqrt(nb)
    return mean, stderr


def split_series(series, n_batches):
    """Average a 1-d (or leading-axis) series over ``n_batches`` contiguous blocks.

    Trailing samples that do not fill a block are dropped.
    """
    series = np.asarray(series, dtype=float)
    size = series.shape[0] // n_batches
    if size < 1:
        raise ValidationError("series shorter than the number of batches")
    trimmed = series[: size * n_batches]
    return trimmed.reshape((n_batches, size) + series.shape[1:]).mean(axis=1)
