"""Expanding-window fold boundaries for time-ordered data."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import WindowTooSmall


@dataclass(frozen=True)
class Fold:
    index: int
    train_stop: int  # train rows are [0, train_stop)
    val_start: int
    val_stop: int

    @property
    def train(self) -> slice:
        return slice(0, self.train_stop)

    @property
    def val(self) -> slice:
        return slice(self.val_start, self.val_stop)


def expanding_window_folds(n: int, initial: int, n_folds: int) -> list[Fold]:
    """Folds with step ``(n - initial) // n_folds``; leftover tail rows are unused.

    Fold ``k`` (1-based) trains on the first ``initial + (k - 1) * step`` rows
    and validates on the next ``step`` rows.
    """
    if n_folds < 1:
        raise ValueError("n_folds must be >= 1")
    if not 0 < initial < n:
        raise WindowTooSmall(f"initial window {initial} must lie in (0, {n})")
    step = (n - initial) // n_folds
    if step == 0:
        raise WindowTooSmall(f"{n} rows leave no validation block after {initial} for {n_folds} folds")
    folds = []
    for k in range(1, n_folds + 1):
        stop = initial + (k - 1) * step
        folds.append(Fold(k, stop, stop, stop + step))
    return folds
