"""Frame binarization and the two-part adaptive threshold mechanism.

A single global threshold drives binarization. After every successful
detection the threshold is nudged toward the Otsu split of the target's
local gray histogram. After a run of misses the machine sweeps candidate
thresholds around the operating point, widening the range and refining the
step on every exhausted sweep, until the target is declared lost.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .imaging import Roi


class DegenerateHistogramError(ValueError):
    """Histogram has fewer than two populated bins; no split point exists."""


def binarize(img: np.ndarray, t: int) -> np.ndarray:
    """Map pixels strictly above t to 255 and everything else to 0."""
    if not 0 <= t <= 255:
        raise ValueError(f"threshold {t} outside [0, 255]")
    return np.where(img > t, 255, 0).astype(np.uint8)


def histogram(img: np.ndarray, roi: Roi | None = None) -> np.ndarray:
    """256-bin intensity histogram over roi (clamped to the frame).

    roi=None counts the whole image. A roi that does not intersect the
    frame raises ValueError.
    """
    h, w = img.shape
    if roi is None:
        region = img
    else:
        clamped = roi.clamped(w, h)
        if clamped is None:
            raise ValueError("roi does not intersect the image")
        region = img[clamped.y0:clamped.y0 + clamped.h,
                     clamped.x0:clamped.x0 + clamped.w]
    return np.bincount(region.ravel(), minlength=256).astype(np.int64)


def otsu(hist: np.ndarray) -> int:
    """Split level maximizing between-class variance; ties resolve to the lowest level.

    The returned t puts intensities <= t in the dark class, matching the
    strict inequality used by binarize(). Raises DegenerateHistogramError
    when fewer than two bins are populated.
    """
    counts = np.asarray(hist, dtype=np.float64)
    if counts.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    if np.count_nonzero(counts) < 2:
        raise DegenerateHistogramError("histogram needs at least two populated bins")
    total = counts.sum()
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(counts)
    m0 = np.cumsum(counts * levels)
    omega = w0 / total
    mu = m0 / total
    mu_total = mu[-1]
    sigma_b = np.zeros(256)
    valid = (w0 > 0) & (w0 < total)
    sigma_b[valid] = (mu_total * omega[valid] - mu[valid]) ** 2 / (
        omega[valid] * (1.0 - omega[valid])
    )
    return int(np.argmax(sigma_b))


@dataclass(frozen=True)
class ThresholdConfig:
    """Constants of the adaptive threshold machine (all config-overridable)."""

    initial_t: int = 128
    accept_window: int = 40
    loss_trigger: int = 5
    initial_half_width: int = 64
    initial_step: int = 16
    max_sweeps: int = 3


@dataclass(frozen=True)
class ThresholdState:
    """Per-stream threshold machine state; advance with on_detect / on_miss."""

    config: ThresholdConfig
    global_t: int
    miss_count: int = 0
    sweep_index: int = 0
    sweep_cursor: int | None = None
    range_half_width: int = 0
    step: int = 0
    lost: bool = False


def initial_state(config: ThresholdConfig | None = None) -> ThresholdState:
    cfg = config or ThresholdConfig()
    return ThresholdState(
        config=cfg,
        global_t=cfg.initial_t,
        range_half_width=cfg.initial_half_width,
        step=cfg.initial_step,
    )


def on_detect(
    state: ThresholdState,
    roi_hist: np.ndarray,
    used_t: int | None = None,
) -> ThresholdState:
    """Fold a successful detection into the state.

    Resets the miss counter and any active sweep. ``used_t`` is the threshold
    that actually produced the detection when it differs from global_t (a
    sweep candidate); it becomes the new operating point before the local
    Otsu refinement is applied. The refinement itself only moves the
    operating point when it stays within accept_window of it.
    """
    cfg = state.config
    g = state.global_t if used_t is None else int(used_t)
    try:
        local = otsu(roi_hist)
        if abs(local - g) <= cfg.accept_window:
            g = local
    except DegenerateHistogramError:
        pass
    return replace(
        state,
        global_t=g,
        miss_count=0,
        sweep_index=0,
        sweep_cursor=None,
        range_half_width=cfg.initial_half_width,
        step=cfg.initial_step,
        lost=False,
    )


def on_miss(state: ThresholdState) -> tuple[ThresholdState, int | None]:
    """Fold a failed detection into the state; returns the next threshold to try.

    Before loss_trigger consecutive misses the candidate is the current
    global threshold. Once triggered, candidates walk
    [global_t - range_half_width, global_t + range_half_width] (clamped to
    [0, 255]) in step increments, one candidate per frame. Each exhausted
    sweep doubles the range and halves the step (floor 1); after max_sweeps
    exhausted sweeps the target is declared lost and the candidate is None.
    """
    cfg = state.config
    if state.lost:
        return replace(state, miss_count=state.miss_count + 1), None
    miss = state.miss_count + 1
    if miss < cfg.loss_trigger:
        return replace(state, miss_count=miss), state.global_t

    if miss == cfg.loss_trigger:
        half_width = cfg.initial_half_width
        step = cfg.initial_step
        cursor = max(0, state.global_t - half_width)
        sweep = 0
    else:
        half_width = state.range_half_width
        step = state.step
        cursor = state.sweep_cursor
        sweep = state.sweep_index

    if sweep >= cfg.max_sweeps or cursor is None:
        return replace(
            state, miss_count=miss, sweep_index=max(sweep, cfg.max_sweeps),
            sweep_cursor=None, lost=True,
        ), None

    candidate = cursor
    hi = min(255, state.global_t + half_width)
    nxt: int | None = cursor + step
    if nxt > hi:
        sweep += 1
        if sweep >= cfg.max_sweeps:
            nxt = None
        else:
            half_width *= 2
            step = max(1, step // 2)
            nxt = max(0, state.global_t - half_width)
    return replace(
        state,
        miss_count=miss,
        sweep_index=sweep,
        sweep_cursor=nxt,
        range_half_width=half_width,
        step=step,
    ), candidate
