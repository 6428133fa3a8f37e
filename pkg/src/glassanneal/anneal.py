"""L2-strength annealing schedules as stepwise state machines.

Three schedules are provided:

* matched: ``lam_i = lam_0 * S_K(L(i) / L(0))`` for a smoothing operator ``S_K``;
* cosine: ``lam_i = lam_0 * (1 + cos(2 pi i / T))``;
* two-step: an E-step of size ``eta`` followed by an M-step of size
  ``|lam_i - lam_{i-1}| * eta`` for an arbitrary schedule ``lam_t``.

Every ``*_step`` function advances the state in place and returns
``(state, lam)``; replaying the same input stream gives the same sequence.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Literal

from .errors import NonpositiveLossError, UsageError

SmoothingKind = Literal["identity", "moving-average", "exponential"]
Algo = Literal["matched", "cosine", "two-step", "fixed"]


class SmoothingOperator:
    """Causal smoother with memory ``K``.

    ``moving-average`` averages the last ``K`` inputs (fewer at start-up);
    ``exponential`` uses half-life ``K`` and starts from the first input.
    Both outputs are convex combinations of past inputs.
    """

    def __init__(self, kind: SmoothingKind = "exponential", memory: int = 5):
        if kind not in ("identity", "moving-average", "exponential"):
            raise UsageError(f"unknown smoothing kind {kind!r}")
        if memory < 1:
            raise UsageError(f"smoothing memory must be a positive integer, got {memory}")
        self.kind = kind
        self.memory = int(memory)
        self._window: deque[float] = deque(maxlen=self.memory)
        self._value: float | None = None
        self._alpha = 1.0 - 2.0 ** (-1.0 / self.memory)

    def reset(self) -> None:
        self._window.clear()
        self._value = None

    def __call__(self, r: float) -> float:
        r = float(r)
        if self.kind == "identity":
            self._value = r
        elif self.kind == "moving-average":
            self._window.append(r)
            lo, hi = min(self._window), max(self._window)
            # clamp guards the convex-hull property against summation rounding
            self._value = min(max(math.fsum(self._window) / len(self._window), lo), hi)
        else:
            if self._value is None:
                self._value = r
            else:
                self._value = self._value + self._alpha * (r - self._value)
        return self._value


@dataclass
class ScheduleState:
    algo: Algo
    lambda0: float
    current_lambda: float = 0.0
    previous_lambda: float = 0.0
    epoch: int = 0
    T: int | None = None
    L0: float | None = None
    smoother: SmoothingOperator | None = None
    warmup: int = 0
    lambda_schedule: Callable[[int], float] | None = field(default=None, repr=False)
    normalized_cosine: bool = False
    signed_m_step: bool = False

    def __post_init__(self):
        if self.lambda0 < 0:
            raise UsageError(f"lambda0 must be nonnegative, got {self.lambda0}")
        if self.algo == "cosine" and (self.T is None or self.T < 1):
            raise UsageError("cosine schedule needs a period T >= 1")
        if self.algo == "matched" and self.smoother is None:
            self.smoother = SmoothingOperator()


def matched_state(lambda0: float, smoother: SmoothingOperator | None = None, warmup: int = 0) -> ScheduleState:
    return ScheduleState("matched", lambda0, smoother=smoother, warmup=warmup)


def cosine_state(lambda0: float, T: int, normalized: bool = False) -> ScheduleState:
    return ScheduleState("cosine", lambda0, T=T, normalized_cosine=normalized)


def two_step_state(
    lambda0: float, schedule: Callable[[int], float] | None = None, *, signed: bool = False
) -> ScheduleState:
    if schedule is None:
        schedule = constant_schedule(lambda0)
    return ScheduleState("two-step", lambda0, lambda_schedule=schedule, signed_m_step=signed)


def fixed_state(lambda0: float) -> ScheduleState:
    return ScheduleState("fixed", lambda0)


def _advance(state: ScheduleState, lam: float) -> tuple[ScheduleState, float]:
    lam = max(0.0, lam)
    state.previous_lambda = state.current_lambda if state.epoch > 0 else lam
    state.current_lambda = lam
    state.epoch += 1
    return state, lam


def matched_step(state: ScheduleState, observed_loss: float) -> tuple[ScheduleState, float]:
    """Loss-ratio annealing; the first call records ``L(0)``.

    During the first ``warmup`` epochs after ``L(0)`` the strength is held at
    ``lambda0`` while the smoother still sees every ratio.
    """
    if state.algo != "matched":
        raise UsageError("matched_step needs a matched schedule")
    if not observed_loss > 0:
        raise NonpositiveLossError(
            f"matched annealing needs a strictly positive loss, got {observed_loss} "
            f"at epoch {state.epoch}; shift the loss or pick another schedule"
        )
    if state.L0 is None:
        state.L0 = float(observed_loss)
    smoothed = state.smoother(observed_loss / state.L0)
    if state.epoch <= state.warmup:
        lam = state.lambda0
    else:
        lam = state.lambda0 * smoothed
    return _advance(state, lam)


def cosine_value(lambda0: float, i: int, T: int, normalized: bool = False) -> float:
    # phase from i mod T keeps lam_{i+T} == lam_i bit for bit
    c = math.cos(2 * math.pi * (i % T) / T)
    return lambda0 * (1 + c) / 2 if normalized else lambda0 * (1 + c)


def cosine_step(state: ScheduleState) -> tuple[ScheduleState, float]:
    if state.algo != "cosine":
        raise UsageError("cosine_step needs a cosine schedule")
    return _advance(state, cosine_value(state.lambda0, state.epoch, state.T, state.normalized_cosine))


def fixed_step(state: ScheduleState) -> tuple[ScheduleState, float]:
    return _advance(state, state.lambda0)


def schedule_step(state: ScheduleState) -> tuple[ScheduleState, float]:
    """Advance a two-step state along its lambda schedule."""
    if state.algo != "two-step":
        raise UsageError("schedule_step needs a two-step schedule")
    return _advance(state, state.lambda_schedule(state.epoch))


def two_step_sizes(state: ScheduleState, eta: float) -> tuple[float, float]:
    """E-step and M-step sizes for the current epoch.

    The M-step uses ``|lam_i - lam_{i-1}| * eta``; with ``signed_m_step`` the
    raw difference is used, which turns into an ascent step when the schedule
    decays.
    """
    if state.algo != "two-step":
        raise UsageError("two_step_sizes needs a two-step schedule")
    diff = state.current_lambda - state.previous_lambda
    m = diff * eta if state.signed_m_step else abs(diff) * eta
    return eta, m


def power_law_lr(eps0: float, t: int, eta_exp: float = 0.5) -> float:
    if t < 0:
        raise UsageError("t must be nonnegative")
    return eps0 / (1 + t) ** eta_exp


def matched_relative_decay(lambda_prev: float, rel_loss_change: float) -> float:
    """Move lambda by the same relative amount as the loss, floored at zero."""
    if not lambda_prev > 0:
        raise UsageError("lambda_prev must be positive")
    return max(0.0, lambda_prev * (1 + rel_loss_change))


def constant_schedule(lam: float) -> Callable[[int], float]:
    return lambda i: lam


def cosine_schedule(lambda0: float, T: int, normalized: bool = False) -> Callable[[int], float]:
    return lambda i: cosine_value(lambda0, i, T, normalized)


def power_law_schedule(lambda0: float, eta_exp: float = 0.5) -> Callable[[int], float]:
    return lambda i: power_law_lr(lambda0, i, eta_exp)


def replay(state: ScheduleState, losses) -> list[float]:
    """Lambda sequence a schedule produces for a recorded loss stream."""
    out = []
    for loss in losses:
        if state.algo == "matched":
            state, lam = matched_step(state, loss)
        elif state.algo == "cosine":
            state, lam = cosine_step(state)
        elif state.algo == "two-step":
            state, lam = schedule_step(state)
        else:
            state, lam = fixed_step(state)
        out.append(lam)
    return out
