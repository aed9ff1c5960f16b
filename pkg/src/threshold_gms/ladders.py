"""Record ladders of the two marked Poisson streams.

The running maximum of birth fitnesses climbs a ladder of record values;
extinction marks landing above the current record are the events that
wipe the whole population.  Looking backward in time from a fixed
instant, threshold marks climb an analogous ladder, and the species
alive in the long-run configuration are exactly the births that beat
every later threshold record.  Both ladders are sampled directly from
their marked-Poisson laws: a first record drawn from the mark law, then
each next record drawn conditionally above the last, with the waiting
gap exponential at rate (event rate) * (mark survival at the record).

Ladders are infinite objects; a StopRule truncates them once the
remaining mass is provably or heuristically negligible, and regimes
where the mass diverges are reported through an "effectively infinite"
sentinel rather than a silently truncated number.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .distributions import (
    SURVIVAL_FLOOR,
    DistributionSpec,
    Exponential,
    ModelParams,
    SurvivalUnderflowError,
)

EFFECTIVELY_INFINITE = math.inf

STOP_MAX_STEPS = "max_steps"
STOP_TAIL_BOUND = "tail_bound"
STOP_QUIET = "quiet"
STOP_UNDERFLOW = "underflow"
STOP_OVERFLOW = "overflow"
STOP_WINDOW = "window"


class LadderError(ValueError):
    """Invalid ladder structure or sampler arguments."""


@dataclass(frozen=True)
class StopRule:
    """Truncation policy for ladder generation.

    Generation stops at step k when k reaches max_steps, when an analytic
    bound on the expected remaining mass (available for exponential
    pairs) falls below tail_tolerance, or when the last quiet_window
    per-step masses are each below tail_tolerance / quiet_window.
    divergence_window is the look-back length used to flag mass growth
    at truncation.
    """

    max_steps: int = 10_000
    tail_tolerance: float = 1e-9
    quiet_window: int = 20
    divergence_window: int = 100

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise LadderError("max_steps must be at least 1")
        if not 0.0 < self.tail_tolerance < math.inf:
            raise LadderError("tail_tolerance must be positive and finite")
        if self.quiet_window < 1 or self.divergence_window < 4:
            raise LadderError("quiet_window >= 1 and divergence_window >= 4 required")

    def to_json(self) -> dict:
        return {
            "max_steps": self.max_steps,
            "tail_tolerance": self.tail_tolerance,
            "quiet_window": self.quiet_window,
            "divergence_window": self.divergence_window,
        }


@dataclass(frozen=True)
class LadderStep:
    """One record value together with the waiting gap spent at it."""

    value: float
    gap: float


def _check_steps(steps: Sequence[LadderStep]) -> tuple[LadderStep, ...]:
    steps = tuple(steps)
    prev = -math.inf
    for step in steps:
        if not isinstance(step, LadderStep):
            raise LadderError("steps must be LadderStep instances")
        if not step.value > prev:
            raise LadderError(
                f"record values must be strictly increasing; got {step.value} after {prev}"
            )
        if step.gap < 0.0 or math.isnan(step.gap):
            raise LadderError(f"gaps must be non-negative, got {step.gap}")
        prev = step.value
    return steps


@dataclass(frozen=True)
class FitnessLadder:
    """Forward fitness-record ladder with truncation diagnostics.

    tail_bound is the expected mass remaining past the truncation point
    when an analytic bound exists, None otherwise ("unknown").
    """

    steps: tuple[LadderStep, ...]
    truncated_at: int
    tail_bound: Optional[float]
    stop_reason: str = STOP_MAX_STEPS

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", _check_steps(self.steps))
        if self.truncated_at != len(self.steps):
            raise LadderError("truncated_at must equal the number of generated steps")


@dataclass(frozen=True)
class ThresholdLadder:
    """Backward threshold-record ladder.

    first_gap is the look-back time from the reference instant to the
    most recent extinction, i.e. the time width of the unrestricted
    band below the first record.
    """

    steps: tuple[LadderStep, ...]
    first_gap: float
    truncated_at: int
    tail_bound: Optional[float]
    stop_reason: str = STOP_MAX_STEPS

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", _check_steps(self.steps))
        if not self.first_gap > 0.0 or math.isinf(self.first_gap):
            raise LadderError(f"first_gap must be positive and finite, got {self.first_gap}")
        if self.truncated_at != len(self.steps):
            raise LadderError("truncated_at must equal the number of generated steps")


@dataclass(frozen=True)
class LadderMass:
    """Total opposing-stream mass over a ladder, with per-step terms."""

    value: float
    per_step: tuple[float, ...]
    truncation_tail: Optional[float]


@dataclass(frozen=True)
class LimitConfigSample:
    """One draw of the long-run configuration."""

    species: tuple[float, ...]
    n0: int
    n_above: int
    total: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "species", tuple(sorted(self.species)))
        if self.total != self.n0 + self.n_above or self.total != len(self.species):
            raise LadderError("total must equal n0 + n_above and the species count")

    def to_json(self) -> dict:
        return {"n0": self.n0, "n_above": self.n_above, "total": self.total}


def _exponential_tail_bound(
    mark_dist: DistributionSpec,
    opp_dist: DistributionSpec,
    mark_rate: float,
    opp_rate: float,
) -> Optional[Callable[[float], float]]:
    """Expected remaining mass past a record, for an exponential pair.

    Past a record at level x the future records sit at x plus a sum of
    exponential increments, so the expected remaining mass telescopes to
    a geometric series: (opp_rate/mark_rate) * exp(-(b-a)x) * a/(b-a)
    with a the mark rate parameter and b the opposing one.  Only
    meaningful when b > a (otherwise the series diverges).
    """
    if not (isinstance(mark_dist, Exponential) and isinstance(opp_dist, Exponential)):
        return None
    a, b = mark_dist.rate, opp_dist.rate
    if b <= a:
        return None
    delta = b - a
    coef = (opp_rate / mark_rate) * (a / delta)

    def bound(level: float) -> float:
        return coef * math.exp(-delta * level)

    return bound


def _sample_ladder_core(
    mark_dist: DistributionSpec,
    mark_rate: float,
    opp_dist: DistributionSpec,
    opp_rate: float,
    stop: StopRule,
    rng: np.random.Generator,
) -> tuple[list[LadderStep], Optional[float], str]:
    """Shared record-ladder sampler for both mark roles."""
    tail_fn = _exponential_tail_bound(mark_dist, opp_dist, mark_rate, opp_rate)
    quiet_cap = stop.tail_tolerance / stop.quiet_window
    steps: list[LadderStep] = []
    tail: Optional[float] = None
    quiet = 0
    level = mark_dist.sample(rng)
    while True:
        s = mark_dist.survival(level)
        if s < SURVIVAL_FLOOR:
            return steps, tail, STOP_UNDERFLOW
        gap = float(rng.exponential(1.0 / (mark_rate * s)))
        while gap <= 0.0:
            gap = float(rng.exponential(1.0 / (mark_rate * s)))
        steps.append(LadderStep(value=level, gap=gap))
        mass = opp_rate * gap * opp_dist.survival(level)
        if not math.isfinite(mass):
            return steps, None, STOP_OVERFLOW
        if tail_fn is not None:
            tail = tail_fn(level)
            if tail < stop.tail_tolerance:
                return steps, tail, STOP_TAIL_BOUND
        quiet = quiet + 1 if mass < quiet_cap else 0
        if quiet >= stop.quiet_window:
            return steps, tail, STOP_QUIET
        if len(steps) >= stop.max_steps:
            return steps, tail, STOP_MAX_STEPS
        try:
            level = mark_dist.sample_conditional_above(level, rng)
        except SurvivalUnderflowError:
            return steps, tail, STOP_UNDERFLOW


def sample_fitness_ladder(
    params: ModelParams, stop: StopRule, rng: np.random.Generator
) -> FitnessLadder:
    """Draw the forward fitness-record ladder.

    First record from the fitness law; each next record conditioned
    above the last; each gap exponential at rate
    lambda_birth * fitness survival at the record.
    """
    steps, tail, reason = _sample_ladder_core(
        params.fitness_dist,
        params.lambda_birth,
        params.threshold_dist,
        params.lambda_extinct,
        stop,
        rng,
    )
    return FitnessLadder(
        steps=tuple(steps), truncated_at=len(steps), tail_bound=tail, stop_reason=reason
    )


def sample_threshold_ladder(
    params: ModelParams, stop: StopRule, rng: np.random.Generator
) -> ThresholdLadder:
    """Draw the backward threshold-record ladder.

    The look-back gap to the most recent extinction is exponential at
    the extinction rate; records then mirror the fitness ladder with the
    roles of the two streams exchanged.
    """
    first_gap = float(rng.exponential(1.0 / params.lambda_extinct))
    while first_gap <= 0.0:
        first_gap = float(rng.exponential(1.0 / params.lambda_extinct))
    steps, tail, reason = _sample_ladder_core(
        params.threshold_dist,
        params.lambda_extinct,
        params.fitness_dist,
        params.lambda_birth,
        stop,
        rng,
    )
    return ThresholdLadder(
        steps=tuple(steps),
        first_gap=first_gap,
        truncated_at=len(steps),
        tail_bound=tail,
        stop_reason=reason,
    )


def extinction_mass(ladder: FitnessLadder, params: ModelParams) -> LadderMass:
    """Extinction-stream mass above the fitness ladder.

    per_step[k] = lambda_extinct * gap_k * threshold survival at
    record k; the total uses exact compensated summation.
    """
    rate = params.lambda_extinct
    surv = params.threshold_dist.survival
    per_step = tuple(rate * step.gap * surv(step.value) for step in ladder.steps)
    return LadderMass(
        value=math.fsum(per_step), per_step=per_step, truncation_tail=ladder.tail_bound
    )


def birth_mass(ladder: ThresholdLadder, params: ModelParams) -> LadderMass:
    """Birth-stream mass over the threshold ladder, band by band.

    per_step[0] = lambda_birth * first_gap is the unrestricted band
    below the first record; per_step[k] for k >= 1 applies the fitness
    survival at record k-1.
    """
    rate = params.lambda_birth
    surv = params.fitness_dist.survival
    per_step = [rate * ladder.first_gap]
    per_step.extend(rate * step.gap * surv(step.value) for step in ladder.steps)
    per_step = tuple(per_step)
    return LadderMass(
        value=math.fsum(per_step), per_step=per_step, truncation_tail=ladder.tail_bound
    )


def masses_effectively_infinite(
    per_step: Sequence[float], stop_reason: str, stop: StopRule = StopRule()
) -> bool:
    """Decide whether a truncated mass series is diverging.

    A ladder that stopped because its mass died out (tail bound or quiet
    run) is never flagged.  Otherwise the per-step masses over the
    trailing divergence window are split in half and the series is
    flagged when the recent half-sum has not decreased; raw step masses
    are noisy, so the block comparison stands in for a per-step
    monotonicity test.
    """
    if stop_reason in (STOP_TAIL_BOUND, STOP_QUIET, STOP_WINDOW):
        return False
    if any(not math.isfinite(m) for m in per_step):
        return True
    half = min(stop.divergence_window, len(per_step)) // 2
    if half < 2:
        return False
    recent = math.fsum(per_step[-half:])
    earlier = math.fsum(per_step[-2 * half : -half])
    return recent >= earlier


def sample_extinction_count(
    ladder: FitnessLadder,
    params: ModelParams,
    rng: np.random.Generator,
    mode: str = "per_step",
    stop: StopRule = StopRule(),
) -> Union[int, float]:
    """Number of extinction marks landing above the fitness ladder.

    Conditionally on the ladder the count is Poisson with mean equal to
    the ladder's extinction mass; "per_step" draws one Poisson count per
    step, "total" draws a single Poisson from the summed mass.  Returns
    EFFECTIVELY_INFINITE when the truncated mass series is diverging.
    """
    mass = extinction_mass(ladder, params)
    if masses_effectively_infinite(mass.per_step, ladder.stop_reason, stop):
        return EFFECTIVELY_INFINITE
    if mode == "per_step":
        if not mass.per_step:
            return 0
        return int(rng.poisson(np.asarray(mass.per_step)).sum())
    if mode == "total":
        return int(rng.poisson(mass.value))
    raise LadderError(f"unknown mode {mode!r}; expected 'per_step' or 'total'")


def count_extinctions_above_records(stream) -> tuple[int, FitnessLadder]:
    """Window-restricted oracle for the ladder extinction count.

    Scans the stream's births for running-maximum records, forms the
    step regions (record time to next record time, clipped at the
    horizon) x [record value, inf), and counts extinction points inside
    them.  Threshold marks equal to the record value count as inside.
    """
    from bisect import bisect_right

    record_times: list[float] = []
    record_values: list[float] = []
    best = -math.inf
    for ev in stream.events:
        if ev.kind == "birth" and ev.mark > best:
            best = ev.mark
            record_times.append(ev.time)
            record_values.append(ev.mark)
    steps = []
    for i, (t, x) in enumerate(zip(record_times, record_values)):
        t_next = record_times[i + 1] if i + 1 < len(record_times) else stream.horizon
        steps.append(LadderStep(value=x, gap=t_next - t))
    ladder = FitnessLadder(
        steps=tuple(steps),
        truncated_at=len(steps),
        tail_bound=None,
        stop_reason=STOP_WINDOW,
    )
    count = 0
    for ev in stream.events:
        if ev.kind != "extinction" or not record_times or ev.time < record_times[0]:
            continue
        k = bisect_right(record_times, ev.time) - 1
        if ev.mark >= record_values[k]:
            count += 1
    return count, ladder


def populate_limit_config(
    ladder: ThresholdLadder, params: ModelParams, rng: np.random.Generator
) -> LimitConfigSample:
    """Fill the bands of a threshold ladder with Poisson species counts.

    The band below the first record carries unrestricted fitness draws;
    band k carries draws conditioned above record k.
    """
    lam = params.lambda_birth
    fit = params.fitness_dist
    means = [lam * ladder.first_gap]
    means.extend(lam * step.gap * fit.survival(step.value) for step in ladder.steps)
    counts = rng.poisson(np.asarray(means))
    n0 = int(counts[0])
    species = [fit.sample(rng) for _ in range(n0)]
    n_above = 0
    for step, raw in zip(ladder.steps, counts[1:]):
        c = int(raw)
        n_above += c
        for _ in range(c):
            species.append(fit.sample_conditional_above(step.value, rng))
    return LimitConfigSample(
        species=tuple(species), n0=n0, n_above=n_above, total=n0 + n_above
    )


def sample_limit_config(
    params: ModelParams, stop: StopRule, rng: np.random.Generator
) -> Union[LimitConfigSample, float]:
    """One draw of the long-run configuration.

    Returns EFFECTIVELY_INFINITE when the birth mass over the sampled
    ladder is diverging (infinite limit-count regime).
    """
    ladder = sample_threshold_ladder(params, stop, rng)
    mass = birth_mass(ladder, params)
    if masses_effectively_infinite(mass.per_step[1:], ladder.stop_reason, stop):
        return EFFECTIVELY_INFINITE
    return populate_limit_config(ladder, params, rng)


def write_ladder_csv(ladder, mass: LadderMass, path) -> None:
    """Ladder steps as CSV columns (k, record_value, gap, per_step_mass).

    For a threshold ladder the band-0 mass is skipped so that row k
    always pairs record k with its own mass term.
    """
    per_step = mass.per_step
    if isinstance(ladder, ThresholdLadder) and len(per_step) == len(ladder.steps) + 1:
        per_step = per_step[1:]
    if len(per_step) != len(ladder.steps):
        raise LadderError("mass terms do not match ladder steps")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "record_value", "gap", "per_step_mass"])
        for k, (step, m) in enumerate(zip(ladder.steps, per_step), start=1):
            writer.writerow([k, repr(step.value), repr(step.gap), repr(m)])


def write_limit_sample_files(
    samples: Sequence[Union[LimitConfigSample, float]],
    counts_path,
    species_path,
    summary_path,
    *,
    extra_summary: Optional[dict] = None,
) -> None:
    """Replicated limit-configuration draws as counts CSV + species CSV + JSON."""
    finite = [s for s in samples if isinstance(s, LimitConfigSample)]
    sentinel_count = len(samples) - len(finite)
    with open(counts_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rep", "n0", "n_above", "total"])
        for i, s in enumerate(samples):
            if isinstance(s, LimitConfigSample):
                writer.writerow([i, s.n0, s.n_above, s.total])
            else:
                writer.writerow([i, "", "", "inf"])
    with open(species_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["rep", "fitness"])
        for i, s in enumerate(samples):
            if isinstance(s, LimitConfigSample):
                for x in s.species:
                    writer.writerow([i, repr(x)])
    totals = [s.total for s in finite]
    summary = {
        "replications": len(samples),
        "sentinel_count": sentinel_count,
        "sentinel_fraction": sentinel_count / len(samples) if samples else 0.0,
        "mean_total": float(np.mean(totals)) if totals else None,
        "mean_n0": float(np.mean([s.n0 for s in finite])) if finite else None,
        "mean_n_above": float(np.mean([s.n_above for s in finite])) if finite else None,
    }
    if extra_summary:
        summary.update(extra_summary)
    with open(summary_path, "w") as handle:
        json.dump(summary, handle, indent=2, sort_keys=True)
        handle.write("\n")
