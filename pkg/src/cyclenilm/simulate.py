"""Synthetic appliance currents and multi-load scenario corpora.

Each appliance is described by a :class:`LoadSpec`: a steady-state signature
(resistive, phase-controlled, or a sum of odd harmonics), a turn-on transient
envelope and a list of operating levels. A :class:`Schedule` switches loads on,
off, or between levels; :func:`synthesize_scenario` renders the per-load
currents, their superposition plus sensor noise, a clean voltage reference and
per-cycle ground truth.

The default eight-load palette and the seven :func:`table1_schedules` mimic a
residential test bed: space heater, range, refrigerator, CFL bank, heat-pump
water heater, dryer, window air conditioner and central air conditioner.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from cyclenilm.errors import BadLevel, LengthMismatch, NilmError, ScheduleOutOfRange
from cyclenilm.waveform import DEFAULT_SAMPLE_RATE, NOMINAL_FREQ, Waveform

LOAD_KINDS = ("resistive", "phase_controlled", "rectifier_cfl", "induction_motor")
ENVELOPES = ("exponential_decay", "inrush_spike")
OFF = -1
VOLTAGE_RMS = 120.0


@dataclass(frozen=True)
class Transient:
    """Turn-on envelope applied to the RMS multiplier after an off-to-on event.

    ``peak`` is the multiplier at the switching instant; it decays
    monotonically to exactly 1 after ``duration_cycles`` nominal cycles.
    """

    duration_cycles: int = 0
    envelope: str = "exponential_decay"
    peak: float = 1.0

    def __post_init__(self) -> None:
        if self.envelope not in ENVELOPES:
            raise NilmError(f"unknown transient envelope {self.envelope!r}")
        if self.duration_cycles < 0 or self.peak < 1.0:
            raise NilmError("transient needs duration_cycles >= 0 and peak >= 1")

    def multiplier(self, cycles_since_on: np.ndarray) -> np.ndarray:
        """Envelope value at the given (fractional) cycle offsets after turn-on."""
        t = np.asarray(cycles_since_on, dtype=np.float64)
        out = np.ones_like(t)
        if self.duration_cycles == 0 or self.peak == 1.0:
            return out
        T = float(self.duration_cycles)
        tau = T / (2.0 if self.envelope == "exponential_decay" else 5.0)
        floor = math.exp(-T / tau)
        active = (t >= 0) & (t < T)
        shape = (np.exp(-t[active] / tau) - floor) / (1.0 - floor)
        out[active] = 1.0 + (self.peak - 1.0) * shape
        return out


@dataclass
class LoadSpec:
    """Steady-state and switching description of one appliance.

    Attributes:
        load_id: 1-based load index.
        kind: One of ``LOAD_KINDS``.
        nominal_rms: RMS current at operating level 0, amperes.
        harmonic_profile: order -> (relative magnitude, phase in radians);
            used by the harmonic kinds. The fundamental has magnitude 1.
        turn_on_transient: Envelope applied after each off-to-on event.
        operating_levels: RMS multipliers, e.g. fan speeds.
        name: Human-readable label.
        phase_offset: Displacement of the fundamental relative to the
            voltage, radians (negative lags).
        firing_angle: Conduction delay of each half cycle for
            ``phase_controlled`` loads, radians.
    """

    load_id: int
    kind: str
    nominal_rms: float
    harmonic_profile: dict[int, tuple[float, float]] = field(
        default_factory=lambda: {1: (1.0, 0.0)})
    turn_on_transient: Transient = field(default_factory=Transient)
    operating_levels: tuple[float, ...] = (1.0,)
    name: str = ""
    phase_offset: float = 0.0
    firing_angle: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in LOAD_KINDS:
            raise NilmError(f"unknown load kind {self.kind!r}")
        if not self.nominal_rms > 0:
            raise NilmError("nominal_rms must be positive")
        if self.load_id < 1:
            raise NilmError("load_id is 1-based")
        profile = {int(k): (float(v[0]), float(v[1])) for k, v in self.harmonic_profile.items()}
        for order, (mag, _) in profile.items():
            if order < 1 or order > 13 or order % 2 == 0:
                raise NilmError(f"harmonic order {order} must be odd and <= 13")
            if not 0.0 <= mag <= 1.0:
                raise NilmError(f"harmonic {order} magnitude {mag} outside [0, 1]")
        if profile.get(1, (0.0, 0.0))[0] != 1.0:
            raise NilmError("fundamental relative magnitude must be 1")
        self.harmonic_profile = profile
        self.operating_levels = tuple(float(v) for v in self.operating_levels)
        if not self.operating_levels or min(self.operating_levels) <= 0:
            raise NilmError("operating levels must be positive")
        if isinstance(self.turn_on_transient, dict):
            self.turn_on_transient = Transient(**self.turn_on_transient)
        if not 0.0 <= self.firing_angle < math.pi:
            raise NilmError("firing angle must lie in [0, pi)")

    def level_rms(self, level: int) -> float:
        if not 0 <= level < len(self.operating_levels):
            raise BadLevel(f"load {self.load_id} has no operating level {level}")
        return self.nominal_rms * self.operating_levels[level]

    def unit_shape(self, theta: np.ndarray) -> np.ndarray:
        """Signature with unit RMS at electrical angle ``theta`` (radians)."""
        phi = theta + self.phase_offset
        if self.kind == "resistive":
            return math.sqrt(2.0) * np.sin(phi)
        if self.kind == "phase_controlled":
            a = self.firing_angle
            conducting = np.mod(phi, math.pi) >= a
            rms = math.sqrt((math.pi - a) / (2 * math.pi) + math.sin(2 * a) / (4 * math.pi))
            return np.where(conducting, np.sin(phi), 0.0) / rms
        out = np.zeros_like(phi)
        for order, (mag, phase) in self.harmonic_profile.items():
            if mag:
                out += mag * np.sin(order * phi + phase)
        power = sum(m * m for m, _ in self.harmonic_profile.values())
        return out / math.sqrt(power / 2.0)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["harmonic_profile"] = {str(k): list(v) for k, v in self.harmonic_profile.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LoadSpec":
        d = dict(d)
        d["harmonic_profile"] = {int(k): tuple(v) for k, v in d.get(
            "harmonic_profile", {1: (1.0, 0.0)}).items()}
        if "turn_on_transient" in d:
            d["turn_on_transient"] = Transient(**d["turn_on_transient"])
        if "operating_levels" in d:
            d["operating_levels"] = tuple(d["operating_levels"])
        return cls(**d)


@dataclass(frozen=True)
class Event:
    time_s: float
    load_id: int
    state: int  # OFF or an operating-level index


@dataclass
class Schedule:
    """Time-ordered switching events; every load starts OFF."""

    events: list[Event] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.events = [e if isinstance(e, Event) else Event(*e) for e in self.events]
        times = [e.time_s for e in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise NilmError("schedule events must be time-ordered")

    def for_load(self, load_id: int) -> list[Event]:
        return [e for e in self.events if e.load_id == load_id]

    def to_list(self) -> list[list]:
        return [[e.time_s, e.load_id, e.state] for e in self.events]


@dataclass
class GroundTruth:
    """Per-cycle labels on the nominal cycle grid (cycle k spans [k/f, (k+1)/f))."""

    states: np.ndarray  # (n_cycles, n_loads) uint8
    rms: np.ndarray     # (n_cycles, n_loads) amperes

    @property
    def n_cycles(self) -> int:
        return self.states.shape[0]


@dataclass
class ScenarioCorpus:
    i_tot: Waveform
    per_load: list[Waveform]
    ground_truth: GroundTruth
    dataset_id: int = 0
    voltage: Waveform | None = None
    load_ids: tuple[int, ...] = ()

    @property
    def n_loads(self) -> int:
        return len(self.per_load)


def make_load_signature(spec: LoadSpec, level: int = 0, phase_offset: float = 0.0,
                        n_cycles: int = 1, sample_rate: float = DEFAULT_SAMPLE_RATE,
                        nominal_freq: float = NOMINAL_FREQ) -> Waveform:
    """Steady-state current of one load over ``n_cycles`` nominal cycles.

    ``phase_offset`` shifts the signature in time (radians of the
    fundamental) on top of the load's own displacement.
    """
    target = spec.level_rms(level)
    n = int(round(n_cycles * sample_rate / nominal_freq))
    theta = 2 * math.pi * nominal_freq * np.arange(n) / sample_rate + phase_offset
    return Waveform(target * spec.unit_shape(theta), sample_rate, "current")


def superimpose(currents: Sequence[Waveform]) -> Waveform:
    """Pointwise sum, accumulated right to left: ``w1 + (w2 + (... + wn))``."""
    if not currents:
        raise LengthMismatch("nothing to superimpose")
    first = currents[0]
    for w in currents[1:]:
        if len(w) != len(first) or w.sample_rate != first.sample_rate:
            raise LengthMismatch("waveforms differ in length or sample rate")
    acc = currents[-1].samples.copy()
    for w in reversed(currents[:-1]):
        acc = w.samples + acc
    return Waveform(acc, first.sample_rate, "current")


def _cycle_bounds(n_cycles: int, sample_rate: float, nominal_freq: float) -> np.ndarray:
    period = sample_rate / nominal_freq
    return np.ceil(np.arange(n_cycles + 1) * period - 1e-9).astype(np.int64)


def _ou_path(n_points: int, step: float, std: float, tau: float,
             rng: np.random.Generator) -> np.ndarray:
    """Stationary Ornstein-Uhlenbeck samples at spacing ``step`` seconds."""
    if std == 0.0:
        return np.zeros(n_points)
    a = math.exp(-step / tau)
    noise = rng.standard_normal(n_points) * std * math.sqrt(1 - a * a)
    out = np.empty(n_points)
    out[0] = rng.standard_normal() * std
    for k in range(1, n_points):
        out[k] = a * out[k - 1] + noise[k]
    return out


def synthesize_scenario(specs: Sequence[LoadSpec], schedule: Schedule, duration_s: float,
                        sample_rate: float = DEFAULT_SAMPLE_RATE, noise_rms: float = 0.0,
                        seed: int = 0, *, nominal_freq: float = NOMINAL_FREQ,
                        drift_std: float = 0.0, drift_tau: float = 2.0,
                        snap_to_cycle: bool = True, dataset_id: int = 0) -> ScenarioCorpus:
    """Render per-load currents, their sum and per-cycle ground truth.

    Args:
        specs: Loads in the scenario, ordered as they appear in the output.
        schedule: Switching events; loads not mentioned stay off.
        duration_s: Length of the rendered trace.
        sample_rate: Samples per second.
        noise_rms: Standard deviation of white noise added to ``i_tot`` only.
        seed: Seeds drift and noise; identical seeds give identical corpora.
        drift_std: Standard deviation of the slow relative amplitude wander
            applied to every load (0 disables it).
        drift_tau: Correlation time of the wander, seconds.
        snap_to_cycle: Move each event to the next cycle boundary, as a
            zero-cross switching relay would. When false, cycles straddling an
            event are labelled ON if the load is on for more than half of it.
        dataset_id: Identifier copied into the corpus.

    Raises:
        ScheduleOutOfRange: An event is outside ``[0, duration_s]`` or names a
            load that is not in ``specs``.
    """
    ids = [s.load_id for s in specs]
    if len(set(ids)) != len(ids):
        raise NilmError("duplicate load ids in palette")
    for e in schedule.events:
        if e.load_id not in ids:
            raise ScheduleOutOfRange(f"event for unknown load {e.load_id}")
        if not 0.0 <= e.time_s <= duration_s:
            raise ScheduleOutOfRange(f"event at {e.time_s} s outside [0, {duration_s}]")
    n = int(round(duration_s * sample_rate))
    period = sample_rate / nominal_freq
    n_cycles = int(math.floor(duration_s * nominal_freq + 1e-9))
    bounds = _cycle_bounds(n_cycles, sample_rate, nominal_freq)
    theta = 2 * math.pi * nominal_freq * np.arange(n) / sample_rate
    rng = np.random.default_rng(seed)
    drift_rngs = rng.spawn(len(specs))
    noise_rng = rng.spawn(1)[0]

    per_load = []
    states = np.zeros((n_cycles, len(specs)), dtype=np.uint8)
    for j, spec in enumerate(specs):
        for e in schedule.for_load(spec.load_id):
            if e.state != OFF:
                spec.level_rms(e.state)
        level = np.full(n, OFF, dtype=np.int64)
        switch_on = []
        prev_state = OFF
        events = schedule.for_load(spec.load_id)
        for k, e in enumerate(events):
            start = e.time_s * sample_rate
            if snap_to_cycle:
                start = math.ceil(round(e.time_s * nominal_freq, 9)) * period
            s0 = min(n, int(math.ceil(start - 1e-9)))
            level[s0:] = e.state
            if prev_state == OFF and e.state != OFF:
                switch_on.append(start)
            prev_state = e.state
        on = level != OFF
        current = np.zeros(n)
        if on.any():
            levels = np.asarray(spec.operating_levels)
            scale = np.where(on, spec.nominal_rms * levels[np.clip(level, 0, None)], 0.0)
            env = np.ones(n)
            tr = spec.turn_on_transient
            span = int(math.ceil(tr.duration_cycles * period)) + 1
            for start in switch_on:
                s0 = int(math.ceil(start - 1e-9))
                idx = np.arange(s0, min(n, s0 + span))
                env[idx] = tr.multiplier((idx - start) / period)
            drift = _ou_path(n_cycles + 2, 1.0 / nominal_freq, drift_std, drift_tau,
                             drift_rngs[j])
            if drift_std:
                t_knots = np.arange(n_cycles + 2) * period
                env = env * (1.0 + np.interp(np.arange(n), t_knots, drift))
            current = np.where(on, scale * env * spec.unit_shape(theta), 0.0)
        per_load.append(Waveform(current, sample_rate, "current"))
        frac_on = np.add.reduceat(on.astype(np.float64), bounds[:-1])[:n_cycles]
        frac_on = frac_on / np.diff(bounds)
        states[:, j] = frac_on > 0.5

    clean = superimpose(per_load)
    noisy = clean.samples
    if noise_rms > 0:
        noisy = clean.samples + noise_rng.normal(0.0, noise_rms, n)
    rms = np.empty((n_cycles, len(specs)))
    for j, w in enumerate(per_load):
        sq = np.add.reduceat(w.samples ** 2, bounds[:-1])[:n_cycles]
        rms[:, j] = np.sqrt(sq / np.diff(bounds))
    voltage = Waveform(math.sqrt(2) * VOLTAGE_RMS * np.sin(theta), sample_rate, "voltage")
    return ScenarioCorpus(
        i_tot=Waveform(noisy, sample_rate, "current"),
        per_load=per_load,
        ground_truth=GroundTruth(states, rms),
        dataset_id=dataset_id,
        voltage=voltage,
        load_ids=tuple(ids),
    )


# -- default palette -------------------------------------------------------

CFL_PROFILE = {1: (1.0, 0.0), 3: (0.48, 2.87), 5: (0.36, -1.54), 7: (0.39, 1.47),
               9: (0.19, -1.36), 11: (0.03, 2.93), 13: (0.03, 2.02)}


def default_palette() -> list[LoadSpec]:
    """Eight appliances loosely following a residential laboratory test bed."""
    return [
        LoadSpec(1, "resistive", 12.0, operating_levels=(1.0, 0.6), name="space_heater"),
        LoadSpec(2, "resistive", 9.0, operating_levels=(1.0, 0.65, 0.35), name="range"),
        LoadSpec(3, "induction_motor", 1.8,
                 harmonic_profile={1: (1.0, 0.0), 3: (0.12, 0.4), 5: (0.05, -0.8)},
                 turn_on_transient=Transient(10, "inrush_spike", 4.0),
                 operating_levels=(1.0, 1.25), name="refrigerator", phase_offset=-0.6),
        LoadSpec(4, "rectifier_cfl", 1.4, harmonic_profile=CFL_PROFILE,
                 turn_on_transient=Transient(15, "exponential_decay", 1.8),
                 name="cfl_bank"),
        LoadSpec(5, "induction_motor", 4.0,
                 harmonic_profile={1: (1.0, 0.0), 3: (0.08, 1.0), 5: (0.04, 0.3)},
                 turn_on_transient=Transient(8, "inrush_spike", 3.5),
                 name="water_heater", phase_offset=-0.45),
        LoadSpec(6, "phase_controlled", 10.0, operating_levels=(1.0, 0.2),
                 name="dryer", firing_angle=0.6),
        LoadSpec(7, "induction_motor", 5.5,
                 harmonic_profile={1: (1.0, 0.0), 3: (0.10, -0.5), 5: (0.06, 0.9),
                                   7: (0.03, 0.2)},
                 turn_on_transient=Transient(12, "inrush_spike", 3.0),
                 operating_levels=(1.0, 0.88, 0.76), name="window_ac", phase_offset=-0.5),
        LoadSpec(8, "induction_motor", 13.0,
                 harmonic_profile={1: (1.0, 0.0), 3: (0.06, 2.0), 5: (0.03, -1.2),
                                   7: (0.015, 0.5)},
                 turn_on_transient=Transient(15, "inrush_spike", 4.5),
                 name="central_ac", phase_offset=-0.4),
    ]


def full_scale_rms(specs: Sequence[LoadSpec], sample_rate: float = DEFAULT_SAMPLE_RATE,
                   nominal_freq: float = NOMINAL_FREQ) -> float:
    """RMS of one steady cycle with every load on at level 0."""
    total = superimpose([make_load_signature(s, 0, 0.0, 1, sample_rate, nominal_freq)
                         for s in specs])
    return float(np.sqrt(np.mean(total.samples ** 2)))


# -- schedules -------------------------------------------------------------

def _toggle_events(load_id: int, duration: float, rng: np.random.Generator,
                   levels: Sequence[int], start_on: bool, mean_dwell: float,
                   min_dwell: float = 0.5) -> list[Event]:
    events = []
    t = 0.0
    on = start_on
    while t < duration:
        state = int(rng.choice(levels)) if on else OFF
        events.append(Event(round(t, 6), load_id, state))
        t += max(min_dwell, rng.exponential(mean_dwell))
        on = not on
    return events


def _level_changes(load_id: int, duration: float, rng: np.random.Generator,
                   levels: Sequence[int], mean_dwell: float) -> list[Event]:
    events = [Event(0.0, load_id, int(levels[0]))]
    t = max(0.5, rng.exponential(mean_dwell))
    while t < duration:
        events.append(Event(round(t, 6), load_id, int(rng.choice(levels))))
        t += max(0.5, rng.exponential(mean_dwell))
    return events


def _merge(groups: list[list[Event]]) -> Schedule:
    events = [e for g in groups for e in g]
    events.sort(key=lambda e: (e.time_s, e.load_id))
    return Schedule(events)


def table1_schedules(duration_s: float, seed: int = 0, mean_dwell: float = 2.5
                     ) -> list[Schedule]:
    """Seven schedules for the default palette mirroring the lab protocol.

    1. all on, water heater cycling; 2. all on with refrigerator-door and
    window-AC fan-speed perturbations; 3. loads 5-8 on (water heater cycling),
    random combinations of loads 1-4; 4. loads 1-4 on, random combinations of
    loads 5, 7, 8, dryer finishing mid-test; 5-7. every load random.
    """
    rng = np.random.default_rng(seed)
    d = duration_s
    base = {1: [0, 1], 2: [0, 1, 2], 3: [0], 4: [0], 5: [0], 6: [0], 7: [0], 8: [0]}

    def steady(i: int, level: int = 0) -> list[Event]:
        return [Event(0.0, i, level)]

    def cycling(i: int) -> list[Event]:
        return _toggle_events(i, d, rng, base[i], bool(rng.integers(2)), mean_dwell * 1.5)

    def random_load(i: int) -> list[Event]:
        return _toggle_events(i, d, rng, base[i], bool(rng.integers(2)), mean_dwell)

    schedules = []
    schedules.append(_merge([steady(i, int(rng.choice(base[i]))) for i in (1, 2, 3, 4, 6, 7, 8)]
                            + [cycling(5)]))
    schedules.append(_merge(
        [steady(i, int(rng.choice(base[i]))) for i in (1, 2, 4, 5, 6, 8)]
        + [_level_changes(3, d, rng, [0, 1], mean_dwell),
           _level_changes(7, d, rng, [0, 1, 2], mean_dwell)]))
    schedules.append(_merge([random_load(i) for i in (1, 2, 3, 4)]
                            + [steady(i) for i in (6, 7, 8)] + [cycling(5)]))
    dryer_done = round(d * rng.uniform(0.4, 0.6), 6)
    schedules.append(_merge(
        [steady(i, int(rng.choice(base[i]))) for i in (1, 2, 3, 4)]
        + [random_load(i) for i in (5, 7, 8)]
        + [[Event(0.0, 6, 0), Event(round(dryer_done * 0.8, 6), 6, 1),
            Event(dryer_done, 6, OFF)]]))
    for _ in range(3):
        schedules.append(_merge([random_load(i) for i in range(1, 9)]))
    return schedules


def restrict_schedule(schedule: Schedule, load_ids: Sequence[int]) -> Schedule:
    keep = set(load_ids)
    return Schedule([e for e in schedule.events if e.load_id in keep])


@dataclass
class CorpusConfig:
    """Settings for the default seven-scenario corpus."""

    duration_s: float = 200.0
    sample_rate: float = DEFAULT_SAMPLE_RATE
    noise_fraction: float = 0.005
    drift_std: float = 0.01
    drift_tau: float = 2.0
    seed: int = 0
    n_loads: int = 8


def iter_default_corpus(cfg: CorpusConfig = CorpusConfig()) -> Iterator[ScenarioCorpus]:
    """Generate the seven scenarios one at a time (ids 1..7) to bound memory.

    With ``n_loads`` < 8 the palette and schedules are restricted to the
    first ``n_loads`` loads (nested palettes).
    """
    palette = default_palette()[:cfg.n_loads]
    schedules = table1_schedules(cfg.duration_s, cfg.seed)
    noise = cfg.noise_fraction * full_scale_rms(default_palette(), cfg.sample_rate)
    for k, sched in enumerate(schedules, start=1):
        sched = restrict_schedule(sched, [s.load_id for s in palette])
        yield synthesize_scenario(palette, sched, cfg.duration_s, cfg.sample_rate,
                                  noise, seed=cfg.seed * 1000 + k,
                                  drift_std=cfg.drift_std, drift_tau=cfg.drift_tau,
                                  dataset_id=k)


# -- files -----------------------------------------------------------------

def save_palette(path: str | Path, specs: Sequence[LoadSpec]) -> None:
    Path(path).write_text(json.dumps([s.to_dict() for s in specs], indent=2))


def load_palette(path: str | Path) -> list[LoadSpec]:
    return [LoadSpec.from_dict(d) for d in json.loads(Path(path).read_text())]


def save_schedule(path: str | Path, schedule: Schedule) -> None:
    Path(path).write_text(json.dumps({"events": schedule.to_list()}, indent=1))


def load_schedule(path: str | Path) -> Schedule:
    data = json.loads(Path(path).read_text())
    return Schedule([Event(float(t), int(i), int(s)) for t, i, s in data["events"]])


def write_corpus(out_dir: str | Path, corpus: ScenarioCorpus) -> Path:
    """Write waveform files and ``ground_truth.csv`` into ``out_dir``."""
    from cyclenilm.wavefile import write_waveform

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_waveform(out / "i_tot.cswf", corpus.i_tot)
    if corpus.voltage is not None:
        write_waveform(out / "voltage.cswf", corpus.voltage)
    for load_id, w in zip(corpus.load_ids, corpus.per_load):
        write_waveform(out / f"load_{load_id}.cswf", w)
    gt = corpus.ground_truth
    n = len(corpus.load_ids)
    header = ["cycle_index"] + [f"q_{i}" for i in corpus.load_ids] + \
             [f"rms_{i}" for i in corpus.load_ids]
    with open(out / "ground_truth.csv", "w") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(gt.n_cycles):
            row = [str(k)] + [str(int(q)) for q in gt.states[k]] + \
                  [f"{r:.9g}" for r in gt.rms[k, :n]]
            fh.write(",".join(row) + "\n")
    (out / "meta.json").write_text(json.dumps(
        {"dataset_id": corpus.dataset_id, "load_ids": list(corpus.load_ids)}))
    return out


def read_corpus(path: str | Path) -> ScenarioCorpus:
    from cyclenilm.wavefile import read_waveform

    src = Path(path)
    meta = json.loads((src / "meta.json").read_text())
    ids = tuple(meta["load_ids"])
    table = np.loadtxt(src / "ground_truth.csv", delimiter=",", skiprows=1, ndmin=2)
    n = len(ids)
    voltage = read_waveform(src / "voltage.cswf") if (src / "voltage.cswf").exists() else None
    return ScenarioCorpus(
        i_tot=read_waveform(src / "i_tot.cswf"),
        per_load=[read_waveform(src / f"load_{i}.cswf") for i in ids],
        ground_truth=GroundTruth(table[:, 1:1 + n].astype(np.uint8), table[:, 1 + n:1 + 2 * n]),
        dataset_id=int(meta["dataset_id"]),
        voltage=voltage,
        load_ids=ids,
    )
