"""Signal front end and closed-loop stimulation on an exact timeline.

The front end decimates raw integer samples through a cascaded
integrator-comb filter (modular arithmetic at the Hogenauer register
width, so wraparound is by design and the output is still exact), chops
the decimated stream into segments, stages each epoch by early-stop
voting, and triggers per-channel PWM pulse schedules on configured
classes.

All event times are rational numbers (sample index over rate, decimal
config values read exactly), so logs carry no floating-point drift:
a 10 Hz / 10% duty schedule lands on the 100 ms grid exactly.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO

import numpy as np

from .engine import MpuEngine
from .errors import BadArtifact, CorruptArtifact, LoopConfigError
from .pipeline import VotingConfig, classify_segment, epoch_stage


def exact_seconds(value) -> Fraction:
    """Exact rational reading of a time/frequency value.

    Floats go through their decimal repr, so 0.1 becomes 1/10 rather than
    the binary-float neighbor.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    return Fraction(str(value))


# ---------------------------------------------------------------------------
# CIC decimation


@dataclass(frozen=True)
class CicConfig:
    stages: int = 3
    decimation: int = 8
    diff_delay: int = 1
    input_bits: int = 16

    def __post_init__(self) -> None:
        if self.stages < 1 or self.decimation < 2 or self.diff_delay < 1 or self.input_bits < 1:
            raise ValueError(
                f"bad CIC geometry: stages={self.stages} decimation={self.decimation} "
                f"diff_delay={self.diff_delay} input_bits={self.input_bits}"
            )
        if self.register_bits > 64:
            raise ValueError(
                f"register width {self.register_bits} exceeds the 64-bit software model"
            )

    @property
    def register_bits(self) -> int:
        """input_bits + N*ceil(log2(R*M)): wide enough that wrap never shows."""
        return self.input_bits + self.stages * math.ceil(
            math.log2(self.decimation * self.diff_delay)
        )

    @property
    def dc_gain(self) -> int:
        return (self.decimation * self.diff_delay) ** self.stages


def cic_decimate(x: np.ndarray, cfg: CicConfig) -> np.ndarray:
    """N integrators at input rate, decimate by R, N combs at output rate.

    Registers wrap modulo 2**register_bits; because that width meets the
    worst-case growth bound, the recovered two's-complement output equals
    the infinite-precision moving-average cascade exactly.
    """
    x = np.asarray(x, dtype=np.int64)
    lim = 1 << (cfg.input_bits - 1)
    if x.size and (x.min() < -lim or x.max() >= lim):
        raise ValueError(f"samples exceed {cfg.input_bits}-bit input range")
    # mod-2**64 arithmetic contains mod-2**W for every W <= 64, so wrapping
    # is free until the final mask
    v = x.astype(np.uint64)
    for _ in range(cfg.stages):
        v = np.cumsum(v, dtype=np.uint64)
    v = v[cfg.decimation - 1::cfg.decimation]
    m = cfg.diff_delay
    for _ in range(cfg.stages):
        prev = np.concatenate([np.zeros(min(m, v.size), dtype=np.uint64), v[:-m] if v.size > m else v[:0]])
        v = v - prev
    # sign-extend the low register_bits of each register (exact for any w <= 64)
    w = cfg.register_bits
    return (v << np.uint64(64 - w)).view(np.int64) >> np.int64(64 - w)


# ---------------------------------------------------------------------------
# stimulation schedules


@dataclass(frozen=True)
class StimChannelConfig:
    channel: int = 0
    trigger_classes: tuple[int, ...] = (2,)
    pwm_freq_hz: float = 10.0
    duty: float = 0.1
    duration_s: float = 5.0

    def __post_init__(self) -> None:
        if self.channel not in (0, 1):
            raise ValueError(f"channel must be 0 or 1, got {self.channel}")
        if any(not 0 <= c <= 9 for c in self.trigger_classes):
            raise ValueError(f"trigger classes must be in 0..9: {self.trigger_classes}")
        if not (exact_seconds(self.pwm_freq_hz) > 0 and exact_seconds(self.duration_s) > 0):
            raise ValueError("pwm_freq_hz and duration_s must be positive")
        duty = exact_seconds(self.duty)
        if not 0 < duty <= 1:
            raise ValueError(f"duty must be in (0, 1], got {self.duty}")


@dataclass(frozen=True)
class PulseEvent:
    t_on: Fraction
    t_off: Fraction
    channel: int

    def __post_init__(self) -> None:
        if not self.t_off > self.t_on:
            raise ValueError(f"pulse must have t_off > t_on, got [{self.t_on}, {self.t_off}]")


def trigger_schedule(decision: int, at, cfg: StimChannelConfig) -> list[PulseEvent]:
    """PWM pulse train for one decision, empty if the class does not trigger.

    floor(duration_s * pwm_freq_hz) whole periods starting at ``at``; the
    final partial period is truncated.  duty = 1 degenerates to one
    continuous pulse spanning duration_s.
    """
    if decision not in cfg.trigger_classes:
        return []
    start = exact_seconds(at)
    freq = exact_seconds(cfg.pwm_freq_hz)
    duty = exact_seconds(cfg.duty)
    duration = exact_seconds(cfg.duration_s)
    if duty == 1:
        return [PulseEvent(start, start + duration, cfg.channel)]
    period = 1 / freq
    width = duty * period
    count = math.floor(duration * freq)
    return [
        PulseEvent(start + i * period, start + i * period + width, cfg.channel)
        for i in range(count)
    ]


# ---------------------------------------------------------------------------
# closed loop


@dataclass(frozen=True)
class LoopConfig:
    input_rate_hz: int = 512
    cic: CicConfig = CicConfig()
    segment_samples: int = 320
    votes_per_epoch: int = 6
    stim: tuple[StimChannelConfig, ...] = (StimChannelConfig(),)
    full_scale: float = 1.0  # real value assigned to a full-range decimated sample

    def validate(self, input_len: int) -> None:
        if self.input_rate_hz % self.cic.decimation != 0:
            raise LoopConfigError(
                f"input rate {self.input_rate_hz} not divisible by decimation {self.cic.decimation}"
            )
        if self.segment_samples != input_len:
            raise LoopConfigError(
                f"segment_samples {self.segment_samples} does not match model input {input_len}"
            )
        if self.votes_per_epoch < 1:
            raise LoopConfigError("votes_per_epoch must be >= 1")
        channels = [s.channel for s in self.stim]
        if len(set(channels)) != len(channels):
            raise LoopConfigError(f"duplicate stim channels: {channels}")
        if not self.full_scale > 0:
            raise LoopConfigError("full_scale must be positive")

    @property
    def decimated_rate_hz(self) -> int:
        return self.input_rate_hz // self.cic.decimation

    @property
    def segment_seconds(self) -> Fraction:
        return Fraction(self.segment_samples, self.decimated_rate_hz)


@dataclass(frozen=True)
class Decision:
    t: Fraction
    epoch: int
    stage: int
    classifications_used: int
    votes: tuple[int, ...]


@dataclass
class RunLog:
    decisions: list[Decision] = field(default_factory=list)
    pulses: list[PulseEvent] = field(default_factory=list)


def run_closed_loop(
    engine: MpuEngine,
    samples: np.ndarray,
    cfg: LoopConfig,
    voting: VotingConfig | None = None,
) -> RunLog:
    """Source -> CIC -> segmenter -> early-stop voting -> PWM triggers.

    Segments are classified lazily (a vote already closed skips the rest of
    its epoch).  Retrigger policy: a channel ignores triggers while its
    previous schedule is still active.  The trailing partial epoch is
    dropped.
    """
    cfg.validate(engine.model.input_len * engine.model.input_channels)
    if voting is None:
        voting = VotingConfig(class_count=engine.model.class_count,
                              votes_per_epoch=cfg.votes_per_epoch)
    elif voting.votes_per_epoch != cfg.votes_per_epoch:
        raise LoopConfigError("voting config disagrees with loop votes_per_epoch")
    dec = cic_decimate(samples, cfg.cic)
    scale = cfg.full_scale / (cfg.cic.dc_gain * (1 << (cfg.cic.input_bits - 1)))
    x = dec.astype(np.float64) * scale
    seg_len = cfg.segment_samples
    epochs = len(x) // seg_len // cfg.votes_per_epoch
    log = RunLog()
    active_until: dict[int, Fraction] = {s.channel: Fraction(0) for s in cfg.stim}
    for e in range(epochs):
        base = e * cfg.votes_per_epoch

        def epoch_segments():
            for v in range(cfg.votes_per_epoch):
                lo = (base + v) * seg_len
                yield x[lo:lo + seg_len]

        result = epoch_stage(epoch_segments(), lambda s: classify_segment(engine, s), voting)
        t_dec = (base + result.classifications_used) * cfg.segment_seconds
        log.decisions.append(Decision(
            t=t_dec, epoch=e, stage=result.stage,
            classifications_used=result.classifications_used, votes=result.votes,
        ))
        for stim in cfg.stim:
            if result.stage not in stim.trigger_classes:
                continue
            if t_dec < active_until[stim.channel]:
                continue  # previous schedule still running on this channel
            pulses = trigger_schedule(result.stage, t_dec, stim)
            if pulses:
                log.pulses.extend(pulses)
                active_until[stim.channel] = pulses[-1].t_off
    return log


_EVENT_ORDER = {"pulse_off": 0, "decision": 1, "pulse_on": 2}


def write_run_log(log: RunLog, stream: IO[str]) -> None:
    """JSON-lines log, one record per event, totally ordered by time.

    Records are {t, t_exact, kind, payload} with kind in
    decision | pulse_on | pulse_off; t_exact is the rational time "p/q".
    """
    events: list[tuple[Fraction, int, int, dict]] = []
    for d in log.decisions:
        events.append((d.t, _EVENT_ORDER["decision"], -1, {
            "kind": "decision",
            "payload": {"epoch": d.epoch, "stage": d.stage,
                        "classifications_used": d.classifications_used,
                        "votes": list(d.votes)},
        }))
    for p in log.pulses:
        events.append((p.t_on, _EVENT_ORDER["pulse_on"], p.channel,
                       {"kind": "pulse_on", "payload": {"channel": p.channel}}))
        events.append((p.t_off, _EVENT_ORDER["pulse_off"], p.channel,
                       {"kind": "pulse_off", "payload": {"channel": p.channel}}))
    events.sort(key=lambda ev: (ev[0], ev[1], ev[2]))
    for t, _, _, record in events:
        row = {"t": float(t), "t_exact": f"{t.numerator}/{t.denominator}", **record}
        stream.write(json.dumps(row, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# synthetic source and raw signal container


def synthetic_source(
    seed: int,
    seconds: float,
    cfg: LoopConfig,
    class_count: int = 5,
) -> tuple[np.ndarray, list[int]]:
    """Seeded toy signal: per-epoch sinusoid signature plus noise.

    Exists to exercise the loop deterministically; the per-class spectral
    shapes make no biological claims.  Returns (samples, epoch labels).
    """
    rng = np.random.default_rng(seed)
    epoch_seconds = float(cfg.segment_seconds) * cfg.votes_per_epoch
    epochs = int(seconds / epoch_seconds)
    rate = cfg.input_rate_hz
    n_epoch = int(epoch_seconds * rate)
    amp = 0.4 * (1 << (cfg.cic.input_bits - 1))
    labels: list[int] = []
    chunks: list[np.ndarray] = []
    for _ in range(epochs):
        stage = int(rng.integers(class_count))
        labels.append(stage)
        t = np.arange(n_epoch) / rate
        tone = np.sin(2 * np.pi * (1.0 + 2.0 * stage) * t + rng.uniform(0, 2 * np.pi))
        noise = rng.normal(0.0, 0.3, size=n_epoch)
        chunks.append(np.round(amp * (0.7 * tone + noise)).astype(np.int64))
    if not chunks:
        return np.zeros(0, dtype=np.int64), []
    samples = np.concatenate(chunks)
    lim = 1 << (cfg.cic.input_bits - 1)
    return np.clip(samples, -lim, lim - 1), labels


_SIGNAL_HEADER = struct.Struct("<4sHIHHQ")
SIGNAL_MAGIC = b"MUXS"
SIGNAL_VERSION = 1


def write_signal(path, samples: np.ndarray, rate_hz: int, bits: int = 16, channels: int = 1) -> None:
    """Raw signed little-endian sample container with a small header."""
    s = np.asarray(samples, dtype=np.int64)
    dtype = "<i2" if bits <= 16 else "<i4"
    with open(path, "wb") as fh:
        fh.write(_SIGNAL_HEADER.pack(SIGNAL_MAGIC, SIGNAL_VERSION, rate_hz, bits, channels, s.size))
        fh.write(s.astype(dtype).tobytes())


def read_signal(path) -> tuple[np.ndarray, int, int, int]:
    """Returns (samples, rate_hz, bits, channels)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _SIGNAL_HEADER.size:
        raise CorruptArtifact("signal file shorter than its header")
    magic, version, rate, bits, channels, count = _SIGNAL_HEADER.unpack_from(data)
    if magic != SIGNAL_MAGIC:
        raise BadArtifact(f"bad magic {magic!r}, expected {SIGNAL_MAGIC!r}")
    if version != SIGNAL_VERSION:
        raise BadArtifact(f"unsupported signal version {version}")
    if rate < 1 or bits < 1 or bits > 32 or channels < 1:
        raise BadArtifact("non-positive signal geometry")
    dtype = "<i2" if bits <= 16 else "<i4"
    width = 2 if bits <= 16 else 4
    body = data[_SIGNAL_HEADER.size:]
    if len(body) != count * width:
        raise CorruptArtifact(f"signal payload is {len(body)} bytes, header promises {count * width}")
    return np.frombuffer(body, dtype=dtype).astype(np.int64), rate, bits, channels
