"""Pulse sequences: timing types, compiler, and ensemble executor.

A sequence is a list of pulses on three drive channels (pump, stimulation,
RF mixing) plus snapshot readouts taken after the drives end.  The compiler
flattens the channels into piecewise-constant drive segments; a repeated
frequency sweep becomes a repeat block so the executor can build the
propagator of one sweep cycle and raise it to the repetition count instead
of stepping through every period.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import engine
from .ensemble import EnsembleState, Spectrum, hole_area, readout_scan
from .errors import SequenceError

__all__ = [
    "PumpPulse",
    "StimulationPulse",
    "RFPulse",
    "WaitPulse",
    "ReadoutPulse",
    "DriveSegment",
    "RepeatBlock",
    "CompiledSequence",
    "DriveCalibration",
    "RunResult",
    "compile_sequence",
    "run",
    "write_trace_csv",
]

# Default number of discretisation steps per sweep period.
SWEEP_STEPS_PER_PERIOD = 50


@dataclass(frozen=True)
class PumpPulse:
    """Optical pump, optionally swept as a repeating sawtooth.

    With sweep_span_MHz > 0 the instantaneous frequency ramps linearly from
    center - span/2 to center + span/2 once per sweep_period_ms.  The pump
    is gated off whenever the instantaneous frequency lies within
    +- gate_gap_MHz / 2 of the sweep center.
    """

    start_ms: float
    duration_ms: float
    center_MHz: float
    power_rate_per_ms: float
    sweep_span_MHz: float = 0.0
    sweep_period_ms: float = 0.0
    gate_gap_MHz: float = 0.0

    def __post_init__(self):
        _check_timing(self)
        if self.power_rate_per_ms < 0:
            raise ValueError("power_rate_per_ms must be >= 0")
        if self.sweep_span_MHz < 0:
            raise ValueError("sweep_span_MHz must be >= 0")
        if self.sweep_span_MHz > 0 and self.sweep_period_ms <= 0:
            raise ValueError("swept pump needs sweep_period_ms > 0")
        if self.gate_gap_MHz < 0:
            raise ValueError("gate_gap_MHz must be >= 0")
        if self.gate_gap_MHz > 0 and self.gate_gap_MHz >= self.sweep_span_MHz:
            raise ValueError("gate_gap_MHz must be smaller than sweep_span_MHz")


@dataclass(frozen=True)
class StimulationPulse:
    """Stimulated de-excitation drive of constant power."""

    start_ms: float
    duration_ms: float
    power_mW: float

    def __post_init__(self):
        _check_timing(self)
        if self.power_mW < 0:
            raise ValueError("power_mW must be >= 0")


@dataclass(frozen=True)
class RFPulse:
    """Excited-doublet mixing drive swept over a frequency band.

    The sweep is much faster than every population timescale, so the drive
    is modelled as a constant mixing rate applied to any class whose excited
    splitting lies inside center +- bandwidth/2; sweep_period_ms is carried
    for documentation.
    """

    start_ms: float
    duration_ms: float
    center_MHz: float
    bandwidth_MHz: float
    voltage_Vpp: float
    sweep_period_ms: float = 0.001

    def __post_init__(self):
        _check_timing(self)
        if self.bandwidth_MHz <= 0:
            raise ValueError("bandwidth_MHz must be > 0")
        if self.voltage_Vpp < 0:
            raise ValueError("voltage_Vpp must be >= 0")
        if self.sweep_period_ms <= 0:
            raise ValueError("sweep_period_ms must be > 0")


@dataclass(frozen=True)
class WaitPulse:
    """Drive-free interval that extends the simulated horizon."""

    start_ms: float
    duration_ms: float

    def __post_init__(self):
        _check_timing(self)


@dataclass(frozen=True)
class ReadoutPulse:
    """Snapshot transmission scan taken at_delay_ms after the drives end."""

    f_start_MHz: float
    f_stop_MHz: float
    n_points: int
    at_delay_ms: float

    def __post_init__(self):
        if not self.f_stop_MHz > self.f_start_MHz:
            raise ValueError("f_stop_MHz must exceed f_start_MHz")
        if self.n_points < 2:
            raise ValueError("n_points must be >= 2")
        if not math.isfinite(self.at_delay_ms):
            raise ValueError("at_delay_ms must be finite")


Pulse = PumpPulse | StimulationPulse | RFPulse | WaitPulse | ReadoutPulse


def _check_timing(pulse) -> None:
    if not math.isfinite(pulse.start_ms) or pulse.start_ms < 0:
        raise ValueError(f"start_ms must be finite and >= 0, got {pulse.start_ms}")
    if not math.isfinite(pulse.duration_ms) or pulse.duration_ms < 0:
        raise ValueError(f"duration_ms must be finite and >= 0, got {pulse.duration_ms}")


@dataclass(frozen=True)
class DriveSegment:
    """One interval of constant drive settings.

    pump_freq_MHz is None when the pump is off (including gated sweep
    steps).  RF settings are kept on the segment so the executor can decide
    band membership per class.
    """

    t_start_ms: float
    t_end_ms: float
    pump_freq_MHz: float | None = None
    pump_rate_per_ms: float = 0.0
    stim_power_mW: float = 0.0
    rf_voltage_Vpp: float = 0.0
    rf_center_MHz: float = 0.0
    rf_bandwidth_MHz: float = 0.0

    @property
    def dt_ms(self) -> float:
        return self.t_end_ms - self.t_start_ms


@dataclass(frozen=True)
class RepeatBlock:
    """``count`` identical repetitions of a sweep cycle."""

    segments: tuple[DriveSegment, ...]
    count: int

    @property
    def dt_ms(self) -> float:
        return self.count * sum(s.dt_ms for s in self.segments)


@dataclass
class CompiledSequence:
    items: list  # DriveSegment | RepeatBlock, in time order
    readouts: list[ReadoutPulse]
    drives_end_ms: float

    @property
    def n_segments(self) -> int:
        """Unrolled segment count."""
        return sum(
            it.count * len(it.segments) if isinstance(it, RepeatBlock) else 1
            for it in self.items
        )

    @property
    def n_sweep_periods(self) -> int:
        """Full sweep repetitions executed through repeat blocks."""
        return sum(it.count for it in self.items if isinstance(it, RepeatBlock))


@dataclass(frozen=True)
class DriveCalibration:
    """Conversion from pulse settings to rates seen by the rate equations.

    The stimulation response falls off with a wide Lorentzian in the
    stimulating laser's detuning from its gain line; stim_detuning_MHz
    selects the operating point.
    """

    pump_linewidth_MHz: float = 1.0
    stim_slope_per_mW_ms: float = engine.DEFAULT_STIM_SLOPE_PER_MW_MS
    stim_detuning_MHz: float = 0.0
    stim_response_fwhm_MHz: float = 14000.0
    rf_coupling_per_V2_ms: float = engine.DEFAULT_RF_COUPLING_PER_V2_MS

    def __post_init__(self):
        if self.pump_linewidth_MHz <= 0:
            raise ValueError("pump_linewidth_MHz must be > 0")
        if self.stim_response_fwhm_MHz <= 0:
            raise ValueError("stim_response_fwhm_MHz must be > 0")
        if self.stim_slope_per_mW_ms < 0 or self.rf_coupling_per_V2_ms < 0:
            raise ValueError("calibration rates must be >= 0")

    def stim_rate(self, power_mW: float) -> float:
        base = engine.stimulation_rate(power_mW, self.stim_slope_per_mW_ms)
        hw2 = (0.5 * self.stim_response_fwhm_MHz) ** 2
        return base * hw2 / (self.stim_detuning_MHz ** 2 + hw2)


def _channel_pulses(pulses, kind):
    active = [p for p in pulses if isinstance(p, kind) and p.duration_ms > 0]
    active.sort(key=lambda p: p.start_ms)
    for prev, nxt in zip(active, active[1:]):
        if nxt.start_ms < prev.start_ms + prev.duration_ms - 1e-12:
            raise SequenceError(
                f"overlapping {kind.__name__} pulses at t = {nxt.start_ms} ms"
            )
    return active


def _active(pulses, t):
    for p in pulses:
        if p.start_ms - 1e-12 <= t < p.start_ms + p.duration_ms - 1e-12:
            return p
    return None


def _sweep_cycle(pump: PumpPulse, n_steps: int, base: DriveSegment) -> tuple[DriveSegment, ...]:
    """Segments of one full sweep period, with t relative to the cycle start."""
    dt = pump.sweep_period_ms / n_steps
    segs = []
    for i in range(n_steps):
        offset = pump.sweep_span_MHz * ((i + 0.5) / n_steps - 0.5)
        gated = abs(offset) < pump.gate_gap_MHz / 2.0
        segs.append(
            DriveSegment(
                t_start_ms=i * dt,
                t_end_ms=(i + 1) * dt,
                pump_freq_MHz=None if gated else pump.center_MHz + offset,
                pump_rate_per_ms=0.0 if gated else pump.power_rate_per_ms,
                stim_power_mW=base.stim_power_mW,
                rf_voltage_Vpp=base.rf_voltage_Vpp,
                rf_center_MHz=base.rf_center_MHz,
                rf_bandwidth_MHz=base.rf_bandwidth_MHz,
            )
        )
    return tuple(segs)


def _shift(seg: DriveSegment, t0: float) -> DriveSegment:
    return DriveSegment(
        t_start_ms=t0 + seg.t_start_ms,
        t_end_ms=t0 + seg.t_end_ms,
        pump_freq_MHz=seg.pump_freq_MHz,
        pump_rate_per_ms=seg.pump_rate_per_ms,
        stim_power_mW=seg.stim_power_mW,
        rf_voltage_Vpp=seg.rf_voltage_Vpp,
        rf_center_MHz=seg.rf_center_MHz,
        rf_bandwidth_MHz=seg.rf_bandwidth_MHz,
    )


def _emit_partial_sweep(items, pump, base, t0, t1, n_steps):
    """Segments for the part of a sweep lying in [t0, t1), stepping the phase grid."""
    dt = pump.sweep_period_ms / n_steps
    t = t0
    while t < t1 - 1e-12:
        phase = (t - pump.start_ms) / pump.sweep_period_ms
        idx = int(math.floor(phase * n_steps + 1e-9)) % n_steps
        step_end = pump.start_ms + (math.floor(phase * n_steps + 1e-9) + 1) * dt
        end = min(step_end, t1)
        offset = pump.sweep_span_MHz * ((idx + 0.5) / n_steps - 0.5)
        gated = abs(offset) < pump.gate_gap_MHz / 2.0
        items.append(
            DriveSegment(
                t_start_ms=t,
                t_end_ms=end,
                pump_freq_MHz=None if gated else pump.center_MHz + offset,
                pump_rate_per_ms=0.0 if gated else pump.power_rate_per_ms,
                stim_power_mW=base.stim_power_mW,
                rf_voltage_Vpp=base.rf_voltage_Vpp,
                rf_center_MHz=base.rf_center_MHz,
                rf_bandwidth_MHz=base.rf_bandwidth_MHz,
            )
        )
        t = end


def compile_sequence(pulses, dt_max_ms: float | None = None) -> CompiledSequence:
    """Flatten a pulse list into time-ordered drive segments.

    Swept pumps are discretised into at most dt_max_ms steps (default one
    fiftieth of the sweep period); whole sweep periods under unchanged
    stimulation and RF settings are folded into repeat blocks.  Constant
    intervals are subdivided only when dt_max_ms is given explicitly; the
    propagation is exact either way.
    """
    if dt_max_ms is not None and dt_max_ms <= 0:
        raise ValueError("dt_max_ms must be > 0")

    pumps = _channel_pulses(pulses, PumpPulse)
    stims = _channel_pulses(pulses, StimulationPulse)
    rfs = _channel_pulses(pulses, RFPulse)
    waits = [p for p in pulses if isinstance(p, WaitPulse)]
    readouts = sorted(
        (p for p in pulses if isinstance(p, ReadoutPulse)), key=lambda p: p.at_delay_ms
    )

    timed = pumps + stims + rfs + [w for w in waits if w.duration_ms > 0]
    drives_end = max((p.start_ms + p.duration_ms for p in timed), default=0.0)

    cuts = {0.0, drives_end}
    for p in timed:
        cuts.add(p.start_ms)
        cuts.add(p.start_ms + p.duration_ms)
    cuts = sorted(c for c in cuts if 0.0 <= c <= drives_end)

    items: list = []
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= 1e-12:
            continue
        mid = 0.5 * (a + b)
        pump = _active(pumps, mid)
        stim = _active(stims, mid)
        rf = _active(rfs, mid)
        base = DriveSegment(
            t_start_ms=a,
            t_end_ms=b,
            stim_power_mW=stim.power_mW if stim else 0.0,
            rf_voltage_Vpp=rf.voltage_Vpp if rf else 0.0,
            rf_center_MHz=rf.center_MHz if rf else 0.0,
            rf_bandwidth_MHz=rf.bandwidth_MHz if rf else 0.0,
        )

        if pump is None or pump.power_rate_per_ms == 0.0:
            _emit_constant(items, base, a, b, dt_max_ms)
        elif pump.sweep_span_MHz == 0.0:
            seg = DriveSegment(
                t_start_ms=a,
                t_end_ms=b,
                pump_freq_MHz=pump.center_MHz,
                pump_rate_per_ms=pump.power_rate_per_ms,
                stim_power_mW=base.stim_power_mW,
                rf_voltage_Vpp=base.rf_voltage_Vpp,
                rf_center_MHz=base.rf_center_MHz,
                rf_bandwidth_MHz=base.rf_bandwidth_MHz,
            )
            _emit_constant(items, seg, a, b, dt_max_ms)
        else:
            period = pump.sweep_period_ms
            dt_eff = dt_max_ms if dt_max_ms is not None else period / SWEEP_STEPS_PER_PERIOD
            n_steps = max(1, int(math.ceil(period / dt_eff - 1e-9)))
            # Align on the pump's own period boundaries inside [a, b).
            k0 = math.ceil((a - pump.start_ms) / period - 1e-9)
            head_end = min(pump.start_ms + k0 * period, b)
            _emit_partial_sweep(items, pump, base, a, head_end, n_steps)
            if head_end < b - 1e-12:
                n_full = int(math.floor((b - head_end) / period + 1e-9))
                if n_full > 0:
                    cycle = _sweep_cycle(pump, n_steps, base)
                    cycle = tuple(_shift(s, head_end) for s in cycle)
                    items.append(RepeatBlock(segments=cycle, count=n_full))
                tail_start = head_end + n_full * period
                _emit_partial_sweep(items, pump, base, tail_start, b, n_steps)

    return CompiledSequence(items=items, readouts=readouts, drives_end_ms=drives_end)


def _emit_constant(items, seg: DriveSegment, a: float, b: float, dt_max_ms):
    if dt_max_ms is None or b - a <= dt_max_ms + 1e-12:
        items.append(seg)
        return
    n = int(math.ceil((b - a) / dt_max_ms - 1e-9))
    edges = np.linspace(a, b, n + 1)
    for lo, hi in zip(edges, edges[1:]):
        items.append(
            DriveSegment(
                t_start_ms=float(lo),
                t_end_ms=float(hi),
                pump_freq_MHz=seg.pump_freq_MHz,
                pump_rate_per_ms=seg.pump_rate_per_ms,
                stim_power_mW=seg.stim_power_mW,
                rf_voltage_Vpp=seg.rf_voltage_Vpp,
                rf_center_MHz=seg.rf_center_MHz,
                rf_bandwidth_MHz=seg.rf_bandwidth_MHz,
            )
        )


@dataclass
class RunResult:
    baseline: dict  # (f_start, f_stop, n_points) -> Spectrum of the initial state
    spectra: list[tuple[float, Spectrum]]  # (delay_ms, spectrum)
    trace: list[tuple[float, float]] | None
    stats: dict


def _segment_generators(ens: EnsembleState, seg: DriveSegment,
                        cal: DriveCalibration, base_matrix: np.ndarray,
                        trans: np.ndarray) -> np.ndarray:
    """Per-class 4x4 generators for one segment, shape (n, 4, 4)."""
    n = ens.n_classes
    g = np.repeat(base_matrix[None, :, :], n, axis=0)

    if seg.pump_freq_MHz is not None and seg.pump_rate_per_ms > 0.0:
        det = seg.pump_freq_MHz - trans
        rates = engine.pump_rate_profile(seg.pump_rate_per_ms, cal.pump_linewidth_MHz, det)
        pairs = ((0, 2), (0, 3), (1, 2), (1, 3))
        for k, (lo, up) in enumerate(pairs):
            r = rates[:, k]
            g[:, up, lo] += r
            g[:, lo, lo] -= r
            g[:, lo, up] += r
            g[:, up, up] -= r

    if seg.stim_power_mW > 0.0:
        gam = cal.stim_rate(seg.stim_power_mW)
        if gam > 0.0:
            bz = ens.params.beta_z2
            g[:, 0, 2] += gam * bz
            g[:, 1, 2] += gam * (1.0 - bz)
            g[:, 2, 2] -= gam
            g[:, 1, 3] += gam * bz
            g[:, 0, 3] += gam * (1.0 - bz)
            g[:, 3, 3] -= gam

    if seg.rf_voltage_Vpp > 0.0:
        rate = engine.rf_mix_rate(seg.rf_voltage_Vpp, cal.rf_coupling_per_V2_ms)
        in_band = abs(ens.config.delta_e_MHz - seg.rf_center_MHz) <= seg.rf_bandwidth_MHz / 2.0
        if rate > 0.0 and in_band:
            g[:, 2, 3] += rate
            g[:, 3, 2] += rate
            g[:, 2, 2] -= rate
            g[:, 3, 3] -= rate

    return g


def _apply_batch(props: np.ndarray, pops: np.ndarray) -> None:
    """Advance populations in place, crediting any leak to the trap bucket."""
    v = pops[:, :4]
    old = v.sum(axis=1)
    new = np.matmul(props, v[:, :, None])[:, :, 0]
    tiny = (new < 0.0) & (new > -1e-10)
    new[tiny] = 0.0
    if np.any(new < 0.0):
        raise ArithmeticError("propagation produced a negative population")
    leaked = old - new.sum(axis=1)
    leaked[(leaked < 0.0) & (leaked > -1e-10)] = 0.0
    if np.any(leaked < 0.0):
        raise ArithmeticError("propagation created population")
    pops[:, :4] = new
    pops[:, 4] += leaked


def _item_propagator(ens, item, cal, base_matrix, trans, lo, hi) -> np.ndarray:
    """Propagator of one item for the class slice [lo, hi)."""
    sub = EnsembleState(
        config=ens.config,
        params=ens.params,
        profile=ens.profile,
        centers_MHz=ens.centers_MHz[lo:hi],
        weights=ens.weights[lo:hi],
        populations=ens.populations[lo:hi],
        probe_linewidth_MHz=ens.probe_linewidth_MHz,
    )
    t = trans[lo:hi]
    if isinstance(item, RepeatBlock):
        acc = None
        for seg in item.segments:
            g = _segment_generators(sub, seg, cal, base_matrix, t)
            p = engine.propagator_batch(g, seg.dt_ms)
            acc = p if acc is None else p @ acc
        return engine.matrix_power_batch(acc, item.count)
    g = _segment_generators(sub, item, cal, base_matrix, t)
    return engine.propagator_batch(g, item.dt_ms)


def run(ens: EnsembleState,
        compiled: CompiledSequence,
        readouts: list[ReadoutPulse] | None = None,
        calibration: DriveCalibration | None = None,
        trace_window_MHz: tuple[float, float] | None = None,
        horizon_ms: float | None = None,
        threads: int = 1) -> RunResult:
    """Execute a compiled sequence on an ensemble (mutated in place).

    Readouts default to the ones found in the sequence.  Each produces a
    snapshot spectrum at drives_end + at_delay_ms; when trace_window_MHz is
    given, the hole area of every readout against the initial-state baseline
    is collected into a (delay, area) trace.  horizon_ms optionally caps the
    simulated time; a readout beyond it raises SequenceError.
    """
    cal = calibration or DriveCalibration()
    if readouts is None:
        readouts = compiled.readouts
    readouts = sorted(readouts, key=lambda r: r.at_delay_ms)
    for r in readouts:
        if r.at_delay_ms < 0:
            raise SequenceError(f"readout delay {r.at_delay_ms} ms is negative")
        if horizon_ms is not None and compiled.drives_end_ms + r.at_delay_ms > horizon_ms + 1e-12:
            raise SequenceError(
                f"readout at delay {r.at_delay_ms} ms lies beyond the "
                f"{horizon_ms} ms horizon"
            )

    base_matrix = engine.build_rate_matrix(ens.params)
    trans = ens.transition_freqs()

    baselines: dict = {}
    for r in readouts:
        key = (r.f_start_MHz, r.f_stop_MHz, r.n_points)
        if key not in baselines:
            baselines[key] = readout_scan(ens, *key)

    n = ens.n_classes
    if threads > 1:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        chunks = [(lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
    else:
        chunks = [(0, n)]

    def advance(item):
        if len(chunks) == 1:
            lo, hi = chunks[0]
            p = _item_propagator(ens, item, cal, base_matrix, trans, lo, hi)
            _apply_batch(p, ens.populations)
            return
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            props = list(
                pool.map(
                    lambda c: _item_propagator(ens, item, cal, base_matrix, trans, *c),
                    chunks,
                )
            )
        for (lo, hi), p in zip(chunks, props):
            _apply_batch(p, ens.populations[lo:hi])

    t = 0.0
    for item in compiled.items:
        advance(item)
        t += item.dt_ms

    spectra: list[tuple[float, Spectrum]] = []
    trace: list[tuple[float, float]] = []
    for r in readouts:
        target = compiled.drives_end_ms + r.at_delay_ms
        if target > t + 1e-12:
            p = engine.propagator(base_matrix, target - t)
            _apply_batch(np.broadcast_to(p, (n, 4, 4)), ens.populations)
            t = target
        spec = readout_scan(ens, r.f_start_MHz, r.f_stop_MHz, r.n_points)
        spectra.append((r.at_delay_ms, spec))
        if trace_window_MHz is not None:
            ref = baselines[(r.f_start_MHz, r.f_stop_MHz, r.n_points)]
            trace.append((r.at_delay_ms, hole_area(spec, ref, trace_window_MHz)))

    stats = {
        "n_items": len(compiled.items),
        "n_segments": compiled.n_segments,
        "n_sweep_periods": compiled.n_sweep_periods,
        "drives_end_ms": compiled.drives_end_ms,
    }
    return RunResult(
        baseline=baselines,
        spectra=spectra,
        trace=trace if trace_window_MHz is not None else None,
        stats=stats,
    )


def write_trace_csv(trace, path) -> None:
    with open(path, "w") as fh:
        fh.write("delay_ms,hole_area\n")
        for delay, area in trace:
            fh.write(f"{delay!r},{area!r}\n")
