"""Deterministic discrete-time simulator of interrupt-driven VMs sharing an LLC and bus.

Each VM runs on its own CPU. A task is activated by its IRQ; while it runs
(and its pin is enabled) it slows every other VM down by its interference
weight. Time advances in integer tick quanta. ``Simulator.step`` advances
exactly one tick; ``Simulator.run_until`` jumps straight to the next event
(trigger, completion, actuation boundary, scenario directive), which gives
the same trajectory as stepping tick by tick because nothing changes rate
between events.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .core import (
    ConfigError,
    ContractError,
    ControlFlag,
    CriticalityLevel,
    EventVector,
    IrqId,
    SystemConfig,
    TaskProfile,
)
from .dtt import Artifacts, build_artifacts, interference_weight
from .formats import Scenario, with_params
from .gic import Distributor
from .rtm import Rtm, compute_qos, decode_qos

_DONE_EPS = 1e-7


def slowdown(vm: int, active_weights: list[float], config: SystemConfig) -> float:
    """1 + alpha * (sum of interference weights of active tasks on other VMs).

    `active_weights[j]` is VM j's summed weight over its running, delivery-enabled
    tasks, already multiplied by its scenario interference scale.
    """
    others = sum(w for j, w in enumerate(active_weights) if j != vm)
    return 1.0 + config.alpha * others


@dataclass(eq=False, slots=True)
class TaskState:
    irq: IrqId
    profile: TaskProfile
    weight: float
    vm: int
    period: int = 0  # 0 = not periodically triggered
    next_trigger: int | None = None
    running: bool = False
    remaining_work: float = 0.0
    pending: bool = False
    enabled: bool = True
    completions: int = 0
    work_done: float = 0.0

    @property
    def phase(self) -> str:
        return "running" if self.running else "idle"


@dataclass
class WindowSample:
    time: int
    vm: int
    events: EventVector
    work: float
    qos: float | None
    flag: ControlFlag | None


@dataclass
class RunReport:
    duration: int
    seed: int
    rtm_enabled: bool
    completions: dict[tuple[int, int], int]
    work: dict[int, float]
    windows: list[WindowSample]
    modes: list[tuple[int, int]]
    writes: list[tuple[int, str, int]]
    trace: list[tuple[int, str, str]]
    instrumentation: list[tuple[int, str, int, float, float]]
    baseline: "RunReport | None" = None

    def relative_throughput(self, key: tuple[int, int]) -> float:
        """Completions relative to the interference-free baseline run."""
        if self.baseline is None:
            raise ContractError("report has no baseline run")
        base = self.baseline.completions[key]
        if base == 0:
            return 1.0 if self.completions[key] == 0 else float("inf")
        return self.completions[key] / base

    def vm_relative_throughput(self, vm: int) -> float:
        if self.baseline is None:
            raise ContractError("report has no baseline run")
        base = self.baseline.work[vm]
        return self.work[vm] / base if base > 0 else 1.0

    def window_work(self, vm: int, start: int = 0, end: int | None = None) -> float:
        end = self.duration if end is None else end
        return sum(w.work for w in self.windows if w.vm == vm and start < w.time <= end)

    def slowdown(self, vm: int, start: int = 0, end: int | None = None) -> float:
        """Baseline work over observed work for `vm` in the window range (start, end]."""
        if self.baseline is None:
            raise ContractError("report has no baseline run")
        done = self.window_work(vm, start, end)
        base = self.baseline.window_work(vm, start, end)
        return base / done if done > 0 else float("inf")

    def qos_series(self, vm: int) -> list[tuple[int, float]]:
        return [(w.time, w.qos) for w in self.windows if w.vm == vm and w.qos is not None]


class Simulator:
    def __init__(self, config: SystemConfig, artifacts: Artifacts | None = None,
                 scenario: Scenario | None = None, seed: int = 0, rtm_enabled: bool = True,
                 stepwise: bool | None = None):
        self.config = config
        self.scenario = scenario or Scenario()
        self.scenario.check(config)
        self.seed = seed
        self.clock = 0
        routing = {irq.pin: irq.vm for irq in config.all_irqs()}
        self.distributor = Distributor(routing)
        self.rtm_enabled = rtm_enabled
        self.rtm: Rtm | None = None
        if rtm_enabled:
            self.artifacts = artifacts if artifacts is not None else build_artifacts(config)
            self.rtm = Rtm(config, self.artifacts, self.distributor, stepwise)
        else:
            self.artifacts = artifacts
        rng = random.Random(seed)
        self.tasks: list[TaskState] = []
        self._by_key: dict[tuple[int, int], TaskState] = {}
        for vm in config.vms:
            for irq, profile in zip(vm.irqs, vm.tasks):
                period, offset = self.scenario.periodic.get(irq.key, (profile.period, None))
                if offset is None:
                    offset = 0 if vm.level == CriticalityLevel.ASIL_D or period == 0 else rng.randrange(period)
                ts = TaskState(irq, profile, interference_weight(config, irq), irq.vm, period,
                               offset if period > 0 else None)
                self.tasks.append(ts)
                self._by_key[irq.key] = ts
        n_vms = len(config.vms)
        self.scale = [1.0] * n_vms
        self.pmu = [[0.0, 0.0] for _ in range(n_vms)]
        self._snapshot = [(0.0, 0.0) for _ in range(n_vms)]
        self._work_snapshot = [0.0] * n_vms
        self.work = [0.0] * n_vms
        self._directive_idx = 0
        self.windows: list[WindowSample] = []
        self.modes: list[tuple[int, int]] = []
        self.writes: list[tuple[int, str, int]] = []
        self.trace: list[tuple[int, str, str]] = []
        self._refresh_enabled()
        if self.rtm is not None:
            for pin in sorted(p for p in routing if not self.distributor.is_delivery_enabled(p)):
                self.writes.append((0, "mask", pin))
                self.trace.append((0, "mask", str(pin)))
        self._monitored = config.monitored_vms
        self._passive_refs = {vm: config.reference(vm) for vm in self._monitored}

    def task(self, vm: int, k: int) -> TaskState:
        return self._by_key[(vm, k)]

    def _refresh_enabled(self) -> None:
        for t in self.tasks:
            t.enabled = self.distributor.is_delivery_enabled(t.irq.pin)

    def _active_weights(self) -> list[float]:
        acc = [0.0] * len(self.config.vms)
        for t in self.tasks:
            if t.running and t.enabled:
                acc[t.vm] += t.weight
        return [a * s for a, s in zip(acc, self.scale)]

    def slowdown(self, vm: int) -> float:
        """Current slowdown factor of `vm` (>= 1)."""
        return slowdown(vm, self._active_weights(), self.config)

    def _begin_tick(self) -> list[float]:
        """Apply due directives and triggers, start runnable tasks; return slowdowns."""
        now = self.clock
        directives = self.scenario.directives
        while self._directive_idx < len(directives) and directives[self._directive_idx].time <= now:
            d = directives[self._directive_idx]
            self._directive_idx += 1
            if d.kind == "set-interference":
                self.scale[d.vm] = d.scale
                self.trace.append((now, "set-interference", f"{d.vm} {d.scale!r}"))
            else:
                self._by_key[(d.vm, d.k)].pending = True
                self.trace.append((now, "trigger", f"{d.vm}:{d.k}"))
        acc = [0.0] * len(self.scale)
        for t in self.tasks:
            nt = t.next_trigger
            if nt is not None and nt <= now:
                t.pending = True
                t.next_trigger = nt + ((now - nt) // t.period + 1) * t.period
            if t.enabled:
                if t.pending and not t.running:
                    t.pending = False
                    t.running = True
                    t.remaining_work = t.profile.wcet_solo
                if t.running:
                    acc[t.vm] += t.weight
        weights = [a * s for a, s in zip(acc, self.scale)]
        # same sum as slowdown(), computed once for all VMs
        total = sum(weights)
        alpha = self.config.alpha
        return [1.0 + alpha * (total - w) for w in weights]

    def _ticks_to_next_event(self, slow: list[float], limit: int) -> int:
        tick = self.config.tick
        now = self.clock
        period = self.config.actuation_period
        horizon = min(limit, (period - now % period) // tick)
        directives = self.scenario.directives
        if self._directive_idx < len(directives):
            gap = -(-(directives[self._directive_idx].time - now) // tick)
            if gap < horizon:
                horizon = gap
        for t in self.tasks:
            nt = t.next_trigger
            if nt is not None:
                gap = -(-(nt - now) // tick)
                if gap < horizon:
                    horizon = gap
            if t.running and t.enabled:
                need = math.ceil(t.remaining_work * slow[t.vm] / tick - 1e-9)
                if need < horizon:
                    horizon = need
        return horizon if horizon > 1 else 1

    def _advance(self, n: int, slow: list[float]) -> None:
        span = n * self.config.tick
        for t in self.tasks:
            if not (t.running and t.enabled):
                continue
            vm = t.vm
            consumed = span / slow[vm]
            if consumed > t.remaining_work:
                consumed = t.remaining_work
            t.remaining_work -= consumed
            t.work_done += consumed
            self.work[vm] += consumed
            counters = self.pmu[vm]
            counters[0] += t.profile.l2_rate * consumed
            counters[1] += t.profile.bus_rate * consumed
            if t.remaining_work <= _DONE_EPS:
                t.remaining_work = 0.0
                t.running = False
                t.completions += 1
        self.clock += span

    def pmu_window_delta(self, vm: int) -> EventVector:
        """Counter deltas since the previous actuation boundary; moves the snapshot."""
        if self.clock % self.config.actuation_period:
            raise ContractError(f"PMU window read off-boundary at t={self.clock}")
        l2, bus = self.pmu[vm]
        p_l2, p_bus = self._snapshot[vm]
        self._snapshot[vm] = (l2, bus)
        return EventVector(max(0.0, l2 - p_l2), max(0.0, bus - p_bus))

    def _actuate(self) -> None:
        now = self.clock
        samples = {vm.vm: self.pmu_window_delta(vm.vm) for vm in self.config.vms}
        work = []
        for vm in range(len(self.config.vms)):
            work.append(self.work[vm] - self._work_snapshot[vm])
            self._work_snapshot[vm] = self.work[vm]
        if self.rtm is not None:
            before = self.rtm.current_mode
            result = self.rtm.tick(samples)
            qos, flags = result.qos, result.flags
            for op, pin in result.writes:
                self.writes.append((now, op, pin))
                self.trace.append((now, op, str(pin)))
            if result.writes:
                self._refresh_enabled()
            if result.mode != before:
                self.trace.append((now, "mode", f"{before}->{result.mode}"))
            self.modes.append((now, result.mode))
        else:
            qos, flags = {}, {}
            for vm in self._monitored:
                qos[vm] = compute_qos(samples[vm], self._passive_refs[vm], self.config.weights)
                flags[vm] = decode_qos(qos[vm])
            self.modes.append((now, 0))
        for vm in range(len(self.config.vms)):
            self.windows.append(WindowSample(now, vm, samples[vm], work[vm],
                                             qos.get(vm), flags.get(vm)))

    def _iterate(self, limit: int) -> None:
        slow = self._begin_tick()
        n = self._ticks_to_next_event(slow, limit)
        self._advance(n, slow)
        if self.clock % self.config.actuation_period == 0:
            self._actuate()

    def step(self) -> None:
        """Advance exactly one tick quantum."""
        self._iterate(1)

    def run_until(self, end: int, batch: bool = True) -> None:
        tick = self.config.tick
        if end % tick:
            raise ConfigError(f"end time {end} is not a multiple of the tick quantum {tick}")
        while self.clock < end:
            self._iterate((end - self.clock) // tick if batch else 1)

    def report(self, baseline: RunReport | None = None) -> RunReport:
        inst = self.rtm.instrumentation.rows() if self.rtm is not None else []
        return RunReport(
            duration=self.clock,
            seed=self.seed,
            rtm_enabled=self.rtm_enabled,
            completions={t.irq.key: t.completions for t in self.tasks},
            work=dict(enumerate(self.work)),
            windows=list(self.windows),
            modes=list(self.modes),
            writes=list(self.writes),
            trace=list(self.trace),
            instrumentation=inst,
            baseline=baseline,
        )


def run(config: SystemConfig, scenario: Scenario | None = None, duration: int = 1_000_000,
        seed: int = 0, artifacts: Artifacts | None = None, rtm_enabled: bool = True,
        stepwise: bool | None = None, baseline: RunReport | bool = True,
        batch: bool = True) -> RunReport:
    """Simulate `duration` microseconds and return the report.

    With ``baseline=True`` an interference-free run (alpha = 0, no RTM) of the
    same scenario and seed is attached for relative-throughput figures; pass
    a previous report's baseline to reuse it.
    """
    if duration <= 0 or duration % config.tick:
        raise ConfigError("duration must be a positive multiple of the tick quantum")
    base: RunReport | None = None
    if baseline is True:
        solo = Simulator(with_params(config, alpha=0.0), None, scenario, seed, rtm_enabled=False)
        solo.run_until(duration, batch)
        base = solo.report()
    elif isinstance(baseline, RunReport):
        base = baseline
    sim = Simulator(config, artifacts, scenario, seed, rtm_enabled, stepwise)
    sim.run_until(duration, batch)
    return sim.report(base)


def calibrate_alpha(config: SystemConfig, scenario: Scenario | None, target: float,
                    vm: int | None = None, duration: int = 1_000_000, seed: int = 0,
                    start: int = 0, tol: float = 1e-3, hi: float = 16.0) -> float:
    """Bisect alpha so the unmitigated slowdown of `vm` over (start, duration] hits `target`."""
    vm = config.critical_vm if vm is None else vm
    solo = Simulator(with_params(config, alpha=0.0), None, scenario, seed, rtm_enabled=False)
    solo.run_until(duration)
    base = solo.report()

    def measured(alpha: float) -> float:
        sim = Simulator(with_params(config, alpha=alpha), None, scenario, seed, rtm_enabled=False)
        sim.run_until(duration)
        return sim.report(base).slowdown(vm, start)

    lo = 0.0
    if measured(hi) < target:
        raise ConfigError(f"target slowdown {target} unreachable with alpha <= {hi}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if measured(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
