"""Run-time mechanism: QoS computation, decoding, mode selection and IRQ masking."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import (
    ContractError,
    ControlFlag,
    ControlRegister,
    CriticalityLevel,
    EventVector,
    SystemConfig,
    Weights,
    clamp,
    derived_reference,
)
from .dtt import ArtifactError, Artifacts
from .gic import Distributor

MEASURING_POINTS = (
    "pmu_sampling",
    "qos_computation",
    "qos_decoding",
    "vm_synchronization",
    "control_logic",
    "reference_update",
    "irq_masking",
)


def compute_qos(actual: EventVector, expected: EventVector, weights: Weights) -> float:
    """Weighted average of per-event progress ratios, scaled to [0, 100].

    Each ratio is actual/expected clamped to [0, 1]; an event with zero
    expected count counts as fully on track.
    """
    r_l2 = _ratio(actual.l2_accesses, expected.l2_accesses)
    r_bus = _ratio(actual.bus_accesses, expected.bus_accesses)
    return 100.0 * (weights.w_l2 * r_l2 + weights.w_bus * r_bus)


def _ratio(actual: float, expected: float) -> float:
    if actual < 0 or expected < 0:
        raise ContractError("event counts must be non-negative")
    return 1.0 if expected == 0 else clamp(actual / expected, 0.0, 1.0)


def decode_qos(qos: float) -> ControlFlag:
    if not 0.0 <= qos <= 100.0:
        raise ContractError(f"qos {qos} outside [0, 100]")
    if qos >= 75.0:
        return ControlFlag.T0
    if qos >= 50.0:
        return ControlFlag.T1
    if qos >= 25.0:
        return ControlFlag.T2
    return ControlFlag.T3


def aggregate_register(flags: Iterable[tuple[int, ControlFlag]],
                       levels: Mapping[int, CriticalityLevel] | None = None) -> ControlRegister:
    """Pack per-VM flags. With `levels`, entries are put in register order first."""
    entries = list(flags)
    vms = [vm for vm, _ in entries]
    if len(set(vms)) != len(vms):
        raise ContractError(f"duplicate VM in control flags: {vms}")
    if levels is not None:
        entries.sort(key=lambda e: (-levels[e[0]], e[0]))
    return ControlRegister(tuple((vm, ControlFlag(cf)) for vm, cf in entries))


def overhead_model(worst_case_cost: float, period: float) -> float:
    """Percent of each actuation period spent in the mechanism."""
    if period <= 0:
        raise ContractError("period must be positive")
    return 100.0 * worst_case_cost / period


class Instrumentation:
    """count / sum / max of durations (ns) per measuring point."""

    def __init__(self) -> None:
        self.count = dict.fromkeys(MEASURING_POINTS, 0)
        self.total = dict.fromkeys(MEASURING_POINTS, 0)
        self.max = dict.fromkeys(MEASURING_POINTS, 0)

    def record(self, point: str, ns: int) -> None:
        self.count[point] += 1
        self.total[point] += ns
        if ns > self.max[point]:
            self.max[point] = ns

    def mean(self, point: str) -> float:
        n = self.count[point]
        return self.total[point] / n if n else 0.0

    def rows(self) -> list[tuple[int, str, int, float, float]]:
        """(index, name, count, mean_us, max_us) for each of the seven points."""
        return [(i, p, self.count[p], self.mean(p) / 1000.0, self.max[p] / 1000.0)
                for i, p in enumerate(MEASURING_POINTS, 1)]


@dataclass
class TickResult:
    qos: dict[int, float]
    flags: dict[int, ControlFlag]
    register: ControlRegister
    mode: int
    writes: list[tuple[str, int]] = field(default_factory=list)
    total_ns: int = 0


class Rtm:
    """Timer-driven controller. Owns the distributor's enable bits for colored IRQs."""

    def __init__(self, config: SystemConfig, artifacts: Artifacts, distributor: Distributor,
                 stepwise: bool | None = None):
        self.config = config
        self.artifacts = artifacts
        self.distributor = distributor
        self.stepwise = config.stepwise_transitions if stepwise is None else stepwise
        self.instrumentation = Instrumentation()
        self.levels = {vm.vm: vm.level for vm in config.vms}
        # rank 0 = highest degradation effect
        self._rank = {e.irq.key: r for r, e in enumerate(artifacts.effects)}
        self.monitored = config.monitored_vms  # register order
        # Stage 0/1 order: every VM by id, QM skipped
        self._stage_order = [vm.vm for vm in config.vms if vm.level != CriticalityLevel.QM]
        self._mode_refs: dict[int, dict[int, EventVector]] = {}
        self.references: dict[int, EventVector] = dict(artifacts.references)
        self.last_register = ControlRegister(())
        self.current_mode = 0
        self._apply_mask(frozenset(), artifacts.masking_map[0])
        self.update_references(0)

    @property
    def mode_count(self) -> int:
        return len(self.artifacts.masking_map)

    def _rank_of(self, key: tuple[int, int]) -> tuple[int, int, int]:
        return (self._rank.get(key, len(self._rank)), key[0], key[1])

    def compute_dm(self, register: ControlRegister) -> int:
        target = self.artifacts.control_table.lookup(register)
        if not self.stepwise:
            return target
        if target > self.current_mode:
            return self.current_mode + 1
        if target < self.current_mode:
            return self.current_mode - 1
        return self.current_mode

    def _apply_mask(self, old, new) -> list[tuple[str, int]]:
        writes: list[tuple[str, int]] = []
        old_keys = {i.key: i for i in old}
        new_keys = {i.key: i for i in new}
        to_mask = sorted((k for k in new_keys if k not in old_keys), key=self._rank_of)
        to_unmask = sorted((k for k in old_keys if k not in new_keys), key=self._rank_of, reverse=True)
        for key in to_mask:
            pin = new_keys[key].pin
            self.distributor.disable_pin(pin)
            writes.append(("mask", pin))
        for key in to_unmask:
            pin = old_keys[key].pin
            self.distributor.enable_pin(pin)
            writes.append(("unmask", pin))
        return writes

    def mask_irqs(self, mode: int) -> list[tuple[str, int]]:
        """Move the distributor from the current mode's mask set to `mode`'s.

        Newly masked pins are cleared highest-effect first; restored pins are
        set lowest-effect first, so unmasking replays masking in reverse.
        """
        if not 0 <= mode < self.mode_count:
            raise ArtifactError(f"mode {mode} not in masking map")
        maps = self.artifacts.masking_map
        writes = self._apply_mask(maps[self.current_mode], maps[mode])
        self.current_mode = mode
        return writes

    def update_references(self, mode: int) -> None:
        """Rescale intermediate VMs' references to the tasks left unmasked in `mode`.

        The ASIL-D reference never changes. An intermediate VM's reference is
        its artifact reference times the fraction of its solo per-window
        events that come from tasks still unmasked in `mode`.
        """
        cached = self._mode_refs.get(mode)
        if cached is None:
            cached = self._mode_refs[mode] = self._references_for(mode)
        self.references.update(cached)

    def _references_for(self, mode: int) -> dict[int, EventVector]:
        masked = self.artifacts.masking_map.keys(mode)
        window = self.config.actuation_period
        refs = {}
        for vm_id in self.monitored:
            vm = self.config.vms[vm_id]
            base = self.artifacts.references[vm_id]
            if vm.level == CriticalityLevel.ASIL_D:
                refs[vm_id] = base
                continue
            full = derived_reference(vm.tasks, window)
            part = derived_reference(vm.tasks, window, [irq.key in masked for irq in vm.irqs])
            refs[vm_id] = EventVector(
                base.l2_accesses * part.l2_accesses / full.l2_accesses if full.l2_accesses else 0.0,
                base.bus_accesses * part.bus_accesses / full.bus_accesses if full.bus_accesses else 0.0,
            )
        return refs

    def tick(self, samples: Mapping[int, EventVector]) -> TickResult:
        """One timer interrupt: Stage 0 and 1 per monitored VM, then Stage 2 on the critical VM."""
        clock = time.perf_counter_ns
        inst = self.instrumentation
        t0 = clock()
        sampled = {vm: samples[vm] for vm in self.monitored if vm in samples}
        t1 = clock()
        inst.record("pmu_sampling", t1 - t0)
        missing = set(self.monitored) - set(sampled)
        if missing:
            raise ContractError(f"no PMU sample for VMs {sorted(missing)}")

        qos: dict[int, float] = {}
        flags: dict[int, ControlFlag] = {}
        weights = self.config.weights
        for vm in self._stage_order:
            ta = clock()
            q = compute_qos(sampled[vm], self.references[vm], weights)
            tb = clock()
            cf = decode_qos(q)
            tc = clock()
            inst.record("qos_computation", tb - ta)
            inst.record("qos_decoding", tc - tb)
            qos[vm], flags[vm] = q, cf

        ta = clock()
        # barrier: stage 2 reads flags only once every monitored VM has produced one
        ready = all(vm in flags for vm in self.monitored)
        tb = clock()
        inst.record("vm_synchronization", tb - ta)
        if not ready:
            raise ContractError("stage 2 entered before all flags were decoded")

        register = aggregate_register((vm, flags[vm]) for vm in self.monitored)
        mode = self.compute_dm(register)
        tc = clock()
        inst.record("control_logic", tc - tb)
        self.update_references(mode)
        td = clock()
        inst.record("reference_update", td - tc)
        writes = self.mask_irqs(mode)
        te = clock()
        inst.record("irq_masking", te - td)
        self.last_register = register
        return TickResult(qos, flags, register, mode, writes, te - t0)
