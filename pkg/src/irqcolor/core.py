"""Domain types shared by the design-time tool, the run-time mechanism and the simulator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable


class ConfigError(ValueError):
    """Raised for malformed or inconsistent system descriptions."""


class ContractError(ValueError):
    """Raised when an operation is called outside its preconditions."""


class CriticalityLevel(enum.IntEnum):
    QM = 0
    ASIL_B = 1
    ASIL_C = 2
    ASIL_D = 3

    @classmethod
    def parse(cls, text: str) -> "CriticalityLevel":
        key = text.strip().upper().replace("-", "_")
        if key in ("D", "C", "B"):
            key = "ASIL_" + key
        try:
            return cls[key]
        except KeyError:
            raise ConfigError(f"unknown criticality level {text!r}") from None


class ControlFlag(enum.IntEnum):
    """2-bit QoS band. T0 is the best band, T3 the worst."""

    T0 = 0b00
    T1 = 0b01
    T2 = 0b10
    T3 = 0b11


@dataclass(frozen=True, order=True)
class IrqId:
    vm: int
    k: int
    pin: int = field(compare=False)

    def __str__(self) -> str:
        return f"{self.vm}:{self.k}"

    @property
    def key(self) -> tuple[int, int]:
        return (self.vm, self.k)


@dataclass(frozen=True)
class EventVector:
    """PMU deltas over one actuation window: L2 accesses and bus accesses."""

    l2_accesses: float = 0.0
    bus_accesses: float = 0.0

    def __post_init__(self) -> None:
        if self.l2_accesses < 0 or self.bus_accesses < 0:
            raise ContractError(f"negative event count in {self}")

    def __add__(self, other: "EventVector") -> "EventVector":
        return EventVector(self.l2_accesses + other.l2_accesses,
                           self.bus_accesses + other.bus_accesses)

    def __sub__(self, other: "EventVector") -> "EventVector":
        # Cumulative counters only grow; clamp float noise at zero.
        return EventVector(max(0.0, self.l2_accesses - other.l2_accesses),
                           max(0.0, self.bus_accesses - other.bus_accesses))

    def scaled(self, factor: float) -> "EventVector":
        return EventVector(self.l2_accesses * factor, self.bus_accesses * factor)


@dataclass(frozen=True)
class Weights:
    w_l2: float = 0.5
    w_bus: float = 0.5

    def __post_init__(self) -> None:
        if self.w_l2 < 0 or self.w_bus < 0 or abs(self.w_l2 + self.w_bus - 1.0) > 1e-9:
            raise ConfigError(f"weights must be non-negative and sum to 1, got {self}")


@dataclass(frozen=True)
class TaskProfile:
    """Solo (interference-free) profile of the workload activated by one IRQ."""

    footprint_fraction: float
    l2_rate: float  # events per microsecond of solo execution
    bus_rate: float
    period: int  # microseconds between activations
    wcet_solo: float  # microseconds

    def __post_init__(self) -> None:
        if not 0.0 <= self.footprint_fraction <= 1.0:
            raise ConfigError(f"footprint fraction {self.footprint_fraction} outside [0, 1]")
        if self.l2_rate < 0 or self.bus_rate < 0:
            raise ConfigError("event rates must be non-negative")
        if self.period <= 0 or self.wcet_solo <= 0:
            raise ConfigError("period and wcet must be positive")

    @property
    def utilization(self) -> float:
        return min(1.0, self.wcet_solo / self.period)

    def expected_events(self, window: float) -> EventVector:
        """Events this task produces in `window` microseconds when running solo."""
        busy = window * self.utilization
        return EventVector(self.l2_rate * busy, self.bus_rate * busy)


@dataclass(frozen=True)
class VmConfig:
    vm: int
    level: CriticalityLevel
    irqs: tuple[IrqId, ...]
    tasks: tuple[TaskProfile, ...]
    reference: EventVector | None = None  # explicit per-window reference, else derived

    def task(self, k: int) -> TaskProfile:
        return self.tasks[k]


@dataclass(frozen=True)
class SystemConfig:
    vms: tuple[VmConfig, ...]
    weights: Weights = Weights()
    actuation_period: int = 100
    mode_count: int = 4
    alpha: float = 1.0
    beta: float = 0.0
    llc_size: int = 1 << 20
    stepwise_transitions: bool = True
    tick: int = 1

    def __post_init__(self) -> None:
        if self.actuation_period <= 0:
            raise ConfigError("actuation period must be positive")
        if self.tick <= 0 or self.actuation_period % self.tick:
            raise ConfigError("actuation period must be a multiple of the tick quantum")
        if self.mode_count < 2:
            raise ConfigError("need at least mode 0 and the fail-safe mode")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("interference parameters must be non-negative")
        for idx, vm in enumerate(self.vms):
            if vm.vm != idx:
                raise ConfigError(f"VM ids must be 0..M-1 in order, got {vm.vm} at position {idx}")
            if len(vm.irqs) != len(vm.tasks):
                raise ConfigError(f"VM {vm.vm}: every IRQ needs exactly one task profile")
            for k, irq in enumerate(vm.irqs):
                if irq.vm != vm.vm or irq.k != k:
                    raise ConfigError(f"VM {vm.vm}: IRQ {irq} out of place (expected {vm.vm}:{k})")
        pins = [irq.pin for irq in self.all_irqs()]
        if len(set(pins)) != len(pins):
            raise ConfigError("physical pins must be unique system-wide")
        if any(p < 0 for p in pins):
            raise ConfigError("pins must be non-negative")
        d_count = sum(1 for vm in self.vms if vm.level == CriticalityLevel.ASIL_D)
        if d_count != 1:
            raise ConfigError(f"exactly one ASIL-D VM required, found {d_count}")

    def all_irqs(self) -> Iterable[IrqId]:
        for vm in self.vms:
            yield from vm.irqs

    def irq(self, vm: int, k: int) -> IrqId:
        try:
            return self.vms[vm].irqs[k]
        except IndexError:
            raise ConfigError(f"unknown IRQ {vm}:{k}") from None

    def task_of(self, irq: IrqId) -> TaskProfile:
        return self.vms[irq.vm].tasks[irq.k]

    def level_of(self, vm: int) -> CriticalityLevel:
        return self.vms[vm].level

    @property
    def critical_vm(self) -> int:
        return next(vm.vm for vm in self.vms if vm.level == CriticalityLevel.ASIL_D)

    @property
    def monitored_vms(self) -> list[int]:
        """Non-QM VMs in control-register order: criticality descending, then id."""
        vms = [vm for vm in self.vms if vm.level != CriticalityLevel.QM]
        vms.sort(key=lambda v: (-v.level, v.vm))
        return [vm.vm for vm in vms]

    @property
    def max_bus_rate(self) -> float:
        return max((t.bus_rate for vm in self.vms for t in vm.tasks), default=0.0)

    def reference(self, vm: int) -> EventVector:
        cfg = self.vms[vm]
        if cfg.reference is not None:
            return cfg.reference
        return derived_reference(cfg.tasks, self.actuation_period)


def derived_reference(tasks: Iterable[TaskProfile], window: float,
                      masked: Iterable[bool] | None = None) -> EventVector:
    """Sum of solo per-window events over the unmasked tasks."""
    total = EventVector()
    flags = list(masked) if masked is not None else None
    for idx, task in enumerate(tasks):
        if flags is not None and flags[idx]:
            continue
        total = total + task.expected_events(window)
    return total


@dataclass(frozen=True)
class ControlRegister:
    """Aggregated control flags, one 2-bit field per monitored VM.

    Entry j occupies bits [2j, 2j+1]; entries are ordered by descending
    criticality, then ascending VM id.
    """

    flags: tuple[tuple[int, ControlFlag], ...]

    @cached_property
    def value(self) -> int:
        packed = 0
        for j, (_, cf) in enumerate(self.flags):
            packed |= int(cf) << (2 * j)
        return packed

    @classmethod
    def unpack(cls, value: int, vm_order: Iterable[int]) -> "ControlRegister":
        order = list(vm_order)
        if value < 0 or value >> (2 * len(order)):
            raise ContractError(f"register value {value:#x} too wide for {len(order)} VMs")
        return cls(tuple((vm, ControlFlag((value >> (2 * j)) & 0b11)) for j, vm in enumerate(order)))

    def flag_of(self, vm: int) -> ControlFlag:
        for v, cf in self.flags:
            if v == vm:
                return cf
        raise KeyError(vm)


class MaskingMap:
    """Per degradation mode, the set of masked IRQs. The last mode is fail-safe."""

    def __init__(self, modes: Iterable[Iterable[IrqId]]):
        self._modes = tuple(frozenset(m) for m in modes)

    def __len__(self) -> int:
        return len(self._modes)

    def __getitem__(self, mode: int) -> frozenset[IrqId]:
        return self._modes[mode]

    def __iter__(self):
        return iter(self._modes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MaskingMap):
            return NotImplemented
        return [sorted(m) for m in self._modes] == [sorted(m) for m in other._modes]

    def __repr__(self) -> str:
        rows = ", ".join("{" + " ".join(str(i) for i in sorted(m)) + "}" for m in self._modes)
        return f"MaskingMap([{rows}])"

    @property
    def fail_safe(self) -> int:
        return len(self._modes) - 1

    def keys(self, mode: int) -> set[tuple[int, int]]:
        return {irq.key for irq in self._modes[mode]}


def clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x

