"""Design-time tool: degradation effects, masking maps, control table and artifact files."""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import (
    ConfigError,
    ControlFlag,
    ControlRegister,
    CriticalityLevel,
    EventVector,
    IrqId,
    MaskingMap,
    SystemConfig,
    Weights,
)

ARTIFACT_VERSION = 1


class ArtifactError(ValueError):
    """Malformed, invalid or mismatched artifact."""


class ControlTableError(ArtifactError):
    """A control table breaks totality or monotonicity in the critical flag."""

    def __init__(self, message: str, witness: tuple[int, int] | None = None):
        super().__init__(message)
        self.witness = witness


@dataclass(frozen=True)
class DegradationEffect:
    irq: IrqId
    effect: float


def interference_weight(config: SystemConfig, irq: IrqId) -> float:
    """Footprint plus beta-weighted normalized bus rate of one IRQ's task."""
    task = config.task_of(irq)
    max_bus = config.max_bus_rate
    bus_term = task.bus_rate / max_bus if max_bus > 0 else 0.0
    return task.footprint_fraction + config.beta * bus_term


def compute_effects(config: SystemConfig) -> list[DegradationEffect]:
    """Degradation effect of every non-ASIL-D IRQ, highest effect first.

    Ties are broken by VM criticality (lower first), then VM id, then k.
    """
    effects = [
        DegradationEffect(irq, interference_weight(config, irq))
        for vm in config.vms if vm.level != CriticalityLevel.ASIL_D
        for irq in vm.irqs
    ]
    effects.sort(key=lambda e: (-e.effect, config.level_of(e.irq.vm), e.irq.vm, e.irq.k))
    return effects


def generate_masking_map(config: SystemConfig, effects: list[DegradationEffect]) -> MaskingMap:
    ordered = [e.irq for e in effects]
    fill_modes = config.mode_count - 2
    modes: list[list[IrqId]] = [[]]
    if fill_modes > 0:
        chunk = max(1, math.ceil(len(ordered) / fill_modes))
        for m in range(1, fill_modes + 1):
            modes.append(ordered[:min(m * chunk, len(ordered))])
    modes.append(ordered)
    return MaskingMap(modes)


@dataclass(frozen=True)
class Violation:
    kind: str  # "nesting" | "asil-d" | "fail-safe" | "mode-count" | "unknown-irq"
    mode: int
    irq: IrqId | None
    detail: str = ""

    def __str__(self) -> str:
        where = f"mode {self.mode}" + (f" irq {self.irq}" if self.irq is not None else "")
        return f"{self.kind}: {where}" + (f" ({self.detail})" if self.detail else "")


def validate_masking_map(masking: MaskingMap, config: SystemConfig) -> list[Violation]:
    """Check nesting, ASIL-D exclusion and fail-safe totality. Empty list means valid."""
    report: list[Violation] = []
    if len(masking) != config.mode_count:
        report.append(Violation("mode-count", len(masking) - 1, None,
                                f"map has {len(masking)} modes, config expects {config.mode_count}"))
    known = {irq.key for irq in config.all_irqs()}
    for m, masked in enumerate(masking):
        for irq in sorted(masked):
            if irq.key not in known:
                report.append(Violation("unknown-irq", m, irq))
            elif config.level_of(irq.vm) == CriticalityLevel.ASIL_D:
                report.append(Violation("asil-d", m, irq, "critical IRQs are never masked"))
    for m in range(len(masking) - 1):
        lower, upper = masking.keys(m), masking.keys(m + 1)
        for key in sorted(lower - upper):
            report.append(Violation("nesting", m + 1, config.irq(*key),
                                    f"masked in mode {m} but not in mode {m + 1}"))
    if len(masking):
        fs = masking.fail_safe
        masked_fs = masking.keys(fs)
        for vm in config.vms:
            if vm.level == CriticalityLevel.ASIL_D:
                continue
            for irq in vm.irqs:
                if irq.key not in masked_fs:
                    report.append(Violation("fail-safe", fs, irq, "fail-safe must mask it"))
    return report


class ControlTable:
    """Total lookup from packed control register to degradation mode."""

    def __init__(self, vm_order: Iterable[int], critical_vm: int, mode_count: int,
                 entries: Mapping[int, int]):
        self.vm_order = tuple(vm_order)
        self.critical_vm = critical_vm
        self.mode_count = mode_count
        self.entries = dict(entries)

    @property
    def size(self) -> int:
        return 4 ** len(self.vm_order)

    @property
    def critical_slot(self) -> int:
        return self.vm_order.index(self.critical_vm)

    def critical_flag(self, value: int) -> ControlFlag:
        return ControlFlag((value >> (2 * self.critical_slot)) & 0b11)

    def default_mode(self, value: int) -> int:
        return min(int(self.critical_flag(value)), self.mode_count - 1)

    def lookup(self, register: ControlRegister | int) -> int:
        value = register if isinstance(register, int) else register.value
        try:
            return self.entries[value]
        except KeyError:
            raise ArtifactError(f"control table has no entry for register {value:#x}") from None

    def overrides(self) -> dict[int, int]:
        """Entries that differ from the default critical-flag table."""
        return {v: m for v, m in sorted(self.entries.items()) if m != self.default_mode(v)}

    def check(self) -> None:
        for value in range(self.size):
            if value not in self.entries:
                raise ControlTableError(f"register {value:#x} has no entry")
            mode = self.entries[value]
            if not 0 <= mode < self.mode_count:
                raise ControlTableError(f"register {value:#x} maps to invalid mode {mode}")
        shift = 2 * self.critical_slot
        for value in range(self.size):
            cf = (value >> shift) & 0b11
            if cf == 3:
                continue
            worse = value + (1 << shift)
            if self.entries[worse] < self.entries[value]:
                raise ControlTableError(
                    f"not monotone in the critical flag: {worse:#x} -> {self.entries[worse]} "
                    f"but {value:#x} -> {self.entries[value]}", witness=(worse, value))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ControlTable):
            return NotImplemented
        return (self.vm_order, self.critical_vm, self.mode_count, self.entries) == \
            (other.vm_order, other.critical_vm, other.mode_count, other.entries)


def generate_control_table(config: SystemConfig,
                           overrides: Mapping[int, int] | None = None) -> ControlTable:
    """Default table keyed on the ASIL-D flag only: Tk -> min(k, mode_count - 1)."""
    table = ControlTable(config.monitored_vms, config.critical_vm, config.mode_count, {})
    table.entries = {v: table.default_mode(v) for v in range(table.size)}
    for value, mode in (overrides or {}).items():
        if not 0 <= value < table.size:
            raise ControlTableError(f"override register {value:#x} out of range")
        table.entries[value] = mode
    table.check()
    return table


@dataclass
class Artifacts:
    masking_map: MaskingMap
    control_table: ControlTable
    references: dict[int, EventVector]
    weights: Weights
    actuation_period: int
    effects: list[DegradationEffect] = field(default_factory=list, compare=False)


def build_artifacts(config: SystemConfig, masking: MaskingMap | None = None,
                    ctl_overrides: Mapping[int, int] | None = None,
                    references: Mapping[int, EventVector] | None = None) -> Artifacts:
    """Run the pipeline: effects, masking map (user map wins), control table."""
    effects = compute_effects(config)
    if masking is None:
        masking = generate_masking_map(config, effects)
    refs = {vm: config.reference(vm) for vm in config.monitored_vms}
    refs.update(references or {})
    return Artifacts(masking, generate_control_table(config, ctl_overrides), refs,
                     config.weights, config.actuation_period, effects)


def _num(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def format_mode_line(mode: int, masked: Iterable[IrqId]) -> str:
    items = sorted(masked)
    body = " ".join(f"{i.vm}:{i.k}" for i in items) if items else "none"
    return f"mode {mode} mask {body}"


def dumps_artifacts(artifacts: Artifacts) -> str:
    lines = [
        f"version {ARTIFACT_VERSION}",
        f"period {artifacts.actuation_period}",
        f"weights {_num(artifacts.weights.w_l2)} {_num(artifacts.weights.w_bus)}",
    ]
    for vm in artifacts.control_table.vm_order:
        ref = artifacts.references[vm]
        lines.append(f"ref {vm} {_num(ref.l2_accesses)} {_num(ref.bus_accesses)}")
    for m, masked in enumerate(artifacts.masking_map):
        lines.append(format_mode_line(m, masked))
    lines.append("ctl default-d")
    for value, mode in artifacts.control_table.overrides().items():
        lines.append(f"ctl {value:#x} {mode}")
    return "\n".join(lines) + "\n"


def export_artifacts(artifacts: Artifacts, path: str | os.PathLike, config: SystemConfig) -> None:
    problems = validate_masking_map(artifacts.masking_map, config)
    if problems:
        raise ArtifactError("refusing to export invalid artifacts: " + "; ".join(map(str, problems)))
    artifacts.control_table.check()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_artifacts(artifacts))


@dataclass
class ArtifactLines:
    """Raw content of an artifact-grammar file; all keys optional."""

    version: int | None = None
    period: int | None = None
    weights: Weights | None = None
    refs: dict[int, EventVector] = field(default_factory=dict)
    modes: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    ctl_default: bool = False
    ctl: dict[int, int] = field(default_factory=dict)


def parse_artifact_lines(text: str, source: str = "<artifact>") -> ArtifactLines:
    out = ArtifactLines()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key, args = parts[0], parts[1:]
        try:
            if key == "version":
                (v,) = args
                out.version = int(v)
                if out.version != ARTIFACT_VERSION:
                    raise ValueError(f"unsupported version {v}")
            elif key == "period":
                (p,) = args
                out.period = int(p)
            elif key == "weights":
                a, b = args
                out.weights = Weights(float(a), float(b))
            elif key == "ref":
                vm, l2, bus = args
                out.refs[int(vm)] = EventVector(float(l2), float(bus))
            elif key == "mode":
                idx, kw, *items = args
                if kw != "mask" or not items:
                    raise ValueError("expected 'mode <index> mask <vm>:<k> ...|none'")
                mode = int(idx)
                if mode in out.modes:
                    raise ValueError(f"mode {mode} listed twice")
                if items == ["none"]:
                    out.modes[mode] = []
                else:
                    out.modes[mode] = [_parse_irq_ref(tok) for tok in items]
            elif key == "ctl":
                if args == ["default-d"]:
                    out.ctl_default = True
                else:
                    reg, mode = args
                    out.ctl[int(reg, 16)] = int(mode)
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, ConfigError) as exc:
            raise ArtifactError(f"{source}:{lineno}: {exc}") from None
    return out


def _parse_irq_ref(token: str) -> tuple[int, int]:
    vm, sep, k = token.partition(":")
    if not sep:
        raise ValueError(f"bad IRQ reference {token!r}, expected <vm>:<k>")
    return int(vm), int(k)


def masking_map_from_lines(modes: Mapping[int, list[tuple[int, int]]],
                           config: SystemConfig) -> MaskingMap:
    if sorted(modes) != list(range(len(modes))):
        raise ArtifactError(f"mode indices must be 0..n-1, got {sorted(modes)}")
    try:
        return MaskingMap([config.irq(vm, k) for vm, k in modes[m]] for m in range(len(modes)))
    except ConfigError as exc:
        raise ArtifactError(str(exc)) from None


def loads_artifacts(text: str, config: SystemConfig, source: str = "<artifact>") -> Artifacts:
    """Parse an artifact file against the config it was generated from."""
    raw = parse_artifact_lines(text, source)
    if raw.version is None or raw.period is None or raw.weights is None:
        raise ArtifactError(f"{source}: missing version/period/weights")
    if raw.period != config.actuation_period:
        raise ArtifactError(f"{source}: period {raw.period} does not match config "
                            f"{config.actuation_period}")
    masking = masking_map_from_lines(raw.modes, config)
    if len(masking) != config.mode_count:
        raise ArtifactError(f"{source}: {len(masking)} modes, config expects {config.mode_count}")
    problems = validate_masking_map(masking, config)
    if problems:
        raise ArtifactError(f"{source}: " + "; ".join(map(str, problems)))
    if set(raw.refs) != set(config.monitored_vms):
        raise ArtifactError(f"{source}: references for VMs {sorted(raw.refs)} do not match "
                            f"monitored VMs {config.monitored_vms}")
    table = ControlTable(config.monitored_vms, config.critical_vm, config.mode_count, {})
    if raw.ctl_default:
        table.entries = {v: table.default_mode(v) for v in range(table.size)}
    for value, mode in raw.ctl.items():
        if not 0 <= value < table.size:
            raise ArtifactError(f"{source}: register {value:#x} out of range")
        table.entries[value] = mode
    table.check()
    return Artifacts(masking, table, dict(raw.refs), raw.weights, raw.period, compute_effects(config))


def import_artifacts(path: str | os.PathLike, config: SystemConfig) -> Artifacts:
    with open(path, encoding="utf-8") as fh:
        return loads_artifacts(fh.read(), config, source=str(path))


def enumerate_registers(vm_count: int) -> Iterable[tuple[ControlFlag, ...]]:
    return itertools.product(ControlFlag, repeat=vm_count)
