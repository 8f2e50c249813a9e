"""Line-oriented config and scenario files.

Config grammar (one directive per line, ``#`` starts a comment)::

    version 1
    period <actuation period, us>
    weights <w_l2> <w_bus>
    modes <mode count>
    alpha <a>
    beta <b>
    llc <bytes>
    tick <us>
    stepwise on|off
    vm <id> <ASIL_D|ASIL_C|ASIL_B|QM>
    irq <vm>:<k> pin <pin> buffer <bytes> l2 <per us> bus <per us> period <us> wcet <us>
    ref <vm> <l2 per window> <bus per window>

Scenario grammar::

    periodic <vm>:<k> <period us> [offset <us>]
    at <time us> trigger <vm>:<k>
    at <time us> set-interference <vm> <scale>
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace

from .core import (
    ConfigError,
    CriticalityLevel,
    EventVector,
    IrqId,
    SystemConfig,
    TaskProfile,
    VmConfig,
    Weights,
)
from .dtt import _num

_IRQ_FIELDS = ("pin", "buffer", "l2", "bus", "period", "wcet")


def _split_ref(token: str) -> tuple[int, int]:
    vm, sep, k = token.partition(":")
    if not sep:
        raise ValueError(f"bad IRQ reference {token!r}, expected <vm>:<k>")
    return int(vm), int(k)


def _on_off(token: str) -> bool:
    if token not in ("on", "off"):
        raise ValueError(f"expected on|off, got {token!r}")
    return token == "on"


def loads_config(text: str, source: str = "<config>") -> SystemConfig:
    settings: dict = {}
    vms: dict[int, CriticalityLevel] = {}
    irqs: dict[int, dict[int, tuple[int, dict[str, float]]]] = {}
    refs: dict[int, EventVector] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        try:
            if key == "version":
                if args != ["1"]:
                    raise ValueError(f"unsupported config version {' '.join(args)}")
            elif key == "period":
                settings["actuation_period"] = int(args[0])
            elif key == "weights":
                a, b = args
                settings["weights"] = Weights(float(a), float(b))
            elif key == "modes":
                settings["mode_count"] = int(args[0])
            elif key in ("alpha", "beta"):
                settings[key] = float(args[0])
            elif key == "llc":
                settings["llc_size"] = int(args[0])
            elif key == "tick":
                settings["tick"] = int(args[0])
            elif key == "stepwise":
                settings["stepwise_transitions"] = _on_off(args[0])
            elif key == "vm":
                vm, level = args
                if int(vm) in vms:
                    raise ValueError(f"VM {vm} declared twice")
                vms[int(vm)] = CriticalityLevel.parse(level)
            elif key == "irq":
                vm, k = _split_ref(args[0])
                rest = args[1:]
                if len(rest) != 2 * len(_IRQ_FIELDS):
                    raise ValueError("irq line needs " + " ".join(f"{f} <v>" for f in _IRQ_FIELDS))
                fields = dict(zip(rest[::2], rest[1::2]))
                if set(fields) != set(_IRQ_FIELDS):
                    raise ValueError(f"irq fields must be exactly {_IRQ_FIELDS}")
                if k in irqs.setdefault(vm, {}):
                    raise ValueError(f"IRQ {vm}:{k} declared twice")
                irqs[vm][k] = (lineno, {f: float(v) for f, v in fields.items()})
            elif key == "ref":
                vm, l2, bus = args
                refs[int(vm)] = EventVector(float(l2), float(bus))
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, IndexError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None

    llc = settings.get("llc_size", 1 << 20)
    vm_cfgs = []
    for vm_id in sorted(vms):
        ids, tasks = [], []
        entries = irqs.get(vm_id, {})
        if sorted(entries) != list(range(len(entries))):
            raise ConfigError(f"{source}: VM {vm_id} IRQ indices must be 0..N-1")
        for k in range(len(entries)):
            lineno, f = entries[k]
            try:
                tasks.append(TaskProfile(f["buffer"] / llc, f["l2"], f["bus"],
                                         int(f["period"]), f["wcet"]))
            except ConfigError as exc:
                raise ConfigError(f"{source}:{lineno}: {exc}") from None
            ids.append(IrqId(vm_id, k, int(f["pin"])))
        vm_cfgs.append(VmConfig(vm_id, vms[vm_id], tuple(ids), tuple(tasks), refs.get(vm_id)))
    unknown = (set(irqs) | set(refs)) - set(vms)
    if unknown:
        raise ConfigError(f"{source}: IRQs or refs for undeclared VMs {sorted(unknown)}")
    try:
        return SystemConfig(tuple(vm_cfgs), **settings)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path: str | os.PathLike) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        return loads_config(fh.read(), source=str(path))


def dumps_config(config: SystemConfig) -> str:
    lines = [
        "version 1",
        f"period {config.actuation_period}",
        f"weights {_num(config.weights.w_l2)} {_num(config.weights.w_bus)}",
        f"modes {config.mode_count}",
        f"alpha {_num(config.alpha)}",
        f"beta {_num(config.beta)}",
        f"llc {config.llc_size}",
        f"tick {config.tick}",
        f"stepwise {'on' if config.stepwise_transitions else 'off'}",
    ]
    for vm in config.vms:
        lines.append(f"vm {vm.vm} {vm.level.name}")
    for vm in config.vms:
        for irq, t in zip(vm.irqs, vm.tasks):
            lines.append(
                f"irq {irq.vm}:{irq.k} pin {irq.pin} buffer {_num(t.footprint_fraction * config.llc_size)} "
                f"l2 {_num(t.l2_rate)} bus {_num(t.bus_rate)} period {t.period} wcet {_num(t.wcet_solo)}")
    for vm in config.vms:
        if vm.reference is not None:
            lines.append(f"ref {vm.vm} {_num(vm.reference.l2_accesses)} {_num(vm.reference.bus_accesses)}")
    return "\n".join(lines) + "\n"


def with_params(config: SystemConfig, **changes) -> SystemConfig:
    """Copy of `config` with top-level settings replaced (alpha, beta, stepwise_transitions, ...)."""
    return replace(config, **{k: v for k, v in changes.items() if v is not None})


@dataclass(frozen=True)
class Directive:
    time: int
    kind: str  # "trigger" | "set-interference"
    vm: int
    k: int = -1
    scale: float = 1.0


@dataclass
class Scenario:
    periodic: dict[tuple[int, int], tuple[int, int | None]] = field(default_factory=dict)
    directives: list[Directive] = field(default_factory=list)

    def check(self, config: SystemConfig) -> None:
        for vm, k in self.periodic:
            config.irq(vm, k)
        for d in self.directives:
            if not 0 <= d.vm < len(config.vms):
                raise ConfigError(f"scenario references unknown VM {d.vm}")
            if d.kind == "trigger":
                config.irq(d.vm, d.k)


def loads_scenario(text: str, source: str = "<scenario>") -> Scenario:
    sc = Scenario()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        try:
            if key == "periodic":
                vm, k = _split_ref(args[0])
                period = int(args[1])
                offset = None
                if len(args) == 4 and args[2] == "offset":
                    offset = int(args[3])
                elif len(args) != 2:
                    raise ValueError("expected 'periodic <vm>:<k> <period> [offset <us>]'")
                if period < 0 or (offset is not None and offset < 0):
                    raise ValueError("period and offset must be non-negative")
                sc.periodic[(vm, k)] = (period, offset)
            elif key == "at":
                t = int(args[0])
                if t < 0:
                    raise ValueError("negative time")
                what = args[1]
                if what == "trigger" and len(args) == 3:
                    vm, k = _split_ref(args[2])
                    sc.directives.append(Directive(t, "trigger", vm, k))
                elif what == "set-interference" and len(args) == 4:
                    scale = float(args[3])
                    if scale < 0:
                        raise ValueError("interference scale must be non-negative")
                    sc.directives.append(Directive(t, "set-interference", int(args[2]), scale=scale))
                else:
                    raise ValueError(f"bad directive {' '.join(args[1:])!r}")
            else:
                raise ValueError(f"unknown key {key!r}")
        except (ValueError, IndexError) as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    sc.directives.sort(key=lambda d: d.time)
    return sc


def load_scenario(path: str | os.PathLike) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return loads_scenario(fh.read(), source=str(path))
