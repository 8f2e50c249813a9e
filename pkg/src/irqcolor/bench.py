"""Microbenchmark of the run-time mechanism on synthetic PMU samples."""

from __future__ import annotations

from dataclasses import dataclass

from .core import EventVector, SystemConfig
from .dtt import Artifacts, build_artifacts
from .gic import Distributor
from .rtm import Rtm, overhead_model

# fraction of the critical VM's reference seen per tick; walks every QoS band up and down
_CRITICAL_PROGRESS = (1.0, 0.6, 0.4, 0.1, 0.1, 0.1, 0.9, 0.9, 0.9, 1.0)


@dataclass
class BenchResult:
    points: list[tuple[int, str, int, float, float]]  # index, name, count, mean_us, max_us
    tick_mean_us: float
    tick_max_us: float
    iterations: int

    def overhead_rows(self, periods, worst_case_us: float) -> list[tuple[float, float, float, float, float]]:
        return [(p, self.tick_max_us, overhead_model(self.tick_max_us, p),
                 worst_case_us, overhead_model(worst_case_us, p)) for p in periods]


def run_bench(config: SystemConfig, artifacts: Artifacts | None = None,
              iterations: int = 10_000) -> BenchResult:
    if iterations < 1000:
        raise ValueError("bench needs at least 1000 iterations")
    artifacts = artifacts or build_artifacts(config)
    distributor = Distributor({irq.pin: irq.vm for irq in config.all_irqs()})
    rtm = Rtm(config, artifacts, distributor)
    critical = config.critical_vm
    total = 0
    worst = 0
    for i in range(iterations):
        frac = _CRITICAL_PROGRESS[i % len(_CRITICAL_PROGRESS)]
        samples = {}
        for vm in config.vms:
            ref = rtm.references.get(vm.vm, EventVector())
            samples[vm.vm] = ref.scaled(frac) if vm.vm == critical else ref
        ns = rtm.tick(samples).total_ns
        total += ns
        worst = max(worst, ns)
    return BenchResult(rtm.instrumentation.rows(), total / iterations / 1000.0, worst / 1000.0, iterations)
