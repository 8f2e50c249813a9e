import pytest
from hypothesis import strategies as st

from irqcolor import fixture_path
from irqcolor.core import CriticalityLevel, IrqId, SystemConfig, TaskProfile, VmConfig
from irqcolor.formats import load_config


def make_config(vms, **settings):
    """vms: list of (level, [(footprint, l2, bus, period, wcet), ...]). Pins are assigned 32, 33, ..."""
    pin = 32
    out = []
    for vm_id, (level, tasks) in enumerate(vms):
        irqs, profiles = [], []
        for k, t in enumerate(tasks):
            irqs.append(IrqId(vm_id, k, pin))
            profiles.append(TaskProfile(*t))
            pin += 1
        out.append(VmConfig(vm_id, CriticalityLevel(level), tuple(irqs), tuple(profiles)))
    return SystemConfig(tuple(out), **settings)


LEVELS = [CriticalityLevel.QM, CriticalityLevel.ASIL_B, CriticalityLevel.ASIL_C]

task_st = st.tuples(
    st.sampled_from([0.0, 0.0625, 0.125, 0.25, 0.5, 1.0]),
    st.sampled_from([0.0, 0.5, 1.0, 2.0]),
    st.sampled_from([0.0, 0.1, 0.5, 1.0]),
    st.integers(20, 200),
    st.integers(1, 60),
)


@st.composite
def configs(draw, max_vms=6, max_irqs=8, min_irqs=0, mode_counts=(2, 3, 4, 5, 6), **settings):
    """Random valid configs: VM 0 is ASIL-D, the rest are drawn from QM/B/C."""
    n_vms = draw(st.integers(1, max_vms))
    vms = [(CriticalityLevel.ASIL_D, draw(st.lists(task_st, min_size=1, max_size=max_irqs)))]
    for _ in range(n_vms - 1):
        vms.append((draw(st.sampled_from(LEVELS)),
                    draw(st.lists(task_st, min_size=min_irqs, max_size=max_irqs))))
    beta = draw(st.sampled_from([0.0, 0.5, 1.0]))
    params = dict(mode_count=draw(st.sampled_from(mode_counts)), beta=beta)
    params.update(settings)
    return make_config(vms, **params)


@pytest.fixture(scope="session")
def dual():
    return load_config(fixture_path("dual_vm.cfg"))


@pytest.fixture(scope="session")
def quad1():
    return load_config(fixture_path("quad_setup1.cfg"))


@pytest.fixture(scope="session")
def quad2():
    return load_config(fixture_path("quad_setup2.cfg"))
