import itertools

import pytest
from hypothesis import given, strategies as st

from conftest import make_config
from irqcolor.core import (
    ConfigError,
    ContractError,
    ControlFlag,
    ControlRegister,
    CriticalityLevel,
    EventVector,
    IrqId,
    MaskingMap,
    TaskProfile,
    Weights,
    derived_reference,
)

D, C, B, QM = 3, 2, 1, 0
T = (0.25, 1.0, 1.0, 100, 10)


def test_criticality_parse_accepts_short_and_dashed_forms():
    assert CriticalityLevel.parse("asil-d") is CriticalityLevel.ASIL_D
    assert CriticalityLevel.parse("B") is CriticalityLevel.ASIL_B
    assert CriticalityLevel.parse("qm") is CriticalityLevel.QM
    with pytest.raises(ConfigError):
        CriticalityLevel.parse("ASIL_E")


def test_irq_identity_ignores_pin():
    assert IrqId(1, 2, 40) == IrqId(1, 2, 99)
    assert sorted([IrqId(2, 0, 1), IrqId(1, 3, 2), IrqId(1, 0, 3)]) == [
        IrqId(1, 0, 3), IrqId(1, 3, 2), IrqId(2, 0, 1)]
    assert str(IrqId(3, 1, 0)) == "3:1"


def test_event_vector_rejects_negative_counts():
    with pytest.raises(ContractError):
        EventVector(-1.0, 0.0)
    assert EventVector(3, 4) - EventVector(5, 1) == EventVector(0.0, 3.0)
    assert EventVector(1, 2) + EventVector(3, 4) == EventVector(4, 6)


@pytest.mark.parametrize("w", [(0.6, 0.6), (-0.5, 1.5), (0.3, 0.3)])
def test_weights_must_be_a_convex_pair(w):
    with pytest.raises(ConfigError):
        Weights(*w)


def test_task_expected_events_scale_with_utilization():
    t = TaskProfile(0.5, 100.0, 10.0, period=1000, wcet_solo=250)
    assert t.expected_events(100) == EventVector(100 * 100 * 0.25, 10 * 100 * 0.25)
    busy = TaskProfile(0.5, 2.0, 1.0, period=10, wcet_solo=50)
    assert busy.utilization == 1.0


def test_config_requires_exactly_one_asil_d_vm():
    with pytest.raises(ConfigError):
        make_config([(C, [T]), (QM, [T])])
    with pytest.raises(ConfigError):
        make_config([(D, [T]), (D, [T])])


def test_config_rejects_duplicate_pins():
    cfg = make_config([(D, [T]), (QM, [T, T])])
    vm1 = cfg.vms[1]
    clash = type(vm1)(1, vm1.level, (IrqId(1, 0, 32), IrqId(1, 1, 34)), vm1.tasks)
    with pytest.raises(ConfigError, match="unique"):
        type(cfg)((cfg.vms[0], clash))


def test_config_tick_must_divide_period():
    with pytest.raises(ConfigError):
        make_config([(D, [T])], actuation_period=10, tick=3)


def test_monitored_order_is_criticality_then_id():
    cfg = make_config([(B, [T]), (QM, [T]), (D, [T]), (C, [T]), (B, [T])])
    assert cfg.monitored_vms == [2, 3, 0, 4]
    assert cfg.critical_vm == 2


def test_derived_reference_skips_masked_tasks():
    tasks = [TaskProfile(0.1, 1.0, 2.0, 100, 100), TaskProfile(0.1, 3.0, 4.0, 100, 50)]
    assert derived_reference(tasks, 10) == EventVector(10 + 15, 20 + 20)
    assert derived_reference(tasks, 10, [True, False]) == EventVector(15, 20)


def test_register_layout_puts_critical_flag_in_low_bits():
    # D:T3 in bits 0-1, C:T1 in bits 2-3, B:T0 in bits 4-5 -> 0b00_01_11
    reg = ControlRegister(((0, ControlFlag.T3), (1, ControlFlag.T1), (2, ControlFlag.T0)))
    assert reg.value == 0b000111 == 0x07
    assert ControlRegister(((0, ControlFlag.T0),)).value == 0
    assert ControlRegister(()).value == 0


@pytest.mark.parametrize("v", range(1, 5))
def test_register_pack_unpack_identity_exhaustive(v):
    order = list(range(v))
    for flags in itertools.product(ControlFlag, repeat=v):
        reg = ControlRegister(tuple(zip(order, flags)))
        back = ControlRegister.unpack(reg.value, order)
        assert back == reg
        assert back.value == reg.value


def test_register_unpack_rejects_wide_values():
    with pytest.raises(ContractError):
        ControlRegister.unpack(1 << 4, [0, 1])


@given(st.lists(st.sampled_from(list(ControlFlag)), min_size=1, max_size=6))
def test_register_flag_lookup(flags):
    reg = ControlRegister(tuple(enumerate(flags)))
    for vm, cf in enumerate(flags):
        assert reg.flag_of(vm) == cf
        assert (reg.value >> (2 * vm)) & 3 == cf


def test_masking_map_equality_ignores_listing_order():
    a = MaskingMap([[], [IrqId(1, 0, 5), IrqId(1, 1, 6)]])
    b = MaskingMap([[], [IrqId(1, 1, 6), IrqId(1, 0, 5)]])
    assert a == b
    assert a.fail_safe == 1
    assert a.keys(1) == {(1, 0), (1, 1)}
