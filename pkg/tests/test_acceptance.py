"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v`` (lines go straight to
the terminal) or ``python tests/test_acceptance.py``.
"""

import itertools
import random
import sys
import time

import pytest

from irqcolor import fixture_path
from irqcolor.cli import main
from irqcolor.core import (
    ControlFlag,
    ControlRegister,
    CriticalityLevel,
    EventVector,
    IrqId,
    SystemConfig,
    TaskProfile,
    VmConfig,
)
from irqcolor.dtt import (
    build_artifacts,
    compute_effects,
    dumps_artifacts,
    export_artifacts,
    generate_masking_map,
    import_artifacts,
    masking_map_from_lines,
    parse_artifact_lines,
    validate_masking_map,
)
from irqcolor.formats import load_config, load_scenario
from irqcolor.gic import Distributor
from irqcolor.report import RUN_FILES
from irqcolor.rtm import Rtm, decode_qos, overhead_model
from irqcolor.sim import run


@pytest.fixture
def verdict(capsys):
    """verdict(n, ok, detail, elapsed, budget): print one line, then assert."""
    def emit(n, ok, detail, elapsed, budget):
        ok = ok and elapsed < budget
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail}; {elapsed:.2f}s < {budget}s)")
        assert ok, detail
    return emit


# 1 -------------------------------------------------------------------------

def test_criterion_1_decode_bands(verdict):
    t0 = time.perf_counter()
    eps = 1e-9
    expected = {0: 3, 10: 3, 25: 2, 25 + eps: 2, 50: 1, 50 + eps: 1, 75: 0, 75 + eps: 0, 100: 0,
                25 - eps: 3, 50 - eps: 2, 75 - eps: 1}
    got = {q: int(decode_qos(q)) for q in expected}
    bad = {q: g for q, g in got.items() if g != expected[q]}
    verdict(1, not bad, f"{len(expected)} points, mismatches {bad}", time.perf_counter() - t0, 1)


# 2 -------------------------------------------------------------------------

def test_criterion_2_overhead_relation(verdict):
    t0 = time.perf_counter()
    at10 = overhead_model(0.782, 10)
    above = [overhead_model(0.782, p) for p in range(100, 100_001, 7)]
    ok = 7.77 <= at10 <= 7.87 and max(above) < 0.8
    verdict(2, ok, f"10us -> {at10:.4f}%, max over p>=100us {max(above):.4f}%",
            time.perf_counter() - t0, 1)


# 3 -------------------------------------------------------------------------

# Masked cells per row, transcribed by hand. Columns are named by the VM's
# criticality: C = ASIL-C VM, B = ASIL-B VM, QM = QM VM.
TABLE = {
    "dual_vm": [
        ["QM3"],
        ["QM2", "QM3"],
        ["QM1", "QM2", "QM3"],
        ["QM0", "QM1", "QM2", "QM3"],
    ],
    "quad_setup1": [
        [],
        ["B2", "B3", "QM2", "QM3"],
        ["C1", "B1", "B2", "B3", "QM0", "QM1", "QM2", "QM3"],
        ["C0", "C1", "B0", "B1", "B2", "B3", "QM0", "QM1", "QM2", "QM3"],
    ],
    "quad_setup2": [
        [],
        ["C3", "B3", "QM2", "QM3"],
        ["C2", "C3", "B1", "B2", "B3", "QM0", "QM1", "QM2", "QM3"],
        ["C0", "C1", "C2", "C3", "B0", "B1", "B2", "B3", "QM0", "QM1", "QM2", "QM3"],
    ],
}
COLUMN_LEVEL = {"C": CriticalityLevel.ASIL_C, "B": CriticalityLevel.ASIL_B, "QM": CriticalityLevel.QM}


def table_rows(cfg, rows):
    vm_of = {vm.level: vm.vm for vm in cfg.vms}
    return [{(vm_of[COLUMN_LEVEL[c.rstrip("0123")]], int(c[-1])) for c in row} for row in rows]


def test_criterion_3_masking_tables(verdict, tmp_path, capsys):
    t0 = time.perf_counter()
    failures = []
    for name, rows in TABLE.items():
        out = tmp_path / f"{name}.art"
        status = main(["dtt", "--config", f"{name}.cfg", "--overrides", f"{name}.masks", "--out", str(out)])
        capsys.readouterr()
        cfg = load_config(fixture_path(f"{name}.cfg"))
        produced = parse_artifact_lines(out.read_text()).modes if status == 0 else {}
        want = table_rows(cfg, rows)
        for m, expected in enumerate(want):
            if status != 0 or set(produced.get(m, [])) != expected:
                failures.append(f"{name} mode {m}")
    verdict(3, not failures, f"12 rows, mismatched {failures}", time.perf_counter() - t0, 1)


# 4 -------------------------------------------------------------------------

def test_criterion_4_mode_trajectory(verdict):
    t0 = time.perf_counter()
    cfg = load_config(fixture_path("quad_setup2.cfg"))
    text = fixture_path("quad_setup2.masks").read_text()
    arts = build_artifacts(cfg, masking_map_from_lines(parse_artifact_lines(text).modes, cfg))
    dist = Distributor({irq.pin: irq.vm for irq in cfg.all_irqs()})
    rtm = Rtm(cfg, arts, dist, stepwise=True)
    # fraction of the critical reference observed -> QoS 60, 40, 10, 100 (T1, T2, T3, T0)
    script = [0.6, 0.4, 0.1, 1.0, 1.0, 1.0]
    modes, flags, writes = [rtm.current_mode], [], []
    for frac in script:
        samples = {vm.vm: rtm.references.get(vm.vm, EventVector()) for vm in cfg.vms}
        samples[cfg.critical_vm] = rtm.references[cfg.critical_vm].scaled(frac)
        res = rtm.tick(samples)
        modes.append(res.mode)
        flags.append(res.flags[cfg.critical_vm])
        writes += res.writes
    masks = [p for op, p in writes if op == "mask"]
    unmasks = [p for op, p in writes if op == "unmask"]
    ok = (flags == [ControlFlag.T1, ControlFlag.T2, ControlFlag.T3, ControlFlag.T0, ControlFlag.T0, ControlFlag.T0]
          and modes == [0, 1, 2, 3, 2, 1, 0]
          and len(masks) == 12 and unmasks == masks[::-1])
    verdict(4, ok, f"modes {modes}, {len(masks)} masks, unmask order reversed: {unmasks == masks[::-1]}",
            time.perf_counter() - t0, 1)


# 5 -------------------------------------------------------------------------

def test_criterion_5_calibrated_mitigation(verdict):
    t0 = time.perf_counter()
    cfg = load_config(fixture_path("dual_vm.cfg"))
    sc = load_scenario(fixture_path("dual_onset.scn"))
    onset = next(d.time for d in sc.directives if d.kind == "set-interference" and d.scale > 0)
    horizon = 10_000_000
    text = fixture_path("dual_vm.masks").read_text()
    arts = build_artifacts(cfg, masking_map_from_lines(parse_artifact_lines(text).modes, cfg))
    unmitigated = run(cfg, sc, horizon, rtm_enabled=False)
    mitigated = run(cfg, sc, horizon, artifacts=arts, baseline=unmitigated.baseline)
    d = cfg.critical_vm
    calibrated = unmitigated.slowdown(d, onset)
    settle = onset + 5 * cfg.actuation_period
    steady = mitigated.slowdown(d, settle)
    ok = abs(calibrated - 2.13) <= 0.05 and steady <= 1.10
    verdict(5, ok, f"alpha {cfg.alpha}, unmitigated {calibrated:.3f}x, with RTM {steady:.3f}x "
            f"after onset+5 periods", time.perf_counter() - t0, 30)


# 6 -------------------------------------------------------------------------

def test_criterion_6_intermediate_guarantees(verdict):
    t0 = time.perf_counter()
    cfg = load_config(fixture_path("quad_setup1.cfg"))
    horizon = 10_000_000
    with_rtm = run(cfg, None, horizon, baseline=False)
    without = run(cfg, None, horizon, rtm_enabled=False, baseline=False)
    levels = {CriticalityLevel.ASIL_C, CriticalityLevel.ASIL_B}
    starved = [f"{vm}:{k}" for (vm, k), n in with_rtm.completions.items()
               if cfg.level_of(vm) in levels and n == 0]
    d = cfg.critical_vm
    ok = not starved and with_rtm.work[d] >= without.work[d]
    lowest = min(n for (vm, _), n in with_rtm.completions.items() if cfg.level_of(vm) in levels)
    verdict(6, ok, f"starved C/B tasks {starved}, fewest C/B completions {lowest}, "
            f"D work {with_rtm.work[d]:.0f} vs {without.work[d]:.0f} unmitigated",
            time.perf_counter() - t0, 30)


# 7 -------------------------------------------------------------------------

def layout_config(levels, n_irqs, mode_count):
    vms = []
    pin = 32
    for vm_id, (level, n) in enumerate(zip(levels, n_irqs)):
        irqs = tuple(IrqId(vm_id, k, pin + k) for k in range(n))
        pin += n
        tasks = tuple(TaskProfile(0.125 * (k + 1) / 4, 1.0, 1.0, 100, 10) for k in range(n))
        vms.append(VmConfig(vm_id, level, irqs, tasks))
    return SystemConfig(tuple(vms), mode_count=mode_count)


def brute_force_table(levels, mode_count):
    """register value -> mode, enumerating every flag combination independently."""
    monitored = [i for i, lv in enumerate(levels) if lv != CriticalityLevel.QM]
    order = sorted(monitored, key=lambda i: (-levels[i], i))
    table = {}
    for flags in itertools.product(range(4), repeat=len(order)):
        value = sum(f << (2 * j) for j, f in enumerate(flags))
        d_flag = flags[order.index(levels.index(CriticalityLevel.ASIL_D))]
        table[value] = min(d_flag, mode_count - 1)
    return order, table


def random_config(rng):
    n_vms = rng.randint(1, 6)
    levels = [CriticalityLevel.ASIL_D] + [rng.choice([CriticalityLevel.QM, CriticalityLevel.ASIL_B,
                                                      CriticalityLevel.ASIL_C]) for _ in range(n_vms - 1)]
    rng.shuffle(levels)
    vms, pin = [], 0
    for vm_id, level in enumerate(levels):
        n = rng.randint(1 if level == CriticalityLevel.ASIL_D else 0, 8)
        irqs = tuple(IrqId(vm_id, k, pin + k) for k in range(n))
        pin += n
        tasks = tuple(TaskProfile(rng.choice([0, 0.0625, 0.125, 0.25, 0.5]), rng.uniform(0, 4),
                                  rng.choice([0, rng.uniform(0, 3)]), rng.randint(10, 1000),
                                  rng.randint(1, 500)) for _ in range(n))
        vms.append(VmConfig(vm_id, level, irqs, tasks))
    return SystemConfig(tuple(vms), mode_count=rng.randint(2, 7), beta=rng.choice([0, 0.5, 1, 2]))


def test_criterion_7_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    mismatches = 0
    checked = 0
    all_levels = [CriticalityLevel.QM, CriticalityLevel.ASIL_B, CriticalityLevel.ASIL_C]
    for n_vms in range(1, 5):
        for others in itertools.product(all_levels, repeat=n_vms - 1):
            for d_pos in range(n_vms):
                levels = list(others)
                levels.insert(d_pos, CriticalityLevel.ASIL_D)
                for mode_count in (2, 3, 4, 5):
                    for n_irqs in ([1] * n_vms, [4] * n_vms):
                        cfg = layout_config(levels, n_irqs, mode_count)
                        arts = build_artifacts(cfg)
                        dist = Distributor({i.pin: i.vm for i in cfg.all_irqs()})
                        rtm = Rtm(cfg, arts, dist, stepwise=False)
                        order, table = brute_force_table(levels, mode_count)
                        assert order == cfg.monitored_vms
                        for flags in itertools.product(ControlFlag, repeat=len(order)):
                            reg = ControlRegister(tuple(zip(order, flags)))
                            checked += 1
                            if rtm.compute_dm(reg) != table[reg.value]:
                                mismatches += 1
    rng = random.Random(20240611)
    invalid = 0
    for _ in range(1000):
        cfg = random_config(rng)
        if validate_masking_map(generate_masking_map(cfg, compute_effects(cfg)), cfg):
            invalid += 1
    verdict(7, mismatches == 0 and invalid == 0,
            f"{checked} registers, {mismatches} compute_dm mismatches; 1000 random maps, {invalid} invalid",
            time.perf_counter() - t0, 60)


# 8 -------------------------------------------------------------------------

def test_criterion_8_determinism_and_round_trips(verdict, tmp_path, capsys):
    t0 = time.perf_counter()
    problems = []
    for name in ("dual_vm", "quad_setup1", "quad_setup2"):
        cfg = load_config(fixture_path(f"{name}.cfg"))
        arts = build_artifacts(cfg)
        a, b = tmp_path / f"{name}.a", tmp_path / f"{name}.b"
        export_artifacts(arts, a, cfg)
        back = import_artifacts(a, cfg)
        export_artifacts(back, b, cfg)
        if back != arts or a.read_bytes() != b.read_bytes() or dumps_artifacts(back) != a.read_text():
            problems.append(f"artifact {name}")
    for v in range(1, 5):
        for flags in itertools.product(ControlFlag, repeat=v):
            reg = ControlRegister(tuple(enumerate(flags)))
            if ControlRegister.unpack(reg.value, range(v)) != reg:
                problems.append(f"register {flags}")
    outs = []
    for tag in ("x", "y"):
        out = tmp_path / tag
        main(["sim", "--config", "quad_setup1.cfg", "--duration-us", "300000", "--seed", "11",
              "--out", str(out)])
        outs.append(out)
    capsys.readouterr()
    for f in RUN_FILES:
        if (outs[0] / f).read_bytes() != (outs[1] / f).read_bytes():
            problems.append(f"csv {f}")
    verdict(8, not problems, f"3 artifacts, 340 registers, {len(RUN_FILES)} CSVs; problems {problems}",
            time.perf_counter() - t0, 10)


# 9 -------------------------------------------------------------------------

def test_criterion_9_gic_bit_exactness(verdict):
    t0 = time.perf_counter()
    rng = random.Random(9)
    pins = list(range(16, 160))
    dist = Distributor({p: 0 for p in pins}, initially_enabled=False)
    oracle = {p: False for p in pins}
    for _ in range(10_000):
        word = rng.randrange(dist.words)
        value = rng.getrandbits(32) & rng.getrandbits(32)
        is_set = rng.random() < 0.5
        (dist.write_isenabler if is_set else dist.write_icenabler)(word, value)
        for bit in range(32):
            pin = word * 32 + bit
            if value >> bit & 1 and pin in oracle:
                oracle[pin] = is_set
    wrong = [p for p in pins if dist.is_delivery_enabled(p) != oracle[p]]
    verdict(9, not wrong, f"10000 writes over {len(pins)} pins, {len(wrong)} mismatched bits",
            time.perf_counter() - t0, 5)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
