import json
import math
import os
import pathlib

import numpy as np
import pytest

import ionmem

CONFIG_DIR = pathlib.Path(os.environ.get("IONMEM_CONFIG_DIR", pathlib.Path(__file__).parents[2] / "configs"))


def stiff_trap():
    return ionmem.TrapConfig(2 * math.pi * 5e6, 2 * math.pi * 4.8e6, omega_z=2 * math.pi * 0.2e6)


def test_version():
    assert ionmem.__version__


def test_two_ion_crystal():
    trap = stiff_trap()
    crystal = ionmem.solve_equilibrium(trap, 2, seed=1)
    z = np.sort(crystal.positions[:, 2])
    expected = (1.602176634e-19**2 / (4 * math.pi * 8.8541878128e-12 * 4 * trap.mass * (2 * math.pi * 0.2e6) ** 2)) ** (1 / 3)
    assert z == pytest.approx([-expected, expected], rel=1e-8)
    assert ionmem.classify_structure(trap, crystal).kind == "Linear"

    modes = ionmem.normal_modes(trap, crystal)
    assert modes.frequencies.shape == (6,)
    assert modes.frequencies[0] == pytest.approx(2 * math.pi * 0.2e6, rel=1e-8)
    assert modes.frequencies[1] == pytest.approx(math.sqrt(3) * 2 * math.pi * 0.2e6, rel=1e-8)


def test_energy_gradient_matches_finite_difference():
    trap = stiff_trap()
    x = ionmem.initial_guess(trap, 4, seed=3, jitter=0.05)
    g = ionmem.energy_gradient(trap, x)
    h = 1e-7 * trap.length_scale
    bumped = x.copy()
    bumped[1, 0] += h
    fd = (ionmem.total_energy(trap, bumped) - ionmem.total_energy(trap, x)) / h
    assert fd == pytest.approx(g[1, 0], rel=1e-4)


def test_sk1():
    assert ionmem.sk1_phase(math.pi) == pytest.approx(math.acos(-0.25))
    seq = ionmem.sk1_sequence(math.pi)
    assert len(seq) == 3
    u = ionmem.sequence_unitary(seq, 0.1)
    assert ionmem.transfer_fidelity(u, math.pi, 0.0) > 0.999
    sweep = ionmem.area_error_sweep(math.pi, 0.0, -0.2, 0.2, 0.01)
    assert min(sweep["sk1_fidelity"]) >= 0.99
    with pytest.raises(ValueError):
        ionmem.sk1_phase(5 * math.pi)


def test_storage_and_fit():
    noise = ionmem.NoiseModel(t2=0.4)
    times = [0.0, 0.1, 0.2, 0.4, 0.8]
    a = ionmem.storage_curve(noise, times, reps=200, seed=5)
    b = ionmem.storage_curve(noise, times, reps=200, seed=5)
    assert a.estimates == b.estimates
    assert a.estimates[0] == 1.0
    assert ionmem.coherence_factor(noise, 0.4) == pytest.approx(math.exp(-1))

    t = np.linspace(0, 0.8, 9)
    y = 0.5 + 0.5 * np.exp(-t / 0.4)
    fit = ionmem.fit_exponential_offset(t, y, np.full_like(t, 0.01))
    assert fit.converged and fit.identifiable
    assert fit.value("T") == pytest.approx(0.4, rel=1e-6)


def test_detection():
    n, err = ionmem.optimal_threshold(20.0, 1.0)
    assert n == 7
    assert err < 1e-3
    curve = ionmem.readout_error_curve(ionmem.DetectionModel(cooling_on=False), [0.0, 0.3])
    assert curve.readout_error[1] > 10 * curve.readout_error[0]


def test_config_errors_are_collected():
    with pytest.raises(ionmem.ConfigError) as info:
        ionmem.validate_config("experiment = storage\n[storage]\nreps = -1\n")
    assert any("seed required" in e for e in info.value.errors)


def test_run_shipped_configs(tmp_path):
    text = (CONFIG_DIR / "sk1_scan.cfg").read_text()
    assert ionmem.validate_config(text) == "sk1-scan"
    report = ionmem.run(text, base_dir=tmp_path)
    assert pathlib.Path(report["csv_path"]).read_text() == report["csv"]
    meta = json.loads(pathlib.Path(report["metadata_path"]).read_text())
    assert meta["config"] == text
