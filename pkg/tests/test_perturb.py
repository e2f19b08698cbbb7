import math

import numpy as np
import pytest

from qastab.circuit import Circuit, Gate, apply_gate, build_iqft, build_qft
from qastab.correlate import chi_sum, correlator_fixed
from qastab.numkernel import (HermitianPerturbation, derive_seed, expm_phase,
                              sample_gue)
from qastab.perturb import (FidelityRunConfig, PerturbationMode,
                            fidelity_ensemble, fidelity_exact,
                            fidelity_heisenberg, fidelity_stochastic,
                            load_matrix, noise_baseline, realize_perturbation,
                            save_matrix)

from conftest import gue_chi

STATIC = PerturbationMode('static')
NOISE = PerturbationMode('noise')


def test_realize_static_and_noise():
    vs = realize_perturbation(STATIC, 5, 8, derive_seed(1, 0))
    assert all(v is vs[0] for v in vs)
    vs = realize_perturbation(NOISE, 5, 8, derive_seed(1, 0))
    for a in range(5):
        for b in range(a):
            assert np.max(np.abs(vs[a].matrix - vs[b].matrix)) > 0


def test_realize_fixed_validation():
    v = sample_gue(8, derive_seed(0, 0))
    assert realize_perturbation(PerturbationMode.fixed(v), 3, 8, derive_seed(0, 0))[2] is v
    with pytest.raises(ValueError):
        realize_perturbation(PerturbationMode.fixed(v), 3, 16, derive_seed(0, 0))
    with pytest.raises(ValueError):
        PerturbationMode.fixed(np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValueError):
        PerturbationMode('fixed')


def test_exact_zero_delta():
    f = fidelity_exact(build_iqft(4), STATIC, 0.0, derive_seed(3, 0))
    assert abs(f - 1) < 1e-12


def test_exact_single_gate_analytic():
    c = Circuit(1, (Gate('A', 0),))
    v = PerturbationMode.fixed(np.diag([1.0, -1.0]))
    f = fidelity_exact(c, v, 0.2, derive_seed(0, 0))
    assert abs(f - math.cos(0.2)) < 1e-14


def test_heisenberg_single_gate_and_zero():
    v = sample_gue(8, derive_seed(4, 0))
    c = Circuit(3, (Gate('B', 0, 2),))
    expected = np.trace(expm_phase(v, -0.3)) / 8
    assert abs(fidelity_heisenberg(c, v, 0.3) - expected) < 1e-13
    assert abs(fidelity_heisenberg(build_qft(3), v, 0.0) - 1) < 1e-13


@pytest.mark.parametrize('builder', [build_qft, build_iqft])
@pytest.mark.parametrize('n', [2, 3, 4, 5])
@pytest.mark.parametrize('delta', [0.05, 0.2])
def test_exact_equals_heisenberg(builder, n, delta):
    c = builder(n)
    v = sample_gue(2 ** n, derive_seed(n, 11))
    f_exact = fidelity_exact(c, PerturbationMode.fixed(v), delta, derive_seed(0, 0))
    assert abs(f_exact - fidelity_heisenberg(c, v, delta)) < 1e-9


def test_global_phase_shift():
    c = build_qft(4)
    v = sample_gue(16, derive_seed(8, 0))
    shifted = HermitianPerturbation(v.matrix + 0.7 * np.eye(16))
    delta = 0.15
    f = fidelity_exact(c, PerturbationMode.fixed(v), delta, derive_seed(0, 0))
    g = fidelity_exact(c, PerturbationMode.fixed(shifted), delta, derive_seed(0, 0))
    assert abs(g - f * np.exp(1j * 0.7 * delta * len(c))) < 1e-10
    assert abs(abs(g) - abs(f)) < 1e-10


def test_stochastic_zero_delta():
    for m in (1, 7):
        f, _ = fidelity_stochastic(build_qft(4), STATIC, 0.0, m, derive_seed(2, 0))
        assert abs(f - 1) < 1e-10


def test_stochastic_consistent_with_exact():
    c, rng = build_qft(6), derive_seed(21, 3)
    exact = fidelity_exact(c, STATIC, 0.05, rng)
    est, err = fidelity_stochastic(c, STATIC, 0.05, 200, rng)
    assert abs(est - exact) < 3 * err


def test_stochastic_error_scaling():
    """Reported error at M=200 matches the spread of single-state estimates / sqrt(200)."""
    c = build_qft(4)
    v = PerturbationMode.fixed(sample_gue(16, derive_seed(5, 0)))
    singles = np.array([fidelity_stochastic(c, v, 0.3, 1, derive_seed(6, r))[0]
                        for r in range(200)])
    spread = np.sqrt(np.mean(np.abs(singles - singles.mean()) ** 2))
    _, err = fidelity_stochastic(c, v, 0.3, 200, derive_seed(7, 0))
    assert 0.7 < spread / (err * math.sqrt(200)) < 1.4
    assert math.isnan(fidelity_stochastic(c, v, 0.3, 1, derive_seed(7, 0))[1])


def test_propagation_preserves_norm():
    c = build_iqft(5)
    e = expm_phase(sample_gue(32, derive_seed(1, 1)), 0.3)
    psi = np.random.default_rng(0).standard_normal(32) + 0j
    psi /= np.linalg.norm(psi)
    for g in c.gates:
        psi = apply_gate(e @ psi, g, c.n)
        assert abs(np.linalg.norm(psi) - 1) < 1e-10


def test_ensemble_basics():
    c = build_qft(4)
    one = fidelity_ensemble(c, STATIC, FidelityRunConfig(0.1, 1, seed=3))
    assert one.abs_mean == abs(fidelity_exact(c, STATIC, 0.1, derive_seed(3, 0)))
    cfg = FidelityRunConfig(0.1, 12, seed=3)
    a, b = fidelity_ensemble(c, STATIC, cfg), fidelity_ensemble(c, STATIC, cfg)
    assert a.values.tobytes() == b.values.tobytes()
    assert np.all(np.abs(a.values) <= 1 + 1e-9)
    assert a.abs_mean <= a.mean_abs + 1e-12
    assert [s for s, _ in a.per_realization] == [derive_seed(3, r) for r in range(12)]


def test_ensemble_threads_do_not_change_results():
    c = build_iqft(4)
    serial = fidelity_ensemble(c, NOISE, FidelityRunConfig(0.1, 8, seed=9))
    threaded = fidelity_ensemble(c, NOISE, FidelityRunConfig(0.1, 8, seed=9, threads=4))
    assert serial.values.tobytes() == threaded.values.tobytes()


def test_run_config_validation():
    with pytest.raises(ValueError):
        FidelityRunConfig(-0.1)
    with pytest.raises(ValueError):
        FidelityRunConfig(0.1, realizations=0)
    with pytest.raises(ValueError):
        FidelityRunConfig(0.1, states=0)


def test_noise_baseline_values():
    assert noise_baseline(10, 0.0) == 1
    assert abs(noise_baseline(60, 0.04) - 0.95313) < 5e-5
    assert abs(noise_baseline(40, 0.1) - 0.81873) < 5e-5


def test_noise_mode_qft8():
    ens = fidelity_ensemble(build_qft(8), NOISE, FidelityRunConfig(0.1, 100, seed=1))
    assert abs(ens.abs_mean - noise_baseline(40, 0.1)) < 3 * ens.std_error


@pytest.mark.parametrize('builder', [build_qft, build_iqft])
def test_noise_mode_is_algorithm_independent(builder):
    c = builder(6)
    ens = fidelity_ensemble(c, NOISE, FidelityRunConfig(0.1, 100, seed=2))
    assert abs(ens.abs_mean - noise_baseline(len(c), 0.1)) < 3 * ens.std_error


def test_static_qft8_matches_model():
    ens = fidelity_ensemble(build_qft(8), STATIC, FidelityRunConfig(0.1, 50, seed=4))
    assert abs(ens.abs_mean - math.exp(-108 * 0.01)) < 0.05


def test_second_order_law():
    c = build_qft(6)
    v = sample_gue(64, derive_seed(30, 0)).traceless().normalized()
    chi_v = chi_sum(correlator_fixed(c, v)).chi
    f = fidelity_exact(c, PerturbationMode.fixed(v), 0.01, derive_seed(0, 0))
    assert abs((1 - abs(f)) / 0.01 ** 2 / chi_v - 1) < 0.02


def test_iqft_more_stable_than_qft_at_n6():
    cfg = FidelityRunConfig(0.1, 10, seed=5)
    q = fidelity_ensemble(build_qft(6), STATIC, cfg).abs_mean
    i = fidelity_ensemble(build_iqft(6), STATIC, cfg).abs_mean
    assert i > q
    assert gue_chi('iqft', 6) < gue_chi('qft', 6)


def test_matrix_file_roundtrip(tmp_path):
    v = sample_gue(8, derive_seed(0, 0))
    path = tmp_path / 'v.txt'
    save_matrix(path, v)
    assert np.array_equal(load_matrix(path).matrix, v.matrix)
    assert path.read_text().splitlines()[0] == '8'


@pytest.mark.parametrize('text, where', [
    ('2\n1,0 0,0\n', 'expected 2 rows'),
    ('2\n1,0 0,0\n0,0\n', ':3:'),
    ('2\n1,0 0,0\n0,0 x\n', ':3:'),
    ('two\n', ':1:'),
])
def test_matrix_file_errors(tmp_path, text, where):
    path = tmp_path / 'bad.txt'
    path.write_text(text)
    with pytest.raises(ValueError, match=where):
        load_matrix(path)


def test_matrix_file_must_be_hermitian(tmp_path):
    path = tmp_path / 'nh.txt'
    path.write_text('2\n0,0 1,0\n0,0 0,0\n')
    with pytest.raises(ValueError, match='Hermitian'):
        load_matrix(path)
