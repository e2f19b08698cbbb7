"""Fidelity decay of quantum algorithms under static and noisy perturbations.

The QFT and its improved rewriting (IQFT) are simulated on dense registers;
:mod:`qastab.correlate` gives the correlation sum ``chi`` that controls the
fidelity ``exp(-chi delta^2)``.
"""
__version__ = '0.1.0'

from .circuit import (Circuit, Gate, build_iqft, build_qft, circuit_unitary,  # noqa: E402
                      dft_matrix)
from .correlate import chi_sum, correlator_fixed, correlator_gue, fidelity_model, fit_scaling  # noqa: E402
from .numkernel import HermitianPerturbation, derive_seed, sample_gue  # noqa: E402
from .perturb import (FidelityRunConfig, PerturbationMode, fidelity_ensemble,  # noqa: E402
                      fidelity_exact, noise_baseline)
