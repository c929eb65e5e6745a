"""Uniformly accurate spectra and thermodynamics of simple quantum systems
from the operator method and a cumulant expansion over a trial ensemble."""

__version__ = "0.1.0"

from .cumulant import (CumulantEstimate, SpectrumMoments, TrialEnsemble, average_energy_ce,
                       cumulants_z0_z1, generic_q_condition, qao_stationary_parametric, qao_z0c,
                       spectral_moments, trial_moments)
from .errors import OmstatError, RegimeViolation
from .om import (IterationState, MatrixElementProvider, OmLevel, om_iterate, om_second_order,
                 optimize_omega, rs_pt2_energy, thermo_cpt2_free_energy)
from .oracle import (SpectrumTable, ThermoReference, diagonalize_qao, f01_expanded,
                     harmonic_exact_free_energy, partition_direct, qao_asymptotic_z)
from .qao import (QaoParams, StrongCouplingCoeff, corrections, energy0, omega_n, qao_provider,
                  strong_coupling_bn)
from .rotator import (RotatorPoint, rotator_partition_direct, rotator_phi, rotator_trial_moments,
                      rotator_x_of_q, rotator_z0, rotator_z1_factor)
from .spectrum import SpectrumSource
