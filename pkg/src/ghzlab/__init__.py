"""Numerical laboratory for an on-chip path-encoded 4-photon GHZ experiment."""

__version__ = "0.1.0"

from .chip import (HeaterCalibration, MziSetting, PreparationStage,
                   compensate_setting, full_unitary, heater_forward,
                   heater_solve, measurement_unitary, preparation_unitary,
                   setting_for_projector)
from .qmath import (PauliLabel, fidelity_to_pure, ghz4, pauli_operator,
                    permanent, permanent_naive, project_to_physical, purity)
from .simulator import (DetectorModel, LossBudget, OutcomeDistribution,
                        apply_detector_efficiency, coincidence_rate,
                        qubit_distribution, sample_counts, scatter_distribution,
                        threshold_and_postselect)
from .source import (EmissionProbabilities, JointInputTerm, MasterFractions,
                     SourceSpec, enumerate_joint_inputs, fit_master_fractions,
                     input_mixture, overlap_bounds, solve_pair_probabilities)
from .analysis import (BellResult, MeasurementRecord, TomographySet,
                       WitnessResult, bell_settings, bell_value, expectation,
                       fit_phase_scan, linear_inversion, max_fidelity_over_phase,
                       mle_reconstruct, monte_carlo_error, phase_witness,
                       stabilizer_witness, tomography_settings)
from .qss import QssReport, classify_bases, combo_sign, infer_dealer_bit, run_qss
