"""Metastability analysis for Markovian open quantum systems and classical
Markov chains: induced-norm distances, regime detection, timescales, spectral
separation, and an executable battery of the governing inequalities."""

__version__ = "0.1.0"

from .operators import trace_norm, max_norm, hermitian_eigensystem
from .superop import (QuantumModel, Superoperator, SpectralData,
                      build_liouvillian, spectral_decompose, evolution,
                      stationary_projector, slow_projector,
                      DefectiveLiouvillianError, InvalidCutError)
from .norms import (InducedNormResult, induced_trace_norm,
                    induced_norm_sampling_oracle, measurement_superop_norm)
from .modes import change_thresholds, inverse_bound, mode_regimes, ModeRegimes
from .regimes import (DynamicsBackend, QuantumBackend, TimeGrid, RegimeVerdict,
                      TimescaleReport, change_measure, timescales,
                      classify_regime, scan_metastable, relaxation_times,
                      distinguishability_bounds, TrivialDynamicsError)
from .heisenberg import (evolve_observable, observable_change,
                         quasi_conserved_witness, ObservableTrajectory)
from .spectral_meta import (SeparationReport, SpectralProjectionReport,
                            BoundBatteryReport, spectrum_change_bound_check,
                            detect_separation, spectral_projection_report,
                            bound_battery, SeparationInconsistencyError)
from .classical import (ClassicalGenerator, classical_evolution,
                        l1_induced_distance, ClassicalBackend, classical_backend)
from .models import (spin_half_dephasing, random_lindbladian,
                     three_state_double_well, ModelSpecifier, build_model)
