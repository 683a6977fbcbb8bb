"""curvris: simulation, geometry estimation, and phase design for RIS panels
mounted on curved surfaces."""

from .channel import (RadioParams, RicianSpec, Scatterer, los_channel, nlos_channel,
                      noise_power, pathloss_amplitude, rician_channel, steering_vector)
from .config import ExperimentConfig, Scene, default_scene
from .estimator_nls import NlsDiagnostics, NlsOptions, nls_cost, nls_fit
from .estimator_nn import (AdamState, MlpParams, TrainConfig, TrainedModel,
                           TrainHistory, adam_step, load_model, mlp_backward,
                           mlp_forward, predict, save_model, train)
from .evaluation import (BeamProfile, DesignKind, SweepResult, beam_profile,
                         eval_snr, export_training_curves, sweep_location_error,
                         sweep_sigma)
from .geometry import (PolySurface, RisGrid, SurfaceCoeffs, element_positions,
                       poly_surface_height, sample_coeffs, surface_height)
from .measurement import (Dataset, MeasurementPlan, MinMaxScaler, PowerModel,
                          PowerTable, build_power_table, generate_dataset,
                          load_dataset, measurement_grid, min_spacing,
                          normalize_minmax, planar_measurement_plan,
                          received_power, save_dataset, split)
from .phase_design import (PhaseConfig, geometry_aware_phase, load_phase_config,
                           planar_phase, save_phase_config, wrap_phase)

__version__ = "0.1.0"
