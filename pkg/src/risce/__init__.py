"""Channel estimation for RIS-assisted wideband systems with beam split.

Two-phase estimator: sparse recovery of the cascaded channel at two
subcarriers, angle extraction (element-norm maximization for the
transmit side, smoothed-subspace search for the coupled surface
angles), then least-squares reconstruction on the remaining
subcarriers. Includes on/off-grid channel synthesis, dictionary
construction that tracks the frequency-dependent beam directions,
baseline recovery schemes and a Monte Carlo harness.
"""

from .angles import (BsAngleEstimate, MusicSpectrum, RestCsi, RisAngleEstimate,
                     ds_music, enm_estimate, find_spectrum_peaks, k_cp_max,
                     music_spectrum, peak_distance, project_rest_csi,
                     sc_selection_valid, spatial_smooth)
from .dictionary import (CbsDictionary, MergeMap, TotalDictionary,
                         bs_dictionary, cbs_dictionary, coupled_grid,
                         full_coupled_dictionary, grid, merge_map,
                         ris_dictionary, total_dictionary)
from .exceptions import (DegenerateAnglesError, InsufficientPeaksError,
                         InvalidConfigError, NumericalError, SimulationError,
                         SolverDivergedError, SubarrayConfigError,
                         UnderdeterminedError, UndefinedMetricError)
from .harness import (ALGORITHMS, SweepSpec, TrialResult, correct_probability,
                      match_angles, nmse, rmse_angle, run_sweep, run_trial,
                      write_csv, write_json)
from .model import (ChannelRealization, PathSetBsRis, PathSetRisUe,
                    SystemConfig, arv, coupled_angles, draw_paths,
                    relative_frequencies, steering_matrix,
                    subcarrier_frequencies, synthesize_channels)
from .reconstruct import (ReconstructedCsi, ReducedObservation, ls_solve,
                          oracle_ls, reconstruct_all_sc)
from .recovery import (PhaseOneResult, SparseProblem, SparseSolution,
                       anchor_subcarriers, estimate_cascaded_two_sc,
                       solve_gamp, solve_gamp_factored, solve_omp,
                       solve_omp_factored)
from .sounding import (FactoredObservation, ObservationSet, PilotSchedule,
                       assemble_observation, compress_measurements,
                       compress_pilots, factor_observation, generate_pilots,
                       measure, pilot_operator)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "BsAngleEstimate", "CbsDictionary", "ChannelRealization",
    "DegenerateAnglesError", "FactoredObservation", "InsufficientPeaksError",
    "InvalidConfigError", "MergeMap", "MusicSpectrum", "NumericalError",
    "ObservationSet", "PathSetBsRis", "PathSetRisUe", "PhaseOneResult",
    "PilotSchedule", "ReconstructedCsi", "ReducedObservation", "RestCsi",
    "RisAngleEstimate", "SimulationError", "SolverDivergedError",
    "SparseProblem", "SparseSolution", "SubarrayConfigError", "SweepSpec",
    "SystemConfig", "TotalDictionary", "TrialResult", "UnderdeterminedError",
    "UndefinedMetricError", "anchor_subcarriers", "arv",
    "assemble_observation", "bs_dictionary", "cbs_dictionary",
    "compress_measurements", "compress_pilots",
    "correct_probability", "coupled_angles", "coupled_grid", "draw_paths",
    "ds_music", "enm_estimate", "estimate_cascaded_two_sc",
    "factor_observation", "find_spectrum_peaks", "full_coupled_dictionary",
    "generate_pilots", "grid", "k_cp_max", "ls_solve", "match_angles",
    "measure", "merge_map", "music_spectrum", "nmse", "oracle_ls",
    "peak_distance", "pilot_operator", "project_rest_csi",
    "reconstruct_all_sc", "relative_frequencies", "ris_dictionary",
    "rmse_angle", "run_sweep", "run_trial", "sc_selection_valid",
    "solve_gamp", "solve_gamp_factored", "solve_omp", "solve_omp_factored",
    "spatial_smooth", "steering_matrix", "subcarrier_frequencies",
    "synthesize_channels", "total_dictionary", "write_csv", "write_json",
]
