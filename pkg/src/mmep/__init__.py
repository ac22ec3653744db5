"""Link-level simulation of semi-blind joint channel estimation and
symbol detection for multi-cell massive MIMO uplinks on spatially
correlated, time-varying channels."""

from .config import ALGORITHMS, ConfigError, SystemConfig
from .channel import (CellGains, ChannelModel, build_model, build_rw,
                      build_spatial_corr, export_trace, load_trace,
                      simulate_trace)
from .frame import (Constellation, Frame, dft_pilots, hadamard_pilots,
                    make_constellation, make_pilots, observe, random_data,
                    symbol_vectors)
from .harness import (MetricRow, TrialResult, delta_h_db, delta_h_ratio,
                      run_sweep, run_trial, ser, write_csv)
from .inference import (GaussianBelief, MatchResult, ObsFactorNat,
                        SmootherGain, combine_fr, detect_ml, detect_mmse,
                        evidence_terms, gradcheck, moment_match_exact,
                        moment_match_hard, obs_cavity, obs_factor_from,
                        predict, smooth_step)
from .numerics import (CavityCollapse, NumericalFailure, bessel_j0,
                       hermitize, psd_sqrt, regularized_inverse, sample_cn)
from .receivers import (EpState, ReceiverOutput, run_ep, run_kf_m, run_ks_m,
                        run_pcsi, run_training)

__version__ = "0.1.0"
