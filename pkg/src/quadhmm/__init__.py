"""Grid-HMM trajectory decoding from anchor ranges, with a quadtree coarse-to-fine decoder."""

from .adaptive import AdaptiveResult, OnlineAdaptiveDecoder, compare_decodes, decode_adaptive, refine_pass
from .baselines import (KinematicState, ekf_track, pf_track, rts_smooth, trilaterate,
                        trilateration_track)
from .config import RunConfig
from .errors import *  # noqa: F401,F403
from .grid import GridSpec, ResolutionLadder, build_grid, build_ladder, children, parent
from .metrics import adaptive_costs, conventional_costs, cost_report, loop_closure_error, rmse
from .models import (Anchor, HmmParams, MeasurementFrame, best_anchor_subset, observation_logprob,
                     transition_logprob)
from .preprocess import RangeSeries, preprocess_frames, reject_outliers, smooth
from .sim import EventWindow, Scenario, Track, gen_trajectory, simulate_ranges, walking_scenario
from .viterbi import MapTrajectory, Trellis, backtrack, decode, decode_tables, init_column, step

__version__ = "0.1.0"
