"""Competing deterministic growth on the square lattice."""

from .continuum import (ContinuumConfig, Segment, Triple, advance_triple, breakthrough, canonical_obstacles,
                        initial_triple, lambda_of, sigma_of)
from .engine import Schedule, SimResult, run_reference, run_to_fixation, step, window_dependence_radius
from .harness import (ExperimentParams, FateEstimate, estimate_origin_fate, fit_exponent, phase_scan,
                      red_wins_certificate, three_color_experiment)
from .lattice import (Lattice, ModelSpec, Neighborhood, Offset, Species, Topology, l1_ball, line_neighborhood,
                      sample_initial, two_stage_sample)
from .prf import coin
from .scaffold import (BlockingScaffold, Box, Cone, GapStats, RescaleRule, build_scaffold, gap_stats,
                       is_successful, protection_certificate)

__version__ = "0.1.0"
