"""Fractal percolation with level-dependent retention probabilities.

Simulation of the vacancy process on the unit square (and half-strips),
directed-crossing detection, exact minimal contour heights, random tree
flows, and an experiment harness that verifies the closed-form bounds
against Monte Carlo estimates.
"""

from .schedule import Schedule, ScheduleError, parse_schedule, theta_sums
from .lattice import (
    GridConfig,
    RetainedGrid,
    Square,
    VacancySet,
    build_retained,
    retained_fraction,
    sample_retained_bits,
    sample_vacancies,
    sample_vacancy_masks,
    square_bounds,
)
from .bounds import BoundRecord, bound_record, contour_height_bound, crossing_block_bound
from .crossing import (
    CrossingEstimate,
    crossing_oracle_bfs,
    crossing_probability,
    crossing_witness,
    has_crossing,
    is_valid_crossing,
    reach_intervals,
)
from .contour import (
    BlockingCertificate,
    Contour,
    ContourResult,
    blocking_certificate,
    concatenation_check,
    leftmost_gap_count,
    lowest_contour_height,
    min_contour_by_enumeration,
    min_height_sampled,
    reflected_lowest_contour,
    sample_coupled_gap,
    sampled_gap_count,
)
from .treeflow import (
    TreeSpec,
    ZDist,
    check_truncation_bound,
    effective_conductance,
    max_flow,
    tree_from_json,
    verify_flow_sandwich,
)
from .harness import Comparator, Experiment, Report, run, run_coupled
from .render import RenderSpec, render_ppm

__version__ = "0.1.0"

__all__ = [
    "Schedule",
    "ScheduleError",
    "parse_schedule",
    "theta_sums",
    "GridConfig",
    "RetainedGrid",
    "Square",
    "VacancySet",
    "build_retained",
    "retained_fraction",
    "sample_retained_bits",
    "sample_vacancies",
    "sample_vacancy_masks",
    "square_bounds",
    "BoundRecord",
    "bound_record",
    "contour_height_bound",
    "crossing_block_bound",
    "CrossingEstimate",
    "crossing_oracle_bfs",
    "crossing_probability",
    "crossing_witness",
    "has_crossing",
    "is_valid_crossing",
    "reach_intervals",
    "BlockingCertificate",
    "Contour",
    "ContourResult",
    "blocking_certificate",
    "concatenation_check",
    "leftmost_gap_count",
    "lowest_contour_height",
    "min_contour_by_enumeration",
    "min_height_sampled",
    "reflected_lowest_contour",
    "sample_coupled_gap",
    "sampled_gap_count",
    "TreeSpec",
    "ZDist",
    "check_truncation_bound",
    "effective_conductance",
    "max_flow",
    "tree_from_json",
    "verify_flow_sandwich",
    "Comparator",
    "Experiment",
    "Report",
    "run",
    "run_coupled",
    "RenderSpec",
    "render_ppm",
    "__version__",
]
