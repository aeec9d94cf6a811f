"""Exact-geometry simulator and verification toolkit for the periodic Lorentz gas."""
from __future__ import annotations

from .cells import (
    CellId, cell_measure_leading, cell_measure_mc, char_increment, kappa_lp_norm_mc,
    singularity_angles, tail_prob, tail_sweep, volume_form_check,
)
from .corridors import (
    CorridorKey, CorridorSet, abar, abar_matrix, calkin_wilf, convergent_pair, corridor_sum,
    corridor_width, enumerate_corridors, totient_sum, width_oracle,
)
from .dynamics import (
    FlightResult, HitRecord, PhasePoint, TableParams, TangentVector, billiard_map, next_collision,
    reverse, tangent_jacobian, to_cartesian,
)
from .experiments import (
    ExperimentConfig, b_n_sigma, birkhoff_kappa, clt_experiment, correlation_experiment,
    invariance_test, llt_experiment, sample_mu, wip_probe,
)
from .rng import StreamFactory

__version__ = "0.1.0"
