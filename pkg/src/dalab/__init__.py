"""Finite-volume numerics for Anderson models whose random potential lives on a Delone subset of Z^d."""

__version__ = "0.1.0"

from .certify import (
    AveragingReport,
    Thresholds,
    certify_lemma_WE,
    certify_lifting,
    check_covering,
    check_shift_bound,
    compute_thresholds,
)
from .disorder import DisorderSpec, check_tail_condition
from .dynamics import WavePacket, evolve_chebyshev, evolve_exact, localization_profile, moment
from .geometry import (
    DeloneSet,
    NonDeloneError,
    Pattern,
    Window,
    compute_R,
    enumerate_patterns,
    find_disjoint_repetitions,
    generate_periodic,
    generate_random_cell,
    generate_sturmian,
    pattern_frequency,
    supf_diagnostic,
)
from .operators import (
    BoxSpec,
    PotentialSample,
    SparseSymmetricOperator,
    assemble_hamiltonian,
    assemble_laplacian,
    assemble_reflected,
    sample_potential,
)
from .spectral import (
    SpectralResult,
    eig_extremal,
    eig_full,
    estimate_ids,
    spectral_projection_basis,
)
from .stats import edge_scan, ilse_scan, wegner_scan, wilson_interval
