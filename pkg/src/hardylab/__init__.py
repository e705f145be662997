"""Numerical laboratory for Schrodinger heat kernels, harmonic weights,
and local atomic decompositions of Hardy-space type."""

from .geometry import (
    Cube,
    CubeFamily,
    PartitionOfUnity,
    build_partition,
    check_G,
    dilate,
    loc_glob_split,
    make_uniform_family,
)
from .potentials import (
    Potential,
    constant_potential,
    example_potential,
    kato_functional,
    kato_sup_estimate,
)
from .semigroup import (
    FKConfig,
    KernelEstimate,
    approx_identity_error,
    fk_kernel,
    fk_semigroup_mass,
    free_kernel,
    free_on_cube,
    perturbation_residual,
)
from .harmonic import OmegaEstimate, omega, oscillation_experiment
from .atoms import (
    Atom,
    AtomicDecomposition,
    build_example_atom,
    split_omega_q_atom,
    telescope,
    validate,
)
from .maximal import (
    GridFunction,
    TimeGrid,
    growth_experiment,
    l1_on_region,
    maximal_free,
    maximal_free_at,
)

__version__ = "0.1.0"
