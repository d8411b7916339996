"""Lifting 1D chain Hamiltonians to diamond-type fractal graphs: construction, spectra, state transfer."""

from .construct import (
    Chain,
    ConstructionError,
    ConstructionPlan,
    GraphSequence,
    Step,
    build_sequence,
    chains_of,
    counterexample_g2tilde,
    distinct_chains,
    hambly_kumagai,
    hambly_kumagai_sequence,
    lang_plaut,
    lang_plaut_sequence,
    sequence_for,
)
from .evolve import EvolutionError, Propagator, TransferReport, evolve, fidelity_curve, pqst_check
from .graph import (
    AssumptionViolation,
    DegreeProfile,
    GraphError,
    LayeredGraph,
    VertexAddress,
    degree_profile,
    geodesic_layers,
    layer_weights,
    path_graph,
)
from .jacobi import JacobiError, JacobiMatrix, jacobi_spectrum, krawtchouk_chain, segment
from .lift import LiftError, LiftedHamiltonian, lift_hamiltonian
from .spectral import (
    Cluster,
    ClusterError,
    IDSCurve,
    Provenance,
    SpectralDecomposition,
    SpectralError,
    cluster_eigenvalues,
    compare_table,
    glue_eigenvectors,
    ids,
    localized_count,
    multiplicity5_witness,
    radial_eigenvectors,
    spectrum_dense,
    spectrum_inductive,
)

__version__ = "0.1.0"
