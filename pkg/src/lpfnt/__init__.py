"""Multivariate polynomial interpolation in lp-degree spaces.

The package enumerates downward-closed multi-index sets cut out by an
lp-norm degree bound, runs the fast Newton transform over them (forward,
inverse, evaluation, differentiation, change to the orthonormal Legendre
basis), and builds gradient-covariance activity scores for benchmark
models on top of it.  ``python -m lpfnt --help`` lists the CLI surface.
"""
from .mindex import (CardinalityBounds, MultiIndexSet, PNorm, build_index_set,
                     cardinality, cardinality_bounds, cardinality_closed_form,
                     carry_count, colex_keys, density, orthant_ball_volume,
                     read_index_set, write_index_set)
from .models import (BenchmarkModel, BoxDomain, batch_evaluate_csv,
                     from_reference, get_model, otl_circuit, piston, registry,
                     solar_cell, to_reference)
from .nodes import (NewtonVandermonde, NodeSystem, build_grid,
                    chebyshev_lobatto, gauss_legendre, leja_order, leja_points,
                    make_node_system, newton_vandermonde, triangular_solve)
from .sensitivity import (ActivityScores, EigenDecomposition, MCReference,
                          SensitivityReport, activity_pipeline,
                          activity_scores, choose_k, eigh, grad_cov,
                          grad_cov_quadrature, mc_reference)
from .transform import (LevelPlan, NewtonInterpolant, OpCounter, differentiate,
                        evaluate, evaluate_batch, fnt_forward, fnt_inverse,
                        naive_solve, newton_derivative_matrix,
                        newton_to_orthonormal_matrix, plan,
                        read_coefficients_binary, read_coefficients_csv,
                        to_orthonormal, write_coefficients_binary,
                        write_coefficients_csv)
from .tubes import (Selection, TubeDecomposition, all_tube_projections,
                    entropy_vector, first_tube_projection,
                    index_set_from_tubes, length_to_sum_reduce,
                    ordinal_selection, precompute_level_selections,
                    tube_decomposition)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # index sets
    "PNorm", "MultiIndexSet", "CardinalityBounds", "build_index_set",
    "cardinality", "cardinality_closed_form", "cardinality_bounds",
    "carry_count", "colex_keys", "density", "orthant_ball_volume",
    "read_index_set", "write_index_set",
    # tube structure
    "TubeDecomposition", "Selection", "tube_decomposition",
    "first_tube_projection", "length_to_sum_reduce", "entropy_vector",
    "all_tube_projections", "index_set_from_tubes", "ordinal_selection",
    "precompute_level_selections",
    # nodes and grids
    "NodeSystem", "NewtonVandermonde", "chebyshev_lobatto", "leja_order",
    "leja_points", "make_node_system", "newton_vandermonde",
    "triangular_solve", "build_grid", "gauss_legendre",
    # transforms
    "LevelPlan", "NewtonInterpolant", "OpCounter", "plan", "fnt_forward",
    "fnt_inverse", "naive_solve", "evaluate", "evaluate_batch",
    "differentiate", "to_orthonormal", "newton_derivative_matrix",
    "newton_to_orthonormal_matrix", "write_coefficients_csv",
    "read_coefficients_csv", "write_coefficients_binary",
    "read_coefficients_binary",
    # models
    "BoxDomain", "BenchmarkModel", "to_reference", "from_reference",
    "otl_circuit", "piston", "solar_cell", "registry", "get_model",
    "batch_evaluate_csv",
    # sensitivity
    "EigenDecomposition", "ActivityScores", "MCReference",
    "SensitivityReport", "grad_cov", "grad_cov_quadrature", "eigh",
    "activity_scores", "choose_k", "mc_reference", "activity_pipeline",
]
