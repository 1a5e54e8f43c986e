"""Counterfeiting analysis of Wiesner-style money in generalised probabilistic theories."""

from .cone_geometry import (
    Cone, DualOf, Intersection, Orthant, PolyhedralH, PolyhedralV, Product, PsdHermitian,
    TensorMax, TensorMin, free_cone, zero_cone,
)
from .conic_solver import (
    ConicProgram, LinearOperator, Solution, SolverConfig, brute_force_polyhedral, check_slater,
    solve, verify_solution,
)
from .errors import (
    CertificateError, ConeError, DimensionError, GptMintError, SolverError, ValidationError,
)
from .gpt_model import ProcessCone, System, compose_systems, default_process_cone
from .money import (
    BankStrategy, NoAmplificationError, alpha, alpha_tilde, analyse, check_broadcastable, check_VS,
    make_spanning, normalised_Y, product_strategy, repetition_count, repetition_security,
    trivial_lower_bound, verify_mixing_bound, verify_product_bound, wnc_broadcast_equivalence,
)
from .theories import TheoryDescriptor, by_name, classical, gbit, polygon, quantum, random_strategy, wiesner_strategy

__version__ = "0.1.0"

__all__ = [
    "Cone",
    "DualOf",
    "Intersection",
    "Orthant",
    "PolyhedralH",
    "PolyhedralV",
    "Product",
    "PsdHermitian",
    "TensorMax",
    "TensorMin",
    "free_cone",
    "zero_cone",
    "ConicProgram",
    "LinearOperator",
    "Solution",
    "SolverConfig",
    "brute_force_polyhedral",
    "check_slater",
    "solve",
    "verify_solution",
    "CertificateError",
    "ConeError",
    "DimensionError",
    "GptMintError",
    "SolverError",
    "ValidationError",
    "ProcessCone",
    "System",
    "compose_systems",
    "default_process_cone",
    "BankStrategy",
    "NoAmplificationError",
    "alpha",
    "alpha_tilde",
    "analyse",
    "check_broadcastable",
    "check_VS",
    "make_spanning",
    "normalised_Y",
    "product_strategy",
    "repetition_count",
    "repetition_security",
    "trivial_lower_bound",
    "verify_mixing_bound",
    "verify_product_bound",
    "wnc_broadcast_equivalence",
    "TheoryDescriptor",
    "by_name",
    "classical",
    "gbit",
    "polygon",
    "quantum",
    "random_strategy",
    "wiesner_strategy",
]
