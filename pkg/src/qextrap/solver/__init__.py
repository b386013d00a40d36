"""Conic program representation, Hermitian embedding and solver adapters."""

from qextrap.solver.backends import BACKENDS, default_backend, solve
from qextrap.solver.dump import dump_standard_form, parse_standard_form, program_hash
from qextrap.solver.embedding import HermitianEmbedding, embed_hermitian
from qextrap.solver.program import (
    Cone,
    ConicProgram,
    HermBlock,
    Lin,
    ProgramBuilder,
    SolveResult,
    Tolerances,
)

__all__ = [
    "BACKENDS",
    "Cone",
    "ConicProgram",
    "HermBlock",
    "HermitianEmbedding",
    "Lin",
    "ProgramBuilder",
    "SolveResult",
    "Tolerances",
    "default_backend",
    "dump_standard_form",
    "embed_hermitian",
    "parse_standard_form",
    "program_hash",
    "solve",
]
