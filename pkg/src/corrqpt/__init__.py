"""Process tomography with initially correlated system-environment states.

The central object is the M-map, a ``d**3 x d**3`` tensor that maps any
preparation of the system to the output state, whatever the initial
correlations with the environment. See :mod:`corrqpt.supermap` for the index
conventions.
"""

__version__ = "0.1.0"

from corrqpt.errors import CorrQPTError  # noqa: E402
from corrqpt.states import (  # noqa: E402
    BipartiteState,
    DensityMatrix,
    PreparationMap,
    UnitaryMatrix,
    apply_prep,
    evolve_reduce,
    identity_prep,
    prep_from_kraus,
)
from corrqpt.supermap import (  # noqa: E402
    MMap,
    assemble_b,
    bcp_of,
    build_mmap,
    contract_mmap,
    cp_check,
    initial_state_of,
    kraus_of,
    memory_of,
)
from corrqpt.tomography import preparation_basis, reconstruct_mmap, simulate_tomography  # noqa: E402

__all__ = [
    "__version__",
    "CorrQPTError",
    "BipartiteState",
    "DensityMatrix",
    "PreparationMap",
    "UnitaryMatrix",
    "apply_prep",
    "evolve_reduce",
    "identity_prep",
    "prep_from_kraus",
    "MMap",
    "assemble_b",
    "bcp_of",
    "build_mmap",
    "contract_mmap",
    "cp_check",
    "initial_state_of",
    "kraus_of",
    "memory_of",
    "preparation_basis",
    "reconstruct_mmap",
    "simulate_tomography",
]
