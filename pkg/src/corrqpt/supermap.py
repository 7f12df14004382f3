"""The M-map: a map from preparation procedures to output states.

Index order is fixed once, here, for the whole package. The M-map is stored as
a flat ``d**3 x d**3`` matrix whose row index is

    iota(r, r1, r2) = r * d**2 + r1 * d + r2

with ``r`` the output index, ``r1`` the output index of the preparation and
``r2`` the index of the initial system state (and the same for columns). In
this grouping the matrix is literally the Gram form ``sum_mu m_mu m_mu^H``, so
Hermiticity and positivity are plain matrix properties. A preparation enters
through its map form (see :func:`corrqpt.states.aform_of`), whose row index
``r1 * d + r2`` is the trailing part of ``iota``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from corrqpt.errors import (
    DegeneratePreparationError,
    DimensionError,
    FormatError,
    NotHermitianError,
    NotPositiveError,
)
from corrqpt.linalg import (
    EIG_TOL,
    dagger,
    format_matrix,
    frobenius,
    hermitian_eig,
    hermitize,
    is_hermitian,
    parse_matrix_lines,
)
from corrqpt.states import (
    PROB_CUTOFF,
    BipartiteState,
    DensityMatrix,
    PreparationMap,
    UnitaryMatrix,
    identity_prep,
)


def _flat(t: np.ndarray, d: int, order: int) -> np.ndarray:
    n = d**order
    return np.ascontiguousarray(t).reshape(n, n)


@dataclass(frozen=True)
class MMap:
    dS: int
    tensor: np.ndarray

    def __post_init__(self):
        t = np.array(self.tensor, dtype=np.complex128)
        n = self.dS**3
        if t.shape != (n, n):
            raise DimensionError(f"M-map tensor must be {n}x{n}, got {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)

    def six(self) -> np.ndarray:
        """View as ``t[r, r1, r2, s, s1, s2]``."""
        return self.tensor.reshape((self.dS,) * 6)


@dataclass(frozen=True)
class MemoryMatrix(MMap):
    """``K = M - L``: the part of the M-map generated by the correlation matrix alone."""


@dataclass(frozen=True)
class DynamicalMap:
    """``B = B_CP + B_aff``: a linear part in dynamical-matrix form plus a constant offset.

    ``linear[(r r1), (s s1)]`` acts as ``X -> sum linear[r r1, s s1] X[r1, s1]``.
    """

    dS: int
    linear: np.ndarray
    affine: np.ndarray

    def apply(self, rho) -> np.ndarray:
        return apply_dynamical(self.linear, rho) + self.affine

    def choi(self) -> np.ndarray:
        """Dynamical matrix of the linear extension ``X -> B_CP(X) + tr(X) B_aff``.

        This is the matrix whose spectrum decides complete positivity of the
        combined map on states.
        """
        return self.linear + np.kron(self.affine, np.eye(self.dS))


@dataclass(frozen=True)
class KrausSet:
    """Operators ``M_mu`` of shape ``d x d**2`` with ``M(A) = sum_mu M_mu A M_mu^H``."""

    ops: tuple

    def apply(self, aform: np.ndarray) -> np.ndarray:
        return sum(m @ aform @ dagger(m) for m in self.ops)

    def tensor(self) -> np.ndarray:
        vecs = np.array([m.reshape(-1) for m in self.ops])
        return vecs.T @ np.conj(vecs)


def apply_dynamical(linear: np.ndarray, rho) -> np.ndarray:
    d = int(round(np.sqrt(linear.shape[0])))
    b = linear.reshape(d, d, d, d)
    return np.einsum("abcd,bd->ac", b, np.asarray(rho))


# -- construction and contraction ---------------------------------------------


def build_mmap(u: UnitaryMatrix, state: BipartiteState) -> MMap:
    """M[r r1 r2; s s1 s2] = sum U[(r e),(r1 a)] rho[(r2 a),(s2 b)] conj(U[(s e),(s1 b)])."""
    dS, dE = state.dS, state.dE
    if u.dim != dS * dE:
        raise DimensionError(f"unitary of dimension {u.dim} on a {dS}x{dE} state")
    u4 = u.mat.reshape(dS, dE, dS, dE)
    rho4 = state.joint.reshape(dS, dE, dS, dE)
    t = np.einsum("repa,qatb,seub->rpqsut", u4, rho4, np.conj(u4), optimize=True)
    return MMap(dS, _flat(t, dS, 3))


def _aform_matrix(prep) -> np.ndarray:
    return prep.aform if isinstance(prep, PreparationMap) else np.asarray(prep)


def contract_unnormalized(m: MMap, prep) -> np.ndarray:
    """``Q[r, s] = sum M[r k; s l] A[k, l]`` without normalization.

    ``prep`` may be a :class:`PreparationMap` or any ``d**2 x d**2`` map-form
    matrix, so linear combinations of preparations can be contracted directly.
    """
    d = m.dS
    a = _aform_matrix(prep)
    if a.shape != (d * d, d * d):
        raise DimensionError(f"preparation map form {a.shape} does not match dS={d}")
    t = m.tensor.reshape(d, d * d, d, d * d)
    return np.einsum("rksl,kl->rs", t, a)


def contract_mmap(m: MMap, prep: PreparationMap) -> DensityMatrix:
    q = contract_unnormalized(m, prep)
    p = float(np.trace(q).real)
    if p < PROB_CUTOFF:
        raise DegeneratePreparationError(f"preparation succeeds with probability {p:.3e}")
    return DensityMatrix(hermitize(q) / p)


def contract_output(t: np.ndarray, dS: int) -> np.ndarray:
    """Trace over the output pair (delta_{rs}); a ``d**2 x d**2`` matrix in the (r1 r2; s1 s2) grouping."""
    return np.einsum("rpqrut->pqut", t.reshape((dS,) * 6)).reshape(dS * dS, dS * dS)


def contract_initial(t: np.ndarray, dS: int) -> np.ndarray:
    """Trace over the initial-state pair (delta_{r2 s2}); a matrix in the (r r1; s s1) grouping."""
    return np.einsum("rpqsuq->rpsu", t.reshape((dS,) * 6)).reshape(dS * dS, dS * dS)


# -- extraction ---------------------------------------------------------------


def _initial_rho(m: MMap) -> np.ndarray:
    return hermitize(np.einsum("rpqrpt->qt", m.six()) / m.dS)


def initial_state_of(m: MMap) -> DensityMatrix:
    return DensityMatrix(_initial_rho(m))


def bcp_of(m: MMap) -> np.ndarray:
    return contract_initial(m.tensor, m.dS)


def memory_of(m: MMap) -> tuple[MMap, MemoryMatrix]:
    d = m.dS
    rho = _initial_rho(m)
    bcp = bcp_of(m).reshape(d, d, d, d)
    ell = np.einsum("rpsu,qt->rpqsut", bcp, rho)
    ell = _flat(ell, d, 3)
    return MMap(d, ell), MemoryMatrix(d, m.tensor - ell)


def apply_k(k: MemoryMatrix, prep) -> np.ndarray:
    """Correlation-driven correction to the output for one preparation; not normalized."""
    return contract_unnormalized(k, prep)


def assemble_b(m: MMap) -> DynamicalMap:
    _, k = memory_of(m)
    return DynamicalMap(m.dS, bcp_of(m), apply_k(k, identity_prep(m.dS)))


# -- positivity and operator-sum form -------------------------------------------

GROUPINGS = ("mmap", "dynamical", "liouville")


def liouville_to_dynamical(s: np.ndarray) -> np.ndarray:
    """Reshuffle ``S[(r s),(r1 s1)]`` (so that ``vec(B(X)) = S vec(X)``) to ``B[(r r1),(s s1)]``."""
    d = int(round(np.sqrt(s.shape[0])))
    return s.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def cp_check(t: np.ndarray, grouping: str = "dynamical") -> tuple[float, bool]:
    """Minimum eigenvalue of ``t`` in its positivity grouping and whether it is CP.

    ``grouping`` names how ``t`` is laid out: ``"mmap"`` for a flat M-map or
    memory matrix, ``"dynamical"`` for a ``(r r1; s s1)`` map form, and
    ``"liouville"`` for a superoperator acting on row-major ``vec``, which is
    reshuffled before the spectrum is taken.
    """
    t = np.asarray(t, dtype=np.complex128)
    if grouping not in GROUPINGS:
        raise ValueError(f"unknown grouping {grouping!r}; expected one of {GROUPINGS}")
    if grouping == "liouville":
        t = liouville_to_dynamical(t)
    if not is_hermitian(t):
        raise NotHermitianError(f"tensor is not Hermitian in the {grouping!r} grouping")
    lo = float(hermitian_eig(t).eigenvalues[0])
    return lo, lo >= -EIG_TOL


def kraus_of(m: MMap) -> KrausSet:
    """Operator-sum form of an M-map from the spectrum of its flat tensor."""
    d = m.dS
    spec = hermitian_eig(m.tensor)
    lo = float(spec.eigenvalues[0])
    if lo < -EIG_TOL:
        raise NotPositiveError(f"M-map is not positive (min eigenvalue {lo:.3e})", lo)
    ops = []
    for lam, vec in zip(spec.eigenvalues[::-1], spec.eigenvectors.T[::-1]):
        if lam <= EIG_TOL:
            break
        ops.append(np.sqrt(lam) * vec.reshape(d, d * d))
    return KrausSet(tuple(ops))


def mmap_invariants(m: MMap) -> dict:
    """Residuals of the structural identities every physical M-map satisfies."""
    d = m.dS
    t = m.tensor
    rho = _initial_rho(m)
    return {
        "hermiticity": float(np.max(np.abs(t - dagger(t)))),
        "total_trace": float(abs(np.trace(t) - d)),
        "output_trace": float(np.max(np.abs(contract_output(t, d) - np.kron(np.eye(d), rho)))),
        "min_eigenvalue": float(hermitian_eig(hermitize(t)).eigenvalues[0]),
    }


def memory_invariants(k: MemoryMatrix) -> dict:
    d = k.dS
    return {
        "hermiticity": float(np.max(np.abs(k.tensor - dagger(k.tensor)))),
        "initial_contraction": float(np.max(np.abs(contract_initial(k.tensor, d)))),
        "output_contraction": float(np.max(np.abs(contract_output(k.tensor, d)))),
    }


def memory_norm(k: MemoryMatrix) -> float:
    return frobenius(k.tensor)


# -- text format ------------------------------------------------------------


def format_tensor(m) -> str:
    if isinstance(m, DynamicalMap):
        return f"BMAP {m.dS}\n" + format_matrix(m.linear) + format_matrix(m.affine)
    tag = "KMAT" if isinstance(m, MemoryMatrix) else "MMAP"
    return f"{tag} {m.dS}\n" + format_matrix(m.tensor)


def parse_tensor(text: str):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty tensor payload")
    head = lines[0].split()
    if len(head) != 2 or head[0] not in ("MMAP", "KMAT", "BMAP"):
        raise FormatError(f"bad tensor header {lines[0]!r}")
    d = int(head[1])
    mat, used = parse_matrix_lines(lines[1:])
    if head[0] == "MMAP":
        return MMap(d, mat)
    if head[0] == "KMAT":
        return MemoryMatrix(d, mat)
    aff, _ = parse_matrix_lines(lines[1 + used :])
    return DynamicalMap(d, mat, aff)
