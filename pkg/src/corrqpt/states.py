"""Density matrices, correlated system-environment states, unitaries and preparations.

Joint indices are system-first: the basis vector ``|r>|alpha>`` of S(x)E sits
at position ``r * dE + alpha``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from corrqpt.errors import (
    DegeneratePreparationError,
    DimensionError,
    FormatError,
    NotHermitianError,
    NotPositiveError,
    TraceIncreasingError,
)
from corrqpt.linalg import (
    EIG_TOL,
    as_matrix,
    dagger,
    format_matrix,
    frobenius,
    hermitian_eig,
    hermitize,
    is_hermitian,
    min_eigenvalue,
    parse_matrix_lines,
    partial_trace,
)

TRACE_TOL = 1e-10
#: Success probabilities below this are "preparation incompatible with state".
PROB_CUTOFF = 1e-14


def _frozen(m) -> np.ndarray:
    a = np.array(as_matrix(m), dtype=np.complex128)
    a.setflags(write=False)
    return a


def _check_density(mat: np.ndarray, what: str) -> None:
    if mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"{what} must be square, got {mat.shape}")
    if not is_hermitian(mat):
        raise NotHermitianError(f"{what} is not Hermitian")
    tr = np.trace(mat)
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"{what} has trace {tr.real:.12g}, expected 1")
    lo = min_eigenvalue(mat)
    if lo < -EIG_TOL:
        raise NotPositiveError(f"{what} has negative eigenvalue {lo:.3e}", lo)


@dataclass(frozen=True)
class DensityMatrix:
    mat: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "mat", _frozen(self.mat))
        if self.check:
            _check_density(self.mat, "density matrix")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class BipartiteState:
    """Joint S(x)E density matrix, system factor first."""

    joint: np.ndarray
    dS: int
    dE: int

    def __post_init__(self):
        object.__setattr__(self, "joint", _frozen(self.joint))
        n = self.dS * self.dE
        if self.joint.shape != (n, n):
            raise DimensionError(
                f"joint state of shape {self.joint.shape} does not match dS={self.dS}, dE={self.dE}"
            )
        _check_density(self.joint, "joint state")

    @property
    def rho_S(self) -> np.ndarray:
        return partial_trace(self.joint, self.dS, self.dE, keep="A")

    @property
    def rho_E(self) -> np.ndarray:
        return partial_trace(self.joint, self.dS, self.dE, keep="B")

    @property
    def chi(self) -> np.ndarray:
        return self.joint - np.kron(self.rho_S, self.rho_E)


@dataclass(frozen=True)
class CorrelationMatrix:
    """Hermitian operator on S(x)E whose partial traces over S and over E both vanish."""

    chi: np.ndarray
    dS: int
    dE: int

    def __post_init__(self):
        object.__setattr__(self, "chi", _frozen(self.chi))
        n = self.dS * self.dE
        if self.chi.shape != (n, n):
            raise DimensionError(f"correlation matrix has shape {self.chi.shape}, expected ({n}, {n})")
        if not is_hermitian(self.chi):
            raise NotHermitianError("correlation matrix is not Hermitian")
        for keep in ("A", "B"):
            red = partial_trace(self.chi, self.dS, self.dE, keep=keep)
            if np.max(np.abs(red)) > TRACE_TOL:
                side = "E" if keep == "A" else "S"
                raise ValueError(f"partial trace of correlation matrix over {side} is not zero")


@dataclass(frozen=True)
class UnitaryMatrix:
    mat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mat", _frozen(self.mat))
        m = self.mat
        if m.shape[0] != m.shape[1]:
            raise DimensionError(f"unitary must be square, got {m.shape}")
        dev = np.max(np.abs(dagger(m) @ m - np.eye(m.shape[0])))
        if dev > 1e-10:
            raise ValueError(f"matrix is not unitary (max |U^H U - I| = {dev:.3e})")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


def aform_of(ops) -> np.ndarray:
    """Map-form matrix ``sum_k vec(A_k) vec(A_k)^H`` with row-major ``vec``.

    Row index ``r1 * d + r2`` pairs the output index ``r1`` of ``A_k`` with its
    input index ``r2``; this is the tensor the M-map contracts against.
    """
    vecs = np.array([np.asarray(a, dtype=np.complex128).reshape(-1) for a in ops])
    return vecs.T @ np.conj(vecs)


@dataclass(frozen=True)
class PreparationMap:
    """CP, trace-non-increasing operation on the system, in operator-list and map form."""

    ops: tuple
    aform: np.ndarray
    dS: int

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(_frozen(a) for a in self.ops))
        object.__setattr__(self, "aform", _frozen(self.aform))

    @property
    def is_trace_preserving(self) -> bool:
        s = sum(dagger(a) @ a for a in self.ops)
        return bool(np.max(np.abs(s - np.eye(self.dS))) <= 1e-10)


def prep_from_kraus(ops) -> PreparationMap:
    """Build a preparation from its Sudarshan-Kraus operators.

    Raises:
        DimensionError: operators are not square or not all the same size.
        TraceIncreasingError: ``sum_k A_k^H A_k`` has an eigenvalue above 1.
    """
    ops = [as_matrix(a) for a in ops]
    if not ops:
        raise ValueError("a preparation needs at least one operator")
    d = ops[0].shape[0]
    for a in ops:
        if a.shape != (d, d):
            raise DimensionError(f"operator of shape {a.shape}; expected ({d}, {d})")
    s = hermitize(sum(dagger(a) @ a for a in ops))
    top = float(hermitian_eig(s).eigenvalues[-1])
    if top > 1.0 + EIG_TOL:
        raise TraceIncreasingError(f"operators increase trace (largest eigenvalue of sum A^H A is {top:.6g})")
    return PreparationMap(ops=tuple(ops), aform=aform_of(ops), dS=d)


def identity_prep(dS: int) -> PreparationMap:
    return prep_from_kraus([np.eye(dS)])


def replacement_prep(psi) -> PreparationMap:
    """Trace-and-replace preparation: discard the system and prepare ``|psi>``.

    Operators ``|psi><k|`` for every basis vector ``k``; the output is the pure
    state ``|psi><psi|`` on every run and the environment is not conditioned.
    """
    psi = np.asarray(psi, dtype=np.complex128).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    d = psi.shape[0]
    return prep_from_kraus([np.outer(psi, np.eye(d)[k]) for k in range(d)])


def prepare_unnormalized(prep: PreparationMap, joint: np.ndarray, dS: int, dE: int) -> np.ndarray:
    """``sum_k (A_k (x) I) X (A_k (x) I)^H`` for any operator ``X`` on S(x)E."""
    if prep.dS != dS:
        raise DimensionError(f"preparation acts on dimension {prep.dS}, state has dS={dS}")
    eye = np.eye(dE)
    out = np.zeros((dS * dE, dS * dE), dtype=np.complex128)
    for a in prep.ops:
        big = np.kron(a, eye)
        out += big @ joint @ dagger(big)
    return out


def apply_prep(prep: PreparationMap, state: BipartiteState) -> tuple[float, BipartiteState]:
    """Prepare the system part of ``state``; return success probability and normalized state."""
    sigma = prepare_unnormalized(prep, state.joint, state.dS, state.dE)
    p = float(np.trace(sigma).real)
    if p < PROB_CUTOFF:
        raise DegeneratePreparationError(f"preparation succeeds with probability {p:.3e}")
    return p, BipartiteState(hermitize(sigma) / p, state.dS, state.dE)


def reduced_evolution(u: np.ndarray, x: np.ndarray, dS: int, dE: int) -> np.ndarray:
    """``tr_E[U X U^H]`` for any operator ``X`` on S(x)E."""
    u = np.asarray(u)
    n = dS * dE
    if u.shape != (n, n) or np.shape(x) != (n, n):
        raise DimensionError(f"unitary {u.shape} and operator {np.shape(x)} do not match dS*dE={n}")
    return partial_trace(u @ x @ dagger(u), dS, dE, keep="A")


def evolve_reduce(u: UnitaryMatrix, state: BipartiteState) -> DensityMatrix:
    if u.dim != state.dS * state.dE:
        raise DimensionError(f"unitary of dimension {u.dim} on a {state.dS}x{state.dE} state")
    out = reduced_evolution(u.mat, state.joint, state.dS, state.dE)
    return DensityMatrix(hermitize(out))


def compose_bipartite(
    rhoS: DensityMatrix, rhoE: DensityMatrix, chi: CorrelationMatrix | None = None
) -> BipartiteState:
    """``rho_S (x) rho_E + chi``; rejects a correlation part too large to keep the state positive."""
    dS, dE = rhoS.dim, rhoE.dim
    joint = np.kron(rhoS.mat, rhoE.mat)
    if chi is not None:
        if (chi.dS, chi.dE) != (dS, dE):
            raise DimensionError(f"correlation matrix is {chi.dS}x{chi.dE}, marginals are {dS}x{dE}")
        joint = joint + chi.chi
    lo = min_eigenvalue(joint)
    if lo < -EIG_TOL:
        raise NotPositiveError(
            f"correlation matrix too large: joint state has min eigenvalue {lo:.3e}", lo
        )
    return BipartiteState(joint, dS, dE)


def split_correlations(state: BipartiteState) -> tuple[DensityMatrix, DensityMatrix, CorrelationMatrix]:
    rS, rE = state.rho_S, state.rho_E
    chi = state.joint - np.kron(rS, rE)
    return (
        DensityMatrix(rS),
        DensityMatrix(rE),
        CorrelationMatrix(chi, state.dS, state.dE),
    )


def correlation_norm(state: BipartiteState) -> float:
    return frobenius(state.chi)


# -- text format ------------------------------------------------------------


def _read_payload(text: str, tag: str) -> tuple[int, int, np.ndarray]:
    """Header ``"TAG dS dE"`` followed by one square matrix of side ``dS * dE``."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty payload")
    head = lines[0].split()
    if head[0] != tag or len(head) != 3:
        raise FormatError(f"expected header '{tag} dS dE', got {lines[0]!r}")
    try:
        dS, dE = int(head[1]), int(head[2])
    except ValueError as exc:
        raise FormatError(f"bad header {lines[0]!r}") from exc
    mat, used = parse_matrix_lines(lines[1:])
    if 1 + used != len(lines):
        raise FormatError(f"{len(lines) - 1 - used} trailing lines after {tag} payload")
    if mat.shape != (dS * dE, dS * dE):
        raise FormatError(f"{tag} header says {dS}x{dE} but matrix is {mat.shape}")
    return dS, dE, mat


def format_state(state: BipartiteState) -> str:
    return f"STATE {state.dS} {state.dE}\n" + format_matrix(state.joint)


def parse_state(text: str) -> BipartiteState:
    dS, dE, mat = _read_payload(text, "STATE")
    return BipartiteState(mat, dS, dE)


def format_unitary(u: UnitaryMatrix, dS: int, dE: int) -> str:
    return f"UNITARY {dS} {dE}\n" + format_matrix(u.mat)


def parse_unitary(text: str) -> tuple[UnitaryMatrix, int, int]:
    dS, dE, mat = _read_payload(text, "UNITARY")
    return UnitaryMatrix(mat), dS, dE
