"""Reconstructing the M-map from a complete set of preparations.

The experiment prepares the system with each of the ``d**4`` operations

    A_mn(X) = |pi_n><pi_m| X |pi_m><pi_n|

(project onto the pure state ``pi_m``, then rotate to ``pi_n``), lets the
joint system evolve, and tomographs the reduced output. The unnormalized
outputs ``p_m * Q_mn`` are linear in the M-map, and the map forms of the
``A_mn`` span all ``d**2 x d**2`` matrices, so the M-map follows from the
Hilbert-Schmidt dual basis of those map forms.

Preparation ``(m, n)`` sits at flat position ``m * d**2 + n``. Indices are
0-based throughout, so the qubit operation written ``A^(3,4)`` in 1-based
notation (``|x-><z+|``) is ``(2, 3)`` here.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from corrqpt.errors import (
    DegenerateRecordError,
    DimensionError,
    FormatError,
    IllConditionedBasisError,
    IncompleteRecordError,
)
from corrqpt.linalg import (
    format_matrix,
    hermitian_eig,
    hermitize,
    parse_matrix_lines,
)
from corrqpt.prng import ShiftRegisterRNG
from corrqpt.states import (
    PROB_CUTOFF,
    BipartiteState,
    DensityMatrix,
    PreparationMap,
    UnitaryMatrix,
    prep_from_kraus,
    prepare_unnormalized,
    reduced_evolution,
)
from corrqpt.supermap import MMap, contract_unnormalized

log = logging.getLogger(__name__)

#: Gram matrices with a larger condition number are refused.
MAX_CONDITION = 1e8


def _qubit_vectors() -> list[np.ndarray]:
    # unnormalized, so the projectors come out exactly as (I +- sigma)/2
    return [
        np.array([1, 1], dtype=complex),  # |x+>
        np.array([1, 1j], dtype=complex),  # |y+>
        np.array([1, 0], dtype=complex),  # |z+>
        np.array([1, -1], dtype=complex),  # |x->
    ]


def _general_vectors(d: int) -> list[np.ndarray]:
    eye = np.eye(d, dtype=complex)
    vecs = [eye[j] for j in range(d)]
    for j in range(d):
        for k in range(j + 1, d):
            vecs.append(eye[j] + eye[k])
            vecs.append(eye[j] + 1j * eye[k])
    return vecs


def hs_gram(mats) -> np.ndarray:
    """``G[i, j] = tr(X_i^H X_j)``."""
    v = np.array([np.asarray(x).reshape(-1) for x in mats])
    return np.conj(v) @ v.T


def condition_number(gram: np.ndarray) -> float:
    w = np.abs(hermitian_eig(hermitize(gram)).eigenvalues)
    lo = float(w.min())
    return float("inf") if lo == 0.0 else float(w.max() / lo)


@dataclass(frozen=True)
class PreparationBasis:
    dS: int
    vectors: tuple
    projectors: tuple
    preparations: tuple = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def index(self, m: int, n: int) -> int:
        return m * self.dS**2 + n

    def prep(self, m: int, n: int) -> PreparationMap:
        return self.preparations[self.index(m, n)]

    @property
    def projector_gram(self) -> np.ndarray:
        if "pgram" not in self._cache:
            self._cache["pgram"] = hs_gram(self.projectors)
        return self._cache["pgram"]

    @property
    def projector_dual(self) -> np.ndarray:
        """``D[m]`` with ``tr(D[m]^H P[n]) = delta_mn``; shape ``(d**2, d, d)``."""
        if "pdual" not in self._cache:
            self._cache["pdual"] = _dual(self.projectors, self.projector_gram)
        return self._cache["pdual"]

    @property
    def gram(self) -> np.ndarray:
        """Gram matrix of the ``d**4`` preparation map forms."""
        if "gram" not in self._cache:
            self._cache["gram"] = hs_gram([a.aform for a in self.preparations])
        return self._cache["gram"]

    @property
    def condition(self) -> float:
        # The map-form Gram is kron(Gp, conj(Gp)) for projector Gram Gp, so its
        # condition number is the square of the (much smaller) projector one.
        if "cond" not in self._cache:
            self._cache["cond"] = condition_number(self.projector_gram) ** 2
        return self._cache["cond"]

    @property
    def dual(self) -> np.ndarray:
        """Dual basis of the preparation map forms; shape ``(d**4, d**2, d**2)``."""
        if "dual" not in self._cache:
            self._check_conditioning()
            self._cache["dual"] = _dual([a.aform for a in self.preparations], self.gram)
        return self._cache["dual"]

    def _check_conditioning(self) -> None:
        if not self.preparations:
            raise ValueError("basis has no preparations; build it with preparation_basis()")
        if self.condition > MAX_CONDITION:
            raise IllConditionedBasisError(
                f"preparation Gram condition number {self.condition:.3e} exceeds {MAX_CONDITION:.0e}"
            )


def _dual(mats, gram: np.ndarray) -> np.ndarray:
    mats = np.array([np.asarray(x) for x in mats])
    coeff = np.conj(np.linalg.inv(gram))
    return np.einsum("jk,kab->jab", coeff, mats)


def pure_state_basis(dS: int, rotation=None) -> PreparationBasis:
    """``d**2`` pure states whose projectors span all operators on the system.

    For a qubit this is ``|x+>, |y+>, |z+>, |x->``. For larger ``d`` it is
    ``|j>`` together with ``(|j> + |k>)/sqrt 2`` and ``(|j> + i|k>)/sqrt 2`` for
    ``j < k``. An optional unitary ``rotation`` is applied to every vector,
    which gives a fallback basis when some projector is orthogonal to the
    initial system state.
    """
    if dS < 2:
        raise DimensionError("the system needs dimension at least 2")
    raw = _qubit_vectors() if dS == 2 else _general_vectors(dS)
    if rotation is not None:
        rot = np.asarray(rotation, dtype=complex)
        raw = [rot @ v for v in raw]
    # u u^H / (u^H u) is exact for the small-integer vectors of the default sets
    projs = tuple(np.outer(u, np.conj(u)) / np.vdot(u, u).real for u in raw)
    vecs = [u / np.linalg.norm(u) for u in raw]
    for arr in (*vecs, *projs):
        arr.setflags(write=False)
    return PreparationBasis(dS, tuple(vecs), projs)


def preparation_basis(dS: int, rotation=None) -> PreparationBasis:
    states = pure_state_basis(dS, rotation)
    preps = tuple(
        prep_from_kraus([np.outer(vn, np.conj(vm))])
        for vm in states.vectors
        for vn in states.vectors
    )
    return PreparationBasis(dS, states.vectors, states.projectors, preps)


@dataclass(frozen=True)
class PrepDecomposition:
    coefficients: np.ndarray
    residual: float


def decompose_prep(prep, basis: PreparationBasis) -> PrepDecomposition:
    """Coefficients ``alpha`` with ``sum_j alpha_j aform(A_j) = aform(prep)``.

    Raises:
        IllConditionedBasisError: Gram condition number above ``MAX_CONDITION``.
    """
    basis._check_conditioning()
    target = prep.aform if isinstance(prep, PreparationMap) else np.asarray(prep)
    forms = np.array([a.aform for a in basis.preparations])
    rhs = np.einsum("jab,ab->j", np.conj(forms), target)
    alpha = np.linalg.solve(basis.gram, rhs)
    resid = float(np.linalg.norm(np.einsum("j,jab->ab", alpha, forms) - target))
    return PrepDecomposition(alpha, resid)


# -- simulated experiment -------------------------------------------------------


@dataclass(frozen=True)
class TomographyRecord:
    """Outcomes of all ``d**4`` preparations.

    ``probabilities[j]`` is ``p_m`` for flat entry ``j = (m, n)``,
    ``unnormalized[j]`` the matrix ``p_m * Q_mn`` the reconstruction consumes,
    and ``outputs[j]`` the normalized ``Q_mn`` (``None`` for flagged rows).
    Under noise ``outputs`` need not be positive, so they are kept as arrays.
    """

    dS: int
    dE: int
    probabilities: np.ndarray
    unnormalized: np.ndarray
    outputs: tuple
    noise_sigma: float = 0.0
    seed: int = 0
    flagged: tuple = ()

    def entry(self, m: int, n: int) -> tuple[float, np.ndarray | None, np.ndarray]:
        j = m * self.dS**2 + n
        return float(self.probabilities[j]), self.outputs[j], self.unnormalized[j]

    @property
    def n_preparations(self) -> int:
        return len(self.probabilities)


def simulate_tomography(
    u: UnitaryMatrix,
    state: BipartiteState,
    basis: PreparationBasis,
    noise_sigma: float = 0.0,
    seed: int = 0,
) -> TomographyRecord:
    """Run every basis preparation on ``state`` and record the reduced outputs.

    With ``noise_sigma > 0`` independent Gaussian noise of that width is added
    to the real and imaginary part of every entry of every unnormalized output
    (entries in flat-preparation, then row-major order, real part first), the
    result is re-Hermitized and the probability is re-read from its trace.
    Rows whose probability falls below ``PROB_CUTOFF`` are flagged as
    ``(m, n)`` pairs; they keep their (zero) unnormalized output.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    dS, dE = state.dS, state.dE
    if basis.dS != dS:
        raise DimensionError(f"basis is for dS={basis.dS}, state has dS={dS}")
    if u.dim != dS * dE:
        raise DimensionError(f"unitary of dimension {u.dim} on a {dS}x{dE} state")
    if not basis.preparations:
        raise ValueError("basis has no preparations; build it with preparation_basis()")

    rng = ShiftRegisterRNG(seed) if noise_sigma > 0 else None
    n_prep = len(basis.preparations)
    unnorm = np.empty((n_prep, dS, dS), dtype=np.complex128)
    probs = np.empty(n_prep)
    outputs = []
    flagged = []
    for j, prep in enumerate(basis.preparations):
        sigma = prepare_unnormalized(prep, state.joint, dS, dE)
        y = hermitize(reduced_evolution(u.mat, sigma, dS, dE))
        if rng is not None:
            y = hermitize(y + noise_sigma * rng.complex_normal((dS, dS)))
        p = float(np.trace(y).real)
        unnorm[j] = y
        probs[j] = p
        if p < PROB_CUTOFF:
            flagged.append(divmod(j, dS * dS))
            outputs.append(None)
        else:
            outputs.append(y / p)
    if flagged:
        log.warning("%d preparations have vanishing probability: %s", len(flagged), flagged)
    unnorm.setflags(write=False)
    probs.setflags(write=False)
    return TomographyRecord(
        dS, dE, probs, unnorm, tuple(outputs), float(noise_sigma), int(seed), tuple(flagged)
    )


def _check_record(record: TomographyRecord, basis: PreparationBasis, allow_degenerate: bool) -> None:
    d = record.dS
    if basis.dS != d:
        raise DimensionError(f"basis is for dS={basis.dS}, record has dS={d}")
    if record.unnormalized.shape != (d**4, d, d) or len(basis.preparations) != d**4:
        raise IncompleteRecordError(
            f"record holds {record.unnormalized.shape[0]} outputs; {d**4} are required"
        )
    if record.flagged and not allow_degenerate:
        raise DegenerateRecordError(
            f"{len(record.flagged)} preparations have vanishing probability; "
            "use a rotated basis or pass allow_degenerate=True",
            record.flagged,
        )


def reconstruct_mmap(
    record: TomographyRecord, basis: PreparationBasis, allow_degenerate: bool = False
) -> MMap:
    """Linear-inversion estimate of the M-map from a complete record.

    ``M[r k; s l] = sum_j Y_j[r, s] * conj(D_j[k, l])`` with ``Y_j`` the
    unnormalized outputs and ``D_j`` the dual basis. Flagged rows carry an
    exactly-zero output, which is still valid data, but they are refused
    unless ``allow_degenerate`` is set.
    """
    _check_record(record, basis, allow_degenerate)
    d = record.dS
    t = np.einsum("jrs,jkl->rksl", record.unnormalized, np.conj(basis.dual))
    return MMap(d, hermitize(t.reshape(d**3, d**3)))


def standard_qpt(projector_dual: np.ndarray, outputs) -> np.ndarray:
    """Dynamical matrix ``B[(r r1), (s s1)]`` of a map known on a spanning set of inputs.

    ``outputs[n]`` is the image of the input whose dual is ``projector_dual[n]``.
    """
    outputs = np.asarray(outputs)
    d = outputs.shape[1]
    b = np.einsum("nab,nrs->rasb", np.conj(projector_dual), outputs)
    return b.reshape(d * d, d * d)


def simulate_standard_qpt(u: UnitaryMatrix, rho_E, basis: PreparationBasis) -> np.ndarray:
    """Ordinary process tomography with the environment fixed in ``rho_E``."""
    d = basis.dS
    rho_E = np.asarray(rho_E)
    dE = rho_E.shape[0]
    outs = [reduced_evolution(u.mat, np.kron(p, rho_E), d, dE) for p in basis.projectors]
    return standard_qpt(basis.projector_dual, outs)


def reconstruct_by_blocks(
    record: TomographyRecord, basis: PreparationBasis, allow_degenerate: bool = False
) -> MMap:
    """Reconstruct as ``d**2`` ordinary process tomographies, one per measured projector.

    For fixed ``m`` the outputs over ``n`` determine the map
    ``X -> p_m tr_E[U (X (x) rho_E|m) U^H]``; the M-map is then recovered by
    expanding the initial-state slot in the dual projector basis.
    """
    _check_record(record, basis, allow_degenerate)
    d = record.dS
    dual = basis.projector_dual
    ys = record.unnormalized.reshape(d * d, d * d, d, d)
    blocks = np.array([standard_qpt(dual, ys[m]) for m in range(d * d)])
    blocks = blocks.reshape(d * d, d, d, d, d)  # [m, r, r1, s, s1]
    t = np.einsum("mtq,mrpsu->rpqsut", np.conj(dual), blocks)
    return MMap(d, hermitize(t.reshape(d**3, d**3)))


def basis_responses(m: MMap, basis: PreparationBasis) -> np.ndarray:
    """Unnormalized outputs of every basis preparation under ``m``."""
    return np.array([contract_unnormalized(m, a) for a in basis.preparations])


def predict_from_responses(responses: np.ndarray, prep, basis: PreparationBasis) -> np.ndarray:
    alpha = decompose_prep(prep, basis).coefficients
    return np.einsum("j,jrs->rs", alpha, responses)


def predict_output(m: MMap, prep, basis: PreparationBasis) -> DensityMatrix:
    """Output for ``prep`` assembled from the basis responses of ``m`` and its coefficients."""
    q = predict_from_responses(basis_responses(m, basis), prep, basis)
    return DensityMatrix(hermitize(q) / np.trace(q).real)


def predict_from_record(record: TomographyRecord, prep, basis: PreparationBasis) -> np.ndarray:
    q = predict_from_responses(record.unnormalized, prep, basis)
    return hermitize(q) / np.trace(q).real


# -- text format ------------------------------------------------------------


def format_record(record: TomographyRecord) -> str:
    d = record.dS
    lines = [
        "TOMOGRAPHY_RECORD",
        f"dS {record.dS}",
        f"dE {record.dE}",
        f"seed {record.seed}",
        f"noise_sigma {record.noise_sigma:.16e}",
        f"entries {record.n_preparations}",
    ]
    out = "\n".join(lines) + "\n"
    for j in range(record.n_preparations):
        m, n = divmod(j, d * d)
        flag = 1 if (m, n) in record.flagged else 0
        out += f"ENTRY {m} {n}\np {record.probabilities[j]:.16e}\nflagged {flag}\n"
        out += format_matrix(record.unnormalized[j])
    return out


def parse_record(text: str) -> TomographyRecord:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != "TOMOGRAPHY_RECORD":
        raise FormatError("missing TOMOGRAPHY_RECORD header")
    head = {}
    for ln in lines[1:6]:
        key, _, val = ln.partition(" ")
        head[key] = val.strip()
    try:
        dS, dE = int(head["dS"]), int(head["dE"])
        seed, sigma = int(head["seed"]), float(head["noise_sigma"])
        count = int(head["entries"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"bad record header: {exc}") from exc
    pos = 6
    probs, unnorm, outputs, flagged = [], [], [], []
    for _ in range(count):
        try:
            tag, m, n = lines[pos].split()
            p = float(lines[pos + 1].split()[1])
            flag = int(lines[pos + 2].split()[1])
        except (IndexError, ValueError) as exc:
            raise FormatError(f"bad record entry near line {pos + 1}") from exc
        if tag != "ENTRY":
            raise FormatError(f"expected ENTRY, got {lines[pos]!r}")
        mat, used = parse_matrix_lines(lines[pos + 3 :])
        pos += 3 + used
        probs.append(p)
        unnorm.append(mat)
        if flag:
            flagged.append((int(m), int(n)))
            outputs.append(None)
        else:
            outputs.append(mat / p)
    return TomographyRecord(
        dS, dE, np.array(probs), np.array(unnorm), tuple(outputs), sigma, seed, tuple(flagged)
    )


__all__ = [
    "PreparationBasis",
    "PrepDecomposition",
    "TomographyRecord",
    "basis_responses",
    "condition_number",
    "decompose_prep",
    "format_record",
    "hs_gram",
    "parse_record",
    "predict_from_record",
    "predict_output",
    "preparation_basis",
    "pure_state_basis",
    "reconstruct_by_blocks",
    "reconstruct_mmap",
    "simulate_standard_qpt",
    "simulate_tomography",
    "standard_qpt",
]
