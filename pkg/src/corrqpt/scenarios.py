"""Seeded problem instances: random and canonical unitaries and correlated states.

Every generator is a pure function of its arguments; randomness comes only
from :class:`corrqpt.prng.ShiftRegisterRNG`, so instances are bit-identical
across runs.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from corrqpt.errors import FormatError, ScenarioVerificationError, SearchFailedError
from corrqpt.linalg import dagger, frobenius, hermitian_eig, hermitize
from corrqpt.prng import ShiftRegisterRNG, derive_seed
from corrqpt.states import BipartiteState, UnitaryMatrix, reduced_evolution
from corrqpt.supermap import assemble_b, build_mmap, memory_of

FLAG_TOL = 1e-10

#: Weights of |Phi+>, |Phi->, |Psi+>, |Psi-> in the canonical Bell-diagonal state.
BELL_WEIGHTS = (0.7, 0.2, 0.1, 0.0)
#: Minimum eigenvalue of the combined dynamical map for that state under CNOT,
#: as produced by canonical_cnot_bell(); the construction re-derives it.
CANONICAL_NCP_WITNESS = -0.08309518948452992

CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


def haar_unitary(d: int, seed: int) -> UnitaryMatrix:
    """Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of diag(R) removed."""
    if d < 1:
        raise ValueError("dimension must be at least 1")
    rng = ShiftRegisterRNG(seed)
    z = rng.complex_normal((d, d)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return UnitaryMatrix(q * (diag / np.abs(diag)))


def _random_density(d: int, rng: ShiftRegisterRNG) -> np.ndarray:
    g = rng.complex_normal((d, d))
    rho = g @ dagger(g)
    return hermitize(rho / np.trace(rho).real)


def _random_pure(d: int, rng: ShiftRegisterRNG) -> np.ndarray:
    v = rng.complex_normal((d,))
    v = v / np.linalg.norm(v)
    return np.outer(v, np.conj(v))


def random_correlated_state(dS: int, dE: int, w: float, seed: int) -> BipartiteState:
    """``(1 - w) rho_S (x) rho_E + w |psi><psi|`` with random full-rank marginals and random pure ``psi``."""
    if dS < 2 or dE < 2:
        raise ValueError("dimensions must be at least 2")
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    rng = ShiftRegisterRNG(seed)
    rho_s = _random_density(dS, rng)
    rho_e = _random_density(dE, rng)
    pure = _random_pure(dS * dE, rng)
    joint = (1.0 - w) * np.kron(rho_s, rho_e) + w * pure
    return BipartiteState(hermitize(joint), dS, dE)


def instance_metrics(u: UnitaryMatrix, state: BipartiteState) -> dict:
    """Norms and spectra the scenario flags are decided from."""
    m = build_mmap(u, state)
    _, k = memory_of(m)
    b = assemble_b(m)
    return {
        "norm_chi": frobenius(state.chi),
        "norm_K": frobenius(k.tensor),
        "norm_Baff": frobenius(b.affine),
        "min_eig_M": float(hermitian_eig(m.tensor).eigenvalues[0]),
        "min_eig_B": float(hermitian_eig(hermitize(b.choi())).eigenvalues[0]),
    }


def flags_from_metrics(metrics: dict) -> frozenset:
    flags = set()
    if metrics["norm_K"] <= FLAG_TOL:
        flags.add("product")
    else:
        flags.add("correlated")
        if metrics["norm_Baff"] <= FLAG_TOL:
            flags.add("vanishing_memory")
    if metrics["min_eig_B"] < -FLAG_TOL:
        flags.add("ncp_expected")
    return frozenset(flags)


@dataclass(frozen=True)
class ScenarioInstance:
    label: str
    u: UnitaryMatrix
    state: BipartiteState
    seed: int
    expected_flags: frozenset
    metrics: dict

    @property
    def dS(self) -> int:
        return self.state.dS

    @property
    def dE(self) -> int:
        return self.state.dE


def make_instance(label: str, u: UnitaryMatrix, state: BipartiteState, seed: int, expected=None) -> ScenarioInstance:
    """Build an instance, deriving its flags from the M-map decomposition.

    If ``expected`` is given the derived flags must equal it.
    """
    metrics = instance_metrics(u, state)
    flags = flags_from_metrics(metrics)
    if expected is not None and flags != frozenset(expected):
        raise ScenarioVerificationError(
            f"instance {label!r} has flags {sorted(flags)}, expected {sorted(expected)}"
        )
    return ScenarioInstance(label, u, state, int(seed), flags, metrics)


def random_instance(dS: int, dE: int, w: float, seed: int, label: str | None = None) -> ScenarioInstance:
    u = haar_unitary(dS * dE, derive_seed(seed, 1))
    state = random_correlated_state(dS, dE, w, derive_seed(seed, 2))
    return make_instance(label or f"random-w{w:g}", u, state, seed)


def bell_diagonal_state(weights) -> BipartiteState:
    s = 1 / np.sqrt(2)
    vecs = [
        np.array([s, 0, 0, s]),
        np.array([s, 0, 0, -s]),
        np.array([0, s, s, 0]),
        np.array([0, s, -s, 0]),
    ]
    joint = sum(w * np.outer(v, v) for w, v in zip(weights, vecs))
    return BipartiteState(np.asarray(joint, dtype=complex), 2, 2)


def canonical_cnot_bell() -> ScenarioInstance:
    """Bell-diagonal two-qubit state under CNOT (system controls): a not-completely-positive example.

    Raises:
        ScenarioVerificationError: the combined map's minimum eigenvalue is not below -1e-3.
    """
    inst = make_instance(
        "canonical_cnot_bell",
        UnitaryMatrix(CNOT),
        bell_diagonal_state(BELL_WEIGHTS),
        0,
        expected={"correlated", "ncp_expected"},
    )
    if not inst.metrics["min_eig_B"] < -1e-3:
        raise ScenarioVerificationError(
            f"NCP witness {inst.metrics['min_eig_B']:.6g} is not below -1e-3"
        )
    return inst


def _controlled(v: np.ndarray) -> np.ndarray:
    p0 = np.diag([1.0, 0.0]).astype(complex)
    p1 = np.diag([0.0, 1.0]).astype(complex)
    return np.kron(p0, np.eye(2)) + np.kron(p1, v)


_PAULIS = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


def _herm_to_real(h: np.ndarray) -> np.ndarray:
    return np.array([h[0, 0].real, h[0, 1].real, h[0, 1].imag, h[1, 1].real])


def _max_admissible_scale(base: np.ndarray, direction: np.ndarray) -> float:
    """Largest ``t`` with ``base + t * direction`` positive semidefinite (bisection)."""

    def ok(t: float) -> bool:
        return hermitian_eig(hermitize(base + t * direction)).eigenvalues[0] >= 0.0

    lo, hi = 0.0, 1.0
    while ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise SearchFailedError("correlation direction does not leave the PSD cone")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def vanishing_memory_instance(seed: int, w: float = 1.0, max_tries: int = 50) -> ScenarioInstance:
    """Correlated two-qubit instance whose correlations never reach the reduced dynamics.

    Uses a controlled-``V`` interaction. The condition ``tr_E[U chi U^H] = 0``
    is linear in ``chi``, so candidates are drawn from the null space of that
    map restricted to ``span{sigma_i (x) sigma_j}`` (operators whose partial
    traces vanish), then scaled to half of the largest value that keeps the
    joint state positive, times ``w``.

    Raises:
        SearchFailedError: no admissible candidate in ``max_tries`` draws.
    """
    if not 0.0 <= w <= 1.0:
        raise ValueError("w must lie in [0, 1]")
    dS = dE = 2
    rng = ShiftRegisterRNG(seed)
    v = haar_unitary(2, derive_seed(seed, 1)).mat
    u = UnitaryMatrix(_controlled(v))
    basis = [np.kron(a, b) for a in _PAULIS for b in _PAULIS]
    constraint = np.array(
        [_herm_to_real(reduced_evolution(u.mat, c, dS, dE)) for c in basis]
    ).T
    _, sv, vt = np.linalg.svd(constraint)
    rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0])))
    null = vt[rank:]
    for _ in range(max_tries):
        rho_s = _random_density(dS, rng)
        rho_e = _random_density(dE, rng)
        coeffs = rng.normal_array((null.shape[0],)) @ null
        chi = sum(c * b for c, b in zip(coeffs, basis))
        chi = chi / frobenius(chi)
        base = np.kron(rho_s, rho_e)
        chi = 0.5 * w * _max_admissible_scale(base, chi) * chi
        state = BipartiteState(hermitize(base + chi), dS, dE)
        if w == 0.0:
            return make_instance("vanishing_memory", u, state, seed, expected={"product"})
        if frobenius(state.chi) <= 1e-2 * w:
            continue
        if frobenius(reduced_evolution(u.mat, state.chi, dS, dE)) > 1e-12:
            continue
        return make_instance(
            "vanishing_memory", u, state, seed, expected={"correlated", "vanishing_memory"}
        )
    raise SearchFailedError(f"no vanishing-memory instance found in {max_tries} tries")


# -- NCP scan ---------------------------------------------------------------


@dataclass(frozen=True)
class ScanRow:
    label: str
    seed: int
    norm_chi: float
    norm_K: float
    min_eig_B: float
    flags: frozenset


SCAN_COLUMNS = ("label", "seed", "norm_chi", "norm_K", "min_eig_B", "flags")


def _row(inst: ScenarioInstance) -> ScanRow:
    mt = inst.metrics
    return ScanRow(inst.label, inst.seed, mt["norm_chi"], mt["norm_K"], mt["min_eig_B"], inst.expected_flags)


def ncp_scan(n_instances: int, dS: int, dE: int, seed: int, w: float | None = None, extra=()) -> list[ScanRow]:
    """Memory norm against complete positivity of the combined map over random instances.

    Instance ``i`` uses seed ``derive_seed(seed, i)``; its correlation weight is
    ``w`` if given, otherwise uniform on [0, 1) from that seed. Instances in
    ``extra`` are appended as-is. The rows are data: no relation between the
    memory norm and complete positivity is assumed.
    """
    if n_instances < 1:
        raise ValueError("n_instances must be at least 1")
    rows = []
    for i in range(n_instances):
        s = derive_seed(seed, i)
        wi = ShiftRegisterRNG(s).uniform() if w is None else float(w)
        rows.append(_row(random_instance(dS, dE, wi, s, label=f"random-{i}")))
    rows.extend(_row(inst) for inst in extra)
    return rows


def format_scan_table(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    for r in rows:
        writer.writerow(
            [r.label, r.seed, repr(r.norm_chi), repr(r.norm_K), repr(r.min_eig_B), "|".join(sorted(r.flags))]
        )
    return buf.getvalue()


def parse_scan_table(text: str) -> list[ScanRow]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != SCAN_COLUMNS:
        raise FormatError(f"scan table header must be {','.join(SCAN_COLUMNS)}")
    try:
        return [
            ScanRow(
                r["label"],
                int(r["seed"]),
                float(r["norm_chi"]),
                float(r["norm_K"]),
                float(r["min_eig_B"]),
                frozenset(f for f in r["flags"].split("|") if f),
            )
            for r in reader
        ]
    except (TypeError, ValueError) as exc:
        raise FormatError(f"bad scan table row: {exc}") from exc


__all__ = [
    "BELL_WEIGHTS",
    "CANONICAL_NCP_WITNESS",
    "CNOT",
    "SWAP",
    "ScanRow",
    "ScenarioInstance",
    "bell_diagonal_state",
    "canonical_cnot_bell",
    "flags_from_metrics",
    "format_scan_table",
    "haar_unitary",
    "instance_metrics",
    "make_instance",
    "ncp_scan",
    "parse_scan_table",
    "random_correlated_state",
    "random_instance",
    "vanishing_memory_instance",
]
