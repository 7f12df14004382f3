"""Dense complex linear algebra used throughout the package.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The module adds
what numpy does not give us directly: a partial trace with an explicit
subsystem tag, a cyclic Jacobi eigensolver for complex Hermitian matrices,
a PSD square root on top of it, and the plain-text matrix format.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from corrqpt.errors import (
    ConvergenceError,
    DimensionError,
    FormatError,
    NotHermitianError,
    NotPositiveError,
)

#: Negative eigenvalues down to ``-EIG_TOL`` are treated as zero everywhere.
EIG_TOL = 1e-10

HERMITIAN_TOL = 1e-10
JACOBI_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(m).T


def frobenius(m: np.ndarray) -> float:
    return float(np.linalg.norm(m))


def kron(a, b) -> np.ndarray:
    """Kronecker product; entry ``(i*rb + k, j*cb + l)`` equals ``a[i, j] * b[k, l]``."""
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace(m, dim_a: int, dim_b: int, keep: str = "A") -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    Args:
        m: square matrix on ``A (x) B`` with joint index ``i*dim_b + j``.
        dim_a: dimension of the first factor.
        dim_b: dimension of the second factor.
        keep: ``"A"`` to return the ``dim_a``-square marginal, ``"B"`` for the
            ``dim_b``-square one.

    Returns:
        The reduced operator.
    """
    m = as_matrix(m)
    n = dim_a * dim_b
    if m.shape != (n, n):
        raise DimensionError(
            f"matrix of shape {m.shape} is not ({dim_a}*{dim_b})-square"
        )
    t = m.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "A":
        return np.einsum("ijkj->ik", t)
    if keep == "B":
        return np.einsum("ijil->jl", t)
    raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")


def is_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    return float(np.max(np.abs(m - dagger(m)), initial=0.0)) <= tol * scale


def hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + dagger(m))


@dataclass(frozen=True)
class HermitianSpectrum:
    """Eigenvalues in ascending order and matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def _check_hermitian(m) -> np.ndarray:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"matrix of shape {a.shape} is not square")
    if not is_hermitian(a):
        dev = float(np.max(np.abs(a - dagger(a))))
        raise NotHermitianError(f"matrix is not Hermitian (max |A - A^H| = {dev:.3e})")
    return a


def hermitian_eig(
    m, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
) -> HermitianSpectrum:
    """Diagonalize a complex Hermitian matrix by cyclic Jacobi sweeps.

    Each pivot ``(p, q)`` is annihilated by a unitary that first removes the
    phase of ``A[p, q]`` and then applies a real Givens rotation. Sweeps stop
    once the off-diagonal Frobenius norm drops below ``tol * max(1, ||A||_F)``.

    Raises:
        NotHermitianError: input deviates from its adjoint by more than 1e-10.
        ConvergenceError: ``max_sweeps`` sweeps did not reach the threshold.
    """
    a = hermitize(_check_hermitian(m)).copy()
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    threshold = tol * max(1.0, frobenius(a))
    tiny = 1e-300

    offdiag = ~np.eye(n, dtype=bool)

    def off_norm() -> float:
        return float(np.linalg.norm(a[offdiag]))

    for _ in range(max_sweeps):
        if off_norm() <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                b = abs(apq)
                if b <= tiny:
                    continue
                phase = apq / b
                theta = 0.5 * math.atan2(2.0 * b, a[q, q].real - a[p, p].real)
                c, s = math.cos(theta), math.sin(theta)
                j = np.array(
                    [[c, s], [-s * np.conj(phase), c * np.conj(phase)]],
                    dtype=np.complex128,
                )
                idx = [p, q]
                a[:, idx] = a[:, idx] @ j
                a[idx, :] = dagger(j) @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ j
    else:
        if off_norm() > threshold:
            raise ConvergenceError(
                f"Jacobi iteration did not converge in {max_sweeps} sweeps"
            )

    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return HermitianSpectrum(eigenvalues=w[order], eigenvectors=v[:, order])


def min_eigenvalue(m) -> float:
    return float(hermitian_eig(m).eigenvalues[0])


def psd_sqrt(m) -> np.ndarray:
    """Principal square root of a positive semidefinite Hermitian matrix.

    Eigenvalues in ``[-EIG_TOL, 0)`` are clamped to zero; anything more negative
    raises :class:`NotPositiveError`.
    """
    spec = hermitian_eig(m)
    lo = float(spec.eigenvalues[0])
    if lo < -EIG_TOL:
        raise NotPositiveError(
            f"matrix is not positive semidefinite (min eigenvalue {lo:.3e})", lo
        )
    roots = np.sqrt(np.clip(spec.eigenvalues, 0.0, None))
    v = spec.eigenvectors
    return hermitize((v * roots) @ dagger(v))


# -- text format ------------------------------------------------------------


def format_matrix(m) -> str:
    """Serialize as ``"rows cols"`` followed by one ``"re im"`` line per entry (row-major)."""
    m = as_matrix(m)
    rows, cols = m.shape
    lines = [f"{rows} {cols}"]
    for z in m.ravel():
        lines.append(f"{z.real:.16e} {z.imag:.16e}")
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty matrix payload")
    mat, used = parse_matrix_lines(lines)
    if used != len(lines):
        raise FormatError(f"{len(lines) - used} trailing lines after matrix payload")
    return mat


def parse_matrix_lines(lines: list[str]) -> tuple[np.ndarray, int]:
    """Parse one matrix from the head of ``lines``; return it and the line count consumed."""
    if not lines:
        raise FormatError("empty matrix payload")
    try:
        rows, cols = (int(t) for t in lines[0].split())
    except ValueError as exc:
        raise FormatError(f"bad matrix header {lines[0]!r}") from exc
    if rows < 0 or cols < 0:
        raise FormatError(f"negative matrix shape {rows}x{cols}")
    n = rows * cols
    if len(lines) < 1 + n:
        raise FormatError(f"expected {n} entries, found {len(lines) - 1}")
    out = np.empty(n, dtype=np.complex128)
    for k, ln in enumerate(lines[1 : 1 + n]):
        parts = ln.split()
        if len(parts) != 2:
            raise FormatError(f"bad matrix entry line {ln!r}")
        try:
            re_, im_ = float(parts[0]), float(parts[1])
        except ValueError as exc:
            raise FormatError(f"bad matrix entry line {ln!r}") from exc
        if not (math.isfinite(re_) and math.isfinite(im_)):
            raise FormatError(f"non-finite matrix entry {ln!r}")
        out[k] = complex(re_, im_)
    return out.reshape(rows, cols), 1 + n


def save_matrix(path, m) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_matrix(m))


def load_matrix(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        return parse_matrix(fh.read())
