import numpy as np
import pytest

from corrqpt.states import BipartiteState, UnitaryMatrix, prep_from_kraus


def rand_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def rand_hermitian(rng, d):
    a = rand_complex(rng, d, d)
    return (a + a.conj().T) / 2


def rand_density(rng, d, rank=None):
    g = rand_complex(rng, d, rank or d)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def rand_unitary(rng, d):
    # independent of the package generator: eigenvectors of a random Hermitian
    return np.linalg.eigh(rand_hermitian(rng, d))[1]


def rand_state(rng, dS, dE, rank=None):
    return BipartiteState(rand_density(rng, dS * dE, rank), dS, dE)


def rand_cptp(rng, d, n_ops=3):
    """Kraus operators sliced from a random isometry d -> n_ops*d."""
    q, _ = np.linalg.qr(rand_complex(rng, n_ops * d, d))
    return prep_from_kraus([q[k * d : (k + 1) * d] for k in range(n_ops)])


def rand_triple(rng, dS, dE):
    return UnitaryMatrix(rand_unitary(rng, dS * dE)), rand_state(rng, dS, dE), rand_cptp(rng, dS)


def mmap_by_loops(u, joint, dS, dE):
    """Entry-by-entry evaluation of the M-map index formula."""
    d = dS
    m = np.zeros((d**3, d**3), dtype=complex)
    for r in range(d):
        for r1 in range(d):
            for r2 in range(d):
                for s in range(d):
                    for s1 in range(d):
                        for s2 in range(d):
                            acc = 0
                            for a in range(dE):
                                for b in range(dE):
                                    for e in range(dE):
                                        acc += (
                                            u[r * dE + e, r1 * dE + a]
                                            * joint[r2 * dE + a, s2 * dE + b]
                                            * np.conj(u[s * dE + e, s1 * dE + b])
                                        )
                            m[r * d * d + r1 * d + r2, s * d * d + s1 * d + s2] = acc
    return m


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
