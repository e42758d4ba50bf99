"""Dense complex linear algebra on the small Hilbert spaces of the network.

Everything is a plain ``numpy`` array of dtype ``complex128``. Matrices are at
most 16x16 (four qubits), so no sparse path exists. Subsystem order for the
four-photon space is A, B, B', C with |0> = |H> and |1> = |V>.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-10
PSD_ATOL = 1e-9
NORM_ATOL = 1e-12

I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
KET_0 = np.array([1, 0], dtype=complex)
KET_1 = np.array([0, 1], dtype=complex)

for _arr in (I2, SIGMA_X, SIGMA_Y, SIGMA_Z, KET_0, KET_1):
    _arr.setflags(write=False)


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {m.shape}")
    return m


def kron(a, b) -> np.ndarray:
    """Tensor product with the standard block layout ``a[i, j] * b``."""
    return np.kron(as_matrix(a), as_matrix(b))


def dagger(a) -> np.ndarray:
    return as_matrix(a).conj().T


def trace(a) -> complex:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"trace of non-square matrix {m.shape}")
    return complex(np.trace(m))


def matmul(a, b) -> np.ndarray:
    ma, mb = as_matrix(a), as_matrix(b)
    if ma.shape[1] != mb.shape[0]:
        raise ValueError(f"inner dimensions differ: {ma.shape} @ {mb.shape}")
    return ma @ mb


def ket(amplitudes: Sequence[complex]) -> np.ndarray:
    """Validate and return a normalized state vector."""
    psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
    norm = np.vdot(psi, psi).real
    if abs(norm - 1.0) > NORM_ATOL:
        raise ValueError(f"state is not normalized: <psi|psi> = {norm!r}")
    return psi


def projector(psi) -> np.ndarray:
    """|psi><psi| for a state vector."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


def is_hermitian(a, atol: float = HERMITIAN_ATOL) -> bool:
    m = as_matrix(a)
    return m.shape[0] == m.shape[1] and bool(np.allclose(m, m.conj().T, atol=atol, rtol=0))


def check_density_matrix(rho, dim: int | None = None) -> np.ndarray:
    """Return ``rho`` as a read-only array after checking the state axioms.

    Raises ValueError if ``rho`` is not Hermitian, not unit trace or has an
    eigenvalue below ``-PSD_ATOL``.
    """
    m = np.array(rho, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {m.shape}")
    if dim is not None and m.shape[0] != dim:
        raise ValueError(f"expected a {dim}x{dim} density matrix, got {m.shape}")
    if not is_hermitian(m):
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1.0) > TRACE_ATOL:
        raise ValueError(f"density matrix trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(m).min()
    if lo < -PSD_ATOL:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
    m.setflags(write=False)
    return m


def expectation(op, rho) -> float:
    """Real expectation value Tr[op rho].

    An imaginary part above 1e-10 means ``op`` (or ``rho``) is not Hermitian
    and raises ValueError.
    """
    mo, mr = as_matrix(op), as_matrix(rho)
    if mo.shape != mr.shape:
        raise ValueError(f"operator {mo.shape} does not match state {mr.shape}")
    # Tr[AB] = sum_ij A_ij B_ji
    val = np.einsum("ij,ji->", mo, mr)
    if abs(val.imag) > HERMITIAN_ATOL:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}; operator not Hermitian?")
    return float(val.real)


def _check_perm(dims: Sequence[int], perm: Sequence[int]) -> tuple[list[int], list[int]]:
    dims, perm = [int(d) for d in dims], [int(p) for p in perm]
    if sorted(perm) != list(range(len(dims))):
        raise ValueError(f"{perm} is not a permutation of {len(dims)} subsystems")
    return dims, perm


def permute_subsystems(rho, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of an operator.

    Subsystem ``k`` of the result is subsystem ``perm[k]`` of the input, in
    both the row and the column multi-index.
    """
    m = as_matrix(rho)
    dims, perm = _check_perm(dims, perm)
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise ValueError(f"dims {dims} give dimension {total}, matrix is {m.shape}")
    n = len(dims)
    t = m.reshape(dims + dims).transpose(perm + [n + p for p in perm])
    return t.reshape(total, total)


def permute_state(psi, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Vector counterpart of :func:`permute_subsystems`."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    dims, perm = _check_perm(dims, perm)
    total = int(np.prod(dims))
    if v.size != total:
        raise ValueError(f"dims {dims} give dimension {total}, state has {v.size}")
    return v.reshape(dims).transpose(perm).reshape(total)


def inverse_permutation(perm: Sequence[int]) -> list[int]:
    inv = [0] * len(perm)
    for k, p in enumerate(perm):
        inv[p] = k
    return inv
