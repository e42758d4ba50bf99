"""Bell states, noisy photon-pair sources and the four-photon product state."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import (
    check_density_matrix,
    inverse_permutation,
    ket,
    kron,
    permute_state,
    projector,
)

_S = 1 / np.sqrt(2)


class BellKind(enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI_PLUS = "PsiPlus"
    PSI_MINUS = "PsiMinus"


# Φ± on the diagonal, Ψ± on the antidiagonal; basis order |00>,|01>,|10>,|11>.
_BELL_AMPLITUDES = {
    BellKind.PHI_PLUS: (_S, 0, 0, _S),
    BellKind.PHI_MINUS: (_S, 0, 0, -_S),
    BellKind.PSI_PLUS: (0, _S, _S, 0),
    BellKind.PSI_MINUS: (0, _S, -_S, 0),
}

BELL_ORDER = tuple(BellKind)

ABBC_DIMS = (2, 2, 2, 2)
# A,B,B',C -> A,C,B,B'
SWAP_REGROUP = (0, 3, 1, 2)


def bell(kind: BellKind) -> np.ndarray:
    psi = ket(_BELL_AMPLITUDES[BellKind(kind)])
    psi.setflags(write=False)
    return psi


def bell_projector(kind: BellKind) -> np.ndarray:
    return projector(bell(kind))


@dataclass(frozen=True)
class SourceNoise:
    """Noise of one photon-pair source.

    ``v`` is the weight of the ideal |Φ+> component; of the remaining
    ``1 - v``, a fraction ``lam`` is colored (Φ+/Φ- dephasing) and the rest
    white.
    """

    v: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        for name in ("v", "lam"):
            val = getattr(self, name)
            if not 0.0 <= val <= 1.0:
                raise ValueError(f"SourceNoise.{name} must lie in [0, 1], got {val!r}")

    @property
    def zz_weight(self) -> float:
        """Surviving σz⊗σz correlation, ``v(1 - lam) + lam``."""
        return self.v * (1 - self.lam) + self.lam


def source_state(noise: SourceNoise | None = None, *, v: float | None = None,
                 lam: float | None = None) -> np.ndarray:
    """Density matrix of a noisy source as a convex mixture.

    ``v |Φ+><Φ+| + (1 - v) [lam/2 (|Φ+><Φ+| + |Φ-><Φ-|) + (1 - lam)/4 I]``
    """
    if noise is None:
        noise = SourceNoise(1.0 if v is None else v, 0.0 if lam is None else lam)
    elif v is not None or lam is not None:
        raise TypeError("pass either a SourceNoise or v/lam, not both")
    phi_p = bell_projector(BellKind.PHI_PLUS)
    phi_m = bell_projector(BellKind.PHI_MINUS)
    colored = 0.5 * (phi_p + phi_m)
    white = np.eye(4, dtype=complex) / 4
    rho = noise.v * phi_p + (1 - noise.v) * (noise.lam * colored + (1 - noise.lam) * white)
    return check_density_matrix(rho, dim=4)


def werner(V: float) -> np.ndarray:
    """Werner state ``V |Φ+><Φ+| + (1 - V)/4 I``, valid for V in [-1/3, 1]."""
    if not -1 / 3 - 1e-15 <= V <= 1.0:
        raise ValueError(f"Werner visibility {V!r} outside the positive range [-1/3, 1]")
    rho = V * bell_projector(BellKind.PHI_PLUS) + (1 - V) / 4 * np.eye(4, dtype=complex)
    return check_density_matrix(rho, dim=4)


def fidelity(rho, psi) -> float:
    """<psi|rho|psi>."""
    v = np.asarray(psi, dtype=complex)
    return float(np.vdot(v, np.asarray(rho) @ v).real)


def four_photon_state(rho_ab, rho_bc) -> np.ndarray:
    """Product ρ_AB ⊗ ρ_B'C with subsystem order A, B, B', C."""
    a = check_density_matrix(rho_ab, dim=4)
    b = check_density_matrix(rho_bc, dim=4)
    return check_density_matrix(kron(a, b), dim=16)


def bell_decompose_swapped(psi, perm: Sequence[int] = SWAP_REGROUP) -> np.ndarray:
    """Amplitudes of a four-photon pure state in the Bell(AC) ⊗ Bell(BB') basis.

    The state is given in order A, B, B', C and regrouped with ``perm``
    (default A, C, B, B') before projection. Entry ``[i, j]`` is the
    amplitude on ``BELL_ORDER[i]`` for the first pair and ``BELL_ORDER[j]``
    for the second.
    """
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if v.size != 16:
        raise ValueError(f"expected a 16-amplitude state, got {v.size}")
    v = ket(v)
    w = permute_state(v, ABBC_DIMS, perm)
    basis = np.array([bell(k) for k in BELL_ORDER])
    return basis.conj() @ w.reshape(4, 4) @ basis.conj().T


def unswap(psi) -> np.ndarray:
    """Map an A, C, B, B' ordered state back to A, B, B', C."""
    return permute_state(psi, ABBC_DIMS, inverse_permutation(SWAP_REGROUP))
