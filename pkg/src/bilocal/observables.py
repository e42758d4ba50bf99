"""Local measurement settings and the three-outcome Bell-state measurement."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .linalg import I2, SIGMA_X, SIGMA_Y, SIGMA_Z
from .states import BellKind, bell_projector


@dataclass(frozen=True)
class MeasurementSetting:
    """A ±1-valued polarization observable n·σ given by its Bloch vector."""

    bloch: tuple[float, float, float]

    def __post_init__(self):
        b = tuple(float(c) for c in self.bloch)
        if len(b) != 3:
            raise ValueError(f"Bloch vector needs 3 components, got {len(b)}")
        norm = float(np.sqrt(sum(c * c for c in b)))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"Bloch vector {b} is not a unit vector (|n| = {norm!r})")
        object.__setattr__(self, "bloch", b)

    @classmethod
    def xz(cls, x: float, z: float) -> "MeasurementSetting":
        """Setting in the x-z plane, normalized from unnormalized weights."""
        n = np.hypot(x, z)
        return cls((x / n, 0.0, z / n))

    @property
    def operator(self) -> np.ndarray:
        return setting_operator(self)


def setting_operator(s: MeasurementSetting) -> np.ndarray:
    nx, ny, nz = s.bloch
    return nx * SIGMA_X + ny * SIGMA_Y + nz * SIGMA_Z


def projector(s: MeasurementSetting, outcome: int) -> np.ndarray:
    """Projector for ``outcome`` 0 (eigenvalue +1) or 1 (eigenvalue -1)."""
    if outcome not in (0, 1):
        raise ValueError(f"outcome must be 0 or 1, got {outcome!r}")
    return (I2 + (-1) ** outcome * setting_operator(s)) / 2


SIGMA_Z_SETTING = MeasurementSetting((0.0, 0.0, 1.0))
SIGMA_X_SETTING = MeasurementSetting((1.0, 0.0, 0.0))

# (√2 σz ± σx)/√3 for both Alice and Charlie
BILOCAL_SETTINGS = (MeasurementSetting.xz(1, np.sqrt(2)), MeasurementSetting.xz(-1, np.sqrt(2)))
CHSH_SETTINGS_A = (SIGMA_Z_SETTING, SIGMA_X_SETTING)
CHSH_SETTINGS_C = (MeasurementSetting.xz(1, 1), MeasurementSetting.xz(-1, 1))


class BsmOutcome(enum.Enum):
    """Bob's three coarse-grained outcomes, valued by their table label.

    The two Φ outcomes "10" and "11" are never resolved separately.
    """

    PSI_PLUS = "00"
    PSI_MINUS = "01"
    PHI = "10or11"

    @classmethod
    def parse(cls, label) -> "BsmOutcome":
        if isinstance(label, cls):
            return label
        text = str(label).replace(" ", "").lower()
        aliases = {"00": cls.PSI_PLUS, "01": cls.PSI_MINUS, "10or11": cls.PHI,
                   "10": cls.PHI, "11": cls.PHI, "1x": cls.PHI,
                   "psiplus": cls.PSI_PLUS, "psiminus": cls.PSI_MINUS, "phi": cls.PHI}
        try:
            return aliases[text]
        except KeyError:
            raise ValueError(f"unknown BSM outcome label {label!r}") from None

    @property
    def index(self) -> int:
        return BSM_ORDER.index(self)


BSM_ORDER = (BsmOutcome.PSI_PLUS, BsmOutcome.PSI_MINUS, BsmOutcome.PHI)

# Which POVM element (0-based into (F1, F2, F3)) realizes each outcome.
# F1 is Ψ- dominant and F2 Ψ+ dominant.
_OUTCOME_ELEMENT = {BsmOutcome.PSI_MINUS: 0, BsmOutcome.PSI_PLUS: 1, BsmOutcome.PHI: 2}


def _check_p(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"BSM noise parameter p must lie in [0, 1], got {p!r}")
    return float(p)


def bsm_povm(p: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """POVM (F1, F2, F3) of the partially distinguishable Bell measurement.

    At ``p = 1`` the Ψ- and Ψ+ outcomes are perfect projectors; at ``p = 0``
    both become the same even mixture of the two.
    """
    p = _check_p(p)
    psi_m = bell_projector(BellKind.PSI_MINUS)
    psi_p = bell_projector(BellKind.PSI_PLUS)
    f1 = (1 + p) / 2 * psi_m + (1 - p) / 2 * psi_p
    f2 = (1 + p) / 2 * psi_p + (1 - p) / 2 * psi_m
    f3 = bell_projector(BellKind.PHI_PLUS) + bell_projector(BellKind.PHI_MINUS)
    return f1, f2, f3


def bsm_element(outcome: BsmOutcome, p: float) -> np.ndarray:
    return bsm_povm(p)[_OUTCOME_ELEMENT[BsmOutcome.parse(outcome)]]


def bsm_elements(p: float) -> np.ndarray:
    """POVM elements stacked in ``BSM_ORDER``, shape (3, 4, 4)."""
    f = bsm_povm(p)
    return np.stack([f[_OUTCOME_ELEMENT[b]] for b in BSM_ORDER])


def outcome_sign(outcome: BsmOutcome, y: int) -> int:
    """Sign (-1)^{b_y} attached to a BSM outcome in the correlators.

    For ``y = 1`` the merged Φ outcome has no definite second bit and gets
    weight 0.
    """
    outcome = BsmOutcome.parse(outcome)
    if y == 0:
        return -1 if outcome is BsmOutcome.PHI else 1
    if y == 1:
        return {BsmOutcome.PSI_PLUS: 1, BsmOutcome.PSI_MINUS: -1, BsmOutcome.PHI: 0}[outcome]
    raise ValueError(f"y must be 0 or 1, got {y!r}")


def bsm_coefficients(y: int) -> tuple[int, int, int]:
    """(a1, a2, a3) = (1 - 2y, 1, y - 1)."""
    if y not in (0, 1):
        raise ValueError(f"y must be 0 or 1, got {y!r}")
    return 1 - 2 * y, 1, y - 1


def bsm_operator(y: int, p: float) -> np.ndarray:
    """Bob's effective observable ``a1 F1 + a2 F2 + a3 F3``."""
    a1, a2, a3 = bsm_coefficients(y)
    f1, f2, f3 = bsm_povm(p)
    return a1 * f1 + a2 * f2 + a3 * f3
