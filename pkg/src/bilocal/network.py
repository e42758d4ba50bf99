"""Tripartite statistics of the swapping network and the bilocal/CHSH tests.

Probability arrays throughout use the axis order ``[x, z, b, a, c]`` with
``b`` indexed by :data:`BSM_ORDER`, i.e. shape ``(2, 2, 3, 2, 2)``. Extra
leading axes are allowed by the vectorized helpers and are used by the
bootstrap.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .linalg import check_density_matrix, expectation, kron
from .observables import (
    BILOCAL_SETTINGS,
    BSM_ORDER,
    CHSH_SETTINGS_A,
    CHSH_SETTINGS_C,
    BsmOutcome,
    MeasurementSetting,
    bsm_element,
    bsm_elements,
    bsm_operator,
    outcome_sign,
    projector,
    setting_operator,
)
from .states import SourceNoise, four_photon_state, source_state

TABLE_SHAPE = (2, 2, 3, 2, 2)
MODES = ("bilocality", "chsh")

# (-1)^(a+c)
_AC_SIGN = np.array([[1.0, -1.0], [-1.0, 1.0]])
# [y, b] -> (-1)^{b_y}, zero for the merged Φ outcome at y = 1
_B_SIGN = np.array([[outcome_sign(b, y) for b in BSM_ORDER] for y in (0, 1)], dtype=float)
# (-1)^(x+z)
_XZ_SIGN = np.array([[1.0, -1.0], [-1.0, 1.0]])


class TableError(ValueError):
    """A probability table is incomplete or malformed."""


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True, eq=False)
class NetworkConfig:
    """Sources, BSM quality and local settings of one network run.

    ``source1`` and ``source2`` are either :class:`SourceNoise` or an explicit
    4x4 density matrix (used for product-state checks).
    """

    source1: SourceNoise | np.ndarray = field(default_factory=SourceNoise)
    source2: SourceNoise | np.ndarray = field(default_factory=SourceNoise)
    p: float = 1.0
    settings_a: tuple[MeasurementSetting, MeasurementSetting] = BILOCAL_SETTINGS
    settings_c: tuple[MeasurementSetting, MeasurementSetting] = BILOCAL_SETTINGS
    mode: str = "bilocality"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"BSM noise parameter p must lie in [0, 1], got {self.p!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("settings_a", "settings_c"):
            s = getattr(self, name)
            if len(s) != 2 or not all(isinstance(m, MeasurementSetting) for m in s):
                raise ValueError(f"{name} must be two MeasurementSetting values")

    @classmethod
    def bilocality(cls, v: float = 1.0, lam: float = 0.0, p: float = 1.0,
                   v_c: float | None = None, lam_c: float | None = None) -> "NetworkConfig":
        """Bilocality settings with per-source noise (source 2 defaults to source 1)."""
        s1 = SourceNoise(v, lam)
        s2 = SourceNoise(v if v_c is None else v_c, lam if lam_c is None else lam_c)
        return cls(s1, s2, p, BILOCAL_SETTINGS, BILOCAL_SETTINGS, "bilocality")

    @classmethod
    def chsh(cls, v: float = 1.0, lam: float = 0.0, p: float = 1.0,
             v_c: float | None = None, lam_c: float | None = None) -> "NetworkConfig":
        s1 = SourceNoise(v, lam)
        s2 = SourceNoise(v if v_c is None else v_c, lam if lam_c is None else lam_c)
        return cls(s1, s2, p, CHSH_SETTINGS_A, CHSH_SETTINGS_C, "chsh")

    @classmethod
    def from_swapped(cls, V: float, p: float = 1.0, lam: float = 0.0,
                     mode: str = "bilocality") -> "NetworkConfig":
        """Symmetric sources with ``v_A = v_C = sqrt(V)``."""
        if not 0.0 <= V <= 1.0:
            raise ValueError(f"swapped visibility must lie in [0, 1], got {V!r}")
        make = cls.chsh if mode == "chsh" else cls.bilocality
        return make(math.sqrt(V), lam, p)

    def _rho(self, src) -> np.ndarray:
        if isinstance(src, SourceNoise):
            return source_state(src)
        return check_density_matrix(src, dim=4)

    @cached_property
    def rho_ab(self) -> np.ndarray:
        return self._rho(self.source1)

    @cached_property
    def rho_bc(self) -> np.ndarray:
        return self._rho(self.source2)

    @cached_property
    def state(self) -> np.ndarray:
        """16x16 state in subsystem order A, B, B', C."""
        return four_photon_state(self.rho_ab, self.rho_bc)


# ---------------------------------------------------------------------------
# probability tables


@dataclass(eq=False)
class ProbabilityTable:
    """Conditional probabilities P(a, b, c | x, z), missing entries are NaN."""

    probs: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        self.probs = np.array(self.probs, dtype=float)
        if self.probs.shape != TABLE_SHAPE:
            raise TableError(f"table must have shape {TABLE_SHAPE}, got {self.probs.shape}")
        if np.any(self.probs < 0):
            raise TableError("negative probability in table")
        if self.sigma is not None:
            self.sigma = np.array(self.sigma, dtype=float)
            if self.sigma.shape != TABLE_SHAPE:
                raise TableError(f"sigma must have shape {TABLE_SHAPE}")
            if np.any(self.sigma < 0):
                raise TableError("negative sigma in table")

    def block(self, x: int, z: int) -> np.ndarray:
        """The 3x2x2 block for setting pair (x, z); raises if incomplete."""
        blk = self.probs[x, z]
        if np.isnan(blk).any():
            missing = [f"(b={BSM_ORDER[b].value}, a={a}, c={c})"
                       for b, a, c in zip(*np.nonzero(np.isnan(blk)))]
            raise TableError(f"table block x={x}, z={z} is missing {', '.join(missing)}")
        return blk

    def is_complete(self) -> bool:
        return not np.isnan(self.probs).any()

    def block_sums(self) -> np.ndarray:
        return self.probs.sum(axis=(2, 3, 4))

    def check_normalized(self, atol: float = 1e-4) -> None:
        sums = self.block_sums()
        bad = np.argwhere(~(np.abs(sums - 1) <= atol))
        if bad.size:
            x, z = bad[0]
            raise TableError(f"block x={x}, z={z} sums to {float(sums[x, z]):.6g}, not 1 (tol {atol})")

    @classmethod
    def from_records(cls, records: Iterable[dict]) -> "ProbabilityTable":
        probs = np.full(TABLE_SHAPE, np.nan)
        sigma = np.full(TABLE_SHAPE, np.nan)
        any_sigma = False
        for i, rec in enumerate(records):
            try:
                x, z, a, c = (int(rec[k]) for k in ("x", "z", "a", "c"))
                b = BsmOutcome.parse(rec["b"])
                p = float(rec["p"])
            except KeyError as exc:
                raise TableError(f"record {i} lacks field {exc.args[0]!r}") from None
            except (TypeError, ValueError) as exc:
                raise TableError(f"record {i}: {exc}") from None
            if any(v not in (0, 1) for v in (x, z, a, c)):
                raise TableError(f"record {i}: x, z, a, c must be bits")
            idx = (x, z, b.index, a, c)
            if not np.isnan(probs[idx]):
                raise TableError(f"record {i} duplicates entry x={x} z={z} b={b.value} a={a} c={c}")
            probs[idx] = p
            if rec.get("sigma") is not None:
                sigma[idx] = float(rec["sigma"])
                any_sigma = True
        if any_sigma:
            sigma = np.where(np.isnan(sigma), 0.0, sigma)
        return cls(probs, sigma if any_sigma else None)

    def to_records(self) -> list[dict]:
        out = []
        for x, z, bi, a, c in itertools.product(*(range(n) for n in TABLE_SHAPE)):
            p = self.probs[x, z, bi, a, c]
            if np.isnan(p):
                continue
            rec = {"x": x, "z": z, "b": BSM_ORDER[bi].value, "a": a, "c": c, "p": float(p)}
            if self.sigma is not None:
                rec["sigma"] = float(self.sigma[x, z, bi, a, c])
            out.append(rec)
        return out

    @classmethod
    def from_json(cls, doc) -> "ProbabilityTable":
        if isinstance(doc, dict):
            doc = doc.get("records", doc.get("entries"))
        if not isinstance(doc, list):
            raise TableError("probability table JSON must be a list of records "
                             "or an object with a 'records' list")
        return cls.from_records(doc)

    @classmethod
    def load(cls, path: str | Path) -> "ProbabilityTable":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise TableError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(doc)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps({"records": self.to_records()}, indent=1) + "\n")


# ---------------------------------------------------------------------------
# quantum model


def joint_probability(cfg: NetworkConfig, x: int, z: int, b, a: int, c: int) -> float:
    """Tr[(P_a^x ⊗ F_b ⊗ P_c^z) ρ_ABB'C] by explicit 16x16 construction."""
    op = kron(kron(projector(cfg.settings_a[x], a), bsm_element(b, cfg.p)),
              projector(cfg.settings_c[z], c))
    val = expectation(op, cfg.state)
    if val < -1e-10:
        raise ArithmeticError(f"negative probability {val:.3e}: operator bug")
    return max(val, 0.0)


def model_probs(cfg: NetworkConfig) -> np.ndarray:
    """All 48 model probabilities as a ``(2, 2, 3, 2, 2)`` array."""
    pa = np.array([[projector(s, o) for o in (0, 1)] for s in cfg.settings_a])
    pc = np.array([[projector(s, o) for o in (0, 1)] for s in cfg.settings_c])
    fb = bsm_elements(cfg.p)
    # Tr[(Pa ⊗ F ⊗ Pc) rho]; rho indexed [row a,k,c ; col a',k',c']
    rho = cfg.state.reshape(2, 4, 2, 2, 4, 2)
    probs = np.einsum("xaij,bkl,zcmn,jlnikm->xzbac", pa, fb, pc, rho, optimize=True)
    if np.abs(probs.imag).max() > 1e-10:
        raise ArithmeticError("model probabilities have an imaginary part")
    probs = probs.real
    if probs.min() < -1e-10:
        raise ArithmeticError(f"negative model probability {probs.min():.3e}")
    return np.clip(probs, 0.0, None)


def model_table(cfg: NetworkConfig) -> ProbabilityTable:
    return ProbabilityTable(model_probs(cfg))


def correlator(cfg: NetworkConfig, x: int, y: int, z: int) -> float:
    """<A_x B^y C_z> = Tr[(A_x ⊗ B^y ⊗ C_z) ρ_ABB'C]."""
    op = kron(kron(setting_operator(cfg.settings_a[x]), bsm_operator(y, cfg.p)),
              setting_operator(cfg.settings_c[z]))
    return expectation(op, cfg.state)


def correlators_from_probs(probs: np.ndarray) -> np.ndarray:
    """Signed sums for every (y, x, z); output shape ``(..., 2, 2, 2)``.

    Each (x, z) block is divided by its total first, so unnormalized blocks
    (rounded experimental tables, raw counts) give conditional correlators.
    """
    norm = probs.sum(axis=(-3, -2, -1))
    return np.einsum("...xzbac,yb,ac->...yxz", probs, _B_SIGN, _AC_SIGN) / norm[..., None, :, :]


def correlator_from_table(t: ProbabilityTable, x: int, y: int, z: int) -> float:
    """Σ_{b,a,c} (-1)^{a+c} sign(b, y) P(a, b, c | x, z) over the normalized block."""
    if y not in (0, 1):
        raise ValueError(f"y must be 0 or 1, got {y!r}")
    blk = t.block(x, z)
    total = blk.sum()
    if total <= 0:
        raise TableError(f"table block x={x}, z={z} has zero total probability")
    return float(np.einsum("bac,b,ac->", blk, _B_SIGN[y], _AC_SIGN) / total)


def bilocal_I(values) -> float:
    """Mean of the four y=0 correlators, ``values[x][z]``."""
    return float(np.mean(np.asarray(values, dtype=float)))


def bilocal_J(values) -> float:
    """Mean of the four y=1 correlators weighted by (-1)^(x+z)."""
    return float(np.mean(_XZ_SIGN * np.asarray(values, dtype=float)))


def b13_from_correlators(corr) -> BilocalResult:
    """B13 from the eight correlators ``corr[y][x][z]``."""
    corr = np.asarray(corr, dtype=float)
    if corr.shape != (2, 2, 2):
        raise ValueError(f"expected correlators of shape (2, 2, 2), got {corr.shape}")
    I, J = bilocal_I(corr[0]), bilocal_J(corr[1])
    return BilocalResult(I, J, float(b13_from_IJ(I, J)), corr)


def b13_from_IJ(I, J):
    return np.sqrt(np.abs(I)) + np.sqrt(np.abs(J))


def b13_values(probs: np.ndarray):
    """Vectorized (I, J, B13) over any leading axes of ``probs``."""
    corr = correlators_from_probs(probs)
    I = corr[..., 0, :, :].mean(axis=(-2, -1))
    J = (_XZ_SIGN * corr[..., 1, :, :]).mean(axis=(-2, -1))
    return I, J, b13_from_IJ(I, J)


@dataclass(frozen=True)
class BilocalResult:
    I: float
    J: float
    b13: float
    correlators: np.ndarray  # [y, x, z]


def b13(source: ProbabilityTable | NetworkConfig) -> BilocalResult:
    """Bilocal parameter from a probability table or a network model."""
    if isinstance(source, NetworkConfig):
        t = model_table(source)
    else:
        t = source
    corr = np.array([[[correlator_from_table(t, x, y, z) for z in (0, 1)]
                      for x in (0, 1)] for y in (0, 1)])
    return b13_from_correlators(corr)


def b13_closed_form(p: float, vA: float, lamA: float, vC: float, lamC: float) -> float:
    """Bilocal parameter of the noisy model at the bilocality settings."""
    za = vA * (1 - lamA) + lamA
    zc = vC * (1 - lamC) + lamC
    return math.sqrt(abs(2 * za * zc)) / math.sqrt(3) + math.sqrt(p * vA * vC) / math.sqrt(6)


def chsh_closed_form(p: float, vA: float, lamA: float, vC: float, lamC: float) -> float:
    """CHSH value conditioned on the Ψ- outcome at the CHSH settings."""
    return math.sqrt(2) * (p * vA * vC + abs((vA * (-1 + lamA) - lamA) * (vC * (-1 + lamC) - lamC)))


def conditional_correlators(probs: np.ndarray, outcome=BsmOutcome.PSI_MINUS) -> np.ndarray:
    """<A_x C_z> conditioned on one BSM outcome, shape ``(..., 2, 2)``.

    Raises ZeroDivisionError when the outcome never occurs for some (x, z).
    """
    sub = probs[..., BsmOutcome.parse(outcome).index, :, :]
    norm = sub.sum(axis=(-2, -1))
    if np.any(norm <= 0):
        raise ZeroDivisionError(f"BSM outcome {BsmOutcome.parse(outcome).value} has zero probability")
    return np.einsum("...ac,ac->...", sub, _AC_SIGN) / norm


def chsh_from_corr(corr: np.ndarray):
    return np.abs(corr[..., 0, 0] + corr[..., 0, 1] + corr[..., 1, 0] - corr[..., 1, 1])


def chsh_from_table(t: ProbabilityTable, outcome=BsmOutcome.PSI_MINUS) -> float:
    probs = np.stack([np.stack([t.block(x, z) for z in (0, 1)]) for x in (0, 1)])
    return float(chsh_from_corr(conditional_correlators(probs, outcome)))


def chsh_from_model(cfg: NetworkConfig) -> float:
    """CHSH value of Alice and Charlie given Bob's Ψ- outcome."""
    if cfg.mode != "chsh":
        raise ValueError("chsh_from_model needs a config in 'chsh' mode")
    return float(chsh_from_corr(conditional_correlators(model_probs(cfg))))


# ---------------------------------------------------------------------------
# noise bands and thresholds


@dataclass(frozen=True)
class SweepRow:
    p: float
    b13_low: float
    b13_high: float
    s_low: float
    s_high: float


def noise_sweep(p_grid: Sequence[float], v: float, lam_low: float = 0.0,
                lam_high: float = 1.0) -> list[SweepRow]:
    """Theory bands versus p for symmetric sources of visibility ``v`` each.

    The band edges are the closed forms at the two colored-noise fractions.
    """
    rows = []
    for p in p_grid:
        p = float(p)
        rows.append(SweepRow(
            p,
            b13_closed_form(p, v, lam_low, v, lam_low),
            b13_closed_form(p, v, lam_high, v, lam_high),
            chsh_closed_form(p, v, lam_low, v, lam_low),
            chsh_closed_form(p, v, lam_high, v, lam_high),
        ))
    return rows


def _criterion(which: str, method: str) -> tuple[Callable[[float], float], float]:
    which = which.lower()
    if which not in ("b13", "chsh"):
        raise ValueError(f"criterion must be 'b13' or 'chsh', got {which!r}")
    if method == "closed_form":
        if which == "b13":
            return (lambda V: b13_closed_form(1.0, math.sqrt(V), 0.0, math.sqrt(V), 0.0)), 1.0
        return (lambda V: chsh_closed_form(1.0, math.sqrt(V), 0.0, math.sqrt(V), 0.0)), 2.0
    if method == "model":
        if which == "b13":
            return (lambda V: b13(NetworkConfig.from_swapped(V)).b13), 1.0
        return (lambda V: chsh_from_model(NetworkConfig.from_swapped(V, mode="chsh"))), 2.0
    raise ValueError(f"method must be 'model' or 'closed_form', got {method!r}")


def threshold_visibility(which: str, method: str = "model", bracket=(0.01, 1.0),
                         iterations: int = 60) -> float:
    """Swapped visibility at which the criterion meets its local bound.

    Werner sources with ``v_A = v_C = sqrt(V)`` and a perfect BSM; solved by
    bisection on the monotone function ``criterion(V) - bound``.
    """
    f, bound = _criterion(which, method)
    lo, hi = bracket
    g_lo, g_hi = f(lo) - bound, f(hi) - bound
    if g_lo * g_hi > 0:
        raise ValueError(f"bound is not crossed inside {bracket}")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        g = f(mid) - bound
        if (g < 0) == (g_lo < 0):
            lo, g_lo = mid, g
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# local deterministic strategies

# b strategy "00","01","10","11" -> table outcome
_B_STRATEGY_OUTCOME = {
    (0, 0): BsmOutcome.PSI_PLUS,
    (0, 1): BsmOutcome.PSI_MINUS,
    (1, 0): BsmOutcome.PHI,
    (1, 1): BsmOutcome.PHI,
}
_RESPONSES = tuple(itertools.product((0, 1), repeat=2))  # f(0), f(1)


@dataclass(frozen=True)
class Strategy:
    a: tuple[int, int]
    c: tuple[int, int]
    b: tuple[int, int]

    def table(self) -> ProbabilityTable:
        probs = np.zeros(TABLE_SHAPE)
        bi = _B_STRATEGY_OUTCOME[self.b].index
        for x, z in itertools.product((0, 1), repeat=2):
            probs[x, z, bi, self.a[x], self.c[z]] = 1.0
        return ProbabilityTable(probs)

    @property
    def outcome(self) -> BsmOutcome:
        return _B_STRATEGY_OUTCOME[self.b]


def deterministic_strategies() -> list[Strategy]:
    return [Strategy(a, c, b) for a in _RESPONSES for c in _RESPONSES for b in _RESPONSES]


def deterministic_strategy_max(objective: str) -> float:
    """Largest B13 or CHSH value over all 64 deterministic local strategies.

    For CHSH the correlators are conditioned on the strategy's own BSM
    outcome, which it produces with certainty.
    """
    objective = objective.lower()
    if objective == "b13":
        return max(b13(s.table()).b13 for s in deterministic_strategies())
    if objective == "chsh":
        return max(chsh_from_table(s.table(), s.outcome) for s in deterministic_strategies())
    raise ValueError(f"objective must be 'b13' or 'chsh', got {objective!r}")


# ---------------------------------------------------------------------------
# bundled measurement


def _measured_doc() -> dict:
    from importlib import resources

    return json.loads(resources.files("bilocal").joinpath("data/measured_p13.json").read_text())


def measured_table() -> ProbabilityTable:
    """The measured P13 table exactly as printed, with its one-sigma errors."""
    return ProbabilityTable.from_json(_measured_doc())


def printed_correlators() -> np.ndarray:
    """The eight printed correlators as an array ``[y, x, z]``."""
    printed = _measured_doc()["printed_correlators"]
    return np.array([[[printed[f"A{x}B{y}C{z}"] for z in (0, 1)] for x in (0, 1)] for y in (0, 1)])
