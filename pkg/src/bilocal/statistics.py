"""Monte Carlo emulation of the experiment and the count-level estimators."""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit

from .network import (
    TABLE_SHAPE,
    NetworkConfig,
    ProbabilityTable,
    TableError,
    b13_values,
    chsh_from_corr,
    conditional_correlators,
    model_probs,
)
from .observables import BSM_ORDER, BsmOutcome

# Trials per independent RNG stream. Fixed so that the sample does not depend
# on how many workers process the shards.
SHARD_SIZE = 1 << 20


@dataclass(frozen=True)
class EstimateWithError:
    value: float
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma!r}")

    def __str__(self):
        return f"{self.value:.6f} ± {self.sigma:.6f}"


# ---------------------------------------------------------------------------
# counts


@dataclass(eq=False)
class CountsTable:
    """Integer counts ``[x, z, b, a, c]`` and the number of trials per (x, z)."""

    counts: np.ndarray
    trials: np.ndarray
    mode: str = "bilocality"

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        self.trials = np.asarray(self.trials, dtype=np.int64)
        if self.counts.shape != TABLE_SHAPE:
            raise ValueError(f"counts must have shape {TABLE_SHAPE}, got {self.counts.shape}")
        if self.trials.shape != (2, 2):
            raise ValueError(f"trials must have shape (2, 2), got {self.trials.shape}")
        if (self.counts < 0).any():
            raise ValueError("negative count")
        totals = self.counts.sum(axis=(2, 3, 4))
        if (totals > self.trials).any():
            x, z = np.argwhere(totals > self.trials)[0]
            raise ValueError(f"block x={x}, z={z} has {totals[x, z]} counts "
                             f"but only {self.trials[x, z]} trials")

    def to_json(self) -> dict:
        records = []
        for x, z, bi, a, c in itertools.product(*(range(n) for n in TABLE_SHAPE)):
            records.append({"x": x, "z": z, "b": BSM_ORDER[bi].value, "a": a, "c": c,
                            "n": int(self.counts[x, z, bi, a, c])})
        return {
            "mode": self.mode,
            "trials": {f"{x},{z}": int(self.trials[x, z]) for x in (0, 1) for z in (0, 1)},
            "counts": records,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CountsTable":
        if not isinstance(doc, dict) or "trials" not in doc or "counts" not in doc:
            raise ValueError("counts file needs 'trials' and 'counts'")
        trials = np.zeros((2, 2), dtype=np.int64)
        seen = set()
        for key, n in doc["trials"].items():
            try:
                x, z = (int(s) for s in key.split(","))
            except ValueError:
                raise ValueError(f"bad trials key {key!r}, expected 'x,z'") from None
            trials[x, z] = int(n)
            seen.add((x, z))
        if len(seen) != 4:
            raise ValueError("trials must list all four (x, z) pairs")
        counts = np.zeros(TABLE_SHAPE, dtype=np.int64)
        for i, rec in enumerate(doc["counts"]):
            try:
                b = BsmOutcome.parse(rec["b"])
                counts[int(rec["x"]), int(rec["z"]), b.index, int(rec["a"]), int(rec["c"])] += int(rec["n"])
            except (KeyError, IndexError, ValueError, TypeError) as exc:
                raise ValueError(f"counts record {i} is malformed: {exc!r}") from None
        return cls(counts, trials, doc.get("mode", "bilocality"))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CountsTable":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_json(doc)


def _shard_counts(seed: int, x: int, z: int, shard: int, n: int, probs: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(x, z, shard)))
    return rng.multinomial(n, probs)


def sample_counts(cfg: NetworkConfig, n_trials_per_setting: int, seed: int,
                  workers: int = 1) -> CountsTable:
    """Draw ``n`` outcomes (b, a, c) for each setting pair from the model.

    Each (x, z) block is cut into shards of ``SHARD_SIZE`` trials, and each
    shard has its own stream derived from ``(seed, x, z, shard)``; the result
    is therefore identical for any ``workers``.
    """
    n = int(n_trials_per_setting)
    if n < 1:
        raise ValueError(f"need at least one trial per setting, got {n}")
    probs = model_probs(cfg)
    jobs = []
    for x, z in itertools.product((0, 1), repeat=2):
        p = probs[x, z].reshape(-1)
        p = p / p.sum()
        n_shards = -(-n // SHARD_SIZE)
        for k in range(n_shards):
            size = min(SHARD_SIZE, n - k * SHARD_SIZE)
            jobs.append((seed, x, z, k, size, p))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _shard_counts(*j), jobs))
    else:
        results = [_shard_counts(*j) for j in jobs]
    counts = np.zeros(TABLE_SHAPE, dtype=np.int64)
    for (_, x, z, _, _, _), res in zip(jobs, results):
        counts[x, z] += res.reshape(TABLE_SHAPE[2:])
    return CountsTable(counts, np.full((2, 2), n, dtype=np.int64), cfg.mode)


def counts_to_table(c: CountsTable) -> ProbabilityTable:
    """Relative frequencies with Poisson errors ``sqrt(n)/N`` (``1/N`` at zero counts)."""
    totals = c.trials.astype(float)
    if (totals <= 0).any():
        x, z = np.argwhere(totals <= 0)[0]
        raise ValueError(f"setting block x={x}, z={z} has no trials")
    denom = totals[:, :, None, None, None]
    probs = c.counts / denom
    sigma = np.where(c.counts > 0, np.sqrt(c.counts), 1.0) / denom
    return ProbabilityTable(probs, sigma)


# ---------------------------------------------------------------------------
# parametric bootstrap


def _resample(t: ProbabilityTable, n_boot: int, seed: int) -> np.ndarray:
    if not t.is_complete():
        raise TableError("bootstrap needs a complete table")
    sigma = np.zeros(TABLE_SHAPE) if t.sigma is None else t.sigma
    rng = np.random.default_rng(seed)
    draws = t.probs + sigma * rng.standard_normal((n_boot,) + TABLE_SHAPE)
    draws = np.clip(draws, 0.0, None)
    return draws / draws.sum(axis=(-3, -2, -1), keepdims=True)


def b13_with_error(t: ProbabilityTable, n_boot: int = 2000, seed: int = 0) -> EstimateWithError:
    """B13 of ``t`` with a parametric-bootstrap standard deviation.

    Each resample perturbs every probability by an independent normal with
    the table's sigma, clamps at zero and renormalizes each (x, z) block.
    """
    if n_boot < 100:
        raise ValueError(f"n_boot must be at least 100, got {n_boot}")
    _, _, value = b13_values(t.probs)
    _, _, boot = b13_values(_resample(t, n_boot, seed))
    return EstimateWithError(float(value), float(np.std(boot, ddof=1)))


def chsh_with_error(t: ProbabilityTable, n_boot: int = 2000, seed: int = 0,
                    outcome=BsmOutcome.PSI_MINUS) -> EstimateWithError:
    """Conditional CHSH value with the same bootstrap as :func:`b13_with_error`."""
    if n_boot < 100:
        raise ValueError(f"n_boot must be at least 100, got {n_boot}")
    value = chsh_from_corr(conditional_correlators(t.probs, outcome))
    boot = chsh_from_corr(conditional_correlators(_resample(t, n_boot, seed), outcome))
    return EstimateWithError(float(value), float(np.std(boot, ddof=1)))


# ---------------------------------------------------------------------------
# small experimental estimators


def visibility_estimate(c_max: float, c_min: float) -> float:
    """Fringe visibility (C_max - C_min) / (C_max + C_min)."""
    if c_max + c_min <= 0:
        raise ValueError("visibility needs a positive total count")
    return (c_max - c_min) / (c_max + c_min)


def noise_parameter(c_delay: float, c_dist: float) -> float:
    """BSM noise parameter p = (C_D - C(d)) / C_D from two coincidence levels.

    ``c_delay`` is the coincidence count at the chosen delay, ``c_dist`` the
    count for fully distinguishable photons.
    """
    if c_dist == 0:
        raise ValueError("coincidences at full distinguishability must be nonzero")
    return (c_dist - c_delay) / c_dist


def qrng_basis_fidelity(c_right: int, c_wrong: int) -> float:
    if c_right + c_wrong <= 0:
        raise ValueError("basis fidelity needs at least one count")
    return c_right / (c_right + c_wrong)


def fidelity_to_visibility(F: float) -> float:
    """Werner visibility (4F - 1)/3 for a Bell-state fidelity F in [1/4, 1]."""
    if not 0.25 <= F <= 1.0:
        raise ValueError(f"fidelity {F!r} outside [0.25, 1]")
    return (4 * F - 1) / 3


def hom_visibility_bound(mu: float, discard_multi_clicks: bool = False) -> float:
    """Multi-pair limit on the HOM visibility at mean pair number ``mu``.

    With multi-click events discarded the bound is (1+4μ)/(1+6μ), otherwise
    (1+8μ)/(1+12μ).
    """
    if mu < 0:
        raise ValueError(f"mean pair number must be nonnegative, got {mu!r}")
    if discard_multi_clicks:
        return (1 + 4 * mu) / (1 + 6 * mu)
    return (1 + 8 * mu) / (1 + 12 * mu)


# ---------------------------------------------------------------------------
# HOM dip


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class HomFit:
    visibility: EstimateWithError
    width: float
    baseline: float
    degenerate: bool = False


def hom_dip(delay, baseline: float, visibility: float, width: float):
    """Gaussian dip ``C_inf (1 - V exp(-d^2 / (2 w^2)))``."""
    d = np.asarray(delay, dtype=float)
    return baseline * (1 - visibility * np.exp(-d * d / (2 * width * width)))


def hom_dip_fit(points: Sequence[tuple[float, float]] | np.ndarray, maxfev: int = 5000) -> HomFit:
    """Least-squares fit of a Gaussian HOM dip centered at zero delay.

    Flat data returns V = 0 with ``degenerate=True`` and an undefined width.
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2 or len(data) < 5:
        raise ValueError("HOM fit needs at least 5 (delay, coincidences) points")
    d, y = data[:, 0], data[:, 1]
    if not np.isfinite(data).all():
        raise ValueError("HOM data contain non-finite values")
    spread = np.ptp(y)
    base0 = float(np.max(y))
    if base0 <= 0:
        raise FitError("coincidences are all zero")
    if spread <= 1e-12 * base0:
        return HomFit(EstimateWithError(0.0, 0.0), float("nan"), float(np.mean(y)), True)

    # baseline from the outer points, depth and width from the deepest one
    order = np.argsort(np.abs(d))
    outer = y[order[-max(2, len(d) // 5):]]
    base0 = float(np.mean(outer))
    v0 = float(np.clip(1 - y[order[0]] / base0, 0.05, 1.0))
    below = np.abs(d[y < base0 * (1 - v0 / 2)])
    w0 = float(below.max()) / 1.1774 if below.size else float(np.ptp(d)) / 4
    w0 = w0 if w0 > 0 else float(np.ptp(d)) / 4
    try:
        popt, pcov = curve_fit(hom_dip, d, y, p0=(base0, v0, w0), maxfev=maxfev)
    except RuntimeError as exc:
        raise FitError(f"HOM fit did not converge: {exc}") from None
    baseline, vis, width = popt
    perr = np.sqrt(np.diag(pcov)) if np.isfinite(pcov).all() else np.full(3, np.inf)
    if not np.isfinite(perr[1]):
        return HomFit(EstimateWithError(float(vis), float("inf")), abs(float(width)),
                      float(baseline), True)
    return HomFit(EstimateWithError(float(vis), float(perr[1])), abs(float(width)), float(baseline))


def load_hom_csv(path: str | Path) -> np.ndarray:
    """Read a ``delay_ps,coincidences`` CSV into an (n, 2) array."""
    import csv

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["delay_ps", "coincidences"]:
            raise ValueError(f"{path}: expected header 'delay_ps,coincidences', got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (IndexError, ValueError):
                raise ValueError(f"{path}:{lineno}: bad row {row}") from None
    return np.array(rows, dtype=float)

