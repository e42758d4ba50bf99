"""Command-line interface.

Exit codes: 0 on success (and, for ``b13``/``chsh``, when the local bound is
violated), 2 on usage, I/O or validation errors, 3 when a tested bound is not
violated or a causality condition fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import network as nw
from . import spacetime as st
from . import statistics as stats

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_NOT_VIOLATED = 3

SEED_ENV = "BILOCAL_SEED"


class CliError(Exception):
    pass


def _num(v: float) -> str:
    return format(float(v), ".12g")


def _emit(args, payload: dict, text: str, csv_rows: list[list] | None = None) -> None:
    fmt = args.format
    if fmt == "json":
        out = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    elif fmt == "csv":
        if csv_rows is None:
            csv_rows = [["key", "value"]] + [[k, v] for k, v in _flatten(payload)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows([[_num(c) if isinstance(c, float) else c for c in row] for row in csv_rows])
        out = buf.getvalue()
    else:
        out = text.rstrip("\n") + "\n"
    if args.output:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(out)
    else:
        sys.stdout.write(out)


def _flatten(d: dict, prefix: str = ""):
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            yield from _flatten(v, key + ".")
        elif not isinstance(v, list):
            yield key, v


def _seed(args) -> int:
    env = os.environ.get(SEED_ENV)
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise CliError(f"{SEED_ENV}={env!r} is not an integer") from None
    return args.seed


def _cfg_from_args(args, mode: str) -> nw.NetworkConfig:
    lam = args.lam
    if args.v_source is not None:
        maker = nw.NetworkConfig.chsh if mode == "chsh" else nw.NetworkConfig.bilocality
        return maker(args.v_source, lam, args.p)
    return nw.NetworkConfig.from_swapped(args.v, args.p, lam, mode)


def _warn_unnormalized(t: nw.ProbabilityTable) -> None:
    sums = t.block_sums()
    for x in (0, 1):
        for z in (0, 1):
            if abs(sums[x, z] - 1) > 1e-4:
                print(f"warning: table block x={x}, z={z} sums to {sums[x, z]:.5f}; "
                      "correlators use the renormalized block", file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_b13(args) -> int:
    if args.table:
        t = nw.ProbabilityTable.load(args.table)
        _warn_unnormalized(t)
        res = nw.b13(t)
        sigma = None
        if t.sigma is not None:
            sigma = stats.b13_with_error(t, args.n_boot, _seed(args)).sigma
        source = {"table": str(args.table)}
    else:
        cfg = _cfg_from_args(args, "bilocality")
        res = nw.b13(cfg)
        sigma = None
        source = {"v_source": cfg.source1.v, "lam": cfg.source1.lam, "p": cfg.p}
    violated = res.b13 > 1
    payload = {"source": source, "I": res.I, "J": res.J, "b13": res.b13,
               "b13_sigma": sigma, "bound": 1.0, "violated": violated}
    lines = [f"I   = {res.I:+.6f}", f"J   = {res.J:+.6f}",
             f"B13 = {res.b13:.6f}" + ("" if sigma is None else f" ± {sigma:.6f}"),
             f"bilocal bound B13 <= 1: {'violated' if violated else 'not violated'}"]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK if violated else EXIT_NOT_VIOLATED


def cmd_chsh(args) -> int:
    if args.table:
        t = nw.ProbabilityTable.load(args.table)
        _warn_unnormalized(t)
        value = nw.chsh_from_table(t)
        sigma = stats.chsh_with_error(t, args.n_boot, _seed(args)).sigma if t.sigma is not None else None
        source = {"table": str(args.table)}
    else:
        cfg = _cfg_from_args(args, "chsh")
        value = nw.chsh_from_model(cfg)
        sigma = None
        source = {"v_source": cfg.source1.v, "lam": cfg.source1.lam, "p": cfg.p}
    violated = value > 2
    payload = {"source": source, "S": value, "S_sigma": sigma, "bound": 2.0, "violated": violated}
    text = (f"S = {value:.6f}" + ("" if sigma is None else f" ± {sigma:.6f}")
            + f"\nlocal bound S <= 2: {'violated' if violated else 'not violated'}")
    _emit(args, payload, text)
    return EXIT_OK if violated else EXIT_NOT_VIOLATED


def cmd_sweep(args) -> int:
    if args.steps < 1:
        raise CliError("--steps must be at least 1")
    if not 0 <= args.v <= 1:
        raise CliError("--v must lie in [0, 1]")
    grid = np.linspace(args.p_min, args.p_max, args.steps) if args.steps > 1 else np.array([args.p_min])
    rows = nw.noise_sweep(grid, math.sqrt(args.v), args.lam_low, args.lam_high)
    header = ["p", "b13_low", "b13_high", "s_low", "s_high"]
    table = [[r.p, r.b13_low, r.b13_high, r.s_low, r.s_high] for r in rows]
    payload = {"v_swapped": args.v, "rows": [dict(zip(header, r)) for r in table]}
    text = "\n".join(["  ".join(f"{h:>9}" for h in header)]
                     + ["  ".join(f"{c:9.5f}" for c in r) for r in table])
    _emit(args, payload, text, [header] + table)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.n < 1:
        raise CliError("--n must be at least 1")
    cfg = _cfg_from_args(args, args.mode)
    counts = stats.sample_counts(cfg, args.n, _seed(args), workers=args.workers)
    doc = counts.to_json()
    doc["config"] = {"v_source": cfg.source1.v, "lam": cfg.source1.lam, "p": cfg.p,
                     "seed": _seed(args), "n": args.n}
    out = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(out)
    else:
        sys.stdout.write(out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    counts = stats.CountsTable.load(args.counts)
    t = stats.counts_to_table(counts)
    seed = _seed(args)
    payload = {"counts": str(args.counts), "mode": counts.mode,
               "trials": {f"{x},{z}": int(counts.trials[x, z]) for x in (0, 1) for z in (0, 1)}}
    lines = [f"mode: {counts.mode}", f"trials per setting: {int(counts.trials.min())}"
             + ("" if counts.trials.min() == counts.trials.max() else f"..{int(counts.trials.max())}")]
    if counts.mode == "chsh":
        est = stats.chsh_with_error(t, args.n_boot, seed)
        payload.update(S=est.value, S_sigma=est.sigma)
        lines.append(f"S = {est}")
    else:
        res = nw.b13(t)
        est = stats.b13_with_error(t, args.n_boot, seed)
        payload.update(I=res.I, J=res.J, b13=est.value, b13_sigma=est.sigma)
        lines += [f"I   = {res.I:+.6f}", f"J   = {res.J:+.6f}", f"B13 = {est}"]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_spacetime(args) -> int:
    geo = st.load_geometry_file(args.geometry) if args.geometry else st.bundled_geometry()
    report = st.audit(geo.conditions, geo.fibre_lengths_m)
    _emit(args, report.to_json(), report.to_text(),
          [["label", "margin_ns", "satisfied"]]
          + [[r.condition.label, r.margin_ns, r.satisfied] for r in report.results])
    return EXIT_OK if report.satisfied else EXIT_NOT_VIOLATED


def cmd_hom(args) -> int:
    if args.data:
        fit = stats.hom_dip_fit(stats.load_hom_csv(args.data))
        payload = {"visibility": fit.visibility.value, "visibility_sigma": fit.visibility.sigma,
                   "width_ps": None if math.isnan(fit.width) else fit.width,
                   "baseline": fit.baseline, "degenerate": fit.degenerate}
        text = (f"fitted visibility = {fit.visibility}\nwidth (ps) = {fit.width:.3f}\n"
                f"baseline = {fit.baseline:.3f}" + ("\nwarning: degenerate fit" if fit.degenerate else ""))
    else:
        keep = stats.hom_visibility_bound(args.mu, False)
        disc = stats.hom_visibility_bound(args.mu, True)
        payload = {"mu": args.mu, "bound_keep": keep, "bound_discard": disc}
        text = (f"mu = {args.mu}\nV_max (all events)          = {keep:.6f}\n"
                f"V_max (multi-clicks dropped) = {disc:.6f}")
    _emit(args, payload, text)
    return EXIT_OK


def cmd_reproduce(args) -> int:
    """Recompute the headline numbers from the bundled data and the model."""
    t = nw.measured_table()
    printed = nw.printed_correlators()
    from_table = nw.b13(t)
    from_printed = nw.b13_from_correlators(printed)
    boot = stats.b13_with_error(t, args.n_boot, _seed(args))
    v = math.sqrt(0.93)
    band_b = (nw.b13_closed_form(1, v, 0, v, 0), nw.b13_closed_form(1, v, 1, v, 1))
    band_s = (nw.chsh_closed_form(1, v, 0, v, 0), nw.chsh_closed_form(1, v, 1, v, 1))
    report = st.audit(st.bundled_geometry().conditions)
    payload = {
        "b13_from_printed_correlators": from_printed.b13,
        "b13_from_table_entries": from_table.b13,
        "b13_table_bootstrap_sigma": boot.sigma,
        "table_block_sums": t.block_sums().tolist(),
        "ideal_b13": nw.b13(nw.NetworkConfig.bilocality()).b13,
        "ideal_chsh": nw.chsh_from_model(nw.NetworkConfig.chsh()),
        "threshold_b13": nw.threshold_visibility("b13"),
        "threshold_chsh": nw.threshold_visibility("chsh"),
        "band_b13_p1": list(band_b),
        "band_chsh_p1": list(band_s),
        "werner_visibility_from_fidelity": stats.fidelity_to_visibility(0.9853),
        "hom_bound_keep": stats.hom_visibility_bound(0.012, False),
        "hom_bound_discard": stats.hom_visibility_bound(0.012, True),
        "causality_margins_ns": [r.margin_ns for r in report.results],
    }
    lines = [
        f"B13 from printed correlators   {from_printed.b13:.4f}  (I={from_printed.I:+.5f}, J={from_printed.J:+.5f})",
        f"B13 from printed table entries {from_table.b13:.4f} ± {boot.sigma:.4f}",
        "table block sums (x,z)         " + ", ".join(
            f"({x},{z})={t.block_sums()[x, z]:.5f}" for x in (0, 1) for z in (0, 1)),
        f"ideal B13 / S                  {payload['ideal_b13']:.6f} / {payload['ideal_chsh']:.6f}",
        f"threshold V for B13=1 / S=2    {payload['threshold_b13']:.6f} / {payload['threshold_chsh']:.6f}",
        f"B13 band at p=1                [{band_b[0]:.4f}, {band_b[1]:.4f}]",
        f"S band at p=1                  [{band_s[0]:.4f}, {band_s[1]:.4f}]",
        f"V from F=0.9853                {payload['werner_visibility_from_fidelity']:.4f}",
        f"HOM bounds at mu=0.012         {payload['hom_bound_keep']:.4f} / {payload['hom_bound_discard']:.4f}",
        "causality margins (ns)         " + ", ".join(f"{m:.2f}" for m in payload["causality_margins_ns"]),
    ]
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_common(p: argparse.ArgumentParser, default_format: str = "text") -> None:
    p.add_argument("--format", choices=("text", "json", "csv"), default=default_format)
    p.add_argument("--output", "-o", help="write to this file instead of stdout")


def _add_model(p: argparse.ArgumentParser, v_default: float = 1.0) -> None:
    p.add_argument("--v", type=float, default=v_default,
                   help="swapped visibility V; each source gets sqrt(V) (default %(default)s)")
    p.add_argument("--v-source", type=float, default=None,
                   help="per-source visibility, overrides --v")
    p.add_argument("--lam", type=float, default=0.0, help="colored-noise fraction of both sources")
    p.add_argument("--p", type=float, default=1.0, help="BSM indistinguishability p")


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help=f"RNG seed ({SEED_ENV} overrides)")
    p.add_argument("--n-boot", type=int, default=2000, help="bootstrap resamples")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bilocal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("b13", help="bilocal parameter from a table or the model")
    p.add_argument("--table", help="probability table JSON")
    _add_model(p)
    _add_seed(p)
    _add_common(p)
    p.set_defaults(func=cmd_b13)

    p = sub.add_parser("chsh", help="CHSH value conditioned on the Ψ- outcome")
    p.add_argument("--table", help="probability table JSON taken at the CHSH settings")
    _add_model(p)
    _add_seed(p)
    _add_common(p)
    p.set_defaults(func=cmd_chsh)

    p = sub.add_parser("sweep", help="theory bands of B13 and S versus p (CSV)")
    p.add_argument("--p-min", type=float, default=0.0)
    p.add_argument("--p-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--v", type=float, default=0.93, help="swapped visibility (default %(default)s)")
    p.add_argument("--lam-low", type=float, default=0.0)
    p.add_argument("--lam-high", type=float, default=1.0)
    _add_common(p, default_format="csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="Monte Carlo counts file")
    _add_model(p, v_default=0.93)
    p.add_argument("--n", type=int, default=8000, help="trials per setting pair")
    p.add_argument("--mode", choices=nw.MODES, default="bilocality")
    p.add_argument("--seed", type=int, default=0, help=f"RNG seed ({SEED_ENV} overrides)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="B13 or S with error bars from a counts file")
    p.add_argument("counts", help="counts JSON written by 'simulate'")
    _add_seed(p)
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("spacetime", help="audit the space-like separation conditions")
    p.add_argument("--geometry", help="geometry JSON (default: bundled network geometry)")
    _add_common(p)
    p.set_defaults(func=cmd_spacetime)

    p = sub.add_parser("hom", help="HOM visibility bounds or dip fit")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--mu", type=float, default=0.012, help="mean pair number per pulse")
    g.add_argument("--data", help="CSV with header delay_ps,coincidences")
    _add_common(p)
    p.set_defaults(func=cmd_hom)

    p = sub.add_parser("reproduce", help="recompute the headline numbers")
    _add_seed(p)
    _add_common(p)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, OSError, ValueError, ZeroDivisionError, stats.FitError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
