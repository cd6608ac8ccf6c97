"""Command-line front end.

Subcommands::

    pscm design   --v 10 --t 3 --m 6            design CSV
    pscm air      --m 6 --snr-start 10 --snr-stop 24 --step 0.5 --gamma 0.8125
    pscm simulate --design-row s=663 --mode shaped --snr 18.0
    pscm simulate --design-row s=663 --mode shaped --find-min-snr --target-pe 3e-3
    pscm sweep    --modes shaped uniform [--se 5]

CSV goes to stdout for ``design``, ``air`` and ``sweep``; ``simulate`` prints
one JSON document.  With ``--out-dir`` (default ``$PSCM_OUTPUT_DIR``) the
same data is also written to files next to a ``*.manifest.json`` holding
the full parameter set, seed, tool version and a timestamp.  The stdout
JSON omits wall-clock fields so that reruns with the same seed are
byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from .air import air_curves, crossing_snr, feasible_snr
from .constellation import build
from .errors import ParameterError
from .simulate import (MODES, TARGET_PE, SimConfig, manifest, run_bler, search_min_snr,
                       snr_at_rate, sweep_point, write_json, write_sweep_csv)
from .transceiver import build_design, design, enumerate_designs, write_design_csv

OUTPUT_ENV = "PSCM_OUTPUT_DIR"


def _out_dir(args) -> Path | None:
    d = args.out_dir or os.environ.get(OUTPUT_ENV)
    if not d:
        return None
    p = Path(d)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit_files(args, stem: str, text: str, suffix: str, meta: dict) -> None:
    d = _out_dir(args)
    if d is None:
        return
    (d / f"{stem}.{suffix}").write_text(text)
    write_json(d / f"{stem}.manifest.json", meta)
    print(f"wrote {d / f'{stem}.{suffix}'}", file=sys.stderr)


def _params(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in ("func", "out_dir")}


def cmd_design(args) -> int:
    if args.two_gamma is not None and args.gamma is not None:
        raise ParameterError("give either --two-gamma or --gamma")
    req = args.two_gamma if args.two_gamma is not None else (
        [2 * g for g in args.gamma] if args.gamma is not None else None)
    rows = design(args.v, args.t, args.m, req, reference=not args.all)
    designs = None
    if args.mode == "shaped" or args.snr is not None:
        shaped = args.mode == "shaped"
        designs = []
        for r in rows:
            snr = args.snr if args.snr is not None else crossing_snr(build(r.m), float(r.two_gamma),
                                                                     shaped=shaped)
            designs.append(build_design(r, snr, shaped=shaped))
    else:
        designs = [_UniformCounts(r) for r in rows]
    buf = io.StringIO()
    write_design_csv(buf, rows, designs)
    sys.stdout.write(buf.getvalue())
    if not rows:
        print(f"no feasible designs for v={args.v}, t={args.t}, m={args.m}", file=sys.stderr)
    _emit_files(args, "design", buf.getvalue(), "csv", manifest("design", _params(args)))
    return 0


class _UniformCounts:
    """k_a and k for uniform signaling, with no shaping solution needed."""

    def __init__(self, row):
        self.k_a = row.n * (row.m - 2)
        self.k = self.k_a + row.sign_info_bits


def cmd_air(args) -> int:
    if not args.step > 0:
        raise ParameterError("--step must be positive")
    if args.snr_stop < args.snr_start:
        raise ParameterError("--snr-stop must not be below --snr-start")
    grid = np.round(np.arange(args.snr_start, args.snr_stop + args.step / 2, args.step), 10)
    c = build(args.m)
    gammas = args.gamma or []
    for g in gammas:
        if not 0.5 <= g < 1:
            raise ParameterError(f"gamma must lie in [1/2, 1), got {g}")
    rows = air_curves(c, grid, [2 * g for g in gammas])
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    sys.stdout.write(buf.getvalue())
    thresholds = {}
    for g in gammas:
        try:
            cross = crossing_snr(c, 2 * g)
        except ValueError:
            cross = None
        thresholds[f"{2 * g:g}"] = {"crossing_db": cross,
                                    "grid_threshold_db": feasible_snr(c, g, grid).threshold_db}
        print(f"2gamma={2 * g:g}: H(A)+2gamma meets the GMI at {cross} dB", file=sys.stderr)
    _emit_files(args, "air", buf.getvalue(), "csv",
                manifest("air", _params(args), thresholds=thresholds))
    return 0


def _parse_row(args):
    text = str(args.design_row)
    text = text.split("=", 1)[1] if text.startswith("s=") else text
    rows = design(args.v, args.t, args.m, reference=False)
    valid = [r.shortening for r in rows]
    try:
        s = int(text)
    except ValueError:
        s = None
    for r in rows:
        if r.shortening == s:
            return r
    ref = [r.shortening for r in design(args.v, args.t, args.m)]
    raise ParameterError(f"unknown design row {args.design_row!r}; valid rows: "
                         + ", ".join(f"s={x}" for x in (ref or valid)))


def _sim_kwargs(args) -> dict:
    return dict(min_error_events=args.min_errors, max_blocks=args.max_blocks, seed=args.seed,
                window=args.window, iterations=args.iterations, decoder_mode=args.decoder_mode,
                shards=args.shards, workers=args.workers, early_stop=not args.no_early_stop)


def _strip_clock(obj):
    if isinstance(obj, dict):
        return {k: _strip_clock(v) for k, v in obj.items() if k not in ("runtime_s", "timestamp")}
    if isinstance(obj, list):
        return [_strip_clock(v) for v in obj]
    return obj


def _ensure_seed(args) -> None:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)


def cmd_simulate(args) -> int:
    _ensure_seed(args)
    row = _parse_row(args)
    if args.find_min_snr == (args.snr is not None):
        raise ParameterError("give exactly one of --snr or --find-min-snr")
    sim = _sim_kwargs(args)
    meta = manifest("simulate", _params(args), args.seed, window=args.window,
                    iterations=args.iterations, decoder_mode=args.decoder_mode,
                    design={"v": row.v, "t": row.t, "s": row.shortening,
                            "gamma": float(row.gamma), "two_gamma": float(row.two_gamma)})
    if args.find_min_snr:
        res = search_min_snr(row, args.mode, args.target_pe, args.resolution, **sim)
        body = res.to_dict()
        body["operating_point"] = sweep_point(res).to_dict()
    else:
        d = build_design(row, args.snr, shaped=args.mode == "shaped")
        body = run_bler(SimConfig(d, args.snr, target_pe=args.target_pe, **sim)).to_dict()
    doc = {"manifest": meta, "result": body}
    text = json.dumps(_strip_clock(doc), indent=2, default=float) + "\n"
    sys.stdout.write(text)
    d = _out_dir(args)
    if d is not None:
        stem = f"simulate_s{row.shortening}_{args.mode}"
        write_json(d / f"{stem}.json", doc)
        write_json(d / f"{stem}.manifest.json", meta)
    return 0


def cmd_sweep(args) -> int:
    _ensure_seed(args)
    rows = design(args.v, args.t, args.m)
    sim = _sim_kwargs(args)
    meta = manifest("sweep", _params(args), args.seed, window=args.window,
                    iterations=args.iterations, decoder_mode=args.decoder_mode)
    d = _out_dir(args)
    if args.se is not None:
        out = {}
        for mode in args.modes:
            op = snr_at_rate(rows, args.se, mode, args.target_pe, args.resolution, **sim)
            out[mode] = op.to_dict()
        if "shaped" in out and "uniform" in out:
            out["gain_db"] = out["uniform"]["snr_db"] - out["shaped"]["snr_db"]
        doc = {"manifest": meta, "result": out}
        sys.stdout.write(json.dumps(_strip_clock(doc), indent=2, default=float) + "\n")
        if d is not None:
            write_json(d / f"rate_{args.se:g}.json", doc)
        return 0
    points = []
    for mode in args.modes:
        for row in rows:
            res = search_min_snr(row, mode, args.target_pe, args.resolution, **sim)
            points.append(sweep_point(res))
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(points[0].to_dict()), lineterminator="\n")
    w.writeheader()
    w.writerows(p.to_dict() for p in points)
    sys.stdout.write(buf.getvalue())
    if d is not None:
        write_sweep_csv(d / "sweep.csv", points)
        write_json(d / "sweep.manifest.json", meta)
    return 0


def _code_args(p, m_default=6):
    p.add_argument("--v", type=int, default=10, help="field degree of the BCH component")
    p.add_argument("--t", type=int, default=3, help="BCH error-correction capability")
    p.add_argument("--m", type=int, default=m_default, help="bits per QAM symbol")


def _sim_args(p):
    p.add_argument("--mode", choices=MODES, default="shaped")
    p.add_argument("--target-pe", type=float, default=TARGET_PE)
    p.add_argument("--resolution", type=float, default=0.1, help="SNR search resolution in dB")
    p.add_argument("--seed", type=int, default=None, help="64-bit seed (random and printed if absent)")
    p.add_argument("--min-errors", type=int, default=50, help="stop after this many block errors")
    p.add_argument("--max-blocks", type=int, default=None)
    p.add_argument("--window", type=int, default=9, help="decoding window W in blocks")
    p.add_argument("--iterations", type=int, default=8, help="iterations per window position")
    p.add_argument("--decoder-mode", choices=("extrinsic", "plain_bdd"), default="extrinsic")
    p.add_argument("--shards", type=int, default=1, help="independent streams (fixes the result)")
    p.add_argument("--workers", type=int, default=1, help="processes executing the shards")
    p.add_argument("--no-early-stop", action="store_true",
                   help="only stop on --min-errors or --max-blocks")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pscm", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out-dir", default=None,
                    help=f"also write files and manifests here (default ${OUTPUT_ENV})")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="staircase/CM design table as CSV "
                       "(columns 2gamma,s,R_s,n_c,k_c,n,k_a,k)")
    _code_args(p)
    p.add_argument("--two-gamma", type=float, nargs="+", default=None)
    p.add_argument("--gamma", type=float, nargs="+", default=None)
    p.add_argument("--all", action="store_true", help="full enumeration, not the reference rows")
    p.add_argument("--mode", choices=MODES, default="uniform",
                   help="signaling used for the k_a and k columns")
    p.add_argument("--snr", type=float, default=None,
                   help="operating SNR for shaped k_a (default: each row's AIR threshold)")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("air", help="GMI curves as CSV (snr_db,gmi_uniform,gmi_shaped,"
                       "H_A_plus_<2gamma>...,lambda_star,Lambda_star)")
    p.add_argument("--m", type=int, default=6)
    p.add_argument("--snr-start", type=float, required=True)
    p.add_argument("--snr-stop", type=float, required=True)
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--gamma", type=float, nargs="*", default=None)
    p.set_defaults(func=cmd_air)

    p = sub.add_parser("simulate", help="block error rate or minimum SNR, as JSON")
    _code_args(p)
    p.add_argument("--design-row", required=True, help="shortening, e.g. s=663")
    p.add_argument("--snr", type=float, default=None)
    p.add_argument("--find-min-snr", action="store_true")
    _sim_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="minimum SNR for every reference design (CSV), "
                       "or the SNR for a target SE with --se (JSON)")
    _code_args(p)
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    p.add_argument("--se", type=float, default=None)
    _sim_args(p)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
