"""
Command-line front end: rate sweeps, repetition scans and simulations.

Every CSV is written next to a ``<out>.manifest.json`` holding the command,
its resolved parameters, the seed and the argument list; passing that list
back to ``main`` regenerates the CSV byte for byte.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .mapper import DeterministicMapper, build_threshold_mapper, is_dyadic
from .mlc_codec import DEFAULT_BACKOFF, mlc_encode, msd_decode, provision_mlc, random_messages
from .rate_analysis import sweep_h, sweep_p, write_curve_csv
from .rateless_sim import provision_rateless, run_batch, transmit_bsc, write_trials_csv
from .repetition import loss_scaling_scan, repetition_rate

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
SIM_MLC_COLUMNS = ("level", "k", "frames", "bit_errors", "frame_errors")


class UsageError(ValueError):
    pass


def _fmt(x) -> str:
    return format(x, ".15g") if isinstance(x, float) else str(x)


def _write_manifest(out: Path, command: str, params: dict, seed, argv: list) -> None:
    manifest = {"command": command, "parameters": params, "base_seed": seed,
                "version": __version__, "outputs": [str(out)], "argv": argv}
    Path(str(out) + ".manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _grid(lo: float, hi: float, steps: int) -> list[float]:
    if steps < 1:
        raise UsageError("steps must be at least 1")
    if steps == 1:
        return [lo]
    return [float(v) for v in np.linspace(lo, hi, steps)]


def _float_list(text: str) -> list[float]:
    items = [t for t in text.replace(" ", "").split(",") if t]
    if not items:
        raise UsageError("empty list")
    return [float(t) for t in items]


def _load_config(path) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as err:
        raise UsageError(f"cannot parse config {path}: {err}") from err
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    return cfg


def _mapper_from(cfg: dict) -> DeterministicMapper:
    spec = cfg.get("mapper")
    if isinstance(spec, str):
        return DeterministicMapper.from_line(spec)
    if isinstance(spec, dict) and {"m", "k"} <= spec.keys():
        return build_threshold_mapper(int(spec["m"]), int(spec["k"]))
    raise UsageError("config needs mapper as {\"m\":.., \"k\":..} or a mapper line")


def cmd_rates_sweep_h(args) -> dict:
    if not is_dyadic(args.p1, args.m):
        raise UsageError(f"p1={args.p1} is not a multiple of 2^-{args.m}")
    rows = sweep_h(args.p1, args.m, _grid(args.h_min, args.h_max, args.steps))
    write_curve_csv(rows, args.out, ("h", "mlc", "bicm", "ts_zeros"))
    return {"p1": args.p1, "m": args.m, "h_min": args.h_min, "h_max": args.h_max,
            "steps": args.steps}


def cmd_rates_sweep_p(args) -> dict:
    rows = sweep_p(args.h, args.m, _grid(0.0, 0.5, args.steps))
    write_curve_csv(rows, args.out, ("p1", "mlc", "envelope", "ts_zeros"))
    return {"h": args.h, "m": args.m, "steps": args.steps}


def cmd_repetition_scan(args) -> dict:
    if args.mode == "ratio":
        if not args.p_list:
            raise UsageError("ratio mode needs --p-list")
        p_list = _float_list(args.p_list)
        single = [repetition_rate(p, args.h, 1) for p in p_list]
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(("p", "exact_rate", "m_times_single", "ratio"))
            for p, s in zip(p_list, single):
                exact = repetition_rate(p, args.h, args.m)
                ratio = exact / (args.m * s) if s > 0 else float("nan")
                w.writerow([_fmt(p), _fmt(exact), _fmt(args.m * s), _fmt(ratio)])
        return {"h": args.h, "m": args.m, "mode": "ratio", "p_list": p_list}
    if not args.n_list:
        raise UsageError("loss mode needs --n-list")
    n_list = [int(v) for v in _float_list(args.n_list)]
    report = loss_scaling_scan(args.h, args.m, n_list, args.p_target)
    report.write_csv(args.out)
    return {"h": args.h, "m": args.m, "mode": "loss", "n_list": n_list,
            "p_target": args.p_target}


def _build_mlc(cfg: dict):
    return provision_mlc(_mapper_from(cfg), int(cfg.get("n", 4096)), float(cfg["design_h"]),
                         float(cfg.get("backoff", DEFAULT_BACKOFF)),
                         col_weight=int(cfg.get("col_weight", 3)), seed=int(cfg.get("seed", 0)),
                         family=cfg.get("family", "ldpc"),
                         list_size=int(cfg.get("list_size", 8)),
                         trials=int(cfg.get("construction_trials", 1000)),
                         dither=bool(cfg.get("dither", False)))


def cmd_sim_mlc(args) -> dict:
    cfg = _load_config(args.config)
    if "design_h" not in cfg:
        raise UsageError("config needs design_h")
    if not 0.0 < args.h < 0.5:
        raise UsageError("need 0 < h < 1/2")
    if args.frames < 0:
        raise UsageError("frames must be non-negative")
    config = _build_mlc(cfg)
    m = config.mapper.m
    bit_err = np.zeros(m, dtype=np.int64)
    frame_err = np.zeros(m, dtype=np.int64)
    rng = np.random.default_rng([args.seed, 0])
    for f in range(args.frames):
        msgs = random_messages(config, rng)
        y = transmit_bsc(mlc_encode(config, msgs), args.h, [args.seed, 1, f])
        res = msd_decode(config, y, args.h)
        for i, (a, b) in enumerate(zip(res.messages, msgs)):
            errs = int(np.count_nonzero(a != b))
            bit_err[i] += errs
            frame_err[i] += errs > 0
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SIM_MLC_COLUMNS)
        if args.frames:
            for i, code in enumerate(config.codes):
                w.writerow([i + 1, code.k, args.frames, int(bit_err[i]), int(frame_err[i])])
    return {"config": cfg, "h": args.h, "frames": args.frames}


def cmd_sim_rateless(args) -> dict:
    cfg = _load_config(args.config)
    h_list = _float_list(args.h)
    h_min = float(cfg.get("h_min", 0.05))
    if any(h < h_min or h > 0.5 for h in h_list):
        raise UsageError("every crossover must lie in [h_min, 1/2]")
    if args.trials < 0:
        raise UsageError("trials must be non-negative")
    levels = args.levels if args.levels is not None else int(cfg.get("levels", 2))
    config = provision_rateless(
        [float(p) for p in cfg.get("layer_p", [0.25] * 4)], h_min, int(cfg.get("n", 4096)),
        levels=levels, backoff=float(cfg.get("backoff", DEFAULT_BACKOFF)),
        family=cfg.get("family", "polar"), base_seed=int(cfg.get("base_seed", 0)),
        crc_bits=int(cfg.get("crc_bits", 16)), max_blocks=int(cfg.get("max_blocks", 32)),
        list_size=int(cfg.get("list_size", 8)), trials=int(cfg.get("construction_trials", 2000)),
        min_level_bits=int(cfg.get("min_level_bits", 1)))
    records = run_batch(config, h_list, args.trials, args.seed)
    write_trials_csv(records, args.out)
    return {"config": cfg, "h_list": h_list, "trials": args.trials, "levels": levels}


def cmd_mapper_build(args) -> dict:
    if not is_dyadic(args.p1, args.m):
        raise UsageError(f"p1={args.p1} is not a multiple of 2^-{args.m}")
    mapper = build_threshold_mapper(args.m, int(round(args.p1 * 2 ** args.m)))
    Path(args.out).write_text(mapper.to_line() + "\n")
    return {"p1": args.p1, "m": args.m}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlcnui", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates-sweep-h", help="MLC, BICM and time-sharing rates versus h")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--h-min", type=float, default=0.01)
    p.add_argument("--h-max", type=float, default=0.49)
    p.add_argument("--steps", type=int, default=49)
    p.set_defaults(func=cmd_rates_sweep_h)

    p = sub.add_parser("rates-sweep-p", help="exact rate and dyadic envelope versus p1")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--steps", type=int, default=41)
    p.set_defaults(func=cmd_rates_sweep_p)

    p = sub.add_parser("repetition-scan", help="repetition rate ratios or layered loss scan")
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--mode", choices=("ratio", "loss"), required=True)
    p.add_argument("--p-list", default="")
    p.add_argument("--n-list", default="")
    p.add_argument("--p-target", type=float, default=0.4)
    p.set_defaults(func=cmd_repetition_scan)

    p = sub.add_parser("sim-mlc", help="Monte Carlo of one MLC configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--frames", type=int, default=100)
    p.set_defaults(func=cmd_sim_mlc)

    p = sub.add_parser("sim-rateless", help="batch of rateless trials")
    p.add_argument("--config", required=True)
    p.add_argument("--h", required=True, help="comma-separated crossover list")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--levels", type=int, default=None, help="mapper levels per layer")
    p.set_defaults(func=cmd_sim_rateless)

    p = sub.add_parser("mapper-build", help="write a threshold mapper line")
    p.add_argument("--p1", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_mapper_build)

    for sp in sub.choices.values():
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        params = args.func(args)
    except (UsageError, ValueError) as err:
        print(f"mlcnui {args.command}: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RuntimeError, KeyError) as err:
        print(f"mlcnui {args.command}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_manifest(out, args.command, params, args.seed, argv)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
