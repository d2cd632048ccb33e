"""Command-line interface: ``lsgate <subcommand> [--config PATH] [--set key=value ...]``.

Exit status is 0 on success, 2 for configuration errors and 1 for failures
during computation.  Every run writes ``manifest.json`` next to its outputs;
result payloads carry no timestamps, so identical inputs give identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import scipy

from . import __version__, config, errors, evolve, kernels, srb
from .constants import TWO_PI


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"not serialisable: {type(x)}")


def _out_dir(args, doc, name):
    out = args.out or os.path.join(doc["output"]["dir"], name)
    os.makedirs(out, exist_ok=True)
    return out


def _manifest(out, args, doc, wall):
    _write_json(os.path.join(out, "manifest.json"), {
        "command": args.command,
        "argv": sys.argv[1:],
        "config_sha256": config.config_hash(doc),
        "seed": doc["seed"],
        "versions": {"lsgate": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "kernel_backend": kernels.BACKEND,
        "wall_time_s": wall,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
    })
    with open(os.path.join(out, "config.yaml"), "w") as fh:
        fh.write(config.dump_config(doc))


# --- subcommands ----------------------------------------------------------


def cmd_modes(args, doc, out):
    b = config.build(doc)
    from .crystal import lamb_dicke

    lde = lamb_dicke(b.spectrum, b.beams.delta_k)
    payload = b.spectrum.to_dict()
    payload["lamb_dicke"] = {"delta_k_per_m": lde.delta_k.tolist(), "gate": lde.gate,
                             "eta": {n: lde.eta[:, i].tolist() for i, n in enumerate(lde.mode_names)}}
    _write_json(os.path.join(out, "modes.json"), payload)
    print(json.dumps(payload, indent=2, default=_jsonable))


def cmd_schedule(args, doc, out):
    b = config.build(doc)
    payload = b.schedule.to_dict()
    payload["mu_hz"] = b.beams.mu / TWO_PI
    _write_json(os.path.join(out, "schedule.json"), payload)
    print(json.dumps(payload, indent=2))


def _amplitude(doc, model, schedule):
    sim = doc["simulation"]
    if sim["amplitude"] is not None:
        return float(sim["amplitude"])
    if sim["calibrate"]:
        return evolve.calibrate(model, schedule, tol=sim["tol"], envelope_mode=doc["schedule"]["envelope_mode"])
    return 1.0


def cmd_simulate(args, doc, out):
    b = config.build(doc)
    sim = doc["simulation"]
    mode = doc["schedule"]["envelope_mode"]
    if args.staged:
        res = evolve.staged_error(b.setup, b.schedule, doc["truncations"]["gate"], doc["truncations"]["spectator"],
                                  sim["tol"], sim["amplitude"], sim["frame"], mode)
        payload = res.to_dict()
        payload.update(res.stage1.to_dict())
        _write_json(os.path.join(out, "staged.json"), payload)
        print(json.dumps(res.to_dict(), indent=2))
        return
    model = config.model_for(b)
    amp = _amplitude(doc, model, b.schedule)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = evolve.gate_process(model, b.schedule, amp, sim["tol"], sim["frame"], sim["nbar"], mode)
    payload = res.to_dict()
    payload.update(amplitude=amp, tier=sim["tier"], dimension=model.dimension)
    _write_json(os.path.join(out, "gate.json"), payload)
    with open(os.path.join(out, "process.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "real", "imag"])
        for i in range(4):
            for j in range(4):
                w.writerow([i, j, repr(res.process[i, j].real), repr(res.process[i, j].imag)])
    print(json.dumps({k: payload[k] for k in ("fidelity_sym", "fidelity_full", "leakage", "phase_per_loop_rad",
                                              "amplitude")}, indent=2))


def cmd_populations(args, doc, out):
    """Channel traces: D levels and axial com from one run, each radial mode from its own run."""
    b = config.build(doc)
    sim, tr = doc["simulation"], doc["truncations"]
    mode = doc["schedule"]["envelope_mode"]
    gate = b.spectrum.gate_mode.name
    base = b.setup.full({gate: tr["gate"], "x_com": tr["spectator"]})
    amp = _amplitude(doc, base, b.schedule)
    runs = [(base, ["D", "x_com"])]
    for name in (args.radial or evolve.RADIAL_MODES):
        runs.append((b.setup.full({gate: tr["gate"], name: tr["spectator"]}), [name]))
    traces = {}
    for model, chans in runs:
        traces.update(evolve.transient_populations(model, b.schedule, chans, amp, sim["samples"],
                                                   sim["filter_window_s"], sim["tol"], mode))
    names = list(traces)
    times = traces[names[0]].times
    with open(os.path.join(out, "populations.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s"] + [f"{n}_raw" for n in names] + [f"{n}_filtered" for n in names])
        for i, t in enumerate(times):
            w.writerow([repr(float(t))] + [repr(float(traces[n].raw[i])) for n in names]
                       + [repr(float(traces[n].filtered[i])) for n in names])
    finals = {n: {"final": traces[n].final, "peak_filtered": traces[n].peak_filtered} for n in names}
    _write_json(os.path.join(out, "populations.json"), {"amplitude": amp, "channels": finals})
    print(json.dumps(finals, indent=2))


def cmd_budget(args, doc, out):
    b = config.build(doc)
    off, p_com, prov = None, None, {}
    if args.simulate:
        sim = doc["simulation"]
        res = evolve.staged_error(b.setup, b.schedule, doc["truncations"]["gate"], doc["truncations"]["spectator"],
                                  sim["tol"], sim["amplitude"], sim["frame"], doc["schedule"]["envelope_mode"])
        tr = evolve.transient_populations(b.setup.full({b.spectrum.gate_mode.name: doc["truncations"]["gate"],
                                                        "x_com": doc["truncations"]["spectator"]}),
                                          b.schedule, ["x_com"], res.amplitude, 4000, tol=sim["tol"])
        off, p_com = res.total, tr["x_com"].peak_filtered
        prov = {"off_resonant": "simulated", "p_com": "simulated"}
    budget = errors.assemble_budget(config.budget_inputs(b, off, p_com), prov, config.atomic_rates(doc))
    _write_json(os.path.join(out, "budget.json"), budget.to_dict())
    text = budget.table()
    with open(os.path.join(out, "budget.txt"), "w") as fh:
        fh.write(text + "\n")
    print(text)


def _srb_noise(doc):
    s = doc["srb"]
    kraus = None
    if s["ls_channel"] == "simulated":
        b = config.build(doc)
        model = config.model_for(b)
        amp = _amplitude(doc, model, b.schedule)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = evolve.gate_process(model, b.schedule, amp, doc["simulation"]["tol"], "optimized")
        kraus = tuple(res.corrected_kraus())
    return srb.NoiseModel(s["clifford_error"], 0.0 if kraus else s["ls_error"], s["single_qubit_error"], kraus)


def cmd_srb(args, doc, out):
    s = doc["srb"]
    if args.action == "generate":
        with open(os.path.join(out, "sequences.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["length", "seed", "cliffords"])
            for li, L in enumerate(s["lengths"]):
                for si in range(s["n_seq"]):
                    seed = srb.sequence_seed(doc["seed"], li, si)
                    w.writerow([L, seed, " ".join(map(str, srb.generate_sequence(L, seed)))])
        print(f"wrote {len(s['lengths']) * s['n_seq']} sequences")
    elif args.action == "simulate":
        data = srb.run_srb(_srb_noise(doc), s["lengths"], s["n_seq"], s["shots"], doc["seed"])
        data.to_csv(os.path.join(out, "srb.csv"))
        _write_json(os.path.join(out, "srb_meta.json"), data.metadata)
        print(json.dumps(data.mean_survival(), indent=2))
    else:
        path = args.data or os.path.join(out, "srb.csv")
        data = srb.SRBDataset.from_csv(path)
        fit = srb.fit_srb(data, s["fixed_asymptote"], s["single_qubit_error"])
        payload = fit.to_dict()
        payload["catalog"] = srb.catalog_stats()
        _write_json(os.path.join(out, "fit.json"), payload)
        print(json.dumps(payload, indent=2))


SWEEP_QUANTITIES = ("eps_d", "phase_per_loop", "eps_phase_noise", "omega_hz", "delta_hz", "gate_error")


def _sweep_point(doc, path, value, simulate):
    row = {"value": value}
    try:
        current = config.get_path(doc, path)
        if isinstance(current, int) and not isinstance(current, bool) and float(value).is_integer():
            value = int(value)
        d = config.set_path(doc, path, value)
        config.validate(d)
        b = config.build(d)
        e = d["errors"]
        sdf = b.setup.sdf(1)
        row.update(
            delta_hz=b.scheme.delta / TWO_PI,
            omega_hz=sdf.omega / TWO_PI,
            eps_d=errors.d_scatter_error(1.0 / e["d_lifetime_s"], b.scheme.delta, b.schedule.loops, b.eta_gate),
            phase_per_loop=float(sdf.loop_phase()),
            eps_phase_noise=errors.phase_noise_error(e["eps_ramsey"], b.beams.g_a, b.scheme.delta),
        )
        if simulate:
            model = config.model_for(b)
            amp = _amplitude(d, model, b.schedule)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                res = evolve.gate_process(model, b.schedule, amp, d["simulation"]["tol"], d["simulation"]["frame"])
            row["gate_error"] = res.error
        row["error"] = ""
    except Exception as exc:  # noqa: BLE001 - recorded in the row, the sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def parse_grid(text: str) -> list[float]:
    """``"a,b,c"`` or ``"start:stop:num"`` (linear) or ``"start:stop:num:log"``."""
    text = text.strip()
    if not text:
        return []
    if ":" in text:
        parts = text.split(":")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) > 3 and parts[3] == "log":
            return np.geomspace(start, stop, num).tolist()
        return np.linspace(start, stop, num).tolist()
    return [float(config.parse_yaml(v)) for v in text.split(",")]


def cmd_sweep(args, doc, out):
    path = args.param.split(".")
    current = config.get_path(doc, path)
    if not isinstance(current, (int, float)) or isinstance(current, bool):
        raise config.ConfigError("sweep parameter must be numeric", args.param)
    grid = parse_grid(args.grid)
    if args.threads > 1 and len(grid) > 1:
        with ProcessPoolExecutor(args.threads) as pool:
            rows = list(pool.map(_sweep_point, [doc] * len(grid), [path] * len(grid), grid,
                                 [args.simulate] * len(grid)))
    else:
        rows = [_sweep_point(doc, path, v, args.simulate) for v in grid]
    cols = ["value", "delta_hz", "omega_hz", "eps_d", "phase_per_loop", "eps_phase_noise"]
    if args.simulate:
        cols.append("gate_error")
    cols.append("error")
    with open(os.path.join(out, "sweep.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([args.param if c == "value" else c for c in cols])
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r.get(c), float) else r.get(c, "") for c in cols])
    print(f"{len(rows)} rows, {sum(1 for r in rows if r['error'])} failed")


# --- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration (merged over paper_defaults)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration value, e.g. schedule.loops=3 (repeatable)")
    common.add_argument("--out", help="output directory (default: output.dir/<command>)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes for independent tasks")

    ap = argparse.ArgumentParser(prog="lsgate", description="Light-shift gate simulation and analysis.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("modes", parents=[common], help="normal modes and Lamb-Dicke parameters")
    sub.add_parser("schedule", parents=[common], help="segment timing of the gate")
    p = sub.add_parser("simulate", parents=[common], help="propagate the gate and report its process")
    p.add_argument("--staged", action="store_true", help="run the staged spectator-mode error procedure")
    p = sub.add_parser("populations", parents=[common], help="off-resonant channel populations vs time")
    p.add_argument("--radial", nargs="*", help="radial modes to include (default: all four)")
    p = sub.add_parser("budget", parents=[common], help="gate error budget")
    p.add_argument("--simulate", action="store_true", help="use simulated off-resonant and com inputs")
    p = sub.add_parser("srb", parents=[common], help="symmetric-subspace randomized benchmarking")
    p.add_argument("action", choices=["generate", "simulate", "fit"])
    p.add_argument("--data", help="dataset CSV for fit (default: <out>/srb.csv)")
    p = sub.add_parser("sweep", parents=[common], help="scan one numeric configuration value")
    p.add_argument("param", help="dotted configuration path, e.g. trap.magnetic_field_gauss")
    p.add_argument("grid", help="comma list or start:stop:num[:log]")
    p.add_argument("--simulate", action="store_true", help="also run the gate simulation per point")
    return ap


COMMANDS = {
    "modes": cmd_modes, "schedule": cmd_schedule, "simulate": cmd_simulate, "populations": cmd_populations,
    "budget": cmd_budget, "srb": cmd_srb, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        doc = config.load_config(args.config, overrides)
    except config.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = _out_dir(args, doc, args.command)
    t0 = time.perf_counter()
    try:
        COMMANDS[args.command](args, doc, out)
    except config.ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _manifest(out, args, doc, time.perf_counter() - t0)
    return 0


if __name__ == "__main__":
    sys.exit(main())

