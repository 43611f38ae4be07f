"""Command-line front end: generate, reconstruct, pv, scaling, resources, rerun.

Every output file gets a ``<output>.manifest.json`` next to it recording
the command line, configuration, inputs and timings; ``trackhhl rerun``
replays a manifest and reproduces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from trackhhl import __version__
from trackhhl import quantum_sim as qs
from trackhhl.classical_solver import (
    DEFAULT_THRESHOLD,
    ActiveSet,
    SolverError,
    TrackCollection,
    build_tracks,
    condition_number,
    discretize,
    score,
    solve,
)
from trackhhl.hamiltonian import HamiltonianParams, build_system, enumerate_segments
from trackhhl.hhl import HHLConfig, QuantumBudgetError, classify, run_hhl, run_hhl_1bit
from trackhhl.pv_postprocess import (
    DEFAULT_EPS,
    DEFAULT_MIN_SAMPLES,
    cluster_z,
    discard_sweep,
    pv_difference,
    segment_projections,
    track_projections,
)
from trackhhl.resources import SizeError, gate_report, scaling_table
from trackhhl.toy_model import ConfigError, DetectorConfig, Event, generate_event, minimal_event

log = logging.getLogger("trackhhl")

OUTPUT_DIR_ENV = "TRACKHHL_OUTPUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_QUANTUM = 0, 2, 3, 4

PRESETS = {
    "medium": dict(n_layers=5, n_particles=8, n_primary_vertices=1, seed=0),
    "pv": dict(n_layers=4, n_particles=30, n_primary_vertices=3, pv_z=(-10.0, 0.0, 10.0), seed=0),
}


class UsageError(Exception):
    pass


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _default_output(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / name


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_manifest(
    output: Path, argv: Sequence[str], args: argparse.Namespace,
    inputs: Sequence[Path], outputs: Sequence[Path], timings: dict,
) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config": config,
        "seed": config.get("seed"),
        "version": __version__,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "timings": timings,
    }
    _write(Path(str(output) + ".manifest.json"), _dumps(manifest))


def _load_event(path: str) -> Event:
    return Event.from_dict(json.loads(Path(path).read_text()))


def _parse_floats(text: Optional[str]) -> Optional[tuple[float, ...]]:
    if text is None:
        return None
    return tuple(float(v) for v in text.split(","))


# ----------------------------------------------------------------------------
# generate


def cmd_generate(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    if args.preset == "minimal":
        event = minimal_event()
    else:
        if args.config:
            fields = json.loads(Path(args.config).read_text())
        elif args.preset:
            fields = dict(PRESETS[args.preset])
        else:
            fields = {}
        flag_map = {
            "layers": "n_layers", "particles": "n_particles", "pvs": "n_primary_vertices",
            "pv_spread": "pv_spread_z", "slope_range": "slope_range",
            "resolution": "hit_resolution_xy", "efficiency": "hit_efficiency",
            "scattering": "scattering_angle_sigma", "seed": "seed",
        }
        for flag, name in flag_map.items():
            value = getattr(args, flag)
            if value is not None:
                fields[name] = value
        if args.layer_z:
            fields["layer_z"] = _parse_floats(args.layer_z)
        if args.pv_z:
            fields["pv_z"] = _parse_floats(args.pv_z)
        if "n_layers" not in fields or "n_particles" not in fields:
            raise UsageError("generate needs --layers and --particles (or --preset/--config)")
        event = generate_event(DetectorConfig.from_dict(fields))
    out = Path(args.output) if args.output else _default_output("event.json")
    _write(out, _dumps(event.to_dict()))
    _write_manifest(out, argv, args, [], [out], {"total_s": time.perf_counter() - t0})
    log.info("wrote %s (%d hits)", out, len(event.hits))
    return EXIT_OK


# ----------------------------------------------------------------------------
# reconstruct


def reconstruct_event(event: Event, args: argparse.Namespace) -> tuple[dict, str]:
    """Run the requested pipeline; returns the result dict and an S/spectrum CSV."""
    params = HamiltonianParams(epsilon=args.epsilon, alpha=args.alpha, beta=args.beta)
    segs = enumerate_segments(event, max_slope=args.max_slope)
    result: dict = {
        "method": args.method,
        "params": {"epsilon": params.epsilon, "alpha": params.alpha, "beta": params.beta},
        "segments": [[s.from_hit, s.to_hit] for s in segs],
    }
    if len(segs) == 0:
        result.update(active=[], tracks=[], isolated_segments=[], solution=[], condition_number=None)
        return result, "segment,value\n"

    system = build_system(segs, params)
    kappa = condition_number(system)
    result["condition_number"] = kappa

    if args.method == "classical":
        sol = solve(system, method=args.solver)
        active = discretize(sol, args.threshold)
        result["solution"] = [float(v) for v in sol.values]
        result["threshold"] = args.threshold
        result["solver"] = {"method": sol.method, "iterations": sol.iterations,
                            "residual_norm": sol.residual_norm}
        spectrum = "segment,value\n" + "".join(f"{i},{v!r}\n" for i, v in enumerate(sol.values.tolist()))
    else:
        common = dict(
            shots=args.shots, seed=args.seed, max_qubits=args.max_qubits,
            evolution_time=args.evolution_time, trotter_steps=args.trotter_steps,
        )
        if args.method == "hhl":
            qres = run_hhl(system, HHLConfig(variant="full", n_clock=args.n_clock, **common))
        else:
            qres = run_hhl_1bit(system, HHLConfig.one_bit(**common))
        active = classify(qres)
        result["quantum"] = qres.to_dict()
        spectrum = qres.spectrum_csv()

    tracks = build_tracks(active, segs)
    report = score(tracks, event, active, segs)
    result["active"] = sorted(active.active)
    result["tracks"] = tracks.tracks
    result["isolated_segments"] = tracks.isolated_segments
    result["report"] = vars(report)
    return result, spectrum


def cmd_reconstruct(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    event = _load_event(args.event)
    result, spectrum = reconstruct_event(event, args)
    elapsed = time.perf_counter() - t0
    out = Path(args.output) if args.output else _default_output("result.json")
    _write(out, _dumps(result))
    outputs = [out]
    if args.spectrum_csv:
        _write(Path(args.spectrum_csv), spectrum)
        outputs.append(Path(args.spectrum_csv))
    _write_manifest(out, argv, args, [Path(args.event)], outputs, {"total_s": elapsed})
    log.info("wrote %s (%d active segments, %d tracks)", out, len(result["active"]), len(result["tracks"]))
    return EXIT_OK


# ----------------------------------------------------------------------------
# pv


def _parse_sweep(text: str) -> list[float]:
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise UsageError(f"--discard-sweep expects start:stop:step, got {text!r}") from None
    if step <= 0:
        raise UsageError("--discard-sweep step must be > 0")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + k * step, 12) for k in range(n)]


def cmd_pv(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    event = _load_event(args.event)
    result = json.loads(Path(args.result).read_text())
    params = result.get("params", {})
    segs = enumerate_segments(event)
    pairs = {(s.from_hit, s.to_hit): s.index for s in segs}
    stored = [tuple(p) for p in result.get("segments", [])]
    active = frozenset(pairs[stored[i]] for i in result.get("active", []))
    if not active:
        log.warning("result has no active segments; no vertices reconstructed")

    projections = segment_projections(active, segs, event)
    seg_pvs = cluster_z(projections, args.eps, args.min_samples, "segments")
    tracks = TrackCollection([list(t) for t in result.get("tracks", [])])
    trk_pvs = cluster_z(track_projections(tracks, event), args.eps, args.min_samples, "tracks")

    payload = {
        "params": params,
        "eps": args.eps,
        "min_samples": args.min_samples,
        "segment_vertices": [{"z": v.z, "n_members": v.n_members} for v in seg_pvs],
        "track_vertices": [{"z": v.z, "n_members": v.n_members} for v in trk_pvs],
        "truth_vertices": [pv[2] for pv in event.pvs],
    }
    if seg_pvs and trk_pvs:
        cmp = pv_difference(seg_pvs, trk_pvs)
        payload["comparison"] = {
            "differences": cmp.differences, "mad": cmp.mad,
            "unmatched_segment_pvs": cmp.unmatched_segment_pvs,
            "unmatched_track_pvs": cmp.unmatched_track_pvs,
        }

    out = Path(args.output) if args.output else _default_output("vertices.json")
    _write(out, _dumps(payload))
    outputs = [out]
    if args.discard_sweep:
        fractions = _parse_sweep(args.discard_sweep)
        reference = trk_pvs or seg_pvs
        curve = discard_sweep(projections, fractions, args.seeds, args.eps, args.min_samples,
                              reference_pvs=reference)
        csv_path = Path(args.csv) if args.csv else out.with_suffix(".mad.csv")
        _write(csv_path, curve.to_csv())
        outputs.append(csv_path)
    _write_manifest(out, argv, args, [Path(args.event), Path(args.result)], outputs,
                    {"total_s": time.perf_counter() - t0})
    return EXIT_OK


# ----------------------------------------------------------------------------
# scaling / resources


def cmd_scaling(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    rows = scaling_table(args.np_max, args.nhits, args.confidence, args.points,
                         np_min=args.np_min, marker=args.marker)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    out = Path(args.output) if args.output else _default_output("scaling.csv")
    _write(out, buf.getvalue())
    _write_manifest(out, argv, args, [], [out], {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_resources(args: argparse.Namespace, argv: Sequence[str]) -> int:
    t0 = time.perf_counter()
    event = minimal_event() if args.event == "minimal" else _load_event(args.event)
    params = HamiltonianParams(epsilon=args.epsilon, alpha=args.alpha, beta=args.beta)
    system = build_system(enumerate_segments(event), params)
    variants = ["full", "one-bit"] if args.variant == "both" else [args.variant]
    reports = {}
    for variant in variants:
        cfg = (HHLConfig(variant="full", n_clock=args.n_clock) if variant == "full"
               else HHLConfig.one_bit(trotter_steps=args.trotter_steps))
        reports[variant] = gate_report(system, cfg, trotter_tolerance=args.trotter_tolerance).to_dict()
    payload = {"reports": reports, "n_segments": system.n}
    if len(reports) == 2:
        full, one = reports["full"], reports["one-bit"]
        payload["ratio"] = {
            "total_abstract_gates": full["total_abstract_gates"] / one["total_abstract_gates"],
            "two_qubit_abstract_gates": full["two_qubit_abstract_gates"] / one["two_qubit_abstract_gates"],
            "controlled_evolution_applications": full["controlled_evolution_applications"]
            / one["controlled_evolution_applications"],
        }
    out = Path(args.output) if args.output else _default_output("resources.json")
    _write(out, _dumps(payload))
    inputs = [] if args.event == "minimal" else [Path(args.event)]
    _write_manifest(out, argv, args, inputs, [out], {"total_s": time.perf_counter() - t0})
    return EXIT_OK


def cmd_rerun(args: argparse.Namespace, argv: Sequence[str]) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    cwd = os.getcwd()
    try:
        os.chdir(manifest.get("cwd", cwd))
        return main(manifest["argv"])
    finally:
        os.chdir(cwd)


# ----------------------------------------------------------------------------


def _add_hamiltonian_flags(p: argparse.ArgumentParser) -> None:
    defaults = HamiltonianParams()
    p.add_argument("--epsilon", type=float, default=defaults.epsilon)
    p.add_argument("--alpha", type=float, default=defaults.alpha)
    p.add_argument("--beta", type=float, default=defaults.beta)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trackhhl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a toy event")
    g.add_argument("--preset", choices=["minimal", *PRESETS])
    g.add_argument("--config", help="JSON file with DetectorConfig fields")
    g.add_argument("--layers", type=int)
    g.add_argument("--particles", type=int)
    g.add_argument("--pvs", type=int)
    g.add_argument("--layer-z", help="comma-separated layer z positions (mm)")
    g.add_argument("--pv-z", help="comma-separated fixed PV z positions (mm)")
    g.add_argument("--pv-spread", type=float)
    g.add_argument("--slope-range", type=float)
    g.add_argument("--resolution", type=float)
    g.add_argument("--efficiency", type=float)
    g.add_argument("--scattering", type=float)
    g.add_argument("--seed", type=int)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("reconstruct", help="reconstruct tracks from an event")
    r.add_argument("event")
    r.add_argument("--method", choices=["classical", "hhl", "hhl1bit"], default="classical")
    r.add_argument("--solver", choices=["direct", "cg"], default="direct")
    r.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    r.add_argument("--max-slope", type=float)
    _add_hamiltonian_flags(r)
    r.add_argument("--n-clock", type=int, default=5)
    r.add_argument("--shots", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--trotter-steps", type=int, default=1)
    r.add_argument("--evolution-time", type=float)
    r.add_argument("--max-qubits", type=int, default=16)
    r.add_argument("--spectrum-csv")
    r.add_argument("-o", "--output")
    r.set_defaults(func=cmd_reconstruct)

    v = sub.add_parser("pv", help="primary vertices from a reconstruction result")
    v.add_argument("--result", required=True)
    v.add_argument("--event", required=True)
    v.add_argument("--eps", type=float, default=DEFAULT_EPS)
    v.add_argument("--min-samples", type=int, default=DEFAULT_MIN_SAMPLES)
    v.add_argument("--discard-sweep", help="start:stop:step, stop inclusive")
    v.add_argument("--seeds", type=int, default=10)
    v.add_argument("--csv")
    v.add_argument("-o", "--output")
    v.set_defaults(func=cmd_pv)

    s = sub.add_parser("scaling", help="sample and qubit scaling curves")
    s.add_argument("--np-max", type=int, default=1500)
    s.add_argument("--np-min", type=int, default=1)
    s.add_argument("--nhits", type=int, default=26)
    s.add_argument("--confidence", type=float, default=0.99)
    s.add_argument("--points", type=int, default=40)
    s.add_argument("--marker", type=int, default=1500, help="particle count flagged as HL-LHC")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_scaling)

    q = sub.add_parser("resources", help="abstract gate accounting")
    q.add_argument("--event", required=True, help="event JSON path or 'minimal'")
    q.add_argument("--variant", choices=["full", "one-bit", "both"], default="both")
    q.add_argument("--n-clock", type=int, default=6)
    q.add_argument("--trotter-steps", type=int, default=1)
    q.add_argument("--trotter-tolerance", type=float, default=1e-2)
    _add_hamiltonian_flags(q)
    q.add_argument("-o", "--output")
    q.set_defaults(func=cmd_resources)

    m = sub.add_parser("rerun", help="replay a run manifest")
    m.add_argument("manifest")
    m.set_defaults(func=cmd_rerun)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except (UsageError, ConfigError) as exc:
        print(f"trackhhl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"trackhhl: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (QuantumBudgetError, qs.PostSelectionError, SizeError) as exc:
        print(f"trackhhl: quantum failure: {exc}", file=sys.stderr)
        return EXIT_QUANTUM


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
