"""Command-line profiler.

Subcommands:

``inspect``
    Print the per-layer structural table (neuron count, fanin, recurrent
    fanin, per-event energy parameters), the conventional MAC count, and
    the update energy one timestep costs.
``profile``
    Run a dataset and write ``energy.json`` (structural estimate and exact
    event count side by side, mean and std over samples), ``spikes.csv``
    (per-layer totals), and ``latency.csv`` (per-sample outcome).
``trace``
    Run one sample and write ``trace.csv`` with rows ``layer,t,spike_count``
    over the full (layer, t) grid; ``--raster`` adds a per-spike
    ``raster.csv`` with rows ``layer,neuron,t``.
``calibrate``
    Fit joules-per-event parameters from an observations CSV and write
    ``model.json``.
``predict``
    Run a dataset, take its mean event counts, and apply a fitted model to
    estimate energy per inference in joules (written to
    ``prediction.json``).

Exit codes: 0 success; 2 for unusable inputs (bad files, malformed
manifests, shape problems); 3 when simulation state left the finite range;
4 when a calibration fit is impossible. ``EMACPROF_LOG`` sets the log
level (DEBUG, INFO, WARNING, ERROR).

Report files contain no timestamps and are written with sorted keys and
fixed float formatting, so a rerun with the same inputs and seed produces
byte-identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .calib import (
    fit_energy_model,
    model_from_json,
    model_to_json,
    predict_energy,
    read_observations_csv,
)
from .codec import EncodingMode, encode, load_input_tensor
from .emac import METHOD_ANALYTIC, METHOD_EXACT, ann_mac_count
from .engine import AggregateStats, run_dataset, run_inference
from .errors import (
    EmacProfError,
    IllConditioned,
    MissingMeasurement,
    NonFiniteState,
    RankDeficient,
    SchemaError,
)
from .netspec import Coding, NetworkSpec, parse_network, structural_counts
from .neuron import AC_EMAC

__all__ = ["main", "entrypoint"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_CALIBRATION = 4

_INPUT_SUFFIXES = (".bin", ".csv")


# ---------------------------------------------------------------------------
# shared plumbing


def _setup_logging() -> None:
    name = os.environ.get("EMACPROF_LOG", "WARNING").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def _slug(exc: BaseException) -> str:
    return re.sub(r"(?<!^)(?=[A-Z])", " ", type(exc).__name__).lower()


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (RankDeficient, IllConditioned, MissingMeasurement)):
        return EXIT_CALIBRATION
    if isinstance(exc, NonFiniteState):
        return EXIT_NUMERIC
    return EXIT_VALIDATION


def _load_net(args) -> NetworkSpec:
    npath = Path(args.network)
    wpath = Path(args.weights) if args.weights else npath.with_suffix(".emwt")
    return parse_network(npath.read_bytes(), wpath.read_bytes())


def _collect_inputs(spec: str) -> list[Path]:
    root = Path(spec)
    if root.is_dir():
        paths = sorted(
            p for p in root.iterdir() if p.suffix.lower() in _INPUT_SUFFIXES
        )
        if not paths:
            raise SchemaError(f"{root}: no .bin or .csv input files")
        return paths
    if root.suffix.lower() not in _INPUT_SUFFIXES:
        raise SchemaError(f"{root}: input files must end in .bin or .csv")
    return [root]


def _load_samples(net: NetworkSpec, args) -> list:
    mode = EncodingMode(args.encoding)
    samples = []
    for index, path in enumerate(_collect_inputs(args.inputs)):
        values = load_input_tensor(path, net.input_shape)
        # each sample gets its own counter-based stream
        seed = (args.seed + index) % (1 << 64)
        samples.append(encode(values, mode, seed))
    return samples


def _num(value: float) -> float | None:
    v = float(value)
    return v if math.isfinite(v) else None


def _ms(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return {"mean": None, "std": None}
    return {"mean": _num(arr.mean()), "std": _num(arr.std())}


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _fmt(value: float) -> str:
    out = f"{value:.3f}".rstrip("0").rstrip(".")
    return out if out else "0"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_inspect(args) -> int:
    net = _load_net(args)
    counts = structural_counts(net)
    static_upd = 0.0
    print(f"{'layer':<6}{'name':<22}{'kind':<20}{'n_n':>8}{'n_s':>7}"
          f"{'n_sr':>7}  e=(e_syn,e_upd)")
    for index, layer in enumerate(net.layers):
        c = counts[index]
        if layer.neuron_model is not None:
            p = layer.neuron_model.energy
            e_syn, e_upd = p.e_syn, p.e_upd
            if layer.neuron_model.kind.spiking:
                static_upd += c.neurons * e_upd
        elif layer.kind.value == "max_pool2d":
            e_syn, e_upd = AC_EMAC, 0.0
        else:
            e_syn, e_upd = 0.0, 0.0
        print(
            f"{index:<6}{net.layer_name(index):<22}{layer.kind.value:<20}"
            f"n_n={c.neurons:<7} n_s={c.fanin:<5} n_sr={c.recurrent_fanin:<5}"
            f" e=({_fmt(e_syn)},{_fmt(e_upd)})"
        )
    print(f"ANN MAC count: {ann_mac_count(net)}")
    print(f"update EMAC per timestep: {_fmt(static_upd)}")
    return EXIT_OK


def _method_block(stats: AggregateStats, attr: str) -> dict:
    ok = [r for r in stats.results if r is not None]
    reports = [getattr(r, attr) for r in ok]
    per_layer = []
    for index, name in enumerate(stats.layer_names):
        layer_reports = [rep.per_layer[index] for rep in reports]
        per_layer.append(
            {
                "name": name,
                "kind": layer_reports[0].kind if layer_reports else None,
                "E_syn": _ms([le.E_syn for le in layer_reports]),
                "E_upd": _ms([le.E_upd for le in layer_reports]),
                "E_rec": _ms([le.E_rec for le in layer_reports]),
                "E_tot": _ms([le.E_tot for le in layer_reports]),
            }
        )
    return {
        "E_syn": _ms([rep.E_syn for rep in reports]),
        "E_upd": _ms([rep.E_upd for rep in reports]),
        "E_rec": _ms([rep.E_rec for rep in reports]),
        "E_tot": _ms([rep.E_tot for rep in reports]),
        "approx_padding": bool(any(rep.approx_padding for rep in reports)),
        "per_layer": per_layer,
    }


def _energy_report(stats: AggregateStats, args, net: NetworkSpec) -> dict:
    return {
        "coding": (args.coding or net.coding.value),
        "encoder_per_step": bool(args.encoder_per_step),
        "encoding": args.encoding,
        "failures": [
            {"sample": index, "message": message}
            for index, message in stats.failures
        ],
        "latency_T": _ms([r.trace.T_used for r in stats.results if r is not None]),
        "methods": {
            METHOD_ANALYTIC: _method_block(stats, "energy_analytic"),
            METHOD_EXACT: _method_block(stats, "energy"),
        },
        "n_ok": stats.n_ok,
        "n_samples": stats.n_samples,
        "reference_kind": stats.reference_kind,
        "seed": args.seed,
        "synaptic_events_mean": _num(stats.mean_synaptic_events),
        "t_max": args.t_max if args.t_max is not None else net.max_timesteps,
        "total_spikes": {
            "mean": _num(stats.total_spikes.mean),
            "std": _num(stats.total_spikes.std),
        },
        "update_count_mean": _num(stats.mean_update_count),
    }


def _write_spikes_csv(path: Path, stats: AggregateStats, net: NetworkSpec) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "name", "kind", "spikes_mean", "spikes_std"])
        for index, stat in enumerate(stats.per_layer_spikes):
            writer.writerow(
                [
                    index,
                    stats.layer_names[index],
                    net.layers[index].kind.value,
                    repr(stat.mean),
                    repr(stat.std),
                ]
            )


def _write_latency_csv(path: Path, stats: AggregateStats) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["sample", "status", "T_used", "class_index", "fallback_used"]
        )
        for index, result in enumerate(stats.results):
            if result is None:
                writer.writerow([index, "failed", "", "", ""])
            else:
                writer.writerow(
                    [
                        index,
                        "ok",
                        result.trace.T_used,
                        result.decision.class_index,
                        int(result.decision.fallback_used),
                    ]
                )


def cmd_profile(args) -> int:
    net = _load_net(args)
    samples = _load_samples(net, args)
    stats = run_dataset(
        net,
        samples,
        jobs=args.jobs,
        t_max=args.t_max,
        coding=args.coding,
        encoder_per_step=args.encoder_per_step,
    )
    out = _out_dir(args)
    written = []
    if args.format in ("json", "both"):
        _write_json(out / "energy.json", _energy_report(stats, args, net))
        written.append("energy.json")
    if args.format in ("csv", "both"):
        _write_spikes_csv(out / "spikes.csv", stats, net)
        _write_latency_csv(out / "latency.csv", stats)
        written.extend(["spikes.csv", "latency.csv"])
    print(f"samples: {stats.n_ok}/{stats.n_samples} ok")
    print(
        f"E_tot exact_events: mean={stats.emac_exact.mean!r} "
        f"std={stats.emac_exact.std!r}"
    )
    print(
        f"E_tot analytic:     mean={stats.emac_analytic.mean!r} "
        f"std={stats.emac_analytic.std!r}"
    )
    print(f"wrote {', '.join(written)} to {out}")
    if stats.failures:
        for index, message in stats.failures:
            print(f"sample {index} failed: {message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_trace(args) -> int:
    net = _load_net(args)
    paths = _collect_inputs(args.inputs)
    if not 0 <= args.sample < len(paths):
        raise SchemaError(
            f"--sample {args.sample} is out of range for {len(paths)} input file(s)"
        )
    values = load_input_tensor(paths[args.sample], net.input_shape)
    sample = encode(values, EncodingMode(args.encoding), args.seed)
    result = run_inference(
        net,
        sample,
        t_max=args.t_max,
        coding=args.coding,
        record_raster=args.raster,
        encoder_per_step=args.encoder_per_step,
    )
    out = _out_dir(args)
    trace = result.trace
    with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["layer", "t", "spike_count"])
        for index in range(trace.counts.shape[0]):
            for t in range(1, trace.T_used + 1):
                writer.writerow([index, t, int(trace.counts[index, t - 1])])
    written = ["trace.csv"]
    if args.raster:
        with open(out / "raster.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["layer", "neuron", "t"])
            for index, raster in enumerate(result.rasters):
                neurons, steps = np.nonzero(raster)
                order = np.lexsort((neurons, steps))
                for k in order:
                    writer.writerow([index, int(neurons[k]), int(steps[k]) + 1])
        written.append("raster.csv")
    d = result.decision
    print(
        f"class {d.class_index} after {d.latency_T} step(s)"
        + (" via silent-output fallback" if d.fallback_used else "")
    )
    print(f"E_tot exact_events: {result.energy.E_tot!r}")
    print(f"wrote {', '.join(written)} to {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    observations = read_observations_csv(args.observations)
    model = fit_energy_model(observations, floor_power_W=args.floor_power)
    out = _out_dir(args)
    (out / "model.json").write_bytes(model_to_json(model))
    print(f"e_syn_J = {model.e_syn_J!r}")
    print(f"e_upd_J = {model.e_upd_J!r}")
    print(f"residual_rms = {model.residual_rms!r} over {model.n_obs} observation(s)")
    if model.negative_params:
        print("warning: fitted parameters are not both positive", file=sys.stderr)
    print(f"wrote model.json to {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    model = model_from_json(Path(args.model).read_bytes())
    net = _load_net(args)
    samples = _load_samples(net, args)
    stats = run_dataset(
        net,
        samples,
        jobs=args.jobs,
        t_max=args.t_max,
        coding=args.coding,
        encoder_per_step=args.encoder_per_step,
    )
    energy, sigma = predict_energy(
        model, stats.mean_synaptic_events, stats.mean_update_count
    )
    out = _out_dir(args)
    _write_json(
        out / "prediction.json",
        {
            "E_joules": _num(energy),
            "sigma_joules": _num(sigma),
            "synaptic_events_mean": _num(stats.mean_synaptic_events),
            "update_count_mean": _num(stats.mean_update_count),
            "reference_kind": stats.reference_kind,
            "n_ok": stats.n_ok,
            "n_samples": stats.n_samples,
        },
    )
    print(f"E = {energy!r} J per inference (sigma {sigma!r})")
    print(f"wrote prediction.json to {out}")
    if stats.failures:
        for index, message in stats.failures:
            print(f"sample {index} failed: {message}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_network_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--network", required=True, help="network manifest (JSON)")
    p.add_argument(
        "--weights",
        help="weights container; default: the manifest path with a .emwt suffix",
    )


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--inputs", required=True, help="input tensor file or directory of .bin/.csv"
    )
    p.add_argument(
        "--encoding",
        choices=[m.value for m in EncodingMode],
        default=EncodingMode.ANALOG.value,
        help="present inputs as constant currents or per-step spike draws",
    )
    p.add_argument(
        "--coding",
        choices=[c.value for c in Coding],
        default=None,
        help="decision rule override; default: what the manifest declares",
    )
    p.add_argument("--t-max", type=int, default=None, help="step budget override")
    p.add_argument(
        "--seed",
        type=int,
        default=0,
        help="base seed; sample k uses seed+k for its spike draws",
    )
    p.add_argument(
        "--encoder-per-step",
        action="store_true",
        help="charge the static first-layer pass once per timestep instead of once",
    )


def _add_out_flags(p: argparse.ArgumentParser, *, formats: bool = True) -> None:
    p.add_argument("--out", default=".", help="directory for report files")
    if formats:
        p.add_argument(
            "--format",
            choices=["json", "csv", "both"],
            default="both",
            help="which report files to write",
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emacprof",
        description="Energy profiling for spiking and conventional networks.",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print the structural table of a network")
    _add_network_flags(p)
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("profile", help="run a dataset and write energy reports")
    _add_network_flags(p)
    _add_run_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="concurrent samples")
    _add_out_flags(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("trace", help="run one sample and write its spike trace")
    _add_network_flags(p)
    _add_run_flags(p)
    p.add_argument(
        "--sample", type=int, default=0, help="index into the sorted input files"
    )
    p.add_argument("--raster", action="store_true", help="also write raster.csv")
    _add_out_flags(p, formats=False)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("calibrate", help="fit joules-per-event parameters")
    p.add_argument(
        "--observations", required=True, help="CSV of name,S,U,E_joules[,duration_s]"
    )
    p.add_argument(
        "--floor-power",
        type=float,
        default=None,
        help="constant platform watts to subtract via each row's duration_s",
    )
    _add_out_flags(p, formats=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("predict", help="apply a fitted model to a new network")
    p.add_argument("--model", required=True, help="fitted model JSON")
    _add_network_flags(p)
    _add_run_flags(p)
    p.add_argument("--jobs", type=int, default=1, help="concurrent samples")
    _add_out_flags(p, formats=False)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except (EmacProfError, OSError, ValueError) as exc:
        print(f"error: {_slug(exc)}: {exc}", file=sys.stderr)
        logger.debug("command failed", exc_info=exc)
        return _exit_code(exc)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
