"""Command-line interface: ``mbqv <command> [options]``.

Commands
--------
dv-channel      effective Pauli channel of a gate on a noisy qubit cluster
gkp-channel     effective channel on a GKP cluster, or an infidelity series
fidelity-curve  gate fidelity against the error rate p for the three noise cases
qv-run          heavy-output statistics at one width
qv-sweep        quantum volume over an (eta, s_gkp) grid

Every option can also come from a ``key=value`` file given by ``--config``;
keys carry a section prefix (``gkp.s_gkp_db=22``). Flags override the file.
Artifacts embed the resolved configuration and are byte-identical for an
identical configuration, whatever the worker count; wall time goes to
stderr only.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .gkp import (
    DEFAULT_ROT_C0,
    DEFAULT_ROT_C1,
    GkpNoiseParams,
    effective_channel_gkp,
    infidelity_vs_squeezing,
    rotation_channel,
)
from .mbqc_dv import effective_channel_dv, fidelity_curve, standard_pattern
from .pauli import PauliChannel
from .qv import DEFAULT_EXACT_MAX, SWEEP_HEADER, DvNoise, qv_sweep, run_qv

COMMANDS = ("dv-channel", "gkp-channel", "fidelity-curve", "qv-run", "qv-sweep")
CHANNEL_GATES = ("hadamard", "cnot", "cz", "identity")
GKP_GATES = CHANNEL_GATES + ("rotation",)
CURVE_HEADER = "gate,case,p,fidelity"
SERIES_HEADER = "gate,eta,s_gkp_db,cz_mode,infidelity"
CHANNEL_HEADER = "pauli,prob"


def fmt(x: Any) -> str:
    """Text form of an output value; floats carry 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if x is None:
        return "none"
    if isinstance(x, (list, tuple)):
        return ",".join(fmt(v) for v in x)
    return str(x)


# ---------------------------------------------------------------- parameters


def _floats(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ValueError(f"expected a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise ValueError("list must not be empty")
    return vals


def _strings(text: str) -> tuple[str, ...]:
    vals = tuple(v.strip() for v in str(text).split(",") if v.strip())
    if not vals:
        raise ValueError("list must not be empty")
    return vals


def _float(text) -> float:
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"expected a number, got {text!r}") from None


def _int(text) -> int:
    try:
        return int(text)
    except ValueError:
        raise ValueError(f"expected an integer, got {text!r}") from None


def _opt_float(text):
    return None if str(text).lower() in ("", "none") else _float(text)


@dataclass(frozen=True)
class Param:
    key: str
    flag: str
    parse: Callable
    default: Any
    commands: tuple[str, ...]
    help: str
    check: Callable[[Any], str | None] | None = None


def _range(lo, hi, name, lo_open=False):
    def check(v):
        ok = (lo < v if lo_open else lo <= v) and v <= hi
        op = "<" if lo_open else "<="
        return None if ok else f"{name} must satisfy {lo} {op} {name} <= {hi}"

    return check


def _each(check):
    def inner(vals):
        for v in vals:
            msg = check(v)
            if msg:
                return msg
        return None

    return inner


def _choice(options, name):
    return lambda v: None if v in options else f"{name} must be one of {', '.join(options)}"


def _each_choice(options, name):
    return _each(_choice(options, name))


_ALL = COMMANDS
_GKP = ("gkp-channel", "qv-run", "qv-sweep")
_QV = ("qv-run", "qv-sweep")
_positive = lambda name: lambda v: None if v >= 1 else f"{name} must be >= 1"  # noqa: E731
_nonneg = lambda name: lambda v: None if v is None or v >= 0 else f"{name} must be >= 0"  # noqa: E731
_eta_check = _range(0, 1, "eta", lo_open=True)

PARAMS = [
    Param("run.seed", "--seed", _int, 0, _ALL, "master seed", _nonneg("seed")),
    Param("run.workers", "--workers", _int, None, _ALL, "worker processes (default $MBQV_WORKERS or 1)", _positive("workers")),
    Param("run.output", "--output", str, "-", _ALL, "output path, '-' for stdout"),
    Param("run.format", "--format", str, None, _ALL, "json or csv", _choice(("json", "csv"), "format")),
    Param("channel.gate", "--gate", str, "hadamard", ("dv-channel", "gkp-channel"), "gate pattern"),
    Param("dv.p_cz", "--p-cz", _float, 0.0, ("dv-channel", "qv-run"), "CZ depolarizing rate", _range(0, 1, "p_cz")),
    Param("dv.p_m", "--p-m", _float, 0.0, ("dv-channel", "qv-run"), "measurement flip rate", _range(0, 1, "p_m")),
    Param("gkp.s_gkp_db", "--s-gkp", _opt_float, None, ("gkp-channel", "qv-run"), "GKP squeezing in dB", _nonneg("s_gkp_db")),
    Param("gkp.eta", "--eta", _float, 1.0, ("gkp-channel", "qv-run"), "homodyne efficiency", _eta_check),
    Param("gkp.cz_mode", "--cz-mode", str, "equal", _GKP, "equal (s_cz = s_gkp) or zero (no CZ noise)",
          _choice(("equal", "zero"), "cz_mode")),
    Param("gkp.s_cz_db", "--s-cz", _opt_float, None, ("gkp-channel", "qv-run"), "explicit CZ noise level in dB"),
    Param("gkp.kappa_over_g", "--kappa-over-g", _opt_float, None, ("gkp-channel", "qv-run"),
          "explicit CZ shift variance", _nonneg("kappa_over_g")),
    Param("gkp.xcov", "--xcov", _float, 0.0, _GKP, "CZ noise cross-covariance coefficient", _range(-1, 1, "xcov")),
    Param("gkp.rot_c0", "--rot-c0", _float, DEFAULT_ROT_C0, _GKP, "rotation error offset", _nonneg("rot_c0")),
    Param("gkp.rot_c1", "--rot-c1", _float, DEFAULT_ROT_C1, _GKP, "rotation error slope", _nonneg("rot_c1")),
    Param("gkp.mode", "--gkp-mode", str, "analytic", _GKP, "analytic or sampled",
          _choice(("analytic", "sampled"), "gkp.mode")),
    Param("gkp.samples", "--samples", _int, 200_000, ("gkp-channel",), "shift samples in sampled mode", _positive("samples")),
    Param("gkp.s_grid", "--s-grid", _floats, None, ("gkp-channel", "qv-sweep"), "squeezing grid in dB",
          _each(_nonneg("s_gkp_db"))),
    Param("gkp.eta_grid", "--eta-grid", _floats, None, ("gkp-channel", "qv-sweep"), "efficiency grid",
          _each(_eta_check)),
    Param("curve.gates", "--gates", _strings, ("hadamard", "cnot"), ("fidelity-curve",), "gates for the curve",
          _each_choice(CHANNEL_GATES, "gate")),
    Param("curve.cases", "--cases", _strings, ("1", "2", "3"), ("fidelity-curve",), "noise cases 1, 2, 3",
          _each_choice(("1", "2", "3"), "case")),
    Param("curve.p_grid", "--p-grid", _floats, tuple(np.round(np.linspace(0.0, 0.1, 21), 10)), ("fidelity-curve",),
          "error rates", _each(_range(0, 1, "p"))),
    Param("qv.noise", "--noise", str, "dv", ("qv-run",), "dv, gkp or none", _choice(("dv", "gkp", "none"), "noise")),
    Param("qv.d", "--d", _int, 4, ("qv-run",), "circuit width", lambda v: None if v >= 2 else "d must be >= 2"),
    Param("qv.d_max", "--d-max", _int, 10, ("qv-sweep",), "largest width", lambda v: None if v >= 2 else "d_max must be >= 2"),
    Param("qv.d_min", "--d-min", _int, 2, ("qv-sweep",), "smallest width", lambda v: None if v >= 2 else "d_min must be >= 2"),
    Param("qv.instances", "--instances", _int, None, _QV, "model circuits per width (1600 for qv-run, 100 for qv-sweep)",
          _positive("instances")),
    Param("qv.shots", "--shots", _int, 256, _QV, "trajectories per instance", _positive("shots")),
    Param("qv.policy", "--policy", str, "threshold", _QV, "threshold or confidence",
          _choice(("threshold", "confidence"), "policy")),
    Param("qv.exact_max", "--exact-max", _int, DEFAULT_EXACT_MAX, _QV, "largest width simulated exactly",
          lambda v: None if 0 <= v <= 12 else "exact_max must satisfy 0 <= exact_max <= 12"),
    Param("qv.sim_mode", "--sim-mode", str, "auto", ("qv-run",), "auto, exact or trajectory",
          _choice(("auto", "exact", "trajectory"), "sim_mode")),
]  # fmt: skip
BY_KEY = {p.key: p for p in PARAMS}


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in BY_KEY:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def items(self):
        return sorted(self.values.items())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbqv", description="Logical noise and quantum volume of measurement-based machines.")
    parser.add_argument("--version", action="version", version=f"mbqv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="key=value configuration file")
        for prm in PARAMS:
            if cmd in prm.commands:
                p.add_argument(prm.flag, dest=prm.key, default=argparse.SUPPRESS, help=prm.help)
    return parser


def parse_config(argv: list[str] | None = None, env: dict | None = None) -> RunConfig:
    """Resolve defaults, then the config file, then flags."""
    env = os.environ if env is None else env
    ns = vars(build_parser().parse_args(argv))
    cmd = ns.pop("command")
    cfg_path = ns.pop("config", None)
    raw: dict[str, Any] = {}
    if cfg_path:
        raw.update(read_config_file(cfg_path))
    raw.update(ns)
    values = {p.key: p.default for p in PARAMS if cmd in p.commands}
    for key, text in raw.items():
        prm = BY_KEY[key]
        if cmd not in prm.commands:
            continue  # shared config files may carry keys for other commands
        values[key] = prm.parse(text)
    if values["run.workers"] is None:
        values["run.workers"] = _int(env.get("MBQV_WORKERS", "1"))
    if values["run.format"] is None:
        values["run.format"] = "json" if cmd in ("dv-channel", "qv-run") or (
            cmd == "gkp-channel" and values.get("gkp.s_grid") is None
        ) else "csv"
    if "qv.instances" in values and values["qv.instances"] is None:
        values["qv.instances"] = 1600 if cmd == "qv-run" else 100
    for key, v in values.items():
        check = BY_KEY[key].check
        msg = check(v) if check is not None and v is not None else None
        if msg:
            raise ValueError(f"invalid {key}={fmt(v)}: {msg}")
    _check_command(cmd, values)
    return RunConfig(cmd, values)


def _check_command(cmd: str, v: dict):
    if cmd == "dv-channel" and v["channel.gate"] not in CHANNEL_GATES:
        raise ValueError(f"gate must be one of {', '.join(CHANNEL_GATES)}")
    if cmd == "gkp-channel":
        if v["channel.gate"] not in GKP_GATES:
            raise ValueError(f"gate must be one of {', '.join(GKP_GATES)}")
        if v["gkp.s_grid"] is None and v["gkp.s_gkp_db"] is None:
            raise ValueError("gkp-channel needs --s-gkp (or --s-grid for a series)")
        if v["gkp.s_grid"] is not None and v["run.format"] != "csv":
            raise ValueError("infidelity series are written as csv")
    if cmd == "qv-run" and v["qv.noise"] == "gkp" and v["gkp.s_gkp_db"] is None:
        raise ValueError("qv-run with gkp noise needs --s-gkp")
    if cmd == "qv-sweep":
        if v["gkp.s_grid"] is None or v["gkp.eta_grid"] is None:
            raise ValueError("qv-sweep needs --eta-grid and --s-grid")
        if v["qv.d_min"] > v["qv.d_max"]:
            raise ValueError("d_min must not exceed d_max")
    if cmd in ("fidelity-curve", "qv-sweep") and v["run.format"] != "csv":
        raise ValueError(f"{cmd} writes csv only")


# ---------------------------------------------------------------- execution


def version_string() -> str:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _metadata(cfg: RunConfig) -> dict:
    meta = {"command": cfg.command, "version": version_string()}
    noise = cfg.values.get("qv.noise")
    skip = {"dv": "gkp.", "gkp": "dv.", "none": ("dv.", "gkp.")}.get(noise, ())
    for key, value in cfg.items():
        if key not in ("run.workers", "run.output") and not key.startswith(skip):
            meta[key] = list(value) if isinstance(value, tuple) else value
    return meta


def _gkp_params(v: dict, s_gkp: float | None = None, eta: float | None = None) -> tuple[GkpNoiseParams, str]:
    s = v["gkp.s_gkp_db"] if s_gkp is None else s_gkp
    e = v["gkp.eta"] if eta is None else eta
    kw = dict(xcov=v["gkp.xcov"], rot_c0=v["gkp.rot_c0"], rot_c1=v["gkp.rot_c1"], mode=v["gkp.mode"])
    if v.get("gkp.kappa_over_g") is not None:
        return GkpNoiseParams(s, e, kappa_over_g=v["gkp.kappa_over_g"], **kw), "custom"
    if v.get("gkp.s_cz_db") is not None:
        return GkpNoiseParams(s, e, s_cz_db=v["gkp.s_cz_db"], **kw), "custom"
    return GkpNoiseParams.for_cz_mode(s, e, v["gkp.cz_mode"], **kw), v["gkp.cz_mode"]


def _channel_payload(chan: PauliChannel, cfg: RunConfig, meta: dict) -> str:
    if cfg["run.format"] == "json":
        obj = json.loads(chan.to_json())
        obj["metadata"] = meta
        return dumps(obj)
    rows = [(p.label, v) for p, v in chan.probs.items()]
    return _csv(CHANNEL_HEADER, rows, meta)


def dumps(obj) -> str:
    """JSON with 17-significant-digit floats and sorted keys."""

    def enc(o, indent):
        pad = "  " * (indent + 1)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(o[k], indent + 1)}" for k in sorted(o)]
            return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return "[\n" + ",\n".join(pad + enc(x, indent + 1) for x in o) + "\n" + "  " * indent + "]"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (float, np.floating)):
            x = float(o)
            if math.isnan(x):
                return "NaN"
            if math.isinf(x):
                return "Infinity" if x > 0 else "-Infinity"
            return format(x, ".17g")
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if o is None:
            return "null"
        return json.dumps(str(o))

    return enc(obj, 0) + "\n"


def _csv(header: str, rows, meta: dict) -> str:
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}={fmt(meta[key])}\n")
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(fmt(x) for x in row) + "\n")
    return buf.getvalue()


@contextmanager
def _mapper(workers: int):
    if workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield lambda fn, tasks: pool.map(fn, tasks, chunksize=1)


def _series_task(args):
    gate, eta, s, cz_mode, kw = args
    return float(infidelity_vs_squeezing(gate, eta, [s], cz_mode, **kw)[0])


def execute(cfg: RunConfig, log=None) -> str:
    """Run ``cfg`` and return the artifact text."""
    log = log or (lambda msg: print(msg, file=sys.stderr))
    v = cfg.values
    meta = _metadata(cfg)
    cmd = cfg.command
    with _mapper(v["run.workers"]) as map_fn:
        if cmd == "dv-channel":
            chan = effective_channel_dv(standard_pattern(v["channel.gate"]), v["dv.p_cz"], v["dv.p_m"])
            return _channel_payload(chan, cfg, meta)

        if cmd == "gkp-channel":
            if v["gkp.s_grid"] is None:
                params, cz_mode = _gkp_params(v)
                meta["gkp.resolved"] = params.as_dict()
                meta["gkp.cz_mode"] = cz_mode
                if v["channel.gate"] == "rotation":
                    chan = rotation_channel(0.0, params)
                else:
                    chan = effective_channel_gkp(
                        standard_pattern(v["channel.gate"]),
                        params,
                        n_samples=v["gkp.samples"],
                        rng=np.random.default_rng(v["run.seed"]),
                    )
                return _channel_payload(chan, cfg, meta)
            if v["gkp.kappa_over_g"] is not None or v["gkp.s_cz_db"] is not None:
                raise ValueError("series use --cz-mode, not an explicit CZ noise level")
            if v["gkp.mode"] != "analytic":
                raise ValueError("series are computed in analytic mode")
            etas = v["gkp.eta_grid"] or (v["gkp.eta"],)
            kw = dict(xcov=v["gkp.xcov"], rot_c0=v["gkp.rot_c0"], rot_c1=v["gkp.rot_c1"])
            tasks = [(v["channel.gate"], e, s, v["gkp.cz_mode"], kw) for e in etas for s in v["gkp.s_grid"]]
            vals = list(map_fn(_series_task, tasks))
            rows = [(t[0], t[1], t[2], t[3], x) for t, x in zip(tasks, vals)]
            return _csv(SERIES_HEADER, rows, meta)

        if cmd == "fidelity-curve":
            rows = []
            for gate in v["curve.gates"]:
                for case in v["curve.cases"]:
                    ps, fids = fidelity_curve(gate, int(case), v["curve.p_grid"])
                    rows += [(gate, int(case), p, f) for p, f in zip(ps, fids)]
            return _csv(CURVE_HEADER, rows, meta)

        if cmd == "qv-run":
            if v["qv.noise"] == "dv":
                noise = DvNoise(v["dv.p_cz"], v["dv.p_m"])
            elif v["qv.noise"] == "gkp":
                noise, meta["gkp.cz_mode"] = _gkp_params(v)
            else:
                noise = None
            res = run_qv(
                v["qv.d"],
                noise,
                n_instances=v["qv.instances"],
                shots=v["qv.shots"],
                seed=v["run.seed"],
                mode=v["qv.sim_mode"],
                exact_max=v["qv.exact_max"],
                map_fn=map_fn,
            )
            full = dict(res.metadata, config=meta)
            fields = {
                "d": res.d,
                "n_instances": res.n_instances,
                "mean_h": res.mean_h,
                "stderr": res.stderr,
                "threshold_pass": res.threshold_pass,
                "confidence_pass": res.confidence_pass,
                "metadata": full,
            }
            if v["run.format"] == "json":
                return dumps(fields)
            header = "d,n_instances,mean_h,stderr,threshold_pass,confidence_pass"
            row = [fields[k] for k in header.split(",")]
            return _csv(header, [row], meta)

        if cmd == "qv-sweep":
            rows = qv_sweep(
                v["gkp.eta_grid"],
                v["gkp.s_grid"],
                cz_mode=v["gkp.cz_mode"],
                d_max=v["qv.d_max"],
                d_min=v["qv.d_min"],
                n_instances=v["qv.instances"],
                shots=v["qv.shots"],
                seed=v["run.seed"],
                policy=v["qv.policy"],
                exact_max=v["qv.exact_max"],
                map_fn=map_fn,
                log=log,
                xcov=v["gkp.xcov"],
                rot_c0=v["gkp.rot_c0"],
                rot_c1=v["gkp.rot_c1"],
                mode=v["gkp.mode"],
            )
            cols = SWEEP_HEADER.split(",")
            return _csv(SWEEP_HEADER, [[r[c] for c in cols] for r in rows], meta)
    raise ValueError(f"unknown command {cmd!r}")


def main(argv: list[str] | None = None) -> int:
    start = time.perf_counter()
    try:
        cfg = parse_config(argv)
    except (ValueError, OSError) as exc:
        print(f"mbqv: error: {exc}", file=sys.stderr)
        return 2
    try:
        text = execute(cfg)
        out = cfg["run.output"]
        if out == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
        else:
            Path(out).write_text(text)
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"mbqv: error: {exc}", file=sys.stderr)
        return 1
    print(f"mbqv: {cfg.command} done, wall_time_s={time.perf_counter() - start:.3f}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
