"""Command-line front end.

Subcommands: ``admit``, ``deadline``, ``shape``, ``simulate``, ``selftest``.
Exit status 0 means success (admitted, no violations), 1 means a negative
verdict and 2 means bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .admission import FlowSpec, necessary_condition, schedulable_curve_only, schedulable_sufficient
from .curves import ConvexSegmentSpec, TokenBucketSpec, from_spec
from .plf import MAXPLUS, MINPLUS, CurveError, PiecewiseLinear, upper_pseudo_inverse
from .sced import (ArrivalStream, StreamError, assign_deadline_convex, assign_deadline_latency_rate,
                   assign_deadline_rate, deadline_oracle, packet_deadlines_virtualclock, shaper_release)
from .sim import (FLUID, PACKET, ConfigError, LinkModel, SimConfig, SimFlow, conforming_arrivals,
                  run, saturating_arrivals)

EXIT_OK, EXIT_NEGATIVE, EXIT_INPUT = 0, 1, 2

TRACE_FIELDS = ("time", "flow_id", "amount")
SEGMENT_FIELDS = ("flow_id", "nu_start", "nu_end", "deadline_start", "slope")
PACKET_FIELDS = ("flow_id", "packet_index", "deadline")


class InputError(Exception):
    """Bad input; the message already carries the location."""


# ----------------------------------------------------------------------
# input
# ----------------------------------------------------------------------

def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None


def load_json(path: str):
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _check_keys(obj, allowed, where: str, required=()):
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise InputError(f"{where}: unknown fields {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise InputError(f"{where}: missing fields {missing}")


def _curve(obj, where: str, role: str | None = None) -> PiecewiseLinear:
    try:
        c = from_spec(obj)
    except (CurveError, TypeError, ValueError, KeyError) as exc:
        raise InputError(f"{where}: {exc}") from None
    if role is not None and c.role != role:
        raise InputError(f"{where}: expected a {role} curve")
    return c


def read_trace(path: str) -> dict[str, ArrivalStream]:
    """Parse ``time,flow_id,amount[,packet_len]`` rows into one stream per flow.

    ``packet_len`` cuts the row's chunk into packets of that size (the last
    one takes the remainder).
    """
    text = _read_text(path)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise InputError(f"{path}:1:1: empty trace") from None
    header = [h.strip() for h in header]
    if tuple(header[:3]) != TRACE_FIELDS or header[3:] not in ([], ["packet_len"]):
        raise InputError(f"{path}:1:1: header must be time,flow_id,amount[,packet_len]")
    with_packets = len(header) == 4
    events: dict[str, list] = {}
    packets: dict[str, list] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise InputError(f"{path}:{line}:1: expected {len(header)} fields, got {len(row)}")
        col = 1
        try:
            t = float(row[0])
            col += len(row[0]) + 1 + len(row[1]) + 1
            amount = float(row[2])
            plen = None
            if with_packets and row[3].strip():
                col += len(row[2]) + 1
                plen = float(row[3])
        except ValueError:
            raise InputError(f"{path}:{line}:{col}: not a number") from None
        if not (math.isfinite(t) and t >= 0):
            raise InputError(f"{path}:{line}:1: time must be finite and nonnegative")
        if not amount > 0:
            raise InputError(f"{path}:{line}:{col}: amount must be positive")
        fid = row[1].strip()
        if events.get(fid) and t < events[fid][-1][0]:
            raise InputError(f"{path}:{line}:1: times of flow {fid!r} must be nondecreasing")
        events.setdefault(fid, []).append((t, amount))
        sizes = packets.setdefault(fid, [])
        if plen is None:
            sizes.append(amount)
        else:
            if not plen > 0:
                raise InputError(f"{path}:{line}:{col}: packet_len must be positive")
            n = math.floor(amount / plen + 1e-9)
            rest = amount - n * plen
            sizes.extend([plen] * n)
            if rest > 1e-9:
                sizes.append(rest)
            elif n == 0:
                sizes.append(amount)
    if not events:
        raise InputError(f"{path}: no arrivals")
    return {fid: ArrivalStream(tuple(ev), tuple(packets[fid]) if with_packets else None)
            for fid, ev in events.items()}


# ----------------------------------------------------------------------
# output
# ----------------------------------------------------------------------

def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


# ----------------------------------------------------------------------
# admit
# ----------------------------------------------------------------------

def _flowset(obj, where: str):
    _check_keys(obj, ("flows", "link"), where, required=("flows", "link"))
    _check_keys(obj["link"], ("curve", "l_max"), f"{where}: link", required=("curve",))
    C = _curve(obj["link"]["curve"], f"{where}: link.curve", MINPLUS)
    flows = []
    if not isinstance(obj["flows"], list) or not obj["flows"]:
        raise InputError(f"{where}: flows must be a nonempty list")
    for i, f in enumerate(obj["flows"]):
        loc = f"{where}: flows[{i}]"
        _check_keys(f, ("id", "envelope", "service", "max_packet"), loc, required=("id", "service"))
        env = _curve(f["envelope"], f"{loc}.envelope", MINPLUS) if "envelope" in f else None
        try:
            flows.append(FlowSpec(str(f["id"]), _curve(f["service"], f"{loc}.service", MINPLUS),
                                  env, float(f.get("max_packet", 0.0))))
        except (ValueError, TypeError) as exc:
            raise InputError(f"{loc}: {exc}") from None
    l_max = obj["link"].get("l_max")
    l_max = max(f.max_packet for f in flows) if l_max is None else float(l_max)
    return flows, C, l_max


def cmd_admit(args) -> int:
    flows, C, l_max = _flowset(load_json(args.input), args.input)
    tol = args.tolerance if args.tolerance is not None else 1e-9
    if args.test == "necessary":
        if len(C.segments) != 1 or C.segments[0][1] != 0.0 or C.inf_at is not None:
            raise InputError(f"{args.input}: the necessary test needs a constant-rate link curve")
        verdict = _guard(lambda: necessary_condition(flows, C.segments[0][2], tol))
    elif args.test == "curve-only" or any(f.envelope is None for f in flows):
        verdict = schedulable_curve_only([f.service for f in flows], C, l_max, tol)
    else:
        verdict = schedulable_sufficient(flows, C, l_max, tol)
    out = verdict.to_dict()
    out["test"] = args.test if all(f.envelope is not None for f in flows) else "curve-only"
    out["l_max"] = l_max
    _write(args.output, dump_json(out))
    return EXIT_OK if verdict.admitted else EXIT_NEGATIVE


def _guard(fn):
    try:
        return fn()
    except ValueError as exc:
        raise InputError(str(exc)) from None


# ----------------------------------------------------------------------
# deadline / shape
# ----------------------------------------------------------------------

def _curve_for(spec, stream: ArrivalStream):
    """Deadlines for one flow, using the busy-period engine when the kind allows it."""
    kind = spec.get("kind") if isinstance(spec, dict) else None
    if kind == "rate":
        return assign_deadline_rate(stream, float(spec["R"]))
    if kind == "latency_rate":
        return assign_deadline_latency_rate(stream, float(spec["R"]), float(spec["d"]))
    if kind == "convex":
        return assign_deadline_convex(stream, [ConvexSegmentSpec(float(r), float(e))
                                               for r, e in spec["segments"]])
    return deadline_oracle(stream, _curve(spec, "curve", MAXPLUS))


def _curve_table(obj, flows, where: str) -> dict:
    if isinstance(obj, dict) and ("kind" in obj or "role" in obj):
        return {fid: obj for fid in flows}
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected a curve or an object keyed by flow id")
    missing = [fid for fid in flows if fid not in obj]
    if missing:
        raise InputError(f"{where}: no curve for flows {missing}")
    return obj


def cmd_deadline(args) -> int:
    streams = read_trace(args.input)
    table = _curve_table(load_json(args.curve), streams, args.curve)
    rows, prows = [], []
    for fid, stream in streams.items():
        spec = table[fid]
        _curve(spec, f"{args.curve}: {fid}", MAXPLUS)
        trace = _guard(lambda: _curve_for(spec, stream))
        rows.extend((fid,) + r for r in trace.rows())
        if args.packet_output:
            if spec.get("kind") != "rate":
                raise InputError(f"{args.curve}: packet deadlines need a rate curve")
            pd = packet_deadlines_virtualclock(stream.packets(), float(spec["R"]))
            prows.extend((fid, n + 1, d) for n, d in enumerate(pd.packet_deadlines))
    _write(args.output, _csv_text(SEGMENT_FIELDS, rows))
    if args.packet_output:
        _write(args.packet_output, _csv_text(PACKET_FIELDS, prows))
    return EXIT_OK


def cmd_shape(args) -> int:
    streams = read_trace(args.input)
    spec = _guard(lambda: TokenBucketSpec(args.rate, args.burst))
    rows = []
    for fid, stream in streams.items():
        rows.extend((fid,) + r for r in shaper_release(stream, spec).rows())
    _write(args.output, _csv_text(SEGMENT_FIELDS, rows))
    return EXIT_OK


# ----------------------------------------------------------------------
# simulate
# ----------------------------------------------------------------------

SIM_KEYS = ("link", "flows", "scheduling", "horizon", "deadline_mode", "tolerance", "runs")
FLOW_KEYS = ("id", "service", "envelope", "max_packet", "gamma", "arrivals")


def _link(obj, where: str) -> LinkModel:
    _check_keys(obj, ("rate", "profile", "strict_curve"), where)
    strict = _curve(obj["strict_curve"], f"{where}.strict_curve", MINPLUS) if "strict_curve" in obj else None
    profile = tuple(tuple(p) for p in obj["profile"]) if "profile" in obj else None
    try:
        return LinkModel(obj.get("rate"), profile, strict)
    except (ConfigError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from None


def _arrivals(obj, spec: FlowSpec, horizon: float, rng, base: Path, where: str) -> ArrivalStream:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object")
    if "trace" in obj:
        _check_keys(obj, ("trace", "packet_sizes"), where)
        try:
            return ArrivalStream(tuple((float(t), float(a)) for t, a in obj["trace"]),
                                 obj.get("packet_sizes"))
        except (StreamError, TypeError, ValueError) as exc:
            raise InputError(f"{where}: {exc}") from None
    if "csv" in obj:
        _check_keys(obj, ("csv",), where)
        streams = read_trace(str(base / obj["csv"]))
        if spec.id not in streams:
            raise InputError(f"{where}: flow {spec.id!r} missing from {obj['csv']}")
        return streams[spec.id]
    gen = obj.get("generator")
    if spec.envelope is None:
        raise InputError(f"{where}: generators need an envelope")
    if gen == "saturating":
        _check_keys(obj, ("generator", "delta", "packet_size"), where)
        return _guard(lambda: saturating_arrivals(spec.envelope, horizon, float(obj.get("delta", 0.01)),
                                                  obj.get("packet_size")))
    if gen == "conforming":
        _check_keys(obj, ("generator", "packet_range", "mean_gap"), where)
        lo, hi = obj.get("packet_range", (0.2, spec.max_packet or 1.0))
        return _guard(lambda: conforming_arrivals(spec.envelope, horizon, rng, (float(lo), float(hi)),
                                                  float(obj.get("mean_gap", 1.0))))
    raise InputError(f"{where}: arrivals need trace, csv or generator")


def build_config(obj, seed: int, base: Path, where: str = "config",
                 horizon: float | None = None, tolerance: float | None = None) -> SimConfig:
    _check_keys(obj, SIM_KEYS, where, required=("link", "flows"))
    horizon = float(horizon if horizon is not None else obj.get("horizon", 100.0))
    rng = np.random.default_rng(seed)
    link = _link(obj["link"], f"{where}: link")
    flows = []
    for i, f in enumerate(obj["flows"]):
        loc = f"{where}: flows[{i}]"
        _check_keys(f, FLOW_KEYS, loc, required=("id", "service", "arrivals"))
        env = _curve(f["envelope"], f"{loc}.envelope", MINPLUS) if "envelope" in f else None
        spec = FlowSpec(str(f["id"]), _curve(f["service"], f"{loc}.service", MINPLUS), env,
                        float(f.get("max_packet", 0.0)))
        gamma = _curve(f["gamma"], f"{loc}.gamma", MAXPLUS) if "gamma" in f else None
        stream = _arrivals(f["arrivals"], spec, horizon, rng, base, f"{loc}.arrivals")
        flows.append(SimFlow(spec, stream, gamma))
    try:
        return SimConfig(tuple(flows), link, obj.get("scheduling", PACKET), horizon, seed,
                         float(tolerance if tolerance is not None else obj.get("tolerance", 1e-9)),
                         obj.get("deadline_mode", "oracle"))
    except (ConfigError, TypeError, ValueError) as exc:
        raise InputError(f"{where}: {exc}") from None


def _simulate_one(job):
    obj, seed, base, where, horizon, tolerance = job
    report = run(build_config(obj, seed, Path(base), where, horizon, tolerance))
    out = report.to_dict()
    out["seed"] = seed
    return out, report.timeseries_rows()


def cmd_simulate(args) -> int:
    obj = load_json(args.input)
    base = Path(args.input).resolve().parent if args.input != "-" else Path.cwd()
    runs = int(obj.get("runs", 1)) if isinstance(obj, dict) else 1
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(args.seed).spawn(runs)] \
        if runs > 1 else [args.seed]
    jobs = [(obj, s, str(base), args.input, args.horizon, args.tolerance) for s in seeds]
    if args.parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.parallel) as pool:
            results = list(pool.map(_simulate_one, jobs))
    else:
        results = [_simulate_one(j) for j in jobs]
    reports = [r for r, _ in results]
    doc = reports[0] if runs == 1 else {"runs": reports}
    _write(args.output, dump_json(doc))
    if args.timeseries:
        rows = [(i,) + row for i, (_, ts) in enumerate(results) for row in ts]
        _write(args.timeseries, _csv_text(("run", "time", "flow_id", "arrivals", "departures", "backlog"),
                                          rows))
    bad = any(r["violation_count"] or not r["service_curves_verified"] for r in reports)
    return EXIT_NEGATIVE if bad else EXIT_OK


# ----------------------------------------------------------------------
# selftest
# ----------------------------------------------------------------------

def cmd_selftest(args) -> int:
    from .testing import run_selftest
    results = run_selftest(np.random.default_rng(args.seed), args.count)
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return EXIT_OK if ok else EXIT_NEGATIVE


# ----------------------------------------------------------------------
# entry point
# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fluidsced", description="SCED deadlines, admission and simulation")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out=True):
        sp.add_argument("--input", "-i", required=True, help="input file ('-' for stdin)")
        if out:
            sp.add_argument("--output", "-o", help="output file (default stdout)")
        sp.add_argument("--tolerance", type=float)
        sp.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("admit", help="schedulability test for a flow set")
    common(a)
    a.add_argument("--test", choices=("sufficient", "curve-only", "necessary"), default="sufficient")
    a.set_defaults(func=cmd_admit)

    d = sub.add_parser("deadline", help="assign SCED deadlines to a trace")
    common(d)
    d.add_argument("--curve", required=True, help="max-plus curve JSON (or object keyed by flow id)")
    d.add_argument("--packet-output", help="also write VirtualClock packet deadlines")
    d.set_defaults(func=cmd_deadline)

    s = sub.add_parser("shape", help="token-bucket shaper release times")
    common(s)
    s.add_argument("--rate", type=float, required=True)
    s.add_argument("--burst", type=float, default=0.0)
    s.set_defaults(func=cmd_shape)

    m = sub.add_parser("simulate", help="run the link simulator")
    common(m)
    m.add_argument("--horizon", type=float)
    m.add_argument("--timeseries", help="CSV time series of arrivals, departures and backlog")
    m.add_argument("--parallel", type=int, default=1, help="worker processes for multi-run configs")
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("selftest", help="run the built-in property checks")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--count", type=int, default=50, help="random cases per check")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CurveError, StreamError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
