"""Command-line entry point: ``twoline-parking {ode,simulate,oracle,compare,replay}``.

Every run writes its CSV/JSON outputs plus a manifest recording the exact
argument list, so ``twoline-parking replay <manifest>`` reproduces it.
Exit codes: 0 success, 1 a comparison failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from . import __version__
from . import analysis
from . import oracle as oracle_mod
from .core import ModelVariant
from .ode import DEFAULT_STEP, DEFAULT_T_MAX, OdeSpec, extract_limits, integrate, residual_drift
from .simulator import SimConfig, parse_pattern, pattern_name, simulate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

ODE_COLUMNS = ["t", "D0", "D1", "D2", "D3", "f0", "f1", "f2", "R", "D010", "line1", "line2"]

COMPARE_DEFAULTS = {
    "oracle": {"sites": 6, "replicas": 100_000, "times": "0.5,1,2,5", "patterns": ["0,1,0", "0,0,0", "1,0,1"], "frozen": None},
    "ode": {"sites": 10_000, "replicas": 100, "times": None, "patterns": [], "frozen": None},
    "closed-form": {"sites": 200, "replicas": 20_000, "times": "0.5,1,2", "patterns": [], "frozen": "0"},
}


class ConfigError(Exception):
    pass


def fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _write_json(path: Path, payload) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(subcommand: str, argv, config: dict, outputs) -> dict:
    return {
        "tool": "twoline-parking",
        "version": __version__,
        "subcommand": subcommand,
        "argv": list(argv),
        "config": config,
        "outputs": [str(p) for p in outputs],
    }


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"malformed list of times {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"malformed list of site indices {text!r}") from None


def _patterns(items) -> tuple[tuple[int, ...], ...]:
    try:
        return tuple(parse_pattern(p) for p in items or ())
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _sidecar(out: Path) -> Path:
    return out.with_suffix(".json")


def cmd_ode(args, argv) -> int:
    try:
        spec = OdeSpec(args.model, args.t_max, args.step, args.stride)
        _ = spec.n_steps
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    traj = integrate(spec)
    rows = [[t, *state, state[1] + state[3], state[2] + state[3]] for t, state in zip(traj.times, traj.states)]
    out = Path(args.out)
    _write_csv(out, ODE_COLUMNS, rows)
    end = traj.state(-1)
    summary = {
        "line1": end.line1,
        "line2": end.line2,
        "increase_factor": analysis.increase_factor(end.line1, end.line2) if end.line1 > 0 else None,
    }
    try:
        summary.update(extract_limits(traj).as_dict())
    except ValueError as exc:
        # short horizons still get endpoint values, just without a stationarity certificate
        summary["residual_drift"] = residual_drift(spec.model, float(traj.times[-1]), end)
        summary["warning"] = str(exc)
    config = {"model": spec.model.value, "t_max": spec.t_max, "step": spec.step, "record_stride": spec.record_stride}
    payload = {"summary": summary, "manifest": _manifest("ode", argv, config, [out, _sidecar(out)])}
    _write_json(_sidecar(out), payload)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _sim_config(args, replicas, sites, times_text, frozen_text, pattern_items) -> SimConfig:
    times = _float_list(times_text) if times_text else None
    frozen = tuple(_int_list(frozen_text)) if frozen_text else ()
    t_max = args.t_max
    if t_max is None:
        t_max = max(times) if times else 15.0
    try:
        return SimConfig(
            size=sites,
            t_max=t_max,
            model=args.model,
            master_seed=args.seed,
            replicas=replicas,
            sample_times=times,
            frozen_sites=frozen,
            patterns=_patterns(pattern_items),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _sim_config_dict(cfg: SimConfig) -> dict:
    return {
        "model": cfg.model.value,
        "sites": cfg.size,
        "t_max": cfg.t_max,
        "replicas": cfg.replicas,
        "seed": cfg.master_seed,
        "sample_times": list(cfg.sample_times),
        "frozen_sites": list(cfg.frozen_sites),
        "patterns": [list(p) for p in cfg.patterns],
    }


def cmd_simulate(args, argv) -> int:
    cfg = _sim_config(args, args.replicas, args.sites, args.times, args.frozen, args.patterns)
    result = simulate(cfg, jobs=args.jobs)
    means, errs = result.summary()
    header = ["t"]
    for name in result.names:
        header += [f"{name}_mean", f"{name}_stderr"]
    rows = []
    for t, m, e in zip(cfg.sample_times, means, errs):
        row = [t]
        for a, b in zip(m, e):
            row += [a, b]
        rows.append(row)
    out = Path(args.out)
    _write_csv(out, header, rows)
    _write_json(_sidecar(out), {"manifest": _manifest("simulate", argv, _sim_config_dict(cfg), [out, _sidecar(out)])})
    return EXIT_OK


def cmd_oracle(args, argv) -> int:
    times = _float_list(args.times)
    patterns = _patterns(args.patterns)
    try:
        gen = oracle_mod.build_generator(args.model, args.sites)
        dists = oracle_mod.evolve_many(gen, times)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    header = ["t", "D0", "D1", "D2", "D3"] + [pattern_name(p) for p in patterns] + ["line1", "line2"]
    rows = []
    for dist in dists:
        site = oracle_mod.site_densities(dist)
        row = [dist.time, *site]
        try:
            row += [oracle_mod.marginals(dist, p) for p in patterns]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        row += [site[1] + site[3], site[2] + site[3]]
        rows.append(row)
    out = Path(args.out)
    _write_csv(out, header, rows)
    config = {"model": gen.model.value, "sites": gen.size, "times": times, "patterns": [list(p) for p in patterns]}
    _write_json(_sidecar(out), {"manifest": _manifest("oracle", argv, config, [out, _sidecar(out)])})
    return EXIT_OK


def cmd_compare(args, argv) -> int:
    defaults = COMPARE_DEFAULTS[args.reference]
    sites = args.sites if args.sites is not None else defaults["sites"]
    replicas = args.replicas if args.replicas is not None else defaults["replicas"]
    frozen = args.frozen if args.frozen is not None else defaults["frozen"]
    patterns = args.patterns if args.patterns is not None else defaults["patterns"]
    times = args.times if args.times is not None else defaults["times"]
    if times is None:
        times = str(args.t_max if args.t_max is not None else 15.0)
    cfg = _sim_config(args, replicas, sites, times, frozen, patterns)
    if replicas < 2:
        raise ConfigError("comparisons need at least two replicas")

    sim = simulate(cfg, jobs=args.jobs)
    try:
        if args.reference == "oracle":
            reports = analysis.compare_with_oracle(sim, args.z_threshold, args.abs_floor)
        elif args.reference == "ode":
            spec = OdeSpec(cfg.model, max(cfg.sample_times), args.step, 1)
            reports = analysis.compare_with_ode(sim, integrate(spec), args.z_threshold, args.abs_floor)
        else:
            reports = analysis.compare_with_closed_form(sim, args.z_threshold, args.abs_floor)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None

    ok = analysis.all_passed(reports)
    config = _sim_config_dict(cfg) | {
        "reference": args.reference,
        "z_threshold": args.z_threshold,
        "abs_floor": args.abs_floor,
        "step": args.step,
    }
    payload = {
        "all_passed": ok,
        "reports": [r.as_dict() for r in reports],
        "manifest": _manifest("compare", argv, config, [args.out] if args.out else []),
    }
    if args.out:
        _write_json(Path(args.out), payload)
    for r in reports:
        z = f"{r.z_score:+.2f}" if abs(r.z_score) < 1e6 else str(r.z_score)
        print(f"{r.verdict.upper():4s} {r.observable:18s} t={r.time:<6g} ref={r.reference:.6f} "
              f"est={r.estimate.mean:.6f}±{r.estimate.stderr:.2g} z={z} {r.note}".rstrip())
    n_fail = sum(not r.passed for r in reports)
    print(f"{len(reports) - n_fail}/{len(reports)} comparisons passed")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_replay(args, argv) -> int:
    try:
        with open(args.manifest) as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {args.manifest}: {exc}") from None
    manifest = payload.get("manifest", payload)
    if "argv" not in manifest:
        raise ConfigError("manifest has no argv record")
    return main(manifest["argv"])


def _add_model(p):
    p.add_argument("--model", default="noscreening", choices=[m.value for m in ModelVariant])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoline-parking", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ode", help="integrate the closed ODE system and write the trajectory")
    _add_model(p)
    p.add_argument("--t-max", type=float, default=DEFAULT_T_MAX)
    p.add_argument("--step", type=float, default=DEFAULT_STEP)
    p.add_argument("--stride", type=int, default=10, help="record every STRIDE steps")
    p.add_argument("--out", required=True, help="trajectory CSV; the summary goes next to it as .json")
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("simulate", help="kinetic Monte Carlo on a ring, replica-aggregated")
    _add_model(p)
    p.add_argument("--sites", type=int, default=10_000)
    p.add_argument("--t-max", type=float, default=None, help="default 15, or the last --times value")
    p.add_argument("--replicas", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--times", default=None, help="comma-separated sample times (default every 0.25)")
    p.add_argument("--frozen", default=None, help="comma-separated frozen site indices")
    p.add_argument("--patterns", nargs="*", default=[], help='local patterns such as "0,1,0"')
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="exact marginals on a small ring (3..8 sites)")
    _add_model(p)
    p.add_argument("--sites", type=int, required=True)
    p.add_argument("--times", default="0,0.5,1,2,5")
    p.add_argument("--patterns", nargs="*", default=[])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="simulate and test against a reference; exit 1 on any failure")
    p.add_argument("--reference", choices=sorted(COMPARE_DEFAULTS), required=True)
    _add_model(p)
    p.add_argument("--sites", type=int, default=None)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--times", default=None)
    p.add_argument("--frozen", default=None)
    p.add_argument("--patterns", nargs="*", default=None)
    p.add_argument("--z-threshold", type=float, default=analysis.DEFAULT_Z_THRESHOLD)
    p.add_argument("--abs-floor", type=float, default=analysis.DEFAULT_ABS_FLOOR)
    p.add_argument("--step", type=float, default=DEFAULT_STEP, help="ODE step for --reference ode")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default=None, help="JSON report path")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
