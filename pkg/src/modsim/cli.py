"""Command-line front end.

One YAML config file describes a study: where the network lives, how demand
and stations are obtained, how the fleet is stocked, and the scenario
parameters.  Subcommands run the pieces::

    modsim simulate       --config study.yaml --out results/
    modsim sweep          --config study.yaml --q-max 420,600,720,900 --out results/
    modsim gen-demand     --config study.yaml --out inputs/
    modsim build-stations --config study.yaml --out inputs/
    modsim calibrate      --config study.yaml --out inputs/
    modsim size-fleet     --config study.yaml --out inputs/
    modsim analyze        --config study.yaml --trace results/trace --out reports/

`--seed N` overrides every generation seed in the config (demand, station
placement, estimator sampling).  Every command writes a `manifest.json`
recording input digests, seeds, and produced artifacts; manifests contain no
timestamps, so reruns of identical inputs are byte-identical.  Exit codes:
0 on success, 1 for config or input problems, 2 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from dataclasses import replace

import yaml

from . import __version__
from .analysis import (
    edge_densities,
    occupancy_series,
    summarize,
    summary_to_dict,
    write_density_csv,
    write_density_histogram_csv,
    write_occupancy_csv,
)
from .demand import DemandCluster, DemandConfig, DemandError, generate_demand, \
    load_requests, write_requests
from .rebalancing import compute_targets
from .road_network import CalibrationError, NetworkError, calibrate_estimator, \
    load_network
from .sim_engine import ScenarioConfig, SimulationError, run_scenario
from .stations import (
    StationError,
    average_access_time,
    build_stations,
    demand_weights,
    load_stations,
    size_fleet,
    write_stations,
)
from .traceio import read_trace, write_trace

__all__ = ["main", "ConfigError"]


class ConfigError(ValueError):
    pass


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        workspace = _Workspace(config, args.config, args.seed)
    except _CONFIG_FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)
    try:
        _COMMANDS[args.command](args, workspace)
    except _CONFIG_FAILURES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modsim",
        description="Station-based mobility-on-demand scenario simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text, **extra_flags):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="study config (YAML)")
        cmd.add_argument("--out", default=".", help="output directory")
        cmd.add_argument("--seed", type=int, default=None,
                         help="override all generation seeds")
        for flag, kwargs in extra_flags.items():
            cmd.add_argument(flag, **kwargs)
        return cmd

    add("simulate", "run the configured scenario and write trace + reports")
    add("sweep", "repeat the rideshare scenario across travel-delay bounds",
        **{"--q-max": dict(required=True, dest="q_max_list",
                           help="comma-separated delay bounds in seconds")})
    add("gen-demand", "generate synthetic requests from the demand mixture")
    add("build-stations", "place stations by clustering the demand")
    add("calibrate", "fit the travel-time estimator and write it out")
    add("size-fleet",
        "find the smallest fleet serving every request without ridesharing")
    add("analyze", "recompute reports from an existing trace",
        **{"--trace": dict(required=True, help="trace directory or .jsonl file")})
    return parser


def _load_config(path) -> dict:
    try:
        with open(path) as handle:
            config = yaml.safe_load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})")
    if not isinstance(config, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return config


class _Workspace:
    """Lazily builds study objects from the config, resolving paths and seeds."""

    def __init__(self, config, config_path, seed_override):
        self.config = config
        self.config_path = config_path
        self.base_dir = os.path.dirname(os.path.abspath(config_path))
        self.seed_override = seed_override
        self.seeds: dict[str, int] = {}
        self.inputs: dict[str, str] = {"config": config_path}
        self._network = None
        self._estimator = None
        self._requests = None
        self._layout = None

    def path(self, rel) -> str:
        return os.path.join(self.base_dir, rel) if not os.path.isabs(rel) else rel

    def section(self, name, required=True) -> dict:
        value = self.config.get(name)
        if value is None:
            if required:
                raise ConfigError(f"config needs a '{name}' section")
            return {}
        if not isinstance(value, dict):
            raise ConfigError(f"config section '{name}' must be a mapping")
        return value

    def seed(self, label, configured) -> int:
        value = self.seed_override if self.seed_override is not None else configured
        self.seeds[label] = int(value)
        return int(value)

    @property
    def network(self):
        if self._network is None:
            section = self.section("network")
            for key in ("nodes", "segments"):
                if key not in section:
                    raise ConfigError(f"network section needs '{key}'")
            self.inputs["nodes"] = section["nodes"]
            self.inputs["segments"] = section["segments"]
            self._network = load_network(self.path(section["nodes"]),
                                         self.path(section["segments"]))
        return self._network

    @property
    def estimator(self):
        if self._estimator is None:
            section = self.section("estimator", required=False)
            samples = int(section.get("samples", 100))
            seed = self.seed("estimator", section.get("seed", 0))
            self._estimator = calibrate_estimator(self.network, samples, seed)
        return self._estimator

    @property
    def requests(self):
        if self._requests is None:
            section = self.section("demand")
            if "requests" in section:
                self.inputs["requests"] = section["requests"]
                self._requests, rejected = load_requests(
                    self.path(section["requests"]), self.network)
                if rejected:
                    print(f"note: {rejected} request rows rejected")
            elif "generate" in section:
                self._requests = generate_demand(self.demand_config, self.network)
            else:
                raise ConfigError("demand section needs 'requests' or 'generate'")
        return self._requests

    @property
    def demand_config(self) -> DemandConfig:
        section = self.section("demand")
        gen = section.get("generate")
        if not isinstance(gen, dict):
            raise ConfigError("demand section needs a 'generate' mapping")
        try:
            return DemandConfig(
                start=float(gen["start_s"]),
                end=float(gen["end_s"]),
                request_count=int(gen["request_count"]),
                origin_clusters=_clusters(gen.get("origin_clusters")
                                          or gen.get("clusters")),
                destination_clusters=_clusters(gen.get("destination_clusters"))
                if gen.get("destination_clusters") else None,
                seed=self.seed("demand", gen.get("seed", 0)),
                uniform_arrivals=bool(gen.get("uniform_arrivals", True)),
            )
        except KeyError as exc:
            raise ConfigError(f"demand.generate missing {exc}")

    @property
    def layout(self):
        if self._layout is None:
            section = self.section("stations")
            if "file" in section:
                self.inputs["stations"] = section["file"]
                layout = load_stations(self.path(section["file"]), self.network)
            elif "build" in section:
                build = section["build"]
                if not isinstance(build, dict) or "n" not in build:
                    raise ConfigError("stations.build needs 'n'")
                points = _demand_points(self.requests, self.network)
                layout = build_stations(
                    points, int(build["n"]),
                    self.seed("stations", build.get("seed", 0)), self.network)
            else:
                raise ConfigError("stations section needs 'file' or 'build'")
            self._layout = self._stock(layout)
        return self._layout

    def _stock(self, layout):
        fleet = self.section("fleet", required=False)
        choices = [k for k in ("total", "size", "from_stations") if fleet.get(k)]
        if len(choices) > 1:
            raise ConfigError("fleet section: pick one of total/size/from_stations")
        if fleet.get("total"):
            weights = demand_weights(layout, self.requests, self.network)
            return layout.with_stocks(compute_targets(weights, int(fleet["total"])))
        if fleet.get("size"):
            scenario = self.scenario_config
            stocks = size_fleet(
                self.network, self.requests, layout,
                sim_start=scenario.sim_start, end=scenario.end,
                rebalancing_period=scenario.rebalancing_period,
                service_time=scenario.service_time, estimator=self.estimator)
            return layout.with_stocks(stocks)
        return layout  # stocks as loaded (or zero for freshly built stations)

    @property
    def scenario_config(self) -> ScenarioConfig:
        section = self.section("scenario")
        if "mode" not in section or "end_s" not in section:
            raise ConfigError("scenario section needs 'mode' and 'end_s'")
        period = section.get("rebalancing_period_s", 600)
        capacity = section.get("vehicle_capacity")
        try:
            return ScenarioConfig(
                mode=str(section["mode"]),
                end=float(section["end_s"]),
                sim_start=float(section.get("sim_start_s", 0)),
                stat_start=float(section.get("stat_start_s",
                                             section.get("sim_start_s", 0))),
                q_max=(float(section["q_max_s"])
                       if section.get("q_max_s") is not None else None),
                rebalancing_period=float(period) if period is not None else None,
                service_time=float(section.get("service_time_s", 0)),
                vehicle_capacity=int(capacity) if capacity is not None else None,
            )
        except SimulationError as exc:
            raise ConfigError(f"scenario section: {exc}") from exc


def _clusters(raw) -> tuple[DemandCluster, ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError("cluster list must be a non-empty sequence")
    out = []
    for item in raw:
        try:
            out.append(DemandCluster(
                x=float(item["x"]), y=float(item["y"]),
                weight=float(item["weight"]),
                spread=float(item.get("spread", 0.0)),
            ))
        except (TypeError, KeyError) as exc:
            raise ConfigError(f"bad cluster entry {item!r} ({exc})")
    return tuple(out)


def _demand_points(requests, network):
    points = []
    for req in requests:
        points.append(network.position(req.origin))
        points.append(network.position(req.destination))
    return points


# Input and configuration problems exit 1; anything else that escapes a
# command handler is a runtime failure and exits 2.
_CONFIG_FAILURES: tuple = (
    ConfigError,
    FileNotFoundError,
    NetworkError,
    CalibrationError,
    DemandError,
    StationError,
)


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, command, workspace, artifacts) -> None:
    manifest = {
        "tool": {"name": "modsim", "version": __version__},
        "command": command,
        "inputs": {
            role: {"path": rel, "sha256": _sha256(workspace.path(rel))}
            for role, rel in sorted(workspace.inputs.items())
        },
        "seeds": dict(sorted(workspace.seeds.items())),
        "artifacts": dict(sorted(artifacts.items())),
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_reports(trace, network, out_dir) -> dict:
    summary = summarize(trace, network)
    density = edge_densities(trace, network)
    occupancy = occupancy_series(trace, interval=_occupancy_interval(summary.window))
    with open(os.path.join(out_dir, "summary.json"), "w") as handle:
        json.dump(summary_to_dict(summary), handle, indent=2, sort_keys=True)
        handle.write("\n")
    write_density_csv(density, network, os.path.join(out_dir, "density.csv"))
    write_density_histogram_csv(
        density, os.path.join(out_dir, "density_histogram.csv"))
    write_occupancy_csv(occupancy, os.path.join(out_dir, "occupancy.csv"))
    for line in (
        f"mode: {summary.mode}",
        f"window_s: [{summary.window[0]}, {summary.window[1]})",
        f"total_distance_km: {summary.total_distance_km:.3f}",
        f"mean_occupancy: {summary.mean_occupancy:.3f}",
        f"served: {summary.served}  unserved: {summary.unserved}",
        f"congested_segments: {summary.congested_segments}",
        f"heavily_loaded_segments: {summary.heavily_loaded_segments}",
    ):
        print(line)
    return {
        "summary": "summary.json",
        "density": "density.csv",
        "density_histogram": "density_histogram.csv",
        "occupancy": "occupancy.csv",
    }


def _occupancy_interval(window) -> float:
    span = window[1] - window[0]
    steps = span / 60.0
    if abs(steps - round(steps)) < 1e-9 and round(steps) >= 1:
        return 60.0
    return span / 60.0


def _cmd_simulate(args, workspace) -> None:
    scenario = workspace.scenario_config
    trace = run_scenario(
        scenario, workspace.network, workspace.requests,
        workspace.layout if scenario.mode != "present" else None,
        estimator=workspace.estimator if scenario.mode != "present" else None,
    )
    fmt = workspace.section("output", required=False).get("trace_format", "csv")
    trace_name = "trace" if fmt == "csv" else "trace.jsonl"
    write_trace(trace, os.path.join(args.out, trace_name), fmt)
    artifacts = {"trace": trace_name}
    artifacts.update(_write_reports(trace, workspace.network, args.out))
    _write_manifest(args.out, "simulate", workspace, artifacts)


def _cmd_sweep(args, workspace) -> None:
    scenario = workspace.scenario_config
    if scenario.mode != "mod_rideshare":
        raise ConfigError("sweep needs scenario.mode == mod_rideshare")
    try:
        bounds = [float(v) for v in args.q_max_list.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --q-max list ({exc})")
    if not bounds:
        raise ConfigError("--q-max list is empty")

    rows = []
    failures = 0
    for q_max in bounds:
        try:
            run_config = replace(scenario, q_max=q_max)
            trace = run_scenario(run_config, workspace.network,
                                 workspace.requests, workspace.layout,
                                 estimator=workspace.estimator)
            summary = summarize(trace, workspace.network)
            rows.append([q_max, summary.served, summary.unserved,
                         repr(summary.mean_occupancy),
                         repr(summary.total_distance_km), "ok"])
            print(f"q_max={q_max:g}s: occupancy {summary.mean_occupancy:.3f}, "
                  f"distance {summary.total_distance_km:.3f} km")
        except Exception as exc:  # noqa: BLE001 - flagged per-run below
            failures += 1
            rows.append([q_max, "", "", "", "", f"failed: {exc}"])
            print(f"q_max={q_max:g}s: FAILED ({exc})", file=sys.stderr)

    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["q_max_s", "served", "unserved", "mean_occupancy",
                         "total_distance_km", "status"])
        writer.writerows(rows)
    _write_manifest(args.out, "sweep", workspace, {"sweep": "sweep.csv"})
    if failures:
        raise RuntimeError(f"{failures} of {len(bounds)} sweep runs failed "
                           f"(partial results in sweep.csv)")


def _cmd_gen_demand(args, workspace) -> None:
    requests = generate_demand(workspace.demand_config, workspace.network)
    write_requests(os.path.join(args.out, "requests.csv"), requests)
    print(f"generated {len(requests)} requests")
    _write_manifest(args.out, "gen-demand", workspace,
                    {"requests": "requests.csv"})


def _cmd_build_stations(args, workspace) -> None:
    layout = workspace.layout
    write_stations(layout, os.path.join(args.out, "stations.csv"))
    access = average_access_time(layout, workspace.requests, workspace.network,
                                 workspace.estimator)
    print(f"stations: {layout.n}")
    print(f"average_station_to_origin_s: {access:.1f}")
    _write_manifest(args.out, "build-stations", workspace,
                    {"stations": "stations.csv"})


def _cmd_calibrate(args, workspace) -> None:
    estimator = workspace.estimator
    payload = {
        "intercept_s": estimator.intercept,
        "slope_s_per_m": estimator.slope,
        "rms_error_s": estimator.calibration_error,
    }
    with open(os.path.join(args.out, "estimator.json"), "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    print(f"intercept_s: {estimator.intercept:.3f}")
    print(f"slope_s_per_m: {estimator.slope:.6f}")
    print(f"rms_error_s: {estimator.calibration_error:.3f}")
    _write_manifest(args.out, "calibrate", workspace,
                    {"estimator": "estimator.json"})


def _cmd_size_fleet(args, workspace) -> None:
    scenario = workspace.scenario_config
    layout = workspace.layout
    stocks = size_fleet(
        workspace.network, workspace.requests, layout,
        sim_start=scenario.sim_start, end=scenario.end,
        rebalancing_period=scenario.rebalancing_period,
        service_time=scenario.service_time, estimator=workspace.estimator)
    sized = layout.with_stocks(stocks)
    write_stations(sized, os.path.join(args.out, "stations_sized.csv"))
    print(f"fleet_size: {sum(stocks)}")
    print(f"stocks: {stocks}")
    _write_manifest(args.out, "size-fleet", workspace,
                    {"stations_sized": "stations_sized.csv"})


def _cmd_analyze(args, workspace) -> None:
    trace = read_trace(args.trace)
    artifacts = _write_reports(trace, workspace.network, args.out)
    _write_manifest(args.out, "analyze", workspace, artifacts)


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "gen-demand": _cmd_gen_demand,
    "build-stations": _cmd_build_stations,
    "calibrate": _cmd_calibrate,
    "size-fleet": _cmd_size_fleet,
    "analyze": _cmd_analyze,
}


if __name__ == "__main__":
    sys.exit(main())
