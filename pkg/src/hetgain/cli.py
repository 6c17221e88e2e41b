"""Command-line front end.

Subcommands: curvature, gain, train, hetgps, casestudy.  Every run resolves
its configuration from defaults, an optional flat ``key = value`` config
file, and command-line flags (flags win), then writes a manifest echoing the
fully resolved config so reruns are reproducible.  Exit codes: 0 success,
2 config error, 3 size-guard error, 4 numerical-domain error.
"""

from __future__ import annotations

import argparse
import io
import json
import multiprocessing
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, curvature, gains, oracle
from .aggregators import AggregatorSpec, Family
from .envs import EnvTheta, trace_to_csv
from .errors import ConfigError, DomainError, HetgainError, SizeGuardError
from .gains import CONTINUOUS, DISCRETE, RewardStructure
from .hetgps import HetgpsConfig, Regime, run_hetgps
from .learn import EnvSpec, train_gain

PLAIN_NAMES = ("min", "mean", "max")


# ---------------------------------------------------------------------------
# config machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Option:
    name: str
    kind: str  # int | float | str | bool | seeds
    default: object
    help: str = ""


def _parse_value(opt: Option, raw):
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if opt.kind == "int":
            return int(raw)
        if opt.kind == "float":
            return float(raw)
        if opt.kind == "bool":
            if isinstance(raw, bool):
                return raw
            return str(raw).lower() in ("1", "true", "yes", "on")
        if opt.kind == "seeds":
            return parse_seeds(raw)
        return str(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {opt.name!r}: {raw!r}") from exc


def parse_seeds(text) -> list:
    """Seed list syntax: ``a..b`` inclusive, comma list, or single int."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(chunk) for chunk in text.split(",") if chunk.strip() != ""]


def parse_config_file(path: str) -> dict:
    """Flat ``key = value`` lines with ``#`` comments."""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        values[key.strip()] = value.strip()
    return values


def resolve_config(options: list, file_values: dict, cli_values: dict) -> dict:
    """defaults < config file < explicit CLI flags; unknown keys rejected."""
    by_name = {o.name: o for o in options}
    for key in file_values:
        if key not in by_name:
            raise ConfigError(f"unknown config key {key!r}")
    resolved = {o.name: o.default for o in options}
    for key, raw in file_values.items():
        resolved[key] = _parse_value(by_name[key], raw)
    for key, value in cli_values.items():
        if value is not None:
            resolved[key] = _parse_value(by_name[key], value)
    return resolved


def default_out_root() -> Path:
    return Path(os.environ.get("HETGAIN_OUT", "runs"))


def write_outputs(out_dir: Path, command: str, config: dict, files: dict):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "version": __version__,
        "config": {k: config[k] for k in sorted(config)},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    for name, content in files.items():
        (out_dir / name).write_text(content)


def config_to_file_text(config: dict) -> str:
    """Render a resolved config as a config file (manifest round-trips)."""
    lines = []
    for key in sorted(config):
        value = config[key]
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def build_aggregator(name: str) -> AggregatorSpec:
    """``min``/``mean``/``max`` or ``family:t`` (e.g. softmax:2.5)."""
    name = str(name).strip().lower()
    if ":" in name:
        fam, _, t = name.partition(":")
        try:
            return AggregatorSpec(Family(fam), float(t))
        except ValueError as exc:
            raise ConfigError(f"bad aggregator {name!r}") from exc
    try:
        fam = Family(name)
    except ValueError as exc:
        raise ConfigError(f"unknown aggregator {name!r}") from exc
    if fam in (Family.MIN, Family.MEAN, Family.MAX):
        return AggregatorSpec(fam)
    raise ConfigError(f"aggregator {name!r} needs a parameter, use {name}:<t>")


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------

CURVATURE_OPTIONS = [
    Option("family", "str", "softmax"),
    Option("t", "str", "0"),
    Option("dim", "int", 3),
    Option("pairs", "int", 2000),
    Option("probes", "int", 500),
    Option("seed", "int", 0),
    Option("out", "str", ""),
]


def cmd_curvature(config: dict) -> dict:
    fam = Family(config["family"])
    needs_t = fam not in (Family.MIN, Family.MEAN, Family.MAX)
    ts = [float(x) for x in str(config["t"]).split(",")] if needs_t else [0.0]
    rows = []
    for t in ts:
        spec = AggregatorSpec(fam, t)
        analytic = curvature.classify_analytic(spec)
        empirical = curvature.classify_empirical(
            spec, config["dim"], config["pairs"], seed=config["seed"]
        )
        rows.append(
            {
                "family": fam.value,
                "t": t,
                "analytic": analytic.classification.value,
                "analytic_strict": analytic.strict,
                "empirical": empirical.classification.value,
                "empirical_strict": empirical.strict,
                "evidence": empirical.evidence_count,
                "agreement": analytic.classification == empirical.classification,
            }
        )
    buf = io.StringIO()
    cols = ["family", "t", "analytic", "empirical", "agreement", "evidence"]
    buf.write(",".join(cols) + "\n")
    for r in rows:
        buf.write(",".join(str(r[c]) for c in cols) + "\n")
    for r in rows:
        print(
            f"{r['family']}(t={r['t']}): analytic={r['analytic']} "
            f"empirical={r['empirical']} agree={r['agreement']}"
        )
    return {
        "result.json": json.dumps(rows, indent=2, sort_keys=True),
        "curvature.csv": buf.getvalue(),
    }


# ---------------------------------------------------------------------------
# gain
# ---------------------------------------------------------------------------

GAIN_OPTIONS = [
    Option("U", "str", "min"),
    Option("T", "str", "max"),
    Option("mode", "str", CONTINUOUS),
    Option("N", "int", 2),
    Option("M", "int", 2),
    Option("all_pairs", "bool", False),
    Option("oracle", "bool", False),
    Option("restarts", "int", 32),
    Option("resolution", "float", 0.02),
    Option("seed", "int", 0),
    Option("out", "str", ""),
]


def _single_gain(u_name, t_name, mode, n, m, use_oracle, restarts, resolution, seed):
    structure = RewardStructure(
        outer=build_aggregator(u_name),
        inner=build_aggregator(t_name),
        n_agents=n,
        n_tasks=m,
    )
    plain = str(u_name) in PLAIN_NAMES and str(t_name) in PLAIN_NAMES
    report = (
        gains.brute_force_gain_discrete(structure)
        if mode == DISCRETE
        else gains.optimize_gain_continuous(structure, restarts=restarts, seed=seed)
    )
    if plain:
        report.delta_r_theory = gains.closed_form_gain(u_name, t_name, mode, n, m)
    oracle_delta = None
    if use_oracle:
        if mode == DISCRETE:
            oracle_delta = oracle.exhaustive_discrete_gain(structure).delta_r_bruteforce
        else:
            grid = oracle.GridSpec(resolution, n, m)
            oracle_delta = oracle.grid_gain(structure, grid).delta_r_optimized
    return structure, report, oracle_delta


def cmd_gain(config: dict) -> dict:
    mode = config["mode"]
    if mode not in (CONTINUOUS, DISCRETE):
        raise ConfigError(f"mode must be continuous or discrete, got {mode!r}")
    n, m = config["N"], config["M"]
    if config["all_pairs"]:
        table = {}
        for u_name in PLAIN_NAMES:
            for t_name in PLAIN_NAMES:
                _, report, _ = _single_gain(
                    u_name, t_name, mode, n, m, False,
                    config["restarts"], config["resolution"], config["seed"],
                )
                delta = (
                    report.delta_r_bruteforce
                    if mode == DISCRETE
                    else report.delta_r_optimized
                )
                table[f"{u_name},{t_name}"] = {
                    "delta": delta,
                    "theory": report.delta_r_theory,
                }
        buf = io.StringIO()
        buf.write("U\\T," + ",".join(PLAIN_NAMES) + "\n")
        for u_name in PLAIN_NAMES:
            cells = [repr(float(table[f"{u_name},{t_name}"]["delta"])) for t_name in PLAIN_NAMES]
            buf.write(u_name + "," + ",".join(cells) + "\n")
        print(buf.getvalue())
        return {
            "result.json": json.dumps(
                {"mode": mode, "N": n, "M": m, "table": table}, indent=2, sort_keys=True
            ),
            "all_pairs.csv": buf.getvalue(),
        }

    _, report, oracle_delta = _single_gain(
        config["U"], config["T"], mode, n, m, config["oracle"],
        config["restarts"], config["resolution"], config["seed"],
    )
    payload = report.to_json_dict()
    payload["oracle_delta"] = oracle_delta
    payload.update({"U": config["U"], "T": config["T"], "mode": mode, "N": n, "M": m})
    cols = [
        "U", "T", "mode", "N", "M",
        "delta_r_theory", "delta_r_bruteforce", "delta_r_optimized", "r_hom", "r_het",
    ]
    row = [
        "" if payload.get(c) is None else (
            repr(float(payload[c])) if isinstance(payload[c], float) else str(payload[c])
        )
        for c in cols
    ]
    csv_text = ",".join(cols) + "\n" + ",".join(row) + "\n"
    delta = payload["delta_r_bruteforce"] if mode == DISCRETE else payload["delta_r_optimized"]
    print(f"U={config['U']} T={config['T']} mode={mode} N={n} M={m}: delta_r={delta}")
    return {
        "result.json": json.dumps(payload, indent=2, sort_keys=True),
        "gain.csv": csv_text,
    }


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

TRAIN_OPTIONS = [
    Option("env", "str", "matrix-discrete"),
    Option("U", "str", ""),
    Option("T", "str", ""),
    Option("family", "str", ""),
    Option("tau1", "float", 0.0),
    Option("tau2", "float", 0.0),
    Option("N", "int", 2),
    Option("M", "int", 2),
    Option("iterations", "int", 300),
    Option("batch", "int", 0),
    Option("lr", "float", 0.0),
    Option("eval_every", "int", 10),
    Option("seeds", "seeds", [0]),
    Option("jobs", "int", 1),
    Option("dump_trace", "bool", False),
    Option("out", "str", ""),
]


def _train_structure(config: dict) -> RewardStructure:
    n, m = config["N"], config["M"]
    if config["family"]:
        theta = EnvTheta(Family(config["family"]), config["tau1"], config["tau2"])
        return theta.structure(n, m)
    if not config["U"] or not config["T"]:
        raise ConfigError("train needs either --U and --T or --family with taus")
    return RewardStructure(
        outer=build_aggregator(config["U"]),
        inner=build_aggregator(config["T"]),
        n_agents=n,
        n_tasks=m,
    )


def _train_one_seed(args):
    config, seed = args
    env_spec = EnvSpec(config["env"], _train_structure(config))
    return train_gain(
        env_spec,
        iterations=config["iterations"],
        batch_size=config["batch"] or None,
        seeds=[seed],
        learning_rate=config["lr"] or None,
        eval_every=config["eval_every"],
    )


def cmd_train(config: dict) -> dict:
    if config["env"] not in ("matrix-discrete", "matrix-continuous", "mgc"):
        raise ConfigError(f"unknown env {config['env']!r}")
    seeds = list(config["seeds"])
    tasks = [(config, s) for s in seeds]
    if config["jobs"] > 1:
        with multiprocessing.Pool(config["jobs"]) as pool:
            reports = pool.map(_train_one_seed, tasks)
    else:
        reports = [_train_one_seed(t) for t in tasks]

    files = {}
    finals = {}
    merged_series = []
    for seed, rep in zip(seeds, reports):
        files[f"train_seed{seed}.csv"] = rep.seed_csv(0)
        finals[str(seed)] = float(rep.final_gains[0])
        merged_series.append(rep.series[0])
    from .learn import TrainReport

    merged = TrainReport(
        seeds=tuple(seeds),
        series=merged_series,
        final_gains=np.array(list(finals.values())),
        final_gain_mean=float(np.mean(list(finals.values()))),
        final_gain_std=float(np.std(list(finals.values()))),
    )
    files["train_aggregate.csv"] = merged.aggregate_csv()
    files["result.json"] = json.dumps(
        {
            "env": config["env"],
            "final_gain_mean": merged.final_gain_mean,
            "final_gain_std": merged.final_gain_std,
            "per_seed": finals,
        },
        indent=2,
        sort_keys=True,
    )
    if config["dump_trace"] and config["env"] == "mgc":
        from .learn import HETEROGENEOUS, make_policy, rollout

        env_spec = EnvSpec("mgc", _train_structure(config))
        policy = make_policy(env_spec, HETEROGENEOUS, seed=seeds[0])
        batch = rollout(env_spec, policy, 1, False, np.random.default_rng(seeds[0]), seeds[0])
        files["trace.csv"] = trace_to_csv(
            batch.payload["positions"][0],
            batch.allocations[0],
            batch.payload["step_rewards"][0],
        )
    print(
        f"train {config['env']}: final deterministic gain "
        f"{merged.final_gain_mean:.4f} +/- {merged.final_gain_std:.4f} "
        f"({len(seeds)} seeds)"
    )
    return files


# ---------------------------------------------------------------------------
# hetgps
# ---------------------------------------------------------------------------

HETGPS_OPTIONS = [
    Option("env", "str", "matrix-continuous"),
    Option("family", "str", "softmax"),
    Option("init", "str", "0,0"),
    Option("N", "int", 2),
    Option("M", "int", 2),
    Option("iterations", "int", 3000),
    Option("batch", "int", 512),
    Option("alpha", "float", 0.0),
    Option("lr", "float", 0.0),
    Option("regime", "str", "concurrent:10"),
    Option("direction", "str", "maximize"),
    Option("restarts", "int", 3),
    Option("seeds", "seeds", [0]),
    Option("jobs", "int", 1),
    Option("out", "str", ""),
]


def _hetgps_one_seed(args):
    config, seed = args
    tau1, tau2 = (float(x) for x in str(config["init"]).split(","))
    hcfg = HetgpsConfig(
        env_kind=config["env"],
        family=config["family"],
        n_agents=config["N"],
        n_tasks=config["M"],
        tau1_init=tau1,
        tau2_init=tau2,
        iterations=config["iterations"],
        batch_size=config["batch"],
        alpha=config["alpha"] or None,
        learning_rate=config["lr"] or None,
        regime=Regime.parse(config["regime"]),
        direction=config["direction"],
        restarts=config["restarts"],
        seed=seed,
    )
    return run_hetgps(hcfg)


def cmd_hetgps(config: dict) -> dict:
    seeds = list(config["seeds"])
    tasks = [(config, s) for s in seeds]
    if config["jobs"] > 1:
        with multiprocessing.Pool(config["jobs"]) as pool:
            reports = pool.map(_hetgps_one_seed, tasks)
    else:
        reports = [_hetgps_one_seed(t) for t in tasks]
    files = {}
    per_seed = {}
    for seed, rep in zip(seeds, reports):
        files[f"hetgps_seed{seed}.csv"] = rep.to_csv()
        per_seed[str(seed)] = {
            "final_tau1": rep.final_theta.tau_inner,
            "final_tau2": rep.final_theta.tau_outer,
            "final_gain_deterministic": rep.final_gain_deterministic,
        }
        print(
            f"hetgps seed {seed}: tau1={rep.final_theta.tau_inner:.3f} "
            f"tau2={rep.final_theta.tau_outer:.3f} "
            f"gain={rep.final_gain_deterministic:.4f}"
        )
    files["result.json"] = json.dumps(
        {
            "family": config["family"],
            "direction": config["direction"],
            "per_seed": per_seed,
        },
        indent=2,
        sort_keys=True,
    )
    return files


# ---------------------------------------------------------------------------
# casestudy
# ---------------------------------------------------------------------------

CASESTUDY_OPTIONS = [
    Option("study", "str", "blotto"),
    Option("N", "int", 2),
    Option("M", "int", 2),
    Option("L", "int", 1),
    Option("adversary", "str", "0.6,0.4"),
    Option("samples", "int", 1000),
    Option("values", "str", ""),
    Option("seed", "int", 0),
    Option("out", "str", ""),
]


def cmd_casestudy(config: dict) -> dict:
    study = config["study"]
    n, m = config["N"], config["M"]
    if study == "blotto":
        adversary = config["adversary"]
        kind = adversary if adversary == "uniform" else [float(x) for x in adversary.split(",")]
        samples = gains.make_adversary(kind, m, config["samples"], config["seed"])
        values = (
            [float(x) for x in config["values"].split(",")] if config["values"] else None
        )
        report = gains.blotto_gain(n, m, samples, values=values, seed=config["seed"])
        payload = report.to_json_dict()
        payload.update({"study": "blotto", "N": n, "M": m})
        print(f"blotto N={n} M={m}: delta_r={report.delta_r_optimized}")
        return {"result.json": json.dumps(payload, indent=2, sort_keys=True)}
    if study == "lbf":
        value = gains.lbf_gain(n, m, config["L"])
        payload = {"study": "lbf", "N": n, "M": m, "L": config["L"], "lbf_gain": value}
        if config["L"] == 1:
            structure = RewardStructure(
                outer=AggregatorSpec(Family.MEAN),
                inner=AggregatorSpec(Family.MAX),
                n_agents=n,
                n_tasks=m,
            )
            brute = gains.brute_force_gain_discrete(structure)
            payload["bruteforce_delta"] = brute.delta_r_bruteforce
            payload["bruteforce_matches"] = bool(
                abs(brute.delta_r_bruteforce - value) <= 1e-12
            )
        print(f"lbf N={n} M={m} L={config['L']}: gain={value}")
        return {"result.json": json.dumps(payload, indent=2, sort_keys=True)}
    raise ConfigError(f"unknown study {study!r}")


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

COMMANDS = {
    "curvature": (CURVATURE_OPTIONS, cmd_curvature),
    "gain": (GAIN_OPTIONS, cmd_gain),
    "train": (TRAIN_OPTIONS, cmd_train),
    "hetgps": (HETGPS_OPTIONS, cmd_hetgps),
    "casestudy": (CASESTUDY_OPTIONS, cmd_casestudy),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetgain")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (options, _) in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key = value config file")
        if name == "casestudy":
            p.add_argument("study_pos", nargs="?", default=None, metavar="study")
        for opt in options:
            flag = "--" + opt.name.replace("_", "-")
            if opt.kind == "bool":
                p.add_argument(flag, dest=opt.name, action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=opt.name, default=None, help=opt.help)
    return parser


def run(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    options, handler = COMMANDS[args.command]
    file_values = parse_config_file(args.config) if args.config else {}
    cli_values = {
        o.name: getattr(args, o.name) for o in options if getattr(args, o.name) is not None
    }
    if args.command == "casestudy" and getattr(args, "study_pos", None):
        cli_values["study"] = args.study_pos
    config = resolve_config(options, file_values, cli_values)
    out_dir = Path(config["out"]) if config["out"] else default_out_root() / args.command
    files = handler(config)
    write_outputs(out_dir, args.command, config, files)
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except SizeGuardError as exc:
        print(f"size-guard error: {exc}", file=sys.stderr)
        return SizeGuardError.exit_code
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return DomainError.exit_code
    except HetgainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
