"""Experiment runner: every study is a subcommand driven by a key=value
config file, writing a run-manifest JSON plus CSV (or JSON) tables.

Subcommands: spectrum, sample, sim-sphere, sim-bp, rayleigh, gap-scan,
marginal-compare, fpe-moments, chaos. Flags: --config PATH, --out DIR,
--seed U64 (overrides config), --threads K (recorded, never affects
results), --format {csv,json}, --plot. KINLAB_THREADS is the env fallback
for --threads.

Config format: UTF-8 lines "key = value"; '#' starts a comment; unknown
keys are rejected and all violations are reported together with their line
numbers. Identical plan + seed reproduces byte-identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import subprocess
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import (
    ConservationMode,
    ManifoldSpec,
    sample_uniform_batch,
)
from .kinetic_limits import (
    LimitParams,
    fpe_moment_flow,
    landau_moment_flow,
    maxwellian_eval,
    stationary_marginal_eval,
)
from .master_sim import (
    KernelSpec,
    SimConfig,
    run_ensemble,
    sheared_sampler,
    shifted_sampler,
    tagged_shift_sampler,
    uniform_sampler,
)
from .observables import (
    decay_rate_fit,
    chaos_distance,
    ks_quantile_99,
    marginal_histogram,
    moment_series,
    radial_ks_statistic,
)
from .spectral import gap_scan, lambda1_bound, rayleigh_quotient_mc, \
    spectrum_table, standard_trial_function


class ConfigError(ValueError):
    """Carries the full list of config violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


# ---------------------------------------------------------------------------
# config schema


def _parse_int(s):
    return int(s, 0)


def _parse_float(s):
    return float(s)


def _parse_str(s):
    return s


def _parse_bool(s):
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_vec3(s):
    parts = [float(x) for x in s.split(",")]
    if len(parts) != 3:
        raise ValueError("need three comma-separated numbers")
    return parts


def _parse_int_list(s):
    return [int(x) for x in s.split(",")]


def _parse_float_list(s):
    return [float(x) for x in s.split(",")]


@dataclass
class Field:
    parse: object
    default: object = None
    required: bool = False


_MANIFOLD = {
    "n_particles": Field(_parse_int, required=True),
    "mode": Field(_parse_str, default="energy-momentum"),
    "eps": Field(_parse_float, default=1.0),
    "u": Field(_parse_vec3, default=[0.0, 0.0, 0.0]),
}
_SIM = {
    **_MANIFOLD,
    "dt": Field(_parse_float, required=True),
    "t_end": Field(_parse_float, required=True),
    "n_replicas": Field(_parse_int, default=1024),
    "record_every": Field(_parse_int, default=1),
    "observables": Field(_parse_str, default="energy_per_particle"),
    "init": Field(_parse_str, default="uniform"),
    "init_strength": Field(_parse_float, default=0.0),
    "fit_observable": Field(_parse_str, default=""),
    "entropy_times": Field(_parse_float_list, default=[]),
    "entropy_bins": Field(_parse_int, default=20),
    "seed": Field(_parse_int, default=12345),
}

SCHEMAS: dict[str, dict[str, Field]] = {
    "spectrum": {**_MANIFOLD, "j_max": Field(_parse_int, default=4),
                 "seed": Field(_parse_int, default=12345)},
    "sample": {**_MANIFOLD, "n_samples": Field(_parse_int, default=1000),
               "seed": Field(_parse_int, default=12345)},
    "sim-sphere": dict(_SIM),
    "sim-bp": {**_SIM, "gamma": Field(_parse_float, required=True),
               "cutoff": Field(_parse_float, default=-1.0)},
    "rayleigh": {"n_particles": Field(_parse_int, required=True),
                 "gamma": Field(_parse_float, default=-3.0),
                 "n_samples": Field(_parse_int, default=100000),
                 "seed": Field(_parse_int, default=12345)},
    "gap-scan": {"n_list": Field(_parse_int_list, required=True),
                 "gamma": Field(_parse_float, default=-3.0),
                 "n_samples": Field(_parse_int, default=100000),
                 "seed": Field(_parse_int, default=12345)},
    "marginal-compare": {"n_particles": Field(_parse_int, required=True),
                         "eps": Field(_parse_float, default=1.0),
                         "n_samples": Field(_parse_int, default=1000000),
                         "n_list": Field(_parse_int_list, default=[8, 32, 128]),
                         "radial_points": Field(_parse_int, default=512),
                         "seed": Field(_parse_int, default=12345)},
    "fpe-moments": {"flow": Field(_parse_str, default="fpe"),
                    "eps0": Field(_parse_float, default=1.0),
                    "u": Field(_parse_vec3, default=[0.0, 0.0, 0.0]),
                    "m0": Field(_parse_vec3, default=[0.0, 0.0, 0.0]),
                    "s0_diag": Field(_parse_vec3, default=[1.0, 1.0, 1.0]),
                    "s0_offdiag": Field(_parse_vec3, default=[0.0, 0.0, 0.0]),
                    "t_list": Field(_parse_float_list, required=True),
                    "seed": Field(_parse_int, default=12345)},
    "chaos": {"n_list": Field(_parse_int_list, default=[8, 32, 128]),
              "eps": Field(_parse_float, default=1.0),
              "gamma": Field(_parse_float, default=-3.0),
              "dt": Field(_parse_float, default=0.004),
              "t_end": Field(_parse_float, default=0.4),
              "pair_samples": Field(_parse_int, default=1000000),
              "bins": Field(_parse_int, default=16),
              "component": Field(_parse_int, default=1),
              "seed": Field(_parse_int, default=12345)},
}

_COMMANDS = sorted(SCHEMAS)


@dataclass
class ExperimentPlan:
    """Validated experiment: command kind plus typed parameters."""

    command: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"command": self.command, "params": self.params}


def parse_config(text: str, command: str | None = None) -> ExperimentPlan:
    """Parse and validate a config, reporting ALL violations at once.

    ``command`` (usually the CLI subcommand) may also be given by a
    ``command =`` line in the config; if both are present they must agree.
    """
    violations: list[str] = []
    seen: dict[str, int] = {}
    entries: dict[str, tuple[int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key in seen:
            violations.append(
                f"line {lineno}: duplicate key {key!r} (first set on line {seen[key]})"
            )
            continue
        seen[key] = lineno
        entries[key] = (lineno, value)

    if "command" in entries:
        lineno, value = entries.pop("command")
        if command is None:
            command = value
        elif value != command:
            violations.append(
                f"line {lineno}: config command {value!r} does not match "
                f"subcommand {command!r}"
            )
    if command is None:
        violations.append("no command given (subcommand or 'command =' line)")
        raise ConfigError(violations)
    if command not in SCHEMAS:
        violations.append(f"unknown command {command!r}; known: {_COMMANDS}")
        raise ConfigError(violations)

    schema = SCHEMAS[command]
    params: dict = {}
    for key, (lineno, value) in entries.items():
        if key not in schema:
            violations.append(
                f"line {lineno}: unknown key {key!r} for command {command!r}"
            )
            continue
        try:
            params[key] = schema[key].parse(value)
        except ValueError as exc:
            violations.append(f"line {lineno}: bad value for {key!r}: {exc}")
    for key, fld in schema.items():
        if key in params:
            continue
        if fld.required:
            violations.append(f"missing required key {key!r}")
        else:
            params[key] = fld.default

    if not violations:
        violations.extend(_cross_validate(command, params, seen))
    if violations:
        raise ConfigError(violations)
    return ExperimentPlan(command=command, params=params)


def _mode_of(params) -> ConservationMode:
    mode = params.get("mode", "energy-momentum")
    if mode in ("energy", "energy-only", "c1"):
        return ConservationMode.ENERGY_ONLY
    if mode in ("energy-momentum", "c4"):
        return ConservationMode.ENERGY_MOMENTUM
    raise ValueError(f"unknown mode {mode!r} (use 'energy' or 'energy-momentum')")


def _spec_of(params) -> ManifoldSpec:
    return ManifoldSpec(params["n_particles"], _mode_of(params),
                        eps=params["eps"], u=np.asarray(params["u"]))


def _cross_validate(command, params, lines) -> list[str]:
    out = []

    def where(key):
        return f"line {lines[key]}: " if key in lines else ""

    if {"n_particles", "mode", "eps", "u"} <= params.keys():
        try:
            _spec_of(params)
        except ValueError as exc:
            out.append(f"{where('eps')}invalid manifold: {exc}")
    if command in ("sim-sphere", "sim-bp"):
        if params["dt"] <= 0:
            out.append(f"{where('dt')}dt must be positive")
        elif params["t_end"] != 0 and params["t_end"] < params["dt"]:
            out.append(f"{where('t_end')}t_end must be >= dt or exactly 0")
        if params["init"] not in ("uniform", "shift", "shear", "tagged-shift"):
            out.append(f"{where('init')}unknown init {params['init']!r}")
    if command == "sim-bp" and not params["gamma"] > -5.0:
        out.append(f"{where('gamma')}kernel exponent must satisfy gamma > -5")
    if command in ("rayleigh", "gap-scan") and params["n_samples"] < 1000:
        out.append(f"{where('n_samples')}n_samples must be >= 1000")
    if command == "gap-scan" and len(params["n_list"]) < 3:
        out.append(f"{where('n_list')}need at least 3 N values")
    if command == "fpe-moments":
        if params["flow"] not in ("fpe", "landau"):
            out.append(f"{where('flow')}flow must be 'fpe' or 'landau'")
        if params["eps0"] <= 0:
            out.append(f"{where('eps0')}eps0 must be positive")
        if any(t < 0 for t in params["t_list"]):
            out.append(f"{where('t_list')}times must be >= 0")
    return out


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _write_table(path: Path, header: list[str], rows: list[list], fmt: str):
    if fmt == "json":
        path = path.with_suffix(".json")
        payload = [dict(zip(header, [_fmt(x) for x in row])) for row in rows]
        path.write_text(json.dumps(payload, indent=1) + "\n")
        return path
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def _code_version() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except Exception:
        pass
    return f"kinlab-{__version__}"


def _series_rows(result, names):
    header = ["time"]
    for name in names:
        header += [f"{name}_mean", f"{name}_stderr"]
    some = result.series[names[0]] if names else None
    rows = []
    if some is not None:
        for i, t in enumerate(some.times):
            row = [t]
            for name in names:
                s = result.series[name]
                row += [s.means[i], s.stderrs[i]]
            rows.append(row)
    return header, rows


def _maybe_plot(out_dir: Path, result, names, stem: str):
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    fig, ax = plt.subplots(figsize=(6, 4))
    for name in names:
        s = result.series[name]
        ax.errorbar(s.times, s.means, yerr=s.stderrs, label=name, lw=1)
    ax.set_xlabel("t")
    ax.legend(fontsize=8)
    path = out_dir / f"{stem}.svg"
    fig.savefig(path)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# command runners (each returns (tables, extras); tables: name -> (header, rows))


def _init_sampler(params):
    kind = params["init"]
    s = params["init_strength"]
    if kind == "uniform":
        return uniform_sampler
    if kind == "shift":
        return shifted_sampler([s, 0.0, 0.0])
    if kind == "shear":
        return sheared_sampler(s)
    return tagged_shift_sampler([s, 0.0, 0.0])


def _run_sim(plan: ExperimentPlan, seed: int):
    params = plan.params
    spec = _spec_of(params)
    kernel = None
    if plan.command == "sim-bp":
        cutoff = params["cutoff"]
        kernel = KernelSpec(params["gamma"], None if cutoff < 0 else cutoff)
    config = SimConfig(dt=params["dt"], t_end=params["t_end"],
                       n_replicas=params["n_replicas"], seed=seed,
                       process="sphere" if plan.command == "sim-sphere" else "pair",
                       kernel=kernel, record_every=params["record_every"])
    names = [n.strip() for n in params["observables"].split(",") if n.strip()]
    result = run_ensemble(spec, config, names,
                          initial_sampler=_init_sampler(params),
                          snapshot_times=params["entropy_times"])
    header, rows = _series_rows(result, names)
    tables = {"series": (header, rows)}
    extras = {}
    if params["entropy_times"]:
        from .kinetic_limits import (entropy_grid_edges, relative_entropy,
                                     velocity_histogram3d)
        lim = LimitParams(eps0=spec.eps0, u=spec.u)
        edges = entropy_grid_edges(lim, bins=params["entropy_bins"])
        ent_rows = []
        for snap in result.snapshots:
            h = velocity_histogram3d(snap.velocities, edges)
            ent_rows.append([snap.time, relative_entropy(h, lim)])
        tables["entropy"] = (["time", "relative_entropy"], ent_rows)
    fit_name = params["fit_observable"]
    if fit_name and result.series[fit_name].times.size >= 2:
        fit = decay_rate_fit(moment_series(result, fit_name))
        extras["decay_fit"] = {
            "observable": fit_name, "rate": fit.rate,
            "rate_stderr": fit.rate_stderr, "ci": [fit.ci_low, fit.ci_high],
            "r_squared": fit.r_squared, "low_r2_warning": fit.low_r2_warning,
        }
    return tables, extras, result, names


def _cmd_spectrum(plan, seed, rng):
    table = spectrum_table(_spec_of(plan.params), plan.params["j_max"])
    rows = [[j, unscaled, scaled, limit] for j, unscaled, scaled, limit in table.rows]
    return {"spectrum": (["j", "unscaled", "scaled", "limit"], rows)}, {}


def _cmd_sample(plan, seed, rng):
    spec = _spec_of(plan.params)
    n = plan.params["n_samples"]
    rows = []
    max_ratio = 0.0
    for start in range(0, n, 4096):
        batch = sample_uniform_batch(spec, min(4096, n - start), rng)
        sq = (batch * batch).sum(-1)
        dots = np.einsum("rkc,rlc->rkl", batch, batch)
        pair_sq = sq[:, :, None] + sq[:, None, :] - 2 * dots
        ratio = pair_sq.max(axis=(1, 2)) / (4 * spec.n_particles * spec.eps)
        max_ratio = max(max_ratio, float(ratio.max()))
        energy = 0.5 * sq.sum(axis=1)
        mom_err = np.abs(batch.sum(axis=1) - spec.n_particles * spec.u).max(axis=1)
        for i in range(batch.shape[0]):
            rows.append([start + i, energy[i] / (spec.n_particles * spec.eps) - 1.0,
                         mom_err[i] / math.sqrt(spec.n_particles), ratio[i]])
    header = ["sample", "energy_rel_error", "momentum_error", "max_pair_sep_sq_over_4Neps"]
    return {"samples": (header, rows)}, {"max_pair_sep_sq_over_4Neps": max_ratio}


def _cmd_rayleigh(plan, seed, rng):
    p = plan.params
    n = p["n_particles"]
    spec = ManifoldSpec(n, ConservationMode.ENERGY_MOMENTUM, eps=1.0)
    est, err = rayleigh_quotient_mc(spec, standard_trial_function(n),
                                    KernelSpec(p["gamma"]), p["n_samples"], rng)
    rows = [[n, est, err, lambda1_bound(n)]]
    return {"rayleigh": (["N", "estimate", "stderr", "bound"], rows)}, \
        {"estimate": est, "stderr": err}


def _cmd_gap_scan(plan, seed, rng):
    p = plan.params
    res = gap_scan(p["n_list"], KernelSpec(p["gamma"]), p["n_samples"], rng)
    rows = [[n, e, s, b] for n, e, s, b in
            zip(res.n_values, res.estimates, res.stderrs, res.bounds)]
    extras = {"exponent": res.exponent, "exponent_stderr": res.exponent_stderr}
    return {"gap_scan": (["N", "estimate", "stderr", "bound"], rows)}, extras


def _cmd_marginal_compare(plan, seed, rng):
    p = plan.params
    spec = ManifoldSpec(p["n_particles"], ConservationMode.ENERGY_ONLY, eps=p["eps"])
    n_states = max(1, p["n_samples"] // spec.n_particles)
    velocities = sample_uniform_batch(spec, n_states, rng)
    ks, pooled = radial_ks_statistic(velocities, spec)
    ks_rows = [[pooled, ks, ks_quantile_99(pooled)]]
    sup_rows = []
    for n in p["n_list"]:
        s = ManifoldSpec(n, ConservationMode.ENERGY_ONLY, eps=p["eps"])
        r = np.linspace(0.0, s.radius, p["radial_points"])
        v = np.zeros((len(r), 1, 3))
        v[:, 0, 0] = r
        fstat = stationary_marginal_eval(s, 1, v)
        fm = maxwellian_eval(LimitParams(eps0=p["eps"]), v[:, 0, :])
        sup_rows.append([n, float(np.max(np.abs(fstat - fm)))])
    return {
        "ks": (["n_pooled", "ks_statistic", "ks_quantile_99"], ks_rows),
        "supnorm": (["N", "supnorm_distance_to_maxwellian"], sup_rows),
    }, {"ks_statistic": ks}


def _cmd_fpe_moments(plan, seed, rng):
    p = plan.params
    lim = LimitParams(eps0=p["eps0"], u=np.asarray(p["u"]))
    s0 = np.diag(p["s0_diag"]).astype(float)
    off = p["s0_offdiag"]
    s0[0, 1] = s0[1, 0] = off[0]
    s0[0, 2] = s0[2, 0] = off[1]
    s0[1, 2] = s0[2, 1] = off[2]
    m0 = np.asarray(p["m0"], dtype=float)
    second0 = s0 + np.outer(m0, m0)
    rows = []
    for t in p["t_list"]:
        if p["flow"] == "fpe":
            st = fpe_moment_flow(lim, m0, second0, t)
        else:
            st = landau_moment_flow(KernelSpec(0.0), m0, second0, t)
        c = st.centered
        rows.append([t, *st.mean, c[0, 0], c[1, 1], c[2, 2],
                     c[0, 1], c[0, 2], c[1, 2]])
    header = ["t", "m1", "m2", "m3", "S11", "S22", "S33", "S12", "S13", "S23"]
    return {"moments": (header, rows)}, {}


def _cmd_chaos(plan, seed, rng):
    p = plan.params
    rows = []
    sigma = math.sqrt(2.0 * p["eps"] / 3.0)
    edges = np.linspace(-4 * sigma, 4 * sigma, p["bins"] + 1)
    component = p["component"] - 1
    for i, n in enumerate(p["n_list"]):
        spec = ManifoldSpec(n, ConservationMode.ENERGY_MOMENTUM, eps=p["eps"])
        n_replicas = max(8, int(math.ceil(p["pair_samples"] / (n * (n - 1)))))
        config = SimConfig(dt=p["dt"], t_end=p["t_end"], n_replicas=n_replicas,
                           seed=seed + i, process="pair",
                           kernel=KernelSpec(p["gamma"]))
        result = run_ensemble(spec, config, ["energy_per_particle"],
                              snapshot_times=[p["t_end"]])
        snap = result.snapshots[-1]
        h2 = marginal_histogram(snap, 2, edges, component=component,
                                max_pairs=p["pair_samples"], rng=rng)
        h1 = marginal_histogram(snap, 1, edges, component=component)
        rows.append([n, p["t_end"], chaos_distance(h2, h1), h2.n_samples])
    return {"chaos": (["N", "t", "l1_distance", "n_pairs"], rows)}, {}


# ---------------------------------------------------------------------------
# driver


def run(plan: ExperimentPlan, out_dir: str | Path, *, seed: int | None = None,
        fmt: str = "csv", threads: int | None = None,
        plot: bool = False) -> dict:
    """Execute a validated plan; writes artifacts and returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eff_seed = int(plan.params.get("seed", 12345) if seed is None else seed)
    rng = np.random.default_rng(np.random.SeedSequence(eff_seed))

    extras: dict = {}
    outputs: list[str] = []
    if plan.command in ("sim-sphere", "sim-bp"):
        tables, extras, result, names = _run_sim(plan, eff_seed)
        if plot:
            path = _maybe_plot(out, result, names, "series")
            if path is not None:
                outputs.append(str(path))
    else:
        runner = {
            "spectrum": _cmd_spectrum,
            "sample": _cmd_sample,
            "rayleigh": _cmd_rayleigh,
            "gap-scan": _cmd_gap_scan,
            "marginal-compare": _cmd_marginal_compare,
            "fpe-moments": _cmd_fpe_moments,
            "chaos": _cmd_chaos,
        }[plan.command]
        tables, extras = runner(plan, eff_seed, rng)

    for name, (header, rows) in tables.items():
        path = _write_table(out / f"{name}.csv", header, rows, fmt)
        outputs.append(str(path))

    manifest = {
        "command": plan.command,
        "plan": plan.to_json(),
        "seed": eff_seed,
        "threads": threads,
        "format": fmt,
        "version": _code_version(),
        "outputs": outputs,
        "extras": extras,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, default=str) + "\n")
    return manifest


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="kinlab",
        description="Reproducible experiments on velocity-sphere diffusions",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=lambda s: int(s, 0), default=None)
        p.add_argument("--threads", type=int,
                       default=int(os.environ.get("KINLAB_THREADS", "0")) or None)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--plot", action="store_true")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
        plan = parse_config(text, args.command)
        out_dir = args.out if args.out is not None else f"out-{args.command}"
        run(plan, out_dir, seed=args.seed, fmt=args.format,
            threads=args.threads, plot=args.plot)
    except ConfigError as exc:
        print(json.dumps({"error": "invalid config",
                          "violations": exc.violations}, indent=1))
        return 2
    except Exception as exc:  # noqa: BLE001 - machine-readable failure contract
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
