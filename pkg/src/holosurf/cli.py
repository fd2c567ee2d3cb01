"""Command-line front end: ``verify``, ``sweep``, ``spread``, ``recover``, ``lattice-run``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fidelity, holonomy, lattice, mat_core, noise, pauli_frame, recovery
from .errors import HolosurfError, InvalidConfig, NoCrossingInRange

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID_CONFIG, EXIT_IO = 0, 1, 2, 3
COMMANDS = ("verify", "sweep", "spread", "recover", "lattice-run")


def fmt(x) -> str:
    """Canonical number text: 12 significant digits for floats."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return format(float(x), ".12g")


def _canon(obj):
    """Round floats to 12 significant digits throughout a JSON-ready object."""
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(format(x, ".12g")) if math.isfinite(x) else None
    return obj


# --- configuration ------------------------------------------------------------

@dataclass
class RunConfig:
    """Parameters shared by all subcommands; see README for meanings."""

    delta_min: float = 0.0
    delta_max: float = 0.2
    resolution: int = 41
    numeric: bool = False
    samples: int = 1024
    distance: int = 3
    p: float = 0.001
    shots: int = 1000
    rounds: int = 1
    seed: int = 0
    workers: int = 1
    format: str = "csv"
    out: Optional[str] = None
    representation: str = "pauli_frame"
    variant: str = "holonomic"
    envelope: str = "flat_top"
    steps: int = 10000

    def validate(self) -> "RunConfig":
        """Check types and ranges.

        Raises:
            InvalidConfig: on the first violated constraint.
        """
        ints = ("resolution", "samples", "distance", "shots", "rounds", "seed", "workers", "steps")
        for name in ints:
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise InvalidConfig(f"{name} must be an integer")
        for name in ("delta_min", "delta_max", "p"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise InvalidConfig(f"{name} must be a finite number")
        if not isinstance(self.numeric, bool):
            raise InvalidConfig("numeric must be true or false")
        if not (0.0 <= self.delta_min < 0.5 and 0.0 <= self.delta_max < 0.5):
            raise InvalidConfig("delta values must lie in [0, 0.5)")
        if not self.delta_min < self.delta_max:
            raise InvalidConfig("delta_min must be smaller than delta_max")
        checks = (
            (self.resolution >= 10, "resolution must be at least 10"),
            (self.samples >= 100, "samples must be at least 100"),
            (self.distance >= 2, "distance must be at least 2"),
            (0.0 <= self.p <= lattice.MAX_P, f"p must lie in [0, {lattice.MAX_P}]"),
            (self.shots >= 1, "shots must be at least 1"),
            (self.rounds >= 1, "rounds must be at least 1"),
            (self.seed >= 0, "seed must be non-negative"),
            (self.workers >= 1, "workers must be at least 1"),
            (self.steps >= 1, "steps must be at least 1"),
            (self.format in ("csv", "json"), "format must be csv or json"),
            (self.representation in ("pauli_frame", "state_vector"), "representation must be pauli_frame or state_vector"),
            (self.variant in lattice.VARIANTS, f"variant must be one of {lattice.VARIANTS}"),
            (self.envelope in holonomy.ENVELOPES, f"envelope must be one of {sorted(holonomy.ENVELOPES)}"),
            (self.out is None or isinstance(self.out, str), "out must be a path string"),
        )
        for ok, msg in checks:
            if not ok:
                raise InvalidConfig(msg)
        return self


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def load_config(path: Optional[str]) -> dict:
    """Read a JSON object of config keys.

    Raises:
        OSError: if the file cannot be read.
        InvalidConfig: for malformed JSON, a non-object document or unknown keys.
    """
    if path is None:
        return {}
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"config is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidConfig("config must be a JSON object")
    unknown = sorted(set(data) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidConfig(f"unknown config keys: {unknown}")
    return data


def resolve_config(file_values: dict, overrides: dict) -> RunConfig:
    """Defaults, then file values, then non-``None`` flag overrides."""
    unknown = sorted(set(file_values) - set(CONFIG_KEYS))
    if unknown:
        raise InvalidConfig(f"unknown config keys: {unknown}")
    values = dataclasses.asdict(RunConfig())
    values.update(file_values)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values).validate()


# --- output -------------------------------------------------------------------

def csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def json_text(payload: dict) -> str:
    doc = {"schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(_canon(doc), indent=2, sort_keys=True) + "\n"


def emit(cfg: RunConfig, files: dict) -> None:
    """Write ``{filename: text}`` into ``cfg.out`` or concatenate them on stdout."""
    if cfg.out is None:
        sys.stdout.write("\n".join(files.values()))
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out / name).write_text(text)


# --- verify -------------------------------------------------------------------

def _check(name: str, fn) -> dict:
    try:
        ok, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return {"name": name, "passed": bool(ok), "detail": detail}


def _verify_usz():
    derived = holonomy.ground_aux_restriction(holonomy.u2_evolution(noise.USZ_THETA, math.pi))
    expected = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, -1]])
    err = max(np.abs(holonomy.u_sz() - derived).max(), np.abs(holonomy.u_sz() - expected).max())
    return err <= 1e-12, f"max deviation {err:.3e}"


def _verify_hadamard():
    h = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    err = np.abs(holonomy.single_qubit_gate(math.pi / 4, math.pi, 0) - h).max()
    return err <= 1e-12, f"max deviation {err:.3e}"


def _verify_integrator(cfg: RunConfig):
    theta = 2 * math.acos(1 / math.sqrt(3))
    pulse = holonomy.SingleQubitPulse(theta, 0.3, 3 * math.pi)
    u = mat_core.time_ordered_evolve(holonomy.h1_hamiltonian(pulse, cfg.envelope), 0.0, 1.0, cfg.steps)
    err = np.linalg.norm(u - holonomy.u1_closed_form(pulse))
    return err <= 1e-8, f"Frobenius distance {err:.3e} at {cfg.steps} steps"


def _verify_compositions():
    errs = []
    for name, u in (("SWAP", holonomy.compose_swap()), ("CZ", holonomy.compose_cz()), ("CNOT", holonomy.compose_cnot())):
        errs.append(holonomy.phase_aligned_distance(holonomy.ground_aux_restriction(u), holonomy.CANONICAL[name]))
    return max(errs) <= 1e-9, f"max distance {max(errs):.3e}"


def _verify_rotations():
    h = holonomy.hadamard()
    alphas = np.random.default_rng(0).uniform(-math.pi, math.pi, 20)
    err = max(np.abs(h @ holonomy.rotation_x(a) @ h - holonomy.rotation_z(a)).max() for a in alphas)
    return err <= 1e-12, f"max deviation {err:.3e}"


def _verify_pauli():
    usz = holonomy.u_sz()
    bad = 0
    for p in pauli_frame.all_paulis(("q1", "q2")):
        img = pauli_frame.conjugate_usz(p, ("q1", "q2")).to_matrix(("q1", "q2"))
        dense = usz @ p.to_matrix(("q1", "q2")) @ usz.conj().T
        bad += np.abs(img - dense).max() > 1e-12
    return bad == 0, f"{bad} of 16 mismatches"


def _verify_enumeration():
    count, total, frac = pauli_frame.undetectable_error_count()
    return (count, total) == (324, 50625), f"{count}/{total} = {frac}"


def _verify_recovery():
    rng = np.random.default_rng(1)
    worst = 1.0
    for _ in range(20):
        a = rng.normal(size=4) + 1j * rng.normal(size=4)
        worst = min(worst, recovery.recovery_fidelity(a / np.linalg.norm(a)))
    return worst >= 1 - 1e-9, f"worst fidelity {worst:.15f}"


def _verify_crossings():
    scan = fidelity.threshold_scan(0.01, 0.3, 100)
    ok = abs(scan.delta_star_dynamic - 0.0415) <= 1e-3 and abs(scan.delta_star_holonomic - 0.156) <= 5e-3
    return ok, f"dynamic {scan.delta_star_dynamic:.6f}, holonomic {scan.delta_star_holonomic:.6f}"


def _verify_frame_state():
    unit = lattice.build_lattice(3).unit("m1_2")
    worst, n = lattice.unit_injection_agreement(unit, "holonomic")
    return worst >= 1 - 1e-10, f"worst fidelity {worst:.15f} over {n} injections"


def verify_checks(cfg: RunConfig) -> list:
    """Run every verification check; each result has ``name``, ``passed``, ``detail``."""
    return [
        _check("usz_matrix", _verify_usz),
        _check("hadamard", _verify_hadamard),
        _check("integrator_vs_closed_form", lambda: _verify_integrator(cfg)),
        _check("compositions", _verify_compositions),
        _check("rotation_conjugation", _verify_rotations),
        _check("usz_pauli_conjugation", _verify_pauli),
        _check("undetectable_enumeration", _verify_enumeration),
        _check("branch_recovery", _verify_recovery),
        _check("threshold_crossings", _verify_crossings),
        _check("frame_state_agreement", _verify_frame_state),
    ]


def cmd_verify(cfg: Optional[RunConfig] = None) -> int:
    """Run the checks and report them; exit status 1 if any fails."""
    cfg = cfg or RunConfig().validate()
    results = verify_checks(cfg)
    passed = all(r["passed"] for r in results)
    if cfg.format == "json":
        files = {"verify.json": json_text({"passed": passed, "checks": results})}
    else:
        files = {"verify.csv": csv_text(["check", "passed", "detail"], [[r["name"], r["passed"], r["detail"]] for r in results])}
    emit(cfg, files)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# --- sweep --------------------------------------------------------------------

SWEEP_COLUMNS = ("delta", "f_h_usz", "f_d_iswap", "f_cnot_h", "f_cnot_d", "f_h_single", "f_sigma_x", "f_numeric_min")


def _numeric_usz(args):
    delta, samples = args
    return fidelity.numeric_worst_case_fidelity("usz", delta, samples)


def sweep_rows(cfg: RunConfig) -> tuple:
    """Fidelity rows over the configured delta grid and the crossing summary."""
    grid = np.linspace(cfg.delta_min, cfg.delta_max, cfg.resolution)
    numeric = [None] * len(grid)
    if cfg.numeric:
        tasks = [(float(d), cfg.samples) for d in grid]
        if cfg.workers > 1:
            from concurrent.futures import ProcessPoolExecutor

            with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
                numeric = list(pool.map(_numeric_usz, tasks))
        else:
            numeric = [_numeric_usz(t) for t in tasks]
    reports = [fidelity.FidelityReport.at(float(d), n) for d, n in zip(grid, numeric)]
    rows = [
        [r.delta, r.f_h_usz, r.f_d_iswap, r.f_cnot_holonomic, r.f_cnot_dynamic, r.f_h_single, r.f_sigma_x, r.f_numeric_min]
        for r in reports
    ]
    summary = {"threshold": fidelity.THRESHOLD}
    for kind in ("holonomic", "dynamic"):
        try:
            star = fidelity._crossing(kind, grid)
        except NoCrossingInRange:
            star = None
        summary[f"delta_star_{kind}"] = star
        summary[f"quoted_delta_star_{kind}"] = fidelity.QUOTED_CROSSINGS[kind]
    summary["f_cnot_holonomic_at_0.041"] = fidelity.cnot_fidelity(0.041, "holonomic")
    summary["quoted_f_cnot_holonomic_at_0.041"] = fidelity.QUOTED_HOLONOMIC_CNOT_AT_0041
    return rows, summary


def cmd_sweep(cfg: RunConfig) -> int:
    """Emit per-delta fidelity rows and the threshold crossings."""
    rows, summary = sweep_rows(cfg)
    if cfg.format == "json":
        payload = {"columns": list(SWEEP_COLUMNS), "rows": rows, "summary": summary}
        files = {"sweep.json": json_text(payload)}
    else:
        files = {
            "sweep.csv": csv_text(SWEEP_COLUMNS, rows),
            "sweep_summary.csv": csv_text(["key", "value"], [[k, v] for k, v in summary.items()]),
        }
    emit(cfg, files)
    return EXIT_OK


# --- spread -------------------------------------------------------------------

def spread_payload(cfg: RunConfig) -> dict:
    table = [
        {"operation": r.operation, "entries": {q: pauli_frame.format_factors(f) for q, f in r.entries}}
        for r in pauli_frame.stabilizer_spread_table()
    ]
    count, total, frac = pauli_frame.undetectable_error_count()
    exact_count, _, exact_frac = pauli_frame.exact_undetectable_count()
    layout = lattice.build_lattice(cfg.distance)
    report = lattice.monte_carlo_spread(layout, cfg.p, cfg.rounds, cfg.shots, cfg.seed, workers=cfg.workers)
    return {
        "table": table,
        "enumeration": {
            "count": count,
            "total": total,
            "fraction": f"{frac.numerator}/{frac.denominator}",
            "exact_propagation_count": exact_count,
            "exact_propagation_fraction": f"{exact_frac.numerator}/{exact_frac.denominator}",
        },
        "monte_carlo": {"distance": cfg.distance, "seed": cfg.seed, "shots": cfg.shots, **report.as_dict()},
    }


def cmd_spread(cfg: RunConfig) -> int:
    """Emit the spreading table, the undetectable-error enumeration and spread histograms."""
    payload = spread_payload(cfg)
    if cfg.format == "json":
        emit(cfg, {"spread.json": json_text(payload)})
        return EXIT_OK
    data = pauli_frame.DATA_ORDER
    table = csv_text(["operation", "M", *data], [[r["operation"], *(r["entries"][q] for q in ("M", *data))] for r in payload["table"]])
    e = payload["enumeration"]
    enum = csv_text(["rule", "count", "total", "fraction"], [
        ["table", e["count"], e["total"], e["fraction"]],
        ["exact", e["exact_propagation_count"], e["total"], e["exact_propagation_fraction"]],
    ])
    mc = payload["monte_carlo"]
    hist_rows = []
    stats_rows = []
    for variant in ("holonomic", "dynamic"):
        res = mc[variant]
        for w, n in res["weight_histogram"].items():
            hist_rows.append([variant, int(w), n])
        stats_rows.append([variant, res["shots"], res["detected"], res["undetectable_high_weight"], res["uniform_unit_patterns"]])
    emit(cfg, {
        "table1.csv": table,
        "enumeration.csv": enum,
        "spread_histogram.csv": csv_text(["variant", "weight", "shots"], hist_rows),
        "spread_stats.csv": csv_text(["variant", "shots", "detected", "undetectable_high_weight", "uniform_unit_patterns"], stats_rows),
    })
    return EXIT_OK


# --- recover ------------------------------------------------------------------

RECOVER_COLUMNS = (
    "delta", "p_aux_excited_mean", "f_sigma_z_min", "f_h_usz", "f_sigma_x_min",
    "f_sigma_x_dark", "f_sigma_x", "f_recovery_min",
)


def recover_rows(cfg: RunConfig) -> list:
    """Per-delta statistics over ``cfg.shots`` random input states."""
    rng = np.random.default_rng(cfg.seed)
    states = rng.normal(size=(cfg.shots, 4)) + 1j * rng.normal(size=(cfg.shots, 4))
    states /= np.linalg.norm(states, axis=1, keepdims=True)
    rec = min(recovery.recovery_fidelity(a) for a in states)
    bright = np.abs(states[:, 1] - states[:, 2]) ** 2 / 2 + np.abs(states[:, 3]) ** 2
    dark = [0.0, math.sqrt(0.5), math.sqrt(0.5), 0.0]
    rows = []
    for delta in np.linspace(cfg.delta_min, cfg.delta_max, cfg.resolution):
        delta = float(delta)
        ideal, (k0,) = fidelity.branch_operators("usz", delta)
        # Excited-branch weight sin^2(delta) |psi_1|^2, exactly 0 at delta = 0.
        p1 = math.sin(delta) ** 2 * bright
        f_z = fidelity.branch_fidelities(ideal, (k0,), states).min()
        f_x = min(recovery.sigma_x_reset_fidelity(delta, a) for a in states)
        rows.append([
            delta, float(p1.mean()), float(f_z), fidelity.f_h_usz(delta), f_x,
            recovery.sigma_x_reset_fidelity(delta, dark), fidelity.f_sigma_x(delta), rec,
        ])
    return rows


def cmd_recover(cfg: RunConfig) -> int:
    """Compare sigma_z heralding, sigma_x reset and full branch recovery."""
    rows = recover_rows(cfg)
    if cfg.format == "json":
        files = {"recover.json": json_text({"columns": list(RECOVER_COLUMNS), "rows": rows, "states": cfg.shots, "seed": cfg.seed})}
    else:
        files = {"recover.csv": csv_text(RECOVER_COLUMNS, rows)}
    emit(cfg, files)
    return EXIT_OK


# --- lattice-run --------------------------------------------------------------

def lattice_records(cfg: RunConfig) -> list:
    layout = lattice.build_lattice(cfg.distance)
    model = noise.PauliNoise(cfg.p, cfg.seed)
    seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.rounds)
    return [
        lattice.run_cycle(layout, model, cfg.representation, int(s), cfg.variant, round_index=r)
        for r, s in enumerate(seeds)
    ]


def cmd_lattice_run(cfg: RunConfig) -> int:
    """Run independent syndrome rounds and emit the outcomes."""
    records = lattice_records(cfg)
    if cfg.format == "json":
        files = {"lattice.json": json_text({"distance": cfg.distance, "p": cfg.p, "records": [r.as_dict() for r in records]})}
    else:
        rows = [[r.round, u, v] for r in records for u, v in sorted(r.outcomes.items())]
        files = {"lattice.csv": csv_text(["round", "unit", "outcome"], rows)}
    emit(cfg, files)
    return EXIT_OK


# --- entry point --------------------------------------------------------------

HANDLERS = {
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "spread": cmd_spread,
    "recover": cmd_recover,
    "lattice-run": cmd_lattice_run,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holosurf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with config keys")
        p.add_argument("--out", help="output directory (default: stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--delta-min", type=float)
        p.add_argument("--delta-max", type=float)
        p.add_argument("--resolution", type=int)
        p.add_argument("--distance", type=int)
        p.add_argument("--p", type=float)
        p.add_argument("--shots", type=int)
        p.add_argument("--rounds", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--representation", choices=("pauli_frame", "state_vector"))
        p.add_argument("--variant", choices=lattice.VARIANTS)
        p.add_argument("--numeric", action="store_true", default=None)
    return parser


class _ParserExit(Exception):
    pass


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, validate the config, run the command and map errors to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID_CONFIG
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = resolve_config(load_config(args.config), overrides)
    except InvalidConfig as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except TypeError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        return HANDLERS[args.command](cfg)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HolosurfError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG


if __name__ == "__main__":
    sys.exit(main())
