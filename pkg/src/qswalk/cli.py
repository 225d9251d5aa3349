"""Batch command-line interface.

One JSON config file describes one job (simulate | analyze | engineer |
verify); configs are validated against a strict schema (unknown keys are
rejected, units must be declared) before anything runs.  Artifacts are
written atomically (temp file + rename) into one directory per config, with
every float rendered at 17 significant digits so reruns are bit-identical.
Each JSON artifact embeds the config's sha256, the seed, and the package
version.

Exit codes: 0 success, 1 unexpected error, 2 invalid config, 3 degeneracy
(transition frequencies or steady state), 4 verification failure, 5 solver
did not converge.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .bath import SpectralModel
from .engineer import EngineeringProblem, solve, validate_solution
from .errors import (ConfigInvalid, DegenerateSteadyState, DegenerateTransitions,
                     InvalidTarget, QswalkError, ToleranceNotMet)
from .hilbert import DensityMatrix, HilbertSpace, basis_state, mixture, pure_state
from .microscopic import BathChannel, BathCouplingSpec, classify_realizability
from .verify import DEFAULT_SUITES, run_suites
from .walk import Graph, propagate, qsw_model, steady_state

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_DEGENERACY = 3
EXIT_VERIFY = 4
EXIT_SOLVER = 5

_SCHEMA_PATH = Path(__file__).parent / "schema" / "config_schema.json"


# ---------------------------------------------------------------------------
# deterministic serialization


def format_float(x: float) -> str:
    if not np.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x}")
    return format(float(x), ".17g")


def canonical_json(obj, indent: int = 0) -> str:
    """JSON with sorted keys and 17-significant-digit floats (bit-stable)."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [f"{inner}{json.dumps(str(k))}: {canonical_json(obj[k], indent + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        parts = [f"{inner}{canonical_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, np.ndarray):
        return canonical_json(obj.tolist(), indent)
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if obj is None:
        return "null"
    raise TypeError(f"cannot serialize {type(obj)}")


def write_artifacts(out_dir: Path, artifacts: dict) -> None:
    """Write every artifact to a temp file first, then rename all of them."""
    out_dir.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in artifacts.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=f".{name}.")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            staged.append((tmp, out_dir / name))
        for tmp, final in staged:
            os.replace(tmp, final)
    except BaseException:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# config loading and object construction


def _schema():
    with open(_SCHEMA_PATH) as fh:
        return json.load(fh)


def load_config(path: str) -> tuple[dict, str]:
    """Parse, hash and schema-validate a config file."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: not valid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        where = "/".join(str(p) for p in err.absolute_path) or "(root)"
        raise ConfigInvalid(f"{path}: at {where}: {err.message}")
    return cfg, digest


def _complex_of(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    return complex(float(v[0]), float(v[1]))


def build_graph(cfg: dict) -> Graph:
    gc = cfg["graph"]
    try:
        return Graph(
            node_count=gc["nodes"],
            onsite_energies=tuple(gc["onsite_energies"]),
            coherent_edges=tuple((e["from"], e["to"], _complex_of(e["amplitude"]))
                                 for e in gc.get("coherent_edges", [])),
            incoherent_edges=tuple((e["from"], e["to"], e["rate"])
                                   for e in gc.get("incoherent_edges", [])))
    except ValueError as exc:
        raise ConfigInvalid(f"graph: {exc}") from exc


def build_bath_spec(bc: dict, nodes: int) -> BathCouplingSpec:
    try:
        channels = tuple(BathChannel(c["kind"], tuple(c["coefficients"]))
                         for c in bc["channels"])
        for c in channels:
            if len(c.coefficients) != nodes:
                raise ValueError("channel needs one coefficient per node")
        sd = bc["spectral_density"]
        return BathCouplingSpec(
            channels=channels,
            spectral_density=SpectralModel(sd["family"], sd["prefactor"], sd["cutoff"]),
            temperature=bc["temperature"])
    except ValueError as exc:
        raise ConfigInvalid(f"bath: {exc}") from exc


def build_initial_state(spec: dict, space: HilbertSpace) -> DensityMatrix:
    try:
        if "label" in spec:
            return basis_state(space, spec["label"])
        if "mixture" in spec:
            weights = [(e["label"], e["weight"]) for e in spec["mixture"]]
            total = sum(w for _, w in weights)
            if abs(total - 1.0) > 1e-12:
                raise ConfigInvalid(f"mixture weights sum to {total!r}, need 1")
            return mixture(space, weights)
        amps = [_complex_of(a) for a in spec["amplitudes"]]
        if len(amps) != space.dimension:
            raise ConfigInvalid(
                f"amplitudes length {len(amps)} != dimension {space.dimension}")
        return pure_state(space, np.array(amps))
    except (KeyError, ToleranceNotMet) as exc:
        raise ConfigInvalid(f"initial_state: {exc}") from exc


def build_times(spec: dict) -> np.ndarray:
    if "grid" in spec:
        g = spec["grid"]
        if g["stop"] < g["start"]:
            raise ConfigInvalid("times grid: stop < start")
        return np.linspace(g["start"], g["stop"], g["count"])
    times = np.array(spec["list"], dtype=float)
    if np.any(np.diff(times) < 0):
        raise ConfigInvalid("times list must be sorted ascending")
    return times


# ---------------------------------------------------------------------------
# job runners: each returns (artifacts dict, exit code)


def _metadata(cfg: dict, digest: str, seed: int) -> dict:
    return {"job": cfg["job"], "config_sha256": digest,
            "seed": seed, "package_version": __version__}


def run_simulate(cfg: dict, digest: str, seed: int) -> tuple[dict, int]:
    sc = cfg["simulate"]
    g = build_graph(cfg)
    space = (HilbertSpace.full(g.node_count) if sc["space"] == "full"
             else HilbertSpace.single_excitation(g.node_count))
    rho0 = build_initial_state(sc["initial_state"], space)
    times = build_times(sc["times"])
    model = qsw_model(g, space)
    result = propagate(model, rho0, times, method=sc.get("method", "auto"),
                       rtol=sc.get("rtol", 1e-10))

    labels = space.basis_labels
    include_coh = sc.get("include_coherences", False)
    header = ["time"] + [f"pop:{la}" for la in labels]
    coh_pairs = []
    if include_coh:
        for i in range(len(labels)):
            for j in range(i + 1, len(labels)):
                coh_pairs.append((i, j))
                header += [f"re:{labels[i]}|{labels[j]}", f"im:{labels[i]}|{labels[j]}"]
    rows = [",".join(header)]
    for t, state in zip(result.times, result.states):
        cells = [format_float(t)] + [format_float(p) for p in state.populations()]
        for i, j in coh_pairs:
            cells.append(format_float(float(np.real(state.matrix[i, j]))))
            cells.append(format_float(float(np.imag(state.matrix[i, j]))))
        rows.append(",".join(cells))
    trajectory_csv = "\n".join(rows) + "\n"

    final = result.states[-1].matrix
    summary = _metadata(cfg, digest, seed)
    summary.update({
        "space": sc["space"],
        "basis_labels": list(labels),
        "method": result.method,
        "time_count": len(times),
        "final_state": {
            "trace_deviation": float(abs(np.trace(final) - 1.0)),
            "min_eigenvalue": float(np.linalg.eigvalsh(final).min()),
            "populations": {la: float(p) for la, p in
                            zip(labels, result.states[-1].populations())},
        },
        "files": ["trajectory.csv"],
    })
    summary["method_info"] = {k: v for k, v in result.info.items()}
    if sc.get("steady_state", False):
        ss = steady_state(model)
        summary["steady_state"] = {
            "populations": {la: float(p) for la, p in zip(labels, ss.populations())},
        }
    return {"trajectory.csv": trajectory_csv,
            "summary.json": canonical_json(summary) + "\n"}, EXIT_OK


def run_analyze(cfg: dict, digest: str, seed: int) -> tuple[dict, int]:
    g = build_graph(cfg)
    spec = build_bath_spec(cfg["bath"], g.node_count)
    rep = classify_realizability(g, spec)
    report = _metadata(cfg, digest, seed)
    report["realizability"] = rep.to_dict()

    lines = []
    c = rep.combined
    lines.append(f"combined: sector_ok={c.sector_ok} dephasing_free={c.dephasing_free} "
                 f"trivial={c.trivial}")
    lines.append(f"combined: max_sector_violation={format_float(c.max_sector_violation)} "
                 f"max_walker_dephasing={format_float(c.max_walker_dephasing)}")
    for a in c.achieved:
        lines.append(f"rate {a.src}->{a.dst}: requested={format_float(a.requested)} "
                     f"achieved={format_float(a.achieved)} "
                     f"rel_error={format_float(a.rel_error)}")
    for kind, v in sorted(rep.per_kind.items()):
        extra = "" if v.decoupled is None else f" decoupled={v.decoupled}"
        lines.append(f"kind {kind}: sector_ok={v.sector_ok} "
                     f"dephasing_free={v.dephasing_free}{extra}")
    lines.append(f"union_consistent={rep.union_consistent}")
    return {"rate_report.json": canonical_json(report) + "\n",
            "verdicts.txt": "\n".join(lines) + "\n"}, EXIT_OK


def run_engineer(cfg: dict, digest: str, seed: int) -> tuple[dict, int]:
    ec = cfg["engineer"]
    g = build_graph(cfg)
    sd = ec["spectral_density"]
    try:
        problem = EngineeringProblem(
            graph=g,
            spectral_density=SpectralModel(sd["family"], sd["prefactor"], sd["cutoff"]),
            temperature=ec["temperature"],
            target_rates=tuple((t["dst"], t["src"], t["rate"]) for t in ec["targets"]),
            zero_dephasing_pairs=tuple((p[0], p[1])
                                       for p in ec.get("zero_dephasing_pairs", [])),
            coupling_kind=ec.get("coupling_kind", "z"),
            bath_count=ec.get("bath_count"))
    except ValueError as exc:
        raise ConfigInvalid(f"engineer: {exc}") from exc
    solution = solve(problem, seed=seed, n_starts=ec.get("starts", 16))

    out = _metadata(cfg, digest, seed)
    out["solution"] = solution.to_dict()
    if solution.status != "infeasible-certified":
        out["validation"] = validate_solution(solution)
    rows = ["start,objective,nfev"]
    for start, obj, nfev in solution.trace:
        rows.append(f"{start},{format_float(obj)},{nfev}")
    artifacts = {"solution.json": canonical_json(out) + "\n",
                 "trace.csv": "\n".join(rows) + "\n"}
    code = EXIT_OK if solution.status == "converged" else EXIT_SOLVER
    return artifacts, code


def run_verify(cfg: dict, digest: str, seed: int) -> tuple[dict, int]:
    suites = cfg.get("verify", {}).get("suites", list(DEFAULT_SUITES))
    results = run_suites(suites, seed=seed)
    report = _metadata(cfg, digest, seed)
    report["suites"] = [r.to_dict() for r in results]
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.n_cases} cases)")
    code = EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY
    return {"verify_report.json": canonical_json(report) + "\n"}, code


RUNNERS = {"simulate": run_simulate, "analyze": run_analyze,
           "engineer": run_engineer, "verify": run_verify}


def run_config(path: str, out_root: str, command: str,
               seed_override: int | None) -> tuple[int, str]:
    """Run one config end to end; returns (exit_code, message)."""
    try:
        cfg, digest = load_config(path)
        if cfg["job"] != command:
            raise ConfigInvalid(
                f"{path}: config job {cfg['job']!r} does not match command {command!r}")
        seed = seed_override if seed_override is not None else cfg.get("seed", 0)
        artifacts, code = RUNNERS[command](cfg, digest, seed)
        out_dir = Path(out_root) / Path(path).stem
        write_artifacts(out_dir, artifacts)
        return code, f"{path}: wrote {', '.join(sorted(artifacts))} -> {out_dir}"
    except ConfigInvalid as exc:
        return EXIT_CONFIG, f"{path}: invalid config: {exc}"
    except InvalidTarget as exc:
        return EXIT_CONFIG, f"{path}: invalid target: {exc}"
    except (DegenerateTransitions, DegenerateSteadyState) as exc:
        return EXIT_DEGENERACY, f"{path}: degeneracy: {exc}"
    except ValueError as exc:
        return EXIT_CONFIG, f"{path}: invalid configuration value: {exc}"
    except QswalkError as exc:
        return EXIT_ERROR, f"{path}: {type(exc).__name__}: {exc}"
    except Exception as exc:  # pragma: no cover - safety net
        return EXIT_ERROR, f"{path}: unexpected {type(exc).__name__}: {exc}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qswalk",
        description="Quantum stochastic walks: simulation, microscopic analysis, "
                    "reservoir engineering, self-verification.")
    parser.add_argument("--version", action="version", version=f"qswalk {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
            ("simulate", "propagate a walk and write trajectory.csv + summary.json"),
            ("analyze", "microscopic realizability report for a graph + bath"),
            ("engineer", "solve for coupling coefficients hitting target rates"),
            ("verify", "run built-in invariant suites")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", action="append", default=[],
                       help="JSON config file (repeatable)")
        p.add_argument("--out", default="qswalk-out",
                       help="output root directory (one subdirectory per config)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--jobs", type=int, default=1,
                       help="run this many configs in parallel")
    args = parser.parse_args(argv)

    configs = list(args.config)
    if not configs:
        if args.command == "verify":
            # verify can run standalone with its defaults
            results = run_suites(DEFAULT_SUITES, seed=args.seed or 0)
            for r in results:
                print(f"{'PASS' if r.passed else 'FAIL'} {r.name} ({r.n_cases} cases)")
            report = {"job": "verify", "config_sha256": None,
                      "seed": args.seed or 0, "package_version": __version__,
                      "suites": [r.to_dict() for r in results]}
            write_artifacts(Path(args.out) / "verify",
                            {"verify_report.json": canonical_json(report) + "\n"})
            return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY
        parser.error(f"{args.command} needs at least one --config")

    if args.jobs > 1 and len(configs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_run_config_tuple,
                                     [(c, args.out, args.command, args.seed)
                                      for c in configs]))
    else:
        outcomes = [run_config(c, args.out, args.command, args.seed) for c in configs]

    worst = EXIT_OK
    for code, message in outcomes:
        stream = sys.stdout if code == EXIT_OK else sys.stderr
        print(message, file=stream)
        worst = max(worst, code)
    return worst


def _run_config_tuple(t):
    return run_config(*t)


if __name__ == "__main__":
    sys.exit(main())
