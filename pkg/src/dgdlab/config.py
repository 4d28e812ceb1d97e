"""Experiment configuration: TOML parsing and validation.

The configuration dialect is TOML. A file either names a builtin
experiment (``builtin = "paper-sec5"``, with any section overriding the
preset field-wise) or spells the experiment out:

    [problem]
    builtin = "paper-sec5"          # or an inline definition:
    # dim = 2
    # [[problem.objective]]
    # terms = [{powers = [4, 0], coeff = 0.25}, {powers = [2, 0], coeff = -1.0}]
    # lipschitz_grad = 2.0           # optional metadata
    # [problem.graph]
    # num_agents = 5
    # edges = [[1, 3], [1, 5], [2, 4], [2, 5], [3, 4]]   # 1-based
    # [problem.mixing]
    # matrix = [[0.6, 0.0, ...], ...]                     # row-major
    # generator = {kind = "lazy_metropolis", beta = 0.4}  # alternative

    [run]
    alpha = 0.005
    max_iterations = 20000
    init = [1e-6, 1e-6]             # broadcast; or one row per agent
    master_seed = 2024
    record_every = 10               # optional
    wide_columns = false            # per-agent CSV columns
    [run.stop]                      # optional
    grad_norm_below = 1e-9
    # consensus_below / f_grad_norm_below form the alternative pair

    [noise]                         # required when NDGD is a variant
    kind = "sphere"                 # none | sphere | gaussian
    epsilon = 1.0                   # derive the scale from the budget
    safety_factor = 0.5
    # radius = 0.166  /  sigma = 0.1  (explicit scales)

    [experiment]
    variants = ["DGD", "NDGD"]
    seeds = 20                      # count, or an explicit list
    output_dir = "runs/paper-sec5"

    [escape]                        # optional
    center = [0.0, 0.0]
    radius = 0.1

    references = [[0.7071067811865476, 0.0], [-0.7071067811865476, 0.0]]

    [diagnostics]                   # optional: bound reports in the run report
    enabled = true
    zeta = 0.1
    lipschitz_grad = 9.0            # region-valid constants for the bounds
    lipschitz_hess = 12.0
    stop_grad_norm = 1e-9

Agent indices are 1-based in files and reports, 0-based inside the
library.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import VARIANTS, StopRule
from .graph import NetworkGraph
from .mixing import MixingValidationError, validate_mixing
from .noise import NoiseSpec
from .objective import LocalObjective, Problem, polynomial_objective
from .problems import EXPERIMENT_PRESETS, builtin_problem

#: environment variable overriding every config's output directory
OUTPUT_DIR_ENV = "DGDLAB_OUTPUT_DIR"


class ConfigError(ValueError):
    """Configuration rejected; the message names the offending field."""


@dataclass(frozen=True)
class EscapeSpec:
    center: np.ndarray
    radius: float


@dataclass(frozen=True)
class DiagnosticsRequest:
    zeta: float = 0.1
    lipschitz_grad: float | None = None
    lipschitz_hess: float | None = None
    stop_grad_norm: float = 1e-9
    max_iterations: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    problem: Problem
    alpha: float
    max_iterations: int
    init: np.ndarray
    master_seed: int
    record_every: int | None
    stop: StopRule | None
    noise: NoiseSpec | None
    variants: tuple[str, ...]
    seeds: tuple[int, ...]
    references: tuple[np.ndarray, ...]
    escape: EscapeSpec | None
    output_dir: Path
    wide_columns: bool = False
    audit: bool = False
    diagnostics: DiagnosticsRequest | None = None


def _require(table: dict, key: str, context: str):
    if key not in table:
        raise ConfigError(f"{context}.{key}: missing required field")
    return table[key]


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _parse_objective(table: dict, dim: int, index: int) -> LocalObjective:
    context = f"problem.objective[{index + 1}]"
    terms_raw = _require(table, "terms", context)
    terms = []
    for t, term in enumerate(terms_raw):
        if not isinstance(term, dict) or "powers" not in term or "coeff" not in term:
            raise ConfigError(
                f"{context}.terms[{t + 1}]: expected {{powers = [...], coeff = ...}}"
            )
        powers = term["powers"]
        if len(powers) != dim:
            raise ConfigError(
                f"{context}.terms[{t + 1}].powers: has {len(powers)} exponents, "
                f"problem.dim is {dim}"
            )
        terms.append((tuple(int(e) for e in powers), float(term["coeff"])))
    return polynomial_objective(
        terms,
        dim=dim,
        lipschitz_grad=table.get("lipschitz_grad"),
        lipschitz_hess=table.get("lipschitz_hess"),
    )


def _parse_graph(table: dict, num_agents: int) -> NetworkGraph:
    edges = []
    for e, edge in enumerate(table.get("edges", [])):
        if len(edge) != 2:
            raise ConfigError(f"problem.graph.edges[{e + 1}]: expected a pair")
        i, j = int(edge[0]), int(edge[1])
        if not (1 <= i <= num_agents and 1 <= j <= num_agents):
            raise ConfigError(
                f"problem.graph.edges[{e + 1}]: indices are 1-based and must "
                f"lie in 1..{num_agents}"
            )
        edges.append((i - 1, j - 1))
    try:
        return NetworkGraph(num_agents, edges)
    except ValueError as exc:
        raise ConfigError(f"problem.graph: {exc}") from exc


def _parse_problem(table: dict) -> tuple[Problem, str]:
    if "builtin" in table:
        name = table["builtin"]
        try:
            return builtin_problem(name), name
        except KeyError as exc:
            raise ConfigError(f"problem.builtin: {exc.args[0]}") from exc
    dim = int(_require(table, "dim", "problem"))
    objectives_raw = _require(table, "objective", "problem")
    graph_table = _require(table, "graph", "problem")
    num_agents = int(_require(graph_table, "num_agents", "problem.graph"))
    if len(objectives_raw) != num_agents:
        raise ConfigError(
            f"problem.objective: {len(objectives_raw)} objectives for "
            f"{num_agents} agents"
        )
    objectives = tuple(
        _parse_objective(t, dim, i) for i, t in enumerate(objectives_raw)
    )
    graph = _parse_graph(graph_table, num_agents)
    mixing_table = _require(table, "mixing", "problem")
    if "matrix" in mixing_table:
        matrix = mixing_table["matrix"]
    elif "generator" in mixing_table:
        gen = mixing_table["generator"]
        kind = _require(gen, "kind", "problem.mixing.generator")
        if kind != "lazy_metropolis":
            raise ConfigError(
                f"problem.mixing.generator.kind: unknown generator {kind!r}"
            )
        from .experiment import generate_mixing  # deferred: experiment imports config

        matrix = generate_mixing(
            graph, beta=float(_require(gen, "beta", "problem.mixing.generator"))
        )
    else:
        raise ConfigError("problem.mixing: needs 'matrix' or 'generator'")
    try:
        mixing = validate_mixing(np.asarray(matrix, dtype=float), graph)
    except MixingValidationError as exc:
        raise ConfigError(f"problem.mixing.matrix [{exc.code}]: {exc}") from exc
    try:
        problem = Problem(objectives=objectives, graph=graph, mixing=mixing)
    except ValueError as exc:
        raise ConfigError(f"problem: {exc}") from exc
    return problem, "inline"


def _parse_noise(table: dict) -> NoiseSpec:
    kind = _require(table, "kind", "noise")
    try:
        return NoiseSpec(
            kind=kind,
            radius=table.get("radius"),
            sigma=table.get("sigma"),
            epsilon=table.get("epsilon"),
            safety_factor=float(table.get("safety_factor", 0.5)),
        )
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from exc


def _parse_stop(table: dict) -> StopRule:
    try:
        return StopRule(
            grad_norm_below=table.get("grad_norm_below"),
            consensus_below=table.get("consensus_below"),
            f_grad_norm_below=table.get("f_grad_norm_below"),
        )
    except ValueError as exc:
        raise ConfigError(f"run.stop: {exc}") from exc


def _parse_init(raw, problem: Problem) -> np.ndarray:
    init = np.asarray(raw, dtype=float)
    if init.ndim == 1:
        if init.size != problem.dim:
            raise ConfigError(
                f"run.init: broadcast vector has {init.size} entries, "
                f"problem dimension is {problem.dim}"
            )
        return init
    if init.shape != (problem.num_agents, problem.dim):
        raise ConfigError(
            f"run.init: stacked init has shape {init.shape}, expected "
            f"({problem.num_agents}, {problem.dim})"
        )
    return init


def config_from_dict(data: dict, name: str = "config") -> ExperimentConfig:
    """Build and fully validate an ExperimentConfig from parsed TOML data."""
    if "builtin" in data:
        preset_name = data["builtin"]
        if preset_name not in EXPERIMENT_PRESETS:
            raise ConfigError(
                f"builtin: unknown experiment preset {preset_name!r}; "
                f"available: {sorted(EXPERIMENT_PRESETS)}"
            )
        merged = _deep_merge(EXPERIMENT_PRESETS[preset_name], data)
        merged.pop("builtin")
        data = merged
        name = preset_name

    problem, problem_name = _parse_problem(_require(data, "problem", name))
    run_table = _require(data, "run", name)
    alpha = float(_require(run_table, "alpha", "run"))
    if not alpha > 0:
        raise ConfigError(f"run.alpha: must be positive, got {alpha}")
    max_iterations = int(_require(run_table, "max_iterations", "run"))
    if max_iterations < 1:
        raise ConfigError("run.max_iterations: must be >= 1")
    init = _parse_init(_require(run_table, "init", "run"), problem)
    record_every = run_table.get("record_every")
    if record_every is not None:
        record_every = int(record_every)
        if record_every < 1:
            raise ConfigError("run.record_every: must be >= 1")
    stop = _parse_stop(run_table["stop"]) if "stop" in run_table else None

    experiment_table = data.get("experiment", {})
    variants = tuple(experiment_table.get("variants", ["DGD"]))
    if not variants:
        raise ConfigError("experiment.variants: at least one variant required")
    for v in variants:
        if v not in VARIANTS:
            raise ConfigError(
                f"experiment.variants: unknown variant {v!r}; expected {VARIANTS}"
            )
    seeds_raw = experiment_table.get("seeds", 1)
    if isinstance(seeds_raw, int):
        if seeds_raw < 1:
            raise ConfigError("experiment.seeds: count must be >= 1")
        seeds = tuple(range(seeds_raw))
    else:
        seeds = tuple(int(s) for s in seeds_raw)
        if not seeds:
            raise ConfigError("experiment.seeds: list must be nonempty")

    noise = _parse_noise(data["noise"]) if "noise" in data else None
    if "NDGD" in variants:
        if noise is None or noise.kind == "none":
            raise ConfigError(
                "noise: the NDGD variant requires a sphere or gaussian noise spec"
            )
        try:
            noise.resolved(
                problem.num_agents, problem.dim, problem.mixing.spectral.lambda_min
            )
        except ValueError as exc:
            raise ConfigError(f"noise: {exc}") from exc

    references = tuple(
        np.asarray(r, dtype=float) for r in data.get("references", [])
    )
    for r in references:
        if r.shape != (problem.dim,):
            raise ConfigError(
                f"references: each point needs {problem.dim} coordinates"
            )

    escape = None
    if "escape" in data:
        esc = data["escape"]
        center = np.asarray(_require(esc, "center", "escape"), dtype=float)
        if center.shape != (problem.dim,):
            raise ConfigError(f"escape.center: needs {problem.dim} coordinates")
        radius = float(_require(esc, "radius", "escape"))
        if not radius > 0:
            raise ConfigError("escape.radius: must be positive")
        escape = EscapeSpec(center=center, radius=radius)

    diagnostics = None
    diag_table = data.get("diagnostics", {})
    if diag_table.get("enabled", False):
        diagnostics = DiagnosticsRequest(
            zeta=float(diag_table.get("zeta", 0.1)),
            lipschitz_grad=diag_table.get("lipschitz_grad"),
            lipschitz_hess=diag_table.get("lipschitz_hess"),
            stop_grad_norm=float(diag_table.get("stop_grad_norm", 1e-9)),
            max_iterations=diag_table.get("max_iterations"),
        )
        if not 0 < diagnostics.zeta < 1:
            raise ConfigError("diagnostics.zeta: must be in (0, 1)")

    output_dir = Path(
        os.environ.get(
            OUTPUT_DIR_ENV, experiment_table.get("output_dir", "runs/" + name)
        )
    )

    return ExperimentConfig(
        name=name if problem_name == "inline" else problem_name,
        problem=problem,
        alpha=alpha,
        max_iterations=max_iterations,
        init=init,
        master_seed=int(run_table.get("master_seed", 0)),
        record_every=record_every,
        stop=stop,
        noise=noise,
        variants=variants,
        seeds=seeds,
        references=references,
        escape=escape,
        output_dir=output_dir,
        wide_columns=bool(run_table.get("wide_columns", False)),
        diagnostics=diagnostics,
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file.

    Parse errors surface with line/column positions; validation errors
    name the offending field.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
    return config_from_dict(data, name=path.stem)


def builtin_config(name: str) -> ExperimentConfig:
    """The ready-made experiment preset for a builtin name."""
    return config_from_dict({"builtin": name})


def with_overrides(
    cfg: ExperimentConfig,
    master_seed: int | None = None,
    output_dir: str | Path | None = None,
    audit: bool | None = None,
    wide_columns: bool | None = None,
) -> ExperimentConfig:
    """Apply CLI-level overrides to a loaded config."""
    updates = {}
    if master_seed is not None:
        updates["master_seed"] = master_seed
    if output_dir is not None:
        updates["output_dir"] = Path(output_dir)
    if audit is not None:
        updates["audit"] = audit
    if wide_columns is not None:
        updates["wide_columns"] = wide_columns
    return replace(cfg, **updates) if updates else cfg


def load_state_file(path: str | Path, m: int, n: int) -> np.ndarray:
    """Read a stacked state from a text file.

    Accepts whitespace- or comma-separated floats, either flat
    (``m * n`` values, block-major) or one agent row per line.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    values = []
    for token in text.replace(",", " ").split():
        try:
            values.append(float(token))
        except ValueError:
            raise ConfigError(
                f"{path}: cannot parse {token!r} as a number"
            ) from None
    if len(values) != m * n:
        raise ConfigError(
            f"{path}: found {len(values)} values, expected {m}*{n} = {m * n}"
        )
    return np.asarray(values, dtype=float).reshape(m, n)
