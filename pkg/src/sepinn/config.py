"""Run configuration: flat typed key-value files with section headers.

The format is INI-style text with no interpolation and no executable
content.  Every key has a declared type and section; parsing an unknown
key, a value of the wrong type, or a semantically invalid combination
produces a diagnostic naming the offending section.key.  Serialization
writes every field in schema order, so parse -> serialize -> parse is the
identity on the parsed values.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from typing import Optional

METHODS = ("sepinn", "sepinn-c", "sepinn-n", "pinn", "eigen")


class ConfigError(ValueError):
    """Invalid configuration; carries one diagnostic per offending field."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(self.diagnostics))


@dataclass
class RunConfig:
    """One training run: problem, method, architecture, sampling, schedule."""

    problem: str = ""
    method: str = "sepinn"
    seed: int = 0
    output_dir: str = ""
    gamma_init: float = 1.0
    widths: list = field(default_factory=list)
    aux_widths: list = field(default_factory=list)
    n_interior: int = 10000
    n_dirichlet: int = 800
    n_neumann: int = 0
    sigma_d: float = 100.0
    sigma_n: float = 0.0
    growth: float = 1.5
    sigma_cap: float = 0.0
    threshold: float = 1e-3
    adam_lr: float = 1e-3
    coeff_lr: list = field(default_factory=list)
    adam_iters: int = 1000
    lbfgs_iters: int = 2500
    lbfgs_tol: float = 1e-9
    lbfgs_memory: int = 10
    warmup_lr: float = 0.0
    warmup_iters: int = 0
    truncation: int = 0
    alpha: float = 100.0
    beta: float = 135.0
    nu: list = field(default_factory=lambda: [0.02, 0.01])
    mu_tol: float = 1e-3
    max_alternations: int = 6
    max_restarts: int = 3
    pretrain_iters: int = 500
    validation_n: int = 2000
    error_n: int = 20000
    error_seed: int = 101


# (section, key, attribute, type) in canonical serialization order.
SCHEMA = [
    ("run", "problem", "problem", "str"),
    ("run", "method", "method", "str"),
    ("run", "seed", "seed", "int"),
    ("run", "output_dir", "output_dir", "str"),
    ("run", "gamma_init", "gamma_init", "float"),
    ("network", "widths", "widths", "intlist"),
    ("network", "aux_widths", "aux_widths", "intlist"),
    ("samples", "n_interior", "n_interior", "int"),
    ("samples", "n_dirichlet", "n_dirichlet", "int"),
    ("samples", "n_neumann", "n_neumann", "int"),
    ("penalty", "sigma_d", "sigma_d", "float"),
    ("penalty", "sigma_n", "sigma_n", "float"),
    ("penalty", "growth", "growth", "float"),
    ("penalty", "sigma_cap", "sigma_cap", "float"),
    ("penalty", "threshold", "threshold", "float"),
    ("adam", "lr", "adam_lr", "float"),
    ("adam", "coeff_lr", "coeff_lr", "floatlist"),
    ("adam", "iters", "adam_iters", "int"),
    ("lbfgs", "iters", "lbfgs_iters", "int"),
    ("lbfgs", "tolerance", "lbfgs_tol", "float"),
    ("lbfgs", "memory", "lbfgs_memory", "int"),
    ("lbfgs", "warmup_lr", "warmup_lr", "float"),
    ("lbfgs", "warmup_iters", "warmup_iters", "int"),
    ("series", "truncation", "truncation", "int"),
    ("eigen", "alpha", "alpha", "float"),
    ("eigen", "beta", "beta", "float"),
    ("eigen", "nu", "nu", "floatlist"),
    ("eigen", "mu_tol", "mu_tol", "float"),
    ("eigen", "max_alternations", "max_alternations", "int"),
    ("eigen", "max_restarts", "max_restarts", "int"),
    ("eigen", "pretrain_iters", "pretrain_iters", "int"),
    ("evaluate", "validation_n", "validation_n", "int"),
    ("evaluate", "n_samples", "error_n", "int"),
    ("evaluate", "seed", "error_seed", "int"),
]

_BY_LOCATION = {(s, k): (attr, kind) for s, k, attr, kind in SCHEMA}
_SECTIONS = []
for s, *_ in SCHEMA:
    if s not in _SECTIONS:
        _SECTIONS.append(s)


def _parse_value(raw: str, kind: str, where: str, diagnostics: list):
    raw = raw.strip()
    try:
        if kind == "str":
            return raw
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        items = [tok.strip() for tok in raw.split(",") if tok.strip()]
        if kind == "intlist":
            return [int(tok) for tok in items]
        if kind == "floatlist":
            return [float(tok) for tok in items]
    except ValueError:
        diagnostics.append(f"{where}: cannot parse {raw!r} as {kind}")
        return None
    raise AssertionError(f"unknown schema kind {kind}")


def _format_value(value, kind: str) -> str:
    if kind == "str":
        return str(value)
    if kind in ("intlist", "floatlist"):
        return ", ".join(repr(v) if kind == "floatlist" else str(v) for v in value)
    return repr(value) if kind == "float" else str(value)


def parse_config(text: str, validate: bool = True) -> RunConfig:
    """Parse configuration text; raises ConfigError with all diagnostics."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    diagnostics = []
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from exc
    cfg = RunConfig()
    for section in parser.sections():
        if section not in _SECTIONS:
            diagnostics.append(f"{section}: unknown section")
            continue
        for key, raw in parser.items(section):
            spot = _BY_LOCATION.get((section, key))
            if spot is None:
                diagnostics.append(f"{section}.{key}: unknown key")
                continue
            attr, kind = spot
            value = _parse_value(raw, kind, f"{section}.{key}", diagnostics)
            if value is not None:
                setattr(cfg, attr, value)
    if diagnostics:
        raise ConfigError(diagnostics)
    if validate:
        problems = validate_config(cfg)
        if problems:
            raise ConfigError(problems)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form listing every field in schema order."""
    lines = []
    current = None
    for section, key, attr, kind in SCHEMA:
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{key} = {_format_value(getattr(cfg, attr), kind)}")
    return "\n".join(lines) + "\n"


def load_config(path, validate: bool = True) -> RunConfig:
    with open(path, "r") as fh:
        return parse_config(fh.read(), validate=validate)


def save_config(cfg: RunConfig, path):
    with open(path, "w") as fh:
        fh.write(serialize_config(cfg))


def validate_config(cfg: RunConfig) -> list:
    """Semantic checks; returns one diagnostic per bad field (empty = valid)."""
    from . import problems as pr

    out = []
    if not cfg.problem:
        out.append("run.problem: required")
    elif cfg.problem not in pr.problem_names():
        known = ", ".join(pr.problem_names())
        out.append(f"run.problem: unknown problem {cfg.problem!r} (known: {known})")
    if cfg.method not in METHODS:
        out.append(f"run.method: must be one of {', '.join(METHODS)}")
    if cfg.seed < 0:
        out.append("run.seed: must be nonnegative")
    if not cfg.widths:
        out.append("network.widths: required")
    elif len(cfg.widths) < 2 or any(w < 1 for w in cfg.widths):
        out.append("network.widths: need at least input and output layers, all positive")
    elif cfg.widths[-1] != 1:
        out.append("network.widths: output layer must have width 1")
    for name, value in (("samples.n_interior", cfg.n_interior),
                        ("samples.n_dirichlet", cfg.n_dirichlet)):
        if value < 1:
            out.append(f"{name}: must be positive")
    if cfg.n_neumann < 0:
        out.append("samples.n_neumann: must be nonnegative")
    if cfg.sigma_d <= 0.0:
        out.append("penalty.sigma_d: must be positive")
    if cfg.sigma_n < 0.0:
        out.append("penalty.sigma_n: must be nonnegative")
    if cfg.growth <= 1.0:
        out.append("penalty.growth: path-following factor must be > 1")
    if cfg.sigma_cap < max(cfg.sigma_d, cfg.sigma_n):
        out.append("penalty.sigma_cap: must be at least the starting weights")
    if cfg.threshold <= 0.0:
        out.append("penalty.threshold: must be positive")
    if cfg.adam_lr <= 0.0:
        out.append("adam.lr: must be positive")
    if any(lr <= 0.0 for lr in cfg.coeff_lr):
        out.append("adam.coeff_lr: rates must be positive")
    for name, value in (("adam.iters", cfg.adam_iters),
                        ("lbfgs.iters", cfg.lbfgs_iters),
                        ("lbfgs.memory", cfg.lbfgs_memory)):
        if value < 1:
            out.append(f"{name}: must be positive")
    if cfg.lbfgs_tol <= 0.0:
        out.append("lbfgs.tolerance: must be positive")
    if cfg.warmup_iters < 0:
        out.append("lbfgs.warmup_iters: must be nonnegative")
    if cfg.warmup_iters > 0 and cfg.warmup_lr <= 0.0:
        out.append("lbfgs.warmup_lr: must be positive when warmup is enabled")
    if cfg.method == "sepinn-c" and cfg.truncation < 1:
        out.append("series.truncation: required for method sepinn-c")
    if cfg.method == "sepinn-n" and not cfg.aux_widths:
        out.append("network.aux_widths: required for method sepinn-n")
    if cfg.aux_widths:
        if len(cfg.aux_widths) < 2 or any(w < 1 for w in cfg.aux_widths):
            out.append("network.aux_widths: need at least input and output layers, all positive")
        elif cfg.aux_widths[0] not in (2, 3) or cfg.aux_widths[-1] != 1:
            out.append("network.aux_widths: input width must be 2 (r, z) or 3 (x, y, z),"
                       " output width 1")
    if len(cfg.nu) != 2 or any(v <= 0 for v in cfg.nu):
        out.append("eigen.nu: needs two positive drift weights")
    if cfg.validation_n < 1:
        out.append("evaluate.validation_n: must be positive")
    if cfg.error_n < 1000:
        out.append("evaluate.n_samples: error estimation needs at least 1000 samples")
    if out:
        return out

    # Cross-checks that need the problem instance.
    try:
        trunc = cfg.truncation if cfg.truncation >= 1 else None
        problem = pr.get_problem(cfg.problem, truncation=trunc)
    except ValueError as exc:
        return [f"series.truncation: {exc}"]
    dim = problem.dim
    if cfg.widths[0] != dim:
        out.append(f"network.widths: input width {cfg.widths[0]} does not match"
                   f" problem dimension {dim}")
    if cfg.method == "eigen" and problem.kind != "eigen":
        out.append(f"run.method: eigen method needs an eigenvalue problem,"
                   f" got {cfg.problem!r}")
    if cfg.method != "eigen" and problem.kind == "eigen":
        out.append(f"run.method: problem {cfg.problem!r} is an eigenvalue problem;"
                   " use method eigen")
    if cfg.method in ("sepinn-c", "sepinn-n") and dim != 3:
        out.append(f"run.method: {cfg.method} applies to 3D edge problems")
    if cfg.n_neumann == 0 and problem.domain.boundary_measure("neumann") > 0.0:
        out.append("samples.n_neumann: problem has a Neumann boundary part")
    if cfg.n_neumann > 0 and problem.domain.boundary_measure("neumann") == 0.0:
        out.append("samples.n_neumann: problem has no Neumann boundary part")
    return out
