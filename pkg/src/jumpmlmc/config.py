"""Problem configuration: flat key-value files with a small expression grammar.

A config file is plain text, one ``section.key = value`` per line, ``#``
comments allowed.  An empty file yields the full default experiment
(unit square, T = 1, u0 = 0.1 sin(pi x1) sin(pi x2), f = 1, Matern-1.5
field with sigma = 0.5 and chi = 0.1, b = max(-2 a, -5), Gaussian-bump QoI
weight).  Expressions may use the coordinates ``x1, x2``, time ``t`` (source
term only), ``pi``, arithmetic and the functions sin, cos, exp, sqrt, abs.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
import numpy as np

from .fem import QoISpec
from .jump_field import DEFAULT_JUMP_LAWS, BMap
from .random_field import CovarianceSpec

__all__ = ["ConfigError", "Expr", "ProblemConfig", "load_config", "loads_config", "dumps_config"]


class ConfigError(ValueError):
    """Configuration parse or validation failure with key context."""


_ALLOWED_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs}
_ALLOWED_NAMES = {"x1", "x2", "t", "pi"}
_ALLOWED_OPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


class Expr:
    """Validated closed-form expression of ``x1, x2`` and optionally ``t``."""

    __slots__ = ("source", "_code", "_names")

    def __init__(self, source: str):
        self.source = str(source).strip()
        try:
            tree = ast.parse(self.source, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"invalid expression {self.source!r}: {exc.msg}") from None
        names: set[str] = set()
        for node in ast.walk(tree):
            if isinstance(node, (ast.Expression, ast.Constant)):
                if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
                    raise ConfigError(f"non-numeric constant in {self.source!r}")
            elif isinstance(node, ast.Name):
                if node.id in _ALLOWED_FUNCS:
                    continue
                if node.id not in _ALLOWED_NAMES:
                    raise ConfigError(f"unknown name {node.id!r} in {self.source!r}")
                names.add(node.id)
            elif isinstance(node, ast.Call):
                if not (isinstance(node.func, ast.Name) and node.func.id in _ALLOWED_FUNCS):
                    raise ConfigError(f"unknown function in {self.source!r}")
                if node.keywords:
                    raise ConfigError(f"keyword arguments not allowed in {self.source!r}")
            elif isinstance(node, ast.BinOp) or isinstance(node, ast.UnaryOp):
                if not isinstance(node.op, _ALLOWED_OPS):
                    raise ConfigError(f"operator not allowed in {self.source!r}")
            elif isinstance(node, (ast.Load, *_ALLOWED_OPS)):
                pass
            else:
                raise ConfigError(f"construct {type(node).__name__} not allowed in {self.source!r}")
        self._names = frozenset(names)
        self._code = compile(tree, "<config-expr>", "eval")

    @property
    def time_dependent(self) -> bool:
        return "t" in self._names

    @property
    def is_zero(self) -> bool:
        try:
            return float(self.source) == 0.0
        except ValueError:
            return False

    def __call__(self, pts: np.ndarray, t: float = 0.0) -> np.ndarray:
        ns = {"x1": pts[..., 0], "x2": pts[..., 1], "t": t, "pi": math.pi, **_ALLOWED_FUNCS}
        out = eval(self._code, {"__builtins__": {}}, ns)  # noqa: S307 - validated AST
        if np.ndim(out) == 0:
            return np.full(pts.shape[:-1], float(out))
        return np.asarray(out, dtype=float)

    def __eq__(self, other) -> bool:
        return isinstance(other, Expr) and self.source == other.source

    def __hash__(self) -> int:
        return hash(self.source)

    def __repr__(self) -> str:
        return f"Expr({self.source!r})"

    def __reduce__(self):
        return (Expr, (self.source,))


class _SpatialExpr:
    """Adapter binding an Expr to spatial-only evaluation (picklable)."""

    __slots__ = ("expr",)
    time_dependent = False

    def __init__(self, expr: Expr):
        self.expr = expr

    def __call__(self, pts: np.ndarray, t: float = 0.0) -> np.ndarray:
        return self.expr(pts)

    def __reduce__(self):
        return (_SpatialExpr, (self.expr,))


@dataclass(frozen=True)
class ProblemConfig:
    """Full experiment description (domain fixed to the unit square)."""

    T: float = 1.0
    u0: Expr = field(default_factory=lambda: Expr("0.1*sin(pi*x1)*sin(pi*x2)"))
    f: Expr = field(default_factory=lambda: Expr("1"))
    a_bar: Expr = field(default_factory=lambda: Expr("0"))
    phi: str = "exp"
    b1: Expr = field(default_factory=lambda: Expr("-2"))
    b2: Expr = field(default_factory=lambda: Expr("-5"))
    clamp_mode: str = "max"
    covariance: CovarianceSpec = field(default_factory=lambda: CovarianceSpec(nu=1.5, sigma2=0.25, chi=0.1))
    jump_laws: tuple[tuple[float, float], ...] = DEFAULT_JUMP_LAWS
    qoi_weight: Expr = field(default_factory=lambda: Expr("exp(-0.25*((0.25-x1)**2+(0.75-x2)**2))"))
    qoi_rule: str = "terminal"
    methods: tuple[str, ...] = ("adapted", "nonadapted")
    levels: tuple[int, ...] = (0, 1, 2, 3)
    reps: int = 20
    ref_level: int = 5
    kappa: float = 1.0
    seed: int = 2025
    solver: str = "lu"
    workers: int = 1

    def __post_init__(self):
        if not (self.T > 0.0):
            raise ConfigError("problem.T must be positive")
        if not (0.5 < self.kappa <= 1.0):
            raise ConfigError("study.kappa must lie in (1/2, 1]")
        if self.clamp_mode not in ("min", "max"):
            raise ConfigError("coefficient.clamp must be 'min' or 'max'")
        if self.qoi_rule not in ("terminal", "time-integral"):
            raise ConfigError("qoi.rule must be 'terminal' or 'time-integral'")
        if self.solver not in ("lu", "bicgstab"):
            raise ConfigError("run.solver must be 'lu' or 'bicgstab'")
        if self.phi != "exp":
            raise ConfigError("coefficient.phi must be 'exp'")
        for name in ("u0", "a_bar", "b1", "b2", "qoi_weight"):
            if getattr(self, name).time_dependent:
                raise ConfigError(f"{name} must not depend on t")
        if len(self.jump_laws) != 4:
            raise ConfigError("exactly four jump laws required")
        for lo, hi in self.jump_laws:
            if not (0.0 <= lo < hi):
                raise ConfigError("jump laws must be uniform(lo, hi) with 0 <= lo < hi")
        if not self.levels or list(self.levels) != sorted(set(self.levels)) or self.levels[0] < 0:
            raise ConfigError("study.levels must be strictly increasing and non-negative")
        if self.reps < 1:
            raise ConfigError("study.reps must be >= 1")
        if self.workers < 1:
            raise ConfigError("run.workers must be >= 1")
        if self.seed < 0:
            raise ConfigError("run.seed must be non-negative")
        if not self.methods:
            raise ConfigError("study.methods must name at least one method")
        for m in self.methods:
            base = m[:-len("-coupled")] if m.endswith("-coupled") else m
            base = base[:-len("-standard")] if base.endswith("-standard") else base
            if base not in ("adapted", "nonadapted"):
                raise ConfigError(f"unknown method {m!r}")

    # callable views used by the FEM pipeline ------------------------------
    def u0_fn(self):
        return _SpatialExpr(self.u0)

    def f_fn(self):
        return self.f

    def a_bar_fn(self):
        return None if self.a_bar.is_zero else _SpatialExpr(self.a_bar)

    def b_map(self) -> BMap:
        return BMap(b1=_SpatialExpr(self.b1), b2=_SpatialExpr(self.b2), mode=self.clamp_mode)

    def qoi_spec(self) -> QoISpec:
        return QoISpec(weight=_SpatialExpr(self.qoi_weight), time_rule=self.qoi_rule)


def _parse_levels(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(",") if v.strip())


def _parse_law(text: str) -> tuple[float, float]:
    text = text.strip()
    if not (text.startswith("uniform(") and text.endswith(")")):
        raise ConfigError(f"jump law must look like 'uniform(lo, hi)', got {text!r}")
    lo, hi = text[len("uniform("):-1].split(",")
    return (float(lo), float(hi))


def _fmt_law(law: tuple[float, float]) -> str:
    return f"uniform({law[0]!r}, {law[1]!r})"


_KEYS = {
    "problem.T": ("T", float, lambda c: repr(c.T)),
    "problem.u0": ("u0", Expr, lambda c: c.u0.source),
    "problem.f": ("f", Expr, lambda c: c.f.source),
    "problem.a_bar": ("a_bar", Expr, lambda c: c.a_bar.source),
    "coefficient.phi": ("phi", str, lambda c: c.phi),
    "coefficient.b1": ("b1", Expr, lambda c: c.b1.source),
    "coefficient.b2": ("b2", Expr, lambda c: c.b2.source),
    "coefficient.clamp": ("clamp_mode", str, lambda c: c.clamp_mode),
    "covariance.nu": ("_cov_nu", float, lambda c: repr(c.covariance.nu)),
    "covariance.sigma2": ("_cov_sigma2", float, lambda c: repr(c.covariance.sigma2)),
    "covariance.chi": ("_cov_chi", float, lambda c: repr(c.covariance.chi)),
    "jumps.law0": ("_law0", _parse_law, lambda c: _fmt_law(c.jump_laws[0])),
    "jumps.law1": ("_law1", _parse_law, lambda c: _fmt_law(c.jump_laws[1])),
    "jumps.law2": ("_law2", _parse_law, lambda c: _fmt_law(c.jump_laws[2])),
    "jumps.law3": ("_law3", _parse_law, lambda c: _fmt_law(c.jump_laws[3])),
    "qoi.weight": ("qoi_weight", Expr, lambda c: c.qoi_weight.source),
    "qoi.rule": ("qoi_rule", str, lambda c: c.qoi_rule),
    "study.methods": ("methods", lambda s: tuple(v.strip() for v in s.split(",") if v.strip()),
                      lambda c: ",".join(c.methods)),
    "study.levels": ("levels", _parse_levels, lambda c: ",".join(str(v) for v in c.levels)),
    "study.reps": ("reps", int, lambda c: str(c.reps)),
    "study.ref_level": ("ref_level", int, lambda c: str(c.ref_level)),
    "study.kappa": ("kappa", float, lambda c: repr(c.kappa)),
    "run.seed": ("seed", int, lambda c: str(c.seed)),
    "run.solver": ("solver", str, lambda c: c.solver),
    "run.workers": ("workers", int, lambda c: str(c.workers)),
}


def loads_config(text: str) -> ProblemConfig:
    """Parse a config from text; unknown keys and bad values are rejected."""
    updates: dict[str, object] = {}
    cov: dict[str, float] = {}
    laws: dict[int, tuple[float, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser, _ = _KEYS[key]
        try:
            parsed = parser(value)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        if attr.startswith("_cov_"):
            cov[attr[len("_cov_"):]] = parsed
        elif attr.startswith("_law"):
            laws[int(attr[len("_law"):])] = parsed
        else:
            updates[attr] = parsed
    base = ProblemConfig()
    if cov:
        merged = {"nu": base.covariance.nu, "sigma2": base.covariance.sigma2,
                  "chi": base.covariance.chi, **cov}
        try:
            updates["covariance"] = CovarianceSpec(**merged)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if laws:
        full = list(base.jump_laws)
        for idx, law in laws.items():
            full[idx] = law
        updates["jump_laws"] = tuple(full)
    try:
        return replace(base, **updates)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ProblemConfig:
    """Read and validate a config file; an empty file gives the defaults."""
    with open(path) as fh:
        return loads_config(fh.read())


def dumps_config(cfg: ProblemConfig) -> str:
    """Canonical serialization; ``loads_config`` round-trips it exactly."""
    lines = [f"{key} = {fmt(cfg)}" for key, (_, _, fmt) in _KEYS.items()]
    return "\n".join(lines) + "\n"
