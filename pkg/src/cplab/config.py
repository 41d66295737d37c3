"""Text specs for models and sweeps.

Weight models, scale functions, and graph models all have a one-line
spelling (the same one their describe() methods print), so command lines
and config files can name them without code.  Sweep configurations live
in INI-style files: a [sweep] section holds the grids and defaults, and
optional [cell ...] sections override replicas or the time horizon for
a single (n, lambda) cell.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

from .structure import SearchConfig
from .weights import ScaleFunction, WeightModel

__all__ = [
    "SpecError",
    "parse_weight_model",
    "parse_scale",
    "parse_graph_model",
    "GraphModelSpec",
    "SweepConfig",
    "load_sweep_config",
]


class SpecError(ValueError):
    pass


_CALL_RE = re.compile(r"^\s*([a-z_]+)\s*(?:\(\s*(.*?)\s*\))?\s*$", re.S)


def _parse_call(text):
    """Split 'name(a=1, b=2)' into the name and an argument list."""
    m = _CALL_RE.match(text)
    if not m:
        raise SpecError(f"cannot parse spec {text!r}")
    name, body = m.group(1), m.group(2)
    if body is None or not body.strip():
        return name, []
    return name, [a.strip() for a in body.split(",") if a.strip()]


def _split_kwargs(args, positional_names):
    """Arguments as a dict; bare values fill `positional_names` in order."""
    out = {}
    pos = 0
    for a in args:
        if "=" in a:
            k, v = (s.strip() for s in a.split("=", 1))
            out[k] = v
        else:
            if pos >= len(positional_names):
                raise SpecError(f"too many positional arguments in {args}")
            out[positional_names[pos]] = a
            pos += 1
    return out


def parse_weight_model(text) -> WeightModel:
    """Accepts the forms WeightModel.describe emits, e.g. powerlaw(alpha=2.5)."""
    name, args = _parse_call(text)
    try:
        if name == "constant":
            kw = _split_kwargs(args, ["c"])
            return WeightModel.constant(float(kw["c"]))
        if name == "two_point":
            kw = _split_kwargs(args, ["low", "high", "p"])
            p = kw.get("p", kw.get("p_high"))
            return WeightModel.two_point(float(kw["low"]), float(kw["high"]), float(p))
        if name == "powerlaw":
            kw = _split_kwargs(args, ["alpha", "xmin"])
            return WeightModel.powerlaw(
                float(kw["alpha"]), float(kw.get("xmin", 1.0))
            )
        if name == "table":
            values, probs = [], []
            for a in args:
                if ":" not in a:
                    raise SpecError(f"table entries are value:prob, got {a!r}")
                v, p = a.split(":", 1)
                values.append(float(v))
                probs.append(float(p))
            return WeightModel.table(values, probs)
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, SpecError):
            raise
        raise SpecError(f"bad weight model spec {text!r}: {err}") from None
    raise SpecError(f"unknown weight model {name!r}")


def parse_scale(text) -> ScaleFunction:
    name, args = _parse_call(text)
    try:
        if name == "identity":
            return ScaleFunction.identity()
        if name == "sqrt":
            return ScaleFunction.sqrt()
        if name == "power":
            kw = _split_kwargs(args, ["beta"])
            return ScaleFunction.power(float(kw["beta"]))
        if name == "log":
            kw = _split_kwargs(args, ["coeff"])
            return ScaleFunction.log(float(kw.get("coeff", 1.0)))
        if name == "table":
            table = {}
            for a in args:
                k, v = a.split(":", 1)
                table[int(k)] = float(v)
            return ScaleFunction.from_table(table)
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, SpecError):
            raise
        raise SpecError(f"bad scale spec {text!r}: {err}") from None
    raise SpecError(f"unknown scale function {name!r}")


@dataclass(frozen=True)
class GraphModelSpec:
    """What family of graph to draw and with which parameters.

    kind er: binomial graph with edge probability p/n.
    kind irg: rank-one graph with i.i.d. weights from `weights`.
    kind glued_star: deterministic star path; n is ignored in favor of
    spine_length * star_size.
    """

    kind: str
    p: float | None = None
    weights: WeightModel | None = None
    spine_length: int | None = None
    star_size: int | None = None

    def describe(self):
        if self.kind == "er":
            return f"er(p={self.p!r})"
        if self.kind == "irg":
            return f"irg({self.weights.describe()})"
        return f"glued_star(spine={self.spine_length}, star={self.star_size})"


def parse_graph_model(text) -> GraphModelSpec:
    name, args = _parse_call(text)
    if name == "er":
        kw = _split_kwargs(args, ["p"])
        try:
            return GraphModelSpec("er", p=float(kw["p"]))
        except (KeyError, ValueError):
            raise SpecError(f"er spec needs p, got {text!r}") from None
    if name == "irg":
        if not args:
            raise SpecError("irg spec needs a weight model")
        return GraphModelSpec("irg", weights=parse_weight_model(",".join(args)))
    if name == "glued_star":
        kw = _split_kwargs(args, ["spine", "star"])
        try:
            return GraphModelSpec(
                "glued_star",
                spine_length=int(kw["spine"]),
                star_size=int(kw["star"]),
            )
        except (KeyError, ValueError):
            raise SpecError(f"glued_star spec needs spine and star, got {text!r}") from None
    raise SpecError(f"unknown graph model {name!r}")


@dataclass(frozen=True)
class SweepConfig:
    """One sweep: a grid of (n, lambda) cells over a single graph model.

    t_max is either a positive float or the string "pilot", which sizes
    the horizon per cell from a short pilot batch.  cell_overrides maps
    (n, lambda) to {replicas, t_max} replacements.
    """

    model: GraphModelSpec
    lambda_grid: tuple
    n_grid: tuple
    replicas: int
    t_max: object
    out_dir: str
    base_seed: int
    structure: SearchConfig | None = None
    cell_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.lambda_grid or not self.n_grid:
            raise SpecError("sweep grids must be nonempty")
        if self.replicas < 1:
            raise SpecError("replicas must be >= 1")
        if self.t_max != "pilot" and not float(self.t_max) > 0:
            raise SpecError("t_max must be positive or 'pilot'")

    def cells(self):
        for n in self.n_grid:
            for lam in self.lambda_grid:
                yield n, lam

    def cell_plan(self, n, lam):
        override = self.cell_overrides.get((n, lam), {})
        replicas = int(override.get("replicas", self.replicas))
        t_max = override.get("t_max", self.t_max)
        if t_max != "pilot":
            t_max = float(t_max)
        return replicas, t_max


def _parse_grid(text, cast):
    vals = tuple(cast(v) for v in re.split(r"[,\s]+", text.strip()) if v)
    if not vals:
        raise SpecError(f"empty grid {text!r}")
    return vals


_CELL_RE = re.compile(r"^cell\s+n\s*=\s*(\S+)\s+lambda\s*=\s*(\S+)$")


def load_sweep_config(path) -> SweepConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise SpecError(f"cannot read sweep config {path!r}")
    if "sweep" not in parser:
        raise SpecError("sweep config needs a [sweep] section")
    s = parser["sweep"]
    try:
        model = parse_graph_model(s["model"])
        lambda_grid = _parse_grid(s["lambda"], float)
        n_grid = _parse_grid(s["n"], int)
        replicas = s.getint("replicas")
        t_max = s.get("t_max", "pilot").strip()
        if t_max != "pilot":
            t_max = float(t_max)
        out_dir = s.get("out", "sweep_out")
        base_seed = s.getint("base_seed", 0)
    except (KeyError, ValueError) as err:
        if isinstance(err, SpecError):
            raise
        raise SpecError(f"bad [sweep] section: {err}") from None

    structure = None
    if "structure" in parser:
        t = parser["structure"]
        structure = SearchConfig(
            seed_size=t.getint("seed_size"),
            scale=parse_scale(t.get("scale", "sqrt")),
            levels=t.getint("levels", 1),
            max_trials=t.getint("max_trials", fallback=None),
            growth_fraction=t.getfloat("growth_fraction", 0.02),
            seed=t.getint("seed", 0),
        )

    overrides = {}
    for section in parser.sections():
        if section in ("sweep", "structure"):
            continue
        m = _CELL_RE.match(section)
        if not m:
            raise SpecError(f"unrecognized section [{section}]")
        key = (int(m.group(1)), float(m.group(2)))
        if key[0] not in n_grid or key[1] not in lambda_grid:
            raise SpecError(f"section [{section}] is outside the grids")
        cell = {}
        if parser.has_option(section, "replicas"):
            cell["replicas"] = parser.getint(section, "replicas")
        if parser.has_option(section, "t_max"):
            raw = parser.get(section, "t_max").strip()
            cell["t_max"] = raw if raw == "pilot" else float(raw)
        overrides[key] = cell

    return SweepConfig(
        model=model,
        lambda_grid=lambda_grid,
        n_grid=n_grid,
        replicas=replicas,
        t_max=t_max,
        out_dir=out_dir,
        base_seed=base_seed,
        structure=structure,
        cell_overrides=overrides,
    )
