"""Experiment configuration: a flat ``key = value`` text format.

Lines are ``dotted.key = value``; ``#`` starts a comment.  Vectors are
comma separated.  Unknown keys are errors.  ``reference_page()`` renders the
key table below as the documented defaults.
"""
from dataclasses import dataclass, field, replace

from .presets import InitialDataSpec


class ConfigError(ValueError):
    """Invalid configuration file or value."""


def _vec(n):
    def parse(text):
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return tuple(float(p) for p in parts)
    parse.__name__ = f"vec{n}"
    return parse


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _int_list(text):
    text = text.strip()
    if not text:
        return ()
    return tuple(int(p) for p in text.replace(" ", "").split(","))


def _M(text):
    text = text.strip()
    return "coupled" if text == "coupled" else int(text)


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise ValueError("seed must fit in 64 unsigned bits")
    return value


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    return str(value)


# key -> (attribute path, parser, description)
KEYS = {
    "initial.rho0": ("initial.rho0", str, "density preset: uniform_ball | gaussian"),
    "initial.rho0.radius": ("initial.radius", float, "uniform_ball radius"),
    "initial.rho0.sigma": ("initial.sigma", float, "gaussian scale (truncated at 3 sigma)"),
    "initial.w0": ("initial.w0", str, "velocity preset: constant | shear | rotation | affine"),
    "initial.w0.c": ("initial.c", _vec(3), "constant part c"),
    "initial.w0.A": ("initial.A", _vec(9), "linear part A, row-major"),
    "initial.w0.omega": ("initial.omega", _vec(3), "rotation vector for w0 = omega x x"),
    "initial.g": ("initial.g", _vec(3), "gravity"),
    "initial.excl_factor": ("initial.excl_factor", float, "hard-core exclusion radius factor chi (r = chi N^-1/2)"),
    "N": ("N", int, "particle count"),
    "M": ("M", _M, "cloud size or 'coupled' (cloud on the initial particles)"),
    "T": ("T", float, "horizon"),
    "dt": ("dt", float, "time step"),
    "seed": ("seed", _seed, "master seed (64-bit)"),
    "diag_interval": ("diag_interval", int, "steps between diagnostics samples"),
    "output_dir": ("output_dir", str, "output directory"),
    "blob.kappa": ("kappa", float, "micro blob radius d = min(kappa N^-1/2, d_min/6), at least 4R"),
    "meso.delta_factor": ("delta_factor", float, "cloud mollification delta = factor * diam(supp rho0) * M^-1/3"),
    "meso.coupling": ("coupling", _bool, "solve the fluid (false forces u = 0)"),
    "drag.tol": ("drag_tol", float, "drag fixed-point tolerance (max norm, force units)"),
    "drag.max_iter": ("drag_max_iter", int, "drag fixed-point iteration cap"),
    "drag.theta": ("drag_theta", float, "initial drag damping"),
    "fluid.tol": ("fluid_tol", float, "fluid fixed-point tolerance (max norm, velocity units)"),
    "fluid.max_iter": ("fluid_max_iter", int, "fluid fixed-point iteration cap"),
    "fluid.theta": ("fluid_theta", float, "initial fluid damping"),
    "w2.method": ("w2_method", str, "exact | entropic"),
    "w2.cap": ("w2_cap", int, "largest cloud handled by the exact method"),
    "w2.entropic_fallback": ("w2_entropic_fallback", _bool, "use entropic transport above the cap"),
    "w2.epsilon": ("w2_epsilon", float, "entropic regularisation (0: 1e-3 * max squared distance)"),
    "lipschitz.k": ("lipschitz_k", int, "neighbours used by the Lipschitz monitor"),
    "lipschitz.threshold": ("lipschitz_threshold", float, "monitor value that triggers a warning record"),
    "sweep.n": ("sweep", _int_list, "particle counts of the convergence study (strictly increasing)"),
    "sweep.seeds": ("seeds_per_n", int, "replicates per particle count"),
    "record_wallclock": ("record_wallclock", _bool, "fill the wallclock column (breaks byte-identical output)"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    initial: InitialDataSpec = field(default_factory=InitialDataSpec)
    N: int = 512
    M: object = "coupled"
    T: float = 0.5
    dt: float = 0.01
    seed: int = 0
    diag_interval: int = 10
    output_dir: str = "out"
    kappa: float = 0.02
    delta_factor: float = 0.5
    coupling: bool = True
    drag_tol: float = 1e-12
    drag_max_iter: int = 200
    drag_theta: float = 1.0
    fluid_tol: float = 1e-12
    fluid_max_iter: int = 200
    fluid_theta: float = 1.0
    w2_method: str = "exact"
    w2_cap: int = 2048
    w2_entropic_fallback: bool = False
    w2_epsilon: float = 0.0
    lipschitz_k: int = 8
    lipschitz_threshold: float = 10.0
    sweep: tuple = ()
    seeds_per_n: int = 3
    record_wallclock: bool = False

    def __post_init__(self):
        problems = []
        if not self.dt > 0:
            problems.append("dt: must be positive")
        if not self.T >= 0:
            problems.append("T: must be nonnegative")
        if self.N < 1:
            problems.append("N: must be at least 1")
        if self.M != "coupled" and (not isinstance(self.M, int) or self.M < 1):
            problems.append("M: must be 'coupled' or a positive integer")
        for name in ("drag_tol", "fluid_tol", "kappa", "delta_factor", "drag_theta", "fluid_theta"):
            if not getattr(self, name) > 0:
                problems.append(f"{_key_of(name)}: must be positive")
        for name in ("drag_max_iter", "fluid_max_iter", "diag_interval", "lipschitz_k",
                     "seeds_per_n", "w2_cap"):
            if getattr(self, name) < 1:
                problems.append(f"{_key_of(name)}: must be at least 1")
        if self.w2_method not in ("exact", "entropic"):
            problems.append("w2.method: must be exact or entropic")
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            problems.append("sweep.n: values must be strictly increasing")
        if any(n < 1 for n in self.sweep):
            problems.append("sweep.n: values must be positive")
        if problems:
            raise ConfigError("; ".join(problems))

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))


def _key_of(attr):
    for key, (path, _, _) in KEYS.items():
        if path == attr:
            return key
    return attr


def from_mapping(values):
    """Build a config from ``{dotted key: parsed value}``; missing keys take defaults."""
    top, init = {}, {}
    for key, value in values.items():
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}")
        head, _, tail = KEYS[key][0].partition(".")
        if tail:
            init[tail] = value
        else:
            top[head] = value
    try:
        return ExperimentConfig(initial=InitialDataSpec(**init), **top)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def parse_text(text, source="<config>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = KEYS[key][1](value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from exc
    return from_mapping(values)


def parse_config(path):
    """Read an ``ExperimentConfig`` from a ``key = value`` file."""
    with open(path) as fh:
        return parse_text(fh.read(), str(path))


def to_mapping(config):
    out = {}
    for key, (path, _, _) in KEYS.items():
        head, _, tail = path.partition(".")
        out[key] = getattr(config.initial, tail) if tail else getattr(config, head)
    return out


def serialize(config):
    """Text form listing every key; ``parse_text(serialize(c)) == c``."""
    return "".join(f"{key} = {_fmt(value)}\n" for key, value in to_mapping(config).items())


def echo(config):
    """JSON-ready mapping of every key."""
    return {k: list(v) if isinstance(v, tuple) else v for k, v in to_mapping(config).items()}


def with_overrides(config, seed=None, sweep=None, output_dir=None):
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if sweep is not None:
        changes["sweep"] = tuple(sweep)
    if output_dir is not None:
        changes["output_dir"] = output_dir
    return replace(config, **changes) if changes else config


def reference_page():
    """Markdown table of every key with its default and meaning."""
    rows = ["| key | default | meaning |", "| --- | --- | --- |"]
    for key, value in to_mapping(ExperimentConfig()).items():
        meaning = KEYS[key][2].replace("|", "\\|")
        rows.append(f"| `{key}` | `{_fmt(value)}` | {meaning} |")
    return "# Configuration keys\n\n" + "\n".join(rows) + "\n"

