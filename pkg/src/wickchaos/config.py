"""INI scenario files.

Sections: ``grid``, ``time``, ``truncation``, ``operator``, ``perturbations``,
``initial``, ``solve``, ``norms``, ``output``.  Every problem found is collected
before a :class:`ConfigValidationError` is raised, so one run reports them all.
"""
import configparser
import math
import os
from dataclasses import dataclass, field as dc_field

import numpy as np

from .exceptions import ConfigParseError, ConfigValidationError, EllipticityError
from .expr import Expression, ExpressionError
from .field import Grid1D, GridFunction
from .hermite import hermite_fn
from .multiindex import MultiIndex, TruncationPolicy
from .propagator import SCHEMES, CoefficientSet, PropagatorConfig
from .solver import Nonlinearity, SPDEProblem
from .wick import ChaosField, wick_square

PRESETS = {
    "zero": "0",
    "one": "1",
    "gaussian": "exp(-x^2/2)",
    "bump_metric": "1 + 0.3*exp(-x^2/4)",
    "smooth_magnetic": "0.5*x*exp(-x^2/8)",
    "soft_well": "-exp(-x^2/4)",
}

MODES = ("linear", "semilinear", "wick2")
NONLINEARITIES = ("zero", "linear", "constant", "wick_square")
SECTIONS = ("grid", "time", "truncation", "operator", "perturbations", "initial", "solve",
            "norms", "output")


@dataclass
class ScenarioConfig:
    L: float
    M: int
    T: float
    dt: float
    K: int
    N: int
    a: str = "one"
    b: str = "zero"
    v: str = "zero"
    ellipticity: float = 10.0
    scheme: str = "spectral"
    perturbations: dict = dc_field(default_factory=dict)
    initial: dict = dc_field(default_factory=dict)
    white_noise_potential: bool = False
    rho: float = 1.0
    noise_scale: float = 1.0
    mode: str = "linear"
    lam: float = 0.0
    nonlinearity: str = "zero"
    coupling: float = 0.0
    lipschitz: float = None
    radius: float = math.inf
    propagator_bound: float = None
    picard_tol: float = 1e-12
    picard_max_iters: int = 60
    linear_solver_tol: float = 1e-12
    max_solver_iters: int = 200
    z: int = 0
    zeta: float = 0.0
    r: float = 0.0
    q: tuple = ()
    directory: str = "out"
    stride: int = 1
    source: str = None

    # -- builders ---------------------------------------------------------

    @property
    def grid(self):
        return Grid1D(self.L, self.M)

    @property
    def policy(self):
        return TruncationPolicy(self.K, self.N)

    def profile(self, text):
        return GridFunction(self.grid, Expression(PRESETS.get(text.strip(), text))(self.grid.nodes))

    def coefficients(self):
        a = self.profile(self.a)
        b = self.profile(self.b)
        return CoefficientSet(GridFunction(self.grid, a.real), GridFunction(self.grid, b.real),
                              self.profile(self.v), ellipticity=self.ellipticity)

    def perturbation_fields(self):
        out = {MultiIndex.parse(k): self.profile(e) for k, e in self.perturbations.items()}
        if self.white_noise_potential:
            x = self.grid.nodes
            for k in range(1, self.K + 1):
                beta = MultiIndex.unit(k)
                sigma = self.noise_scale * (2.0 * k) ** (-self.rho)
                prof = GridFunction(self.grid, sigma * hermite_fn(k, x))
                out[beta] = out[beta] + prof if beta in out else prof
        return out

    def problem(self):
        return SPDEProblem(self.coefficients(), self.perturbation_fields(), self.policy, self.T,
                           r=self.r, scheme=self.scheme)

    def initial_field(self):
        coeffs = {MultiIndex.parse(k): self.profile(e) for k, e in self.initial.items()}
        return ChaosField(self.policy, self.grid, coeffs)

    def propagator_config(self):
        return PropagatorConfig(dt=self.dt, linear_solver_tol=self.linear_solver_tol,
                                max_solver_iters=self.max_solver_iters)

    def nonlinearity_term(self):
        """The semilinear ``F`` named in the ``solve`` section."""
        c = self.coupling
        kind = self.nonlinearity
        if kind == "zero":
            def func(u):
                return ChaosField(u.policy, u.grid)
            lip = 0.0
        elif kind == "linear":
            def func(u):
                return c * u
            lip = abs(c)
        elif kind == "constant":
            def func(u):
                return ChaosField(u.policy, u.grid, {MultiIndex.zero(): np.full(u.grid.points, c)})
            lip = 0.0
        else:
            def func(u):
                return c * wick_square(u)
            lip = 2.0 * abs(c) * (self.radius if math.isfinite(self.radius) else 1.0)
        if self.lipschitz is not None:
            lip = self.lipschitz
        return Nonlinearity(func, lip, radius=self.radius, propagator_bound=self.propagator_bound)


def _line_of(cp_lines, section, key=None):
    # 1-based line number of a section header or key, for error messages
    sec = None
    for i, raw in enumerate(cp_lines, start=1):
        s = raw.strip()
        if s.startswith("[") and s.endswith("]"):
            sec = s[1:-1].strip().lower()
            if key is None and sec == section:
                return i
            continue
        if sec == section and key is not None:
            name = s.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key.lower():
                return i
    return None


def read_config_text(text, source=None):
    """Parse INI text into a validated :class:`ScenarioConfig`."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<string>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("content before the first [section] header", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigParseError("malformed line (expected key = value)", lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigParseError(str(exc.message if hasattr(exc, "message") else exc),
                               getattr(exc, "lineno", None)) from None
    lines = text.splitlines()
    errors = []

    def where(section, key=None):
        ln = _line_of(lines, section, key)
        return f"[{section}] {key}" + (f" (line {ln})" if ln else "") if key else f"[{section}]"

    for sec in cp.sections():
        if sec not in SECTIONS:
            errors.append(f"{where(sec)}: unknown section")

    def get(section, key, conv, default=None, required=False):
        if not cp.has_section(section) or not cp.has_option(section, key):
            if required:
                errors.append(f"[{section}] {key}: missing required value")
            return default
        raw = cp.get(section, key).strip()
        try:
            return conv(raw)
        except (ValueError, TypeError):
            errors.append(f"{where(section, key)}: cannot interpret {raw!r}")
            return default

    def boolean(raw):
        low = raw.lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(raw)

    def integer(raw):
        val = float(raw)
        if val != int(val):
            raise ValueError(raw)
        return int(val)

    def floats(raw):
        return tuple(float(p) for p in raw.split(",") if p.strip())

    known = {
        "grid": {"L", "M"},
        "time": {"T", "dt"},
        "truncation": {"K", "N"},
        "operator": {"a", "b", "v", "ellipticity", "scheme"},
        "initial": {"white_noise_potential", "rho", "scale"},
        "solve": {"mode", "lambda", "nonlinearity", "coupling", "lipschitz", "radius",
                  "propagator_bound", "picard_tol", "picard_max_iters", "linear_solver_tol",
                  "max_solver_iters"},
        "norms": {"z", "zeta", "r", "q"},
        "output": {"directory", "stride"},
    }
    for sec, keys in known.items():
        if cp.has_section(sec):
            for k in cp.options(sec):
                if k not in keys and not (sec == "initial" and k.startswith("(")):
                    errors.append(f"{where(sec, k)}: unknown key")

    cfg = ScenarioConfig(
        L=get("grid", "L", float, 1.0, required=True),
        M=get("grid", "M", integer, 2, required=True),
        T=get("time", "T", float, 1.0, required=True),
        dt=get("time", "dt", float, 1.0, required=True),
        K=get("truncation", "K", integer, 1, required=True),
        N=get("truncation", "N", integer, 0, required=True),
        a=get("operator", "a", str, "one"),
        b=get("operator", "b", str, "zero"),
        v=get("operator", "v", str, "zero"),
        ellipticity=get("operator", "ellipticity", float, 10.0),
        scheme=get("operator", "scheme", str, "spectral"),
        white_noise_potential=get("initial", "white_noise_potential", boolean, False),
        rho=get("initial", "rho", float, 1.0),
        noise_scale=get("initial", "scale", float, 1.0),
        mode=get("solve", "mode", str, "linear"),
        lam=get("solve", "lambda", float, 0.0),
        nonlinearity=get("solve", "nonlinearity", str, "zero"),
        coupling=get("solve", "coupling", float, 0.0),
        lipschitz=get("solve", "lipschitz", float, None),
        radius=get("solve", "radius", float, math.inf),
        propagator_bound=get("solve", "propagator_bound", float, None),
        picard_tol=get("solve", "picard_tol", float, 1e-12),
        picard_max_iters=get("solve", "picard_max_iters", integer, 60),
        linear_solver_tol=get("solve", "linear_solver_tol", float, 1e-12),
        max_solver_iters=get("solve", "max_solver_iters", integer, 200),
        z=get("norms", "z", integer, 0),
        zeta=get("norms", "zeta", float, 0.0),
        r=get("norms", "r", float, 0.0),
        q=get("norms", "q", floats, ()),
        directory=get("output", "directory", str, "out"),
        stride=get("output", "stride", integer, 1),
        source=source,
    )
    if cp.has_section("perturbations"):
        cfg.perturbations = dict(cp.items("perturbations"))
    if cp.has_section("initial"):
        cfg.initial = {k: v for k, v in cp.items("initial") if k.startswith("(")}

    _validate(cfg, errors, where)
    if errors:
        raise ConfigValidationError(errors)
    return cfg


def _validate(cfg, errors, where):
    grid_ok = True
    try:
        Grid1D(cfg.L, cfg.M)
    except ValueError as exc:
        errors.append(f"[grid]: {exc}")
        grid_ok = False
    if not cfg.dt > 0:
        errors.append(f"{where('time', 'dt')}: must be positive")
    elif not cfg.T > 0:
        errors.append(f"{where('time', 'T')}: must be positive")
    else:
        n = round(cfg.T / cfg.dt)
        if abs(n * cfg.dt - cfg.T) > 1e-12 * cfg.T:
            errors.append(f"{where('time', 'dt')}: dt={cfg.dt} does not divide T={cfg.T}")
    policy = None
    try:
        policy = TruncationPolicy(cfg.K, cfg.N)
    except ValueError as exc:
        errors.append(f"[truncation]: {exc}")
    if cfg.scheme not in SCHEMES:
        errors.append(f"{where('operator', 'scheme')}: unknown scheme {cfg.scheme!r}")
    if cfg.mode not in MODES:
        errors.append(f"{where('solve', 'mode')}: unknown mode {cfg.mode!r}; choose from {MODES}")
    if cfg.nonlinearity not in NONLINEARITIES:
        errors.append(f"{where('solve', 'nonlinearity')}: unknown nonlinearity {cfg.nonlinearity!r}")
    if cfg.white_noise_potential and not cfg.rho > 0.5:
        errors.append(f"{where('initial', 'rho')}: must exceed 1/2 for a summable noise potential")
    if cfg.z < 0:
        errors.append(f"{where('norms', 'z')}: must be non-negative")
    if cfg.r < 0:
        errors.append(f"{where('norms', 'r')}: must be non-negative")
    if cfg.stride < 1:
        errors.append(f"{where('output', 'stride')}: must be a positive integer")
    if not cfg.linear_solver_tol > 0:
        errors.append(f"{where('solve', 'linear_solver_tol')}: must be positive")

    exprs_ok = True
    for sec, key, text in (("operator", "a", cfg.a), ("operator", "b", cfg.b), ("operator", "v", cfg.v)):
        try:
            Expression(PRESETS.get(text.strip(), text))
        except ExpressionError as exc:
            errors.append(f"{where(sec, key)}: {exc}")
            exprs_ok = False
    for sec, table in (("perturbations", cfg.perturbations), ("initial", cfg.initial)):
        for key, text in table.items():
            try:
                alpha = MultiIndex.parse(key)
            except ValueError as exc:
                errors.append(f"{where(sec, key)}: {exc}")
                continue
            if policy is not None and not policy.admits(alpha):
                errors.append(f"{where(sec, key)}: index {alpha} violates K={cfg.K}, N={cfg.N}")
            if sec == "perturbations" and alpha.is_zero():
                errors.append(f"{where(sec, key)}: perturbations need a nonzero index")
            try:
                Expression(PRESETS.get(text.strip(), text))
            except ExpressionError as exc:
                errors.append(f"{where(sec, key)}: {exc}")
                exprs_ok = False
    if grid_ok and exprs_ok:
        try:
            cfg.coefficients()
        except EllipticityError as exc:
            errors.append(f"{where('operator', 'a')}: {exc}")
        except ValueError as exc:
            errors.append(f"[operator]: {exc}")


def parse_config(path):
    """Read and validate a scenario file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from None
    return read_config_text(text, source=os.fspath(path))


def scenario_path(name):
    """Location of a shipped scenario file by bare name (``"free_gaussian"``)."""
    here = os.path.join(os.path.dirname(__file__), "scenarios")
    path = os.path.join(here, name if name.endswith(".ini") else name + ".ini")
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    return path


def shipped_scenarios():
    here = os.path.join(os.path.dirname(__file__), "scenarios")
    return sorted(f[:-4] for f in os.listdir(here) if f.endswith(".ini"))
