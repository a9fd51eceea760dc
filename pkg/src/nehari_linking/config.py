"""Run configuration: line-oriented ``section.key = value`` files.

Blank lines and ``#`` comments are ignored.  Lists are comma separated.
Every error message carries the offending line number (or the missing
field's dotted name).
"""
from dataclasses import dataclass, field
import hashlib
import json
import math
from pathlib import Path

from .errors import ConfigError


def _int(text):
    return int(text)


def _float(text):
    return float(text)


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _words(text):
    return [t.strip() for t in text.split(",") if t.strip()]


# dotted key -> (parser, default); default None marks a required field
SCHEMA = {
    "problem.N": (_int, None),
    "problem.lambda": (_float, None),
    "problem.s": (_float, None),
    "problem.rho": (_float, None),
    "problem.R_out": (_float, None),
    "problem.h": (_float, None),
    "problem.obstacle_axes": (_floats, []),
    "linking.x0": (_floats, [1.0, 0.0]),
    "linking.R_list": (_floats, [8.0, 12.0, 16.0]),
    "linking.t_samples": (_int, 21),
    "linking.y_samples": (_int, 16),
    "linking.separation": (_float, 2.0),
    "linking.n_theta": (_int, 8),
    "solver.tol": (_float, 1e-6),
    "solver.budget": (_int, 400),
    "solver.seed": (_int, 0),
    "solver.band": (_float, 0.05),
    "output.directory": (str, "runs/default"),
    "output.formats": (_words, ["json", "csv"]),
}

DEFAULT_TEXT = """\
# desk configuration
problem.N = 2
problem.lambda = 1.0
problem.s = 0.5
problem.rho = 1.0
problem.R_out = 40.0
problem.h = 0.1

linking.x0 = 1.0, 0.0
linking.R_list = 8, 12, 16
linking.t_samples = 21
linking.y_samples = 16
linking.separation = 2.0

solver.tol = 1e-6
solver.budget = 400
solver.seed = 0

output.directory = runs/default
output.formats = json, csv
"""


@dataclass
class RunConfig:
    values: dict
    source: str = "<string>"
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def problem(self):
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("problem.")}

    @property
    def linking(self):
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("linking.")}

    @property
    def solver(self):
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("solver.")}

    @property
    def output(self):
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("output.")}

    def canonical(self):
        return json.dumps(self.values, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_overrides(self, **overrides):
        vals = dict(self.values)
        for k, v in overrides.items():
            vals[k.replace("__", ".")] = v
        return RunConfig(vals, self.source, dict(self.lines))

    def validate(self, check_admissible=True):
        """Cross-field checks shared by the modules; raise ConfigError."""
        v = self.values

        def fail(key, msg):
            where = f" (line {self.lines[key]})" if key in self.lines else ""
            raise ConfigError(f"{self.source}{where}: {key}: {msg}")

        if v["problem.N"] < 2:
            fail("problem.N", "must be >= 2")
        if not v["problem.lambda"] > 0:
            fail("problem.lambda", "must be positive")
        if not v["problem.s"] > 0:
            fail("problem.s", "must be positive")
        if check_admissible and not v["problem.s"] * v["problem.lambda"] < 1:
            fail("problem.s", f"s*lambda = {v['problem.s'] * v['problem.lambda']:g} must be < 1")
        if not 0 < v["problem.h"] <= 0.25:
            fail("problem.h", "must lie in (0, 0.25]")
        if not 0 < v["problem.rho"] < v["problem.R_out"] / 4:
            fail("problem.rho", "must lie in (0, R_out/4)")
        axes = v["problem.obstacle_axes"]
        if axes and (len(axes) != v["problem.N"] or max(axes) > v["problem.rho"] or min(axes) <= 0):
            fail("problem.obstacle_axes", "needs N positive semi-axes no larger than rho")
        x0 = v["linking.x0"]
        if len(x0) != v["problem.N"] or abs(math.hypot(*x0) - 1.0) > 1e-9:
            fail("linking.x0", "must be a unit vector with N components")
        if not v["linking.R_list"] or min(v["linking.R_list"]) < 4:
            fail("linking.R_list", "needs at least one R, all >= 4")
        if v["linking.t_samples"] < 3 or v["linking.t_samples"] % 2 == 0:
            fail("linking.t_samples", "must be odd and >= 3 (t = 1/2 has to be sampled)")
        if v["linking.y_samples"] < 4 or v["linking.y_samples"] % 2:
            fail("linking.y_samples", "must be even and >= 4 (y = -x0 has to be sampled)")
        if not v["linking.separation"] > 0:
            fail("linking.separation", "must be positive")
        if not v["solver.tol"] > 0:
            fail("solver.tol", "must be positive")
        if v["solver.budget"] < 1:
            fail("solver.budget", "must be >= 1")
        if not 0 <= v["solver.seed"] < 2 ** 64:
            fail("solver.seed", "must be an unsigned 64-bit integer")
        return self


def parse_config(text, source="<string>"):
    values, lines = {}, {}
    for num, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{num}: expected 'section.key = value', got {raw.strip()!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{num}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{num}: duplicate key {key!r} (first set on line {lines[key]})")
        try:
            values[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{num}: bad value for {key}: {exc}") from None
        lines[key] = num
    for key, (_, default) in SCHEMA.items():
        if key not in values:
            if default is None:
                raise ConfigError(f"{source}: missing required field {key}")
            values[key] = default
    return RunConfig(values, source, lines)


def load_config(path, check_admissible=True):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path)).validate(check_admissible)
