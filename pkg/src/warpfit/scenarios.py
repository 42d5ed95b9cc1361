"""Distribution specs and simulated datasets for Monte Carlo experiments."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .empirical import from_samples
from .exceptions import InvalidSpec
from .limitlaw import ErrorDistribution

# the Gaussian populations used in the standard simulation grid, in order
GAUSSIAN_POPULATIONS = (
    (0.0, 1.0), (5.0, 2.0), (3.0, 1.0), (1.5, 3.0), (7.0, 4.0),
    (2.5, 0.5), (1.0, 1.5), (4.0, 3.0), (6.0, 5.0),
)

_ALIASES = {
    "normal": "normal", "n": "normal", "gauss": "normal", "gaussian": "normal",
    "exp": "exp", "exponential": "exp",
    "laplace": "laplace", "double-exponential": "laplace",
    "t": "t", "student": "t", "student-t": "t", "studentt": "t",
    "uniform": "uniform", "u": "uniform",
}
_DEFAULTS = {"normal": (0.0, 1.0), "exp": (1.0,), "laplace": (0.0, 1.0), "t": None, "uniform": (0.0, 1.0)}
_SPEC_RE = re.compile(r"^\s*([A-Za-z_\-]+)\s*(?:\((.*)\))?\s*$")


@dataclass(frozen=True)
class DistSpec:
    """A named continuous distribution, e.g. ``DistSpec("normal", (5.0, 2.0))``.

    Normal and Laplace take ``(location, scale)``, exponential a rate, ``t``
    its degrees of freedom and uniform ``(low, high)``.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        kind = _ALIASES.get(self.kind.lower())
        if kind is None:
            raise InvalidSpec(f"unknown distribution {self.kind!r}")
        params = tuple(float(p) for p in self.params) or _DEFAULTS[kind]
        if params is None:
            raise InvalidSpec(f"{kind} needs parameters")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", params)
        self._validate()

    def _validate(self):
        k, p = self.kind, self.params
        arity = {"normal": 2, "laplace": 2, "uniform": 2, "exp": 1, "t": 1}[k]
        if len(p) != arity:
            raise InvalidSpec(f"{k} takes {arity} parameter(s), got {len(p)}")
        if k in ("normal", "laplace") and not p[1] > 0:
            raise InvalidSpec(f"{k} scale must be positive")
        if k == "exp" and not p[0] > 0:
            raise InvalidSpec("exponential rate must be positive")
        if k == "t" and not p[0] >= 1:
            raise InvalidSpec("t degrees of freedom must be at least 1")
        if k == "uniform" and not p[1] > p[0]:
            raise InvalidSpec("uniform needs low < high")

    @classmethod
    def parse(cls, text):
        if isinstance(text, DistSpec):
            return text
        m = _SPEC_RE.match(str(text))
        if not m:
            raise InvalidSpec(f"cannot parse distribution {text!r}")
        name, args = m.group(1), m.group(2)
        try:
            params = tuple(float(a) for a in args.split(",")) if args and args.strip() else ()
        except ValueError:
            raise InvalidSpec(f"bad parameters in {text!r}") from None
        return cls(name, params)

    def __str__(self):
        return f"{self.kind}({','.join(f'{p:g}' for p in self.params)})"

    def to_error_distribution(self):
        k, p = self.kind, self.params
        if k == "normal":
            return ErrorDistribution.normal(*p)
        if k == "laplace":
            return ErrorDistribution.laplace(*p)
        if k == "exp":
            return ErrorDistribution.exponential(*p)
        if k == "t":
            return ErrorDistribution.student_t(*p)
        return ErrorDistribution.uniform(*p)


@dataclass(frozen=True)
class ScenarioSpec:
    """``J`` populations of ``n`` draws each; ``contaminant`` replaces the last."""

    J: int
    n: int
    populations: tuple
    contaminant: DistSpec | None = None
    family: str = "location-scale"
    seed: int = 0

    def __post_init__(self):
        pops = tuple(DistSpec.parse(p) for p in self.populations)
        object.__setattr__(self, "populations", pops)
        if self.contaminant is not None:
            object.__setattr__(self, "contaminant", DistSpec.parse(self.contaminant))
        if int(self.J) < 2:
            raise InvalidSpec("a scenario needs J >= 2")
        if int(self.n) < 2:
            raise InvalidSpec("a scenario needs n >= 2")
        if len(pops) != int(self.J):
            raise InvalidSpec(f"expected {self.J} populations, got {len(pops)}")

    @property
    def laws(self):
        pops = list(self.populations)
        if self.contaminant is not None:
            pops[-1] = self.contaminant
        return pops


def _gaussians(J):
    return tuple(DistSpec("normal", GAUSSIAN_POPULATIONS[j % len(GAUSSIAN_POPULATIONS)]) for j in range(J))


def null_scenario(J, n, seed=0, family="location-scale"):
    """Gaussian populations that differ only by location and scale."""
    return ScenarioSpec(J, n, _gaussians(J), None, family, seed)


def alternative_scenario(J, n, gamma, seed=0, family="location-scale"):
    """The null Gaussians with the last population replaced by ``gamma``."""
    return ScenarioSpec(J, n, _gaussians(J), DistSpec.parse(gamma), family, seed)


def generate(spec, stream):
    """Draw the scenario's ``J`` samples; sample ``j`` uses ``stream.at(j)``."""
    out = []
    for j, law in enumerate(spec.laws):
        x = law.to_error_distribution().sample(int(spec.n), stream.at(j))
        out.append(from_samples(x))
    return out
