"""City model, simulation parameters, and scenario files.

A scenario file is a human-editable key-value text file with sections
(a TOML subset — exactly what the shipped presets use):

    [city]
    # one of the two:
    generator = { population = 10000, locations = 100, tract_size = 4, seed = 7 }
    file = "city.json"

    [params]
    days = 30
    hours = 14
    infection_rate = 0.05
    deviation_prob = 0.5
    incubation_steps = 56
    ...

    [intervention]
    strategy = "hybrid"
    tau = 28
    max_order = 1
    beta = "isolate"

Values are integers, floats, booleans (true/false), double-quoted strings
or one-line inline tables `{ key = value, ... }`; `#` starts a comment.
Everything downstream of loading is a pure function of
(CityModel, ScenarioParams, seed).
"""

from __future__ import annotations

import functools
import json
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .intervention import RestrictionLevel, StrategyConfig, resolve_strategy
from .rng import stream

__all__ = [
    "ScenarioError",
    "ScenarioParseError",
    "ScenarioValidationError",
    "KIND_NAMES",
    "RESIDENTIAL",
    "WORK",
    "COMMERCIAL",
    "PersonSpec",
    "LocationSpec",
    "CityModel",
    "ScenarioParams",
    "TimeStep",
    "Scenario",
    "generate_synthetic_city",
    "load_city_file",
    "save_city_file",
    "load_scenario",
    "loads_scenario",
    "save_scenario",
]

KIND_NAMES = ("residential", "work", "commercial")
RESIDENTIAL, WORK, COMMERCIAL = 0, 1, 2


class ScenarioError(ValueError):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    """The scenario file text is malformed."""


class ScenarioValidationError(ScenarioError):
    """A parsed value violates a constraint; `field` names the offender."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class PersonSpec:
    """One person's routine anchors."""

    id: int
    home: int
    work: int
    shops: tuple[int, ...]


@dataclass(frozen=True)
class LocationSpec:
    id: int
    kind: str
    tract: int


class CityModel:
    """Immutable population/location structure backed by dense arrays.

    Ids are dense 0-based integers; every person references one
    residential home, one work location, and at least one routine
    commercial location.  Tracts group locations; regions (multi-region
    scenarios) group tracts.
    """

    def __init__(self, home, work, shops, location_kind, location_tract,
                 tract_region=None, validate: bool = True):
        self.home = np.asarray(home, dtype=np.int32)
        self.work = np.asarray(work, dtype=np.int32)
        self.shops = np.atleast_2d(np.asarray(shops, dtype=np.int32))
        self.location_kind = np.asarray(location_kind, dtype=np.int8)
        self.location_tract = np.asarray(location_tract, dtype=np.int32)
        if tract_region is None:
            tract_region = np.zeros(int(self.location_tract.max()) + 1, dtype=np.int32) \
                if self.location_tract.size else np.zeros(0, dtype=np.int32)
        self.tract_region = np.asarray(tract_region, dtype=np.int32)
        for array in (self.home, self.work, self.shops, self.location_kind,
                      self.location_tract, self.tract_region):
            array.setflags(write=False)
        if validate:
            self.validate()

    # -- shape -------------------------------------------------------------

    @property
    def num_people(self) -> int:
        return self.home.size

    @property
    def num_locations(self) -> int:
        return self.location_kind.size

    @property
    def num_tracts(self) -> int:
        return self.tract_region.size

    @property
    def num_regions(self) -> int:
        return int(self.tract_region.max()) + 1 if self.tract_region.size else 1

    @property
    def density_q(self) -> float:
        """Mean people per location, |M| / |L|."""
        return self.num_people / self.num_locations

    @property
    def location_region(self) -> np.ndarray:
        return self.tract_region[self.location_tract]

    def person(self, i: int) -> PersonSpec:
        return PersonSpec(i, int(self.home[i]), int(self.work[i]),
                          tuple(int(s) for s in self.shops[i]))

    def location(self, i: int) -> LocationSpec:
        return LocationSpec(i, KIND_NAMES[self.location_kind[i]], int(self.location_tract[i]))

    # -- integrity -----------------------------------------------------------

    def validate(self) -> None:
        n_loc = self.num_locations
        if self.num_people < 1:
            raise ScenarioValidationError("people", "city must contain at least one person")
        if n_loc < 1:
            raise ScenarioValidationError("locations", "city must contain locations")
        if self.work.size != self.num_people or self.shops.shape[0] != self.num_people:
            raise ScenarioValidationError("people", "home/work/shops arrays disagree in length")
        if self.shops.shape[1] < 1:
            raise ScenarioValidationError("shops", "every person needs >= 1 commercial location")
        if self.location_tract.size != n_loc:
            raise ScenarioValidationError("location_tract", "one tract id per location required")
        if np.any(self.location_kind < 0) or np.any(self.location_kind > 2):
            raise ScenarioValidationError("location_kind", "kinds must be residential/work/commercial")
        if np.any(self.location_tract < 0) or np.any(self.location_tract >= self.num_tracts):
            raise ScenarioValidationError("location_tract", "tract id out of range")

        def check_refs(field_name, refs, kind):
            flat = refs.reshape(-1)
            bad = (flat < 0) | (flat >= n_loc)
            if bad.any():
                i = int(np.nonzero(bad)[0][0])
                person = i if refs.ndim == 1 else i // refs.shape[1]
                raise ScenarioValidationError(
                    field_name, f"person {person} references missing location {int(flat[i])}")
            wrong = self.location_kind[flat] != kind
            if wrong.any():
                offender = int(flat[wrong][0])
                raise ScenarioValidationError(
                    field_name, f"location {offender} is "
                    f"{KIND_NAMES[self.location_kind[offender]]}, expected {KIND_NAMES[kind]}")

        check_refs("home", self.home, RESIDENTIAL)
        check_refs("work", self.work, WORK)
        check_refs("shops", self.shops, COMMERCIAL)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CityModel):
            return NotImplemented
        return (np.array_equal(self.home, other.home)
                and np.array_equal(self.work, other.work)
                and np.array_equal(self.shops, other.shops)
                and np.array_equal(self.location_kind, other.location_kind)
                and np.array_equal(self.location_tract, other.location_tract)
                and np.array_equal(self.tract_region, other.tract_region))

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "home": self.home.tolist(),
            "work": self.work.tolist(),
            "shops": self.shops.tolist(),
            "location_kind": [KIND_NAMES[k] for k in self.location_kind],
            "location_tract": self.location_tract.tolist(),
            "tract_region": self.tract_region.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CityModel":
        try:
            kinds = [KIND_NAMES.index(k) for k in data["location_kind"]]
        except ValueError as exc:
            raise ScenarioValidationError("location_kind", str(exc)) from None
        except KeyError as exc:
            raise ScenarioValidationError(str(exc), "missing city field") from None
        try:
            return cls(data["home"], data["work"], data["shops"], kinds,
                       data["location_tract"], data.get("tract_region"))
        except KeyError as exc:
            raise ScenarioValidationError(str(exc), "missing city field") from None


_PROBABILITY_FIELDS = ("infection_rate", "deviation_prob", "travel_prob", "return_prob")


@dataclass(frozen=True)
class ScenarioParams:
    """Simulation parameters; every run is a function of (city, params, seed)."""

    days: int = 30
    hours: int = 14
    infection_rate: float = 0.05
    deviation_prob: float = 0.5
    incubation_steps: int = 56
    tracking_steps: int = 28
    max_order: int = 1
    beta: str = "isolate"
    cure_days: int = 7
    isolate_days: int = 3
    initial_infected: int = 10
    travel_prob: float = 0.0
    return_prob: float = 0.25
    multi_region: bool = False
    pre_symptomatic_weight: float = 1.0
    travel_alpha: float = 1.5

    @property
    def steps(self) -> int:
        return self.days * self.hours

    def validate(self, num_people: int | None = None) -> None:
        for name in _PROBABILITY_FIELDS:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ScenarioValidationError(name, f"must be in [0, 1], got {value}")
        for name, minimum in (("days", 1), ("hours", 1), ("incubation_steps", 0),
                              ("tracking_steps", 0), ("max_order", 1), ("cure_days", 1),
                              ("isolate_days", 1), ("initial_infected", 0)):
            if getattr(self, name) < minimum:
                raise ScenarioValidationError(name, f"must be >= {minimum}")
        if self.pre_symptomatic_weight < 0:
            raise ScenarioValidationError("pre_symptomatic_weight", "must be >= 0")
        RestrictionLevel.parse(self.beta)
        if num_people is not None and self.initial_infected > num_people:
            raise ScenarioValidationError(
                "initial_infected", f"{self.initial_infected} exceeds population {num_people}")


@functools.total_ordering
@dataclass(frozen=True)
class TimeStep:
    """A (day, hour) pair with its flat step index t = day * H + hour."""

    day: int
    hour: int
    hours_per_day: int

    def __post_init__(self):
        if not 0 <= self.hour < self.hours_per_day:
            raise ValueError(f"hour {self.hour} outside 0..{self.hours_per_day - 1}")
        if self.day < 0:
            raise ValueError("day must be >= 0")

    @property
    def flat(self) -> int:
        return self.day * self.hours_per_day + self.hour

    @classmethod
    def from_flat(cls, t: int, hours_per_day: int) -> "TimeStep":
        return cls(t // hours_per_day, t % hours_per_day, hours_per_day)

    def __lt__(self, other: "TimeStep") -> bool:
        return self.flat < other.flat


@dataclass
class Scenario:
    """Everything a run needs: city, parameters, and the strategy."""

    city: CityModel
    params: ScenarioParams
    strategy: StrategyConfig
    generator: dict | None = None
    city_file: str | None = None
    name: str = "scenario"


# -- synthetic city ----------------------------------------------------------

def generate_synthetic_city(population: int, locations: int, tract_size: int,
                            seed: int, shops_per_person: int = 2,
                            regions: int = 1) -> CityModel:
    """Generate a city with round-robin location kinds and tract grouping.

    Locations are assigned kinds residential/work/commercial in turn (an
    exact ~1/3 split) and grouped into tracts of `tract_size` consecutive
    locations; tracts are split contiguously across `regions`.  Each
    person gets a random home, a work location in their region, and
    `shops_per_person` commercial locations preferring the home tract.
    """
    if population < 1:
        raise ScenarioValidationError("population", "must be >= 1")
    if locations < 3:
        raise ScenarioValidationError("locations", "need at least 3 (one per kind)")
    if tract_size < 1:
        raise ScenarioValidationError("tract_size", "must be >= 1")
    if shops_per_person < 1:
        raise ScenarioValidationError("shops_per_person", "must be >= 1")
    if regions < 1:
        raise ScenarioValidationError("regions", "must be >= 1")

    kind = (np.arange(locations) % 3).astype(np.int8)
    tract = (np.arange(locations) // tract_size).astype(np.int32)
    num_tracts = int(tract[-1]) + 1
    if regions > num_tracts:
        raise ScenarioValidationError("regions", f"more regions than tracts ({num_tracts})")
    tract_region = ((np.arange(num_tracts) * regions) // num_tracts).astype(np.int32)

    rng = stream(seed, "synthetic-city")
    residential = np.nonzero(kind == RESIDENTIAL)[0].astype(np.int32)
    work_pool = np.nonzero(kind == WORK)[0].astype(np.int32)
    commercial = np.nonzero(kind == COMMERCIAL)[0].astype(np.int32)

    home = residential[rng.integers(0, residential.size, size=population)]
    location_region = tract_region[tract]
    home_region = location_region[home]
    home_tract = tract[home]

    work = np.empty(population, dtype=np.int32)
    for g in range(int(tract_region.max()) + 1):
        members = np.nonzero(home_region == g)[0]
        if members.size == 0:
            continue
        pool = work_pool[location_region[work_pool] == g]
        if pool.size == 0:
            pool = work_pool
        work[members] = pool[rng.integers(0, pool.size, size=members.size)]

    shops = np.empty((population, shops_per_person), dtype=np.int32)
    commercial_region = location_region[commercial]
    commercial_tract = tract[commercial]
    for tr in range(num_tracts):
        members = np.nonzero(home_tract == tr)[0]
        if members.size == 0:
            continue
        pool = commercial[commercial_tract == tr]
        if pool.size == 0:
            pool = commercial[commercial_region == tract_region[tr]]
        if pool.size == 0:
            pool = commercial
        draws = rng.integers(0, pool.size, size=(members.size, shops_per_person))
        shops[members] = pool[draws]

    return CityModel(home, work, shops, kind, tract, tract_region)


# -- city files ----------------------------------------------------------------

def load_city_file(path: str | Path) -> CityModel:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ScenarioParseError(f"cannot read city file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"city file {path} is not valid JSON: {exc}") from exc
    return CityModel.from_dict(data)


def save_city_file(city: CityModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(city.to_dict()))


# -- scenario text grammar ------------------------------------------------------

_INT_RE = re.compile(r"^[+-]?\d+$")


def _strip_comment(line: str) -> str:
    out = []
    in_string = False
    for ch in line:
        if ch == '"':
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
    return "".join(out)


def _split_top_level(text: str, sep: str) -> list[str]:
    parts, depth, in_string, current = [], 0, False, []
    for ch in text:
        if ch == '"':
            in_string = not in_string
        elif not in_string:
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            elif ch == sep and depth == 0:
                parts.append("".join(current))
                current = []
                continue
        current.append(ch)
    parts.append("".join(current))
    return parts


def _parse_value(raw: str, lineno: int):
    raw = raw.strip()
    if not raw:
        raise ScenarioParseError(f"line {lineno}: missing value")
    if raw.startswith("{"):
        if not raw.endswith("}"):
            raise ScenarioParseError(f"line {lineno}: unterminated inline table")
        inner = raw[1:-1].strip()
        table = {}
        if inner:
            for part in _split_top_level(inner, ","):
                key, eq, value = part.partition("=")
                if not eq:
                    raise ScenarioParseError(f"line {lineno}: malformed inline table entry {part!r}")
                table[key.strip()] = _parse_value(value, lineno)
        return table
    if raw.startswith('"'):
        if not (raw.endswith('"') and len(raw) >= 2):
            raise ScenarioParseError(f"line {lineno}: unterminated string")
        return raw[1:-1]
    if raw in ("true", "false"):
        return raw == "true"
    if _INT_RE.match(raw):
        return int(raw)
    try:
        return float(raw)
    except ValueError:
        raise ScenarioParseError(f"line {lineno}: cannot parse value {raw!r}") from None


def _parse_sections(text: str) -> dict[str, dict]:
    sections: dict[str, dict] = {}
    current: dict | None = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = _strip_comment(rawline).strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ScenarioParseError(f"line {lineno}: malformed section header {line!r}")
            name = line[1:-1].strip()
            current = sections.setdefault(name, {})
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ScenarioParseError(f"line {lineno}: expected key = value, got {line!r}")
        if current is None:
            raise ScenarioParseError(f"line {lineno}: key before any [section]")
        current[key.strip()] = _parse_value(value, lineno)
    return sections


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return f'"{value}"'
    if isinstance(value, dict):
        inner = ", ".join(f"{k} = {_format_value(v)}" for k, v in value.items())
        return "{ " + inner + " }"
    raise TypeError(f"cannot serialize {value!r}")


def _format_sections(sections: dict[str, dict]) -> str:
    chunks = []
    for name, body in sections.items():
        lines = [f"[{name}]"]
        lines.extend(f"{key} = {_format_value(value)}" for key, value in body.items())
        chunks.append("\n".join(lines))
    return "\n\n".join(chunks) + "\n"


# -- scenario assembly ------------------------------------------------------------

_GENERATOR_KEYS = {"population", "locations", "tract_size", "seed",
                   "shops_per_person", "regions"}


def _build_city(section: dict, base_dir: Path) -> tuple[CityModel, dict | None, str | None]:
    if "generator" in section and "file" in section:
        raise ScenarioValidationError("city", "give either generator or file, not both")
    if "generator" in section:
        spec = section["generator"]
        if not isinstance(spec, dict):
            raise ScenarioValidationError("generator", "must be an inline table")
        unknown = set(spec) - _GENERATOR_KEYS
        if unknown:
            raise ScenarioValidationError("generator", f"unknown keys {sorted(unknown)}")
        missing = {"population", "locations", "tract_size"} - set(spec)
        if missing:
            raise ScenarioValidationError("generator", f"missing keys {sorted(missing)}")
        city = generate_synthetic_city(
            spec["population"], spec["locations"], spec["tract_size"],
            spec.get("seed", 0), spec.get("shops_per_person", 2), spec.get("regions", 1))
        return city, dict(spec), None
    if "file" in section:
        raw = section["file"]
        path = Path(raw)
        if not path.is_absolute():
            path = base_dir / path
        return load_city_file(path), None, str(path)
    raise ScenarioValidationError("city", "section needs a generator or a file key")


def _build_params(section: dict, num_people: int) -> ScenarioParams:
    known = {f.name for f in fields(ScenarioParams)}
    unknown = set(section) - known
    if unknown:
        raise ScenarioValidationError(sorted(unknown)[0], "unknown [params] key")
    values = dict(section)
    if "tracking_steps" not in values:
        values["tracking_steps"] = 2 * values.get("hours", ScenarioParams.hours)
    params = ScenarioParams(**values)
    params.validate(num_people)
    return params


_STRATEGY_KEYS = {"strategy", "tau", "max_order", "beta", "quota", "reduction",
                  "confirmed_level"}


def _build_strategy(section: dict, params: ScenarioParams) -> StrategyConfig:
    unknown = set(section) - _STRATEGY_KEYS
    if unknown:
        raise ScenarioValidationError(sorted(unknown)[0], "unknown [intervention] key")
    base = StrategyConfig(tau=params.tracking_steps, max_order=params.max_order,
                          beta=RestrictionLevel.parse(params.beta))
    cfg = resolve_strategy(section.get("strategy", "hybrid"), base)
    overrides = {}
    if "tau" in section:
        overrides["tau"] = int(section["tau"])
    if "max_order" in section:
        overrides["max_order"] = int(section["max_order"])
    if "beta" in section:
        overrides["beta"] = RestrictionLevel.parse(section["beta"])
    if "confirmed_level" in section:
        overrides["confirmed_level"] = RestrictionLevel.parse(section["confirmed_level"])
    if "quota" in section:
        overrides["quota"] = int(section["quota"])
    if "reduction" in section:
        overrides["reduction"] = str(section["reduction"])
    cfg = replace(cfg, **overrides)
    try:
        cfg.validate()
    except ValueError as exc:
        raise ScenarioValidationError("intervention", str(exc)) from None
    return cfg


def loads_scenario(text: str, base_dir: str | Path = ".", name: str = "scenario") -> Scenario:
    """Parse scenario text; see the module docstring for the grammar."""
    sections = _parse_sections(text)
    unknown = set(sections) - {"city", "params", "intervention"}
    if unknown:
        raise ScenarioValidationError(sorted(unknown)[0], "unknown section")
    if "city" not in sections:
        raise ScenarioValidationError("city", "missing [city] section")
    city, generator, city_file = _build_city(sections["city"], Path(base_dir))
    params = _build_params(sections.get("params", {}), city.num_people)
    strategy = _build_strategy(sections.get("intervention", {}), params)
    return Scenario(city, params, strategy, generator, city_file, name)


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read scenario file {path}: {exc}") from exc
    return loads_scenario(text, base_dir=path.parent, name=path.stem)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    """Serialize a scenario back to the file grammar (round-trips equal)."""
    path = Path(path)
    city_section: dict = {}
    if scenario.generator is not None:
        city_section["generator"] = scenario.generator
    else:
        city_path = scenario.city_file
        if city_path is None:
            city_path = str(path.with_suffix("")) + "_city.json"
            save_city_file(scenario.city, city_path)
        city_section["file"] = str(city_path)

    params_section = {f.name: getattr(scenario.params, f.name)
                      for f in fields(ScenarioParams)}
    cfg = scenario.strategy
    strategy_section = {
        "strategy": cfg.strategy,
        "tau": cfg.tau,
        "max_order": cfg.max_order,
        "beta": cfg.beta.name.lower(),
        "reduction": cfg.reduction,
        "confirmed_level": cfg.confirmed_level.name.lower(),
    }
    if cfg.quota is not None:
        strategy_section["quota"] = cfg.quota
    text = _format_sections({"city": city_section, "params": params_section,
                             "intervention": strategy_section})
    path.write_text(text)
