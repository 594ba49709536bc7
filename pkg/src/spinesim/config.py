"""Run configuration: a JSON document with one section per module.

::

    {
      "models":     {"id": "exp_growth", "a": 0.1, "alpha": 0.1},
      "population": {"init": [1], "horizon": 10,
                     "caps": {"max_individuals": 1000000, "max_events": 10000000}},
      "auxiliary":  {"x0": 1, "t": 10},
      "analysis":   {"functional": "terminal", "n_grid": [1, 10, 100]},
      "cli":        {"seed": 0, "replicates": 100}
    }

Every section is optional; command-line flags override the ``cli`` section.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field

from .models import build_model
from .models.base import ModelConfigError
from .population import Caps

SECTIONS = ("models", "population", "auxiliary", "analysis", "cli")

POPULATION_KEYS = {"init", "horizon", "caps"}
AUXILIARY_KEYS = {"x0", "t"}
ANALYSIS_KEYS = {"functional", "f", "g", "z", "r", "s", "t", "x0", "weight", "n_pop", "n_aux",
                 "nodes", "policy", "threshold", "n_grid", "atoms", "n_boot", "identity"}
CLI_KEYS = {"seed", "replicates", "threads", "cap_individuals"}

FIGURE_DEFAULTS = {"id": "exp_growth", "a": 0.1, "alpha": 0.1}


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


def parse_config_text(text: str, source: str = "<config>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{source}: top level must be an object")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}; "
                          f"expected some of {list(SECTIONS)}")
    for name, sec in doc.items():
        if not isinstance(sec, dict):
            raise ConfigError(f"{source}: section {name!r} must be an object")
    for name, allowed in (("population", POPULATION_KEYS), ("auxiliary", AUXILIARY_KEYS),
                          ("analysis", ANALYSIS_KEYS), ("cli", CLI_KEYS)):
        extra = set(doc.get(name, {})) - allowed
        if extra:
            raise ConfigError(f"{source}: unknown key(s) {sorted(extra)} in section {name!r}")
    return doc


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), str(path))


@dataclass
class RunConfig:
    """Everything a run depends on; ``canonical()`` is what the output header records."""

    command: str
    sections: dict = field(default_factory=dict)
    seed: int = 0
    replicates: int = 100
    identity: str | None = None

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        self.seed = int(self.seed)
        if int(self.replicates) < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        self.replicates = int(self.replicates)
        for name in SECTIONS:
            self.sections.setdefault(name, {})

    def section(self, name: str) -> dict:
        return self.sections[name]

    def model(self):
        spec = self.sections["models"] or (FIGURE_DEFAULTS if self.command == "figure" else {})
        if not spec:
            raise ConfigError("missing 'models' section")
        try:
            return build_model(spec)
        except ModelConfigError as exc:
            raise ConfigError(f"models: {exc}") from None

    def caps(self) -> Caps:
        c = dict(self.sections["population"].get("caps", {}))
        if "cap_individuals" in self.sections["cli"]:
            c["max_individuals"] = self.sections["cli"]["cap_individuals"]
        try:
            return Caps(**{k: int(v) for k, v in c.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"population.caps: {exc}") from None

    def canonical(self) -> dict:
        cli = {k: v for k, v in self.sections["cli"].items() if k != "threads"}
        cli.update(seed=self.seed, replicates=self.replicates)
        sections = {k: v for k, v in self.sections.items() if v and k != "cli"}
        sections["cli"] = cli
        doc = {"command": self.command, "sections": sections}
        if self.identity:
            doc["identity"] = self.identity
        return doc

    def canonical_json(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"),
                          ensure_ascii=False)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    @classmethod
    def from_canonical(cls, doc: dict) -> "RunConfig":
        sections = copy.deepcopy(doc.get("sections", {}))
        cli = sections.get("cli", {})
        return cls(doc["command"], sections, cli.get("seed", 0), cli.get("replicates", 100),
                   doc.get("identity"))


def header_lines(cfg: RunConfig, extra=()) -> list[str]:
    lines = [f"spinesim {cfg.command}" + (f" {cfg.identity}" if cfg.identity else ""),
             f"config_hash sha256:{cfg.config_hash()}",
             f"seed {cfg.seed}",
             f"config {cfg.canonical_json()}"]
    lines.extend(extra)
    return lines


def config_from_header(lines) -> RunConfig:
    """Rebuild the run configuration from the ``# config {...}`` header line."""
    for line in lines:
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if body.startswith("config "):
            try:
                return RunConfig.from_canonical(json.loads(body[len("config "):]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ConfigError(f"unreadable config header: {exc}") from None
    raise ConfigError("no '# config' header line found")
