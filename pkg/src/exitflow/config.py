"""INI configuration shared by all subcommands.

A file has one ``[domain]`` section and optional sections named after
stages (``solve``, ``freidlin``, ``iterate``, ``verify``, ``montecarlo``,
``plot``).  A ``[plan]`` section lists the stages to run in order::

    [domain]
    kind = ellipse
    a = 2
    b = 1
    n = 256

    [plan]
    stages = solve, iterate, plot
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import DomainSpec

STAGES = ("solve", "freidlin", "iterate", "verify", "montecarlo", "plot", "matrix")


class ConfigError(ValueError):
    pass


def parse_floats(text, allow_inf=True):
    out = []
    for tok in str(text).replace(";", ",").split(","):
        tok = tok.strip()
        if not tok:
            continue
        if allow_inf and tok.lower() in ("inf", "infinity"):
            out.append(np.inf)
        else:
            v = float(tok)
            if not allow_inf and not np.isfinite(v):
                raise ValueError(f"non-finite value {tok!r}")
            out.append(v)
    return out


def domain_from_section(sec) -> DomainSpec:
    kind = sec.get("kind", "disc").strip()
    n = sec.getint("n", 256)
    if kind == "disc":
        return DomainSpec.disc(sec.getfloat("r", 1.0), n, sec.getfloat("cx", 0.0), sec.getfloat("cy", 0.0))
    if kind == "ellipse":
        return DomainSpec.ellipse(sec.getfloat("a", 2.0), sec.getfloat("b", 1.0), n, sec.getfloat("cx", 0.0), sec.getfloat("cy", 0.0))
    if kind in ("rectangle", "square"):
        lx = sec.getfloat("lx", 1.0)
        ly = sec.getfloat("ly", lx)
        cx = sec.getfloat("cx", 0.5 * lx)
        cy = sec.getfloat("cy", 0.5 * ly)
        return DomainSpec.rectangle(lx, ly, n, cx, cy)
    if kind == "implicit":
        if "expr" not in sec or "bbox" not in sec:
            raise ConfigError("implicit domains need 'expr' and 'bbox'")
        bbox = parse_floats(sec["bbox"], allow_inf=False)
        if len(bbox) != 4:
            raise ConfigError("bbox needs four numbers: xmin, xmax, ymin, ymax")
        return DomainSpec.implicit(sec["expr"], bbox, n)
    raise ConfigError(f"unknown domain kind {kind!r}")


@dataclass
class Config:
    path: Path | None
    parser: configparser.ConfigParser
    domains: dict = field(default_factory=dict)  # name -> DomainSpec

    def section(self, name):
        if self.parser.has_section(name):
            return self.parser[name]
        return self.parser[configparser.DEFAULTSECT]

    def stages(self):
        if not self.parser.has_section("plan"):
            return []
        raw = self.parser["plan"].get("stages", "")
        names = [s.strip() for s in raw.split(",") if s.strip()]
        if len(set(names)) != len(names):
            raise ConfigError("stage names in [plan] must be unique")
        for s in names:
            if s.split(":")[0] not in STAGES:
                raise ConfigError(f"unknown stage {s!r}")
        return names

    @property
    def domain(self) -> DomainSpec:
        if "domain" not in self.domains:
            raise ConfigError("configuration has no [domain] section")
        return self.domains["domain"]


def load_config(source) -> Config:
    """Read a configuration from a path or from INI text."""
    parser = configparser.ConfigParser(interpolation=None)
    path = None
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "[" not in source):
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"configuration file {path} not found")
        parser.read_string(path.read_text())
    else:
        parser.read_string(str(source))
    cfg = Config(path, parser)
    for name in parser.sections():
        if name == "domain" or name.startswith("domain:"):
            cfg.domains[name] = domain_from_section(parser[name])
    return cfg
