"""Run configuration: INI sections of ``key = value`` lines with ``#`` comments.

Example::

    [scenario]
    name = lognormal
    seed = 20240601

    [generator]
    family = cone
    jumps = gauss:0.2
    drift = autonorm
    T = 1

    [grid]
    n_points = 32769

    [ladder]
    eps_ratio = 0.5
    depth = 12

Unknown sections or keys are errors; every value that is not given falls
back to the default listed in ``SCHEMA`` and is echoed in the run manifest.
"""
from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .families import Cone, GeneratorSpec, Linear, MovingAverage, Power, SpectralGaussian, normalize
from .fields import Grid
from .kernel import format_triplet, parse_triplet

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "SCHEMA"]

SCHEMA = {
    "scenario": {"name": "scenario", "seed": "0", "out": "out"},
    "generator": {
        "family": "cone", "jumps": "gauss:0.2", "drift": "autonorm", "t": "1.0",
        "rate": "linear", "atoms": "", "width": "1.0", "height": "1.0", "dimension": "1",
    },
    "grid": {"n_points": "32769", "origin": "0.0", "length": "1.0"},
    "ladder": {"eps_ratio": "0.5", "depth": "12"},
    "analysis": {
        "q_grid": "0.5, 1, 1.5, 2", "dyadic_min": "1", "dyadic_max": "6",
        "n_replicas": "200", "deltas": "1", "boxes": "0:1, 0:0.5",
    },
    "star": {
        "eps": "0.5", "eps_prime": "0.5", "boxes": "0:1, 0:0.5", "n_replicas": "2000",
        "n_queries": "20", "alpha": "0.01", "misscale": "false",
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    name: str
    seed: int
    out: str
    spec: GeneratorSpec
    grid: Grid
    eps_ratio: float
    depth: int
    q_grid: list
    dyadic_levels: list
    n_replicas: int
    deltas: list
    boxes: list
    star_eps: float
    star_eps_prime: float
    star_boxes: list
    star_replicas: int
    n_queries: int
    alpha: float
    misscale: bool
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def deepest_cutoff(self) -> float:
        T = self.spec.T if isinstance(self.spec, Cone) else 1.0
        return T * self.eps_ratio ** self.depth

    def manifest(self) -> dict:
        """Every parameter that affects an output, fully resolved."""
        spec = self.spec
        gen = {"family": type(spec).__name__, "dimension": spec.dimension}
        if isinstance(spec, Cone):
            gen.update(triplet=format_triplet(spec.triplet), T=spec.T)
        elif isinstance(spec, MovingAverage):
            gen.update(triplet=format_triplet(spec.triplet), width=spec.width,
                       height=spec.height, rate=_fmt_rate(spec.rate))
        else:
            gen.update(atoms=[list(a) for a in spec.atoms], drift_b=spec.drift_b,
                       rate=_fmt_rate(spec.rate))
        return {
            "scenario": self.name,
            "seed": self.seed,
            "generator": gen,
            "grid": {"origin": self.grid.origin, "step": self.grid.step,
                     "n_points": self.grid.n_points},
            "ladder": {"eps_ratio": self.eps_ratio, "depth": self.depth,
                       "deepest_cutoff": self.deepest_cutoff},
            "analysis": {"q_grid": self.q_grid, "dyadic_levels": self.dyadic_levels,
                         "n_replicas": self.n_replicas, "deltas": self.deltas,
                         "boxes": self.boxes},
            "star": {"eps": self.star_eps, "eps_prime": self.star_eps_prime,
                     "boxes": self.star_boxes, "n_replicas": self.star_replicas,
                     "n_queries": self.n_queries, "alpha": self.alpha,
                     "misscale": self.misscale},
            "config": self.raw,
        }


def _fmt_rate(rate) -> str:
    return "linear" if isinstance(rate, Linear) else f"power:{rate.q!r}"


def _line_of(text: str, section: str, key: Optional[str] = None) -> int:
    cur = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            cur = m.group(1).strip().lower()
            if key is None and cur == section:
                return i
            continue
        if key is not None and cur == section and re.match(rf"{re.escape(key)}\s*[=:]", s, re.I):
            return i
    return 0


def _floats(s: str) -> list:
    return [float(x) for x in s.replace(";", ",").split(",") if x.strip()]


def _boxes(s: str) -> list:
    out = []
    for tok in s.split(","):
        tok = tok.strip()
        if not tok:
            continue
        lo, hi = (float(x) for x in tok.split(":"))
        if not lo < hi:
            raise ValueError(f"empty box {tok!r}")
        out.append((lo, hi))
    return out


def _rate(s: str):
    s = s.strip().lower()
    if s == "linear":
        return Linear()
    if s.startswith("power:"):
        return Power(float(s.split(":", 1)[1]))
    raise ValueError(f"unknown rate {s!r} (expected linear or power:<q>)")


def _atoms(s: str):
    out = []
    for tok in s.split(","):
        tok = tok.strip()
        if tok:
            r, lam = tok.split(":")
            out.append((float(r), float(lam)))
    return tuple(out)


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                   interpolation=None, strict=True)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside of any section") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.message}") from None
    except configparser.ParsingError as exc:
        lines = ", ".join(str(ln) for ln, _ in exc.errors)
        raise ConfigError(f"line {lines}: cannot parse") from None

    raw = {}
    for sec in cp.sections():
        key = sec.strip().lower()
        if key not in SCHEMA:
            raise ConfigError(f"line {_line_of(text, key)}: unknown section [{sec}]")
        for opt, val in cp[sec].items():
            if opt not in SCHEMA[key]:
                raise ConfigError(f"line {_line_of(text, key, opt)}: unknown key {opt!r} "
                                  f"in [{sec}]")
            raw.setdefault(key, {})[opt] = val
    values = {s: {**defaults, **raw.get(s, {})} for s, defaults in SCHEMA.items()}

    def conv(section, key, fn):
        try:
            return fn(values[section][key])
        except (ValueError, TypeError) as exc:
            line = _line_of(text, section, key)
            where = f"line {line}: " if line else ""
            raise ConfigError(f"{where}[{section}] {key}: {exc}") from None

    gen = values["generator"]
    family = gen["family"].strip().lower()
    dim = conv("generator", "dimension", int)
    if family == "cone":
        trip = conv("generator", "jumps", lambda s: parse_triplet(s, gen["drift"]))
        spec = Cone(trip, conv("generator", "t", float), dim)
    elif family in ("moving_average", "movingaverage", "ma"):
        autonorm = gen["drift"].strip().lower() == "autonorm"
        trip = conv("generator", "jumps",
                    lambda s: parse_triplet(s, "drift:0" if autonorm else gen["drift"]))
        spec = MovingAverage(trip, conv("generator", "width", float),
                             conv("generator", "height", float),
                             conv("generator", "rate", _rate), dim)
        if autonorm:
            spec = normalize(spec)
    elif family in ("spectral", "spectral_gaussian"):
        atoms = conv("generator", "atoms", _atoms)
        drift = gen["drift"].strip().lower()
        b = 0.0 if drift == "autonorm" else conv(
            "generator", "drift", lambda s: float(s.split(":", 1)[-1]))
        spec = conv("generator", "atoms",
                    lambda _: SpectralGaussian(atoms, _rate(gen["rate"]), b, dim))
        if drift == "autonorm":
            spec = normalize(spec)
    else:
        raise ConfigError(f"line {_line_of(text, 'generator', 'family')}: "
                          f"unknown family {family!r}")
    if isinstance(spec, Cone) and "rate" in raw.get("generator", {}) \
            and _rate(gen["rate"]) != Linear():
        raise ConfigError(f"line {_line_of(text, 'generator', 'rate')}: "
                          "cone generators use the linear rate")

    n_points = conv("grid", "n_points", int)
    grid = conv("grid", "length",
                lambda s: Grid.uniform(float(values["grid"]["origin"]), float(s), n_points))
    cfg = RunConfig(
        name=values["scenario"]["name"],
        seed=conv("scenario", "seed", int),
        out=values["scenario"]["out"],
        spec=spec,
        grid=grid,
        eps_ratio=conv("ladder", "eps_ratio", float),
        depth=conv("ladder", "depth", int),
        q_grid=conv("analysis", "q_grid", _floats),
        dyadic_levels=list(range(conv("analysis", "dyadic_min", int),
                                 conv("analysis", "dyadic_max", int) + 1)),
        n_replicas=conv("analysis", "n_replicas", int),
        deltas=conv("analysis", "deltas", _floats),
        boxes=conv("analysis", "boxes", _boxes),
        star_eps=conv("star", "eps", float),
        star_eps_prime=conv("star", "eps_prime", float),
        star_boxes=conv("star", "boxes", _boxes),
        star_replicas=conv("star", "n_replicas", int),
        n_queries=conv("star", "n_queries", int),
        alpha=conv("star", "alpha", float),
        misscale=conv("star", "misscale", _bool),
        raw=raw,
    )
    _validate(cfg, text)
    return cfg


def _bool(s: str) -> bool:
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _validate(cfg: RunConfig, text: str) -> None:
    def fail(section, key, msg):
        line = _line_of(text, section, key)
        raise ConfigError((f"line {line}: " if line else "") + f"[{section}] {key}: {msg}")

    if cfg.seed < 0:
        fail("scenario", "seed", "seed must be non-negative")
    if not 0 < cfg.eps_ratio < 1:
        fail("ladder", "eps_ratio", "must lie in (0, 1)")
    if cfg.depth < 0:
        fail("ladder", "depth", "must be >= 0")
    if cfg.n_replicas < 1:
        fail("analysis", "n_replicas", "must be >= 1")
    if cfg.star_replicas < 1:
        fail("star", "n_replicas", "must be >= 1")
    if not 0 < cfg.star_eps <= 1:
        fail("star", "eps", "must lie in (0, 1]")
    if not 0 < cfg.star_eps_prime <= 1:
        fail("star", "eps_prime", "must lie in (0, 1]")
    if not 0 < cfg.alpha < 1:
        fail("star", "alpha", "must lie in (0, 1)")
    if isinstance(cfg.spec, Cone):
        l_n = cfg.deepest_cutoff
        if cfg.grid.step > l_n / 8 * (1 + 1e-12):
            fail("grid", "n_points",
                 f"grid step {cfg.grid.step:.6g} violates h <= l_N/8 = {l_n / 8:.6g}")
        if cfg.dyadic_levels and 2.0 ** -max(cfg.dyadic_levels) < 16 * l_n * (1 - 1e-12):
            fail("analysis", "dyadic_max",
                 f"level {max(cfg.dyadic_levels)} is finer than 16 l_N = {16 * l_n:.6g}")
        if min(cfg.dyadic_levels, default=1) < 0:
            fail("analysis", "dyadic_min", "must be >= 0")
        lo, hi = cfg.grid.origin, cfg.grid.end
        for key, boxes in (("boxes", cfg.boxes), ("boxes", cfg.star_boxes)):
            for a, b in boxes:
                if a < lo - 1e-12 or b > hi + 1e-12:
                    fail("analysis" if boxes is cfg.boxes else "star", key,
                         f"box [{a}, {b}] lies outside the grid [{lo}, {hi}]")
        if l_n > cfg.star_eps * cfg.spec.T:
            fail("star", "eps", "deepest cutoff must lie below eps * T")


def load_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
