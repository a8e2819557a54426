"""Config files, images and CSV summaries.

Config files are INI text.  ``[model]`` holds ``width``, ``height``,
``topology`` and ``seed``; each ``[species.NAME]`` section (in file order)
holds ``id``, ``neighborhood``, ``period`` (``num/den``), ``density`` and
optionally ``rgb``; ``[experiment]`` and ``[render]`` are free-form and
read by the commands that need them.  Neighborhoods are written as
``line(RANGE, x|y)``, ``line(RANGE, x|y, directed)``, ``l1_ball(RADIUS)``
or ``offsets((dx,dy), ...)``.
"""

from __future__ import annotations

import ast
import configparser
import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .engine import SimResult
from .lattice import (DEFAULT_RGB, EMPTY, Lattice, ModelSpec, Neighborhood, Species, Topology, l1_ball,
                      line_neighborhood, parse_period)

WHITE = (255, 255, 255)


class ConfigError(ValueError):
    pass


_LINE = re.compile(r"^line\(\s*(\d+)\s*,\s*([xyXY])\s*(?:,\s*(directed|undirected)\s*)?\)$")
_BALL = re.compile(r"^l1_ball\(\s*(\d+)\s*\)$")
_OFFS = re.compile(r"^offsets\((.*)\)$", re.S)


def parse_neighborhood(text: str) -> Neighborhood:
    t = text.strip()
    if m := _LINE.match(t):
        return line_neighborhood(int(m[1]), m[2].lower(), m[3] == "directed")
    if m := _BALL.match(t):
        return l1_ball(int(m[1]))
    if m := _OFFS.match(t):
        try:
            offs = ast.literal_eval(f"[{m[1]}]")
            return Neighborhood(offs)
        except (ValueError, SyntaxError, TypeError) as e:
            raise ConfigError(f"bad offsets {text!r}: {e}") from None
    raise ConfigError(f"unknown neighborhood {text!r}")


def format_neighborhood(nb: Neighborhood) -> str:
    return "offsets(" + ", ".join(f"({o.dx},{o.dy})" for o in nb) + ")"


def parse_rgb(text: str) -> tuple[int, int, int]:
    parts = [int(v) for v in text.replace(" ", "").split(",")]
    if len(parts) != 3 or not all(0 <= v <= 255 for v in parts):
        raise ConfigError(f"bad rgb {text!r}")
    return tuple(parts)


def parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


@dataclass
class Config:
    model: ModelSpec
    experiment: dict[str, str] = field(default_factory=dict)
    render: dict[str, str] = field(default_factory=dict)


def _read(path: str | Path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return cp


def load_config(path: str | Path, seed: int | None = None) -> Config:
    return config_from_parser(_read(path), seed)


def load_experiment(path: str | Path) -> dict[str, str]:
    """Just the ``[experiment]`` section; scans build their own models."""
    cp = _read(path)
    return dict(cp["experiment"]) if cp.has_section("experiment") else {}


def loads_config(text: str, seed: int | None = None) -> Config:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    return config_from_parser(cp, seed)


def config_from_parser(cp: configparser.ConfigParser, seed: int | None = None) -> Config:
    if not cp.has_section("model"):
        raise ConfigError("missing [model] section")
    mdl = cp["model"]
    try:
        width = mdl.getint("width")
        height = mdl.getint("height", fallback=width)
        topology = Topology(mdl.get("topology", "torus"))
        seed = int(mdl.get("seed", "0"), 0) if seed is None else seed
        species, dens = [], []
        for name in cp.sections():
            if not name.startswith("species."):
                continue
            sec = cp[name]
            label = name.split(".", 1)[1]
            sid = sec.getint("id", fallback=len(species) + 1)
            rgb = parse_rgb(sec["rgb"]) if "rgb" in sec else DEFAULT_RGB.get(label, (0, 0, 0))
            species.append(Species(sid, parse_neighborhood(sec["neighborhood"]),
                                   parse_period(sec.get("period", "1")), label, rgb))
            dens.append(sec.getfloat("density", fallback=0.0))
        if width is None:
            raise ConfigError("[model] needs width")
        if not species:
            raise ConfigError("no [species.NAME] sections")
        model = ModelSpec(tuple(species), tuple(dens), width, height, topology, seed)
    except ConfigError:
        raise
    except (KeyError, ValueError, ZeroDivisionError) as e:
        raise ConfigError(f"bad config: {e}") from None
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    ren = dict(cp["render"]) if cp.has_section("render") else {}
    return Config(model, exp, ren)


def dump_config(model: ModelSpec, experiment: Mapping[str, object] | None = None,
                render: Mapping[str, object] | None = None) -> str:
    cp = configparser.ConfigParser()
    cp["model"] = dict(width=model.width, height=model.height, topology=model.topology.value, seed=model.seed)
    for sp, d in zip(model.species, model.densities):
        cp[f"species.{sp.label}"] = dict(
            id=sp.id, neighborhood=format_neighborhood(sp.neighborhood),
            period=f"{sp.period.numerator}/{sp.period.denominator}", density=repr(d),
            rgb=",".join(map(str, sp.rgb)),
        )
    if experiment:
        cp["experiment"] = {k: str(v) for k, v in experiment.items()}
    if render:
        cp["render"] = {k: str(v) for k, v in render.items()}
    out = []

    class _W:
        def write(self, s):
            out.append(s)

    cp.write(_W())
    return "".join(out)


# ---------------------------------------------------------------- images


@dataclass(frozen=True)
class RenderSpec:
    palette: dict[int, tuple[int, int, int]]
    scale: int = 1

    @classmethod
    def for_model(cls, model: ModelSpec, scale: int = 1) -> "RenderSpec":
        pal = {EMPTY: WHITE}
        for sp in model.species:
            pal[sp.id] = tuple(sp.rgb)
        return cls(pal, scale)


def render(color: np.ndarray, spec: RenderSpec) -> np.ndarray:
    """RGB array ``(H*scale, W*scale, 3)``; array row 0 is the top image row."""
    if spec.scale < 1:
        raise ValueError("scale must be >= 1")
    lut = np.zeros((256, 3), dtype=np.uint8)
    for sid, rgb in spec.palette.items():
        lut[sid & 0xFF] = rgb
    missing = set(np.unique(color).tolist()) - set(spec.palette)
    if missing:
        raise ValueError(f"palette lacks colors {sorted(missing)}")
    img = lut[np.asarray(color).view(np.uint8)]
    if spec.scale > 1:
        img = img.repeat(spec.scale, axis=0).repeat(spec.scale, axis=1)
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def read_ppm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValueError("not a binary 8-bit PPM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def write_image(path: str | Path, lattice: Lattice, scale: int = 1, png: bool = False,
                spec: RenderSpec | None = None) -> Path:
    """Binary PPM (P6) by default; PNG through Pillow when ``png`` is set."""
    spec = spec or RenderSpec.for_model(lattice.model, scale)
    img = render(lattice.color, spec)
    path = Path(path)
    if png:
        from PIL import Image

        Image.fromarray(img, "RGB").save(path, format="PNG")
    else:
        path.write_bytes(ppm_bytes(img))
    return path


# ---------------------------------------------------------------- csv


SIM_FIELDS = ["seed", "width", "height", "topology", "tick_scale", "fixation_tick", "fixation_time",
              "capped", "empty", "frac_empty"]


def sim_record(res: SimResult) -> dict:
    m = res.lattice.model
    rec = dict(seed=m.seed, width=m.width, height=m.height, topology=m.topology.value,
               tick_scale=m.tick_scale, fixation_tick=res.fixation_tick, fixation_time=str(res.fixation_time),
               capped=int(res.capped), empty=res.empty, frac_empty=repr(res.empty / res.lattice.color.size))
    for sp in m.species:
        rec[f"count_{sp.label}"] = res.counts[sp.id]
        rec[f"frac_{sp.label}"] = repr(res.counts[sp.id] / res.lattice.color.size)
    return rec


def append_csv(path: str | Path, record: Mapping[str, object]) -> None:
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(record))
        if new:
            w.writeheader()
        w.writerow(record)
