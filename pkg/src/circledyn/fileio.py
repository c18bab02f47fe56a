"""Stable text formats: system configuration files, partition and report
serialization, CSV exports, and content hashes.

All floating-point emission uses 17 significant digits and rationals are
printed as "p/q", so reruns with identical inputs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .circle import Arc
from .errors import ConfigError
from .semigroup import (
    Chart,
    ExpandingCover,
    GeneratorSystem,
    affine_generator,
    perturbed_generator,
)

CONFIG_FORMAT = "circledyn-config/1"
COVER_FORMAT = "expanding-cover/1"
MIXING_FORMAT = "mixing-certificate/1"
PARTITION_FORMAT = "markov-partition/1"


def fmt_num(x):
    """Canonical text for a number: rationals exact, floats at 17 digits."""
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(
            x.numerator
        )
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % float(x)


def parse_num(v):
    """Inverse of fmt_num: "p/q" to Fraction, integers stay exact."""
    if isinstance(v, (int, float)):
        return v
    s = str(v).strip()
    if "/" in s:
        num, den = s.split("/")
        return Fraction(int(num), int(den))
    try:
        return int(s)
    except ValueError:
        return float(s)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()


def write_text(path, text):
    Path(path).write_text(text)
    return sha256_text(text)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# System configuration


def load_config_text(text):
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(
            f"config parse error at line {err.lineno}, column {err.colno}: "
            f"{err.msg}"
        ) from err
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return load_config_text(text)


def config_to_text(cfg):
    return canonical_json(cfg)


def system_from_config(cfg):
    gens = []
    raw = cfg.get("generators")
    if not raw:
        raise ConfigError("config needs a nonempty 'generators' list")
    for i, g in enumerate(raw):
        family = g.get("family")
        if family == "affine":
            gens.append(affine_generator(i, int(g["a"]), parse_num(g.get("b", 0))))
        elif family == "perturbed":
            gens.append(
                perturbed_generator(
                    i, int(g["a"]), float(g.get("b", 0.0)), float(g.get("c", 0.0))
                )
            )
        else:
            raise ConfigError(f"generator {i}: unknown family {family!r}")
    if "matrix" not in cfg:
        raise ConfigError("config needs a 'matrix' (row-stochastic driving)")
    return GeneratorSystem(
        generators=gens,
        matrix=cfg["matrix"],
        start=cfg.get("start"),
        name=cfg.get("name", "system"),
    )


# ---------------------------------------------------------------------------
# Cover and mixing certificates


def cover_to_obj(cover):
    return {
        "format": COVER_FORMAT,
        "sigma": fmt_num(cover.sigma),
        "r": fmt_num(cover.r),
        "eta": fmt_num(cover.eta),
        "grid": cover.grid,
        "charts": [
            {"lo": fmt_num(c.arc.lo), "length": fmt_num(c.arc.length),
             "symbol": c.symbol}
            for c in cover.charts
        ],
    }


def cover_from_obj(obj):
    if obj.get("format") != COVER_FORMAT:
        raise ConfigError(f"not a cover artifact: {obj.get('format')!r}")
    charts = [
        Chart(Arc(parse_num(c["lo"]), parse_num(c["length"])), int(c["symbol"]))
        for c in obj["charts"]
    ]
    return ExpandingCover(
        charts=charts,
        sigma=float(parse_num(obj["sigma"])),
        r=float(parse_num(obj["r"])),
        eta=float(parse_num(obj["eta"])),
        grid=int(obj["grid"]),
    )


def mixing_to_obj(cert):
    return {
        "format": MIXING_FORMAT,
        "scale": fmt_num(cert.scale),
        "horizon": cert.horizon,
        "net_size": len(cert.net),
        "complete": cert.complete,
        "witnesses": {
            f"{u}:{v}": list(map(int, word))
            for (u, v), word in sorted(cert.witnesses.items())
        },
        "unresolved": [list(p) for p in cert.unresolved],
    }


# ---------------------------------------------------------------------------
# Partition serialization


def partition_to_obj(partition):
    return {
        "format": PARTITION_FORMAT,
        "kind": partition.kind,
        "eps": None if partition.eps is None else fmt_num(partition.eps),
        "tol": None if partition.tol is None else fmt_num(partition.tol),
        "depth_cap": partition.depth_cap,
        "sigma": fmt_num(partition.sigma),
        "uncovered_mass": fmt_num(partition.uncovered_mass),
        "cycle": list(map(int, partition.cycle)),
        "balls": [
            {"lo": fmt_num(b.lo), "length": fmt_num(b.length)}
            for b in partition.balls
        ],
        "elements": [
            {
                "arc": [fmt_num(e.arc.lo), fmt_num(e.arc.length)],
                "word": list(map(int, e.word)),
                "image": int(e.image_ball),
            }
            for e in partition.elements
        ],
    }


def partition_from_obj(obj, system):
    """Rebuild a partition; branch anchors are recomputed by iterating the
    element arcs through their words (deterministic arithmetic, so the
    result is identical to the construction)."""
    from .partition import CountableMarkovPartition, PartitionElement

    if obj.get("format") != PARTITION_FORMAT:
        raise ConfigError(f"not a partition artifact: {obj.get('format')!r}")
    balls = [Arc(parse_num(b["lo"]), parse_num(b["length"])) for b in obj["balls"]]
    elements = []
    for idx, e in enumerate(obj["elements"]):
        arc = Arc(parse_num(e["arc"][0]), parse_num(e["arc"][1]))
        word = tuple(int(s) for s in e["word"])
        los = [arc.lo]
        lens = [arc.length]
        for s in word:
            g = system.gen(s).map
            lens.append(g.lift_delta(los[-1], lens[-1]))
            los.append(g(los[-1]))
        elements.append(
            PartitionElement(
                index=idx, arc=arc, word=word, image_ball=int(e["image"]),
                los=los, lens=lens,
            )
        )
    part = CountableMarkovPartition(
        system=system,
        balls=balls,
        elements=elements,
        cycle=[int(i) for i in obj["cycle"]],
        sigma=float(parse_num(obj["sigma"])),
        uncovered_mass=parse_num(obj["uncovered_mass"]),
        eps=None if obj["eps"] is None else parse_num(obj["eps"]),
        tol=None if obj["tol"] is None else parse_num(obj["tol"]),
        depth_cap=int(obj["depth_cap"]),
        kind=obj["kind"],
    )
    part.validate()
    return part


def partition_hash(partition):
    return sha256_text(canonical_json(partition_to_obj(partition)))


# ---------------------------------------------------------------------------
# Itinerary dumps


def itineraries_text(partition, orbits):
    lines = [f"# circledyn-itineraries {partition_hash(partition)}"]
    for orbit in orbits:
        lines.append(" ".join(str(int(i)) for i in orbit))
    return "\n".join(lines) + "\n"


def parse_itineraries(text, partition=None):
    lines = text.strip().split("\n")
    if not lines or not lines[0].startswith("# circledyn-itineraries "):
        raise ConfigError("missing itinerary header")
    digest = lines[0].split()[-1]
    if partition is not None and digest != partition_hash(partition):
        raise ConfigError("itinerary dump does not match this partition")
    return [
        [int(tok) for tok in line.split()] for line in lines[1:] if line.strip()
    ]


# ---------------------------------------------------------------------------
# Density and measure exports


def density_csv(density):
    rows = [
        (k, fmt_num(Fraction(k, density.bins)), fmt_num(w))
        for k, w in enumerate(density.weights)
    ]
    return csv_text(("bin", "left", "weight"), rows)


def fibered_csv(measure):
    rows = []
    for i, fiber in enumerate(measure.fibers):
        for k, w in enumerate(fiber):
            rows.append((i, k, fmt_num(Fraction(k, measure.bins)), fmt_num(w)))
    return csv_text(("symbol", "bin", "left", "weight"), rows)


def cylinder_csv(measure, matrix, depth=2):
    rows = []
    stack = [(i,) for i in range(matrix.n)]
    words = []
    while stack:
        w = stack.pop()
        words.append(w)
        if len(w) < depth:
            for j in matrix.row(w[-1]):
                stack.append(w + (int(j),))
    for w in sorted(words):
        rows.append((" ".join(map(str, w)), fmt_num(measure.weight(w))))
    return csv_text(("cylinder", "weight"), rows)
