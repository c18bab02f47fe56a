"""Batch front end: parse a system config, run pipeline stages, and emit
deterministic report artifacts.

Stages form a linear DAG: verify -> partition -> induce-check -> thermo
-> measures -> report.  Exit codes: 0 success, 1 mathematical failure
(reports still carry the witness), 2 usage or parse errors.  Identical
config and seed reproduce every numeric artifact byte for byte; only the
run manifest carries wall-clock times.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import fileio
from .errors import ConfigError, MathFailure
from .fileio import canonical_json, fmt_num, parse_num, sha256_text, write_text
from .induced import (
    distortion_bound_induced,
    induce,
    verify_inducing_scheme,
)
from .measures import (
    acip_pushforward,
    check_stationary,
    lift_measure,
    perron_vector,
    rokhlin_entropy,
    skew_invariance_check,
)
from .partition import (
    build_markov_partition,
    check_bip,
    check_fcp,
    check_fip,
    check_shift_mixing,
    full_branch_partition,
    transition_matrix,
)
from .semigroup import (
    check_topological_mixing,
    sample_walk,
    verify_locally_expanding,
)
from .thermo import (
    ConstantPotential,
    MemoryOnePotential,
    coordinate_potential,
    equilibrium_check,
    gurevich_pressure,
    log_deriv_potential,
    transfer_gibbs,
    verify_gibbs,
)

STAGES = ("verify", "partition", "induce-check", "thermo", "measures", "report")
STAGE_VERSION = "1"

DEFAULTS = {
    "epsilon": "1/16",
    "tol": "1/1000",
    "depth_cap": 20,
    "horizon": 10,
    "bins": 512,
    "n_iter": 80,
    "n_max": 14,
    "grid": 4096,
    "seed": 1,
    "potential": "logderiv:1.0",
}


class Run:
    """One configured run: config values plus the output directory."""

    def __init__(self, cfg, out_dir, overrides=None):
        self.cfg = dict(DEFAULTS)
        self.cfg.update(cfg)
        for key, val in (overrides or {}).items():
            if val is not None:
                self.cfg[key] = val
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.system = fileio.system_from_config(self.cfg)
        self.config_hash = sha256_text(canonical_json(self.cfg))

    def num(self, key):
        return parse_num(self.cfg[key])

    def path(self, name):
        return self.out / name

    def write(self, name, text):
        digest = write_text(self.path(name), text)
        self._note_artifact(name, digest)
        return digest

    def write_json(self, name, obj):
        return self.write(name, canonical_json(obj))

    def read_json(self, name):
        p = self.path(name)
        if not p.exists():
            raise ConfigError(
                f"missing artifact {name}: run the earlier stages first"
            )
        return json.loads(p.read_text())

    # -- manifest ----------------------------------------------------------

    def _manifest(self):
        p = self.path("manifest.json")
        if p.exists():
            return json.loads(p.read_text())
        return {"config_hash": self.config_hash, "stages": {}}

    def _note_artifact(self, name, digest):
        self._pending.setdefault(name, digest)

    def stage(self, name):
        return _StageContext(self, name)


class _StageContext:
    def __init__(self, run, name):
        self.run = run
        self.name = name

    def __enter__(self):
        self.run._pending = {}
        self.t0 = time.monotonic()
        return self

    def __exit__(self, exc_type, exc, tb):
        manifest = self.run._manifest()
        manifest["stages"][self.name] = {
            "version": STAGE_VERSION,
            "wall_seconds": round(time.monotonic() - self.t0, 3),
            "ok": exc_type is None,
            "artifacts": dict(sorted(self.run._pending.items())),
        }
        self.run.path("manifest.json").write_text(canonical_json(manifest))
        return False


# ---------------------------------------------------------------------------
# stages


def cmd_verify(run):
    with run.stage("verify"):
        cover = verify_locally_expanding(run.system, grid=int(run.cfg["grid"]))
        run.write_json("cover.json", fileio.cover_to_obj(cover))
        cert = check_topological_mixing(
            run.system, cover, scale=run.num("epsilon"),
            horizon=int(run.cfg["horizon"]),
        )
        run.write_json("mixing.json", fileio.mixing_to_obj(cert))
        if not cert.complete:
            raise MathFailure(
                f"mixing certificate incomplete: {len(cert.unresolved)} "
                f"unresolved pairs (first: {cert.unresolved[0]})",
                witness=cert.unresolved[0],
            )
    return 0


def cmd_partition(run):
    with run.stage("partition"):
        cover = fileio.cover_from_obj(run.read_json("cover.json"))
        mixing = run.read_json("mixing.json")
        if not mixing.get("complete"):
            raise MathFailure("mixing certificate incomplete; cannot build")
        part = build_markov_partition(
            run.system,
            cover,
            eps=run.num("epsilon"),
            tol=run.num("tol"),
            depth_cap=int(run.cfg["depth_cap"]),
            horizon=int(run.cfg["horizon"]),
        )
        run.write_json("partition.json", fileio.partition_to_obj(part))
        matrix = transition_matrix(part)
        fip_ok, _ = check_fip(part)
        fcp_ok, fcp_witness = check_fcp(part, matrix)
        bip_ok = check_bip(matrix, part.cycle)
        mix = check_shift_mixing(matrix, horizon=24)
        run.write_json("structure.json", {
            "n_elements": part.n_elements,
            "n_balls": len(part.balls),
            "distinct_rows": matrix.q,
            "uncovered_mass": fmt_num(part.uncovered_mass),
            "fip": fip_ok,
            "fcp": fcp_ok,
            "fcp_witness": fcp_witness if not fcp_ok else None,
            "bip": bip_ok,
            "shift_mixing": mix.mixing,
            "shift_mixing_power": mix.power,
        })
        if not (fip_ok and fcp_ok and bip_ok and mix.mixing):
            raise MathFailure("structure flags failed; see structure.json")
    return 0


def _load_partition(run):
    return fileio.partition_from_obj(
        run.read_json("partition.json"), run.system
    )


def cmd_induce_check(run):
    with run.stage("induce-check"):
        part = _load_partition(run)
        ind = induce(part)
        rep = verify_inducing_scheme(ind)
        dist = distortion_bound_induced(ind, n_cylinders=100, max_depth=6)
        run.write_json("inducing.json", {
            "h1": rep.h1.ok,
            "h2": rep.h2.ok,
            "h2_min_margin": fmt_num(rep.h2.detail["min_margin"] or 0),
            "h3": rep.h3.ok,
            "sigma_star": fmt_num(rep.h3.detail["sigma_star"]),
            "h4": rep.h4.ok,
            "min_abs_deriv": fmt_num(rep.h4.detail["min_abs_deriv"]),
            "h5": rep.h5.ok,
            "h5_max_ratio": fmt_num(rep.h5.detail["max_ratio"]),
            "analytic_k1": fmt_num(rep.h5.detail["analytic_k1"]),
            "distortion_empirical": fmt_num(dist.empirical),
            "distortion_analytic": fmt_num(dist.analytic),
            "distortion_ok": dist.ok,
        })
        if not (rep.all_ok and dist.ok):
            raise MathFailure("inducing-scheme conditions failed")
    return 0


def _parse_potential(spec, ind):
    spec = str(spec)
    if spec.startswith("constant:"):
        return ConstantPotential(float(spec.split(":", 1)[1])), 0.0
    if spec.startswith("logderiv:"):
        t = float(spec.split(":", 1)[1])
        phi = log_deriv_potential(ind, t)
        if isinstance(phi, MemoryOnePotential):
            return phi, 0.0
        return _to_memory_one(phi, ind)
    if spec == "coordinate":
        return _to_memory_one(coordinate_potential(ind), ind)
    raise ConfigError(
        f"unknown potential spec {spec!r}: use constant:<c>, logderiv:<t>, "
        "or coordinate"
    )


def _to_memory_one(phi, ind):
    """Depth-1 projection of an unbounded-memory potential with its
    recorded truncation error (the variation tail beyond depth 1)."""
    vals = tuple(
        phi.value((i,)) for i in range(ind.partition.n_elements)
    )
    return MemoryOnePotential(values=vals), float(phi.tail(1))


def _thermo_chain(run, label, ind, spec):
    matrix = ind.matrix
    phi, proj_err = _parse_potential(spec, ind)
    n_max = int(run.cfg["n_max"])
    pressure = gurevich_pressure(matrix, phi, base=0, n_max=n_max)
    op, mu = transfer_gibbs(matrix, phi)
    depth = 8 if matrix.n <= 8 else 2
    cert = verify_gibbs(mu, matrix, phi, op.pressure, depth=depth)
    eq = equilibrium_check(mu, matrix, phi, op.pressure)
    obj = {
        "potential": spec,
        "projection_error": fmt_num(proj_err),
        "states": matrix.n,
        "pressure_fit": fmt_num(pressure.pressure),
        "pressure_fit_residual": fmt_num(pressure.slope_residual),
        "pressure_cross_discrepancy": fmt_num(pressure.cross_discrepancy or 0),
        "pressure_transfer": fmt_num(op.pressure),
        "log_z": {
            str(z.n): (None if z.log_value is None else fmt_num(z.log_value))
            for z in pressure.log_zs
        },
        "mixing_certified": pressure.mixing_certified,
        "gibbs_B": fmt_num(cert.B),
        "gibbs_depth": cert.depth,
        "gibbs_cylinders": cert.cylinders,
        "gibbs_sampled": cert.sampled,
        "equilibrium_entropy": fmt_num(eq.entropy),
        "equilibrium_integral": fmt_num(eq.integral),
        "equilibrium_residual": fmt_num(eq.residual),
        "eigen_residual": fmt_num(op.residual),
    }
    run.write_json(f"thermo_{label}.json", obj)
    run.write(
        f"cylinders_{label}.csv", fileio.cylinder_csv(mu, matrix, depth=2)
    )


def cmd_thermo(run):
    with run.stage("thermo"):
        spec = run.cfg["potential"]
        branch = induce(full_branch_partition(run.system, 0))
        _thermo_chain(run, "branch", branch, spec)
        part = _load_partition(run)
        _thermo_chain(run, "partition", induce(part), spec)
    return 0


def cmd_measures(run):
    with run.stage("measures"):
        bins = int(run.cfg["bins"])
        n_iter = int(run.cfg["n_iter"])
        seed = int(run.cfg["seed"])
        summary = {"bins": bins, "n_iter": n_iter}

        entropies = {}
        branch_inds = {}
        for i in range(run.system.k):
            ind = induce(full_branch_partition(run.system, i))
            res = acip_pushforward(ind, bins=bins, n_iter=n_iter, tv_tol=1e-12)
            run.write(f"acip_gen{i}.csv", fileio.density_csv(res.density))
            entropies[str(i)] = {
                "entropy": fmt_num(rokhlin_entropy(ind, res.density)),
                "entropy_quadrature": fmt_num(
                    _quadrature_entropy(ind, res.density)
                ),
                "c0_empirical": fmt_num(res.c0_empirical),
                "tv_last": fmt_num(res.tv_changes[-1] if res.tv_changes else 0),
                "converged": res.converged,
            }
            branch_inds[i] = (ind, res.density)
        summary["acip"] = entropies

        pv = perron_vector(run.system.matrix)
        run.write_json("perron.json", {
            "p": [fmt_num(x) for x in pv.p],
            "residual": fmt_num(pv.residual),
        })

        # stationary lift through the one-step full-branch structure
        ind0, density0 = branch_inds[0]
        lift = lift_measure(ind0, density0, pv.p)
        run.write("lift.csv", fileio.fibered_csv(lift))
        residual = check_stationary(run.system, lift, subdiv=8)
        skew = skew_invariance_check(run.system, lift, seed=seed)
        summary["lift"] = {
            "structure": "full-branch(gen0)",
            "stationarity_residual": fmt_num(residual),
            "skew_max_z": fmt_num(skew.max_z),
            "skew_band": fmt_num(skew.band),
            "skew_ok": skew.ok,
        }

        # diagnostic: the tower lift through the pipeline partition
        part = _load_partition(run)
        pind = induce(part)
        pres = acip_pushforward(pind, bins=bins, n_iter=n_iter, tv_tol=1e-9)
        plift = lift_measure(pind, pres.density, pv.p, deficit_tol=0.1)
        summary["pipeline_lift"] = {
            "structure": "partition",
            "acip_c0": fmt_num(pres.c0_empirical),
            "stationarity_residual": fmt_num(
                check_stationary(run.system, plift, subdiv=8)
            ),
        }

        # a reproducible walk trace ties the stages together
        walk = sample_walk(run.system, seed, 2000, 0.1234567)
        freq = np.bincount(walk.symbols, minlength=run.system.k) / max(
            len(walk.symbols), 1
        )
        summary["walk"] = {
            "seed": seed,
            "symbol_frequency": [fmt_num(f) for f in freq],
            "perron_gap": fmt_num(float(np.max(np.abs(freq - pv.p)))),
        }
        run.write_json("measures.json", summary)
    return 0


def _quadrature_entropy(ind, density):
    from .measures import _bin_pieces
    from .semigroup import derivative_along_word

    total = 0.0
    part = ind.partition
    for e in part.elements:
        for k, piece, take in _bin_pieces(e.arc, density.bins, False):
            mass = float(density.weights[k]) * take
            for t in range(4):
                x = piece.sample((2 * t + 1) / 8)
                total += mass / 4 * math.log(
                    float(derivative_along_word(part.system, e.word, x))
                )
    return total


def cmd_report(run):
    with run.stage("report"):
        lines = [f"circledyn report for config {run.cfg.get('name', '?')}",
                 f"config hash: {run.config_hash}", ""]
        for name in ("cover.json", "mixing.json", "structure.json",
                     "inducing.json", "thermo_branch.json",
                     "thermo_partition.json", "perron.json", "measures.json"):
            p = run.path(name)
            if not p.exists():
                lines.append(f"[{name}] missing")
                continue
            obj = json.loads(p.read_text())
            lines.append(f"[{name}]")
            for key in sorted(obj):
                val = obj[key]
                if isinstance(val, (dict, list)):
                    continue
                lines.append(f"  {key} = {val}")
            lines.append("")
        run.write("report.txt", "\n".join(lines) + "\n")
    return 0


COMMANDS = {
    "verify": cmd_verify,
    "partition": cmd_partition,
    "induce-check": cmd_induce_check,
    "thermo": cmd_thermo,
    "measures": cmd_measures,
    "report": cmd_report,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="circledyn",
        description="expanding circle-map semigroups: partitions, "
        "thermodynamics, stationary measures",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["run"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--tol", default=None)
        p.add_argument("--bins", type=int, default=None)
        p.add_argument("--nmax", type=int, default=None)
        if name == "run":
            p.add_argument(
                "--stages", default=",".join(STAGES),
                help="comma-separated prefix of the stage pipeline",
            )
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = fileio.load_config(args.config)
        overrides = {
            "seed": args.seed,
            "tol": args.tol,
            "bins": args.bins,
            "n_max": args.nmax,
        }
        run = Run(cfg, args.out, overrides)
        if args.command == "run":
            wanted = [s.strip() for s in args.stages.split(",") if s.strip()]
            if wanted != list(STAGES[: len(wanted)]):
                raise ConfigError(
                    f"--stages must be a prefix of {','.join(STAGES)}"
                )
            for name in wanted:
                code = COMMANDS[name](run)
                if code:
                    return code
            return 0
        return COMMANDS[args.command](run)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except MathFailure as err:
        print(f"failure: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
