"""Command line entry point: ``levychaos <command> --config PATH [--seed N] [--out DIR] [--threads N]``.

Commands and their CSV outputs (header row, 17 significant digits):

``simulate``   masses.csv    replica, level, cutoff, box_lo, box_hi, mass
``spectrum``   spectrum.csv  q, zeta_theory, zeta_hat, zeta_se, r2
``criteria``   criteria.csv  key, value            (+ criteria.txt)
``startest``   startest.csv  box_lo, box_hi, ks_stat, ks_p, ratio_q05, ratio_q10,
                             ratio_q15, se_q05, se_q10, se_q15
``exponents``  exponents.csv query, p, points, weights, eps, eps_prime, eta_eps_re,
                             eta_eps_im, eta_eps_prime_re, eta_eps_prime_im,
                             eta_full_re, eta_full_im, residual

Every run also writes ``manifest.json``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from dataclasses import replace
from importlib import metadata

import numpy as np

from .analysis import criteria_report, zeta_estimate
from .config import ConfigError, RunConfig, load_config
from .families import Cone
from .measure import cascade_replicas, dyadic_mass_table
from .rng import stream
from .star import (ExponentQuery, eta_epsilon, random_queries, star_mc_samples,
                   star_report)

log = logging.getLogger("levychaos")

COMMANDS = ("simulate", "spectrum", "criteria", "startest", "exponents")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


class _Writer:
    """Tracks written files so a failed run leaves nothing behind."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.files: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def csv(self, name: str, header, rows) -> str:
        path = os.path.join(self.out_dir, name)
        self.files.append(path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
        return path

    def text(self, name: str, body: str) -> str:
        path = os.path.join(self.out_dir, name)
        self.files.append(path)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(body if body.endswith("\n") else body + "\n")
        return path

    def cleanup(self):
        for path in self.files:
            try:
                os.remove(path)
            except FileNotFoundError:
                pass


def _need_cone(cfg: RunConfig, cmd: str) -> Cone:
    if not isinstance(cfg.spec, Cone):
        raise ConfigError(f"'{cmd}' simulates sample paths and needs family = cone")
    return cfg.spec


def cmd_simulate(cfg: RunConfig, out: _Writer, threads: int):
    spec = _need_cone(cfg, "simulate")
    samples = cascade_replicas(spec, cfg.eps_ratio, cfg.depth, cfg.grid, cfg.boxes, cfg.seed,
                               cfg.n_replicas, threads, keep_cum=False)

    def rows():
        for s in samples:
            for n, cut in enumerate(s.ladder):
                for (lo, hi), m in zip(s.boxes, s.masses[n]):
                    yield s.replica, n, cut, lo, hi, m

    out.csv("masses.csv", ["replica", "level", "cutoff", "box_lo", "box_hi", "mass"], rows())


def cmd_spectrum(cfg: RunConfig, out: _Writer, threads: int):
    spec = _need_cone(cfg, "spectrum")
    jmax = max(cfg.dyadic_levels)
    samples = cascade_replicas(spec, cfg.eps_ratio, cfg.depth, cfg.grid, [(0.0, 1.0)],
                               cfg.seed, cfg.n_replicas, threads)
    tables = [dyadic_mass_table(s, jmax) for s in samples]
    rep = zeta_estimate(tables, cfg.q_grid, cfg.dyadic_levels, spec=spec,
                        cutoff=cfg.deepest_cutoff, seed=cfg.seed,
                        min_replicas=min(50, cfg.n_replicas))
    rows = zip(rep.q, rep.zeta_theory, rep.zeta_hat, rep.zeta_se, rep.r2)
    out.csv("spectrum.csv", ["q", "zeta_theory", "zeta_hat", "zeta_se", "r2"], rows)


def cmd_criteria(cfg: RunConfig, out: _Writer, threads: int):
    rep = criteria_report(cfg.spec, cfg.deltas)
    out.csv("criteria.csv", ["key", "value"], rep.rows())
    out.text("criteria.txt", rep.summary())
    print(rep.summary())


def cmd_startest(cfg: RunConfig, out: _Writer, threads: int):
    spec = _need_cone(cfg, "startest")
    lhs, rhs = star_mc_samples(spec, cfg.star_eps, cfg.star_boxes, cfg.star_replicas,
                               cfg.seed, cfg.grid, cfg.deepest_cutoff, threads)
    rep = star_report(lhs, rhs, cfg.star_boxes, cfg.star_eps, cfg.alpha, cfg.misscale,
                      spec.dimension)
    rows = list(rep.rows())
    out.csv("startest.csv", list(rows[0].keys()), (r.values() for r in rows))
    print(f"star test {'passed' if rep.passed else 'rejected'} "
          f"(KS p-values {', '.join(f'{p:.3g}' for p in rep.ks_p)})")


def cmd_exponents(cfg: RunConfig, out: _Writer, threads: int):
    spec = cfg.spec
    eps, eps_p = cfg.star_eps, cfg.star_eps_prime
    queries = random_queries(stream(cfg.seed, 0, 0, 5), cfg.n_queries)

    def rows():
        for i, qy in enumerate(queries):
            top = eta_epsilon(spec, qy, eps)
            rest = eta_epsilon(spec, qy.scaled(1.0 / eps), eps_p)
            full = eta_epsilon(spec, qy, eps * eps_p)
            yield (i, len(qy.points), " ".join(_fmt(t) for t in qy.points),
                   " ".join(_fmt(q) for q in qy.weights), eps, eps_p, top.real, top.imag,
                   rest.real, rest.imag, full.real, full.imag, abs(full - top - rest))

    out.csv("exponents.csv",
            ["query", "p", "points", "weights", "eps", "eps_prime", "eta_eps_re", "eta_eps_im",
             "eta_eps_prime_re", "eta_eps_prime_im", "eta_full_re", "eta_full_im", "residual"],
            rows())


HANDLERS = {
    "simulate": cmd_simulate,
    "spectrum": cmd_spectrum,
    "criteria": cmd_criteria,
    "startest": cmd_startest,
    "exponents": cmd_exponents,
}


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def run_command(cmd: str, cfg: RunConfig, out_dir: str | None = None, threads: int = 1) -> int:
    if cmd not in HANDLERS:
        raise ValueError(f"unknown command {cmd!r}; choose from {', '.join(COMMANDS)}")
    out = _Writer(out_dir or cfg.out)
    t0 = time.perf_counter()
    try:
        HANDLERS[cmd](cfg, out, threads)
        manifest = {
            "command": cmd,
            "code_version": _version(),
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "threads": threads,
            "wall_time_s": time.perf_counter() - t0,
            "outputs": [os.path.basename(p) for p in out.files],
            **cfg.manifest(),
        }
        out.text("manifest.json", json.dumps(manifest, indent=2, default=str))
    except Exception:
        out.cleanup()
        raise
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="levychaos", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="INI run configuration")
    parser.add_argument("--seed", type=int, help="override the configured seed")
    parser.add_argument("--out", help="output directory (overrides [scenario] out)")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads; never changes results")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be non-negative")
            cfg = replace(cfg, seed=args.seed)
        return run_command(args.command, cfg, args.out, max(1, args.threads))
    except (ConfigError, OSError, ValueError, ArithmeticError, RuntimeError) as exc:
        log.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
