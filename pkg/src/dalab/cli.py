"""Command-line runner: ``dalab <command> --config run.toml [--seed N] [--out DIR] ...``.

Exit status: 0 on success, 2 when a certified inequality fails, 1 on usage
errors (bad flags, bad config, inconsistent geometry).  On a usage error no
artifact is written.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .certify import certify_lemma_WE, certify_lifting, check_covering, compute_thresholds
from .config import COMMANDS, ConfigError, ExperimentConfig, config_hash, load_config
from .disorder import DisorderSpec
from .dynamics import WavePacket, default_times, localization_profile
from .export import (
    summary,
    write_csv,
    write_edges,
    write_ids,
    write_ilse,
    write_json,
    write_moments,
    write_reports,
    write_spectrum,
    write_table,
    write_wegner,
)
from .geometry import (
    DeloneSet,
    NonDeloneError,
    Pattern,
    Window,
    compute_R,
    enumerate_patterns,
    generate_periodic,
    generate_random_cell,
    generate_sturmian,
    read_delone,
    supf_diagnostic,
    write_delone,
)
from .operators import BoxSpec, PotentialSample, assemble_hamiltonian, sample_potential
from .spectral import eig_extremal, eig_full, estimate_ids
from .stats import edge_scan, ilse_scan, wegner_scan

log = logging.getLogger("dalab")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


@dataclass
class Outcome:
    passed: bool = True
    message: str = ""
    written: list = field(default_factory=list)


def _window(cfg: ExperimentConfig) -> Window:
    if cfg.geometry.window is not None:
        w = Window.parse(cfg.geometry.window)
        if w.dim != cfg.geometry.d:
            raise ValueError("geometry.window dimension differs from geometry.d")
        return w
    Lmax = max(cfg.box.Ls)
    c = np.asarray(cfg.box.centers)
    return Window(tuple(int(v) for v in c.min(axis=0) - Lmax), tuple(int(v) for v in c.max(axis=0) + Lmax))


def build_delone(cfg: ExperimentConfig) -> DeloneSet:
    g = cfg.geometry
    if g.kind == "file":
        D = read_delone(g.file)
        if D.dim != g.d:
            raise ValueError(f"{g.file} has dimension {D.dim}, geometry.d = {g.d}")
        return D
    W = _window(cfg)
    if g.kind == "full":
        return DeloneSet.full(W)
    if g.kind == "periodic":
        return generate_periodic(g.d, g.k, W)
    if g.kind == "sturmian":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return generate_sturmian(g.alpha, g.beta, W)
    return generate_random_cell(g.d, g.R, W, g.seed)


def build_disorder(cfg: ExperimentConfig) -> DisorderSpec | None:
    c = cfg.disorder
    if not c.enabled:
        return None
    return DisorderSpec(c.law, c.M, c.tau, c.a, c.b, c.reflected)


def _boxes(cfg: ExperimentConfig):
    for L in cfg.box.Ls:
        for j, x in enumerate(cfg.box.centers):
            yield L, j, BoxSpec(tuple(x), L)


def _sample(D, box, disorder, seed, s):
    if disorder is None:
        return PotentialSample.from_values(D, box, 0.0, 1.0)
    return sample_potential(D, box, disorder, seed, s)


def cmd_delone_gen(cfg, out: Path) -> Outcome:
    D = build_delone(cfg)
    write_delone(out / "delone.txt", D)
    return Outcome(message=f"{len(D)} points, R={D.declared_R}")


def cmd_delone_analyze(cfg, out: Path) -> Outcome:
    D = build_delone(cfg)
    R = compute_R(D)
    K = cfg.params.pattern_K
    pats = enumerate_patterns(D, K)
    write_csv(out / "patterns.csv", ["pattern", "count"],
              ((";".join("/".join(map(str, p)) for p in P.points) or "empty", c) for P, c in pats))
    rep = supf_diagnostic(D, Pattern.singleton(D.dim), cfg.box.Ls, [tuple(x) for x in cfg.box.centers])
    rows = ((x, L, str(eta), float(eta)) for (x, L), eta in rep.table.items())
    write_csv(out / "frequency.csv", ["center", "L", "eta", "eta_float"], rows)
    write_table(out / "deviation.dat", list(rep.deviation_by_L), list(rep.deviation_by_L.values()),
                "L center_spread")
    write_json(out / "summary.json", {
        "R": R, "declared_R": D.declared_R, "points": len(D), "pattern_K": K,
        "distinct_patterns": len(pats), "singleton_limit": rep.limit,
        "singleton_deviation": rep.deviation, "strictly_positive": rep.strictly_positive,
    })
    return Outcome(message=f"R={R}, {len(pats)} patterns of size {K}")


def cmd_spectrum(cfg, out: Path) -> Outcome:
    D, dis = build_delone(cfg), build_disorder(cfg)
    k = cfg.params.k
    for L, j, box in _boxes(cfg):
        H = assemble_hamiltonian(box, D, _sample(D, box, dis, cfg.run.master_seed, 0))
        if k == 0 or k >= box.size:
            res = eig_full(H)
        else:
            res = eig_extremal(H, k, cfg.params.side, tol=cfg.run.tol, vectors=False)
        write_spectrum(out / f"spectrum_L{L}_c{j}.csv", res)
        write_table(out / f"spectrum_L{L}_c{j}.dat", np.arange(len(res)), res.eigenvalues, "index eigenvalue")
    return Outcome()


def cmd_certify_lemma(cfg, out: Path) -> Outcome:
    D = build_delone(cfg)
    R = D.declared_R
    q = Fraction(cfg.params.q)
    reports = []
    for L, j, box in _boxes(cfg):
        if L <= R:
            raise ValueError(f"certify-lemma needs L > R = {R}")
        reports.append(check_covering(D, box, R))
        reports.append(certify_lemma_WE(D, box, q, cfg.run.nsamples, cfg.run.master_seed))
    write_reports(out / "report.csv", reports)
    th = compute_thresholds(D.dim, R, q)
    write_json(out / "summary.json", {
        "tildeE_W": th.tildeE_W, "E_W": th.E_W, "C": th.C, "R": R, "q": th.q,
        "vacuous": [r.details.get("recommended_L") for r in reports if r.vacuous],
    })
    failed = [r for r in reports if not r.passed]
    return Outcome(not failed, f"{len(failed)} of {len(reports)} checks failed" if failed else "all checks passed")


def cmd_certify_lifting(cfg, out: Path) -> Outcome:
    D, dis = build_delone(cfg), build_disorder(cfg)
    if dis is None:
        raise ValueError("certify-lifting needs disorder.enabled = true")
    p = cfg.params
    reports = []
    for L, j, box in _boxes(cfg):
        lr = certify_lifting(D, box, dis, p.K, cfg.run.nsamples, cfg.run.master_seed, p.nphi,
                             p.min_frequency, p.energy_cap)
        reports += [lr.min_bound, lr.chain_bound]
    write_reports(out / "report.csv", reports)
    failed = [r for r in reports if not r.passed]
    return Outcome(not failed, f"{len(failed)} of {len(reports)} checks failed" if failed else "all checks passed")


def cmd_wegner(cfg, out: Path) -> Outcome:
    D, dis = build_delone(cfg), build_disorder(cfg)
    if dis is None:
        raise ValueError("wegner needs disorder.enabled = true")
    th = compute_thresholds(D.dim, D.declared_R, Fraction(cfg.params.q))
    E = float(th.E_W) / 2 if cfg.params.E is None else cfg.params.E
    rep = wegner_scan(D, dis, E, cfg.params.etas, cfg.box.Ls, [tuple(x) for x in cfg.box.centers],
                      cfg.run.nsamples, cfg.run.master_seed, th, cfg.run.threads)
    write_wegner(out / "wegner.csv", rep)
    write_table(out / "wegner_eta.dat", rep.etas, rep.phat[-1].mean(axis=0), f"eta phat (L={rep.Ls[-1]})")
    write_json(out / "summary.json", summary(rep.q_w, rep.uniformity, None, None, cfg.run.master_seed,
                                             E=E, center_q_w=rep.center_q_w))
    return Outcome(message=f"Q_W={rep.q_w:.4g}" if rep.q_w is not None else "")


def cmd_ilse(cfg, out: Path) -> Outcome:
    D, dis = build_delone(cfg), build_disorder(cfg)
    if dis is None:
        raise ValueError("ilse needs disorder.enabled = true")
    rep = ilse_scan(D, dis, cfg.box.Ls, [tuple(x) for x in cfg.box.centers], cfg.run.nsamples,
                    cfg.params.p, cfg.run.master_seed, workers=cfg.run.threads)
    write_ilse(out / "ilse.csv", rep)
    write_table(out / "ilse_median.dat", rep.Ls, rep.median, "L median_lambda_min")
    write_json(out / "summary.json", summary(None, None, rep.c_fit, rep.p, cfg.run.master_seed,
                                             trend_slope=rep.trend_slope, quantile5=rep.quantile5,
                                             free_lambda_min=rep.free_lambda_min))
    return Outcome(message=f"c_fit={rep.c_fit:.4g}")


def cmd_ids(cfg, out: Path) -> Outcome:
    D, dis = build_delone(cfg), build_disorder(cfg)
    M = 0.0 if dis is None else dis.M
    E = cfg.params.energies
    if E is None:
        E = np.linspace(0.0, 4 * D.dim + M, cfg.params.nenergies)
    for L in cfg.box.Ls:
        curve = estimate_ids(D, dis, L, [tuple(x) for x in cfg.box.centers], cfg.run.nsamples, E,
                             cfg.run.master_seed)
        write_ids(out / f"ids_L{L}.csv", curve)
        write_table(out / f"ids_L{L}.dat", curve.energies, curve.mean, "E N_mean")
    return Outcome()


def cmd_dynamics(cfg, out: Path) -> Outcome:
    D, dis = build_delone(cfg), build_disorder(cfg)
    p = cfg.params
    th = compute_thresholds(D.dim, D.declared_R, Fraction(p.q))
    I = (0.0, float(th.E_W)) if p.interval is None else tuple(p.interval)
    times = default_times(p.t_max, p.npoints) if p.times is None else p.times
    info = {}
    for L, j, box in _boxes(cfg):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            tr = localization_profile(D, dis, box, I, WavePacket.delta(box), times,
                                      cfg.run.nsamples, cfg.run.master_seed, p.moment_p)
        write_moments(out / f"moments_L{L}_c{j}.csv", tr)
        write_table(out / f"moments_L{L}_c{j}.dat", tr.times, tr.mean, f"t mean_m_{p.moment_p:g}")
        t_hi = float(tr.times[-1])
        info[f"L{L}_c{j}"] = {
            "running_sup": tr.running_sup, "saturation_ratio": tr.saturation_ratio(t_hi / 10, t_hi),
            "negligible": int(tr.negligible.sum()), "interval": I,
        }
    write_json(out / "summary.json", info)
    return Outcome()


def cmd_edges(cfg, out: Path) -> Outcome:
    D, dis = build_delone(cfg), build_disorder(cfg)
    bad = 0
    rows = []
    for L, j, box in _boxes(cfg):
        rep = edge_scan(D, dis, L, cfg.run.nsamples, cfg.run.master_seed, box.center, cfg.run.tol)
        write_edges(out / f"edges_L{L}_c{j}.csv", rep)
        rows.append((L, box.center, rep.min_lambda, rep.max_lambda, rep.bound, rep.contained))
        bad += not rep.contained
    write_csv(out / "edges.csv", ["L", "center", "min_lambda", "max_lambda", "bound", "contained"], rows)
    return Outcome(bad == 0, f"{bad} boxes leave [0, 4d+M]" if bad else "spectra inside [0, 4d+M]")


HANDLERS = {
    "delone-gen": cmd_delone_gen,
    "delone-analyze": cmd_delone_analyze,
    "spectrum": cmd_spectrum,
    "certify-lemma": cmd_certify_lemma,
    "certify-lifting": cmd_certify_lifting,
    "wegner": cmd_wegner,
    "ilse": cmd_ilse,
    "ids": cmd_ids,
    "dynamics": cmd_dynamics,
    "edges": cmd_edges,
}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(command: str, cfg: ExperimentConfig) -> tuple[int, Outcome]:
    """Run one command; artifacts land in ``cfg.run.out`` only if it completes."""
    out = Path(cfg.run.out)
    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(prefix="dalab-") as tmp:
        tmp = Path(tmp)
        outcome = HANDLERS[command](cfg, tmp)
        elapsed = time.perf_counter() - t0
        files = sorted(p for p in tmp.iterdir() if p.is_file())
        manifest = {
            "command": command,
            "config_hash": config_hash(cfg),
            "config": cfg.model_dump(mode="json"),
            "master_seed": cfg.run.master_seed,
            "version": __version__,
            "artifacts": {p.name: _sha256(p) for p in files},
            "passed": outcome.passed,
            "timings": {"wall_seconds": elapsed},
        }
        out.mkdir(parents=True, exist_ok=True)
        for p in files:
            shutil.move(str(p), out / p.name)
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        outcome.written = [out / p.name for p in files] + [out / "manifest.json"]
    return (EXIT_OK if outcome.passed else EXIT_FAIL), outcome


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dalab",
        description="Delone-Anderson experiments: geometry, spectra, certificates, statistics, dynamics.",
        epilog="Exit status: 0 success, 1 usage error, 2 a certified inequality failed.",
    )
    ap.add_argument("--version", action="version", version=f"dalab {__version__}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", type=Path, help="TOML experiment file (see configs/schema.md)")
    ap.add_argument("--seed", type=int, help="master seed, overrides run.master_seed")
    ap.add_argument("--threads", type=int, help="worker threads, overrides DAL_THREADS and run.threads")
    ap.add_argument("--out", type=str, help="artifact directory, overrides run.out")
    ap.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                    help="set one config key, value parsed as a TOML literal; repeatable")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    with warnings.catch_warnings():
        logging.captureWarnings(True)
        return _main(args)


def _main(args) -> int:
    run_top = {}
    if args.seed is not None:
        run_top["master_seed"] = args.seed
    threads = args.threads
    if threads is None and os.environ.get("DAL_THREADS"):
        try:
            threads = int(os.environ["DAL_THREADS"])
        except ValueError:
            print("error: DAL_THREADS must be an integer", file=sys.stderr)
            return EXIT_USAGE
    if threads is not None:
        run_top["threads"] = threads
    if args.out is not None:
        run_top["out"] = args.out
    try:
        cfg = load_config(args.config, args.override, run=run_top)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.command is not None and cfg.command != args.command:
        print(f"error: config is for {cfg.command!r}, not {args.command!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code, outcome = run(args.command, cfg)
    except (ValueError, NonDeloneError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    status = "PASS" if code == EXIT_OK else "FAIL"
    print(f"{args.command}: {status}" + (f" ({outcome.message})" if outcome.message else ""))
    log.info("artifacts in %s", cfg.run.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
