"""Command-line interface: simulate, fit, analyze, stats and prior-clusters."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, descriptive
from . import io as pio
from .dgp import DGPSpec, simulate_design
from .gibbs import run_chain
from .pyp import prior_cluster_pmf

log = logging.getLogger("msgarch_bnp")


def _globals() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="master random seed")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    return p


def build_parser() -> argparse.ArgumentParser:
    g = _globals()
    parser = argparse.ArgumentParser(prog="msgarch-bnp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[g], help="simulate a panel from the two-regime design")
    s.add_argument("--n", type=int, default=30, help="number of units")
    s.add_argument("--t", type=int, default=300, help="series length")
    s.add_argument("--p", type=float, default=0.98, help="mean diagonal transition probability")
    s.add_argument("--precision", type=float, default=1000.0, help="beta precision of the diagonal")

    f = sub.add_parser("fit", parents=[g], help="run the Gibbs sampler on a panel CSV")
    f.add_argument("panel", type=Path, help="panel CSV (date,<units>)")
    f.add_argument("--config", type=Path, help="key = value configuration file")
    f.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    f.add_argument("--iterations", type=int)
    f.add_argument("--burn-in", type=int)
    f.add_argument("--thin", type=int)
    f.add_argument("--from-prices", action="store_true", help="input holds prices; fit 100*log returns")

    a = sub.add_parser("analyze", parents=[g], help="clustering analytics of a chain directory")
    a.add_argument("chain", type=Path, help="directory written by fit")
    a.add_argument("--level", type=float, default=0.9, help="central interval level")

    t = sub.add_parser("stats", parents=[g], help="rolling moments and cross-sectional densities")
    t.add_argument("panel", type=Path)
    t.add_argument("--windows", default="20,30,40", help="comma-separated window sizes")
    t.add_argument("--dates", default=None, help="comma-separated reference time labels (window ends)")
    t.add_argument("--grid-points", type=int, default=200)
    t.add_argument("--from-prices", action="store_true")

    c = sub.add_parser("prior-clusters", parents=[g], help="prior law of the number of clusters")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--nu", type=float, default=0.0)
    c.add_argument("--psi", type=float, default=1.0)
    return parser


def _out_dir(args, default: str) -> Path:
    out = args.out or Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    spec = DGPSpec(N=args.n, T=args.t, persistence=args.p, precision=args.precision,
                   seed=0 if args.seed is None else args.seed)
    panel, truth = simulate_design(spec)
    out = _out_dir(args, "simulation")
    pio.write_panel_csv(panel, out / "panel.csv")
    pio.write_truth(truth, out / "truth", units=panel.units, times=panel.times)
    lines = [f"command = simulate", f"seed = {spec.seed}", f"N = {spec.N}", f"T = {spec.T}",
             f"persistence = {spec.persistence}", f"precision = {spec.precision}",
             f"perturbation = {spec.perturbation}", f"garch_concentration = {list(spec.garch_concentration)}",
             f"sigma0_sq = {spec.sigma0_sq}"]
    for k, reg in enumerate(spec.regimes, start=1):
        lines.append(f"regime{k}.mu_centers = {list(reg.mu_centers)}")
        lines.append(f"regime{k}.gamma_centers = {list(reg.gamma_centers)}")
        lines.append(f"regime{k}.probs = {list(reg.probs)}")
    (out / pio.MANIFEST).write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("wrote %s", out)
    return 0


def cmd_fit(args) -> int:
    panel = pio.load_panel_csv(args.panel, from_prices=args.from_prices)
    values = pio.read_config(args.config) if args.config else {}
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        values[key.strip()] = value.strip()
    for key, attr in (("iterations", "iterations"), ("burn_in", "burn_in"), ("thin", "thin"), ("seed", "seed")):
        if getattr(args, attr) is not None:
            values[key] = str(getattr(args, attr))
    if "iterations" in values and "burn_in" not in values:
        values["burn_in"] = str(int(values["iterations"]) // 2)
    hp, cfg = pio.config_from_mapping(values)
    log.info("fitting N=%d T=%d with %d sweeps", panel.N, panel.T, cfg.iterations)
    draws = run_chain(panel, hp, cfg, progress_every=max(cfg.iterations // 20, 1) if args.verbose else 0)
    extra = {"input": str(args.panel), "from_prices": args.from_prices}
    for k in range(hp.K):
        extra[f"map_clusters.regime{k + 1}"] = analysis.cluster_count_posterior(draws, k).map
    out = _out_dir(args, "chain")
    pio.write_chain_dir(out, draws, hp, cfg, extra)
    log.info("wrote %s", out)
    return 0


def cmd_analyze(args) -> int:
    draws, hp, cfg, manifest = pio.read_chain_dir(args.chain)
    out = _out_dir(args, str(args.chain / "analysis"))
    units = draws.units
    prior = prior_cluster_pmf(draws.N, hp.nu, hp.psi)
    pmf_rows, partitions, report = [], [], []
    for k in range(hp.K):
        post = analysis.cluster_count_posterior(draws, k)
        for h in range(1, draws.N + 1):
            pmf_rows.append([k + 1, h, repr(float(post.pmf[h - 1])), repr(float(prior.pmf[h - 1]))])
        cc = analysis.coclustering_matrix(draws, k, post.map)
        perm = analysis.spectral_reorder(cc)
        pio.write_csv(out / f"coclustering_regime{k + 1}.csv", ["unit", *[units[j] for j in perm]],
                      [[units[i], *(repr(float(cc[i, j])) for j in perm)] for i in perm])
        pio.write_csv(out / f"coclustering_regime{k + 1}_order.csv", ["position", "unit"],
                      [[pos + 1, units[i]] for pos, i in enumerate(perm)])
        part = analysis.point_partition(cc, post.map)
        partitions.append(part)
        report.append(f"map_clusters.regime{k + 1} = {post.map}")
        report.append(f"posterior_entropy_bits.regime{k + 1} = {analysis.entropy(post.pmf):.6f}")
    report.append(f"prior_entropy_bits = {analysis.entropy(prior.pmf):.6f}")
    pio.write_csv(out / "cluster_count_pmf.csv", ["regime", "clusters", "posterior", "prior"], pmf_rows)
    pio.write_csv(out / "partitions.csv", ["unit", *[f"regime{k + 1}" for k in range(hp.K)]],
                  [[u, *(int(p.labels[i]) + 1 for p in partitions)] for i, u in enumerate(units)])
    vi_rows = []
    for k1 in range(hp.K):
        for k2 in range(k1 + 1, hp.K):
            if draws.N >= 2:
                vi, nvi = analysis.variation_of_information(partitions[k1], partitions[k2])
                vi_rows.append([k1 + 1, k2 + 1, repr(vi), repr(nvi)])
                report.append(f"vi_bits.regime{k1 + 1}_regime{k2 + 1} = {vi:.6f}")
                report.append(f"normalized_vi.regime{k1 + 1}_regime{k2 + 1} = {nvi:.6f}")
                tab = analysis.cross_tab(partitions[k1], partitions[k2])
                pio.write_csv(out / f"cross_tab_regime{k1 + 1}_regime{k2 + 1}.csv",
                              ["cluster", *[f"c{j + 1}" for j in range(tab.shape[1])]],
                              [[f"c{i + 1}", *row.tolist()] for i, row in enumerate(tab)])
    pio.write_csv(out / "variation_of_information.csv", ["regime_a", "regime_b", "vi_bits", "normalized"], vi_rows)
    summ = analysis.summarize_parameters(draws, args.level)
    pio.write_csv(out / "parameter_summary.csv", ["parameter", "unit", "regime", "mean", "lower", "upper"],
                  [[n, units[i], k + 1, repr(float(m)), repr(float(lo)), repr(float(hi))]
                   for n, i, k, m, lo, hi in summ.rows()])
    (out / "report.txt").write_text("\n".join(report) + "\n", encoding="utf-8")
    for line in report:
        if line.startswith("map_clusters"):
            stored = manifest.get(line.split(" = ")[0])
            if stored is not None and stored != line.split(" = ")[1]:
                raise RuntimeError(f"recomputed {line} differs from the stored value {stored}")
    print("\n".join(report))
    return 0


def cmd_stats(args) -> int:
    panel = pio.load_panel_csv(args.panel, from_prices=args.from_prices)
    windows = [int(w) for w in args.windows.split(",") if w.strip()]
    out = _out_dir(args, "stats")
    for w in windows:
        if w > panel.T:
            raise ValueError(f"window {w} exceeds the series length {panel.T}")
        moments = [descriptive.rolling_moments(panel.y[i], w) for i in range(panel.N)]
        ends = panel.times[w - 1:]
        rows = []
        for i, (lv, lk) in enumerate(moments):
            for t, label in enumerate(ends):
                rows.append([label, panel.units[i], _fmt(lv[t]), _fmt(lk[t])])
        pio.write_csv(out / f"rolling_w{w}.csv", ["date", "unit", "log_volatility", "log_kurtosis"], rows)
        if args.dates:
            refs = [d.strip() for d in args.dates.split(",")]
            missing = [d for d in refs if d not in ends]
            if missing:
                raise ValueError(f"reference dates not among window ends: {missing}")
            idx = [ends.index(d) for d in refs]
        else:
            idx = sorted({0, (len(ends) - 1) // 2, len(ends) - 1})
        dens_rows = []
        for name, col in (("log_volatility", 0), ("log_kurtosis", 1)):
            allv = np.concatenate([m[col] for m in moments])
            allv = allv[np.isfinite(allv)]
            if allv.size == 0:
                continue
            pad = 3 * max(allv.std(), 1e-3)
            grid = np.linspace(allv.min() - pad, allv.max() + pad, args.grid_points)
            for t in idx:
                vals = np.array([m[col][t] for m in moments])
                if not np.isfinite(vals).any():
                    continue
                bw = descriptive.silverman_bandwidth(vals)
                dens = descriptive.cross_section_density(vals, grid, bw)
                dens_rows += [[name, ends[t], repr(float(x)), repr(float(v))] for x, v in zip(grid, dens)]
        pio.write_csv(out / f"density_w{w}.csv", ["statistic", "date", "x", "density"], dens_rows)
    log.info("wrote %s", out)
    return 0


def _fmt(v) -> str:
    return "NA" if not np.isfinite(v) else repr(float(v))


def cmd_prior_clusters(args) -> int:
    prior = prior_cluster_pmf(args.n, args.nu, args.psi)
    rows = [[h, repr(float(p)), repr(prior.mean)] for h, p in zip(prior.support, prior.pmf)]
    header = ["clusters", "probability", "mean"]
    if args.out:
        pio.write_csv(args.out / "prior_clusters.csv", header, rows)
    print(",".join(header))
    for r in rows:
        print(",".join(str(x) for x in r))
    return 0


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "analyze": cmd_analyze, "stats": cmd_stats,
            "prior-clusters": cmd_prior_clusters}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except Exception as exc:  # one machine-parsable line per failure
        message = " ".join(str(exc).split())
        print(f"error: {args.command}: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
