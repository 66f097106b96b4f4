"""Command-line experiment harness.

Subcommands:
  run <name> [--seed S] [--out PATH] [--config FILE] [--param k=v ...]
  verify <name> [--seed S] [--param k=v ...]
  list

Every run writes deterministic CSV (same spec + seed gives byte-identical
output) plus a manifest line recording name, params, seed, code version and
row count.  Config precedence: command-line params > config file > defaults.
The optional NASA_VECTORS environment variable points dims_report at a local
vector file.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, adversary, concentration, domains, graphs, pivots, reduction, trees, vc
from .rng import child_seed, generator


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def _canonical_params(params: dict) -> str:
    return " ".join(f"{k}={params[k]}" for k in sorted(params))


def write_csv(path: str, name: str, seed: int, params: dict, header: list, rows: list) -> int:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# experiment={name} seed={seed} params={_canonical_params(params)}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v for v in row) + "\n")
    return len(rows)


def _write_manifest(out_path: str, name: str, params: dict, seed: int, files: dict) -> None:
    manifest = os.path.join(os.path.dirname(os.path.abspath(out_path)), "manifest.jsonl")
    entry = {
        "experiment": name,
        "params": {k: params[k] for k in sorted(params)},
        "seed": seed,
        "version": __version__,
        "rows": sum(files.values()),
        "files": files,
    }
    with open(manifest, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry) + "\n")


def _parse_dims(spec: str) -> list:
    return [int(t) for t in str(spec).split(",") if t != ""]


def _domain_for(kind: str, d: int) -> domains.Domain:
    factory = {
        "gaussian": domains.gaussian,
        "hamming": domains.hamming,
        "cube": domains.unit_cube,
        "sphere": domains.sphere,
    }
    if kind not in factory:
        raise ValueError(f"unknown domain kind {kind!r}")
    return factory[kind](d)


# ---------------------------------------------------------------------------
# experiment computations (shared by run and verify)


def compute_nn_curve(params, seed):
    doms = [_domain_for(params["kind"], d) for d in _parse_dims(params["dims"])]
    return concentration.nn_distance_curve(
        doms,
        params["n"],
        params["trials"],
        seed,
        queries_per_trial=params["queries"],
        leave_one_out=bool(params["leave_one_out"]),
    )


def run_fig2(params, seed, out):
    rows = [(r.dim, r.value, r.stderr) for r in compute_nn_curve(params, seed)]
    n = write_csv(out, "fig2_nn_curve", seed, params, ["d", "mean_nn_distance", "stderr"], rows)
    return {out: n}


def verify_fig2(params, seed, report):
    rows = compute_nn_curve(params, seed)
    vals = [r.value for r in rows]
    report.check("nn_curve_nondecreasing", all(b >= a for a, b in zip(vals, vals[1:])), 1,
                 f"values={['%.4f' % v for v in vals]}")
    report.check("nn_at_max_dim", vals[-1], 0.85, "mean normalized NN distance")


def compute_fig3(params, seed):
    dom = domains.normalize(_domain_for(params["kind"], params["d"]),
                            seed=child_seed(seed, "fig3:norm"))
    data = domains.sample(dom, params["n"], child_seed(seed, "fig3:data"))
    pivot = domains.sample(dom, 1, child_seed(seed, "fig3:pivot"))[0]
    dists = domains.distances_to_point(data, pivot)
    queries = domains.sample(dom, params["queries"], child_seed(seed, "fig3:queries"))
    eps_nn = float(concentration.nn_distances(data, queries).mean())
    return dom, data, pivot, dists, eps_nn


def run_fig3(params, seed, out):
    _, _, _, dists, eps_nn = compute_fig3(params, seed)
    counts, edges = np.histogram(dists, bins=params["bins"])
    rows = [(edges[i], edges[i + 1], int(counts[i])) for i in range(len(counts))]
    n1 = write_csv(out, "fig3_pivot_hist", seed, params, ["bin_left", "bin_right", "count"], rows)
    mean = float(dists.mean())
    bars_path = _sibling(out, "_bars")
    n2 = write_csv(
        bars_path, "fig3_pivot_hist", seed, params,
        ["mean_distance", "eps_nn", "bar_left", "bar_right"],
        [(mean, eps_nn, mean - eps_nn, mean + eps_nn)],
    )
    return {out: n1, bars_path: n2}


def verify_fig3(params, seed, report):
    dom, data, pivot, dists, eps_nn = compute_fig3(params, seed)
    witness = concentration.make_distance_witness(dom, pivot, data)
    dev = concentration.lipschitz_deviation(data, witness, 0.3)
    outside = float(np.mean(np.abs(dists - witness.median) > 0.3))
    report.check("deviation_matches_histogram_mass", abs(dev - outside), 1e-12,
                 "two computations of the same mass", op="le")
    # concentration already visible at this dimension: most mass within the bars
    report.check("mass_within_bars", 1.0 - dev, 0.5, "fraction within +-0.3 of median")


def compute_fig4(params, seed):
    grid = np.linspace(0.0, 1.0, params["grid_points"])
    exact = [concentration.exact_hamming_alpha(params["d"], e) for e in grid]
    bound = [concentration.chernoff_alpha_bound(e, params["d"]) for e in grid]
    return grid, exact, bound


def run_fig4(params, seed, out):
    grid, exact, bound = compute_fig4(params, seed)
    rows = list(zip(grid, exact, bound))
    n = write_csv(out, "fig4_hamming_alpha", seed, params, ["eps", "exact", "chernoff"], rows)
    return {out: n}


def verify_fig4(params, seed, report):
    for d in (10, 100, 1000):
        grid, exact, bound = compute_fig4({**params, "d": d}, seed)
        ok = sum(e <= b for e, b in zip(exact, bound))
        report.check(f"exact_le_chernoff_d{d}", ok, len(grid), "grid points satisfying the bound")
    spot = concentration.exact_hamming_alpha(100, 0.1)
    target = 0.017600100108852407  # exact binomial tail beyond 60 of 100 fair coin flips
    report.check("alpha_spot_d100_eps01", abs(spot - target), 1e-6,
                 "absolute error of the exact tail", op="le")


def run_fig5(params, seed, out):
    files = {}
    for d in _parse_dims(params["dims"]):
        pts, outline = reduction.cube_projection_scatter(d, params["n"], child_seed(seed, f"fig5:{d}"))
        rows = [(x, y, "point") for x, y in pts] + [(x, y, "outline") for x, y in outline]
        path = _sibling(out, f"_d{d}")
        files[path] = write_csv(path, "fig5_cube_scatter", seed, {**params, "dims": d},
                                ["x", "y", "tag"], rows)
    return files


def verify_fig5(params, seed, report):
    spreads = {}
    for d in (3, 16, 1000):
        pts, outline = reduction.cube_projection_scatter(d, params["n"], child_seed(seed, f"fig5:{d}"))
        if d <= 16:
            report.check(f"outline_vertices_d{d}", len(outline), 2 ** d, "projected vertex count")
        radius = np.linalg.norm(pts, axis=1)
        spreads[d] = float(radius.std() / np.linalg.norm(outline, axis=1).max())
    report.check("projected_spread_shrinks", spreads[3] - spreads[1000], 0.0,
                 f"spread(d=3)={spreads[3]:.4f} spread(d=1000)={spreads[1000]:.4f}")


def compute_fig8(params, seed):
    dom = domains.hamming(params["d"])
    data = domains.sample(dom, params["n"], child_seed(seed, "fig8:data"))
    rmap = reduction.bit_sample_map(params["d"], params["k"], child_seed(seed, "fig8:map"))
    reduced = reduction.apply_map(rmap, data)
    return reduction.distortion_histogram(data, reduced, "additive", params["bins"])


def run_fig8(params, seed, out):
    summ = compute_fig8(params, seed)
    rows = [(summ.bin_edges[i], summ.bin_edges[i + 1], int(summ.counts[i]))
            for i in range(len(summ.counts))]
    n = write_csv(out, "fig8_bitsample_hist", seed, params, ["bin_left", "bin_right", "count"], rows)
    return {out: n}


def verify_fig8(params, seed, report):
    summ = compute_fig8(params, seed)
    centers = (summ.bin_edges[:-1] + summ.bin_edges[1:]) / 2
    within = float(summ.counts[np.abs(centers) <= 0.2].sum() / summ.counts.sum())
    report.check("additive_distortion_within_02", within, 0.9, "fraction of pairs")
    report.check("distortion_std_low", summ.std, 0.05, "histogram std lower bound")
    report.check("distortion_std_high", summ.std, 0.15, "histogram std upper bound", op="le")


def compute_fig9(params, seed):
    rows = []
    for d in _parse_dims(params["dims"]):
        mean = reduction.sphere_projection_distortion(d, params["pairs"], child_seed(seed, f"fig9:{d}"))
        rows.append((d, mean, mean * math.sqrt(d)))
    return rows


def run_fig9(params, seed, out):
    rows = compute_fig9(params, seed)
    n = write_csv(out, "fig9_sphere_distortion", seed, params,
                  ["d", "mean_ratio", "mean_ratio_sqrt_d"], rows)
    return {out: n}


def verify_fig9(params, seed, report):
    rows = {d: m_sqrt for d, _, m_sqrt in compute_fig9(params, seed)}
    tested = [rows[d] for d in (16, 64, 256)]
    center = (max(tested) + min(tested)) / 2
    spread = max(abs(v - center) / center for v in tested)
    report.check("sqrt_d_scaling_band", spread, 0.25,
                 "relative deviation from a common constant", op="le")
    rel = abs(rows[256] - math.sqrt(2 / math.pi)) / math.sqrt(2 / math.pi)
    report.check("d256_matches_constant", rel, 0.10, "relative error vs sqrt(2/pi)", op="le")


def compute_pivot_curse(params, seed):
    rows = []
    for d in _parse_dims(params["dims"]):
        dom = domains.normalize(domains.gaussian(d), seed=child_seed(seed, f"curse:norm:{d}"))
        data = domains.sample(dom, params["n"], child_seed(seed, f"curse:data:{d}"))
        pvs = pivots.select_pivots(data, params["k"], params["strategy"],
                                   child_seed(seed, f"curse:pivots:{d}"))
        table = pivots.build_pivot_table(data, pvs)
        queries = domains.sample(dom, params["queries"], child_seed(seed, f"curse:q:{d}"))
        eps = float(np.median(concentration.nn_distances(data, queries)))
        fracs = np.empty(len(queries))
        for i in range(len(queries)):
            _, stats = pivots.range_query(table, queries[i], eps)
            fracs[i] = stats.candidates / params["n"]
        rows.append((d, eps, float(fracs.mean()),
                     float(fracs.std(ddof=1) / math.sqrt(len(fracs)))))
    return rows


def run_pivot_curse(params, seed, out):
    rows = compute_pivot_curse(params, seed)
    n = write_csv(out, "pivot_curse", seed, params,
                  ["d", "eps", "mean_candidate_fraction", "stderr"], rows)
    return {out: n}


def verify_pivot_curse(params, seed, report):
    rows = compute_pivot_curse(params, seed)
    fracs = [r[2] for r in rows]
    report.check("candidate_fraction_nondecreasing",
                 all(b >= a for a, b in zip(fracs, fracs[1:])), 1,
                 f"fractions={['%.4f' % f for f in fracs]}")
    report.check("candidate_fraction_high_d", fracs[-1], 0.9, "mean candidate fraction")


def compute_tree_curse(params, seed):
    rows = []
    for d in _parse_dims(params["dims"]):
        dom = domains.normalize(domains.gaussian(d), seed=child_seed(seed, f"tcurse:norm:{d}"))
        data = domains.sample(dom, params["n"], child_seed(seed, f"tcurse:data:{d}"))
        tree = trees.build_metric_tree(data, params["splitter"], params["leaf_capacity"],
                                       seed=child_seed(seed, f"tcurse:tree:{d}"))
        queries = domains.sample(dom, params["queries"], child_seed(seed, f"tcurse:q:{d}"))
        eps = float(np.median(concentration.nn_distances(data, queries)))
        frac = trees.branching_profile(tree, dom, params["queries"], eps,
                                       child_seed(seed, f"tcurse:prof:{d}"))
        gj = trees.splitter_vc_bound(params["splitter"], d)
        rows.append((d, eps, frac, gj["s"], gj["t"], gj["vc_bound"]))
    return rows


def run_tree_curse(params, seed, out):
    rows = compute_tree_curse(params, seed)
    n = write_csv(out, "tree_curse", seed, params,
                  ["d", "eps", "mean_bin_fraction", "gj_s", "gj_t", "gj_vc_bound"], rows)
    return {out: n}


def verify_tree_curse(params, seed, report):
    rows = compute_tree_curse(params, seed)
    fracs = [r[2] for r in rows]
    for d, _, _, s, t, bound in rows:
        print(f"  splitter vc bound at d={d}: 4*{s}*({t}+2) = {bound}")
    report.check("bin_fraction_nondecreasing",
                 all(b >= a for a, b in zip(fracs, fracs[1:])), 1,
                 f"fractions={['%.4f' % f for f in fracs]}")
    report.check("bin_fraction_high_d", fracs[-1], 0.5, "mean scanned-bin fraction")


def compute_graph_degrees(params, seed):
    rows = []
    for d in _parse_dims(params["dims"]):
        dom = domains.gaussian(d)
        data = domains.sample(dom, params["n"], child_seed(seed, f"gdeg:data:{d}"))
        graph = graphs.build_witness_graph(data, params["witnesses"],
                                           child_seed(seed, f"gdeg:w:{d}"))
        st = graphs.degree_stats(graph)
        rows.append((d, st.mean, st.max))
    return rows


def run_graph_degrees(params, seed, out):
    rows = compute_graph_degrees(params, seed)
    n = write_csv(out, "graph_degrees", seed, params, ["d", "mean_degree", "max_degree"], rows)
    return {out: n}


def verify_graph_degrees(params, seed, report):
    rows = compute_graph_degrees(params, seed)
    by_d = {r[0]: r[1] for r in rows}
    lo, hi = min(by_d), max(by_d)
    report.check("degree_grows_with_dimension", by_d[hi], 2.0 * by_d[lo],
                 f"mean degree d={hi} vs 2x mean degree d={lo}")


def compute_adversary_game(params, seed):
    n = params["n"]
    ks = list(dict.fromkeys(k for k in (1, n // 2, n - 2) if 1 <= k <= n - 2))
    rows = []
    for label, algo, k in (
        [(f"early_stop_{k}", adversary.early_stop_scanner(k), k) for k in ks]
        + [("full_scan", adversary.full_scan, n)]
    ):
        fooled = 0
        for s in range(params["runs"]):
            space = domains.random_finite_metric(
                n, child_seed(seed, f"adv:{s}"),
                style="uniform" if s % 2 == 0 else "euclidean",
            )
            result = adversary.run_adversary_game(space, algo)
            fooled += int(result.fooled)
        rows.append((label, k, fooled, params["runs"]))
    return rows


def run_adv_game(params, seed, out):
    rows = compute_adversary_game(params, seed)
    n = write_csv(out, "adversary_game", seed, params, ["algorithm", "k", "fooled", "runs"], rows)
    return {out: n}


def verify_adv_game(params, seed, report):
    rows = compute_adversary_game(params, seed)
    for label, k, fooled, runs in rows:
        if label == "full_scan":
            report.check("full_scan_never_fooled", fooled, 0, "fooled runs", op="le")
        else:
            report.check(f"{label}_always_fooled", fooled, runs, "fooled runs")


def compute_dims_report(params, seed):
    rows = []
    hdom = domains.normalize(domains.hamming(100))
    hdata = domains.sample(hdom, params["n"], child_seed(seed, "dims:hamming"))
    rows.append(("hamming_100", "dim_dist",
                 concentration.dim_dist(hdata, params["pairs"], child_seed(seed, "dims:h"))))
    grid = np.linspace(0.0, 1.0, 10_001)
    prof = concentration.exact_hamming_profile(100, grid)
    rows.append(("hamming_100", "dim_alpha_exact", concentration.dim_alpha(prof)))
    gdom = domains.normalize(domains.gaussian(20))
    gdata = domains.sample(gdom, params["n"], child_seed(seed, "dims:gauss"))
    rows.append(("gaussian_20", "dim_dist",
                 concentration.dim_dist(gdata, params["pairs"], child_seed(seed, "dims:g"))))
    nasa = os.environ.get("NASA_VECTORS")
    if nasa:
        data = domains.load_vectors(nasa, 20)
        rows.append(("nasa", "point_count", float(len(data))))
        rows.append(("nasa", "dim_dist",
                     concentration.dim_dist(data, params["pairs"], child_seed(seed, "dims:nasa"))))
    return rows


def run_dims_report(params, seed, out):
    rows = compute_dims_report(params, seed)
    n = write_csv(out, "dims_report", seed, params, ["dataset", "estimator", "value"], rows)
    return {out: n}


def verify_dims_report(params, seed, report):
    rows = {(r[0], r[1]): r[2] for r in compute_dims_report(params, seed)}
    hd = rows[("hamming_100", "dim_dist")]
    report.check("hamming_dim_dist", abs(hd - 50.0), 2.5, f"deviation of {hd:.3f} from 50", op="le")
    if ("nasa", "dim_dist") in rows:
        nd = rows[("nasa", "dim_dist")]
        report.check("nasa_dim_dist", abs(nd - 5.18), 0.5, f"deviation of {nd:.3f} from 5.18", op="le")
    else:
        print("  nasa_dim_dist: SKIPPED (set NASA_VECTORS to enable)")


def compute_ugc_check(params, seed):
    n = vc.ugc_sample_bound(params["vc_dim"], params["eps"], params["delta"])
    rep = vc.empirical_sup_deviation(vc.IntervalFamily(), n, params["probes"],
                                     params["trials"], seed)
    return n, rep


def run_ugc_check(params, seed, out):
    n, rep = compute_ugc_check(params, seed)
    rows = [(t, n, rep.sup_per_trial[t]) for t in range(len(rep.sup_per_trial))]
    count = write_csv(out, "ugc_check", seed, params, ["trial", "n", "sup_deviation"], rows)
    return {out: count}


def verify_ugc_check(params, seed, report):
    n, rep = compute_ugc_check(params, seed)
    good = int((rep.sup_per_trial <= params["eps"]).sum())
    report.check(f"sup_deviation_within_eps_n{n}", good, int(0.95 * params["trials"]),
                 f"trials with sup <= {params['eps']}")


EXPERIMENTS = {
    "fig2_nn_curve": (
        {"kind": "gaussian", "dims": "3,10,100,1000", "n": 1000, "trials": 100,
         "queries": 16, "leave_one_out": 0},
        run_fig2, verify_fig2,
    ),
    "fig3_pivot_hist": (
        {"kind": "gaussian", "d": 14, "n": 100_000, "bins": 60, "queries": 200},
        run_fig3, verify_fig3,
    ),
    "fig4_hamming_alpha": (
        {"d": 100, "grid_points": 100},
        run_fig4, verify_fig4,
    ),
    "fig5_cube_scatter": (
        {"dims": "3,10,100,1000", "n": 1000},
        run_fig5, verify_fig5,
    ),
    "fig8_bitsample_hist": (
        {"d": 500, "n": 3000, "k": 25, "bins": 60},
        run_fig8, verify_fig8,
    ),
    "fig9_sphere_distortion": (
        {"dims": "2,4,8,16,32,64,128,256", "pairs": 100_000},
        run_fig9, verify_fig9,
    ),
    "pivot_curse": (
        {"dims": "2,8,32,128", "n": 4096, "k": 8, "queries": 100, "strategy": "random_data"},
        run_pivot_curse, verify_pivot_curse,
    ),
    "tree_curse": (
        {"dims": "2,8,32", "n": 4096, "leaf_capacity": 16, "queries": 100, "splitter": "gh"},
        run_tree_curse, verify_tree_curse,
    ),
    "graph_degrees": (
        {"dims": "2,8,64", "n": 100, "witnesses": 100_000},
        run_graph_degrees, verify_graph_degrees,
    ),
    "adversary_game": (
        {"n": 32, "runs": 100},
        run_adv_game, verify_adv_game,
    ),
    "dims_report": (
        {"n": 2048, "pairs": 100_000},
        run_dims_report, verify_dims_report,
    ),
    "ugc_check": (
        {"vc_dim": 2, "eps": 0.1, "delta": 0.05, "probes": 1000, "trials": 100},
        run_ugc_check, verify_ugc_check,
    ),
}


def _sibling(path: str, suffix: str) -> str:
    stem, ext = os.path.splitext(path)
    return f"{stem}{suffix}{ext or '.csv'}"


class VerifyReport:
    """Collects measured-vs-threshold assertions and prints one line each."""

    def __init__(self):
        self.failures = 0

    def check(self, name, measured, threshold, desc, op="ge"):
        if op == "ge":
            ok = measured >= threshold
        elif op == "le":
            ok = measured <= threshold
        else:
            raise ValueError(op)
        status = "PASS" if ok else "FAIL"
        rel = ">=" if op == "ge" else "<="
        print(f"  {name}: measured={_fmt(measured)} {rel} threshold={_fmt(threshold)} "
              f"({desc}): {status}")
        if not ok:
            self.failures += 1


def _coerce(value: str, like):
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def _load_params(name: str, args) -> dict:
    defaults, _, _ = EXPERIMENTS[name]
    params = dict(defaults)
    layered = []
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise SystemExit(f"config line is not key=value: {line!r}")
                layered.append(tuple(line.split("=", 1)))
    layered.extend(tuple(p.split("=", 1)) for p in (args.param or []))
    for key, value in layered:
        key = key.strip()
        if key not in params:
            raise SystemExit(f"unknown parameter {key!r} for experiment {name}")
        params[key] = _coerce(value.strip(), params[key])
    return params


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="metriclab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment and write CSV")
    p_run.add_argument("name")
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--config", default=None)
    p_run.add_argument("--param", action="append", metavar="K=V")
    p_verify = sub.add_parser("verify", help="run the invariant suite for an experiment")
    p_verify.add_argument("name")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--config", default=None)
    p_verify.add_argument("--param", action="append", metavar="K=V")
    sub.add_parser("list", help="list experiments")
    args = parser.parse_args(argv)

    if args.command == "list":
        for name, (defaults, _, _) in sorted(EXPERIMENTS.items()):
            print(f"{name}: {_canonical_params(defaults)}")
        return 0

    if args.name not in EXPERIMENTS:
        print(f"unknown experiment {args.name!r}; try: metriclab list", file=sys.stderr)
        return 2
    try:
        params = _load_params(args.name, args)
    except ValueError as exc:
        print(f"bad parameter: {exc}", file=sys.stderr)
        return 2

    if args.command == "run":
        out = args.out or f"{args.name}.csv"
        _, run_fn, _ = EXPERIMENTS[args.name]
        try:
            files = run_fn(params, args.seed, out)
        except ValueError as exc:
            print(f"usage error: {exc}", file=sys.stderr)
            return 2
        _write_manifest(out, args.name, params, args.seed, files)
        for path, rows in files.items():
            print(f"wrote {path} ({rows} rows)")
        return 0

    _, _, verify_fn = EXPERIMENTS[args.name]
    print(f"verify {args.name}:")
    report = VerifyReport()
    verify_fn(params, args.seed, report)
    if report.failures:
        print(f"{report.failures} assertion(s) failed")
        return 1
    print("all assertions passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
