"""stable-depths: experiment runner for deep Stable networks.

    stable-depths <sample|limit|verify|rates|figure> --config FILE [--seed N] [--out DIR] ...

The config file is flat ``key = value`` text; command-line flags override it.
Outputs are pure functions of (config, flags, seed): no timestamps, no
host-dependent content. Every output directory gets ``run.ini`` holding the
resolved configuration, the tool version and the seed chain.
"""

import argparse
import configparser
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from . import diagnostics as dg
from . import limit_recursion as lr
from . import network as nw
from . import spectral as sp

log = logging.getLogger("stable_depths")

DEFAULTS = {
    "alpha": "1.5",
    "sigma_w": "1.0",
    "sigma_b": "1.0",
    "depth": "2",
    "width": "1024",
    "activation": "tanh",
    "inputs": "1.0 -0.5; 0.3 0.8",
    "inputs_file": "",
    "particles": "100000",
    "sample_mesh": "1024",
    "seed": "0",
    "units": "1",
    "realizations": "16",
    "regimes": "joint",
    "n_grid": "64,256,1024",
    "repeats": "16",
    "pool_size": "1",
    "t_points": "20",
    "cf_gap_max": "0.02",
    "tail_eps": "0.05,0.1",
    "tail_draws": "100000",
    "consistency_points": "50",
    "cw_layer": "2",
    "cw_width": "256",
    "cw_realizations": "4000",
    "rate_layer": "2",
    "rate_n_grid": "64,128,256,512,1024,2048,4096,8192,16384",
    "joint_layers": "2,3,4",
    "joint_width": "1024",
    "slope_target": "-0.5",
    "slope_tol": "0.15",
    "u_points": "",
    "figure_alphas": "2.0,1.5,1.0,0.5",
    "figure_grid": "64",
    "figure_width": "1024",
    "figure_hidden": "2",
    "kurtosis_factor": "10",
}

# spawn-key prefixes so each stage has its own independent stream family
KEY_LIMIT, KEY_REAL, KEY_TAIL, KEY_CONS, KEY_CW, KEY_RATE, KEY_FIG = range(7)


class ConfigError(ValueError):
    pass


def load_config(path, overrides):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_dict({"config": DEFAULTS})
    if path:
        text = Path(path).read_text(encoding="utf-8")
        if not text.lstrip().startswith("["):
            text = "[config]\n" + text
        parser.read_string(text, source=str(path))
    cfg = dict(parser["config"])
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key, value in overrides.items():
        if value is not None:
            cfg[key] = str(value)
    return cfg


def _floats(text):
    return [float(x) for x in text.replace(",", " ").split()]


def _ints(text):
    return [int(x) for x in text.replace(",", " ").split()]


def parse_inputs(cfg):
    if cfg["inputs_file"]:
        rows = np.loadtxt(cfg["inputs_file"], delimiter=None, ndmin=2)
    else:
        rows = np.array([_floats(r) for r in cfg["inputs"].split(";") if r.strip()])
    return sp.InputMatrix(rows)


def network_config(cfg, depth=None, width=None, alpha=None, inputs=None):
    try:
        return nw.NetworkConfig(
            alpha=float(cfg["alpha"]) if alpha is None else alpha,
            sigma_w=float(cfg["sigma_w"]),
            sigma_b=float(cfg["sigma_b"]),
            depth=int(cfg["depth"]) if depth is None else depth,
            width=int(cfg["width"]) if width is None else width,
            activation=nw.activation_by_name(cfg["activation"]),
            inputs=parse_inputs(cfg) if inputs is None else inputs,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _mesh(cfg):
    return int(cfg["sample_mesh"]) if cfg["sample_mesh"] not in ("", "0", "none") else None


def _u_grid(k, cfg):
    return lr.sphere_grid(k, int(cfg["u_points"]) if cfg["u_points"] else None)


def _write_run_info(out, command, cfg, seeds):
    info = configparser.ConfigParser(interpolation=None)
    info.optionxform = str
    info["config"] = {k: cfg[k] for k in sorted(cfg)}
    info["provenance"] = {"tool": "stable-depths", "version": __version__, "command": command,
                          "seed_chain": " | ".join(seeds)}
    with open(out / "run.ini", "w", encoding="utf-8") as fh:
        info.write(fh)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows, meta=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"#{key}={value}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _limits(config, cfg, seed, upto):
    rng = dg.stream(seed, KEY_LIMIT)
    return lr.particle_limits(config, int(cfg["particles"]), rng, upto=upto, sample_mesh=_mesh(cfg))


def cmd_sample(cfg, out):
    config = network_config(cfg)
    seed = int(cfg["seed"])
    units = int(cfg["units"])
    realizations = int(cfg["realizations"])
    regimes = [r.strip() for r in cfg["regimes"].split(",") if r.strip()]
    if units > config.width:
        raise ConfigError(f"units={units} exceeds width={config.width}")
    limits = None
    if any(r in ("sequential", "limit") for r in regimes):
        limits = _limits(config, cfg, seed, config.depth)
    cols = ["realization", "unit"] + [f"f{j + 1}" for j in range(config.k)]
    for regime in regimes:
        if regime not in ("joint", "sequential", "limit"):
            raise ConfigError(f"unknown regime {regime!r}")
        rows = {l: [] for l in range(1, config.depth + 1)}
        for r in range(realizations):
            rng = dg.stream(seed, KEY_REAL, r)
            if regime == "joint":
                for l, batch in nw.simulate_joint(config, rng, units, seed=seed).items():
                    rows[l] += [[r, i] + list(x) for i, x in enumerate(batch.draws)]
            elif regime == "limit":
                for l in rows:
                    draws = sp.sample_stable_vector(limits[l - 1].measure, config.alpha, units, rng).draws
                    rows[l] += [[r, i] + list(x) for i, x in enumerate(draws)]
            else:
                for l in rows:
                    if l == 1:
                        h = nw.first_layer(config, rng, units)
                    else:
                        source = limits[l - 2].measure
                        if _mesh(cfg) is not None and l >= 3:
                            source = sp.coalesce(source, _mesh(cfg)).measure
                        h = nw.simulate_sequential(config, l, nw.limit_sampler(source, config.alpha),
                                                   rng, units, seed=seed).draws
                    rows[l] += [[r, i] + list(x) for i, x in enumerate(h)]
        tag = {"joint": "finite-joint", "sequential": "finite-sequential", "limit": "limit-particle"}[regime]
        for l, data in rows.items():
            meta = {"layer": l, "regime": tag, "width": config.width, "seed": seed,
                    "alpha": config.alpha, "k": config.k, "units": units, "realizations": realizations}
            _write_csv(out / f"samples_{regime}_layer{l}.csv", cols, data, meta)
    return True, [f"seed={seed}", f"realizations=({seed},{KEY_REAL},r)", f"limits=({seed},{KEY_LIMIT})"]


def cmd_limit(cfg, out):
    config = network_config(cfg)
    seed = int(cfg["seed"])
    limits = _limits(config, cfg, seed, config.depth)
    bound = config.mass_bound()
    ok = True
    rows = []
    for L in limits:
        comments = [f"layer={L.layer}", f"particles={L.particle_count}", f"alpha={config.alpha!r}"]
        comments += [f"ancestry={s}" for s in L.seeds]
        sp.write_measure(L.measure, config.alpha, out / f"layer{L.layer}.measure", comments)
        within = bound is None or L.layer == 1 or L.measure.total_mass <= bound * (1 + 1e-12)
        ok &= within
        scales = [sp.marginal_scale(L.measure, config.alpha, r) for r in range(config.k)]
        rows.append([L.layer, L.measure.n_atoms, L.measure.total_mass,
                     math.nan if bound is None else bound, within] + scales)
    header = ["layer", "atoms", "total_mass", "mass_bound", "within_bound"]
    header += [f"marginal_scale_{r + 1}" for r in range(config.k)]
    _write_csv(out / "summary.csv", header, rows)
    return ok, [f"seed={seed}", f"limits=({seed},{KEY_LIMIT})"]


def cmd_verify(cfg, out):
    config = network_config(cfg)
    seed = int(cfg["seed"])
    a, k = config.alpha, config.k
    if a >= 2:
        raise ConfigError("verify needs alpha < 2")
    limits = _limits(config, cfg, seed, config.depth)
    t_grid = dg.default_t_grid(k, int(cfg["t_points"]))
    rows = []

    n_grid = _ints(cfg["n_grid"])
    if config.depth >= 2:
        conv = dg.cf_convergence(config, limits, n_grid, t_grid, int(cfg["repeats"]),
                                 dg.stream(seed, KEY_REAL).integers(2**31),
                                 pool_size=int(cfg["pool_size"]))
        for l in conv.layers:
            prev = math.inf
            for n, med in zip(n_grid, conv.medians(l)):
                rows.append(["cf_gap_decrease", l, n, med, prev, med < prev])
                prev = med
            rows.append(["cf_gap_max", l, n_grid[-1], conv.medians(l)[-1], float(cfg["cf_gap_max"]),
                         conv.medians(l)[-1] <= float(cfg["cf_gap_max"])])

    bound = config.mass_bound()
    for L in limits:
        if bound is not None and L.layer >= 2:
            rows.append(["mass_bound", L.layer, L.particle_count, L.measure.total_mass, bound,
                         L.measure.total_mass <= bound * (1 + 1e-12)])
        source = L.measure
        if _mesh(cfg) is not None:
            source = sp.coalesce(source, _mesh(cfg)).measure
        draws = sp.sample_stable_vector(source, a, int(cfg["tail_draws"]), dg.stream(seed, KEY_TAIL, L.layer))
        for eps in _floats(cfg["tail_eps"]):
            rep = dg.tail_check(draws, a, k, L.measure.total_mass, eps)
            rows.append(["tail", L.layer, len(draws), rep.exceed_frac, eps + rep.slack, rep.holds])
        if k >= 2:
            t = dg.stream(seed, KEY_CONS, L.layer).normal(size=(int(cfg["consistency_points"]), k))
            for r in range(k):
                gap = dg.consistency_check(L.measure, a, r, t)
                rows.append([f"consistency_r{r + 1}", L.layer, L.measure.n_pairs, gap, 1e-12, gap < 1e-12])

    cw_layer = int(cfg["cw_layer"])
    if 2 <= cw_layer <= config.depth:
        cw_cfg = config.with_width(int(cfg["cw_width"]))
        rep = dg.cramer_wold_check(cw_cfg, cw_layer, [0, 1], [0.5, 0.5], t_grid,
                                   dg.stream(seed, KEY_CW).integers(2**31), limits,
                                   int(cfg["cw_realizations"]))
        rows.append(["cramer_wold", cw_layer, cw_cfg.width, rep.max_abs_gap, rep.tolerance, rep.passed])

    _write_csv(out / "verify.csv", ["check", "layer", "n", "statistic", "threshold", "pass"], rows)
    return all(r[-1] for r in rows), [f"seed={seed}", f"limits=({seed},{KEY_LIMIT})",
                                       f"realizations=({seed},{KEY_REAL})", f"tail=({seed},{KEY_TAIL},l)",
                                       f"consistency=({seed},{KEY_CONS},l)", f"cramer_wold=({seed},{KEY_CW})"]


def cmd_rates(cfg, out):
    seed = int(cfg["seed"])
    rate_layer = int(cfg["rate_layer"])
    joint_ls = _ints(cfg["joint_layers"])
    depth = max([rate_layer] + joint_ls)
    config = network_config(cfg, depth=max(depth, int(cfg["depth"])))
    try:
        dg.check_rate_preconditions(config)
    except ValueError as exc:
        raise ConfigError(f"rate experiment refused: {exc}") from exc
    limits = _limits(config, cfg, seed, depth)
    u_grid = _u_grid(config.k, cfg)
    repeats = int(cfg["repeats"])
    base = dg.stream(seed, KEY_RATE).integers(2**31, size=3)

    seq = dg.rate_experiment(config, "sequential", rate_layer, _ints(cfg["rate_n_grid"]), u_grid,
                             repeats, base[0], limits, sample_mesh=_mesh(cfg))
    n_joint = int(cfg["joint_width"])
    joint = dg.layer_gaps_at_width(config, "joint", joint_ls, n_joint, u_grid, repeats, base[1], limits,
                                   sample_mesh=_mesh(cfg))
    seq_at = dg.layer_gaps_at_width(config, "sequential", joint_ls, n_joint, u_grid, repeats, base[2],
                                    limits, sample_mesh=_mesh(cfg))
    deltas = dg.joint_delta_bounds(max(joint_ls), config.k, config.alpha)

    rows = [["sequential", seq.layer, n, g, repeats, seq.slope, seq.slope_halfwidth, seq.theory_delta]
            for n, g in zip(seq.n_grid, seq.median_gaps)]
    for l in joint_ls:
        rows.append(["joint", l, n_joint, float(np.median(joint[l])), repeats, math.nan, math.nan, deltas[l]])
        rows.append(["sequential", l, n_joint, float(np.median(seq_at[l])), repeats, math.nan, math.nan, 0.5])
    _write_csv(out / "rates.csv", ["regime", "layer", "n", "median_gap", "repeats", "slope",
                                   "slope_halfwidth", "theory_delta"], rows,
               {"gap": dg.RATE_PROXY_NOTE, "u_points": seq.grid_points,
                "refinement_delta": repr(seq.refinement_delta)})

    target, tol = float(cfg["slope_target"]), float(cfg["slope_tol"])
    summary = []
    if seq.degenerate:
        summary.append(["sequential_slope", seq.layer, math.nan, target, "degenerate", True])
    else:
        summary.append(["sequential_slope", seq.layer, seq.slope, target, tol, abs(seq.slope - target) <= tol])
    jm = [float(np.median(joint[l])) for l in joint_ls]
    if config.sigma_w == 0:
        summary.append(["joint_trend", ",".join(map(str, joint_ls)), math.nan, math.nan, "degenerate", True])
    else:
        nondecr = all(b >= a for a, b in zip(jm, jm[1:]))
        summary.append(["joint_trend", ",".join(map(str, joint_ls)), jm[-1], jm[0], "non-decreasing", nondecr])
        for l in joint_ls:
            if l >= 3:
                js, ss = float(np.median(joint[l])), float(np.median(seq_at[l]))
                summary.append([f"joint_vs_sequential_l{l}", l, js, ss, "joint > sequential", js > ss])
    _write_csv(out / "summary.csv", ["check", "layer", "statistic", "reference", "criterion", "pass"], summary)
    return all(r[-1] for r in summary), [f"seed={seed}", f"limits=({seed},{KEY_LIMIT})",
                                          f"rates=({seed},{KEY_RATE})"]


def figure_grid(alpha, cfg, rng):
    """One network realization evaluated on a G x G grid over [0, 1]^2."""
    g = int(cfg["figure_grid"])
    axis = np.linspace(0.0, 1.0, g)
    xx, yy = np.meshgrid(axis, axis, indexing="ij")
    inputs = sp.InputMatrix(np.vstack([xx.ravel(), yy.ravel()]))
    hidden = int(cfg["figure_hidden"])
    config = network_config(cfg, depth=hidden + 1, width=int(cfg["figure_width"]), alpha=alpha, inputs=inputs)
    h = None
    for h in nw.joint_layers(config, rng, last_rows=1):
        pass
    return h[0].reshape(g, g)


def cmd_figure(cfg, out):
    seed = int(cfg["seed"])
    alphas = _floats(cfg["figure_alphas"])
    kurt = {}
    rows = []
    for i, a in enumerate(alphas):
        grid = figure_grid(a, cfg, dg.stream(seed, KEY_FIG, i))
        np.savetxt(out / f"figure_alpha{a:.2f}.csv", grid, delimiter=",", fmt="%.17g")
        kurt[a] = float(stats.kurtosis(grid.ravel(), fisher=True))
        step = max(np.abs(np.diff(grid, axis=0)).max(), np.abs(np.diff(grid, axis=1)).max())
        rows.append([a, grid.min(), grid.max(), kurt[a], step / (np.ptp(grid) or 1.0)])
    _write_csv(out / "figure_summary.csv",
               ["alpha", "min", "max", "excess_kurtosis", "max_adjacent_step_over_range"], rows)
    ok = True
    if 0.5 in kurt and 2.0 in kurt:
        ok = heavy_tail_contrast(kurt[0.5], kurt[2.0], float(cfg["kurtosis_factor"]))
    return ok, [f"seed={seed}"] + [f"alpha={a}: ({seed},{KEY_FIG},{i})" for i, a in enumerate(alphas)]


def heavy_tail_contrast(kurt_heavy, kurt_gauss, factor):
    """Heavy-tailed grid's excess kurtosis at least ``factor`` times the Gaussian one.

    Smooth Gaussian surfaces usually have negative excess kurtosis, so the
    heavy-tailed value is also required to be positive: leptokurtic cells.
    """
    return kurt_heavy >= factor * kurt_gauss and kurt_heavy > 0


COMMANDS = {"sample": cmd_sample, "limit": cmd_limit, "verify": cmd_verify,
            "rates": cmd_rates, "figure": cmd_figure}


def build_parser():
    p = argparse.ArgumentParser(prog="stable-depths", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, dest="width", help="network width")
    p.add_argument("--depth", type=int)
    p.add_argument("--m-particles", type=int, dest="particles")
    p.add_argument("--sigma-w", type=float, dest="sigma_w")
    p.add_argument("--sigma-b", type=float, dest="sigma_b")
    p.add_argument("--activation")
    p.add_argument("--repeats", type=int)
    p.add_argument("--n-grid", dest="n_grid")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {k: getattr(args, k) for k in ("seed", "alpha", "width", "depth", "particles", "sigma_w",
                                               "sigma_b", "activation", "repeats", "n_grid")}
    try:
        cfg = load_config(args.config, overrides)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        ok, seeds = COMMANDS[args.command](cfg, out)
    except (ConfigError, configparser.Error, OSError) as exc:
        print(f"stable-depths {args.command}: {exc}", file=sys.stderr)
        return 2
    _write_run_info(out, args.command, cfg, seeds)
    if not ok:
        print(f"stable-depths {args.command}: assertions failed, see {out}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
