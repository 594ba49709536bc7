"""Command-line front end.

Commands: ``simulate``, ``auxiliary``, ``tagged``, ``sample``,
``verify <identity>``, ``figure`` and ``replay``.  Every output file starts
with ``#`` header lines giving the command, the config hash, the seed and the
canonical config, from which ``replay`` regenerates the file byte for byte.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import sys
from functools import partial

import numpy as np

from . import config as cfgmod
from .analysis import checks, sampling
from .analysis.stats import ks_two_sample
from .auxiliary import simulate_auxiliary, simulate_tagged_cell
from .auxiliary import ThinningBoundError
from .config import ConfigError, RunConfig
from .models.base import ModelConfigError, QuadratureError
from .parallel import default_threads, map_replicates
from .paths import fmt, write_paths_csv
from .population import CapExceededError, lineage_of, simulate_population, write_tree_csv
from .streams import Stream

IDENTITIES = ("many-to-one", "whole-tree", "forks", "feynman-kac", "sampling")
SUMMARY_COLUMNS = ("identity", "lhs_mean", "lhs_se", "rhs_mean", "rhs_se", "z", "pass")
SAMPLING_COLUMNS = ("n", "ks", "p_value", "boot_lo", "boot_hi")
FIGURE_COLUMNS = ("series", "divisions", "frequency")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


def _opt(sec: dict, key, default):
    return sec[key] if key in sec else default


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


# ---------------------------------------------------------------------------
# replicate tasks (module level so worker processes can unpickle them)
def _tree_task(model, init, horizon, caps, root, i):
    return simulate_population(model, init, horizon, caps, root.spawn(i))


def _aux_task(model, x0, t, root, i):
    return simulate_auxiliary(model, x0, t, root.spawn(i))


def _tagged_task(model, x0, t, root, i):
    return simulate_tagged_cell(model, x0, t, root.spawn(i))


def _sample_task(model, atoms, n_init, t, caps, root, i):
    st = root.spawn(i)
    tree = sampling.surviving_tree(model, atoms, n_init, t, st.spawn(0), caps)
    return sampling.sample_uniform_lineage(tree, t, st.spawn(1))


def _x0(cfg: RunConfig):
    aux = cfg.section("auxiliary")
    if "x0" in aux:
        return aux["x0"]
    init = cfg.section("population").get("init", [1])
    return init[0]


def _horizon(cfg: RunConfig, section="population", key="horizon"):
    sec = cfg.section(section)
    if key not in sec:
        raise ConfigError(f"missing {section}.{key}")
    return float(sec[key])


def _aux_t(cfg: RunConfig):
    aux = cfg.section("auxiliary")
    return float(aux["t"]) if "t" in aux else _horizon(cfg)


# ---------------------------------------------------------------------------
# commands
def cmd_simulate(cfg, out, threads):
    model = cfg.model()
    init = cfg.section("population").get("init", [1])
    horizon = _horizon(cfg)
    root = Stream.root(cfg.seed)
    trees = map_replicates(partial(_tree_task, model, init, horizon, cfg.caps(), root),
                           cfg.replicates, threads)
    with _output(out) as fh:
        write_tree_csv(fh, enumerate(trees), cfgmod.header_lines(cfg))
    return EXIT_OK


def cmd_paths(cfg, out, threads, tagged=False):
    model = cfg.model()
    x0, t = model.check_trait(_x0(cfg)), _aux_t(cfg)
    root = Stream.root(cfg.seed)
    task = _tagged_task if tagged else _aux_task
    paths = map_replicates(partial(task, model, x0, t, root), cfg.replicates, threads)
    with _output(out) as fh:
        write_paths_csv(fh, enumerate(paths), cfgmod.header_lines(cfg, [f"horizon {fmt(t)}"]))
    return EXIT_OK


def cmd_sample(cfg, out, threads):
    model = cfg.model()
    init = cfg.section("population").get("init", [1])
    t = _horizon(cfg)
    atoms = [(x, 1.0) for x in init]
    # founders are drawn i.i.d. from the empirical law of init
    root = Stream.root(cfg.seed)
    paths = map_replicates(partial(_sample_task, model, atoms, len(init), t, cfg.caps(), root),
                           cfg.replicates, threads)
    with _output(out) as fh:
        write_paths_csv(fh, enumerate(paths), cfgmod.header_lines(cfg, [f"horizon {fmt(t)}"]))
    return EXIT_OK


def _atoms(sec, default_x):
    raw = sec.get("atoms", [[default_x, 1.0]])
    try:
        return [(a[0], float(a[1])) for a in raw]
    except (TypeError, IndexError, ValueError):
        raise ConfigError("analysis.atoms must be a list of [trait, weight] pairs") from None


def run_check(cfg: RunConfig, threads: int = 1):
    """Run the configured identity check; returns a report or a sampling table."""
    model = cfg.model()
    an = cfg.section("analysis")
    x0 = model.check_trait(_opt(an, "x0", _x0(cfg)))
    n = cfg.replicates
    root = Stream.root(cfg.seed)
    policy = _opt(an, "policy", None)
    threshold = float(_opt(an, "threshold", 3.0))
    caps = cfg.caps()
    ident = cfg.identity
    if ident == "many-to-one":
        return checks.check_many_to_one(
            model, x0, float(_opt(an, "t", _aux_t(cfg))), _opt(an, "functional", "one"),
            int(_opt(an, "n_pop", n)), int(_opt(an, "n_aux", n)), root, caps,
            policy or "z", threshold, threads)
    if ident == "whole-tree":
        return checks.check_whole_tree(
            model, x0, float(_opt(an, "t", _aux_t(cfg))), root, n, _opt(an, "weight", "one"),
            _opt(an, "n_aux", None), int(_opt(an, "nodes", 64)), caps=caps,
            policy=policy or "z", threshold=threshold, threads=threads)
    if ident == "forks":
        t = float(_opt(an, "t", _aux_t(cfg)))
        return checks.check_forks(
            model, x0, float(_opt(an, "s", t)), t, _opt(an, "f", "one"), _opt(an, "g", "one"),
            root, n, _opt(an, "n_aux", None), int(_opt(an, "nodes", 64)), caps=caps,
            policy=policy or "z", threshold=threshold, threads=threads)
    if ident == "feynman-kac":
        t = float(_opt(an, "t", _aux_t(cfg)))
        s = float(_opt(an, "s", t))
        return checks.check_feynman_kac(
            model, x0, float(_opt(an, "r", 0.0)), s, t, _opt(an, "functional", "terminal"),
            root, n, policy or "ci_overlap", threshold, threads)
    if ident == "sampling":
        t = float(_opt(an, "t", _aux_t(cfg)))
        return sampling.check_sampling_convergence(
            model, _atoms(an, x0), _opt(an, "n_grid", [1, 10, 100]), t, root, n, caps,
            threads, int(_opt(an, "n_boot", 200)))
    raise ConfigError(f"unknown identity {ident!r}; expected one of {list(IDENTITIES)}")


def cmd_verify(cfg, out, threads):
    result = run_check(cfg, threads)
    with _output(out) as fh:
        for line in cfgmod.header_lines(cfg):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        if cfg.identity == "sampling":
            w.writerow(SAMPLING_COLUMNS)
            for n, d, p, (lo, hi) in result:
                w.writerow((n, fmt(d), fmt(p), fmt(lo), fmt(hi)))
            print("\n".join(f"n={n}: KS={d:.4f} p={p:.3g}" for n, d, p, _ in result),
                  file=sys.stderr)
            return EXIT_OK
        rep = result
        w.writerow(SUMMARY_COLUMNS)
        w.writerow((rep.identity, fmt(rep.lhs.mean), fmt(rep.lhs.std_error), fmt(rep.rhs.mean),
                    fmt(rep.rhs.std_error), fmt(rep.z), "true" if rep.passed else "false"))
        fh.write("# report " + json.dumps(rep.to_dict(), sort_keys=True, default=str) + "\n")
    print(rep, file=sys.stderr)
    return EXIT_OK if rep.passed else EXIT_FAIL


def figure_series(cfg: RunConfig, threads: int = 1):
    """Division counts of the sampled, spine and tagged lineages, plus KS results."""
    model = cfg.model()
    x0 = model.check_trait(_x0(cfg))
    t = _aux_t(cfg)
    n = cfg.replicates
    root = Stream.root(cfg.seed)
    atoms = [(x0, 1.0)]
    uniform = sampling.sampled_division_counts(model, atoms, 1, t, n, root.spawn(1),
                                               cfg.caps(), threads)
    spine = sampling.spine_division_counts(model, atoms, t, n, root.spawn(2), threads)
    tagged = np.array([p.division_count for p in map_replicates(
        partial(_tagged_task, model, x0, t, root.spawn(3)), n, threads)], dtype=int)
    series = {"uniform": uniform, "auxiliary": spine, "tagged": tagged}
    ks = {("uniform", "auxiliary"): ks_two_sample(uniform, spine),
          ("tagged", "auxiliary"): ks_two_sample(tagged, spine)}
    return series, ks


def cmd_figure(cfg, out, threads):
    series, ks = figure_series(cfg, threads)
    with _output(out) as fh:
        t = _aux_t(cfg)
        for line in cfgmod.header_lines(cfg, [f"horizon {fmt(t)}"]):
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIGURE_COLUMNS)
        for name, counts in series.items():
            support, freq = np.unique(counts, return_counts=True)
            for k, c in zip(support.tolist(), freq.tolist()):
                w.writerow((name, k, fmt(c / counts.size)))
        for name, counts in series.items():
            fh.write(f"# mean {name} {fmt(float(counts.mean()))}\n")
        for (a, b), (d, p) in ks.items():
            fh.write(f"# ks {a} {b} D={fmt(d)} p={fmt(p)}\n")
    return EXIT_OK


def _figure_defaults(cfg: RunConfig):
    if not cfg.sections["models"]:
        cfg.sections["models"] = dict(cfgmod.FIGURE_DEFAULTS)
    cfg.sections["auxiliary"].setdefault("x0", 1)
    if "horizon" not in cfg.sections["population"]:
        cfg.sections["auxiliary"].setdefault("t", 30)


COMMANDS = {
    "simulate": cmd_simulate,
    "auxiliary": cmd_paths,
    "tagged": partial(cmd_paths, tagged=True),
    "sample": cmd_sample,
    "verify": cmd_verify,
    "figure": cmd_figure,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spinesim", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="64-bit unsigned seed")
    common.add_argument("--replicates", type=int)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: all cores)")
    common.add_argument("--cap-individuals", type=int, dest="cap_individuals")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("simulate", "auxiliary", "tagged", "sample", "figure"):
        sub.add_parser(name, parents=[common])
    v = sub.add_parser("verify", parents=[common])
    v.add_argument("identity", choices=IDENTITIES)
    r = sub.add_parser("replay", parents=[common],
                       help="re-run the configuration recorded in an output file's header")
    r.add_argument("source")
    return ap


def make_config(args) -> RunConfig:
    if args.command == "replay":
        with open(args.source, encoding="utf-8") as fh:
            cfg = cfgmod.config_from_header(fh)
        return cfg
    doc = cfgmod.load_config(args.config) if args.config else {}
    sections = {k: dict(v) for k, v in doc.items()}
    cli = sections.setdefault("cli", {})
    if args.cap_individuals is not None:
        cli["cap_individuals"] = args.cap_individuals
    seed = args.seed if args.seed is not None else cli.get("seed", 0)
    reps = args.replicates if args.replicates is not None else cli.get("replicates", None)
    if reps is None:
        reps = 5000 if args.command == "figure" else 100
    cfg = RunConfig(args.command, sections, seed, reps, getattr(args, "identity", None))
    if cfg.command == "figure":
        _figure_defaults(cfg)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
        threads = args.threads
        if threads is None:
            threads = cfg.section("cli").get("threads", default_threads())
        return COMMANDS[cfg.command](cfg, args.out, int(threads))
    except (ConfigError, ModelConfigError, OSError) as exc:
        print(f"spinesim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceededError as exc:
        print(f"spinesim: cap exceeded: {exc} (time reached {exc.time_reached:.6g})",
              file=sys.stderr)
        return EXIT_CAP
    except (QuadratureError, ThinningBoundError, checks.NestedBudgetError,
            sampling.ExtinctionError, OverflowError) as exc:
        print(f"spinesim: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
