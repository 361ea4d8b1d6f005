"""Command-line entry point: ``radialflow <subcommand> ...``.

Exit codes: 0 success, 2 invalid input, 3 pipeline failure.  Output
directories default to ``$RADIALFLOW_OUT_DIR`` or the working directory.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import PipelineError, UnknownEdgeSpec, ValidationError
from .estimator import estimate_injections
from .experiments import (TEMPLATES, ExperimentConfig, default_model, eval_topology, gen_network,
                          run_sweep, write_sweep)
from .learner import DEFAULT_GROUP_THRESHOLD, LearnedTopology, learn_forest, learn_structure, merge_topologies
from .network import CandidateEdge, NetworkGraph, load_network, save_network, validate_radial
from .simulator import InjectionModel, NoiseSpec, read_measurements, simulate, write_measurements

log = logging.getLogger("radialflow")

EXIT_OK, EXIT_INVALID, EXIT_PIPELINE = 0, 2, 3
OUT_ENV = "RADIALFLOW_OUT_DIR"


def _out_dir(arg) -> Path:
    path = Path(arg or os.environ.get(OUT_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _out_file(arg, default_name) -> Path:
    if arg:
        path = Path(arg)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path
    return _out_dir(None) / default_name


def _write_json(path, data):
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
    log.info("wrote %s", path)


def _float_list(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text):
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_gen_network(args):
    graph = gen_network(args.template, args.nodes, args.fictitious, args.family, args.seed,
                        args.reference, args.compressor_prob)
    path = _out_file(args.out, "network.json")
    save_network(graph, path)
    print(path)


def cmd_simulate(args):
    graph = load_network(args.network)
    if args.injections:
        model = InjectionModel.from_dict(json.loads(Path(args.injections).read_text()))
    else:
        model = default_model(graph, args.seed)
    noise = NoiseSpec(args.noise_frac, args.noise_seed if args.noise_seed is not None else args.seed)
    sim = simulate(graph, model, args.samples, args.seed, args.ref_potential,
                   noise if args.noise_frac > 0 else None, forest=args.forest)
    out = _out_dir(args.out)
    path = write_measurements(sim.measurements, out / "measurements.csv")
    _write_json(out / "injection_model.json", model.to_dict())
    print(path)


def cmd_learn(args):
    ms = read_measurements(args.measurements)
    candidates = load_network(args.candidates).candidate_pairs() if args.candidates else None
    if args.group_threshold is not None:
        parts = learn_forest(ms, candidates, args.group_threshold)
        topo = merge_topologies(parts)
        doc = topo.to_dict()
        doc["groups"] = [list(p.nodes) for p in parts]
    else:
        topo = learn_structure(ms, candidates, compare_complete=args.compare_complete)
        doc = topo.to_dict()
    path = _out_file(args.out, "tree.json")
    _write_json(path, doc)
    print(path)


def _tree_from_learned(learned: LearnedTopology, network: NetworkGraph):
    edges = []
    for u, v in learned.edges:
        try:
            spec = network.spec_for(u, v)
        except KeyError:
            raise UnknownEdgeSpec(f"learned edge ({u},{v}) has no flow function in the network file") from None
        edges.append(CandidateEdge(u, v, spec, True))
    return validate_radial(NetworkGraph(network.node_count, network.reference, tuple(edges)))


def cmd_estimate(args):
    ms = read_measurements(args.measurements)
    network = load_network(args.network)
    learned = LearnedTopology.from_dict(json.loads(Path(args.tree).read_text()))
    tree = _tree_from_learned(learned, network)
    est = estimate_injections(tree, network, ms)
    path = _out_file(args.out, "injections.json")
    _write_json(path, est.to_dict())
    print(path)


def cmd_eval(args):
    learned = LearnedTopology.from_dict(json.loads(Path(args.learned).read_text()))
    truth = load_network(args.truth)
    err = eval_topology(learned, truth)
    doc = {"fractional_error": err, "true_edges": len(truth.operational_pairs()),
           "wrong_edges": sorted(map(list, learned.edge_set() - truth.operational_pairs()))}
    if args.out:
        _write_json(_out_file(args.out, "eval.json"), doc)
    print(json.dumps(doc))


def cmd_verify(args):
    from .verify import run_verification
    report = run_verification(args.networks, args.seed, args.mc_samples, args.kruskal_instances)
    path = _out_file(args.out, "verify.json")
    _write_json(path, report)
    print(json.dumps({k: v["verdict"] if isinstance(v, dict) else v for k, v in report.items()}))
    if report["verdict"] == "fail":
        raise PipelineError("verification failed; see " + str(path))


def cmd_sweep(args):
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    for key in ("network", "template", "nodes", "fictitious", "family", "network_seed",
                "sample_counts", "noise_fractions", "trials", "seed", "workers"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    out = _out_dir(args.out or data.pop("out_dir", None))
    data["out_dir"] = str(out)
    config = ExperimentConfig.from_dict(data)
    report = run_sweep(config)
    path = write_sweep(report, out)
    _write_json(out / "sweep_config.json", config.to_dict())
    print(path)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="radialflow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-network", help="generate a synthetic candidate network")
    g.add_argument("--template", choices=TEMPLATES, default="random-radial")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--fictitious", type=int, default=0)
    g.add_argument("--family", default="linear",
                   help="linear | quadratic | power-law | mixed (aliases: gas, water, lindistflow)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--reference", type=int, default=0)
    g.add_argument("--compressor-prob", type=float, default=0.0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_network)

    s = sub.add_parser("simulate", help="simulate nodal potential measurements")
    s.add_argument("--network", required=True)
    s.add_argument("--samples", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-frac", type=float, default=0.0)
    s.add_argument("--noise-seed", type=int)
    s.add_argument("--ref-potential", type=float, default=1.0)
    s.add_argument("--injections", help="injection model JSON (mean, var, references)")
    s.add_argument("--forest", action="store_true", help="simulate every operational component")
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    ln = sub.add_parser("learn", help="learn the operational tree from measurements")
    ln.add_argument("--measurements", required=True)
    ln.add_argument("--candidates", help="network JSON whose edges are the permissible set")
    ln.add_argument("--group-threshold", type=float, nargs="?", const=DEFAULT_GROUP_THRESHOLD,
                    help=f"split into correlated groups first (default threshold {DEFAULT_GROUP_THRESHOLD})")
    ln.add_argument("--compare-complete", action="store_true",
                    help="also learn on the complete graph and report whether both agree")
    ln.add_argument("--out")
    ln.set_defaults(func=cmd_learn)

    e = sub.add_parser("estimate", help="estimate injection statistics on a learned tree")
    e.add_argument("--measurements", required=True)
    e.add_argument("--tree", required=True)
    e.add_argument("--network", required=True)
    e.add_argument("--out")
    e.set_defaults(func=cmd_estimate)

    ev = sub.add_parser("eval", help="fractional error of a learned tree")
    ev.add_argument("--learned", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out")
    ev.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run the theory checks")
    v.add_argument("--networks", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--mc-samples", type=int, default=2 * 10 ** 5)
    v.add_argument("--kruskal-instances", type=int, default=50)
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify)

    sw = sub.add_parser("sweep", help="error-versus-samples experiment")
    sw.add_argument("--config", help="JSON config; flags override its keys")
    sw.add_argument("--network", help="network JSON (otherwise generated from the template)")
    sw.add_argument("--template", choices=TEMPLATES)
    sw.add_argument("--nodes", type=int)
    sw.add_argument("--fictitious", type=int)
    sw.add_argument("--family")
    sw.add_argument("--network-seed", type=int)
    sw.add_argument("--samples", dest="sample_counts", type=_int_list, help="comma-separated, e.g. 25,50,100")
    sw.add_argument("--noise", dest="noise_fractions", type=_float_list, help="comma-separated, e.g. 0,0.05")
    sw.add_argument("--trials", type=int)
    sw.add_argument("--seed", type=int)
    sw.add_argument("--workers", type=int)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (PipelineError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
