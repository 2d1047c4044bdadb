"""Experiment driver: compute bounds, run protocols, compare.

Every command echoes its seed and emits deterministic JSON (or CSV), so
re-running a configuration byte-reproduces the output.  Exit codes:
0 ok, 2 infeasible instance, 3 input error, 4 internal contract violation.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from fractions import Fraction

from .circuits import build_ed_circuit, circuit_from_json, circuit_to_json
from .distgraph import (
    BalanceError, and_disj_instance, bfs_protocol, graph_oracles,
    instance_from_json, or_disj_instance, random_pair_strings,
    edge_to_node_rebalance,
)
from .expanders import (
    ExpansionNotReached, MixingError, cut_matching_embed,
)
from .graphs import GraphError, UnreachableError, load_graph
from .mcf import PartitionInfeasibleError, tau_mcf
from .protocols import (
    CompileError, compile_circuit, disjointness_function, disj_oracle,
    ed_hash_reduce, ed_oracle, steiner_aggregate_protocol,
)
from .schedules import AuditError
from .sim import ContractViolation, MaxRoundsExceeded, replay_matches, run_protocol
from .steiner import (
    HypothesisError, NoGoodTreeError, disjointness_bound, pack_steiner_trees,
)
from .timed import RoutableError, SearchLimitError, tau_route

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_INPUT = 3
EXIT_CONTRACT = 4

INFEASIBLE_ERRORS = (UnreachableError, PartitionInfeasibleError, MixingError,
                     BalanceError, HypothesisError, NoGoodTreeError,
                     RoutableError, SearchLimitError, ExpansionNotReached,
                     MaxRoundsExceeded)
INPUT_ERRORS = (GraphError, FileNotFoundError, json.JSONDecodeError,
                KeyError, ValueError)
CONTRACT_ERRORS = (AuditError, ContractViolation, CompileError, AssertionError)


def _jsonable(obj):
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, bool) or obj is None:
        return obj
    if isinstance(obj, (int, float, str)):
        return obj
    return str(obj)


def _emit(payload, args):
    payload = _jsonable(payload)
    if args.format == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        lines = []
        if set(payload) >= {"instance", "k", "n", "bound_kind", "bound",
                            "rounds", "ratio", "seed"}:
            cols = ["instance", "k", "n", "bound_kind", "bound", "rounds",
                    "ratio", "seed"]
            lines.append(",".join(cols))
            lines.append(",".join(str(payload[c]) for c in cols))
        else:
            for key in sorted(payload):
                lines.append(f"{key},{payload[key]}")
        text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_inputs(path):
    with open(path) as fh:
        raw = json.load(fh)
    return {int(t): tuple(bits) for t, bits in raw.items()}


def _random_inputs(terminals, n, seed):
    rng = random.Random(f"{seed}:inputs")
    return {t: tuple(rng.randint(0, 1) for _ in range(n))
            for t in sorted(terminals)}


# ---------------------------------------------------------------------------
# command handlers

def cmd_tau_route(args):
    g = load_graph(args.graph)
    a = args.a if args.a is not None else g.terminals[0]
    b = args.b if args.b is not None else g.terminals[-1]
    value = tau_route(g, a, b, args.nprime)
    return {"command": "tau-route", "a": a, "b": b, "nprime": args.nprime,
            "tau_route": value, "seed": args.seed}


def cmd_tau_mcf(args):
    g = load_graph(args.graph)
    value = tau_mcf(g, g.terminals, args.nprime)
    return {"command": "tau-mcf", "terminals": list(g.terminals),
            "nprime": args.nprime, "tau_mcf": value, "seed": args.seed}


def cmd_st_pack(args):
    g = load_graph(args.graph)
    packing = pack_steiner_trees(g, g.terminals, args.delta,
                                 mode=args.mode, seed=args.seed)
    trees = [{"edges": sorted(t.edge_ids), "weight": w, "diameter": t.diameter}
             for t, w in packing.trees]
    return {"command": "st-pack", "delta": args.delta, "mode": args.mode,
            "value": packing.value, "bound_used": packing.bound_used,
            "trees": trees, "seed": args.seed}


def cmd_disj_bound(args):
    g = load_graph(args.graph)
    res = disjointness_bound(g, g.terminals, args.n)
    return {"command": "disj-bound", "n": args.n, "bound": res.value,
            "best_delta": res.delta,
            "packing_values": {str(d): v for d, v in res.packing_values.items()},
            "seed": args.seed}


def _build_named_protocol(name, g, n, seed):
    terms = g.terminals
    if name == "disj-aggregate":
        best = disjointness_bound(g, terms, n)
        packing = pack_steiner_trees(g, terms, best.delta)
        func = disjointness_function(len(terms), n)
        proto = steiner_aggregate_protocol(g, terms, packing, func)
        return proto, ("DISJ", func)
    if name == "ed-compiled":
        red_probe = ed_hash_reduce([0] * len(terms), seed=seed,
                                   n_bits=n, trials=1)
        m = red_probe.bits_per_hash
        circuit, pos = build_ed_circuit(len(terms), m)
        proto = compile_circuit(g, terms, circuit, seed=seed, output_pos=pos)
        return proto, ("ED-HASH", m)
    raise GraphError(f"unknown protocol {name!r} "
                     "(available: disj-aggregate, ed-compiled)")


def cmd_run(args):
    g = load_graph(args.graph)
    inputs = _load_inputs(args.inputs) if args.inputs else \
        _random_inputs(g.terminals, args.n, args.seed)
    n = len(next(iter(inputs.values())))
    proto, detail = _build_named_protocol(args.protocol, g, n, args.seed)
    if args.protocol == "ed-compiled":
        red = ed_hash_reduce([inputs[t] for t in sorted(inputs)],
                             seed=args.seed, n_bits=n, trials=1)
        hashed = red.bitstrings()
        inputs = {t: hashed[i] for i, t in enumerate(sorted(inputs))}
    tr = run_protocol(g, proto, inputs, seed=args.seed,
                      max_rounds=args.max_rounds or proto.max_rounds)
    return {"command": "run", "protocol": args.protocol,
            "rounds": tr.rounds,
            "outputs": {str(t): tr.outputs[t] for t in sorted(tr.outputs)},
            "total_bits": tr.total_bits,
            "per_edge_bits": {f"{u}->{v}#{e}": c for (u, v, e), c
                              in sorted(tr.per_edge_bits().items())},
            "seed": args.seed}


def cmd_compile(args):
    g = load_graph(args.graph)
    with open(args.circuit) as fh:
        circuit = circuit_from_json(json.load(fh))
    proto = compile_circuit(g, g.terminals, circuit, seed=args.seed,
                            output_pos=args.output_pos)
    payload = {"command": "compile", "depth": circuit.depth,
               "wires": circuit.wire_count,
               "level_sizes": list(circuit.level_sizes),
               "windows": list(proto.meta["windows"]),
               "data_rounds": proto.meta["data_rounds"],
               "broadcast_rounds": proto.meta["broadcast_rounds"],
               "seed": args.seed}
    if args.inputs:
        inputs = _load_inputs(args.inputs)
        tr = run_protocol(g, proto, inputs, seed=args.seed)
        payload["rounds"] = tr.rounds
        payload["outputs"] = {str(t): tr.outputs[t]
                              for t in sorted(tr.outputs)}
    return payload


def cmd_ed_circuit(args):
    circuit, pos = build_ed_circuit(args.k, args.m)
    obj = circuit_to_json(circuit)
    obj["output_pos"] = pos
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
    return {"command": "ed-circuit", "k": args.k, "m": args.m,
            "depth": circuit.depth, "wires": circuit.wire_count,
            "output_pos": pos, "out": args.out, "seed": args.seed}


def cmd_embed_expander(args):
    g = load_graph(args.graph)
    emb = cut_matching_embed(g, g.terminals, args.tau, args.nprime,
                             seed=args.seed)
    paths = {f"{emb.terminals[i]}->{emb.terminals[j]}@{it}":
             {"start": p.start, "verts": list(p.verts),
              "edge_ids": [e if e is not None else -1 for e in p.edge_ids]}
             for (i, j, it), p in sorted(emb.paths.items())}
    return {"command": "embed-expander",
            "expander_edges": [[emb.terminals[u], emb.terminals[v]]
                               for u, v in emb.expander.edges],
            "degree": emb.d, "paths": paths,
            "congestion": emb.congestion,
            "congestion_per_iteration": list(emb.congestion_per_iteration),
            "lambda2": emb.lambda2, "expansion": emb.expansion,
            "retries": emb.retries, "seed": args.seed}


def cmd_gen(args):
    terms = tuple(range(args.k))
    strings = random_pair_strings(terms, args.n, seed=args.seed)
    if args.reduction == "or-disj":
        inst = or_disj_instance(strings, terms, args.n)
        truth = graph_oracles(inst.num_vertices, inst.edges, "triangle")
    else:
        inst = and_disj_instance(strings, terms, args.n)
        truth = graph_oracles(inst.num_vertices, inst.edges, "connected")
    obj = inst.to_json()
    obj["reduction"] = args.reduction
    obj["ground_truth"] = truth
    obj["seed"] = args.seed
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
        return {"command": "gen", "reduction": args.reduction,
                "out": args.out, "n_h": inst.num_vertices,
                "m_h": inst.num_edges, "seed": args.seed}
    obj["command"] = "gen"
    return obj


def cmd_solve(args):
    g = load_graph(args.graph)
    with open(args.instance) as fh:
        inst = instance_from_json(json.load(fh))
    if inst.mode == "edge":
        inst, _ = edge_to_node_rebalance(g, g.terminals, inst, seed=args.seed)
    proto = bfs_protocol(g, g.terminals, inst, args.variant, seed=args.seed)
    tr = run_protocol(g, proto, inst.blocks(), seed=args.seed)
    answer = tr.outputs[g.terminals[0]]
    query = {"connectivity": "connected", "components": "components",
             "acyclicity": "acyclic", "bipartiteness": "bipartite"}[args.variant]
    return {"command": "solve", "variant": args.variant,
            "answer": answer, "rounds": tr.rounds,
            "oracle": graph_oracles(inst.num_vertices, inst.edges, query),
            "seed": args.seed}


def cmd_bench(args):
    g = load_graph(args.graph)
    terms = g.terminals
    inputs = _random_inputs(terms, args.n, args.seed)
    if args.function == "disj":
        best = disjointness_bound(g, terms, args.n)
        packing = pack_steiner_trees(g, terms, best.delta)
        func = disjointness_function(len(terms), args.n)
        proto = steiner_aggregate_protocol(g, terms, packing, func)
        tr = run_protocol(g, proto, inputs, seed=args.seed)
        expected = disj_oracle([inputs[t] for t in sorted(inputs)])
        bound = best.value
        kind = "min_delta(n/ST+delta)"
    else:
        bound = Fraction(tau_mcf(g, terms, 1))
        kind = "tau_mcf(G,K,1)"
        red = ed_hash_reduce([inputs[t] for t in sorted(inputs)],
                             seed=args.seed, n_bits=args.n, trials=1)
        hashed = red.bitstrings()
        circuit, pos = build_ed_circuit(len(terms), red.bits_per_hash)
        proto = compile_circuit(g, terms, circuit, seed=args.seed,
                                output_pos=pos)
        hashed_inputs = {t: hashed[i] for i, t in enumerate(sorted(inputs))}
        tr = run_protocol(g, proto, hashed_inputs, seed=args.seed)
        expected = ed_oracle(hashed)
        inputs = hashed_inputs
    if not replay_matches(g, proto, inputs, args.seed, tr):
        raise ContractViolation("transcript replay mismatch")
    got = set(tr.outputs.values())
    if got != {_normalize_bit(expected)} and got != {expected}:
        raise ContractViolation(
            f"protocol answered {got}, oracle says {expected}")
    ratio = Fraction(tr.rounds) / Fraction(bound) if bound else Fraction(0)
    return {"instance": args.graph, "k": len(terms), "n": args.n,
            "bound_kind": kind, "bound": bound, "rounds": tr.rounds,
            "ratio": ratio, "seed": args.seed, "command": "bench",
            "audited": True}


def _normalize_bit(x):
    return int(x)


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="roundlab",
        description="Round-complexity laboratory for small synchronous networks")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--out", default=None)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("tau-route", help="single-pair routing horizon")
    p.add_argument("--graph", required=True)
    p.add_argument("--a", type=int, default=None)
    p.add_argument("--b", type=int, default=None)
    p.add_argument("--nprime", type=int, required=True)
    p.set_defaults(func=cmd_tau_route)

    p = sub.add_parser("tau-mcf", help="uniform multicommodity horizon")
    p.add_argument("--graph", required=True)
    p.add_argument("--nprime", type=int, required=True)
    p.set_defaults(func=cmd_tau_mcf)

    p = sub.add_parser("st-pack", help="diameter-bounded tree packing")
    p.add_argument("--graph", required=True)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--mode", choices=("greedy", "sample"), default="greedy")
    p.set_defaults(func=cmd_st_pack)

    p = sub.add_parser("disj-bound", help="min over delta of n/ST + delta")
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_disj_bound)

    p = sub.add_parser("run", help="run a named protocol")
    p.add_argument("--graph", required=True)
    p.add_argument("--protocol", required=True)
    p.add_argument("--inputs", default=None)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--max-rounds", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compile", help="compile a circuit JSON")
    p.add_argument("--graph", required=True)
    p.add_argument("--circuit", required=True)
    p.add_argument("--inputs", default=None)
    p.add_argument("--output-pos", type=int, default=0)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("ed-circuit", help="emit the distinctness circuit")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.set_defaults(func=cmd_ed_circuit)

    p = sub.add_parser("embed-expander", help="cut-matching embedding")
    p.add_argument("--graph", required=True)
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--nprime", type=int, required=True)
    p.set_defaults(func=cmd_embed_expander)

    p = sub.add_parser("gen", help="generate a reduction instance")
    p.add_argument("--reduction", choices=("or-disj", "and-disj"),
                   required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="run a flooding variant on an instance")
    p.add_argument("--variant", required=True,
                   choices=("connectivity", "components", "acyclicity",
                            "bipartiteness"))
    p.add_argument("--graph", required=True)
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="measured rounds vs computed bound")
    p.add_argument("--function", choices=("disj", "ed"), required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        payload = args.func(args)
    except INFEASIBLE_ERRORS as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CONTRACT_ERRORS as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(payload, args)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
