"""``pagelink`` command line.

Exit codes: 0 on success, 1 when the pipeline raises a domain error, 2 on
usage errors (bad flags, missing inputs).
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import GNNExpLinkExplainer, PGExpLinkExplainer
from .datasets import (LINK_TYPE, PRESETS, gen_augcitation, gen_useritemattr, parse_key_values,
                       read_ground_truth, spec_to_text, write_ground_truth)
from .evalkit import EvalReport, bench_scaling, compare_explainers, reports_to_tsv
from .exceptions import PageLinkError
from .explainer import ExplainerConfig, PaGELinkExplainer, explain, to_dot
from .hetgraph import Subgraph, extract_computation_graph, read_tsv, write_nodes_tsv, write_tsv
from .randomgraph import verify_theory
from .rgcn import RGCNLinkPredictor, TrainConfig, load_model, message_graph, save_model, score_pairs
from ._validation import check_pair

GRAPH, NODES, GT, MODEL, EXPLANATION, REPORT, MANIFEST = (
    "graph.tsv", "nodes.tsv", "gt.tsv", "model.ckpt", "explanation.json", "report.tsv", "manifest.txt")


class UsageError(Exception):
    pass


# -- argument parsing ----------------------------------------------------------

def _int_list(text):
    return [int(x) for x in str(text).split(",") if x.strip()]


def _add_explainer_flags(p):
    d = ExplainerConfig()
    g = p.add_argument_group("explainer")
    g.add_argument("--alpha", type=float, default=d.alpha)
    g.add_argument("--beta", type=float, default=d.beta)
    g.add_argument("--lr", type=float, default=d.lr, help="mask learning rate")
    g.add_argument("--max-iter", type=int, default=d.max_iter)
    g.add_argument("--k", dest="k_core", type=int, default=d.k_core, help="core parameter")
    g.add_argument("--budget", type=int, default=d.budget)
    g.add_argument("--l-max", type=int, default=d.l_max)
    g.add_argument("--degree-cap", type=int, default=None)
    g.add_argument("--k-paths", type=int, default=d.k_paths)
    g.add_argument("--tol", type=float, default=d.tol)
    g.add_argument("--degree-from", choices=("core", "full"), default=d.degree_from)
    g.add_argument("--lambda-ent", type=float, default=d.lambda_ent)
    g.add_argument("--lambda-norm", type=float, default=d.lambda_norm)


def _add_io_flags(p, data=True, model=False):
    p.add_argument("--out-dir", default=".", help="directory for outputs (default: .)")
    if data:
        p.add_argument("--data-dir", default=None, help=f"directory holding {GRAPH} (default: --out-dir)")
    if model:
        p.add_argument("--model", default=None, help=f"checkpoint (default: <out-dir>/{MODEL})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pagelink", description="Path-based explanations for link prediction.")
    parser.add_argument("--version", action="version", version=f"pagelink {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="global seed (fallback: $PAGELINK_SEED, then 0)")
    common.add_argument("--config", default=None, help="key=value file; explicit flags win")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("gen-data", parents=[common], help="generate a graph with ground-truth paths")
    p.add_argument("--preset", choices=sorted(PRESETS), default="useritemattr")
    names = sorted({f.name for cls in PRESETS.values() for f in fields(cls)} - {"seed"})
    g = p.add_argument_group("generator")
    for name in names:
        g.add_argument("--" + name.replace("_", "-"), dest=name, type=float, default=None)
    _add_io_flags(p, data=False)

    p = sub.add_parser("train", parents=[common], help="train the link predictor")
    d = TrainConfig()
    p.add_argument("--target", default=LINK_TYPE, help="edge type to predict")
    p.add_argument("--epochs", type=int, default=d.epochs)
    p.add_argument("--train-lr", type=float, default=d.lr)
    p.add_argument("--neg-ratio", type=int, default=d.neg_ratio)
    p.add_argument("--layers", type=int, default=d.n_layers)
    p.add_argument("--hidden", type=int, default=d.hidden)
    p.add_argument("--embedding", choices=("node", "type"), default=d.embedding)
    p.add_argument("--weight-decay", type=float, default=d.weight_decay)
    p.add_argument("--train-embedding", action="store_true", help="also learn the layer-0 embeddings")
    _add_io_flags(p)

    p = sub.add_parser("explain", parents=[common], help="explain predicted links")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--pair", help='e.g. "u3:i12" or "user.3,item.12"')
    grp.add_argument("--pairs-file", help="one pair per line")
    p.add_argument("--workers", type=int, default=2, help="parallel jobs for --pairs-file")
    _add_explainer_flags(p)
    _add_io_flags(p, model=True)

    p = sub.add_parser("eval", parents=[common], help="score explainers against ground truth")
    p.add_argument("--budgets", "--budget-list", dest="budgets", type=_int_list, default=[10, 50, 100])
    p.add_argument("--max-links", type=int, default=50)
    p.add_argument("--methods", default="pagelink,gnnexp,pgexp")
    p.add_argument("--pgexp-train", type=int, default=64, help="training links for the mask predictor")
    _add_explainer_flags(p)
    _add_io_flags(p, model=True)

    p = sub.add_parser("bench", parents=[common], help="time explanation against core size")
    p.add_argument("--sizes", type=_int_list, default=[100, 200, 500, 1000, 2000, 5000])
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--iterations", type=int, default=20)
    _add_io_flags(p, data=False)

    p = sub.add_parser("verify-theory", parents=[common], help="check path counts and k-core sizes")
    p.add_argument("--avg-degree", type=float, default=7.0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--nodes", type=int, default=10_000, help="graph size for the k-core check")
    p.add_argument("--density", type=float, default=0.5)
    p.add_argument("--n-min", type=int, default=6)
    p.add_argument("--n-max", type=int, default=12)
    p.add_argument("--trials", type=int, default=200)
    _add_io_flags(p, data=False)

    p = sub.add_parser("export-dot", parents=[common], help="Graphviz drawing of an explanation")
    p.add_argument("--pair", default=None, help="which explanation to draw (default: the first)")
    p.add_argument("--explanation", default=None, help=f"default: <out-dir>/{EXPLANATION}")
    p.add_argument("--scope", choices=("paths", "computation-graph"), default="paths")
    p.add_argument("--output", default=None, help="DOT file (default: <out-dir>/explanation.dot)")
    _add_io_flags(p, model=True)
    return parser


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            parser.error(f"cannot read config {args.config}: {exc.strerror}")
        values = parse_key_values(text)
        sp = _subparser(parser, args.command)
        dests = {a.dest for a in sp._actions}
        unknown = sorted(set(values) - dests)
        if unknown:
            sp.error(f"unknown config keys: {', '.join(unknown)}")
        sp.set_defaults(**values)
        args = parser.parse_args(argv)
    if args.seed is None:
        env = os.environ.get("PAGELINK_SEED")
        try:
            args.seed = int(env) if env else 0
        except ValueError:
            parser.error(f"PAGELINK_SEED must be an integer, got {env!r}")
    return args


# -- helpers -------------------------------------------------------------------

def _explainer_config(args) -> ExplainerConfig:
    return ExplainerConfig(alpha=args.alpha, beta=args.beta, lr=args.lr, max_iter=args.max_iter,
                           k_core=args.k_core, budget=args.budget, l_max=args.l_max,
                           degree_cap=args.degree_cap, k_paths=args.k_paths, tol=args.tol,
                           degree_from=args.degree_from, lambda_ent=args.lambda_ent,
                           lambda_norm=args.lambda_norm).validate()


def _out(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need(path: Path, what: str) -> Path:
    if not path.is_file():
        raise UsageError(f"{what} not found at {path}")
    return path


def _load_graph(args):
    base = Path(args.data_dir or args.out_dir)
    nodes = base / NODES
    return read_tsv(_need(base / GRAPH, "graph"), nodes if nodes.is_file() else None)


def _load_model(args, g):
    path = _need(Path(args.model) if args.model else Path(args.out_dir) / MODEL,
                 "trained checkpoint (run `pagelink train` first)")
    params = load_model(path)
    from . import checkpoint
    meta = checkpoint.read(path)[2].get("meta", {})
    return params, meta


def _write_manifest(out: Path, args, outputs):
    import scipy
    import sklearn
    section = [f"[{args.command}]", f"pagelink={__version__}", f"python={platform.python_version()}",
               f"numpy={np.__version__}", f"scipy={scipy.__version__}", f"scikit-learn={sklearn.__version__}",
               f"seed={args.seed}"]
    for k, v in sorted(vars(args).items()):
        if k in ("command", "seed", "verbose"):
            continue
        section.append(f"arg.{k}={v}")
    section += [f"output={o}" for o in outputs]
    path = out / MANIFEST
    sections = {}
    if path.is_file():
        current = None
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                sections[current] = []
            elif current is not None and line:
                sections[current].append(line)
    sections[args.command] = section[1:]
    text = "\n\n".join("\n".join([f"[{k}]"] + v) for k, v in sorted(sections.items())) + "\n"
    path.write_text(text, encoding="utf-8")


def _log(args, msg):
    if args.verbose:
        print(msg, file=sys.stderr)


# -- subcommands ---------------------------------------------------------------

def cmd_gen_data(args):
    out = _out(args)
    cls = PRESETS[args.preset]
    own = {f.name for f in fields(cls)}
    overrides = {k: getattr(args, k) for k in own if k != "seed" and getattr(args, k, None) is not None}
    types = {f.name: f.type for f in fields(cls)}
    kw = {k: (float(v) if "float" in str(types[k]) else int(v)) for k, v in overrides.items()}
    spec = cls(seed=args.seed, **kw).validate()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g, links = gen_useritemattr(spec) if args.preset == "useritemattr" else gen_augcitation(spec)
    header = [f"pagelink gen-data preset={args.preset} seed={args.seed}"]
    write_tsv(g, out / GRAPH, header)
    write_nodes_tsv(g, out / NODES, header)
    write_ground_truth(g, links, out / GT, header)
    (out / "spec.txt").write_text(spec_to_text(spec), encoding="utf-8")
    _write_manifest(out, args, [GRAPH, NODES, GT, "spec.txt"])
    print(f"{g.num_nodes} nodes, {g.num_edges} edges, {len(links)} links with ground truth -> {out}")


def cmd_train(args):
    out = _out(args)
    g = _load_graph(args)
    est = RGCNLinkPredictor(n_layers=args.layers, hidden=args.hidden, epochs=args.epochs,
                            learning_rate=args.train_lr, neg_ratio=args.neg_ratio,
                            embedding=args.embedding, weight_decay=args.weight_decay,
                            freeze_embedding=not args.train_embedding, random_state=args.seed)
    est.fit(g, args.target)
    rng = np.random.default_rng(args.seed)
    from .rgcn import link_auc
    test_auc = link_auc(g, est.params_, args.target, est.split_.test, args.seed)
    train_auc = link_auc(g, est.params_, args.target, est.split_.train, args.seed)
    del rng
    ref = lambda pairs: [["{}:{}".format(*g.node_ref(s)), "{}:{}".format(*g.node_ref(t))] for s, t in pairs.tolist()]
    meta = {"target": args.target, "seed": args.seed, "train": ref(est.split_.train),
            "val": ref(est.split_.val), "test": ref(est.split_.test)}
    save_model(est.params_, out / MODEL, meta)
    rows = ["metric\tvalue", f"train_auc\t{train_auc:.4f}", f"test_auc\t{test_auc:.4f}",
            f"final_loss\t{est.loss_curve_[-1]:.6f}" if est.loss_curve_ else "final_loss\tnan"]
    (out / REPORT).write_text("\n".join(rows) + "\n", encoding="utf-8")
    _write_manifest(out, args, [MODEL, REPORT])
    print(f"test ROC-AUC {test_auc:.4f} (train {train_auc:.4f}) -> {out / MODEL}")


def _read_pairs(path):
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            pairs.append(line.replace("\t", ","))
    return pairs


def cmd_explain(args):
    out = _out(args)
    g = _load_graph(args)
    params, _ = _load_model(args, g)
    cfg = _explainer_config(args)
    mp = message_graph(g, params)
    texts = [args.pair] if args.pair else _read_pairs(_need(Path(args.pairs_file), "pairs file"))

    def job(text):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return explain(mp, params, check_pair(mp, text), cfg).to_dict(mp)

    if len(texts) == 1:
        docs = [job(texts[0])]
    else:
        with ThreadPoolExecutor(max_workers=max(1, args.workers)) as pool:
            docs = list(pool.map(job, texts))
    doc = docs[0] if args.pair else docs
    (out / EXPLANATION).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    _write_manifest(out, args, [EXPLANATION])
    n = sum(len(d["paths"]) for d in docs)
    print(f"{len(docs)} explanation(s), {n} path(s) -> {out / EXPLANATION}")


def cmd_eval(args):
    out = _out(args)
    g = _load_graph(args)
    params, meta = _load_model(args, g)
    base = Path(args.data_dir or args.out_dir)
    links = dict(read_ground_truth(g, _need(base / GT, "ground truth")))
    mp = message_graph(g, params)
    test = [check_pair(g, ",".join(p)) for p in meta.get("test", [])] or sorted(links)
    cand = [p for p in test if p in links]
    if cand:
        logits = score_pairs(mp, params, np.array(cand))
        cand = [p for p, x in zip(cand, logits) if x > 0]
    cand = cand[:args.max_links]
    if not cand:
        raise PageLinkError("no positively predicted links with ground truth to evaluate")
    cfg = _explainer_config(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    explainers = {}
    for m in methods:
        if m == "pagelink":
            explainers[m] = PaGELinkExplainer(cfg.alpha, cfg.beta, cfg.lr, cfg.max_iter, cfg.k_core, cfg.budget,
                                              cfg.l_max, cfg.degree_cap, cfg.k_paths, cfg.tol, cfg.degree_from,
                                              cfg.lambda_ent, cfg.lambda_norm).fit(mp, params)
        elif m == "gnnexp":
            explainers[m] = GNNExpLinkExplainer(cfg.lr, cfg.max_iter, cfg.tol, cfg.lambda_ent,
                                                cfg.lambda_norm).fit(mp, params)
        elif m == "pgexp":
            train = [check_pair(g, ",".join(p)) for p in meta.get("train", [])][:args.pgexp_train]
            explainers[m] = PGExpLinkExplainer(random_state=args.seed).fit(mp, params, train)
        else:
            raise UsageError(f"unknown method {m!r}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reports = compare_explainers(mp, [(p, links[p]) for p in cand], params, explainers,
                                     tuple(args.budgets), args.seed)
    text = reports_to_tsv(list(reports.values()), out / REPORT)
    _write_manifest(out, args, [REPORT])
    print(text, end="")


def cmd_bench(args):
    out = _out(args)
    cfg = ExplainerConfig(max_iter=args.iterations)
    res = bench_scaling(args.sizes, args.trials, args.seed, cfg)
    rows = ["edges\tseconds"] + [f"{e}\t{t:.6f}" for e, t in res["table"]]
    rows.append(f"# slope={res['slope']:.6g} intercept={res['intercept']:.6g} r2={res['r2']:.4f}")
    text = "\n".join(rows) + "\n"
    (out / REPORT).write_text(text, encoding="utf-8")
    _write_manifest(out, args, [REPORT])
    print(text, end="")


def cmd_verify_theory(args):
    out = _out(args)
    rep = verify_theory(range(args.n_min, args.n_max + 1), args.density, args.trials, (args.k,),
                        args.nodes, (args.avg_degree,), args.seed)
    text = rep.to_tsv()
    (out / REPORT).write_text(text, encoding="utf-8")
    _write_manifest(out, args, [REPORT])
    print(text, end="")
    for row in rep.core_rows:
        vt, et = row[5], row[6]
        if vt is None:
            print(f"k={row[2]} core: empty (avg degree {row[1]:g} below threshold {row[7]:.4f})")
        else:
            print(f"k={row[2]} core: delta_V={vt:.4f} delta_E={et:.4f} "
                  f"(empirical {row[3]:.4f} / {row[4]:.4f})")


def cmd_export_dot(args):
    out = _out(args)
    g = _load_graph(args)
    params, _ = _load_model(args, g)
    mp = message_graph(g, params)
    path = _need(Path(args.explanation) if args.explanation else out / EXPLANATION, "explanation")
    doc = json.loads(path.read_text(encoding="utf-8"))
    docs = doc if isinstance(doc, list) else [doc]
    if args.pair:
        want = check_pair(mp, args.pair)
        docs = [d for d in docs if tuple(mp.index(tuple(r)) for r in d["pair"]) == want]
        if not docs:
            raise UsageError(f"no explanation for {args.pair} in {path}")
    d = docs[0]
    s, t = (mp.index(tuple(r)) for r in d["pair"])
    chosen = [tuple(p["edges"]) for p in d["paths"]]
    base = Path(args.data_dir or args.out_dir)
    truth = []
    if (base / GT).is_file():
        for (a, b), gt in read_ground_truth(g, base / GT):
            if (a, b) == (s, t):
                truth = gt.edge_sets(mp)
    if args.scope == "computation-graph":
        sub = extract_computation_graph(mp, s, t, params.n_layers)
    else:
        edges = sorted({e for p in chosen + truth for e in p})
        nodes = sorted({int(v) for e in edges for v in (mp.edge_src[e], mp.edge_dst[e])} | {s, t})
        sub = Subgraph(mp, nodes, edges)
    text = to_dot(sub, (s, t), chosen, truth)
    target = Path(args.output) if args.output else out / "explanation.dot"
    target.write_text(text, encoding="utf-8")
    _write_manifest(out, args, [target.name])
    print(f"wrote {target}")


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "explain": cmd_explain, "eval": cmd_eval,
            "bench": cmd_bench, "verify-theory": cmd_verify_theory, "export-dot": cmd_export_dot}


def run(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"pagelink {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except PageLinkError as exc:
        print(f"pagelink {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
