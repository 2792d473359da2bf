"""Command-line entry point.

Exit codes: 0 success, 1 a quality gate failed, 2 usage or I/O error.
Every command is deterministic given ``--seed``; reports are written with
sorted keys and fixed float formatting so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import importlib
import io
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

log = logging.getLogger("povshift")

OK, GATE_FAILED, USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unreadable input; reported with exit code 2."""


# ---------------------------------------------------------------------------
# Config overlay
# ---------------------------------------------------------------------------

def load_config(path: str | Path) -> dict[str, Any]:
    """Read a JSON object or ``key = value`` lines (``#`` comments)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        if not isinstance(data, dict):
            raise UsageError(f"{path}: config must be a JSON object")
        return {k.replace("-", "_"): v for k, v in data.items()}
    out: dict[str, Any] = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        try:
            out[key.replace("-", "_")] = json.loads(value)
        except json.JSONDecodeError:
            out[key.replace("-", "_")] = value
    return out


def _write_json(path: str | Path, data: Any) -> None:
    Path(path).write_text(json.dumps(data, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _round(x: float) -> float:
    return float(f"{x:.6f}")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_extract_data(args) -> int:
    from .ingest import corpus_stats, extract_corpus_examples, filter_deictic_documents, load_conll_dir, \
        write_examples, write_stats_csv

    src = Path(args.conll)
    if not src.exists():
        raise UsageError(f"no such file or directory: {src}")
    docs = load_conll_dir(src)
    kept = docs if args.keep_deictic else filter_deictic_documents(docs)
    if not kept:
        log.warning("no documents left after the deictic filter")
    examples = extract_corpus_examples(kept, args.n_tokens, args.k_mentions, filter_deictic=False)
    write_examples(examples, args.out)
    if args.stats:
        with open(args.stats, "w", encoding="utf-8", newline="") as fh:
            write_stats_csv([(src.name, corpus_stats(kept))], fh)
    print(f"{len(examples)} examples from {len(kept)} of {len(docs)} documents")
    return OK


def cmd_stats(args) -> int:
    from .ingest import corpus_stats, load_conll_dir, write_stats_csv

    rows = []
    for p in args.conll:
        if not Path(p).exists():
            raise UsageError(f"no such file or directory: {p}")
        rows.append((Path(p).name, corpus_stats(load_conll_dir(p))))
    buf = io.StringIO()
    write_stats_csv(rows, buf)
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    sys.stdout.write(buf.getvalue())
    return OK


def cmd_synth(args) -> int:
    from .ingest import write_examples
    from .synthetic import generate_corpus, save_corpus, synthetic_examples

    docs = generate_corpus(args.docs, seed=args.seed, prefix=args.prefix)
    save_corpus(docs, args.out)
    if args.examples:
        write_examples(synthetic_examples(docs, args.n_tokens, args.k_mentions), args.examples)
    print(f"{len(docs)} synthetic documents written to {args.out}")
    return OK


def _model_config(args):
    from .ranker import ModelConfig

    fields = {"n_tokens", "k_mentions", "lstm_hidden", "mlp_hidden", "margin", "learning_rate", "dropout",
              "max_epochs", "patience", "batch_size"}
    kw = {k: getattr(args, k) for k in fields if getattr(args, k, None) is not None}
    kw["seed"] = args.seed
    for flag, name in (("no_token_lstm", "use_token_lstm"), ("no_mention_lstm", "use_mention_lstm"),
                       ("no_phi_t", "use_phi_t"), ("no_phi_b", "use_phi_b")):
        if getattr(args, flag, False):
            kw[name] = False
    valid = set(ModelConfig.__dataclass_fields__)
    return ModelConfig(**{k: v for k, v in kw.items() if k in valid})


def cmd_train(args) -> int:
    from .ingest import read_examples
    from .ranker import save_model, train, training_accuracy
    from .ranker.provider import get_provider

    for p in [args.examples] + ([args.dev] if args.dev else []):
        if not Path(p).is_file():
            raise UsageError(f"no such examples file: {p}")
    examples = read_examples(args.examples)
    dev = read_examples(args.dev) if args.dev else None
    provider = get_provider(args.provider)
    summary: dict[str, Any] = {"examples": len(examples)}
    if args.baseline:
        from .baselines import TREE_VARIANTS, save_tree_ranker, tree_accuracy, train_tree_ranker

        if args.baseline not in TREE_VARIANTS:
            raise UsageError(f"only tree baselines are trained; got {args.baseline!r}")
        model = train_tree_ranker(examples, args.baseline, args.seed, provider)
        save_tree_ranker(model, args.out)
        acc = tree_accuracy(model, examples)
        summary.update({"model": model.variant, "train_accuracy": _round(acc)})
    else:
        model = train(examples, _model_config(args), provider, dev)
        save_model(model, args.out)
        acc = training_accuracy(model, examples)
        summary.update({"model": "ranker", "config": model.config.label(), "train_accuracy": _round(acc),
                        "epochs": model.metadata.get("epochs")})
    print(json.dumps(summary, sort_keys=True))
    if args.min_train_accuracy is not None and acc < args.min_train_accuracy:
        log.error("training accuracy %.4f is below the gate %.4f", acc, args.min_train_accuracy)
        return GATE_FAILED
    return OK


# -- convert -----------------------------------------------------------------

def _load_adapters(spec: str):
    module, _, attr = spec.partition(":")
    if not attr:
        raise UsageError("--adapters expects module:callable")
    try:
        factory = getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise UsageError(f"cannot load adapters {spec!r}: {exc}") from exc
    return factory()


def _load_input(path: Path, gold_annotations: str | None, adapters: str | None):
    """A PoV document from JSON, or raw text annotated by gold or plugged-in adapters."""
    from .ingest import PovDocument, load_pov_document
    from .preprocess import annotate, gold_adapters, mark_narrators, mark_quotes

    if not path.is_file():
        raise UsageError(f"no such input file: {path}")
    if path.suffix == ".json" and not gold_annotations:
        pd = load_pov_document(path)
        doc = mark_narrators(mark_quotes(pd.document, pd.document.quoted_spans or None))
        return PovDocument(doc, pd.focus, pd.gold_replacements, pd.gold_verb_changes, pd.candidate_sets)
    raw = path.read_text(encoding="utf-8")
    if gold_annotations:
        gold = load_pov_document(Path(gold_annotations))
        bundle = json.loads(Path(gold_annotations).read_text(encoding="utf-8"))
        if path.suffix == ".json":
            raw = bundle["text"]
        elif raw != bundle["text"] and raw.rstrip("\n") == bundle["text"]:
            raw = bundle["text"]  # trailing newline added by editors
        doc = annotate(raw, gold_adapters(bundle), doc_id=gold.document.doc_id)
        return PovDocument(doc, gold.focus, gold.gold_replacements, gold.gold_verb_changes, gold.candidate_sets)
    if adapters:
        doc = annotate(raw.rstrip("\n"), _load_adapters(adapters), doc_id=path.stem)
        return PovDocument(doc, None, {}, {}, {})
    raise UsageError(f"{path}: raw text needs --gold-annotations or --adapters")


def _chooser(kind: str, model, plan, pd, seed: int):
    from .baselines import most_common_chooser, pronoun_chooser, random_chooser, tree_chooser
    from .core import Gender
    from .ranker import ranker_chooser

    if kind == "ranker":
        return ranker_chooser(model)
    if kind in ("tree", "forest", "gbt"):
        return tree_chooser(model)
    if kind == "random":
        return random_chooser(seed)
    if kind == "pronouns":
        doc = plan.doc
        genders = {cid: (plan.gender if cid == plan.focus else doc.chain(cid).gender) for cid in plan.chain_ids()}
        genders = {k: (v if v is not Gender.UNKNOWN else plan.gender) for k, v in genders.items()}
        numbers = {cid: doc.chain(cid).number for cid in plan.chain_ids() if cid != plan.focus}
        return pronoun_chooser(genders, numbers)
    if kind == "most-common":
        if not pd.gold_replacements:
            raise UsageError("the most-common baseline needs gold replacements in the input")
        owner = {(m.start, m.end): c.chain_id for c in plan.doc.chains for m in c.mentions}
        by_chain: dict[str, list[str]] = {}
        for span, text in pd.gold_replacements.items():
            by_chain.setdefault(owner.get(span, "?"), []).append(text)
        return most_common_chooser(by_chain)
    raise UsageError(f"unknown selector {kind!r}")


def _load_selector_model(path: str | None, kind: str, provider_spec: str | None, force: bool):
    from .ranker.provider import get_provider

    provider = get_provider(provider_spec) if provider_spec else None
    if kind == "ranker":
        from .ranker import load_model

        if not path:
            raise UsageError("--model is required for the neural ranker")
        return load_model(path, provider, force)
    if kind in ("tree", "forest", "gbt"):
        from .baselines import load_tree_ranker

        if not path:
            raise UsageError("--model is required for tree baselines")
        return load_tree_ranker(path, provider, force)
    return None


def _convert_one(job: dict) -> dict:
    """Convert one input; runs in worker processes when ``--jobs`` > 1."""
    import torch

    from .conversion import plan_conversion
    from .core import EntitySpec, Gender, Pov
    from .morph import load_verb_dictionary

    torch.set_num_threads(1)
    pd = _load_input(Path(job["input"]), job["gold_annotations"], job["adapters"])
    focus = pd.focus
    name = job["focus_name"] or (focus.name if focus else None)
    gender = job["focus_gender"] or (focus.gender.value if focus else None)
    from_pov = job["from_pov"] or (focus.from_pov.value if focus else "first")
    if gender is None:
        raise UsageError("the focus gender is required (--focus-gender)")
    spec = EntitySpec.from_name(name, Gender(gender)) if name else EntitySpec(gender=Gender(gender))
    verbs = load_verb_dictionary(job["verb_dict"]) if job["verb_dict"] else None
    plan = plan_conversion(pd.document, spec, Pov(from_pov), verb_dictionary=verbs,
                           focus_chain=focus.chain if focus and focus.chain else None)
    model = _load_selector_model(job["model"], job["selector"], job["provider"], job["force"])
    chooser = _chooser(job["selector"], model, plan, pd, job["seed"])
    from .conversion import run_selection

    n_tokens = model.config.n_tokens if job["selector"] == "ranker" else 50
    k = model.config.k_mentions if job["selector"] == "ranker" else 10
    result = run_selection(plan, chooser, n_tokens, k)
    out = result.to_dict()
    out["focus_chain"] = plan.focus
    out["confounders"] = list(plan.confounders.all())
    out["candidate_sets"] = {cid: [c.string for c in cs] for cid, cs in sorted(plan.candidate_sets.items())}
    return out


def cmd_convert(args) -> int:
    selector = args.baseline or "ranker"
    jobs = [{
        "input": str(p), "gold_annotations": args.gold_annotations, "adapters": args.adapters,
        "focus_name": args.focus_name, "focus_gender": args.focus_gender, "from_pov": args.from_pov,
        "verb_dict": args.verb_dict, "model": args.model, "selector": selector, "provider": args.provider,
        "force": args.force, "seed": args.seed,
    } for p in args.inputs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_convert_one, jobs))
    else:
        results = [_convert_one(j) for j in jobs]
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for res in results:
        if out_dir:
            _write_json(out_dir / f"{res['doc_id']}.json", res)
            (out_dir / f"{res['doc_id']}.txt").write_text(res["text"] + "\n", encoding="utf-8")
        sys.stdout.write(res["text"] + "\n")
    return OK


# -- evaluate ----------------------------------------------------------------

def _load_result(path: Path):
    """A ConversionResult from a result JSON or from a gold-annotated document."""
    from .conversion import ConversionResult, gold_result
    from .ingest import load_pov_document

    if not path.is_file():
        raise UsageError(f"no such file: {path}")
    data = json.loads(path.read_text(encoding="utf-8"))
    if "tokens" in data:
        pd = load_pov_document(path)
        return gold_result(pd.document, pd.gold_replacements, pd.gold_verb_changes), pd
    return ConversionResult.from_dict(data), None


def cmd_evaluate(args) -> int:
    from .evaluation import mention_selection_accuracy, score_conversion, score_corpus

    if len(args.pred) != len(args.gold):
        raise UsageError("--pred and --gold need the same number of files")
    pairs, accuracies = [], {}
    for pp, gp in zip(args.pred, args.gold):
        pred, _ = _load_result(Path(pp))
        gold, gold_doc = _load_result(Path(gp))
        pairs.append((pred, gold))
        if gold_doc is not None:
            doc = gold_doc.document
            chosen = {span: doc.span_text(*span) for span in gold_doc.gold_replacements}
            chosen.update({s: t for s, t in pred.replacements().items() if s in chosen})
            accuracies[pred.doc_id] = mention_selection_accuracy(chosen, gold_doc.gold_replacements)
        else:
            score_conversion(pred, gold)  # raises on a document mismatch
    report = score_corpus(pairs)
    data = {"precision": _round(report.precision), "recall": _round(report.recall), "f1": _round(report.f1),
            "n_changed": report.n_changed, "n_correct": report.n_correct, "n_gold": report.n_gold,
            "documents": {k: {"precision": _round(v.precision), "recall": _round(v.recall), "f1": _round(v.f1)}
                          for k, v in sorted(report.per_document.items())}}
    if accuracies:
        data["mention_accuracy"] = {k: _round(v) for k, v in sorted(accuracies.items())}
    if args.out:
        _write_json(args.out, data)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["doc_id", "precision", "recall", "f1", "mention_accuracy"])
            for k, v in sorted(report.per_document.items()):
                acc = f"{accuracies[k]:.6f}" if k in accuracies else ""
                w.writerow([k, f"{v.precision:.6f}", f"{v.recall:.6f}", f"{v.f1:.6f}", acc])
        if args.plot:
            from .plotting import plot_scores

            plot_scores(["precision", "recall", "F1"], [100 * report.precision, 100 * report.recall,
                                                        100 * report.f1], Path(args.csv).with_suffix(".png"))
    print(json.dumps({k: data[k] for k in ("precision", "recall", "f1")}, sort_keys=True))
    if args.min_f1 is not None and report.f1 < args.min_f1:
        return GATE_FAILED
    return OK


def cmd_score_human_eval(args) -> int:
    from .evaluation import ratings_summary, read_ratings, score_ratings, sentence_scores_csv

    path = Path(args.ratings)
    if not path.is_file():
        raise UsageError(f"no such ratings file: {path}")
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            scores = score_ratings(read_ratings(fh))
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    summary = {k: (_round(v) if isinstance(v, float) else v) for k, v in ratings_summary(scores).items()}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "summary.json", summary)
    (out / "sentences.csv").write_text(sentence_scores_csv(scores), encoding="utf-8")
    if args.plot:
        from .plotting import plot_ratings_scatter

        plot_ratings_scatter(scores, out / "sentences.png")
    print(json.dumps(summary, sort_keys=True))
    return OK


# -- synthetic experiments ---------------------------------------------------

_ABLATIONS = {
    "full": {},
    "token_only": {"mention_lstm": False},
    "mention_only": {"token_lstm": False},
    "no_phi_t_b": {"phi_t_b": False},
    "no_phi_b": {"phi_b": False},
}


def _synthetic_split(args):
    from .synthetic import generate_corpus, load_corpus

    train_docs = load_corpus(args.train_corpus) if args.train_corpus else \
        generate_corpus(args.train_docs, seed=args.seed, prefix="train")
    test_docs = load_corpus(args.test_corpus) if args.test_corpus else \
        generate_corpus(args.test_docs, seed=args.seed + 1000, prefix="test")
    return train_docs, test_docs


def cmd_ablate(args) -> int:
    from .evaluation import ablation_run
    from .synthetic import generate_corpus, ranker_evaluator, synthetic_examples

    unknown = [v for v in args.variants if v not in _ABLATIONS]
    if unknown:
        raise UsageError(f"unknown variants {unknown}; choose from {sorted(_ABLATIONS)}")
    train_docs, test_docs = _synthetic_split(args)
    cfg = _model_config(args)
    examples = synthetic_examples(train_docs, cfg.n_tokens, cfg.k_mentions)
    dev = None
    if args.dev_docs:
        dev = synthetic_examples(generate_corpus(args.dev_docs, seed=args.seed + 2000, prefix="dev"),
                                 cfg.n_tokens, cfg.k_mentions)
    seeds = args.seeds or [args.seed]
    report = ablation_run([_ABLATIONS[v] for v in args.variants], examples, ranker_evaluator(test_docs),
                          seeds, cfg, dev_examples=dev)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "ablation.csv").write_text(report.table_csv(), encoding="utf-8")
    (out / "ttests.csv").write_text(report.tests_csv(), encoding="utf-8")
    if args.plot:
        from .plotting import plot_ablation

        plot_ablation(report, out / "ablation.png")
    sys.stdout.write(report.table_csv())
    sys.stdout.write(report.tests_csv())
    if args.max_p is not None and any(p >= args.max_p for _, _, p, _ in report.tests):
        return GATE_FAILED
    return OK


def cmd_compare(args) -> int:
    """Ranker against every baseline on held-out synthetic documents."""
    from .baselines import most_common_chooser, pronoun_chooser, random_chooser, train_tree_ranker, tree_chooser
    from .ranker import load_model, ranker_chooser, train
    from .ranker.provider import get_provider
    from .synthetic import gold_strings, selection_accuracy_by_doc, synthetic_examples

    train_docs, test_docs = _synthetic_split(args)
    cfg = _model_config(args)
    examples = synthetic_examples(train_docs, cfg.n_tokens, cfg.k_mentions)
    provider = get_provider(args.provider)
    model = load_model(args.model, provider) if args.model else train(examples, cfg, provider)
    systems: list[tuple[str, Any]] = [("ranker", lambda sd, c=ranker_chooser(model): c)]
    for variant in ("tree", "forest", "gbt"):
        tree = train_tree_ranker(examples, variant, args.seed, provider)
        systems.append((variant, lambda sd, c=tree_chooser(tree): c))

    def most_common(sd):
        gold = gold_strings(sd)
        return most_common_chooser({c.chain_id: [gold[m.id] for m in c.mentions] for c in sd.document.chains})

    systems += [
        ("most-common", most_common),
        ("pronouns", lambda sd: pronoun_chooser({c.chain_id: sd.gender for c in sd.document.chains})),
        ("random", lambda sd: random_chooser(args.seed)),
    ]
    rows = []
    for name, make in systems:
        per_doc = selection_accuracy_by_doc(test_docs, make, cfg.n_tokens, cfg.k_mentions)
        rows.append((name, sum(per_doc.values()) / len(per_doc)))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", "accuracy"])
    for name, acc in rows:
        w.writerow([name, f"{100 * acc:.2f}"])
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "compare.csv").write_text(buf.getvalue(), encoding="utf-8")
    if args.plot:
        from .plotting import plot_scores

        plot_scores([r[0] for r in rows], [100 * r[1] for r in rows], out / "compare.png", "accuracy (%)")
    sys.stdout.write(buf.getvalue())
    return OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("ranker configuration")
    g.add_argument("--n-tokens", type=int, help="token context size on each side (default 50)")
    g.add_argument("--k-mentions", type=int, help="mention context size on each side (default 10)")
    g.add_argument("--lstm-hidden", type=int, help="LSTM state size (default 50)")
    g.add_argument("--mlp-hidden", type=int, help="hidden layer size (default 100)")
    g.add_argument("--margin", type=float, help="ranking loss margin (default 0.2)")
    g.add_argument("--learning-rate", type=float, help="Adam learning rate (default 1e-3)")
    g.add_argument("--dropout", type=float, help="dropout on the feature vector (default 0.2)")
    g.add_argument("--max-epochs", type=int, help="epoch limit (default 200)")
    g.add_argument("--patience", type=int, help="early-stopping patience in epochs (default 10)")
    g.add_argument("--batch-size", type=int, help="mini-batch size (default 32)")
    g.add_argument("--no-token-lstm", action="store_true", help="drop the token-level encoder")
    g.add_argument("--no-mention-lstm", action="store_true", help="drop the mention-level encoder")
    g.add_argument("--no-phi-t", action="store_true", help="drop the binary features of context mentions")
    g.add_argument("--no-phi-b", action="store_true", help="drop the binary features of the candidate")
    g.add_argument("--provider", default="hash", help="embedding provider: hash, hash:DIM or module:callable")


def _add_synthetic_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-docs", type=int, default=20, help="synthetic training documents to generate")
    p.add_argument("--test-docs", type=int, default=10, help="synthetic held-out documents to generate")
    p.add_argument("--train-corpus", help="use this synthetic corpus file instead of generating one")
    p.add_argument("--test-corpus", help="use this held-out synthetic corpus file instead of generating one")
    p.add_argument("--out-dir", required=True, help="directory for the CSV reports and figures")
    p.add_argument("--plot", action="store_true", help="also render PNG figures next to the CSV files")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--config", help="JSON or key=value file whose values act as flag defaults")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="povshift", description="Change first/second-person narration to third person.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-data", parents=[common], help="ranking examples from CoNLL coreference files")
    p.add_argument("conll", help="CoNLL file or directory (searched for *_conll)")
    p.add_argument("--out", required=True, help="output JSONL of ranking examples")
    p.add_argument("--stats", help="also write a corpus statistics CSV")
    p.add_argument("--n-tokens", type=int, default=50, help="token context size (default 50)")
    p.add_argument("--k-mentions", type=int, default=10, help="mention context size (default 10)")
    p.add_argument("--keep-deictic", action="store_true", help="keep documents with first/second-person chains")
    p.set_defaults(func=cmd_extract_data)

    p = sub.add_parser("stats", parents=[common], help="entity/mention/document/word counts of CoNLL corpora")
    p.add_argument("conll", nargs="+", help="CoNLL files or directories, one table row each")
    p.add_argument("--out", help="write the CSV here as well as to stdout")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic training corpus")
    p.add_argument("--docs", type=int, default=20, help="number of documents (default 20)")
    p.add_argument("--out", required=True, help="output JSONL of documents")
    p.add_argument("--examples", help="also write teacher-forced ranking examples here")
    p.add_argument("--prefix", default="syn", help="document id prefix")
    p.add_argument("--n-tokens", type=int, default=50, help="token context size (default 50)")
    p.add_argument("--k-mentions", type=int, default=10, help="mention context size (default 10)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", parents=[common], help="train the ranker or a tree baseline")
    p.add_argument("examples", help="JSONL of ranking examples")
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--dev", help="JSONL of development examples for early stopping")
    p.add_argument("--baseline", choices=["tree", "forest", "gbt"], help="train a tree baseline instead")
    p.add_argument("--min-train-accuracy", type=float, help="exit 1 when training accuracy ends below this")
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("convert", parents=[common], help="rewrite documents in the third person")
    p.add_argument("inputs", nargs="+", help="document JSON files, or raw text with --gold-annotations/--adapters")
    p.add_argument("--model", help="trained ranker or tree model")
    p.add_argument("--baseline", choices=["random", "pronouns", "most-common", "tree", "forest", "gbt"],
                   help="select mentions with a baseline instead of the ranker")
    p.add_argument("--from-pov", choices=["first", "second"], help="original person of the focus entity")
    p.add_argument("--focus-gender", choices=["feminine", "masculine"], help="gender of the focus entity")
    p.add_argument("--focus-name", help="name of the focus entity, e.g. 'Nick Flynn'")
    p.add_argument("--gold-annotations", help="document JSON whose annotations replace the adapters")
    p.add_argument("--adapters", help="module:callable returning annotation adapters for raw text")
    p.add_argument("--verb-dict", help="TSV verb dictionary replacing the shipped one")
    p.add_argument("--provider", help="embedding provider override")
    p.add_argument("--force", action="store_true", help="accept a provider version that differs from the model's")
    p.add_argument("--jobs", type=int, default=1, help="documents converted in parallel")
    p.add_argument("--out-dir", help="write <doc_id>.json edit lists and <doc_id>.txt texts here")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("evaluate", parents=[common], help="precision/recall/F1 against gold conversions")
    p.add_argument("--pred", nargs="+", required=True, help="conversion result JSON files")
    p.add_argument("--gold", nargs="+", required=True, help="gold result or gold-annotated document JSON files")
    p.add_argument("--out", help="JSON report")
    p.add_argument("--csv", help="per-document CSV report")
    p.add_argument("--plot", action="store_true", help="render a PNG next to the CSV")
    p.add_argument("--min-f1", type=float, help="exit 1 when the corpus F1 is below this")
    p.add_argument("--jobs", type=int, default=1, help="accepted for symmetry with convert; scoring is cheap")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score-human-eval", parents=[common], help="referential and naturalness scores from ratings")
    p.add_argument("ratings", help="CSV with header worker,sentence,mention,amb,correct,nat")
    p.add_argument("--out-dir", required=True, help="directory for summary.json and sentences.csv")
    p.add_argument("--plot", action="store_true", help="render the per-sentence scatter plot")
    p.set_defaults(func=cmd_score_human_eval)

    p = sub.add_parser("ablate", parents=[common], help="train ranker variants on synthetic data and t-test them")
    p.add_argument("--variants", nargs="+", default=["full", "token_only"],
                   help=f"systems to train, first is the reference ({', '.join(_ABLATIONS)})")
    p.add_argument("--seeds", type=int, nargs="+", help="training seeds (default: --seed)")
    p.add_argument("--dev-docs", type=int, default=0, help="synthetic development documents for early stopping")
    p.add_argument("--max-p", type=float, help="exit 1 when a t-test p-value is not below this")
    _add_synthetic_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("compare", parents=[common], help="ranker against all baselines on synthetic data")
    p.add_argument("--model", help="use this trained ranker instead of training one")
    _add_synthetic_flags(p)
    _add_model_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            overlay = load_config(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in subparser._actions}
        unknown = sorted(set(overlay) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        subparser.set_defaults(**overlay)
        args = parser.parse_args(argv)  # flags given on the command line win
    return args


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"povshift: error: {exc}", file=sys.stderr)
        return USAGE
    except SystemExit as exc:  # argparse reports usage errors this way
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    import numpy as np
    import torch

    torch.set_num_threads(1)
    torch.manual_seed(args.seed)
    np.random.seed(args.seed)
    from .ingest import ConllParseError, PovLoadError
    from .ranker.model import ModelError

    try:
        return args.func(args)
    except (UsageError, OSError, ConllParseError, PovLoadError, ModelError, ValueError) as exc:
        # library validation raises ValueError on bad input data
        print(f"povshift: error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
