"""Command-line entry point.

Subcommands: ``simulate``, ``extract-features``, ``train {dla, naive, dla-lc,
negsample, gbdt}``, ``correct-labels``, ``evaluate`` and ``report``.

Recipes and simulation specs are ``key = value`` text files. Effective
settings resolve as built-in defaults, then the file, then ``--set key=value``
flags, then dedicated flags such as ``--lr`` or ``--seed``. Input files default
to fixed names inside the data directory (``--data-dir``, else the
``ULTRLAB_DATA_DIR`` environment variable, else the working directory).

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import corpus_io as cio
from .datasets import ListData, click_lists, compute_features, features_from_rows, feature_rows, graded_lists
from .dla import DLARanker
from .gbdt import FEATURE_SETS, LambdaMART, add_model_score
from .labelfix import MODES, correct_label_matrix
from .metrics import evaluate_run
from .negsample import NegSpec, reconstruct_all, reconstructed_data
from .nnrank import NeuralRanker, load_checkpoint
from .simulate import SimSpec, simulate
from .textfeat import build_index

log = logging.getLogger("ultrlab")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
DATA_DIR_ENV = "ULTRLAB_DATA_DIR"
LR_RANGE = (2e-6, 1e-5)
METHODS = ("dla", "naive", "dla-lc", "negsample", "gbdt")
NEURAL = ("dla", "naive", "dla-lc", "negsample")

FILES = {
    "docs": "docs.jsonl",
    "queries": "queries.jsonl",
    "clicks": "clicks.jsonl",
    "truth": "truth.txt",
    "pairs": "pairs.txt",
    "splits": "splits.tsv",
    "features": "features.letor",
    "ideal_run": "ideal.run",
}

_NEURAL_DEFAULTS = {
    "learning_rate": 5e-6,
    "weight_decay": 0.01,
    "batch_size": 16,
    "max_epochs": 50,
    "patience": 5,
}
_DLA_DEFAULTS = {**_NEURAL_DEFAULTS, "propensity_learning_rate": None, "ipw_cap": 10.0}
DEFAULTS = {
    "dla": _DLA_DEFAULTS,
    "naive": dict(_NEURAL_DEFAULTS),
    "dla-lc": {**_DLA_DEFAULTS, "init": "scratch", "mode": "sig"},
    "negsample": {**_NEURAL_DEFAULTS, "scheme": "click_only", "n_hard": 50, "n_random": 0, "pool_size": 200},
    "gbdt": {
        "n_trees": 300,
        "max_depth": 4,
        "min_leaf_samples": 5,
        "learning_rate": 0.2,
        "l2_leaf": 1e-3,
        "train_fraction": 0.8,
        "early_stopping_rounds": 30,
        "feature_set": "base",
    },
}
_COMMON = {"seed": 0, "allow_any_lr": False}


class UsageError(Exception):
    """Bad command line or recipe; maps to exit code 2."""


# --------------------------------------------------------------------------
# key=value files


def coerce_value(text: str):
    """Parse a recipe value: none, bool, int, float, comma list, else string."""
    text = text.strip()
    low = text.lower()
    if low in ("none", "null", ""):
        return None
    if low in ("true", "yes"):
        return True
    if low in ("false", "no"):
        return False
    if "," in text:
        return tuple(coerce_value(t) for t in text.split(","))
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def parse_kv(text: str, source: str = "<recipe>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if not key:
            raise UsageError(f"{source}:{lineno}: empty key")
        if key in out:
            raise UsageError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = coerce_value(value)
    return out


def read_kv_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_kv(fh.read(), str(path))


def format_kv(d: dict) -> str:
    def fmt(v):
        if isinstance(v, (tuple, list)):
            return ",".join(fmt(x) for x in v)
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        return repr(v) if isinstance(v, float) else str(v)

    return "".join(f"{k} = {fmt(v)}\n" for k, v in sorted(d.items()))


def _set_pairs(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip().replace("-", "_")] = coerce_value(v)
    return out


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _write_jsonl(path, records):
    cio.atomic_write_text(path, "".join(_dump_json(r) + "\n" for r in records))


# --------------------------------------------------------------------------
# recipes


def resolve_recipe(method, file_values=None, overrides=None) -> dict:
    """Merge defaults, file values and overrides; validate keys and ranges."""
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    recipe = {**_COMMON, **DEFAULTS[method]}
    for source in (file_values or {}, overrides or {}):
        for k, v in source.items():
            if k == "method":
                if v != method:
                    raise UsageError(f"recipe is for method {v!r}, not {method!r}")
                continue
            if k not in recipe:
                raise UsageError(f"unknown recipe key {k!r} for method {method}")
            recipe[k] = v
    _validate_recipe(method, recipe)
    return recipe


def _validate_recipe(method, r):
    def need(cond, msg):
        if not cond:
            raise UsageError(f"invalid recipe: {msg}")

    need(isinstance(r["seed"], int) and r["seed"] >= 0, "seed must be a non-negative integer")
    need(isinstance(r["allow_any_lr"], bool), "allow_any_lr must be true or false")
    lr = r["learning_rate"]
    need(isinstance(lr, (int, float)) and lr > 0, "learning_rate must be positive")
    if method in NEURAL:
        lo, hi = LR_RANGE
        need(r["allow_any_lr"] or lo <= lr <= hi, f"learning_rate {lr} outside [{lo}, {hi}] (use --allow-any-lr)")
        plr = r.get("propensity_learning_rate")
        need(plr is None or (isinstance(plr, (int, float)) and plr > 0), "propensity_learning_rate must be positive")
        for key in ("batch_size", "max_epochs", "patience"):
            need(isinstance(r[key], int) and r[key] >= 1, f"{key} must be a positive integer")
        need(isinstance(r["weight_decay"], (int, float)) and r["weight_decay"] >= 0, "weight_decay must be >= 0")
    if "ipw_cap" in r:
        need(isinstance(r["ipw_cap"], (int, float)) and r["ipw_cap"] >= 1, "ipw_cap must be >= 1")
    if method == "dla-lc":
        need(r["init"] in ("scratch", "aux"), "init must be scratch or aux")
        need(r["mode"] in MODES, f"mode must be one of {MODES}")
    if method == "negsample":
        try:
            NegSpec(r["scheme"], r["n_hard"], r["n_random"], r["seed"], r["pool_size"])
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid recipe: {exc}") from None
        r["scheme"] = r["scheme"].replace("-", "_")
    if method == "gbdt":
        fs = {"add": "base_plus_model_score"}.get(r["feature_set"], r["feature_set"])
        need(fs in FEATURE_SETS, f"feature_set must be one of {FEATURE_SETS} or 'add'")
        r["feature_set"] = fs
        need(isinstance(r["n_trees"], int) and r["n_trees"] >= 1, "n_trees must be >= 1")


def recipe_hash(method, recipe) -> str:
    body = {k: v for k, v in recipe.items() if k != "seed"}
    return hashlib.sha256((method + "\n" + format_kv(body)).encode("utf-8")).hexdigest()[:10]


def run_dir_name(method, recipe) -> str:
    return f"{method}-{recipe_hash(method, recipe)}-seed{recipe['seed']}"


# --------------------------------------------------------------------------
# data loading


def _data_dir(args):
    return args.data_dir or os.environ.get(DATA_DIR_ENV) or "."


def _path(args, key):
    given = getattr(args, key, None)
    return given if given else os.path.join(_data_dir(args), FILES[key])


def _load_inputs(args, need=("clicks", "features", "truth", "splits")):
    out = {}
    if "clicks" in need:
        out["logs"] = cio.load_click_log(_path(args, "clicks"))
    if "features" in need:
        out["features"] = features_from_rows(cio.load_letor(_path(args, "features")))
    if "truth" in need:
        out["truth"] = cio.load_truth(_path(args, "truth"))
    if "splits" in need:
        out["splits"] = cio.load_splits(_path(args, "splits"))
    return out


def _split_qids(splits, logs, name):
    return [log.qid for log in logs if splits.get(log.qid) == name]


def _graded(inputs, split) -> ListData:
    logs = inputs["logs"]
    qids = _split_qids(inputs["splits"], logs, split)
    lists = {log.qid: list(log.ranked_docs) for log in logs}
    return graded_lists(lists, inputs["truth"], inputs["features"], qids)


def _scores_to_run(data: ListData, scores) -> dict:
    scores = np.asarray(scores).reshape(len(data), -1)
    return {q: dict(zip(docs, map(float, s))) for q, docs, s in zip(data.qids, data.doc_ids, scores)}


def _neural_params(recipe, cls):
    keys = ["learning_rate", "weight_decay", "batch_size", "max_epochs", "patience"]
    if cls is DLARanker:
        keys += ["propensity_learning_rate", "ipw_cap"]
    params = {k: recipe[k] for k in keys}
    params["random_state"] = recipe["seed"]
    return params


def _load_ranker(path):
    """Neural checkpoint as the class recorded in its metadata."""
    _, _, _, meta = load_checkpoint(path)
    cls = DLARanker if meta.get("class") == "DLARanker" else NeuralRanker
    return cls.load(path)


# --------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    values = read_kv_file(args.spec) if args.spec else {}
    values.update(_set_pairs(args.set))
    if args.seed is not None:
        values["seed"] = args.seed
    try:
        spec = SimSpec.from_dict(values)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid spec: {exc}") from None
    corpus, logs = simulate(spec)
    out = args.out_dir or _data_dir(args)
    os.makedirs(out, exist_ok=True)
    cio.write_documents(corpus.docs, os.path.join(out, FILES["docs"]))
    cio.write_queries(corpus.queries, os.path.join(out, FILES["queries"]))
    cio.write_click_log(logs, os.path.join(out, FILES["clicks"]))
    cio.write_truth(corpus.truth, os.path.join(out, FILES["truth"]))
    cio.write_pairs(((q, d, g) for (q, d), g in corpus.truth.items()), os.path.join(out, FILES["pairs"]))
    cio.write_splits(corpus.splits, os.path.join(out, FILES["splits"]))
    ideal = {q: {d: float(corpus.truth[(q, d)]) for d in docs} for q, docs in corpus.lists.items()}
    cio.write_run_file(ideal, os.path.join(out, FILES["ideal_run"]), tag="ideal")
    cio.atomic_write_text(os.path.join(out, "spec.txt"), format_kv(spec.to_dict()))
    print(out)
    return EXIT_OK


def cmd_extract_features(args):
    queries = cio.load_queries(_path(args, "queries"))
    docs = cio.load_documents(_path(args, "docs"))
    pairs = cio.load_pairs(_path(args, "pairs"))
    known = {q.qid for q in queries}
    for q, _, _ in pairs:
        if q not in known:
            raise ValueError(f"pair refers to unknown query {q!r}")
    index = build_index(docs)
    feats = compute_features(queries, index, [(q, d) for q, d, _ in pairs], args.threads)
    labels = {(q, d): g for q, d, g in pairs}
    out = args.out or os.path.join(_data_dir(args), FILES["features"])
    cio.write_letor(feature_rows(feats, labels), out)
    print(out)
    return EXIT_OK


def _train_neural(method, recipe, args, inputs):
    logs, splits = inputs["logs"], inputs["splits"]
    train_q = _split_qids(splits, logs, "train")
    if not train_q:
        raise ValueError("no training queries in the splits file")
    valid = _graded(inputs, "valid")
    eval_set = (valid.X, valid.y) if len(valid) else None
    D = click_lists(logs, inputs["features"], train_q)
    summary = {}

    if method == "naive":
        model = NeuralRanker(**_neural_params(recipe, NeuralRanker)).fit(D.X, D.y, eval_set=eval_set)
    elif method == "dla":
        model = DLARanker(**_neural_params(recipe, DLARanker)).fit(D.X, D.y, eval_set=eval_set)
    elif method == "dla-lc":
        params = _neural_params(recipe, DLARanker)
        if args.labels:
            by_qid = {item.qid: item for item in cio.load_labeled_lists(args.labels)}
            missing = [q for q in D.qids if q not in by_qid]
            if missing:
                raise ValueError(f"labels file lacks query {missing[0]!r}")
            labels = np.array([by_qid[q].labels for q in D.qids], dtype=float)
            eligible = np.array([by_qid[q].propensity_eligible for q in D.qids], dtype=float)
        elif args.aux:
            labels, eligible = correct_label_matrix(_load_ranker(args.aux).predict(D.X), D.y, recipe["mode"])
        else:
            raise ValueError("missing auxiliary checkpoint (--aux) or corrected labels (--labels)")
        if recipe["init"] == "aux":
            if not args.aux:
                raise ValueError("missing auxiliary checkpoint (--aux) for init=aux")
            aux = DLARanker.load(args.aux, **params)
            model = copy.deepcopy(aux)
            model.set_params(warm_start=True)
        else:
            model = DLARanker(**params)
        model.fit(D.X, labels, eligible=eligible, eval_set=eval_set)
    else:
        queries = {q.qid: q.text for q in cio.load_queries(_path(args, "queries"))}
        index = build_index(cio.load_documents(_path(args, "docs")))
        spec = NegSpec(recipe["scheme"], recipe["n_hard"], recipe["n_random"], recipe["seed"], recipe["pool_size"])
        train_set = set(train_q)
        train_logs = [log for log in logs if log.qid in train_set]
        lists, skipped = reconstruct_all(train_logs, queries, index, spec, args.threads)
        data = reconstructed_data(lists, queries, index, inputs["features"], args.threads)
        model = NeuralRanker(**_neural_params(recipe, NeuralRanker)).fit(data.X, data.y, eval_set=eval_set)
        summary.update(n_skipped=skipped, n_lists=len(lists), list_len=spec.list_len)

    if isinstance(model, DLARanker):
        summary["propensity_ratios"] = [float(v) for v in model.propensity_ratios_]
    summary["best_epoch"] = int(model.best_epoch_)
    return model, model.history_, summary


def _train_gbdt(recipe, args, inputs):
    logs = inputs["logs"]
    valid = _graded(inputs, "valid")
    if len(valid) < 2:
        raise ValueError("gbdt needs at least 2 annotated (valid split) queries")
    scorer = None
    if recipe["feature_set"] == "base_plus_model_score":
        if not args.model_score_ckpt:
            raise ValueError("feature_set=base_plus_model_score needs --model-score-ckpt")
        scorer = _load_ranker(args.model_score_ckpt)

    def rows(data):
        X = data.X.reshape(-1, data.X.shape[-1])
        if scorer is not None:
            X = add_model_score(X, scorer.predict(data.X).ravel())
        return X

    qid = np.repeat(valid.qids, valid.X.shape[1])
    params = {k: recipe[k] for k in DEFAULTS["gbdt"] if k != "feature_set"}
    model = LambdaMART(random_state=recipe["seed"], **params).fit(rows(valid), valid.y.ravel(), qid)
    summary = {"best_iteration": model.best_iteration_, "holdout_ndcg@10": getattr(model, "best_score_", None)}
    return model, model.history_, summary, rows


def cmd_train(args):
    method = args.method
    file_values = read_kv_file(args.recipe) if args.recipe else {}
    overrides = _set_pairs(args.set)
    for flag, key in (("lr", "learning_rate"), ("seed", "seed"), ("mode", "mode"), ("init", "init"),
                      ("scheme", "scheme"), ("n_hard", "n_hard"), ("n_random", "n_random"),
                      ("feature_set", "feature_set")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    if args.allow_any_lr:
        overrides["allow_any_lr"] = True
    recipe = resolve_recipe(method, file_values, overrides)

    inputs = _load_inputs(args)
    run_dir = os.path.join(args.runs_dir or os.path.join(_data_dir(args), "runs"), run_dir_name(method, recipe))
    os.makedirs(run_dir, exist_ok=True)

    if method == "gbdt":
        model, history, summary, rows = _train_gbdt(recipe, args, inputs)
        model.save(os.path.join(run_dir, "model.gbdt"))

        def predict(data):
            return model.predict(rows(data))

    else:
        model, history, summary = _train_neural(method, recipe, args, inputs)
        model.save(os.path.join(run_dir, "model.ckpt"))

        def predict(data):
            return model.predict(data.X)

    metrics = {"method": method, "seed": recipe["seed"], "recipe_hash": recipe_hash(method, recipe)}
    for key in ("scheme", "n_hard", "n_random", "mode", "init", "feature_set"):
        if key in recipe:
            metrics[key] = recipe[key]
    metrics.update(summary)
    for split in ("valid", "test"):
        data = _graded(inputs, split)
        if not len(data):
            continue
        run = _scores_to_run(data, predict(data))
        path = os.path.join(run_dir, f"{split}.run")
        cio.write_run_file(run, path, tag=method)
        s, _ = evaluate_run(run, inputs["truth"], 10)
        metrics[f"{split}_ndcg@10"] = s["ndcg@10"]
        metrics[f"{split}_dcg@10"] = s["dcg@10"]
    cio.atomic_write_text(os.path.join(run_dir, "recipe.txt"), f"method = {method}\n" + format_kv(recipe))
    _write_jsonl(os.path.join(run_dir, "history.jsonl"), history)
    cio.atomic_write_text(os.path.join(run_dir, "metrics.json"), _dump_json(metrics) + "\n")
    print(run_dir)
    return EXIT_OK


def cmd_correct_labels(args):
    if args.mode not in MODES:
        raise UsageError(f"mode must be one of {MODES}")
    if not os.path.exists(args.ckpt):
        raise FileNotFoundError(f"missing auxiliary checkpoint {args.ckpt}")
    aux = _load_ranker(args.ckpt)
    logs = cio.load_click_log(_path(args, "clicks"))
    if args.split:
        splits = cio.load_splits(_path(args, "splits"))
        logs = [log for log in logs if splits.get(log.qid) == args.split]
    features = features_from_rows(cio.load_letor(_path(args, "features")))
    D = click_lists(logs, features)
    labels, eligible = correct_label_matrix(aux.predict(D.X), D.y, args.mode)
    items = [
        cio.LabeledList(q, docs, lab.tolist(), el.astype(int).tolist())
        for q, docs, lab, el in zip(D.qids, D.doc_ids, labels, eligible)
    ]
    cio.write_labeled_lists(items, args.out)
    print(args.out)
    return EXIT_OK


def cmd_evaluate(args):
    run = cio.load_run_file(args.run)
    truth = cio.load_truth(_path(args, "truth"))
    if args.k < 1:
        raise UsageError("--k must be >= 1")
    summary, per_query = evaluate_run(run, truth, args.k)
    records = [{"type": "summary", **summary}] + [{"type": "query", **r} for r in per_query]
    if args.out:
        _write_jsonl(args.out, records)
    else:
        sys.stdout.write("".join(_dump_json(r) + "\n" for r in records))
    return EXIT_OK


def _collect_runs(paths):
    runs = []
    for p in paths:
        candidates = [p] if os.path.exists(os.path.join(p, "metrics.json")) else [
            os.path.join(p, d) for d in sorted(os.listdir(p)) if os.path.exists(os.path.join(p, d, "metrics.json"))
        ]
        for c in candidates:
            with open(os.path.join(c, "metrics.json"), encoding="utf-8") as fh:
                runs.append((os.path.basename(os.path.normpath(c)), json.load(fh)))
    return sorted(runs, key=lambda r: (r[1].get("method", ""), r[0]))


def _fmt(v):
    return "-" if v is None else f"{v:.4f}" if isinstance(v, float) else str(v)


def render_report(runs, fmt="text") -> str:
    cols = ["run", "method", "seed", "valid_ndcg@10", "test_ndcg@10", "test_dcg@10"]
    rows = [[name] + [m.get(c) for c in cols[1:]] for name, m in runs]
    sweep = sorted(
        (m.get("scheme"), m.get("n_hard"), m.get("n_random"), m.get("seed"), m.get("valid_ndcg@10"))
        for _, m in runs
        if m.get("method") == "negsample"
    )
    sweep_cols = ["scheme", "n_hard", "n_random", "seed", "valid_ndcg@10"]
    if fmt == "csv":
        lines = [",".join(cols)] + [",".join(_fmt(v) for v in r) for r in rows]
        if sweep:
            lines += ["", ",".join(sweep_cols)] + [",".join(_fmt(v) for v in r) for r in sweep]
        return "\n".join(lines) + "\n"
    table = [cols] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(cols))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table]
    if sweep:
        lines += ["", "negative-sampling sweep (valid nDCG@10 by n_hard)"]
        for scheme in sorted({s[0] for s in sweep}):
            pts = [f"{r[1]}:{_fmt(r[4])}" for r in sweep if r[0] == scheme]
            lines.append(f"  {scheme}: " + " ".join(pts))
    return "\n".join(lines) + "\n"


def cmd_report(args):
    paths = args.runs or [args.runs_dir or os.path.join(_data_dir(args), "runs")]
    for p in paths:
        if not os.path.isdir(p):
            raise FileNotFoundError(f"no such run directory: {p}")
    text = render_report(_collect_runs(paths), args.format)
    if args.out:
        cio.atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--data-dir", help=f"default input/output directory (env {DATA_DIR_ENV})")
    common.add_argument("--seed", type=int, help="seed for all randomness")
    common.add_argument("--threads", type=int, default=1, help="worker threads")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="ultrlab", description="Unbiased learning-to-rank laboratory.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("simulate", parents=[common], help="generate a synthetic corpus and click log")
    s.add_argument("--spec", help="key = value simulation spec")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("--out-dir")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("extract-features", parents=[common], help="write the 24 LETOR features per pair")
    for key in ("queries", "docs", "pairs"):
        s.add_argument(f"--{key}")
    s.add_argument("--out")
    s.set_defaults(func=cmd_extract_features)

    s = sub.add_parser("train", parents=[common], help="train a ranker")
    s.add_argument("method", choices=METHODS)
    s.add_argument("--recipe", help="key = value recipe file")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.add_argument("--lr", type=float)
    s.add_argument("--allow-any-lr", action="store_true")
    s.add_argument("--mode", choices=MODES)
    s.add_argument("--init", choices=("scratch", "aux"))
    s.add_argument("--scheme", choices=("click-only", "last-click", "click_only", "last_click"))
    s.add_argument("--n-hard", type=int)
    s.add_argument("--n-random", type=int)
    s.add_argument("--feature-set", choices=("base", "add", "base_plus_model_score"))
    s.add_argument("--aux", help="auxiliary DLA checkpoint (dla-lc)")
    s.add_argument("--labels", help="corrected labels file (dla-lc)")
    s.add_argument("--model-score-ckpt", help="neural checkpoint scored as an extra feature (gbdt)")
    for key in ("clicks", "features", "truth", "splits", "queries", "docs"):
        s.add_argument(f"--{key}")
    s.add_argument("--runs-dir")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("correct-labels", parents=[common], help="relabel non-clicked items with an auxiliary model")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--mode", default="sig", choices=MODES)
    s.add_argument("--clicks")
    s.add_argument("--features")
    s.add_argument("--splits")
    s.add_argument("--split", help="restrict to one split, e.g. train")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_correct_labels)

    s = sub.add_parser("evaluate", parents=[common], help="nDCG@k and DCG@k of a run file")
    s.add_argument("--run", required=True)
    s.add_argument("--truth")
    s.add_argument("--k", type=int, default=10)
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", parents=[common], help="comparison table and sweep summary")
    s.add_argument("runs", nargs="*", help="run directories or parents of run directories")
    s.add_argument("--runs-dir")
    s.add_argument("--format", choices=("text", "csv"), default="text")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"ultrlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    if args.threads < 1:
        print("ultrlab: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ultrlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, KeyError, FloatingPointError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"ultrlab: {type(exc).__name__}: {msg}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
