"""Command-line pipeline: build artifacts, serve, query, evaluate.

Every subcommand accepts ``--config``; flags override the config file.
Data files are line-delimited JSON throughout.
"""

from __future__ import annotations

import json
import sys

import click

from .cache import save_cache, warm_cache
from .engine import Engine, EngineConfig, load_config
from .errors import AdIntentError
from .evaluate import DEFAULT_DEPTH, load_eval_dataset, run_eval
from .index import assign_cis_to_ad, build_index, load_ads, save_index
from .report import write_report
from .scorer import fit_ngram_scorer, load_scorer, save_scorer
from .trie import load_ci_set, save_ci_set
from .vocab import build_vocab, load_vocab, save_vocab, tokenize


def _config(path: str | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    try:
        return load_config(path)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))


def _require(flag_value: str | None, config_value: str | None, name: str) -> str:
    value = flag_value or config_value
    if value is None:
        raise click.UsageError(f"no {name} given (pass the flag or set it in --config)")
    return value


def _read_texts(path: str) -> list[str]:
    texts = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                texts.append(json.loads(line)["text"])
    return texts


@click.group()
def main():
    """Generative ad retrieval over a fixed commercial-intention set."""


@main.command("build-vocab")
@click.option("--cis", "cis_path", type=click.Path(), help="intention set (JSONL)")
@click.option("--out", "out_path", type=click.Path(), help="vocabulary output file")
@click.option("--scheme", default=None, help="unicode-word (default) or whitespace")
@click.option("--config", "config_path", type=click.Path(), default=None)
def build_vocab_cmd(cis_path, out_path, scheme, config_path):
    """Build the token vocabulary from the intention corpus."""
    cfg = _config(config_path)
    cis_path = _require(cis_path, cfg.ci_set_path, "intention set path")
    out_path = _require(out_path, cfg.vocab_path, "vocabulary output path")
    try:
        vocab = build_vocab(_read_texts(cis_path), scheme or cfg.tokenization)
        save_vocab(vocab, out_path)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote {vocab.size} tokens (2 reserved) to {out_path}")


@main.command("fit-scorer")
@click.option("--pairs", "pairs_path", type=click.Path(), required=True,
              help='training pairs JSONL: {"context", "ci"}')
@click.option("--vocab", "vocab_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path())
@click.option("--order", default=2, show_default=True)
@click.option("--alpha", default=0.1, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
def fit_scorer_cmd(pairs_path, vocab_path, out_path, order, alpha, config_path):
    """Fit the count-based scorer on (context, intention) click pairs."""
    cfg = _config(config_path)
    vocab_path = _require(vocab_path, cfg.vocab_path, "vocabulary path")
    out_path = _require(out_path, cfg.scorer_path, "scorer output path")
    try:
        vocab = load_vocab(vocab_path, scheme=cfg.tokenization)
        pairs = []
        with open(pairs_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                pairs.append((rec["context"], tokenize(rec["ci"], vocab)))
        scorer = fit_ngram_scorer(pairs, order, alpha, vocab)
        save_scorer(scorer, out_path)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"fitted order-{order} scorer on {len(pairs)} pairs -> {out_path}")


@main.command("build-trie")
@click.option("--cis", "cis_path", type=click.Path(), help="raw intention set (JSONL)")
@click.option("--vocab", "vocab_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path(),
              help="canonical intention set with assigned ids")
@click.option("--min-support", default=1, show_default=True,
              help="drop intentions occurring on fewer input lines")
@click.option("--config", "config_path", type=click.Path(), default=None)
def build_trie_cmd(cis_path, vocab_path, out_path, min_support, config_path):
    """Normalize, deduplicate, and id-assign the intention set."""
    cfg = _config(config_path)
    vocab_path = _require(vocab_path, cfg.vocab_path, "vocabulary path")
    cis_path = _require(cis_path, None, "intention set path")
    out_path = _require(out_path, cfg.ci_set_path, "canonical output path")
    try:
        vocab = load_vocab(vocab_path, scheme=cfg.tokenization)
        trie = load_ci_set(cis_path, vocab, min_support=min_support)
        save_ci_set(trie, out_path)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"{trie.ci_count} intentions, max depth {trie.max_depth}, "
        f"version {trie.version} -> {out_path}"
    )


@main.command("assign-cis")
@click.option("--ads", "ads_path", type=click.Path(), required=True)
@click.option("--vocab", "vocab_path", type=click.Path())
@click.option("--cis", "cis_path", type=click.Path())
@click.option("--scorer", "scorer_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--cap", default=None, type=int, help="max intentions per ad")
@click.option("--profile", default="offline", type=click.Choice(["offline", "online"]),
              show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
def assign_cis_cmd(ads_path, vocab_path, cis_path, scorer_path, out_path, cap,
                   profile, config_path):
    """Decode intention assignments for a batch of ads."""
    cfg = _config(config_path)
    vocab_path = _require(vocab_path, cfg.vocab_path, "vocabulary path")
    cis_path = _require(cis_path, cfg.ci_set_path, "intention set path")
    scorer_path = _require(scorer_path, cfg.scorer_path, "scorer path")
    cap = cap if cap is not None else cfg.assign_cap
    params = cfg.offline if profile == "offline" else cfg.online
    try:
        vocab = load_vocab(vocab_path, scheme=cfg.tokenization)
        trie = load_ci_set(cis_path, vocab)
        scorer = load_scorer(scorer_path, vocab)
        ads = load_ads(ads_path)
        with open(out_path, "w", encoding="utf-8") as fh:
            for ad in ads:
                cis = assign_cis_to_ad(ad, scorer, trie, params, cap)
                fh.write(json.dumps({"ad_id": ad.ad_id, "ci_ids": cis}) + "\n")
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"assigned intentions for {len(ads)} ads -> {out_path}")


@main.command("build-index")
@click.option("--assignments", "assignments_path", type=click.Path(), required=True)
@click.option("--vocab", "vocab_path", type=click.Path())
@click.option("--cis", "cis_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
def build_index_cmd(assignments_path, vocab_path, cis_path, out_path, config_path):
    """Build the intention -> ads inverted index from assignments."""
    cfg = _config(config_path)
    vocab_path = _require(vocab_path, cfg.vocab_path, "vocabulary path")
    cis_path = _require(cis_path, cfg.ci_set_path, "intention set path")
    out_path = _require(out_path, cfg.index_path, "index output path")
    try:
        vocab = load_vocab(vocab_path, scheme=cfg.tokenization)
        trie = load_ci_set(cis_path, vocab)
        assignments = []
        with open(assignments_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                assignments.append((rec["ad_id"], rec["ci_ids"]))
        index = build_index(assignments, trie.version, trie.ci_count)
        save_index(index, out_path)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"indexed {index.ad_count} ads over {len(index.postings)} intentions "
        f"-> {out_path}"
    )


@main.command("warm-cache")
@click.option("--head", "head_path", type=click.Path(), required=True,
              help='head queries JSONL: {"query", "freq"}')
@click.option("--vocab", "vocab_path", type=click.Path())
@click.option("--cis", "cis_path", type=click.Path())
@click.option("--scorer", "scorer_path", type=click.Path())
@click.option("--out", "out_path", type=click.Path())
@click.option("--min-freq", default=0.0, show_default=True)
@click.option("--built-at", default=None, help="pin the snapshot timestamp")
@click.option("--config", "config_path", type=click.Path(), default=None)
def warm_cache_cmd(head_path, vocab_path, cis_path, scorer_path, out_path,
                   min_freq, built_at, config_path):
    """Decode head queries with the offline profile and freeze the cache."""
    cfg = _config(config_path)
    vocab_path = _require(vocab_path, cfg.vocab_path, "vocabulary path")
    cis_path = _require(cis_path, cfg.ci_set_path, "intention set path")
    scorer_path = _require(scorer_path, cfg.scorer_path, "scorer path")
    out_path = _require(out_path, cfg.cache_path, "cache output path")
    try:
        vocab = load_vocab(vocab_path, scheme=cfg.tokenization)
        trie = load_ci_set(cis_path, vocab)
        scorer = load_scorer(scorer_path, vocab)
        head = []
        with open(head_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                head.append((rec["query"], float(rec.get("freq", 1.0))))
        cache = warm_cache(
            head, scorer, trie, cfg.offline, min_freq=min_freq, built_at=built_at
        )
        save_cache(cache, out_path)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    click.echo(
        f"warmed {len(cache)} queries ({len(cache.skipped)} skipped) -> {out_path}"
    )


@main.command("query")
@click.option("--q", "query_text", required=True)
@click.option("--top-k", default=None, type=int)
@click.option("--config", "config_path", type=click.Path(), required=True)
def query_cmd(query_text, top_k, config_path):
    """One-shot retrieval; prints the result as JSON."""
    cfg = _config(config_path)
    try:
        engine = Engine.from_config(cfg)
        result = engine.retrieve(query_text, top_k)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    click.echo(json.dumps(result.to_dict(), indent=2))


@main.command("serve")
@click.option("--bind", default="127.0.0.1:8000", show_default=True)
@click.option("--config", "config_path", type=click.Path(), required=True)
def serve_cmd(bind, config_path):
    """Run the HTTP retrieval service."""
    from .service import serve

    cfg = _config(config_path)
    try:
        engine = Engine.from_config(cfg)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    serve(engine, bind)


@main.command("eval")
@click.option("--dataset", "dataset_path", type=click.Path(), required=True,
              help='eval dataset JSONL: {"query", "relevant_ad_ids"}')
@click.option("--out-dir", default="reports", show_default=True)
@click.option("--depth", default=DEFAULT_DEPTH, show_default=True)
@click.option("--ks", default="50,100,500", show_default=True)
@click.option("--figures/--no-figures", default=True, show_default=True)
@click.option("--config", "config_path", type=click.Path(), required=True)
def eval_cmd(dataset_path, out_dir, depth, ks, figures, config_path):
    """Evaluate retrieval quality and write report.json/report.txt/figures."""
    cfg = _config(config_path)
    try:
        engine = Engine.from_config(cfg)
        dataset = load_eval_dataset(dataset_path)
        report = run_eval(engine, dataset, ks=[int(k) for k in ks.split(",")], depth=depth)
        paths = write_report(report, out_dir, figures=figures)
    except AdIntentError as exc:
        raise click.ClickException(str(exc))
    for k in sorted(report.hr):
        click.echo(f"hr@{k}: {report.hr[k]:.4f}")
    click.echo(f"map: {report.mean_ap:.4f}")
    click.echo(f"acr: {report.acr:.4f}")
    click.echo(f"report -> {paths['json']}")


if __name__ == "__main__":
    sys.exit(main())
