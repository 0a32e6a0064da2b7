"""Command-line entry point: generate/split data, render/parse templates,
train models, evaluate, run experiments, and turn metrics into plot data.

Conventions: stdout carries data only, diagnostics go to stderr; exit code 0
on success, 2 for configuration/usage errors, 3 for runtime failures. Every
run's randomness funnels through one root seed, which is printed if it was
defaulted rather than given. Flags win over ``--config`` file values;
CAREERSEQ_SEED is honored only when --seed is absent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import evaluation as ev
from . import experiments as ex
from .corpus import Dataset, dump_jsonl, load_jsonl, split_dataset, summarize
from .models import (
    CareerConfig,
    CareerModel,
    EmpiricalModel,
    LmOccupationAdapter,
    MnlFitConfig,
    MnlModel,
    PrevCovariatesFeaturizer,
    PrevOccupationFeaturizer,
    TokenLM,
    TokenLmConfig,
    config_hash,
    load_checkpoint,
    load_token_lm,
    paper_preset,
    save_token_lm,
)
from .synthetic import GeneratorParams, OracleModel, SyntheticConfig, generate_synthetic
from .taxonomy import FORMAT_HEADER, OccupationTaxonomy
from .template import NumericTitleMap, TemplateCodec, TemplateConfig
from .tokenizer import train_template_vocab
from .training import LrSchedule, OptimizerConfig, train_career, train_token_lm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class CliError(ValueError):
    pass


def entry() -> None:
    sys.exit(main(sys.argv[1:]))


def main(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help, 2 for usage errors
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        _apply_config_file(args, argv)
        args.seed = _resolve_seed(args)
        args.func(args)
        return EXIT_OK
    except (CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _resolve_seed(args) -> int:
    seed = getattr(args, "seed", None)
    if seed is None:
        env = os.environ.get("CAREERSEQ_SEED")
        seed = int(env) if env else 0
        print(f"seed not given; using {seed}", file=sys.stderr)
    return int(seed)


def _apply_config_file(args, argv) -> None:
    """Fill args from a JSON config; flags explicitly present in argv win."""
    path = getattr(args, "config", None)
    if not path:
        return
    with open(path, "r", encoding="utf-8") as fh:
        values = json.load(fh)
    given = {tok.split("=", 1)[0].lstrip("-").replace("-", "_") for tok in argv if tok.startswith("--")}
    for key, value in values.items():
        attr = key.replace("-", "_")
        if hasattr(args, attr) and attr not in given:
            setattr(args, attr, value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="careerseq", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--config", default=None, help="JSON config file; explicit flags win")
        p.add_argument("--format", choices=["csv", "json"], default="csv")

    g = sub.add_parser("gen-data", help="generate a synthetic dataset with a ground-truth oracle")
    common(g)
    g.add_argument("--out", required=True, help="dataset JSONL path")
    g.add_argument("--taxonomy-out", default=None, help="taxonomy CSV path (default: alongside --out)")
    g.add_argument("--params-out", default=None, help="generator parameter file for oracle replay (.npz)")
    g.add_argument("--n", type=int, default=1000)
    g.add_argument("--taxonomy-size", type=int, default=334)
    g.add_argument("--markov-order", type=int, choices=[1, 2], default=1)
    g.add_argument("--stay-bias", type=float, default=0.385)
    g.add_argument("--covariate-effect", type=float, default=1.0)
    g.add_argument("--gap-prob", type=float, default=0.35)
    g.add_argument("--mean-records", type=float, default=10.0)
    g.add_argument("--year-range", default="1979:2022")
    g.add_argument("--tag", default="SYNTH")
    g.set_defaults(func=cmd_gen_data)

    s = sub.add_parser("split", help="assign train/valid/test labels at the individual level")
    common(s)
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--taxonomy", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--ratios", default="0.7,0.1,0.2")
    s.set_defaults(func=cmd_split)

    r = sub.add_parser("render", help="render career histories to text templates")
    common(r)
    r.add_argument("--in", dest="inp", default=None, help="dataset JSONL (default: stdin)")
    r.add_argument("--taxonomy", required=True)
    r.add_argument("--id", default=None, help="render only this individual")
    r.add_argument("--t", type=int, default=None, help="render the prompt for transition t instead of the full text")
    r.add_argument("--tag", default=None, help="override the dataset tag")
    r.add_argument("--no-birth-year", action="store_true")
    r.add_argument("--numeric-map", default=None, help="numeric-title map JSON (switches to numeric titles)")
    r.add_argument("--trailing-space", action="store_true")
    r.set_defaults(func=cmd_render)

    p = sub.add_parser("parse", help="parse templates back into dataset JSONL")
    common(p)
    p.add_argument("--in", dest="inp", default=None, help="template text (default: stdin)")
    p.add_argument("--taxonomy", required=True)
    p.add_argument("--numeric-map", default=None)
    p.add_argument("--tag", default="PARSED")
    p.set_defaults(func=cmd_parse)

    t = sub.add_parser("train", help="fit a model and write a checkpoint")
    common(t)
    t.add_argument("model", choices=["empirical", "mnl", "career", "lm"])
    t.add_argument("--data", required=True)
    t.add_argument("--taxonomy", required=True)
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--preset", choices=["toy", "paper"], default="toy")
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch", type=int, default=None)
    t.add_argument("--vocab-size", type=int, default=2048)
    t.add_argument("--d-model", type=int, default=None)
    t.add_argument("--n-layers", type=int, default=None)
    t.add_argument("--context", type=int, default=512)
    t.add_argument("--no-birth-year", action="store_true")
    t.add_argument("--numeric-map", default=None)
    t.add_argument("--featurizer", choices=["prev", "prev_covariates"], default="prev_covariates")
    t.add_argument("--reg", type=float, default=0.0)
    t.add_argument("--pretrain-data", default=None, help="career: optional pre-training JSONL")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="score checkpoints on a split and write metrics CSV")
    common(e)
    e.add_argument("--data", required=True)
    e.add_argument("--taxonomy", required=True)
    e.add_argument("--model-a", required=True, help="checkpoint dir, or 'oracle'")
    e.add_argument("--model-b", default=None, help="optional second model for paired differences")
    e.add_argument("--gen-params", default=None, help="generator .npz (required for oracle)")
    e.add_argument("--split", default="test")
    e.add_argument("--bootstrap", type=int, default=100)
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--normalized", action="store_true", help="normalize the empirical baseline's rows")
    e.add_argument("--no-birth-year", action="store_true")
    e.add_argument("--numeric-map", default=None)
    e.add_argument("--dataset-name", default="synthetic")
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", help="run a named experiment protocol")
    common(x)
    x.add_argument("kind", choices=list(ex.EXPERIMENT_KINDS))
    x.add_argument("--spec", required=True, help="JSON file with experiment parameters")
    x.add_argument("--out", required=True, help="output directory (a timestamped subdir is created)")
    x.add_argument("--gen-params", default=None, help="generator .npz when a spec references the oracle model")
    x.add_argument("--no-birth-year", action="store_true")
    x.add_argument("--numeric-map", default=None)
    x.set_defaults(func=cmd_experiment)

    rp = sub.add_parser("report", help="collect metrics into plot-ready CSV files")
    common(rp)
    rp.add_argument("--metrics", required=True, help="directory of metrics CSVs")
    rp.add_argument("--out", required=True)
    rp.add_argument("--force", action="store_true", help="allow mixing runs with different config hashes")
    rp.set_defaults(func=cmd_report)

    return parser


# --------------------------------------------------------------------------
# Subcommand implementations
# --------------------------------------------------------------------------


def cmd_gen_data(args) -> None:
    y0, _, y1 = args.year_range.partition(":")
    cfg = SyntheticConfig(
        n_individuals=args.n,
        year_range=(int(y0), int(y1)),
        taxonomy_size=args.taxonomy_size,
        markov_order=args.markov_order,
        covariate_effect_strength=args.covariate_effect,
        stay_bias=args.stay_bias,
        seed=args.seed,
        mean_records=args.mean_records,
        gap_probability=args.gap_prob,
        source_tag=args.tag,
    )
    ds, params = generate_synthetic(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_jsonl(ds, out)
    tax_path = Path(args.taxonomy_out) if args.taxonomy_out else out.with_suffix(".taxonomy.csv")
    ds.taxonomy.dump_csv(tax_path)
    params_path = Path(args.params_out) if args.params_out else out.with_suffix(".gen-params.npz")
    params.save(params_path)
    stats = summarize(ds)
    print(
        f"wrote {out} ({stats.n_individuals} individuals, {stats.n_transitions} transitions), "
        f"taxonomy {tax_path}, generator params {params_path}",
        file=sys.stderr,
    )


def cmd_split(args) -> None:
    taxonomy = OccupationTaxonomy.load_csv(args.taxonomy)
    ds = load_jsonl(args.inp, taxonomy)
    ratios = tuple(float(x) for x in args.ratios.split(","))
    if len(ratios) != 3:
        raise CliError("--ratios needs three comma-separated fractions")
    ds = split_dataset(ds, ratios, args.seed)
    dump_jsonl(ds, args.out)
    counts = {name: len(ds.split(name)) for name in ("train", "valid", "test")}
    print(f"wrote {args.out} with splits {counts}", file=sys.stderr)


def _codec_from_args(args, taxonomy, default_tag="SYNTH") -> TemplateCodec:
    numeric_map = NumericTitleMap.load_json(args.numeric_map) if getattr(args, "numeric_map", None) else None
    cfg = TemplateConfig(
        dataset_tag=getattr(args, "tag", None) or default_tag,
        include_birth_year=not getattr(args, "no_birth_year", False),
        numeric_titles=numeric_map is not None,
        trailing_space=getattr(args, "trailing_space", False),
    )
    return TemplateCodec(taxonomy, cfg, numeric_map)


def cmd_render(args) -> None:
    taxonomy = OccupationTaxonomy.load_csv(args.taxonomy)
    if args.inp:
        ds = load_jsonl(args.inp, taxonomy)
    else:
        from .corpus import read_jsonl

        ds = read_jsonl(sys.stdin, taxonomy, origin="<stdin>")
    histories = list(ds.individuals)
    if args.id is not None:
        histories = [h for h in histories if h.individual_id == args.id]
        if not histories:
            raise CliError(f"individual {args.id!r} not found")
    first_tag = histories[0].source_tag if histories else "SYNTH"
    codec = _codec_from_args(args, taxonomy, default_tag=first_tag)
    if args.t is not None:
        chunks = [codec.render_prompt(h, args.t) for h in histories]
        sys.stdout.write("\n\n".join(chunks) + "\n")
    else:
        # full templates already end with a newline; one blank line between
        sys.stdout.write("\n".join(codec.render_full(h) for h in histories))


def cmd_parse(args) -> None:
    taxonomy = OccupationTaxonomy.load_csv(args.taxonomy)
    codec = _codec_from_args(args, taxonomy, default_tag=args.tag)
    text = open(args.inp, "r", encoding="utf-8").read() if args.inp else sys.stdin.read()
    blocks = [b for b in text.split("\n\n") if b.strip()]
    histories = []
    for i, block in enumerate(blocks):
        if not block.endswith("\n"):
            block += "\n"
        histories.append(codec.parse(block, individual_id=f"parsed-{i:04d}"))
    ds = Dataset(taxonomy=taxonomy, individuals=tuple(histories))
    for h in ds.individuals:
        from .corpus import _history_to_obj

        sys.stdout.write(json.dumps(_history_to_obj(h, None), separators=(",", ":")) + "\n")


def cmd_train(args) -> None:
    taxonomy = OccupationTaxonomy.load_csv(args.taxonomy)
    ds = load_jsonl(args.data, taxonomy)
    if ds.split_labels is None:
        raise CliError("training data must carry split labels (run `careerseq split` first)")
    train, valid = ds.split("train"), ds.split("valid")
    out = Path(args.out)
    if args.model == "empirical":
        model = EmpiricalModel(taxonomy, normalized=False).fit(train)
        model.save(out)
    elif args.model == "mnl":
        feat = PrevOccupationFeaturizer(taxonomy) if args.featurizer == "prev" else PrevCovariatesFeaturizer(taxonomy)
        model = MnlModel(feat, taxonomy, reg=args.reg)
        model.fit(train, MnlFitConfig(max_iters=args.epochs or 2000, seed=args.seed))
        model.save(out)
    elif args.model == "career":
        if args.preset == "paper":
            cconf = paper_preset(taxonomy.size)
        else:
            cconf = CareerConfig(
                taxonomy_size=taxonomy.size,
                d_model=args.d_model or 64,
                n_layers=args.n_layers if args.n_layers is not None else 4,
                n_heads=2,
                d_ff=4 * (args.d_model or 64),
                max_positions=max(len(h) for h in ds.individuals) + 1,
            )
        model = CareerModel(cconf, taxonomy, seed=args.seed)
        pretrain = None
        if args.pretrain_data:
            pre = load_jsonl(args.pretrain_data, taxonomy)
            pretrain = list(pre.individuals)
        cfg = OptimizerConfig(
            lr_schedule=LrSchedule(kind="inverse_sqrt_warmup", peak=args.lr or 1e-3, warmup_steps=100, init=1e-7),
            max_epochs=args.epochs or 10,
            batch_sequences=args.batch or 32,
            weight_decay=0.01,
            seed=args.seed,
            patience=3,
        )
        report = train_career(model, train, valid, pretrain=pretrain, cfg=cfg)
        model.save(out)
        report.to_csv(out / "train_report.csv")
        report.to_json(out / "train_report.json")
    else:  # lm
        codec = _codec_from_args(args, taxonomy)
        tr_texts = [codec.render_full(h) for h in train]
        va_texts = [codec.render_full(h) for h in valid]
        continuations = [codec.title_continuation(c) for c in taxonomy.codes()]
        vocab = train_template_vocab(tr_texts, continuations, args.vocab_size)
        all_texts = [codec.render_full(h) for h in ds.individuals]
        longest = max(len(s) for s in vocab.encode_batch(all_texts)) + 2
        longest_title = max(len(vocab.encode(codec.title_continuation(c))) for c in taxonomy.codes())
        lm = TokenLM(
            TokenLmConfig(
                vocab_size=vocab.size,
                d_model=args.d_model or 128,
                n_layers=args.n_layers if args.n_layers is not None else 4,
                n_heads=4,
                context=max(args.context, longest + longest_title + 4),
            ),
            seed=args.seed,
        )
        cfg = OptimizerConfig(
            lr_schedule=LrSchedule(kind="linear_decay", peak=args.lr or 1e-3),
            max_epochs=args.epochs or 3,
            batch_sequences=args.batch or 32,
            seed=args.seed,
        )
        from .tokenizer import title_token_stats

        stats = title_token_stats(vocab, [codec.title_of(c) for c in taxonomy.codes()])
        print(
            f"title length under this vocabulary: mean {stats.mean:.1f} tokens "
            f"(range {stats.min}-{stats.max}); reference tokenizer at production scale: mean 8.3 (range 2-28)",
            file=sys.stderr,
        )
        report, _ = train_token_lm(lm, vocab, tr_texts, va_texts, cfg)
        save_token_lm(lm, vocab, out)
        report.to_csv(out / "train_report.csv")
        report.to_json(out / "train_report.json")
    print(f"saved {args.model} checkpoint to {out}", file=sys.stderr)


def _load_model(args, spec: str, taxonomy):
    if spec == "oracle":
        if not args.gen_params:
            raise CliError("--gen-params is required to evaluate the oracle")
        return OracleModel(GeneratorParams.load(args.gen_params), taxonomy), "oracle"
    kind, _, config = load_checkpoint(spec)
    if kind == "empirical":
        return EmpiricalModel.load(spec, taxonomy), config_hash(config)
    if kind == "career":
        return CareerModel.load(spec, taxonomy), config_hash(config)
    if kind == "token_lm":
        lm, vocab = load_token_lm(spec)
        codec = _codec_from_args(args, taxonomy)
        return LmOccupationAdapter(lm, vocab, codec), config_hash(config)
    if kind == "mnl":
        raise CliError("mnl checkpoints need their featurizer; evaluate them through the library API")
    raise CliError(f"cannot evaluate checkpoint kind {kind!r}")


def cmd_eval(args) -> None:
    taxonomy = OccupationTaxonomy.load_csv(args.taxonomy)
    ds = load_jsonl(args.data, taxonomy)
    histories = ds.split(args.split) if ds.split_labels else list(ds.individuals)
    if not histories:
        raise CliError(f"split {args.split!r} is empty")
    model_a, hash_a = _load_model(args, args.model_a, taxonomy)
    if isinstance(model_a, EmpiricalModel):
        model_a.normalized = args.normalized
        # reference figure at production scale, for orientation only
        print("note: empirical-frequency baseline perplexity at production scale: 14.647 (PSID81)", file=sys.stderr)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bcfg = ev.BootstrapConfig(b=args.bootstrap, seed=args.seed)
    scores_a = ev.score_model(model_a, histories, taxonomy)
    provenance = {
        "config_hash": hash_a,
        "seed": args.seed,
        "split": args.split,
        "bootstrap": args.bootstrap,
    }
    rows = _metric_rows(args, "model_a", scores_a, bcfg)
    if args.model_b:
        model_b, hash_b = _load_model(args, args.model_b, taxonomy)
        scores_b = ev.score_model(model_b, histories, taxonomy)
        rows.extend(_metric_rows(args, "model_b", scores_b, bcfg))
        pair = ev.bootstrap_pair(ev.perplexity, scores_b, scores_a, bcfg)
        rows.append(
            {
                "dataset": args.dataset_name,
                "split": args.split,
                "model": "model_b-minus-model_a",
                "metric": "perplexity_improvement",
                "filter": "all",
                "value": pair.diff,
                "se": pair.se_diff,
                "B": bcfg.b,
                "seed": args.seed,
            }
        )
        provenance["config_hash_b"] = hash_b
    ev.write_metrics_csv(out / "metrics.csv", rows, provenance)
    calib = ev.calibration(scores_a)
    ev.write_calibration_csv(out / "calibration_model_a.csv", calib, provenance)
    print(f"wrote {out / 'metrics.csv'}", file=sys.stderr)


def _metric_rows(args, model_label: str, scores: ev.TransitionScores, bcfg: ev.BootstrapConfig) -> list[dict]:
    rows = []

    def add(metric, filt, value, se=""):
        rows.append(
            {
                "dataset": args.dataset_name,
                "split": args.split,
                "model": model_label,
                "metric": metric,
                "filter": filt,
                "value": value,
                "se": se,
                "B": bcfg.b,
                "seed": args.seed,
            }
        )

    res = ev.bootstrap_metric(ev.perplexity, scores, bcfg, threads=args.threads)
    add("perplexity", "all", res.point, res.se)
    mov = ev.mover_perplexity(scores)
    add("perplexity", "movers", mov.value)
    add("excluded_transitions", "movers", float(mov.n_excluded))
    add("auc_move", "non-first", ev.move_auc(scores))
    add("calibration_error", "non-first", ev.calibration(scores).error)
    return rows


def cmd_experiment(args) -> None:
    with open(args.spec, "r", encoding="utf-8") as fh:
        params = json.load(fh)
    spec = ex.ExperimentSpec(kind=args.kind, params=params, seed=args.seed)
    run_dir = Path(args.out) / f"{args.kind}-{time.strftime('%Y%m%d-%H%M%S')}"
    rows = _dispatch_experiment(spec, params, args)
    provenance = {
        "kind": spec.kind,
        "seed": spec.seed,
        "config_hash": config_hash({"kind": spec.kind, "params": params, "seed": spec.seed}),
    }
    if "model" in params:
        provenance["model_checkpoint"] = params["model"]
    csv_path, _ = ex.write_experiment_output(run_dir, spec.kind, rows, provenance)
    print(f"wrote {csv_path}", file=sys.stderr)


def _experiment_common(params, args):
    taxonomy = OccupationTaxonomy.load_csv(params["taxonomy"])
    ds = load_jsonl(params["data"], taxonomy)
    return taxonomy, ds


def _empirical_trainer(taxonomy):
    # experiments compare training sets, so the trainer must produce proper
    # distributions; the as-written variant inflates thin-count rows
    def trainer(histories, seed):
        return EmpiricalModel(taxonomy, normalized=True).fit(histories)

    return trainer


def _dispatch_experiment(spec: ex.ExperimentSpec, params: dict, args) -> list[dict]:
    if spec.kind in ("data_mix", "add_other_sources"):
        datasets = {}
        taxonomy = OccupationTaxonomy.load_csv(params["taxonomy"])
        for name, path in params["datasets"].items():
            datasets[name] = load_jsonl(path, taxonomy)
        trainer = _empirical_trainer(taxonomy)
        if spec.kind == "data_mix":
            return ex.run_data_mix(datasets, params["p_grid"], trainer, seed=spec.seed)
        return ex.run_add_other_sources(datasets, params["base"], params["p_grid"], trainer, seed=spec.seed)
    taxonomy, ds = _experiment_common(params, args)
    histories = ds.split("test") if ds.split_labels else list(ds.individuals)
    if spec.kind == "history_truncation":
        model, _ = _load_model(args, params["model"], taxonomy)
        return ex.run_history_truncation(
            model,
            taxonomy,
            histories,
            t_min_grid=params.get("t_min_grid", (5, 10, 15, 20, 25)),
            k_grid=params.get("k_grid", (5, 10, 15, 20, 25)),
            seed=spec.seed,
        )
    if spec.kind == "covariate_randomization":
        model, _ = _load_model(args, params["model"], taxonomy)
        donors = ds.split("valid") if ds.split_labels else list(ds.individuals)
        return ex.run_covariate_randomization(
            model, taxonomy, histories, params["field_sets"], donors, seed=spec.seed
        )
    if spec.kind == "gap_year":
        model, _ = _load_model(args, params["model"], taxonomy)
        return ex.run_gap_year(model, taxonomy, histories, n_sample=params.get("n_sample", 100), seed=spec.seed)
    if spec.kind in ("prompting", "valid_title_rate"):
        model, _ = _load_model(args, params["model"], taxonomy)
        if not isinstance(model, LmOccupationAdapter):
            raise CliError(f"{spec.kind} needs a token-lm checkpoint")
        if spec.kind == "prompting":
            return ex.run_prompting_arms(model, ds, k_grid=params["k_grid"], seed=spec.seed)
        return ex.run_valid_title_rate(model, histories, seed=spec.seed, n_prompts=params.get("n_prompts", 200))
    if spec.kind == "numeric_titles":
        return _run_numeric_titles_cli(spec, params, taxonomy, ds)
    raise CliError(f"unhandled experiment kind {spec.kind}")


def _run_numeric_titles_cli(spec, params: dict, taxonomy, ds) -> list[dict]:
    if ds.split_labels is None:
        raise CliError("numeric_titles needs a dataset with split labels")
    nmap = NumericTitleMap.build(taxonomy, seed=params.get("map_seed", spec.seed))
    codec_literal = TemplateCodec(taxonomy, TemplateConfig(dataset_tag=params.get("tag", "SYNTH")))
    codec_numeric = TemplateCodec(
        taxonomy, TemplateConfig(dataset_tag=params.get("tag", "SYNTH"), numeric_titles=True), nmap
    )
    d_model = params.get("d_model", 48)
    epochs = params.get("epochs", 3)
    vocab_target = params.get("vocab_size", 700)

    def lm_trainer(texts_tr, texts_va, seed):
        codec = codec_numeric if "job_" in texts_tr[0] else codec_literal
        continuations = [codec.title_continuation(c) for c in taxonomy.codes()]
        vocab = train_template_vocab(list(texts_tr), continuations, vocab_target)
        ctx = max(len(s) for s in vocab.encode_batch(list(texts_tr) + list(texts_va))) + 32
        lm = TokenLM(
            TokenLmConfig(vocab_size=vocab.size, d_model=d_model, n_layers=2, n_heads=2, context=ctx),
            seed=seed % (2**31),
        )
        train_token_lm(
            lm,
            vocab,
            list(texts_tr),
            list(texts_va),
            OptimizerConfig(
                lr_schedule=LrSchedule(kind="linear_decay", peak=params.get("lr", 3e-3)),
                max_epochs=epochs,
                batch_sequences=params.get("batch", 8),
                seed=spec.seed,
            ),
        )
        return LmOccupationAdapter(lm, vocab, codec_literal)

    return ex.run_numeric_titles(ds, lm_trainer, codec_literal, codec_numeric, seed=spec.seed)


def cmd_report(args) -> None:
    metrics_dir = Path(args.metrics)
    files = sorted(metrics_dir.glob("**/*.csv"))
    if not files:
        raise CliError(f"nothing to report: no CSV files under {metrics_dir}")
    hashes = set()
    all_rows: list[dict] = []
    calib_rows: list[list[str]] = []
    for path in files:
        try:
            rows, provenance = ev.read_metrics_csv(path)
        except ev.EvalError:
            continue
        if "config_hash" in provenance:
            hashes.add(provenance["config_hash"])
        if path.name.startswith("calibration"):
            with open(path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if line.startswith(("bin,", "#")):
                        continue
                    calib_rows.append(line.rstrip("\n").split(","))
            continue
        all_rows.extend(rows)
    if len(hashes) > 1 and not args.force:
        raise CliError(f"metrics mix {len(hashes)} config hashes; pass --force to combine them")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics_combined.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(FORMAT_HEADER + "\n")
        import csv as _csv

        writer = _csv.DictWriter(fh, fieldnames=ev.METRICS_COLUMNS)
        writer.writeheader()
        for row in sorted(all_rows, key=lambda r: (r["dataset"], r["model"], r["metric"], r["filter"])):
            writer.writerow(row)
    with open(out / "calibration_points.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(FORMAT_HEADER + "\n")
        fh.write("bin,mean_pred,emp_rate,count\n")
        for row in calib_rows:
            fh.write(",".join(row) + "\n")
    print(f"wrote plot data under {out}", file=sys.stderr)


if __name__ == "__main__":
    entry()
