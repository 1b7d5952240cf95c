"""Command line: ``armlet train|eval|predict|explain|bench|synth``.

Exit codes are a stable contract: 0 success, 1 other failure, 2 config or
path problem, 3 data does not match the schema, 4 metric undefined,
5 bad argument.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .benchmark import throughput
from .data import Dataset, Schema, SyntheticSpec, generate_synthetic, load_dataset, load_schema, split
from .errors import ArmletError, ContractError, DataError, MetricError, SchemaError, SchemaParseError
from .interpret import count_interaction_terms, global_importance, local_attribution
from .model import MODEL_KINDS, ArmConfig, Model, transplant_neurons
from .persist import load_model, save_model
from .training import TrainConfig, evaluate, sigmoid, train

log = logging.getLogger("armlet")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SCHEMA, EXIT_METRIC, EXIT_ARG = 0, 1, 2, 3, 4, 5


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message, EXIT_ARG)


_ARM_FIELDS = {f.name for f in fields(ArmConfig)} - {"m"}
_TRAIN_FIELDS = {f.name for f in fields(TrainConfig)} - {"seed"}
_PATH_KEYS = ("schema", "train", "valid", "test", "out_dir", "warm_start")


@dataclass
class RunConfig:
    """Everything one ``train`` invocation needs; built from a flat JSON file plus flags."""

    model_kind: str = "arm"
    schema: str | None = None
    train: str | None = None
    valid: str | None = None
    test: str | None = None
    out_dir: str = "runs"
    format: str = "indexed"
    warm_start: str | None = None
    dtype: str = "float64"
    seeds: list[int] = field(default_factory=lambda: [0])
    jobs: int = 1
    arm: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, d: dict) -> "RunConfig":
        run = cls()
        for key, value in d.items():
            if key in _ARM_FIELDS:
                run.arm[key] = value
            elif key in _TRAIN_FIELDS:
                run.training[key] = value
            elif key == "seed":
                run.seeds = [int(value)]
            elif key in {f.name for f in fields(cls)} - {"arm", "training"}:
                setattr(run, key, value)
            else:
                raise CliError(f"unknown config key {key!r}", EXIT_CONFIG)
        return run

    def to_json(self) -> dict:
        d = {k: getattr(self, k) for k in ("model_kind", *_PATH_KEYS, "format", "dtype", "seeds")}
        return {**d, **self.arm, **self.training}

    def check(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise CliError(f"--model-kind must be one of {', '.join(MODEL_KINDS)}", EXIT_CONFIG)
        for key, flag in (("schema", "--schema"), ("train", "--train"), ("valid", "--valid")):
            path = getattr(self, key)
            if path is None:
                raise CliError(f"missing {flag} path", EXIT_CONFIG)
            if not Path(path).is_file():
                raise CliError(f"{flag} path not found: {path}", EXIT_CONFIG)
        for key, flag in (("test", "--test"), ("warm_start", "--warm-start")):
            path = getattr(self, key)
            if path is not None and not Path(path).is_file():
                raise CliError(f"{flag} path not found: {path}", EXIT_CONFIG)
        if not self.seeds:
            raise CliError("need at least one seed", EXIT_CONFIG)

    def arm_config(self, m: int) -> ArmConfig:
        try:
            return ArmConfig(m=m, **self.arm)
        except (TypeError, ValueError) as exc:
            raise CliError(str(exc), EXIT_CONFIG) from None

    def train_config(self, seed: int) -> TrainConfig:
        try:
            return TrainConfig(seed=seed, **self.training)
        except (TypeError, ValueError) as exc:
            raise CliError(str(exc), EXIT_CONFIG) from None


# -- argument parsing -----------------------------------------------------------

_OVERRIDES = [
    ("--k", "K", int), ("--o", "o", int), ("--alpha", "alpha", float), ("--n-emb", "n_e", int),
    ("--lr", "lr", float), ("--batch-size", "batch_size", int), ("--patience", "patience", int),
    ("--max-epochs", "max_epochs", int), ("--fm-neurons", "fm_neurons", int),
]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="armlet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one model per seed and summarise")
    t.add_argument("--config", help="flat JSON run config; flags override it")
    t.add_argument("--model-kind", choices=MODEL_KINDS)
    for key in _PATH_KEYS:
        t.add_argument("--" + key.replace("_", "-"))
    t.add_argument("--format", choices=("indexed", "csv"))
    t.add_argument("--seed", type=int, help="single seed")
    t.add_argument("--seeds", type=_int_list, help="comma separated seeds, e.g. 0,1,2,3,4")
    t.add_argument("--jobs", type=int, help="train seeds in parallel processes")
    for flag, _, typ in _OVERRIDES:
        t.add_argument(flag, type=typ)

    e = sub.add_parser("eval", help="AUC and logloss of a saved model")
    _model_data_args(e)

    pr = sub.add_parser("predict", help="write index,score lines")
    _model_data_args(pr)
    pr.add_argument("--out", help="output file (default stdout)")

    x = sub.add_parser("explain", help="attribution report")
    _model_data_args(x)
    x.add_argument("--top-n", type=int, default=8)
    x.add_argument("--instances", type=_int_list, help="instance ids for local attribution")
    x.add_argument("--out", help="report file (default stdout)")

    b = sub.add_parser("bench", help="inference throughput against the number of fields")
    b.add_argument("--model", help="take K, o, n_e and alpha from this model file")
    b.add_argument("--m-list", type=_int_list, default=[4, 8, 16, 32, 64])
    b.add_argument("--batch", type=int, default=2048)
    b.add_argument("--reps", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--k", type=int, default=4)
    b.add_argument("--o", type=int, default=64)
    b.add_argument("--n-emb", type=int, default=10)
    b.add_argument("--alpha", type=float, default=1.7)
    b.add_argument("--json", action="store_true", help="print JSON instead of a table")

    s = sub.add_parser("synth", help="write a seeded synthetic dataset with planted interactions")
    s.add_argument("--spec", required=True, help="JSON synthetic spec")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--ratios", type=float, nargs=3, default=(0.8, 0.1, 0.1))
    return p


def _model_data_args(p):
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=("indexed", "csv"), default="indexed")
    p.add_argument("--schema", help="optional schema file; must equal the model's schema")


# -- commands -----------------------------------------------------------------

def _read_json(path: str, flag: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise CliError(f"{flag} path not found: {path}", EXIT_CONFIG) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{flag} {path}: invalid JSON at line {exc.lineno}: {exc.msg}", EXIT_CONFIG) from None


def run_config_from_args(args) -> RunConfig:
    run = RunConfig.from_mapping(_read_json(args.config, "--config") if args.config else {})
    for key in ("model_kind", *_PATH_KEYS, "format", "jobs"):
        if getattr(args, key, None) is not None:
            setattr(run, key, getattr(args, key))
    if args.seeds is not None:
        run.seeds = args.seeds
    elif args.seed is not None:
        run.seeds = [args.seed]
    for flag, key, _ in _OVERRIDES:
        value = getattr(args, flag[2:].replace("-", "_"))
        if value is not None:
            (run.arm if key in _ARM_FIELDS else run.training)[key] = value
    return run


def _load_split(path: str, schema: Schema, fmt: str, flag: str) -> Dataset:
    try:
        return load_dataset(path, schema, format=fmt)
    except FileNotFoundError:
        raise CliError(f"{flag} path not found: {path}", EXIT_CONFIG) from None


def _train_one(run: RunConfig, seed: int) -> dict:
    schema = load_schema(run.schema)
    tr = _load_split(run.train, schema, run.format, "--train")
    va = _load_split(run.valid, schema, run.format, "--valid")
    cfg = run.arm_config(schema.m)
    tcfg = run.train_config(seed)
    model = None
    if run.warm_start:
        if run.model_kind != "fm_plus":
            raise CliError("--warm-start applies to model kind fm_plus", EXIT_CONFIG)
        source = load_model(run.warm_start)
        if source.schema != schema:
            raise CliError("--warm-start model was trained on a different schema", EXIT_SCHEMA)
        model = transplant_neurons(source, cfg, seed)
    out = Path(run.out_dir)
    hist_path = out / f"history_seed{seed}.jsonl"
    with hist_path.open("w") as hist:
        res = train(run.model_kind, tr, va, cfg, tcfg, init_seed=seed, model=model,
                    on_record=lambda r: hist.write(json.dumps(r.to_json()) + "\n"))
    rec = {"seed": seed, "best_valid_auc": res.best_valid_auc, "best_step": res.best_step,
           "epochs": len(res.history), "stopped_early": res.stopped_early}
    if run.test:
        te = _load_split(run.test, schema, run.format, "--test")
        rep = evaluate(res.model, te)
        rec.update(test_auc=rep.auc, test_logloss=rep.logloss)
    model_path = out / f"model_seed{seed}.json"
    save_model(res.model, model_path, run.dtype, extra={"run": run.to_json(), "seed": seed,
                                                         "train": tcfg.to_json()})
    rec.update(model=str(model_path), history=str(hist_path))
    return rec


def cmd_train(args) -> int:
    run = run_config_from_args(args)
    run.check()
    Path(run.out_dir).mkdir(parents=True, exist_ok=True)
    seeds = sorted(set(run.seeds))
    if run.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=run.jobs) as pool:
            records = list(pool.map(_train_one, [run] * len(seeds), seeds))
    else:
        records = []
        for seed in seeds:
            records.append(_train_one(run, seed))
            log.info("seed %d done: %s", seed, records[-1])
    summary = {"config": run.to_json(), "runs": records}
    key = "test" if run.test else "best_valid"
    for metric in (("test_auc", "test_logloss") if run.test else ("best_valid_auc",)):
        vals = np.array([r[metric] for r in records])
        summary[metric] = {"mean": float(vals.mean()), "std": float(vals.std()),
                           "values": vals.tolist()}
    (Path(run.out_dir) / "summary.json").write_text(json.dumps(summary, indent=2))
    head = summary[f"{key}_auc"]
    print(f"{run.model_kind}: {len(records)} seed(s), {key} AUC {head['mean']:.4f} "
          f"+- {head['std']:.4f}")
    return EXIT_OK


def _load_for_data(args) -> tuple[Model, Dataset]:
    model = load_model(args.model) if Path(args.model).is_file() else None
    if model is None:
        raise CliError(f"--model path not found: {args.model}", EXIT_CONFIG)
    if args.schema is not None:
        if not Path(args.schema).is_file():
            raise CliError(f"--schema path not found: {args.schema}", EXIT_CONFIG)
        if load_schema(args.schema) != model.schema:
            raise CliError("--schema differs from the schema embedded in the model", EXIT_SCHEMA)
    return model, _load_split(args.data, model.schema, args.format, "--data")


def cmd_eval(args) -> int:
    model, data = _load_for_data(args)
    rep = evaluate(model, data)
    print(f"auc {rep.auc:.6f} logloss {rep.logloss:.6f} n {rep.n}")
    print(json.dumps(rep.to_json()))
    return EXIT_OK


def cmd_predict(args) -> int:
    model, data = _load_for_data(args)
    scores = sigmoid(model.logits(data)[:, 0])
    text = "".join(f"{i},{s:.6f}\n" for i, s in enumerate(scores))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def explain_report(model: Model, data: Dataset, top_n: int, instances=None) -> dict:
    counts = count_interaction_terms(data, model)
    names = model.schema.names
    report = {
        "global": global_importance(model).to_json(),
        "terms": [t.to_json(names) for t in counts.terms()[:max(top_n, 0)]],
        "catalog": {"neurons": counts.neurons, "n": counts.n,
                    "total_frequency": counts.total_frequency,
                    "degenerate_frequency": counts.degenerate_frequency},
    }
    if instances:
        report["local"] = {str(i): local_attribution(data, model, i).to_json() for i in instances}
    return report


def cmd_explain(args) -> int:
    model, data = _load_for_data(args)
    if not model.has_arm:
        raise CliError(f"explain needs an arm or arm_plus model, got {model.kind}", EXIT_ARG)
    if args.top_n < 0:
        raise CliError("--top-n must be >= 0", EXIT_ARG)
    for i in args.instances or []:
        if not 0 <= i < data.N:
            raise CliError(f"instance id {i} out of range [0, {data.N})", EXIT_ARG)
    text = json.dumps(explain_report(model, data, args.top_n, args.instances), indent=2)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    if args.reps < 3:
        raise CliError("--reps must be >= 3 (the first repetition is dropped)", EXIT_ARG)
    if any(m < 1 for m in args.m_list) or not args.m_list:
        raise CliError("--m-list needs positive field counts", EXIT_ARG)
    if args.model:
        if not Path(args.model).is_file():
            raise CliError(f"--model path not found: {args.model}", EXIT_CONFIG)
        src = load_model(args.model)
        cfg, kind = src.cfg, src.kind
    else:
        cfg = ArmConfig(m=1, K=args.k, o=args.o, n_e=args.n_emb, alpha=args.alpha)
        kind = "arm"
    rep = throughput(cfg, args.m_list, batch=args.batch, reps=args.reps, seed=args.seed, kind=kind)
    print(json.dumps(rep.to_json(), indent=2) if args.json else rep.table())
    return EXIT_OK


def cmd_synth(args) -> int:
    d = _read_json(args.spec, "--spec")
    try:
        spec = SyntheticSpec.from_json(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"--spec: invalid synthetic spec: {exc}", EXIT_CONFIG) from None
    syn = generate_synthetic(spec, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "schema.json").write_text(json.dumps(syn.dataset.schema.to_json(), indent=2))
    parts = split(syn.dataset, tuple(args.ratios), args.seed)
    for name, part in zip(("train", "valid", "test"), parts):
        part.save_indexed(out / f"{name}.txt")
    print(f"wrote {out}/schema.json and train/valid/test with {[p.N for p in parts]} rows")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "predict": cmd_predict,
            "explain": cmd_explain, "bench": cmd_bench, "synth": cmd_synth}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except CliError as exc:
        print(f"armlet: error: {exc}", file=sys.stderr)
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        msg, code = str(exc), exc.code
    except SchemaParseError as exc:
        msg, code = str(exc), EXIT_CONFIG
    except (SchemaError, DataError) as exc:
        msg, code = str(exc), EXIT_SCHEMA
    except MetricError as exc:
        msg, code = str(exc), EXIT_METRIC
    except ContractError as exc:
        msg, code = str(exc), EXIT_ARG
    except ArmletError as exc:
        msg, code = str(exc), EXIT_FAIL
    except OSError as exc:
        msg, code = str(exc), EXIT_CONFIG
    print(f"armlet: error: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
