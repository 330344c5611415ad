"""Command-line entry point for reproducible experiment runs.

Subcommands: train, certify, evaluate, importance, export-shapes.  Every
run is driven by one TOML config file; the only randomness is the single
seed it declares, so repeated runs write byte-identical artifacts.

Exit codes: 0 success, 2 config error, 3 data error, 4 certification
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import data as data_mod
from .baselines import FcnnModel, LrModel, fcnn_train, lr_train
from .errors import CertificationError, ConfigError, DataError, MnamError
from .importance import feature_importance
from .metrics import confusion_and_error
from .model import NamModel, save_model
from .monotonic import CertReport, ConstraintSet, PenaltyConfig, certify
from .training import TrainConfig, certified_train, train_nam

MODEL_KINDS = ("lr", "fcnn", "nam", "mnam")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CERT = 4


@dataclass
class ExperimentConfig:
    """Everything one experiment needs, parsed from a TOML file."""

    recipe: str
    data_path: str
    model_kind: str
    seed: int = 0
    out: str | None = None
    threshold: float = 0.5
    train_fraction: float = 0.75
    verify_counts: bool = True
    individual: list[str] = field(default_factory=list)
    pairwise: list[list[str]] = field(default_factory=list)
    allow_unanchored_pairs: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    # generic-recipe details
    label_column: str | None = None
    drop_columns: list[str] = field(default_factory=list)
    clip_upper: dict[str, float] = field(default_factory=dict)
    shared_groups: list[list[str]] = field(default_factory=list)

    def __post_init__(self):
        if self.recipe not in ("taiwan", "gmsc", "generic"):
            raise ConfigError(f"unknown recipe {self.recipe!r}")
        if self.model_kind not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model_kind!r}; expected one of {MODEL_KINDS}")
        if self.model_kind == "mnam" and not (self.individual or self.pairwise):
            raise ConfigError("model 'mnam' requires a nonempty [constraints] section")
        if self.recipe == "generic" and not self.label_column:
            raise ConfigError("recipe 'generic' requires [recipe].label_column")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie strictly between 0 and 1")


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None

    exp = doc.get("experiment", {})
    for key in ("recipe", "data", "model"):
        if key not in exp:
            raise ConfigError(f"{path}: [experiment].{key} is required")
    training = doc.get("training", {})
    penalty = doc.get("penalty", {})
    constraints = doc.get("constraints", {})
    recipe_extra = doc.get("recipe", {})

    try:
        pcfg = PenaltyConfig(
            grid_size=int(penalty.get("grid_size", 256)),
            epsilon=float(penalty.get("epsilon", 1e-5)),
        )
        tcfg = TrainConfig(
            epochs=int(training.get("epochs", 200)),
            batch_size=int(training.get("batch_size", 256)),
            learning_rate=float(training.get("learning_rate", 0.01)),
            seed=int(exp.get("seed", 0)),
            hidden_units=int(training.get("hidden_units", 2)),
            weight_init_scale=float(training.get("weight_init_scale", 1.0)),
            optimizer=str(training.get("optimizer", "sgd")),
            multiplier_start=float(training.get("multiplier_start", 1.0)),
            multiplier_step=float(training.get("multiplier_step", 10.0)),
            max_rounds=int(training.get("max_rounds", 7)),
            penalty=pcfg,
            cert_grid_size=int(penalty.get("cert_grid_size", 1024)),
        )
        return ExperimentConfig(
            recipe=str(exp["recipe"]),
            data_path=str(exp["data"]),
            model_kind=str(exp["model"]),
            seed=int(exp.get("seed", 0)),
            out=exp.get("out"),
            threshold=float(exp.get("threshold", 0.5)),
            train_fraction=float(exp.get("train_fraction", 0.75)),
            verify_counts=bool(exp.get("verify_counts", True)),
            individual=[str(n) for n in constraints.get("individual", [])],
            pairwise=[[str(a), str(b)] for a, b in constraints.get("pairwise", [])],
            allow_unanchored_pairs=bool(constraints.get("allow_unanchored_pairs", False)),
            train=tcfg,
            label_column=recipe_extra.get("label_column"),
            drop_columns=[str(c) for c in recipe_extra.get("drop_columns", [])],
            clip_upper={str(k): float(v) for k, v in recipe_extra.get("clip_upper", {}).items()},
            shared_groups=[[str(n) for n in g] for g in recipe_extra.get("shared_groups", [])],
        )
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{path}: {e}") from None


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.train.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    if getattr(args, "threshold", None) is not None:
        cfg.threshold = args.threshold
        if not 0.0 < cfg.threshold < 1.0:
            raise ConfigError("threshold must lie strictly between 0 and 1")
    return cfg


def _load_dataset(cfg: ExperimentConfig) -> data_mod.Dataset:
    raw = data_mod.load_csv(cfg.data_path)
    if cfg.recipe == "taiwan":
        return data_mod.preprocess_taiwan(raw, verify_counts=cfg.verify_counts)
    if cfg.recipe == "gmsc":
        return data_mod.preprocess_gmsc(raw, verify_counts=cfg.verify_counts)
    return data_mod.preprocess_generic(
        raw, cfg.label_column, drop=cfg.drop_columns,
        clip_upper=cfg.clip_upper, shared_groups=cfg.shared_groups,
    )


def _resolve_constraints(cfg: ExperimentConfig, names: list[str]) -> ConstraintSet:
    index = {n: i for i, n in enumerate(names)}

    def lookup(name: str) -> int:
        if name not in index:
            raise ConfigError(
                f"constraint references unknown feature {name!r}; available: {names}"
            )
        return index[name]

    try:
        return ConstraintSet(
            individual=[lookup(n) for n in cfg.individual],
            pairwise=[(lookup(u), lookup(v)) for u, v in cfg.pairwise],
            allow_unanchored_pairs=cfg.allow_unanchored_pairs,
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None


def _prepare(cfg: ExperimentConfig):
    """Shared pipeline: load, preprocess, split, normalize, resolve constraints."""
    dataset = _load_dataset(cfg)
    train, test = data_mod.split(dataset, cfg.train_fraction, cfg.seed)
    train_n, test_n = data_mod.normalize(train, test)
    cs = _resolve_constraints(cfg, train_n.feature_names)
    return train_n, test_n, cs


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_trace(path: Path, trace) -> None:
    lines = [json.dumps(r.to_dict(), sort_keys=True) for r in trace]
    path.write_text("\n".join(lines) + "\n")


def cmd_train(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if cfg.out is None:
        raise ConfigError("no output directory: set [experiment].out or pass --out")
    train_n, test_n, cs = _prepare(cfg)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)

    cert: CertReport | None = None
    trace = None
    if cfg.model_kind == "lr":
        model = lr_train(train_n, cfg.train)
    elif cfg.model_kind == "fcnn":
        model = fcnn_train(train_n, cfg.train)
    elif cfg.model_kind == "nam":
        model = train_nam(train_n, cs, cfg.train)
    else:
        try:
            model, cert, trace = certified_train(train_n, cs, cfg.train, eval_data=test_n)
        except CertificationError as e:
            _write_trace(out / "trace.jsonl", e.trace)
            if e.report is not None:
                _write_json(out / "cert.json", e.report.to_dict())
            print(f"certification failed: {e}", file=sys.stderr)
            print(f"escalation trace written to {out / 'trace.jsonl'}", file=sys.stderr)
            return EXIT_CERT

    save_model(model, out / "model.json")
    report = confusion_and_error(model.proba(test_n.features), test_n.labels, cfg.threshold)
    _write_json(out / "eval.json", report.to_dict())
    (out / "eval.txt").write_text(report.to_text())
    if cert is not None:
        _write_json(out / "cert.json", cert.to_dict())
        _write_trace(out / "trace.jsonl", trace)
    print(f"{cfg.model_kind} model written to {out / 'model.json'}")
    print(report.to_text(), end="")
    return EXIT_OK


def load_any_model(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"model file not found: {path}")
    doc = json.loads(path.read_text())
    kind = doc.get("kind")
    if kind == "nam":
        return NamModel.from_dict(doc)
    if kind == "lr":
        return LrModel.from_dict(doc)
    if kind == "fcnn":
        return FcnnModel.from_dict(doc)
    raise DataError(f"unrecognized model kind {kind!r} in {path}")


def _check_schema(model, dataset) -> None:
    model_names = [m.name for m in model.features]
    data_names = dataset.feature_names
    if model_names != data_names:
        raise DataError(
            "model/data schema mismatch:\n"
            f"  model features ({len(model_names)}): {model_names}\n"
            f"  data features  ({len(data_names)}): {data_names}"
        )


def cmd_certify(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    model = load_any_model(args.model)
    if not isinstance(model, NamModel):
        raise ConfigError("certify needs an additive (nam/mnam) model")
    cs = _resolve_constraints(cfg, [m.name for m in model.features])
    grid = args.grid_size or cfg.train.cert_grid_size
    report = certify(model, cs, PenaltyConfig(grid_size=grid, epsilon=cfg.train.penalty.epsilon))
    print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_CERT


def cmd_evaluate(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    model = load_any_model(args.model)
    _, test_n, _ = _prepare(cfg)
    _check_schema(model, test_n)
    report = confusion_and_error(model.proba(test_n.features), test_n.labels, cfg.threshold)
    print(report.to_text(), end="")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "eval.json", report.to_dict())
        print(f"report written to {out / 'eval.json'}")
    return EXIT_OK


def cmd_importance(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    model = load_any_model(args.model)
    train_n, _, _ = _prepare(cfg)
    _check_schema(model, train_n)
    report = feature_importance(model, train_n)
    print(report.to_json(), end="")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "importance.json").write_text(report.to_json())
        (out / "importance.csv").write_text(report.to_csv())
        print(f"reports written to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_export_shapes(args) -> int:
    model = load_any_model(args.model)
    if not isinstance(model, NamModel):
        raise ConfigError("export-shapes needs an additive (nam/mnam) model")
    grid = args.grid_size or 256
    out = Path(args.out) if args.out else Path(args.model).parent
    out.mkdir(parents=True, exist_ok=True)
    for i, meta in enumerate(model.features):
        curve = model.shape_eval(i, grid)
        lines = ["x,f"] + [f"{float(x)!r},{float(y)!r}" for x, y in curve]
        (out / f"shape_{meta.name}.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {len(model.features)} shape curves to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mnam",
        description="Train and audit monotonic additive models for default prediction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment TOML file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--out", default=None, help="override the output directory")
    common.add_argument("--threshold", type=float, default=None,
                        help="override the decision threshold")
    common.add_argument("--grid-size", type=int, default=None, dest="grid_size",
                        help="override the certification grid size")

    p = sub.add_parser("train", parents=[common],
                       help="train a model and write its artifacts")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("certify", parents=[common],
                       help="check a saved model against the config's constraints")
    p.add_argument("--model", required=True, help="model JSON path")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score a saved model on the config's test split")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("importance", parents=[common],
                       help="sensitivity-based feature importance on the training split")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_importance)

    p = sub.add_parser("export-shapes",
                       help="write per-feature shape curves as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--grid-size", type=int, default=None, dest="grid_size")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_export_shapes)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except CertificationError as e:
        print(f"certification failure: {e}", file=sys.stderr)
        return EXIT_CERT
    except MnamError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
