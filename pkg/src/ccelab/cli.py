"""Command-line entry point: ``ccelab train | sweep-gamma | make-imbalanced | report``.

On failure the last line written to stderr is a JSON object
``{"error": <category>, "message": ...}`` and the exit code is nonzero.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data, harness
from . import imbalance as imb
from .errors import CCELabError, ConfigurationError, FormatError, NumericError
from .model import SgdConfig

EXIT_CODES = {"configuration": 3, "format": 4, "io": 5, "numeric": 6}


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _add_run_flags(p):
    p.add_argument("--config", help="JSON file with an ExperimentConfig; flags override it")
    p.add_argument("--objective", choices=harness.OBJECTIVES)
    p.add_argument("--gamma", type=float)
    p.add_argument("--focal-focus", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--warmup-epochs", type=int)
    p.add_argument("--decay-epochs", type=_ints, help="comma-separated milestones")
    p.add_argument("--decay-factor", type=float)
    p.add_argument("--hidden", type=_ints, help="comma-separated hidden widths")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="runs")
    _add_data_flags(p)


def _add_data_flags(p):
    p.add_argument("--dataset", choices=("blobs", "idx", "csv"))
    p.add_argument("--imbalance", choices=("lt", "step", "none"))
    p.add_argument("--ratio", type=float)
    p.add_argument("--imbalance-seed", type=int)
    g = p.add_argument_group("blobs")
    g.add_argument("--num-classes", type=int)
    g.add_argument("--per-class", type=int)
    g.add_argument("--dims", type=int)
    g.add_argument("--separation", type=float, dest="class_separation")
    g.add_argument("--noise-std", type=float)
    g.add_argument("--test-per-class", type=int)
    g = p.add_argument_group("idx / csv")
    g.add_argument("--train-images")
    g.add_argument("--train-labels")
    g.add_argument("--test-images")
    g.add_argument("--test-labels")
    g.add_argument("--train-csv")
    g.add_argument("--test-csv")
    g.add_argument("--label-column", default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="ccelab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training experiment")
    _add_run_flags(p)

    p = sub.add_parser("sweep-gamma", help="CCE runs over several gamma values")
    _add_run_flags(p)
    p.add_argument("--gammas", type=_floats, required=True, help="comma-separated, all < 0")

    p = sub.add_parser("make-imbalanced", help="write an imbalanced copy of a dataset")
    _add_data_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output file (.csv) or directory (idx)")

    p = sub.add_parser("report", help="rebuild summary tables from a directory of runs")
    p.add_argument("runs", help="directory holding run JSON files")
    p.add_argument("--out", help="output directory (defaults to the runs directory)")
    return parser


def _dataset_source(args, base):
    kind = args.dataset or base.get("kind", "blobs")
    params = dict(base.get("params", {})) if kind == base.get("kind", "blobs") else {}
    if kind == "blobs":
        for key in ("num_classes", "per_class", "dims", "class_separation",
                    "noise_std", "test_per_class"):
            if getattr(args, key) is not None:
                params[key] = getattr(args, key)
    elif kind == "idx":
        for key in ("train_images", "train_labels", "test_images", "test_labels"):
            if getattr(args, key) is not None:
                params[key] = getattr(args, key)
        missing = [k for k in ("train_images", "train_labels", "test_images", "test_labels")
                   if k not in params]
        if missing:
            raise ConfigurationError(f"idx dataset needs --{', --'.join(m.replace('_', '-') for m in missing)}")
    else:
        if args.train_csv:
            params["train"] = args.train_csv
        if args.test_csv:
            params["test"] = args.test_csv
        if args.label_column:
            params["label_column"] = args.label_column
        params.setdefault("label_column", "label")
        if "train" not in params:
            raise ConfigurationError("csv dataset needs --train-csv")
    return {"kind": kind, "params": params}


def _imbalance(args, base, seed):
    if args.imbalance == "none":
        return None
    spec = dict(base) if base else None
    if args.imbalance is not None:
        spec = {"kind": "long_tailed" if args.imbalance == "lt" else "step",
                "ratio": (spec or {}).get("ratio", 100.0), "seed": seed}
    if spec is None:
        if args.ratio is not None:
            raise ConfigurationError("--ratio given without --imbalance")
        return None
    if args.ratio is not None:
        spec["ratio"] = args.ratio
    if args.imbalance_seed is not None:
        spec["seed"] = args.imbalance_seed
    return spec


def config_from_args(args):
    """Merge ``--config`` JSON (if any) with explicit flags."""
    base = {}
    if args.config:
        with open(args.config, encoding="utf-8") as f:
            base = json.load(f)
    d = harness.ExperimentConfig().to_dict()
    for key, value in base.items():
        if isinstance(value, dict) and isinstance(d.get(key), dict) and key != "dataset":
            d[key] = {**d[key], **value}
        else:
            d[key] = value
    explicit_milestones = "decay_epochs" in base.get("sgd_cfg", {})

    if args.objective:
        d["objective"] = args.objective
    if args.seed is not None:
        d["seed"] = args.seed
        d["batch_plan"]["shuffle_seed"] = args.seed
    if args.epochs is not None:
        d["epochs"] = args.epochs
    if args.hidden is not None:
        d["hidden"] = args.hidden
    if args.gamma is not None:
        d["loss_cfg"]["gamma"] = args.gamma
    if args.focal_focus is not None:
        d["loss_cfg"]["focal_focus"] = args.focal_focus
    if args.batch_size is not None:
        d["batch_plan"]["batch_size"] = args.batch_size
    sgd = d["sgd_cfg"]
    for flag, key in (("lr", "base_lr"), ("momentum", "momentum"),
                      ("weight_decay", "weight_decay"), ("warmup_epochs", "warmup_epochs"),
                      ("decay_factor", "decay_factor")):
        if getattr(args, flag) is not None:
            sgd[key] = getattr(args, flag)
    if args.decay_epochs is not None:
        sgd["decay_epochs"] = args.decay_epochs
    elif not explicit_milestones:
        sgd["decay_epochs"] = list(SgdConfig().scaled_to(d["epochs"]).decay_epochs)
    d["dataset"] = _dataset_source(args, base.get("dataset", {}))
    d["imbalance"] = _imbalance(args, base.get("imbalance"), d["seed"])
    d["output_dir"] = args.out
    return harness.ExperimentConfig.from_dict(d)


def _summary(r):
    return {"run_id": r.run_id, "final_bacc": r.final_bacc,
            "mean_seconds_per_iteration": r.mean_seconds_per_iteration,
            "backward_passes": r.backward_passes}


def cmd_train(args):
    cfg = config_from_args(args)
    result = harness.train(cfg)
    harness.report([result], args.out)
    print(json.dumps(_summary(result)))


def cmd_sweep_gamma(args):
    cfg = config_from_args(replace_objective(args))
    results = harness.gamma_sweep(cfg, args.gammas)
    harness.report(results, args.out)
    harness.write_gamma_table(results, Path(args.out) / "gamma_sweep.csv")
    for r in results:
        print(json.dumps(_summary(r)))


def replace_objective(args):
    args.objective = "cce"
    if args.gamma is None:
        args.gamma = args.gammas[0] if args.gammas else -1.0
    return args


def cmd_make_imbalanced(args):
    kind = args.dataset or "blobs"
    src = _dataset_source(args, {"kind": kind})
    cfg_seed = args.seed
    if kind == "blobs":
        ds = harness._blobs(src["params"], cfg_seed, "per_class", 0, "-train")
    elif kind == "idx":
        ds = data.load_idx(args.train_images, args.train_labels)
    else:
        ds = data.load_csv(src["params"]["train"], src["params"]["label_column"])
    spec = _imbalance(args, None, cfg_seed)
    if spec is None:
        raise ConfigurationError("make-imbalanced needs --imbalance lt|step")
    out_ds = imb.subsample(ds, imb.ImbalanceSpec(**spec))
    out = Path(args.out)
    if kind == "idx":
        out.mkdir(parents=True, exist_ok=True)
        shape = out_ds.metadata.get("image_shape", [out_ds.dims])
        pixels = np.rint(out_ds.features * 255).reshape(len(out_ds), *shape)
        data.write_idx(out / "images.idx", pixels)
        data.write_idx(out / "labels.idx", out_ds.labels.labels)
        dist_path = out / "distribution.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        names = out_ds.metadata.get("label_names")
        feat_names = out_ds.metadata.get("feature_names") or [f"x{i}" for i in range(out_ds.dims)]
        label_col = src["params"].get("label_column", "label")
        with open(out, "w", encoding="utf-8", newline="") as f:
            f.write(",".join([*feat_names, label_col]) + "\n")
            for row, lab in zip(out_ds.features, out_ds.labels.labels):
                f.write(",".join([*map(repr, row.tolist()), str(names[lab] if names else lab)]) + "\n")
        dist_path = out.with_name(out.stem + "_distribution.csv")
    dist = imb.class_distribution(out_ds)
    dist.to_csv(dist_path)
    print(json.dumps({"samples": len(out_ds), "counts": list(dist.counts),
                      "imbalance_ratio": dist.imbalance_ratio}))


def cmd_report(args):
    results = harness.load_results(args.runs)
    paths = harness.report(results, args.out or args.runs)
    print(json.dumps({"runs": len(results), "files": len(paths)}))


COMMANDS = {"train": cmd_train, "sweep-gamma": cmd_sweep_gamma,
            "make-imbalanced": cmd_make_imbalanced, "report": cmd_report}


def _category(exc):
    if isinstance(exc, CCELabError):
        return exc.category
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, (KeyError, TypeError, ValueError)):
        return "configuration"
    return "internal"


def _exit_code(exc):
    if isinstance(exc, ConfigurationError):
        return EXIT_CODES["configuration"]
    if isinstance(exc, FormatError):
        return EXIT_CODES["format"]
    if isinstance(exc, OSError):
        return EXIT_CODES["io"]
    if isinstance(exc, NumericError):
        return EXIT_CODES["numeric"]
    if isinstance(exc, (KeyError, TypeError, ValueError)):
        return EXIT_CODES["configuration"]
    return 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except Exception as exc:  # noqa: BLE001 - every failure maps to an exit code
        print(json.dumps({"error": _category(exc), "message": str(exc)}), file=sys.stderr)
        return _exit_code(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
