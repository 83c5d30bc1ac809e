"""Command-line interface.

Subcommands: gen-chains, gen-colors, train, eval, probe-range, bound.
Every command is deterministic given its flags and seed, and echoes its
effective configuration to the output directory. A JSON config file can
supply any flag (keys mirror flag names with underscores); explicit flags
override file values, and unknown keys are rejected.

Exit codes: 0 success, 2 usage, 3 I/O failure, 4 parse/validation failure,
5 numerical divergence. The MSIGNN_OUT_DIR environment variable supplies
the default output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import datasets, probe, train
from .equilibrium import ScaleModule, SolverConfig
from .errors import DivergenceError
from .model import MlpEncoder, glorot_uniform, init_model, load_checkpoint, save_checkpoint

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_DATA = 4
EXIT_DIVERGED = 5

OUT_DIR_ENV = "MSIGNN_OUT_DIR"

DEFAULTS = {
    "gen-chains": {"classes": 2, "chains_per_class": 20, "length": 10, "seed": 0},
    "gen-colors": {"colors": 3, "chains": 30, "length": 30, "fraction": 0.3, "seed": 0},
    "train": {"data": None, "gen": None, "classes": 2, "chains_per_class": 20,
              "colors": 3, "chains": 30, "length": 10, "fraction": 0.3,
              "data_seed": 0, "scales": "1", "gamma": 0.8, "hidden": 16,
              "encoder_layers": 2, "dropout": 0.0, "encoder_bias": True,
              "eps_f": 1e-5, "lr": 0.01,
              "wd": 0.0, "epochs": 500, "patience": 100, "seed": 0,
              "tol": 1e-6, "max_iters": 300},
    "eval": {"checkpoint": None, "data": None},
    "probe-range": {"gammas": "0.3,0.5,0.7,0.9", "scales": "1", "length": 60,
                    "theta": 1e-8, "hidden": 10, "seed": 0},
    "bound": {"gamma": None, "theta": None, "m": 1},
}


def main(argv=None) -> int:
    try:
        args = _parse(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:  # argparse reports usage errors itself
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = _effective_config(args)
        handler = {
            "gen-chains": _cmd_gen_chains,
            "gen-colors": _cmd_gen_colors,
            "train": _cmd_train,
            "eval": _cmd_eval,
            "probe-range": _cmd_probe_range,
            "bound": _cmd_bound,
        }[args.command]
        return handler(cfg)
    except DivergenceError as exc:
        print(f"error: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def _parse(argv):
    parser = argparse.ArgumentParser(prog="msignn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_out=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        if with_out:
            p.add_argument("--out", help=f"output directory (default: ${OUT_DIR_ENV})")

    p = sub.add_parser("gen-chains", help="generate the directed-chains dataset")
    common(p)
    p.add_argument("--classes", type=int)
    p.add_argument("--chains-per-class", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("gen-colors", help="generate the color-counting dataset")
    common(p)
    p.add_argument("--colors", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("train", help="train a model on a dataset")
    common(p)
    p.add_argument("--data", help="dataset directory produced by gen-*")
    p.add_argument("--gen", choices=["chains", "colors"],
                   help="generate the dataset in-process instead of loading one")
    p.add_argument("--classes", type=int)
    p.add_argument("--chains-per-class", type=int)
    p.add_argument("--colors", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--fraction", type=float)
    p.add_argument("--data-seed", type=int)
    p.add_argument("--scales", help="comma-separated scale exponents, e.g. '1,2'")
    p.add_argument("--gamma", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--encoder-layers", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--encoder-bias", dest="encoder_bias", action="store_true",
                   default=None)
    p.add_argument("--no-encoder-bias", dest="encoder_bias", action="store_false",
                   default=None)
    p.add_argument("--eps-f", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--wd", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iters", type=int)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    common(p, with_out=False)
    p.add_argument("--checkpoint")
    p.add_argument("--data")

    p = sub.add_parser("probe-range", help="measure decay curves on a directed chain")
    common(p)
    p.add_argument("--gammas", help="comma-separated contraction factors")
    p.add_argument("--scales", help="comma-separated scale exponents")
    p.add_argument("--length", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("bound", help="print the closed-form theta-effective range bound")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--gamma", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--m", type=int)

    return parser.parse_args(argv)


def _effective_config(args) -> dict:
    """defaults < config file < explicit flags."""
    cfg = dict(DEFAULTS[args.command])
    cfg["out"] = None
    provided = {k: v for k, v in vars(args).items()
                if k not in ("command", "config") and v is not None}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{args.config}: invalid JSON: {exc}") from exc
        unknown = set(file_cfg) - set(cfg)
        if unknown:
            raise ValueError(f"{args.config}: unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    cfg.update(provided)
    return cfg


def _out_dir(cfg) -> Path:
    out = cfg.get("out") or os.environ.get(OUT_DIR_ENV)
    if not out:
        raise ValueError(f"no output directory: pass --out or set ${OUT_DIR_ENV}")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _echo_config(cfg, command, out: Path) -> None:
    payload = {"command": command, **{k: v for k, v in cfg.items() if k != "out"}}
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def _parse_int_list(text, what) -> list[int]:
    try:
        values = [int(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"bad {what} list: {text!r}") from exc
    if not values:
        raise ValueError(f"empty {what} list")
    return values


def _parse_float_list(text, what) -> list[float]:
    try:
        values = [float(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ValueError(f"bad {what} list: {text!r}") from exc
    if not values:
        raise ValueError(f"empty {what} list")
    return values


# -- commands ---------------------------------------------------------------


def _cmd_gen_chains(cfg) -> int:
    out = _out_dir(cfg)
    spec = datasets.ChainsSpec(num_classes=cfg["classes"],
                               chains_per_class=cfg["chains_per_class"],
                               length=cfg["length"], seed=cfg["seed"])
    datasets.save_dataset(datasets.gen_chains(spec), out)
    _echo_config(cfg, "gen-chains", out)
    print(f"wrote chains dataset ({spec.num_classes * spec.chains_per_class * spec.length} "
          f"nodes) to {out}")
    return EXIT_OK


def _cmd_gen_colors(cfg) -> int:
    out = _out_dir(cfg)
    spec = datasets.ColorCountingSpec(num_colors=cfg["colors"], num_chains=cfg["chains"],
                                      length=cfg["length"],
                                      colored_fraction=cfg["fraction"], seed=cfg["seed"])
    datasets.save_dataset(datasets.gen_color_counting(spec), out)
    _echo_config(cfg, "gen-colors", out)
    print(f"wrote color-counting dataset ({spec.num_chains * spec.length} nodes) to {out}")
    return EXIT_OK


def _load_train_data(cfg) -> datasets.Dataset:
    if cfg.get("data"):
        return datasets.load_dataset(cfg["data"])
    if cfg.get("gen") == "chains":
        return datasets.gen_chains(datasets.ChainsSpec(
            num_classes=cfg["classes"], chains_per_class=cfg["chains_per_class"],
            length=cfg["length"], seed=cfg["data_seed"]))
    if cfg.get("gen") == "colors":
        return datasets.gen_color_counting(datasets.ColorCountingSpec(
            num_colors=cfg["colors"], num_chains=cfg["chains"], length=cfg["length"],
            colored_fraction=cfg["fraction"], seed=cfg["data_seed"]))
    raise ValueError("train needs --data DIR or --gen chains|colors")


def _cmd_train(cfg) -> int:
    out = _out_dir(cfg)
    data = _load_train_data(cfg)
    scales = _parse_int_list(cfg["scales"], "scale")
    solver = SolverConfig(tol=cfg["tol"], max_iters=cfg["max_iters"])
    rng = np.random.default_rng(cfg["seed"])
    graph = data.graph
    model = init_model(rng, feature_dim=graph.feature_dim, hidden_dim=cfg["hidden"],
                       num_classes=graph.num_classes, scale_exponents=scales,
                       gamma=cfg["gamma"], eps_f=cfg["eps_f"],
                       encoder_layers=cfg["encoder_layers"], dropout=cfg["dropout"],
                       encoder_bias=cfg["encoder_bias"], solver_cfg=solver)
    tcfg = train.TrainConfig(epochs=cfg["epochs"], lr=cfg["lr"], weight_decay=cfg["wd"],
                             seed=cfg["seed"], patience=cfg["patience"])
    history = train.train_loop(model, data, tcfg)
    train.history_to_csv(history, out / "history.csv")
    save_checkpoint(model, out / "checkpoint.json")
    metrics = _node_metrics(model, data)
    metrics["epochs_run"] = len(history)
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, sort_keys=True)
        fh.write("\n")
    _echo_config(cfg, "train", out)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def _node_metrics(model, data) -> dict:
    graph = data.graph
    preds = model.predict(graph)
    if graph.multilabel:
        metric = train.micro_f1
        name = "micro_f1"
    else:
        metric = train.accuracy
        name = "accuracy"
    return {
        "task": model.task,
        "metric": name,
        "train": metric(preds, graph.labels, data.train_mask),
        "val": metric(preds, graph.labels, data.val_mask),
        "test": metric(preds, graph.labels, data.test_mask),
    }


def _cmd_eval(cfg) -> int:
    if not cfg.get("checkpoint") or not cfg.get("data"):
        raise ValueError("eval needs --checkpoint FILE and --data DIR")
    model = load_checkpoint(cfg["checkpoint"])
    data = datasets.load_dataset(cfg["data"])
    metrics = _node_metrics(model, data)
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def _cmd_probe_range(cfg) -> int:
    out = _out_dir(cfg)
    gammas = _parse_float_list(cfg["gammas"], "gamma")
    scales = _parse_int_list(cfg["scales"], "scale")
    length = cfg["length"]
    theta = cfg["theta"]
    hidden = cfg["hidden"]
    rng = np.random.default_rng(cfg["seed"])

    chain = datasets.gen_chains(datasets.ChainsSpec(
        num_classes=1, chains_per_class=1, length=length, seed=cfg["seed"]))
    graph = chain.graph
    encoder = MlpEncoder(
        weights=[glorot_uniform(rng, hidden, graph.feature_dim),
                 glorot_uniform(rng, hidden, hidden)],
        biases=[np.zeros(hidden), np.zeros(hidden)])
    f_weight = glorot_uniform(rng, hidden, hidden, gain=0.5)
    solver = SolverConfig(tol=1e-15, max_iters=length + 50)

    def encode(x):
        return encoder.forward(x)[0]

    summary = []
    for gamma in gammas:
        for m in scales:
            module = ScaleModule(f_weight=f_weight, gamma=gamma, scale_m=m)
            curve = probe.measure_decay(module, graph, encode, p=0, cfg=solver)
            name = f"curve_g{gamma:g}_m{m}.csv"
            probe.write_curve_csv(curve, out / name)
            summary.append({
                "gamma": gamma,
                "m": m,
                "theta": theta,
                "empirical_range": probe.empirical_range(curve, theta),
                "range_bound": probe.range_bound(gamma, theta, m),
                "file": name,
            })
    with open(out / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("gamma,m,theta,empirical_range,range_bound,file\n")
        for row in summary:
            fh.write(f"{row['gamma']:g},{row['m']},{row['theta']:g},"
                     f"{row['empirical_range']},{row['range_bound']},{row['file']}\n")
    _echo_config(cfg, "probe-range", out)
    for row in summary:
        print(f"gamma={row['gamma']:g} m={row['m']}: empirical range "
              f"{row['empirical_range']}, bound {row['range_bound']}")
    return EXIT_OK


def _cmd_bound(cfg) -> int:
    if cfg.get("gamma") is None or cfg.get("theta") is None:
        raise ValueError("bound needs --gamma and --theta")
    print(probe.range_bound(cfg["gamma"], cfg["theta"], cfg["m"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
