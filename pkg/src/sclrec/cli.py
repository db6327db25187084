"""Command-line front end: run (full pipeline), compare (merge report CSVs),
inspect-checkpoint."""

from __future__ import annotations

import os

# Thread cap must land before the numeric stack loads its BLAS.
_threads = os.environ.get("SCL_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import hashlib
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

import sclrec
from sclrec.augment import AugmentationConfig, compute_similarity, save_similarity
from sclrec.dataset import build_graph, load_ml100k, split_train_test
from sclrec.gcn import init_embeddings, load_checkpoint, propagate, save_checkpoint
from sclrec.loss import LossConfig
from sclrec.metrics import evaluate
from sclrec.train import TrainConfig, finetune, pretrain

METHODS = ("lightgcn", "sgl", "scl-nd", "scl-ed", "scl-nr")
METHOD_AUG = {"scl-nd": "ND", "scl-ed": "ED", "scl-nr": "NR", "sgl": "ED"}


@dataclass
class RunConfig:
    data_path: str = ""
    method: str = "lightgcn"
    out_dir: str = "out"
    split_ratio: float = 0.8
    seed: int = 0
    d: int = 128
    layers: int = 3
    # augmentation
    rho1: float = 0.1
    rho2: float = 0.1
    rho3: float = 0.1
    k_segments: int = 4
    top_n: int = 10
    # loss
    tau: float = 0.2
    lambda_l2: float = 1e-4
    denominator: str = "negatives"
    # optimization
    lr: float = 0.001
    batch_size: int = 1024
    pretrain_epochs: int = 200
    finetune_epochs: int = 400
    eval_every: int = 10
    patience: int = 50
    dtype: str = "float32"

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")


class ConfigError(ValueError):
    pass


def parse_config(text: str) -> RunConfig:
    """Flat `key = value` lines; `#` starts a comment; unknown keys rejected."""
    known = {f.name: f.type for f in fields(RunConfig)}
    types = {f.name: type(getattr(RunConfig(), f.name)) for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected `key = value`")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        try:
            values[key] = types[key](val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value for {key}: {val!r}") from None
    try:
        return RunConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def emit_config(config: RunConfig) -> str:
    return "".join(f"{f.name} = {getattr(config, f.name)}\n" for f in fields(RunConfig))


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(emit_config(config).encode()).hexdigest()


def cmd_run(config: RunConfig) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not Path(config.data_path).is_file():
        print(f"error: dataset not found: {config.data_path}", file=sys.stderr)
        return 1
    log_lines = []

    def log_fn(line):
        log_lines.append(line)
        print(line)

    dataset = split_train_test(load_ml100k(config.data_path),
                               ratio=config.split_ratio, seed=config.seed)
    print(dataset.summary())
    graph = build_graph(dataset.train, dataset.num_users, dataset.num_items)

    aug = AugmentationConfig(rho1=config.rho1, rho2=config.rho2, rho3=config.rho3,
                             k_segments=config.k_segments, top_n=config.top_n,
                             method=METHOD_AUG.get(config.method, "ED"))
    loss_cfg = LossConfig(tau=config.tau, lambda_l2=config.lambda_l2,
                          denominator=config.denominator)
    train_cfg = TrainConfig(lr=config.lr, batch_size=config.batch_size,
                            pretrain_epochs=config.pretrain_epochs,
                            finetune_epochs=config.finetune_epochs,
                            seed=config.seed, eval_every=config.eval_every,
                            patience=config.patience, dtype=config.dtype)

    state = init_embeddings(dataset.num_users, dataset.num_items, config.d,
                            config.seed, dtype=train_cfg.np_dtype)
    state.L = config.layers
    head = None
    sim_index = None
    if config.method.startswith("scl-"):
        sim_index = compute_similarity(graph, config.top_n)
        save_similarity(sim_index, out / "similarity.sclsim")
    if config.method != "lightgcn":
        objective = "infonce" if config.method == "sgl" else "s_infonce"
        if sim_index is None:  # sgl needs no similarity labels, views only
            sim_index = compute_similarity(graph, config.top_n) if objective != "infonce" else None
        state, head, _curve = pretrain(dataset, sim_index, aug, state, head,
                                       loss_cfg, train_cfg, objective=objective,
                                       log_fn=log_fn)
    state, _history = finetune(dataset, state, loss_cfg, train_cfg, log_fn=log_fn)

    save_checkpoint(out / "checkpoint.sclckpt", state, head)
    prop = propagate(state, graph)
    report = evaluate(prop.final_user, prop.final_item, dataset)
    csv_text = report.csv_header() + "\n" + report.csv_row(config.method) + "\n"
    (out / "report.csv").write_text(csv_text)
    (out / "train.log").write_text("".join(line + "\n" for line in log_lines))
    (out / "manifest.txt").write_text(
        f"config_hash={config_hash(config)}\nseed={config.seed}\n"
        f"build=sclrec-{sclrec_version()}\n")
    print(csv_text, end="")
    return 0


def sclrec_version() -> str:
    try:
        from importlib.metadata import version
        return version("sclrec")
    except Exception:
        return "dev"


def cmd_compare(paths) -> int:
    header = None
    rows = []
    for p in paths:
        lines = Path(p).read_text().strip().splitlines()
        if not lines:
            print(f"error: empty report {p}", file=sys.stderr)
            return 1
        if header is None:
            header = lines[0]
        elif lines[0] != header:
            print(f"error: header mismatch in {p}", file=sys.stderr)
            return 1
        rows.extend(lines[1:])
    print(header)
    for row in rows:
        print(row)
    return 0


def cmd_inspect_checkpoint(path) -> int:
    state, head = load_checkpoint(path)
    print(f"num_users={state.user_emb.shape[0]} num_items={state.item_emb.shape[0]} "
          f"d={state.d} L={state.L} head={'yes' if head is not None else 'no'}")
    print(f"user_emb_norm={np.linalg.norm(state.user_emb):.6f} "
          f"item_emb_norm={np.linalg.norm(state.item_emb):.6f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sclrec")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the full pipeline from a config file")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    cmp_ = sub.add_parser("compare", help="merge report CSVs into one table")
    cmp_.add_argument("csvs", nargs="+")
    ins = sub.add_parser("inspect-checkpoint", help="print checkpoint header")
    ins.add_argument("path")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        cfg_path = Path(args.config)
        if not cfg_path.is_file():
            print(f"error: config not found: {args.config}", file=sys.stderr)
            return 2
        try:
            config = parse_config(cfg_path.read_text())
        except ConfigError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        if args.seed is not None:
            config.seed = args.seed
        if args.out is not None:
            config.out_dir = args.out
        return cmd_run(config)
    if args.command == "compare":
        return cmd_compare(args.csvs)
    return cmd_inspect_checkpoint(args.path)


if __name__ == "__main__":
    sys.exit(main())
