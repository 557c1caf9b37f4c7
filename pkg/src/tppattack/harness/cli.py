"""Command-line front end.

Subcommands: simulate, train, attack-train, attack-emit, defend, evaluate,
report. Configuration comes from an optional ``--config`` file plus
repeatable ``--set section.key=value`` overrides; every random choice is
controlled by ``--seed``. Exit codes: 0 success, 1 configuration/usage
error, 2 numeric failure.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..attack import AttackParams, emit_adversarial
from ..baselines import BaselineConfig, mifgsm_attack, pgd_attack, random_perm_control
from ..ctes import Dataset, load_jsonl, save_jsonl, simulate_dataset
from ..ctes.io import atomic_write_text
from ..mtpp import MtppParams, TrainConfig, load_params, save_params, train_mle
from .config import ConfigError, apply_overrides, coerce, load_config
from .experiment import (
    AttackTrainConfig, DefenseConfig, MetricsRow, evaluate, split_dataset,
    train_attack, train_defense,
)

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser():
    parser = _Parser(prog="tppattack",
                     description="Adversarial attacks on marked temporal "
                                 "point process models")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config entry")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("simulate", help="write a synthetic Hawkes dataset")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--sequences", type=int, default=200)
    p.add_argument("--marks", type=int, default=3)
    p.add_argument("--mu", type=float, default=0.5, help="base rate per mark")
    p.add_argument("--alpha", type=float, default=0.1, help="uniform excitation entry")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=20.0)
    p.add_argument("--max-len", type=int, default=64)
    p.add_argument("--name", default="hawkes")

    p = sub.add_parser("train", help="maximum-likelihood training on clean data")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("attack-train", help="train the permutation attack")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--adversary", required=True,
                   help="frozen model checkpoint the attacker sees "
                        "(the learner for white-box, a surrogate for black-box)")
    p.add_argument("--mode", choices=("whitebox", "blackbox"), default="whitebox")
    p.add_argument("--out", required=True)

    p = sub.add_parser("attack-emit", help="emit adversarial sequences")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--adversary", required=True)
    p.add_argument("--attack", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", choices=("train", "val", "test", "all"), default="test")

    p = sub.add_parser("defend", help="adversarially robust training")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--init", help="warm-start model checkpoint")
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="score the learner under an attack")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, help="learner checkpoint under test")
    p.add_argument("--method", required=True,
                   choices=("none", "permtpp", "pgd", "mifgsm", "random"))
    p.add_argument("--mode", choices=("whitebox", "blackbox"), default="whitebox")
    p.add_argument("--attack", help="attack checkpoint (permtpp)")
    p.add_argument("--adversary", help="model the attacker uses (defaults to --model)")
    p.add_argument("--target-distance", type=float,
                   help="hard-distance target for the random control")
    p.add_argument("--out", required=True, help="CSV row file to write")

    p = sub.add_parser("report", help="merge evaluation rows into one CSV")
    p.add_argument("--out", required=True)
    p.add_argument("rows", nargs="+")
    return parser


def _config_from(args):
    config = load_config(args.config) if getattr(args, "config", None) \
        else {s: {} for s in ("data", "model", "attack", "defense")}
    return apply_overrides(config, getattr(args, "set", []))


def _require_file(path, what):
    if path is None:
        raise ConfigError(f"missing required {what}")
    if not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")
    return path


def _load_model(path) -> MtppParams:
    values, meta = load_params(_require_file(path, "model checkpoint"), kind="mtpp")
    num_marks, dim = int(meta["num_marks"]), int(meta["dim"])
    expected = MtppParams.shapes(num_marks, dim)
    for name, shape in expected.items():
        if name not in values or values[name].shape != shape:
            raise ConfigError(f"{path}: bad shape for {name}")
    return MtppParams(values, num_marks, dim)


def _save_model(path, params: MtppParams):
    save_params(path, params.values, kind="mtpp",
                meta={"num_marks": params.num_marks, "dim": params.dim})


def _load_attack(path) -> AttackParams:
    values, meta = load_params(_require_file(path, "attack checkpoint"), kind="attack")
    return AttackParams(values, int(meta["num_marks"]), int(meta["dim"]),
                        hidden=int(meta["hidden"]), tau=float(meta["tau"]),
                        n_iter=int(meta["n_iter"]), rho_d=float(meta["rho_d"]),
                        rho_ab=float(meta["rho_ab"]), rho_c=float(meta["rho_c"]))


def _save_attack(path, attack: AttackParams):
    save_params(path, attack.values, kind="attack",
                meta={"num_marks": attack.num_marks, "dim": attack.dim,
                      "hidden": attack.hidden, "tau": attack.tau,
                      "n_iter": attack.n_iter, "rho_d": attack.rho_d,
                      "rho_ab": attack.rho_ab, "rho_c": attack.rho_c})


def _splits(args, config):
    ds = load_jsonl(_require_file(args.data, "dataset"))
    fracs = (coerce(config, "data", "train_frac", float, 0.7),
             coerce(config, "data", "val_frac", float, 0.1),
             coerce(config, "data", "test_frac", float, 0.2))
    split_seed = coerce(config, "data", "split_seed", int, 0)
    return ds, split_dataset(ds, fracs, split_seed)


def _attack_train_config(config, seed) -> AttackTrainConfig:
    g = lambda key, kind, default: coerce(config, "attack", key, kind, default)
    return AttackTrainConfig(
        epochs=g("epochs", int, 30), batch_size=g("batch_size", int, 16),
        step_size=g("step_size", float, 1e-3), clip_norm=g("clip_norm", float, 5.0),
        tau_start=g("tau_start", float, 1.0), tau_final=g("tau_final", float, 0.1),
        n_iter=g("n_iter", int, 20), rho_d=g("rho_d", float, 1.0),
        rho_ab=g("rho_ab", float, 10.0), rho_c=g("rho_c", float, 1.0),
        hinge_margin=g("hinge_margin", float, 0.0),
        hard_perm=g("hard_perm", bool, False),
        seed=seed, verbose=g("verbose", bool, False))


# ---------------------------------------------------------------- commands

def _cmd_simulate(args, config):
    marks = args.marks
    mu = np.full(marks, args.mu)
    alpha = np.full((marks, marks), args.alpha)
    ds = simulate_dataset(args.sequences, mu, alpha, args.beta, args.horizon,
                          args.seed, max_len=args.max_len, name=args.name)
    save_jsonl(ds, args.out)
    print(f"wrote {len(ds)} sequences ({ds.num_marks} marks) to {args.out}")
    return 0


def _cmd_train(args, config):
    ds, (train_seqs, val_seqs, _) = _splits(args, config)
    dim = coerce(config, "model", "dim", int, 8)
    params = MtppParams.init(ds.num_marks, dim, seed=args.seed)
    cfg = TrainConfig(
        epochs=coerce(config, "model", "epochs", int, 30),
        batch_size=coerce(config, "model", "batch_size", int, 16),
        step_size=coerce(config, "model", "step_size", float, 1e-3),
        k_int=coerce(config, "model", "k_int", int, 20),
        seed=args.seed, verbose=coerce(config, "model", "verbose", bool, False))
    _, history = train_mle(train_seqs, params, cfg, val_seqs)
    _save_model(args.out, params)
    print(f"trained {cfg.epochs} epochs; final train nll "
          f"{history['train'][-1]:.4f}; checkpoint {args.out}")
    return 0


def _cmd_attack_train(args, config):
    ds, (train_seqs, val_seqs, _) = _splits(args, config)
    adversary = _load_model(args.adversary)
    cfg = _attack_train_config(config, args.seed)
    attack = AttackParams.init(adversary.num_marks, adversary.dim,
                               hidden=coerce(config, "attack", "hidden", int, 16),
                               seed=args.seed)
    _, history = train_attack(train_seqs, adversary, attack, cfg, val_seqs)
    _save_attack(args.out, attack)
    print(f"{args.mode} attack trained {cfg.epochs} epochs; final objective "
          f"{history['train'][-1]:.4f}; checkpoint {args.out}")
    return 0


def _cmd_attack_emit(args, config):
    ds, (train_seqs, val_seqs, test_seqs) = _splits(args, config)
    adversary = _load_model(args.adversary)
    attack = _load_attack(args.attack)
    seqs = {"train": train_seqs, "val": val_seqs, "test": test_seqs,
            "all": ds.sequences}[args.split]
    emitted, extras = [], []
    for seq in seqs:
        out_seq, report = emit_adversarial(seq, attack, adversary)
        emitted.append(out_seq)
        extras.append({"perm": report["perm"]})
    save_jsonl(Dataset(emitted, ds.num_marks, name=ds.name + "-adv"),
               args.out, extras=extras)
    print(f"emitted {len(emitted)} adversarial sequences to {args.out}")
    return 0


def _cmd_defend(args, config):
    ds, (train_seqs, _, _) = _splits(args, config)
    dim = coerce(config, "model", "dim", int, 8)
    if args.init:
        model = _load_model(args.init)
    else:
        model = MtppParams.init(ds.num_marks, dim, seed=args.seed)
    acfg = _attack_train_config(config, args.seed)
    dcfg = DefenseConfig(
        rounds=coerce(config, "defense", "rounds", int, 15),
        k_adv=coerce(config, "defense", "k_adv", int, 2),
        k_def=coerce(config, "defense", "k_def", int, 2),
        step_size=coerce(config, "defense", "step_size", float, 1e-3),
        attack=acfg, verbose=coerce(config, "defense", "verbose", bool, False))
    attack = AttackParams.init(model.num_marks, model.dim,
                               hidden=coerce(config, "attack", "hidden", int, 16),
                               seed=args.seed + 1)
    train_defense(train_seqs, model, attack, dcfg)
    _save_model(args.out, model)
    print(f"defense trained {dcfg.rounds} rounds; checkpoint {args.out}")
    return 0


def _cmd_evaluate(args, config):
    ds, (_, _, test_seqs) = _splits(args, config)
    learner = _load_model(args.model)
    rho_c = coerce(config, "attack", "rho_c", float, 1.0)
    rng = np.random.default_rng(args.seed)
    if args.method == "none":
        perturb = lambda s: s
    elif args.method == "permtpp":
        attack = _load_attack(_require_file(args.attack, "attack checkpoint"))
        adversary = _load_model(args.adversary or args.model)
        perturb = lambda s: emit_adversarial(s, attack, adversary)[0]
    elif args.method in ("pgd", "mifgsm"):
        adversary = _load_model(args.adversary or args.model)
        cfg = BaselineConfig(
            eps_budget=coerce(config, "attack", "eps_budget", float, 0.5),
            steps=coerce(config, "attack", "baseline_steps", int, 10),
            step_size=coerce(config, "attack", "baseline_step_size", float, 0.1),
            momentum=coerce(config, "attack", "momentum", float, 0.9))
        fn = pgd_attack if args.method == "pgd" else mifgsm_attack
        perturb = lambda s: fn(s, adversary, cfg)
    else:  # random control
        if args.target_distance is None:
            raise ConfigError("--target-distance is required for --method random")
        perturb = lambda s: random_perm_control(s, args.target_distance, rng,
                                                rho_c=rho_c)
    row = evaluate(learner, test_seqs, perturb, args.method, args.mode,
                   rho_c=rho_c, seed=args.seed)
    atomic_write_text(args.out, MetricsRow.CSV_HEADER + "\n" + row.to_csv() + "\n")
    print(row.to_csv())
    return 0


def _cmd_report(args, config):
    lines = [MetricsRow.CSV_HEADER]
    for path in args.rows:
        with open(_require_file(path, "row file"), "r", encoding="utf-8") as fh:
            for line in fh.read().splitlines():
                if line and line != MetricsRow.CSV_HEADER:
                    lines.append(line)
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"merged {len(lines) - 1} rows into {args.out}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "train": _cmd_train,
    "attack-train": _cmd_attack_train,
    "attack-emit": _cmd_attack_emit,
    "defend": _cmd_defend,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        config = _config_from(args) if args.command != "report" else {}
        return _COMMANDS[args.command](args, config)
    except (ConfigError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"tppattack: error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"tppattack: numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
