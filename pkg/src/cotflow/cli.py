"""Command-line surface: gen-data, train-not, train-cot, sample, edit, eval, ablate.

Every subcommand is deterministic given its flags (all seeds explicit),
never mutates its inputs, and reports failures as one machine-parsable
line `error[<code>]: <message>` with exit codes 0 ok, 2 usage, 3 data,
4 numeric, 5 version.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np

from .ablate import AblateConfig, VARIANTS, run_ablation
from .checkpoints import (
    checkpoint_from_encoder,
    checkpoint_from_model,
    encoder_from_checkpoint,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .datasets import FAMILIES, DatasetSpec, gen_dataset
from .encoder import CotTrainConfig, train_cot
from .errors import CotFlowError, DataError, UsageError
from .neural_ot import TrainConfig, train_neural_ot
from .oracles import compute_metrics
from .rng import Rng
from .sampleio import read_samples, write_samples, write_scatter_svg
from .sampling import (
    MaskedGuidance,
    SampleSchedule,
    edit_augment,
    edit_compose,
    edit_couple,
    sample_ancestral,
    sample_multi_step,
    sample_one_step,
)

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc


def _config_from_dict(cls, doc: dict, what: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(doc) - names)
    if unknown:
        raise UsageError(f"unknown {what} config keys: {', '.join(unknown)}")
    missing = sorted(names - set(doc))
    if missing:
        raise UsageError(f"{what} config is missing keys: {', '.join(missing)}")
    kwargs = dict(doc)
    for key in ("map_hidden", "psi_hidden", "body_hidden"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return cls(**kwargs)


def config_to_dict(cfg) -> dict:
    doc = dataclasses.asdict(cfg)
    for key, val in doc.items():
        if isinstance(val, tuple):
            doc[key] = list(val)
    return doc


def load_train_config(path) -> TrainConfig:
    return _config_from_dict(TrainConfig, _load_json(path), "train-not")


def load_cot_config(path) -> CotTrainConfig:
    return _config_from_dict(CotTrainConfig, _load_json(path), "train-cot")


def load_ablate_config(path) -> AblateConfig:
    doc = _load_json(path)
    required = {"ot", "cot", "n_eval", "n_proj", "seed"}
    unknown = sorted(set(doc) - required)
    if unknown:
        raise UsageError(f"unknown ablate config keys: {', '.join(unknown)}")
    missing = sorted(required - set(doc))
    if missing:
        raise UsageError(f"ablate config is missing keys: {', '.join(missing)}")
    return AblateConfig(
        ot=_config_from_dict(TrainConfig, doc["ot"], "train-not"),
        cot=_config_from_dict(CotTrainConfig, doc["cot"], "train-cot"),
        n_eval=doc["n_eval"],
        n_proj=doc["n_proj"],
        seed=doc["seed"],
    )


def _parse_dataset(arg: str) -> DatasetSpec:
    """A dataset flag is either a JSON spec file or a bare family name."""
    if os.path.exists(arg):
        return DatasetSpec.from_dict(_load_json(arg))
    if arg in FAMILIES:
        return DatasetSpec(arg, n=1, seed=0)
    raise UsageError(f"--source/--target must be a spec file or one of {', '.join(FAMILIES)}")


def _read_row(path, what: str) -> np.ndarray:
    rows = read_samples(path)
    if rows.shape[0] != 1:
        raise DataError(f"{what} file {path} must contain exactly one row, got {rows.shape[0]}")
    return rows[0]


def _check_dim(batch: np.ndarray, dim: int, what: str) -> None:
    if batch.shape[-1] != dim:
        raise DataError(f"{what} has dimension {batch.shape[-1]}, model expects {dim}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cotflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a dataset CSV", add_help=True)
    p.add_argument("--dist", required=True, choices=FAMILIES)
    p.add_argument("--n", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--params", default="{}", help="JSON object of family parameters")
    p.add_argument("--svg", default=None, help="also write a scatter SVG (2-D only)")

    p = sub.add_parser("train-not", help="train the transport map and potential")
    p.add_argument("--source", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train-cot", help="train the origin encoder")
    p.add_argument("--source", required=True)
    p.add_argument("--not", dest="not_ckpt", required=True, metavar="NOT_CKPT")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sample", help="translate source samples")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--steps", required=True, type=int)
    p.add_argument("--sampler", choices=("self-aug", "ancestral"), default="self-aug")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", default=None)

    p = sub.add_parser("edit", help="zero-shot editing operations")
    esub = p.add_subparsers(dest="edit_op", required=True)
    e = esub.add_parser("compose", help="masked composition then re-synthesis")
    e.add_argument("--model", required=True)
    e.add_argument("--base", required=True)
    e.add_argument("--mask", required=True)
    e.add_argument("--patch", required=True)
    e.add_argument("--t", required=True, type=float)
    e.add_argument("--seed", required=True, type=int)
    e.add_argument("--out", required=True)
    e = esub.add_parser("couple", help="shape-texture coupling")
    e.add_argument("--model", required=True)
    e.add_argument("--shape", required=True)
    e.add_argument("--texture", required=True)
    e.add_argument("--t", required=True, type=float)
    e.add_argument("--seed", required=True, type=int)
    e.add_argument("--out", required=True)
    e = esub.add_parser("augment", help="fuse one anchor with a driver series")
    e.add_argument("--model", required=True)
    e.add_argument("--anchor", required=True)
    e.add_argument("--drivers", required=True)
    e.add_argument("--t", required=True, type=float)
    e.add_argument("--seed", required=True, type=int)
    e.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="two-sample metrics between CSVs")
    p.add_argument("--gen", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-proj", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("ablate", help="run the five-variant ablation table")
    p.add_argument("--task", required=True, help="source-target family pair, e.g. eight_gaussians-moons")
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None, help="JSON with ot/cot/n_eval/n_proj/seed")
    return parser


def _cmd_gen_data(args) -> int:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--params is not valid JSON: {exc}") from exc
    spec = DatasetSpec(args.dist, args.n, args.seed, params)
    batch = gen_dataset(spec)
    write_samples(args.out, batch)
    if args.svg is not None:
        write_scatter_svg(args.svg, batch)
    return 0


def _cmd_train_not(args) -> int:
    cfg = load_train_config(args.config)
    source = _parse_dataset(args.source)
    target = _parse_dataset(args.target)
    result = train_neural_ot(cfg, source, target, Rng(cfg.seed))
    save_checkpoint(args.out, checkpoint_from_model(result.model))
    return 0


def _cmd_train_cot(args) -> int:
    cfg = load_cot_config(args.config)
    data = _parse_dataset(args.source)
    model = model_from_checkpoint(load_checkpoint(args.not_ckpt))
    result = train_cot(cfg, data, model, Rng(cfg.seed))
    save_checkpoint(args.out, checkpoint_from_encoder(result.encoder))
    return 0


def _cmd_sample(args) -> int:
    enc = encoder_from_checkpoint(load_checkpoint(args.model))
    batch = read_samples(args.input)
    _check_dim(batch, enc.dim, f"input {args.input}")
    if args.steps < 1:
        raise UsageError(f"--steps must be >= 1, got {args.steps}")
    if args.steps == 1:
        out = sample_one_step(enc, batch)
    elif args.sampler == "self-aug":
        out = sample_multi_step(enc, batch, SampleSchedule.increasing(args.steps), Rng(args.seed))
    else:
        out = sample_ancestral(enc, batch, SampleSchedule.decreasing(args.steps), Rng(args.seed))
    write_samples(args.out, out)
    if args.svg is not None:
        write_scatter_svg(args.svg, out)
    return 0


def _cmd_edit(args) -> int:
    enc = encoder_from_checkpoint(load_checkpoint(args.model))
    rng = Rng(args.seed)
    if args.edit_op == "compose":
        base = _read_row(args.base, "base")
        mask = _read_row(args.mask, "mask") != 0.0
        patch = _read_row(args.patch, "patch")
        for name, vec in (("base", base), ("mask", mask), ("patch", patch)):
            _check_dim(vec, enc.dim, name)
        out = edit_compose(enc, MaskedGuidance(base, mask, patch), args.t, rng)[None, :]
    elif args.edit_op == "couple":
        shape = _read_row(args.shape, "shape")
        texture = _read_row(args.texture, "texture")
        _check_dim(shape, enc.dim, "shape")
        _check_dim(texture, enc.dim, "texture")
        out = edit_couple(enc, shape, texture, args.t, rng)[None, :]
    else:
        anchor = _read_row(args.anchor, "anchor")
        drivers = read_samples(args.drivers)
        _check_dim(anchor, enc.dim, "anchor")
        _check_dim(drivers, enc.dim, f"drivers {args.drivers}")
        out = edit_augment(enc, anchor, drivers, args.t, rng)
    write_samples(args.out, out)
    return 0


def _format_metric(v) -> str:
    return "" if v is None else f"{v:.17g}"


def _cmd_eval(args) -> int:
    gen = read_samples(args.gen)
    ref = read_samples(args.ref)
    report = compute_metrics(gen, ref, args.n_proj, Rng(args.seed))
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("energy_distance,sliced_w2,w2_1d,n_projections\n")
        fh.write(
            f"{report.energy_distance:.17g},{report.sliced_w2:.17g},"
            f"{_format_metric(report.w2_1d)},{report.n_projections}\n"
        )
    return 0


def _cmd_ablate(args) -> int:
    parts = args.task.split("-")
    if len(parts) != 2 or parts[0] not in FAMILIES or parts[1] not in FAMILIES:
        raise UsageError(
            f"--task must be <source>-<target> with families from {', '.join(FAMILIES)}"
        )
    source = DatasetSpec(parts[0], n=1, seed=0)
    target = DatasetSpec(parts[1], n=1, seed=0)
    cfg = (
        load_ablate_config(args.config)
        if args.config is not None
        else AblateConfig(ot=TrainConfig(), cot=CotTrainConfig())
    )
    rows, reverse_worst = run_ablation(source, target, cfg)
    with open(args.out, "w", encoding="ascii") as fh:
        fh.write("variant,energy_distance,sliced_w2\n")
        for row in rows:
            fh.write(
                f"{row['variant']},{row['energy_distance']:.17g},{row['sliced_w2']:.17g}\n"
            )
    if not reverse_worst:
        print("warning: reverse_ot was not the worst variant by energy distance", file=sys.stderr)
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train-not": _cmd_train_not,
    "train-cot": _cmd_train_cot,
    "sample": _cmd_sample,
    "edit": _cmd_edit,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
}


def run_cli(argv) -> int:
    """Parse and execute one invocation; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except CotFlowError as err:
        print(f"error[{err.code}]: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"error[data]: {err}", file=sys.stderr)
        return DataError.exit_code


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
