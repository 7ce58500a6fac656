# Command-line entry point: python cli.py <command> [options]
#
#   gen        generate a synthetic dataset directory
#   train      train a model and write checkpoint + metrics CSV
#   eval       evaluate a checkpoint (av, or a/v through the unimodal path)
#   gradcheck  finite-difference check of every primitive and the full loss
#   params     trainable / frozen parameter accounting
#   ablate     run an ablation suite and its trend checks
#   saliency   export the patch-grid saliency map of one test sample
#
# JSON lines go to standard output; status messages go to standard error.
import argparse
import json
import math
import os
import sys

from ablations.runner import run_ablation
from autograd.gradcheck import check_primitives
from configs import RunConfig, describe_keys, suites
from data.configs import STFT_OVERLAP, STFT_WINDOW
from data.oracle import oracle_accuracy
from data.sample_loader import SampleLoader
from data.synthetic import SynthSpec, gen_dataset
from models.mavt.backbone import frozen_count_closed_form
from models.mavt.gradcheck import MODEL_TOLERANCE, PRIMITIVE_TOLERANCE, check_model
from models.mavt.saliency import argmax_patch, write_pgm
from models.mavt.tokens import trainable_count_closed_form
from models.model_factory import ModelFactory
from training.configs import METRICS_NAME
from utils.common import print_colored
from utils.errors import MavtError, NonFiniteLossError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_THRESHOLD = 3


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print_colored(f"{self.prog}: error: {message}", "error")
        sys.exit(EXIT_USAGE)


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item"):
        return _clean(value.item())
    return value


def emit(record):
    """One JSON object per line on standard output; NaN becomes null."""
    print(json.dumps(_clean(record), sort_keys=False), flush=True)


def _add_config_keys(parser):
    group = parser.add_argument_group("configuration keys (override the config file)")
    for key, default, description in describe_keys():
        group.add_argument(
            f"--{key}",
            dest=f"cfg_{key}",
            default=None,
            metavar="VALUE",
            help=f"{description} (default: {default})",
        )


def _overrides(args):
    return {
        name[len("cfg_") :]: value
        for name, value in vars(args).items()
        if name.startswith("cfg_") and value is not None
    }


def _load_config(path, args):
    return RunConfig.from_file(path, _overrides(args))


def cmd_gen(args):
    config = _load_config(args.spec, args)
    spec = SynthSpec.from_config(config)
    synth = gen_dataset(spec)
    SampleLoader(debug=args.debug).save_dataset(args.out, synth)
    with open(os.path.join(args.out, "spec.cfg"), "w", encoding="utf-8") as handle:
        handle.write(config.dump())
    emit(
        {
            "command": "gen",
            "out": args.out,
            "train": len(synth.train),
            "test": len(synth.test),
            "digest": synth.digest(),
            "oracle_acc": oracle_accuracy(synth.test, spec.visual_prototypes),
            "stft_window": STFT_WINDOW,
            "stft_overlap": STFT_OVERLAP,
        }
    )
    print_colored(f"Dataset written to {args.out}", "success")
    return EXIT_OK


def cmd_train(args):
    config = _load_config(args.config, args)
    if args.debug:
        config.display()
    train_set, test_set = SampleLoader(debug=args.debug).load_dataset(args.data)
    model = ModelFactory(debug=args.debug).create_model(config.model, config)
    result = model.train(train_set, test_set, out_dir=args.out)
    emit(
        {
            "command": "train",
            "checkpoint": result.checkpoint_path,
            "metrics": os.path.join(args.out, METRICS_NAME),
            "best_epoch": result.best_epoch,
            "best_fg_acc": result.best_fg_acc,
            "frozen_digest": result.frozen_digest,
        }
    )
    print_colored("Model training and saving complete!", "success")
    return EXIT_OK


def cmd_eval(args):
    model = ModelFactory(debug=args.debug).load_checkpoint(args.ckpt, _overrides(args))
    _, test_set = SampleLoader(debug=args.debug).load_dataset(args.data)
    modality = None if args.modality == "av" else args.modality
    row = model.evaluate(test_set, modality=modality)
    emit({"command": "eval", "modality": args.modality, **row})
    return EXIT_OK


def cmd_gradcheck(args):
    config = _load_config(args.config, args)
    h = args.h if args.h is not None else config.gradcheck_h
    failed = False
    for name, error in check_primitives(config.seed, h).items():
        passed = error < PRIMITIVE_TOLERANCE
        failed |= not passed
        emit({"target": name, "kind": "primitive", "max_rel_err": error, "passed": passed})
    for name, error in check_model(config, h).items():
        passed = error < MODEL_TOLERANCE
        failed |= not passed
        emit({"target": name, "kind": "model", "max_rel_err": error, "passed": passed})
    if failed:
        print_colored("Gradient check failed", "error")
        return EXIT_THRESHOLD
    print_colored("Gradient check passed", "success")
    return EXIT_OK


def cmd_params(args):
    config = _load_config(args.config, args)
    model = ModelFactory(debug=args.debug).create_model(config.model, config)
    trainable, frozen = model.parameter_counts()
    expected_trainable = trainable_count_closed_form(config)
    expected_frozen = frozen_count_closed_form(config) * (2 if config.separate_backbones else 1)
    matches = trainable == expected_trainable and frozen == expected_frozen
    emit(
        {
            "command": "params",
            "trainable": trainable,
            "frozen": frozen,
            "ratio": trainable / (trainable + frozen),
            "closed_form_trainable": expected_trainable,
            "closed_form_frozen": expected_frozen,
            "matches": matches,
        }
    )
    return EXIT_OK if matches else EXIT_THRESHOLD


def cmd_ablate(args):
    config = _load_config(args.config, args)
    result = run_ablation(args.suite, config, out_dir=args.out, debug=args.debug)
    for variant, values in result.table.iterrows():
        emit({"suite": args.suite, "variant": variant, **values.to_dict()})
    for check in result.trends:
        emit(
            {
                "suite": args.suite,
                "check": check.name,
                "passed": check.passed,
                "detail": check.detail,
            }
        )
    return EXIT_OK if result.passed else EXIT_THRESHOLD


def cmd_saliency(args):
    model = ModelFactory(debug=args.debug).load_checkpoint(args.ckpt, _overrides(args))
    _, test_set = SampleLoader(debug=args.debug).load_dataset(args.data)
    if not 0 <= args.idx < len(test_set):
        raise ValueError(f"--idx {args.idx} outside 0..{len(test_set) - 1}")
    saliency, class_idx = model.saliency(test_set.subset([args.idx]), args.class_idx)
    write_pgm(args.out, saliency)
    row, col = argmax_patch(saliency)
    emit(
        {
            "command": "saliency",
            "out": args.out,
            "class": class_idx,
            "argmax_row": row,
            "argmax_col": col,
        }
    )
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="mavt", description="Prompt-token audio-visual transformer toolkit")
    parser.add_argument("--debug", action="store_true", help="Print extra diagnostics")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = commands.add_parser("gen", help="Generate a synthetic dataset")
    gen.add_argument("--spec", default=None, help="Config file with the data keys")
    gen.add_argument("--out", required=True, help="Dataset directory")
    _add_config_keys(gen)
    gen.set_defaults(handler=cmd_gen)

    train = commands.add_parser("train", help="Train a model")
    train.add_argument("--config", default=None, help="Config file")
    train.add_argument("--data", required=True, help="Dataset directory")
    train.add_argument("--out", required=True, help="Output directory")
    _add_config_keys(train)
    train.set_defaults(handler=cmd_train)

    evaluate = commands.add_parser("eval", help="Evaluate a checkpoint")
    evaluate.add_argument("--ckpt", required=True, help="Checkpoint file")
    evaluate.add_argument("--data", required=True, help="Dataset directory")
    evaluate.add_argument("--modality", choices=["av", "a", "v"], default="av")
    _add_config_keys(evaluate)
    evaluate.set_defaults(handler=cmd_eval)

    gradcheck = commands.add_parser("gradcheck", help="Finite-difference gradient check")
    gradcheck.add_argument("--config", default=None, help="Config file")
    gradcheck.add_argument("--h", type=float, default=None, help="Central-difference step")
    _add_config_keys(gradcheck)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    params = commands.add_parser("params", help="Parameter accounting")
    params.add_argument("--config", default=None, help="Config file")
    _add_config_keys(params)
    params.set_defaults(handler=cmd_params)

    ablate = commands.add_parser("ablate", help="Run an ablation suite")
    ablate.add_argument("--suite", required=True, choices=suites)
    ablate.add_argument("--config", default=None, help="Config file")
    ablate.add_argument("--out", required=True, help="Output directory")
    _add_config_keys(ablate)
    ablate.set_defaults(handler=cmd_ablate)

    saliency = commands.add_parser("saliency", help="Export a saliency map")
    saliency.add_argument("--ckpt", required=True, help="Checkpoint file")
    saliency.add_argument("--data", required=True, help="Dataset directory")
    saliency.add_argument("--idx", type=int, required=True, help="Test sample index")
    saliency.add_argument("--out", required=True, help="Output .pgm file")
    saliency.add_argument(
        "--class",
        dest="class_idx",
        type=int,
        default=None,
        help="Class to explain (default: predicted class)",
    )
    _add_config_keys(saliency)
    saliency.set_defaults(handler=cmd_saliency)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except NonFiniteLossError as e:
        print_colored(f"{e}; diagnostics: {e.diagnostics.get('path')}", "error")
        emit({"command": args.command, "error": str(e), "diagnostics": e.diagnostics.get("path")})
        return EXIT_NUMERICAL
    except (MavtError, ValueError, OSError) as e:
        print_colored(f"Error: {e}", "error")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
