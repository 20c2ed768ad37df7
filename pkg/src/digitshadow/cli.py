"""digitshadow command line: preprocess, extract, train, predict, cv, sweep.

Exit codes: 0 success, 1 usage, 2 data error, 3 training divergence.
Logs go to stderr; data artifacts go to the files named by ``--out``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluation
from .dataset_io import (
    DataError,
    GrayImage,
    atomic_write_text,
    load_directory,
    load_idx,
    load_pgm,
    write_pgm,
)
from .features import N_FEATURES, extract_features
from .mlp import (
    MlpLayout,
    TrainConfig,
    TrainingDivergence,
    ModelFormatError,
    classify,
    init_model,
    load_model,
    save_model,
    train,
)
from .preprocess import EmptyGlyphError, normalize_sample, parse_policy

log = logging.getLogger("digitshadow")

EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 1, 2, 3
REFERENCE_HIDDEN = "20,25,30,35,40,45,50,52,53,54,55,60,65,70"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class _Item:
    name: str
    image: GrayImage
    label: int | None


# --- inputs ----------------------------------------------------------------


def _read_images(args) -> tuple[list[_Item], bool]:
    """Images from a PGM file, a digit-directory tree or an IDX pair; returns (items, ink_high)."""
    src = Path(args.input)
    if args.labels:
        ss = load_idx(src, args.labels)
    elif src.is_dir():
        ss = load_directory(src)
        if ss.skipped:
            log.warning("%d file(s) in unlabelled subdirectories skipped", ss.skipped)
    elif src.exists():
        return [_Item(src.stem, load_pgm(src), None)], False
    else:
        raise DataError(f"{src}: no such file or directory")
    return [_Item(s.name, s.image, s.label) for s in ss], ss.ink_high


def _normalized(args):
    """(item, BinaryImage) pairs for every usable sample, plus the empty-glyph count."""
    items, ink_high = _read_images(args)
    invert = ink_high != args.invert
    out, empty = [], 0
    for item in items:
        try:
            out.append((item, normalize_sample(item.image, args.threshold, invert=invert)))
        except EmptyGlyphError:
            empty += 1
            log.warning("%s: empty glyph, skipped", item.name)
    if empty:
        print(f"skipped {empty} empty glyph(s)", file=sys.stderr)
    return out, empty


def _feature_rows(args):
    """(names, X, y) from a features CSV or from images; y is -1 where unknown."""
    src = Path(args.input)
    if src.suffix.lower() == ".csv" and not args.labels:
        return read_features_csv(src)
    pairs, _ = _normalized(args)
    names = [item.name for item, _ in pairs]
    X = np.array([extract_features(b) for _, b in pairs]).reshape(len(pairs), N_FEATURES)
    y = np.array([-1 if item.label is None else item.label for item, _ in pairs], dtype=np.int64)
    return names, X, y


def read_features_csv(path):
    path = Path(path)
    try:
        lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    except FileNotFoundError:
        raise DataError(f"{path}: no such file") from None
    names, X, y = [], [], []
    for n, ln in enumerate(lines, 1):
        fields = ln.split(",")
        if len(fields) != N_FEATURES + 1:
            raise DataError(f"{path}:{n}: expected {N_FEATURES + 1} fields, found {len(fields)}")
        try:
            y.append(int(fields[0]))
            X.append([float(v) for v in fields[1:]])
        except ValueError as exc:
            raise DataError(f"{path}:{n}: {exc}") from None
        if not np.isfinite(X[-1]).all():
            raise DataError(f"{path}:{n}: non-finite feature value")
        names.append(f"row{n}")
    return names, np.array(X).reshape(len(X), N_FEATURES), np.array(y, dtype=np.int64)


def features_csv(X, y) -> str:
    return "".join(
        ",".join([str(int(lab))] + [f"{v:.9g}" for v in row]) + "\n" for row, lab in zip(X, y)
    )


def _labelled(X, y):
    if len(y) == 0:
        raise DataError("no usable samples")
    if (y < 0).any():
        raise DataError("training and evaluation need labelled samples")
    return X, y


# --- commands --------------------------------------------------------------


def cmd_preprocess(args) -> int:
    pairs, _ = _normalized(args)
    out = Path(args.out)
    src = Path(args.input)
    if not args.labels and src.is_file():
        if pairs:
            write_pgm(pairs[0][1].to_gray(), out)
        return 0
    for item, bits in pairs:
        stem = Path(item.name).stem if "/" in item.name else item.name
        dest = out / str(item.label) / f"{stem}.pgm"
        dest.parent.mkdir(parents=True, exist_ok=True)
        write_pgm(bits.to_gray(), dest)
    log.info("wrote %d normalized glyph(s) under %s", len(pairs), out)
    return 0


def cmd_extract(args) -> int:
    _, X, y = _feature_rows(args)
    atomic_write_text(args.out, features_csv(X, y))
    log.info("wrote %d feature row(s) to %s", len(y), args.out)
    return 0


def _log_config(layout, cfg, extra=""):
    log.info(
        "config: layout %s eta=%g alpha=%g max_epochs=%d target_sse=%g targets=%g/%g seed=%d%s",
        layout, cfg.eta, cfg.alpha, cfg.max_epochs, cfg.target_sse, cfg.target_hi, cfg.target_lo,
        cfg.seed, extra,
    )


def cmd_train(args, layout, cfg) -> int:
    _, X, y = _feature_rows(args)
    X, y = _labelled(X, y)
    _log_config(layout, cfg)
    model, hist = train(init_model(layout, cfg.seed), X, y, cfg)
    save_model(model, args.out)
    sse_path = args.sse_log or f"{args.out}.sse.csv"
    atomic_write_text(sse_path, "epoch,mean_sse\n" + "".join(
        f"{i + 1},{v!r}\n" for i, v in enumerate(hist.sse)))
    log.info("trained %d epoch(s), stop: %s, final mean SSE %.6g", hist.epochs_run, hist.stop_reason,
             hist.sse[-1])
    return 0


def cmd_predict(args) -> int:
    try:
        model = load_model(args.model)
    except FileNotFoundError:
        raise DataError(f"{args.model}: no such file") from None
    _, X, _ = _feature_rows(args)
    if len(X):
        for label in np.atleast_1d(classify(model, X)):
            print(int(label))
    return 0


def cmd_cv(args, layout, cfg) -> int:
    _, X, y = _feature_rows(args)
    X, y = _labelled(X, y)
    _log_config(layout, cfg, f" folds={args.folds}")
    result = evaluation.cross_validate(X, y, layout, cfg, args.folds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rep in result.reports:
        save_model(rep.model, out / f"model_fold{rep.fold + 1}.txt")
        atomic_write_text(out / f"confusion_fold{rep.fold + 1}.csv", evaluation.confusion_csv(rep.confusion))
    atomic_write_text(out / "cv.csv", evaluation.cv_csv(result))
    log.info("average recognition rate %.2f%%", result.average)
    return 0


def cmd_sweep(args, layout, cfg) -> int:
    _, X, y = _feature_rows(args)
    X, y = _labelled(X, y)
    _log_config(layout, cfg, f" folds={args.folds} hidden={args.hidden}")
    table = evaluation.sweep_hidden(X, y, args.hidden, cfg, args.folds, n_in=layout.n_in,
                                    n_out=layout.n_out)
    atomic_write_text(args.out, table.to_csv())
    log.info("best average at %d hidden neurons", table.best_hidden)
    return 0


# --- argument parsing ------------------------------------------------------


def _policy(text):
    try:
        return parse_policy(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text):
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("hidden sizes must be positive integers")
    return vals


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="digitshadow", description=__doc__.splitlines()[0], formatter_class=fmt)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out_help):
        sp.add_argument("--in", dest="input", required=True,
                        help="PGM file, directory of 0-9 subdirectories, IDX images file, or features CSV")
        sp.add_argument("--labels", help="IDX labels file (makes --in an IDX images file)")
        sp.add_argument("--out", required=out_help is not None, help=out_help or argparse.SUPPRESS)
        sp.add_argument("--threshold", type=_policy, default="otsu", help="otsu or fixed:<t>")
        sp.add_argument("--invert", action="store_true",
                        help="flip the source's ink polarity (IDX sources already store light ink on dark)")
        sp.add_argument("--seed", type=int, default=0, help="PRNG seed")

    def training(sp, hidden_default, hidden_type=int):
        sp.add_argument("--hidden", type=hidden_type, default=hidden_default, help="hidden neurons")
        sp.add_argument("--eta", type=float, default=0.8, help="learning rate")
        sp.add_argument("--alpha", type=float, default=0.7, help="momentum term")
        sp.add_argument("--epochs", type=int, default=1000, help="maximum epochs")
        sp.add_argument("--target-sse", type=float, default=0.01,
                        help="stop once mean per-sample SSE of an epoch is at most this")
        sp.add_argument("--target-hi", type=float, default=0.9, help="target for the true class")
        sp.add_argument("--target-lo", type=float, default=0.1, help="target for other classes")
        sp.add_argument("--classes", type=int, default=10, help="output neurons")

    sp = sub.add_parser("preprocess", help="normalize samples to 32x32 binary PGMs", formatter_class=fmt)
    common(sp, "output PGM file (single input) or directory")
    sp = sub.add_parser("extract", help="write 88-feature CSV rows", formatter_class=fmt)
    common(sp, "output CSV")
    sp = sub.add_parser("train", help="train an MLP and save it", formatter_class=fmt)
    common(sp, "output model file")
    training(sp, 54)
    sp.add_argument("--sse-log", help="per-epoch SSE CSV (default: <out>.sse.csv)")
    sp = sub.add_parser("predict", help="print one predicted label per sample", formatter_class=fmt)
    common(sp, None)
    sp.add_argument("--model", required=True, help="model file written by train")
    sp = sub.add_parser("cv", help="k-fold cross-validation", formatter_class=fmt)
    common(sp, "output directory")
    training(sp, 54)
    sp.add_argument("--folds", type=int, default=3, help="fold count")
    sp = sub.add_parser("sweep", help="cross-validate over hidden-layer sizes", formatter_class=fmt)
    common(sp, "output CSV")
    training(sp, _int_list(REFERENCE_HIDDEN), _int_list)
    sp.add_argument("--folds", type=int, default=3, help="fold count")
    return p


def _training_setup(args):
    hidden = args.hidden if isinstance(args.hidden, int) else 1
    layout = MlpLayout(N_FEATURES, hidden, args.classes)
    cfg = TrainConfig(
        eta=args.eta, alpha=args.alpha, max_epochs=args.epochs, target_sse=args.target_sse,
        seed=args.seed, target_hi=args.target_hi, target_lo=args.target_lo,
    )
    if getattr(args, "folds", 3) < 2:
        raise ValueError("--folds must be at least 2")
    return layout, cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command in ("train", "cv", "sweep"):
            try:
                layout, cfg = _training_setup(args)
            except ValueError as exc:
                parser.error(str(exc))
            handler = {"train": cmd_train, "cv": cmd_cv, "sweep": cmd_sweep}[args.command]
            return handler(args, layout, cfg)
        return {"preprocess": cmd_preprocess, "extract": cmd_extract, "predict": cmd_predict}[args.command](args)
    except TrainingDivergence as exc:
        log.error("training diverged: %s", exc)
        return EXIT_DIVERGED
    except (DataError, ModelFormatError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
