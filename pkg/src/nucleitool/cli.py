"""``nucleitool`` command line.

Exit status is 0 on success, 1 for usage errors and 2 for data errors; all
diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import batch
from .core import CLASS_NAMES, NucleiError
from .dataset import read_images, read_labels, read_maps, write_maps
from .folds import read_domains, split_by_domain
from .npyio import write_array
from .parallel import resolve_threads
from .postprocess import PostprocessParams

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _json_out(obj, out) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _params(args) -> PostprocessParams:
    try:
        return PostprocessParams(t_fg=args.t_fg, t_energy=args.t_energy, min_size=args.min_size)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_encode(args, threads):
    write_maps(args.out, batch.encode_labels(read_labels(args.labels), threads))


def cmd_postprocess(args, threads):
    params = _params(args)
    stacks = [read_maps(d) for d in args.pred]
    maps = stacks[0] if len(stacks) == 1 else batch.ensemble_stacks(stacks, threads)
    write_array(args.out, batch.postprocess_stack(maps, params, threads))


def cmd_ensemble(args, threads):
    write_maps(args.out, batch.ensemble_stacks([read_maps(d) for d in args.pred], threads))


def cmd_evaluate(args, threads):
    report = batch.evaluate_labels(read_labels(args.gt), read_labels(args.pred), threads)
    _json_out(report, args.out)


def format_counts_csv(table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("image",) + CLASS_NAMES[1:])
    for i, row in enumerate(table):
        writer.writerow([i] + [int(v) for v in row])
    return buf.getvalue()


def cmd_counts(args, threads):
    text = format_counts_csv(batch.count_table(read_labels(args.labels), threads))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8", newline="")
    else:
        sys.stdout.write(text)


def cmd_augment(args, threads):
    images, labels, targets = batch.augment_dataset(
        read_images(args.images), read_labels(args.labels), args.seed, threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_array(out / "images.npy", images)
    write_array(out / "labels.npy", labels)
    write_maps(out / "targets", targets)


def cmd_split(args, threads):
    _json_out(split_by_domain(read_domains(args.domains)).to_json(), args.out)


def cmd_loss(args, threads):
    _json_out(batch.loss_stack(read_maps(args.pred), read_maps(args.target), threads=threads), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nucleitool", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None,
                        help="worker processes (default: all cores; NUCLEITOOL_THREADS overrides)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("encode", help="labels -> target maps directory")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("postprocess", help="prediction directory -> labels file")
    p.add_argument("--pred", required=True, action="append",
                   help="prediction directory; repeat to average an ensemble first")
    p.add_argument("--out", required=True, help="output labels .npy")
    p.add_argument("--t-fg", type=float, default=PostprocessParams.t_fg)
    p.add_argument("--t-energy", type=float, default=PostprocessParams.t_energy)
    p.add_argument("--min-size", type=int, default=PostprocessParams.min_size)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("ensemble", help="average several prediction directories")
    p.add_argument("pred", nargs="+", help="prediction directories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("evaluate", help="mPQ+ and R^2 as JSON")
    p.add_argument("--pred", required=True, help="predicted labels .npy")
    p.add_argument("--gt", required=True, help="ground-truth labels .npy")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("counts", help="per-image class counts as CSV")
    p.add_argument("--labels", required=True)
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.set_defaults(func=cmd_counts)

    p = sub.add_parser("augment", help="seeded augmentation with regenerated targets")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("split", help="five domain folds as JSON")
    p.add_argument("--domains", required=True, help="text file, one domain name per image")
    p.add_argument("--out")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("loss", help="per-term loss decomposition as JSON")
    p.add_argument("--pred", required=True, help="prediction directory")
    p.add_argument("--target", required=True, help="target directory from `encode`")
    p.add_argument("--out")
    p.set_defaults(func=cmd_loss)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        threads = resolve_threads(args.threads)
        args.func(args, threads)
    except (NucleiError, OSError) as exc:
        print(f"nucleitool: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (UsageError, ValueError) as exc:
        print(f"nucleitool: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
