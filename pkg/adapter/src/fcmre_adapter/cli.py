"""Adapter command line: ``fcmre-adapter convert conllu|semeval ...``.

Exit codes mirror the engine CLI: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .conllu import ConlluFormatError
from .convert import AdapterError, convert_conllu, convert_semeval
from .semeval import SemevalFormatError
from .standoff import StandoffError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

DATA_ERRORS = (AdapterError, ConlluFormatError, SemevalFormatError, StandoffError,
               FileNotFoundError, PermissionError, IsADirectoryError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="fcmre-adapter",
                     description="Convert external corpus formats into the "
                                 "relation-extraction engine's JSONL schema.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_conv = sub.add_parser("convert", help="run a format conversion")
    p_conv.add_argument("mode", choices=["conllu", "semeval"])
    p_conv.add_argument("--in", dest="in_path", required=True,
                        help="CoNLL-U file (conllu) or marker-format file (semeval)")
    p_conv.add_argument("--standoff", default=None,
                        help="standoff mention/relation JSON (conllu mode)")
    p_conv.add_argument("--parses", default=None,
                        help="external CoNLL-U parses aligned by record order "
                             "(semeval mode)")
    p_conv.add_argument("--out", required=True, help="output JSONL path")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.mode == "conllu":
            if args.parses:
                raise UsageError("--parses applies to semeval mode only")
            count = convert_conllu(args.in_path, args.standoff, args.out)
        else:
            if args.standoff:
                raise UsageError("--standoff applies to conllu mode only")
            count = convert_semeval(args.in_path, args.out,
                                    parses_path=args.parses)
        print(f"wrote {count} sentences to {args.out}")
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
