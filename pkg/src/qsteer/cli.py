"""Subcommand CLI: catalog, train, eval, expand, grape, rim, gap, export.

Each command merges an optional ``--config`` JSON file with explicit CLI
flags (flags win), validates against its schema, and writes results under a
run directory. Exit codes: 0 success, 1 usage/config error, 2 runtime
failure.
"""

import argparse
import json
import sys

from . import catalog as catalog_mod
from . import harness
from .runconfig import SCHEMAS, ConfigError, load_config_file, validate


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_schema_flags(parser, schema):
    for name, opt in schema.items():
        flag = "--" + name.replace("_", "-")
        if opt.kind == "bool":
            parser.add_argument(flag, dest=name, action="store_true", default=None)
        elif opt.kind == "int":
            parser.add_argument(flag, dest=name, type=int, default=None)
        elif opt.kind == "float":
            parser.add_argument(flag, dest=name, type=float, default=None)
        else:  # str and comma-separated lists
            parser.add_argument(flag, dest=name, type=str, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="qsteer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    cat = sub.add_parser("catalog", help="inspect or export the system catalog")
    cat_sub = cat.add_subparsers(dest="catalog_command", required=True)
    cat_export = cat_sub.add_parser("export", help="dump the catalog")
    cat_export.add_argument("--format", default="json", choices=["json"])
    cat_export.add_argument("--out", default=None)
    cat_sub.add_parser("list", help="list system ids")

    for command in ("train", "eval", "expand", "grape", "rim", "gap", "export"):
        p = sub.add_parser(command)
        p.add_argument("--config", default=None, help="JSON config file")
        _add_schema_flags(p, SCHEMAS[command])
    return parser


_COMMANDS = {
    "train": harness.cmd_train,
    "eval": harness.cmd_eval,
    "expand": harness.cmd_expand,
    "grape": harness.cmd_grape,
    "rim": harness.cmd_rim,
    "gap": harness.cmd_gap,
    "export": harness.cmd_export,
}


def _run_catalog(args) -> int:
    if args.catalog_command == "list":
        for entry in catalog_mod.build_catalog():
            print(entry.id)
        return 0
    payload = json.dumps(catalog_mod.export_json(), indent=1, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return 0


def _merged_config(args, command) -> dict:
    data = load_config_file(args.config) if args.config else {}
    for name in SCHEMAS[command]:
        value = getattr(args, name, None)
        if value is not None:
            data[name] = value
    return validate(SCHEMAS[command], data, command)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "catalog":
            return _run_catalog(args)
        cfg = _merged_config(args, args.command)
        result = _COMMANDS[args.command](cfg)
        if isinstance(result, dict) and "overall" in result:
            print(json.dumps(result["overall"]))
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except KeyError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
