"""Command-line entry point.

Exit codes: 0 ok, 1 usage or configuration error, 2 protocol or invariant
violation.  ``HETCHAIN_OUT`` sets the default output directory of ``run``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from .codec import DecodeError
from .consensus import ChainView, ConsensusError, Status, read_dump
from .consensus.dump import Dump
from .ledger import TestScheme

OUT_ENV = "HETCHAIN_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def _err(msg: str) -> None:
    print(f"hetchain: {msg}", file=sys.stderr)


def _load_config(spec: str):
    from .simnet import load, load_scenario, scenario_names

    path = Path(spec)
    if path.is_file():
        return load(path)
    if spec in scenario_names():
        return load_scenario(spec)
    raise FileNotFoundError(f"no scenario file or library entry named {spec!r}")


def cmd_run(args) -> int:
    from .simnet import ConfigError, InvariantViolation, run, write_outputs

    try:
        cfg = _load_config(args.scenario)
        if args.seed is not None:
            cfg.seed = args.seed
            cfg.validate()
    except (OSError, ConfigError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    out = Path(args.out or os.environ.get(OUT_ENV) or Path("hetchain-out") / cfg.name)
    try:
        report, sim = run(cfg, with_baseline=not args.no_baseline)
    except InvariantViolation as exc:
        _err(f"invariant violated: {exc}")
        return EXIT_VIOLATION
    files = write_outputs(report, sim, out, figures=not args.no_figures)
    sys.stdout.write(report.to_text())
    for name, path in sorted(files.items()):
        print(f"wrote {name}: {path}")
    return EXIT_OK if report.ok else EXIT_VIOLATION


def _read(path: str) -> Dump:
    return read_dump(path)


def _scheme(dump: Dump) -> Optional[TestScheme]:
    if not dump.registry:
        return None
    scheme = TestScheme()
    scheme.registry.update(dump.registry)
    return scheme


def verify_dump(dump: Dump, cutoff: int) -> tuple[Optional[tuple[int, int, str]], ChainView]:
    """Replay ``dump`` as an independent validator at ``cutoff``.

    Returns the first failing ``(block, height, rule)`` of a strong rule, or
    None, together with the validator's final view.
    """
    view = ChainView(dump.params, cutoff, dump.premine, _scheme(dump))
    if dump.blocks[0].header != view.records[0].header:
        return (0, 0, "genesis mismatch"), view
    for block in dump.blocks[1:]:
        try:
            verdicts = view.receive_message(block.message(cutoff))
        except ConsensusError as exc:
            return (block.index, -1, str(exc)), view
        for h, v in sorted(verdicts.items()):
            if v.status is Status.REJECT_STRONG and v.rule != "cascade":
                return (block.index, h, v.rule), view
    return None, view


def cmd_verify(args) -> int:
    try:
        dump = _read(args.dump)
    except OSError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except DecodeError as exc:
        print(f"FAIL {exc}: prefix verification failed (undecodable)")
        return EXIT_VIOLATION
    if not 0 <= args.cutoff <= dump.params.max_height:
        _err(f"cutoff must be within 0..{dump.params.max_height}")
        return EXIT_CONFIG
    failure, view = verify_dump(dump, args.cutoff)
    if failure:
        b, h, rule = failure
        where = f"block {b}" if h < 0 else f"block {b} height {h}"
        print(f"FAIL {where}: {rule}")
        return EXIT_VIOLATION
    lengths = [view.chain_length(h) for h in range(view.cutoff + 1)]
    print(f"OK {len(dump.blocks) - 1} blocks verified at cutoff {view.cutoff}; chain lengths {lengths}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    try:
        dump = _read(args.dump)
    except (OSError, DecodeError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if not 0 <= args.block < len(dump.blocks):
        _err(f"block must be within 0..{len(dump.blocks) - 1}")
        return EXIT_CONFIG
    block = dump.blocks[args.block]
    hd = block.header
    print(f"block {hd.index} hash {hd.hash.hex()}")
    print(f"  prev {hd.prev.hex()} top {hd.top} nonce {hd.nonce}")
    print(f"  stream root {hd.stream_root.hex()}")
    if hd.coinbase:
        print(f"  coinbase {hd.coinbase[1]} to {hd.coinbase[0]}")
    heights = range(hd.top + 1) if args.height is None else [args.height]
    verdicts = {v[0]: v for v in dump.verdicts[args.block]} if args.block < len(dump.verdicts) else {}
    for h in heights:
        if not 0 <= h <= hd.top:
            _err(f"height must be within 0..{hd.top}")
            return EXIT_CONFIG
        sb = block.subblocks[h]
        v = verdicts.get(h)
        verdict = f" verdict {v[1]}{' ' + v[2] if v and v[2] else ''}" if v else ""
        print(f"  height {h}: {len(sb.txs)} txs, {sb.size} bytes, drop {sb.drop_tx}, digest {sb.digest.hex()[:16]}{verdict}")
        for tx in sb.txs:
            print(f"    tx {tx.txid.hex()[:16]} {tx.kind.name.lower()} in {tx.input_total} out {tx.output_total} fee {tx.fee}")
        for t in sb.claim_trees:
            print(f"    claims offset {t.offset} drop {t.drop}: {len(t.claims)} totalling {t.total}")
    if args.height is not None:
        view = ChainView(dump.params, args.height, dump.premine, _scheme(dump))
        for b in dump.blocks[1: args.block + 1]:
            view.receive_block(b)
        ledger = view.ledgers[args.height]
        print(f"  ledger at height {args.height} after block {args.block}: "
              f"{len(ledger.utxos)} coins, {ledger.total()} total, chain length {ledger.chain_length}, "
              f"digest {ledger.digest().hex()[:16]}")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    from .simnet import load_scenario, scenario_names
    from .simnet.library import scenario_text

    if args.show:
        try:
            sys.stdout.write(scenario_text(args.show))
        except ValueError as exc:
            _err(str(exc))
            return EXIT_CONFIG
        return EXIT_OK
    for name in scenario_names():
        cfg = load_scenario(name)
        print(f"{name:<18} {cfg.duration:>4} blocks  {cfg.description}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hetchain", description="Sub-block chain simulator and validator.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("run", help="run a scenario and write its report, time series, figures and dump")
    r.add_argument("--scenario", required=True, help="scenario YAML file or library name")
    r.add_argument("--seed", type=int, help="override the scenario seed")
    r.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./hetchain-out/<name>)")
    r.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    r.add_argument("--no-baseline", action="store_true", help="skip the honest baseline run")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="replay a chain dump as an independent validator")
    v.add_argument("--dump", required=True)
    v.add_argument("--cutoff", type=int, required=True)
    v.set_defaults(func=cmd_verify)

    i = sub.add_parser("inspect", help="show a block, a sub-block or a height ledger from a dump")
    i.add_argument("--dump", required=True)
    i.add_argument("--block", type=int, required=True)
    i.add_argument("--height", type=int)
    i.set_defaults(func=cmd_inspect)

    s = sub.add_parser("scenarios", help="list the shipped scenarios")
    s.add_argument("--list", action="store_true", help="list names and descriptions (default)")
    s.add_argument("--show", metavar="NAME", help="print one scenario's YAML")
    s.set_defaults(func=cmd_scenarios)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
