"""Command-line front end.

Subcommands map onto the pipeline stages: `session` runs everything,
`bb84`/`postprocess`/`bsts-derive`/`bsts-run` run one stage, `sweep`
aggregates many sessions, and `serve` starts the HTTP service.

Exit codes: 0 success, 2 eavesdropper detected (abort), 3 reconciliation
failure, 4 invalid configuration or I/O problem.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Any, Optional, Sequence

from .bb84 import BitString
from .bsts import (
    TIMING_RULES,
    TIMING_VALUE_PLUS_ONE,
    ProtocolViolation,
    derive_session,
)
from .photon import Basis
from .postprocess import ReconciliationParams
from .session import (
    EVE_MODE_NONE,
    EVE_MODES,
    InvalidConfigError,
    ReconciliationFailure,
    SessionConfig,
    emit_trace,
    run_full_session,
    run_key_exchange,
    run_postprocess,
    run_sweep,
    run_transfer,
)

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_RECONCILIATION = 3
EXIT_CONFIG = 4

_BASIS_BY_LETTER = {basis.value: basis for basis in Basis}


class _Parser(argparse.ArgumentParser):
    """Parser whose usage errors exit with the invalid-config code."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _parse_bases(letters: str) -> tuple[Basis, ...]:
    if not letters:
        raise InvalidConfigError("basis set must be nonempty")
    bases = []
    for letter in letters:
        if letter not in _BASIS_BY_LETTER:
            raise InvalidConfigError(
                f"unknown basis letter {letter!r}; expected letters from 'RDC'"
            )
        bases.append(_BASIS_BY_LETTER[letter])
    return tuple(bases)


def _resolve_seed(value: Optional[int]) -> int:
    """Explicit --seed wins; else the BSTS_SEED environment variable; else 0."""
    if value is not None:
        return value
    env = os.environ.get("BSTS_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InvalidConfigError(
            f"BSTS_SEED must be an integer, got {env!r}"
        ) from None


def _fmt(value: Any) -> Any:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    return value


def _print_result(result: dict[str, Any], as_json: bool) -> None:
    if as_json:
        print(json.dumps(result, indent=2))
    else:
        for key, value in result.items():
            print(f"{key}: {_fmt(value)}")


def _add_channel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--noise-flip-prob",
        type=float,
        default=0.0,
        help="per-photon probability of a bit flip within its basis",
    )
    parser.add_argument(
        "--eve-mode",
        choices=EVE_MODES,
        default=EVE_MODE_NONE,
        help="eavesdropper model on the quantum path",
    )
    parser.add_argument(
        "--eve-basis-set",
        default="RD",
        metavar="LETTERS",
        help="bases Eve measures in, as letters from 'RDC' (default: RD)",
    )


def _add_exchange_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--photons", type=int, default=4096, help="photons to exchange"
    )
    parser.add_argument(
        "--sample-size",
        type=int,
        default=200,
        help="sifted bits disclosed to estimate the error rate",
    )
    parser.add_argument(
        "--qber-threshold",
        type=float,
        default=0.11,
        help="abort when the estimated error rate strictly exceeds this",
    )


def _add_recon_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--initial-block-size", type=int, default=16)
    parser.add_argument("--passes-without-error-to-stop", type=int, default=2)
    parser.add_argument("--max-passes", type=int, default=32)


def _add_common_flags(
    parser: argparse.ArgumentParser, trace: bool = True
) -> None:
    parser.add_argument(
        "--seed",
        type=int,
        default=None,
        help="root random seed (default: BSTS_SEED environment variable, else 0)",
    )
    parser.add_argument(
        "--json", action="store_true", help="print results as JSON"
    )
    if trace:
        parser.add_argument(
            "--trace-path",
            metavar="FILE",
            default=None,
            help="write the session event trace to this JSON file",
        )


def _recon_params(args: argparse.Namespace) -> ReconciliationParams:
    try:
        return ReconciliationParams(
            initial_block_size=args.initial_block_size,
            passes_without_error_to_stop=args.passes_without_error_to_stop,
            max_passes=args.max_passes,
        )
    except ValueError as exc:
        raise InvalidConfigError(str(exc)) from exc


def _session_config(args: argparse.Namespace) -> SessionConfig:
    message = None
    if getattr(args, "message", None) is not None:
        message = BitString.from01(args.message)
    return SessionConfig(
        photons=args.photons,
        noise_flip_prob=args.noise_flip_prob,
        eve_mode=args.eve_mode,
        eve_basis_set=_parse_bases(args.eve_basis_set),
        seed=_resolve_seed(args.seed),
        sample_size=args.sample_size,
        qber_threshold=args.qber_threshold,
        timing_rule=args.timing_rule,
        message=message,
        message_bits=args.message_bits,
        recon=_recon_params(args),
        amplify=args.amplify,
    )


def _cmd_session(args: argparse.Namespace) -> int:
    cfg = _session_config(args)
    report, trace = run_full_session(cfg)
    if args.trace_path:
        emit_trace(trace, args.trace_path)
    _print_result(report.to_dict(), args.json)
    if report.eve_decision == "Abort":
        return EXIT_ABORT
    return EXIT_OK


def _cmd_bb84(args: argparse.Namespace) -> int:
    cfg = SessionConfig(
        photons=args.photons,
        noise_flip_prob=args.noise_flip_prob,
        eve_mode=args.eve_mode,
        eve_basis_set=_parse_bases(args.eve_basis_set),
        seed=_resolve_seed(args.seed),
        sample_size=args.sample_size,
        qber_threshold=args.qber_threshold,
    )
    result, trace = run_key_exchange(cfg)
    if args.trace_path:
        emit_trace(trace, args.trace_path)
    _print_result(result, args.json)
    if result["eve_decision"] == "Abort":
        return EXIT_ABORT
    return EXIT_OK


def _cmd_postprocess(args: argparse.Namespace) -> int:
    key_a = BitString.from01(args.key_a)
    key_b = BitString.from01(args.key_b)
    result, trace = run_postprocess(
        key_a, key_b, _recon_params(args), args.amplify, _resolve_seed(args.seed)
    )
    if args.trace_path:
        emit_trace(trace, args.trace_path)
    _print_result(result, args.json)
    return EXIT_OK


def _cmd_bsts_derive(args: argparse.Namespace) -> int:
    key = BitString.from01(args.key)
    params = derive_session(key, args.timing_rule)
    result = {
        "base1": params.base1.value,
        "base2": params.base2.value,
        "interval_ms": params.interval_ms,
        "schedule": "".join(b.value for b in params.schedule),
    }
    _print_result(result, args.json)
    return EXIT_OK


def _cmd_bsts_run(args: argparse.Namespace) -> int:
    key = BitString.from01(args.key)
    message = BitString.from01(args.message)
    result, trace = run_transfer(
        key,
        message,
        args.timing_rule,
        args.noise_flip_prob,
        args.eve_mode,
        _parse_bases(args.eve_basis_set),
        _resolve_seed(args.seed),
    )
    if args.trace_path:
        emit_trace(trace, args.trace_path)
    _print_result(result, args.json)
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _session_config(args)
    summary, _ = run_sweep(cfg, args.runs)
    if args.json:
        print(json.dumps(summary, indent=2))
    else:
        print(f"runs: {summary['n']}")
        print(f"aborts: {summary['aborts']}")
        print(f"reconciliation_failures: {summary['reconciliation_failures']}")
        for name, stats in summary["fields"].items():
            print(
                f"{name}: mean={stats['mean']:.6g} "
                f"stderr={stats['stderr']:.3g} n={stats['n']}"
            )
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(
        prog="bstsim",
        description=(
            "Simulate quantum key exchange and key-synchronized message "
            "transfer over a photon channel with optional noise and an "
            "optional intercept-resend eavesdropper."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser(
        "session", help="run the full pipeline: exchange, post-process, transfer"
    )
    _add_exchange_flags(p)
    _add_channel_flags(p)
    _add_recon_flags(p)
    p.add_argument("--amplify", action="store_true", help="run privacy amplification")
    p.add_argument(
        "--timing-rule",
        choices=TIMING_RULES,
        default=TIMING_VALUE_PLUS_ONE,
        help="mapping from key bits 3-6 to the photon interval",
    )
    p.add_argument(
        "--message",
        default=None,
        metavar="BITS",
        help="message to transfer as 0/1 characters (default: random)",
    )
    p.add_argument(
        "--message-bits",
        type=int,
        default=64,
        help="random message length when --message is not given",
    )
    _add_common_flags(p)
    p.set_defaults(func=_cmd_session)

    p = sub.add_parser("bb84", help="run only the key-exchange phase")
    _add_exchange_flags(p)
    _add_channel_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_bb84)

    p = sub.add_parser(
        "postprocess", help="reconcile two sifted keys, optionally amplify"
    )
    p.add_argument("--key-a", required=True, metavar="BITS")
    p.add_argument("--key-b", required=True, metavar="BITS")
    _add_recon_flags(p)
    p.add_argument("--amplify", action="store_true", help="run privacy amplification")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_postprocess)

    p = sub.add_parser(
        "bsts-derive", help="derive transfer parameters from a shared key"
    )
    p.add_argument("--key", required=True, metavar="BITS")
    p.add_argument(
        "--timing-rule", choices=TIMING_RULES, default=TIMING_VALUE_PLUS_ONE
    )
    _add_common_flags(p, trace=False)
    p.set_defaults(func=_cmd_bsts_derive)

    p = sub.add_parser(
        "bsts-run", help="transfer one message using a given shared key"
    )
    p.add_argument("--key", required=True, metavar="BITS")
    p.add_argument("--message", required=True, metavar="BITS")
    p.add_argument(
        "--timing-rule", choices=TIMING_RULES, default=TIMING_VALUE_PLUS_ONE
    )
    _add_channel_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_bsts_run)

    p = sub.add_parser("sweep", help="run many sessions and summarize them")
    p.add_argument("--runs", type=int, required=True, help="number of sessions")
    _add_exchange_flags(p)
    _add_channel_flags(p)
    _add_recon_flags(p)
    p.add_argument("--amplify", action="store_true", help="run privacy amplification")
    p.add_argument(
        "--timing-rule",
        choices=TIMING_RULES,
        default=TIMING_VALUE_PLUS_ONE,
    )
    p.add_argument("--message", default=None, metavar="BITS")
    p.add_argument("--message-bits", type=int, default=64)
    _add_common_flags(p, trace=False)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ReconciliationFailure as exc:
        trace_path = getattr(args, "trace_path", None)
        if trace_path:
            emit_trace(exc.trace, trace_path)
        _print_result(exc.report.to_dict(), getattr(args, "json", False))
        print("error: reconciled keys fail the final parity check", file=sys.stderr)
        return EXIT_RECONCILIATION
    except (ValueError, ProtocolViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
