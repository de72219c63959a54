"""
Командная строка: разбор аргументов, логирование и коды выхода
"""

import argparse
import logging
import sys

from ..config.settings import Encoder, TemporalMode, get_settings
from ..errors import NewsMetapathError
from ..handlers.commands import CommandHandlers

logger = logging.getLogger(__name__)

COMMANDS = (
    "synth",
    "train",
    "eval",
    "ablate-temporal",
    "ablate-encoder",
    "sweep-ratio",
    "export-emb",
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 3

REQUIRED_FLAGS = {
    "synth": ("out",),
    "export-emb": ("graph", "checkpoint", "out"),
}
DEFAULT_REQUIRED = ("graph", "out")


class UsageError(Exception):
    """Ошибка разбора аргументов"""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def build_parser() -> _Parser:
    """Парсер со всеми подкомандами и общими флагами"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--graph", help="graph file in JSON-lines format")
    common.add_argument("--features-dir", help="directory with <type>.csv features")
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="root seed (default 42)")
    common.add_argument("--encoder", choices=[e.value for e in Encoder])
    common.add_argument(
        "--temporal", choices=[m.value for m in TemporalMode], dest="temporal_mode"
    )
    common.add_argument("--train-frac", type=float)
    common.add_argument("--ratios", help="comma-separated training ratios")
    common.add_argument("--checkpoint", help="checkpoint written by train")
    common.add_argument("--log-level", help="logging level (default INFO)")

    parser = _Parser(
        prog="news-metapath",
        description="Fake news detection over heterogeneous graph meta-paths",
    )
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=_Parser
    )
    for name in COMMANDS:
        commands.add_parser(name, parents=[common])
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": args.seed,
        "encoder": args.encoder,
        "temporal_mode": args.temporal_mode,
        "train_frac": args.train_frac,
        "ratios": args.ratios,
        "log_level": args.log_level,
    }


def _check_required(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    for flag in REQUIRED_FLAGS.get(args.command, DEFAULT_REQUIRED):
        if getattr(args, flag) is None:
            parser.error(f"{args.command} needs --{flag.replace('_', '-')}")


def setup_logging(level: str) -> None:
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=getattr(logging, level.upper(), logging.INFO),
        force=True,
    )


def run(argv: list[str] | None = None) -> int:
    """
    Выполнение одной подкоманды

    Args:
        argv: Аргументы без имени программы

    Returns:
        0 при успехе, 1 при ошибке использования, 2 при ошибке данных,
        3 при прочих ошибках
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_required(parser, args)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as e:
        return int(e.code or 0)

    try:
        settings = get_settings(args.config, _overrides(args))
        setup_logging(settings.eval.log_level)
        CommandHandlers(settings, args).dispatch()
    except NewsMetapathError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME
    except Exception:
        logger.exception(f"{args.command} failed with an unexpected error")
        return EXIT_RUNTIME
    return EXIT_OK


def main() -> None:
    """Точка входа консольного скрипта"""
    sys.exit(run())


if __name__ == "__main__":
    main()
