"""Truncation blind-spot analysis over token-event logs."""

from ._blindspot import *  # noqa: F401,F403
from ._blindspot import __version__, BlindspotError, run_cli  # noqa: F401


def main() -> int:
    import sys

    code, out, err = run_cli(sys.argv[1:])
    sys.stdout.write(out)
    sys.stderr.write(err)
    return code
