"""Sub-command implementations; each ``cmd_*`` takes a resolved :class:`~cli.config.RunConfig`."""

from .compare import cmd_compare, parse_variant
from .evaluate import cmd_eval
from .gen import cmd_gen
from .gradcheck import cmd_gradcheck
from .train import cmd_train


__all__ = [
    "cmd_compare",
    "cmd_eval",
    "cmd_gen",
    "cmd_gradcheck",
    "cmd_train",
    "parse_variant",
]
