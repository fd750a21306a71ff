import logging
import logging.config
import os

from utils import env_flag

_debug = env_flag(os.getenv("BWX_DEBUG", "false"))

# attributes every LogRecord carries; anything else came in through `extra=`
_RESERVED = set(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {"message", "asctime"}

# loggers whose progress lines (per LBG stage, per epoch) use the terse format
TRAINER_LOGGERS = ("codec.vq", "codec.mlp", "codec.corpus")


def override_level(level: str) -> str:
    if _debug:
        return "DEBUG"
    return os.getenv("BWX_LOG_LEVEL", level).upper()


class ContextFormatter(logging.Formatter):
    """Appends `extra=` fields to the message as sorted key=value pairs."""

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        fields = {k: v for k, v in vars(record).items() if k not in _RESERVED and not k.startswith("_")}
        if not fields:
            return line
        pairs = " ".join(f"{key}={fields[key]}" for key in sorted(fields))
        return f"{line} {pairs}"


def configure():
    # stdout is reserved for command output
    handler = {"class": "logging.StreamHandler", "stream": "ext://sys.stderr"}
    logging.config.dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "standard": {
                    "()": ContextFormatter,
                    "fmt": "[%(asctime)s] %(name)s - %(levelname)s - %(message)s",
                    "datefmt": "%Y-%m-%d %H:%M:%S",
                },
                "progress": {"()": ContextFormatter, "fmt": "%(levelname)s: %(message)s"},
            },
            "handlers": {
                "default": {**handler, "formatter": "standard", "level": override_level("INFO")},
                "progress": {**handler, "formatter": "progress", "level": override_level("INFO")},
            },
            "root": {
                "level": override_level("INFO"),
                "handlers": ["default"],
            },
            "loggers": {
                name: {"level": override_level("INFO"), "handlers": ["progress"], "propagate": False}
                for name in TRAINER_LOGGERS
            },
        }
    )
