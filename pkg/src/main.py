import argparse
import logging
import os
import sys
from typing import List, Optional

import logsys
from utils import env_flag

logger = logging.getLogger(__name__)


# Configuration context
class Config:
    def __init__(self):
        self.settings = {}

    def setup(self):
        # Read environment variables and store them in the settings dictionary
        self.settings["DEBUG"] = env_flag(os.getenv("BWX_DEBUG", "false"))
        self.settings["PREEMPH"] = float(os.getenv("BWX_PREEMPH", 0.7))
        self.settings["PITCH_DOUBLING_THRESHOLD"] = float(
            os.getenv("BWX_PITCH_DOUBLING_THRESHOLD", 0.85)
        )
        self.settings["VOICING_THRESHOLD"] = float(os.getenv("BWX_VOICING_THRESHOLD", 0.3))
        self.settings["MFCC_INCLUDE_C0"] = env_flag(os.getenv("BWX_MFCC_INCLUDE_C0", "true"))
        self.settings["TARGET_SOURCE"] = os.getenv("BWX_TARGET_SOURCE", "wideband").lower()
        self.settings["IRS_FIR"] = os.getenv("BWX_IRS_FIR", "")
        self.settings["INVERSE_IRS_FIR"] = os.getenv("BWX_INVERSE_IRS_FIR", "")
        self.settings["SILENCE_DBFS"] = float(os.getenv("BWX_SILENCE_DBFS", -60))
        self.settings["WORKERS"] = int(os.getenv("BWX_WORKERS", 1))
        self.settings["SEED"] = int(os.getenv("BWX_SEED", 0))
        self.settings["VQ_BITS"] = int(os.getenv("BWX_VQ_BITS", 8))
        self.settings["MLP_EPOCHS"] = int(os.getenv("BWX_MLP_EPOCHS", 200))
        self.settings["MLP_LEARNING_RATE"] = float(os.getenv("BWX_MLP_LEARNING_RATE", 1e-3))
        self.settings["MLP_BATCH_SIZE"] = int(os.getenv("BWX_MLP_BATCH_SIZE", 32))
        self.settings["MLP_MOMENTUM"] = float(os.getenv("BWX_MLP_MOMENTUM", 0.9))


# Configure application settings
config = Config()
config.setup()

# Configure logging
logsys.configure()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bwx",
        description="Speech bandwidth extension: narrowband + 500 bit/s side info to wideband.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")

    # Register commands
    from commands.audio import register as register_audio
    from commands.codec import register as register_codec
    from commands.evaluation import register as register_evaluation
    from commands.training import register as register_training

    register_audio(subparsers)
    register_codec(subparsers)
    register_training(subparsers)
    register_evaluation(subparsers)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse `argv`, run one command and return its exit code (0 ok, 1 domain error, 2 usage)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed usage or help
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    return args.handler(args, config.settings)


if __name__ == "__main__":
    sys.exit(run())
