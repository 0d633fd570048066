import logging
import os
from pathlib import Path
from typing import Optional

LOG_FILE = os.environ.get("UNFOLD_LOG_FILE", str(Path.home() / ".unfold_dynamics.log"))


def setup_logging(verbose: bool = False, log_file: Optional[str] = None):
    level = logging.DEBUG if verbose else logging.INFO
    handlers = [logging.FileHandler(log_file or LOG_FILE)]
    if verbose:
        handlers.append(logging.StreamHandler())

    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )
    # matplotlib is chatty at DEBUG
    logging.getLogger('matplotlib').setLevel(logging.WARNING)
