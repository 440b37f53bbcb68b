import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

logger = logging.getLogger("qremlab")


def load_env(env_file_path: Optional[Path | str] = None) -> bool:
    """Load a .env file with python-dotenv; values already in the environment win unless LOADING_MODE_FOR_ENV_VARS=override"""
    path = Path(env_file_path) if env_file_path is not None else Path.cwd() / ".env"
    if not path.is_file():
        logger.debug("No env file at %s", path)
        return False
    loading_mode = os.getenv("LOADING_MODE_FOR_ENV_VARS") or "no-override"
    if loading_mode == "override":
        logger.info("Loading env from %s, which may override existing environment variables", path)
        return load_dotenv(path, override=True)
    logger.info("Loading env from %s, but not overriding existing environment variables", path)
    return load_dotenv(path, override=False)
