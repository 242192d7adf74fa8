import logging

from fastmcp.utilities.logging import get_logger

logger = get_logger(name="qrouter_sim")
logger.setLevel(level=logging.INFO)
