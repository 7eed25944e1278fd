"""Observability utils"""
import logging
import sys

from aws_lambda_powertools import Logger
from src.config import settings

# stdout carries command output, so logs go to stderr
logger: Logger = Logger(
    service="nls-imethod-lab",
    level=settings.log_level,
    logger_handler=logging.StreamHandler(sys.stderr),
)
