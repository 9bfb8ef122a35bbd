import os
import logging
import logging.config
from pathlib import Path
from dotenv import load_dotenv

# Create logs directory if it doesn't exist
Path("logs").mkdir(exist_ok=True)

# Only load .env file in development
if os.environ.get("DOCKER_ENV") != "true":
    load_dotenv()

# Setup logging first
LOGGING_CONFIG_PATH = os.path.join(os.path.dirname(__file__), "logging.conf")
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

if os.path.exists(LOGGING_CONFIG_PATH):
    logging.config.fileConfig(LOGGING_CONFIG_PATH, disable_existing_loggers=False)
    logging.getLogger().setLevel(LOG_LEVEL)
else:
    logging.basicConfig(
        level=LOG_LEVEL, format="%(asctime)s - %(levelname)s - %(message)s"
    )
    logging.warning("Logging config file not found, using basic config")

# Load and validate settings
OUTPUT_DIR = os.getenv("OUTPUT_DIR", "results")
DEBUG_CHECKS = os.getenv("DEBUG_CHECKS", "false").lower() in ("1", "true", "yes")

CELERY_BROKER_URL = os.getenv("CELERY_BROKER_URL", "redis://localhost:6379/0")
CELERY_RESULT_BACKEND = os.getenv("CELERY_RESULT_BACKEND", CELERY_BROKER_URL)
CELERY_TASK_TIMEOUT = int(os.getenv("CELERY_TASK_TIMEOUT", "86400"))

if CELERY_TASK_TIMEOUT <= 0:
    raise ValueError("CELERY_TASK_TIMEOUT must be a positive number of seconds")

# Log configuration status
logging.debug("Environment configuration:")
logging.debug(f"LOG_LEVEL: {LOG_LEVEL}")
logging.debug(f"OUTPUT_DIR: {OUTPUT_DIR}")
logging.debug(f"DEBUG_CHECKS: {DEBUG_CHECKS}")
logging.debug(f"CELERY_BROKER_URL: {CELERY_BROKER_URL}")
logging.debug(f"CELERY_RESULT_BACKEND: {CELERY_RESULT_BACKEND}")
