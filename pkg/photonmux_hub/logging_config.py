import logging
import os
from logging.handlers import RotatingFileHandler

from .infra.settings import SettingsLoader


def setup_logging():
    """Настройка логирования для приложения"""

    logger = logging.getLogger("photonmux")

    if logger.handlers:
        return logger

    settings = SettingsLoader()
    logger.setLevel(settings.get("log_level", "INFO"))

    log_dir = settings.get("logs_dir", "logs")
    os.makedirs(log_dir, exist_ok=True)

    file_handler = RotatingFileHandler(
        filename=os.path.join(log_dir, settings.get("log_file", "actions.log")),
        maxBytes=settings.get("log_max_bytes", 10_485_760),
        backupCount=settings.get("log_backup_count", 5),
        encoding='utf-8'
    )

    formatter = logging.Formatter(
        '%(levelname)s %(asctime)s %(message)s',
        datefmt='%Y-%m-%dT%H:%M:%S'
    )
    file_handler.setFormatter(formatter)

    logger.addHandler(file_handler)

    logger.propagate = False
    return logger
