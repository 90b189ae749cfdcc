import logging

import pytest

from photonmux_hub.core.models import SourceConfig
from photonmux_hub.infra.settings import SettingsLoader


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Каждый тест работает в своем каталоге с чистыми настройками"""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("PHOTONMUX_OUTPUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("PHOTONMUX_LOGS_DIR", str(tmp_path / "logs"))
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)
    monkeypatch.setattr(SettingsLoader, "_instance", None)
    yield SettingsLoader()
    # обработчик указывает на каталог этого теста
    logger = logging.getLogger("photonmux")
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)
    logger.propagate = True
    logger.setLevel(logging.NOTSET)


@pytest.fixture
def reference_source():
    """Рабочая точка с каналами 0.85 / 0.9 и ключами 0.5 дБ"""
    return SourceConfig(m=4, mu=0.1, e_h=0.85, e_s=0.9, e_sw_db=0.5)


@pytest.fixture
def config_file(tmp_path):
    def write(text: str):
        path = tmp_path / "run.conf"
        path.write_text(text, encoding="utf-8")
        return path
    return write
