"""
conftest.py - pytest 공통 설정
느린 몬테카를로 재현 실험은 --runslow 옵션으로만 실행
"""

import pytest


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="느린 재현 실험(slow 마커)까지 실행")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: 수 분 이상 걸리는 몬테카를로 재현 실험")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="--runslow 옵션이 필요합니다")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)
