"""
config.py - 설정 및 환경변수 관리
"""

import logging
import os
from typing import Dict, Optional

from dotenv import dotenv_values

from error_handler import ConfigError

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """로깅 설정 (표준 출력은 결과 전용이므로 stderr 사용)"""
    handlers = [logging.StreamHandler()]
    if log_file:
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                        format=LOG_FORMAT, handlers=handlers, force=True)


# 하이퍼파라미터 및 설정값
class Config:
    # 수치 허용오차
    PD_TOLERANCE = 1e-10
    EIGEN_TOLERANCE = 1e-9

    # CLIME
    CLIME_TOLERANCE = 1e-7
    CLIME_MAX_ITER = 20000
    CLIME_EXACT_MAX_D = 30
    CLIME_RHO = 1.0
    LAMBDA_COEFFICIENT = 1.5
    LAMBDA_GRID = (0.5, 1.0, 1.5, 2.0, 2.5)
    CV_FOLDS = 5

    # 부트스트랩
    BOOTSTRAP_B = 3000
    BOOTSTRAP_CHUNK = 250
    ALPHA = 0.05
    DEBIAS_MIN_DENOMINATOR = 0.5

    # 하한 계산
    PACKING_EXACT_MAX = 20
    BUFFER_EXACT_MAX = 10_000
    PAIR_EXACT_MAX = 10_000
    BUFFER_MC_ANCHORS = 8
    BUFFER_MC_DRAWS = 4000
    PAIR_SAMPLE_ANCHORS = 400
    PAIR_CHUNK = 512
    CHI2_PAIR_MAX = 500
    FAMILY_CHECK_SAMPLE = 200
    SPECTRAL_BOUND_C = 2.0
    KAPPA = 1.0

    # 클릭 검정
    CLIQUE_SUBSET_CAP = 10 ** 6
    CLIQUE_CHUNK = 20000

    # 시뮬레이션
    THETA_GRID = (0.25, 0.28, 0.32, 0.35, 0.38, 0.42, 0.45)
    FAILURE_RATE_LIMIT = 0.01
    CYCLE_CHORD_RANGE = (3, 10)

    PROFILES = {
        'desk': {'D': 50, 'N': 300, 'REPS': 100, 'B': 1000},
        'paper': {'D': 100, 'N': 400, 'REPS': 200, 'B': 3000},
    }

    CONFIG_KEYS = (
        'PROPERTY', 'PARAM', 'MU', 'THETA_GRID', 'N', 'D', 'REPS', 'B', 'ALPHA',
        'LAMBDA', 'LAMBDA_COEFFICIENT', 'SEED', 'THREADS', 'SHUFFLE', 'PROFILE',
    )

    ENV_PREFIX = "GRAPHWISE_"


def load_config_file(path: Optional[str] = None) -> Dict[str, str]:
    """KEY=value 설정 파일 로드 (GRAPHWISE_* 환경변수가 우선)"""
    values: Dict[str, str] = {}
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"설정 파일을 찾을 수 없습니다: {path}")
        try:
            raw = dotenv_values(path)
        except Exception as e:
            raise ConfigError(f"설정 파일 파싱 실패 ({path}): {e}") from e
        for key, value in raw.items():
            if value is None:
                raise ConfigError(f"'{key}' 값이 비어 있습니다 ({path})")
            values[key.strip().upper()] = value.strip()

    for key in Config.CONFIG_KEYS:
        env_value = os.getenv(f"{Config.ENV_PREFIX}{key}")
        if env_value is not None:
            values[key] = env_value.strip()

    unknown = sorted(set(values) - set(Config.CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"알 수 없는 설정 키: {', '.join(unknown)}")

    logger.info(f"설정 로드: {len(values)}개 키")
    return values


def profile_defaults(name: str) -> Dict[str, int]:
    """프로파일 기본값"""
    try:
        return dict(Config.PROFILES[name])
    except KeyError:
        raise ConfigError(f"알 수 없는 프로파일: '{name}' (desk|paper)")
