"""
error_handler.py - 오류 계층 및 실패 기록 시스템
모든 단계의 오류를 라벨과 함께 전달하고, 시뮬레이션 반복 실패는 기록 후 계속 진행
"""

import logging
import traceback
import uuid
from contextlib import contextmanager
from dataclasses import dataclass
from functools import wraps
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)

# 전용 오류 로거 (파일 핸들러는 configure_error_log 에서만 부착)
error_logger = logging.getLogger('graphwise_errors')
error_logger.setLevel(logging.ERROR)


class GraphwiseError(Exception):
    """graphwise 공통 예외"""


class ConfigError(GraphwiseError):
    """설정 또는 파라미터 오류"""


class FamilyParameterError(ConfigError):
    """예제 그래프 패밀리 파라미터 위반"""


class SubsetLimitError(ConfigError):
    """부분집합 전수 탐색 한도 초과"""

    def __init__(self, count: int, cap: int):
        super().__init__(f"부분집합 개수 {count} 가 한도 {cap} 를 초과합니다.")
        self.count = count
        self.cap = cap


class GraphStructureError(GraphwiseError):
    """정점 범위, 간선 형식 또는 구조 존재 불가 오류"""


class PreconditionError(GraphwiseError):
    """하한 계산의 θ 전제조건 위반"""


class NumericalError(GraphwiseError):
    """수치 계산 실패"""


class NotPositiveDefiniteError(NumericalError):
    """양의 정부호가 아닌 정밀도 행렬"""

    def __init__(self, min_eigenvalue: float):
        super().__init__(f"정밀도 행렬이 양의 정부호가 아닙니다 (최소 고유값 {min_eigenvalue:.3e}).")
        self.min_eigenvalue = min_eigenvalue


class WalkCountOverflowError(NumericalError):
    """정수 누산기 오버플로"""

    def __init__(self, k: int):
        super().__init__(f"길이 {k} 폐쇄 보행 수가 64비트 정수 범위를 넘습니다.")
        self.k = k


class InfeasibleColumnError(NumericalError):
    """CLIME 열 문제의 실현가능성 확인 실패"""

    def __init__(self, column: int, residual: float, lam: float):
        super().__init__(
            f"CLIME 열 {column} 실현가능성 확인 실패: 잔차 {residual:.3e} > λ={lam:.3e}"
        )
        self.column = column
        self.residual = residual
        self.lam = lam


class DebiasError(NumericalError):
    """편향 보정 분모가 너무 작음"""

    def __init__(self, edge: Tuple[int, int], denominator: float):
        super().__init__(f"간선 {edge} 편향 보정 분모 {denominator:.4f} 가 불안정합니다.")
        self.edge = edge
        self.denominator = denominator


class EigenSolveError(NumericalError):
    """고유값 계산 비수렴"""


class StageError(GraphwiseError):
    """단계 라벨이 붙은 하위 오류"""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause

    @property
    def numerical(self) -> bool:
        return isinstance(self.cause, (NumericalError, np.linalg.LinAlgError))


@contextmanager
def stage(label: str):
    """블록 안의 오류를 StageError(label) 로 감싸서 전달"""
    try:
        yield
    except StageError:
        raise
    except (GraphwiseError, np.linalg.LinAlgError) as e:
        logger.warning(f"{label} 단계 실패: {e}")
        raise StageError(label, e) from e


@dataclass
class FailureRecord:
    """캡처된 실패 한 건"""
    error_id: str
    stage: str
    error_type: str
    message: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error_id': self.error_id,
            'stage': self.stage,
            'error_type': self.error_type,
            'message': self.message,
        }


def new_error_id() -> str:
    return str(uuid.uuid4())[:8]


def capture_failure(default_stage: str = "unknown"):
    """예외를 FailureRecord 로 바꿔 반환하는 데코레이터 (호출자는 절대 중단되지 않음)"""
    def decorator(func: Callable):
        @wraps(func)
        def wrapper(*args, **kwargs):
            try:
                return func(*args, **kwargs)
            except Exception as e:
                error_id = new_error_id()
                error_logger.error(
                    f"ERROR_{error_id}: {func.__name__} - {str(e)}\n{traceback.format_exc()}"
                )
                if isinstance(e, StageError):
                    return FailureRecord(error_id, e.stage, type(e.cause).__name__, str(e.cause))
                return FailureRecord(error_id, default_stage, type(e).__name__, str(e))
        return wrapper
    return decorator


def configure_error_log(path: Optional[str]) -> None:
    """오류 로거에 파일 핸들러 부착"""
    if not path:
        return
    for handler in error_logger.handlers:
        if isinstance(handler, logging.FileHandler) and handler.baseFilename.endswith(path):
            return
    file_handler = logging.FileHandler(path)
    file_handler.setFormatter(logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s'
    ))
    error_logger.addHandler(file_handler)


def exit_code_for(error: BaseException) -> int:
    """CLI 종료 코드: 설정 오류 2, 수치 오류 3"""
    if isinstance(error, StageError):
        return 3 if error.numerical else exit_code_for(error.cause)
    if isinstance(error, ConfigError):
        return 2
    if isinstance(error, (NumericalError, np.linalg.LinAlgError)):
        return 3
    return 1
