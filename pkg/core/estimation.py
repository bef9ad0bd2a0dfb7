"""
estimation.py - 경험 공분산, CLIME 정밀도 추정, 교차검증 λ 선택, 편향 보정 통계량
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import linprog

from core.config import Config
from core.graphs import Edge, make_edge
from core.model import Dataset
from error_handler import ConfigError, DebiasError, InfeasibleColumnError

logger = logging.getLogger(__name__)

ArrayLike = Union[Dataset, np.ndarray]

SYMMETRIZATION_RULES = ('min-magnitude', 'average')
CLIME_METHODS = ('auto', 'exact', 'admm')


def _as_array(x: ArrayLike) -> np.ndarray:
    return x.x if isinstance(x, Dataset) else np.asarray(x, dtype=float)


def empirical_covariance(x: ArrayLike) -> np.ndarray:
    """Σ̂ = XᵀX / n (평균 0 가정, 중심화 없음)"""
    data = _as_array(x)
    if data.ndim != 2 or data.shape[0] < 1:
        raise ConfigError(f"표본 행렬이 비어 있습니다: {data.shape}")
    sigma = data.T @ data / data.shape[0]
    return (sigma + sigma.T) / 2.0


def default_lambda(n: int, d: int, coefficient: Optional[float] = None) -> float:
    """λ = c·√(log d / n)"""
    c = Config.LAMBDA_COEFFICIENT if coefficient is None else float(coefficient)
    return c * math.sqrt(math.log(d) / n)


# 하이퍼파라미터
@dataclass(frozen=True)
class ClimeConfig:
    lam: float
    tolerance: float = Config.CLIME_TOLERANCE
    max_iter: int = Config.CLIME_MAX_ITER
    symmetrization: str = 'min-magnitude'
    method: str = 'auto'
    n_jobs: int = 1

    def __post_init__(self):
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ConfigError(f"λ 는 양수여야 합니다: {self.lam}")
        if not self.tolerance > 0:
            raise ConfigError(f"허용오차는 양수여야 합니다: {self.tolerance}")
        if self.symmetrization not in SYMMETRIZATION_RULES:
            raise ConfigError(f"알 수 없는 대칭화 규칙: {self.symmetrization}")
        if self.method not in CLIME_METHODS:
            raise ConfigError(f"알 수 없는 CLIME 방법: {self.method}")


@dataclass
class PrecisionEstimate:
    """CLIME 추정 결과 (matrix 는 대칭화 후, raw 는 열별 해)

    실현 가능성 인증 ‖Σ̂Θ − I‖_max ≤ λ 는 raw 에서 강제하고,
    대칭화 후 잔차는 diagnostics['symmetrized_residual'] 로 보고만 한다.
    """
    matrix: np.ndarray
    lam: float
    raw: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    def to_record(self) -> Dict[str, Any]:
        record = {'lambda': self.lam, 'd': self.d}
        record.update(self.diagnostics)
        return record


def feasibility_residual(sigma: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """열별 ‖Σ̂Θ_{*j} − e_j‖_∞"""
    return np.abs(sigma @ theta - np.eye(sigma.shape[0])).max(axis=0)


def symmetrize(matrix: np.ndarray, rule: str = 'min-magnitude') -> np.ndarray:
    """(j,k)/(k,j) 쌍에서 절댓값이 작은 항 선택, 또는 평균"""
    if rule == 'average':
        return (matrix + matrix.T) / 2.0
    if rule != 'min-magnitude':
        raise ConfigError(f"알 수 없는 대칭화 규칙: {rule}")
    keep = np.abs(matrix) <= np.abs(matrix.T)
    return np.where(keep, matrix, matrix.T)


def _clime_column_lp(sigma: np.ndarray, column: int, lam: float) -> np.ndarray:
    """min ‖β‖₁ s.t. ‖Σβ − e_j‖_∞ ≤ λ, β = u − v (u, v ≥ 0)"""
    d = sigma.shape[0]
    e = np.zeros(d)
    e[column] = 1.0
    a_ub = np.block([[sigma, -sigma], [-sigma, sigma]])
    b_ub = np.concatenate([lam + e, lam - e])
    result = linprog(np.ones(2 * d), A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method='highs')
    if result.status != 0 or result.x is None:
        raise InfeasibleColumnError(column + 1, math.inf, lam)
    return result.x[:d] - result.x[d:]


def _solve_columns_exact(sigma: np.ndarray, lam: float, columns: Sequence[int],
                         n_jobs: int) -> List[np.ndarray]:
    if n_jobs == 1 or len(columns) < 2:
        return [_clime_column_lp(sigma, j, lam) for j in columns]
    return Parallel(n_jobs=n_jobs)(delayed(_clime_column_lp)(sigma, j, lam) for j in columns)


def _soft_threshold(x: np.ndarray, level: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - level, 0.0)


def _clime_admm(sigma: np.ndarray, cfg: ClimeConfig) -> Dict[str, Any]:
    """선형화 ADMM: Z = Σ̂B − I 를 상자 [−λ, λ] 로 제한"""
    d = sigma.shape[0]
    identity = np.eye(d)
    rho = Config.CLIME_RHO
    eta = max(float(np.linalg.norm(sigma, 2)) ** 2, 1e-12) * 1.01
    b = np.zeros((d, d))
    z = np.clip(-identity, -cfg.lam, cfg.lam)
    u = np.zeros((d, d))
    iterations = 0
    for iterations in range(1, cfg.max_iter + 1):
        gradient = sigma @ (sigma @ b - identity - z + u)
        b_next = _soft_threshold(b - gradient / eta, 1.0 / (rho * eta))
        product = sigma @ b_next - identity
        z = np.clip(product + u, -cfg.lam, cfg.lam)
        primal = product - z
        u = u + primal
        change = float(np.abs(b_next - b).max())
        b = b_next
        if float(np.abs(primal).max()) <= cfg.tolerance and change <= cfg.tolerance:
            break
    return {'matrix': b, 'iterations': iterations}


def clime(sigma: np.ndarray, cfg: ClimeConfig) -> PrecisionEstimate:
    """열별 min ‖β‖₁ s.t. ‖Σ̂β − e_j‖_∞ ≤ λ 후 대칭화"""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ConfigError(f"공분산 행렬은 정방이어야 합니다: {sigma.shape}")
    if not np.allclose(sigma, sigma.T, atol=1e-10):
        raise ConfigError("공분산 행렬이 대칭이 아닙니다.")
    d = sigma.shape[0]
    method = cfg.method
    if method == 'auto':
        method = 'exact' if d <= Config.CLIME_EXACT_MAX_D else 'admm'

    repaired: List[int] = []
    if method == 'exact':
        raw = np.column_stack(_solve_columns_exact(sigma, cfg.lam, range(d), cfg.n_jobs))
        iterations = 0
    else:
        solved = _clime_admm(sigma, cfg)
        raw, iterations = solved['matrix'], solved['iterations']
        violated = np.flatnonzero(feasibility_residual(sigma, raw) > cfg.lam + cfg.tolerance)
        if violated.size:
            logger.warning(f"ADMM 잔차 초과 열 {violated.size}개를 정확한 LP로 재계산")
            fixed = _solve_columns_exact(sigma, cfg.lam, [int(j) for j in violated], cfg.n_jobs)
            for j, column in zip(violated, fixed):
                raw[:, j] = column
            repaired = [int(j) + 1 for j in violated]

    residual = feasibility_residual(sigma, raw)
    worst = int(np.argmax(residual))
    if residual[worst] > cfg.lam + cfg.tolerance:
        raise InfeasibleColumnError(worst + 1, float(residual[worst]), cfg.lam)

    matrix = symmetrize(raw, cfg.symmetrization)
    diagnostics = {
        'residual': float(residual.max()),
        'symmetrized_residual': float(feasibility_residual(sigma, matrix).max()),
        'iterations': int(iterations),
        'method': method,
        'repaired_columns': repaired,
        'symmetrization': cfg.symmetrization,
    }
    return PrecisionEstimate(matrix, cfg.lam, raw, diagnostics)


def estimate_precision(x: ArrayLike, lam: float, **options) -> PrecisionEstimate:
    return clime(empirical_covariance(x), ClimeConfig(lam=lam, **options))


# ---------------------------------------------------------------------------
# 교차검증
# ---------------------------------------------------------------------------

def cv_risk_table(x: ArrayLike, grid: Sequence[float], folds: int = Config.CV_FOLDS,
                  seed: int = 0, **options) -> Dict[float, float]:
    """λ 별 Σ_k ‖Σ̂⁽ᵏ⁾Θ̂_λ⁽⁻ᵏ⁾ − I‖_max"""
    data = _as_array(x)
    n, d = data.shape
    if folds < 2:
        raise ConfigError(f"폴드 수는 2 이상이어야 합니다: {folds}")
    if not grid:
        raise ConfigError("λ 격자가 비어 있습니다.")
    if n < folds:
        raise ConfigError(f"표본 수 {n} 가 폴드 수 {folds} 보다 작습니다.")
    parts = np.array_split(np.random.default_rng(seed).permutation(n), folds)
    identity = np.eye(d)
    risks = {float(lam): 0.0 for lam in grid}
    for k, held_out in enumerate(parts):
        training = np.setdiff1d(np.arange(n), held_out, assume_unique=True)
        sigma_train = empirical_covariance(data[training])
        sigma_test = empirical_covariance(data[held_out])
        for lam in risks:
            est = clime(sigma_train, ClimeConfig(lam=lam, **options))
            risks[lam] += float(np.abs(sigma_test @ est.matrix - identity).max())
    return risks


def cv_select_lambda(x: ArrayLike, grid: Optional[Sequence[float]] = None,
                     folds: int = Config.CV_FOLDS, seed: int = 0, **options) -> float:
    """K-폴드 교차검증 위험을 최소화하는 λ (동률은 격자 순서상 앞의 값)"""
    data = _as_array(x)
    n, d = data.shape
    if grid is None:
        scale = math.sqrt(math.log(d) / n)
        grid = [c * scale for c in Config.LAMBDA_GRID]
    grid = [float(lam) for lam in grid]
    if len(grid) == 1:
        return grid[0]
    risks = cv_risk_table(data, grid, folds, seed, **options)
    selected = min(grid, key=lambda lam: risks[lam])
    logger.info(f"교차검증 λ 선택: {selected:.4f} (위험 {risks[selected]:.4f})")
    return selected


# ---------------------------------------------------------------------------
# 편향 보정
# ---------------------------------------------------------------------------

def debias_edges(sigma: np.ndarray, est: PrecisionEstimate, edges: Iterable[Edge]) -> np.ndarray:
    """Θ̃_jk = Θ̂_jk − Θ̂ᵀ_{*j}(Σ̂Θ̂_{*k} − e_k) / (Θ̂ᵀ_{*j}Σ̂_{*j}) 를 간선별로 계산"""
    theta = est.matrix
    d = theta.shape[0]
    pairs = [make_edge(j, k) for j, k in edges]
    if not pairs:
        return np.zeros(0)
    rows = np.array([j - 1 for j, _ in pairs])
    cols = np.array([k - 1 for _, k in pairs])
    denominators = np.einsum('ij,ij->j', theta, sigma)
    for (j, k), den in zip(pairs, denominators[rows]):
        if abs(den) < Config.DEBIAS_MIN_DENOMINATOR:
            raise DebiasError((j, k), float(den))
    correction = theta.T @ (sigma @ theta - np.eye(d))
    return theta[rows, cols] - correction[rows, cols] / denominators[rows]


def debias(sigma: np.ndarray, est: PrecisionEstimate, j: int, k: int) -> float:
    """단일 (j, k) 편향 보정 추정치 (1-기준 정점 번호, j 가 분모 열)"""
    theta = est.matrix
    d = theta.shape[0]
    j0, k0 = int(j) - 1, int(k) - 1
    if not (0 <= j0 < d and 0 <= k0 < d):
        raise ConfigError(f"정점 번호가 범위 1..{d} 밖입니다: ({j}, {k})")
    denominator = float(theta[:, j0] @ sigma[:, j0])
    if abs(denominator) < Config.DEBIAS_MIN_DENOMINATOR:
        raise DebiasError((int(j), int(k)), denominator)
    e_k = np.zeros(d)
    e_k[k0] = 1.0
    return float(theta[j0, k0] - theta[:, j0] @ (sigma @ theta[:, k0] - e_k) / denominator)


def rate_constant(est: Union[PrecisionEstimate, np.ndarray], truth: np.ndarray, n: int) -> float:
    """측정된 K = ‖Θ̂ − Θ*‖_max / √(log d / n)"""
    matrix = est.matrix if isinstance(est, PrecisionEstimate) else np.asarray(est)
    d = matrix.shape[0]
    return float(np.abs(matrix - truth).max() / math.sqrt(math.log(d) / n))
