"""
harness.py - 몬테카를로 시뮬레이션 엔진
(n, d, θ) 격자에서 귀무/대립 시나리오를 반복 생성하고 크기·검정력·위험을 집계
"""

import builtins
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from core.config import Config, profile_defaults
from core.estimation import ClimeConfig, default_lambda, clime, empirical_covariance
from core.graphs import Graph, GraphProperty, PropertySpec
from core.inference import BootstrapConfig, step_down
from core.model import PrecisionModel, chain_graph, chord_graph, sample
from core.witness import WitnessTestSpec, run_witness_test
from error_handler import ConfigError, FailureRecord, GraphStructureError, capture_failure, stage

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('property', 'n', 'd', 'theta', 'alpha', 'lambda', 'reps', 'size',
               'size_se', 'power', 'power_se', 'risk', 'seed')

NULL_STREAM = 0
ALTERNATIVE_STREAM = 1


# ---------------------------------------------------------------------------
# 시나리오
# ---------------------------------------------------------------------------

class Scenario:
    """귀무/대립 그래프 생성기 기본 클래스"""

    def __init__(self, name: str, prop: PropertySpec):
        self.name = name
        self.prop = prop

    def null_graph(self, d: int, rng: np.random.Generator) -> Graph:
        """귀무 그래프 생성 (하위 클래스에서 구현)"""
        raise NotImplementedError

    def alternative_graph(self, d: int, rng: np.random.Generator) -> Graph:
        """대립 그래프 생성 (하위 클래스에서 구현)"""
        raise NotImplementedError

    def draw(self, stream: int, d: int, rng: np.random.Generator) -> Graph:
        """생성 후 성질을 구조적으로 확인"""
        if stream == NULL_STREAM:
            graph = self.null_graph(d, rng)
            if not self.prop.null(graph):
                raise GraphStructureError(f"{self.name} 귀무 그래프가 귀무 성질을 갖지 않습니다.")
        else:
            graph = self.alternative_graph(d, rng)
            if not self.prop.alternative(graph):
                raise GraphStructureError(f"{self.name} 대립 그래프가 대립 성질을 갖지 않습니다.")
        return graph


class ConnectivityScenario(Scenario):
    """귀무: M ~ Uniform([d−1]) 에서 끊긴 체인, 대립: 체인"""

    def __init__(self):
        super().__init__('connectivity', PropertySpec(GraphProperty.CONNECTIVITY))

    def null_graph(self, d, rng):
        return chain_graph(d, cuts=[int(rng.integers(1, d))])

    def alternative_graph(self, d, rng):
        return chain_graph(d)


class CycleScenario(Scenario):
    """귀무: 체인, 대립: 체인 + (1, M), M ~ Uniform{3..10}"""

    def __init__(self):
        super().__init__('cycle', PropertySpec(GraphProperty.CYCLE))

    def null_graph(self, d, rng):
        return chain_graph(d)

    def alternative_graph(self, d, rng):
        low, high = Config.CYCLE_CHORD_RANGE
        return chord_graph(d, int(rng.integers(low, min(high, d) + 1)))


class TriangleScenario(Scenario):
    """귀무: 체인, 대립: 체인 + (j, j+2)"""

    def __init__(self):
        super().__init__('triangle', PropertySpec(GraphProperty.TRIANGLE))

    def null_graph(self, d, rng):
        return chain_graph(d)

    def alternative_graph(self, d, rng):
        j = int(rng.integers(1, d - 1))
        return chain_graph(d).with_edges([(j, j + 2)])


class ComponentsScenario(Scenario):
    """귀무: m+1 블록 체인, 대립: m 블록 체인 (절단 위치 균등 추출)"""

    def __init__(self, m: int):
        super().__init__('components', PropertySpec(GraphProperty.COMPONENTS, m))
        self.m = m

    def _cut_chain(self, d: int, blocks: int, rng: np.random.Generator) -> Graph:
        cuts = rng.choice(np.arange(1, d), size=blocks - 1, replace=False) if blocks > 1 else []
        return chain_graph(d, cuts=[int(c) for c in cuts])

    def null_graph(self, d, rng):
        return self._cut_chain(d, self.m + 1, rng)

    def alternative_graph(self, d, rng):
        return self._cut_chain(d, self.m, rng)


def create_scenario(name: str, param: Optional[int] = None) -> Scenario:
    """시나리오 생성"""
    if name == 'connectivity':
        return ConnectivityScenario()
    if name == 'cycle':
        return CycleScenario()
    if name == 'triangle':
        return TriangleScenario()
    if name == 'components':
        if param is None or param < 1:
            raise ConfigError("components 시나리오에는 m ≥ 1 파라미터가 필요합니다.")
        return ComponentsScenario(int(param))
    raise ConfigError(f"시뮬레이션 시나리오가 없는 성질: '{name}' (connectivity|cycle|triangle|components)")


# ---------------------------------------------------------------------------
# 설정과 결과
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationConfig:
    """시뮬레이션 프로토콜"""
    property: str = 'connectivity'
    param: Optional[int] = None
    theta_grid: Tuple[float, ...] = Config.THETA_GRID
    n: int = 300
    d: int = 50
    reps: int = 100
    B: int = 1000
    alpha: float = Config.ALPHA
    lam: Optional[float] = None
    lambda_policy: str = 'fixed'
    lambda_coefficient: float = Config.LAMBDA_COEFFICIENT
    seed: int = 0
    n_jobs: int = 1
    shuffle: bool = False

    def __post_init__(self):
        if int(self.reps) < 1:
            raise ConfigError(f"반복 수는 1 이상이어야 합니다: {self.reps}")
        if self.lambda_policy not in ('fixed', 'cv'):
            raise ConfigError(f"알 수 없는 λ 정책: {self.lambda_policy}")
        if self.n < 8 or self.d < 3:
            raise ConfigError(f"n ≥ 8, d ≥ 3 이 필요합니다: n={self.n}, d={self.d}")
        BootstrapConfig(self.B, self.alpha)
        create_scenario(self.property, self.param)

    @builtins.property
    def fixed_lambda(self) -> float:
        """고정 정책의 λ = c√(log d / n) (n 은 분할 전 전체 표본 크기)"""
        if self.lam is not None:
            return float(self.lam)
        return default_lambda(self.n, self.d, self.lambda_coefficient)

    @classmethod
    def from_settings(cls, settings: Dict[str, str], profile: str = 'desk', **overrides: Any) -> 'SimulationConfig':
        """프로파일 기본값 ← 설정 파일 값 ← 명시적 인자 순으로 병합"""
        defaults = profile_defaults(settings.get('PROFILE', profile))
        values: Dict[str, Any] = {'n': defaults['N'], 'd': defaults['D'],
                                  'reps': defaults['REPS'], 'B': defaults['B']}
        parsers = {
            'PROPERTY': ('property', str), 'PARAM': ('param', int), 'THETA_GRID': ('theta_grid', _float_tuple),
            'N': ('n', int), 'D': ('d', int), 'REPS': ('reps', int), 'B': ('B', int),
            'ALPHA': ('alpha', float), 'LAMBDA_COEFFICIENT': ('lambda_coefficient', float),
            'SEED': ('seed', int), 'THREADS': ('n_jobs', int), 'SHUFFLE': ('shuffle', _boolean),
        }
        for key, raw in settings.items():
            if key == 'LAMBDA':
                if raw.strip().lower() == 'cv':
                    values['lambda_policy'] = 'cv'
                else:
                    values['lam'] = _parse(key, raw, float)
            elif key in parsers:
                name, parser = parsers[key]
                values[name] = _parse(key, raw, parser)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _parse(key: str, raw: str, parser):
    try:
        return parser(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"설정 값 파싱 실패 {key}={raw!r}: {e}") from e


def _float_tuple(raw: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in raw.split(',') if v.strip())


def _boolean(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"불리언이 아닙니다: {raw}")


@dataclass
class RepetitionRecord:
    """반복 한 건의 결과 (실패 시 reject 는 None)"""
    theta_index: int
    repetition: int
    stream: int
    reject: Optional[bool]
    lam: Optional[float] = None
    failure: Optional[Dict[str, str]] = None


@dataclass
class SimulationRow:
    property: str
    n: int
    d: int
    theta: float
    alpha: float
    lam: float
    reps: int
    size: float
    size_se: float
    power: float
    power_se: float
    risk: float
    seed: int
    null_failures: int = 0
    alternative_failures: int = 0

    @builtins.property
    def null_completed(self) -> int:
        """크기와 size_se 의 분모"""
        return self.reps - self.null_failures

    @builtins.property
    def alternative_completed(self) -> int:
        return self.reps - self.alternative_failures

    def to_csv_row(self) -> Dict[str, Any]:
        return {
            'property': self.property, 'n': self.n, 'd': self.d, 'theta': self.theta,
            'alpha': self.alpha, 'lambda': self.lam, 'reps': self.reps, 'size': self.size,
            'size_se': self.size_se, 'power': self.power, 'power_se': self.power_se,
            'risk': self.risk, 'seed': self.seed,
        }


@dataclass
class SimulationResult:
    """시뮬레이션 결과 데이터 클래스"""
    config: SimulationConfig
    rows: List[SimulationRow]
    outcomes: List[RepetitionRecord]
    wall_clock_seconds: float = 0.0
    started_at: str = ''

    @property
    def failures(self) -> List[RepetitionRecord]:
        return [o for o in self.outcomes if o.failure is not None]

    @property
    def failure_rate(self) -> float:
        return len(self.failures) / len(self.outcomes) if self.outcomes else 0.0


# ---------------------------------------------------------------------------
# 엔진
# ---------------------------------------------------------------------------

def _repetition_seeds(seed: int, theta_index: int, repetition: int, stream: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence([int(seed), theta_index, repetition, stream]).spawn(3)


def _witness_spec(cfg: SimulationConfig, scenario: Scenario, seed: int) -> WitnessTestSpec:
    clime_cfg = ClimeConfig(lam=cfg.fixed_lambda) if cfg.lambda_policy == 'fixed' else None
    return WitnessTestSpec(
        property=scenario.prop,
        alpha=cfg.alpha,
        clime=clime_cfg,
        lambda_policy=cfg.lambda_policy,
        bootstrap=BootstrapConfig(B=cfg.B, alpha=cfg.alpha, seed=seed),
        shuffle=cfg.shuffle,
        split_seed=seed,
    )


@capture_failure("repetition")
def _run_repetition(cfg: SimulationConfig, theta_index: int, theta: float,
                    repetition: int, stream: int) -> RepetitionRecord:
    scenario = create_scenario(cfg.property, cfg.param)
    graph_seed, sample_seed, test_seed = _repetition_seeds(cfg.seed, theta_index, repetition, stream)
    with stage('scenario'):
        graph = scenario.draw(stream, cfg.d, np.random.default_rng(graph_seed))
        model = PrecisionModel(theta, graph)
    with stage('sample'):
        data = sample(model, cfg.n, sample_seed)
    spec = _witness_spec(cfg, scenario, int(test_seed.generate_state(1)[0]))
    outcome = run_witness_test(data, spec)
    return RepetitionRecord(theta_index, repetition, stream, bool(outcome.reject),
                            lam=float(outcome.extras.get('lambda', cfg.fixed_lambda)))


def _proportion(flags: Sequence[bool]) -> Tuple[float, float]:
    if not flags:
        return math.nan, math.nan
    p = sum(flags) / len(flags)
    return p, math.sqrt(p * (1.0 - p) / len(flags))


class SimulationEngine:
    """반복 실행 풀 (joblib) 과 정확한 정수 집계"""

    def __init__(self, n_jobs: int = 1):
        self.n_jobs = n_jobs

    def run(self, cfg: SimulationConfig) -> SimulationResult:
        """시뮬레이션 실행"""
        started = datetime.now().isoformat(timespec='seconds')
        clock = time.perf_counter()
        tasks = [(ti, float(theta), rep, stream)
                 for ti, theta in enumerate(cfg.theta_grid)
                 for stream in (NULL_STREAM, ALTERNATIVE_STREAM)
                 for rep in range(cfg.reps)]
        logger.info(f"시뮬레이션 시작: {cfg.property} n={cfg.n} d={cfg.d} θ {len(cfg.theta_grid)}개 × "
                    f"{cfg.reps}회 × 2, 작업자 {self.n_jobs}")
        raw = Parallel(n_jobs=self.n_jobs)(delayed(_run_repetition)(cfg, *task) for task in tasks)
        outcomes = [self._record(task, result) for task, result in zip(tasks, raw)]
        rows = self._aggregate(cfg, outcomes)
        elapsed = time.perf_counter() - clock
        result = SimulationResult(cfg, rows, outcomes, elapsed, started)
        if result.failures:
            logger.warning(f"반복 실패 {len(result.failures)}건 ({result.failure_rate:.2%})")
        logger.info(f"시뮬레이션 완료: {elapsed:.1f}초")
        return result

    @staticmethod
    def _record(task: Tuple[int, float, int, int], result: Union[RepetitionRecord, FailureRecord]) -> RepetitionRecord:
        if isinstance(result, FailureRecord):
            ti, _, rep, stream = task
            return RepetitionRecord(ti, rep, stream, None, failure=result.to_dict())
        return result

    def _aggregate(self, cfg: SimulationConfig, outcomes: List[RepetitionRecord]) -> List[SimulationRow]:
        """θ 별 크기, 검정력, 위험 = 크기 + (1 − 검정력)"""
        rows = []
        for ti, theta in enumerate(cfg.theta_grid):
            mine = [o for o in outcomes if o.theta_index == ti]
            null = [o.reject for o in mine if o.stream == NULL_STREAM and o.reject is not None]
            alt = [o.reject for o in mine if o.stream == ALTERNATIVE_STREAM and o.reject is not None]
            size, size_se = _proportion(null)
            power, power_se = _proportion(alt)
            lams = [o.lam for o in mine if o.lam is not None]
            rows.append(SimulationRow(
                property=cfg.property if cfg.param is None else f"{cfg.property}({cfg.param})",
                n=cfg.n, d=cfg.d, theta=float(theta), alpha=cfg.alpha,
                lam=float(np.mean(lams)) if lams else cfg.fixed_lambda,
                reps=cfg.reps, size=size, size_se=size_se, power=power, power_se=power_se,
                risk=size + (1.0 - power), seed=cfg.seed,
                null_failures=sum(1 for o in mine if o.stream == NULL_STREAM and o.failure),
                alternative_failures=sum(1 for o in mine if o.stream == ALTERNATIVE_STREAM and o.failure),
            ))
            row = rows[-1]
            message = (f"θ={theta:.3f}: size={size:.3f} (n_null={row.null_completed}/{cfg.reps}) "
                       f"power={power:.3f} (n_alt={row.alternative_completed}/{cfg.reps})")
            if row.null_failures or row.alternative_failures:
                logger.warning(message + " - SE 분모는 완료된 반복 수")
            else:
                logger.info(message)
        return rows


def run_simulation(cfg: SimulationConfig) -> SimulationResult:
    return SimulationEngine(cfg.n_jobs).run(cfg)


# ---------------------------------------------------------------------------
# 출력
# ---------------------------------------------------------------------------

def emit(result: Optional[SimulationResult], fmt: str = 'csv',
         out: Optional[Union[str, Path]] = None) -> str:
    """CSV (고정 열) 또는 JSON 줄 레코드 스트림"""
    rows = [row.to_csv_row() for row in result.rows] if result is not None else []
    if fmt == 'csv':
        frame = pd.DataFrame(rows, columns=list(CSV_COLUMNS))
        text = frame.to_csv(index=False, float_format='%.6f', lineterminator='\n')
    elif fmt in ('records', 'record-stream'):
        text = ''.join(json.dumps(row, ensure_ascii=False) + '\n' for row in rows)
    else:
        raise ConfigError(f"알 수 없는 출력 형식: {fmt} (csv|records)")
    if out is not None:
        try:
            Path(out).write_text(text)
        except OSError as e:
            raise OSError(f"결과 저장 실패 ({out}): {e}") from e
    return text


# ---------------------------------------------------------------------------
# FWER 실험
# ---------------------------------------------------------------------------

@dataclass
class FwerResult:
    reps: int
    completed: int
    any_null_rejected: float
    exact_recovery: float
    failures: List[Dict[str, str]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def fwer_edge_sets(n_signal: int = 5, n_null: int = 5) -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]]]:
    """서로 겹치지 않는 (2i−1, 2i) 간선: 앞쪽은 신호, 뒤쪽은 Θ* 에서 정확히 0"""
    pairs = [(2 * i + 1, 2 * i + 2) for i in range(n_signal + n_null)]
    return pairs[:n_signal], pairs[n_signal:]


@capture_failure("fwer-repetition")
def _fwer_repetition(d: int, n: int, signal: float, alpha: float, B: int,
                     seed: int, repetition: int) -> Tuple[bool, bool]:
    signal_edges, null_edges = fwer_edge_sets()
    sample_seed, boot_seed = np.random.SeedSequence([int(seed), repetition]).spawn(2)
    with stage('sample'):
        data = sample(PrecisionModel(signal, Graph(d, frozenset(signal_edges))), n, sample_seed)
    with stage('estimate'):
        est = clime(empirical_covariance(data), ClimeConfig(lam=default_lambda(n, d)))
    with stage('step-down'):
        cfg = BootstrapConfig(B=B, alpha=alpha, seed=int(boot_seed.generate_state(1)[0]))
        outcome = step_down(data, est, signal_edges + null_edges, cfg, label='fwer')
    return bool(outcome.rejected & set(null_edges)), outcome.rejected == frozenset(signal_edges)


def run_fwer_experiment(d: int = 50, n: int = 400, reps: int = 500, signal: float = 0.45,
                        alpha: float = Config.ALPHA, B: int = 1000, seed: int = 0,
                        n_jobs: int = 1) -> FwerResult:
    """고정 10-간선 집합(신호 5, 귀무 5)에서 귀무 기각 빈도와 정확 복원 빈도"""
    if d < 20:
        raise ConfigError(f"FWER 실험에는 d ≥ 20 이 필요합니다: {d}")
    raw = Parallel(n_jobs=n_jobs)(
        delayed(_fwer_repetition)(d, n, signal, alpha, B, seed, rep) for rep in range(reps)
    )
    done = [r for r in raw if not isinstance(r, FailureRecord)]
    failures = [r.to_dict() for r in raw if isinstance(r, FailureRecord)]
    any_null = sum(1 for hit, _ in done if hit) / len(done) if done else math.nan
    exact = sum(1 for _, ok in done if ok) / len(done) if done else math.nan
    logger.info(f"FWER 실험: 귀무 기각 {any_null:.3f}, 정확 복원 {exact:.3f} ({len(done)}/{reps})")
    return FwerResult(reps, len(done), any_null, exact, failures)
