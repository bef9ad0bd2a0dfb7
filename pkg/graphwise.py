"""
graphwise.py - 명령행 진입점
sample / estimate / test / lowerbound / simulate 하위 명령 (결과는 stdout, 로그는 stderr)
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from core.config import Config, load_config_file, profile_defaults, setup_logging
from core.estimation import ClimeConfig, clime, cv_select_lambda, default_lambda, empirical_covariance
from core.graphs import Graph, PropertySpec
from core.inference import BootstrapConfig
from core.lowerbound import Setting, multi_edge_chi2_bound, single_edge_chi2_bound, threshold_report
from core.model import Dataset, ModelClassParams, PrecisionModel, build_family, sample, save_matrix
from core.witness import WitnessTestSpec, run_witness_test
from error_handler import ConfigError, GraphwiseError, configure_error_log, exit_code_for
from harness import (
    ALTERNATIVE_STREAM, NULL_STREAM, SimulationConfig, create_scenario, emit, run_fwer_experiment,
    run_simulation,
)

logger = logging.getLogger("graphwise")

EXIT_OK = 0
EXIT_FAILURE_RATE = 3


def _write(text: str, out: Optional[str]) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as e:
            raise OSError(f"출력 파일 저장 실패 ({out}): {e}") from e
    else:
        sys.stdout.write(text)


def _dump(record: Dict[str, Any], out: Optional[str]) -> None:
    _write(json.dumps(record, ensure_ascii=False, indent=2, default=str) + "\n", out)


def _property(args: argparse.Namespace) -> PropertySpec:
    try:
        return PropertySpec.parse(args.property, args.param, getattr(args, 'alt_level', None))
    except GraphwiseError as e:
        raise ConfigError(str(e)) from e


def _lambda_option(raw: Optional[str]) -> Optional[str]:
    if raw is None or raw == 'cv':
        return raw
    try:
        value = float(raw)
    except ValueError:
        raise argparse.ArgumentTypeError(f"λ 는 양수 또는 'cv' 여야 합니다: {raw}")
    if value <= 0:
        raise argparse.ArgumentTypeError(f"λ 는 양수여야 합니다: {raw}")
    return raw


# ---------------------------------------------------------------------------
# 하위 명령
# ---------------------------------------------------------------------------

def cmd_sample(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    """그래프 파일 또는 시나리오에서 N(0, (I + θA)⁻¹) 표본 생성"""
    if not args.out:
        raise ConfigError("sample 명령에는 --out 데이터 파일 경로가 필요합니다.")
    if args.graph:
        graph = Graph.load(args.graph)
    else:
        scenario = create_scenario(args.property, args.param)
        stream = ALTERNATIVE_STREAM if args.stream == 'alternative' else NULL_STREAM
        graph = scenario.draw(stream, args.d, np.random.default_rng([args.seed, stream]))
    data = sample(PrecisionModel(args.theta, graph), args.n, args.seed)
    data.save(args.out, args.data_format)
    logger.info(f"표본 저장: {args.out} ({data.n}×{data.d}, 간선 {graph.n_edges}개)")
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    """CLIME 정밀도 추정 (행렬은 파일로, 진단은 stdout 으로)"""
    data = Dataset.load(args.data, args.data_format)
    if args.lam == 'cv':
        lam = cv_select_lambda(data, seed=args.seed)
    elif args.lam is not None:
        lam = float(args.lam)
    else:
        lam = default_lambda(data.n, data.d)
    est = clime(empirical_covariance(data), ClimeConfig(lam=lam, n_jobs=args.threads))
    if args.matrix_out:
        save_matrix(args.matrix_out, est.matrix)
    _dump(est.to_record(), args.out)
    return EXIT_OK


def cmd_test(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    """증인 검정 (clique 는 고유값 탐지 검정)"""
    data = Dataset.load(args.data, args.data_format)
    try:
        mu = args.mu if args.mu is not None else float(settings.get('MU', 0.0))
    except ValueError as e:
        raise ConfigError(f"MU 설정 값이 숫자가 아닙니다: {e}") from e
    lam = args.lam if args.lam is not None else settings.get('LAMBDA')
    if lam is not None and lam != 'cv':
        try:
            lam = _lambda_option(lam)
        except argparse.ArgumentTypeError as e:
            raise ConfigError(str(e)) from e
    clime_cfg = ClimeConfig(lam=float(lam)) if lam not in (None, 'cv') else None
    spec = WitnessTestSpec(
        property=_property(args),
        alpha=args.alpha,
        clime=clime_cfg,
        lambda_policy='cv' if lam == 'cv' else 'fixed',
        bootstrap=BootstrapConfig(B=args.B, alpha=args.alpha, seed=args.seed, n_jobs=args.threads),
        mu=mu,
        shuffle=args.shuffle,
        split_seed=args.seed,
    )
    outcome = run_witness_test(data, spec)
    _dump(outcome.to_record(), args.out)
    return EXIT_OK


def cmd_lowerbound(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    """예제 패밀리의 임계값 보고서 (θ 가 주어지면 카이제곱 위험 하한 포함)"""
    params = {'m': args.m, 's0': args.s0, 's1': args.s1, 's': args.s}
    family = build_family(args.family, args.d, **params)
    model_params = ModelClassParams(args.sparsity, args.C, max(args.C, args.L))
    report = threshold_report(family.divider, args.n, model_params, kappa=args.kappa, seed=args.seed)
    record = {'family': family.kind, 'd': args.d, 'n': args.n, 'n_sets': len(family.divider), **report.to_dict()}
    if args.theta is not None:
        if family.divider.single_edge:
            record['chi2_bound'] = single_edge_chi2_bound(family.divider, args.theta, args.n, C=args.C)
        else:
            record['chi2_bound'] = multi_edge_chi2_bound(family.divider, args.theta, args.n,
                                                         Setting(args.setting), C=args.C, n_jobs=args.threads)
    _dump(record, args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, settings: Dict[str, str]) -> int:
    """θ 격자 몬테카를로 시뮬레이션 (실패율이 한도를 넘으면 종료 코드 3)"""
    if args.fwer:
        defaults = profile_defaults(args.profile)
        result = run_fwer_experiment(d=args.d or 50, n=args.n or 400, reps=args.reps or 500,
                                     B=args.B or defaults['B'], alpha=args.alpha or Config.ALPHA,
                                     seed=args.seed, n_jobs=args.threads)
        _dump(result.to_dict(), args.out)
        failure_rate = 1.0 - result.completed / result.reps if result.reps else 0.0
    else:
        overrides = {
            'property': args.property, 'param': args.param, 'n': args.n, 'd': args.d,
            'reps': args.reps, 'B': args.B, 'alpha': args.alpha, 'seed': args.seed_override,
            'n_jobs': args.threads if args.threads != 1 else None,
            'theta_grid': tuple(args.theta_grid) if args.theta_grid else None,
            'shuffle': True if args.shuffle else None,
        }
        if args.lam == 'cv':
            overrides['lambda_policy'] = 'cv'
        elif args.lam is not None:
            overrides['lam'] = float(args.lam)
        cfg = SimulationConfig.from_settings(settings, args.profile, **overrides)
        result = run_simulation(cfg)
        text = emit(result, args.format, args.out)
        if not args.out:
            sys.stdout.write(text)
        failure_rate = result.failure_rate
    if failure_rate > Config.FAILURE_RATE_LIMIT:
        logger.error(f"반복 실패율 {failure_rate:.2%} 가 한도 {Config.FAILURE_RATE_LIMIT:.0%} 를 넘었습니다.")
        return EXIT_FAILURE_RATE
    return EXIT_OK


COMMANDS = {
    'sample': cmd_sample,
    'estimate': cmd_estimate,
    'test': cmd_test,
    'lowerbound': cmd_lowerbound,
    'simulate': cmd_simulate,
}


# ---------------------------------------------------------------------------
# 파서
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--profile", choices=sorted(Config.PROFILES), default="desk")
    common.add_argument("--config", default=None, help="KEY=value 설정 파일")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "records"), default="csv")
    common.add_argument("--out", default=None)
    common.add_argument("--log-level", default="INFO")
    common.add_argument("--error-log", default=None)

    ap = argparse.ArgumentParser(prog="graphwise", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", parents=[common], help="가우시안 표본 생성")
    p.add_argument("--graph", default=None, help="간선 목록 파일 (없으면 시나리오 사용)")
    p.add_argument("--property", "--family", dest="property", default="connectivity")
    p.add_argument("--param", type=int, default=None)
    p.add_argument("--stream", choices=("null", "alternative"), default="alternative")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("-n", "--n", type=int, required=True)
    p.add_argument("-d", "--d", type=int, default=50)
    p.add_argument("--data-format", choices=("csv", "binary"), default=None)

    p = sub.add_parser("estimate", parents=[common], help="CLIME 정밀도 추정")
    p.add_argument("--data", required=True)
    p.add_argument("--data-format", choices=("csv", "binary"), default=None)
    p.add_argument("--lambda", dest="lam", type=_lambda_option, default=None)
    p.add_argument("--matrix-out", default=None)

    p = sub.add_parser("test", parents=[common], help="조합적 성질 검정")
    p.add_argument("--data", required=True)
    p.add_argument("--data-format", choices=("csv", "binary"), default=None)
    p.add_argument("--property", required=True)
    p.add_argument("--param", type=int, default=None)
    p.add_argument("--alt-level", type=int, default=None)
    p.add_argument("--mu", type=float, default=None)
    p.add_argument("--alpha", type=float, default=Config.ALPHA)
    p.add_argument("-B", type=int, default=Config.BOOTSTRAP_B)
    p.add_argument("--lambda", dest="lam", type=_lambda_option, default=None)
    p.add_argument("--shuffle", action="store_true")

    p = sub.add_parser("lowerbound", parents=[common], help="하한 임계값 보고서")
    p.add_argument("--family", required=True)
    p.add_argument("-d", "--d", type=int, required=True)
    p.add_argument("-n", "--n", type=int, default=400)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--s0", type=int, default=None)
    p.add_argument("--s1", type=int, default=None)
    p.add_argument("--s", type=int, default=None)
    p.add_argument("--sparsity", type=int, default=3)
    p.add_argument("--C", type=float, default=Config.SPECTRAL_BOUND_C)
    p.add_argument("--L", type=float, default=Config.SPECTRAL_BOUND_C)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--setting", choices=("S1", "S2"), default="S1")

    p = sub.add_parser("simulate", parents=[common], help="크기/검정력 시뮬레이션")
    p.add_argument("--property", default=None)
    p.add_argument("--param", type=int, default=None)
    p.add_argument("--theta-grid", type=float, nargs="+", default=None)
    p.add_argument("-n", "--n", type=int, default=None)
    p.add_argument("-d", "--d", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("-B", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--lambda", dest="lam", type=_lambda_option, default=None)
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--fwer", action="store_true", help="고정 10-간선 FWER 실험")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # simulate 는 명시적 --seed 만 설정 파일 값을 덮어씀
    raw_argv = sys.argv[1:] if argv is None else argv
    args.seed_override = args.seed if "--seed" in raw_argv else None
    setup_logging(args.log_level)
    configure_error_log(args.error_log)
    try:
        settings = load_config_file(args.config)
        return COMMANDS[args.command](args, settings)
    except (GraphwiseError, OSError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return exit_code_for(e)


if __name__ == "__main__":
    sys.exit(main())
