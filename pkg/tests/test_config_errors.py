"""
test_config_errors.py - 설정 로드, 오류 계층/실패 기록, 명령행 종료 코드 테스트
"""

import json
import logging

import numpy as np
import pytest

import graphwise
from core.config import Config, load_config_file, profile_defaults
from error_handler import (
    ConfigError, FailureRecord, FamilyParameterError, GraphStructureError, NotPositiveDefiniteError,
    PreconditionError, StageError, capture_failure, configure_error_log, error_logger, exit_code_for,
    stage,
)


class TestConfigFile:
    def test_load_values(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("n=120\nTHETA_GRID=0.3,0.4\n# 주석\nLAMBDA=cv\n")
        assert load_config_file(str(path)) == {'N': '120', 'THETA_GRID': '0.3,0.4', 'LAMBDA': 'cv'}

    def test_environment_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / "run.env"
        path.write_text("N=120\n")
        monkeypatch.setenv("GRAPHWISE_N", "999")
        monkeypatch.setenv("GRAPHWISE_SEED", "7")
        assert load_config_file(str(path)) == {'N': '999', 'SEED': '7'}

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("BANANA=1\n")
        with pytest.raises(ConfigError):
            load_config_file(str(path))

    def test_missing_value(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("N\n")
        with pytest.raises(ConfigError):
            load_config_file(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config_file(str(tmp_path / "none.env"))

    def test_no_file_is_empty(self, monkeypatch):
        for key in Config.CONFIG_KEYS:
            monkeypatch.delenv(f"{Config.ENV_PREFIX}{key}", raising=False)
        assert load_config_file(None) == {}

    def test_profiles(self):
        assert profile_defaults('desk') == {'D': 50, 'N': 300, 'REPS': 100, 'B': 1000}
        assert profile_defaults('paper')['B'] == 3000
        with pytest.raises(ConfigError):
            profile_defaults('cluster')


class TestErrors:
    def test_exit_codes(self):
        assert exit_code_for(ConfigError("x")) == 2
        assert exit_code_for(FamilyParameterError("x")) == 2
        assert exit_code_for(NotPositiveDefiniteError(-0.1)) == 3
        assert exit_code_for(np.linalg.LinAlgError("x")) == 3
        assert exit_code_for(GraphStructureError("x")) == 1
        assert exit_code_for(PreconditionError("x")) == 1

    def test_stage_wrapping(self):
        with pytest.raises(StageError) as info:
            with stage('estimate'):
                raise NotPositiveDefiniteError(-1.0)
        assert info.value.stage == 'estimate'
        assert info.value.numerical
        assert exit_code_for(info.value) == 3
        assert exit_code_for(StageError('split', ConfigError("x"))) == 2

    def test_inner_stage_label_kept(self):
        with pytest.raises(StageError) as info:
            with stage('outer'):
                with stage('inner'):
                    raise GraphStructureError("x")
        assert info.value.stage == 'inner'
        assert not info.value.numerical

    def test_foreign_errors_pass_through(self):
        with pytest.raises(KeyError):
            with stage('lookup'):
                raise KeyError('missing')

    def test_capture_failure(self):
        @capture_failure("work")
        def fails_in_stage():
            with stage('sample'):
                raise NotPositiveDefiniteError(-0.5)

        @capture_failure("work")
        def fails_plainly():
            raise ValueError("bad")

        @capture_failure("work")
        def succeeds():
            return 42

        staged = fails_in_stage()
        assert isinstance(staged, FailureRecord)
        assert (staged.stage, staged.error_type) == ('sample', 'NotPositiveDefiniteError')
        plain = fails_plainly()
        assert (plain.stage, plain.error_type, plain.message) == ('work', 'ValueError', 'bad')
        assert set(plain.to_dict()) == {'error_id', 'stage', 'error_type', 'message'}
        assert succeeds() == 42

    def test_error_log_file(self, tmp_path):
        path = tmp_path / "errors.log"
        configure_error_log(str(path))
        try:
            record = capture_failure("work")(lambda: 1 / 0)()
            assert f"ERROR_{record.error_id}" in path.read_text()
        finally:
            for handler in list(error_logger.handlers):
                if isinstance(handler, logging.FileHandler):
                    handler.close()
                    error_logger.removeHandler(handler)


class TestCommandLine:
    @pytest.fixture(autouse=True)
    def clean_environment(self, monkeypatch):
        for key in Config.CONFIG_KEYS:
            monkeypatch.delenv(f"{Config.ENV_PREFIX}{key}", raising=False)

    def test_lowerbound_record(self, capsys):
        code = graphwise.main(['lowerbound', '--family', 'cycle', '--d', '30', '--n', '400',
                               '--theta', '0.05', '--C', '2', '--L', '3'])
        assert code == 0
        record = json.loads(capsys.readouterr().out)
        assert record['family'] == 'cycle'
        assert record['theorem'] == 'single-edge'
        assert record['n_sets'] == 30
        assert record['chi2_bound'] <= 1.0
        assert {'threshold', 'binding', 'entropy'} <= set(record)

    def test_sample_estimate_test_pipeline(self, tmp_path):
        data = tmp_path / "x.csv"
        assert graphwise.main(['sample', '--property', 'connectivity', '--stream', 'alternative',
                               '--theta', '0.4', '-n', '400', '-d', '6', '--out', str(data)]) == 0
        est_out, matrix_out = tmp_path / "est.json", tmp_path / "theta.csv"
        assert graphwise.main(['estimate', '--data', str(data), '--out', str(est_out),
                               '--matrix-out', str(matrix_out)]) == 0
        assert matrix_out.exists()
        json.loads(est_out.read_text())
        result = tmp_path / "test.json"
        assert graphwise.main(['test', '--data', str(data), '--property', 'connectivity',
                               '-B', '200', '--out', str(result)]) == 0
        record = json.loads(result.read_text())
        assert record['property'] == 'connectivity'
        assert len(record['witness']) == 5
        assert isinstance(record['reject'], bool)

    def test_sample_requires_out(self):
        assert graphwise.main(['sample', '--theta', '0.3', '-n', '50', '-d', '5']) == 2

    def test_missing_config_file(self, tmp_path):
        assert graphwise.main(['simulate', '--config', str(tmp_path / "none.env")]) == 2

    def test_unknown_config_key(self, tmp_path):
        path = tmp_path / "run.env"
        path.write_text("COLOR=blue\n")
        assert graphwise.main(['simulate', '--config', str(path)]) == 2

    def test_unknown_family(self):
        assert graphwise.main(['lowerbound', '--family', 'planar', '-d', '10']) == 2

    def test_precondition_violation(self):
        assert graphwise.main(['lowerbound', '--family', 'cycle', '-d', '30', '--theta', '0.5']) == 1

    def test_bad_mu_setting(self, tmp_path):
        data = tmp_path / "x.csv"
        graphwise.main(['sample', '--theta', '0.3', '-n', '60', '-d', '5', '--out', str(data)])
        path = tmp_path / "run.env"
        path.write_text("MU=lots\n")
        assert graphwise.main(['test', '--data', str(data), '--property', 'connectivity_at_level',
                               '--config', str(path)]) == 2

    def test_simulate_failure_rate_exit(self, capsys):
        code = graphwise.main(['simulate', '--property', 'connectivity', '-d', '10', '-n', '40',
                               '--reps', '1', '-B', '100', '--theta-grid', '0.6'])
        assert code == 3
        assert capsys.readouterr().out.startswith('property,n,d,theta')
