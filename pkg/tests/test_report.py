"""Tests for result tables and their renderings"""
import math

import pandas as pd
import pytest

from uwdecode.errors import ConfigError, EmptyDataset
from uwdecode.report import (
    AVG_GROUP,
    KIND_MSE,
    KIND_ORACLE,
    KIND_WER,
    ResultTable,
    emit_report,
    mse_text,
    oracle_text,
    relative_reduction,
    wer_text,
    write_gnuplot_surface,
)


@pytest.fixture
def wer_table():
    rows = []
    for system, wers in (('baseline+SS', (20.0, 30.0)), ('UW+UV_oracle', (15.0, 25.0)), ('baseline', (30.0, 40.0))):
        for group, value in zip(('test-white', 'test-band'), wers):
            rows.append({'training': 'clean', 'test_group': group, 'system': system, 'wer': value})
        rows.append({'training': 'clean', 'test_group': AVG_GROUP, 'system': system, 'wer': sum(wers) / 2})
    return ResultTable.from_rows(KIND_WER, rows)


@pytest.fixture
def oracle_table():
    rows = []
    for th in (1.0, 2.0):
        for k in (1.0, 5.0):
            rows.append({'th': th, 'k': k, 'group': AVG_GROUP, 'wer': 10.0 * th + k})
    rows.append({'th': math.inf, 'k': 1.0, 'group': AVG_GROUP, 'wer': 30.0})
    return ResultTable.from_rows(KIND_ORACLE, rows)


@pytest.fixture
def mse_table():
    return ResultTable.from_rows(KIND_MSE, [
        {'topology': 'C1', 'feature': 'f1', 'train_mse': 1.0, 'val_mse': 1.1, 'test_mse': 1.2, 'best': False},
        {'topology': 'C1', 'feature': 'f2', 'train_mse': 0.5, 'val_mse': 0.6, 'test_mse': 0.7, 'best': True},
    ])


class TestResultTable:

    def test_rows_sorted_by_key(self, wer_table):
        first = wer_table.frame.iloc[:3]
        assert set(first['test_group']) == {AVG_GROUP}
        assert list(first['system']) == ['UW+UV_oracle', 'baseline', 'baseline+SS']

    def test_duplicate_keys_rejected(self):
        row = {'th': 1.0, 'k': 1.0, 'group': AVG_GROUP, 'wer': 5.0}
        with pytest.raises(ConfigError):
            ResultTable.from_rows(KIND_ORACLE, [row, row])

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            ResultTable('speed', pd.DataFrame())

    def test_csv_round_trip_keeps_infinite_threshold(self, oracle_table, tmp_path):
        path = tmp_path / 'oracle.csv'
        oracle_table.to_csv(str(path))
        back = ResultTable.read_csv(str(path), KIND_ORACLE)
        assert math.isinf(back.frame['th'].iloc[-1])
        assert back.frame['wer'].tolist() == pytest.approx(oracle_table.frame['wer'].tolist())

    def test_empty_table_not_written(self, tmp_path):
        with pytest.raises(EmptyDataset):
            ResultTable.from_rows(KIND_WER, []).to_csv(str(tmp_path / 'x.csv'))


class TestRenderings:

    def test_relative_reduction(self):
        assert relative_reduction(15.0, 20.0) == pytest.approx(25.0)
        assert relative_reduction(0.0, 0.0) == 0.0

    def test_wer_text_has_reduction_column(self, wer_table):
        text = wer_text(wer_table)
        assert 'rel_red_%' in text
        assert '20.00' in text
        assert '-40.00' in text
        assert text.splitlines()[0].rstrip().endswith('rel_red_%')

    def test_oracle_text_reports_argmin(self, oracle_table):
        assert 'argmin: Th=1 K=1 WER=11.00' in oracle_text(oracle_table)

    def test_oracle_text_unknown_group(self, oracle_table):
        with pytest.raises(EmptyDataset):
            oracle_text(oracle_table, 'test-pink')

    def test_mse_text_names_best_cell(self, mse_table):
        assert 'lowest MSE: C1/f2 = 0.7000' in mse_text(mse_table)

    def test_gnuplot_blocks_skip_fallback(self, oracle_table, tmp_path):
        path = tmp_path / 'surface.dat'
        write_gnuplot_surface(oracle_table, str(path))
        lines = path.read_text().splitlines()
        data = [line for line in lines if line and not line.startswith('#')]
        assert len(data) == 4
        assert data[0] == '1 1 11.000000'
        assert lines.count('') == 2


class TestEmitReport:

    def test_writes_requested_formats(self, wer_table, oracle_table, mse_table, tmp_path):
        written = emit_report({'wer_table': wer_table, 'oracle_grid': oracle_table, 'regressor_grid': mse_table},
                              ['text', 'gnuplot', 'png'], str(tmp_path / 'reports'))
        names = sorted(p.split('/')[-1] for p in written)
        assert 'wer_table.csv' in names and 'wer_table.txt' in names
        assert f'oracle_grid-{AVG_GROUP}.dat' in names
        assert f'oracle_grid-{AVG_GROUP}.png' in names
        assert 'regressor_grid.txt' in names
        assert (tmp_path / 'reports' / f'oracle_grid-{AVG_GROUP}.png').stat().st_size > 0

    def test_csv_only(self, mse_table, tmp_path):
        written = emit_report({'regressor_grid': mse_table}, [], str(tmp_path))
        assert [p.split('/')[-1] for p in written] == ['regressor_grid.csv']

    def test_unknown_format(self, mse_table, tmp_path):
        with pytest.raises(ConfigError):
            emit_report({'regressor_grid': mse_table}, ['pdf'], str(tmp_path))

    def test_nothing_to_report(self, tmp_path):
        with pytest.raises(EmptyDataset):
            emit_report({}, ['text'], str(tmp_path))
