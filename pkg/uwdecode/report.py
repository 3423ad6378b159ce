"""
Result tables and their CSV / text / gnuplot / PNG renderings
"""
import logging
import math
import os
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence

import pandas as pd

from uwdecode.errors import ConfigError, EmptyDataset, IoError

logger = logging.getLogger(__name__)

KIND_WER = 'wer'
KIND_ORACLE = 'oracle'
KIND_MSE = 'mse'

COLUMNS = {
    KIND_WER: ['training', 'test_group', 'system', 'wer'],
    KIND_ORACLE: ['th', 'k', 'group', 'wer'],
    KIND_MSE: ['topology', 'feature', 'train_mse', 'val_mse', 'test_mse', 'best'],
}
KEYS = {
    KIND_WER: ['training', 'test_group', 'system'],
    KIND_ORACLE: ['th', 'k', 'group'],
    KIND_MSE: ['topology', 'feature'],
}

FORMAT_TEXT = 'text'
FORMAT_GNUPLOT = 'gnuplot'
FORMAT_PNG = 'png'
FORMATS = (FORMAT_TEXT, FORMAT_GNUPLOT, FORMAT_PNG)

AVG_GROUP = 'AVG'
REFERENCE_SYSTEM = 'baseline+SS'


@dataclass
class ResultTable:
    """Rows keyed by the kind's key columns; sorted on construction so output never depends on job order"""
    kind: str
    frame: pd.DataFrame

    def __post_init__(self):
        if self.kind not in COLUMNS:
            raise ConfigError(f"Unknown table kind '{self.kind}'")
        missing = set(COLUMNS[self.kind]) - set(self.frame.columns)
        if missing:
            raise ConfigError(f"{self.kind} table is missing columns {sorted(missing)}")
        self.frame = (self.frame[COLUMNS[self.kind]]
                      .sort_values(KEYS[self.kind], kind='mergesort')
                      .reset_index(drop=True))
        if self.frame.duplicated(KEYS[self.kind]).any():
            raise ConfigError(f"{self.kind} table has duplicate keys")

    @classmethod
    def from_rows(cls, kind: str, rows: Iterable[dict]) -> 'ResultTable':
        return cls(kind, pd.DataFrame(list(rows), columns=COLUMNS[kind]))

    @classmethod
    def read_csv(cls, path: str, kind: str) -> 'ResultTable':
        try:
            frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise IoError(f"Could not read {path}: {e}") from e
        return cls(kind, frame)

    @property
    def empty(self) -> bool:
        return self.frame.empty

    def __len__(self) -> int:
        return len(self.frame)

    def to_csv(self, path: str):
        if self.empty:
            raise EmptyDataset(f"Refusing to write an empty {self.kind} table to {path}")
        try:
            self.frame.to_csv(path, index=False, float_format='%.6f')
        except OSError as e:
            raise IoError(f"Could not write {path}: {e}") from e


def relative_reduction(wer: float, reference: float) -> float:
    """Relative WER reduction in percent versus a reference WER"""
    if reference == 0:
        return 0.0 if wer == 0 else -math.inf
    return 100.0 * (reference - wer) / reference


def wer_text(table: ResultTable) -> str:
    """System comparison: (training, system) rows, test groups as columns, plus reduction vs baseline+SS on AVG"""
    frame = table.frame
    groups = [g for g in dict.fromkeys(frame['test_group']) if g != AVG_GROUP]
    if AVG_GROUP in set(frame['test_group']):
        groups.append(AVG_GROUP)
    pivot = frame.pivot(index=['training', 'system'], columns='test_group', values='wer')[groups]
    if AVG_GROUP in pivot.columns:
        reductions = []
        for (training, system), row in pivot.iterrows():
            ref_key = (training, REFERENCE_SYSTEM)
            if ref_key in pivot.index and system != REFERENCE_SYSTEM:
                reductions.append(relative_reduction(row[AVG_GROUP], pivot.loc[ref_key, AVG_GROUP]))
            else:
                reductions.append(float('nan'))
        pivot['rel_red_%'] = reductions
    return pivot.to_string(float_format=lambda v: f'{v:6.2f}', na_rep='     -')


def oracle_text(table: ResultTable, group: str = AVG_GROUP) -> str:
    """WER surface for one group: Th rows, K columns"""
    frame = table.frame[table.frame['group'] == group]
    if frame.empty:
        raise EmptyDataset(f"No oracle rows for group '{group}'")
    surface = frame.pivot(index='th', columns='k', values='wer')
    best = frame.loc[frame['wer'].idxmin()]
    lines = [f"Oracle WER surface ({group})", surface.to_string(float_format=lambda v: f'{v:6.2f}'),
             f"argmin: Th={best['th']:g} K={best['k']:g} WER={best['wer']:.2f}"]
    return '\n'.join(lines)


def mse_text(table: ResultTable) -> str:
    """Regressor comparison: topologies as rows, feature variants as columns (held-out MSE)"""
    frame = table.frame
    pivot = frame.pivot(index='topology', columns='feature', values='test_mse')
    best = frame[frame['best'].astype(bool)]
    text = pivot.to_string(float_format=lambda v: f'{v:8.4f}')
    if not best.empty:
        row = best.iloc[0]
        text += f"\nlowest MSE: {row['topology']}/{row['feature']} = {row['test_mse']:.4f}"
    return text


def write_gnuplot_surface(table: ResultTable, path: str, group: str = AVG_GROUP):
    """splot-ready data: 'th k wer' lines, one blank-line-separated block per Th"""
    frame = table.frame[table.frame['group'] == group]
    if frame.empty:
        raise EmptyDataset(f"No oracle rows for group '{group}'")
    finite = frame[frame['th'].map(math.isfinite)]
    lines = [f'# oracle WER surface, group {group}', '# th k wer']
    for th, block in finite.groupby('th', sort=True):
        for _, row in block.sort_values('k').iterrows():
            lines.append(f"{th:g} {row['k']:g} {row['wer']:.6f}")
        lines.append('')
    try:
        with open(path, 'w') as f:
            f.write('\n'.join(lines) + '\n')
    except OSError as e:
        raise IoError(f"Could not write {path}: {e}") from e


def write_surface_png(table: ResultTable, path: str, group: str = AVG_GROUP):
    """Heatmap of the oracle surface; the Th=inf fallback cell is left out"""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    frame = table.frame[(table.frame['group'] == group) & table.frame['th'].map(math.isfinite)]
    if frame.empty:
        raise EmptyDataset(f"No oracle rows for group '{group}'")
    surface = frame.pivot(index='th', columns='k', values='wer')

    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.imshow(surface.values, origin='lower', aspect='auto', cmap='viridis')
    ax.set_xticks(range(len(surface.columns)))
    ax.set_xticklabels([f'{k:g}' for k in surface.columns])
    ax.set_yticks(range(len(surface.index)))
    ax.set_yticklabels([f'{th:g}' for th in surface.index])
    ax.set_xlabel('K')
    ax.set_ylabel('Th')
    ax.set_title(f'Oracle WER (%) - {group}')
    fig.colorbar(mesh, ax=ax)
    try:
        fig.savefig(path, dpi=120, bbox_inches='tight')
    except OSError as e:
        raise IoError(f"Could not write {path}: {e}") from e
    finally:
        plt.close(fig)


_TEXT_RENDERERS = {KIND_WER: wer_text, KIND_ORACLE: oracle_text, KIND_MSE: mse_text}


def emit_report(tables: Dict[str, ResultTable], formats: Sequence[str], out_dir: str) -> List[str]:
    """
    Write every table as CSV plus the requested extra formats.

    Args:
        tables: Table name -> ResultTable; the name becomes the file stem
        formats: Any of 'text', 'gnuplot', 'png' (CSV is always written)
        out_dir: Destination directory, created if needed

    Returns:
        Paths of the files written
    """
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ConfigError(f"Unknown report format(s) {sorted(unknown)}, expected {FORMATS}")
    if not tables:
        raise EmptyDataset("Nothing to report")
    for name, table in tables.items():
        if table.empty:
            raise EmptyDataset(f"Table '{name}' is empty")
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise IoError(f"Could not create {out_dir}: {e}") from e

    written = []
    for name, table in tables.items():
        csv_path = os.path.join(out_dir, f'{name}.csv')
        table.to_csv(csv_path)
        written.append(csv_path)

        if FORMAT_TEXT in formats:
            txt_path = os.path.join(out_dir, f'{name}.txt')
            try:
                with open(txt_path, 'w') as f:
                    f.write(_TEXT_RENDERERS[table.kind](table) + '\n')
            except OSError as e:
                raise IoError(f"Could not write {txt_path}: {e}") from e
            written.append(txt_path)

        if table.kind == KIND_ORACLE:
            groups = sorted(set(table.frame['group']))
            if FORMAT_GNUPLOT in formats:
                for group in groups:
                    path = os.path.join(out_dir, f'{name}-{group}.dat')
                    write_gnuplot_surface(table, path, group)
                    written.append(path)
            if FORMAT_PNG in formats:
                for group in groups:
                    path = os.path.join(out_dir, f'{name}-{group}.png')
                    write_surface_png(table, path, group)
                    written.append(path)

    for path in written:
        logger.info(f"Wrote {path}")
    return written
