"""
Feature, uncertainty-track and alignment archives
"""
import csv
import io
import logging
import struct
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from uwdecode.errors import EmptyInput, IoError, ModelFormatError
from uwdecode.frontend import Features
from uwdecode.uncertainty import UncertaintyTrack

logger = logging.getLogger(__name__)

ARCHIVE_MAGIC = b'UWFA'
ARCHIVE_VERSION = 1


@dataclass
class FeatureRecord:
    """One utterance of a feature archive: (T, dim) matrix, last column log_norm_energy"""
    utterance_id: str
    matrix: np.ndarray
    enhanced: bool = False

    @property
    def n_frames(self) -> int:
        return self.matrix.shape[0]


def feature_matrix(features: Features) -> np.ndarray:
    """(T, 3*n_mel + 1): statics, deltas, delta-deltas, log_norm_energy"""
    return np.hstack([features.stacked(), features.log_norm_energy[:, None]])


def feature_header(n_mel: int) -> List[str]:
    cols = ['utterance_id', 'frame']
    for prefix in ('static', 'delta', 'delta2'):
        cols += [f'{prefix}_{m}' for m in range(n_mel)]
    return cols + ['log_norm_energy', 'enhanced']


def _open_for_write(path: str, mode: str):
    try:
        return open(path, mode, newline='' if 'b' not in mode else None)
    except OSError as e:
        raise IoError(f"Could not open {path} for writing: {e}") from e


def _require_records(records: Iterable[FeatureRecord], path: str) -> List[FeatureRecord]:
    records = list(records)
    if not records:
        raise EmptyInput(f"Refusing to write an empty feature archive to {path}")
    return records


def write_feature_csv(path: str, records: Iterable[FeatureRecord]):
    """One row per frame: utterance-id, frame-index, features, log_norm_energy, enhanced flag"""
    records = _require_records(records, path)
    n_mel = (records[0].matrix.shape[1] - 1) // 3
    with _open_for_write(path, 'w') as f:
        writer = csv.writer(f)
        writer.writerow(feature_header(n_mel))
        for rec in records:
            for t, row in enumerate(rec.matrix):
                writer.writerow([rec.utterance_id, t] + [repr(float(v)) for v in row] + [int(rec.enhanced)])


def write_feature_binary(path: str, records: Iterable[FeatureRecord]):
    """
    Compact binary archive.

    Header: magic 'UWFA', uint16 version, uint32 record count. Each record:
    uint16 id length, utf-8 id, uint8 enhanced flag, uint32 frames,
    uint32 dim, then frames*dim little-endian float32 values.
    """
    records = _require_records(records, path)
    parts = [struct.pack('<4sHI', ARCHIVE_MAGIC, ARCHIVE_VERSION, len(records))]
    for rec in records:
        uid = rec.utterance_id.encode('utf-8')
        n_frames, dim = rec.matrix.shape
        parts.append(struct.pack('<H', len(uid)))
        parts.append(uid)
        parts.append(struct.pack('<BII', int(rec.enhanced), n_frames, dim))
        parts.append(np.ascontiguousarray(rec.matrix, dtype='<f4').tobytes())
    with _open_for_write(path, 'wb') as f:
        f.write(b''.join(parts))


class FeatureArchiveParser:
    """Parser for feature archives in either the CSV or the binary layout"""

    def parse_file(self, file_content: bytes, filename: str = '') -> Tuple[List[FeatureRecord], List[str]]:
        """
        Parse an archive and return its records.

        Args:
            file_content: Archive content as bytes
            filename: Optional filename for error messages

        Returns:
            (records, errors) - parsed records in file order and messages for
            rows that had to be skipped
        """
        if file_content[:4] == ARCHIVE_MAGIC:
            return self._parse_binary(file_content, filename), []
        return self._parse_csv(file_content, filename)

    def _parse_binary(self, blob: bytes, filename: str) -> List[FeatureRecord]:
        try:
            _, version, count = struct.unpack_from('<4sHI', blob, 0)
            if version != ARCHIVE_VERSION:
                raise ModelFormatError(f"{filename}: unsupported archive version {version}")
            offset = struct.calcsize('<4sHI')
            records = []
            for _ in range(count):
                (id_len,) = struct.unpack_from('<H', blob, offset)
                offset += 2
                uid = blob[offset:offset + id_len].decode('utf-8')
                offset += id_len
                enhanced, n_frames, dim = struct.unpack_from('<BII', blob, offset)
                offset += struct.calcsize('<BII')
                values = np.frombuffer(blob, dtype='<f4', count=n_frames * dim, offset=offset)
                offset += 4 * n_frames * dim
                records.append(FeatureRecord(uid, values.astype(np.float64).reshape(n_frames, dim), bool(enhanced)))
        except (struct.error, ValueError, UnicodeDecodeError) as e:
            raise ModelFormatError(f"{filename}: truncated or corrupt archive ({e})") from e
        if offset != len(blob):
            raise ModelFormatError(f"{filename}: trailing bytes after {count} records")
        return records

    def _parse_csv(self, content: bytes, filename: str) -> Tuple[List[FeatureRecord], List[str]]:
        errors: List[str] = []
        try:
            text = content.decode('utf-8')
        except UnicodeDecodeError:
            return [], [f"Could not decode file {filename}. Please ensure it's UTF-8 encoded."]

        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if not header or header[:2] != ['utterance_id', 'frame']:
            return [], [f"{filename}: missing utterance_id/frame header"]
        n_values = len(header) - 3

        rows = {}
        order = []
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                errors.append(f"Row {row_num}: expected {len(header)} columns, got {len(row)}")
                continue
            try:
                values = [float(v) for v in row[2:2 + n_values]]
                frame = int(row[1])
                enhanced = bool(int(row[-1]))
            except ValueError as e:
                errors.append(f"Row {row_num}: {e}")
                continue
            uid = row[0]
            if uid not in rows:
                rows[uid] = []
                order.append(uid)
            rows[uid].append((frame, values, enhanced))

        records = []
        for uid in order:
            frames = sorted(rows[uid], key=lambda item: item[0])
            indices = [item[0] for item in frames]
            if indices != list(range(len(indices))):
                errors.append(f"{uid}: frame indices are not contiguous from 0, utterance skipped")
                continue
            matrix = np.array([item[1] for item in frames], dtype=np.float64)
            records.append(FeatureRecord(uid, matrix, frames[0][2]))
        return records, errors


def write_uncertainty_csv(path: str, tracks: Iterable[Tuple[str, UncertaintyTrack]]):
    """utterance-id, frame-index, uv, uv_window, uw"""
    with _open_for_write(path, 'w') as f:
        writer = csv.writer(f)
        writer.writerow(['utterance_id', 'frame', 'uv', 'uv_window', 'uw'])
        for uid, track in tracks:
            uw = track.uw if track.uw is not None else np.ones(track.n_frames)
            for t in range(track.n_frames):
                writer.writerow([uid, t, repr(float(track.uv[t])), repr(float(track.uv_window[t])),
                                 repr(float(uw[t]))])


def write_alignment_csv(path: str, alignment: np.ndarray):
    with _open_for_write(path, 'w') as f:
        writer = csv.writer(f)
        writer.writerow(['frame', 'state'])
        for t, state in enumerate(np.asarray(alignment, dtype=np.int64)):
            writer.writerow([t, int(state)])


def read_alignment_csv(path: str) -> np.ndarray:
    try:
        with open(path, newline='') as f:
            reader = csv.DictReader(f)
            pairs = sorted((int(row['frame']), int(row['state'])) for row in reader)
    except (OSError, KeyError, ValueError) as e:
        raise IoError(f"Could not read alignment {path}: {e}") from e
    if [t for t, _ in pairs] != list(range(len(pairs))):
        raise ModelFormatError(f"{path}: frame indices are not contiguous")
    return np.array([s for _, s in pairs], dtype=np.int64)
