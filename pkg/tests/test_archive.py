"""Tests for feature archives, track files and WAV input/output"""
import numpy as np
import pytest

from uwdecode.archive import (
    FeatureArchiveParser,
    FeatureRecord,
    feature_header,
    feature_matrix,
    read_alignment_csv,
    write_alignment_csv,
    write_feature_binary,
    write_feature_csv,
    write_uncertainty_csv,
)
from uwdecode.audio_io import read_wav, write_wav
from uwdecode.errors import EmptyInput, IoError, ModelFormatError
from uwdecode.frontend import AudioSignal, FrontendConfig, extract_features
from uwdecode.uncertainty import UncertaintyTrack, WeightingParams


@pytest.fixture
def records(rng):
    return [FeatureRecord('utt1', rng.normal(size=(4, 7))),
            FeatureRecord('utt2', rng.normal(size=(2, 7)), enhanced=True)]


class TestFeatureArchives:

    def test_feature_matrix_layout(self, rng):
        cfg = FrontendConfig(n_mel=5)
        features = extract_features(rng.uniform(0.1, 1.0, size=(6, 5)), cfg)
        matrix = feature_matrix(features)
        assert matrix.shape == (6, 16)
        np.testing.assert_array_equal(matrix[:, -1], features.log_norm_energy)
        assert len(feature_header(5)) == 2 + 16 + 1

    def test_csv_archive(self, records, tmp_path):
        path = tmp_path / 'features.csv'
        write_feature_csv(str(path), records)
        parsed, errors = FeatureArchiveParser().parse_file(path.read_bytes(), 'features.csv')
        assert errors == []
        assert [r.utterance_id for r in parsed] == ['utt1', 'utt2']
        assert parsed[1].enhanced and not parsed[0].enhanced
        np.testing.assert_array_equal(parsed[0].matrix, records[0].matrix)

    def test_binary_archive(self, records, tmp_path):
        path = tmp_path / 'features.uwfa'
        write_feature_binary(str(path), records)
        parsed, errors = FeatureArchiveParser().parse_file(path.read_bytes())
        assert errors == []
        assert parsed[1].n_frames == 2
        np.testing.assert_allclose(parsed[0].matrix, records[0].matrix, rtol=1e-6)

    def test_truncated_binary(self, records, tmp_path):
        path = tmp_path / 'features.uwfa'
        write_feature_binary(str(path), records)
        with pytest.raises(ModelFormatError):
            FeatureArchiveParser().parse_file(path.read_bytes()[:-3])

    def test_csv_row_errors_are_collected(self):
        content = (b'utterance_id,frame,static_0,log_norm_energy,enhanced\n'
                   b'u,0,1.0,0.5,0\n'
                   b'u,1,oops,0.5,0\n'
                   b'v,0,1.0,0.5\n'
                   b'w,0,1.0,0.5,1\n'
                   b'w,2,1.0,0.5,1\n')
        parsed, errors = FeatureArchiveParser().parse_file(content, 'bad.csv')
        assert [r.utterance_id for r in parsed] == ['u']
        assert len(errors) == 3
        assert any('Row 3' in e for e in errors)
        assert any(e.startswith('w:') for e in errors)

    def test_missing_header(self):
        parsed, errors = FeatureArchiveParser().parse_file(b'a,b,c\n1,2,3\n')
        assert parsed == [] and len(errors) == 1

    @pytest.mark.parametrize('writer', [write_feature_csv, write_feature_binary])
    def test_refuses_empty_archive(self, tmp_path, writer):
        path = tmp_path / 'empty.uwfa'
        with pytest.raises(EmptyInput):
            writer(str(path), [])
        assert not path.exists()


class TestTrackFiles:

    def test_uncertainty_csv(self, tmp_path):
        track = UncertaintyTrack.from_uv(np.array([0.0, 2.0, 0.0]), 0, WeightingParams(1.0, 1.0))
        path = tmp_path / 'tracks.csv'
        write_uncertainty_csv(str(path), [('utt1', track)])
        lines = path.read_text().splitlines()
        assert lines[0] == 'utterance_id,frame,uv,uv_window,uw'
        assert len(lines) == 4
        assert lines[2].split(',')[-1] == '0.5'

    def test_alignment_csv(self, tmp_path):
        path = tmp_path / 'align.csv'
        write_alignment_csv(str(path), np.array([3, 3, 4, 0]))
        np.testing.assert_array_equal(read_alignment_csv(str(path)), [3, 3, 4, 0])

    def test_alignment_gap(self, tmp_path):
        path = tmp_path / 'align.csv'
        path.write_text('frame,state\n0,1\n2,1\n')
        with pytest.raises(ModelFormatError):
            read_alignment_csv(str(path))


class TestWav:

    def test_write_and_read(self, tmp_path, rng):
        signal = AudioSignal(rng.uniform(-0.5, 0.5, 1600), 16000)
        path = tmp_path / 'a.wav'
        write_wav(str(path), signal)
        back = read_wav(str(path))
        assert back.sample_rate == 16000
        np.testing.assert_allclose(back.samples, signal.samples, atol=1.0 / 32768)

    def test_clipping(self, tmp_path):
        path = tmp_path / 'loud.wav'
        write_wav(str(path), AudioSignal(np.array([2.0, -2.0, 0.0]), 16000))
        assert np.max(np.abs(read_wav(str(path)).samples)) <= 1.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_wav(str(tmp_path / 'nope.wav'))
