import struct
import wave

import numpy as np
import pytest

from beliefhmm import features
from beliefhmm.features import AudioFormatError, FeatureConfig, FeatureError


def write_pcm(path, data: bytes, channels=1, width=2, rate=16000):
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(width)
        w.setframerate(rate)
        w.writeframes(data)


def test_silence_file(tmp_path):
    p = tmp_path / "s.wav"
    write_pcm(p, b"\x00\x00" * 16000)
    x, rate = features.wav_read(p)
    assert rate == 16000
    assert x.shape == (16000,)
    assert not x.any()


def test_full_scale_square_wave(tmp_path):
    p = tmp_path / "sq.wav"
    write_pcm(p, struct.pack("<4h", 32767, 32767, -32768, -32768), rate=8000)
    x, rate = features.wav_read(p)
    assert rate == 8000
    np.testing.assert_array_equal(x, [32767 / 32768, 32767 / 32768, -1.0, -1.0])


def test_stereo_rejected(tmp_path):
    p = tmp_path / "st.wav"
    write_pcm(p, b"\x00\x00" * 20, channels=2)
    with pytest.raises(AudioFormatError, match="mono"):
        features.wav_read(p)


def test_eight_bit_rejected(tmp_path):
    p = tmp_path / "b8.wav"
    write_pcm(p, b"\x80" * 20, width=1)
    with pytest.raises(AudioFormatError, match="16-bit"):
        features.wav_read(p)


def test_truncated_file_rejected(tmp_path):
    p = tmp_path / "t.wav"
    write_pcm(p, b"\x01\x00" * 1000)
    raw = p.read_bytes()
    p.write_bytes(raw[: len(raw) - 501])
    with pytest.raises(AudioFormatError):
        features.wav_read(p)


def test_not_a_wav_rejected(tmp_path):
    p = tmp_path / "x.wav"
    p.write_bytes(b"hello world, definitely not RIFF")
    with pytest.raises(AudioFormatError):
        features.wav_read(p)


def test_write_read_round_trip(tmp_path):
    p = tmp_path / "r.wav"
    x = np.arange(-5, 5) / 32768.0
    features.wav_write(p, x, 22050)
    y, rate = features.wav_read(p)
    assert rate == 22050
    np.testing.assert_array_equal(x, y)


def test_frame_count_one_second():
    assert features.mfcc_extract(np.zeros(16000)).shape == (98, 13)


@pytest.mark.parametrize("n", [400, 401, 559, 560, 12345])
def test_frame_count_formula(n):
    out = features.mfcc_extract(np.random.default_rng(n).normal(size=n))
    assert out.shape[0] == 1 + (n - 400) // 160


def test_short_signal_rejected():
    with pytest.raises(FeatureError, match="shorter than one frame"):
        features.mfcc_extract(np.zeros(399))


def test_stationary_sinusoid_gives_equal_frames():
    # 1 kHz has a whole number of periods per 10 ms hop, so every frame sees the same samples
    t = np.arange(16000) / 16000
    out = features.mfcc_extract(0.5 * np.sin(2 * np.pi * 1000 * t))
    np.testing.assert_allclose(out, np.broadcast_to(out[0], out.shape), atol=1e-6)


def test_silence_is_log_floor():
    out = features.mfcc_extract(np.zeros(4000))
    np.testing.assert_allclose(out, np.broadcast_to(out[0], out.shape), atol=0)
    # the log spectrum is flat at log(floor): only c0 is non-zero
    cfg = FeatureConfig()
    assert out[0, 0] == pytest.approx(np.log(features.LOG_FLOOR) * np.sqrt(cfg.n_filters))
    np.testing.assert_allclose(out[0, 1:], 0.0, atol=1e-9)


def test_shift_by_one_hop_shifts_frames():
    x = np.random.default_rng(3).normal(size=8000)
    a = features.mfcc_extract(x)
    b = features.mfcc_extract(x[160:])
    np.testing.assert_allclose(a[1:], b, atol=1e-12)


def test_deterministic():
    x = np.random.default_rng(4).normal(size=3000)
    np.testing.assert_array_equal(features.mfcc_extract(x), features.mfcc_extract(x))


def test_config_validation():
    with pytest.raises(FeatureError):
        FeatureConfig(frame_ms=10, hop_ms=25)
    with pytest.raises(FeatureError):
        FeatureConfig(n_coeffs=30, n_filters=26)
    with pytest.raises(FeatureError):
        FeatureConfig(hop_ms=0)


def test_custom_config_shape():
    cfg = FeatureConfig(sample_rate=8000, frame_ms=32, hop_ms=16, n_filters=20, n_coeffs=12)
    assert cfg.frame_length == 256 and cfg.hop_length == 128
    out = features.mfcc_extract(np.random.default_rng(5).normal(size=8000), cfg)
    assert out.shape == (1 + (8000 - 256) // 128, 12)


def test_filterbank_shape_and_peaks():
    fb = features.mel_filterbank(26, 512, 16000)
    assert fb.shape == (26, 257)
    assert fb.min() >= 0 and fb.max() <= 1
    assert np.all(np.diff(np.argmax(fb, axis=1)) >= 0)


def test_mel_round_trip():
    f = np.array([0.0, 100.0, 1000.0, 8000.0])
    np.testing.assert_allclose(features.mel_to_hz(features.hz_to_mel(f)), f, atol=1e-9)
