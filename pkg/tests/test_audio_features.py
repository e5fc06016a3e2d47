import numpy as np
import pytest

from avseld.audio_features import (
    CLIP_SAMPLES,
    EPS,
    N_FFT,
    SAMPLE_RATE,
    FoaClip,
    extract_audio_features,
    hz_to_mel,
    intensity_vector,
    log_mel,
    mel_filterbank,
    mel_to_hz,
    stft,
)
from avseld.errors import DurationError, UnsupportedRateError
from avseld.geometry import SphericalDoa, sph_to_cart_array
from avseld.simulator import Segment, SourceTrajectory, simulate_clip
from avseld.transforms import ALL_TRANSFORMS, SpatialTransform, transform_foa


@pytest.fixture(scope="module")
def plane_wave():
    traj = SourceTrajectory((Segment(0, 100, SphericalDoa(30, 10), 0),))
    return simulate_clip([traj], seed=3).audio


@pytest.fixture(scope="module")
def short_clip():
    rng = np.random.default_rng(11)
    return FoaClip(rng.uniform(-0.5, 0.5, (4, 24000)))


class TestStft:
    def test_silence(self):
        spec = stft(FoaClip(np.zeros((4, CLIP_SAMPLES))))
        assert spec.bins.shape == (4, 500, N_FFT // 2 + 1)
        assert not np.any(spec.bins)

    def test_frame_count(self):
        assert stft(FoaClip(np.zeros((4, 240000)))).num_frames == 500
        assert stft(FoaClip(np.zeros((4, 24000)))).num_frames == 50

    def test_tone_peak_bin(self):
        t = np.arange(24000) / SAMPLE_RATE
        samples = np.zeros((4, 24000))
        samples[0] = 0.5 * np.sin(2 * np.pi * 1000 * t)
        spec = stft(FoaClip(samples))
        mag = np.abs(spec.bins[0]).mean(axis=0)
        peak_hz = np.argmax(mag) * SAMPLE_RATE / N_FFT
        assert abs(peak_hz - 1000) <= SAMPLE_RATE / N_FFT
        assert not np.any(spec.bins[1:])

    def test_unsupported_rate(self):
        with pytest.raises(UnsupportedRateError):
            stft(FoaClip(np.zeros((4, 48000)), sample_rate=48000))


class TestMelFilterbank:
    def test_shape_and_peak(self):
        fb = mel_filterbank()
        assert fb.shape == (64, N_FFT // 2 + 1)
        assert fb.max() <= 1.0 and fb.min() >= 0.0

    def test_audit(self):
        fb = mel_filterbank()
        assert np.all(fb.sum(axis=1) > 0)
        freqs = np.arange(N_FFT // 2 + 1) * SAMPLE_RATE / N_FFT
        inside = (freqs > 0) & (freqs < 12000)
        assert np.all(fb[:, inside].sum(axis=0) > 0)

    def test_read_only(self):
        with pytest.raises(ValueError):
            mel_filterbank()[0, 0] = 2.0

    def test_mel_scale_round_trip(self):
        f = np.linspace(0, 12000, 101)
        np.testing.assert_allclose(mel_to_hz(hz_to_mel(f)), f, atol=1e-8)
        assert hz_to_mel(1000) == pytest.approx(1000.0, abs=0.1)


class TestLogMel:
    def test_silence_floor(self):
        lm = log_mel(stft(FoaClip(np.zeros((4, 24000)))))
        assert lm.shape == (4, 50, 64)
        np.testing.assert_array_equal(lm, np.log(EPS))

    def test_amplitude_doubling(self, short_clip):
        a = log_mel(stft(short_clip))
        b = log_mel(stft(FoaClip(2 * short_clip.samples)))
        np.testing.assert_allclose(b - a, np.log(4.0), atol=1e-6)


class TestIntensityVector:
    def test_silence(self):
        iv = intensity_vector(stft(FoaClip(np.zeros((4, 24000)))))
        assert iv.shape == (3, 50, 64)
        assert not np.any(iv)

    def test_plane_wave_direction(self, plane_wave):
        iv = intensity_vector(stft(plane_wave))
        mean = iv.reshape(3, -1).mean(axis=1)
        expected = sph_to_cart_array(30, 10)
        cos = mean @ expected / np.linalg.norm(mean)
        assert np.degrees(np.arccos(min(cos, 1.0))) < 2.0

    def test_bounded(self, short_clip):
        iv = intensity_vector(stft(short_clip))
        assert np.all(np.abs(iv) <= 1.0)

    def test_elevation_flip(self, short_clip):
        flip = SpatialTransform(0, False, True)
        a = intensity_vector(stft(short_clip))
        b = intensity_vector(stft(transform_foa(flip, short_clip)))
        np.testing.assert_array_equal(b[:2], a[:2])
        np.testing.assert_array_equal(b[2], -a[2])

    @pytest.mark.parametrize("t", ALL_TRANSFORMS, ids=lambda t: t.name)
    def test_equivariance(self, t, short_clip):
        a = intensity_vector(stft(short_clip))
        b = intensity_vector(stft(transform_foa(t, short_clip)))
        rotated = np.einsum("ij,jtm->itm", t.matrix(), a)
        np.testing.assert_allclose(b, rotated, rtol=1e-6, atol=1e-12)

    @pytest.mark.parametrize("t", ALL_TRANSFORMS, ids=lambda t: t.name)
    def test_w_log_mel_invariant(self, t, short_clip):
        a = log_mel(stft(short_clip))[0]
        b = log_mel(stft(transform_foa(t, short_clip)))[0]
        np.testing.assert_array_equal(a, b)


class TestExtract:
    def test_shape_and_order(self, plane_wave):
        feat = extract_audio_features(plane_wave).tensor
        assert feat.shape == (500, 7, 64)
        spec = stft(plane_wave)
        np.testing.assert_array_equal(feat[:, :4], log_mel(spec).transpose(1, 0, 2))
        np.testing.assert_array_equal(feat[:, 4:], intensity_vector(spec).transpose(1, 0, 2))
        assert np.all(np.isfinite(feat))
        assert np.all(feat[:, :4] >= np.log(EPS))

    def test_deterministic(self, plane_wave):
        a = extract_audio_features(plane_wave).tensor
        b = extract_audio_features(plane_wave).tensor
        assert a.tobytes() == b.tobytes()

    def test_wrong_duration(self):
        with pytest.raises(DurationError, match="240000"):
            extract_audio_features(FoaClip(np.zeros((4, 120000))))

    def test_extreme_inputs_finite(self):
        rng = np.random.default_rng(5)
        samples = np.sign(rng.standard_normal((4, CLIP_SAMPLES)))
        samples[:, :1000] = 0.0
        feat = extract_audio_features(FoaClip(samples)).tensor
        assert np.all(np.isfinite(feat))
