"""Log-mel and intensity-vector features for FOA clips.

Framing is 40 ms / 20 ms at 24 kHz (960 / 480 samples), Hann window,
1024-point FFT. The signal is reflect-padded by half a frame on both
sides and frame ``k`` is centered on sample ``k * hop``, which gives
exactly ``n_samples // hop`` frames (500 for a 10 s clip).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from .errors import ChannelCountError, DurationError, UnsupportedRateError

SAMPLE_RATE = 24000
FRAME_LEN = 960
HOP_LEN = 480
N_FFT = 1024
N_MELS = 64
FMIN = 0.0
FMAX = 12000.0
EPS = 1e-10
CLIP_SECONDS = 10
CLIP_SAMPLES = SAMPLE_RATE * CLIP_SECONDS
CLIP_FRAMES = CLIP_SAMPLES // HOP_LEN

# ACN channel order
W, Y, Z, X = 0, 1, 2, 3


@dataclass(frozen=True)
class FoaClip:
    """Four ACN/SN3D channels, shape (4, n_samples)."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 2 or samples.shape[0] != 4:
            raise ChannelCountError(f"FOA clip needs 4 channels, got shape {samples.shape}")
        object.__setattr__(self, "samples", samples)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    bins: np.ndarray  # complex, (channels, frames, N_FFT // 2 + 1)
    sample_rate: int = SAMPLE_RATE
    frame_len: int = FRAME_LEN
    hop_len: int = HOP_LEN
    n_fft: int = N_FFT

    @property
    def num_frames(self) -> int:
        return self.bins.shape[1]


@dataclass(frozen=True)
class AudioFeature:
    """(frames, 7, mels): 4 log-mel channels (W, Y, Z, X) then IV (x, y, z)."""

    tensor: np.ndarray


def stft(clip: FoaClip) -> Spectrogram:
    if clip.sample_rate != SAMPLE_RATE:
        raise UnsupportedRateError(
            f"expected {SAMPLE_RATE} Hz, got {clip.sample_rate} Hz (no resampling is done)"
        )
    x = np.asarray(clip.samples, dtype=np.float64)
    n_frames = x.shape[1] // HOP_LEN
    if n_frames == 0:
        return Spectrogram(np.zeros((x.shape[0], 0, N_FFT // 2 + 1), dtype=np.complex128))
    half = FRAME_LEN // 2
    padded = np.pad(x, ((0, 0), (half, half)), mode="reflect")
    frames = sliding_window_view(padded, FRAME_LEN, axis=1)[:, ::HOP_LEN][:, :n_frames]
    window = get_window("hann", FRAME_LEN)
    bins = np.fft.rfft(frames * window, n=N_FFT, axis=-1)
    return Spectrogram(bins)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


@lru_cache(maxsize=None)
def _mel_filterbank(sample_rate: int, n_fft: int, n_mels: int, fmin: float, fmax: float) -> np.ndarray:
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lower) / (center - lower)
    falling = (upper - freqs[None, :]) / (upper - center)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def mel_filterbank(sample_rate: int = SAMPLE_RATE, n_fft: int = N_FFT, n_mels: int = N_MELS,
                   fmin: float = FMIN, fmax: float = FMAX) -> np.ndarray:
    """HTK-mel triangular filters, shape (n_mels, n_fft // 2 + 1), peak 1."""
    return _mel_filterbank(sample_rate, n_fft, n_mels, float(fmin), float(fmax))


def log_mel(spec: Spectrogram) -> np.ndarray:
    """Log mel power per channel, shape (channels, frames, 64)."""
    fb = mel_filterbank(spec.sample_rate, spec.n_fft)
    power = spec.bins.real ** 2 + spec.bins.imag ** 2
    return np.log(power @ fb.T + EPS)


def intensity_vector(spec: Spectrogram) -> np.ndarray:
    """Mel-projected active intensity, unit-normalized, shape (3, frames, 64)."""
    fb = mel_filterbank(spec.sample_rate, spec.n_fft)
    w = spec.bins[W]
    dipoles = spec.bins[[X, Y, Z]]
    iv = np.real(np.conj(w)[None] * dipoles) @ fb.T
    norm = np.sqrt(np.sum(iv ** 2, axis=0, keepdims=True))
    return iv / (norm + EPS)


def extract_audio_features(clip: FoaClip, expected_samples: int = CLIP_SAMPLES) -> AudioFeature:
    if clip.num_samples != expected_samples:
        raise DurationError(
            f"expected {expected_samples} samples per channel, got {clip.num_samples}"
        )
    spec = stft(clip)
    feats = np.concatenate([log_mel(spec), intensity_vector(spec)], axis=0)
    return AudioFeature(np.ascontiguousarray(feats.transpose(1, 0, 2)))
