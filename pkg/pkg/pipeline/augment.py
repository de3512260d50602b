"""
Additive noise augmentation: noisy copies of utterances at target SNRs.
"""

import logging
import math
import os
import zlib
from typing import List, Sequence, Tuple

import numpy as np
import soundfile as sf

from pkg.pipeline.manifest import ManifestRow, Provenance
from pkg.utils.errors import BadAudio, BadConfig, RateMismatch, SilentAudio
from pkg.utils.io import atomic_write, require_path
from pkg.utils.logging import setup_secure_logging, log_file_operation

logger = setup_secure_logging(__name__, logging.WARNING)

DEFAULT_SNRS = (20.0, 15.0, 10.0, 5.0)
DEFAULT_COPIES = 3
PCM16_MAX = 32767
PCM16_MIN = -32768


def read_wav(path: str) -> Tuple[np.ndarray, int]:
    """
    Read a 16-bit PCM mono WAV file.

    Returns:
        (int16 samples, sample rate)

    Raises:
        BadAudio: for other sample formats or channel counts
    """
    require_path(path)
    log_file_operation("reading audio", path, logger)
    try:
        info = sf.info(path)
    except RuntimeError as e:
        raise BadAudio(f"{path}: {e}")
    if info.subtype != "PCM_16" or info.channels != 1:
        raise BadAudio(f"{path}: expected 16-bit PCM mono, got {info.subtype} with {info.channels} channels")
    samples, rate = sf.read(path, dtype="int16")
    return samples, rate


def write_wav(samples: np.ndarray, rate: int, path: str) -> None:
    log_file_operation("writing audio", path, logger)
    with atomic_write(path, "wb") as f:
        sf.write(f, samples, rate, subtype="PCM_16", format="WAV")


def power(samples: np.ndarray) -> float:
    return float(np.mean(np.square(samples.astype(np.float64))))


def mix_at_snr(signal: np.ndarray, noise: np.ndarray, snr_db: float) -> np.ndarray:
    """
    Add ``noise`` scaled so that 10*log10(P_signal / P_noise) equals ``snr_db``.

    An infinite SNR adds nothing.  Both arrays must have the same length.

    Raises:
        SilentAudio: when either input has zero power
    """
    signal = np.asarray(signal, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if signal.shape != noise.shape:
        raise BadAudio(f"signal and noise lengths differ: {signal.shape} vs {noise.shape}")
    if math.isinf(snr_db) and snr_db > 0:
        return signal.copy()
    p_signal, p_noise = power(signal), power(noise)
    if p_signal == 0.0:
        raise SilentAudio("signal has zero power")
    if p_noise == 0.0:
        raise SilentAudio("noise has zero power")
    gain = math.sqrt(p_signal / (p_noise * 10.0 ** (snr_db / 10.0)))
    return signal + gain * noise


def fit_noise(noise: np.ndarray, length: int, rng: np.random.Generator) -> np.ndarray:
    """Rotate the noise by a random offset, then loop or trim it to ``length`` samples."""
    if len(noise) == 0:
        raise SilentAudio("noise recording is empty")
    rolled = np.roll(noise, -int(rng.integers(len(noise))))
    return np.resize(rolled, length)


def to_pcm16(samples: np.ndarray) -> np.ndarray:
    """Round to int16, peak-normalizing first when the mix would clip."""
    peak = max(float(samples.max()) / PCM16_MAX, float(samples.min()) / PCM16_MIN, 0.0)
    if peak > 1.0:
        samples = samples / peak
    return np.clip(np.round(samples), PCM16_MIN, PCM16_MAX).astype(np.int16)


def augment_noise(signal: np.ndarray, noises: Sequence[np.ndarray], snr_db: Sequence[float] = DEFAULT_SNRS,
                  copies: int = DEFAULT_COPIES, seed: int = 0, utt_id: str = "") -> List[np.ndarray]:
    """
    Make ``copies`` noisy versions of one utterance.

    Copy i uses SNR ``snr_db[i % len(snr_db)]`` and a noise drawn from the pool
    with a generator seeded by ``seed`` and the utterance id.

    Raises:
        SilentAudio: when the signal or a chosen noise has zero power
    """
    if not noises:
        raise BadConfig("noise pool is empty")
    if not snr_db:
        raise BadConfig("no SNR values given")
    if copies < 0:
        raise BadConfig(f"copies must be non-negative, got {copies}")
    rng = np.random.default_rng([seed, zlib.crc32(utt_id.encode("utf-8"))])
    outputs = []
    for i in range(copies):
        noise = noises[int(rng.integers(len(noises)))]
        fitted = fit_noise(np.asarray(noise), len(signal), rng)
        mixed = mix_at_snr(signal, fitted, snr_db[i % len(snr_db)])
        outputs.append(to_pcm16(mixed))
    return outputs


def augment_files(row: ManifestRow, noise_paths: Sequence[str], out_dir: str,
                  snr_db: Sequence[float] = DEFAULT_SNRS, copies: int = DEFAULT_COPIES,
                  seed: int = 0) -> List[ManifestRow]:
    """
    Augment the WAV file of one manifest row.

    Returns:
        The original row followed by one ``augmented`` row per noisy copy

    Raises:
        RateMismatch: when a noise file has a different sample rate
    """
    signal, rate = read_wav(row.path)
    noises = []
    for path in noise_paths:
        noise, noise_rate = read_wav(path)
        if noise_rate != rate:
            raise RateMismatch(f"{path}: sample rate {noise_rate} differs from {rate}")
        noises.append(noise)

    rows = [row]
    for i, samples in enumerate(augment_noise(signal, noises, snr_db, copies, seed, row.segment_id), 1):
        segment_id = f"{row.segment_id}-noise{i}"
        path = os.path.join(out_dir, f"{segment_id}.wav")
        write_wav(samples, rate, path)
        rows.append(ManifestRow(segment_id=segment_id, path=path, start=row.start, end=row.end,
                                transcript=row.transcript, provenance=Provenance.AUGMENTED))
    return rows
