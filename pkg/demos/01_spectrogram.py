"""
From waveform to network input
==============================

A one-second clip with two tones goes through the audio pipeline: STFT with a
384-sample Hann window and hop 256 at 16 kHz, log-magnitude, cropping to 192
frequency rows, resizing to 120 columns and min-max scaling.
"""

import tempfile
from pathlib import Path

import numpy as np

from emofusion import dsp
from emofusion.dsp import AudioClip

out_dir = Path(tempfile.mkdtemp(prefix="emofusion-spec-"))

# %%
# A 440 Hz tone for the first half second, 2 kHz for the second.
fs = 16000
t = np.arange(fs) / fs
x = np.where(t < 0.5, np.sin(2 * np.pi * 440 * t), 0.5 * np.sin(2 * np.pi * 2000 * t))
clip = AudioClip(x, fs)

# %%
# The raw STFT grid has window_length / 2 + 1 rows and one column per hop.
grid = dsp.stft(clip, 384, 256, "hann")
print("STFT grid:", grid.shape)

# Bin k sits at k * fs / 384 Hz, so the tones land near rows 11 and 48.
spec = dsp.spectrogram_pipeline(clip)
print("network input:", spec.shape)
left, right = spec[0, :, :50].mean(axis=1), spec[0, :, 70:].mean(axis=1)
print("brightest row, first half:", int(np.argmax(left)), " second half:", int(np.argmax(right)))

# %%
# Save it as an image, low frequencies at the bottom.
dsp.export_pgm(spec, out_dir / "two_tones.pgm")
dsp.write_wav(out_dir / "two_tones.wav", x, fs)
print("wrote", out_dir / "two_tones.pgm")
