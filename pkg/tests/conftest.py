import pytest

from emofusion.dsp import SpectrogramSettings
from emofusion.model import ModelConfig
from emofusion.synth import SyntheticSpec, generate

# A tiny network that accepts 3 frames of 12x10 and an 8x12 spectrogram.
MINI = ModelConfig(
    n_frames=3, visual_height=12, visual_width=10, audio_height=8, audio_width=12,
    visual_feature_len=8, audio_feature_len=2, hidden_len=5,
    visual_channels=(2, 3, 2), visual_kernels=(3, 3, 3),
    audio_channels=(2, 2), audio_kernels=(3, 1),
)
MINI_DSP = SpectrogramSettings(n_bins=8, n_frames=12)
MINI_LOAD = dict(settings=MINI_DSP, n_frames=3, frame_size=(12, 10))

# the same shapes as command-line overrides
MINI_SET = [
    "model.n_frames=3", "model.visual_height=12", "model.visual_width=10",
    "model.audio_height=8", "model.audio_width=12", "model.visual_feature_len=8",
    "model.audio_feature_len=2", "model.hidden_len=5", "model.visual_channels=2,3,2",
    "model.visual_kernels=3,3,3", "model.audio_channels=2,2", "model.audio_kernels=3,1",
    "dsp.n_bins=8", "dsp.n_frames=12",
]


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory):
    """3 actors with one clip per class: 18 records."""
    out = tmp_path_factory.mktemp("tiny")
    records = generate(SyntheticSpec(n_actors=3, clips_per_class=1, frames_range=(6, 9),
                                     duration_range=(0.5, 0.8), seed=11), out)
    return out, records


# One line per acceptance criterion, filled in by test_acceptance.py and
# repeated at the end of the run.
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
