"""Note transcription of accompanied and a cappella singing."""

import json

from ._cantus import (
    SAMPLE_RATE,
    AudioError,
    ConfigError,
    ContourError,
    NoteEvent,
    NoteFileError,
    PipelineError,
    estimate_tuning,
    evaluate,
    extract_melody,
    load_audio,
    load_notes,
    midi_bytes,
    note_metrics,
    onset_metrics,
    post_process,
    save_midi,
    save_notes,
    select_channel,
)
from . import _cantus

__version__ = "0.1.0"


def _with_diagnostics(result):
    result["diagnostics"] = [json.loads(line) for line in result["diagnostics"].splitlines()]
    return result


def transcribe(samples, sample_rate=SAMPLE_RATE, **options):
    """Transcribe a mono (n,) or multi-channel (channels, n) signal.

    Options take the command-line names with underscores, e.g. mono=True,
    no_contour_filter=True, tau_v=0.5.
    """
    return _with_diagnostics(_cantus.transcribe(samples, sample_rate, **options))


def transcribe_file(path, **options):
    """Transcribe a WAV file."""
    return _with_diagnostics(_cantus.transcribe_file(str(path), **options))


def transcribe_contour(times, f0, **options):
    """Transcribe a pitch contour given as frame times and f0 in Hz (0 = unvoiced)."""
    return _with_diagnostics(_cantus.transcribe_contour(times, f0, **options))


__all__ = [
    "SAMPLE_RATE",
    "AudioError",
    "ConfigError",
    "ContourError",
    "NoteEvent",
    "NoteFileError",
    "PipelineError",
    "estimate_tuning",
    "evaluate",
    "extract_melody",
    "load_audio",
    "load_notes",
    "midi_bytes",
    "note_metrics",
    "onset_metrics",
    "post_process",
    "save_midi",
    "save_notes",
    "select_channel",
    "transcribe",
    "transcribe_contour",
    "transcribe_file",
]
