#pragma once

#include <cstdint>
#include <vector>

#include "cantus/audio_io.hpp"
#include "cantus/labelling.hpp"
#include "cantus/melody.hpp"

namespace cantus::testing {

struct SungNote {
  double duration_s;
  int midi;
};

struct Phrase {
  double start_s;
  std::vector<SungNote> notes;
};

struct VoiceSettings {
  double tuning_cents = 20.0;
  double vibrato_hz = 5.0;
  double vibrato_cents = 50.0;
  double glide_s = 0.05;
  double amplitude = 0.3;
  double max_harmonic_hz = 4000.0;
  double notch_width_s = 0.24;
  double notch_depth = 0.98;  // fraction removed at the centre of a notch
};

/// Legato sung phrases: harmonic tone with 1/h partials, sinusoidal vibrato,
/// short glides between pitches and amplitude notches between repeated pitches.
std::vector<double> synth_voice(const std::vector<Phrase>& phrases, double duration_s,
                                const VoiceSettings& settings = {}, int sample_rate = kSampleRate);

/// The pitch track synth_voice follows, sampled on the melody grid.
PitchContour synth_contour(const std::vector<Phrase>& phrases, double duration_s,
                           const VoiceSettings& settings = {});

/// Ground truth for synth_voice.
std::vector<NoteEvent> phrase_notes(const std::vector<Phrase>& phrases);

struct Pluck {
  double onset_s;
  double frequency;
  double amplitude;
};

/// Decaying plucked tones with partials up to max_partial_hz.
std::vector<double> synth_plucks(const std::vector<Pluck>& plucks, double duration_s,
                                 double max_partial_hz = 600.0, double decay_s = 0.35,
                                 int sample_rate = kSampleRate);

/// The 30 s stereo performance: voice mostly left, low-band guitar mostly right,
/// a falseta in the intro, interlude and outro, soft chords under the voice.
struct Performance {
  AudioClip clip;
  std::vector<NoteEvent> notes;
  std::vector<Phrase> phrases;
  double tuning_cents = 20.0;
  std::size_t voice_channel = 0;
};
Performance make_performance(std::uint32_t seed = 7);

/// Sinusoid helpers.
std::vector<double> sine(double frequency, double amplitude, double duration_s,
                         int sample_rate = kSampleRate, double phase = 0.0);

}  // namespace cantus::testing
