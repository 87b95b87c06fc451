#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cantus/melody.hpp"
#include "cantus/spectral.hpp"

namespace cantus {

struct TuningEstimate {
  double delta_cents = 0.0;  // in (-50, 50]
  double a4_hz = 440.0;
};

/// Reference pitch of A4 for a deviation in cents from 440 Hz.
double tuned_reference(double delta_cents);

/// Wraps any cent value into (-50, 50].
double wrap_deviation(double cents);

/// Circular mean of per-frame semitone deviations. Cent values are first
/// averaged over `smoothing_s` within each contour so that vibrato does not
/// bias the mean; smoothing_s = 0 uses the raw frames.
TuningEstimate estimate_tuning(const PitchContour& contour, double smoothing_s = 0.25);

/// Cents relative to the tuned A4 on voiced frames, NaN elsewhere.
std::vector<double> remap_to_tuned_cents(const PitchContour& contour, const TuningEstimate& tuning);

/// Average chroma normalised to sum 1; uniform when every frame is silent.
ChromaVector global_pitch_classes(std::span<const ChromaVector> chroma);

inline constexpr double kLocalSigmaSemitones = 0.5;
inline constexpr int kLocalMarginBins = 3;

/// Gaussian mixture over semitone bins (bin 0 = tuned A4).
struct LocalPitchProbability {
  int first_bin = 0;
  std::vector<double> values;  // values[i] belongs to bin first_bin + i

  int bin(std::size_t i) const { return first_bin + static_cast<int>(i); }
};

/// Frames that are NaN are ignored; an empty result has no values.
LocalPitchProbability local_pitch_probability(std::span<const double> tuned_cents);

/// Non-negative pitch class of a semitone bin (0 = A).
int pitch_class_of_bin(int bin);

/// 69 + the bin maximising local * global[class]; ties go to the lower bin.
int assign_pitch(const LocalPitchProbability& local, const ChromaVector& global);

struct NoteEvent {
  double onset_s = 0.0;
  double duration_s = 0.0;
  int midi = 0;

  double offset_s() const { return onset_s + duration_s; }
  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

struct PostProcessParams {
  int range_semitones = 8;
  double min_duration_s = 0.05;
};

/// Range and duration rules applied until nothing changes, sorted by onset.
std::vector<NoteEvent> post_process(std::vector<NoteEvent> notes, const PostProcessParams& params = {});

/// Median MIDI value of the notes (mean of the middle two for even counts).
double median_pitch(std::span<const NoteEvent> notes);

/// One labelled note per segment, onset at the segment's first frame, in
/// segment order.
std::vector<NoteEvent> label_segments(std::span<const ContourSpan> segments,
                                      std::span<const double> tuned_cents, const ChromaVector& global,
                                      const FrameGrid& grid, int sample_rate = kSampleRate);

/// label_segments followed by post_process.
std::vector<NoteEvent> transcribe_segments(std::span<const ContourSpan> segments,
                                           std::span<const double> tuned_cents,
                                           const ChromaVector& global, const FrameGrid& grid,
                                           int sample_rate = kSampleRate,
                                           const PostProcessParams& params = {});

class NoteFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `onset_s,duration_s,midi` with a header row.
void save_notes(const std::filesystem::path& path, std::span<const NoteEvent> notes);
std::string format_notes(std::span<const NoteEvent> notes);
std::vector<NoteEvent> load_notes(const std::filesystem::path& path);

/// Format-0 Standard MIDI File at 120 bpm, velocity 80.
std::vector<unsigned char> midi_file_bytes(std::span<const NoteEvent> notes);
void save_midi(const std::filesystem::path& path, std::span<const NoteEvent> notes);

}  // namespace cantus
