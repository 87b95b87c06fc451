#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cantus/audio_io.hpp"

namespace cantus {

/// Pitch grid shared by the melody, bark, rms and onset stages.
inline constexpr FrameGrid kMelodyGrid{4096, 128, 2, true};

inline constexpr double kDefaultVoicingTolerance = 0.2;
inline constexpr double kMonoVoicingTolerance = 3.0;

class ContourError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inclusive frame range of one contour.
struct ContourSpan {
  std::size_t first = 0;
  std::size_t last = 0;

  std::size_t length() const { return last - first + 1; }
  friend bool operator==(const ContourSpan&, const ContourSpan&) = default;
};

/// Maximal runs of nonzero values, in order.
std::vector<ContourSpan> rebuild_contours(std::span<const double> f0);

/// Frame-synchronous fundamental frequency; 0 Hz marks non-melody frames.
/// `contours` are disjoint, sorted and cover the voiced frames exactly. The
/// built-in extractor also splits runs where the pitch jumps between frames;
/// rebuild() resets them to the maximal voiced runs.
struct PitchContour {
  std::vector<double> f0;
  FrameGrid grid = kMelodyGrid;
  int sample_rate = kSampleRate;
  std::vector<ContourSpan> contours;

  std::size_t num_frames() const { return f0.size(); }
  std::size_t voiced_frames() const;
  double frame_time(std::size_t n) const { return grid.frame_time(n, sample_rate); }
  double frame_rate() const { return grid.frame_rate(sample_rate); }
  void rebuild() { contours = rebuild_contours(f0); }
};

struct MelodySettings {
  double min_hz = 120.0;
  double max_hz = 720.0;
  double grid_cents = 10.0;
  int harmonics = 8;
  double harmonic_decay = 0.8;
  /// Half-width of the cos^2 kernel spreading each harmonic onto the grid.
  double kernel_cents = 50.0;
  /// Spectral peaks below the frame maximum by more than this are ignored.
  double peak_floor_db = 40.0;
  /// Adjacent-frame pitch jumps above this break a contour.
  double link_cents = 80.0;
  /// Linked contours shorter than this are discarded as transients.
  double min_contour_s = 0.05;
};

/// Per-frame best salience peak before voicing decisions.
struct MelodyCandidates {
  std::vector<double> f0;        // 0 where the frame has no salience peak or a too-short contour
  std::vector<double> salience;  // salience of the chosen peak
  std::vector<ContourSpan> contours;
  FrameGrid grid = kMelodyGrid;
  int sample_rate = kSampleRate;
};

/// Candidate frequencies of the salience grid, ascending.
std::vector<double> salience_grid(const MelodySettings& settings = {});

/// Harmonic-summation salience of one magnitude spectrum over salience_grid().
std::vector<double> salience_function(std::span<const double> magnitudes, const FrameGrid& grid,
                                      const MelodySettings& settings = {},
                                      int sample_rate = kSampleRate);

/// Strongest pitch of one frame, refined between grid points; nullopt when
/// the frame has no harmonic content in range.
struct FramePitch {
  double f0 = 0.0;
  double salience = 0.0;
};
std::optional<FramePitch> frame_pitch(std::span<const double> magnitudes, const FrameGrid& grid,
                                      const MelodySettings& settings = {},
                                      int sample_rate = kSampleRate);

MelodyCandidates melody_candidates(const AudioClip& clip, std::size_t channel,
                                   const MelodySettings& settings = {});

/// Keeps contours whose mean salience reaches mean - tau_v * stddev of all
/// contour mean saliences.
PitchContour apply_voicing(const MelodyCandidates& candidates, double tau_v);

PitchContour extract_predominant(const AudioClip& clip, std::size_t channel,
                                 double tau_v = kDefaultVoicingTolerance,
                                 const MelodySettings& settings = {});

/// Reads a `time_s,f0_hz` CSV (header optional) and assigns each row to the
/// nearest frame of `grid`. Non-positive or NaN pitches become 0.
PitchContour load_contour(const std::filesystem::path& path, const FrameGrid& grid = kMelodyGrid,
                          std::optional<std::size_t> num_frames = std::nullopt,
                          int sample_rate = kSampleRate);

/// Same as load_contour, from (time, f0) rows already in memory.
PitchContour contour_from_rows(std::span<const double> times, std::span<const double> f0,
                               const FrameGrid& grid = kMelodyGrid,
                               std::optional<std::size_t> num_frames = std::nullopt,
                               int sample_rate = kSampleRate);

void save_contour(const std::filesystem::path& path, const PitchContour& contour);

}  // namespace cantus
