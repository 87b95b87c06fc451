#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cantus/labelling.hpp"

namespace cantus {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

/// Harmonic mean, 0 when both are 0.
double f_measure(double precision, double recall);

/// Counts-based P/R/F. Empty denominators give 0.
Prf prf_from_counts(std::size_t matches, std::size_t estimated, std::size_t reference);

/// Frame voicing P/R/F; both sequences empty of voiced frames gives (1, 1, 1).
Prf voicing_metrics(std::span<const std::uint8_t> est_voiced, std::span<const std::uint8_t> gt_voiced);

/// Maximum-cardinality one-to-one matching between est[i] and ref[j] where
/// compatible(i, j). Returns (est index, ref index) pairs.
std::vector<std::pair<std::size_t, std::size_t>> match_pairs(
    std::size_t est_count, std::size_t ref_count,
    const std::function<bool(std::size_t, std::size_t)>& compatible,
    const std::function<double(std::size_t, std::size_t)>& cost = {});

inline constexpr double kOnsetTolerance = 0.15;
inline constexpr double kDurationTolerance = 0.3;

std::size_t count_onset_matches(std::span<const double> est, std::span<const double> gt,
                                double tol_s = kOnsetTolerance);
Prf onset_metrics(std::span<const double> est, std::span<const double> gt,
                  double tol_s = kOnsetTolerance);

/// Same MIDI, onset within tolerance and duration within 30% of the reference.
bool note_matches(const NoteEvent& est, const NoteEvent& gt, double onset_tol_s = kOnsetTolerance,
                  double duration_tol = kDurationTolerance);
Prf note_metrics(std::span<const NoteEvent> est, std::span<const NoteEvent> gt);

/// Frame MIDI labels on `grid` (-1 = unvoiced); note n covers frames whose time
/// lies in [onset, onset + duration).
std::vector<int> rasterise_notes(std::span<const NoteEvent> notes, std::size_t num_frames,
                                 const FrameGrid& grid, int sample_rate = kSampleRate);

double raw_pitch_accuracy(std::span<const int> est_midi, std::span<const int> gt_midi);

struct EvalReport {
  double Pr_V = 0.0, Rec_V = 0.0, FM_V = 0.0;
  double Pr_On = 0.0, Rec_On = 0.0, FM_On = 0.0;
  double Pr_N = 0.0, Rec_N = 0.0, FM_N = 0.0;
  double RPA = 0.0;
  int transposition_applied = 0;
};

/// Voicing frames, when given, replace the rasterised estimate for the voicing
/// metrics (a transcription's contour usually covers more than its notes).
struct EvalOptions {
  FrameGrid grid = kMelodyGrid;
  int sample_rate = kSampleRate;
  std::span<const std::uint8_t> est_voicing;  // optional
};

/// Scores est, est+1 and est-1 semitone against gt, keeps the variant with the
/// best note f-measure (earlier variant on ties, order 0, -1, +1) and computes
/// every metric on it.
EvalReport transposition_corrected_eval(std::span<const NoteEvent> est, std::span<const NoteEvent> gt,
                                        const EvalOptions& options);

EvalReport mean_report(std::span<const EvalReport> reports);

struct ReportRow {
  std::string track;
  EvalReport report;
  std::string status = "ok";
};

/// CSV with one row per track and a final "mean" row over rows with status ok.
std::string format_report(std::span<const ReportRow> rows);
void save_report(const std::filesystem::path& path, std::span<const ReportRow> rows);

}  // namespace cantus
