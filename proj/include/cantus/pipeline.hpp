#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "cantus/eval.hpp"
#include "cantus/labelling.hpp"
#include "cantus/melody.hpp"
#include "cantus/segmentation.hpp"
#include "cantus/spectral.hpp"
#include "cantus/vocal_filter.hpp"

namespace cantus {

/// Invalid configuration or invocation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stage failure; what() starts with the stage name.
class PipelineError : public std::runtime_error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::optional<double> tau_v;  // unset: 0.2, or 3.0 in mono mode
  bool mono_mode = false;
  bool disable_channel_selection = false;
  bool disable_contour_filter = false;
  bool disable_global_pitch_prob = false;
  std::filesystem::path contour_path;  // empty: built-in melody extractor

  double filter_window_s = 1.0;
  double tuning_smoothing_s = 0.25;
  MelodySettings melody;
  OnsetParams onsets;
  PostProcessParams post;

  double effective_tau_v() const;
  bool channel_selection_enabled() const { return !mono_mode && !disable_channel_selection; }
  bool contour_filter_enabled() const { return !mono_mode && !disable_contour_filter; }
};

/// Sets one option by its CLI flag name, without leading dashes ("tau-v",
/// "mono", "no-contour-filter", ...). Underscores and dashes are equivalent.
void set_config_option(PipelineConfig& config, std::string_view key, std::string_view value);

/// `key = value` lines; `#` starts a comment. Relative contour paths resolve
/// against the file's directory.
void load_config_file(PipelineConfig& config, const std::filesystem::path& path);

struct TrackResult {
  std::vector<NoteEvent> notes;
  std::vector<NoteEvent> unprocessed_notes;  // before post-processing
  PitchContour melody;                       // as extracted or loaded
  PitchContour vocal;                        // entering segmentation
  TuningEstimate tuning;
  std::optional<std::size_t> channel;        // set when channel selection ran
  ChromaVector global_pitch{};
  std::vector<ContourSegmentation> segmentation;

  // Intermediate streams, empty when their stage did not run.
  std::vector<double> band_ratio_db;         // selected channel, hop 1024
  std::vector<BarkVector> bark;
  std::vector<double> rms;
  std::vector<ChromaVector> chroma;
  std::vector<std::uint8_t> v_raw;
  std::vector<std::uint8_t> v_smooth;

  std::vector<nlohmann::json> diagnostics;   // one object per stage

  /// Voiced flags of the vocal contour.
  std::vector<std::uint8_t> voicing() const;
};

/// Runs every stage on a decoded clip. `external` replaces the melody
/// extractor when given.
TrackResult transcribe_clip(const AudioClip& clip, const PipelineConfig& config,
                            const PitchContour* external = nullptr);

/// Contour-only transcription: no audio features, so channel selection,
/// contour filtering, the volume onset detector and the global pitch classes
/// are skipped.
TrackResult transcribe_contour(const PitchContour& contour, const PipelineConfig& config);

/// Loads the audio (if a path is given) and the contour named by the config.
TrackResult transcribe_track(const std::optional<std::filesystem::path>& audio_path,
                             const PipelineConfig& config);

std::string diagnostics_jsonl(const TrackResult& result);
void save_diagnostics(const std::filesystem::path& path, const TrackResult& result);

/// `time_s,S,B1..B12,rms,chroma0..11` on the 128-sample grid; streams with a
/// coarser hop are held from their latest frame.
void save_features(const std::filesystem::path& path, const TrackResult& result);
/// `time_s,v_raw,v_smooth`.
void save_voicing(const std::filesystem::path& path, const TrackResult& result);
/// `time_s,detector`.
void save_onsets(const std::filesystem::path& path, const TrackResult& result);

struct ManifestEntry {
  std::filesystem::path audio;
  std::filesystem::path ground_truth;
  std::filesystem::path contour;  // optional
};

/// `audio_path,gt_path[,contour_path]` with an optional header; relative paths
/// resolve against the manifest's directory. An empty audio field means a
/// contour-only track.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

struct BatchResult {
  std::vector<ReportRow> rows;
  bool any_failed = false;
};

struct BatchOptions {
  unsigned jobs = 1;
  std::filesystem::path notes_dir;  // optional per-track notes output
};

BatchResult run_batch(const std::vector<ManifestEntry>& entries, const PipelineConfig& config,
                      const BatchOptions& options = {});

}  // namespace cantus
