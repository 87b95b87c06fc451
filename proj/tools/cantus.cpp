// Command-line front end: transcribe, evaluate and batch.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"

#include "cantus/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cantus;

namespace {

constexpr int kExitTrackFailure = 1;
constexpr int kExitUsage = 2;

/// Pipeline flags shared by transcribe and batch. A config file is applied
/// first; flags given on the command line override it.
struct PipelineFlags {
  std::string config_file;
  std::string contour;
  double tau_v = 0.0;
  CLI::Option* tau_v_opt = nullptr;
  CLI::Option* mono = nullptr;
  CLI::Option* no_channel_select = nullptr;
  CLI::Option* no_contour_filter = nullptr;
  CLI::Option* no_global_pitch = nullptr;

  void add_to(CLI::App& app) {
    app.add_option("--config", config_file, "key = value file with pipeline options");
    app.add_option("--contour", contour, "external pitch contour CSV (time_s,f0_hz)");
    mono = app.add_flag("--mono", "a cappella mode: no channel selection or contour filtering, tau_v = 3.0");
    no_channel_select = app.add_flag("--no-channel-select", "analyse the mixdown instead of the louder-voice channel");
    no_contour_filter = app.add_flag("--no-contour-filter", "keep every extracted contour");
    no_global_pitch = app.add_flag("--no-global-pitch", "label pitches from local histograms only");
    tau_v_opt = app.add_option("--tau-v", tau_v, "voicing tolerance of the melody extractor");
  }

  PipelineConfig build() const {
    PipelineConfig config;
    if (!config_file.empty()) load_config_file(config, config_file);
    if (!contour.empty()) config.contour_path = contour;
    if (mono->count()) config.mono_mode = true;
    if (no_channel_select->count()) config.disable_channel_selection = true;
    if (no_contour_filter->count()) config.disable_contour_filter = true;
    if (no_global_pitch->count()) config.disable_global_pitch_prob = true;
    if (tau_v_opt->count()) config.tau_v = tau_v;
    return config;
  }
};

void print_summary(const TrackResult& r) {
  if (r.channel) {
    std::cerr << "channel " << *r.channel << '\n';
  } else {
    std::cerr << "channel selection skipped\n";
  }
  std::fprintf(stderr, "tuning %+.2f cents (A4 = %.2f Hz)\n", r.tuning.delta_cents, r.tuning.a4_hz);
  std::cerr << r.notes.size() << " notes\n";
}

struct TranscribeArgs {
  PipelineFlags flags;
  std::string audio;
  std::string out, midi, diag, onsets, voicing, features;
};

int run_transcribe(const TranscribeArgs& a) {
  const auto config = a.flags.build();
  std::optional<fs::path> audio;
  if (!a.audio.empty()) audio = a.audio;
  const auto result = transcribe_track(audio, config);

  if (a.out.empty()) {
    std::cout << format_notes(result.notes);
  } else {
    save_notes(a.out, result.notes);
  }
  if (!a.midi.empty()) save_midi(a.midi, result.notes);
  if (!a.onsets.empty()) save_onsets(a.onsets, result);
  if (!a.voicing.empty()) save_voicing(a.voicing, result);
  if (!a.features.empty()) save_features(a.features, result);
  if (a.diag.empty()) {
    std::cerr << diagnostics_jsonl(result);
  } else {
    save_diagnostics(a.diag, result);
  }
  print_summary(result);
  return 0;
}

struct EvaluateArgs {
  std::string notes, ground_truth, report;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto est = load_notes(a.notes);
  const auto gt = load_notes(a.ground_truth);
  const std::vector<ReportRow> rows{{fs::path(a.notes).filename().string(), transposition_corrected_eval(est, gt, {})}};
  if (!a.report.empty()) save_report(a.report, rows);
  std::cout << format_report(rows);
  return 0;
}

struct BatchArgs {
  PipelineFlags flags;
  std::string manifest, report, notes_dir;
  unsigned jobs = 1;
};

int run_batch_command(const BatchArgs& a) {
  const auto config = a.flags.build();
  const auto entries = load_manifest(a.manifest);
  BatchOptions options;
  options.jobs = a.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.jobs;
  if (!a.notes_dir.empty()) {
    options.notes_dir = a.notes_dir;
    fs::create_directories(options.notes_dir);
  }
  const auto batch = run_batch(entries, config, options);
  if (a.report.empty()) {
    std::cout << format_report(batch.rows);
  } else {
    save_report(a.report, batch.rows);
  }
  std::size_t failed = 0;
  for (const auto& row : batch.rows) {
    if (row.status != "ok") {
      ++failed;
      std::cerr << row.track << ": " << row.status << '\n';
    }
  }
  std::cerr << batch.rows.size() - failed << '/' << batch.rows.size() << " tracks scored\n";
  return batch.any_failed ? kExitTrackFailure : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Note transcription of accompanied and a cappella singing"};
  app.set_version_flag("--version", std::string("cantus 0.1.0"));
  app.require_subcommand(1);

  TranscribeArgs transcribe;
  auto* t = app.add_subcommand("transcribe", "transcribe one recording to notes");
  t->add_option("audio", transcribe.audio, "WAV file (optional with --contour)");
  transcribe.flags.add_to(*t);
  t->add_option("--out", transcribe.out, "notes CSV (default: stdout)");
  t->add_option("--midi", transcribe.midi, "standard MIDI file");
  t->add_option("--diag", transcribe.diag, "per-stage diagnostics as JSON lines (default: stderr)");
  t->add_option("--onsets", transcribe.onsets, "onset CSV with the firing detector");
  t->add_option("--voicing", transcribe.voicing, "frame-wise vocal predictions CSV");
  t->add_option("--features", transcribe.features, "frame-wise feature CSV");

  EvaluateArgs evaluate;
  auto* e = app.add_subcommand("evaluate", "score a transcription against ground truth");
  e->add_option("notes", evaluate.notes, "estimated notes CSV")->required();
  e->add_option("ground_truth", evaluate.ground_truth, "ground-truth notes CSV")->required();
  e->add_option("--report", evaluate.report, "report CSV");

  BatchArgs batch;
  auto* b = app.add_subcommand("batch", "transcribe and score every track of a manifest");
  b->add_option("manifest", batch.manifest, "CSV of audio_path,gt_path[,contour_path]")->required();
  batch.flags.add_to(*b);
  b->add_option("--report", batch.report, "report CSV (default: stdout)");
  b->add_option("--jobs", batch.jobs, "tracks processed in parallel (0: one per core)");
  b->add_option("--notes-dir", batch.notes_dir, "directory for per-track notes CSVs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*t) {
      if (transcribe.audio.empty() && transcribe.flags.contour.empty()) {
        throw ConfigError("transcribe needs an audio file or --contour");
      }
      return run_transcribe(transcribe);
    }
    if (*e) return run_evaluate(evaluate);
    return run_batch_command(batch);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitTrackFailure;
  }
}
