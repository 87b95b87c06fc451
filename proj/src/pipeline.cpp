#include "cantus/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "cantus/csv.hpp"

namespace cantus {

using nlohmann::json;

double PipelineConfig::effective_tau_v() const {
  if (tau_v) return *tau_v;
  return mono_mode ? kMonoVoicingTolerance : kDefaultVoicingTolerance;
}

namespace {

std::string normalise_key(std::string_view key) {
  std::string k(csv::trim(key));
  while (!k.empty() && k.front() == '-') k.erase(0, 1);
  std::replace(k.begin(), k.end(), '_', '-');
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return k;
}

bool parse_bool(std::string_view key, std::string_view value) {
  std::string v(csv::trim(value));
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v.empty() || v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("option " + std::string(key) + " expects a boolean, got '" + std::string(value) + "'");
}

double parse_number(std::string_view key, std::string_view value) {
  const auto v = csv::parse_double(value);
  if (!v || !std::isfinite(*v)) {
    throw ConfigError("option " + std::string(key) + " expects a number, got '" + std::string(value) + "'");
  }
  return *v;
}

}  // namespace

void set_config_option(PipelineConfig& c, std::string_view raw_key, std::string_view value) {
  const std::string key = normalise_key(raw_key);
  const auto number = [&] { return parse_number(key, value); };
  const auto positive = [&] {
    const double v = number();
    if (!(v > 0.0)) throw ConfigError("option " + key + " must be positive");
    return v;
  };
  if (key == "tau-v") {
    c.tau_v = number();
  } else if (key == "mono") {
    c.mono_mode = parse_bool(key, value);
  } else if (key == "no-channel-select") {
    c.disable_channel_selection = parse_bool(key, value);
  } else if (key == "no-contour-filter") {
    c.disable_contour_filter = parse_bool(key, value);
  } else if (key == "no-global-pitch") {
    c.disable_global_pitch_prob = parse_bool(key, value);
  } else if (key == "contour") {
    c.contour_path = std::string(csv::trim(value));
  } else if (key == "filter-window") {
    c.filter_window_s = positive();
  } else if (key == "tuning-smoothing") {
    c.tuning_smoothing_s = number();
  } else if (key == "envelope-min-cents") {
    c.onsets.envelope_min_cents = number();
  } else if (key == "envelope-max-gap") {
    c.onsets.envelope_max_gap_s = number();
  } else if (key == "gauss-sigma") {
    c.onsets.gauss_sigma_s = positive();
  } else if (key == "gauss-support") {
    c.onsets.gauss_support_s = positive();
  } else if (key == "gauss-threshold") {
    c.onsets.gauss_threshold = number();
  } else if (key == "rms-half-window") {
    c.onsets.rms_half_window = static_cast<std::size_t>(positive());
  } else if (key == "rms-threshold") {
    c.onsets.rms_threshold_db = number();
  } else if (key == "dip-threshold") {
    c.onsets.dip_threshold = number();
  } else if (key == "merge-window") {
    c.onsets.merge_s = number();
  } else if (key == "min-duration") {
    c.onsets.min_segment_s = number();
    c.post.min_duration_s = c.onsets.min_segment_s;
  } else if (key == "pitch-range") {
    c.post.range_semitones = static_cast<int>(std::lround(number()));
  } else {
    throw ConfigError("unknown option '" + std::string(raw_key) + "'");
  }
}

void load_config_file(PipelineConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = csv::trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    const auto key = csv::trim(text.substr(0, eq));
    const auto value = eq == std::string_view::npos ? std::string_view{} : csv::trim(text.substr(eq + 1));
    try {
      set_config_option(config, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    if (normalise_key(key) == "contour" && config.contour_path.is_relative()) {
      config.contour_path = path.parent_path() / config.contour_path;
    }
  }
}

std::vector<std::uint8_t> TrackResult::voicing() const {
  std::vector<std::uint8_t> v(vocal.f0.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = vocal.f0[i] > 0.0;
  return v;
}

namespace {

template <typename F>
auto run_stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(name, e.what());
  }
}

json skipped(const char* stage, const char* reason) {
  return {{"stage", stage}, {"status", "skipped"}, {"reason", reason}};
}

json contour_counts(const PitchContour& c) {
  return {{"frames", c.num_frames()}, {"voiced_frames", c.voiced_frames()}, {"contours", c.contours.size()}};
}

// Everything after the melody contour is known. `audio` is the analysed
// single-channel clip, or null for contour-only input.
void finish_track(TrackResult& r, const AudioClip* audio, const PipelineConfig& config) {
  // Contour filtering.
  r.vocal = r.melody;
  if (r.vocal.contours.empty()) r.vocal.rebuild();
  if (!config.contour_filter_enabled()) {
    r.diagnostics.push_back(skipped("contour_filter", config.mono_mode ? "mono mode" : "disabled"));
  } else if (!audio) {
    r.diagnostics.push_back(skipped("contour_filter", "no audio"));
  } else {
    run_stage("contour_filter", [&] {
      json d{{"stage", "contour_filter"}, {"status", "ran"}, {"contours_in", r.vocal.contours.size()}};
      r.bark = bark_energies(*audio, 0);
      const auto fit = fit_models(r.bark, r.melody);
      d["voiced_frames"] = fit.voiced_frames;
      d["unvoiced_frames"] = fit.unvoiced_frames;
      if (fit.model) {
        r.v_raw = classify_frames(r.bark, *fit.model);
        r.v_smooth = smooth_prediction(r.v_raw, config.filter_window_s, r.melody.frame_rate());
        const auto filtered = filter_contours(r.vocal, r.v_smooth);
        r.vocal = filtered.contour;
        d["deleted_contours"] = filtered.deleted_contours;
        d["deleted_frames"] = filtered.deleted_frames;
      } else {
        d["warning"] = fit.warning;
        d["deleted_contours"] = 0;
        d["deleted_frames"] = 0;
      }
      d["contours_out"] = r.vocal.contours.size();
      r.diagnostics.push_back(std::move(d));
    });
  }

  // Segmentation.
  run_stage("segmentation", [&] {
    if (audio) r.rms = rms_track(*audio, 0);
    r.segmentation = segment_contours(r.vocal, r.rms, config.onsets);
    std::map<std::string, std::size_t> per_detector;
    for (Detector d : {Detector::envelope, Detector::gauss_deriv, Detector::rms_decay, Detector::pitch_dip}) {
      per_detector[std::string(detector_name(d))] = 0;
    }
    std::size_t onsets = 0, kept = 0, dropped = 0;
    for (const auto& s : r.segmentation) {
      onsets += s.onsets.size();
      kept += s.segments.kept.size();
      dropped += s.segments.dropped.size();
      for (const auto& o : s.onsets) ++per_detector[std::string(detector_name(o.source))];
    }
    r.diagnostics.push_back({{"stage", "segmentation"},
                             {"status", "ran"},
                             {"contours", r.segmentation.size()},
                             {"onsets", onsets},
                             {"onsets_by_detector", per_detector},
                             {"segments", kept},
                             {"dropped_segments", dropped},
                             {"volume_detector", audio ? "ran" : "skipped"}});
  });

  // Labelling.
  run_stage("labelling", [&] {
    r.tuning = estimate_tuning(r.vocal, config.tuning_smoothing_s);
    json d{{"stage", "labelling"},
           {"status", "ran"},
           {"tuning_cents", r.tuning.delta_cents},
           {"a4_hz", r.tuning.a4_hz}};
    r.global_pitch.fill(1.0 / 12.0);
    if (config.disable_global_pitch_prob) {
      d["global_pitch"] = "disabled";
    } else if (!audio) {
      d["global_pitch"] = "no audio";
    } else {
      r.chroma = chroma_track(*audio, 0, r.tuning.a4_hz);
      r.global_pitch = global_pitch_classes(r.chroma);
      d["global_pitch"] = "ran";
    }
    d["global_pitch_classes"] = r.global_pitch;
    std::vector<ContourSpan> segments;
    for (const auto& s : r.segmentation) {
      segments.insert(segments.end(), s.segments.kept.begin(), s.segments.kept.end());
    }
    const auto cents = remap_to_tuned_cents(r.vocal, r.tuning);
    r.unprocessed_notes = label_segments(segments, cents, r.global_pitch, r.vocal.grid, r.vocal.sample_rate);
    d["notes"] = r.unprocessed_notes.size();
    r.diagnostics.push_back(std::move(d));
  });

  run_stage("post_processing", [&] {
    r.notes = post_process(r.unprocessed_notes, config.post);
    r.diagnostics.push_back({{"stage", "post_processing"},
                             {"status", "ran"},
                             {"median_midi", median_pitch(r.unprocessed_notes)},
                             {"notes_in", r.unprocessed_notes.size()},
                             {"notes_out", r.notes.size()}});
  });
}

}  // namespace

TrackResult transcribe_clip(const AudioClip& clip, const PipelineConfig& config, const PitchContour* external) {
  TrackResult r;
  run_stage("input", [&] { clip.validate(); });

  AudioClip analysis = run_stage("channel_selection", [&] {
    if (clip.num_channels() == 1) {
      r.diagnostics.push_back(skipped("channel_selection", "single channel"));
      return clip;
    }
    if (!config.channel_selection_enabled()) {
      r.diagnostics.push_back(skipped("channel_selection", config.mono_mode ? "mono mode" : "disabled"));
      return clip.mixdown();
    }
    const auto sel = select_channel(clip);
    r.channel = sel.channel;
    json ratios = json::array();
    for (const auto& m : sel.mean_ratio) ratios.push_back(m ? json(*m) : json(nullptr));
    r.diagnostics.push_back(
        {{"stage", "channel_selection"}, {"status", "ran"}, {"channel", sel.channel}, {"mean_ratio_db", ratios}});
    return clip.single_channel(sel.channel);
  });
  run_stage("channel_selection", [&] { r.band_ratio_db = spectral_band_ratio(analysis, 0).db; });

  run_stage("melody", [&] {
    const double tau = config.effective_tau_v();
    if (external) {
      r.melody = *external;
      const std::size_t frames = kMelodyGrid.num_frames(analysis.num_samples());
      if (r.melody.f0.size() != frames) {
        r.melody.f0.resize(frames, 0.0);
        r.melody.rebuild();
      }
      json d{{"stage", "melody"}, {"status", "external"}};
      d.update(contour_counts(r.melody));
      r.diagnostics.push_back(std::move(d));
    } else {
      r.melody = extract_predominant(analysis, 0, tau, config.melody);
      json d{{"stage", "melody"}, {"status", "ran"}, {"tau_v", tau}};
      d.update(contour_counts(r.melody));
      r.diagnostics.push_back(std::move(d));
    }
  });

  finish_track(r, &analysis, config);
  return r;
}

TrackResult transcribe_contour(const PitchContour& contour, const PipelineConfig& config) {
  TrackResult r;
  r.diagnostics.push_back(skipped("channel_selection", "no audio"));
  r.melody = contour;
  if (r.melody.contours.empty()) r.melody.rebuild();
  json d{{"stage", "melody"}, {"status", "external"}};
  d.update(contour_counts(r.melody));
  r.diagnostics.push_back(std::move(d));
  finish_track(r, nullptr, config);
  return r;
}

TrackResult transcribe_track(const std::optional<std::filesystem::path>& audio_path,
                             const PipelineConfig& config) {
  if (!audio_path && config.contour_path.empty()) throw ConfigError("need an audio file or a contour file");
  std::optional<AudioClip> clip;
  if (audio_path) clip = run_stage("input", [&] { return load_audio(*audio_path); });
  std::optional<PitchContour> external;
  if (!config.contour_path.empty()) {
    external = run_stage("melody", [&] {
      std::optional<std::size_t> frames;
      if (clip) frames = kMelodyGrid.num_frames(clip->num_samples());
      return load_contour(config.contour_path, kMelodyGrid, frames, clip ? clip->sample_rate : kSampleRate);
    });
  }
  if (clip) return transcribe_clip(*clip, config, external ? &*external : nullptr);
  return transcribe_contour(*external, config);
}

std::string diagnostics_jsonl(const TrackResult& result) {
  std::string out;
  for (const auto& d : result.diagnostics) {
    out += d.dump();
    out += '\n';
  }
  return out;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void save_diagnostics(const std::filesystem::path& path, const TrackResult& result) {
  open_output(path) << diagnostics_jsonl(result);
}

void save_features(const std::filesystem::path& path, const TrackResult& result) {
  auto out = open_output(path);
  out << "time_s,S";
  for (int b = 1; b <= 12; ++b) out << ",B" << b;
  out << ",rms";
  for (int k = 0; k < 12; ++k) out << ",chroma" << k;
  out << '\n';
  const auto& grid = result.melody.grid;
  const int sr = result.melody.sample_rate;
  const std::size_t coarse = kBandRatioGrid.hop / grid.hop;
  for (std::size_t n = 0; n < result.melody.num_frames(); ++n) {
    out << csv::fixed(grid.frame_time(n, sr), 6) << ',';
    if (!result.band_ratio_db.empty()) {
      out << csv::fixed(result.band_ratio_db[std::min(n / coarse, result.band_ratio_db.size() - 1)], 6);
    }
    for (std::size_t b = 0; b < 12; ++b) {
      out << ',';
      if (n < result.bark.size()) out << csv::fixed(result.bark[n][b], 9);
    }
    out << ',';
    if (n < result.rms.size()) out << csv::fixed(result.rms[n], 9);
    for (std::size_t k = 0; k < 12; ++k) {
      out << ',';
      if (!result.chroma.empty()) out << csv::fixed(result.chroma[std::min(n / coarse, result.chroma.size() - 1)][k], 9);
    }
    out << '\n';
  }
}

void save_voicing(const std::filesystem::path& path, const TrackResult& result) {
  auto out = open_output(path);
  out << "time_s,v_raw,v_smooth\n";
  for (std::size_t n = 0; n < result.v_raw.size(); ++n) {
    out << csv::fixed(result.melody.frame_time(n), 6) << ',' << int(result.v_raw[n]) << ','
        << int(n < result.v_smooth.size() ? result.v_smooth[n] : 0) << '\n';
  }
}

void save_onsets(const std::filesystem::path& path, const TrackResult& result) {
  auto out = open_output(path);
  out << "time_s,detector\n";
  for (const auto& s : result.segmentation) {
    for (const auto& o : s.onsets) {
      out << csv::fixed(result.vocal.frame_time(o.frame), 6) << ',' << detector_name(o.source) << '\n';
    }
  }
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  csv::Table table;
  try {
    table = csv::read(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto base = path.parent_path();
  const auto resolve = [&](const std::string& field) -> std::filesystem::path {
    if (field.empty()) return {};
    std::filesystem::path p(field);
    return p.is_relative() ? base / p : p;
  };
  std::vector<ManifestEntry> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() < 2 || row[1].empty()) {
      throw ConfigError(path.string() + " row " + std::to_string(i + 1) + ": expected audio_path,gt_path[,contour_path]");
    }
    ManifestEntry e{resolve(row[0]), resolve(row[1]), row.size() > 2 ? resolve(row[2]) : std::filesystem::path{}};
    if (e.audio.empty() && e.contour.empty()) {
      throw ConfigError(path.string() + " row " + std::to_string(i + 1) + ": needs an audio or contour path");
    }
    out.push_back(std::move(e));
  }
  return out;
}

BatchResult run_batch(const std::vector<ManifestEntry>& entries, const PipelineConfig& config,
                      const BatchOptions& options) {
  BatchResult result;
  result.rows.resize(entries.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      const auto& e = entries[i];
      auto& row = result.rows[i];
      row.track = (e.audio.empty() ? e.contour : e.audio).filename().string();
      try {
        PipelineConfig track_config = config;
        if (!e.contour.empty()) track_config.contour_path = e.contour;
        std::optional<std::filesystem::path> audio;
        if (!e.audio.empty()) audio = e.audio;
        const auto gt = load_notes(e.ground_truth);
        const auto track = transcribe_track(audio, track_config);
        const auto voicing = track.voicing();
        EvalOptions eo;
        eo.grid = track.vocal.grid;
        eo.sample_rate = track.vocal.sample_rate;
        eo.est_voicing = voicing;
        row.report = transposition_corrected_eval(track.notes, gt, eo);
        if (!options.notes_dir.empty()) {
          const auto stem = (e.audio.empty() ? e.contour : e.audio).stem().string();
          save_notes(options.notes_dir / (std::to_string(i) + "_" + stem + ".csv"), track.notes);
        }
        row.status = "ok";
      } catch (const std::exception& ex) {
        row.status = std::string("failed: ") + ex.what();
      }
    }
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(options.jobs, static_cast<unsigned>(entries.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  result.any_failed = std::any_of(result.rows.begin(), result.rows.end(),
                                  [](const ReportRow& r) { return r.status != "ok"; });
  return result;
}

}  // namespace cantus
