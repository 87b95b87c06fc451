#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "synthetic.hpp"

#include "cantus/pipeline.hpp"

using namespace cantus;
using namespace cantus::testing;

namespace {

const Performance& performance() {
  static const Performance perf = make_performance();
  return perf;
}

const nlohmann::json* stage(const TrackResult& r, const std::string& name) {
  for (const auto& d : r.diagnostics) {
    if (d.at("stage") == name) return &d;
  }
  return nullptr;
}

// Flat, separated notes on the melody grid; each note is its own contour.
PitchContour flat_contour(const std::vector<NoteEvent>& notes, double duration_s) {
  PitchContour c;
  c.f0.assign(kMelodyGrid.num_frames(static_cast<std::size_t>(duration_s * kSampleRate)), 0.0);
  for (std::size_t n = 0; n < c.f0.size(); ++n) {
    const double t = c.frame_time(n);
    for (const auto& note : notes) {
      if (t >= note.onset_s && t < note.onset_s + note.duration_s) {
        c.f0[n] = 440.0 * std::pow(2.0, (note.midi - 69) / 12.0);
      }
    }
  }
  c.rebuild();
  return c;
}

const std::vector<NoteEvent> kScale{{0.3, 0.5, 60}, {1.0, 0.4, 62}, {1.6, 0.6, 64}, {2.4, 0.3, 65}, {3.0, 0.5, 67}};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("configuration defaults") {
    const PipelineConfig c;
    CHECK(c.effective_tau_v() == 0.2);
    CHECK_FALSE(c.mono_mode);
    CHECK(c.channel_selection_enabled());
    CHECK(c.contour_filter_enabled());
    CHECK(c.onsets.envelope_min_cents == 80.0);
    CHECK(c.onsets.envelope_max_gap_s == 0.25);
    CHECK(c.onsets.gauss_sigma_s == 0.0435);
    CHECK(c.onsets.gauss_threshold == 4.0);
    CHECK(c.onsets.rms_threshold_db == -10.0);
    CHECK(c.onsets.dip_threshold == -2.0);
    CHECK(c.onsets.min_segment_s == 0.05);
    CHECK(c.post.min_duration_s == 0.05);
    CHECK(c.post.range_semitones == 8);

    PipelineConfig mono;
    mono.mono_mode = true;
    CHECK(mono.effective_tau_v() == 3.0);
    CHECK_FALSE(mono.channel_selection_enabled());
    CHECK_FALSE(mono.contour_filter_enabled());
    mono.tau_v = 1.5;
    CHECK(mono.effective_tau_v() == 1.5);
  }

  TEST_CASE("configuration options and files") {
    PipelineConfig c;
    set_config_option(c, "--tau-v", "0.7");
    set_config_option(c, "no_contour_filter", "");
    set_config_option(c, "mono", "false");
    CHECK(c.tau_v == 0.7);
    CHECK(c.disable_contour_filter);
    CHECK_FALSE(c.mono_mode);
    CHECK_THROWS_AS(set_config_option(c, "bogus", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_option(c, "tau-v", "abc"), ConfigError);
    CHECK_THROWS_AS(set_config_option(c, "mono", "maybe"), ConfigError);
    CHECK_THROWS_AS(set_config_option(c, "gauss-sigma", "0"), ConfigError);

    TempDir dir;
    write_text(dir / "run.cfg", "# experiment\nmono = true\ncontour = f0.csv  # relative\ngauss-threshold=3.5\n");
    PipelineConfig f;
    load_config_file(f, dir / "run.cfg");
    CHECK(f.mono_mode);
    CHECK(f.contour_path == dir / "f0.csv");
    CHECK(f.onsets.gauss_threshold == 3.5);

    write_text(dir / "bad.cfg", "mono = 1\nwhat = 2\n");
    try {
      load_config_file(f, dir / "bad.cfg");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    CHECK_THROWS_AS(load_config_file(f, dir / "missing.cfg"), ConfigError);
  }

  TEST_CASE("mono mode skips channel selection and contour filtering") {
    const std::vector<Phrase> phrases{{0.3, {{0.6, 64}, {0.6, 67}, {0.8, 65}}}};
    const auto clip = mono(synth_voice(phrases, 2.5));
    PipelineConfig config;
    config.mono_mode = true;
    const auto r = transcribe_clip(clip, config);
    CHECK_FALSE(r.notes.empty());
    CHECK_FALSE(r.channel.has_value());
    REQUIRE(stage(r, "channel_selection"));
    CHECK(stage(r, "channel_selection")->at("status") == "skipped");
    CHECK(stage(r, "contour_filter")->at("status") == "skipped");
    CHECK(stage(r, "melody")->at("tau_v") == 3.0);
  }

  TEST_CASE("voice panned left selects channel 0") {
    const auto& perf = performance();
    const auto r = transcribe_clip(perf.clip, PipelineConfig{});
    REQUIRE(r.channel.has_value());
    CHECK(*r.channel == perf.voice_channel);
    CHECK(stage(r, "channel_selection")->at("channel") == perf.voice_channel);

    auto swapped = perf.clip;
    std::swap(swapped.channels[0], swapped.channels[1]);
    CHECK(transcribe_clip(swapped, PipelineConfig{}).channel == 1u);
  }

  TEST_CASE("stage order and diagnostics") {
    const auto r = transcribe_clip(performance().clip, PipelineConfig{});
    std::vector<std::string> names;
    for (const auto& d : r.diagnostics) names.push_back(d.at("stage"));
    CHECK(names == std::vector<std::string>{"channel_selection", "melody", "contour_filter", "segmentation",
                                            "labelling", "post_processing"});
    const auto jsonl = diagnostics_jsonl(r);
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 6);
    CHECK(stage(r, "labelling")->contains("tuning_cents"));
    CHECK(stage(r, "contour_filter")->contains("deleted_frames"));
  }

  TEST_CASE("external contour runs are identical") {
    const auto& perf = performance();
    const auto contour = synth_contour(perf.phrases, 30.0);
    PipelineConfig config;
    config.disable_contour_filter = true;
    const auto a = transcribe_clip(perf.clip, config, &contour);
    const auto b = transcribe_clip(perf.clip, config, &contour);
    CHECK(format_notes(a.notes) == format_notes(b.notes));
    CHECK(diagnostics_jsonl(a) == diagnostics_jsonl(b));
    CHECK(stage(a, "melody")->at("status") == "external");
  }

  TEST_CASE("without contour filtering every extracted contour is segmented") {
    PipelineConfig config;
    config.disable_contour_filter = true;
    const auto r = transcribe_clip(performance().clip, config);
    CHECK(r.segmentation.size() == r.melody.contours.size());
    CHECK(r.vocal.f0 == r.melody.f0);
    CHECK(r.v_raw.empty());
    CHECK(stage(r, "contour_filter")->at("reason") == "disabled");
  }

  TEST_CASE("mono mode equals a duplicated-channel clip with the stereo stages off") {
    const std::vector<Phrase> phrases{{0.2, {{0.5, 62}, {0.7, 66}, {0.5, 64}}}};
    const auto voice = synth_voice(phrases, 2.0);
    PipelineConfig mono_config;
    mono_config.mono_mode = true;
    PipelineConfig stereo_config;
    stereo_config.disable_channel_selection = true;
    stereo_config.disable_contour_filter = true;
    stereo_config.tau_v = 3.0;
    const auto m = transcribe_clip(mono(voice), mono_config);
    const auto s = transcribe_clip(stereo(voice, voice), stereo_config);
    CHECK(m.melody.f0 == s.melody.f0);
    CHECK(m.vocal.f0 == s.vocal.f0);
    CHECK(m.band_ratio_db == s.band_ratio_db);
    CHECK(m.rms == s.rms);
    CHECK(m.chroma == s.chroma);
    CHECK(m.global_pitch == s.global_pitch);
    CHECK(m.tuning.delta_cents == s.tuning.delta_cents);
    CHECK(format_notes(m.unprocessed_notes) == format_notes(s.unprocessed_notes));
    CHECK(format_notes(m.notes) == format_notes(s.notes));
  }

  TEST_CASE("switches change only their own stage") {
    const auto& clip = performance().clip;
    const auto base = transcribe_clip(clip, PipelineConfig{});

    PipelineConfig no_pp;
    no_pp.disable_global_pitch_prob = true;
    const auto pp = transcribe_clip(clip, no_pp);
    CHECK(pp.vocal.f0 == base.vocal.f0);
    CHECK(pp.chroma.empty());
    CHECK(std::all_of(pp.global_pitch.begin(), pp.global_pitch.end(), [](double v) { return v == 1.0 / 12.0; }));
    CHECK(stage(pp, "labelling")->at("global_pitch") == "disabled");

    PipelineConfig no_cs;
    no_cs.disable_channel_selection = true;
    const auto cs = transcribe_clip(clip, no_cs);
    CHECK_FALSE(cs.channel.has_value());
    CHECK(stage(cs, "channel_selection")->at("status") == "skipped");
    CHECK(stage(cs, "contour_filter")->at("status") == "ran");
  }

  TEST_CASE("contour-only transcription") {
    const auto r = transcribe_contour(flat_contour(kScale, 4.0), PipelineConfig{});
    CHECK(stage(r, "contour_filter")->at("reason") == "no audio");
    CHECK(stage(r, "segmentation")->at("volume_detector") == "skipped");
    CHECK(stage(r, "labelling")->at("global_pitch") == "no audio");
    REQUIRE(r.notes.size() == kScale.size());
    for (std::size_t i = 0; i < kScale.size(); ++i) {
      CHECK(r.notes[i].midi == kScale[i].midi);
      CHECK(r.notes[i].onset_s == doctest::Approx(kScale[i].onset_s).epsilon(0.01));
    }
  }

  TEST_CASE("stage failures carry the stage name") {
    TempDir dir;
    try {
      transcribe_track(dir / "missing.wav", PipelineConfig{});
      FAIL("expected PipelineError");
    } catch (const PipelineError& e) {
      CHECK(e.stage() == "input");
      CHECK(std::string(e.what()).rfind("input: ", 0) == 0);
    }
    PipelineConfig config;
    config.contour_path = dir / "missing.csv";
    CHECK_THROWS_AS(transcribe_track(std::nullopt, config), PipelineError);
    CHECK_THROWS_AS(transcribe_track(std::nullopt, PipelineConfig{}), ConfigError);
  }

  TEST_CASE("output files") {
    TempDir dir;
    const auto r = transcribe_clip(performance().clip, PipelineConfig{});
    save_features(dir / "f.csv", r);
    save_voicing(dir / "v.csv", r);
    save_onsets(dir / "o.csv", r);
    save_diagnostics(dir / "d.jsonl", r);
    const auto features = read_text(dir / "f.csv");
    CHECK(features.rfind("time_s,S,B1,", 0) == 0);
    CHECK(std::count(features.begin(), features.end(), '\n') == static_cast<long>(r.melody.num_frames() + 1));
    CHECK(read_text(dir / "v.csv").rfind("time_s,v_raw,v_smooth\n", 0) == 0);
    CHECK(read_text(dir / "o.csv").rfind("time_s,detector\n", 0) == 0);
    CHECK(read_text(dir / "d.jsonl") == diagnostics_jsonl(r));

    const auto again = transcribe_clip(performance().clip, PipelineConfig{});
    save_features(dir / "f2.csv", again);
    CHECK(read_text(dir / "f2.csv") == features);
  }

  TEST_CASE("manifests") {
    TempDir dir;
    write_text(dir / "m.csv", "audio_path,gt_path,contour_path\na.wav,a.csv\n,b.csv,b_f0.csv\n/abs/c.wav,c.csv,\n");
    const auto entries = load_manifest(dir / "m.csv");
    REQUIRE(entries.size() == 3);
    CHECK(entries[0].audio == dir / "a.wav");
    CHECK(entries[0].contour.empty());
    CHECK(entries[1].audio.empty());
    CHECK(entries[1].contour == dir / "b_f0.csv");
    CHECK(entries[2].audio == "/abs/c.wav");

    write_text(dir / "bad.csv", "a.wav\n");
    CHECK_THROWS_AS(load_manifest(dir / "bad.csv"), ConfigError);
    write_text(dir / "none.csv", ",g.csv\n");
    CHECK_THROWS_AS(load_manifest(dir / "none.csv"), ConfigError);
    CHECK_THROWS_AS(load_manifest(dir / "missing.csv"), ConfigError);
  }

  TEST_CASE("batch evaluation") {
    TempDir dir;
    save_contour(dir / "scale_f0.csv", flat_contour(kScale, 4.0));
    save_notes(dir / "scale.csv", kScale);

    SUBCASE("a perfect track scores 1") {
      const auto batch = run_batch({{{}, dir / "scale.csv", dir / "scale_f0.csv"}}, PipelineConfig{});
      REQUIRE(batch.rows.size() == 1);
      CHECK(batch.rows[0].status == "ok");
      CHECK(batch.rows[0].report.FM_N == 1.0);
      CHECK(batch.rows[0].report.FM_On == 1.0);
      CHECK_FALSE(batch.any_failed);
    }
    SUBCASE("an empty manifest gives an empty report") {
      const auto batch = run_batch({}, PipelineConfig{});
      CHECK(batch.rows.empty());
      CHECK_FALSE(batch.any_failed);
      CHECK(format_report(batch.rows) ==
            "track,Pr_V,Rec_V,FM_V,Pr_On,Rec_On,FM_On,Pr_N,Rec_N,FM_N,RPA,transposition_applied,status\n");
    }
    SUBCASE("an unreadable track is flagged and the rest scored") {
      write_text(dir / "junk.wav", "not audio");
      BatchOptions options;
      options.jobs = 3;
      options.notes_dir = dir.path();
      const auto batch = run_batch({{{}, dir / "scale.csv", dir / "scale_f0.csv"},
                                    {dir / "junk.wav", dir / "scale.csv", {}},
                                    {{}, dir / "scale.csv", dir / "scale_f0.csv"}},
                                   PipelineConfig{}, options);
      REQUIRE(batch.rows.size() == 3);
      CHECK(batch.any_failed);
      CHECK(batch.rows[0].status == "ok");
      CHECK(batch.rows[1].status.rfind("failed: input", 0) == 0);
      CHECK(batch.rows[2].report.FM_N == 1.0);
      CHECK(std::filesystem::exists(dir / "0_scale_f0.csv"));
      const auto report = format_report(batch.rows);
      CHECK(report.find("junk.wav,,,,") != std::string::npos);
      CHECK(report.find("\nmean,") != std::string::npos);
    }
  }
}
