#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cantus/pipeline.hpp"

namespace py = pybind11;
using namespace cantus;

namespace {

using Samples = py::array_t<double, py::array::c_style | py::array::forcecast>;

AudioClip clip_from_array(const Samples& samples, int sample_rate) {
  AudioClip clip;
  clip.sample_rate = sample_rate;
  if (samples.ndim() == 1) {
    clip.channels.emplace_back(samples.data(), samples.data() + samples.shape(0));
  } else if (samples.ndim() == 2) {
    const auto count = static_cast<std::size_t>(samples.shape(1));
    for (py::ssize_t c = 0; c < samples.shape(0); ++c) {
      const double* row = samples.data() + c * samples.shape(1);
      clip.channels.emplace_back(row, row + count);
    }
  } else {
    throw py::value_error("samples must be 1-D (mono) or 2-D (channels, samples)");
  }
  return clip;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

/// Keyword arguments use the command-line option names with underscores.
PipelineConfig config_from_kwargs(const py::kwargs& kwargs) {
  PipelineConfig config;
  for (const auto& [key, value] : kwargs) {
    const auto name = py::str(key).cast<std::string>();
    std::string text;
    if (py::isinstance<py::bool_>(value)) {
      text = value.cast<bool>() ? "true" : "false";
    } else {
      text = py::str(value).cast<std::string>();
    }
    set_config_option(config, name, text);
  }
  return config;
}

py::dict track_dict(const TrackResult& r) {
  py::dict d;
  d["notes"] = r.notes;
  d["channel"] = r.channel ? py::object(py::int_(*r.channel)) : py::object(py::none());
  d["tuning_cents"] = r.tuning.delta_cents;
  d["a4_hz"] = r.tuning.a4_hz;
  d["frame_rate"] = r.melody.frame_rate();
  d["melody_f0"] = to_array(r.melody.f0);
  d["vocal_f0"] = to_array(r.vocal.f0);
  d["global_pitch"] = r.global_pitch;
  d["diagnostics"] = diagnostics_jsonl(r);
  return d;
}

py::dict report_dict(const EvalReport& r) {
  py::dict d;
  d["Pr_V"] = r.Pr_V;
  d["Rec_V"] = r.Rec_V;
  d["FM_V"] = r.FM_V;
  d["Pr_On"] = r.Pr_On;
  d["Rec_On"] = r.Rec_On;
  d["FM_On"] = r.FM_On;
  d["Pr_N"] = r.Pr_N;
  d["Rec_N"] = r.Rec_N;
  d["FM_N"] = r.FM_N;
  d["RPA"] = r.RPA;
  d["transposition_applied"] = r.transposition_applied;
  return d;
}

PitchContour contour_from_arrays(const Samples& times, const Samples& f0) {
  if (times.ndim() != 1 || f0.ndim() != 1 || times.shape(0) != f0.shape(0)) {
    throw py::value_error("times and f0 must be 1-D arrays of equal length");
  }
  const auto n = static_cast<std::size_t>(times.shape(0));
  return contour_from_rows(std::span<const double>(times.data(), n), std::span<const double>(f0.data(), n));
}

}  // namespace

PYBIND11_MODULE(_cantus, m) {
  m.doc() = "Note transcription of accompanied and a cappella singing";
  m.attr("SAMPLE_RATE") = kSampleRate;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<PipelineError>(m, "PipelineError", PyExc_RuntimeError);
  py::register_exception<AudioError>(m, "AudioError", PyExc_ValueError);
  py::register_exception<NoteFileError>(m, "NoteFileError", PyExc_ValueError);
  py::register_exception<ContourError>(m, "ContourError", PyExc_ValueError);

  py::class_<NoteEvent>(m, "NoteEvent")
      .def(py::init<double, double, int>(), py::arg("onset_s"), py::arg("duration_s"), py::arg("midi"))
      .def_readwrite("onset_s", &NoteEvent::onset_s)
      .def_readwrite("duration_s", &NoteEvent::duration_s)
      .def_readwrite("midi", &NoteEvent::midi)
      .def_property_readonly("offset_s", &NoteEvent::offset_s)
      .def("__eq__", [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset_s == b.onset_s && a.duration_s == b.duration_s && a.midi == b.midi;
      })
      .def("__repr__", [](const NoteEvent& n) {
        return "NoteEvent(onset_s=" + std::to_string(n.onset_s) + ", duration_s=" + std::to_string(n.duration_s) +
               ", midi=" + std::to_string(n.midi) + ")";
      });

  m.def("load_audio", [](const std::filesystem::path& path) {
    const auto clip = load_audio(path);
    py::array_t<double> out({static_cast<py::ssize_t>(clip.num_channels()), static_cast<py::ssize_t>(clip.num_samples())});
    auto w = out.mutable_unchecked<2>();
    for (std::size_t c = 0; c < clip.num_channels(); ++c) {
      for (std::size_t i = 0; i < clip.num_samples(); ++i) w(c, i) = clip.channels[c][i];
    }
    return py::make_tuple(out, clip.sample_rate);
  }, py::arg("path"), "Returns (samples[channels, n], sample_rate).");

  m.def("select_channel", [](const Samples& samples, int sample_rate) {
    const auto sel = select_channel(clip_from_array(samples, sample_rate));
    return py::make_tuple(sel.channel, sel.mean_ratio);
  }, py::arg("samples"), py::arg("sample_rate") = kSampleRate,
     "Channel with the highest mean spectral band ratio, and the per-channel means in dB.");

  m.def("extract_melody", [](const Samples& samples, double tau_v, int sample_rate) {
    const auto clip = clip_from_array(samples, sample_rate);
    if (clip.num_channels() != 1) throw py::value_error("extract_melody expects a mono signal");
    const auto contour = extract_predominant(clip, 0, tau_v);
    std::vector<double> times(contour.num_frames());
    for (std::size_t n = 0; n < times.size(); ++n) times[n] = contour.frame_time(n);
    return py::make_tuple(to_array(times), to_array(contour.f0));
  }, py::arg("samples"), py::arg("tau_v") = kDefaultVoicingTolerance, py::arg("sample_rate") = kSampleRate,
     "Predominant pitch per frame as (times, f0); 0 Hz marks non-melody frames.");

  m.def("estimate_tuning", [](const Samples& times, const Samples& f0, double smoothing_s) {
    const auto t = estimate_tuning(contour_from_arrays(times, f0), smoothing_s);
    return py::make_tuple(t.delta_cents, t.a4_hz);
  }, py::arg("times"), py::arg("f0"), py::arg("smoothing_s") = 0.25,
     "Global tuning deviation in cents and the tuned A4 in Hz.");

  m.def("transcribe", [](const Samples& samples, int sample_rate, const py::kwargs& kwargs) {
    const auto config = config_from_kwargs(kwargs);
    const auto clip = clip_from_array(samples, sample_rate);
    TrackResult r;
    {
      py::gil_scoped_release release;
      r = transcribe_clip(clip, config);
    }
    return track_dict(r);
  }, py::arg("samples"), py::arg("sample_rate") = kSampleRate,
     "Transcribes a signal; keyword arguments are pipeline options (mono=True, tau_v=0.5, ...).");

  m.def("transcribe_file", [](const std::filesystem::path& path, const py::kwargs& kwargs) {
    const auto config = config_from_kwargs(kwargs);
    TrackResult r;
    {
      py::gil_scoped_release release;
      r = transcribe_track(path, config);
    }
    return track_dict(r);
  }, py::arg("path"));

  m.def("transcribe_contour", [](const Samples& times, const Samples& f0, const py::kwargs& kwargs) {
    const auto config = config_from_kwargs(kwargs);
    return track_dict(transcribe_contour(contour_from_arrays(times, f0), config));
  }, py::arg("times"), py::arg("f0"), "Transcribes a pitch contour without audio.");

  m.def("evaluate", [](const std::vector<NoteEvent>& est, const std::vector<NoteEvent>& gt) {
    return report_dict(transposition_corrected_eval(est, gt, {}));
  }, py::arg("est"), py::arg("gt"), "Transposition-corrected metrics of est against gt.");

  m.def("onset_metrics", [](const std::vector<double>& est, const std::vector<double>& gt, double tol_s) {
    const auto p = onset_metrics(est, gt, tol_s);
    return py::make_tuple(p.precision, p.recall, p.f_measure);
  }, py::arg("est"), py::arg("gt"), py::arg("tol_s") = kOnsetTolerance);

  m.def("note_metrics", [](const std::vector<NoteEvent>& est, const std::vector<NoteEvent>& gt) {
    const auto p = note_metrics(est, gt);
    return py::make_tuple(p.precision, p.recall, p.f_measure);
  }, py::arg("est"), py::arg("gt"));

  m.def("post_process", [](std::vector<NoteEvent> notes, int range_semitones, double min_duration_s) {
    return post_process(std::move(notes), PostProcessParams{range_semitones, min_duration_s});
  }, py::arg("notes"), py::arg("range_semitones") = 8, py::arg("min_duration_s") = 0.05);

  m.def("load_notes", &load_notes, py::arg("path"));
  m.def("save_notes", [](const std::filesystem::path& path, const std::vector<NoteEvent>& notes) { save_notes(path, notes); },
        py::arg("path"), py::arg("notes"));
  m.def("save_midi", [](const std::filesystem::path& path, const std::vector<NoteEvent>& notes) { save_midi(path, notes); },
        py::arg("path"), py::arg("notes"));
  m.def("midi_bytes", [](const std::vector<NoteEvent>& notes) {
    const auto bytes = midi_file_bytes(notes);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }, py::arg("notes"));
}
