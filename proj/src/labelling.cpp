#include "cantus/labelling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "cantus/csv.hpp"

namespace cantus {

double tuned_reference(double delta_cents) { return 440.0 * std::exp2(delta_cents / 1200.0); }

double wrap_deviation(double cents) {
  double r = std::fmod(cents, 100.0);
  if (r > 50.0) r -= 100.0;
  if (r <= -50.0) r += 100.0;
  return r;
}

TuningEstimate estimate_tuning(const PitchContour& contour, double smoothing_s) {
  auto spans = contour.contours.empty() ? rebuild_contours(contour.f0) : contour.contours;
  const auto width = std::max<long long>(1, std::llround(smoothing_s * contour.frame_rate()));
  const long long before = (width - 1) / 2;
  const long long after = width - 1 - before;

  double sum_sin = 0.0;
  double sum_cos = 0.0;
  std::size_t count = 0;
  std::vector<double> cents;
  for (const auto& span : spans) {
    cents.clear();
    for (std::size_t n = span.first; n <= span.last; ++n) {
      if (contour.f0[n] > 0.0) cents.push_back(1200.0 * std::log2(contour.f0[n] / 440.0));
    }
    const auto len = static_cast<long long>(cents.size());
    std::vector<double> prefix(cents.size() + 1, 0.0);
    for (std::size_t i = 0; i < cents.size(); ++i) prefix[i + 1] = prefix[i] + cents[i];
    for (long long i = 0; i < len; ++i) {
      double value = cents[static_cast<std::size_t>(i)];
      if (width > 1) {
        const long long lo = std::max(0LL, i - before);
        const long long hi = std::min(len - 1, i + after);
        value = (prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)]) /
                static_cast<double>(hi - lo + 1);
      }
      const double angle = wrap_deviation(value) * 2.0 * std::numbers::pi / 100.0;
      sum_sin += std::sin(angle);
      sum_cos += std::cos(angle);
      ++count;
    }
  }
  TuningEstimate t;
  if (count == 0) return t;
  const double mean_angle = std::atan2(sum_sin, sum_cos);
  t.delta_cents = wrap_deviation(mean_angle * 100.0 / (2.0 * std::numbers::pi));
  t.a4_hz = tuned_reference(t.delta_cents);
  return t;
}

std::vector<double> remap_to_tuned_cents(const PitchContour& contour, const TuningEstimate& tuning) {
  std::vector<double> out(contour.f0.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (contour.f0[i] > 0.0) out[i] = 1200.0 * std::log2(contour.f0[i] / tuning.a4_hz);
  }
  return out;
}

ChromaVector global_pitch_classes(std::span<const ChromaVector> chroma) {
  ChromaVector avg{};
  for (const auto& c : chroma) {
    for (std::size_t k = 0; k < 12; ++k) avg[k] += c[k];
  }
  double total = 0.0;
  for (double v : avg) total += v;
  if (!(total > 0.0) || !std::isfinite(total)) {
    avg.fill(1.0 / 12.0);
    return avg;
  }
  // Dividing by the frame count first would cancel here.
  for (double& v : avg) v /= total;
  return avg;
}

LocalPitchProbability local_pitch_probability(std::span<const double> tuned_cents) {
  LocalPitchProbability out;
  std::vector<long long> bins;
  for (double c : tuned_cents) {
    if (std::isfinite(c)) bins.push_back(std::llround(c / 100.0));
  }
  if (bins.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(bins.begin(), bins.end());
  const long long lo = *lo_it;
  const long long hi = *hi_it;
  std::vector<double> hist(static_cast<std::size_t>(hi - lo + 1), 0.0);
  for (long long b : bins) hist[static_cast<std::size_t>(b - lo)] += 1.0;
  for (double& h : hist) h /= static_cast<double>(bins.size());

  const double sigma = kLocalSigmaSemitones;
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  out.first_bin = static_cast<int>(lo) - kLocalMarginBins;
  out.values.assign(hist.size() + 2 * kLocalMarginBins, 0.0);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double k = static_cast<double>(out.bin(i));
    double acc = 0.0;
    for (std::size_t j = 0; j < hist.size(); ++j) {
      if (hist[j] == 0.0) continue;
      const double d = k - static_cast<double>(lo + static_cast<long long>(j));
      acc += hist[j] * norm * std::exp(-d * d / (2.0 * sigma * sigma));
    }
    out.values[i] = acc;
  }
  return out;
}

int pitch_class_of_bin(int bin) { return ((bin % 12) + 12) % 12; }

int assign_pitch(const LocalPitchProbability& local, const ChromaVector& global) {
  if (local.values.empty()) throw std::invalid_argument("empty local pitch probability");
  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t i = 0; i < local.values.size(); ++i) {
    const double v = local.values[i] * global[static_cast<std::size_t>(pitch_class_of_bin(local.bin(i)))];
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return 69 + local.bin(best);
}

double median_pitch(std::span<const NoteEvent> notes) {
  if (notes.empty()) return 0.0;
  std::vector<int> p;
  p.reserve(notes.size());
  for (const auto& n : notes) p.push_back(n.midi);
  std::sort(p.begin(), p.end());
  const std::size_t m = p.size() / 2;
  return p.size() % 2 ? p[m] : 0.5 * (p[m - 1] + p[m]);
}

std::vector<NoteEvent> post_process(std::vector<NoteEvent> notes, const PostProcessParams& params) {
  const auto by_onset = [](const NoteEvent& a, const NoteEvent& b) {
    return a.onset_s != b.onset_s ? a.onset_s < b.onset_s : a.midi < b.midi;
  };
  // The median moves once notes are removed or transposed, so repeat until
  // the rules leave the list unchanged.
  for (int pass = 0; pass < 64; ++pass) {
    if (notes.empty()) break;
    const double median = median_pitch(notes);
    const double range = static_cast<double>(params.range_semitones);
    std::vector<NoteEvent> next;
    next.reserve(notes.size());
    for (auto n : notes) {
      if (static_cast<double>(n.midi) < median - range) continue;
      if (static_cast<double>(n.midi) > median + range) n.midi -= 12;
      if (n.duration_s + 1e-12 < params.min_duration_s) continue;
      next.push_back(n);
    }
    std::stable_sort(next.begin(), next.end(), by_onset);
    const bool same = next == notes;
    notes = std::move(next);
    if (same) break;
  }
  return notes;
}

std::vector<NoteEvent> label_segments(std::span<const ContourSpan> segments,
                                      std::span<const double> tuned_cents, const ChromaVector& global,
                                      const FrameGrid& grid, int sample_rate) {
  std::vector<NoteEvent> notes;
  const double hop_s = static_cast<double>(grid.hop) / sample_rate;
  for (const auto& seg : segments) {
    if (seg.last >= tuned_cents.size()) continue;
    const auto local = local_pitch_probability(tuned_cents.subspan(seg.first, seg.length()));
    if (local.values.empty()) continue;
    notes.push_back({grid.frame_time(seg.first, sample_rate),
                     static_cast<double>(seg.length()) * hop_s, assign_pitch(local, global)});
  }
  return notes;
}

std::vector<NoteEvent> transcribe_segments(std::span<const ContourSpan> segments,
                                           std::span<const double> tuned_cents,
                                           const ChromaVector& global, const FrameGrid& grid,
                                           int sample_rate, const PostProcessParams& params) {
  return post_process(label_segments(segments, tuned_cents, global, grid, sample_rate), params);
}

std::string format_notes(std::span<const NoteEvent> notes) {
  std::ostringstream out;
  out << "onset_s,duration_s,midi\n";
  for (const auto& n : notes) {
    out << csv::fixed(n.onset_s, 6) << ',' << csv::fixed(n.duration_s, 6) << ',' << n.midi << '\n';
  }
  return out.str();
}

void save_notes(const std::filesystem::path& path, std::span<const NoteEvent> notes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NoteFileError("cannot write " + path.string());
  out << format_notes(notes);
}

std::vector<NoteEvent> load_notes(const std::filesystem::path& path) {
  csv::Table table;
  try {
    table = csv::read(path);
  } catch (const std::runtime_error& e) {
    throw NoteFileError(e.what());
  }
  std::vector<NoteEvent> notes;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto where = path.string() + " row " + std::to_string(i + 1);
    if (row.size() < 3) throw NoteFileError(where + ": expected onset_s,duration_s,midi");
    const auto onset = csv::parse_double(row[0]);
    const auto dur = csv::parse_double(row[1]);
    const auto midi = csv::parse_double(row[2]);
    if (!onset || !dur || !midi) throw NoteFileError(where + ": non-numeric field");
    if (*onset < 0.0 || *dur < 0.0) throw NoteFileError(where + ": negative time");
    if (*midi != std::round(*midi)) throw NoteFileError(where + ": midi must be an integer");
    notes.push_back({*onset, *dur, static_cast<int>(*midi)});
  }
  return notes;
}

namespace {

void put_varlen(std::vector<unsigned char>& out, std::uint32_t v) {
  unsigned char buf[5];
  int n = 0;
  buf[n++] = static_cast<unsigned char>(v & 0x7F);
  while (v >>= 7) buf[n++] = static_cast<unsigned char>((v & 0x7F) | 0x80);
  while (n > 0) out.push_back(buf[--n]);
}

void put_be(std::vector<unsigned char>& out, std::uint32_t v, int bytes) {
  for (int i = bytes - 1; i >= 0; --i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

std::vector<unsigned char> midi_file_bytes(std::span<const NoteEvent> notes) {
  constexpr std::uint32_t kDivision = 480;
  constexpr std::uint32_t kTempo = 500000;  // microseconds per quarter
  constexpr double kTicksPerSecond = kDivision * 1e6 / kTempo;

  struct Event {
    std::uint32_t tick;
    bool on;
    unsigned char key;
  };
  std::vector<Event> events;
  for (const auto& n : notes) {
    const auto key = static_cast<unsigned char>(std::clamp(n.midi, 0, 127));
    const auto on = static_cast<std::uint32_t>(std::llround(std::max(0.0, n.onset_s) * kTicksPerSecond));
    const auto off = static_cast<std::uint32_t>(std::llround(std::max(0.0, n.offset_s()) * kTicksPerSecond));
    events.push_back({on, true, key});
    events.push_back({std::max(on, off), false, key});
  }
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    return a.tick != b.tick ? a.tick < b.tick : (!a.on && b.on);
  });

  std::vector<unsigned char> track;
  put_varlen(track, 0);
  track.insert(track.end(), {0xFF, 0x51, 0x03});
  put_be(track, kTempo, 3);
  std::uint32_t now = 0;
  for (const auto& e : events) {
    put_varlen(track, e.tick - now);
    now = e.tick;
    track.push_back(e.on ? 0x90 : 0x80);
    track.push_back(e.key);
    track.push_back(e.on ? 80 : 0);
  }
  put_varlen(track, 0);
  track.insert(track.end(), {0xFF, 0x2F, 0x00});

  std::vector<unsigned char> out{'M', 'T', 'h', 'd'};
  put_be(out, 6, 4);
  put_be(out, 0, 2);
  put_be(out, 1, 2);
  put_be(out, kDivision, 2);
  out.insert(out.end(), {'M', 'T', 'r', 'k'});
  put_be(out, static_cast<std::uint32_t>(track.size()), 4);
  out.insert(out.end(), track.begin(), track.end());
  return out;
}

void save_midi(const std::filesystem::path& path, std::span<const NoteEvent> notes) {
  const auto bytes = midi_file_bytes(notes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NoteFileError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace cantus
