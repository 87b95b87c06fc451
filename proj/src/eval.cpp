#include "cantus/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cantus/csv.hpp"

namespace cantus {

double f_measure(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Prf prf_from_counts(std::size_t matches, std::size_t estimated, std::size_t reference) {
  Prf r;
  r.precision = estimated ? static_cast<double>(matches) / static_cast<double>(estimated) : 0.0;
  r.recall = reference ? static_cast<double>(matches) / static_cast<double>(reference) : 0.0;
  r.f_measure = f_measure(r.precision, r.recall);
  return r;
}

Prf voicing_metrics(std::span<const std::uint8_t> est_voiced, std::span<const std::uint8_t> gt_voiced) {
  const std::size_t n = std::max(est_voiced.size(), gt_voiced.size());
  std::size_t est = 0, gt = 0, both = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool e = i < est_voiced.size() && est_voiced[i];
    const bool g = i < gt_voiced.size() && gt_voiced[i];
    est += e;
    gt += g;
    both += e && g;
  }
  if (est == 0 && gt == 0) return {1.0, 1.0, 1.0};
  return prf_from_counts(both, est, gt);
}

std::vector<std::pair<std::size_t, std::size_t>> match_pairs(
    std::size_t est_count, std::size_t ref_count,
    const std::function<bool(std::size_t, std::size_t)>& compatible,
    const std::function<double(std::size_t, std::size_t)>& cost) {
  // Candidate lists, closest first, so that augmenting paths prefer close pairs.
  std::vector<std::vector<std::size_t>> adj(est_count);
  for (std::size_t i = 0; i < est_count; ++i) {
    for (std::size_t j = 0; j < ref_count; ++j) {
      if (compatible(i, j)) adj[i].push_back(j);
    }
    if (cost) {
      std::stable_sort(adj[i].begin(), adj[i].end(),
                       [&](std::size_t a, std::size_t b) { return cost(i, a) < cost(i, b); });
    }
  }
  constexpr auto kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> ref_owner(ref_count, kNone);
  std::vector<char> seen(ref_count);
  const std::function<bool(std::size_t)> augment = [&](std::size_t i) {
    for (std::size_t j : adj[i]) {
      if (seen[j]) continue;
      seen[j] = 1;
      if (ref_owner[j] == kNone || augment(ref_owner[j])) {
        ref_owner[j] = i;
        return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < est_count; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    augment(i);
  }
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t j = 0; j < ref_count; ++j) {
    if (ref_owner[j] != kNone) pairs.emplace_back(ref_owner[j], j);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

namespace {

// Absorbs decimal round-off in tolerance comparisons such as 1.15 - 1.0.
constexpr double kSlack = 1e-9;

}  // namespace

std::size_t count_onset_matches(std::span<const double> est, std::span<const double> gt, double tol_s) {
  return match_pairs(
             est.size(), gt.size(),
             [&](std::size_t i, std::size_t j) { return std::abs(est[i] - gt[j]) <= tol_s + kSlack; },
             [&](std::size_t i, std::size_t j) { return std::abs(est[i] - gt[j]); })
      .size();
}

Prf onset_metrics(std::span<const double> est, std::span<const double> gt, double tol_s) {
  return prf_from_counts(count_onset_matches(est, gt, tol_s), est.size(), gt.size());
}

bool note_matches(const NoteEvent& est, const NoteEvent& gt, double onset_tol_s, double duration_tol) {
  return est.midi == gt.midi && std::abs(est.onset_s - gt.onset_s) <= onset_tol_s + kSlack &&
         std::abs(est.duration_s - gt.duration_s) <= duration_tol * gt.duration_s + kSlack;
}

Prf note_metrics(std::span<const NoteEvent> est, std::span<const NoteEvent> gt) {
  const auto pairs = match_pairs(
      est.size(), gt.size(), [&](std::size_t i, std::size_t j) { return note_matches(est[i], gt[j]); },
      [&](std::size_t i, std::size_t j) { return std::abs(est[i].onset_s - gt[j].onset_s); });
  return prf_from_counts(pairs.size(), est.size(), gt.size());
}

std::vector<int> rasterise_notes(std::span<const NoteEvent> notes, std::size_t num_frames,
                                 const FrameGrid& grid, int sample_rate) {
  std::vector<int> out(num_frames, -1);
  const double rate = grid.frame_rate(sample_rate);
  for (const auto& n : notes) {
    // frames n with n/rate in [onset, offset)
    const auto first = static_cast<long long>(std::ceil(n.onset_s * rate - 1e-9));
    const auto end = static_cast<long long>(std::ceil(n.offset_s() * rate - 1e-9));
    for (long long f = std::max(first, 0LL); f < std::min(end, static_cast<long long>(num_frames)); ++f) {
      out[static_cast<std::size_t>(f)] = n.midi;
    }
  }
  return out;
}

double raw_pitch_accuracy(std::span<const int> est_midi, std::span<const int> gt_midi) {
  const std::size_t n = std::max(est_midi.size(), gt_midi.size());
  if (n == 0) return 1.0;
  std::size_t good = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const int e = i < est_midi.size() ? est_midi[i] : -1;
    const int g = i < gt_midi.size() ? gt_midi[i] : -1;
    good += (e < 0 && g < 0) || (e >= 0 && e == g);
  }
  return static_cast<double>(good) / static_cast<double>(n);
}

EvalReport transposition_corrected_eval(std::span<const NoteEvent> est, std::span<const NoteEvent> gt,
                                        const EvalOptions& options) {
  const auto shifted = [&](int by) {
    std::vector<NoteEvent> out(est.begin(), est.end());
    for (auto& n : out) n.midi += by;
    return out;
  };
  int best_shift = 0;
  Prf best = note_metrics(est, gt);
  for (int by : {-1, 1}) {
    const auto candidate = shifted(by);
    const Prf m = note_metrics(candidate, gt);
    if (m.f_measure > best.f_measure) {
      best = m;
      best_shift = by;
    }
  }
  const auto chosen = shifted(best_shift);

  EvalReport r;
  r.transposition_applied = best_shift;
  r.Pr_N = best.precision;
  r.Rec_N = best.recall;
  r.FM_N = best.f_measure;

  std::vector<double> est_on, gt_on;
  for (const auto& n : chosen) est_on.push_back(n.onset_s);
  for (const auto& n : gt) gt_on.push_back(n.onset_s);
  const Prf on = onset_metrics(est_on, gt_on);
  r.Pr_On = on.precision;
  r.Rec_On = on.recall;
  r.FM_On = on.f_measure;

  const double rate = options.grid.frame_rate(options.sample_rate);
  double end_s = 0.0;
  for (const auto& n : chosen) end_s = std::max(end_s, n.offset_s());
  for (const auto& n : gt) end_s = std::max(end_s, n.offset_s());
  std::size_t frames = static_cast<std::size_t>(std::floor(end_s * rate)) + 1;
  frames = std::max(frames, options.est_voicing.size());

  const auto est_frames = rasterise_notes(chosen, frames, options.grid, options.sample_rate);
  const auto gt_frames = rasterise_notes(gt, frames, options.grid, options.sample_rate);
  std::vector<std::uint8_t> est_voiced(frames, 0), gt_voiced(frames, 0);
  for (std::size_t i = 0; i < frames; ++i) {
    est_voiced[i] = options.est_voicing.empty()
                        ? static_cast<std::uint8_t>(est_frames[i] >= 0)
                        : static_cast<std::uint8_t>(i < options.est_voicing.size() && options.est_voicing[i]);
    gt_voiced[i] = gt_frames[i] >= 0;
  }
  const Prf v = voicing_metrics(est_voiced, gt_voiced);
  r.Pr_V = v.precision;
  r.Rec_V = v.recall;
  r.FM_V = v.f_measure;
  r.RPA = raw_pitch_accuracy(est_frames, gt_frames);
  return r;
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  EvalReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.Pr_V += r.Pr_V;
    m.Rec_V += r.Rec_V;
    m.FM_V += r.FM_V;
    m.Pr_On += r.Pr_On;
    m.Rec_On += r.Rec_On;
    m.FM_On += r.FM_On;
    m.Pr_N += r.Pr_N;
    m.Rec_N += r.Rec_N;
    m.FM_N += r.FM_N;
    m.RPA += r.RPA;
  }
  const double n = static_cast<double>(reports.size());
  for (double* f : {&m.Pr_V, &m.Rec_V, &m.FM_V, &m.Pr_On, &m.Rec_On, &m.FM_On, &m.Pr_N, &m.Rec_N,
                    &m.FM_N, &m.RPA}) {
    *f /= n;
  }
  return m;
}

namespace {

std::string metric_fields(const EvalReport& r) {
  std::string s;
  for (double v : {r.Pr_V, r.Rec_V, r.FM_V, r.Pr_On, r.Rec_On, r.FM_On, r.Pr_N, r.Rec_N, r.FM_N, r.RPA}) {
    s += csv::fixed(v, 6);
    s += ',';
  }
  return s;
}

std::string sanitise(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

std::string format_report(std::span<const ReportRow> rows) {
  std::ostringstream out;
  out << "track,Pr_V,Rec_V,FM_V,Pr_On,Rec_On,FM_On,Pr_N,Rec_N,FM_N,RPA,transposition_applied,status\n";
  std::vector<EvalReport> ok;
  for (const auto& row : rows) {
    out << sanitise(row.track) << ',';
    if (row.status == "ok") {
      ok.push_back(row.report);
      out << metric_fields(row.report) << row.report.transposition_applied << ",ok\n";
    } else {
      out << ",,,,,,,,,,," << sanitise(row.status) << '\n';
    }
  }
  if (!ok.empty()) out << "mean," << metric_fields(mean_report(ok)) << ",ok\n";
  return out.str();
}

void save_report(const std::filesystem::path& path, std::span<const ReportRow> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_report(rows);
}

}  // namespace cantus
