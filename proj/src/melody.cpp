#include "cantus/melody.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "cantus/csv.hpp"
#include "cantus/fft.hpp"

namespace cantus {

std::vector<ContourSpan> rebuild_contours(std::span<const double> f0) {
  std::vector<ContourSpan> out;
  std::size_t n = 0;
  while (n < f0.size()) {
    if (f0[n] > 0.0) {
      const std::size_t first = n;
      while (n + 1 < f0.size() && f0[n + 1] > 0.0) ++n;
      out.push_back({first, n});
    }
    ++n;
  }
  return out;
}

std::size_t PitchContour::voiced_frames() const {
  return static_cast<std::size_t>(std::count_if(f0.begin(), f0.end(), [](double f) { return f > 0.0; }));
}

namespace {

struct SpectralPeak {
  double frequency;
  double amplitude;
};

std::size_t grid_size(const MelodySettings& s) {
  return static_cast<std::size_t>(std::floor(1200.0 * std::log2(s.max_hz / s.min_hz) / s.grid_cents + 1e-9)) + 1;
}

std::vector<SpectralPeak> find_peaks(std::span<const double> mag, const FrameGrid& grid,
                                     const MelodySettings& s, int sample_rate) {
  std::vector<SpectralPeak> peaks;
  if (mag.size() < 3) return peaks;
  const double top = *std::max_element(mag.begin(), mag.end());
  if (!(top > 0.0)) return peaks;
  const double floor = top * std::pow(10.0, -s.peak_floor_db / 20.0);
  const double highest = std::min(s.max_hz * s.harmonics * std::exp2(s.kernel_cents / 1200.0),
                                  0.5 * sample_rate);
  const std::size_t last = std::min(mag.size() - 2, grid.bin_for(highest, sample_rate));
  const double per_bin = static_cast<double>(sample_rate) / static_cast<double>(grid.fft_size());
  for (std::size_t k = 1; k <= last; ++k) {
    const double b = mag[k];
    if (b < floor || !(b > mag[k - 1]) || b < mag[k + 1]) continue;
    double offset = 0.0;
    double amplitude = b;
    if (mag[k - 1] > 0.0 && mag[k + 1] > 0.0) {
      const double l = 20.0 * std::log10(mag[k - 1]);
      const double c = 20.0 * std::log10(b);
      const double r = 20.0 * std::log10(mag[k + 1]);
      const double denom = l - 2.0 * c + r;
      if (denom < 0.0) {
        offset = std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
        amplitude = std::pow(10.0, (c - 0.25 * (l - r) * offset) / 20.0);
      }
    }
    peaks.push_back({(static_cast<double>(k) + offset) * per_bin, amplitude});
  }
  return peaks;
}

// Visits every (grid index, weight, fractional position) contribution of the
// peaks' harmonic sub-multiples.
template <typename Visit>
void for_each_contribution(const std::vector<SpectralPeak>& peaks, const MelodySettings& s,
                           std::size_t bins, Visit&& visit) {
  const double half = s.kernel_cents / s.grid_cents;
  for (const auto& p : peaks) {
    double harmonic_weight = 1.0;
    for (int h = 1; h <= s.harmonics; ++h, harmonic_weight *= s.harmonic_decay) {
      const double f = p.frequency / h;
      const double pos = 1200.0 * std::log2(f / s.min_hz) / s.grid_cents;
      if (pos < -half || pos > static_cast<double>(bins - 1) + half) continue;
      const auto lo = static_cast<long long>(std::ceil(pos - half));
      const auto hi = static_cast<long long>(std::floor(pos + half));
      for (long long i = std::max(lo, 0LL); i <= std::min(hi, static_cast<long long>(bins) - 1); ++i) {
        const double d = std::abs(static_cast<double>(i) - pos) / half;
        if (d >= 1.0) continue;
        const double k = std::cos(0.5 * std::numbers::pi * d);
        visit(static_cast<std::size_t>(i), k * k * harmonic_weight * p.amplitude, pos);
      }
    }
  }
}

}  // namespace

std::vector<double> salience_grid(const MelodySettings& settings) {
  std::vector<double> grid(grid_size(settings));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = settings.min_hz * std::exp2(static_cast<double>(i) * settings.grid_cents / 1200.0);
  }
  return grid;
}

std::vector<double> salience_function(std::span<const double> magnitudes, const FrameGrid& grid,
                                      const MelodySettings& settings, int sample_rate) {
  const std::size_t bins = grid_size(settings);
  std::vector<double> sal(bins, 0.0);
  const auto peaks = find_peaks(magnitudes, grid, settings, sample_rate);
  for_each_contribution(peaks, settings, bins,
                        [&](std::size_t i, double w, double) { sal[i] += w; });
  return sal;
}

std::optional<FramePitch> frame_pitch(std::span<const double> magnitudes, const FrameGrid& grid,
                                      const MelodySettings& settings, int sample_rate) {
  const std::size_t bins = grid_size(settings);
  const auto peaks = find_peaks(magnitudes, grid, settings, sample_rate);
  if (peaks.empty()) return std::nullopt;
  std::vector<double> sal(bins, 0.0);
  for_each_contribution(peaks, settings, bins,
                        [&](std::size_t i, double w, double) { sal[i] += w; });
  const auto best = static_cast<std::size_t>(std::max_element(sal.begin(), sal.end()) - sal.begin());
  if (!(sal[best] > 0.0)) return std::nullopt;

  // Refine by mean shift over the harmonic positions with the same kernel, so
  // the estimate moves continuously instead of jumping with the grid point.
  std::vector<std::pair<double, double>> parts;  // (position, weight)
  for (const auto& p : peaks) {
    double harmonic_weight = 1.0;
    for (int h = 1; h <= settings.harmonics; ++h, harmonic_weight *= settings.harmonic_decay) {
      const double pos = 1200.0 * std::log2(p.frequency / h / settings.min_hz) / settings.grid_cents;
      parts.emplace_back(pos, harmonic_weight * p.amplitude);
    }
  }
  const double half = settings.kernel_cents / settings.grid_cents;
  double refined = static_cast<double>(best);
  for (int iter = 0; iter < 8; ++iter) {
    double weight = 0.0;
    double position = 0.0;
    for (const auto& [pos, w] : parts) {
      const double d = std::abs(pos - refined) / half;
      if (d >= 1.0) continue;
      const double k = std::cos(0.5 * std::numbers::pi * d);
      weight += k * k * w;
      position += k * k * w * pos;
    }
    if (!(weight > 0.0)) break;
    const double next = position / weight;
    const bool done = std::abs(next - refined) < 1e-6;
    refined = next;
    if (done) break;
  }
  const double f0 = std::clamp(settings.min_hz * std::exp2(refined * settings.grid_cents / 1200.0),
                               settings.min_hz, settings.max_hz);
  return FramePitch{f0, sal[best]};
}

MelodyCandidates melody_candidates(const AudioClip& clip, std::size_t channel,
                                   const MelodySettings& settings) {
  MelodyCandidates out;
  out.grid = kMelodyGrid;
  out.sample_rate = clip.sample_rate;
  FrameReader reader(clip.channel(channel), out.grid);
  MagnitudeSpectrum spectrum(out.grid.fft_size());
  out.f0.assign(reader.size(), 0.0);
  out.salience.assign(reader.size(), 0.0);
  std::vector<double> frame(out.grid.fft_size());
  for (std::size_t n = 0; n < reader.size(); ++n) {
    reader.read(n, frame);
    if (auto p = frame_pitch(spectrum.compute(frame), out.grid, settings, clip.sample_rate)) {
      out.f0[n] = p->f0;
      out.salience[n] = p->salience;
    }
  }

  // Link frames into pitch-continuous contours.
  const double min_frames = settings.min_contour_s * out.grid.frame_rate(clip.sample_rate);
  std::size_t n = 0;
  while (n < out.f0.size()) {
    if (out.f0[n] > 0.0) {
      const std::size_t first = n;
      while (n + 1 < out.f0.size() && out.f0[n + 1] > 0.0 &&
             std::abs(1200.0 * std::log2(out.f0[n + 1] / out.f0[n])) <= settings.link_cents) {
        ++n;
      }
      const ContourSpan span{first, n};
      if (static_cast<double>(span.length()) >= min_frames) {
        out.contours.push_back(span);
      } else {
        for (std::size_t i = first; i <= n; ++i) out.f0[i] = out.salience[i] = 0.0;
      }
    }
    ++n;
  }
  return out;
}

PitchContour apply_voicing(const MelodyCandidates& candidates, double tau_v) {
  PitchContour out;
  out.grid = candidates.grid;
  out.sample_rate = candidates.sample_rate;
  out.f0.assign(candidates.f0.size(), 0.0);

  std::vector<double> means;
  means.reserve(candidates.contours.size());
  for (const auto& c : candidates.contours) {
    double s = 0.0;
    for (std::size_t n = c.first; n <= c.last; ++n) s += candidates.salience[n];
    means.push_back(s / static_cast<double>(c.length()));
  }
  if (!means.empty()) {
    const double mu = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
    double var = 0.0;
    for (double m : means) var += (m - mu) * (m - mu);
    const double sigma = std::sqrt(var / static_cast<double>(means.size()));
    const double threshold = mu - tau_v * sigma;
    for (std::size_t i = 0; i < means.size(); ++i) {
      if (means[i] < threshold) continue;
      const auto& c = candidates.contours[i];
      out.contours.push_back(c);
      std::copy(candidates.f0.begin() + static_cast<std::ptrdiff_t>(c.first),
                candidates.f0.begin() + static_cast<std::ptrdiff_t>(c.last + 1),
                out.f0.begin() + static_cast<std::ptrdiff_t>(c.first));
    }
  }
  return out;
}

PitchContour extract_predominant(const AudioClip& clip, std::size_t channel, double tau_v,
                                 const MelodySettings& settings) {
  return apply_voicing(melody_candidates(clip, channel, settings), tau_v);
}

PitchContour contour_from_rows(std::span<const double> times, std::span<const double> f0,
                               const FrameGrid& grid, std::optional<std::size_t> num_frames,
                               int sample_rate) {
  if (times.empty()) throw ContourError("no contour rows");
  if (times.size() != f0.size()) throw ContourError("time and pitch columns differ in length");
  const double hop_s = static_cast<double>(grid.hop) / sample_rate;
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double d = times[i] - times[i - 1];
    if (!(d > 0.0)) throw ContourError("non-monotonic timestamps at row " + std::to_string(i + 1));
    if (std::abs(d - hop_s) > 0.1 * hop_s) {
      throw ContourError("row spacing " + std::to_string(d) + " s differs from the analysis hop");
    }
  }
  PitchContour out;
  out.grid = grid;
  out.sample_rate = sample_rate;
  const auto frame_of = [&](double t) {
    return static_cast<long long>(std::llround(t / hop_s));
  };
  const std::size_t frames = num_frames.value_or(
      static_cast<std::size_t>(std::max(frame_of(times.back()), 0LL)) + 1);
  out.f0.assign(frames, 0.0);
  for (std::size_t i = 0; i < times.size(); ++i) {
    const long long n = frame_of(times[i]);
    if (n < 0 || static_cast<std::size_t>(n) >= frames) continue;
    const double f = f0[i];
    out.f0[static_cast<std::size_t>(n)] = (std::isfinite(f) && f > 0.0) ? f : 0.0;
  }
  out.rebuild();
  return out;
}

PitchContour load_contour(const std::filesystem::path& path, const FrameGrid& grid,
                          std::optional<std::size_t> num_frames, int sample_rate) {
  const auto table = csv::read(path);
  std::vector<double> times;
  std::vector<double> f0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    if (row.size() < 2) throw ContourError("contour row " + std::to_string(i + 1) + " needs two columns");
    const auto t = csv::parse_double(row[0]);
    if (!t) throw ContourError("bad timestamp in contour row " + std::to_string(i + 1));
    const auto f = csv::parse_double(row[1]);
    times.push_back(*t);
    f0.push_back(f ? *f : std::numeric_limits<double>::quiet_NaN());
  }
  return contour_from_rows(times, f0, grid, num_frames, sample_rate);
}

void save_contour(const std::filesystem::path& path, const PitchContour& contour) {
  std::ofstream out(path);
  if (!out) throw ContourError("cannot write " + path.string());
  out << "time_s,f0_hz\n";
  for (std::size_t n = 0; n < contour.f0.size(); ++n) {
    out << csv::fixed(contour.frame_time(n), 6) << ',' << csv::fixed(contour.f0[n], 4) << '\n';
  }
}

}  // namespace cantus
