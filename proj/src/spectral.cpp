#include "cantus/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cantus/fft.hpp"

namespace cantus {

BinRange bins_strictly_inside(double lo_hz, double hi_hz, const FrameGrid& grid,
                              int sample_rate) {
  const double per_bin = static_cast<double>(sample_rate) / static_cast<double>(grid.fft_size());
  const std::size_t top = grid.num_bins() - 1;
  BinRange r;
  auto first = static_cast<long long>(std::floor(lo_hz / per_bin));
  while (first > 0 && grid.bin_frequency(static_cast<std::size_t>(first - 1), sample_rate) > lo_hz) --first;
  while (grid.bin_frequency(static_cast<std::size_t>(std::max(first, 0LL)), sample_rate) <= lo_hz) ++first;
  auto last = static_cast<long long>(std::ceil(hi_hz / per_bin));
  while (last >= 0 && grid.bin_frequency(static_cast<std::size_t>(last), sample_rate) >= hi_hz) --last;
  last = std::min<long long>(last, static_cast<long long>(top));
  if (first < 0 || last < first) return BinRange{};
  r.first = static_cast<std::size_t>(first);
  r.last = static_cast<std::size_t>(last);
  return r;
}

std::optional<double> band_ratio_db(std::span<const double> magnitudes, BinRange upper,
                                    BinRange lower) {
  if (magnitudes.empty()) return std::nullopt;
  const double peak = *std::max_element(magnitudes.begin(), magnitudes.end());
  if (!(peak > 0.0)) return std::nullopt;
  // Normalising by the frame maximum before summing keeps S independent of gain.
  double up = 0.0;
  double low = 0.0;
  if (!upper.empty()) {
    for (std::size_t k = upper.first; k <= upper.last && k < magnitudes.size(); ++k) up += magnitudes[k] / peak;
  }
  if (!lower.empty()) {
    for (std::size_t k = lower.first; k <= lower.last && k < magnitudes.size(); ++k) low += magnitudes[k] / peak;
  }
  if (!(up > 0.0) || !(low > 0.0)) return std::nullopt;
  return 20.0 * std::log10(up / low);
}

std::optional<double> BandRatioTrack::mean() const {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t n = 0; n < db.size(); ++n) {
    if (!silent[n]) {
      sum += db[n];
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / static_cast<double>(count);
}

BandRatioTrack spectral_band_ratio(const AudioClip& clip, std::size_t channel,
                                   const FrameGrid& grid) {
  FrameReader reader(clip.channel(channel), grid);
  MagnitudeSpectrum spectrum(grid.fft_size());
  const BinRange upper = bins_strictly_inside(kRatioUpperLow, kRatioUpperHigh, grid, clip.sample_rate);
  const BinRange lower = bins_strictly_inside(kRatioLowerLow, kRatioLowerHigh, grid, clip.sample_rate);

  BandRatioTrack track;
  track.grid = grid;
  track.db.resize(reader.size(), 0.0);
  track.silent.resize(reader.size(), true);
  std::vector<double> frame(grid.fft_size());
  for (std::size_t n = 0; n < reader.size(); ++n) {
    reader.read(n, frame);
    if (auto s = band_ratio_db(spectrum.compute(frame), upper, lower)) {
      track.db[n] = *s;
      track.silent[n] = false;
    }
  }
  return track;
}

ChannelSelection select_channel(const AudioClip& clip) {
  ChannelSelection sel;
  for (std::size_t c = 0; c < clip.num_channels(); ++c) {
    sel.mean_ratio.push_back(spectral_band_ratio(clip, c).mean());
  }
  std::optional<double> best;
  for (std::size_t c = 0; c < sel.mean_ratio.size(); ++c) {
    const auto& m = sel.mean_ratio[c];
    if (m && (!best || *m > *best)) {
      best = m;
      sel.channel = c;
    }
  }
  return sel;
}

BarkVector bark_frame(std::span<const double> magnitudes, const FrameGrid& grid, int sample_rate) {
  BarkVector out{};
  for (std::size_t b = 0; b < out.size(); ++b) {
    const BinRange r = bins_strictly_inside(kBarkEdges[b], kBarkEdges[b + 1], grid, sample_rate);
    if (r.empty()) continue;
    double e = 0.0;
    for (std::size_t k = r.first; k <= r.last && k < magnitudes.size(); ++k) e += magnitudes[k] * magnitudes[k];
    out[b] = e;
  }
  return out;
}

std::vector<BarkVector> bark_energies(const AudioClip& clip, std::size_t channel,
                                      const FrameGrid& grid) {
  FrameReader reader(clip.channel(channel), grid);
  MagnitudeSpectrum spectrum(grid.fft_size());
  std::vector<BarkVector> out(reader.size());
  std::vector<double> frame(grid.fft_size());
  for (std::size_t n = 0; n < reader.size(); ++n) {
    reader.read(n, frame);
    out[n] = bark_frame(spectrum.compute(frame), grid, clip.sample_rate);
  }
  return out;
}

std::vector<double> rms_track(const AudioClip& clip, std::size_t channel, const FrameGrid& grid) {
  FrameReader reader(clip.channel(channel), grid);
  std::vector<double> out(reader.size());
  std::vector<double> frame(grid.window);
  for (std::size_t n = 0; n < reader.size(); ++n) {
    reader.read_raw(n, frame);
    const double energy = std::inner_product(frame.begin(), frame.end(), frame.begin(), 0.0);
    out[n] = std::sqrt(energy / static_cast<double>(grid.window));
  }
  return out;
}

int pitch_class_of(double frequency, double tuning_ref) {
  const auto semitone = static_cast<long long>(std::llround(12.0 * std::log2(frequency / tuning_ref)));
  return static_cast<int>(((semitone % 12) + 12) % 12);
}

ChromaVector chroma_frame(std::span<const double> magnitudes, const FrameGrid& grid,
                          double tuning_ref, const ChromaSettings& settings, int sample_rate) {
  ChromaVector chroma{};
  const BinRange r = bins_strictly_inside(settings.low_hz, settings.high_hz, grid, sample_rate);
  if (r.empty()) return chroma;
  for (std::size_t k = r.first; k <= r.last && k < magnitudes.size(); ++k) {
    chroma[static_cast<std::size_t>(pitch_class_of(grid.bin_frequency(k, sample_rate), tuning_ref))] +=
        magnitudes[k];
  }
  return chroma;
}

std::vector<ChromaVector> chroma_track(const AudioClip& clip, std::size_t channel,
                                       double tuning_ref, const FrameGrid& grid,
                                       const ChromaSettings& settings) {
  if (!(tuning_ref > 0.0)) throw std::invalid_argument("tuning reference must be positive");
  FrameReader reader(clip.channel(channel), grid);
  MagnitudeSpectrum spectrum(grid.fft_size());
  std::vector<ChromaVector> out(reader.size());
  std::vector<double> frame(grid.fft_size());
  for (std::size_t n = 0; n < reader.size(); ++n) {
    reader.read(n, frame);
    out[n] = chroma_frame(spectrum.compute(frame), grid, tuning_ref, settings, clip.sample_rate);
  }
  return out;
}

}  // namespace cantus
