#include "cantus/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace cantus {

std::vector<double> to_cents(std::span<const double> f0, double ref_hz) {
  std::vector<double> out(f0.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < f0.size(); ++i) {
    if (f0[i] > 0.0) out[i] = 1200.0 * std::log2(f0[i] / ref_hz);
  }
  return out;
}

std::vector<std::size_t> local_maxima(std::span<const double> x) {
  std::vector<std::size_t> out;
  std::size_t i = 1;
  while (i + 1 < x.size()) {
    if (!(x[i] > x[i - 1])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < x.size() && x[j + 1] == x[i]) ++j;
    if (j + 1 < x.size() && x[j + 1] < x[i]) out.push_back(i);
    i = j + 1;
  }
  return out;
}

std::vector<std::size_t> local_minima(std::span<const double> x) {
  std::vector<double> neg(x.size());
  std::transform(x.begin(), x.end(), neg.begin(), [](double v) { return -v; });
  return local_maxima(neg);
}

std::string_view detector_name(Detector d) {
  switch (d) {
    case Detector::envelope: return "envelope";
    case Detector::gauss_deriv: return "gauss_deriv";
    case Detector::rms_decay: return "rms_decay";
    case Detector::pitch_dip: return "pitch_dip";
  }
  return "unknown";
}

std::vector<PitchChange> envelope_changes(std::span<const double> cents, double frame_rate,
                                          const OnsetParams& params) {
  std::vector<PitchChange> out;
  if (cents.size() < 3) return out;
  const auto peaks = local_maxima(cents);
  for (std::size_t p = 0; p + 1 < peaks.size(); ++p) {
    const std::size_t a = peaks[p];
    const std::size_t b = peaks[p + 1];
    const double gap_s = static_cast<double>(b - a) / frame_rate;
    if (std::abs(cents[b] - cents[a]) > params.envelope_min_cents &&
        gap_s <= params.envelope_max_gap_s + 1e-12) {
      out.push_back({a, b});
    }
  }
  return out;
}

std::vector<std::size_t> envelope_onsets(std::span<const double> cents, double frame_rate,
                                         const OnsetParams& params) {
  std::vector<std::size_t> out;
  for (const auto& change : envelope_changes(cents, frame_rate, params)) out.push_back(change.midpoint());
  return out;
}

std::vector<double> gaussian_derivative_response(std::span<const double> cents, double frame_rate,
                                                 double sigma_s, double support_s) {
  const double sigma = sigma_s * frame_rate;
  const auto half = static_cast<std::size_t>(std::llround(support_s * frame_rate));
  std::vector<double> weight(half + 1, 0.0);
  // Scaled so an ideal 100-cent step peaks near 4.7 while a 50-cent, 5 Hz
  // vibrato stays near 3.2.
  const double norm = 1.0 / (sigma * sigma * sigma * std::sqrt(2.0));
  for (std::size_t k = 1; k <= half; ++k) {
    const double kk = static_cast<double>(k);
    weight[k] = kk * norm * std::exp(-kk * kk / (2.0 * sigma * sigma));
  }
  const auto size = static_cast<long long>(cents.size());
  const auto at = [&](long long i) {
    return cents[static_cast<std::size_t>(std::clamp(i, 0LL, size - 1))];
  };
  std::vector<double> out(cents.size(), 0.0);
  for (long long n = 0; n < size; ++n) {
    double acc = 0.0;
    for (std::size_t k = 1; k <= half; ++k) {
      const auto kk = static_cast<long long>(k);
      acc += weight[k] * (at(n + kk) - at(n - kk));
    }
    out[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

std::vector<std::size_t> gauss_deriv_onsets(std::span<const double> cents, double frame_rate,
                                            const OnsetParams& params) {
  auto response = gaussian_derivative_response(cents, frame_rate, params.gauss_sigma_s,
                                               params.gauss_support_s);
  for (auto& r : response) r = std::abs(r);
  std::vector<std::size_t> out;
  for (std::size_t i : local_maxima(response)) {
    if (response[i] > params.gauss_threshold) out.push_back(i);
  }
  return out;
}

std::vector<double> local_rms_fluctuation(std::span<const double> rms, std::size_t half_window) {
  std::vector<double> prefix(rms.size() + 1, 0.0);
  for (std::size_t i = 0; i < rms.size(); ++i) prefix[i + 1] = prefix[i] + rms[i];
  std::vector<double> out(rms.size(), 0.0);
  for (std::size_t n = 0; n < rms.size(); ++n) {
    const std::size_t lo = n >= half_window ? n - half_window : 0;
    const std::size_t hi = std::min(rms.size() - 1, n + half_window);
    const double mean = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    if (!(mean > 0.0)) continue;
    out[n] = rms[n] > 0.0 ? std::max(20.0 * std::log10(rms[n] / mean), -300.0) : -300.0;
  }
  return out;
}

std::vector<std::size_t> rms_decay_onsets(std::span<const double> fluctuation, std::size_t first,
                                          std::size_t last, const OnsetParams& params) {
  std::vector<std::size_t> out;
  for (std::size_t i : local_minima(fluctuation)) {
    if (i > first && i <= last && fluctuation[i] < params.rms_threshold_db) out.push_back(i);
  }
  return out;
}

std::vector<double> z_scores(std::span<const double> cents) {
  if (cents.size() < 2) return {};
  const double n = static_cast<double>(cents.size());
  const double mean = std::accumulate(cents.begin(), cents.end(), 0.0) / n;
  double var = 0.0;
  for (double c : cents) var += (c - mean) * (c - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-9)) return {};
  std::vector<double> z(cents.size());
  for (std::size_t i = 0; i < cents.size(); ++i) z[i] = (cents[i] - mean) / sd;
  return z;
}

std::vector<std::size_t> pitch_dip_onsets(std::span<const double> cents, const OnsetParams& params) {
  const auto z = z_scores(cents);
  std::vector<std::size_t> out;
  for (std::size_t i : local_minima(z)) {
    if (z[i] < params.dip_threshold) out.push_back(i);
  }
  return out;
}

std::vector<Onset> merge_onsets(std::vector<Onset> onsets, double frame_rate,
                                const OnsetParams& params) {
  std::sort(onsets.begin(), onsets.end(), [](const Onset& a, const Onset& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.source < b.source;
  });
  std::vector<Onset> out;
  for (const auto& o : onsets) {
    if (!out.empty()) {
      const double gap_s = static_cast<double>(o.frame - out.back().frame) / frame_rate;
      if (gap_s < params.merge_s - 1e-12) continue;
    }
    out.push_back(o);
  }
  return out;
}

SegmentSplit segment_contour(ContourSpan contour, std::span<const Onset> onsets, double frame_rate,
                             const OnsetParams& params) {
  SegmentSplit split;
  std::vector<std::size_t> cuts;
  for (const auto& o : onsets) {
    if (o.frame > contour.first && o.frame <= contour.last) cuts.push_back(o.frame);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::size_t start = contour.first;
  cuts.push_back(contour.last + 1);
  for (std::size_t cut : cuts) {
    const ContourSpan seg{start, cut - 1};
    const double dur_s = static_cast<double>(seg.length()) / frame_rate;
    (dur_s + 1e-12 < params.min_segment_s ? split.dropped : split.kept).push_back(seg);
    start = cut;
  }
  return split;
}

std::vector<ContourSegmentation> segment_contours(const PitchContour& contour,
                                                  std::span<const double> rms,
                                                  const OnsetParams& params) {
  const double rate = contour.frame_rate();
  const auto cents = to_cents(contour.f0);
  const auto fluctuation = local_rms_fluctuation(rms, params.rms_half_window);
  auto spans = contour.contours;
  if (spans.empty()) spans = rebuild_contours(contour.f0);

  std::vector<ContourSegmentation> out;
  out.reserve(spans.size());
  for (const auto& span : spans) {
    const std::span<const double> c(cents.data() + span.first, span.length());
    std::vector<Onset> found;
    const auto steps = gauss_deriv_onsets(c, rate, params);
    for (std::size_t i : steps) found.push_back({span.first + i, Detector::gauss_deriv});
    // The midpoint only brackets the change; a located step between the same
    // maxima already marks it.
    for (const auto& change : envelope_changes(c, rate, params)) {
      const bool located = std::any_of(steps.begin(), steps.end(),
                                       [&](std::size_t i) { return i >= change.from && i <= change.to; });
      if (!located) found.push_back({span.first + change.midpoint(), Detector::envelope});
    }

    // Pitch dips are judged against the statistics of a single note, so search
    // between the interval onsets rather than over the whole contour.
    std::vector<std::size_t> bounds{span.first};
    for (const auto& o : found) {
      if (o.frame > span.first && o.frame <= span.last) bounds.push_back(o.frame);
    }
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
    bounds.push_back(span.last + 1);
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      const std::span<const double> piece(cents.data() + bounds[b], bounds[b + 1] - bounds[b]);
      for (std::size_t i : pitch_dip_onsets(piece, params)) {
        found.push_back({bounds[b] + i, Detector::pitch_dip});
      }
    }

    if (!fluctuation.empty()) {
      const std::size_t last = std::min(span.last, fluctuation.size() - 1);
      for (std::size_t i : rms_decay_onsets(fluctuation, span.first, last, params)) {
        found.push_back({i, Detector::rms_decay});
      }
    }

    std::erase_if(found, [&](const Onset& o) { return o.frame <= span.first || o.frame > span.last; });
    ContourSegmentation seg;
    seg.contour = span;
    seg.onsets = merge_onsets(std::move(found), rate, params);
    seg.segments = segment_contour(span, seg.onsets, rate, params);
    out.push_back(std::move(seg));
  }
  return out;
}

}  // namespace cantus
