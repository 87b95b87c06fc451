#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cantus/melody.hpp"

namespace cantus {

inline constexpr double kReferenceHz = 440.0;

/// 1200*log2(f/ref) on voiced frames, NaN elsewhere.
std::vector<double> to_cents(std::span<const double> f0, double ref_hz = kReferenceHz);

/// Indices with a strictly lower neighbour on both sides. A plateau counts once,
/// at its first frame, when the values on either side of it are lower.
std::vector<std::size_t> local_maxima(std::span<const double> x);
std::vector<std::size_t> local_minima(std::span<const double> x);

enum class Detector { envelope, gauss_deriv, rms_decay, pitch_dip };
std::string_view detector_name(Detector d);

struct Onset {
  std::size_t frame = 0;
  Detector source = Detector::envelope;

  friend bool operator==(const Onset&, const Onset&) = default;
};

struct OnsetParams {
  double envelope_min_cents = 80.0;
  double envelope_max_gap_s = 0.25;
  double gauss_sigma_s = 0.0435;
  double gauss_support_s = 0.15;
  double gauss_threshold = 4.0;
  std::size_t rms_half_window = 50;
  double rms_threshold_db = -10.0;
  double dip_threshold = -2.0;
  double merge_s = 0.05;
  double min_segment_s = 0.05;
};

// The detectors below take one contour's cent values and return frame
// indices relative to its first frame.

/// Adjacent pitch maxima that differ by more than the interval threshold and
/// lie within the time bound.
struct PitchChange {
  std::size_t from = 0;
  std::size_t to = 0;
  std::size_t midpoint() const { return (from + to) / 2; }
};
std::vector<PitchChange> envelope_changes(std::span<const double> cents, double frame_rate,
                                          const OnsetParams& params = {});

/// Midpoints of envelope_changes.
std::vector<std::size_t> envelope_onsets(std::span<const double> cents, double frame_rate,
                                         const OnsetParams& params = {});

/// Convolution with a Gaussian derivative, weights k/(sqrt(2)*sigma^3) *
/// exp(-k^2 / 2 sigma^2) with sigma in frames, and edge replication at both
/// ends of the contour.
std::vector<double> gaussian_derivative_response(std::span<const double> cents, double frame_rate,
                                                 double sigma_s = 0.0435, double support_s = 0.15);

std::vector<std::size_t> gauss_deriv_onsets(std::span<const double> cents, double frame_rate,
                                            const OnsetParams& params = {});

/// 20*log10(rms[n] / mean(rms[n-h..n+h])) with windows truncated at the track
/// edges. -300 dB stands in for log(0); frames where the local mean is 0 get 0 dB.
std::vector<double> local_rms_fluctuation(std::span<const double> rms, std::size_t half_window = 50);

/// Local minima of the rms fluctuation below the threshold that fall strictly
/// inside [first, last]. Absolute frame indices.
std::vector<std::size_t> rms_decay_onsets(std::span<const double> fluctuation, std::size_t first,
                                          std::size_t last, const OnsetParams& params = {});

/// (x - mean) / stddev with the population deviation; empty when the variance
/// is zero.
std::vector<double> z_scores(std::span<const double> cents);

std::vector<std::size_t> pitch_dip_onsets(std::span<const double> cents,
                                          const OnsetParams& params = {});

/// Sorted union with onsets closer than merge_s to the previous kept onset
/// dropped. Same-frame duplicates keep the detector listed first in Detector.
std::vector<Onset> merge_onsets(std::vector<Onset> onsets, double frame_rate,
                                const OnsetParams& params = {});

struct SegmentSplit {
  std::vector<ContourSpan> kept;
  std::vector<ContourSpan> dropped;  // shorter than the minimum note duration
};

/// Splits [contour.first, contour.last] at the given absolute onset frames.
SegmentSplit segment_contour(ContourSpan contour, std::span<const Onset> onsets, double frame_rate,
                             const OnsetParams& params = {});

struct ContourSegmentation {
  ContourSpan contour;
  std::vector<Onset> onsets;  // merged, absolute frames
  SegmentSplit segments;
};

/// Runs all detectors on every contour. An envelope onset is dropped when a
/// Gaussian-derivative onset already lies between its two maxima. Interval
/// onsets split the contour first; pitch dips are searched within each of those
/// pieces. `rms` may be empty, which disables the volume detector.
std::vector<ContourSegmentation> segment_contours(const PitchContour& contour,
                                                  std::span<const double> rms,
                                                  const OnsetParams& params = {});

}  // namespace cantus
