#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cantus/melody.hpp"
#include "cantus/spectral.hpp"

namespace cantus {

using FeatureVector = Eigen::Matrix<double, 12, 1>;
using FeatureMatrix = Eigen::Matrix<double, 12, 12>;

/// Multivariate normal density over bark-band energies.
class GaussianDensity {
 public:
  GaussianDensity() = default;
  /// Factorises the covariance; throws std::invalid_argument unless it is
  /// symmetric positive-definite.
  GaussianDensity(const FeatureVector& mean, const FeatureMatrix& covariance);

  const FeatureVector& mean() const { return mean_; }
  const FeatureMatrix& covariance() const { return covariance_; }

  /// log p(x) with the full d-dimensional normalising constant.
  double log_density(const FeatureVector& x) const;

 private:
  FeatureVector mean_ = FeatureVector::Zero();
  FeatureMatrix covariance_ = FeatureMatrix::Identity();
  Eigen::LLT<FeatureMatrix> llt_;
  double log_norm_ = 0.0;
};

/// Maximum-likelihood fit with covariance + eps*I, eps = 1e-6 * trace / 12.
GaussianDensity fit_gaussian(std::span<const BarkVector> samples);

struct GaussianClassModel {
  GaussianDensity voiced;
  GaussianDensity unvoiced;
};

struct ModelFit {
  std::optional<GaussianClassModel> model;
  std::size_t voiced_frames = 0;
  std::size_t unvoiced_frames = 0;
  std::string warning;  // set when filtering has to be disabled
};

inline constexpr std::size_t kMinFramesPerClass = 13;

/// Melody frames train the voiced class, the rest the unvoiced class. Frames
/// beyond the shorter of the two sequences are ignored.
ModelFit fit_models(std::span<const BarkVector> features, const PitchContour& contour,
                    std::size_t min_frames = kMinFramesPerClass);

/// v[n] = 1 iff log p+(x[n]) >= log p-(x[n]).
std::vector<std::uint8_t> classify_frames(std::span<const BarkVector> features,
                                          const GaussianClassModel& model);

/// Centred moving average over window_s seconds (truncated at the edges),
/// binarised at 0.5.
std::vector<std::uint8_t> smooth_prediction(std::span<const std::uint8_t> v, double window_s,
                                            double frame_rate);

struct ContourFilterResult {
  PitchContour contour;
  std::size_t deleted_contours = 0;
  std::size_t deleted_frames = 0;
};

/// Deletes every contour with no frame inside the smoothed vocal regions.
ContourFilterResult filter_contours(const PitchContour& contour,
                                    std::span<const std::uint8_t> smoothed);

}  // namespace cantus
