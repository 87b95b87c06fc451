#include "cantus/vocal_filter.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace cantus {

GaussianDensity::GaussianDensity(const FeatureVector& mean, const FeatureMatrix& covariance)
    : mean_(mean), covariance_(covariance), llt_(covariance) {
  if (!covariance.isApprox(covariance.transpose()) || llt_.info() != Eigen::Success) {
    throw std::invalid_argument("covariance is not symmetric positive-definite");
  }
  const FeatureMatrix l = llt_.matrixL();
  double log_det = 0.0;
  for (int i = 0; i < 12; ++i) {
    const double d = l(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) throw std::invalid_argument("singular covariance");
    log_det += 2.0 * std::log(d);
  }
  log_norm_ = -0.5 * (12.0 * std::log(2.0 * std::numbers::pi) + log_det);
}

double GaussianDensity::log_density(const FeatureVector& x) const {
  const FeatureVector diff = x - mean_;
  const FeatureVector solved = llt_.matrixL().solve(diff);
  return log_norm_ - 0.5 * solved.squaredNorm();
}

namespace {

FeatureVector to_vector(const BarkVector& b) { return Eigen::Map<const FeatureVector>(b.data()); }

}  // namespace

GaussianDensity fit_gaussian(std::span<const BarkVector> samples) {
  if (samples.empty()) throw std::invalid_argument("cannot fit a Gaussian to no samples");
  const double count = static_cast<double>(samples.size());
  FeatureVector mean = FeatureVector::Zero();
  for (const auto& s : samples) mean += to_vector(s);
  mean /= count;
  FeatureMatrix cov = FeatureMatrix::Zero();
  for (const auto& s : samples) {
    const FeatureVector d = to_vector(s) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= count;
  cov = 0.5 * (cov + cov.transpose());
  const double eps = std::max(1e-6 * cov.trace() / 12.0, 1e-20);
  cov.diagonal().array() += eps;
  return GaussianDensity(mean, cov);
}

ModelFit fit_models(std::span<const BarkVector> features, const PitchContour& contour,
                    std::size_t min_frames) {
  ModelFit fit;
  std::vector<BarkVector> voiced;
  std::vector<BarkVector> unvoiced;
  const std::size_t n = std::min(features.size(), contour.f0.size());
  for (std::size_t i = 0; i < n; ++i) {
    (contour.f0[i] > 0.0 ? voiced : unvoiced).push_back(features[i]);
  }
  fit.voiced_frames = voiced.size();
  fit.unvoiced_frames = unvoiced.size();
  if (voiced.size() < min_frames || unvoiced.size() < min_frames) {
    fit.warning = "contour filtering disabled: " + std::to_string(voiced.size()) + " voiced and " +
                  std::to_string(unvoiced.size()) + " unvoiced frames (need " +
                  std::to_string(min_frames) + " per class)";
    return fit;
  }
  try {
    fit.model = GaussianClassModel{fit_gaussian(voiced), fit_gaussian(unvoiced)};
  } catch (const std::invalid_argument& e) {
    fit.warning = std::string("contour filtering disabled: ") + e.what();
  }
  return fit;
}

std::vector<std::uint8_t> classify_frames(std::span<const BarkVector> features,
                                          const GaussianClassModel& model) {
  std::vector<std::uint8_t> v(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureVector x = to_vector(features[i]);
    v[i] = model.voiced.log_density(x) >= model.unvoiced.log_density(x) ? 1 : 0;
  }
  return v;
}

std::vector<std::uint8_t> smooth_prediction(std::span<const std::uint8_t> v, double window_s,
                                            double frame_rate) {
  const auto width = std::max<long long>(1, std::llround(window_s * frame_rate));
  const long long before = (width - 1) / 2;
  const long long after = width - 1 - before;
  const auto size = static_cast<long long>(v.size());
  std::vector<long long> prefix(v.size() + 1, 0);
  for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + (v[i] ? 1 : 0);
  std::vector<std::uint8_t> out(v.size());
  for (long long i = 0; i < size; ++i) {
    const long long lo = std::max(0LL, i - before);
    const long long hi = std::min(size - 1, i + after);
    const long long ones = prefix[static_cast<std::size_t>(hi + 1)] - prefix[static_cast<std::size_t>(lo)];
    // average >= 0.5 without rounding
    out[static_cast<std::size_t>(i)] = 2 * ones >= hi - lo + 1 ? 1 : 0;
  }
  return out;
}

ContourFilterResult filter_contours(const PitchContour& contour,
                                    std::span<const std::uint8_t> smoothed) {
  ContourFilterResult result;
  result.contour = contour;
  if (result.contour.contours.empty()) result.contour.rebuild();
  std::vector<ContourSpan> kept;
  for (const auto& c : result.contour.contours) {
    bool inside = false;
    for (std::size_t n = c.first; n <= c.last && !inside; ++n) {
      inside = n < smoothed.size() && smoothed[n] != 0;
    }
    if (inside) {
      kept.push_back(c);
      continue;
    }
    ++result.deleted_contours;
    result.deleted_frames += c.length();
    std::fill(result.contour.f0.begin() + static_cast<std::ptrdiff_t>(c.first),
              result.contour.f0.begin() + static_cast<std::ptrdiff_t>(c.last + 1), 0.0);
  }
  result.contour.contours = std::move(kept);
  return result;
}

}  // namespace cantus
