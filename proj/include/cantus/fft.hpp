#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cantus {

/// Magnitude spectrum of real frames of a fixed length, backed by an FFTW
/// real-to-complex plan. One instance per thread.
class MagnitudeSpectrum {
 public:
  explicit MagnitudeSpectrum(std::size_t fft_size);
  ~MagnitudeSpectrum();

  MagnitudeSpectrum(const MagnitudeSpectrum&) = delete;
  MagnitudeSpectrum& operator=(const MagnitudeSpectrum&) = delete;
  MagnitudeSpectrum(MagnitudeSpectrum&& other) noexcept;
  MagnitudeSpectrum& operator=(MagnitudeSpectrum&& other) noexcept;

  std::size_t fft_size() const { return size_; }
  std::size_t num_bins() const { return size_ / 2 + 1; }

  /// |X[k]| for k = 0 .. fft_size/2. The returned view is valid until the
  /// next call.
  std::span<const double> compute(std::span<const double> frame);

 private:
  void release() noexcept;

  std::size_t size_ = 0;
  double* input_ = nullptr;
  void* output_ = nullptr;
  void* plan_ = nullptr;
  std::vector<double> magnitudes_;
};

}  // namespace cantus
