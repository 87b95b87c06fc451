#include "cantus/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace cantus {

namespace {
// FFTW's planner is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

MagnitudeSpectrum::MagnitudeSpectrum(std::size_t fft_size) : size_(fft_size) {
  if (fft_size < 2) throw std::invalid_argument("fft size must be at least 2");
  std::lock_guard lock(planner_mutex());
  input_ = fftw_alloc_real(size_);
  auto* out = fftw_alloc_complex(size_ / 2 + 1);
  output_ = out;
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(size_), input_, out, FFTW_ESTIMATE);
  magnitudes_.resize(size_ / 2 + 1);
}

MagnitudeSpectrum::~MagnitudeSpectrum() { release(); }

MagnitudeSpectrum::MagnitudeSpectrum(MagnitudeSpectrum&& other) noexcept
    : size_(std::exchange(other.size_, 0)),
      input_(std::exchange(other.input_, nullptr)),
      output_(std::exchange(other.output_, nullptr)),
      plan_(std::exchange(other.plan_, nullptr)),
      magnitudes_(std::move(other.magnitudes_)) {}

MagnitudeSpectrum& MagnitudeSpectrum::operator=(MagnitudeSpectrum&& other) noexcept {
  if (this != &other) {
    release();
    size_ = std::exchange(other.size_, 0);
    input_ = std::exchange(other.input_, nullptr);
    output_ = std::exchange(other.output_, nullptr);
    plan_ = std::exchange(other.plan_, nullptr);
    magnitudes_ = std::move(other.magnitudes_);
  }
  return *this;
}

void MagnitudeSpectrum::release() noexcept {
  if (plan_ == nullptr && input_ == nullptr && output_ == nullptr) return;
  std::lock_guard lock(planner_mutex());
  if (plan_ != nullptr) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  if (input_ != nullptr) fftw_free(input_);
  if (output_ != nullptr) fftw_free(output_);
  plan_ = nullptr;
  input_ = nullptr;
  output_ = nullptr;
}

std::span<const double> MagnitudeSpectrum::compute(std::span<const double> frame) {
  if (frame.size() != size_) throw std::invalid_argument("frame length does not match fft size");
  std::copy(frame.begin(), frame.end(), input_);
  fftw_execute(static_cast<fftw_plan>(plan_));
  const auto* out = static_cast<const fftw_complex*>(output_);
  for (std::size_t k = 0; k < magnitudes_.size(); ++k) {
    magnitudes_[k] = std::hypot(out[k][0], out[k][1]);
  }
  return magnitudes_;
}

}  // namespace cantus
