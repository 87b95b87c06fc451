#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace cantus {

/// Every analysis constant in the library is tied to this rate.
inline constexpr int kSampleRate = 44100;

class AudioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded PCM audio, one sample vector per channel, samples in [-1, 1].
struct AudioClip {
  std::vector<std::vector<double>> channels;
  int sample_rate = kSampleRate;

  std::size_t num_channels() const { return channels.size(); }
  std::size_t num_samples() const { return channels.empty() ? 0 : channels.front().size(); }
  double duration() const { return static_cast<double>(num_samples()) / sample_rate; }

  /// Throws std::out_of_range for an invalid index.
  std::span<const double> channel(std::size_t index) const;

  /// Throws AudioError if the channel count, lengths or rate are invalid.
  void validate() const;

  /// Single-channel clip holding the average of all channels.
  AudioClip mixdown() const;
  AudioClip single_channel(std::size_t index) const;
};

/// Analysis frame layout.
///
/// Uncentred grids place frame n over samples [n*hop, n*hop + window). Centred
/// grids shift that span back by window/2 (zeros outside the signal) so frame n
/// is centred on sample n*hop; every centred grid with the same hop then yields
/// the same frame count and frame n means the same instant in every stream.
struct FrameGrid {
  std::size_t window = 4096;
  std::size_t hop = 1024;
  std::size_t zero_pad = 1;
  bool centred = false;

  std::size_t fft_size() const { return window * zero_pad; }
  std::size_t num_bins() const { return fft_size() / 2 + 1; }
  std::size_t num_frames(std::size_t num_samples) const;

  /// Index of the first signal sample covered by frame n (negative when the
  /// frame starts in the leading zero padding of a centred grid).
  long long frame_start(std::size_t n) const;

  double frame_time(std::size_t n, int sample_rate = kSampleRate) const {
    return static_cast<double>(n * hop) / sample_rate;
  }
  double frame_rate(int sample_rate = kSampleRate) const {
    return static_cast<double>(sample_rate) / static_cast<double>(hop);
  }

  double bin_frequency(std::size_t k, int sample_rate = kSampleRate) const {
    return static_cast<double>(k) * sample_rate / static_cast<double>(fft_size());
  }

  /// k(f) = round(f * m * N / fs).
  std::size_t bin_for(double frequency, int sample_rate = kSampleRate) const;

  void validate() const;
};

std::vector<double> hann_window(std::size_t length);

/// Random-access reader of windowed, zero-padded frames over one channel.
/// Holds a view of the signal; the caller keeps the samples alive.
class FrameReader {
 public:
  FrameReader(std::span<const double> signal, const FrameGrid& grid);

  std::size_t size() const { return num_frames_; }
  const FrameGrid& grid() const { return grid_; }

  /// Hann-windowed frame followed by zeros; out.size() must equal fft_size().
  void read(std::size_t n, std::span<double> out) const;

  /// Plain (unwindowed) samples of frame n; out.size() must equal window.
  void read_raw(std::size_t n, std::span<double> out) const;

 private:
  std::span<const double> signal_;
  FrameGrid grid_;
  std::size_t num_frames_;
  std::vector<double> window_;
};

/// Materialises every frame. Meant for short clips; long analyses should use
/// FrameReader directly.
std::vector<std::vector<double>> frame_signal(const AudioClip& clip, std::size_t channel,
                                              const FrameGrid& grid);

/// Reads a RIFF/WAVE file: integer PCM (16/24/32 bit) or IEEE float32,
/// one or two channels, 44.1 kHz. Integer samples are divided by 2^(bits-1).
AudioClip load_audio(const std::filesystem::path& path);

enum class SampleFormat { pcm16, pcm24, float32 };

void save_wav(const std::filesystem::path& path, const AudioClip& clip,
              SampleFormat format = SampleFormat::pcm16);

}  // namespace cantus
