#include "cantus/audio_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

namespace cantus {

std::span<const double> AudioClip::channel(std::size_t index) const {
  if (index >= channels.size()) {
    throw std::out_of_range("channel index " + std::to_string(index) + " out of range");
  }
  return channels[index];
}

void AudioClip::validate() const {
  if (channels.empty() || channels.size() > 2) {
    throw AudioError("unsupported channel count " + std::to_string(channels.size()));
  }
  if (sample_rate <= 0) {
    throw AudioError("invalid sample rate");
  }
  for (const auto& c : channels) {
    if (c.size() != channels.front().size()) {
      throw AudioError("channels differ in length");
    }
  }
}

AudioClip AudioClip::mixdown() const {
  AudioClip out;
  out.sample_rate = sample_rate;
  if (channels.empty()) return out;
  std::vector<double> mix(num_samples(), 0.0);
  for (const auto& c : channels) {
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] += c[i];
  }
  const double scale = 1.0 / static_cast<double>(channels.size());
  for (auto& v : mix) v *= scale;
  out.channels.push_back(std::move(mix));
  return out;
}

AudioClip AudioClip::single_channel(std::size_t index) const {
  AudioClip out;
  out.sample_rate = sample_rate;
  auto c = channel(index);
  out.channels.emplace_back(c.begin(), c.end());
  return out;
}

std::size_t FrameGrid::num_frames(std::size_t num_samples) const {
  if (centred) {
    return num_samples == 0 ? 0 : (num_samples - 1) / hop + 1;
  }
  if (num_samples < window) return 0;
  return (num_samples - window) / hop + 1;
}

long long FrameGrid::frame_start(std::size_t n) const {
  const auto start = static_cast<long long>(n * hop);
  return centred ? start - static_cast<long long>(window / 2) : start;
}

std::size_t FrameGrid::bin_for(double frequency, int sample_rate) const {
  return static_cast<std::size_t>(
      std::llround(frequency * static_cast<double>(zero_pad * window) / sample_rate));
}

void FrameGrid::validate() const {
  if (window == 0 || hop == 0 || zero_pad == 0) {
    throw std::invalid_argument("frame grid needs window, hop and zero padding >= 1");
  }
}

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t i = 0; i < length; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(length));
  }
  return w;
}

FrameReader::FrameReader(std::span<const double> signal, const FrameGrid& grid)
    : signal_(signal), grid_(grid), num_frames_(0) {
  grid_.validate();
  num_frames_ = grid_.num_frames(signal.size());
  window_ = hann_window(grid_.window);
}

void FrameReader::read_raw(std::size_t n, std::span<double> out) const {
  if (out.size() != grid_.window) throw std::invalid_argument("raw frame buffer size mismatch");
  const long long start = grid_.frame_start(n);
  const auto length = static_cast<long long>(signal_.size());
  for (std::size_t i = 0; i < grid_.window; ++i) {
    const long long s = start + static_cast<long long>(i);
    out[i] = (s >= 0 && s < length) ? signal_[static_cast<std::size_t>(s)] : 0.0;
  }
}

void FrameReader::read(std::size_t n, std::span<double> out) const {
  if (out.size() != grid_.fft_size()) throw std::invalid_argument("frame buffer size mismatch");
  read_raw(n, out.first(grid_.window));
  for (std::size_t i = 0; i < grid_.window; ++i) out[i] *= window_[i];
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(grid_.window), out.end(), 0.0);
}

std::vector<std::vector<double>> frame_signal(const AudioClip& clip, std::size_t channel,
                                              const FrameGrid& grid) {
  FrameReader reader(clip.channel(channel), grid);
  std::vector<std::vector<double>> frames(reader.size(), std::vector<double>(grid.fft_size()));
  for (std::size_t n = 0; n < reader.size(); ++n) reader.read(n, frames[n]);
  return frames;
}

// --- RIFF/WAVE -------------------------------------------------------------

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

struct WavFormat {
  std::uint16_t code = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const unsigned char* p, const WavFormat& fmt) {
  if (fmt.code == kFormatFloat) {
    float f;
    std::uint32_t raw = read_u32(p);
    std::memcpy(&f, &raw, sizeof f);
    return std::clamp(static_cast<double>(f), -1.0, 1.0);
  }
  switch (fmt.bits) {
    case 16:
      return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32:
      return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
    default:
      throw AudioError("unsupported encoding");
  }
}

}  // namespace

AudioClip load_audio(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw AudioError("cannot open " + path.string());
  std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>()};
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw AudioError("not a RIFF/WAVE file: " + path.string());
  }

  WavFormat fmt;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min<std::size_t>(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw AudioError("truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      fmt.code = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.block_align = read_u16(f + 12);
      fmt.bits = read_u16(f + 14);
      if (fmt.code == kFormatExtensible) {
        if (available < 26) throw AudioError("truncated extensible fmt chunk");
        fmt.code = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = available;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) throw AudioError("missing fmt chunk");
  if (data == nullptr) throw AudioError("missing data chunk");
  const bool pcm_ok = fmt.code == kFormatPcm && (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32);
  const bool float_ok = fmt.code == kFormatFloat && fmt.bits == 32;
  if (!pcm_ok && !float_ok) {
    throw AudioError("unsupported encoding (format " + std::to_string(fmt.code) + ", " +
                     std::to_string(fmt.bits) + " bit)");
  }
  if (fmt.channels < 1 || fmt.channels > 2) {
    throw AudioError("unsupported channel count " + std::to_string(fmt.channels));
  }
  if (fmt.sample_rate != static_cast<std::uint32_t>(kSampleRate)) {
    throw AudioError("unsupported sample rate " + std::to_string(fmt.sample_rate));
  }
  const std::size_t bytes_per_sample = fmt.bits / 8u;
  const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
  if (fmt.block_align != frame_bytes) throw AudioError("inconsistent block alignment");

  const std::size_t frames = data_size / frame_bytes;
  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.channels.assign(fmt.channels, std::vector<double>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      clip.channels[c][i] = decode_sample(data + i * frame_bytes + c * bytes_per_sample, fmt);
    }
  }
  return clip;
}

namespace {

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void save_wav(const std::filesystem::path& path, const AudioClip& clip, SampleFormat format) {
  clip.validate();
  const std::uint16_t bits = format == SampleFormat::pcm16 ? 16 : (format == SampleFormat::pcm24 ? 24 : 32);
  const std::uint16_t channels = static_cast<std::uint16_t>(clip.num_channels());
  const std::uint16_t block = static_cast<std::uint16_t>(channels * bits / 8);
  const std::size_t data_size = clip.num_samples() * block;

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, static_cast<std::uint32_t>(36 + data_size));
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, format == SampleFormat::float32 ? kFormatFloat : kFormatPcm);
  put_u16(out, channels);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * block);
  put_u16(out, block);
  put_u16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, static_cast<std::uint32_t>(data_size));

  for (std::size_t i = 0; i < clip.num_samples(); ++i) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double x = std::clamp(clip.channels[c][i], -1.0, 1.0);
      switch (format) {
        case SampleFormat::pcm16: {
          const auto q = static_cast<std::int16_t>(std::clamp(std::lround(x * 32768.0), -32768L, 32767L));
          put_u16(out, static_cast<std::uint16_t>(q));
          break;
        }
        case SampleFormat::pcm24: {
          const auto q = static_cast<std::int32_t>(std::clamp(std::lround(x * 8388608.0), -8388608L, 8388607L));
          const auto u = static_cast<std::uint32_t>(q);
          out.push_back(static_cast<unsigned char>(u & 0xFF));
          out.push_back(static_cast<unsigned char>((u >> 8) & 0xFF));
          out.push_back(static_cast<unsigned char>((u >> 16) & 0xFF));
          break;
        }
        case SampleFormat::float32: {
          const float f = static_cast<float>(x);
          put_u32(out, std::bit_cast<std::uint32_t>(f));
          break;
        }
      }
    }
  }

  std::ofstream file(path, std::ios::binary);
  if (!file) throw AudioError("cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

}  // namespace cantus
