#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cantus/audio_io.hpp"

namespace cantus {

/// Grid of the channel-selection band ratio.
inline constexpr FrameGrid kBandRatioGrid{4096, 1024, 2, false};
/// Bark energies share the 128-sample hop of the pitch grid.
inline constexpr FrameGrid kBarkGrid{1024, 128, 1, true};
inline constexpr FrameGrid kRmsGrid{4096, 128, 1, true};
inline constexpr FrameGrid kChromaGrid{4096, 1024, 1, false};

/// Edges of the lowest twelve bark bands in Hz.
inline constexpr std::array<double, 13> kBarkEdges{0.0,   50.0,  100.0, 150.0, 200.0,
                                                   300.0, 400.0, 510.0, 630.0, 770.0,
                                                   920.0, 1080.0, 1270.0};

inline constexpr double kRatioUpperLow = 500.0;
inline constexpr double kRatioUpperHigh = 6000.0;
inline constexpr double kRatioLowerLow = 80.0;
inline constexpr double kRatioLowerHigh = 400.0;

inline constexpr double kChromaLowHz = 80.0;
inline constexpr double kChromaHighHz = 5000.0;

using BarkVector = std::array<double, 12>;
/// Pitch-class profile; class 0 is the pitch class of A.
using ChromaVector = std::array<double, 12>;

/// Bins whose centre frequency lies strictly between lo and hi. Empty when
/// first > last.
struct BinRange {
  std::size_t first = 1;
  std::size_t last = 0;

  bool empty() const { return first > last; }
  std::size_t size() const { return empty() ? 0 : last - first + 1; }
};

BinRange bins_strictly_inside(double lo_hz, double hi_hz, const FrameGrid& grid,
                              int sample_rate = kSampleRate);

/// 20*log10(upper/lower) over the max-normalised magnitudes, or nullopt when
/// the ratio is undefined (all-zero frame or an empty band sum).
std::optional<double> band_ratio_db(std::span<const double> magnitudes, BinRange upper,
                                    BinRange lower);

struct BandRatioTrack {
  FrameGrid grid = kBandRatioGrid;
  std::vector<double> db;     // 0 dB on silent frames
  std::vector<bool> silent;   // ratio undefined

  /// Mean over non-silent frames; nullopt if every frame is silent.
  std::optional<double> mean() const;
};

BandRatioTrack spectral_band_ratio(const AudioClip& clip, std::size_t channel,
                                   const FrameGrid& grid = kBandRatioGrid);

struct ChannelSelection {
  std::size_t channel = 0;
  std::vector<std::optional<double>> mean_ratio;  // per channel
};

/// Channel with the highest track-mean band ratio; ties (and channels with no
/// defined ratio) resolve to the lower index.
ChannelSelection select_channel(const AudioClip& clip);

BarkVector bark_frame(std::span<const double> magnitudes, const FrameGrid& grid,
                      int sample_rate = kSampleRate);

std::vector<BarkVector> bark_energies(const AudioClip& clip, std::size_t channel,
                                      const FrameGrid& grid = kBarkGrid);

std::vector<double> rms_track(const AudioClip& clip, std::size_t channel,
                              const FrameGrid& grid = kRmsGrid);

struct ChromaSettings {
  double low_hz = kChromaLowHz;
  double high_hz = kChromaHighHz;
};

/// Pitch class of frequency f relative to a tuning reference (nearest semitone,
/// class 0 = A).
int pitch_class_of(double frequency, double tuning_ref);

ChromaVector chroma_frame(std::span<const double> magnitudes, const FrameGrid& grid,
                          double tuning_ref, const ChromaSettings& settings = {},
                          int sample_rate = kSampleRate);

std::vector<ChromaVector> chroma_track(const AudioClip& clip, std::size_t channel,
                                       double tuning_ref, const FrameGrid& grid = kChromaGrid,
                                       const ChromaSettings& settings = {});

}  // namespace cantus
