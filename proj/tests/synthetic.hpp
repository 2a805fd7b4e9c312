#pragma once

// Synthetic tracks with known stems for separation tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "kamhub/audio_io.hpp"

namespace kamhub::testing {

struct SyntheticTrack {
  AudioBuffer mixture;
  AudioBuffer background;
  AudioBuffer vocals;
  std::size_t burst_frames = 0;  // hops that contain burst samples
  std::size_t total_frames = 0;
};

struct SyntheticSpec {
  int sample_rate = 44100;
  double seconds = 60.0;
  std::size_t hop = 1024;
  std::size_t period_frames = 8;
  std::size_t burst_hops = 2;
  double burst_fraction = 0.2;  // target share of hops carrying a burst
  double burst_level_db = -6.0;  // burst RMS relative to background RMS
  std::uint32_t seed = 7;
};

// Background: a loop of period_frames * hop samples holding four notes of
// three harmonics each, tiled so that frames one period apart are identical.
// Vocals: tone bursts of burst_hops hops at random frequencies.
inline SyntheticTrack make_synthetic_track(const SyntheticSpec& spec = {}) {
  const auto n = static_cast<std::size_t>(spec.seconds * spec.sample_rate);
  const std::size_t period = spec.period_frames * spec.hop;
  const double sr = spec.sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;

  const double notes[4] = {110.0, 146.83, 164.81, 196.0};
  const double harmonic_gain[3] = {1.0, 0.5, 0.25};
  std::vector<double> loop(period, 0.0);
  const std::size_t note_len = period / 4;
  for (std::size_t i = 0; i < period; ++i) {
    const double f0 = notes[i / note_len];
    const double t = static_cast<double>(i % note_len) / sr;
    double v = 0.0;
    for (int h = 0; h < 3; ++h) v += harmonic_gain[h] * std::sin(two_pi * f0 * (h + 1) * t);
    loop[i] = 0.25 * v;
  }
  std::vector<double> background(n);
  for (std::size_t i = 0; i < n; ++i) background[i] = loop[i % period];

  double bg_power = 0.0;
  for (double v : loop) bg_power += v * v;
  bg_power /= static_cast<double>(period);
  const double amp = std::sqrt(2.0 * bg_power) * std::pow(10.0, spec.burst_level_db / 20.0);

  std::mt19937 rng(spec.seed);
  std::uniform_real_distribution<double> freq(300.0, 3000.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t hops = (n + spec.hop - 1) / spec.hop;
  std::vector<double> vocals(n, 0.0);
  std::vector<bool> busy(hops, false);
  const double p_start = spec.burst_fraction / static_cast<double>(spec.burst_hops);
  for (std::size_t h = 0; h + spec.burst_hops <= hops; ++h) {
    if (unit(rng) >= p_start) continue;
    const double f = freq(rng);
    const std::size_t start = h * spec.hop;
    const std::size_t len = spec.burst_hops * spec.hop;
    for (std::size_t i = 0; i < len && start + i < n; ++i) {
      const double env = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(len));
      vocals[start + i] += amp * env * std::sin(two_pi * f * static_cast<double>(i) / sr);
    }
    for (std::size_t b = 0; b < spec.burst_hops; ++b) busy[h + b] = true;
  }

  std::vector<double> mix(n);
  for (std::size_t i = 0; i < n; ++i) mix[i] = background[i] + vocals[i];

  SyntheticTrack track{AudioBuffer::mono(std::move(mix), spec.sample_rate),
                       AudioBuffer::mono(std::move(background), spec.sample_rate),
                       AudioBuffer::mono(std::move(vocals), spec.sample_rate), 0, hops};
  track.burst_frames = static_cast<std::size_t>(std::count(busy.begin(), busy.end(), true));
  return track;
}

}  // namespace kamhub::testing
