#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace kamhub {

// Time-domain audio. Samples are stored per channel as doubles in nominal
// range [-1, 1]; every channel has the same length.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  AudioBuffer(std::vector<std::vector<double>> channels, int sample_rate);
  static AudioBuffer mono(std::vector<double> samples, int sample_rate);

  int sample_rate() const { return sample_rate_; }
  std::size_t channels() const { return channels_.size(); }
  std::size_t frames() const { return channels_.empty() ? 0 : channels_.front().size(); }
  bool empty() const { return frames() == 0; }
  bool is_mono() const { return channels_.size() == 1; }

  const std::vector<double>& channel(std::size_t c) const { return channels_.at(c); }
  std::vector<double>& channel(std::size_t c) { return channels_.at(c); }

  friend bool operator==(const AudioBuffer&, const AudioBuffer&) = default;

 private:
  std::vector<std::vector<double>> channels_;
  int sample_rate_ = 0;
};

enum class WavEncoding { pcm16, pcm24, float32 };

class WavError : public std::runtime_error {
 public:
  enum class Kind { missing_file, malformed_header, unsupported_encoding, write_failed };
  WavError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

// Reads RIFF/WAVE with PCM16, PCM24 or IEEE float32 data. PCM values are
// scaled by 1/2^(bits-1), so -32768 maps to exactly -1.0.
AudioBuffer load_wav(const std::filesystem::path& path);

// pcm16 clips to [-1, 32767/32768] and rounds to nearest; float32 stores the
// samples narrowed to float, which is lossless for float-representable input.
void save_wav(const std::filesystem::path& path, const AudioBuffer& buffer,
              WavEncoding encoding = WavEncoding::float32);

// Per-sample arithmetic mean across channels.
AudioBuffer to_mono(const AudioBuffer& buffer);

}  // namespace kamhub
