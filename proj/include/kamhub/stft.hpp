#pragma once

#include <complex>
#include <cstddef>

#include "kamhub/audio_io.hpp"
#include "kamhub/matrix.hpp"

namespace kamhub {

enum class Window { hann };

struct StftConfig {
  std::size_t fft_size = 4096;
  std::size_t hop_size = 1024;
  Window window = Window::hann;

  std::size_t bins() const { return fft_size / 2 + 1; }
  // Throws std::invalid_argument unless fft_size is a power of two,
  // 1 <= hop_size <= fft_size and hop_size divides fft_size.
  void validate() const;

  friend bool operator==(const StftConfig&, const StftConfig&) = default;
};

// bins x frames; column j is the spectrum of the window centred on sample j * hop.
struct ComplexSpectrogram {
  Matrix<std::complex<double>> bins;
  StftConfig config;
  int sample_rate = 0;

  std::size_t frequency_bins() const { return bins.rows(); }
  std::size_t frames() const { return bins.cols(); }
};

struct MagnitudeSpectrogram {
  Matrix<double> values;
  StftConfig config;

  std::size_t frequency_bins() const { return values.rows(); }
  std::size_t frames() const { return values.cols(); }
};

// Number of frames produced for a signal of `length` samples: ceil(length / hop).
std::size_t frame_count(std::size_t length, const StftConfig& config);

// Periodic window of length fft_size.
std::vector<double> analysis_window(const StftConfig& config);

// Centre-padded STFT. Throws std::invalid_argument on non-mono or empty input.
ComplexSpectrogram stft_forward(const AudioBuffer& signal, const StftConfig& config);

// Weighted overlap-add inverse; the output is cut or zero-extended to out_length.
AudioBuffer stft_inverse(const ComplexSpectrogram& spec, std::size_t out_length);

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec);

}  // namespace kamhub
