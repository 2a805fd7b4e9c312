#include "kamhub/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace kamhub {

void StftConfig::validate() const {
  if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0)
    throw std::invalid_argument("fft_size must be a power of two >= 2");
  if (hop_size < 1 || hop_size > fft_size) throw std::invalid_argument("hop_size must be in [1, fft_size]");
  if (fft_size % hop_size != 0) throw std::invalid_argument("hop_size must divide fft_size");
}

std::size_t frame_count(std::size_t length, const StftConfig& config) {
  return (length + config.hop_size - 1) / config.hop_size;
}

std::vector<double> analysis_window(const StftConfig& config) {
  std::vector<double> w(config.fft_size);
  const double n = static_cast<double>(config.fft_size);
  for (std::size_t i = 0; i < w.size(); ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / n);
  return w;
}

namespace {

// FFTW's planner is not reentrant; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n) : n_(n) {
    real_ = fftw_alloc_real(n);
    spec_ = fftw_alloc_complex(n / 2 + 1);
    if (real_ == nullptr || spec_ == nullptr) {
      release();
      throw std::bad_alloc();
    }
    std::lock_guard lock(planner_mutex());
    const int len = static_cast<int>(n);
    forward_ = fftw_plan_dft_r2c_1d(len, real_, spec_, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(len, spec_, real_, FFTW_ESTIMATE);
  }
  ~RealFft() { release(); }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* real() { return real_; }
  std::complex<double>* spectrum() { return reinterpret_cast<std::complex<double>*>(spec_); }

  void forward() { fftw_execute(forward_); }
  // Unnormalised: the result is n times the inverse DFT. c2r destroys its input.
  void inverse() { fftw_execute(inverse_); }

 private:
  void release() {
    std::lock_guard lock(planner_mutex());
    if (forward_) fftw_destroy_plan(forward_);
    if (inverse_) fftw_destroy_plan(inverse_);
    fftw_free(real_);
    fftw_free(spec_);
    forward_ = inverse_ = nullptr;
    real_ = nullptr;
    spec_ = nullptr;
  }

  std::size_t n_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan inverse_ = nullptr;
};

}  // namespace

ComplexSpectrogram stft_forward(const AudioBuffer& signal, const StftConfig& config) {
  config.validate();
  if (!signal.is_mono()) throw std::invalid_argument("stft_forward expects a mono signal");
  if (signal.empty()) throw std::invalid_argument("stft_forward: empty signal");

  const auto& x = signal.channel(0);
  const std::size_t len = x.size();
  const std::size_t n_fft = config.fft_size;
  const std::size_t frames = frame_count(len, config);
  const auto window = analysis_window(config);
  const auto half = static_cast<std::ptrdiff_t>(n_fft / 2);

  ComplexSpectrogram out{Matrix<std::complex<double>>(config.bins(), frames), config, signal.sample_rate()};
  RealFft fft(n_fft);
  double* buf = fft.real();
  for (std::size_t j = 0; j < frames; ++j) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(j * config.hop_size) - half;
    for (std::size_t i = 0; i < n_fft; ++i) {
      const std::ptrdiff_t s = start + static_cast<std::ptrdiff_t>(i);
      buf[i] = (s >= 0 && s < static_cast<std::ptrdiff_t>(len)) ? x[static_cast<std::size_t>(s)] * window[i] : 0.0;
    }
    fft.forward();
    auto col = out.bins.col(j);
    std::copy(fft.spectrum(), fft.spectrum() + col.size(), col.begin());
  }
  return out;
}

AudioBuffer stft_inverse(const ComplexSpectrogram& spec, std::size_t out_length) {
  const StftConfig& config = spec.config;
  config.validate();
  if (spec.bins.rows() != config.bins())
    throw std::invalid_argument("stft_inverse: bin count does not match fft_size");
  if (spec.sample_rate <= 0) throw std::invalid_argument("stft_inverse: spectrogram has no sample rate");

  const std::size_t n_fft = config.fft_size;
  const auto window = analysis_window(config);
  const auto half = static_cast<std::ptrdiff_t>(n_fft / 2);
  const auto len = static_cast<std::ptrdiff_t>(out_length);
  const double scale = 1.0 / static_cast<double>(n_fft);

  std::vector<double> y(out_length, 0.0);
  std::vector<double> norm(out_length, 0.0);
  RealFft fft(n_fft);
  for (std::size_t j = 0; j < spec.frames(); ++j) {
    const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(j * config.hop_size) - half;
    if (start >= len) break;
    const auto col = spec.bins.col(j);
    std::copy(col.begin(), col.end(), fft.spectrum());
    fft.inverse();
    const double* frame = fft.real();
    for (std::size_t i = 0; i < n_fft; ++i) {
      const std::ptrdiff_t s = start + static_cast<std::ptrdiff_t>(i);
      if (s < 0) continue;
      if (s >= len) break;
      y[static_cast<std::size_t>(s)] += frame[i] * scale * window[i];
      norm[static_cast<std::size_t>(s)] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < out_length; ++i) y[i] = norm[i] > 1e-12 ? y[i] / norm[i] : 0.0;
  return AudioBuffer::mono(std::move(y), spec.sample_rate);
}

MagnitudeSpectrogram magnitude(const ComplexSpectrogram& spec) {
  MagnitudeSpectrogram out{Matrix<double>(spec.bins.rows(), spec.bins.cols()), spec.config};
  auto src = spec.bins.data();
  auto dst = out.values.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::abs(src[i]);
  return out;
}

}  // namespace kamhub
