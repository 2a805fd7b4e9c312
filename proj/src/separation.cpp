#include "kamhub/separation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kamhub {

void SeparationConfig::validate() const {
  stft.validate();
  if (!(mask_exponent > 0.0)) throw std::invalid_argument("mask exponent must be positive");
  if (!(mask_epsilon > 0.0)) throw std::invalid_argument("mask epsilon must be positive");
}

namespace {

// Bytes of gathered neighbor values kept per block; sized for L2.
constexpr std::size_t kGatherBytes = 128 * 1024;

double power(double x, double p) { return p == 2.0 ? x * x : std::pow(x, p); }

}  // namespace

MagnitudeSpectrogram neighbor_median(const MagnitudeSpectrogram& spec, const KnnGraph& graph) {
  const std::size_t bins = spec.frequency_bins();
  const std::size_t n = spec.frames();
  const std::size_t k = graph.k();
  if (graph.frames() != n) throw std::invalid_argument("neighbor_median: graph and spectrogram disagree on frames");
  if (k == 0) throw std::invalid_argument("neighbor_median: empty neighbor lists");

  MagnitudeSpectrogram out{Matrix<double>(bins, n), spec.config};
  const std::size_t mid = k / 2;
  const std::size_t block = std::clamp<std::size_t>(kGatherBytes / (k * sizeof(double)), 4, 256);
  std::vector<double> buf(block * k);
  for (std::size_t j = 0; j < n; ++j) {
    const auto nbrs = graph.neighbors(j);
    for (std::size_t m0 = 0; m0 < bins; m0 += block) {
      const std::size_t width = std::min(block, bins - m0);
      // Transpose the block so each bin's k neighbor values are contiguous.
      for (std::size_t i = 0; i < k; ++i) {
        const double* src = spec.values.col(nbrs[i]).data() + m0;
        for (std::size_t b = 0; b < width; ++b) buf[b * k + i] = src[b];
      }
      for (std::size_t b = 0; b < width; ++b) {
        double* first = buf.data() + b * k;
        double* nth = first + mid;
        std::nth_element(first, nth, first + k);
        double value = *nth;
        if (k % 2 == 0) value = 0.5 * (*std::max_element(first, nth) + value);
        out.values(m0 + b, j) = value;
      }
    }
  }
  return out;
}

MagnitudeSpectrogram soft_mask(const MagnitudeSpectrogram& mixture, const MagnitudeSpectrogram& background,
                               double exponent, double epsilon) {
  if (!mixture.values.same_shape(background.values)) throw std::invalid_argument("soft_mask: shape mismatch");
  if (!(exponent > 0.0)) throw std::invalid_argument("soft_mask: exponent must be positive");

  const auto x = mixture.values.data();
  const auto y = background.values.data();
  // The regularizer is relative to the loudest bin so that W does not change
  // when the mixture is rescaled.
  const double peak = x.empty() ? 0.0 : *std::max_element(x.begin(), x.end());
  const double floor = peak > 0.0 ? epsilon * power(peak, exponent) : epsilon;

  MagnitudeSpectrogram out{Matrix<double>(mixture.frequency_bins(), mixture.frames()), mixture.config};
  auto w = out.values.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double b = std::min(y[i], x[i]);
    const double bp = power(b, exponent);
    const double vp = power(x[i] - b, exponent);
    w[i] = bp / (bp + vp + floor);
  }
  return out;
}

namespace {

SpectralSeparation masked_with(const MagnitudeSpectrogram& mixture, KnnGraph graph, const SeparationConfig& config) {
  SpectralSeparation out;
  out.chosen_k = graph.k();
  const auto background = neighbor_median(mixture, graph);
  out.mask = soft_mask(mixture, background, config.mask_exponent, config.mask_epsilon);
  out.graph = std::move(graph);
  return out;
}

SpectralSeparation passthrough(const MagnitudeSpectrogram& mixture) {
  SpectralSeparation out;
  out.mask = MagnitudeSpectrogram{Matrix<double>(mixture.frequency_bins(), mixture.frames(), 1.0), mixture.config};
  out.chosen_k = 0;
  return out;
}

void check_frames(const MagnitudeSpectrogram& mixture) {
  if (mixture.frames() < 2) throw std::invalid_argument("separation needs at least two STFT frames");
}

void check_fixed_k(std::size_t k, std::size_t n) {
  if (k > n - 1)
    throw std::invalid_argument("fixed k=" + std::to_string(k) + " exceeds N-1=" + std::to_string(n - 1));
}

}  // namespace

SpectralSeparation separate_spectrogram(const MagnitudeSpectrogram& mixture, const NeighborRanking& ranking,
                                        const SeparationConfig& config) {
  config.validate();
  check_frames(mixture);
  if (ranking.frames() != mixture.frames())
    throw std::invalid_argument("separate_spectrogram: ranking built for a different spectrogram");

  if (const auto* fixed = std::get_if<FixedK>(&config.k_mode)) {
    check_fixed_k(fixed->k, mixture.frames());
    if (fixed->k == 0) return passthrough(mixture);
    return masked_with(mixture, ranking.graph(fixed->k), config);
  }

  const auto& sweep = std::get<AutoK>(config.k_mode).sweep;
  const auto ks = sweep_k_values(mixture.frames(), sweep);
  auto profile = hubness_profile(ranking, ks);
  auto out = masked_with(mixture, ranking.graph(select_k(profile)), config);
  out.profile = std::move(profile);
  return out;
}

SpectralSeparation separate_spectrogram(const MagnitudeSpectrogram& mixture, const SeparationConfig& config) {
  config.validate();
  check_frames(mixture);
  if (const auto* fixed = std::get_if<FixedK>(&config.k_mode)) {
    check_fixed_k(fixed->k, mixture.frames());
    if (fixed->k == 0) return passthrough(mixture);
    // A single k only needs partial sorts.
    return masked_with(mixture, knn(distance_matrix(mixture), fixed->k), config);
  }
  const NeighborRanking ranking(distance_matrix(mixture));
  return separate_spectrogram(mixture, ranking, config);
}

MaskedSignals apply_mask(const ComplexSpectrogram& mixture, const MagnitudeSpectrogram& mask,
                         std::size_t out_length) {
  if (mask.frequency_bins() != mixture.frequency_bins() || mask.frames() != mixture.frames())
    throw std::invalid_argument("apply_mask: shape mismatch");
  ComplexSpectrogram bg = mixture;
  ComplexSpectrogram vox = mixture;
  const auto w = mask.values.data();
  auto b = bg.bins.data();
  auto v = vox.bins.data();
  for (std::size_t i = 0; i < w.size(); ++i) {
    b[i] *= w[i];
    v[i] *= 1.0 - w[i];
  }
  return {stft_inverse(bg, out_length), stft_inverse(vox, out_length)};
}

SeparationResult separate(const AudioBuffer& mixture, const SeparationConfig& config) {
  config.validate();
  if (mixture.empty()) throw std::invalid_argument("separate: empty mixture");
  const AudioBuffer mono = to_mono(mixture);
  const auto spec = stft_forward(mono, config.stft);
  const auto mag = magnitude(spec);
  auto spectral = separate_spectrogram(mag, config);
  auto signals = apply_mask(spec, spectral.mask, mono.frames());
  return {std::move(signals.background), std::move(signals.vocals), spectral.chosen_k, std::move(spectral.profile)};
}

}  // namespace kamhub
