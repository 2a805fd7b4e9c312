#pragma once

#include <cstddef>
#include <optional>
#include <variant>

#include "kamhub/audio_io.hpp"
#include "kamhub/knn_hubness.hpp"
#include "kamhub/stft.hpp"

namespace kamhub {

struct FixedK {
  std::size_t k = 0;
};

// Choose k per track as the argmax of normalized hubness over a sweep.
struct AutoK {
  SweepFractions sweep;
};

using KMode = std::variant<FixedK, AutoK>;

struct SeparationConfig {
  StftConfig stft;
  KMode k_mode = AutoK{};
  double mask_exponent = 2.0;
  double mask_epsilon = 1e-12;

  void validate() const;
};

// Background magnitude: Y[m, j] is the median of X[m, i] over the neighbors i
// of frame j (mean of the two central values for even k).
MagnitudeSpectrogram neighbor_median(const MagnitudeSpectrogram& spec, const KnnGraph& graph);

// W = B^p / (B^p + (X - B)^p + eps) with B = min(Y, X).
MagnitudeSpectrogram soft_mask(const MagnitudeSpectrogram& mixture, const MagnitudeSpectrogram& background,
                               double exponent, double epsilon);

// Spectral half of the pipeline, for callers that already hold the mixture
// spectrogram and want the mask rather than signals.
struct SpectralSeparation {
  MagnitudeSpectrogram mask;  // background mask W; vocals use 1 - W
  std::size_t chosen_k = 0;
  std::optional<KnnGraph> graph;  // absent for k = 0
  std::optional<HubnessProfile> profile;
};

// Reuses a precomputed ranking for the mixture frames. k = 0 is passthrough
// (W = 1 everywhere).
SpectralSeparation separate_spectrogram(const MagnitudeSpectrogram& mixture, const NeighborRanking& ranking,
                                        const SeparationConfig& config);
SpectralSeparation separate_spectrogram(const MagnitudeSpectrogram& mixture, const SeparationConfig& config);

struct MaskedSignals {
  AudioBuffer background;
  AudioBuffer vocals;
};

// background = istft(W * S), vocals = istft((1 - W) * S), both of out_length samples.
MaskedSignals apply_mask(const ComplexSpectrogram& mixture, const MagnitudeSpectrogram& mask,
                         std::size_t out_length);

struct SeparationResult {
  AudioBuffer background;
  AudioBuffer vocals;
  std::size_t chosen_k = 0;
  std::optional<HubnessProfile> profile;
};

// Multi-channel input is mixed to mono first; outputs are mono with the
// mixture's length. Throws std::invalid_argument for inputs shorter than two
// frames or a fixed k outside [0, N-1].
SeparationResult separate(const AudioBuffer& mixture, const SeparationConfig& config);

}  // namespace kamhub
