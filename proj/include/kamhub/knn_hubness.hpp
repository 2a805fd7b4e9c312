#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kamhub/matrix.hpp"
#include "kamhub/stft.hpp"

namespace kamhub {

// Squared Euclidean distances between spectrogram frames. Symmetric with an
// exactly zero diagonal.
struct DistanceMatrix {
  Matrix<double> values;

  std::size_t frames() const { return values.rows(); }
  double operator()(std::size_t a, std::size_t b) const { return values(a, b); }
};

using FrameIndex = std::uint32_t;

// Directed k-NN graph over frames. Each frame owns exactly k outgoing arcs,
// nearest first, never pointing at itself.
class KnnGraph {
 public:
  KnnGraph(std::size_t n_frames, std::size_t k, std::vector<FrameIndex> flat);

  std::size_t frames() const { return n_frames_; }
  std::size_t k() const { return k_; }
  std::span<const FrameIndex> neighbors(std::size_t frame) const {
    return {flat_.data() + frame * k_, k_};
  }

  friend bool operator==(const KnnGraph&, const KnnGraph&) = default;

 private:
  std::size_t n_frames_;
  std::size_t k_;
  std::vector<FrameIndex> flat_;
};

// Number of distance_matrix evaluations made by this process; tests use it to
// check that a sweep shares one matrix across all of its separations.
std::size_t distance_matrix_evaluations();

// Throws std::invalid_argument for fewer than two frames.
DistanceMatrix distance_matrix(const MagnitudeSpectrogram& spec);

// Frames ordered by (distance, index); throws unless 1 <= k <= N-1.
KnnGraph knn(const DistanceMatrix& distances, std::size_t k);

// Every row of the distance matrix sorted once. The k-NN graph for any k is
// the first k columns of the ranking, so a whole sweep costs one sort.
class NeighborRanking {
 public:
  explicit NeighborRanking(const DistanceMatrix& distances);

  std::size_t frames() const { return n_frames_; }
  // Frames in increasing (distance, index) order, self excluded.
  std::span<const FrameIndex> order(std::size_t frame) const {
    return {order_.data() + frame * (n_frames_ - 1), n_frames_ - 1};
  }
  KnnGraph graph(std::size_t k) const;

 private:
  std::size_t n_frames_;
  std::vector<FrameIndex> order_;
};

std::vector<std::size_t> k_occurrence(const KnnGraph& graph);

// Population skewness m3 / m2^(3/2); 0 for zero variance. Needs >= 2 values.
double skewness(std::span<const double> values);

double hubness(const KnnGraph& graph);

// Skewness of Binomial(n, k/n): (1 - 2k/n) / sqrt(k (1 - k/n)).
double null_hubness(std::size_t k, std::size_t n);

struct HubnessEntry {
  std::size_t k = 0;
  double h = 0.0;
  double h_null = 0.0;
  double h_norm = 0.0;

  friend bool operator==(const HubnessEntry&, const HubnessEntry&) = default;
};

struct HubnessProfile {
  std::vector<HubnessEntry> entries;
  std::size_t n_frames = 0;

  friend bool operator==(const HubnessProfile&, const HubnessProfile&) = default;
};

// Excess hubness h/max(h) - h_null/max(h_null), maxima taken over the entries.
// When no raw hubness is positive the first term is 0 for the whole sweep.
void normalize_profile(HubnessProfile& profile);

HubnessProfile hubness_profile(const DistanceMatrix& distances, std::span<const std::size_t> k_values);
HubnessProfile hubness_profile(const NeighborRanking& ranking, std::span<const std::size_t> k_values);

// Argmax of h_norm, ties toward smaller k.
std::size_t select_k(const HubnessProfile& profile);

struct SweepFractions {
  double start = 0.001;
  double step = 0.010;
  double stop = 0.45;
};

// round(f * N) for f = start, start + step, ... <= stop, raised to at least 1
// and deduplicated. A fraction that rounds above N-1 is an error.
std::vector<std::size_t> sweep_k_values(std::size_t n_frames, const SweepFractions& fractions = {});

// CSV with header `k,h,h_null,h_norm`.
void write_profile_csv(std::ostream& out, const HubnessProfile& profile);
HubnessProfile read_profile_csv(std::istream& in);

}  // namespace kamhub
