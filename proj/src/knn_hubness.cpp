#include "kamhub/knn_hubness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace kamhub {

namespace {

std::atomic<std::size_t> g_distance_evaluations{0};

constexpr std::size_t kColumnBlock = 32;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  const double* pa = a.data();
  const double* pb = b.data();
  const std::size_t n = a.size();
#pragma omp simd reduction(+ : acc)
  for (std::size_t m = 0; m < n; ++m) {
    const double d = pa[m] - pb[m];
    acc += d * d;
  }
  return acc;
}

// Strict total order on a distance row: nearer first, lower index on ties.
struct RowOrder {
  std::span<const double> row;
  bool operator()(FrameIndex a, FrameIndex b) const {
    return row[a] < row[b] || (row[a] == row[b] && a < b);
  }
};

std::vector<FrameIndex> others(std::size_t n, std::size_t self) {
  std::vector<FrameIndex> idx;
  idx.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i)
    if (i != self) idx.push_back(static_cast<FrameIndex>(i));
  return idx;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KnnGraph::KnnGraph(std::size_t n_frames, std::size_t k, std::vector<FrameIndex> flat)
    : n_frames_(n_frames), k_(k), flat_(std::move(flat)) {
  if (flat_.size() != n_frames_ * k_) throw std::invalid_argument("KnnGraph: neighbor table has wrong size");
  if (n_frames_ > 0 && k_ > n_frames_ - 1) throw std::invalid_argument("KnnGraph: k exceeds N-1");
  for (std::size_t j = 0; j < n_frames_; ++j) {
    for (FrameIndex i : neighbors(j)) {
      if (i >= n_frames_ || i == j) throw std::invalid_argument("KnnGraph: invalid neighbor index");
    }
  }
}

std::size_t distance_matrix_evaluations() { return g_distance_evaluations.load(); }

DistanceMatrix distance_matrix(const MagnitudeSpectrogram& spec) {
  const std::size_t n = spec.frames();
  if (n < 2) throw std::invalid_argument("distance_matrix needs at least two frames");
  ++g_distance_evaluations;

  DistanceMatrix out{Matrix<double>(n, n, 0.0)};
  // Blocked over a strip of columns so the strip stays cache resident while
  // every earlier column streams past it once.
  for (std::size_t j0 = 0; j0 < n; j0 += kColumnBlock) {
    const std::size_t j1 = std::min(n, j0 + kColumnBlock);
    for (std::size_t l = 0; l < j1; ++l) {
      const auto b = spec.values.col(l);
      for (std::size_t j = std::max(j0, l + 1); j < j1; ++j) {
        const double d = squared_distance(spec.values.col(j), b);
        out.values(j, l) = d;
        out.values(l, j) = d;
      }
    }
  }
  return out;
}

KnnGraph knn(const DistanceMatrix& distances, std::size_t k) {
  const std::size_t n = distances.frames();
  if (n < 2 || k < 1 || k > n - 1) throw std::invalid_argument("knn: k must be in [1, N-1]");
  std::vector<FrameIndex> flat(n * k);
  for (std::size_t j = 0; j < n; ++j) {
    auto idx = others(n, j);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      RowOrder{distances.values.col(j)});
    std::copy_n(idx.begin(), k, flat.begin() + static_cast<std::ptrdiff_t>(j * k));
  }
  return KnnGraph(n, k, std::move(flat));
}

NeighborRanking::NeighborRanking(const DistanceMatrix& distances) : n_frames_(distances.frames()) {
  if (n_frames_ < 2) throw std::invalid_argument("NeighborRanking needs at least two frames");
  order_.resize(n_frames_ * (n_frames_ - 1));
  for (std::size_t j = 0; j < n_frames_; ++j) {
    auto idx = others(n_frames_, j);
    std::sort(idx.begin(), idx.end(), RowOrder{distances.values.col(j)});
    std::copy(idx.begin(), idx.end(), order_.begin() + static_cast<std::ptrdiff_t>(j * (n_frames_ - 1)));
  }
}

KnnGraph NeighborRanking::graph(std::size_t k) const {
  if (k < 1 || k > n_frames_ - 1) throw std::invalid_argument("NeighborRanking::graph: k must be in [1, N-1]");
  std::vector<FrameIndex> flat(n_frames_ * k);
  for (std::size_t j = 0; j < n_frames_; ++j) {
    const auto row = order(j);
    std::copy_n(row.begin(), k, flat.begin() + static_cast<std::ptrdiff_t>(j * k));
  }
  return KnnGraph(n_frames_, k, std::move(flat));
}

std::vector<std::size_t> k_occurrence(const KnnGraph& graph) {
  std::vector<std::size_t> counts(graph.frames(), 0);
  for (std::size_t j = 0; j < graph.frames(); ++j)
    for (FrameIndex i : graph.neighbors(j)) ++counts[i];
  return counts;
}

double skewness(std::span<const double> values) {
  if (values.size() < 2) throw std::invalid_argument("skewness needs at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  if (m2 == 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

namespace {

double occurrence_skewness(std::span<const std::size_t> counts) {
  std::vector<double> v(counts.begin(), counts.end());
  return skewness(v);
}

}  // namespace

double hubness(const KnnGraph& graph) {
  if (graph.frames() < 2) throw std::invalid_argument("hubness needs at least two frames");
  return occurrence_skewness(k_occurrence(graph));
}

double null_hubness(std::size_t k, std::size_t n) {
  if (k < 1 || k >= n) throw std::invalid_argument("null_hubness: k must be in [1, n-1]");
  const double kd = static_cast<double>(k);
  const double nd = static_cast<double>(n);
  return (1.0 - 2.0 * kd / nd) / std::sqrt(kd * (1.0 - kd / nd));
}

void normalize_profile(HubnessProfile& profile) {
  if (profile.entries.empty()) return;
  double max_h = profile.entries.front().h;
  double max_null = profile.entries.front().h_null;
  for (const auto& e : profile.entries) {
    max_h = std::max(max_h, e.h);
    max_null = std::max(max_null, e.h_null);
  }
  for (auto& e : profile.entries) {
    const double raw = max_h > 0.0 ? e.h / max_h : 0.0;
    const double null = max_null > 0.0 ? e.h_null / max_null : 0.0;
    e.h_norm = raw - null;
  }
}

namespace {

void check_k_values(std::span<const std::size_t> k_values, std::size_t n) {
  if (k_values.empty()) throw std::invalid_argument("hubness_profile: empty k list");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] < 1 || k_values[i] > n - 1)
      throw std::invalid_argument("hubness_profile: k out of [1, N-1]");
    if (i > 0 && k_values[i] <= k_values[i - 1])
      throw std::invalid_argument("hubness_profile: k list must be strictly increasing");
  }
}

}  // namespace

HubnessProfile hubness_profile(const DistanceMatrix& distances, std::span<const std::size_t> k_values) {
  return hubness_profile(NeighborRanking(distances), k_values);
}

HubnessProfile hubness_profile(const NeighborRanking& ranking, std::span<const std::size_t> k_values) {
  const std::size_t n = ranking.frames();
  check_k_values(k_values, n);

  HubnessProfile profile;
  profile.n_frames = n;
  // In-degrees grow by one ranking column per unit of k.
  std::vector<std::size_t> counts(n, 0);
  std::size_t depth = 0;
  for (std::size_t k : k_values) {
    for (; depth < k; ++depth)
      for (std::size_t j = 0; j < n; ++j) ++counts[ranking.order(j)[depth]];
    profile.entries.push_back({k, occurrence_skewness(counts), null_hubness(k, n), 0.0});
  }
  normalize_profile(profile);
  return profile;
}

std::size_t select_k(const HubnessProfile& profile) {
  if (profile.entries.empty()) throw std::invalid_argument("select_k: empty profile");
  const HubnessEntry* best = &profile.entries.front();
  for (const auto& e : profile.entries)
    if (e.h_norm > best->h_norm || (e.h_norm == best->h_norm && e.k < best->k)) best = &e;
  return best->k;
}

std::vector<std::size_t> sweep_k_values(std::size_t n_frames, const SweepFractions& f) {
  if (n_frames < 2) throw std::invalid_argument("sweep_k_values: need at least two frames");
  if (!(f.start > 0.0) || !(f.start <= f.stop) || !(f.stop < 1.0) || !(f.step > 0.0))
    throw std::invalid_argument("sweep_k_values: fractions must satisfy 0 < start <= stop < 1, step > 0");

  const double n = static_cast<double>(n_frames);
  std::vector<std::size_t> ks;
  for (std::size_t i = 0;; ++i) {
    const double frac = f.start + static_cast<double>(i) * f.step;
    if (frac > f.stop + 1e-12) break;
    const long rounded = std::lround(frac * n);
    const std::size_t k = rounded < 1 ? 1 : static_cast<std::size_t>(rounded);
    if (k > n_frames - 1)
      throw std::invalid_argument("sweep_k_values: fraction " + format_real(frac) + " gives k >= N");
    if (ks.empty() || ks.back() != k) ks.push_back(k);
  }
  return ks;
}

void write_profile_csv(std::ostream& out, const HubnessProfile& profile) {
  out << "k,h,h_null,h_norm\n";
  for (const auto& e : profile.entries)
    out << e.k << ',' << format_real(e.h) << ',' << format_real(e.h_null) << ',' << format_real(e.h_norm) << '\n';
  out << "# n_frames=" << profile.n_frames << '\n';
}

HubnessProfile read_profile_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "k,h,h_null,h_norm")
    throw std::runtime_error("hubness csv: bad header");
  HubnessProfile profile;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# n_frames=", 0) == 0) {
      profile.n_frames = std::stoul(line.substr(11));
      continue;
    }
    if (line.front() == '#') continue;
    std::istringstream row(line);
    std::string k, h, h_null, h_norm;
    if (!std::getline(row, k, ',') || !std::getline(row, h, ',') || !std::getline(row, h_null, ',') ||
        !std::getline(row, h_norm))
      throw std::runtime_error("hubness csv: malformed row '" + line + "'");
    profile.entries.push_back({std::stoul(k), std::stod(h), std::stod(h_null), std::stod(h_norm)});
  }
  return profile;
}

}  // namespace kamhub
