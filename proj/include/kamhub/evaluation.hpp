#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "kamhub/audio_io.hpp"
#include "kamhub/separation.hpp"

namespace kamhub {

// Returned by sdr() when the estimate matches the reference exactly.
inline constexpr double kSdrPerfect = std::numeric_limits<double>::infinity();

// Energy-ratio SDR in dB, 10 log10(sum ref^2 / sum (est - ref)^2). This is
// not the BSS Eval 3.0 measure: no distortion filter is fitted.
double sdr(const AudioBuffer& reference, const AudioBuffer& estimate);

struct EvalRow {
  std::size_t k = 0;
  double sdr_vocals = 0.0;
  double sdr_background = 0.0;
  std::optional<double> h_norm;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t chosen_k_standard = 0;
  std::size_t chosen_k_proposed = 0;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Conventional choice: the row with the best vocal SDR, ties toward smaller k.
std::size_t best_sdr_k(std::span<const EvalRow> rows);

// k values of the conventional fixed sweep: 0, 25, 50, ..., 3200.
std::vector<std::size_t> default_fixed_k_list();

// Runs both k-selection protocols on one track from a single distance matrix.
// Fixed k values >= N are clamped to N-1 and duplicates dropped. Rows cover
// the fixed list plus the hubness-selected k. chosen_k_standard is the best
// vocal SDR over the fixed list; chosen_k_proposed is select_k over the
// hubness sweep (config.k_mode's fractions when it is AutoK, defaults
// otherwise).
EvalReport sweep_report(const AudioBuffer& mixture, const AudioBuffer& ref_vocals,
                        const AudioBuffer& ref_background, std::span<const std::size_t> k_values,
                        const SeparationConfig& config);

// CSV: header `k,sdr_vocals_db,sdr_background_db,h_norm`, empty h_norm when
// absent, `inf` for a perfect SDR, then `# key=value` metadata lines.
void write_report_csv(std::ostream& out, const EvalReport& report);
EvalReport read_report_csv(std::istream& in);

}  // namespace kamhub
