#include "kamhub/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace kamhub {

double sdr(const AudioBuffer& reference, const AudioBuffer& estimate) {
  if (reference.channels() != estimate.channels() || reference.frames() != estimate.frames())
    throw std::invalid_argument("sdr: reference and estimate differ in shape");
  double signal = 0.0, residual = 0.0;
  for (std::size_t c = 0; c < reference.channels(); ++c) {
    const auto& r = reference.channel(c);
    const auto& e = estimate.channel(c);
    for (std::size_t i = 0; i < r.size(); ++i) {
      signal += r[i] * r[i];
      const double d = e[i] - r[i];
      residual += d * d;
    }
  }
  if (signal == 0.0) throw std::invalid_argument("sdr: reference has zero energy");
  if (residual == 0.0) return kSdrPerfect;
  return 10.0 * std::log10(signal / residual);
}

std::size_t best_sdr_k(std::span<const EvalRow> rows) {
  if (rows.empty()) throw std::invalid_argument("best_sdr_k: no rows");
  const EvalRow* best = &rows.front();
  for (const auto& row : rows)
    if (row.sdr_vocals > best->sdr_vocals || (row.sdr_vocals == best->sdr_vocals && row.k < best->k)) best = &row;
  return best->k;
}

std::vector<std::size_t> default_fixed_k_list() { return {0, 25, 50, 100, 200, 400, 800, 1600, 3200}; }

namespace {

bool has_energy(const AudioBuffer& b) {
  for (std::size_t c = 0; c < b.channels(); ++c)
    for (double v : b.channel(c))
      if (v != 0.0) return true;
  return false;
}

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

EvalReport sweep_report(const AudioBuffer& mixture, const AudioBuffer& ref_vocals,
                        const AudioBuffer& ref_background, std::span<const std::size_t> k_values,
                        const SeparationConfig& config) {
  config.validate();
  if (k_values.empty()) throw std::invalid_argument("sweep_report: empty k list");
  const AudioBuffer mono = to_mono(mixture);
  const AudioBuffer vocals_ref = to_mono(ref_vocals);
  const AudioBuffer background_ref = to_mono(ref_background);
  if (vocals_ref.frames() != mono.frames() || background_ref.frames() != mono.frames())
    throw std::invalid_argument("sweep_report: references and mixture differ in length");
  if (!has_energy(vocals_ref) || !has_energy(background_ref))
    throw std::invalid_argument("sweep_report: reference has zero energy");

  const auto spec = stft_forward(mono, config.stft);
  const auto mag = magnitude(spec);
  if (mag.frames() < 2) throw std::invalid_argument("sweep_report: mixture shorter than two frames");
  const std::size_t n = mag.frames();
  const NeighborRanking ranking(distance_matrix(mag));

  const auto* automatic = std::get_if<AutoK>(&config.k_mode);
  const auto profile = hubness_profile(ranking, sweep_k_values(n, automatic ? automatic->sweep : SweepFractions{}));

  std::vector<std::size_t> fixed;
  for (std::size_t k : k_values) fixed.push_back(std::min(k, n - 1));
  std::sort(fixed.begin(), fixed.end());
  fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());

  EvalReport report;
  report.chosen_k_proposed = select_k(profile);
  std::vector<std::size_t> ks = fixed;
  if (!std::binary_search(ks.begin(), ks.end(), report.chosen_k_proposed)) {
    ks.insert(std::upper_bound(ks.begin(), ks.end(), report.chosen_k_proposed), report.chosen_k_proposed);
  }

  SeparationConfig per_k = config;
  for (std::size_t k : ks) {
    per_k.k_mode = FixedK{k};
    const auto spectral = separate_spectrogram(mag, ranking, per_k);
    const auto signals = apply_mask(spec, spectral.mask, mono.frames());
    EvalRow row{k, sdr(vocals_ref, signals.vocals), sdr(background_ref, signals.background), std::nullopt};
    for (const auto& e : profile.entries)
      if (e.k == k) row.h_norm = e.h_norm;
    report.rows.push_back(row);
  }
  std::vector<EvalRow> fixed_rows;
  for (const auto& row : report.rows)
    if (std::binary_search(fixed.begin(), fixed.end(), row.k)) fixed_rows.push_back(row);
  report.chosen_k_standard = best_sdr_k(fixed_rows);
  return report;
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "k,sdr_vocals_db,sdr_background_db,h_norm\n";
  for (const auto& row : report.rows) {
    out << row.k << ',' << format_real(row.sdr_vocals) << ',' << format_real(row.sdr_background) << ',';
    if (row.h_norm) out << format_real(*row.h_norm);
    out << '\n';
  }
  out << "# chosen_k_standard=" << report.chosen_k_standard << '\n';
  out << "# chosen_k_proposed=" << report.chosen_k_proposed << '\n';
  out << "# sdr_variant=simple\n";
}

EvalReport read_report_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "k,sdr_vocals_db,sdr_background_db,h_norm")
    throw std::runtime_error("report csv: bad header");
  EvalReport report;
  bool have_standard = false, have_proposed = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      if (key == "chosen_k_standard") {
        report.chosen_k_standard = std::stoul(value);
        have_standard = true;
      } else if (key == "chosen_k_proposed") {
        report.chosen_k_proposed = std::stoul(value);
        have_proposed = true;
      } else if (key == "sdr_variant" && value != "simple") {
        throw std::runtime_error("report csv: unsupported sdr_variant '" + value + "'");
      }
      continue;
    }
    std::istringstream fields(line);
    std::string k, vox, bg, h;
    if (!std::getline(fields, k, ',') || !std::getline(fields, vox, ',') || !std::getline(fields, bg, ','))
      throw std::runtime_error("report csv: malformed row '" + line + "'");
    std::getline(fields, h);
    EvalRow row{std::stoul(k), std::stod(vox), std::stod(bg), std::nullopt};
    if (!h.empty()) row.h_norm = std::stod(h);
    report.rows.push_back(row);
  }
  if (!have_standard || !have_proposed) throw std::runtime_error("report csv: missing chosen_k metadata");
  return report;
}

}  // namespace kamhub
