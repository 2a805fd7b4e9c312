#include "kamhub/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <unistd.h>

#include "kamhub/audio_io.hpp"
#include "kamhub/evaluation.hpp"
#include "kamhub/knn_hubness.hpp"
#include "kamhub/separation.hpp"
#include "kamhub/stft.hpp"

namespace fs = std::filesystem;

namespace kamhub {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string input;
  std::string out_dir = ".";
  std::size_t fft_size = 4096;
  std::size_t hop_size = 1024;
  std::optional<std::size_t> k;
  bool auto_k = false;
  std::string sweep = "0.001:0.010:0.45";
  std::vector<std::size_t> k_list = default_fixed_k_list();
  double mask_exponent = 2.0;
  std::string encoding = "float32";
  std::string vocals_ref;
  std::string background_ref;
  bool dump_spectrogram = false;
};

SweepFractions parse_sweep(const std::string& text) {
  SweepFractions f;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> f.start >> c1 >> f.step >> c2 >> f.stop) || c1 != ':' || c2 != ':' || in.peek() != EOF)
    throw UsageError("--sweep expects start:step:stop, got '" + text + "'");
  if (!(f.start > 0.0) || !(f.start <= f.stop) || !(f.stop < 1.0) || !(f.step > 0.0))
    throw UsageError("--sweep fractions must satisfy 0 < start <= stop < 1 and step > 0");
  return f;
}

SeparationConfig make_config(const Options& o) {
  SeparationConfig config;
  config.stft.fft_size = o.fft_size;
  config.stft.hop_size = o.hop_size;
  config.mask_exponent = o.mask_exponent;
  if (o.k && o.auto_k) throw UsageError("--k and --auto-k are mutually exclusive");
  if (o.k)
    config.k_mode = FixedK{*o.k};
  else
    config.k_mode = AutoK{parse_sweep(o.sweep)};
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return config;
}

// Stages every output next to its destination and renames them all only once
// the whole command has succeeded.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  ~OutputSet() {
    std::error_code ec;
    for (const auto& [tmp, dst] : staged_) fs::remove(tmp, ec);
  }

  fs::path stage(const std::string& name) {
    fs::create_directories(dir_);
    fs::path tmp = dir_ / ("." + name + ".tmp" + std::to_string(::getpid()));
    staged_.emplace_back(tmp, dir_ / name);
    return tmp;
  }

  void text(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = stage(name);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + path.string());
  }

  void commit() {
    for (const auto& [tmp, dst] : staged_) fs::rename(tmp, dst);
    staged_.clear();
  }

 private:
  fs::path dir_;
  std::vector<std::pair<fs::path, fs::path>> staged_;
};

// Little-endian: "KMAG", uint32 bins, uint32 frames, then float64 values
// column by column (one frame at a time).
void write_magnitude_bin(const fs::path& path, const MagnitudeSpectrogram& mag) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  auto put32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>(v >> (8 * i)));
  };
  out.write("KMAG", 4);
  put32(static_cast<std::uint32_t>(mag.frequency_bins()));
  put32(static_cast<std::uint32_t>(mag.frames()));
  for (double v : mag.values.data()) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>(bits >> (8 * i)));
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

WavEncoding parse_encoding(const std::string& name) {
  if (name == "float32") return WavEncoding::float32;
  if (name == "pcm16") return WavEncoding::pcm16;
  if (name == "pcm24") return WavEncoding::pcm24;
  throw UsageError("unknown encoding '" + name + "'");
}

AudioBuffer load_mixture(const std::string& path) {
  AudioBuffer audio = load_wav(path);
  if (audio.empty()) throw std::runtime_error(path + ": no audio samples");
  return to_mono(audio);
}

void cmd_separate(const Options& o) {
  const auto config = make_config(o);
  const auto encoding = parse_encoding(o.encoding);
  const auto mix = load_mixture(o.input);
  const auto result = separate(mix, config);

  OutputSet outputs(o.out_dir);
  save_wav(outputs.stage("background.wav"), result.background, encoding);
  save_wav(outputs.stage("vocals.wav"), result.vocals, encoding);
  outputs.text("chosen_k.txt", [&](std::ostream& out) { out << result.chosen_k << '\n'; });
  if (result.profile)
    outputs.text("hubness.csv", [&](std::ostream& out) { write_profile_csv(out, *result.profile); });
  outputs.commit();
  std::cout << "chosen k = " << result.chosen_k << '\n';
}

void cmd_hubness(const Options& o) {
  if (o.k) throw UsageError("hubness does not take --k");
  const auto config = make_config(o);
  const auto mix = load_mixture(o.input);
  const auto mag = magnitude(stft_forward(mix, config.stft));
  const auto ks = sweep_k_values(mag.frames(), std::get<AutoK>(config.k_mode).sweep);
  const auto profile = hubness_profile(distance_matrix(mag), ks);

  OutputSet outputs(o.out_dir);
  outputs.text("hubness.csv", [&](std::ostream& out) { write_profile_csv(out, profile); });
  if (o.dump_spectrogram) write_magnitude_bin(outputs.stage("magnitude.bin"), mag);
  outputs.commit();
  std::cout << "selected k = " << select_k(profile) << " of " << mag.frames() << " frames\n";
}

void write_report(const Options& o, const EvalReport& report) {
  OutputSet outputs(o.out_dir);
  outputs.text("report.csv", [&](std::ostream& out) { write_report_csv(out, report); });
  outputs.commit();
  std::cout << "standard k = " << report.chosen_k_standard << ", proposed k = " << report.chosen_k_proposed
            << '\n';
}

struct References {
  AudioBuffer mix, vocals, background;
};

References load_references(const Options& o) {
  References refs{load_mixture(o.input), load_mixture(o.vocals_ref), load_mixture(o.background_ref)};
  if (refs.vocals.frames() != refs.mix.frames() || refs.background.frames() != refs.mix.frames())
    throw std::runtime_error("reference lengths do not match the mixture");
  return refs;
}

void cmd_sweep(const Options& o) {
  if (o.k) throw UsageError("sweep takes --k-list, not --k");
  const auto config = make_config(o);
  const auto refs = load_references(o);
  write_report(o, sweep_report(refs.mix, refs.vocals, refs.background, o.k_list, config));
}

// One separation scored against the mixture baseline (k = 0); with --auto-k
// the hubness-selected k is the only non-baseline row.
void cmd_eval(const Options& o) {
  const auto config = make_config(o);
  const auto refs = load_references(o);
  std::vector<std::size_t> ks{0};
  if (o.k) ks.push_back(*o.k);
  write_report(o, sweep_report(refs.mix, refs.vocals, refs.background, ks, config));
}

void add_stft_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--fft-size", o.fft_size, "FFT size in samples (power of two)")->check(CLI::PositiveNumber);
  cmd->add_option("--hop-size", o.hop_size, "Hop size in samples")->check(CLI::PositiveNumber);
  cmd->add_option("--sweep", o.sweep, "Hubness sweep as start:step:stop fractions of the frame count");
  cmd->add_option("--mask-exponent", o.mask_exponent, "Soft mask exponent")->check(CLI::PositiveNumber);
  cmd->add_option("-o,--out", o.out_dir, "Output directory");
}

void add_k_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--k", o.k, "Fixed number of neighbours (0 = passthrough)");
  cmd->add_flag("--auto-k", o.auto_k, "Pick k by maximum normalized hubness (default)");
}

void add_reference_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--vocals", o.vocals_ref, "Reference vocals WAV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--background", o.background_ref, "Reference accompaniment WAV")
      ->required()
      ->check(CLI::ExistingFile);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"k-NN median filtering vocal separation with hubness-based choice of k", "kamhub"};
  app.require_subcommand(1);
  Options o;

  auto* separate_cmd = app.add_subcommand("separate", "Separate a mixture into background and vocals");
  auto* hubness_cmd = app.add_subcommand("hubness", "Write the normalized hubness profile of a mixture");
  auto* sweep_cmd = app.add_subcommand("sweep", "Compare the fixed-k sweep with hubness selection");
  auto* eval_cmd = app.add_subcommand("eval", "Score one separation against reference stems");

  for (auto* cmd : {separate_cmd, hubness_cmd, sweep_cmd, eval_cmd}) {
    cmd->add_option("mixture", o.input, "Mixture WAV")->required();
    add_stft_flags(cmd, o);
  }
  add_k_flags(separate_cmd, o);
  add_k_flags(eval_cmd, o);
  separate_cmd->add_option("--encoding", o.encoding, "Output WAV encoding: float32, pcm16 or pcm24");
  hubness_cmd->add_flag("--dump-spectrogram", o.dump_spectrogram, "Also write magnitude.bin");
  add_reference_flags(sweep_cmd, o);
  add_reference_flags(eval_cmd, o);
  sweep_cmd->add_option("--k-list", o.k_list, "Fixed k values for the conventional sweep")->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*separate_cmd) cmd_separate(o);
    else if (*hubness_cmd) cmd_hubness(o);
    else if (*sweep_cmd) cmd_sweep(o);
    else cmd_eval(o);
  } catch (const UsageError& e) {
    std::cerr << "kamhub: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "kamhub: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace kamhub
