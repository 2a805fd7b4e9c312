#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "kamhub/evaluation.hpp"
#include "synthetic.hpp"
#include "test_helpers.hpp"

using namespace kamhub;

namespace {

SeparationConfig small_config() {
  SeparationConfig c;
  c.stft = StftConfig{512, 128};
  return c;
}

kamhub::testing::SyntheticTrack small_track(unsigned seed) {
  return kamhub::testing::make_synthetic_track({8000, 4.0, 128, 8, 2, 0.2, -6.0, seed});
}

}  // namespace

TEST_CASE("sdr") {
  const auto ref = AudioBuffer::mono(kamhub::testing::random_signal(1000, 1), 8000);
  CHECK(sdr(ref, ref) == kSdrPerfect);
  CHECK(std::isinf(sdr(ref, ref)));
  CHECK(sdr(ref, AudioBuffer::mono(std::vector<double>(1000, 0.0), 8000)) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

  SUBCASE("noise at 1% of the reference energy is 20 dB") {
    std::vector<double> est = {3.0, 4.0, 0.0, 0.0};
    const auto r = AudioBuffer::mono({3.0, 4.0, 0.0, 0.0}, 8000);  // energy 25
    est[2] = 0.5;                                                  // residual 0.25
    CHECK(sdr(r, AudioBuffer::mono(est, 8000)) == doctest::Approx(20.0).epsilon(1e-12));
  }
  SUBCASE("scaled reference") {
    for (double c : {0.0, 0.5, 0.9, 1.5, -1.0, 3.0}) {
      auto est = ref.channel(0);
      for (auto& v : est) v *= c;
      CHECK(sdr(ref, AudioBuffer::mono(est, 8000)) == doctest::Approx(-10.0 * std::log10((1 - c) * (1 - c))).epsilon(1e-9));
    }
  }
  CHECK_THROWS_AS(sdr(ref, AudioBuffer::mono(std::vector<double>(999, 0.0), 8000)), std::invalid_argument);
  CHECK_THROWS_AS(sdr(AudioBuffer::mono(std::vector<double>(10, 0.0), 8000), AudioBuffer::mono(std::vector<double>(10, 1.0), 8000)),
                  std::invalid_argument);
}

TEST_CASE("best_sdr_k") {
  std::vector<EvalRow> rows{{0, 1.0, 0, {}}, {25, 2.0, 0, {}}, {50, 3.0, 0, {}}, {100, 4.5, 0, {}}};
  CHECK(best_sdr_k(rows) == 100);
  rows[1].sdr_vocals = 4.5;
  CHECK(best_sdr_k(rows) == 25);
  rows[2].sdr_vocals = kSdrPerfect;
  CHECK(best_sdr_k(rows) == 50);
  CHECK_THROWS_AS(best_sdr_k(std::vector<EvalRow>{}), std::invalid_argument);
}

TEST_CASE("sweep_report") {
  const auto track = small_track(21);
  const auto ks = default_fixed_k_list();
  const auto before = distance_matrix_evaluations();
  const auto report = sweep_report(track.mixture, track.vocals, track.background, ks, small_config());
  CHECK(distance_matrix_evaluations() == before + 1);

  const std::size_t n = frame_count(track.mixture.frames(), StftConfig{512, 128});
  REQUIRE_FALSE(report.rows.empty());
  for (std::size_t i = 1; i < report.rows.size(); ++i) CHECK(report.rows[i - 1].k < report.rows[i].k);
  CHECK(report.rows.back().k <= n - 1);

  auto has_row = [&](std::size_t k) {
    return std::any_of(report.rows.begin(), report.rows.end(), [&](const EvalRow& r) { return r.k == k; });
  };
  CHECK(has_row(report.chosen_k_standard));
  CHECK(has_row(report.chosen_k_proposed));
  CHECK(has_row(0));
  CHECK(has_row(n - 1));  // 800, 1600 and 3200 clamp to N-1 for this short track

  // k = 0 passes the mixture to the background and leaves the vocals silent.
  CHECK(report.rows.front().sdr_background == doctest::Approx(sdr(track.background, track.mixture)).epsilon(1e-6));
  CHECK(report.rows.front().sdr_vocals == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK_FALSE(report.rows.front().h_norm.has_value());

  // The proposed k agrees with a standalone separation in auto mode.
  const auto direct = separate(track.mixture, small_config());
  CHECK(direct.chosen_k == report.chosen_k_proposed);
  const auto proposed = std::find_if(report.rows.begin(), report.rows.end(),
                                     [&](const EvalRow& r) { return r.k == report.chosen_k_proposed; });
  REQUIRE(proposed->h_norm.has_value());
  CHECK(proposed->sdr_vocals == doctest::Approx(sdr(track.vocals, direct.vocals)).epsilon(1e-9));
}

TEST_CASE("sweep_report preconditions") {
  const auto track = small_track(22);
  const auto silent = AudioBuffer::mono(std::vector<double>(track.mixture.frames(), 0.0), 8000);
  const std::vector<std::size_t> ks{0, 8};
  CHECK_THROWS_AS(sweep_report(track.background, silent, track.background, ks, small_config()), std::invalid_argument);
  const auto shorter = AudioBuffer::mono(std::vector<double>(track.mixture.frames() - 1, 0.1), 8000);
  CHECK_THROWS_AS(sweep_report(track.mixture, shorter, track.background, ks, small_config()), std::invalid_argument);
  CHECK_THROWS_AS(sweep_report(track.mixture, track.vocals, track.background, std::vector<std::size_t>{}, small_config()),
                  std::invalid_argument);
}

TEST_CASE("report CSV") {
  EvalReport r;
  r.rows = {{0, -12.5, 12.5, std::nullopt}, {25, 3.0000000000000004, kSdrPerfect, 0.125}, {31, 1e-300, -0.0, -0.7}};
  r.chosen_k_standard = 25;
  r.chosen_k_proposed = 31;
  std::stringstream csv;
  write_report_csv(csv, r);
  const auto text = csv.str();
  CHECK(text.rfind("k,sdr_vocals_db,sdr_background_db,h_norm\n", 0) == 0);
  CHECK(text.find("0,-12.5,12.5,\n") != std::string::npos);
  CHECK(text.find(",inf,") != std::string::npos);
  CHECK(text.find("# chosen_k_standard=25\n") != std::string::npos);
  CHECK(text.find("# chosen_k_proposed=31\n") != std::string::npos);
  CHECK(text.find("# sdr_variant=simple\n") != std::string::npos);
  CHECK(read_report_csv(csv) == r);

  SUBCASE("random reports round trip") {
    std::mt19937 rng(8);
    std::normal_distribution<double> g(0.0, 10.0);
    for (int t = 0; t < 20; ++t) {
      EvalReport rr;
      for (std::size_t k = 0; k < 12; ++k) {
        EvalRow row{k * 7, g(rng), g(rng), std::nullopt};
        if (rng() % 2) row.h_norm = g(rng) / 50.0;
        rr.rows.push_back(row);
      }
      rr.chosen_k_standard = best_sdr_k(rr.rows);
      rr.chosen_k_proposed = 14;
      std::stringstream s;
      write_report_csv(s, rr);
      CHECK(read_report_csv(s) == rr);
    }
  }
  std::istringstream missing("k,sdr_vocals_db,sdr_background_db,h_norm\n0,1,2,\n");
  CHECK_THROWS(read_report_csv(missing));
}
