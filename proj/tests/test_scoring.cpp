// Detection metrics: EER and minDCF against brute-force counting oracles,
// calibration invariance, DET enumeration, and trial-list scoring.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <random>

#include "derev/scoring.hpp"
#include "test_util.hpp"

using namespace derev;
using namespace derev::testutil;

namespace {

// Naive counting, no sorting tricks shared with the library path.
void count_rates(const TrialScoreSet& s, double th, double& p_miss, double& p_fa) {
  std::size_t miss = 0, fa = 0;
  for (double v : s.target_scores)
    if (v < th) ++miss;
  for (double v : s.nontarget_scores)
    if (v >= th) ++fa;
  p_miss = static_cast<double>(miss) / s.target_scores.size();
  p_fa = static_cast<double>(fa) / s.nontarget_scores.size();
}

double brute_force_eer(const TrialScoreSet& s) {
  std::vector<double> th(s.target_scores);
  th.insert(th.end(), s.nontarget_scores.begin(), s.nontarget_scores.end());
  std::sort(th.begin(), th.end());
  th.erase(std::unique(th.begin(), th.end()), th.end());
  th.push_back(std::numeric_limits<double>::infinity());

  double prev_miss = 0.0, prev_fa = 0.0, prev_d = -1.0;
  for (std::size_t i = 0; i < th.size(); ++i) {
    double miss, fa;
    count_rates(s, th[i], miss, fa);
    const double d = miss - fa;
    if (d >= 0.0) {
      if (i == 0) return miss;
      const double t = (d - prev_d) > 0.0 ? -prev_d / (d - prev_d) : 0.0;
      return prev_miss + t * (miss - prev_miss);
    }
    prev_miss = miss;
    prev_fa = fa;
    prev_d = d;
  }
  return 0.5 * (prev_miss + prev_fa);
}

double brute_force_min_dcf(const TrialScoreSet& s, const DcfParams& p) {
  std::vector<double> th(s.target_scores);
  th.insert(th.end(), s.nontarget_scores.begin(), s.nontarget_scores.end());
  th.push_back(-std::numeric_limits<double>::infinity());
  th.push_back(std::numeric_limits<double>::infinity());
  const double norm = std::min(p.c_miss * p.p_tar, p.c_fa * (1.0 - p.p_tar));
  double best = std::numeric_limits<double>::infinity();
  for (double t : th) {
    double miss, fa;
    count_rates(s, t, miss, fa);
    best = std::min(best, (p.c_miss * p.p_tar * miss + p.c_fa * (1.0 - p.p_tar) * fa) / norm);
  }
  return best;
}

TrialScoreSet random_scores(std::mt19937_64& rng, double sep) {
  std::uniform_int_distribution<int> count(1, 40);
  std::normal_distribution<double> tgt(sep, 1.0), non(0.0, 1.0);
  TrialScoreSet s;
  const int nt = count(rng), nn = count(rng);
  for (int i = 0; i < nt; ++i) s.target_scores.push_back(tgt(rng));
  for (int i = 0; i < nn; ++i) s.nontarget_scores.push_back(non(rng));
  return s;
}

}  // namespace

TEST_CASE("perfectly separable scores give zero EER and zero minDCF") {
  TrialScoreSet s;
  s.target_scores = {0.9, 0.8, 0.95};
  s.nontarget_scores = {0.1, 0.2, -0.3, 0.0};
  REQUIRE(eer(s).first == 0.0);
  REQUIRE(min_dcf(s, DcfParams{}).first == 0.0);
  // the EER threshold separates the classes
  const double th = eer(s).second;
  REQUIRE(th > 0.2);
  REQUIRE(th <= 0.8);
}

TEST_CASE("fully overlapping scores give 0.5 EER") {
  TrialScoreSet s;
  s.target_scores = {0.0, 1.0};
  s.nontarget_scores = {0.0, 1.0};
  REQUIRE(eer(s).first == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("EER is invariant under score negation with swapped labels") {
  std::mt19937_64 rng(71);
  for (int rep = 0; rep < 20; ++rep) {
    const TrialScoreSet s = random_scores(rng, 1.5);
    TrialScoreSet swapped;
    for (double v : s.target_scores) swapped.nontarget_scores.push_back(-v);
    for (double v : s.nontarget_scores) swapped.target_scores.push_back(-v);
    // miss and fa swap roles, but with >= vs < the rates can differ by one
    // tied trial; allow that quantization
    const double step = 1.0 / std::min(s.target_scores.size(), s.nontarget_scores.size());
    REQUIRE(std::fabs(eer(s).first - eer(swapped).first) <= step);
  }
}

TEST_CASE("EER matches the brute-force oracle on random sets") {
  std::mt19937_64 rng(72);
  for (int rep = 0; rep < 200; ++rep) {
    const TrialScoreSet s = random_scores(rng, rep % 2 ? 2.0 : 0.5);
    REQUIRE(eer(s).first == Catch::Approx(brute_force_eer(s)).margin(1e-12));
  }
}

TEST_CASE("minDCF matches the exhaustive oracle and stays in [0, 1]") {
  std::mt19937_64 rng(73);
  const DcfParams params{};
  for (int rep = 0; rep < 200; ++rep) {
    const TrialScoreSet s = random_scores(rng, rep % 2 ? 2.0 : 0.5);
    const double v = min_dcf(s, params).first;
    REQUIRE(v == Catch::Approx(brute_force_min_dcf(s, params)).margin(1e-12));
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 1.0 + 1e-12);
  }
}

TEST_CASE("metrics are invariant under a monotone calibration") {
  std::mt19937_64 rng(74);
  for (int rep = 0; rep < 20; ++rep) {
    const TrialScoreSet s = random_scores(rng, 1.0);
    TrialScoreSet cal;
    for (double v : s.target_scores) cal.target_scores.push_back(std::tanh(v));
    for (double v : s.nontarget_scores) cal.nontarget_scores.push_back(std::tanh(v));
    REQUIRE(eer(cal).first == Catch::Approx(eer(s).first).margin(1e-12));
    REQUIRE(min_dcf(cal, DcfParams{}).first ==
            Catch::Approx(min_dcf(s, DcfParams{}).first).margin(1e-12));
  }
}

TEST_CASE("DET staircase by hand enumeration") {
  TrialScoreSet s;
  s.target_scores = {0.8, 0.4};
  s.nontarget_scores = {0.6, 0.2};
  // thresholds 0.2, 0.4, 0.6, 0.8, inf after the accept-all start
  const auto det = det_points(s);
  const std::vector<std::pair<double, double>> expect = {
      {1.0, 0.0}, {0.5, 0.0}, {0.5, 0.5}, {0.0, 0.5}, {0.0, 1.0}};
  REQUIRE(det == expect);
}

TEST_CASE("DET endpoints span accept-all to reject-all") {
  std::mt19937_64 rng(75);
  const TrialScoreSet s = random_scores(rng, 1.0);
  const auto det = det_points(s);
  REQUIRE(det.front() == std::make_pair(1.0, 0.0));
  REQUIRE(det.back() == std::make_pair(0.0, 1.0));
  for (std::size_t i = 1; i < det.size(); ++i) {
    REQUIRE(det[i].first <= det[i - 1].first);
    REQUIRE(det[i].second >= det[i - 1].second);
  }
}

TEST_CASE("degenerate score sets are rejected") {
  TrialScoreSet s;
  s.target_scores = {0.5};
  REQUIRE_THROWS_AS(eer(s), PreconditionError);
  s.nontarget_scores = {std::nan("")};
  REQUIRE_THROWS_AS(min_dcf(s, DcfParams{}), PreconditionError);
  DcfParams bad;
  bad.p_tar = 1.5;
  s.nontarget_scores = {0.1};
  REQUIRE_THROWS_AS(min_dcf(s, bad), ConfigError);
}

TEST_CASE("trial scoring applies the cosine oracle per trial") {
  std::map<std::string, EmbeddingVector> table;
  table["a"] = EmbeddingVector::from({1.0, 0.0});
  table["b"] = EmbeddingVector::from({1.0, 1.0});
  table["c"] = EmbeddingVector::from({0.0, 2.0});

  TrialList trials;
  trials.entries = {{"a", "b", true}, {"a", "c", false}, {"b", "c", false}};
  const TrialScoreSet s = score_trials(trials, table);
  REQUIRE(s.target_scores.size() == 1);
  REQUIRE(s.nontarget_scores.size() == 2);
  REQUIRE(s.target_scores[0] == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  REQUIRE(s.nontarget_scores[0] == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(s.nontarget_scores[1] == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("missing embedding ids name the offender") {
  std::map<std::string, EmbeddingVector> table;
  table["a"] = EmbeddingVector::from({1.0, 0.0});
  TrialList trials;
  trials.entries = {{"a", "ghost", true}};
  try {
    score_trials(trials, table);
    FAIL("expected LookupError");
  } catch (const LookupError& e) {
    REQUIRE(std::string(e.what()).find("ghost") != std::string::npos);
  }
}

TEST_CASE("trial list parsing and rejection") {
  TempDir tmp("trials");
  {
    std::ofstream out(tmp.path("good.txt"));
    out << "spk1 utt1 target\n\nspk2 utt2 nontarget\n";
  }
  const TrialList list = load_trial_list(tmp.path("good.txt"));
  REQUIRE(list.entries.size() == 2);
  REQUIRE(list.entries[0].target);
  REQUIRE_FALSE(list.entries[1].target);
  REQUIRE(list.entries[1].enroll_id == "spk2");

  {
    std::ofstream out(tmp.path("bad.txt"));
    out << "spk1 utt1 maybe\n";
  }
  REQUIRE_THROWS_AS(load_trial_list(tmp.path("bad.txt")), FormatError);
  REQUIRE_THROWS_AS(load_trial_list(tmp.path("missing.txt")), IoError);
}

TEST_CASE("DET file is two plain columns") {
  TempDir tmp("det");
  TrialScoreSet s;
  s.target_scores = {0.9};
  s.nontarget_scores = {0.1};
  save_det(det_points(s), tmp.path("det.txt"));
  std::ifstream in(tmp.path("det.txt"));
  double fa, miss;
  REQUIRE(in >> fa >> miss);
  REQUIRE(fa == 1.0);
  REQUIRE(miss == 0.0);
}
