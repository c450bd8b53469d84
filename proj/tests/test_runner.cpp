// Batch runners behind the CLI: manifest parsing, simulate outputs,
// dereverb passthrough, evaluate reports, determinism, and scoring.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "derev/runner.hpp"
#include "test_util.hpp"

using namespace derev;
using namespace derev::testutil;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes source/rir/noise WAVs and a manifest with `n` utterances.
std::string write_manifest(const TempDir& tmp, int n, uint64_t seed_base = 100) {
  for (int i = 0; i < n; ++i) {
    save_wav(speech_like(16000, seed_base + i), tmp.path("src" + std::to_string(i) + ".wav"),
             WavBitDepth::kFloat32);
    save_wav(synth_rir(400.0, 2.0, 300.0, seed_base + 50 + i),
             tmp.path("rir" + std::to_string(i) + ".wav"), WavBitDepth::kFloat32);
    save_wav(white_noise(16000, seed_base + 90 + i),
             tmp.path("noise" + std::to_string(i) + ".wav"), WavBitDepth::kFloat32);
  }
  const std::string manifest = tmp.path("manifest.jsonl");
  std::ofstream out(manifest);
  for (int i = 0; i < n; ++i) {
    json j;
    j["source"] = tmp.path("src" + std::to_string(i) + ".wav");
    j["rir"] = tmp.path("rir" + std::to_string(i) + ".wav");
    j["noise"] = tmp.path("noise" + std::to_string(i) + ".wav");
    j["snr_db"] = 10.0 + i;
    j["seed"] = 7 + i;
    out << j.dump() << "\n";
  }
  return manifest;
}

}  // namespace

TEST_CASE("empty manifest produces a report with only the config row") {
  TempDir tmp("run_empty");
  std::ofstream(tmp.path("empty.jsonl"));
  const std::string report = run_simulate(tmp.path("empty.jsonl"), tmp.path("out"));
  std::ifstream in(report);
  std::string line;
  REQUIRE(std::getline(in, line));
  REQUIRE(json::parse(line).contains("config"));
  REQUIRE_FALSE(std::getline(in, line));
}

TEST_CASE("manifest parsing assigns default ids and reports bad lines") {
  TempDir tmp("run_manifest");
  {
    std::ofstream out(tmp.path("m.jsonl"));
    out << R"({"source":"a.wav","rir":"b.wav","noise":"c.wav","snr_db":5})" << "\n";
    out << R"({"source":"d.wav","rir":"e.wav","noise":"f.wav","snr_db":0,"id":"custom"})"
        << "\n";
  }
  const auto entries = parse_simulate_manifest(tmp.path("m.jsonl"));
  REQUIRE(entries.size() == 2);
  REQUIRE(entries[0].id == "utt00000");
  REQUIRE(entries[1].id == "custom");
  REQUIRE(entries[0].snr_db == 5.0);

  {
    std::ofstream out(tmp.path("bad.jsonl"));
    out << "{\"source\": \"a.wav\"\n";  // truncated JSON on line 1
  }
  try {
    parse_simulate_manifest(tmp.path("bad.jsonl"));
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    REQUIRE(std::string(e.what()).find(":1:") != std::string::npos);
  }

  {
    std::ofstream out(tmp.path("missing_key.jsonl"));
    out << R"({"source":"a.wav","rir":"b.wav","snr_db":5})" << "\n";
  }
  REQUIRE_THROWS_AS(parse_simulate_manifest(tmp.path("missing_key.jsonl")), FormatError);
}

TEST_CASE("simulate writes five component WAVs and a metadata record") {
  TempDir tmp("run_sim");
  const std::string manifest = write_manifest(tmp, 1);
  const std::string report = run_simulate(manifest, tmp.path("out"));

  for (const char* key : {"observed", "early_clean", "early_noisy", "late", "noise"})
    REQUIRE(std::filesystem::exists(tmp.path("out/utt00000_" + std::string(key) + ".wav")));
  const json meta = json::parse(slurp(tmp.path("out/utt00000.json")));
  REQUIRE(meta.at("id") == "utt00000");
  REQUIRE(std::fabs(meta.at("snr_db_realized").get<double>() - 10.0) <= 1e-6);

  // additivity survives the float32 round trip
  const TimeSignal obs = load_wav(tmp.path("out/utt00000_observed.wav"));
  const TimeSignal early = load_wav(tmp.path("out/utt00000_early_clean.wav"));
  const TimeSignal late = load_wav(tmp.path("out/utt00000_late.wav"));
  const TimeSignal noise = load_wav(tmp.path("out/utt00000_noise.wav"));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < obs.length(); ++i) {
    const double d = obs.chan(0)[i] - (early.chan(0)[i] + late.chan(0)[i] + noise.chan(0)[i]);
    num += d * d;
    den += obs.chan(0)[i] * obs.chan(0)[i];
  }
  REQUIRE(std::sqrt(num / den) <= 1e-6);
}

TEST_CASE("simulate referencing a missing file writes nothing") {
  TempDir tmp("run_sim_missing");
  {
    std::ofstream out(tmp.path("m.jsonl"));
    json j;
    j["source"] = tmp.path("nope.wav");
    j["rir"] = tmp.path("nope.wav");
    j["noise"] = tmp.path("nope.wav");
    j["snr_db"] = 0.0;
    out << j.dump() << "\n";
  }
  REQUIRE_THROWS_AS(run_simulate(tmp.path("m.jsonl"), tmp.path("out")), UsageError);
  REQUIRE_FALSE(std::filesystem::exists(tmp.path("out/simulate_report.jsonl")));
}

TEST_CASE("simulate reruns are byte-identical, independent of job count") {
  TempDir tmp("run_sim_det");
  const std::string manifest = write_manifest(tmp, 3);
  run_simulate(manifest, tmp.path("a"), 50.0, 1);
  run_simulate(manifest, tmp.path("b"), 50.0, 4);
  // the records embed output paths, so compare with the run directory
  // normalized away
  auto normalized = [&](const std::string& dir) {
    std::string text = slurp(tmp.path(dir + "/simulate_report.jsonl"));
    const std::string prefix = tmp.path(dir);
    for (std::string::size_type p; (p = text.find(prefix)) != std::string::npos;)
      text.erase(p, prefix.size());
    return text;
  };
  REQUIRE(normalized("a") == normalized("b"));
  for (int i = 0; i < 3; ++i) {
    std::ostringstream id;
    id << "utt" << std::setw(5) << std::setfill('0') << i;
    REQUIRE(slurp(tmp.path("a/" + id.str() + "_observed.wav")) ==
            slurp(tmp.path("b/" + id.str() + "_observed.wav")));
  }
}

TEST_CASE("zero-tap dereverb is an analysis-synthesis passthrough") {
  TempDir tmp("run_derev_zero");
  const TimeSignal x = speech_like(16000, 200);
  save_wav(x, tmp.path("in.wav"), WavBitDepth::kFloat32);

  DereverbOptions opt;
  opt.mode = DereverbMode::kWpeSingle;
  opt.wpe.taps = 0;
  run_dereverb({tmp.path("in.wav")}, tmp.path("out"), opt);

  const TimeSignal y = load_wav(tmp.path("out/in.wav"));
  REQUIRE(y.length() == x.length());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 1024; i + 1024 < x.length(); ++i) {
    const double d = y.chan(0)[i] - x.chan(0)[i];
    num += d * d;
    den += x.chan(0)[i] * x.chan(0)[i];
  }
  REQUIRE(std::sqrt(num / den) <= 1e-4);
  REQUIRE(std::filesystem::exists(tmp.path("out/dereverb_log.jsonl")));
}

TEST_CASE("dereverb usage errors") {
  TempDir tmp("run_derev_usage");
  save_wav(white_noise(4000, 201), tmp.path("a.wav"), WavBitDepth::kFloat32);
  save_wav(white_noise(4000, 202), tmp.path("b.wav"), WavBitDepth::kFloat32);
  REQUIRE_THROWS_AS(parse_mode("wpe"), UsageError);
  DereverbOptions opt;
  opt.mode = DereverbMode::kVace;
  REQUIRE_THROWS_AS(run_dereverb({tmp.path("a.wav")}, tmp.path("out"), opt), UsageError);
  opt.mode = DereverbMode::kWpeSingle;
  opt.psd_file = tmp.path("psd.spg");
  REQUIRE_THROWS_AS(
      run_dereverb({tmp.path("a.wav"), tmp.path("b.wav")}, tmp.path("out"), opt),
      UsageError);
  opt.psd_file.clear();
  REQUIRE_THROWS_AS(run_dereverb({tmp.path("ghost.wav")}, tmp.path("out"), opt),
                    UsageError);
}

TEST_CASE("vace dereverb runs end to end with a delayed virtual copy") {
  TempDir tmp("run_derev_vace");
  const TimeSignal x = speech_like(16000, 203);
  save_wav(x, tmp.path("in.wav"), WavBitDepth::kFloat32);
  DereverbOptions opt;
  opt.mode = DereverbMode::kVace;
  opt.virtual_source = "delayed:1";
  opt.wpe.taps = 4;
  run_dereverb({tmp.path("in.wav")}, tmp.path("out"), opt);
  const TimeSignal y = load_wav(tmp.path("out/in.wav"));
  REQUIRE(y.length() == x.length());
  REQUIRE(energy(y) > 0.0);
}

TEST_CASE("evaluating the reference against itself zeroes the metrics") {
  TempDir tmp("run_eval_self");
  const std::string manifest = write_manifest(tmp, 2);
  const std::string report = run_simulate(manifest, tmp.path("sim"));

  // pose the early-clean reference as the processed output
  std::filesystem::create_directories(tmp.path("proc"));
  for (int i = 0; i < 2; ++i) {
    std::ostringstream id;
    id << "utt" << std::setw(5) << std::setfill('0') << i;
    std::filesystem::copy_file(tmp.path("sim/" + id.str() + "_early_clean.wav"),
                               tmp.path("proc/" + id.str() + "_observed.wav"));
  }
  EvaluateOptions opt;
  const std::string eval = run_evaluate(report, tmp.path("proc"), tmp.path("eval.jsonl"), opt);

  std::ifstream in(eval);
  std::string line;
  std::getline(in, line);  // config
  int rows = 0;
  json agg;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    if (j.value("aggregate", false)) {
      agg = j;
      continue;
    }
    ++rows;
    REQUIRE(j.at("lsd_out_db").get<double>() <= 1e-3);  // float32 dump noise only
    REQUIRE(j.at("snr_out_db").get<double>() >= 100.0);
    REQUIRE(j.at("lsd_in_db").get<double>() > 1.0);
  }
  REQUIRE(rows == 2);
  REQUIRE(agg.at("mean_snr_out_db").get<double>() >= 100.0);
}

TEST_CASE("aggregate row is the mean of the per-utterance rows") {
  TempDir tmp("run_eval_agg");
  const std::string manifest = write_manifest(tmp, 2, 300);
  const std::string report = run_simulate(manifest, tmp.path("sim"));

  std::filesystem::create_directories(tmp.path("proc"));
  for (int i = 0; i < 2; ++i) {
    std::ostringstream id;
    id << "utt" << std::setw(5) << std::setfill('0') << i;
    std::filesystem::copy_file(tmp.path("sim/" + id.str() + "_observed.wav"),
                               tmp.path("proc/" + id.str() + "_observed.wav"));
  }
  const std::string eval =
      run_evaluate(report, tmp.path("proc"), tmp.path("eval.jsonl"), EvaluateOptions{});

  std::ifstream in(eval);
  std::string line;
  std::getline(in, line);
  std::vector<json> rows;
  json agg;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    if (j.value("aggregate", false))
      agg = j;
    else
      rows.push_back(j);
  }
  double mean = 0.0;
  for (const auto& r : rows) mean += r.at("lsd_out_db").get<double>();
  mean /= rows.size();
  REQUIRE(agg.at("mean_lsd_out_db").get<double>() == Catch::Approx(mean).epsilon(1e-14));
  // processed == observed, so in/out metrics coincide
  for (const auto& r : rows)
    REQUIRE(r.at("lsd_out_db").get<double>() ==
            Catch::Approx(r.at("lsd_in_db").get<double>()).margin(1e-12));
}

TEST_CASE("evaluate reruns are byte-identical across job counts") {
  TempDir tmp("run_eval_det");
  const std::string manifest = write_manifest(tmp, 3, 400);
  const std::string report = run_simulate(manifest, tmp.path("sim"));
  std::filesystem::create_directories(tmp.path("proc"));
  for (int i = 0; i < 3; ++i) {
    std::ostringstream id;
    id << "utt" << std::setw(5) << std::setfill('0') << i;
    std::filesystem::copy_file(tmp.path("sim/" + id.str() + "_early_clean.wav"),
                               tmp.path("proc/" + id.str() + "_observed.wav"));
  }
  EvaluateOptions opt;
  opt.l1 = true;
  run_evaluate(report, tmp.path("proc"), tmp.path("a.jsonl"), opt, 1);
  run_evaluate(report, tmp.path("proc"), tmp.path("b.jsonl"), opt, 4);
  REQUIRE(slurp(tmp.path("a.jsonl")) == slurp(tmp.path("b.jsonl")));
}

TEST_CASE("metric selection strings") {
  const EvaluateOptions a = parse_metric_selection("lsd,snr");
  REQUIRE(a.lsd);
  REQUIRE(a.snr);
  REQUIRE_FALSE(a.l1);
  const EvaluateOptions b = parse_metric_selection("l1,ncs");
  REQUIRE_FALSE(b.lsd);
  REQUIRE(b.l1);
  REQUIRE(b.ncs);
  REQUIRE_THROWS_AS(parse_metric_selection("lsd,wer"), UsageError);
}

TEST_CASE("score runner ties the file formats together") {
  TempDir tmp("run_score");
  {
    std::map<std::string, EmbeddingVector> table;
    table["spk1"] = EmbeddingVector::from({1.0, 0.0, 0.0});
    table["spk1b"] = EmbeddingVector::from({0.9, 0.1, 0.0});
    table["spk2"] = EmbeddingVector::from({0.0, 0.0, 1.0});
    save_embeddings(table, tmp.path("emb.txt"));
  }
  {
    std::ofstream out(tmp.path("trials.txt"));
    out << "spk1 spk1b target\n";
    out << "spk1 spk2 nontarget\n";
    out << "spk1b spk2 nontarget\n";
  }
  const ScoreResult r = run_score(tmp.path("trials.txt"), tmp.path("emb.txt"), DcfParams{},
                                  tmp.path("det.txt"));
  REQUIRE(r.eer_value == 0.0);
  REQUIRE(r.min_dcf_value == 0.0);
  REQUIRE(std::filesystem::exists(tmp.path("det.txt")));

  std::ofstream(tmp.path("trials_bad.txt")) << "spk1 ghost target\n";
  REQUIRE_THROWS_AS(
      run_score(tmp.path("trials_bad.txt"), tmp.path("emb.txt"), DcfParams{}, ""),
      LookupError);
}
