// derev/runner.hpp
//
// Batch orchestration behind the CLI subcommands: manifest-driven
// simulation, dereverberation over WAV lists, metric evaluation, and
// trial scoring. Reports are JSON lines, written in manifest order
// regardless of worker completion order, so fixed seeds give
// byte-identical outputs.

// Copyright 2026

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef DEREV_RUNNER_HPP
#define DEREV_RUNNER_HPP

#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "derev/errors.hpp"
#include "derev/features.hpp"
#include "derev/losses.hpp"
#include "derev/room.hpp"
#include "derev/scoring.hpp"
#include "derev/signal.hpp"
#include "derev/spg.hpp"
#include "derev/stft.hpp"
#include "derev/wav.hpp"
#include "derev/wpe.hpp"

namespace derev {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline void require_16k(const TimeSignal& s, const std::string& what) {
  if (s.sample_rate != 16000)
    throw FormatError(what + ": sample rate " + std::to_string(s.sample_rate) +
                      " not supported (16 kHz only)");
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads; rethrows the first
// worker exception.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr err;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int nthreads = std::min<std::size_t>(jobs, n);
  for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

// ---- simulate ----

struct SimulateEntry {
  std::string id;
  std::string source, rir, noise;
  double snr_db = 0.0;
  uint64_t seed = 0;
};

inline std::vector<SimulateEntry> parse_simulate_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path);
  std::vector<SimulateEntry> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    SimulateEntry e;
    try {
      e.source = j.at("source").get<std::string>();
      e.rir = j.at("rir").get<std::string>();
      e.noise = j.at("noise").get<std::string>();
      e.snr_db = j.at("snr_db").get<double>();
      e.seed = j.value("seed", uint64_t{0});
      std::ostringstream def;
      def << "utt" << std::setw(5) << std::setfill('0') << entries.size();
      e.id = j.value("id", def.str());
    } catch (const json::exception& ex) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

// Writes observed/early_clean/early_noisy/late/noise WAVs plus one JSON
// metadata record per utterance; returns the summary report path.
inline std::string run_simulate(const std::string& manifest, const std::string& out_dir,
                                double boundary_ms = 50.0, int jobs = 1) {
  const auto entries = parse_simulate_manifest(manifest);
  // Validate everything before writing anything.
  for (const auto& e : entries)
    for (const std::string& p : {e.source, e.rir, e.noise})
      if (!fs::exists(p)) throw UsageError("manifest references missing file: " + p);

  fs::create_directories(out_dir);
  std::vector<json> records(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    const SimulateEntry& e = entries[i];
    const TimeSignal source = load_wav(e.source);
    const TimeSignal rir_sig = load_wav(e.rir);
    const TimeSignal noise = load_wav(e.noise);
    require_16k(source, e.source);
    require_16k(rir_sig, e.rir);
    require_16k(noise, e.noise);

    const RirBundle rir = split_rir(rir_sig, boundary_ms);
    const ObservationSet obs = simulate(source, rir, noise, e.snr_db, e.seed);

    json rec;
    rec["id"] = e.id;
    rec["seed"] = e.seed;
    rec["snr_db_requested"] = e.snr_db;
    rec["snr_db_realized"] = obs.snr_db;
    rec["rir"] = {{"path", e.rir},
                  {"main_peak_index", rir.main_peak_index},
                  {"early_boundary_samples", rir.early_boundary}};
    const struct {
      const char* key;
      const TimeSignal* sig;
    } outputs[] = {{"observed", &obs.observed},
                   {"early_clean", &obs.early_clean},
                   {"early_noisy", &obs.early_noisy},
                   {"late", &obs.late},
                   {"noise", &obs.noise}};
    for (const auto& o : outputs) {
      const std::string p = (fs::path(out_dir) / (e.id + "_" + o.key + ".wav")).string();
      save_wav(*o.sig, p, WavBitDepth::kFloat32);
      rec[o.key] = p;
    }
    const std::string meta = (fs::path(out_dir) / (e.id + ".json")).string();
    std::ofstream mf(meta);
    mf << rec.dump(2) << "\n";
    records[i] = std::move(rec);
  });

  const std::string report = (fs::path(out_dir) / "simulate_report.jsonl").string();
  std::ofstream rf(report);
  rf << json{{"config", {{"manifest", manifest}, {"boundary_ms", boundary_ms}}}}.dump() << "\n";
  for (const auto& r : records) rf << r.dump() << "\n";
  return report;
}

// ---- dereverb ----

enum class DereverbMode { kWpeSingle, kWpeIterative, kVace };

inline DereverbMode parse_mode(const std::string& s) {
  if (s == "wpe_single") return DereverbMode::kWpeSingle;
  if (s == "wpe_iterative") return DereverbMode::kWpeIterative;
  if (s == "vace") return DereverbMode::kVace;
  throw UsageError("unknown dereverb mode: " + s);
}

struct DereverbOptions {
  DereverbMode mode = DereverbMode::kWpeIterative;
  WpeConfig wpe;           // taps <0 means "mode default"
  StftConfig stft_config = StftConfig::wpe_16k();
  std::string virtual_source;  // vace: "file:<path>", "delayed:<frames>", "filtered:<gain>"
  std::string psd_file;        // external LPS dump (single input only)
};

inline Spectrogram make_virtual(const std::string& source, const Spectrogram& actual) {
  const auto colon = source.find(':');
  if (colon == std::string::npos)
    throw UsageError("virtual source must be file:<path>, delayed:<frames>, or filtered:<gain>");
  const std::string kind = source.substr(0, colon);
  const std::string arg = source.substr(colon + 1);
  if (kind == "file") return virtual_from_file(arg, actual);
  if (kind == "delayed") return virtual_delayed_copy(actual, std::stoi(arg));
  if (kind == "filtered") return virtual_filtered_copy(actual, {cplx{std::stod(arg), 0.0}});
  throw UsageError("unknown virtual source kind: " + kind);
}

inline Spectrogram dereverb_one(const Spectrogram& spec, const DereverbOptions& opt) {
  WpeConfig cfg = opt.wpe;
  if (cfg.taps < 0) cfg.taps = opt.mode == DereverbMode::kVace ? 15 : 30;
  cfg.validate();
  switch (opt.mode) {
    case DereverbMode::kWpeIterative:
      return iterative_wpe(spec, cfg);
    case DereverbMode::kWpeSingle: {
      PsdEstimate psd = opt.psd_file.empty()
                            ? psd_from_spectrogram(spec, cfg.psd_floor, PsdMode::kObserved)
                            : load_lps_psd(opt.psd_file, cfg.psd_floor);
      if (psd.frames != spec.frames || psd.bins != spec.bins)
        throw ConfigError("external PSD shape mismatch");
      return wpe_single_pass(spec, psd, cfg);
    }
    case DereverbMode::kVace: {
      const Spectrogram actual = spec.channels == 1 ? spec : spec.channel_view(0);
      const Spectrogram virt = make_virtual(opt.virtual_source, actual);
      PsdEstimate psd = opt.psd_file.empty()
                            ? vace_default_psd(actual, cfg)
                            : load_lps_psd(opt.psd_file, cfg.psd_floor);
      return vace_wpe(actual, virt, cfg, psd);
    }
  }
  throw ConfigError("unreachable dereverb mode");
}

inline std::string run_dereverb(const std::vector<std::string>& inputs,
                                const std::string& out_dir, const DereverbOptions& opt,
                                int jobs = 1) {
  if (opt.mode == DereverbMode::kVace && opt.virtual_source.empty())
    throw UsageError("vace mode requires --virtual");
  if (!opt.psd_file.empty() && inputs.size() != 1)
    throw UsageError("--psd-file applies to a single input only");
  for (const auto& p : inputs)
    if (!fs::exists(p)) throw UsageError("input does not exist: " + p);

  fs::create_directories(out_dir);
  std::vector<json> rows(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    const TimeSignal x = load_wav(inputs[i]);
    require_16k(x, inputs[i]);
    const auto t0 = std::chrono::steady_clock::now();
    const Spectrogram y = stft(x, opt.stft_config);
    const Spectrogram z = dereverb_one(y, opt);
    const TimeSignal out = istft(z);
    const std::string out_path =
        (fs::path(out_dir) / fs::path(inputs[i]).filename()).string();
    save_wav(out, out_path, WavBitDepth::kFloat32);
    const auto t1 = std::chrono::steady_clock::now();
    rows[i] = {{"input", inputs[i]},
               {"output", out_path},
               {"elapsed_ms",
                std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count()}};
  });

  // Run log carries timings; it is a log, not a comparison artifact.
  const std::string log_path = (fs::path(out_dir) / "dereverb_log.jsonl").string();
  std::ofstream lf(log_path);
  WpeConfig cfg = opt.wpe;
  if (cfg.taps < 0) cfg.taps = opt.mode == DereverbMode::kVace ? 15 : 30;
  lf << json{{"config",
              {{"mode", opt.mode == DereverbMode::kVace
                            ? "vace"
                            : (opt.mode == DereverbMode::kWpeSingle ? "wpe_single"
                                                                   : "wpe_iterative")},
               {"delay", cfg.delay},
               {"taps", cfg.taps},
               {"iterations", cfg.iterations},
               {"diag_load", cfg.diag_load},
               {"psd_floor", cfg.psd_floor},
               {"virtual", opt.virtual_source},
               {"psd_file", opt.psd_file}}}}
            .dump()
     << "\n";
  for (const auto& r : rows) lf << r.dump() << "\n";
  return log_path;
}

// ---- evaluate ----

struct EvaluateOptions {
  bool lsd = true;
  bool snr = true;
  bool l1 = false;
  bool l2 = false;
  bool ncs = false;
  LossWeights weights = LossWeights::finetune();
};

inline EvaluateOptions parse_metric_selection(const std::string& csv) {
  EvaluateOptions opt;
  opt.lsd = opt.snr = false;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "lsd") opt.lsd = true;
    else if (item == "snr") opt.snr = true;
    else if (item == "l1") opt.l1 = true;
    else if (item == "l2") opt.l2 = true;
    else if (item == "ncs") opt.ncs = true;
    else if (!item.empty()) throw UsageError("unknown metric: " + item);
  }
  return opt;
}

inline std::string run_evaluate(const std::string& references_jsonl,
                                const std::string& processed_dir,
                                const std::string& report_path,
                                const EvaluateOptions& opt, int jobs = 1) {
  std::ifstream in(references_jsonl);
  if (!in) throw IoError("cannot open " + references_jsonl);
  std::vector<json> refs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(references_jsonl + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("config")) continue;  // report header row
    refs.push_back(std::move(j));
  }
  // Validate before writing.
  std::vector<std::string> processed_paths(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const std::string obs = refs[i].at("observed").get<std::string>();
    processed_paths[i] =
        (fs::path(processed_dir) / fs::path(obs).filename()).string();
    if (!fs::exists(processed_paths[i]))
      throw UsageError("processed file missing: " + processed_paths[i]);
    for (const char* key : {"observed", "early_clean"})
      if (!fs::exists(refs[i].at(key).get<std::string>()))
        throw UsageError("reference file missing: " + refs[i].at(key).get<std::string>());
  }

  const StftConfig sc = StftConfig::wpe_16k();
  std::vector<json> rows(refs.size());
  parallel_for(refs.size(), jobs, [&](std::size_t i) {
    const std::string id = refs[i].at("id").get<std::string>();
    const TimeSignal processed = load_wav(processed_paths[i]);
    const TimeSignal observed = load_wav(refs[i].at("observed").get<std::string>());
    const TimeSignal early = load_wav(refs[i].at("early_clean").get<std::string>());
    if (processed.length() != early.length() || observed.length() != early.length())
      throw AlignmentError("length mismatch for utterance " + id);

    json row;
    row["id"] = id;
    const Spectrogram spec_proc = stft(processed, sc);
    const Spectrogram spec_obs = stft(observed, sc);
    const Spectrogram spec_early = stft(early, sc);
    if (opt.lsd) {
      row["lsd_in_db"] = log_spectral_distance(spec_obs, spec_early);
      row["lsd_out_db"] = log_spectral_distance(spec_proc, spec_early);
    }
    if (opt.snr) {
      TimeSignal resid_in = observed, resid_out = processed;
      for (int c = 0; c < early.channels(); ++c)
        for (std::size_t s = 0; s < early.length(); ++s) {
          resid_in.samples[c][s] -= early.samples[c][s];
          resid_out.samples[c][s] -= early.samples[c][s];
        }
      row["snr_in_db"] = oracle_snr(early, resid_in);
      row["snr_out_db"] = oracle_snr(early, resid_out);
    }
    if (opt.l1)
      row["l1"] = l1_loss(spec_proc, spec_early, processed, early, opt.weights);
    if (opt.l2)
      row["l2"] = l2_loss(spec_proc, spec_early, processed, early, opt.weights);
    if (opt.ncs)
      row["ncs"] = ncs_loss(toy_embedding(processed), toy_embedding(early));
    rows[i] = std::move(row);
  });

  // Aggregate = mean over utterances of every numeric column.
  json agg;
  agg["aggregate"] = true;
  if (!rows.empty()) {
    for (auto& [key, val] : rows[0].items()) {
      if (!val.is_number()) continue;
      double acc = 0.0;
      for (const auto& r : rows) acc += r.at(key).get<double>();
      agg["mean_" + key] = acc / rows.size();
    }
  }

  std::ofstream out(report_path);
  if (!out) throw IoError("cannot write " + report_path);
  out << json{{"config",
               {{"references", references_jsonl},
                {"processed_dir", processed_dir},
                {"metrics",
                 {{"lsd", opt.lsd}, {"snr", opt.snr}, {"l1", opt.l1}, {"l2", opt.l2},
                  {"ncs", opt.ncs}}},
                {"weights",
                 {{"alpha", opt.weights.alpha}, {"beta", opt.weights.beta},
                  {"gamma", opt.weights.gamma}, {"eta", opt.weights.eta}}}}}}
             .dump()
      << "\n";
  for (const auto& r : rows) out << r.dump() << "\n";
  out << agg.dump() << "\n";
  return report_path;
}

// ---- score ----

struct ScoreResult {
  double eer_value = 0.0;
  double eer_threshold = 0.0;
  double min_dcf_value = 0.0;
  double min_dcf_threshold = 0.0;
};

inline ScoreResult run_score(const std::string& trials_path,
                             const std::string& embeddings_path,
                             const DcfParams& params, const std::string& det_path) {
  const TrialList trials = load_trial_list(trials_path);
  const auto embeddings = load_embeddings(embeddings_path);
  const TrialScoreSet scores = score_trials(trials, embeddings);
  ScoreResult r;
  std::tie(r.eer_value, r.eer_threshold) = eer(scores);
  std::tie(r.min_dcf_value, r.min_dcf_threshold) = min_dcf(scores, params);
  if (!det_path.empty()) save_det(det_points(scores), det_path);
  return r;
}

}  // namespace derev

#endif  // DEREV_RUNNER_HPP
