// tools/derev_main.cpp
//
// derev CLI: simulate | dereverb | evaluate | score.
// Exit codes: 0 success, 1 numerical failure, 2 input/usage error.

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

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "derev/runner.hpp"

namespace {

int default_jobs() {
  if (const char* env = std::getenv("DEREV_JOBS")) {
    const int j = std::atoi(env);
    if (j > 0) return j;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"derev: WPE-family dereverberation workbench"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file (flags take precedence)");
  int jobs = default_jobs();
  app.add_option("--jobs", jobs, "parallel utterances (env DEREV_JOBS)");

  // simulate
  auto* sim = app.add_subcommand("simulate", "materialize observation sets from a manifest");
  std::string sim_manifest, sim_out;
  double boundary_ms = 50.0;
  sim->add_option("--manifest", sim_manifest, "JSONL manifest")->required();
  sim->add_option("--out", sim_out, "output directory")->required();
  sim->add_option("--boundary-ms", boundary_ms, "early/late split after the RIR main peak");

  // dereverb
  auto* der = app.add_subcommand("dereverb", "dereverberate WAV files");
  std::vector<std::string> der_inputs;
  std::string der_out, der_mode = "wpe_iterative", der_virtual, der_psd;
  derev::WpeConfig wpe;
  wpe.taps = -1;  // resolve per mode
  der->add_option("--in", der_inputs, "input WAV files")->required();
  der->add_option("--out", der_out, "output directory")->required();
  der->add_option("--mode", der_mode, "wpe_single | wpe_iterative | vace");
  der->add_option("--delay", wpe.delay, "LP delay in frames");
  der->add_option("--taps", wpe.taps, "filter taps K (default 30, vace 15)");
  der->add_option("--iterations", wpe.iterations, "iterations (wpe_iterative)");
  der->add_option("--diag-load", wpe.diag_load, "relative diagonal loading");
  der->add_option("--psd-floor", wpe.psd_floor, "relative PSD floor");
  der->add_option("--virtual", der_virtual,
                  "vace virtual channel: file:<path> | delayed:<frames> | filtered:<gain>");
  der->add_option("--psd-file", der_psd, "external LPS dump (single input only)");

  // evaluate
  auto* eva = app.add_subcommand("evaluate", "compute metrics against simulator references");
  std::string eva_refs, eva_proc, eva_report, eva_metrics = "lsd,snr";
  derev::LossWeights weights = derev::LossWeights::finetune();
  eva->add_option("--references", eva_refs, "simulate report JSONL")->required();
  eva->add_option("--processed", eva_proc, "directory of processed WAVs")->required();
  eva->add_option("--report", eva_report, "output report JSONL")->required();
  eva->add_option("--metrics", eva_metrics, "csv of lsd,snr,l1,l2,ncs");
  eva->add_option("--alpha", weights.alpha, "L1 RI-MSE weight");
  eva->add_option("--beta", weights.beta, "L1 log-magnitude weight");
  eva->add_option("--gamma", weights.gamma, "L1 waveform MAE weight");
  eva->add_option("--eta", weights.eta, "L2 MFCC MAE weight");

  // score
  auto* sco = app.add_subcommand("score", "EER/minDCF over a trial list");
  std::string sco_trials, sco_emb, sco_det;
  derev::DcfParams dcf;
  sco->add_option("--trials", sco_trials, "trial list file")->required();
  sco->add_option("--embeddings", sco_emb, "embedding table file")->required();
  sco->add_option("--det", sco_det, "DET curve output (two-column text)");
  sco->add_option("--p-tar", dcf.p_tar, "target prior");
  sco->add_option("--c-miss", dcf.c_miss, "miss cost");
  sco->add_option("--c-fa", dcf.c_fa, "false-alarm cost");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) {
      const std::string report = derev::run_simulate(sim_manifest, sim_out, boundary_ms, jobs);
      std::cout << report << "\n";
    } else if (der->parsed()) {
      derev::DereverbOptions opt;
      opt.mode = derev::parse_mode(der_mode);
      opt.wpe = wpe;
      opt.virtual_source = der_virtual;
      opt.psd_file = der_psd;
      const std::string log = derev::run_dereverb(der_inputs, der_out, opt, jobs);
      std::cout << log << "\n";
    } else if (eva->parsed()) {
      derev::EvaluateOptions opt = derev::parse_metric_selection(eva_metrics);
      opt.weights = weights;
      const std::string report = derev::run_evaluate(eva_refs, eva_proc, eva_report, opt, jobs);
      std::cout << report << "\n";
    } else if (sco->parsed()) {
      const derev::ScoreResult r = derev::run_score(sco_trials, sco_emb, dcf, sco_det);
      nlohmann::json out = {{"eer", r.eer_value},
                            {"eer_threshold", r.eer_threshold},
                            {"min_dcf", r.min_dcf_value},
                            {"min_dcf_threshold", r.min_dcf_threshold}};
      std::cout << out.dump() << "\n";
    }
  } catch (const derev::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 1;
  } catch (const derev::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
