// derev/scoring.hpp
//
// Trial-list scoring and detection metrics: cosine scoring, EER with
// linear interpolation between straddling operating points, normalized
// minDCF over the exhaustive threshold set, and DET curve points.
// Decision rule throughout: accept when score >= threshold.

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

#ifndef DEREV_SCORING_HPP
#define DEREV_SCORING_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "derev/errors.hpp"
#include "derev/features.hpp"

namespace derev {

struct Trial {
  std::string enroll_id;
  std::string test_id;
  bool target = false;
};

struct TrialList {
  std::vector<Trial> entries;
};

struct TrialScoreSet {
  std::vector<double> target_scores;
  std::vector<double> nontarget_scores;

  void validate() const {
    if (target_scores.empty() || nontarget_scores.empty())
      throw PreconditionError("score set needs at least one target and one nontarget");
    for (double v : target_scores)
      if (!std::isfinite(v)) throw PreconditionError("non-finite target score");
    for (double v : nontarget_scores)
      if (!std::isfinite(v)) throw PreconditionError("non-finite nontarget score");
  }
};

struct DcfParams {
  double p_tar = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;

  void validate() const {
    if (!(p_tar > 0.0 && p_tar < 1.0)) throw ConfigError("p_tar must be in (0,1)");
    if (c_miss <= 0.0 || c_fa <= 0.0) throw ConfigError("costs must be positive");
  }
};

inline TrialList load_trial_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  TrialList list;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    Trial t;
    std::string label;
    if (!(ss >> t.enroll_id >> t.test_id >> label) ||
        (label != "target" && label != "nontarget"))
      throw FormatError(path + ":" + std::to_string(lineno) + ": bad trial line");
    t.target = label == "target";
    list.entries.push_back(std::move(t));
  }
  return list;
}

inline double cosine_score(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.values.size() != b.values.size())
    throw ConfigError("cosine_score: dimension mismatch");
  if (a.norm <= 0.0 || b.norm <= 0.0)
    throw DegenerateInputError("cosine_score: zero-norm embedding");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return dot / (a.norm * b.norm);
}

inline TrialScoreSet score_trials(const TrialList& trials,
                                  const std::map<std::string, EmbeddingVector>& embeddings) {
  TrialScoreSet out;
  for (const Trial& t : trials.entries) {
    const auto ea = embeddings.find(t.enroll_id);
    if (ea == embeddings.end()) throw LookupError("missing embedding id: " + t.enroll_id);
    const auto eb = embeddings.find(t.test_id);
    if (eb == embeddings.end()) throw LookupError("missing embedding id: " + t.test_id);
    const double s = cosine_score(ea->second, eb->second);
    (t.target ? out.target_scores : out.nontarget_scores).push_back(s);
  }
  return out;
}

namespace detail {

struct OperatingPoint {
  double threshold;
  double p_miss;  // fraction of targets with score < threshold
  double p_fa;    // fraction of nontargets with score >= threshold
};

// Operating points at every distinct score plus +inf, sorted by
// ascending threshold (p_miss nondecreasing, p_fa nonincreasing).
inline std::vector<OperatingPoint> operating_points(const TrialScoreSet& scores) {
  std::vector<double> thresholds;
  thresholds.reserve(scores.target_scores.size() + scores.nontarget_scores.size() + 1);
  thresholds.insert(thresholds.end(), scores.target_scores.begin(), scores.target_scores.end());
  thresholds.insert(thresholds.end(), scores.nontarget_scores.begin(),
                    scores.nontarget_scores.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  std::vector<double> tgt = scores.target_scores;
  std::vector<double> non = scores.nontarget_scores;
  std::sort(tgt.begin(), tgt.end());
  std::sort(non.begin(), non.end());

  std::vector<OperatingPoint> points;
  points.reserve(thresholds.size());
  for (double th : thresholds) {
    const double miss =
        std::lower_bound(tgt.begin(), tgt.end(), th) - tgt.begin();
    const double fa =
        non.end() - std::lower_bound(non.begin(), non.end(), th);
    points.push_back({th, miss / tgt.size(), fa / non.size()});
  }
  return points;
}

}  // namespace detail

// Equal error rate: the sweep over distinct-score thresholds locates the
// sign change of (p_miss - p_fa); the EER interpolates linearly between
// the straddling operating points.
inline std::pair<double, double> eer(const TrialScoreSet& scores) {
  scores.validate();
  const auto points = detail::operating_points(scores);
  // p_miss - p_fa goes from negative (accept-all) to positive (reject-all).
  std::size_t hi = 0;
  while (hi < points.size() && points[hi].p_miss - points[hi].p_fa < 0.0) ++hi;
  if (hi == 0) return {points[0].p_miss, points[0].threshold};  // already >= 0 at the lowest
  if (hi == points.size()) {
    const auto& p = points.back();
    return {0.5 * (p.p_miss + p.p_fa), p.threshold};
  }
  const auto& a = points[hi - 1];
  const auto& b = points[hi];
  const double da = a.p_miss - a.p_fa;  // < 0
  const double db = b.p_miss - b.p_fa;  // >= 0
  const double t = (db - da) > 0.0 ? -da / (db - da) : 0.0;
  const double value = a.p_miss + t * (b.p_miss - a.p_miss);
  const double threshold =
      std::isinf(b.threshold) ? a.threshold : a.threshold + t * (b.threshold - a.threshold);
  return {value, threshold};
}

// Normalized minimum detection cost over all distinct-score thresholds
// plus the accept-all/reject-all sentinels; ties break toward the lower
// threshold.
inline std::pair<double, double> min_dcf(const TrialScoreSet& scores,
                                         const DcfParams& params) {
  scores.validate();
  params.validate();
  auto points = detail::operating_points(scores);
  points.insert(points.begin(),
                {-std::numeric_limits<double>::infinity(), 0.0, 1.0});  // accept all
  const double norm = std::min(params.c_miss * params.p_tar,
                               params.c_fa * (1.0 - params.p_tar));
  double best = std::numeric_limits<double>::infinity();
  double best_th = points.front().threshold;
  for (const auto& p : points) {
    const double dcf = (params.c_miss * params.p_tar * p.p_miss +
                        params.c_fa * (1.0 - params.p_tar) * p.p_fa) / norm;
    if (dcf < best) {
      best = dcf;
      best_th = p.threshold;
    }
  }
  return {best, best_th};
}

// DET curve: the monotone staircase of (p_fa, p_miss) operating points,
// swept from accept-all to reject-all.
inline std::vector<std::pair<double, double>> det_points(const TrialScoreSet& scores) {
  scores.validate();
  auto points = detail::operating_points(scores);
  std::vector<std::pair<double, double>> det;
  det.reserve(points.size() + 1);
  det.emplace_back(1.0, 0.0);  // accept all
  for (const auto& p : points) {
    if (det.empty() || det.back() != std::make_pair(p.p_fa, p.p_miss))
      det.emplace_back(p.p_fa, p.p_miss);
  }
  return det;
}

inline void save_det(const std::vector<std::pair<double, double>>& det,
                     const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out.precision(17);
  for (const auto& [fa, miss] : det) out << fa << " " << miss << "\n";
}

}  // namespace derev

#endif  // DEREV_SCORING_HPP
