// Copyright 2026 The Shepherd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Evaluation of frozen mechanisms against freshly learning participants.
//
// Seed k always draws the same theta_p^0 regardless of which mechanism is
// evaluated, so curves from compare_suite() are paired comparisons.

#ifndef SHEPHERD_EVALHARNESS_HPP_
#define SHEPHERD_EVALHARNESS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "shepherd/policies.hpp"
#include "shepherd/training.hpp"

namespace shepherd {

struct EvalConfig {
  int n_seeds = 5;
  int steps = 50;  // T_eval
  double lr_participant = 10.0;
  double participant_init_std = 1.0;
  std::uint64_t seed = 0;
};

// Protocol defaults: T_eval = T_p, 5 seeds (matrix games) or 50 (PGG).
EvalConfig default_eval_config(const Environment& env);

struct Mechanism {
  std::string label;
  std::variant<OneMemoryPolicy, FixedStrategy, MechanismNet, Redistribution> policy;

  static Mechanism fixed(FixedStrategy s) { return {std::string(s.name()), s}; }
  static Mechanism baseline(Redistribution r) { return {std::string(redistribution_name(r)), r}; }
};

// Wraps trained parameters as the matching policy type for `env`.
Mechanism trained_mechanism(const Environment& env, const Eigen::VectorXd& theta_m,
                            std::string label = "IO-Loop");

bool is_compatible(const Environment& env, const Mechanism& mechanism);

// One public-goods round's payouts under a PGG mechanism (net or baseline).
Vec4<double> pgg_mechanism_payouts(const Mechanism& mechanism, const PggSpec& spec,
                                   const Vec4<double>& rho, Rng& rng);

struct LearningCurve {
  std::string label;
  Eigen::MatrixXd returns;  // (seed, participant step)
  Eigen::VectorXd mean;
  Eigen::VectorXd std_error;  // sample std / sqrt(n); zero for one seed
  EvalConfig config;

  // Recomputes mean and std_error from `returns`.
  void summarize();
  bool is_consistent(double tol = 1e-9) const;
  double final_mean() const { return mean[mean.size() - 1]; }
  double final_std_error() const { return std_error[std_error.size() - 1]; }
  double area() const { return mean.sum(); }
};

// Inner loop of seed `seed_index` with the mechanism frozen.
InnerLoopTrace<double> evaluate_seed(const Environment& env, const Mechanism& mechanism,
                                     const EvalConfig& config, int seed_index);

LearningCurve evaluate_mechanism(const Environment& env, const Mechanism& mechanism,
                                 const EvalConfig& config);

struct CurveSummary {
  std::string label;
  double final_mean = 0.0;
  double final_std_error = 0.0;
  double area = 0.0;  // sum of the mean curve over steps
};

struct SuiteResult {
  std::vector<LearningCurve> curves;
  std::vector<CurveSummary> summary;
};

SuiteResult compare_suite(const Environment& env, const std::vector<Mechanism>& mechanisms,
                          const EvalConfig& config);

// `<env>_<mechanism>_<seed-count>.csv`
std::string curve_file_name(const std::string& env_label, const std::string& mechanism_label,
                            int n_seeds);

// Companion aggregate file: foo.csv -> foo_aggregate.csv.
std::filesystem::path aggregate_path(const std::filesystem::path& csv);

// Per-seed CSV (mechanism,seed,step,return) plus the aggregate companion
// (mechanism,step,mean,stderr); optionally an SVG plot of the means.
void export_curves(const std::vector<LearningCurve>& curves, const std::filesystem::path& csv,
                   const std::optional<std::filesystem::path>& svg = std::nullopt);

// Reads a per-seed CSV; if the aggregate companion exists it must agree with
// the recomputed mean/stderr within 1e-9.
std::vector<LearningCurve> load_curves(const std::filesystem::path& csv);

}  // namespace shepherd

#endif  // SHEPHERD_EVALHARNESS_HPP_
