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

#include "shepherd/evalharness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "shepherd/parallel.hpp"

namespace shepherd {
namespace {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s, const std::string& where) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError(where + ": malformed number '" + std::string(s) + "'");
  return x;
}

long parse_int(std::string_view s, const std::string& where) {
  long x = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw IoError(where + ": malformed integer '" + std::string(s) + "'");
  return x;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string sanitize(const std::string& label) {
  std::string out = label;
  for (char& c : out)
    if (c == ',' || c == '\n' || c == '\r') c = '_';
  return out;
}

void write_svg(const std::vector<LearningCurve>& curves, const std::filesystem::path& path) {
  constexpr double kWidth = 640, kHeight = 400, kPad = 40;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  double lo = 0.0, hi = 0.0;
  Eigen::Index steps = 1;
  bool first = true;
  for (const auto& c : curves) {
    if (c.mean.size() == 0) continue;
    lo = first ? c.mean.minCoeff() : std::min(lo, c.mean.minCoeff());
    hi = first ? c.mean.maxCoeff() : std::max(hi, c.mean.maxCoeff());
    steps = std::max(steps, c.mean.size());
    first = false;
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\">\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    out << "<polyline fill=\"none\" stroke=\"" << kColors[k % 8] << "\" points=\"";
    for (Eigen::Index t = 0; t < c.mean.size(); ++t) {
      const double x = kPad + (kWidth - 2 * kPad) * static_cast<double>(t) /
                                  static_cast<double>(std::max<Eigen::Index>(steps - 1, 1));
      const double y = kHeight - kPad - (kHeight - 2 * kPad) * (c.mean[t] - lo) / (hi - lo);
      out << x << ',' << y << ' ';
    }
    out << "\"/>\n<text x=\"" << kPad + 4 << "\" y=\"" << 16 + 14 * static_cast<double>(k)
        << "\" fill=\"" << kColors[k % 8] << "\" font-size=\"12\">" << c.label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

EvalConfig default_eval_config(const Environment& env) {
  const TrainConfig train = default_config(env);
  EvalConfig c;
  c.steps = train.inner_steps;
  c.lr_participant = train.lr_participant;
  c.participant_init_std = train.participant_init_std;
  c.n_seeds = std::holds_alternative<MatrixGameEnv>(env) ? 5 : 50;
  return c;
}

Mechanism trained_mechanism(const Environment& env, const Eigen::VectorXd& theta_m,
                            std::string label) {
  if (std::holds_alternative<MatrixGameEnv>(env)) {
    if (theta_m.size() != kNumGameStates)
      throw ConfigError("matrix-game mechanism needs 5 parameters");
    return {std::move(label), OneMemoryPolicy{Vec5<double>(theta_m)}};
  }
  return {std::move(label), MechanismNet::from_flat(theta_m)};
}

bool is_compatible(const Environment& env, const Mechanism& mechanism) {
  const bool matrix = std::holds_alternative<MatrixGameEnv>(env);
  const bool matrix_policy = std::holds_alternative<OneMemoryPolicy>(mechanism.policy) ||
                             std::holds_alternative<FixedStrategy>(mechanism.policy);
  return matrix == matrix_policy;
}

Vec4<double> pgg_mechanism_payouts(const Mechanism& mechanism, const PggSpec& spec,
                                   const Vec4<double>& rho, Rng& rng) {
  if (const auto* net = std::get_if<MechanismNet>(&mechanism.policy))
    return mechanism_payouts(*net, spec, rho);
  if (const auto* kind = std::get_if<Redistribution>(&mechanism.policy))
    return baseline_redistribution(*kind, spec, rho, rng);
  throw ConfigError("mechanism '" + mechanism.label + "' is not a public-goods mechanism");
}

void LearningCurve::summarize() {
  const Eigen::Index n = returns.rows();
  mean = returns.colwise().mean().transpose();
  std_error = Eigen::VectorXd::Zero(returns.cols());
  if (n > 1) {
    for (Eigen::Index t = 0; t < returns.cols(); ++t) {
      const double var = (returns.col(t).array() - mean[t]).square().sum() /
                         static_cast<double>(n - 1);
      std_error[t] = std::sqrt(var / static_cast<double>(n));
    }
  }
}

bool LearningCurve::is_consistent(double tol) const {
  LearningCurve copy = *this;
  copy.summarize();
  if (copy.mean.size() != mean.size() || copy.std_error.size() != std_error.size()) return false;
  return (copy.mean - mean).cwiseAbs().maxCoeff() <= tol &&
         (copy.std_error - std_error).cwiseAbs().maxCoeff() <= tol;
}

InnerLoopTrace<double> evaluate_seed(const Environment& env, const Mechanism& mechanism,
                                     const EvalConfig& config, int seed_index) {
  if (!is_compatible(env, mechanism))
    throw ConfigError("mechanism '" + mechanism.label + "' cannot be evaluated on " +
                      environment_label(env));
  const auto k = static_cast<std::uint64_t>(seed_index);
  Rng participant_rng = make_rng(config.seed, 2 * k);
  Rng mechanism_rng = make_rng(config.seed, 2 * k + 1);
  const Eigen::VectorXd theta_p0 =
      sample_participant(env, config.participant_init_std, participant_rng);

  if (const auto* m = std::get_if<MatrixGameEnv>(&env)) {
    Vec5<double> coop;
    if (const auto* p = std::get_if<OneMemoryPolicy>(&mechanism.policy)) {
      coop = p->coop_probs();
    } else {
      coop = std::get<FixedStrategy>(mechanism.policy).coop_probs();
    }
    const MatrixGameMDP& mdp = m->mdp;
    return unroll_inner_loop<double>(
        [&](const Eigen::VectorXd& tp) { return matrix_game_step<double>(mdp, coop, tp); },
        theta_p0, config.steps, config.lr_participant);
  }

  const PggSpec& spec = std::get<PggEnv>(env).eval_spec;
  if (const auto* net = std::get_if<MechanismNet>(&mechanism.policy)) {
    return unroll_inner_loop<double>(
        [&](const Eigen::VectorXd& tp) {
          return pgg_step<double>(
              spec, [&](const Vec4<double>& rho) { return mechanism_payouts_with_slope(*net, spec, rho); },
              tp);
        },
        theta_p0, config.steps, config.lr_participant);
  }
  const Redistribution kind = std::get<Redistribution>(mechanism.policy);
  return unroll_inner_loop<double>(
      [&](const Eigen::VectorXd& tp) {
        return pgg_step<double>(
            spec,
            [&](const Vec4<double>& rho) {
              return baseline_redistribution_with_slope(kind, spec, rho, mechanism_rng);
            },
            tp);
      },
      theta_p0, config.steps, config.lr_participant);
}

LearningCurve evaluate_mechanism(const Environment& env, const Mechanism& mechanism,
                                 const EvalConfig& config) {
  if (config.n_seeds < 1 || config.steps < 1)
    throw ConfigError("evaluation needs at least one seed and one step");
  if (!is_compatible(env, mechanism))
    throw ConfigError("mechanism '" + mechanism.label + "' cannot be evaluated on " +
                      environment_label(env));
  LearningCurve curve;
  curve.label = mechanism.label;
  curve.config = config;
  curve.returns.resize(config.n_seeds, config.steps);
  parallel_for(static_cast<std::size_t>(config.n_seeds), [&](std::size_t k) {
    const auto trace = evaluate_seed(env, mechanism, config, static_cast<int>(k));
    for (int t = 0; t < config.steps; ++t)
      curve.returns(static_cast<Eigen::Index>(k), t) = trace.mechanism_returns[static_cast<std::size_t>(t)];
  });
  curve.summarize();
  return curve;
}

SuiteResult compare_suite(const Environment& env, const std::vector<Mechanism>& mechanisms,
                          const EvalConfig& config) {
  if (mechanisms.empty()) throw ConfigError("compare_suite needs at least one mechanism");
  SuiteResult out;
  for (const auto& m : mechanisms) {
    out.curves.push_back(evaluate_mechanism(env, m, config));
    const auto& c = out.curves.back();
    out.summary.push_back({c.label, c.final_mean(), c.final_std_error(), c.area()});
  }
  return out;
}

std::string curve_file_name(const std::string& env_label, const std::string& mechanism_label,
                            int n_seeds) {
  return env_label + "_" + mechanism_label + "_" + std::to_string(n_seeds) + ".csv";
}

std::filesystem::path aggregate_path(const std::filesystem::path& csv) {
  std::filesystem::path out = csv;
  out.replace_filename(csv.stem().string() + "_aggregate" + csv.extension().string());
  return out;
}

void export_curves(const std::vector<LearningCurve>& curves, const std::filesystem::path& csv,
                   const std::optional<std::filesystem::path>& svg) {
  std::ofstream rows(csv);
  std::ofstream agg(aggregate_path(csv));
  if (!rows || !agg) throw IoError("cannot open " + csv.string() + " for writing");
  rows << "mechanism,seed,step,return\n";
  agg << "mechanism,step,mean,stderr\n";
  for (const auto& c : curves) {
    const std::string label = sanitize(c.label);
    for (Eigen::Index s = 0; s < c.returns.rows(); ++s)
      for (Eigen::Index t = 0; t < c.returns.cols(); ++t)
        rows << label << ',' << s << ',' << t << ',' << format_double(c.returns(s, t)) << '\n';
    for (Eigen::Index t = 0; t < c.mean.size(); ++t)
      agg << label << ',' << t << ',' << format_double(c.mean[t]) << ','
          << format_double(c.std_error[t]) << '\n';
  }
  rows.flush();
  agg.flush();
  if (!rows || !agg) throw IoError("write failed: " + csv.string());
  if (svg) write_svg(curves, *svg);
}

std::vector<LearningCurve> load_curves(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw IoError("cannot open " + csv.string());
  std::string line;
  if (!std::getline(in, line) || line != "mechanism,seed,step,return")
    throw IoError(csv.string() + ": unexpected header");

  std::vector<std::string> order;
  std::map<std::string, std::map<std::pair<long, long>, double>> cells;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = csv.string() + ":" + std::to_string(lineno);
    const auto f = split_csv(line);
    if (f.size() != 4) throw IoError(where + ": expected 4 fields");
    const std::string label(f[0]);
    if (!cells.count(label)) order.push_back(label);
    cells[label][{parse_int(f[1], where), parse_int(f[2], where)}] = parse_double(f[3], where);
  }

  std::vector<LearningCurve> curves;
  for (const auto& label : order) {
    const auto& m = cells[label];
    long seeds = 0, steps = 0;
    for (const auto& [key, v] : m) {
      seeds = std::max(seeds, key.first + 1);
      steps = std::max(steps, key.second + 1);
    }
    if (static_cast<long>(m.size()) != seeds * steps)
      throw IoError(csv.string() + ": curve '" + label + "' is not a full seed x step grid");
    LearningCurve c;
    c.label = label;
    c.returns.resize(seeds, steps);
    for (const auto& [key, v] : m) c.returns(key.first, key.second) = v;
    c.summarize();
    c.config.n_seeds = static_cast<int>(seeds);
    c.config.steps = static_cast<int>(steps);
    curves.push_back(std::move(c));
  }

  const auto agg_file = aggregate_path(csv);
  if (std::filesystem::exists(agg_file)) {
    std::ifstream agg(agg_file);
    if (!std::getline(agg, line) || line != "mechanism,step,mean,stderr")
      throw IoError(agg_file.string() + ": unexpected header");
    lineno = 1;
    while (std::getline(agg, line)) {
      ++lineno;
      if (line.empty()) continue;
      const std::string where = agg_file.string() + ":" + std::to_string(lineno);
      const auto f = split_csv(line);
      if (f.size() != 4) throw IoError(where + ": expected 4 fields");
      const auto it = std::find_if(curves.begin(), curves.end(),
                                   [&](const LearningCurve& c) { return c.label == f[0]; });
      if (it == curves.end()) throw IoError(where + ": unknown mechanism");
      const long t = parse_int(f[1], where);
      if (t < 0 || t >= it->mean.size()) throw IoError(where + ": step out of range");
      if (std::abs(parse_double(f[2], where) - it->mean[t]) > 1e-9 ||
          std::abs(parse_double(f[3], where) - it->std_error[t]) > 1e-9)
        throw IoError(where + ": aggregate disagrees with per-seed returns");
    }
  }
  return curves;
}

}  // namespace shepherd
