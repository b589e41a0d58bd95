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

#ifndef SHEPHERD_POLICIES_HPP_
#define SHEPHERD_POLICIES_HPP_

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "shepherd/diffkit.hpp"
#include "shepherd/games.hpp"

namespace shepherd {

// ---------------------------------------------------------------------------
// Matrix-game policies.

// Cooperation logits over (s0, CC, CD, DC, DD).
struct OneMemoryPolicy {
  Vec5<double> params = Vec5<double>::Zero();

  Vec5<double> coop_probs() const;
};

template <class Scalar>
Vec5<Scalar> coop_probs(const Vec5<Scalar>& logits) {
  Vec5<Scalar> p;
  for (int s = 0; s < kNumGameStates; ++s) p[s] = sigmoid(logits[s]);
  return p;
}

inline Vec5<double> OneMemoryPolicy::coop_probs() const {
  return shepherd::coop_probs<double>(params);
}

enum class FixedStrategyKind { AllC, AllD, TitForTat, WinStayLoseShift, Grim };

// Deterministic one-memory strategy, first letter of a state = own move.
struct FixedStrategy {
  FixedStrategyKind kind = FixedStrategyKind::AllD;

  std::string_view name() const;
  Vec5<double> coop_probs() const;

  static std::optional<FixedStrategy> from_name(std::string_view name);
  static std::vector<FixedStrategy> all();
};

// The baselines the trained mechanism is compared against in matrix games.
std::vector<FixedStrategy> comparison_strategies();

// ---------------------------------------------------------------------------
// Redistribution mechanism for the public-goods game: an MLP with one tanh
// hidden layer of 32 units over [endowments, contributions], followed by a
// softmax that splits the grown pool.

inline constexpr int kMechanismInputs = 2 * kPggParticipants;
inline constexpr int kMechanismHidden = 32;

template <class Scalar>
struct MechanismNetT {
  static constexpr int kNumParams = kMechanismInputs * kMechanismHidden +
                                    kMechanismHidden +
                                    kMechanismHidden * kPggParticipants +
                                    kPggParticipants;

  Eigen::Matrix<Scalar, kMechanismInputs, kMechanismHidden> w1;
  Eigen::Matrix<Scalar, kMechanismHidden, 1> b1;
  Eigen::Matrix<Scalar, kMechanismHidden, kPggParticipants> w2;
  Eigen::Matrix<Scalar, kPggParticipants, 1> b2;

  static MechanismNetT zeros() {
    MechanismNetT n;
    n.w1.setConstant(Scalar(0.0));
    n.b1.setConstant(Scalar(0.0));
    n.w2.setConstant(Scalar(0.0));
    n.b2.setConstant(Scalar(0.0));
    return n;
  }

  // Flat layout: w1 (column-major), b1, w2 (column-major), b2.
  static MechanismNetT from_flat(const VecX<Scalar>& flat) {
    if (flat.size() != kNumParams)
      throw ConfigError("mechanism parameter vector must have 420 entries");
    MechanismNetT n;
    Eigen::Index k = 0;
    auto take = [&](auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = flat[k++];
    };
    take(n.w1);
    take(n.b1);
    take(n.w2);
    take(n.b2);
    return n;
  }

  VecX<Scalar> flatten() const {
    VecX<Scalar> flat(kNumParams);
    Eigen::Index k = 0;
    auto put = [&](const auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) flat[k++] = m.data()[i];
    };
    put(w1);
    put(b1);
    put(w2);
    put(b2);
    return flat;
  }
};

using MechanismNet = MechanismNetT<double>;
inline constexpr int kMechanismParams = MechanismNet::kNumParams;

// Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
MechanismNet init_mechanism_net(std::mt19937_64& rng);

// Payouts together with each participant's own sensitivity d p_i / d rho_i,
// the only derivative an independent learner needs.
template <class Scalar>
struct PayoutSensitivity {
  Vec4<Scalar> payouts;
  Vec4<Scalar> own_slope;
};

template <class Scalar>
PayoutSensitivity<Scalar> mechanism_payouts_with_slope(const MechanismNetT<Scalar>& net,
                                                       const PggSpec& spec,
                                                       const Vec4<Scalar>& rho,
                                                       bool with_slope = true) {
  using std::exp;
  using std::tanh;
  const int n = kPggParticipants;

  Eigen::Matrix<Scalar, kMechanismInputs, 1> x;
  for (int i = 0; i < n; ++i) {
    x[i] = Scalar(spec.endowments[i]);
    x[n + i] = rho[i] * spec.endowments[i];
  }
  Eigen::Matrix<Scalar, kMechanismHidden, 1> h = net.w1.transpose() * x + net.b1;
  for (int j = 0; j < kMechanismHidden; ++j) h[j] = tanh(h[j]);
  const Vec4<Scalar> z = net.w2.transpose() * h + net.b2;

  double zmax = value_of(z[0]);
  for (int i = 1; i < n; ++i) zmax = std::max(zmax, value_of(z[i]));
  Vec4<Scalar> share;
  Scalar norm(0.0);
  for (int i = 0; i < n; ++i) {
    share[i] = exp(z[i] - zmax);
    norm += share[i];
  }
  for (int i = 0; i < n; ++i) share[i] = share[i] / norm;

  const Scalar pool = pgg_pool(spec, rho);
  PayoutSensitivity<Scalar> out;
  for (int i = 0; i < n; ++i) out.payouts[i] = share[i] * pool;
  if (!with_slope) {
    out.own_slope.setConstant(Scalar(0.0));
    return out;
  }

  // Directional derivative along rho_i, which only enters through x[n + i].
  for (int i = 0; i < n; ++i) {
    const double dx = spec.endowments[i];
    Eigen::Matrix<Scalar, kMechanismHidden, 1> dh;
    for (int j = 0; j < kMechanismHidden; ++j)
      dh[j] = (1.0 - h[j] * h[j]) * net.w1(n + i, j) * dx;
    const Vec4<Scalar> dz = net.w2.transpose() * dh;
    Scalar mean_dz(0.0);
    for (int k = 0; k < n; ++k) mean_dz += share[k] * dz[k];
    const Scalar dshare = share[i] * (dz[i] - mean_dz);
    out.own_slope[i] = dshare * pool + share[i] * (spec.growth * dx);
  }
  return out;
}

template <class Scalar>
Vec4<Scalar> mechanism_payouts(const MechanismNetT<Scalar>& net, const PggSpec& spec,
                               const Vec4<Scalar>& rho) {
  return mechanism_payouts_with_slope(net, spec, rho, /*with_slope=*/false).payouts;
}

// ---------------------------------------------------------------------------
// Baseline redistribution rules.

enum class Redistribution { AbsoluteProportional, RelativeProportional, Uniform, Random };

std::string_view redistribution_name(Redistribution kind);
std::optional<Redistribution> redistribution_from_name(std::string_view name);
std::vector<Redistribution> all_redistributions();

// Shares of the grown pool; all-zero weights fall back to uniform shares.
Vec4<double> redistribution_shares(Redistribution kind, const PggSpec& spec,
                                   const Vec4<double>& rho, std::mt19937_64& rng);

Vec4<double> baseline_redistribution(Redistribution kind, const PggSpec& spec,
                                     const Vec4<double>& rho, std::mt19937_64& rng);

// Payouts and own slopes for a learner facing a baseline. Random draws one
// simplex point per call, shared by the payout and the slope.
PayoutSensitivity<double> baseline_redistribution_with_slope(Redistribution kind,
                                                             const PggSpec& spec,
                                                             const Vec4<double>& rho,
                                                             std::mt19937_64& rng);

}  // namespace shepherd

#endif  // SHEPHERD_POLICIES_HPP_
