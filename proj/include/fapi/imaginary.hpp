#pragma once

#include <cstddef>
#include <vector>

#include "fapi/mdp.hpp"
#include "fapi/parallel.hpp"

namespace fapi {

/// N client MDPs sharing S, A, mu, R, gamma and r_max, with weights q_n.
class Ensemble {
 public:
  Ensemble(std::vector<FiniteMdp> clients, std::vector<double> weights);
  static Ensemble uniform(std::vector<FiniteMdp> clients);

  std::size_t size() const { return clients_.size(); }
  const FiniteMdp& client(std::size_t n) const { return clients_[n]; }
  const std::vector<FiniteMdp>& clients() const { return clients_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t n) const { return weights_[n]; }

  std::size_t num_states() const { return clients_.front().num_states(); }
  std::size_t num_actions() const { return clients_.front().num_actions(); }
  double discount() const { return clients_.front().discount(); }
  double r_max() const { return clients_.front().r_max(); }

  friend bool operator==(const Ensemble&, const Ensemble&) = default;

 private:
  std::vector<FiniteMdp> clients_;
  std::vector<double> weights_;
};

/// P_bar(s'|s,a) = sum_n q_n P_n(s'|s,a); everything else copied from client 0.
FiniteMdp build_imaginary(const Ensemble& ens);

/// sum_n w_n v_n, with compensated summation for large N.
ValueFn weighted_average(const std::vector<ValueFn>& values, const std::vector<double>& weights);

/// V_bar^pi = sum_n q_n V_n^pi with exact per-client evaluation.
ValueFn averaged_value(const Ensemble& ens, const TabularPolicy& pi,
                       const Executor& exec = Executor{});

/// max_{s,a} ||P_i(.|s,a) - P_j(.|s,a)||_1. The objective is convex in each
/// policy row, so the max over stochastic policies sits at a vertex.
double kappa_pair(const Ensemble& ens, std::size_t i, std::size_t j);
double kappa_between(const FiniteMdp& a, const FiniteMdp& b);

double kappa_to_imaginary(const Ensemble& ens, std::size_t n);
double kappa_to_imaginary(const Ensemble& ens, const FiniteMdp& imaginary, std::size_t n);

struct HeterogeneityReport {
  /// Row-major N x N.
  std::vector<double> kappa_pairwise;
  std::vector<double> kappa_to_imaginary;
  double kappa1 = 0.0;
  double kappa2 = 0.0;

  std::size_t size() const { return kappa_to_imaginary.size(); }
  double pair(std::size_t i, std::size_t j) const { return kappa_pairwise[i * size() + j]; }
};

HeterogeneityReport heterogeneity_report(const Ensemble& ens, const Executor& exec = Executor{});

}  // namespace fapi
