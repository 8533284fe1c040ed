#include "fapi/imaginary.hpp"

#include <algorithm>
#include <cmath>

#include "fapi/errors.hpp"

namespace fapi {

namespace {

constexpr std::size_t kCompensatedThreshold = 1000;

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

TransitionRow mix_rows(const Ensemble& ens, std::size_t index) {
  const auto& first = ens.client(0).transitions()[index];
  bool identical = true;
  for (std::size_t n = 1; n < ens.size() && identical; ++n) {
    identical = ens.client(n).transitions()[index] == first;
  }
  if (identical) return first;

  const bool compensated = ens.size() > kCompensatedThreshold;
  std::vector<TransitionEntry> weighted;
  CompensatedSum uniform_sum;
  double uniform_plain = 0.0;
  for (std::size_t n = 0; n < ens.size(); ++n) {
    const double q = ens.weight(n);
    if (q == 0.0) continue;
    const auto& row = ens.client(n).transitions()[index];
    for (const auto& e : row.entries()) weighted.push_back({e.next, q * e.prob});
    uniform_sum.add(q * row.uniform_mass());
    uniform_plain += q * row.uniform_mass();
  }
  if (!compensated) return TransitionRow(std::move(weighted), uniform_plain);

  std::stable_sort(weighted.begin(), weighted.end(),
                   [](const TransitionEntry& x, const TransitionEntry& y) { return x.next < y.next; });
  std::vector<TransitionEntry> merged;
  for (std::size_t i = 0; i < weighted.size();) {
    CompensatedSum acc;
    std::size_t j = i;
    for (; j < weighted.size() && weighted[j].next == weighted[i].next; ++j) acc.add(weighted[j].prob);
    merged.push_back({weighted[i].next, acc.value()});
    i = j;
  }
  return TransitionRow(std::move(merged), uniform_sum.value());
}

}  // namespace

Ensemble::Ensemble(std::vector<FiniteMdp> clients, std::vector<double> weights)
    : clients_(std::move(clients)), weights_(std::move(weights)) {
  require(!clients_.empty(), "Ensemble: no clients");
  require(weights_.size() == clients_.size(), "Ensemble: weight count mismatch");
  const auto& ref = clients_.front();
  for (std::size_t n = 1; n < clients_.size(); ++n) {
    const auto& c = clients_[n];
    const std::string tag = "Ensemble: client " + std::to_string(n);
    require(c.num_states() == ref.num_states() && c.num_actions() == ref.num_actions(),
            tag + " has different dimensions");
    require(std::equal(c.init_dist().begin(), c.init_dist().end(), ref.init_dist().begin()),
            tag + " has a different initial distribution");
    require(std::equal(c.rewards().begin(), c.rewards().end(), ref.rewards().begin()),
            tag + " has different rewards");
    require(c.discount() == ref.discount(), tag + " has a different discount");
    require(c.r_max() == ref.r_max(), tag + " has a different r_max");
  }
  double total = 0.0;
  for (double w : weights_) {
    require(w >= 0.0 && std::isfinite(w), "Ensemble: negative or non-finite weight");
    total += w;
  }
  require(std::abs(total - 1.0) <= kProbabilityTolerance, "Ensemble: weights must sum to 1");
}

Ensemble Ensemble::uniform(std::vector<FiniteMdp> clients) {
  const std::size_t n = clients.size();
  require(n > 0, "Ensemble: no clients");
  return Ensemble(std::move(clients), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

FiniteMdp build_imaginary(const Ensemble& ens) {
  const auto& ref = ens.client(0);
  std::vector<TransitionRow> rows;
  rows.reserve(ref.transitions().size());
  for (std::size_t i = 0; i < ref.transitions().size(); ++i) rows.push_back(mix_rows(ens, i));
  return ref.with_transitions(std::move(rows));
}

ValueFn weighted_average(const std::vector<ValueFn>& values, const std::vector<double>& weights) {
  require(!values.empty() && values.size() == weights.size(), "weighted_average: size mismatch");
  const std::size_t n = values.front().size();
  ValueFn out(n);
  const bool compensated = values.size() > kCompensatedThreshold;
  for (std::size_t s = 0; s < n; ++s) {
    if (compensated) {
      CompensatedSum acc;
      for (std::size_t k = 0; k < values.size(); ++k) acc.add(weights[k] * values[k][s]);
      out[s] = acc.value();
    } else {
      double acc = 0.0;
      for (std::size_t k = 0; k < values.size(); ++k) acc += weights[k] * values[k][s];
      out[s] = acc;
    }
  }
  return out;
}

ValueFn averaged_value(const Ensemble& ens, const TabularPolicy& pi, const Executor& exec) {
  std::vector<ValueFn> values(ens.size());
  exec.parallel_for(ens.size(), [&](std::size_t n) {
    values[n] = exact_policy_evaluation(pi, ens.client(n));
  });
  return weighted_average(values, ens.weights());
}

double kappa_between(const FiniteMdp& a, const FiniteMdp& b) {
  require(a.num_states() == b.num_states() && a.num_actions() == b.num_actions(),
          "kappa: dimension mismatch");
  double best = 0.0;
  for (std::size_t i = 0; i < a.transitions().size(); ++i) {
    best = std::max(best, l1_distance(a.transitions()[i], b.transitions()[i], a.num_states()));
  }
  return best;
}

double kappa_pair(const Ensemble& ens, std::size_t i, std::size_t j) {
  require(i < ens.size() && j < ens.size(), "kappa_pair: client index out of range");
  if (i == j) return 0.0;
  return kappa_between(ens.client(i), ens.client(j));
}

double kappa_to_imaginary(const Ensemble& ens, const FiniteMdp& imaginary, std::size_t n) {
  require(n < ens.size(), "kappa_to_imaginary: client index out of range");
  return kappa_between(ens.client(n), imaginary);
}

double kappa_to_imaginary(const Ensemble& ens, std::size_t n) {
  return kappa_to_imaginary(ens, build_imaginary(ens), n);
}

HeterogeneityReport heterogeneity_report(const Ensemble& ens, const Executor& exec) {
  const std::size_t n = ens.size();
  const FiniteMdp imaginary = build_imaginary(ens);
  HeterogeneityReport report;
  report.kappa_pairwise.assign(n * n, 0.0);
  report.kappa_to_imaginary.assign(n, 0.0);
  // Upper-triangle pairs, indexed so each task owns its slot.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  }
  std::vector<double> pair_values(pairs.size());
  exec.parallel_for(pairs.size(), [&](std::size_t k) {
    pair_values[k] = kappa_pair(ens, pairs[k].first, pairs[k].second);
  });
  exec.parallel_for(n, [&](std::size_t m) {
    report.kappa_to_imaginary[m] = kappa_to_imaginary(ens, imaginary, m);
  });
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    auto [i, j] = pairs[k];
    report.kappa_pairwise[i * n + j] = pair_values[k];
    report.kappa_pairwise[j * n + i] = pair_values[k];
  }
  for (std::size_t i = 0; i < n; ++i) {
    report.kappa1 += ens.weight(i) * report.kappa_to_imaginary[i];
    for (std::size_t j = 0; j < n; ++j) {
      report.kappa2 += ens.weight(i) * ens.weight(j) * report.kappa_pairwise[i * n + j];
    }
  }
  return report;
}

}  // namespace fapi
