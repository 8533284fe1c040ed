#pragma once

// Independent oracles for the tests: dense arithmetic only, no library
// solvers.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "fapi/imaginary.hpp"
#include "fapi/mdp.hpp"

namespace oracle {

using Dense = std::vector<double>;

inline Dense random_simplex(std::mt19937_64& g, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dense out(n);
  double total = 0.0;
  for (double& x : out) total += (x = u(g) + 1e-3);
  for (double& x : out) x /= total;
  return out;
}

/// Random MDP with dense rows; rewards uniform on [0, r_max].
inline fapi::FiniteMdp random_mdp(std::mt19937_64& g, std::size_t S, std::size_t A, double gamma,
                                  double r_max = 1.0) {
  std::uniform_real_distribution<double> u(0.0, r_max);
  Dense p;
  for (std::size_t i = 0; i < S * A; ++i) {
    const Dense row = random_simplex(g, S);
    p.insert(p.end(), row.begin(), row.end());
  }
  Dense r(S * A);
  for (double& x : r) x = u(g);
  return fapi::dense_mdp(S, A, random_simplex(g, S), p, r, gamma, r_max);
}

inline fapi::TabularPolicy random_policy(std::mt19937_64& g, std::size_t S, std::size_t A) {
  Dense probs;
  for (std::size_t s = 0; s < S; ++s) {
    const Dense row = random_simplex(g, A);
    probs.insert(probs.end(), row.begin(), row.end());
  }
  return fapi::TabularPolicy(S, A, probs);
}

/// Ensemble sharing mu and R with independent random kernels.
inline fapi::Ensemble random_ensemble(std::mt19937_64& g, std::size_t N, std::size_t S,
                                      std::size_t A, double gamma) {
  const fapi::FiniteMdp base = random_mdp(g, S, A, gamma);
  std::vector<fapi::FiniteMdp> clients;
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<fapi::TransitionRow> rows;
    for (std::size_t i = 0; i < S * A; ++i) rows.push_back(fapi::TransitionRow::from_dense(random_simplex(g, S)));
    clients.push_back(base.with_transitions(std::move(rows)));
  }
  return fapi::Ensemble::uniform(std::move(clients));
}

inline double p(const fapi::FiniteMdp& m, std::size_t s, std::size_t a, std::size_t j) {
  return m.prob(s, a, j);
}

/// Gaussian elimination with partial pivoting on a dense n x n system.
inline Dense solve(Dense M, Dense b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(M[r * n + c]) > std::abs(M[piv * n + c])) piv = r;
    }
    for (std::size_t k = 0; k < n; ++k) std::swap(M[c * n + k], M[piv * n + k]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = M[r * n + c] / M[c * n + c];
      for (std::size_t k = c; k < n; ++k) M[r * n + k] -= f * M[c * n + k];
      b[r] -= f * b[c];
    }
  }
  Dense x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = b[i];
    for (std::size_t k = i + 1; k < n; ++k) acc -= M[i * n + k] * x[k];
    x[i] = acc / M[i * n + i];
  }
  return x;
}

/// V^pi by a dense linear solve.
inline Dense evaluate(const fapi::TabularPolicy& pi, const fapi::FiniteMdp& m) {
  const std::size_t S = m.num_states(), A = m.num_actions();
  const double g = m.discount();
  Dense M(S * S, 0.0), r(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    M[s * S + s] += 1.0;
    for (std::size_t a = 0; a < A; ++a) {
      r[s] += pi(s, a) * m.reward(s, a);
      for (std::size_t j = 0; j < S; ++j) M[s * S + j] -= g * pi(s, a) * p(m, s, a, j);
    }
  }
  return solve(M, r);
}

/// Q(s,a) = R + gamma P V, row-major.
inline Dense q_values(const fapi::FiniteMdp& m, const Dense& v) {
  const std::size_t S = m.num_states(), A = m.num_actions();
  Dense q(S * A);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      double acc = m.reward(s, a);
      for (std::size_t j = 0; j < S; ++j) acc += m.discount() * p(m, s, a, j) * v[j];
      q[s * A + a] = acc;
    }
  }
  return q;
}

inline Dense policy_backup(const fapi::FiniteMdp& m, const fapi::TabularPolicy& pi, const Dense& v) {
  const Dense q = q_values(m, v);
  const std::size_t S = m.num_states(), A = m.num_actions();
  Dense out(S, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) out[s] += pi(s, a) * q[s * A + a];
  }
  return out;
}

inline Dense optimal_backup(const fapi::FiniteMdp& m, const Dense& v) {
  const Dense q = q_values(m, v);
  const std::size_t S = m.num_states(), A = m.num_actions();
  Dense out(S, -1e300);
  for (std::size_t s = 0; s < S; ++s) {
    for (std::size_t a = 0; a < A; ++a) out[s] = std::max(out[s], q[s * A + a]);
  }
  return out;
}

inline double sup_diff(const Dense& a, const Dense& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline Dense as_dense(const fapi::ValueFn& v) { return Dense(v.begin(), v.end()); }

/// Calls fn(actions) for every deterministic policy.
template <class Fn>
void for_each_deterministic(std::size_t S, std::size_t A, Fn&& fn) {
  std::vector<std::size_t> act(S, 0);
  for (;;) {
    fn(act);
    std::size_t i = 0;
    while (i < S && ++act[i] == A) act[i++] = 0;
    if (i == S) return;
  }
}

/// Definition-level kappa: max over deterministic policies and states of
/// the L1 gap of the policy-induced next-state distributions.
inline double kappa_enumerated(const fapi::FiniteMdp& a, const fapi::FiniteMdp& b) {
  const std::size_t S = a.num_states(), A = a.num_actions();
  double best = 0.0;
  for_each_deterministic(S, A, [&](const std::vector<std::size_t>& act) {
    for (std::size_t s = 0; s < S; ++s) {
      double l1 = 0.0;
      for (std::size_t j = 0; j < S; ++j) l1 += std::abs(p(a, s, act[s], j) - p(b, s, act[s], j));
      best = std::max(best, l1);
    }
  });
  return best;
}

}  // namespace oracle
