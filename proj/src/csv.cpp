#include "fapi/csv.hpp"

#include <algorithm>
#include <charconv>

namespace fapi {

std::string format_number(double x) {
  if (x == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_history_csv(std::ostream& out, const std::vector<RoundRecord>& history) {
  out << "round,algorithm,selected_ids,mean_return,realized_delta_max,realized_epsilon_max,"
         "lhs_improvement,rhs_bound,bound_ok\n";
  for (const auto& rec : history) {
    std::string ids;
    for (std::size_t i = 0; i < rec.selected.size(); ++i) {
      if (i) ids += ';';
      ids += std::to_string(rec.selected[i]);
    }
    double dmax = 0.0, emax = 0.0;
    for (double d : rec.client_delta) dmax = std::max(dmax, d);
    for (double e : rec.client_epsilon) emax = std::max(emax, e);
    out << rec.round << ',' << to_string(rec.algorithm) << ',' << ids << ','
        << format_number(rec.mean_return) << ',' << format_number(dmax) << ','
        << format_number(emax) << ',';
    if (rec.improvement) {
      out << format_number(rec.improvement->lhs) << ',' << format_number(rec.improvement->rhs) << ','
          << (rec.improvement->ok ? 1 : 0);
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

void write_metrics_csv(std::ostream& out, const std::vector<RoundRecord>& history) {
  out << "round,client_id,delta_n,value_estimate,selected\n";
  for (const auto& rec : history) {
    for (std::size_t i = 0; i < rec.metrics.candidates.size(); ++i) {
      const auto& c = rec.metrics.candidates[i];
      const bool chosen =
          std::find(rec.selected.begin(), rec.selected.end(), c.client_id) != rec.selected.end();
      out << rec.round << ',' << c.client_id << ','
          << format_number(i < rec.metrics.delta.size() ? rec.metrics.delta[i] : 0.0) << ','
          << format_number(c.value_estimate) << ',' << (chosen ? 1 : 0) << '\n';
    }
  }
}

void write_bounds_csv(std::ostream& out, const BoundReport& report) {
  out << "bound_name,round,lhs,rhs,slack,satisfied,hard\n";
  for (const auto& e : report.entries) {
    out << e.name << ',' << e.round << ',' << format_number(e.lhs) << ',' << format_number(e.rhs)
        << ',' << format_number(e.slack) << ',' << (e.satisfied ? 1 : 0) << ','
        << (e.hard ? 1 : 0) << '\n';
  }
  if (report.asymptotic_skipped) out << "asymptotic_gap,-1,,,,skipped,0\n";
}

void write_kappa_csv(std::ostream& out, const HeterogeneityReport& report) {
  out << "i,j,kappa_ij\n";
  const std::size_t n = report.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out << i << ',' << j << ',' << format_number(report.pair(i, j)) << '\n';
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ",I," << format_number(report.kappa_to_imaginary[i]) << '\n';
  }
  out << "kappa1,," << format_number(report.kappa1) << '\n';
  out << "kappa2,," << format_number(report.kappa2) << '\n';
}

}  // namespace fapi
