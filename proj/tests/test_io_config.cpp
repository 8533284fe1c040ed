#include <doctest.h>

#include <sstream>

#include "fapi/config.hpp"
#include "fapi/csv.hpp"
#include "fapi/io.hpp"
#include "support.hpp"

using namespace fapi;

namespace {

std::size_t error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST_CASE("ensemble JSON round trip") {
  const Ensemble ens = gen_random_ensemble({3, 4, 2, 0.95, 0.5, 8});
  const std::string text = dump_json(ensemble_to_json(ens));
  const Ensemble back = ensemble_from_json(Json::parse(text));
  CHECK(back == ens);
  CHECK(dump_json(ensemble_to_json(back)) == text);

  std::mt19937_64 g(60);
  const FiniteMdp m = oracle::random_mdp(g, 3, 3, 0.7, 2.5);
  CHECK(mdp_from_json(mdp_to_json(m)) == m);

  Json broken = ensemble_to_json(ens);
  broken["clients"][0]["transitions"][0][0][0] = 5.0;
  CHECK_THROWS_AS(ensemble_from_json(broken), ContractViolation);
}

TEST_CASE("mountain car record round trip") {
  MountainCarRecord rec{MountainCarParams::fine_grid(), stepped_shifts(60)};
  const MountainCarRecord back = mountain_car_from_json(Json::parse(dump_json(mountain_car_to_json(rec))));
  CHECK(back.params == rec.params);
  CHECK(back.shifts == rec.shifts);
  rec.shifts = {2.0};
  CHECK_THROWS_AS(mountain_car_from_json(mountain_car_to_json(rec)), ContractViolation);
}

TEST_CASE("counts round trip") {
  TransitionCounts c(3, 2);
  c.record(0, 1, 2, 0.25);
  c.record(0, 1, 2, 0.5);
  c.record(0, 1, 0, 0.125);
  c.record(2, 0, 1, 1.0);
  CHECK(counts_from_json(Json::parse(dump_json(counts_to_json(c)))) == c);
}

TEST_CASE("number formatting") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(0.1) == "0.1");
  CHECK(format_number(1e-300) == "1e-300");
  CHECK(std::stod(format_number(1.0 / 3)) == 1.0 / 3);
}

TEST_CASE("config parsing") {
  const std::string text =
      "; tabular run\n"
      "[ensemble]\n"
      "#Clients (N) = 6\n"
      "num_states = 4\n"
      "heterogeneity = 0.25\n"
      "[federation]\n"
      "rounds = 7\n"
      "#Participant (K) = 3\n"
      "#Candidate Clients (d) = 5\n"
      "algorithm = fapi_without_fpe\n"
      "strategy = random\n"
      "delta_target = 0.1, 0.2, 0.3, 0.1, 0.2, 0.3\n"
      "[ppo]\n"
      "Batch Size = 100\n"
      "Timestep per Iteration = 1050\n"
      "KL Target = 0.003\n";
  const RunConfig cfg = parse_config(text);
  CHECK(cfg.ensemble.num_clients == 6);
  CHECK(cfg.ensemble.num_states == 4);
  CHECK(cfg.ensemble.heterogeneity == 0.25);
  CHECK(cfg.federation.num_rounds == 7);
  CHECK(cfg.federation.clients_per_round == 3);
  CHECK(cfg.federation.candidate_size == 5);
  CHECK(cfg.federation.algorithm == Algorithm::kWithoutFpe);
  CHECK(cfg.federation.strategy == SelectionStrategy::kRandom);
  CHECK(cfg.federation.delta_targets.size() == 6);
  CHECK(cfg.federation.ppo.kl_target == 0.003);
  CHECK(cfg.federation.ppo.gradient_steps == 11);
  CHECK(cfg.federation.step_budget == 1050);
  CHECK(parse_config(format_config(cfg)) == cfg);

  RunConfig car = parse_config("[ensemble]\nkind = mountain_car\n#Clients (N) = 12\n[mountain_car]\nshifts = stepped\nmax_episode_steps = 500\n");
  CHECK(car.env == EnvKind::kMountainCar);
  CHECK(car.federation.episode_horizon == 500);
  CHECK(resolve_shifts(car) == stepped_shifts(12));
  car.shifts = "0.5, -0.25";
  CHECK_THROWS_AS(resolve_shifts(car), ContractViolation);
  car.ensemble.num_clients = 2;
  CHECK(resolve_shifts(car) == std::vector<double>{0.5, -0.25});
  CHECK(parse_config(format_config(car)) == car);
}

TEST_CASE("config errors carry line numbers") {
  CHECK(error_line("[ensemble]\nnum_states = 4\nbogus = 1\n") == 3);
  CHECK(error_line("[nowhere]\n") == 1);
  CHECK(error_line("rounds = 3\n") == 1);
  CHECK(error_line("[federation]\nrounds = 3\n\nrounds = 4\n") == 4);
  CHECK(error_line("[federation]\nrounds = three\n") == 2);
  CHECK(error_line("[federation]\nalgorithm = fedavg\n") == 2);
  CHECK(error_line("[federation]\nuse_true_models = maybe\n") == 2);
  CHECK(error_line("[federation]\nrounds\n") == 2);
  // Sizes are checked against the population when the run starts.
  const RunConfig too_many = parse_config("[federation]\n#Participant (K) = 9\n");
  CHECK_THROWS_AS(run_experiment(build_federation(too_many), too_many.federation), ContractViolation);
}

TEST_CASE("CSV writers") {
  RoundRecord rec;
  rec.round = 2;
  rec.algorithm = Algorithm::kWithFpe;
  rec.selected = {0, 3};
  rec.client_delta = {0.1, 0, 0, 0.25};
  rec.client_epsilon = {0, 0, 0, 0.5};
  rec.mean_return = 1.5;
  rec.improvement = ImprovementCheck{0.5, 2.0, true};
  rec.metrics.candidates = {{0, {}, {}, 3.0}, {3, {}, {}, 4.0}};
  rec.metrics.delta = {0.75, -1.0};
  std::ostringstream h, m;
  write_history_csv(h, {rec});
  CHECK(h.str() ==
        "round,algorithm,selected_ids,mean_return,realized_delta_max,realized_epsilon_max,"
        "lhs_improvement,rhs_bound,bound_ok\n"
        "2,fapi_with_fpe,0;3,1.5,0.25,0.5,0.5,2,1\n");
  write_metrics_csv(m, {rec});
  CHECK(m.str() == "round,client_id,delta_n,value_estimate,selected\n2,0,0.75,3,1\n2,3,-1,4,1\n");

  rec.improvement.reset();
  std::ostringstream h2;
  write_history_csv(h2, {rec});
  CHECK(h2.str().substr(h2.str().find('\n') + 1) == "2,fapi_with_fpe,0;3,1.5,0.25,0.5,,,\n");

  BoundReport report;
  report.entries = {make_entry("evaluation_gap", 0, 1.0, 2.0)};
  report.asymptotic_skipped = true;
  std::ostringstream b;
  write_bounds_csv(b, report);
  CHECK(b.str() == "bound_name,round,lhs,rhs,slack,satisfied,hard\nevaluation_gap,0,1,2,1,1,1\nasymptotic_gap,-1,,,,skipped,0\n");

  const auto kr = heterogeneity_report(gen_random_ensemble({2, 3, 2, 0.9, 0.0, 1}));
  std::ostringstream k;
  write_kappa_csv(k, kr);
  CHECK(k.str() == "i,j,kappa_ij\n0,0,0\n0,1,0\n1,0,0\n1,1,0\n0,I,0\n1,I,0\nkappa1,,0\nkappa2,,0\n");
}
