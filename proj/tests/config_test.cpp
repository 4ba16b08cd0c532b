#include "doctest.h"

#include <stdexcept>
#include <string>

#include "aoilab/config.hpp"

using namespace aoilab;

namespace {

const char* kMinimal =
    "[scenario]\n"
    "name = tiny\n"
    "horizon = 100\n"
    "[network]\n"
    "agents = 2\n"
    "channel = 0 1 iid 0.5\n";

}  // namespace

TEST_CASE("minimal config parses with defaults") {
  const ExperimentConfig cfg = parse_config_text(kMinimal, "inline");
  CHECK(cfg.name == "tiny");
  CHECK(cfg.horizon == 100);
  CHECK(cfg.seed == 1);
  CHECK(cfg.replications == 1);
  CHECK(cfg.burn_in == 0);
  CHECK(cfg.network.num_agents == 2);
  REQUIRE(cfg.network.channels.size() == 1);
  CHECK(std::get<IidChannel>(cfg.network.channels[0].process).q == doctest::Approx(0.5));
  CHECK(cfg.objective.kind == ObjectiveKind::kNone);
  CHECK(cfg.schedule.kind == StepSchedule::Kind::kPower);
  CHECK(cfg.analysis.tail_m_max == 100);
  CHECK(cfg.analysis.sigma_mult == doctest::Approx(3.0));
  CHECK(cfg.analysis.candidate == CandidateKind::kNone);
  CHECK(cfg.analysis.pair_holder == -1);
  CHECK_NOTHROW(cfg.validate());
  CHECK(make_objective(cfg) == nullptr);
}

TEST_CASE("channel grammar covers all three process kinds") {
  const std::string text =
      "[scenario]\n"
      "name = kinds\n"
      "horizon = 10\n"
      "[network]\n"
      "agents = 3\n"
      "channel = 0 1 iid 0.25\n"
      "channel = 1 2 periodic 4 2\n"
      "channel = 2 0 markov 2  0.9 0.1 0.1 0.9  0.0 0.9  0.5 0.5\n";
  const ExperimentConfig cfg = parse_config_text(text, "inline");
  REQUIRE(cfg.network.channels.size() == 3);
  const auto& periodic = std::get<PeriodicChannel>(cfg.network.channels[1].process);
  CHECK(periodic.period == 4);
  CHECK(periodic.offset == 2);
  const auto& markov = std::get<MarkovChannel>(cfg.network.channels[2].process);
  CHECK(markov.num_states() == 2);
  CHECK(markov.transition[0][0] == doctest::Approx(0.9));
  CHECK(markov.success[1] == doctest::Approx(0.9));
  CHECK(markov.initial[0] == doctest::Approx(0.5));
}

TEST_CASE("echo is a canonical fixed point") {
  const std::string text =
      "[scenario]\n"
      "name = ring\n"
      "seed = 9\n"
      "replications = 4\n"
      "horizon = 500\n"
      "burn_in = 20\n"
      "[network]\n"
      "agents = 3\n"
      "channel = 0 1 markov 2  0.9 0.1 0.1 0.9  0.0 0.9  0.5 0.5\n"
      "channel = 1 2 iid 0.5\n"
      "channel = 2 0 periodic 3 1\n"
      "[objective]\n"
      "kind = quadratic\n"
      "target = 1 -2 3\n"
      "dims = 1 1 1\n"
      "noise_sigma = 0.1\n"
      "[schedule]\n"
      "kind = power\n"
      "a0 = 1\n"
      "gamma = 1\n"
      "[analysis]\n"
      "ssc_epsilon = 0.17\n"
      "ssc_kappa = 2\n"
      "mixing_lags = 6\n"
      "candidate = constructed\n"
      "pair = 1 0\n"
      "moment_p = 1 2\n";
  const ExperimentConfig cfg = parse_config_text(text, "inline");
  const std::string once = cfg.echo();
  const ExperimentConfig back = parse_config_text(once, "echo");
  CHECK(back.echo() == once);
  CHECK(back.name == cfg.name);
  CHECK(back.analysis.ssc_epsilon == cfg.analysis.ssc_epsilon);
  CHECK(back.analysis.moment_p == cfg.analysis.moment_p);
  CHECK(back.network.channels.size() == cfg.network.channels.size());
  CHECK_NOTHROW(back.validate());
}

TEST_CASE("parse errors carry origin and line number") {
  const std::string bad_key =
      "[scenario]\n"
      "name = x\n"
      "horizon = 10\n"
      "wat = 1\n";
  CHECK_THROWS_WITH_AS(parse_config_text(bad_key, "myfile.cfg"),
                       doctest::Contains("myfile.cfg line 4"), std::invalid_argument);

  CHECK_THROWS_WITH_AS(parse_config_text("[nonsense]\n", "f"), doctest::Contains("line 1"),
                       std::invalid_argument);

  const std::string bad_channel =
      "[scenario]\n"
      "name = x\n"
      "horizon = 10\n"
      "[network]\n"
      "agents = 2\n"
      "channel = 0 1 smoke 0.5\n";
  CHECK_THROWS_WITH_AS(parse_config_text(bad_channel, "f"), doctest::Contains("line 6"),
                       std::invalid_argument);

  const std::string bad_number =
      "[scenario]\n"
      "name = x\n"
      "horizon = ten\n";
  CHECK_THROWS_WITH_AS(parse_config_text(bad_number, "f"), doctest::Contains("line 3"),
                       std::invalid_argument);
}

TEST_CASE("validation rejects inconsistent settings") {
  ExperimentConfig cfg = parse_config_text(kMinimal, "inline");

  ExperimentConfig c = cfg;
  c.replications = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("replications"), std::invalid_argument);

  c = cfg;
  c.burn_in = 100;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("burn-in"), std::invalid_argument);

  c = cfg;
  c.analysis.growth_epsilon = 0.5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("analysis pair"), std::invalid_argument);

  c = cfg;
  c.analysis.pair_holder = 2;
  c.analysis.pair_subject = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("pair"), std::invalid_argument);

  c = cfg;
  c.analysis.mixing_lags = 3;
  c.analysis.mixing_channel = 5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("mixing_channel"), std::invalid_argument);

  c = cfg;
  c.analysis.candidate = CandidateKind::kGeometric;
  c.analysis.candidate_coeff = -1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("candidate"), std::invalid_argument);

  c = cfg;
  c.analysis.bound_grid = 16;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("bound_grid"), std::invalid_argument);
}

TEST_CASE("objective instantiation") {
  std::string text(kMinimal);
  text +=
      "[objective]\n"
      "kind = quadratic\n"
      "target = 0.5 -0.5\n"
      "dims = 1 1\n"
      "noise_sigma = 0.2\n";
  const ExperimentConfig cfg = parse_config_text(text, "inline");
  const auto obj = make_objective(cfg);
  REQUIRE(obj != nullptr);
  CHECK(obj->num_agents() == 2);
  CHECK(obj->total_dim() == 2);
  REQUIRE(obj->optimum().has_value());
  CHECK((*obj->optimum())[0] == doctest::Approx(0.5));

  std::string ls(kMinimal);
  ls +=
      "[objective]\n"
      "kind = least_squares\n"
      "dims = 1 1\n"
      "rows = 8\n"
      "data_seed = 4\n";
  const ExperimentConfig lcfg = parse_config_text(ls, "inline");
  const auto lobj = make_objective(lcfg);
  REQUIRE(lobj != nullptr);
  CHECK(lobj->num_agents() == 2);
  CHECK(lobj->optimum().has_value());
}

TEST_CASE("load config reports missing files") {
  CHECK_THROWS_WITH_AS(load_config("/nonexistent/path.cfg"), doctest::Contains("cannot open"),
                       std::invalid_argument);
}
