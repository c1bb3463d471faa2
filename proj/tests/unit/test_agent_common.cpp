#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "mtf/agent.hpp"
#include "mtf/policy.hpp"
#include "mtf/text.hpp"

using namespace mtf;

TEST_CASE("hyperparameter defaults") {
  const AgentHyperparams h;
  CHECK(h.gamma == 0.95);
  CHECK(h.rho == 0.15);
  CHECK(h.target_rate == 0.05);
  CHECK(h.target_every == 10);
  CHECK(h.batch_size == 256);
  CHECK(h.buffer_capacity == 100000);
  CHECK(h.lr_generator == 1e-3);
  CHECK(h.lr_perturb == 1e-4);
  CHECK(h.lr_critic == 2e-4);
  CHECK(h.sampled_actions == 10);
  CHECK_NOTHROW(h.validate());
}

TEST_CASE("hyperparameter validation") {
  auto bad = [](auto edit) {
    AgentHyperparams h;
    edit(h);
    return h;
  };
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.gamma = 1.5; }).validate());
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.rho = -0.1; }).validate());
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.sampled_actions = 0; }).validate());
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.batch_size = 0; }).validate());
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.target_every = 0; }).validate());
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.target_rate = 0.0; }).validate());
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.lr_critic = 0.0; }).validate());
  CHECK_THROWS(bad([](AgentHyperparams& h) { h.hidden = {}; }).validate());
  CHECK_NOTHROW(bad([](AgentHyperparams& h) { h.gamma = 1.0; }).validate());
}

TEST_CASE("hyperparameter map round trip") {
  AgentHyperparams h;
  h.rho = 0.3;
  h.hidden = {64, 32};
  h.lr_critic = 1.0 / 3.0;
  const AgentHyperparams back = AgentHyperparams::from_map(h.to_map());
  CHECK(back.to_map() == h.to_map());
  CHECK(back.lr_critic == h.lr_critic);
  CHECK_THROWS(AgentHyperparams::from_map({{"learning_rate", "1"}}));
  CHECK_THROWS(AgentHyperparams::from_map({{"rho", "abc"}}));
}

TEST_CASE("training log round trip") {
  TrainingLog log{{1, 0.1, 2.0 / 3.0, -1e-300, 5.5}, {2, 1e10, 0.0, 1.0, -2.25}};
  std::stringstream ss;
  write_training_log(ss, log);
  CHECK(ss.str().rfind("epoch,mean_q,generator_loss,actor_objective,critic_loss\n", 0) == 0);
  CHECK(read_training_log(ss) == log);
  std::stringstream bad("epoch,mean_q,generator_loss,actor_objective,critic_loss\n1,2,3\n");
  CHECK_THROWS(read_training_log(bad));
}

TEST_CASE("column helpers") {
  nn::Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const nn::Matrix r = detail::repeat_columns(m, 3);
  REQUIRE(r.cols() == 6);
  for (int c = 0; c < 6; ++c) CHECK(r.col(c) == m.col(c / 3));
  CHECK(detail::stack(m, m).rows() == 4);
  CHECK_THROWS(detail::stack(m, r));
  CHECK(detail::clamp_unit(m * 0.5).maxCoeff() == 1.0);
}

TEST_CASE("policies") {
  Rng rng(1);
  RandomPolicy random(4);
  CHECK_FALSE(random.deterministic());
  for (int i = 0; i < 200; ++i) CHECK(random.act(Vec::Zero(3), rng).alpha.cwiseAbs().maxCoeff() <= 1.0);

  Vec big(2);
  big << 3.0, -0.5;
  ConstantPolicy c(big);
  CHECK(c.act(Vec::Zero(1), rng).alpha == Vec(Eigen::Vector2d(1.0, -0.5)));

  auto base = std::make_shared<const ConstantPolicy>(Vec::Zero(2));
  NoisyPolicy exact(base, 0.0);
  CHECK(exact.deterministic());
  CHECK(exact.act(Vec::Zero(1), rng).alpha.isZero());
  CHECK_THROWS(NoisyPolicy(nullptr, 0.1));
  CHECK_THROWS(NoisyPolicy(base, -1.0));

  // Default batching consumes the generator like sequential calls.
  Rng r1(4), r2(4);
  const nn::Matrix states = nn::Matrix::Zero(3, 6);
  const nn::Matrix batch = random.act_batch(states, r1);
  for (int i = 0; i < 6; ++i) CHECK(Vec(batch.col(i)) == random.act(states.col(i), r2).alpha);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_value_seed(7, 0.15) == derive_value_seed(7, 0.15));
  CHECK(derive_value_seed(7, 0.15) != derive_value_seed(7, 0.1));
  CHECK(logistic(0.0) == 0.5);
  CHECK(logistic(-800.0) >= 0.0);
  CHECK(logistic(800.0) == 1.0);
}

TEST_CASE("decimal text round trip") {
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const double x = std::ldexp(standard_normal(rng), static_cast<int>(uniform01(rng) * 200) - 100);
    CHECK(text::parse_double(text::format_double(x)) == x);
  }
  CHECK_FALSE(text::parse_double("1.5x"));
  CHECK_FALSE(text::parse_int("12.0"));
  CHECK(text::trim("  a b ") == "a b");
  CHECK(text::split("a,,b", ',').size() == 3);
}

TEST_CASE("flat config text") {
  std::istringstream in("# header\n\nrho = 0.2\n  hidden=32, 32 \nname =\n");
  const auto m = text::read_config(in);
  CHECK(m.size() == 3);
  CHECK(m.at("rho") == "0.2");
  CHECK(m.at("hidden") == "32, 32");
  CHECK(m.at("name").empty());
  std::ostringstream out;
  text::write_config(out, m);
  std::istringstream again(out.str());
  CHECK(text::read_config(again) == m);

  std::istringstream no_eq("rho 0.2\n");
  CHECK_THROWS_WITH_AS(text::read_config(no_eq), doctest::Contains("line 1"), std::invalid_argument);
  std::istringstream twice("a = 1\na = 2\n");
  CHECK_THROWS_WITH_AS(text::read_config(twice), doctest::Contains("line 2"), std::invalid_argument);
  std::istringstream empty_key(" = 2\n");
  CHECK_THROWS_AS(text::read_config(empty_key), std::invalid_argument);
}
