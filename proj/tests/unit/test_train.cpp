#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dgflow/errors.hpp"
#include "dgflow/generate.hpp"
#include "dgflow/losses.hpp"
#include "dgflow/train.hpp"

using namespace dgflow;

namespace {

// Pairs from the flow of H = w . x under G = S, which moves every state by dt * S w.
PairSet linear_energy_pairs(double w0, double w1, double dt, std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> a, b;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = u(rng), p = u(rng);
    a.insert(a.end(), {q, p});
    b.insert(b.end(), {q + dt * w1, p - dt * w0});
  }
  return {Tensor::matrix(n, 2, a), Tensor::matrix(n, 2, b), dt};
}

ArchSpec linear_arch() {
  ArchSpec a;
  a.state_dim = 2;
  a.hidden = {};
  return a;
}

}  // namespace

TEST(Train, ZeroIterationsLeaveModelUnchanged) {
  EnergyModel m(linear_arch(), 3);
  const ParamStore before = m.params();
  TrainConfig cfg;
  cfg.iterations = 0;
  const TrainResult r = train_energy(m, GSpec::symplectic(1), linear_energy_pairs(0.3, -0.5, 0.1, 10), cfg);
  EXPECT_TRUE(m.params().identical(before));
  EXPECT_TRUE(r.log.empty());
}

TEST(Train, RecoversLinearEnergy) {
  EnergyModel m(linear_arch(), 3);
  TrainConfig cfg;
  cfg.iterations = 3000;
  cfg.batch = 20;
  cfg.lr = 0.01;
  train_energy(m, GSpec::symplectic(1), linear_energy_pairs(0.3, -0.5, 0.1, 50), cfg);
  EXPECT_NEAR(m.params().at("W0")[0], 0.3, 1e-3);
  EXPECT_NEAR(m.params().at("W0")[1], -0.5, 1e-3);
}

TEST(Train, SeedDeterminism) {
  auto run = [] {
    ArchSpec a;
    a.hidden = {16, 16};
    EnergyModel m(a, 4);
    TrainConfig cfg;
    cfg.iterations = 30;
    cfg.batch = 8;
    cfg.log_every = 1;
    cfg.seed = 9;
    const TrainResult r = train_energy(m, GSpec::symplectic(1), linear_energy_pairs(0.3, -0.5, 0.1, 40), cfg);
    std::vector<double> losses;
    for (const auto& rec : r.log) losses.push_back(rec.loss);
    return std::make_pair(losses, m.params());
  };
  const auto a = run(), b = run();
  ASSERT_EQ(a.first.size(), 30u);
  for (std::size_t i = 0; i < a.first.size(); ++i) EXPECT_EQ(a.first[i], b.first[i]);
  EXPECT_TRUE(a.second.identical(b.second));
}

TEST(Train, MicroBatchingMatchesWholeBatch) {
  auto run = [](std::size_t micro) {
    ArchSpec a;
    a.hidden = {8};
    EnergyModel m(a, 4);
    TrainConfig cfg;
    cfg.iterations = 5;
    cfg.batch = 12;
    cfg.micro_batch = micro;
    train_energy(m, GSpec::symplectic(1), linear_energy_pairs(0.3, -0.5, 0.1, 40), cfg);
    return m.params();
  };
  const ParamStore whole = run(12), parts = run(5);
  for (std::size_t i = 0; i < whole.size(); ++i) EXPECT_LT(max_abs_diff(whole[i], parts[i]), 1e-12);
}

TEST(Train, OverflowAbortsWithDiagnostics) {
  EnergyModel m(linear_arch(), 3);
  TrainConfig cfg;
  cfg.iterations = 5;
  PairSet data = linear_energy_pairs(0.3, -0.5, 0.1, 10);
  data.dt = 1e-308;
  try {
    train_energy(m, GSpec::symplectic(1), data, cfg);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 0"), std::string::npos);
  }
}

TEST(Train, NodeAndHnnRolesTrain) {
  const PairSet data = linear_energy_pairs(0.3, -0.5, 0.1, 40);
  ArchSpec a;
  a.hidden = {8};
  EnergyModel h(a, 1);
  TrainConfig cfg;
  cfg.role = ModelRole::hnn;
  cfg.iterations = 200;
  cfg.batch = 10;
  cfg.lr = 0.01;
  const TrainResult r = train_energy(h, GSpec::symplectic(1), data, cfg);
  EXPECT_LT(r.log.back().loss, r.log.front().loss);
  ArchSpec n = a;
  n.kind = ArchKind::node_mlp;
  NodeModel node(n, 1);
  cfg.role = ModelRole::node;
  const TrainResult rn = train_node(node, data, cfg);
  EXPECT_LT(rn.log.back().loss, rn.log.front().loss);
  EXPECT_THROW(train_energy(h, GSpec::symplectic(1), data, cfg), std::invalid_argument);
}

TEST(Train, DgnetBeatsNodeOnMassSpring) {
  OdeGenConfig g = OdeGenConfig::defaults("mass_spring");
  g.seed = 3;
  const Dataset ds = gen_ode(g);
  const PairSet data = make_pairs(ds.train, ds.dt);
  ArchSpec a;
  a.hidden = {200, 200};
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.precision = Precision::f32;
  EnergyModel dg(a, 1, Precision::f32);
  train_energy(dg, GSpec::symplectic(1), data, cfg);
  const double dg_loss = evaluate_loss(dg, GSpec::symplectic(1), data, cfg);

  ArchSpec n = a;
  n.kind = ArchKind::node_mlp;
  NodeModel node(n, 1, Precision::f32);
  cfg.role = ModelRole::node;
  train_node(node, data, cfg);
  Tape tape(Precision::f32);
  const Var l = loss_integrator(node, node.bind_params(tape, false), cfg.integrator, tape.constant(data.u0),
                                tape.constant(data.u1), data.dt, cfg.normalize_by_dt);
  RecordProperty("dgnet_loss", std::to_string(dg_loss));
  RecordProperty("node_loss", std::to_string(l.value().item()));
  EXPECT_LT(dg_loss, l.value().item());
}
