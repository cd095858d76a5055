#include <doctest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>
#include <stdexcept>

#include "stoplab/nn.hpp"

using namespace stoplab;

TEST_CASE("zero-initialised network outputs zero") {
  MultiHeadNet net(NetConfig{3, {8, 4}, {2, 3}});
  const auto out = net.forward_one(Eigen::Vector3d(1.0, -2.0, 0.5));
  REQUIRE(out.size() == 2);
  CHECK(out[0].isZero());
  CHECK(out[1].size() == 3);
  CHECK(out[1].isZero());
}

TEST_CASE("parameter layout and sizes") {
  MultiHeadNet net(NetConfig{2, {16, 16}, {2, 2}}, 1);
  CHECK(net.n_params() == (2 * 16 + 16) + (16 * 16 + 16) + (16 * 2 + 2) * 2);
  CHECK(net.trunk_range().begin == 0);
  CHECK(net.trunk_range().end == net.head_range(0).begin);
  CHECK(net.head_range(0).end == net.head_range(1).begin);
  CHECK(net.head_range(1).end == net.n_params());
  CHECK(net.n_layers() == 4);
  for (std::size_t l = 0; l < net.n_layers(); ++l) CHECK(net.bias(l).isZero());
  // He-uniform: |w| <= sqrt(6 / fan_in).
  CHECK(net.weight(0).cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 2.0));
  CHECK(net.weight(1).cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 16.0));
  CHECK(MultiHeadNet(net.config(), 1).params() == net.params());
  CHECK(MultiHeadNet(net.config(), 2).params() != net.params());
}

TEST_CASE("an identity layer passes non-negative inputs through") {
  MultiHeadNet net(NetConfig{2, {2}, {2}});
  net.weight(0) = Eigen::Matrix2d::Identity();
  net.weight(1) = Eigen::Matrix2d::Identity();
  net.bias(1) = Eigen::Vector2d(0.5, -0.5);
  const auto out = net.forward_one(Eigen::Vector2d(3.0, -1.0));
  CHECK(out[0](0) == 3.5);
  CHECK(out[0](1) == -0.5);
}

TEST_CASE("network without a trunk is linear") {
  MultiHeadNet net(NetConfig{2, {}, {1}}, 4);
  const Eigen::Vector2d a(1.0, 2.0), b(-3.0, 0.5);
  const double fa = net.forward_one(a)[0](0), fb = net.forward_one(b)[0](0), fab = net.forward_one(a + b)[0](0);
  CHECK(fab == doctest::Approx(fa + fb));  // zero bias
}

TEST_CASE("backward matches central differences on a 2x16x16 net") {
  MultiHeadNet net(NetConfig{2, {16, 16}, {2}}, 11);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  for (Eigen::Index i = 0; i < net.n_params(); ++i) net.params()[i] += 0.05 * z(rng);
  Eigen::MatrixXd x(2, 5), r(2, 5);
  for (Eigen::Index i = 0; i < 10; ++i) {
    x.data()[i] = z(rng);
    r.data()[i] = z(rng);
  }
  auto f = [&](const MultiHeadNet& n) { return (n.forward(x).heads[0].array() * r.array()).sum(); };
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.n_params());
  net.backward(net.forward(x), {&r}, grad);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < net.n_params(); ++i) {
    const double o = net.params()[i];
    net.params()[i] = o + h;
    const double up = f(net);
    net.params()[i] = o - h;
    const double dn = f(net);
    net.params()[i] = o;
    const double fd = (up - dn) / (2 * h);
    worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("backward accumulates and can leave the trunk alone") {
  MultiHeadNet net(NetConfig{2, {4}, {2, 2}}, 5);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 3);
  Eigen::MatrixXd d = Eigen::MatrixXd::Ones(2, 3);
  const auto tape = net.forward(x);
  Eigen::VectorXd g1 = Eigen::VectorXd::Zero(net.n_params());
  net.backward(tape, {nullptr, &d}, g1, false);
  const auto tr = net.trunk_range();
  CHECK(g1.segment(tr.begin, tr.size()).isZero());
  CHECK(g1.segment(net.head_range(0).begin, net.head_range(0).size()).isZero());
  CHECK_FALSE(g1.segment(net.head_range(1).begin, net.head_range(1).size()).isZero());
  Eigen::VectorXd g2 = g1;
  net.backward(tape, {nullptr, &d}, g2, false);
  CHECK(g2.isApprox(2.0 * g1));
}

TEST_CASE("width mismatch throws") {
  MultiHeadNet net(NetConfig{3, {4}, {2}}, 1);
  CHECK_THROWS_AS(net.forward(Eigen::MatrixXd::Zero(2, 4)), std::invalid_argument);
}

TEST_CASE("Adam first step moves every coordinate by lr against the gradient sign") {
  Eigen::VectorXd p = Eigen::VectorXd::Zero(5);
  Eigen::VectorXd g(5);
  g << 1.0, -2.0, 0.5, 3.0, -0.1;
  Adam adam(ParamRange{1, 4});
  adam.step(p, g, 0.01);
  CHECK(p[0] == 0.0);
  CHECK(p[4] == 0.0);
  CHECK(p[1] == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p[2] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p[3] == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(adam.steps() == 1);
}

TEST_CASE("Adam minimises a quadratic and rejects non-finite gradients") {
  Eigen::VectorXd p(2);
  p << 3.0, -4.0;
  Adam adam(ParamRange{0, 2});
  for (int i = 0; i < 3000; ++i) adam.step(p, 2.0 * p, 0.01);
  CHECK(p.norm() < 1e-2);
  Eigen::VectorXd bad(2);
  bad << 1.0, std::nan("");
  CHECK_THROWS_AS(adam.step(p, bad, 0.01, 17), TrainingDivergence);
  try {
    adam.step(p, bad, 0.01, 17);
  } catch (const TrainingDivergence& e) {
    CHECK(e.batch_index() == 17);
  }
}

TEST_CASE("exponential schedules") {
  CHECK(exp_schedule(0.01, 0.9999, 0) == 0.01);
  CHECK(exp_schedule(0.01, 0.9999, 100) == doctest::Approx(0.0099005).epsilon(1e-6));
  CHECK(exp_schedule(0.1, 0.9999, 200) == doctest::Approx(0.098020).epsilon(1e-5));
  CHECK(exp_schedule(0.99, 0.95, 10) == doctest::Approx(0.59276).epsilon(1e-4));
}

TEST_CASE("net config text round trip") {
  const NetConfig cfg{5, {64, 32}, {2, 5}};
  CHECK(NetConfig::parse(cfg.describe()) == cfg);
  const NetConfig bare{2, {}, {1}};
  CHECK(NetConfig::parse(bare.describe()) == bare);
  CHECK_THROWS(NetConfig::parse("input=2"));
  CHECK_THROWS(NetConfig::parse("input=2 heads=2 depth=3"));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  Checkpoint ck;
  ck.meta["algorithm"] = "do-iqs-lb";
  ck.meta["note"] = "two words";
  ck.nets.push_back({"q", MultiHeadNet(NetConfig{3, {8}, {2, 3}}, 1)});
  ck.nets.push_back({"g", MultiHeadNet(NetConfig{2, {4, 4}, {1}}, 2)});
  ck.nets[0].net.params()[0] = -0.0;
  ck.nets[0].net.params()[1] = 1e-310;
  std::stringstream ss;
  write_checkpoint(ss, ck);
  const std::string bytes = ss.str();
  const auto back = read_checkpoint(ss);
  CHECK(back.meta == ck.meta);
  REQUIRE(back.nets.size() == 2);
  CHECK(back.has("g"));
  CHECK_FALSE(back.has("dyn"));
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.nets[i].name == ck.nets[i].name);
    CHECK(back.nets[i].net.config() == ck.nets[i].net.config());
    const auto& a = back.nets[i].net.params();
    const auto& b = ck.nets[i].net.params();
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
  }
  std::stringstream again;
  write_checkpoint(again, back);
  CHECK(again.str() == bytes);
  CHECK_THROWS_AS(back.net("dyn"), std::out_of_range);
  std::istringstream junk("not a checkpoint\n");
  CHECK_THROWS_AS(read_checkpoint(junk), std::runtime_error);
}
