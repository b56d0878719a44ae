#include <doctest.h>

#include "oracles.hpp"
#include "pestvl/rng.hpp"
#include "pestvl/wkv.hpp"

#include <random>

using namespace pestvl;
using graph::Graph;
using graph::Node;
using partition::Segment;

namespace {

Matrixd randomMat(Index rows, Index cols, uint64_t seed, double lo = -1.0,
                  double hi = 1.0) {
  std::mt19937_64 gen(seed);
  Matrixd m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c)
      m(r, c) = lo + (hi - lo) * uniformUnit(gen);
  return m;
}

}  // namespace

TEST_CASE("linear-time scan equals the direct quadratic evaluation") {
  const std::vector<std::vector<Segment>> layouts = {
      {{0, 8}},
      {{0, 4}, {4, 4}},
      {{0, 2}, {2, 3}, {5, 3}},
  };
  const Matrixd k = randomMat(8, 3, 1, -2.0, 2.0);
  const Matrixd v = randomMat(8, 3, 2);
  const Eigen::RowVectorXd w = randomMat(1, 3, 3, 0.2, 4.0).row(0);
  const Eigen::RowVectorXd u = randomMat(1, 3, 4).row(0);
  for (const auto& segs : layouts) {
    const Matrixd fast = wkv::gaWkvForward<double>(k, v, w, u, segs);
    const Matrixd slow = oracle::naiveWkv(k, v, w, u, segs);
    CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("length-one segments reproduce v exactly") {
  const Matrixd k = randomMat(4, 2, 5, -3.0, 3.0);
  const Matrixd v = randomMat(4, 2, 6);
  const Eigen::RowVectorXd w = randomMat(1, 2, 7, 0.5, 2.0).row(0);
  const Eigen::RowVectorXd u = randomMat(1, 2, 8).row(0);
  const std::vector<Segment> singles{{0, 1}, {1, 1}, {2, 1}, {3, 1}};
  const Matrixd out = wkv::gaWkvForward<double>(k, v, w, u, singles);
  CHECK((out - v).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero decay makes the non-self mixture order independent") {
  Matrixd k = randomMat(6, 1, 9);
  Matrixd v = randomMat(6, 1, 10);
  const Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(1);
  const Eigen::RowVectorXd u = randomMat(1, 1, 11).row(0);
  const std::vector<Segment> whole{{0, 6}};
  const Matrixd base = wkv::gaWkvForward<double>(k, v, w, u, whole);
  // Swap two non-self tokens (1 and 4): row 0's output cannot change.
  std::swap(k(1, 0), k(4, 0));
  std::swap(v(1, 0), v(4, 0));
  const Matrixd swapped = wkv::gaWkvForward<double>(k, v, w, u, whole);
  CHECK(swapped(0, 0) == doctest::Approx(base(0, 0)).epsilon(1e-12));
}

TEST_CASE("a large self bonus drives the output toward v_t") {
  const Matrixd k = randomMat(5, 2, 12);
  const Matrixd v = randomMat(5, 2, 13);
  const Eigen::RowVectorXd w = randomMat(1, 2, 14, 0.5, 2.0).row(0);
  Eigen::RowVectorXd u = Eigen::RowVectorXd::Constant(2, 50.0);
  const Matrixd out = wkv::gaWkvForward<double>(k, v, w, u, {{0, 5}});
  CHECK((out - v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stronger decay shrinks the influence of distant tokens") {
  const Index T = 10;
  Matrixd k = Matrixd::Zero(T, 1);
  Matrixd v = Matrixd::Zero(T, 1);
  v(T - 1, 0) = 1.0;  // only the far token carries signal
  const Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(1);
  double prev = 1.0;
  for (double decay : {0.5, 2.0, 8.0, 32.0}) {
    Eigen::RowVectorXd w = Eigen::RowVectorXd::Constant(1, decay);
    const double got = wkv::gaWkvForward<double>(k, v, w, u, {{0, T}})(0, 0);
    CHECK(got < prev);
    CHECK(got > 0.0);
    prev = got;
  }
}

TEST_CASE("the stabilized scan survives key magnitudes that overflow exp") {
  Matrixd k = randomMat(6, 2, 15, -800.0, 800.0);
  const Matrixd v = randomMat(6, 2, 16);
  const Eigen::RowVectorXd w = randomMat(1, 2, 17, 0.5, 3.0).row(0);
  const Eigen::RowVectorXd u = randomMat(1, 2, 18).row(0);
  const std::vector<Segment> segs{{0, 6}};
  const Matrixd fast = wkv::gaWkvForward<double>(k, v, w, u, segs);
  CHECK(fast.allFinite());
  // The long-double direct sum still fits these magnitudes.
  const Matrixd slow = oracle::naiveWkv(k, v, w, u, segs);
  CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("segments are isolated: edits outside a segment change nothing inside") {
  Matrixd k = randomMat(8, 2, 19);
  Matrixd v = randomMat(8, 2, 20);
  const Eigen::RowVectorXd w = randomMat(1, 2, 21, 0.5, 2.0).row(0);
  const Eigen::RowVectorXd u = randomMat(1, 2, 22).row(0);
  const std::vector<Segment> segs{{0, 4}, {4, 4}};
  const Matrixd base = wkv::gaWkvForward<double>(k, v, w, u, segs);
  k.bottomRows(4).setConstant(3.0);
  v.bottomRows(4).setConstant(-1.0);
  const Matrixd edited = wkv::gaWkvForward<double>(k, v, w, u, segs);
  CHECK((edited.topRows(4) - base.topRows(4)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((edited.bottomRows(4) - base.bottomRows(4)).cwiseAbs().maxCoeff() > 0.1);
}

TEST_CASE("segment validation rejects overlaps, gaps and short covers") {
  const Matrixd k = randomMat(6, 1, 23);
  const Matrixd v = randomMat(6, 1, 24);
  const Eigen::RowVectorXd w = Eigen::RowVectorXd::Ones(1);
  const Eigen::RowVectorXd u = Eigen::RowVectorXd::Zero(1);
  CHECK_THROWS_AS(wkv::gaWkvForward<double>(k, v, w, u, {{0, 3}, {2, 4}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(wkv::gaWkvForward<double>(k, v, w, u, {{0, 3}, {4, 2}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(wkv::gaWkvForward<double>(k, v, w, u, {{0, 4}}),
                  std::invalid_argument);
}

TEST_CASE("analytic gradients match finite differences on every input") {
  const std::vector<Segment> segs{{0, 3}, {3, 2}};
  const Matrixd k0 = randomMat(5, 2, 25);
  const Matrixd v0 = randomMat(5, 2, 26);
  const Matrixd w0 = randomMat(1, 2, 27, 0.5, 2.0);
  const Matrixd u0 = randomMat(1, 2, 28);
  const Matrixd readout = randomMat(5, 2, 29);

  auto eval = [&](const Matrixd& k, const Matrixd& v, const Matrixd& w,
                  const Matrixd& u) {
    Graph<double> G;
    Node out = wkv::gaWkv<double>(G, G.input(k), G.input(v), G.input(w),
                                  G.input(u), segs);
    return G.value(G.sumAll(G.hadamard(out, G.input(readout))))(0, 0);
  };

  Graph<double> G;
  Node nk = G.input(k0), nv = G.input(v0), nw = G.input(w0), nu = G.input(u0);
  Node out = wkv::gaWkv<double>(G, nk, nv, nw, nu, segs);
  G.backward(G.sumAll(G.hadamard(out, G.input(readout))));

  const Matrixd fdK = oracle::fdGradient(
      [&](const Matrixd& p) { return eval(p, v0, w0, u0); }, k0);
  const Matrixd fdV = oracle::fdGradient(
      [&](const Matrixd& p) { return eval(k0, p, w0, u0); }, v0);
  const Matrixd fdW = oracle::fdGradient(
      [&](const Matrixd& p) { return eval(k0, v0, p, u0); }, w0);
  const Matrixd fdU = oracle::fdGradient(
      [&](const Matrixd& p) { return eval(k0, v0, w0, p); }, u0);

  CHECK(oracle::gradDisagreement(G.gradient(nk), fdK) < 1e-6);
  CHECK(oracle::gradDisagreement(G.gradient(nv), fdV) < 1e-6);
  CHECK(oracle::gradDisagreement(G.gradient(nw), fdW) < 1e-6);
  CHECK(oracle::gradDisagreement(G.gradient(nu), fdU) < 1e-6);
}

TEST_CASE("float instantiation of the scan stays close to the double one") {
  const Matrixd k = randomMat(8, 3, 30, -2.0, 2.0);
  const Matrixd v = randomMat(8, 3, 31);
  const Matrixd w = randomMat(1, 3, 32, 0.2, 4.0);
  const Matrixd u = randomMat(1, 3, 33);
  const std::vector<Segment> segs{{0, 4}, {4, 4}};
  const Matrixd dOut =
      wkv::gaWkvForward<double>(k, v, w.row(0), u.row(0), segs);
  const MatrixX<float> fOut = wkv::gaWkvForward<float>(
      k.cast<float>(), v.cast<float>(), w.row(0).cast<float>(),
      u.row(0).cast<float>(), segs);
  CHECK((fOut.cast<double>() - dOut).cwiseAbs().maxCoeff() < 1e-5);
}
