#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "isdbandit/policies.hpp"
#include "isdbandit/subspace.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace isdbandit;
using namespace isdbandit::oracle;

namespace {

Window make_window(const Matrix& x, const Vector& y) { return {x, y}; }

}  // namespace

TEST_CASE("gram examples") {
  const std::vector<Vector> none;
  CHECK(gram(none, 0.1, 3).isApprox(0.1 * Matrix::Identity(3, 3)));

  std::vector<Vector> one{Vector::Unit(2, 0)};
  Matrix expect(2, 2);
  expect << 1, 0, 0, 0;
  CHECK((gram(one, 0.0, 2) - expect).norm() == 0.0);

  Vector a(2), b(2);
  a << 1, 1;
  b << 1, -1;
  std::vector<Vector> two{a, b};
  CHECK((gram(two, 0.1, 2) - 2.1 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-15);

  std::vector<Vector> bad{Vector::Zero(3)};
  CHECK_THROWS_AS(gram(bad, 0.1, 2), InvalidInput);
  CHECK_THROWS_AS(gram(none, -1.0, 2), InvalidInput);
}

TEST_CASE("gram shifts every eigenvalue by the regularization difference") {
  Engine rng(11);
  std::normal_distribution<double> n;
  std::vector<Vector> xs;
  for (int i = 0; i < 30; ++i) xs.push_back(Vector::NullaryExpr(5, [&] { return n(rng); }));
  const Matrix d = gram(xs, 0.7, 5) - gram(xs, 0.2, 5);
  Eigen::SelfAdjointEigenSolver<Matrix> es(d);
  CHECK((es.eigenvalues().array() - 0.5).abs().maxCoeff() < 1e-10);
  Matrix rows(30, 5);
  for (int i = 0; i < 30; ++i) rows.row(i) = xs[i].transpose();
  CHECK((gram_rows(rows, 0.2) - gram(xs, 0.2, 5)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("isotropic family gives singleton blocks") {
  Engine rng(1);
  std::vector<Matrix> covs{Matrix::Identity(4, 4), Matrix::Identity(4, 4)};
  const auto jbd = joint_block_diagonalize(covs, 0.05, rng);
  CHECK(jbd.blocks.size() == 4);
  CHECK(orthonormality_error(jbd.u) < 1e-12);
}

TEST_CASE("diagonal family is already diagonal") {
  Engine rng(2);
  std::vector<Matrix> covs{Vector::LinSpaced(3, 1, 3).asDiagonal(), Vector::LinSpaced(3, 4, 6).asDiagonal()};
  const auto jbd = joint_block_diagonalize(covs, 1e-8, rng);
  CHECK(jbd.blocks.size() == 3);
  const Matrix a = jbd.u.cwiseAbs();
  CHECK((a.array() * (1.0 - a.array())).abs().maxCoeff() < 1e-12);
}

TEST_CASE("joint block diagonalization recovers constructed blocks") {
  for (int seed = 0; seed < 50; ++seed) {
    Engine rng(derive_seed(77, seed));
    const Matrix q = random_orthonormal(5, 5, rng);
    std::vector<Matrix> covs;
    for (int i = 0; i < 3; ++i) {
      Matrix b = Matrix::Zero(5, 5);
      b.topLeftCorner(2, 2) = random_spd(2, rng);
      b.bottomRightCorner(3, 3) = random_spd(3, rng);
      covs.push_back(q * b * q.transpose());
    }
    const auto jbd = joint_block_diagonalize(covs, 1e-8, rng);
    REQUIRE(jbd.blocks.size() == 2);
    for (const auto& blk : jbd.blocks) {
      const Matrix got = jbd.u(Eigen::all, blk);
      const Matrix want = blk.size() == 2 ? Matrix(q.leftCols(2)) : Matrix(q.rightCols(3));
      CHECK(principal_angle_distance(got, want) <= 1e-6);
    }
  }
}

TEST_CASE("joint block diagonalization rejects bad input") {
  Engine rng(3);
  std::vector<Matrix> one{Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(joint_block_diagonalize(one, 0.1, rng), InvalidInput);
  Matrix ns(2, 2);
  ns << 1, 2, 0, 1;
  std::vector<Matrix> bad{Matrix::Identity(2, 2), ns};
  CHECK_THROWS_AS(joint_block_diagonalize(bad, 0.1, rng), InvalidInput);
}

TEST_CASE("classify separates a constant block from a drifting one") {
  Engine rng(5);
  std::normal_distribution<double> n;
  std::vector<Window> windows;
  for (int w = 0; w < 4; ++w) {
    Matrix x(60, 2);
    for (int i = 0; i < 60; ++i) x.row(i) << n(rng), n(rng);
    const Vector y = 0.8 * x.col(0) + (0.5 + 1.0 * w) * x.col(1);
    windows.push_back(make_window(x, y));
  }
  const std::vector<std::vector<int>> blocks{{0}, {1}};
  const auto cls = classify_blocks(blocks, Matrix::Identity(2, 2), windows, 0.1);
  CHECK(cls.partition.labels[0] == BlockLabel::invariant);
  CHECK(cls.partition.labels[1] == BlockLabel::residual);
  CHECK(cls.spread[1] == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(cls.spread[0] < 1e-10);
}

TEST_CASE("stationary data forces the highest variance block residual") {
  Engine rng(6);
  std::normal_distribution<double> n;
  std::vector<Window> windows;
  for (int w = 0; w < 3; ++w) {
    Matrix x(40, 3);
    for (int i = 0; i < 40; ++i) x.row(i) << n(rng), n(rng), n(rng);
    Vector y = x.col(0) + 2.0 * x.col(1) - x.col(2);
    for (int i = 0; i < 40; ++i) y(i) += (w == 1 ? 0.02 : 0.0) * x(i, 2);
    windows.push_back(make_window(x, y));
  }
  const std::vector<std::vector<int>> blocks{{0}, {1}, {2}};
  auto cls = classify_blocks(blocks, Matrix::Identity(3, 3), windows, 1.0);
  CHECK_FALSE(cls.partition.has_residual());
  CHECK(force_residual_block(cls));
  CHECK(cls.partition.labels[2] == BlockLabel::residual);
  CHECK_FALSE(force_residual_block(cls));
}

TEST_CASE("singular block Gram is labeled residual with a diagnostic") {
  Engine rng(7);
  std::normal_distribution<double> n;
  std::vector<Window> windows;
  for (int w = 0; w < 2; ++w) {
    Matrix x(20, 2);
    for (int i = 0; i < 20; ++i) x.row(i) << n(rng), 0.0;
    windows.push_back(make_window(x, x.col(0)));
  }
  const std::vector<std::vector<int>> blocks{{0}, {1}};
  const auto cls = classify_blocks(blocks, Matrix::Identity(2, 2), windows, 0.5);
  CHECK(cls.partition.labels[1] == BlockLabel::residual);
  CHECK_FALSE(cls.diagnostics.empty());
  const std::vector<double> wrong{0.1};
  CHECK_THROWS_AS(classify_blocks(blocks, Matrix::Identity(2, 2), windows, wrong), InvalidInput);
}

TEST_CASE("estimated labels match the generative partition at T0=8000") {
  int agree = 0;
  for (int rep = 0; rep < 20; ++rep) {
    InstanceConfig ic;
    ic.p = 10;
    ic.p_res = 3;
    ic.T0 = 8000;
    Engine rng(derive_seed(314, rep));
    const SyntheticInstance inst = sample_instance(ic, rng);
    Engine lr(derive_seed(314, rep, 2));
    const OfflineLog log = generate_offline_log(inst, lr);
    Engine jr(derive_seed(314, rep, 3));
    const IsdBasis b = estimate_basis(log.records, 8, IsdParams{}, jr);
    if (b.p_res() == 3 && projector_distance(b.u_inv, inst.basis.u_inv) < 0.5) ++agree;
  }
  MESSAGE("label agreement " << agree << "/20");
  CHECK(agree >= 19);
}

TEST_CASE("assemble_basis examples") {
  const Matrix u = Matrix::Identity(4, 4);
  BlockPartition part{{{0, 1}, {2, 3}}, {BlockLabel::invariant, BlockLabel::residual}};
  const IsdBasis b = assemble_basis(part, u);
  CHECK(b.u_inv.isApprox(u.leftCols(2)));
  CHECK(b.u_res.isApprox(u.rightCols(2)));
  b.validate();
  CHECK((b.projector_inv() + b.projector_res() - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() <= 1e-8);

  BlockPartition all_res{{{0, 1}, {2, 3}}, {BlockLabel::residual, BlockLabel::residual}};
  const IsdBasis r = assemble_basis(all_res, u);
  CHECK(r.u_inv.cols() == 0);
  CHECK(r.u_inv.rows() == 4);

  BlockPartition none_res{{{0, 1}, {2, 3}}, {BlockLabel::invariant, BlockLabel::invariant}};
  CHECK_THROWS_AS(assemble_basis(none_res, u), InvalidInput);
}

TEST_CASE("projectors do not depend on the order of labeled columns") {
  Engine rng(8);
  const Matrix u = random_orthonormal(5, 5, rng);
  BlockPartition a{{{0}, {1, 2}, {3}, {4}},
                   {BlockLabel::invariant, BlockLabel::residual, BlockLabel::invariant, BlockLabel::residual}};
  BlockPartition b{{{3}, {4}, {0}, {2, 1}},
                   {BlockLabel::invariant, BlockLabel::residual, BlockLabel::invariant, BlockLabel::residual}};
  const IsdBasis x = assemble_basis(a, u), y = assemble_basis(b, u);
  CHECK((x.projector_inv() - y.projector_inv()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((x.projector_res() - y.projector_res()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((x.projector_inv() + x.projector_res() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("principal angle examples") {
  Matrix e1 = Matrix::Zero(2, 1), e2 = Matrix::Zero(2, 1), v(2, 1);
  e1(0, 0) = 1;
  e2(1, 0) = 1;
  v << std::cos(0.3), std::sin(0.3);
  CHECK(principal_angle_distance(e1, e1) == doctest::Approx(0.0));
  CHECK(principal_angle_distance(e1, e2) == doctest::Approx(1.0));
  CHECK(std::abs(principal_angle_distance(e1, v) - std::sin(0.3)) < 1e-12);
  CHECK(std::abs(principal_angle_distance(e1, v) - projector_gap(e1, v)) < 1e-12);
  Matrix not_unit(2, 1);
  not_unit << 2, 0;
  CHECK_THROWS_AS(principal_angle_distance(not_unit, e1), InvalidInput);
}

TEST_CASE("principal angle distance equals the projector gap") {
  Engine rng(9);
  std::uniform_int_distribution<int> dim(2, 9);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int p = dim(rng);
    const int k = std::uniform_int_distribution<int>(1, p - 1)(rng);
    const Matrix a = random_orthonormal(p, k, rng);
    Matrix b = random_orthonormal(p, k, rng);
    if (i % 3 == 0) b = (a + 1e-3 * b).householderQr().householderQ() * Matrix::Identity(p, k);
    worst = std::max(worst, std::abs(principal_angle_distance(a, b) - projector_gap(a, b)));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("invariant and residual distances agree for equal splits") {
  Engine rng(10);
  for (int i = 0; i < 20; ++i) {
    const Matrix u = random_orthonormal(6, 6, rng);
    const Matrix v = random_orthonormal(6, 6, rng);
    const Matrix w = (u + 0.2 * v).householderQr().householderQ() * Matrix::Identity(6, 6);
    const double d_inv = principal_angle_distance(u.leftCols(3), w.leftCols(3));
    const double d_res = principal_angle_distance(u.rightCols(3), w.rightCols(3));
    CHECK(std::abs(d_inv - d_res) <= 1e-8);
  }
}

TEST_CASE("projector distance across dimensions") {
  const Matrix i3 = Matrix::Identity(3, 3);
  CHECK(projector_distance(i3.leftCols(1), i3.leftCols(2)) == doctest::Approx(1.0));
  CHECK(projector_distance(i3.leftCols(0), i3.leftCols(0)) == doctest::Approx(0.0));
}

TEST_CASE("rank labeling keeps spans and picks the most variable directions") {
  Engine rng(12);
  std::normal_distribution<double> n;
  std::vector<Window> windows;
  for (int w = 0; w < 5; ++w) {
    Matrix x(80, 3);
    for (int i = 0; i < 80; ++i) x.row(i) << n(rng), n(rng), n(rng);
    const Vector y = x.col(0) + (1.0 + w) * x.col(1) + 0.5 * x.col(2);
    windows.push_back(make_window(x, y));
  }
  Matrix u = Matrix::Identity(3, 3);
  const double c = std::cos(0.7), s = std::sin(0.7);
  u.topLeftCorner(2, 2) << c, -s, s, c;
  const std::vector<std::vector<int>> merged{{0, 1}, {2}};
  const Matrix r = rotate_blocks_by_variation(merged, u, windows);
  CHECK(principal_angle_distance(r.leftCols(2), u.leftCols(2)) < 1e-12);
  CHECK(std::abs(r.col(0).dot(Vector::Unit(3, 1))) > 1.0 - 1e-6);

  const std::vector<std::vector<int>> singles{{0}, {1}, {2}};
  auto cls = classify_blocks(singles, r, windows, 1e-3);
  label_by_rank(cls, 1);
  CHECK(cls.partition.labels[0] == BlockLabel::residual);
  CHECK(cls.partition.labels[1] == BlockLabel::invariant);
  CHECK(cls.partition.labels[2] == BlockLabel::invariant);
  CHECK_THROWS_AS(label_by_rank(cls, 4), InvalidInput);
}
