#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <memory>

#include "doctest.h"
#include "oracles.hpp"
#include "tbgeo/bundle.hpp"
#include "tbgeo/errors.hpp"

using namespace tbg;

namespace {

std::shared_ptr<const ChartOps> chart_of(const std::string& name) {
  return std::make_shared<ChartOps>(builtin_manifold(name));
}

BundlePoint sample(const BundleOps& b, Rng& rng) { return b.sample_point(rng); }

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).cwiseAbs().maxCoeff() /
         std::max({1.0, a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff()});
}

}  // namespace

TEST_CASE("slot layout and variable naming") {
  BundleOps b(chart_of("sphere"));
  CHECK(b.n() == 2);
  CHECK(b.N() == 6);
  CHECK(b.vars() == std::vector<std::string>{"th", "ph", "t0_0", "t0_1", "t1_0", "t1_1"});
  CHECK(b.base_slot(1) == 1);
  CHECK(b.fiber_slot(1, 0) == 4);
  BundlePoint q{Eigen::Vector2d(0.5, 1.0), (Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished()};
  CHECK(b.flatten_point(q) == std::vector<double>{0.5, 1.0, 1.0, 2.0, 3.0, 4.0});
}

TEST_CASE("coordinate names may not collide with fiber variables") {
  std::string bad = R"({"name": "clash", "dim": 2, "coords": ["t0_0", "y"],
    "metric": [["1", "0"], ["0", "1"]], "domain": [[0.0, 1.0], [0.0, 1.0]]})";
  auto chart = std::make_shared<ChartOps>(load_manifold_text(bad));
  CHECK_THROWS_AS(BundleOps{chart}, ValidationError);
}

TEST_CASE("vertical and horizontal lifts have the documented slots") {
  BundleOps b(chart_of("sphere"));
  Rng rng(3);
  BundlePoint q = sample(b, rng);
  Eigen::MatrixXd A = (Eigen::MatrixXd(2, 2) << 1, 2, 3, 4).finished();
  Eigen::VectorXd va = b.vertical_lift(A);
  CHECK(va.head(2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(va(b.fiber_slot(0, 1)) == 2.0);
  CHECK(va(b.fiber_slot(1, 0)) == 3.0);

  Eigen::Vector2d X(0.7, -0.2);
  Eigen::VectorXd hx = b.horizontal_lift(X, q);
  CHECK(hx.head(2).isApprox(X));
  Eigen::MatrixXd gh = b.gamma_hat(q);
  CHECK(hx.tail(4).isApprox(gh * X));
}

TEST_CASE("adapted frame is inverted in closed form") {
  for (const auto& name : {"sphere", "hyperbolic"}) {
    BundleOps b(chart_of(name));
    Rng rng(5);
    for (int i = 0; i < 5; ++i) {
      BundlePoint q = sample(b, rng);
      Eigen::MatrixXd F = b.adapted_frame(q);
      Eigen::MatrixXd Fi = b.adapted_frame_inverse(q);
      CHECK((F * Fi - Eigen::MatrixXd::Identity(b.N(), b.N())).cwiseAbs().maxCoeff() <= 1e-12);
      // frame columns: horizontal lifts, then the vertical basis
      Eigen::VectorXd h0 = b.horizontal_lift(Eigen::Vector2d(1, 0), q);
      CHECK(F.col(0).isApprox(h0));
    }
  }
}

TEST_CASE("fiber multiplication operators match the worked example") {
  BundleOps b(chart_of("flat2"));
  BundlePoint q{Eigen::Vector2d(0.0, 0.0), (Eigen::MatrixXd(2, 2) << 0, 1, 0, 0).finished()};
  Eigen::MatrixXd phi = (Eigen::MatrixXd(2, 2) << 0, 0, 1, 0).finished();
  auto [g, gt] = b.gamma_ops(phi, q);
  // gamma: fiber part phi * t
  CHECK(g(b.fiber_slot(0, 0)) == 0.0);
  CHECK(g(b.fiber_slot(0, 1)) == 0.0);
  CHECK(g(b.fiber_slot(1, 0)) == 0.0);
  CHECK(g(b.fiber_slot(1, 1)) == 1.0);
  // gamma_tilde: fiber part t * phi
  CHECK(gt(b.fiber_slot(0, 0)) == 1.0);
  CHECK(gt(b.fiber_slot(0, 1)) == 0.0);
  CHECK(gt(b.fiber_slot(1, 0)) == 0.0);
  CHECK(gt(b.fiber_slot(1, 1)) == 0.0);
}

TEST_CASE("horizontal lift is the derivative of parallel transport") {
  for (const auto& name : {"sphere", "hyperbolic"}) {
    BundleOps b(chart_of(name));
    Rng rng(7);
    BundlePoint q = sample(b, rng);
    Eigen::MatrixXd gh = b.gamma_hat(q);
    const double h = 1e-4;
    for (int s = 0; s < 2; ++s) {
      Eigen::VectorXd dir = Eigen::VectorXd::Zero(2);
      dir(s) = 1.0;
      Eigen::MatrixXd fwd = oracles::transport_rk4(*b.base_ptr(), q.x, dir, q.t, h, 64);
      Eigen::MatrixXd bwd = oracles::transport_rk4(*b.base_ptr(), q.x, dir, q.t, -h, 64);
      Eigen::MatrixXd deriv = (fwd - bwd) / (2 * h);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          CHECK(deriv(i, j) == doctest::Approx(gh(i * 2 + j, s)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("gamma_hat closed form equals its symbolic components") {
  BundleOps b(chart_of("hyperbolic"));
  Rng rng(9);
  BundlePoint q = sample(b, rng);
  ExprMat ghe = b.gamma_hat_expr();
  Eigen::MatrixXd gh = b.gamma_hat(q);
  for (int a = 0; a < 4; ++a)
    for (int s = 0; s < 2; ++s)
      CHECK(b.eval_exprs({ghe[static_cast<size_t>(a)][static_cast<size_t>(s)]}, q)[0] ==
            doctest::Approx(gh(a, s)).epsilon(1e-13).scale(1.0));
}

TEST_CASE("curvature endomorphism is antisymmetric and vanishes on flat space") {
  BundleOps b(chart_of("sphere"));
  Rng rng(11);
  BundlePoint q = sample(b, rng);
  Eigen::Vector2d X(1.0, 0.5), Y(-0.3, 2.0);
  Eigen::MatrixXd pxy = b.curvature_endomorphism(X, Y, q.x);
  Eigen::MatrixXd pyx = b.curvature_endomorphism(Y, X, q.x);
  CHECK((pxy + pyx).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(pxy.cwiseAbs().maxCoeff() > 0.1);

  BundleOps flat(chart_of("flat2"));
  CHECK(flat.curvature_endomorphism(X, Y, Eigen::Vector2d(0.1, 0.2)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("closed-form brackets equal the coordinate brackets") {
  for (const auto& name : {"flat2", "sphere", "hyperbolic"}) {
    BundleOps b(chart_of(name));
    Rng rng(13);
    for (int rep = 0; rep < 5; ++rep) {
      BundlePoint q = sample(b, rng);
      ExprVec X = b.sample_affine_field(rng);
      ExprVec Y = b.sample_affine_field(rng);
      ExprMat A = b.sample_affine_tensor(rng);
      ExprMat B = b.sample_affine_tensor(rng);

      auto check_pair = [&](LiftKind k1, const FieldArg& a1, const ExprVec& f1, LiftKind k2,
                            const FieldArg& a2, const ExprVec& f2) {
        Eigen::VectorXd closed = b.bracket_closed(k1, a1, k2, a2, q);
        Eigen::VectorXd coord = b.bracket_numeric(f1, f2, q);
        CHECK(rel(closed, coord) <= 1e-5);
        // FD oracle, fully independent of the symbolic derivative machinery
        CHECK(rel(coord, oracles::bracket_fd(b, f1, f2, q)) <= 1e-4);
      };
      check_pair(LiftKind::Horizontal, X, b.lift_field_horizontal(X), LiftKind::Horizontal, Y,
                 b.lift_field_horizontal(Y));
      check_pair(LiftKind::Horizontal, X, b.lift_field_horizontal(X), LiftKind::Vertical, A,
                 b.lift_field_vertical(A));
      check_pair(LiftKind::Vertical, A, b.lift_field_vertical(A), LiftKind::Horizontal, Y,
                 b.lift_field_horizontal(Y));
      check_pair(LiftKind::Vertical, A, b.lift_field_vertical(A), LiftKind::Vertical, B,
                 b.lift_field_vertical(B));
    }
  }
}

TEST_CASE("vertical-vertical brackets of constant tensors vanish") {
  BundleOps b(chart_of("sphere"));
  Rng rng(17);
  BundlePoint q = sample(b, rng);
  Eigen::MatrixXd A = b.sample_fiber_tensor(rng);
  Eigen::MatrixXd B = b.sample_fiber_tensor(rng);
  Eigen::VectorXd v = b.bracket_closed(LiftKind::Vertical, constant_tensor(A),
                                       LiftKind::Vertical, constant_tensor(B), q);
  CHECK(v.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coordinate brackets satisfy the Jacobi identity") {
  BundleOps b(chart_of("sphere"));
  Rng rng(19);
  for (int rep = 0; rep < 3; ++rep) {
    BundlePoint q = sample(b, rng);
    ExprVec U = b.lift_field_horizontal(b.sample_affine_field(rng));
    ExprVec V = b.lift_field_vertical(b.sample_affine_tensor(rng));
    ExprVec W = b.lift_field_horizontal(b.sample_affine_field(rng));
    Eigen::VectorXd total = b.eval_field(b.bracket_field(b.bracket_field(U, V), W), q) +
                            b.eval_field(b.bracket_field(b.bracket_field(V, W), U), q) +
                            b.eval_field(b.bracket_field(b.bracket_field(W, U), V), q);
    CHECK(total.cwiseAbs().maxCoeff() <= 1e-4);
  }
}

TEST_CASE("horizontal brackets close up to the curvature term") {
  // [HX, HY] - H[X,Y] is vertical with fiber part t*phi - phi*t.
  BundleOps b(chart_of("sphere"));
  Rng rng(23);
  BundlePoint q = sample(b, rng);
  Eigen::Vector2d X(1.0, 0.0), Y(0.0, 1.0);
  ExprVec Xf = constant_field(X), Yf = constant_field(Y);
  Eigen::VectorXd br =
      b.bracket_closed(LiftKind::Horizontal, Xf, LiftKind::Horizontal, Yf, q);
  Eigen::MatrixXd phi = b.curvature_endomorphism(X, Y, q.x);
  Eigen::VectorXd expected = b.vertical_lift(q.t * phi - phi * q.t);  // [X,Y] = 0 here
  CHECK(rel(br, expected) <= 1e-12);
}
