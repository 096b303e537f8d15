#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <string>
#include <vector>

#include "tbgeo/expr.hpp"
#include "tbgeo/nd.hpp"
#include "tbgeo/rng.hpp"

namespace tbg {

using ExprVec = std::vector<Expr>;
using ExprMat = std::vector<std::vector<Expr>>;

// A single coordinate chart of a Riemannian manifold: named coordinates, the
// metric as a symbolic matrix in those coordinates, and a box domain used for
// sampling and for CLI default points.
struct ManifoldChart {
  std::string name;
  int dim = 0;
  std::vector<std::string> coords;
  ExprMat metric;                          // dim x dim, entries in `coords`
  std::vector<std::array<double, 2>> domain;  // per-coordinate [lo, hi]
};

// Parse + schema-validate a chart description. The JSON shape is
//   {"name": str, "dim": int, "coords": [str, ...],
//    "metric": [[expr-string, ...], ...], "domain": [[lo, hi], ...]}
// Throws ValidationError (schema problems) or ParseError (bad expressions).
ManifoldChart load_manifold_text(const std::string& json_text);
ManifoldChart load_manifold_file(const std::string& path);

const std::vector<std::string>& builtin_manifold_names();
ManifoldChart builtin_manifold(const std::string& name);  // throws ValidationError

// Accepts a builtin name or a path to a JSON file.
ManifoldChart resolve_manifold(const std::string& name_or_path);

struct MetricAt {
  Eigen::MatrixXd g;
  Eigen::MatrixXd g_inv;
};

// Symbolic geometry of one chart, with everything the verifier needs compiled
// once: the metric, its inverse, the Levi-Civita connection coefficients and
// their first derivatives, and the curvature tensor.
//
// Index conventions (fixed project-wide):
//   christoffel()(h, i, j)      = Gamma^h_{ij}              (symmetric in i,j)
//   dchristoffel()(p, h, i, j)  = d/dx^p Gamma^h_{ij}
//   curvature()(m, k, l, j)     = R_{klj}^m, the dx^m component of
//                                 R(d_k, d_l) d_j with
//                                 R(X,Y) = nabla_X nabla_Y - nabla_Y nabla_X
//                                          - nabla_{[X,Y]}
class ChartOps {
 public:
  explicit ChartOps(ManifoldChart chart);  // throws ValidationError

  const ManifoldChart& chart() const { return chart_; }
  int dim() const { return chart_.dim; }

  const ExprMat& metric() const { return chart_.metric; }
  const ExprMat& metric_inv() const { return metric_inv_; }
  const Nd3<Expr>& christoffel() const { return christoffel_; }
  const Nd4<Expr>& dchristoffel() const { return dchristoffel_; }
  const Nd4<Expr>& curvature() const { return curvature_; }

  MetricAt metric_at(const Eigen::VectorXd& p) const;  // throws SingularMetricError
  Nd3<double> christoffel_at(const Eigen::VectorXd& p) const;
  Nd4<double> dchristoffel_at(const Eigen::VectorXd& p) const;
  Nd4<double> curvature_at(const Eigen::VectorXd& p) const;

  // Covariant derivative of a (1,1)-tensor field given as symbolic components
  // A[i][j] = A^i_j. Result layout: (k, i, j) = (nabla_k A)^i_j.
  Nd3<Expr> covariant_derivative_11(const ExprMat& A) const;

  Eigen::VectorXd domain_midpoint() const;
  Eigen::VectorXd sample_point(Rng& rng) const;

  // Evaluate an arbitrary batch of chart expressions at a point.
  std::vector<double> eval_at(const std::vector<Expr>& exprs, const Eigen::VectorXd& p) const;

 private:
  void validate();

  ManifoldChart chart_;
  ExprMat metric_inv_;
  Nd3<Expr> christoffel_;
  Nd4<Expr> dchristoffel_;
  Nd4<Expr> curvature_;
  Program metric_prog_, metric_inv_prog_, christoffel_prog_, dchristoffel_prog_,
      curvature_prog_;
};

// Symbolic determinant / inverse by cofactor expansion. Intended for the
// small dimensions charts use; throws ValidationError above dim 4.
Expr symbolic_det(const ExprMat& m);
ExprMat symbolic_inverse(const ExprMat& m);

}  // namespace tbg
