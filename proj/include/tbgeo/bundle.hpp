#pragma once

#include <memory>
#include <variant>

#include "tbgeo/manifold.hpp"

namespace tbg {

// A point of the (1,1)-tensor bundle over a chart: base coordinates x plus a
// fiber endomorphism t (matrix t^i_j, row = upper index).
struct BundlePoint {
  Eigen::VectorXd x;
  Eigen::MatrixXd t;
};

enum class LiftKind { Horizontal, Vertical };

// Argument of a lift: a vector field X^s on the base (LiftKind::Horizontal)
// or a (1,1)-tensor field A^i_j on the base (LiftKind::Vertical), both with
// components symbolic in the base coordinates.
using FieldArg = std::variant<ExprVec, ExprMat>;

// Tangent vectors and vector fields on the bundle use one flat index space of
// size N = n + n*n: slot j        <-> d/dx^j
//                   slot n + i*n + j <-> d/dt^i_j
class BundleOps {
 public:
  explicit BundleOps(std::shared_ptr<const ChartOps> base);

  const ChartOps& base() const { return *base_; }
  std::shared_ptr<const ChartOps> base_ptr() const { return base_; }
  int n() const { return n_; }
  int N() const { return n_ + n_ * n_; }

  int base_slot(int j) const { return j; }
  int fiber_slot(int i, int j) const { return n_ + i * n_ + j; }

  // Bundle variable order: base coordinates, then fiber entries t{i}_{j} in
  // row-major order — the same order as the flat slot space.
  const std::vector<std::string>& vars() const { return vars_; }
  Expr fiber_var(int i, int j) const { return fiber_vars_[i * n_ + j]; }

  std::vector<double> flatten_point(const BundlePoint& q) const;

  // --- pointwise lifts and frame ---
  Eigen::VectorXd vertical_lift(const Eigen::MatrixXd& A) const;
  Eigen::VectorXd horizontal_lift(const Eigen::VectorXd& X, const BundlePoint& q) const;

  // The n^2 x n matrix G with G[(i,j), s] = Gamma^m_{sj} t^i_m - Gamma^i_{sm} t^m_j,
  // i.e. the fiber components of the horizontal lift of d/dx^s.
  Eigen::MatrixXd gamma_hat(const BundlePoint& q) const;

  // Columns are the adapted frame fields at q (horizontal lifts of the
  // coordinate fields, then the fiber basis): F = [[I, 0], [gamma_hat, I]].
  Eigen::MatrixXd adapted_frame(const BundlePoint& q) const;
  Eigen::MatrixXd adapted_frame_inverse(const BundlePoint& q) const;  // closed form

  // Vertical vectors built from an endomorphism phi by multiplying into the
  // fiber point: gamma(phi) has fiber part phi*t, gamma_tilde(phi) has t*phi.
  Eigen::VectorXd gamma(const Eigen::MatrixXd& phi, const BundlePoint& q) const;
  Eigen::VectorXd gamma_tilde(const Eigen::MatrixXd& phi, const BundlePoint& q) const;
  std::pair<Eigen::VectorXd, Eigen::VectorXd> gamma_ops(const Eigen::MatrixXd& phi,
                                                        const BundlePoint& q) const;

  // phi^i_j = R_{klj}^i X^k Y^l at base point x.
  Eigen::MatrixXd curvature_endomorphism(const Eigen::VectorXd& X, const Eigen::VectorXd& Y,
                                         const Eigen::VectorXd& x) const;

  // --- symbolic lifted fields (components in vars()) ---
  ExprMat gamma_hat_expr() const;                       // n^2 x n
  ExprVec lift_field(LiftKind kind, const FieldArg& arg) const;
  ExprVec lift_field_horizontal(const ExprVec& X) const;
  ExprVec lift_field_vertical(const ExprMat& A) const;

  // --- brackets ---
  // Closed-form Lie bracket of two lifted fields:
  //   [HX, HY] = H[X,Y] + V(t*phi - phi*t),  phi = R(X,Y)
  //   [HX, VA] = V(nabla_X A),  [VA, HY] = -V(nabla_Y A),  [VA, VB] = 0
  Eigen::VectorXd bracket_closed(LiftKind k1, const FieldArg& a1, LiftKind k2,
                                 const FieldArg& a2, const BundlePoint& q) const;

  // Coordinate Lie bracket of arbitrary bundle fields, computed symbolically:
  // [V,W]^K = V^L d_L W^K - W^L d_L V^K.
  ExprVec bracket_field(const ExprVec& V, const ExprVec& W) const;
  Eigen::VectorXd bracket_numeric(const ExprVec& V, const ExprVec& W,
                                  const BundlePoint& q) const;

  Eigen::VectorXd eval_field(const ExprVec& V, const BundlePoint& q) const;
  std::vector<double> eval_exprs(const std::vector<Expr>& exprs, const BundlePoint& q) const;

  // Random sampling used by the verification suites: base point from the
  // chart domain, fiber entries and auxiliary vectors/tensors uniform in
  // [-2, 2] componentwise.
  BundlePoint sample_point(Rng& rng) const;
  Eigen::VectorXd sample_base_vector(Rng& rng) const;
  Eigen::MatrixXd sample_fiber_tensor(Rng& rng) const;

  // Random fields with components affine in the base coordinates, so that
  // derivative terms in brackets and Lie derivatives are exercised.
  ExprVec sample_affine_field(Rng& rng) const;
  ExprMat sample_affine_tensor(Rng& rng) const;

 private:
  std::shared_ptr<const ChartOps> base_;
  int n_;
  std::vector<std::string> vars_;
  std::vector<Expr> fiber_vars_;
  ExprMat gamma_hat_expr_;
};

// Constant-coefficient fields are the default inputs of the verification
// suites; these wrap plain numbers as symbolic components.
ExprVec constant_field(const Eigen::VectorXd& X);
ExprMat constant_tensor(const Eigen::MatrixXd& A);

}  // namespace tbg
