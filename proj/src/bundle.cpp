#include "tbgeo/bundle.hpp"

#include <set>

#include "tbgeo/errors.hpp"

namespace tbg {

BundleOps::BundleOps(std::shared_ptr<const ChartOps> base)
    : base_(std::move(base)), n_(base_->dim()) {
  vars_ = base_->chart().coords;
  std::set<std::string> taken(vars_.begin(), vars_.end());
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      std::string name = "t" + std::to_string(i) + "_" + std::to_string(j);
      if (taken.count(name))
        throw ValidationError("coordinate '" + name + "' collides with a fiber variable");
      vars_.push_back(name);
      fiber_vars_.push_back(variable(name));
    }

  const Nd3<Expr>& G = base_->christoffel();
  gamma_hat_expr_.assign(n_ * n_, std::vector<Expr>(n_, zero()));
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int s = 0; s < n_; ++s) {
        Expr e = zero();
        for (int m = 0; m < n_; ++m)
          e = add(e, sub(mul(G(m, s, j), fiber_var(i, m)), mul(G(i, s, m), fiber_var(m, j))));
        gamma_hat_expr_[i * n_ + j][s] = e;
      }
}

std::vector<double> BundleOps::flatten_point(const BundlePoint& q) const {
  std::vector<double> out(N());
  for (int j = 0; j < n_; ++j) out[base_slot(j)] = q.x[j];
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) out[fiber_slot(i, j)] = q.t(i, j);
  return out;
}

Eigen::VectorXd BundleOps::vertical_lift(const Eigen::MatrixXd& A) const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(N());
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) v[fiber_slot(i, j)] = A(i, j);
  return v;
}

Eigen::MatrixXd BundleOps::gamma_hat(const BundlePoint& q) const {
  Nd3<double> G = base_->christoffel_at(q.x);
  Eigen::MatrixXd out(n_ * n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int s = 0; s < n_; ++s) {
        double v = 0;
        for (int m = 0; m < n_; ++m) v += G(m, s, j) * q.t(i, m) - G(i, s, m) * q.t(m, j);
        out(i * n_ + j, s) = v;
      }
  return out;
}

Eigen::VectorXd BundleOps::horizontal_lift(const Eigen::VectorXd& X,
                                           const BundlePoint& q) const {
  Eigen::VectorXd v(N());
  v.head(n_) = X;
  v.tail(n_ * n_) = gamma_hat(q) * X;
  return v;
}

Eigen::MatrixXd BundleOps::adapted_frame(const BundlePoint& q) const {
  Eigen::MatrixXd F = Eigen::MatrixXd::Identity(N(), N());
  F.block(n_, 0, n_ * n_, n_) = gamma_hat(q);
  return F;
}

Eigen::MatrixXd BundleOps::adapted_frame_inverse(const BundlePoint& q) const {
  Eigen::MatrixXd Finv = Eigen::MatrixXd::Identity(N(), N());
  Finv.block(n_, 0, n_ * n_, n_) = -gamma_hat(q);
  return Finv;
}

Eigen::VectorXd BundleOps::gamma(const Eigen::MatrixXd& phi, const BundlePoint& q) const {
  return vertical_lift(phi * q.t);
}

Eigen::VectorXd BundleOps::gamma_tilde(const Eigen::MatrixXd& phi,
                                       const BundlePoint& q) const {
  return vertical_lift(q.t * phi);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> BundleOps::gamma_ops(const Eigen::MatrixXd& phi,
                                                                 const BundlePoint& q) const {
  return {gamma(phi, q), gamma_tilde(phi, q)};
}

Eigen::MatrixXd BundleOps::curvature_endomorphism(const Eigen::VectorXd& X,
                                                  const Eigen::VectorXd& Y,
                                                  const Eigen::VectorXd& x) const {
  Nd4<double> R = base_->curvature_at(x);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j)
      for (int k = 0; k < n_; ++k)
        for (int l = 0; l < n_; ++l) phi(i, j) += R(i, k, l, j) * X[k] * Y[l];
  return phi;
}

ExprMat BundleOps::gamma_hat_expr() const { return gamma_hat_expr_; }

ExprVec BundleOps::lift_field_horizontal(const ExprVec& X) const {
  if (static_cast<int>(X.size()) != n_)
    throw ValidationError("horizontal lift needs one component per base coordinate");
  ExprVec out(N(), zero());
  for (int s = 0; s < n_; ++s) out[base_slot(s)] = X[s];
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      Expr e = zero();
      for (int s = 0; s < n_; ++s) e = add(e, mul(X[s], gamma_hat_expr_[i * n_ + j][s]));
      out[fiber_slot(i, j)] = e;
    }
  return out;
}

ExprVec BundleOps::lift_field_vertical(const ExprMat& A) const {
  if (static_cast<int>(A.size()) != n_)
    throw ValidationError("vertical lift needs an n x n component array");
  ExprVec out(N(), zero());
  for (int i = 0; i < n_; ++i) {
    if (static_cast<int>(A[i].size()) != n_)
      throw ValidationError("vertical lift needs an n x n component array");
    for (int j = 0; j < n_; ++j) out[fiber_slot(i, j)] = A[i][j];
  }
  return out;
}

ExprVec BundleOps::lift_field(LiftKind kind, const FieldArg& arg) const {
  if (kind == LiftKind::Horizontal) {
    if (!std::holds_alternative<ExprVec>(arg))
      throw ValidationError("horizontal lift takes a vector field");
    return lift_field_horizontal(std::get<ExprVec>(arg));
  }
  if (!std::holds_alternative<ExprMat>(arg))
    throw ValidationError("vertical lift takes a (1,1)-tensor field");
  return lift_field_vertical(std::get<ExprMat>(arg));
}

Eigen::VectorXd BundleOps::bracket_closed(LiftKind k1, const FieldArg& a1, LiftKind k2,
                                          const FieldArg& a2, const BundlePoint& q) const {
  const auto& coords = base_->chart().coords;
  if (k1 == LiftKind::Horizontal && k2 == LiftKind::Horizontal) {
    const auto& X = std::get<ExprVec>(a1);
    const auto& Y = std::get<ExprVec>(a2);
    ExprVec lie(n_, zero());
    for (int j = 0; j < n_; ++j) {
      Expr e = zero();
      for (int s = 0; s < n_; ++s) {
        e = add(e, mul(X[s], differentiate(Y[j], coords[s])));
        e = sub(e, mul(Y[s], differentiate(X[j], coords[s])));
      }
      lie[j] = e;
    }
    std::vector<double> liev = base_->eval_at(lie, q.x);
    std::vector<double> Xv = base_->eval_at(X, q.x);
    std::vector<double> Yv = base_->eval_at(Y, q.x);
    Eigen::VectorXd Xn = Eigen::Map<Eigen::VectorXd>(Xv.data(), n_);
    Eigen::VectorXd Yn = Eigen::Map<Eigen::VectorXd>(Yv.data(), n_);
    Eigen::VectorXd lien = Eigen::Map<Eigen::VectorXd>(liev.data(), n_);
    Eigen::MatrixXd phi = curvature_endomorphism(Xn, Yn, q.x);
    return horizontal_lift(lien, q) + vertical_lift(q.t * phi - phi * q.t);
  }
  if (k1 == LiftKind::Horizontal && k2 == LiftKind::Vertical) {
    const auto& X = std::get<ExprVec>(a1);
    const auto& A = std::get<ExprMat>(a2);
    Nd3<Expr> covd = base_->covariant_derivative_11(A);
    ExprVec contracted(n_ * n_, zero());
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        Expr e = zero();
        for (int s = 0; s < n_; ++s) e = add(e, mul(X[s], covd(s, i, j)));
        contracted[i * n_ + j] = e;
      }
    std::vector<double> v = base_->eval_at(contracted, q.x);
    Eigen::MatrixXd nablaXA(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) nablaXA(i, j) = v[i * n_ + j];
    return vertical_lift(nablaXA);
  }
  if (k1 == LiftKind::Vertical && k2 == LiftKind::Horizontal)
    return -bracket_closed(k2, a2, k1, a1, q);
  return Eigen::VectorXd::Zero(N());
}

ExprVec BundleOps::bracket_field(const ExprVec& V, const ExprVec& W) const {
  if (V.size() != static_cast<size_t>(N()) || W.size() != static_cast<size_t>(N()))
    throw ValidationError("bundle fields need one component per bundle dimension");
  ExprVec out(N(), zero());
  for (int K = 0; K < N(); ++K) {
    Expr e = zero();
    for (int L = 0; L < N(); ++L) {
      e = add(e, mul(V[L], differentiate(W[K], vars_[L])));
      e = sub(e, mul(W[L], differentiate(V[K], vars_[L])));
    }
    out[K] = e;
  }
  return out;
}

Eigen::VectorXd BundleOps::bracket_numeric(const ExprVec& V, const ExprVec& W,
                                           const BundlePoint& q) const {
  return eval_field(bracket_field(V, W), q);
}

Eigen::VectorXd BundleOps::eval_field(const ExprVec& V, const BundlePoint& q) const {
  std::vector<double> out = eval_exprs(V, q);
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<int>(out.size()));
}

std::vector<double> BundleOps::eval_exprs(const std::vector<Expr>& exprs,
                                          const BundlePoint& q) const {
  Program prog(exprs, vars_);
  return prog.run(flatten_point(q));
}

BundlePoint BundleOps::sample_point(Rng& rng) const {
  BundlePoint q;
  q.x = base_->sample_point(rng);
  q.t = sample_fiber_tensor(rng);
  return q;
}

Eigen::VectorXd BundleOps::sample_base_vector(Rng& rng) const {
  Eigen::VectorXd X(n_);
  for (int i = 0; i < n_; ++i) X[i] = rng.uniform(-2, 2);
  return X;
}

Eigen::MatrixXd BundleOps::sample_fiber_tensor(Rng& rng) const {
  Eigen::MatrixXd t(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) t(i, j) = rng.uniform(-2, 2);
  return t;
}

ExprVec BundleOps::sample_affine_field(Rng& rng) const {
  const auto& coords = base_->chart().coords;
  ExprVec out(n_);
  for (int i = 0; i < n_; ++i) {
    Expr e = constant(rng.uniform(-2, 2));
    for (int k = 0; k < n_; ++k)
      e = add(e, mul(constant(rng.uniform(-2, 2)), variable(coords[k])));
    out[i] = e;
  }
  return out;
}

ExprMat BundleOps::sample_affine_tensor(Rng& rng) const {
  ExprMat out(n_, std::vector<Expr>(n_));
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      Expr e = constant(rng.uniform(-2, 2));
      for (int k = 0; k < n_; ++k)
        e = add(e, mul(constant(rng.uniform(-2, 2)), variable(base_->chart().coords[k])));
      out[i][j] = e;
    }
  return out;
}

ExprVec constant_field(const Eigen::VectorXd& X) {
  ExprVec out(X.size());
  for (int i = 0; i < X.size(); ++i) out[i] = constant(X[i]);
  return out;
}

ExprMat constant_tensor(const Eigen::MatrixXd& A) {
  ExprMat out(A.rows(), std::vector<Expr>(A.cols()));
  for (int i = 0; i < A.rows(); ++i)
    for (int j = 0; j < A.cols(); ++j) out[i][j] = constant(A(i, j));
  return out;
}

}  // namespace tbg
