#include "tbgeo/almost_product.hpp"

#include <cstddef>
#include <utility>

#include "tbgeo/errors.hpp"

namespace tbg {

namespace {

ExprMat exprmat(int r, int c) { return ExprMat(r, std::vector<Expr>(c, zero())); }

std::vector<Expr> flatten(const ExprMat& m) {
  std::vector<Expr> out;
  for (const auto& row : m)
    for (const auto& e : row) out.push_back(e);
  return out;
}

// [[s*I, 0], [s*2*Gh, -s*I]]: the frame-conjugate of diag(s*I, -s*I), acting
// as s on horizontal lifts and -s on vertical lifts.
ExprMat sign_action(const BundleOps& b, double s) {
  const int n = b.n();
  const int N = b.N();
  ExprMat Gh = b.gamma_hat_expr();
  ExprMat out = exprmat(N, N);
  for (int i = 0; i < n; ++i) out[i][i] = constant(s);
  for (int a = 0; a < n * n; ++a) {
    out[n + a][n + a] = constant(-s);
    for (int j = 0; j < n; ++j) out[n + a][j] = mul(constant(2.0 * s), Gh[a][j]);
  }
  return out;
}

}  // namespace

ProductStructure::ProductStructure(std::shared_ptr<const BundleOps> b, ExprMat action,
                                   std::string label, bool lift_preserving, double h_sign,
                                   double v_sign)
    : bundle_(std::move(b)),
      action_(std::move(action)),
      label_(std::move(label)),
      lift_preserving_(lift_preserving),
      h_sign_(h_sign),
      v_sign_(v_sign) {
  const int N = bundle_->N();
  const auto& vars = bundle_->vars();
  std::vector<Expr> s = flatten(action_);
  std::vector<Expr> ds(static_cast<size_t>(N) * N * N);
  for (int L = 0; L < N; ++L)
    for (size_t kj = 0; kj < static_cast<size_t>(N) * N; ++kj)
      ds[static_cast<size_t>(L) * N * N + kj] = differentiate(s[kj], vars[L]);
  std::vector<Expr> dds(static_cast<size_t>(N) * N * N * N);
  for (int M = 0; M < N; ++M)
    for (size_t rest = 0; rest < static_cast<size_t>(N) * N * N; ++rest)
      dds[static_cast<size_t>(M) * N * N * N + rest] = differentiate(ds[rest], vars[M]);
  s_prog_ = Program(s, vars);
  ds_prog_ = Program(ds, vars);
  dds_prog_ = Program(dds, vars);
}

ProductStructure ProductStructure::horizontal_plus(std::shared_ptr<const BundleOps> b) {
  ExprMat action = sign_action(*b, +1.0);
  return ProductStructure(std::move(b), std::move(action), "diag-identity", true, +1.0, -1.0);
}

ProductStructure ProductStructure::horizontal_minus(std::shared_ptr<const BundleOps> b) {
  ExprMat action = sign_action(*b, -1.0);
  return ProductStructure(std::move(b), std::move(action), "neg-diag-identity", true, -1.0,
                          +1.0);
}

ProductStructure ProductStructure::constant(std::shared_ptr<const BundleOps> b,
                                            Eigen::MatrixXd S, std::string label) {
  const int N = b->N();
  if (S.rows() != N || S.cols() != N)
    throw ValidationError("constant structure must be " + std::to_string(N) + "x" +
                          std::to_string(N));
  double defect = (S * S - Eigen::MatrixXd::Identity(N, N)).cwiseAbs().maxCoeff();
  if (defect > 1e-10)
    throw ValidationError("constant structure is not an involution (|S^2 - I| = " +
                          std::to_string(defect) + ")");
  ExprMat action = exprmat(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) action[i][j] = tbg::constant(S(i, j));
  return ProductStructure(std::move(b), std::move(action), std::move(label), false, 0.0, 0.0);
}

Eigen::MatrixXd ProductStructure::action_at(const BundlePoint& q) const {
  const int N = bundle_->N();
  std::vector<double> vals = s_prog_.run(bundle_->flatten_point(q));
  Eigen::MatrixXd S(N, N);
  for (int k = 0; k < N; ++k)
    for (int j = 0; j < N; ++j) S(k, j) = vals[static_cast<size_t>(k) * N + j];
  return S;
}

Eigen::MatrixXd ProductStructure::action_adapted_at(const BundlePoint& q) const {
  return bundle_->adapted_frame_inverse(q) * action_at(q) * bundle_->adapted_frame(q);
}

ExprVec ProductStructure::apply_field(const ExprVec& W) const {
  const int N = bundle_->N();
  ExprVec out(N, zero());
  for (int k = 0; k < N; ++k) {
    Expr e = zero();
    for (int l = 0; l < N; ++l) e = add(e, mul(action_[k][l], W[l]));
    out[k] = e;
  }
  return out;
}

ProductStructure::Jet ProductStructure::jet_at(const BundlePoint& q) const {
  const int N = bundle_->N();
  std::vector<double> flat = bundle_->flatten_point(q);
  Jet jet{Eigen::MatrixXd(N, N), Nd3<double>(N, N, N), Nd4<double>(N, N, N, N)};
  std::vector<double> s = s_prog_.run(flat);
  for (int k = 0; k < N; ++k)
    for (int j = 0; j < N; ++j) jet.S(k, j) = s[static_cast<size_t>(k) * N + j];
  ds_prog_.run(flat, jet.dS.flat());
  dds_prog_.run(flat, jet.ddS.flat());
  return jet;
}

AlmostProductOps::AlmostProductOps(std::shared_ptr<const BundleMetricOps> metric)
    : metric_(std::move(metric)) {}

Eigen::VectorXd AlmostProductOps::diag_lift_apply(const ExprMat& g, LiftKind kind,
                                                  const FieldArg& arg,
                                                  const BundlePoint& q) const {
  const BundleOps& b = bundle();
  const ChartOps& base = b.base();
  const int n = b.n();
  std::vector<double> gv = base.eval_at(flatten(g), q.x);
  Eigen::MatrixXd G(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = gv[static_cast<size_t>(i) * n + j];
  if (kind == LiftKind::Horizontal) {
    const auto& X = std::get<ExprVec>(arg);
    std::vector<double> xv = base.eval_at(X, q.x);
    Eigen::VectorXd Xv = Eigen::Map<const Eigen::VectorXd>(xv.data(), n);
    return b.horizontal_lift(G * Xv, q);
  }
  const auto& A = std::get<ExprMat>(arg);
  std::vector<double> av = base.eval_at(flatten(A), q.x);
  Eigen::MatrixXd Av(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) Av(i, j) = av[static_cast<size_t>(i) * n + j];
  return -b.vertical_lift(G * Av);
}

double AlmostProductOps::purity_defect(const ProductStructure& S, const Eigen::VectorXd& v1,
                                       const Eigen::VectorXd& v2, const BundlePoint& q) const {
  Eigen::MatrixXd Sq = S.action_at(q);
  const Eigen::MatrixXd& G = metric_->metric_at(q).natural;
  return (Sq * v1).dot(G * v2) - v1.dot(G * (Sq * v2));
}

Expr AlmostProductOps::pairing_expr(const ExprVec& V, const ExprVec& W) const {
  const int N = bundle().N();
  const ExprMat& G = metric_->metric_expr();
  Expr e = zero();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) e = add(e, mul(G[i][j], mul(V[i], W[j])));
  return e;
}

Expr AlmostProductOps::directional_expr(const ExprVec& U, const Expr& scalar) const {
  const auto& vars = bundle().vars();
  Expr e = zero();
  for (size_t k = 0; k < vars.size(); ++k)
    e = add(e, mul(U[k], differentiate(scalar, vars[k])));
  return e;
}

double AlmostProductOps::tachibana(const ProductStructure& S, const ExprVec& X,
                                   const ExprVec& Y, const ExprVec& Z,
                                   const BundlePoint& q) const {
  const BundleOps& b = bundle();
  ExprVec SX = S.apply_field(X);
  ExprVec SY = S.apply_field(Y);

  // (L_Y S)X = [Y, SX] - S[Y, X], and the same with Z.
  auto lie_of_structure = [&](const ExprVec& U) {
    ExprVec first = b.bracket_field(U, SX);
    ExprVec second = S.apply_field(b.bracket_field(U, X));
    ExprVec out(b.N(), zero());
    for (int k = 0; k < b.N(); ++k) out[k] = sub(first[k], second[k]);
    return out;
  };
  ExprVec LYS_X = lie_of_structure(Y);
  ExprVec LZS_X = lie_of_structure(Z);

  Expr total = directional_expr(SX, pairing_expr(Y, Z));
  total = sub(total, directional_expr(X, pairing_expr(SY, Z)));
  total = add(total, pairing_expr(LYS_X, Z));
  total = add(total, pairing_expr(Y, LZS_X));
  return b.eval_exprs({total}, q)[0];
}

Eigen::VectorXd AlmostProductOps::nijenhuis(const ProductStructure& S, LiftKind k1,
                                            const FieldArg& a1, LiftKind k2,
                                            const FieldArg& a2, const BundlePoint& q) const {
  if (!S.lift_preserving())
    throw ValidationError("nijenhuis on lifts requires a lift-preserving structure");
  auto sign = [&](LiftKind k) {
    return k == LiftKind::Horizontal ? S.horizontal_sign() : S.vertical_sign();
  };
  const double s1 = sign(k1), s2 = sign(k2);
  Eigen::VectorXd B = bundle().bracket_closed(k1, a1, k2, a2, q);
  return (s1 * s2 + 1.0) * B - (s1 + s2) * (S.action_at(q) * B);
}

std::pair<double, double> AlmostProductOps::w3_cyclic_sum(const ProductStructure& S,
                                                          const ExprVec& X, const ExprVec& Y,
                                                          const ExprVec& Z,
                                                          const BundlePoint& q) const {
  const BundleOps& b = bundle();
  double phi_sum = tachibana(S, X, Y, Z, q) + tachibana(S, Y, Z, X, q) +
                   tachibana(S, Z, X, Y, q);

  Eigen::MatrixXd Sq = S.action_at(q);
  auto nabla_S = [&](const ExprVec& A, const ExprVec& B) {
    // (nabla_A S)B = nabla_A (S B) - S (nabla_A B)
    Eigen::VectorXd first = metric_->covariant_derivative_field(A, S.apply_field(B), q);
    Eigen::VectorXd second = Sq * metric_->covariant_derivative_field(A, B, q);
    return Eigen::VectorXd(first - second);
  };
  auto term = [&](const ExprVec& A, const ExprVec& B, const ExprVec& C) {
    return metric_->inner(nabla_S(A, B), b.eval_field(C, q), q);
  };
  double nabla_sum = term(X, Y, Z) + term(Y, Z, X) + term(Z, X, Y);
  return {phi_sum, nabla_sum};
}

Eigen::VectorXd AlmostProductOps::conjugate_connection(const ProductStructure& S,
                                                       const ExprVec& V, const ExprVec& W,
                                                       const BundlePoint& q) const {
  Eigen::VectorXd inner = metric_->covariant_derivative_field(V, S.apply_field(W), q);
  return S.action_at(q) * inner;
}

Eigen::VectorXd AlmostProductOps::conjugate_closed(NablaCase c, const FieldArg& a1,
                                                   const FieldArg& a2,
                                                   const BundlePoint& q) const {
  const BundleOps& b = bundle();
  const ChartOps& base = b.base();
  Eigen::VectorXd result = metric_->nabla_closed(c, a1, a2, q);
  auto eval_vec = [&](const ExprVec& X) {
    std::vector<double> v = base.eval_at(X, q.x);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), b.n()));
  };
  auto eval_mat = [&](const ExprMat& A) {
    std::vector<double> v = base.eval_at(flatten(A), q.x);
    Eigen::MatrixXd M(b.n(), b.n());
    for (int i = 0; i < b.n(); ++i)
      for (int j = 0; j < b.n(); ++j) M(i, j) = v[static_cast<size_t>(i) * b.n() + j];
    return M;
  };
  switch (c) {
    case NablaCase::HH: {
      // flip +1/2 V(t phi - phi t) to -1/2: subtract the whole term once.
      Eigen::VectorXd Xv = eval_vec(std::get<ExprVec>(a1));
      Eigen::VectorXd Yv = eval_vec(std::get<ExprVec>(a2));
      Eigen::MatrixXd phi = b.curvature_endomorphism(Xv, Yv, q.x);
      result -= b.vertical_lift(q.t * phi - phi * q.t);
      break;
    }
    case NablaCase::HV: {
      // flip +(1/2 alpha) H(h(B,X)) to -(1/2 alpha).
      Eigen::VectorXd Xv = eval_vec(std::get<ExprVec>(a1));
      Eigen::MatrixXd Bv = eval_mat(std::get<ExprMat>(a2));
      double alpha = metric_->metric_at(q).alpha;
      result -= b.horizontal_lift(metric_->curvature_coupling(Bv, Xv, q) / alpha, q);
      break;
    }
    case NablaCase::VH:
    case NablaCase::VV:
      break;
  }
  return result;
}

Nd3<double> AlmostProductOps::conjugate_christoffel_at(const ProductStructure& S,
                                                       const BundlePoint& q) const {
  const int N = bundle().N();
  ProductStructure::Jet jet = S.jet_at(q);
  Nd3<double> gamma = metric_->christoffel_at(q);
  Nd3<double> out(N, N, N);
  for (int K = 0; K < N; ++K)
    for (int I = 0; I < N; ++I)
      for (int J = 0; J < N; ++J) {
        double acc = 0;
        for (int M = 0; M < N; ++M) {
          double inner = jet.dS(I, M, J);
          for (int L = 0; L < N; ++L) inner += gamma(M, I, L) * jet.S(L, J);
          acc += jet.S(K, M) * inner;
        }
        out(K, I, J) = acc;
      }
  return out;
}

Nd4<double> AlmostProductOps::conjugate_curvature_direct(const ProductStructure& S,
                                                         const BundlePoint& q) const {
  const int N = bundle().N();
  ProductStructure::Jet jet = S.jet_at(q);
  auto [gamma, dgamma] = metric_->christoffel_derivs_at(q);

  Nd3<double> gp(N, N, N);
  Nd4<double> dgp(N, N, N, N);
  for (int K = 0; K < N; ++K)
    for (int I = 0; I < N; ++I)
      for (int J = 0; J < N; ++J) {
        double acc = 0;
        for (int M = 0; M < N; ++M) {
          double inner = jet.dS(I, M, J);
          for (int L = 0; L < N; ++L) inner += gamma(M, I, L) * jet.S(L, J);
          acc += jet.S(K, M) * inner;
        }
        gp(K, I, J) = acc;
      }
  // d_P Gamma'^K_IJ by the product rule on S^K_M (d_I S^M_J + Gamma^M_IL S^L_J).
  for (int P = 0; P < N; ++P)
    for (int K = 0; K < N; ++K)
      for (int I = 0; I < N; ++I)
        for (int J = 0; J < N; ++J) {
          double acc = 0;
          for (int M = 0; M < N; ++M) {
            double inner = jet.dS(I, M, J);
            double dinner = jet.ddS(P, I, M, J);
            for (int L = 0; L < N; ++L) {
              inner += gamma(M, I, L) * jet.S(L, J);
              dinner += dgamma(P, M, I, L) * jet.S(L, J) + gamma(M, I, L) * jet.dS(P, L, J);
            }
            acc += jet.dS(P, K, M) * inner + jet.S(K, M) * dinner;
          }
          dgp(P, K, I, J) = acc;
        }

  Nd4<double> R(N, N, N, N);
  for (int M = 0; M < N; ++M)
    for (int K = 0; K < N; ++K)
      for (int L = 0; L < N; ++L)
        for (int J = 0; J < N; ++J) {
          double acc = dgp(K, M, L, J) - dgp(L, M, K, J);
          for (int s = 0; s < N; ++s)
            acc += gp(M, K, s) * gp(s, L, J) - gp(M, L, s) * gp(s, K, J);
          R(M, K, L, J) = acc;
        }
  return R;
}

Nd4<double> AlmostProductOps::conjugate_curvature_transform(const ProductStructure& S,
                                                            const BundlePoint& q) const {
  const int N = bundle().N();
  Eigen::MatrixXd Sq = S.action_at(q);
  Nd4<double> R = metric_->curvature_at(q);
  Nd4<double> out(N, N, N, N);
  for (int M = 0; M < N; ++M)
    for (int K = 0; K < N; ++K)
      for (int L = 0; L < N; ++L)
        for (int J = 0; J < N; ++J) {
          double acc = 0;
          for (int P = 0; P < N; ++P) {
            double inner = 0;
            for (int Q = 0; Q < N; ++Q) inner += R(P, K, L, Q) * Sq(Q, J);
            acc += Sq(M, P) * inner;
          }
          out(M, K, L, J) = acc;
        }
  return out;
}

Eigen::VectorXd AlmostProductOps::conjugate_torsion(const ProductStructure& S,
                                                    const ExprVec& V, const ExprVec& W,
                                                    const BundlePoint& q) const {
  return conjugate_connection(S, V, W, q) - conjugate_connection(S, W, V, q) -
         bundle().bracket_numeric(V, W, q);
}

}  // namespace tbg
