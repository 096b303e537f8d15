#include "tbgeo/cg_metric.hpp"

#include "tbgeo/errors.hpp"

namespace tbg {

double fiber_inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const MetricAt& m) {
  return (metric_adjoint(A, m) * B).trace();
}

Eigen::MatrixXd metric_adjoint(const Eigen::MatrixXd& C, const MetricAt& m) {
  return m.g_inv * C.transpose() * m.g;
}

namespace {

ExprMat exprmat(int r, int c) { return ExprMat(r, std::vector<Expr>(c, zero())); }

ExprMat matmul(const ExprMat& a, const ExprMat& b) {
  const int r = static_cast<int>(a.size());
  const int k = static_cast<int>(b.size());
  const int c = static_cast<int>(b[0].size());
  ExprMat out = exprmat(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) {
      Expr e = zero();
      for (int s = 0; s < k; ++s) e = add(e, mul(a[i][s], b[s][j]));
      out[i][j] = e;
    }
  return out;
}

ExprMat transpose(const ExprMat& a) {
  const int r = static_cast<int>(a.size());
  const int c = static_cast<int>(a[0].size());
  ExprMat out = exprmat(c, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out[j][i] = a[i][j];
  return out;
}

std::vector<Expr> flatten(const ExprMat& m) {
  std::vector<Expr> out;
  for (const auto& row : m)
    for (const auto& e : row) out.push_back(e);
  return out;
}

}  // namespace

BundleMetricOps::BundleMetricOps(std::shared_ptr<const BundleOps> bundle)
    : bundle_(std::move(bundle)) {
  const ChartOps& base = bundle_->base();
  const int n = bundle_->n();
  const int N = bundle_->N();
  const ExprMat& g = base.metric();
  const ExprMat& gi = base.metric_inv();
  auto tv = [&](int i, int j) { return bundle_->fiber_var(i, j); };

  Expr r2 = zero();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          r2 = add(r2, mul(mul(g[i][k], gi[j][l]), mul(tv(i, j), tv(k, l))));
  Expr alpha = add(one(), r2);

  // t with the upper index lowered and the lower index raised; indexed like
  // the fiber slots, so <A, t> = sum_{ij} T[i][j] A^i_j.
  ExprMat T = exprmat(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Expr e = zero();
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) e = add(e, mul(mul(g[i][a], gi[j][b]), tv(a, b)));
      T[i][j] = e;
    }

  ExprMat VV = exprmat(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          VV[i * n + j][k * n + l] =
              divide(add(mul(g[i][k], gi[j][l]), mul(T[i][j], T[k][l])), alpha);

  // Transport the block-diagonal adapted form through the inverse frame:
  // with F = [[I,0],[Gh,I]], the natural components are
  // [[g + Gh^T VV Gh, -Gh^T VV], [-VV Gh, VV]].
  ExprMat Gh = bundle_->gamma_hat_expr();
  ExprMat GhT = transpose(Gh);
  ExprMat VVGh = matmul(VV, Gh);
  ExprMat GhT_VV = matmul(GhT, VV);
  ExprMat GhT_VVGh = matmul(GhT, VVGh);

  metric_expr_ = exprmat(N, N);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) metric_expr_[i][j] = add(g[i][j], GhT_VVGh[i][j]);
  for (int i = 0; i < n; ++i)
    for (int b = 0; b < n * n; ++b) {
      metric_expr_[i][n + b] = neg(GhT_VV[i][b]);
      metric_expr_[n + b][i] = neg(VVGh[b][i]);
    }
  for (int a = 0; a < n * n; ++a)
    for (int b = 0; b < n * n; ++b) metric_expr_[n + a][n + b] = VV[a][b];

  metric_prog_ = Program(flatten(metric_expr_), bundle_->vars());
}

const BundleMetricOps::Derivs& BundleMetricOps::derivs() const {
  // Built lazily: the N^4 second-derivative batch is only needed by the
  // connection/curvature paths.
  std::call_once(derivs_once_, [this] {
    const int N = bundle_->N();
    const auto& vars = bundle_->vars();
    std::vector<Expr> d(static_cast<size_t>(N) * N * N);
    for (int L = 0; L < N; ++L)
      for (int I = 0; I < N; ++I)
        for (int J = 0; J < N; ++J)
          d[(static_cast<size_t>(L) * N + I) * N + J] =
              differentiate(metric_expr_[I][J], vars[L]);
    std::vector<Expr> dd(static_cast<size_t>(N) * N * N * N);
    for (int M = 0; M < N; ++M)
      for (size_t rest = 0; rest < static_cast<size_t>(N) * N * N; ++rest)
        dd[static_cast<size_t>(M) * N * N * N + rest] = differentiate(d[rest], vars[M]);
    derivs_.d = Program(d, vars);
    derivs_.dd = Program(dd, vars);
  });
  return derivs_;
}

BundleMetricAt BundleMetricOps::metric_at(const BundlePoint& q) const {
  const int N = bundle_->N();
  std::vector<double> flat = bundle_->flatten_point(q);
  std::vector<double> vals = metric_prog_.run(flat);
  BundleMetricAt out;
  out.natural = Eigen::Map<Eigen::MatrixXd>(vals.data(), N, N).transpose();
  Eigen::MatrixXd F = bundle_->adapted_frame(q);
  out.adapted = F.transpose() * out.natural * F;
  MetricAt m = bundle_->base().metric_at(q.x);
  out.r2 = fiber_inner(q.t, q.t, m);
  out.alpha = 1 + out.r2;
  return out;
}

double BundleMetricOps::inner(const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                              const BundlePoint& q) const {
  return v.dot(metric_at(q).natural * w);
}

double BundleMetricOps::vertical_inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                       const BundlePoint& q) const {
  MetricAt m = bundle_->base().metric_at(q.x);
  double alpha = 1 + fiber_inner(q.t, q.t, m);
  return (fiber_inner(A, B, m) + fiber_inner(A, q.t, m) * fiber_inner(B, q.t, m)) / alpha;
}

namespace {

// Christoffel symbols of a metric from its value, first and (optionally)
// second derivatives at one point. dG layout (L,I,J) = d_L G_{IJ}.
struct MetricJet {
  Eigen::MatrixXd G, Ginv;
  std::vector<double> dG, ddG;
  int N = 0;

  double d(int L, int I, int J) const { return dG[(static_cast<size_t>(L) * N + I) * N + J]; }
  double dd(int M, int L, int I, int J) const {
    return ddG[((static_cast<size_t>(M) * N + L) * N + I) * N + J];
  }
  double D(int M, int I, int J) const { return 0.5 * (d(I, M, J) + d(J, M, I) - d(M, I, J)); }
  double dD(int L, int M, int I, int J) const {
    return 0.5 * (dd(L, I, M, J) + dd(L, J, M, I) - dd(L, M, I, J));
  }
};

Nd3<double> christoffel_from_jet(const MetricJet& jet) {
  const int N = jet.N;
  Nd3<double> out(N, N, N);
  for (int K = 0; K < N; ++K)
    for (int I = 0; I < N; ++I)
      for (int J = 0; J < N; ++J) {
        double s = 0;
        for (int M = 0; M < N; ++M) s += jet.Ginv(K, M) * jet.D(M, I, J);
        out(K, I, J) = s;
      }
  return out;
}

Nd4<double> dchristoffel_from_jet(const MetricJet& jet) {
  const int N = jet.N;
  // d_L Ginv^{KM} = -Ginv^{KA} (d_L G_{AB}) Ginv^{BM}
  std::vector<Eigen::MatrixXd> dGinv(N);
  for (int L = 0; L < N; ++L) {
    Eigen::MatrixXd dGL(N, N);
    for (int A = 0; A < N; ++A)
      for (int B = 0; B < N; ++B) dGL(A, B) = jet.d(L, A, B);
    dGinv[L] = -jet.Ginv * dGL * jet.Ginv;
  }
  Nd4<double> out(N, N, N, N);
  for (int L = 0; L < N; ++L)
    for (int K = 0; K < N; ++K)
      for (int I = 0; I < N; ++I)
        for (int J = 0; J < N; ++J) {
          double s = 0;
          for (int M = 0; M < N; ++M)
            s += dGinv[L](K, M) * jet.D(M, I, J) + jet.Ginv(K, M) * jet.dD(L, M, I, J);
          out(L, K, I, J) = s;
        }
  return out;
}

}  // namespace

Nd3<double> BundleMetricOps::christoffel_at(const BundlePoint& q) const {
  return christoffel_derivs_at(q).first;
}

std::pair<Nd3<double>, Nd4<double>> BundleMetricOps::christoffel_derivs_at(
    const BundlePoint& q) const {
  const int N = bundle_->N();
  std::vector<double> flat = bundle_->flatten_point(q);

  MetricJet jet;
  jet.N = N;
  std::vector<double> gvals = metric_prog_.run(flat);
  jet.G = Eigen::MatrixXd(N, N);
  for (int I = 0; I < N; ++I)
    for (int J = 0; J < N; ++J) jet.G(I, J) = gvals[static_cast<size_t>(I) * N + J];
  Eigen::LDLT<Eigen::MatrixXd> ldlt(jet.G);
  if (ldlt.info() != Eigen::Success)
    throw SingularMetricError("bundle metric is numerically singular at the requested point");
  jet.Ginv = ldlt.solve(Eigen::MatrixXd::Identity(N, N));
  jet.dG = derivs().d.run(flat);
  jet.ddG = derivs().dd.run(flat);

  return {christoffel_from_jet(jet), dchristoffel_from_jet(jet)};
}

Nd4<double> BundleMetricOps::curvature_at(const BundlePoint& q) const {
  const int N = bundle_->N();
  auto [gamma, dgamma] = christoffel_derivs_at(q);
  Nd4<double> out(N, N, N, N);
  for (int M = 0; M < N; ++M)
    for (int K = 0; K < N; ++K)
      for (int L = 0; L < N; ++L)
        for (int J = 0; J < N; ++J) {
          double r = dgamma(K, M, L, J) - dgamma(L, M, K, J);
          for (int S = 0; S < N; ++S)
            r += gamma(M, K, S) * gamma(S, L, J) - gamma(M, L, S) * gamma(S, K, J);
          out(M, K, L, J) = r;
        }
  return out;
}

Eigen::VectorXd BundleMetricOps::covariant_derivative_field(const ExprVec& V,
                                                            const ExprVec& W,
                                                            const BundlePoint& q) const {
  const int N = bundle_->N();
  const auto& vars = bundle_->vars();
  Nd3<double> gamma = christoffel_at(q);
  Eigen::VectorXd Vv = bundle_->eval_field(V, q);
  Eigen::VectorXd Wv = bundle_->eval_field(W, q);
  std::vector<Expr> dW(static_cast<size_t>(N) * N);
  for (int I = 0; I < N; ++I)
    for (int K = 0; K < N; ++K)
      dW[static_cast<size_t>(I) * N + K] = differentiate(W[K], vars[I]);
  std::vector<double> dWv = bundle_->eval_exprs(dW, q);

  Eigen::VectorXd out = Eigen::VectorXd::Zero(N);
  for (int K = 0; K < N; ++K) {
    double s = 0;
    for (int I = 0; I < N; ++I) {
      s += Vv[I] * dWv[static_cast<size_t>(I) * N + K];
      for (int J = 0; J < N; ++J) s += gamma(K, I, J) * Vv[I] * Wv[J];
    }
    out[K] = s;
  }
  return out;
}

Eigen::VectorXd BundleMetricOps::curvature_coupling(const Eigen::MatrixXd& B,
                                                    const Eigen::VectorXd& X,
                                                    const BundlePoint& q) const {
  const int n = bundle_->n();
  MetricAt m = bundle_->base().metric_at(q.x);
  Nd4<double> R = bundle_->base().curvature_at(q.x);
  Eigen::VectorXd omega(n);
  for (int p = 0; p < n; ++p) {
    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int l = 0; l < n; ++l) phi(i, j) += R(i, p, l, j) * X[l];
    omega[p] = fiber_inner(B, q.t * phi - phi * q.t, m);
  }
  return m.g_inv * omega;
}

namespace {

// Value and directional data of base fields at a point, shared by the closed
// forms below.
Eigen::VectorXd eval_vec(const ChartOps& base, const ExprVec& X, const Eigen::VectorXd& x) {
  std::vector<double> v = base.eval_at(X, x);
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
}

Eigen::MatrixXd eval_mat(const ChartOps& base, const ExprMat& A, const Eigen::VectorXd& x) {
  const int n = base.dim();
  std::vector<Expr> flat;
  for (const auto& row : A)
    for (const auto& e : row) flat.push_back(e);
  std::vector<double> v = base.eval_at(flat, x);
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = v[static_cast<size_t>(i) * n + j];
  return out;
}

// (nabla_X Y)^j on the base at x.
Eigen::VectorXd base_nabla_vec(const ChartOps& base, const ExprVec& X, const ExprVec& Y,
                               const Eigen::VectorXd& x) {
  const int n = base.dim();
  const auto& coords = base.chart().coords;
  std::vector<Expr> terms(n);
  for (int j = 0; j < n; ++j) {
    Expr e = zero();
    for (int s = 0; s < n; ++s) e = add(e, mul(X[s], differentiate(Y[j], coords[s])));
    terms[j] = e;
  }
  Eigen::VectorXd out = eval_vec(base, terms, x);
  Nd3<double> G = base.christoffel_at(x);
  Eigen::VectorXd Xv = eval_vec(base, X, x);
  Eigen::VectorXd Yv = eval_vec(base, Y, x);
  for (int j = 0; j < n; ++j)
    for (int s = 0; s < n; ++s)
      for (int m = 0; m < n; ++m) out[j] += G(j, s, m) * Xv[s] * Yv[m];
  return out;
}

// (nabla_X B)^i_j on the base at x, for a (1,1)-field B.
Eigen::MatrixXd base_nabla_mat(const ChartOps& base, const ExprVec& X, const ExprMat& B,
                               const Eigen::VectorXd& x) {
  const int n = base.dim();
  Nd3<Expr> covd = base.covariant_derivative_11(B);
  std::vector<Expr> contracted(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Expr e = zero();
      for (int s = 0; s < n; ++s) e = add(e, mul(X[s], covd(s, i, j)));
      contracted[static_cast<size_t>(i) * n + j] = e;
    }
  std::vector<double> v = base.eval_at(contracted, x);
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = v[static_cast<size_t>(i) * n + j];
  return out;
}

}  // namespace

Eigen::VectorXd BundleMetricOps::nabla_closed(NablaCase c, const FieldArg& a1,
                                              const FieldArg& a2,
                                              const BundlePoint& q) const {
  const ChartOps& base = bundle_->base();
  MetricAt m = base.metric_at(q.x);
  const double alpha = 1 + fiber_inner(q.t, q.t, m);

  switch (c) {
    case NablaCase::HH: {
      const auto& X = std::get<ExprVec>(a1);
      const auto& Y = std::get<ExprVec>(a2);
      Eigen::VectorXd Xv = eval_vec(base, X, q.x);
      Eigen::VectorXd Yv = eval_vec(base, Y, q.x);
      Eigen::MatrixXd phi = bundle_->curvature_endomorphism(Xv, Yv, q.x);
      return bundle_->horizontal_lift(base_nabla_vec(base, X, Y, q.x), q) +
             0.5 * bundle_->vertical_lift(q.t * phi - phi * q.t);
    }
    case NablaCase::HV: {
      const auto& X = std::get<ExprVec>(a1);
      const auto& B = std::get<ExprMat>(a2);
      Eigen::VectorXd Xv = eval_vec(base, X, q.x);
      Eigen::MatrixXd Bv = eval_mat(base, B, q.x);
      return bundle_->vertical_lift(base_nabla_mat(base, X, B, q.x)) +
             (0.5 / alpha) * bundle_->horizontal_lift(curvature_coupling(Bv, Xv, q), q);
    }
    case NablaCase::VH: {
      const auto& A = std::get<ExprMat>(a1);
      const auto& Y = std::get<ExprVec>(a2);
      Eigen::MatrixXd Av = eval_mat(base, A, q.x);
      Eigen::VectorXd Yv = eval_vec(base, Y, q.x);
      return (0.5 / alpha) * bundle_->horizontal_lift(curvature_coupling(Av, Yv, q), q);
    }
    case NablaCase::VV: {
      const auto& A = std::get<ExprMat>(a1);
      const auto& B = std::get<ExprMat>(a2);
      Eigen::MatrixXd Av = eval_mat(base, A, q.x);
      Eigen::MatrixXd Bv = eval_mat(base, B, q.x);
      const double at = fiber_inner(Av, q.t, m);
      const double bt = fiber_inner(Bv, q.t, m);
      const double vv = (fiber_inner(Av, Bv, m) + at * bt) / alpha;
      Eigen::MatrixXd fiber = -(at / alpha) * Bv - (bt / alpha) * Av +
                              (((alpha + 1) / alpha) * vv - (at * bt) / alpha) * q.t;
      return bundle_->vertical_lift(fiber);
    }
  }
  throw ValidationError("unknown covariant derivative case");
}

}  // namespace tbg
