#pragma once

#include <mutex>

#include "tbgeo/bundle.hpp"

namespace tbg {

// Pointwise inner product on the fiber of (1,1)-tensors:
//   <A, B> = g_{it} g^{jl} A^i_j B^t_l = tr(adj(A) * B)
// where adj is the metric adjoint below.
double fiber_inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const MetricAt& m);

// Metric adjoint of an endomorphism: adj(C)^k_s = g^{km} g_{si} C^i_m.
Eigen::MatrixXd metric_adjoint(const Eigen::MatrixXd& C, const MetricAt& m);

struct BundleMetricAt {
  Eigen::MatrixXd natural;  // N x N, components in the induced coordinates
  Eigen::MatrixXd adapted;  // N x N, components in the adapted frame
  double r2 = 0;            // <t, t> at the point
  double alpha = 1;         // 1 + r2
};

enum class NablaCase { HH, HV, VH, VV };

// The rescaled Sasaki-type metric on the (1,1)-tensor bundle. In the adapted
// frame it pairs horizontal vectors by the base metric and vertical vectors by
//   (1/alpha) (<A, B> + <A, t><B, t>),   alpha = 1 + <t, t>,
// with no horizontal-vertical mixing. The natural components are obtained by
// the inverse frame transport and are kept symbolically, so first and second
// derivatives (hence connection and curvature) are exact, not finite
// differences.
class BundleMetricOps {
 public:
  explicit BundleMetricOps(std::shared_ptr<const BundleOps> bundle);

  const BundleOps& bundle() const { return *bundle_; }
  std::shared_ptr<const BundleOps> bundle_ptr() const { return bundle_; }

  const ExprMat& metric_expr() const { return metric_expr_; }
  BundleMetricAt metric_at(const BundlePoint& q) const;

  double inner(const Eigen::VectorXd& v, const Eigen::VectorXd& w,
               const BundlePoint& q) const;

  // Value of the metric on two vertical lifts: (1/alpha)(<A,B> + <A,t><B,t>).
  double vertical_inner(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const BundlePoint& q) const;

  // Levi-Civita coefficients of the bundle metric in natural coordinates,
  // layout (K, I, J) for Gamma^K_{IJ}; derivatives layout (L, K, I, J) for
  // d_L Gamma^K_{IJ}. Both are exact: symbolic derivatives of the metric
  // components with a numeric linear solve for the inverse metric.
  Nd3<double> christoffel_at(const BundlePoint& q) const;
  std::pair<Nd3<double>, Nd4<double>> christoffel_derivs_at(const BundlePoint& q) const;

  // Curvature of the bundle metric, layout (M, K, L, J) like ChartOps.
  Nd4<double> curvature_at(const BundlePoint& q) const;

  // (nabla_V W)(q) for arbitrary symbolic bundle fields, straight from the
  // coefficients above. This is the reference the closed forms are checked
  // against.
  Eigen::VectorXd covariant_derivative_field(const ExprVec& V, const ExprVec& W,
                                             const BundlePoint& q) const;

  // Closed-form covariant derivative on lifted fields:
  //   HH: nabla_{HX} HY = H(nabla_X Y) + (1/2) V(t phi - phi t),  phi = R(X,Y)
  //   HV: nabla_{HX} VB = V(nabla_X B) + (1/2 alpha) H(h(B, X))
  //   VH: nabla_{VA} HY =               (1/2 alpha) H(h(A, Y))
  //   VV: nabla_{VA} VB = -(1/alpha)(<A,t> VB + <B,t> VA)
  //       + ((alpha+1)/alpha) vertical_inner(A,B) Vt - (1/alpha)<A,t><B,t> Vt
  // where h is curvature_coupling below.
  Eigen::VectorXd nabla_closed(NablaCase c, const FieldArg& a1, const FieldArg& a2,
                               const BundlePoint& q) const;

  // The base vector h(B, X) appearing in the mixed cases: the metric dual of
  // the 1-form Z -> <B, t R(Z,X) - R(Z,X) t>.
  Eigen::VectorXd curvature_coupling(const Eigen::MatrixXd& B, const Eigen::VectorXd& X,
                                     const BundlePoint& q) const;

 private:
  struct Derivs {
    Program d;   // N^3 outputs: d_L G_{IJ}, layout (L, I, J)
    Program dd;  // N^4 outputs: d_M d_L G_{IJ}, layout (M, L, I, J)
  };
  const Derivs& derivs() const;

  std::shared_ptr<const BundleOps> bundle_;
  ExprMat metric_expr_;
  Program metric_prog_;
  mutable std::once_flag derivs_once_;
  mutable Derivs derivs_;
};

}  // namespace tbg
