#pragma once

#include "tbgeo/cg_metric.hpp"

namespace tbg {

// An almost product structure on the bundle: an involutive endomorphism field
// S (S^2 = identity, S != +-identity) with symbolic components in natural
// coordinates. The two sign structures act as +-1 on horizontal lifts and
// -+1 on vertical lifts; 'constant' wraps an arbitrary constant involution as
// a negative control (generally not compatible with the bundle metric).
class ProductStructure {
 public:
  static ProductStructure horizontal_plus(std::shared_ptr<const BundleOps> b);
  static ProductStructure horizontal_minus(std::shared_ptr<const BundleOps> b);
  static ProductStructure constant(std::shared_ptr<const BundleOps> b, Eigen::MatrixXd S,
                                   std::string label);

  const std::string& label() const { return label_; }

  // True for the sign structures: S maps lifts to scalar multiples of lifts,
  // which is what lets the Nijenhuis tensor run through the closed brackets.
  bool lift_preserving() const { return lift_preserving_; }
  double horizontal_sign() const { return h_sign_; }
  double vertical_sign() const { return v_sign_; }

  const ExprMat& action_expr() const { return action_; }
  Eigen::MatrixXd action_at(const BundlePoint& q) const;
  Eigen::MatrixXd action_adapted_at(const BundlePoint& q) const;  // frame-conjugated

  // S applied to a symbolic bundle field, componentwise (S W)^K = S^K_L W^L.
  ExprVec apply_field(const ExprVec& W) const;

  struct Jet {
    Eigen::MatrixXd S;  // S^K_J
    Nd3<double> dS;     // (L, K, J) = d_L S^K_J
    Nd4<double> ddS;    // (M, L, K, J) = d_M d_L S^K_J
  };
  Jet jet_at(const BundlePoint& q) const;

 private:
  ProductStructure(std::shared_ptr<const BundleOps> b, ExprMat action, std::string label,
                   bool lift_preserving, double h_sign, double v_sign);

  std::shared_ptr<const BundleOps> bundle_;
  ExprMat action_;
  std::string label_;
  bool lift_preserving_;
  double h_sign_, v_sign_;
  Program s_prog_, ds_prog_, dds_prog_;
};

// Operators attached to a product structure on the metric bundle: purity,
// the Tachibana operator, Nijenhuis tensor, the W3 cyclic sum, and the
// product conjugate connection with its torsion and curvature.
class AlmostProductOps {
 public:
  explicit AlmostProductOps(std::shared_ptr<const BundleMetricOps> metric);

  const BundleMetricOps& metric() const { return *metric_; }
  const BundleOps& bundle() const { return metric_->bundle(); }

  // Diagonal lift of a base (1,1)-tensor field applied to a lifted argument:
  // maps HX to H(gX) and VA to -V(gA), where (gA)^i_j = g^i_m A^m_j.
  Eigen::VectorXd diag_lift_apply(const ExprMat& g, LiftKind kind, const FieldArg& arg,
                                  const BundlePoint& q) const;

  // <S v1, v2> - <v1, S v2>; zero iff the metric is pure in these arguments.
  double purity_defect(const ProductStructure& S, const Eigen::VectorXd& v1,
                       const Eigen::VectorXd& v2, const BundlePoint& q) const;

  // (Phi_S <,>)(X,Y,Z) = (SX)<Y,Z> - X<SY,Z> + <(L_Y S)X, Z> + <Y, (L_Z S)X>
  // built from coordinate Lie brackets and exact directional derivatives of
  // the metric components; inputs are symbolic bundle fields.
  double tachibana(const ProductStructure& S, const ExprVec& X, const ExprVec& Y,
                   const ExprVec& Z, const BundlePoint& q) const;

  // N_S(V,W) = [SV,SW] - S[SV,W] - S[V,SW] + [V,W] on lifted fields, via the
  // closed-form brackets (requires a lift-preserving structure).
  Eigen::VectorXd nijenhuis(const ProductStructure& S, LiftKind k1, const FieldArg& a1,
                            LiftKind k2, const FieldArg& a2, const BundlePoint& q) const;

  // {cyclic sum of tachibana, cyclic sum of <(nabla_X S)Y, Z>}. The two
  // agree for a metric-pure structure; both are returned so agreement is a
  // checkable fact rather than an assumption.
  std::pair<double, double> w3_cyclic_sum(const ProductStructure& S, const ExprVec& X,
                                          const ExprVec& Y, const ExprVec& Z,
                                          const BundlePoint& q) const;

  // nabla'_V W = S(nabla_V (S W)) through the coefficient oracle.
  Eigen::VectorXd conjugate_connection(const ProductStructure& S, const ExprVec& V,
                                       const ExprVec& W, const BundlePoint& q) const;

  // Closed form of the conjugate connection on lifts for the sign structures:
  // relative to the closed Levi-Civita forms, HH flips the sign of the
  // vertical curvature term and HV flips the sign of the horizontal term;
  // VH and VV are unchanged.
  Eigen::VectorXd conjugate_closed(NablaCase c, const FieldArg& a1, const FieldArg& a2,
                                   const BundlePoint& q) const;

  // Coefficients Gamma'^K_{IJ} = S^K_M (d_I S^M_J + Gamma^M_{IL} S^L_J).
  Nd3<double> conjugate_christoffel_at(const ProductStructure& S, const BundlePoint& q) const;

  // Curvature of the conjugate connection, two independent ways: from its own
  // coefficient field, and as the transform S R(.,., S .) of the oracle
  // curvature. Layout (M, K, L, J) as everywhere.
  Nd4<double> conjugate_curvature_direct(const ProductStructure& S, const BundlePoint& q) const;
  Nd4<double> conjugate_curvature_transform(const ProductStructure& S,
                                            const BundlePoint& q) const;

  // T(V,W) = nabla'_V W - nabla'_W V - [V,W] on symbolic bundle fields.
  Eigen::VectorXd conjugate_torsion(const ProductStructure& S, const ExprVec& V,
                                    const ExprVec& W, const BundlePoint& q) const;

 private:
  Expr pairing_expr(const ExprVec& V, const ExprVec& W) const;
  Expr directional_expr(const ExprVec& U, const Expr& scalar) const;

  std::shared_ptr<const BundleMetricOps> metric_;
};

}  // namespace tbg
