#include "tbgeo/verify.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "json.hpp"
#include "tbgeo/errors.hpp"

namespace tbg {

namespace {

uint64_t mix(uint64_t a, uint64_t b) {
  uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

// Residuals are relative with a floor of one, so identities between large
// intermediate quantities are judged against their own scale while plain
// near-zero comparisons stay absolute.
double rel_scalar(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

double rel_vec(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double na = a.cwiseAbs().maxCoeff();
  double nb = b.cwiseAbs().maxCoeff();
  return (a - b).cwiseAbs().maxCoeff() / std::max({1.0, na, nb});
}

double rel_nd4(const Nd4<double>& a, const Nd4<double>& b) {
  double diff = 0;
  for (size_t i = 0; i < a.size(); ++i)
    diff = std::max(diff, std::abs(a.flat()[i] - b.flat()[i]));
  return diff / std::max({1.0, max_abs(a), max_abs(b)});
}

struct Ctx {
  VerifyOptions opt;
  int threads = 1;
  std::shared_ptr<const ChartOps> chart;
  std::shared_ptr<const BundleOps> bundle;
  std::shared_ptr<const BundleMetricOps> metric;
  std::unique_ptr<AlmostProductOps> ops;
  std::optional<ProductStructure> dplus;   // +1 horizontal / -1 vertical
  std::optional<ProductStructure> dminus;  // the opposite signs
  std::optional<ProductStructure> control;
  bool base_flat = false;
};

int effective_threads(const VerifyOptions& opt) {
  if (opt.threads > 0) return opt.threads;
  if (const char* env = std::getenv("TBGEO_THREADS")) {
    int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

// Every sample owns a generator derived from the check name, the global seed
// and the sample index, so results are independent of evaluation order and
// thread count.
double max_over_samples(const Ctx& c, const std::string& name,
                        const std::function<double(Rng&)>& f) {
  const int S = c.opt.samples;
  auto sample_val = [&](int i) {
    Rng rng(fnv1a(name) ^ mix(c.opt.seed, static_cast<uint64_t>(i)));
    return f(rng);
  };
  const int T = std::min(c.threads, S);
  if (T <= 1) {
    double m = 0;
    for (int i = 0; i < S; ++i) m = std::max(m, sample_val(i));
    return m;
  }
  std::atomic<int> next{0};
  std::vector<double> maxes(static_cast<size_t>(T), 0.0);
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i; (i = next.fetch_add(1)) < S;)
          maxes[static_cast<size_t>(t)] = std::max(maxes[static_cast<size_t>(t)], sample_val(i));
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
  return *std::max_element(maxes.begin(), maxes.end());
}

void add_zero(const Ctx& c, VerifyReport& r, const std::string& name, double tol,
              const std::function<double(Rng&)>& f) {
  double m = max_over_samples(c, name, f);
  r.checks.push_back({name, "zero", tol, m, c.opt.samples, m <= tol});
}

void add_nonzero(const Ctx& c, VerifyReport& r, const std::string& name, double floor_value,
                 const std::function<double(Rng&)>& f) {
  double m = max_over_samples(c, name, f);
  r.checks.push_back({name, "nonzero", floor_value, m, c.opt.samples, m >= floor_value});
}

// The curvature-magnitude checks flip side depending on base flatness (or on
// an explicit override): the quantities vanish exactly when the base is flat.
void add_magnitude(const Ctx& c, VerifyReport& r, const std::string& name,
                   const std::function<double(Rng&)>& f) {
  bool expz = c.opt.expect_zero.value_or(c.base_flat);
  if (expz)
    add_zero(c, r, name, c.opt.tol_fd, f);
  else
    add_nonzero(c, r, name, 1e-3, f);
}

struct Lifted {
  LiftKind kind;
  FieldArg arg;
  ExprVec field;
};

Lifted sample_lift(const Ctx& c, Rng& rng, LiftKind k) {
  if (k == LiftKind::Horizontal) {
    ExprVec X = c.bundle->sample_affine_field(rng);
    ExprVec f = c.bundle->lift_field_horizontal(X);
    return {k, FieldArg(std::move(X)), std::move(f)};
  }
  ExprMat A = c.bundle->sample_affine_tensor(rng);
  ExprVec f = c.bundle->lift_field_vertical(A);
  return {k, FieldArg(std::move(A)), std::move(f)};
}

Lifted sample_lift_any(const Ctx& c, Rng& rng) {
  return sample_lift(c, rng, rng.below(2) ? LiftKind::Vertical : LiftKind::Horizontal);
}

Eigen::VectorXd vec_at(const Ctx& c, const ExprVec& X, const Eigen::VectorXd& x) {
  std::vector<double> v = c.chart->eval_at(X, x);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<int>(v.size()));
}

Eigen::MatrixXd mat_at(const Ctx& c, const ExprMat& A, const Eigen::VectorXd& x) {
  const int n = c.bundle->n();
  std::vector<Expr> flat;
  for (const auto& row : A)
    for (const auto& e : row) flat.push_back(e);
  std::vector<double> v = c.chart->eval_at(flat, x);
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = v[static_cast<size_t>(i) * n + j];
  return M;
}

Expr pairing(const Ctx& c, const ExprVec& V, const ExprVec& W) {
  const int N = c.bundle->N();
  const ExprMat& G = c.metric->metric_expr();
  Expr e = zero();
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) e = add(e, mul(G[i][j], mul(V[i], W[j])));
  return e;
}

Expr directional(const Ctx& c, const ExprVec& U, const Expr& s) {
  const auto& vars = c.bundle->vars();
  Expr e = zero();
  for (size_t k = 0; k < vars.size(); ++k) e = add(e, mul(U[k], differentiate(s, vars[k])));
  return e;
}

BundlePoint unflatten(const Ctx& c, const std::vector<double>& flat) {
  const int n = c.bundle->n();
  BundlePoint q;
  q.x = Eigen::Map<const Eigen::VectorXd>(flat.data(), n);
  q.t = Eigen::MatrixXd(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) q.t(i, j) = flat[static_cast<size_t>(n) + i * n + j];
  return q;
}

Eigen::VectorXd random_bundle_vector(const Ctx& c, Rng& rng) {
  Eigen::VectorXd v(c.bundle->N());
  for (int i = 0; i < c.bundle->N(); ++i) v(i) = rng.uniform(-2.0, 2.0);
  return v;
}

LiftKind kind_of(int bit) { return bit ? LiftKind::Vertical : LiftKind::Horizontal; }

// --- connection -------------------------------------------------------------

void suite_connection(const Ctx& c, VerifyReport& r) {
  auto closed_case = [&c](NablaCase cs, LiftKind k1, LiftKind k2) {
    return std::function<double(Rng&)>([&c, cs, k1, k2](Rng& rng) {
      BundlePoint q = c.bundle->sample_point(rng);
      Lifted a = sample_lift(c, rng, k1);
      Lifted b = sample_lift(c, rng, k2);
      Eigen::VectorXd closed = c.metric->nabla_closed(cs, a.arg, b.arg, q);
      Eigen::VectorXd oracle = c.metric->covariant_derivative_field(a.field, b.field, q);
      return rel_vec(closed, oracle);
    });
  };
  add_zero(c, r, "connection/closed-vs-oracle-hh", c.opt.tol_fd,
           closed_case(NablaCase::HH, LiftKind::Horizontal, LiftKind::Horizontal));
  add_zero(c, r, "connection/closed-vs-oracle-hv", c.opt.tol_fd,
           closed_case(NablaCase::HV, LiftKind::Horizontal, LiftKind::Vertical));
  add_zero(c, r, "connection/closed-vs-oracle-vh", c.opt.tol_fd,
           closed_case(NablaCase::VH, LiftKind::Vertical, LiftKind::Horizontal));
  add_zero(c, r, "connection/closed-vs-oracle-vv", c.opt.tol_fd,
           closed_case(NablaCase::VV, LiftKind::Vertical, LiftKind::Vertical));

  add_zero(c, r, "connection/torsion-free", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    Lifted a = sample_lift_any(c, rng);
    Lifted b = sample_lift_any(c, rng);
    Eigen::VectorXd dab = c.metric->covariant_derivative_field(a.field, b.field, q);
    Eigen::VectorXd dba = c.metric->covariant_derivative_field(b.field, a.field, q);
    return rel_vec(dab - dba, c.bundle->bracket_numeric(a.field, b.field, q));
  });

  add_zero(c, r, "connection/koszul", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    double worst = 0;
    for (int m = 0; m < 8; ++m) {
      Lifted V = sample_lift(c, rng, kind_of(m & 1));
      Lifted W = sample_lift(c, rng, kind_of(m & 2));
      Lifted U = sample_lift(c, rng, kind_of(m & 4));
      Eigen::VectorXd Vv = c.bundle->eval_field(V.field, q);
      Eigen::VectorXd Wv = c.bundle->eval_field(W.field, q);
      Eigen::VectorXd Uv = c.bundle->eval_field(U.field, q);
      double lhs =
          2.0 * c.metric->inner(c.metric->covariant_derivative_field(V.field, W.field, q), Uv, q);
      std::vector<Expr> ders = {directional(c, V.field, pairing(c, W.field, U.field)),
                                directional(c, W.field, pairing(c, V.field, U.field)),
                                directional(c, U.field, pairing(c, V.field, W.field))};
      std::vector<double> dv = c.bundle->eval_exprs(ders, q);
      double rhs = dv[0] + dv[1] - dv[2] +
                   c.metric->inner(c.bundle->bracket_numeric(V.field, W.field, q), Uv, q) -
                   c.metric->inner(c.bundle->bracket_numeric(V.field, U.field, q), Wv, q) -
                   c.metric->inner(c.bundle->bracket_numeric(W.field, U.field, q), Vv, q);
      worst = std::max(worst, rel_scalar(lhs, rhs));
    }
    return worst;
  });
}

// --- purity -----------------------------------------------------------------

void suite_purity(const Ctx& c, VerifyReport& r) {
  auto purity_fn = [&c](const ProductStructure* S) {
    return std::function<double(Rng&)>([&c, S](Rng& rng) {
      BundlePoint q = c.bundle->sample_point(rng);
      Eigen::VectorXd v1 = random_bundle_vector(c, rng);
      Eigen::VectorXd v2 = random_bundle_vector(c, rng);
      Eigen::MatrixXd Sq = S->action_at(q);
      double p1 = c.metric->inner(Sq * v1, v2, q);
      double p2 = c.metric->inner(v1, Sq * v2, q);
      return rel_scalar(p1, p2);
    });
  };
  add_zero(c, r, "purity/diag-identity", c.opt.tol_exact, purity_fn(&*c.dplus));
  add_zero(c, r, "purity/neg-diag-identity", c.opt.tol_exact, purity_fn(&*c.dminus));
  add_nonzero(c, r, "purity/random-control", 1e-3, purity_fn(&*c.control));
}

// --- tachibana --------------------------------------------------------------

void suite_tachibana(const Ctx& c, VerifyReport& r) {
  // Phi on (H., V., H.): 2 <VB, V(t phi - phi t)> with phi = R(Z, X).
  auto slot_hvh = [&c](const ProductStructure* S, double sign) {
    return std::function<double(Rng&)>([&c, S, sign](Rng& rng) {
      BundlePoint q = c.bundle->sample_point(rng);
      ExprVec X = c.bundle->sample_affine_field(rng);
      ExprMat B = c.bundle->sample_affine_tensor(rng);
      ExprVec Z = c.bundle->sample_affine_field(rng);
      double lhs = c.ops->tachibana(*S, c.bundle->lift_field_horizontal(X),
                                    c.bundle->lift_field_vertical(B),
                                    c.bundle->lift_field_horizontal(Z), q);
      Eigen::MatrixXd phi =
          c.bundle->curvature_endomorphism(vec_at(c, Z, q.x), vec_at(c, X, q.x), q.x);
      Eigen::MatrixXd cc = q.t * phi - phi * q.t;
      double rhs = sign * 2.0 *
                   c.metric->inner(c.bundle->vertical_lift(mat_at(c, B, q.x)),
                                   c.bundle->vertical_lift(cc), q);
      return rel_scalar(lhs, rhs);
    });
  };
  // Phi on (H., H., V.): 2 <V(t phi - phi t), VC> with phi = R(Y, X).
  auto slot_hhv = [&c](const ProductStructure* S, double sign) {
    return std::function<double(Rng&)>([&c, S, sign](Rng& rng) {
      BundlePoint q = c.bundle->sample_point(rng);
      ExprVec X = c.bundle->sample_affine_field(rng);
      ExprVec Y = c.bundle->sample_affine_field(rng);
      ExprMat C = c.bundle->sample_affine_tensor(rng);
      double lhs = c.ops->tachibana(*S, c.bundle->lift_field_horizontal(X),
                                    c.bundle->lift_field_horizontal(Y),
                                    c.bundle->lift_field_vertical(C), q);
      Eigen::MatrixXd phi =
          c.bundle->curvature_endomorphism(vec_at(c, Y, q.x), vec_at(c, X, q.x), q.x);
      Eigen::MatrixXd cc = q.t * phi - phi * q.t;
      double rhs = sign * 2.0 *
                   c.metric->inner(c.bundle->vertical_lift(cc),
                                   c.bundle->vertical_lift(mat_at(c, C, q.x)), q);
      return rel_scalar(lhs, rhs);
    });
  };

  add_zero(c, r, "tachibana/mixed-slot-hvh", c.opt.tol_fd, slot_hvh(&*c.dplus, +1.0));
  add_zero(c, r, "tachibana/mixed-slot-hhv", c.opt.tol_fd, slot_hhv(&*c.dplus, +1.0));
  // The opposite-sign structure is minus the first one, and the operator is
  // linear in the structure.
  add_zero(c, r, "tachibana/neg-structure-mirror", c.opt.tol_fd, slot_hvh(&*c.dminus, -1.0));

  add_zero(c, r, "tachibana/zero-slots", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    double worst = 0;
    for (int m = 0; m < 8; ++m) {
      if (m == 0b010 || m == 0b100) continue;  // the two nonzero slot patterns
      Lifted A = sample_lift(c, rng, kind_of(m & 1));
      Lifted B = sample_lift(c, rng, kind_of(m & 2));
      Lifted C = sample_lift(c, rng, kind_of(m & 4));
      worst = std::max(worst, std::abs(c.ops->tachibana(*c.dplus, A.field, B.field, C.field, q)));
    }
    return worst;
  });

  add_magnitude(c, r, "tachibana/curvature-magnitude", [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    ExprVec X = c.bundle->sample_affine_field(rng);
    ExprMat B = c.bundle->sample_affine_tensor(rng);
    ExprVec Z = c.bundle->sample_affine_field(rng);
    return std::abs(c.ops->tachibana(*c.dplus, c.bundle->lift_field_horizontal(X),
                                     c.bundle->lift_field_vertical(B),
                                     c.bundle->lift_field_horizontal(Z), q));
  });
}

// --- w3 ---------------------------------------------------------------------

void suite_w3(const Ctx& c, VerifyReport& r) {
  auto w3_fn = [&c](const ProductStructure* S) {
    return std::function<double(Rng&)>([&c, S](Rng& rng) {
      BundlePoint q = c.bundle->sample_point(rng);
      Lifted X = sample_lift_any(c, rng);
      Lifted Y = sample_lift_any(c, rng);
      Lifted Z = sample_lift_any(c, rng);
      auto [phi_sum, nabla_sum] = c.ops->w3_cyclic_sum(*S, X.field, Y.field, Z.field, q);
      return std::max(std::abs(phi_sum), std::abs(nabla_sum));
    });
  };
  add_zero(c, r, "w3/diag-identity", c.opt.tol_fd, w3_fn(&*c.dplus));
  add_zero(c, r, "w3/neg-diag-identity", c.opt.tol_fd, w3_fn(&*c.dminus));
  add_nonzero(c, r, "w3/random-control", 1e-3, w3_fn(&*c.control));
}

// --- conjugate connection ----------------------------------------------------

void suite_conjugate(const Ctx& c, VerifyReport& r) {
  auto conj_case = [&c](NablaCase cs, LiftKind k1, LiftKind k2) {
    return std::function<double(Rng&)>([&c, cs, k1, k2](Rng& rng) {
      BundlePoint q = c.bundle->sample_point(rng);
      Lifted a = sample_lift(c, rng, k1);
      Lifted b = sample_lift(c, rng, k2);
      Eigen::VectorXd closed = c.ops->conjugate_closed(cs, a.arg, b.arg, q);
      Eigen::VectorXd built = c.ops->conjugate_connection(*c.dplus, a.field, b.field, q);
      return rel_vec(closed, built);
    });
  };
  add_zero(c, r, "conjugate/closed-vs-construction-hh", c.opt.tol_fd,
           conj_case(NablaCase::HH, LiftKind::Horizontal, LiftKind::Horizontal));
  add_zero(c, r, "conjugate/closed-vs-construction-hv", c.opt.tol_fd,
           conj_case(NablaCase::HV, LiftKind::Horizontal, LiftKind::Vertical));
  add_zero(c, r, "conjugate/closed-vs-construction-vh", c.opt.tol_fd,
           conj_case(NablaCase::VH, LiftKind::Vertical, LiftKind::Horizontal));
  add_zero(c, r, "conjugate/closed-vs-construction-vv", c.opt.tol_fd,
           conj_case(NablaCase::VV, LiftKind::Vertical, LiftKind::Vertical));

  add_zero(c, r, "conjugate/structure-independent", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    Lifted a = sample_lift_any(c, rng);
    Lifted b = sample_lift_any(c, rng);
    Eigen::VectorXd via_plus = c.ops->conjugate_connection(*c.dplus, a.field, b.field, q);
    Eigen::VectorXd via_minus = c.ops->conjugate_connection(*c.dminus, a.field, b.field, q);
    return rel_vec(via_plus, via_minus);
  });

  add_zero(c, r, "conjugate/metric-compat-fd", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    Lifted Y = sample_lift_any(c, rng);
    Lifted Z = sample_lift_any(c, rng);
    Eigen::VectorXd U(c.bundle->N());
    for (int i = 0; i < c.bundle->N(); ++i) U(i) = rng.uniform(-1.0, 1.0);
    ExprVec Uf = constant_field(U);
    Eigen::VectorXd dY = c.ops->conjugate_connection(*c.dplus, Uf, Y.field, q);
    Eigen::VectorXd dZ = c.ops->conjugate_connection(*c.dplus, Uf, Z.field, q);
    Eigen::VectorXd Yv = c.bundle->eval_field(Y.field, q);
    Eigen::VectorXd Zv = c.bundle->eval_field(Z.field, q);
    double rhs = c.metric->inner(dY, Zv, q) + c.metric->inner(Yv, dZ, q);
    const double h = 1e-5;
    auto pair_at = [&](double s) {
      std::vector<double> flat = c.bundle->flatten_point(q);
      for (int k = 0; k < c.bundle->N(); ++k) flat[static_cast<size_t>(k)] += s * U(k);
      BundlePoint qq = unflatten(c, flat);
      return c.metric->inner(c.bundle->eval_field(Y.field, qq),
                             c.bundle->eval_field(Z.field, qq), qq);
    };
    double lhs = (pair_at(h) - pair_at(-h)) / (2.0 * h);
    return rel_scalar(lhs, rhs);
  });

  add_zero(c, r, "conjugate/curvature-two-ways", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    const ProductStructure& S = rng.below(2) ? *c.dminus : *c.dplus;
    return rel_nd4(c.ops->conjugate_curvature_direct(S, q),
                   c.ops->conjugate_curvature_transform(S, q));
  });
}

// --- conjugate torsion --------------------------------------------------------

void suite_torsion(const Ctx& c, VerifyReport& r) {
  add_zero(c, r, "torsion/hh-curvature-term", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    ExprVec X = c.bundle->sample_affine_field(rng);
    ExprVec Y = c.bundle->sample_affine_field(rng);
    Eigen::VectorXd T = c.ops->conjugate_torsion(*c.dplus, c.bundle->lift_field_horizontal(X),
                                                 c.bundle->lift_field_horizontal(Y), q);
    Eigen::MatrixXd phi =
        c.bundle->curvature_endomorphism(vec_at(c, X, q.x), vec_at(c, Y, q.x), q.x);
    Eigen::MatrixXd cc = q.t * phi - phi * q.t;
    return rel_vec(T, Eigen::VectorXd(-2.0 * c.bundle->vertical_lift(cc)));
  });

  add_zero(c, r, "torsion/hv-coupling-term", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    ExprVec X = c.bundle->sample_affine_field(rng);
    ExprMat B = c.bundle->sample_affine_tensor(rng);
    Eigen::VectorXd T = c.ops->conjugate_torsion(*c.dplus, c.bundle->lift_field_horizontal(X),
                                                 c.bundle->lift_field_vertical(B), q);
    double alpha = c.metric->metric_at(q).alpha;
    Eigen::VectorXd h = c.metric->curvature_coupling(mat_at(c, B, q.x), vec_at(c, X, q.x), q);
    return rel_vec(T, c.bundle->horizontal_lift(Eigen::VectorXd(-h / alpha), q));
  });

  add_zero(c, r, "torsion/vh-coupling-term", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    ExprMat A = c.bundle->sample_affine_tensor(rng);
    ExprVec Y = c.bundle->sample_affine_field(rng);
    Eigen::VectorXd T = c.ops->conjugate_torsion(*c.dplus, c.bundle->lift_field_vertical(A),
                                                 c.bundle->lift_field_horizontal(Y), q);
    double alpha = c.metric->metric_at(q).alpha;
    Eigen::VectorXd h = c.metric->curvature_coupling(mat_at(c, A, q.x), vec_at(c, Y, q.x), q);
    return rel_vec(T, c.bundle->horizontal_lift(Eigen::VectorXd(h / alpha), q));
  });

  add_zero(c, r, "torsion/vv-zero", c.opt.tol_fd, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    ExprMat A = c.bundle->sample_affine_tensor(rng);
    ExprMat B = c.bundle->sample_affine_tensor(rng);
    Eigen::VectorXd T = c.ops->conjugate_torsion(*c.dplus, c.bundle->lift_field_vertical(A),
                                                 c.bundle->lift_field_vertical(B), q);
    return T.cwiseAbs().maxCoeff();
  });

  add_magnitude(c, r, "torsion/curvature-magnitude", [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    ExprVec X = c.bundle->sample_affine_field(rng);
    ExprVec Y = c.bundle->sample_affine_field(rng);
    Eigen::VectorXd T = c.ops->conjugate_torsion(*c.dplus, c.bundle->lift_field_horizontal(X),
                                                 c.bundle->lift_field_horizontal(Y), q);
    return T.cwiseAbs().maxCoeff();
  });
}

// --- unflat -------------------------------------------------------------------

void suite_unflat(const Ctx& c, VerifyReport& r) {
  // The bundle metric is curved even over a flat base, as long as the fiber
  // point is generic: the vertical part of the metric depends on t.
  add_nonzero(c, r, "unflat/bundle-curvature-nonzero", 1e-3, [&c](Rng& rng) {
    BundlePoint q = c.bundle->sample_point(rng);
    if (q.t.cwiseAbs().maxCoeff() < 0.5)
      q.t += Eigen::MatrixXd::Identity(c.bundle->n(), c.bundle->n());
    return max_abs(c.metric->curvature_at(q));
  });
}

using SuiteFn = void (*)(const Ctx&, VerifyReport&);

const std::vector<std::pair<std::string, SuiteFn>>& suite_table() {
  static const std::vector<std::pair<std::string, SuiteFn>> table = {
      {"connection", &suite_connection}, {"purity", &suite_purity},
      {"tachibana", &suite_tachibana},   {"w3", &suite_w3},
      {"conjugate", &suite_conjugate},   {"torsion", &suite_torsion},
      {"unflat", &suite_unflat},
  };
  return table;
}

ProductStructure make_control(const std::shared_ptr<const BundleOps>& bundle, uint64_t seed) {
  const int N = bundle->N();
  Rng rng(fnv1a("structure-control") ^ seed);
  Eigen::VectorXd u(N), v(N);
  do {
    for (int i = 0; i < N; ++i) {
      u(i) = rng.uniform(-1.0, 1.0);
      v(i) = rng.uniform(-1.0, 1.0);
    }
  } while (std::abs(u.dot(v)) < 0.2 * u.norm() * v.norm());
  // I - 2 u v^T / (v^T u) is an exact involution (the rank-one factor is a
  // projector) and generically fails purity.
  Eigen::MatrixXd S =
      Eigen::MatrixXd::Identity(N, N) - 2.0 / u.dot(v) * (u * v.transpose());
  return ProductStructure::constant(bundle, std::move(S), "custom");
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : suite_table()) out.push_back(name);
    out.push_back("all");
    return out;
  }();
  return names;
}

VerifyReport run_verify(std::shared_ptr<const ChartOps> chart, const VerifyOptions& opt) {
  bool known = opt.suite == "all";
  for (const auto& [name, fn] : suite_table()) known = known || name == opt.suite;
  if (!known) throw ValidationError("unknown suite '" + opt.suite + "'");
  if (opt.samples < 1) throw ValidationError("samples must be at least 1");

  Ctx c;
  c.opt = opt;
  c.threads = effective_threads(opt);
  c.chart = std::move(chart);
  c.bundle = std::make_shared<BundleOps>(c.chart);
  c.metric = std::make_shared<BundleMetricOps>(c.bundle);
  c.ops = std::make_unique<AlmostProductOps>(c.metric);
  c.dplus = ProductStructure::horizontal_plus(c.bundle);
  c.dminus = ProductStructure::horizontal_minus(c.bundle);
  c.control = make_control(c.bundle, opt.seed);

  {
    Rng rng(fnv1a("base-flatness") ^ opt.seed);
    double m = 0;
    for (int i = 0; i < 5; ++i)
      m = std::max(m, max_abs(c.chart->curvature_at(c.chart->sample_point(rng))));
    c.base_flat = m < 1e-10;
  }

  VerifyReport r;
  r.manifold = c.chart->chart().name;
  r.suite = opt.suite;
  r.seed = opt.seed;
  r.samples = opt.samples;
  r.tol_exact = opt.tol_exact;
  r.tol_fd = opt.tol_fd;
  r.expect = opt.expect_zero ? (*opt.expect_zero ? "zero" : "nonzero") : "auto";
  r.base_flat = c.base_flat;

  for (const auto& [name, fn] : suite_table())
    if (opt.suite == "all" || opt.suite == name) fn(c, r);

  r.passed = std::all_of(r.checks.begin(), r.checks.end(),
                         [](const CheckResult& ck) { return ck.passed; });
  return r;
}

std::string to_json(const VerifyReport& report) {
  nlohmann::ordered_json j;
  j["schema"] = 1;
  j["manifold"] = report.manifold;
  j["suite"] = report.suite;
  j["seed"] = report.seed;
  j["samples"] = report.samples;
  j["tol_exact"] = report.tol_exact;
  j["tol_fd"] = report.tol_fd;
  j["expect"] = report.expect;
  j["base_flat"] = report.base_flat;
  j["passed"] = report.passed;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& ck : report.checks) {
    nlohmann::ordered_json e;
    e["name"] = ck.name;
    e["expect"] = ck.expect;
    e["bound"] = ck.bound;
    e["max_value"] = ck.max_value;
    e["samples"] = ck.samples;
    e["passed"] = ck.passed;
    j["checks"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

}  // namespace tbg
