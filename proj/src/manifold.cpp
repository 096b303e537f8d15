#include "tbgeo/manifold.hpp"

#include <cctype>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tbgeo/errors.hpp"

namespace tbg {

namespace {

bool valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

bool reserved_name(const std::string& s) {
  static const std::set<std::string> reserved = {"sin", "cos",  "tan",  "exp",
                                                 "log", "sinh", "cosh", "sqrt"};
  return reserved.count(s) > 0;
}

ManifoldChart chart_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("manifold description must be a JSON object");
  static const std::set<std::string> known = {"name", "dim", "coords", "metric", "domain"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ValidationError("unknown key '" + key + "'");
  for (const auto& key : known)
    if (!j.contains(key)) throw ValidationError("missing key '" + key + "'");

  ManifoldChart chart;
  if (!j["name"].is_string() || j["name"].get<std::string>().empty())
    throw ValidationError("'name' must be a non-empty string");
  chart.name = j["name"].get<std::string>();

  if (!j["dim"].is_number_integer() || j["dim"].get<int>() < 1)
    throw ValidationError("'dim' must be a positive integer");
  chart.dim = j["dim"].get<int>();
  const int n = chart.dim;

  if (!j["coords"].is_array() || j["coords"].size() != static_cast<size_t>(n))
    throw ValidationError("'coords' must list exactly dim names");
  for (const auto& c : j["coords"]) {
    if (!c.is_string()) throw ValidationError("'coords' entries must be strings");
    std::string name = c.get<std::string>();
    if (!valid_identifier(name))
      throw ValidationError("coordinate '" + name + "' is not a valid identifier");
    if (reserved_name(name))
      throw ValidationError("coordinate '" + name + "' is a reserved function name");
    chart.coords.push_back(name);
  }
  std::set<std::string> uniq(chart.coords.begin(), chart.coords.end());
  if (uniq.size() != chart.coords.size())
    throw ValidationError("coordinate names must be distinct");

  if (!j["metric"].is_array() || j["metric"].size() != static_cast<size_t>(n))
    throw ValidationError("'metric' must be a dim x dim array of expression strings");
  chart.metric.resize(n);
  for (int r = 0; r < n; ++r) {
    const auto& row = j["metric"][r];
    if (!row.is_array() || row.size() != static_cast<size_t>(n))
      throw ValidationError("'metric' must be a dim x dim array of expression strings");
    for (int c = 0; c < n; ++c) {
      if (!row[c].is_string())
        throw ValidationError("'metric' entries must be expression strings");
      chart.metric[r].push_back(parse(row[c].get<std::string>()));
    }
  }

  if (!j["domain"].is_array() || j["domain"].size() != static_cast<size_t>(n))
    throw ValidationError("'domain' must list one [lo, hi] pair per coordinate");
  for (const auto& iv : j["domain"]) {
    if (!iv.is_array() || iv.size() != 2 || !iv[0].is_number() || !iv[1].is_number())
      throw ValidationError("'domain' entries must be numeric [lo, hi] pairs");
    double lo = iv[0].get<double>(), hi = iv[1].get<double>();
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw ValidationError("'domain' intervals must be finite with lo < hi");
    chart.domain.push_back({lo, hi});
  }
  return chart;
}

}  // namespace

ManifoldChart load_manifold_text(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("invalid JSON: ") + e.what());
  }
  return chart_from_json(j);
}

ManifoldChart load_manifold_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifold file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_manifold_text(ss.str());
}

const std::vector<std::string>& builtin_manifold_names() {
  static const std::vector<std::string> names = {"flat2", "sphere", "hyperbolic"};
  return names;
}

ManifoldChart builtin_manifold(const std::string& name) {
  constexpr double pi = std::numbers::pi;
  ManifoldChart chart;
  chart.name = name;
  chart.dim = 2;
  if (name == "flat2") {
    chart.coords = {"x", "y"};
    chart.metric = {{parse("1"), parse("0")}, {parse("0"), parse("1")}};
    chart.domain = {{-2, 2}, {-2, 2}};
  } else if (name == "sphere") {
    // unit sphere in polar angle th, azimuth ph; chart avoids the poles
    chart.coords = {"th", "ph"};
    chart.metric = {{parse("1"), parse("0")}, {parse("0"), parse("sin(th)^2")}};
    chart.domain = {{0.3, pi - 0.3}, {0, 2 * pi}};
  } else if (name == "hyperbolic") {
    // constant curvature -1 in geodesic polar coordinates, origin removed
    chart.coords = {"rho", "ph"};
    chart.metric = {{parse("1"), parse("0")}, {parse("0"), parse("sinh(rho)^2")}};
    chart.domain = {{0.3, 2}, {0, 2 * pi}};
  } else {
    throw ValidationError("unknown builtin manifold '" + name + "'");
  }
  return chart;
}

ManifoldChart resolve_manifold(const std::string& name_or_path) {
  if (name_or_path.rfind("builtin:", 0) == 0)
    return builtin_manifold(name_or_path.substr(8));
  for (const auto& b : builtin_manifold_names())
    if (b == name_or_path) return builtin_manifold(name_or_path);
  return load_manifold_file(name_or_path);
}

// ---------------------------------------------------------------------------
// symbolic linear algebra (cofactor expansion; fine for chart-sized matrices)

static ExprMat drop_row_col(const ExprMat& m, int row, int col) {
  ExprMat out;
  for (int r = 0; r < static_cast<int>(m.size()); ++r) {
    if (r == row) continue;
    std::vector<Expr> line;
    for (int c = 0; c < static_cast<int>(m.size()); ++c)
      if (c != col) line.push_back(m[r][c]);
    out.push_back(std::move(line));
  }
  return out;
}

Expr symbolic_det(const ExprMat& m) {
  const int n = static_cast<int>(m.size());
  if (n > 4)
    throw ValidationError("metric dimension above 4 is not supported symbolically");
  if (n == 1) return m[0][0];
  Expr det = zero();
  for (int c = 0; c < n; ++c) {
    Expr term = mul(m[0][c], symbolic_det(drop_row_col(m, 0, c)));
    det = (c % 2 == 0) ? add(det, term) : sub(det, term);
  }
  return det;
}

ExprMat symbolic_inverse(const ExprMat& m) {
  const int n = static_cast<int>(m.size());
  Expr det = symbolic_det(m);
  ExprMat inv(n, std::vector<Expr>(n));
  if (n == 1) {
    inv[0][0] = divide(one(), det);
    return inv;
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Expr cof = symbolic_det(drop_row_col(m, j, i));  // cofactor of (j,i): adjugate
      if ((i + j) % 2 == 1) cof = neg(cof);
      inv[i][j] = divide(cof, det);
    }
  return inv;
}

// ---------------------------------------------------------------------------
// ChartOps

ChartOps::ChartOps(ManifoldChart chart) : chart_(std::move(chart)) {
  const int n = chart_.dim;
  const auto& x = chart_.coords;

  // structural checks beyond the JSON schema
  if (static_cast<int>(chart_.metric.size()) != n)
    throw ValidationError("metric shape does not match dim");
  std::set<std::string> coord_set(x.begin(), x.end());
  for (const auto& row : chart_.metric) {
    if (static_cast<int>(row.size()) != n)
      throw ValidationError("metric shape does not match dim");
    for (const auto& entry : row)
      for (const auto& v : free_variables(entry))
        if (!coord_set.count(v))
          throw ValidationError("metric references unknown coordinate '" + v + "'");
  }
  if (static_cast<int>(chart_.domain.size()) != n)
    throw ValidationError("domain shape does not match dim");

  metric_inv_ = symbolic_inverse(chart_.metric);

  christoffel_ = Nd3<Expr>(n, n, n, zero());
  for (int h = 0; h < n; ++h)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Expr s = zero();
        for (int m = 0; m < n; ++m) {
          Expr bracket = add(differentiate(chart_.metric[m][j], x[i]),
                             sub(differentiate(chart_.metric[m][i], x[j]),
                                 differentiate(chart_.metric[i][j], x[m])));
          s = add(s, mul(metric_inv_[h][m], bracket));
        }
        christoffel_(h, i, j) = mul(constant(0.5), s);
      }

  dchristoffel_ = Nd4<Expr>(n, n, n, n, zero());
  for (int p = 0; p < n; ++p)
    for (int h = 0; h < n; ++h)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          dchristoffel_(p, h, i, j) = differentiate(christoffel_(h, i, j), x[p]);

  curvature_ = Nd4<Expr>(n, n, n, n, zero());
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l)
        for (int j = 0; j < n; ++j) {
          Expr r = sub(dchristoffel_(k, m, l, j), dchristoffel_(l, m, k, j));
          for (int s = 0; s < n; ++s) {
            r = add(r, mul(christoffel_(m, k, s), christoffel_(s, l, j)));
            r = sub(r, mul(christoffel_(m, l, s), christoffel_(s, k, j)));
          }
          curvature_(m, k, l, j) = r;
        }

  auto flatten = [](const ExprMat& m) {
    std::vector<Expr> out;
    for (const auto& row : m)
      for (const auto& e : row) out.push_back(e);
    return out;
  };
  std::vector<Expr> g_flat = flatten(chart_.metric);
  std::vector<Expr> ginv_flat = flatten(metric_inv_);
  metric_prog_ = Program(g_flat, x);
  metric_inv_prog_ = Program(ginv_flat, x);
  christoffel_prog_ = Program(christoffel_.flat(), x);
  dchristoffel_prog_ = Program(dchristoffel_.flat(), x);
  curvature_prog_ = Program(curvature_.flat(), x);

  validate();
}

void ChartOps::validate() {
  // Numeric sanity at the midpoint and a few fixed sample points: the metric
  // must evaluate, be symmetric, and be positive definite on its domain.
  Rng rng(0x5eedu);
  std::vector<Eigen::VectorXd> pts{domain_midpoint()};
  for (int k = 0; k < 4; ++k) pts.push_back(sample_point(rng));
  for (const auto& p : pts) {
    MetricAt m = metric_at(p);  // throws SingularMetricError if degenerate
    double scale = std::max(1.0, m.g.cwiseAbs().maxCoeff());
    if ((m.g - m.g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ValidationError("metric is not symmetric on its domain");
    Eigen::LLT<Eigen::MatrixXd> llt(m.g);
    if (llt.info() != Eigen::Success)
      throw ValidationError("metric is not positive definite on its domain");
  }
}

MetricAt ChartOps::metric_at(const Eigen::VectorXd& p) const {
  const int n = chart_.dim;
  std::vector<double> in(p.data(), p.data() + n);
  MetricAt out{Eigen::MatrixXd(n, n), Eigen::MatrixXd(n, n)};
  std::vector<double> g;
  std::vector<double> ginv;
  try {
    g = metric_prog_.run(in);
    ginv = metric_inv_prog_.run(in);
  } catch (const EvalError& e) {
    throw SingularMetricError(std::string("metric evaluation failed: ") + e.what());
  }
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      out.g(r, c) = g[r * n + c];
      out.g_inv(r, c) = ginv[r * n + c];
    }
  double cond = out.g.cwiseAbs().rowwise().sum().maxCoeff() *
                out.g_inv.cwiseAbs().rowwise().sum().maxCoeff();
  if (cond > 1e12 ||
      ((out.g * out.g_inv) - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-10)
    throw SingularMetricError("metric is numerically singular at the requested point");
  return out;
}

Nd3<double> ChartOps::christoffel_at(const Eigen::VectorXd& p) const {
  const int n = chart_.dim;
  std::vector<double> in(p.data(), p.data() + n);
  Nd3<double> out(n, n, n);
  christoffel_prog_.run(in, std::span<double>(out.flat()));
  return out;
}

Nd4<double> ChartOps::dchristoffel_at(const Eigen::VectorXd& p) const {
  const int n = chart_.dim;
  std::vector<double> in(p.data(), p.data() + n);
  Nd4<double> out(n, n, n, n);
  dchristoffel_prog_.run(in, std::span<double>(out.flat()));
  return out;
}

Nd4<double> ChartOps::curvature_at(const Eigen::VectorXd& p) const {
  const int n = chart_.dim;
  std::vector<double> in(p.data(), p.data() + n);
  Nd4<double> out(n, n, n, n);
  curvature_prog_.run(in, std::span<double>(out.flat()));
  return out;
}

Nd3<Expr> ChartOps::covariant_derivative_11(const ExprMat& A) const {
  const int n = chart_.dim;
  Nd3<Expr> out(n, n, n, zero());
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Expr s = differentiate(A[i][j], chart_.coords[k]);
        for (int m = 0; m < n; ++m) {
          s = add(s, mul(christoffel_(i, k, m), A[m][j]));
          s = sub(s, mul(christoffel_(m, k, j), A[i][m]));
        }
        out(k, i, j) = s;
      }
  return out;
}

Eigen::VectorXd ChartOps::domain_midpoint() const {
  Eigen::VectorXd p(chart_.dim);
  for (int i = 0; i < chart_.dim; ++i)
    p[i] = 0.5 * (chart_.domain[i][0] + chart_.domain[i][1]);
  return p;
}

Eigen::VectorXd ChartOps::sample_point(Rng& rng) const {
  Eigen::VectorXd p(chart_.dim);
  for (int i = 0; i < chart_.dim; ++i)
    p[i] = rng.uniform(chart_.domain[i][0], chart_.domain[i][1]);
  return p;
}

std::vector<double> ChartOps::eval_at(const std::vector<Expr>& exprs,
                                      const Eigen::VectorXd& p) const {
  Program prog(exprs, chart_.coords);
  std::vector<double> in(p.data(), p.data() + chart_.dim);
  return prog.run(in);
}

}  // namespace tbg
