#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tbgeo/errors.hpp"
#include "tbgeo/verify.hpp"

namespace {

std::vector<double> parse_reals(const std::string& text, const char* flag) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      size_t used = 0;
      double v = std::stod(item, &used);
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw tbg::ValidationError(std::string("bad ") + flag + " entry '" + item + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

int cmd_list_manifolds() {
  for (const auto& name : tbg::builtin_manifold_names()) {
    tbg::ManifoldChart chart = tbg::builtin_manifold(name);
    std::string coords;
    for (const auto& c : chart.coords) coords += (coords.empty() ? "" : ", ") + c;
    std::cout << name << "  dim=" << chart.dim << "  coords=(" << coords << ")\n";
  }
  return 0;
}

struct VerifyArgs {
  std::string manifold;
  std::string suite = "all";
  int samples = 20;
  uint64_t seed = 42;
  double tol_exact = 1e-10;
  double tol_fd = 1e-5;
  std::string report;
  std::string expect;
};

int cmd_verify(const VerifyArgs& a) {
  auto chart = std::make_shared<tbg::ChartOps>(tbg::resolve_manifold(a.manifold));
  tbg::VerifyOptions opt;
  opt.suite = a.suite;
  opt.samples = a.samples;
  opt.seed = a.seed;
  opt.tol_exact = a.tol_exact;
  opt.tol_fd = a.tol_fd;
  if (a.expect == "zero") opt.expect_zero = true;
  if (a.expect == "nonzero") opt.expect_zero = false;

  auto t0 = std::chrono::steady_clock::now();
  tbg::VerifyReport rep = tbg::run_verify(chart, opt);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  int failed = 0;
  for (const auto& ck : rep.checks) {
    if (!ck.passed) ++failed;
    std::printf("[%s] %-40s %s %s %s %s  (%d samples)\n", ck.passed ? "PASS" : "FAIL",
                ck.name.c_str(), "max", fmt(ck.max_value).c_str(),
                ck.expect == "zero" ? "<=" : ">=", fmt(ck.bound).c_str(), ck.samples);
  }
  std::printf("%s: %zu checks, %d failed, manifold %s, suite %s, base %s  [%.2fs]\n",
              rep.passed ? "PASS" : "FAIL", rep.checks.size(), failed, rep.manifold.c_str(),
              rep.suite.c_str(), rep.base_flat ? "flat" : "curved", secs);

  if (!a.report.empty()) {
    std::ofstream out(a.report, std::ios::binary);
    if (!out) throw tbg::ValidationError("cannot write report file '" + a.report + "'");
    out << tbg::to_json(rep);
  }
  return rep.passed ? 0 : 1;
}

struct EvalArgs {
  std::string manifold;
  std::string object;
  std::string point;
  std::string fiber = "identity";
};

int cmd_eval(const EvalArgs& a) {
  auto chart = std::make_shared<tbg::ChartOps>(tbg::resolve_manifold(a.manifold));
  const int n = chart->dim();
  const auto& coords = chart->chart().coords;

  Eigen::VectorXd x = chart->domain_midpoint();
  if (!a.point.empty()) {
    std::vector<double> vals = parse_reals(a.point, "--point");
    if (static_cast<int>(vals.size()) != n)
      throw tbg::ValidationError("--point needs " + std::to_string(n) + " coordinates");
    x = Eigen::Map<const Eigen::VectorXd>(vals.data(), n);
  }
  for (int i = 0; i < n; ++i) {
    auto [lo, hi] = chart->chart().domain[static_cast<size_t>(i)];
    if (x(i) < lo || x(i) > hi) {
      std::cerr << "warning: point lies outside the chart domain (" << coords[static_cast<size_t>(i)]
                << " = " << x(i) << " not in [" << lo << ", " << hi << "]); evaluating anyway\n";
      break;
    }
  }

  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(n, n);
  if (a.fiber == "zero") {
    t.setZero();
  } else if (a.fiber != "identity") {
    std::vector<double> vals = parse_reals(a.fiber, "--fiber");
    if (static_cast<int>(vals.size()) != n * n)
      throw tbg::ValidationError("--fiber needs 'identity', 'zero' or " + std::to_string(n * n) +
                                 " entries");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t(i, j) = vals[static_cast<size_t>(i) * n + j];
  }

  nlohmann::ordered_json out;
  out["schema"] = 1;
  out["manifold"] = chart->chart().name;
  out["object"] = a.object;
  out["point"] = nlohmann::ordered_json::object();
  for (int i = 0; i < n; ++i) out["point"][coords[static_cast<size_t>(i)]] = x(i);

  nlohmann::ordered_json values = nlohmann::ordered_json::object();
  auto keep = [](double v) { return std::abs(v) > 1e-12; };

  if (a.object == "metric") {
    tbg::MetricAt m = chart->metric_at(x);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (keep(m.g(i, j)))
          values["g_{" + coords[static_cast<size_t>(i)] + "," + coords[static_cast<size_t>(j)] + "}"] =
              m.g(i, j);
  } else if (a.object == "christoffel") {
    tbg::Nd3<double> g = chart->christoffel_at(x);
    for (int h = 0; h < n; ++h)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (keep(g(h, i, j)))
            values["Gamma^{" + coords[static_cast<size_t>(h)] + "}_{" +
                   coords[static_cast<size_t>(i)] + "," + coords[static_cast<size_t>(j)] + "}"] =
                g(h, i, j);
  } else if (a.object == "curvature") {
    tbg::Nd4<double> R = chart->curvature_at(x);
    for (int m = 0; m < n; ++m)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l)
          for (int j = 0; j < n; ++j)
            if (keep(R(m, k, l, j)))
              values["R^{" + coords[static_cast<size_t>(m)] + "}_{" +
                     coords[static_cast<size_t>(k)] + "," + coords[static_cast<size_t>(l)] + "," +
                     coords[static_cast<size_t>(j)] + "}"] = R(m, k, l, j);
  } else {
    auto bundle = std::make_shared<tbg::BundleOps>(chart);
    auto metric = std::make_shared<tbg::BundleMetricOps>(bundle);
    tbg::BundlePoint q{x, t};
    const auto& vars = bundle->vars();
    const int N = bundle->N();

    out["fiber"] = nlohmann::ordered_json::array();
    for (int i = 0; i < n; ++i) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (int j = 0; j < n; ++j) row.push_back(t(i, j));
      out["fiber"].push_back(std::move(row));
    }

    if (a.object == "cg-metric") {
      tbg::BundleMetricAt m = metric->metric_at(q);
      out["r2"] = m.r2;
      out["alpha"] = m.alpha;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
          if (keep(m.natural(i, j)))
            values["G_{" + vars[static_cast<size_t>(i)] + "," + vars[static_cast<size_t>(j)] + "}"] =
                m.natural(i, j);
    } else if (a.object == "bundle-christoffel") {
      tbg::Nd3<double> g = metric->christoffel_at(q);
      for (int k = 0; k < N; ++k)
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j)
            if (keep(g(k, i, j)))
              values["Gamma^{" + vars[static_cast<size_t>(k)] + "}_{" +
                     vars[static_cast<size_t>(i)] + "," + vars[static_cast<size_t>(j)] + "}"] =
                  g(k, i, j);
    } else if (a.object == "bundle-curvature") {
      tbg::Nd4<double> R = metric->curvature_at(q);
      for (int m = 0; m < N; ++m)
        for (int k = 0; k < N; ++k)
          for (int l = 0; l < N; ++l)
            for (int j = 0; j < N; ++j)
              if (keep(R(m, k, l, j)))
                values["R^{" + vars[static_cast<size_t>(m)] + "}_{" + vars[static_cast<size_t>(k)] +
                       "," + vars[static_cast<size_t>(l)] + "," + vars[static_cast<size_t>(j)] +
                       "}"] = R(m, k, l, j);
    } else {  // torsion of the product conjugate connection
      tbg::AlmostProductOps ops(metric);
      tbg::ProductStructure S = tbg::ProductStructure::horizontal_plus(bundle);
      tbg::Nd3<double> g = ops.conjugate_christoffel_at(S, q);
      for (int k = 0; k < N; ++k)
        for (int i = 0; i < N; ++i)
          for (int j = 0; j < N; ++j) {
            double v = g(k, i, j) - g(k, j, i);
            if (keep(v))
              values["T^{" + vars[static_cast<size_t>(k)] + "}_{" + vars[static_cast<size_t>(i)] +
                     "," + vars[static_cast<size_t>(j)] + "}"] = v;
          }
    }
  }

  out["values"] = std::move(values);
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian (1,1)-tensor bundle toolkit: rescaled Sasaki-type metric, "
               "almost product structures, and property verification"};
  app.require_subcommand(1);

  VerifyArgs va;
  CLI::App* verify = app.add_subcommand("verify", "Run property suites against a manifold");
  verify->add_option("--manifold", va.manifold, "Builtin name, builtin:<name>, or JSON file path")
      ->required();
  verify->add_option("--suite", va.suite, "Suite to run")
      ->check(CLI::IsMember(tbg::suite_names()));
  verify->add_option("--samples", va.samples, "Random draws per check")
      ->check(CLI::PositiveNumber);
  verify->add_option("--seed", va.seed, "Base RNG seed");
  verify->add_option("--tol-exact", va.tol_exact, "Tolerance for roundoff-exact identities");
  verify->add_option("--tol-fd", va.tol_fd, "Tolerance for finite-difference-grade identities");
  verify->add_option("--report", va.report, "Write a JSON report to this path");
  verify->add_option("--expect", va.expect,
                     "Force the expected side of the curvature-magnitude checks")
      ->check(CLI::IsMember({"zero", "nonzero"}));

  EvalArgs ea;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a geometric object at a point");
  eval->add_option("--manifold", ea.manifold, "Builtin name, builtin:<name>, or JSON file path")
      ->required();
  eval->add_option("--object", ea.object, "What to evaluate")
      ->required()
      ->check(CLI::IsMember({"metric", "christoffel", "curvature", "cg-metric",
                             "bundle-christoffel", "bundle-curvature", "torsion"}));
  eval->add_option("--point", ea.point,
                   "Comma-separated base coordinates (default: domain midpoint)");
  eval->add_option("--fiber", ea.fiber, "identity, zero, or comma-separated row-major entries");

  CLI::App* list = app.add_subcommand("list-manifolds", "List builtin manifolds");

  try {
    app.parse(argc, argv);
    if (list->parsed()) return cmd_list_manifolds();
    if (verify->parsed()) return cmd_verify(va);
    return cmd_eval(ea);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
