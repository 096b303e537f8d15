// Python bindings for the bundle-geometry library: manifold loading, base and
// bundle tensors as numpy arrays, the product structures, and the
// verification runner returning its JSON report.
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "tbgeo/errors.hpp"
#include "tbgeo/verify.hpp"

namespace py = pybind11;
using namespace tbg;

namespace {

py::array_t<double> to_numpy(const Nd3<double>& a) {
  py::array_t<double> out({a.d0(), a.d1(), a.d2()});
  std::copy(a.flat().begin(), a.flat().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_numpy(const Nd4<double>& a) {
  py::array_t<double> out({a.d0(), a.d1(), a.d2(), a.d3()});
  std::copy(a.flat().begin(), a.flat().end(), out.mutable_data());
  return out;
}

// One loaded manifold with its bundle machinery, shared by all methods.
class PyManifold {
 public:
  explicit PyManifold(const std::string& name_or_path)
      : chart_(std::make_shared<ChartOps>(resolve_manifold(name_or_path))),
        bundle_(std::make_shared<BundleOps>(chart_)),
        metric_(std::make_shared<BundleMetricOps>(bundle_)),
        ops_(std::make_shared<AlmostProductOps>(metric_)) {}

  std::string name() const { return chart_->chart().name; }
  int dim() const { return chart_->dim(); }
  int bundle_dim() const { return bundle_->N(); }
  std::vector<std::string> coords() const { return chart_->chart().coords; }
  std::vector<std::string> bundle_vars() const { return bundle_->vars(); }
  Eigen::VectorXd domain_midpoint() const { return chart_->domain_midpoint(); }

  Eigen::MatrixXd metric_at(const Eigen::VectorXd& x) const { return chart_->metric_at(x).g; }
  py::array_t<double> christoffel_at(const Eigen::VectorXd& x) const {
    return to_numpy(chart_->christoffel_at(x));
  }
  py::array_t<double> curvature_at(const Eigen::VectorXd& x) const {
    return to_numpy(chart_->curvature_at(x));
  }

  BundlePoint point(const Eigen::VectorXd& x, const Eigen::MatrixXd& t) const {
    if (x.size() != dim() || t.rows() != dim() || t.cols() != dim())
      throw ValidationError("point/fiber shape does not match the manifold dimension");
    return BundlePoint{x, t};
  }

  py::dict bundle_metric_at(const Eigen::VectorXd& x, const Eigen::MatrixXd& t) const {
    BundleMetricAt m = metric_->metric_at(point(x, t));
    py::dict out;
    out["natural"] = m.natural;
    out["adapted"] = m.adapted;
    out["r2"] = m.r2;
    out["alpha"] = m.alpha;
    return out;
  }
  py::array_t<double> bundle_christoffel_at(const Eigen::VectorXd& x,
                                            const Eigen::MatrixXd& t) const {
    return to_numpy(metric_->christoffel_at(point(x, t)));
  }
  py::array_t<double> bundle_curvature_at(const Eigen::VectorXd& x,
                                          const Eigen::MatrixXd& t) const {
    return to_numpy(metric_->curvature_at(point(x, t)));
  }

  Eigen::VectorXd horizontal_lift(const Eigen::VectorXd& X, const Eigen::VectorXd& x,
                                  const Eigen::MatrixXd& t) const {
    return bundle_->horizontal_lift(X, point(x, t));
  }
  Eigen::VectorXd vertical_lift(const Eigen::MatrixXd& A) const {
    return bundle_->vertical_lift(A);
  }
  double bundle_inner(const Eigen::VectorXd& v, const Eigen::VectorXd& w,
                      const Eigen::VectorXd& x, const Eigen::MatrixXd& t) const {
    return metric_->inner(v, w, point(x, t));
  }

  Eigen::MatrixXd structure_action(const std::string& label, const Eigen::VectorXd& x,
                                   const Eigen::MatrixXd& t) const {
    return structure(label).action_at(point(x, t));
  }
  double purity_defect(const std::string& label, const Eigen::VectorXd& v1,
                       const Eigen::VectorXd& v2, const Eigen::VectorXd& x,
                       const Eigen::MatrixXd& t) const {
    return ops_->purity_defect(structure(label), v1, v2, point(x, t));
  }

  std::string verify_json(const std::string& suite, int samples, uint64_t seed,
                          const std::string& expect) const {
    VerifyOptions o;
    o.suite = suite;
    o.samples = samples;
    o.seed = seed;
    if (expect == "zero")
      o.expect_zero = true;
    else if (expect == "nonzero")
      o.expect_zero = false;
    else if (expect != "auto")
      throw ValidationError("expect must be auto, zero, or nonzero");
    return to_json(run_verify(chart_, o));
  }

 private:
  ProductStructure structure(const std::string& label) const {
    if (label == "diag-identity") return ProductStructure::horizontal_plus(bundle_);
    if (label == "neg-diag-identity") return ProductStructure::horizontal_minus(bundle_);
    throw ValidationError("unknown structure label '" + label +
                          "' (expected diag-identity or neg-diag-identity)");
  }

  std::shared_ptr<const ChartOps> chart_;
  std::shared_ptr<const BundleOps> bundle_;
  std::shared_ptr<const BundleMetricOps> metric_;
  std::shared_ptr<AlmostProductOps> ops_;
};

}  // namespace

PYBIND11_MODULE(_tbgeo, m) {
  m.doc() = "Tensor-bundle geometry: rescaled Sasaki-type metrics on the (1,1)-tensor "
            "bundle of a 2-dimensional Riemannian manifold";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ExpressionParseError", PyExc_ValueError);
  py::register_exception<EvalError>(m, "EvaluationError", PyExc_ArithmeticError);
  py::register_exception<SingularMetricError>(m, "SingularMetricError", PyExc_ArithmeticError);

  m.def("builtin_manifolds", [] { return builtin_manifold_names(); },
        "Names accepted directly by Manifold()");
  m.def("verify_suites", [] { return suite_names(); }, "Names accepted by Manifold.verify");

  py::class_<PyManifold>(m, "Manifold")
      .def(py::init<const std::string&>(), py::arg("name_or_path"),
           "Load a builtin manifold by name or a chart description from a JSON file")
      .def_property_readonly("name", &PyManifold::name)
      .def_property_readonly("dim", &PyManifold::dim)
      .def_property_readonly("bundle_dim", &PyManifold::bundle_dim)
      .def_property_readonly("coords", &PyManifold::coords)
      .def_property_readonly("bundle_vars", &PyManifold::bundle_vars)
      .def("domain_midpoint", &PyManifold::domain_midpoint)
      .def("metric_at", &PyManifold::metric_at, py::arg("x"))
      .def("christoffel_at", &PyManifold::christoffel_at, py::arg("x"),
           "Connection coefficients, layout [h, i, j] = Gamma^h_ij")
      .def("curvature_at", &PyManifold::curvature_at, py::arg("x"),
           "Curvature tensor, layout [m, k, l, j] = R_klj^m")
      .def("bundle_metric_at", &PyManifold::bundle_metric_at, py::arg("x"), py::arg("t"),
           "dict with natural and adapted components plus the r2/alpha scalars")
      .def("bundle_christoffel_at", &PyManifold::bundle_christoffel_at, py::arg("x"),
           py::arg("t"))
      .def("bundle_curvature_at", &PyManifold::bundle_curvature_at, py::arg("x"), py::arg("t"))
      .def("horizontal_lift", &PyManifold::horizontal_lift, py::arg("X"), py::arg("x"),
           py::arg("t"))
      .def("vertical_lift", &PyManifold::vertical_lift, py::arg("A"))
      .def("bundle_inner", &PyManifold::bundle_inner, py::arg("v"), py::arg("w"), py::arg("x"),
           py::arg("t"))
      .def("structure_action", &PyManifold::structure_action, py::arg("label"), py::arg("x"),
           py::arg("t"))
      .def("purity_defect", &PyManifold::purity_defect, py::arg("label"), py::arg("v1"),
           py::arg("v2"), py::arg("x"), py::arg("t"))
      .def("verify_json", &PyManifold::verify_json, py::arg("suite") = "all",
           py::arg("samples") = 20, py::arg("seed") = 42, py::arg("expect") = "auto",
           "Run a verification suite; returns the JSON report text");
}
