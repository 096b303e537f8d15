#pragma once

#include <optional>

#include "tbgeo/almost_product.hpp"

namespace tbg {

// One named property check: a residual (or magnitude) maximised over random
// samples, compared against a bound. expect == "zero" passes when the value
// stays at or below the bound; expect == "nonzero" passes when it reaches it.
struct CheckResult {
  std::string name;
  std::string expect;
  double bound = 0;
  double max_value = 0;
  int samples = 0;
  bool passed = false;
};

struct VerifyOptions {
  std::string suite = "all";
  int samples = 20;
  uint64_t seed = 42;
  double tol_exact = 1e-10;  // identities that are exact up to roundoff
  double tol_fd = 1e-5;      // identities crossing a finite-difference or
                             // heavily cancelling path
  // Override for the curvature-magnitude checks; unset derives the expected
  // side from the measured flatness of the base metric.
  std::optional<bool> expect_zero;
  int threads = 0;  // 0: honor TBGEO_THREADS, default 1
};

struct VerifyReport {
  std::string manifold;
  std::string suite;
  uint64_t seed = 0;
  int samples = 0;
  double tol_exact = 0;
  double tol_fd = 0;
  std::string expect;  // "auto" | "zero" | "nonzero"
  bool base_flat = false;
  bool passed = false;
  std::vector<CheckResult> checks;
};

const std::vector<std::string>& suite_names();

// Runs the requested suite (or all of them) against the bundle of the given
// chart. Deterministic for fixed options: every sample draws from its own
// generator seeded by the check name and sample index, so thread count and
// scheduling cannot change the outcome.
VerifyReport run_verify(std::shared_ptr<const ChartOps> chart, const VerifyOptions& opt);

// Stable serialization of a report (fixed key order, shortest round-trip
// number formatting); used byte-for-byte in determinism tests.
std::string to_json(const VerifyReport& report);

}  // namespace tbg
