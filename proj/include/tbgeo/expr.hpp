#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tbgeo/errors.hpp"

namespace tbg {

enum class ExprKind : uint8_t {
  Constant,
  Variable,
  Sum,
  Product,
  Quotient,
  Power,
  Negate,
  Call,
};

enum class Func : uint8_t { Sin, Cos, Tan, Exp, Log, Sinh, Cosh, Sqrt };

const char* func_name(Func f);

class ExprNode;

// Expressions are immutable nodes shared through a per-thread intern table:
// structurally identical subtrees built on the same thread are the same
// object, so pointer equality is structural equality and common subtrees are
// stored (and later compiled / differentiated) exactly once.
using Expr = std::shared_ptr<const ExprNode>;

class ExprNode {
 public:
  ExprKind kind() const { return kind_; }
  double value() const { return value_; }              // Constant
  const std::string& name() const { return name_; }    // Variable
  Func func() const { return func_; }                  // Call
  const Expr& lhs() const { return lhs_; }             // first/only child
  const Expr& rhs() const { return rhs_; }             // second child or null
  size_t hash() const { return hash_; }

 private:
  ExprNode() = default;
  friend class ExprBuilder;

  ExprKind kind_ = ExprKind::Constant;
  Func func_ = Func::Sin;
  double value_ = 0;
  std::string name_;
  Expr lhs_, rhs_;
  size_t hash_ = 0;
};

// --- construction (interned, lightly simplified: constant folding and the
// 0/1 identities; no deep rewriting) ---
Expr constant(double v);
Expr variable(std::string_view name);
Expr add(Expr a, Expr b);
Expr sub(Expr a, Expr b);  // stored as a + (-b); there is no dedicated node
Expr mul(Expr a, Expr b);
Expr divide(Expr a, Expr b);
Expr pow(Expr a, Expr b);
Expr neg(Expr a);
Expr call(Func f, Expr a);

inline Expr zero() { return constant(0.0); }
inline Expr one() { return constant(1.0); }

bool is_constant(const Expr& e, double v);

// Recursive structural comparison. Equivalent to pointer equality for trees
// interned on one thread, but safe across threads.
bool struct_equal(const Expr& a, const Expr& b);

// --- text ---
// Grammar (lowest to highest precedence): sums, products/quotients, unary
// minus, powers (right-associative), atoms (number, identifier, call,
// parenthesised expression). Unknown function names are a parse error;
// unknown identifiers are plain variables.
Expr parse(std::string_view text);  // throws ParseError
std::string render(const Expr& e);  // minimal parentheses; re-parses to an equal tree

// --- calculus / evaluation ---
Expr differentiate(const Expr& e, std::string_view var);  // memoised per thread

using Binding = std::map<std::string, double, std::less<>>;
double evaluate(const Expr& e, const Binding& env);  // throws EvalError

std::set<std::string> free_variables(const Expr& e);

// A batch of expressions compiled to a flat instruction tape over a fixed
// variable order, with common subexpressions computed once. This is the fast
// path: metric/connection component arrays are compiled once per chart and
// evaluated at many points.
class Program {
 public:
  Program() = default;
  Program(std::span<const Expr> roots, std::span<const std::string> vars);

  size_t num_inputs() const { return num_inputs_; }
  size_t num_outputs() const { return outputs_.size(); }

  // `in` holds one value per variable (in constructor order); `out` receives
  // one value per root. Throws EvalError on domain errors.
  void run(std::span<const double> in, std::span<double> out) const;
  std::vector<double> run(std::span<const double> in) const;

 private:
  struct Instr {
    uint8_t op;
    uint32_t a = 0, b = 0;
  };
  std::vector<Instr> code_;
  std::vector<double> consts_;
  std::vector<uint32_t> outputs_;
  std::vector<std::string> trace_;  // rendered subexpression per instr, for errors
  size_t num_inputs_ = 0;
};

}  // namespace tbg
