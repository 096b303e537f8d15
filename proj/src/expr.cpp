#include "tbgeo/expr.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace tbg {

namespace {

uint64_t mix(uint64_t x) {
  // splitmix64 finaliser; good avalanche for cheap structural hashing
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t double_bits(double v) {
  uint64_t b;
  std::memcpy(&b, &v, sizeof b);
  return b;
}

}  // namespace

const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Tan: return "tan";
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sinh: return "sinh";
    case Func::Cosh: return "cosh";
    case Func::Sqrt: return "sqrt";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// interning

class ExprBuilder {
 public:
  static Expr make(ExprKind k, Func f, double v, std::string name, Expr l, Expr r) {
    uint64_t h = mix(static_cast<uint64_t>(k) + 1);
    switch (k) {
      case ExprKind::Constant: h = mix(h ^ double_bits(v)); break;
      case ExprKind::Variable: h = mix(h ^ std::hash<std::string>{}(name)); break;
      case ExprKind::Call: h = mix(h ^ (static_cast<uint64_t>(f) + 17)); break;
      default: break;
    }
    if (l) h = mix(h ^ l->hash());
    if (r) h = mix(h ^ r->hash());

    auto& bucket = table()[h];
    for (const Expr& e : bucket) {
      if (e->kind() != k) continue;
      switch (k) {
        case ExprKind::Constant:
          if (double_bits(e->value()) != double_bits(v)) continue;
          break;
        case ExprKind::Variable:
          if (e->name() != name) continue;
          break;
        case ExprKind::Call:
          if (e->func() != f) continue;
          break;
        default: break;
      }
      if (e->lhs() != l || e->rhs() != r) continue;
      return e;
    }

    auto node = std::shared_ptr<ExprNode>(new ExprNode());
    node->kind_ = k;
    node->func_ = f;
    node->value_ = v;
    node->name_ = std::move(name);
    node->lhs_ = std::move(l);
    node->rhs_ = std::move(r);
    node->hash_ = h;
    bucket.push_back(node);
    return node;
  }

 private:
  // One table per thread: lookups are lock-free and pointer equality holds
  // within a thread, which is the only place it is relied upon.
  static std::unordered_map<uint64_t, std::vector<Expr>>& table() {
    thread_local std::unordered_map<uint64_t, std::vector<Expr>> t;
    return t;
  }
};

// ---------------------------------------------------------------------------
// constructors

Expr constant(double v) {
  return ExprBuilder::make(ExprKind::Constant, Func::Sin, v, {}, nullptr, nullptr);
}

Expr variable(std::string_view name) {
  return ExprBuilder::make(ExprKind::Variable, Func::Sin, 0, std::string(name), nullptr,
                           nullptr);
}

bool is_constant(const Expr& e, double v) {
  return e->kind() == ExprKind::Constant && e->value() == v;
}

static bool both_const(const Expr& a, const Expr& b) {
  return a->kind() == ExprKind::Constant && b->kind() == ExprKind::Constant;
}

Expr add(Expr a, Expr b) {
  if (is_constant(a, 0)) return b;
  if (is_constant(b, 0)) return a;
  if (both_const(a, b)) {
    double v = a->value() + b->value();
    if (std::isfinite(v)) return constant(v);
  }
  return ExprBuilder::make(ExprKind::Sum, Func::Sin, 0, {}, std::move(a), std::move(b));
}

Expr neg(Expr a) {
  if (a->kind() == ExprKind::Constant) return constant(-a->value());
  if (a->kind() == ExprKind::Negate) return a->lhs();
  return ExprBuilder::make(ExprKind::Negate, Func::Sin, 0, {}, std::move(a), nullptr);
}

Expr sub(Expr a, Expr b) { return add(std::move(a), neg(std::move(b))); }

Expr mul(Expr a, Expr b) {
  if (is_constant(a, 0) || is_constant(b, 0)) return constant(0);
  if (is_constant(a, 1)) return b;
  if (is_constant(b, 1)) return a;
  if (both_const(a, b)) {
    double v = a->value() * b->value();
    if (std::isfinite(v)) return constant(v);
  }
  return ExprBuilder::make(ExprKind::Product, Func::Sin, 0, {}, std::move(a), std::move(b));
}

Expr divide(Expr a, Expr b) {
  if (is_constant(b, 1)) return a;
  if (is_constant(a, 0) && !is_constant(b, 0)) return constant(0);
  if (both_const(a, b) && b->value() != 0) {
    double v = a->value() / b->value();
    if (std::isfinite(v)) return constant(v);
  }
  return ExprBuilder::make(ExprKind::Quotient, Func::Sin, 0, {}, std::move(a), std::move(b));
}

Expr pow(Expr a, Expr b) {
  if (is_constant(b, 1)) return a;
  if (is_constant(b, 0)) return constant(1);
  if (is_constant(a, 1)) return constant(1);
  if (both_const(a, b)) {
    double v = std::pow(a->value(), b->value());
    if (std::isfinite(v)) return constant(v);
  }
  return ExprBuilder::make(ExprKind::Power, Func::Sin, 0, {}, std::move(a), std::move(b));
}

Expr call(Func f, Expr a) {
  if (a->kind() == ExprKind::Constant) {
    double v = 0;
    switch (f) {
      case Func::Sin: v = std::sin(a->value()); break;
      case Func::Cos: v = std::cos(a->value()); break;
      case Func::Tan: v = std::tan(a->value()); break;
      case Func::Exp: v = std::exp(a->value()); break;
      case Func::Log: v = std::log(a->value()); break;
      case Func::Sinh: v = std::sinh(a->value()); break;
      case Func::Cosh: v = std::cosh(a->value()); break;
      case Func::Sqrt: v = std::sqrt(a->value()); break;
    }
    if (std::isfinite(v)) return constant(v);
  }
  return ExprBuilder::make(ExprKind::Call, f, 0, {}, std::move(a), nullptr);
}

bool struct_equal(const Expr& a, const Expr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind() != b->kind()) return false;
  switch (a->kind()) {
    case ExprKind::Constant:
      return double_bits(a->value()) == double_bits(b->value());
    case ExprKind::Variable: return a->name() == b->name();
    case ExprKind::Call:
      return a->func() == b->func() && struct_equal(a->lhs(), b->lhs());
    case ExprKind::Negate: return struct_equal(a->lhs(), b->lhs());
    default:
      return struct_equal(a->lhs(), b->lhs()) && struct_equal(a->rhs(), b->rhs());
  }
}

// ---------------------------------------------------------------------------
// rendering

namespace {

// Precedence levels used for minimal parenthesisation. Negative constants
// print with a leading '-', so they bind like a unary minus.
int prec(const ExprNode& e) {
  switch (e.kind()) {
    case ExprKind::Sum: return 1;
    case ExprKind::Product:
    case ExprKind::Quotient: return 2;
    case ExprKind::Negate: return 3;
    case ExprKind::Power: return 4;
    case ExprKind::Constant: return std::signbit(e.value()) ? 3 : 5;
    default: return 5;
  }
}

std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, p);
}

void render_to(const Expr& e, int min_prec, std::string& out) {
  int p = prec(*e);
  bool parens = p < min_prec;
  if (parens) out += '(';
  switch (e->kind()) {
    case ExprKind::Constant: out += format_double(e->value()); break;
    case ExprKind::Variable: out += e->name(); break;
    case ExprKind::Sum: {
      render_to(e->lhs(), 1, out);
      const Expr& r = e->rhs();
      if (r->kind() == ExprKind::Negate) {
        out += " - ";
        render_to(r->lhs(), 2, out);
      } else if (r->kind() == ExprKind::Constant && r->value() < 0) {
        out += " - ";
        out += format_double(-r->value());
      } else {
        out += " + ";
        render_to(r, 2, out);
      }
      break;
    }
    case ExprKind::Product:
      render_to(e->lhs(), 2, out);
      out += '*';
      render_to(e->rhs(), 3, out);
      break;
    case ExprKind::Quotient:
      render_to(e->lhs(), 2, out);
      out += '/';
      render_to(e->rhs(), 3, out);
      break;
    case ExprKind::Negate:
      out += '-';
      render_to(e->lhs(), 4, out);
      break;
    case ExprKind::Power:
      render_to(e->lhs(), 5, out);
      out += '^';
      render_to(e->rhs(), 4, out);
      break;
    case ExprKind::Call:
      out += func_name(e->func());
      out += '(';
      render_to(e->lhs(), 0, out);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

}  // namespace

std::string render(const Expr& e) {
  std::string out;
  render_to(e, 0, out);
  return out;
}

// ---------------------------------------------------------------------------
// parsing

namespace {

struct Parser {
  std::string_view src;
  size_t pos = 0;

  void skip_ws() {
    while (pos < src.size() && (src[pos] == ' ' || src[pos] == '\t' || src[pos] == '\n' ||
                                src[pos] == '\r'))
      ++pos;
  }

  bool eat(char c) {
    skip_ws();
    if (pos < src.size() && src[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg, size_t at) { throw ParseError(msg, at); }

  Expr parse_expr() {
    Expr lhs = parse_term();
    for (;;) {
      skip_ws();
      if (pos < src.size() && src[pos] == '+') {
        ++pos;
        lhs = add(lhs, parse_term());
      } else if (pos < src.size() && src[pos] == '-') {
        ++pos;
        lhs = sub(lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_term() {
    Expr lhs = parse_unary();
    for (;;) {
      skip_ws();
      if (pos < src.size() && src[pos] == '*') {
        ++pos;
        lhs = mul(lhs, parse_unary());
      } else if (pos < src.size() && src[pos] == '/') {
        ++pos;
        lhs = divide(lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    skip_ws();
    if (pos < src.size() && src[pos] == '-') {
      ++pos;
      return neg(parse_unary());
    }
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    skip_ws();
    if (pos < src.size() && src[pos] == '^') {
      ++pos;
      return pow(base, parse_unary());  // right-associative; exponent may be signed
    }
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (pos >= src.size()) fail("expected expression", pos);
    char c = src[pos];
    if (c == '(') {
      ++pos;
      Expr inner = parse_expr();
      skip_ws();
      if (!eat(')')) fail("expected ')'", pos);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail("expected expression", pos);
  }

  Expr parse_number() {
    size_t start = pos;
    bool digits = false;
    while (pos < src.size() &&
           (std::isdigit(static_cast<unsigned char>(src[pos])) || src[pos] == '.')) {
      digits |= src[pos] != '.';
      ++pos;
    }
    if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
      size_t mark = pos++;
      if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) ++pos;
      if (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) {
        while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
      } else {
        pos = mark;  // 'e' begins an identifier, not an exponent
      }
    }
    if (!digits) fail("malformed number", start);
    double v = 0;
    auto [p, ec] = std::from_chars(src.data() + start, src.data() + pos, v);
    if (ec != std::errc() || p != src.data() + pos) fail("malformed number", start);
    return constant(v);
  }

  Expr parse_ident() {
    size_t start = pos;
    while (pos < src.size() && (std::isalnum(static_cast<unsigned char>(src[pos])) ||
                                src[pos] == '_'))
      ++pos;
    std::string name(src.substr(start, pos - start));
    skip_ws();
    if (pos < src.size() && src[pos] == '(') {
      static const std::unordered_map<std::string, Func> funcs = {
          {"sin", Func::Sin},   {"cos", Func::Cos},   {"tan", Func::Tan},
          {"exp", Func::Exp},   {"log", Func::Log},   {"sinh", Func::Sinh},
          {"cosh", Func::Cosh}, {"sqrt", Func::Sqrt},
      };
      auto it = funcs.find(name);
      if (it == funcs.end()) fail("unknown function '" + name + "'", start);
      ++pos;
      Expr arg = parse_expr();
      if (!eat(')')) fail("expected ')'", pos);
      return call(it->second, arg);
    }
    return variable(name);
  }
};

}  // namespace

Expr parse(std::string_view text) {
  Parser p{text};
  Expr e = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("unexpected character", p.pos);
  return e;
}

// ---------------------------------------------------------------------------
// differentiation

namespace {

using DiffMemo = std::unordered_map<const ExprNode*, std::map<std::string, Expr, std::less<>>>;

Expr diff_rec(const Expr& e, std::string_view var, DiffMemo& memo) {
  auto& slot = memo[e.get()];
  if (auto it = slot.find(var); it != slot.end()) return it->second;

  Expr d;
  switch (e->kind()) {
    case ExprKind::Constant: d = zero(); break;
    case ExprKind::Variable: d = e->name() == var ? one() : zero(); break;
    case ExprKind::Sum:
      d = add(diff_rec(e->lhs(), var, memo), diff_rec(e->rhs(), var, memo));
      break;
    case ExprKind::Product: {
      Expr da = diff_rec(e->lhs(), var, memo);
      Expr db = diff_rec(e->rhs(), var, memo);
      d = add(mul(da, e->rhs()), mul(e->lhs(), db));
      break;
    }
    case ExprKind::Quotient: {
      Expr da = diff_rec(e->lhs(), var, memo);
      Expr db = diff_rec(e->rhs(), var, memo);
      d = divide(sub(mul(da, e->rhs()), mul(e->lhs(), db)), pow(e->rhs(), constant(2)));
      break;
    }
    case ExprKind::Power: {
      const Expr& a = e->lhs();
      const Expr& b = e->rhs();
      Expr da = diff_rec(a, var, memo);
      if (b->kind() == ExprKind::Constant) {
        d = mul(mul(b, pow(a, constant(b->value() - 1))), da);
      } else {
        Expr db = diff_rec(b, var, memo);
        // d(a^b) = a^b * (b' log a + b a'/a)
        d = mul(e, add(mul(db, call(Func::Log, a)), divide(mul(b, da), a)));
      }
      break;
    }
    case ExprKind::Negate: d = neg(diff_rec(e->lhs(), var, memo)); break;
    case ExprKind::Call: {
      const Expr& a = e->lhs();
      Expr da = diff_rec(a, var, memo);
      Expr outer;
      switch (e->func()) {
        case Func::Sin: outer = call(Func::Cos, a); break;
        case Func::Cos: outer = neg(call(Func::Sin, a)); break;
        case Func::Tan: outer = divide(one(), pow(call(Func::Cos, a), constant(2))); break;
        case Func::Exp: outer = e; break;
        case Func::Log: outer = divide(one(), a); break;
        case Func::Sinh: outer = call(Func::Cosh, a); break;
        case Func::Cosh: outer = call(Func::Sinh, a); break;
        case Func::Sqrt: outer = divide(one(), mul(constant(2), e)); break;
      }
      d = mul(outer, da);
      break;
    }
  }
  slot.emplace(std::string(var), d);
  return d;
}

}  // namespace

Expr differentiate(const Expr& e, std::string_view var) {
  // Memo is per thread and keyed by node pointer, valid because interned
  // nodes live for the thread's lifetime.
  thread_local DiffMemo memo;
  return diff_rec(e, var, memo);
}

// ---------------------------------------------------------------------------
// evaluation

double evaluate(const Expr& e, const Binding& env) {
  double r = 0;
  switch (e->kind()) {
    case ExprKind::Constant: r = e->value(); break;
    case ExprKind::Variable: {
      auto it = env.find(e->name());
      if (it == env.end()) throw EvalError("unbound variable '" + e->name() + "'", render(e));
      r = it->second;
      break;
    }
    case ExprKind::Sum: r = evaluate(e->lhs(), env) + evaluate(e->rhs(), env); break;
    case ExprKind::Product: r = evaluate(e->lhs(), env) * evaluate(e->rhs(), env); break;
    case ExprKind::Quotient: {
      double a = evaluate(e->lhs(), env);
      double b = evaluate(e->rhs(), env);
      if (b == 0) throw EvalError("division by zero", render(e));
      r = a / b;
      break;
    }
    case ExprKind::Power: r = std::pow(evaluate(e->lhs(), env), evaluate(e->rhs(), env)); break;
    case ExprKind::Negate: r = -evaluate(e->lhs(), env); break;
    case ExprKind::Call: {
      double a = evaluate(e->lhs(), env);
      switch (e->func()) {
        case Func::Sin: r = std::sin(a); break;
        case Func::Cos: r = std::cos(a); break;
        case Func::Tan: r = std::tan(a); break;
        case Func::Exp: r = std::exp(a); break;
        case Func::Log:
          if (a <= 0) throw EvalError("log of non-positive value", render(e));
          r = std::log(a);
          break;
        case Func::Sinh: r = std::sinh(a); break;
        case Func::Cosh: r = std::cosh(a); break;
        case Func::Sqrt:
          if (a < 0) throw EvalError("sqrt of negative value", render(e));
          r = std::sqrt(a);
          break;
      }
      break;
    }
  }
  if (!std::isfinite(r)) throw EvalError("non-finite result", render(e));
  return r;
}

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> vars;
  std::vector<const ExprNode*> stack{e.get()};
  std::set<const ExprNode*> seen;
  while (!stack.empty()) {
    const ExprNode* n = stack.back();
    stack.pop_back();
    if (!n || !seen.insert(n).second) continue;
    if (n->kind() == ExprKind::Variable) vars.insert(n->name());
    if (n->lhs()) stack.push_back(n->lhs().get());
    if (n->rhs()) stack.push_back(n->rhs().get());
  }
  return vars;
}

// ---------------------------------------------------------------------------
// compiled programs

namespace {

enum Op : uint8_t {
  OpConst,
  OpVar,
  OpAdd,
  OpMul,
  OpDiv,
  OpPow,
  OpNeg,
  OpSin,
  OpCos,
  OpTan,
  OpExp,
  OpLog,
  OpSinh,
  OpCosh,
  OpSqrt,
};

Op call_op(Func f) {
  switch (f) {
    case Func::Sin: return OpSin;
    case Func::Cos: return OpCos;
    case Func::Tan: return OpTan;
    case Func::Exp: return OpExp;
    case Func::Log: return OpLog;
    case Func::Sinh: return OpSinh;
    case Func::Cosh: return OpCosh;
    case Func::Sqrt: return OpSqrt;
  }
  return OpSin;
}

}  // namespace

Program::Program(std::span<const Expr> roots, std::span<const std::string> vars) {
  num_inputs_ = vars.size();
  std::unordered_map<std::string, uint32_t> var_slot;
  for (size_t i = 0; i < vars.size(); ++i) var_slot[vars[i]] = static_cast<uint32_t>(i);

  // Iterative post-order walk assigning one tape slot per distinct node.
  // Interning makes pointer identity coincide with structural identity, so
  // shared subexpressions compile to a single instruction.
  std::unordered_map<const ExprNode*, uint32_t> slot;
  for (const Expr& root : roots) {
    std::vector<std::pair<Expr, bool>> stack{{root, false}};
    while (!stack.empty()) {
      auto [e, expanded] = stack.back();
      const ExprNode* n = e.get();
      stack.pop_back();
      if (slot.count(n)) continue;
      if (!expanded) {
        stack.push_back({e, true});
        if (n->lhs()) stack.push_back({n->lhs(), false});
        if (n->rhs()) stack.push_back({n->rhs(), false});
        continue;
      }
      Instr ins{};
      switch (n->kind()) {
        case ExprKind::Constant:
          ins.op = OpConst;
          ins.a = static_cast<uint32_t>(consts_.size());
          consts_.push_back(n->value());
          break;
        case ExprKind::Variable: {
          auto it = var_slot.find(n->name());
          if (it == var_slot.end())
            throw EvalError("unbound variable '" + n->name() + "'", n->name());
          ins.op = OpVar;
          ins.a = it->second;
          break;
        }
        case ExprKind::Sum:
          ins.op = OpAdd;
          ins.a = slot.at(n->lhs().get());
          ins.b = slot.at(n->rhs().get());
          break;
        case ExprKind::Product:
          ins.op = OpMul;
          ins.a = slot.at(n->lhs().get());
          ins.b = slot.at(n->rhs().get());
          break;
        case ExprKind::Quotient:
          ins.op = OpDiv;
          ins.a = slot.at(n->lhs().get());
          ins.b = slot.at(n->rhs().get());
          break;
        case ExprKind::Power:
          ins.op = OpPow;
          ins.a = slot.at(n->lhs().get());
          ins.b = slot.at(n->rhs().get());
          break;
        case ExprKind::Negate:
          ins.op = OpNeg;
          ins.a = slot.at(n->lhs().get());
          break;
        case ExprKind::Call:
          ins.op = call_op(n->func());
          ins.a = slot.at(n->lhs().get());
          break;
      }
      slot[n] = static_cast<uint32_t>(code_.size());
      code_.push_back(ins);
      trace_.push_back(render(e));
    }
  }
  outputs_.reserve(roots.size());
  for (const Expr& root : roots) outputs_.push_back(slot.at(root.get()));
}

void Program::run(std::span<const double> in, std::span<double> out) const {
  if (in.size() != num_inputs_)
    throw EvalError("wrong input arity", std::to_string(in.size()));
  thread_local std::vector<double> vals;
  vals.resize(code_.size());
  for (size_t i = 0; i < code_.size(); ++i) {
    const Instr& ins = code_[i];
    double r = 0;
    switch (ins.op) {
      case OpConst: r = consts_[ins.a]; break;
      case OpVar: r = in[ins.a]; break;
      case OpAdd: r = vals[ins.a] + vals[ins.b]; break;
      case OpMul: r = vals[ins.a] * vals[ins.b]; break;
      case OpDiv:
        if (vals[ins.b] == 0) throw EvalError("division by zero", trace_[i]);
        r = vals[ins.a] / vals[ins.b];
        break;
      case OpPow: r = std::pow(vals[ins.a], vals[ins.b]); break;
      case OpNeg: r = -vals[ins.a]; break;
      case OpSin: r = std::sin(vals[ins.a]); break;
      case OpCos: r = std::cos(vals[ins.a]); break;
      case OpTan: r = std::tan(vals[ins.a]); break;
      case OpExp: r = std::exp(vals[ins.a]); break;
      case OpLog:
        if (vals[ins.a] <= 0) throw EvalError("log of non-positive value", trace_[i]);
        r = std::log(vals[ins.a]);
        break;
      case OpSinh: r = std::sinh(vals[ins.a]); break;
      case OpCosh: r = std::cosh(vals[ins.a]); break;
      case OpSqrt:
        if (vals[ins.a] < 0) throw EvalError("sqrt of negative value", trace_[i]);
        r = std::sqrt(vals[ins.a]);
        break;
    }
    if (!std::isfinite(r)) throw EvalError("non-finite result", trace_[i]);
    vals[i] = r;
  }
  for (size_t k = 0; k < outputs_.size(); ++k) out[k] = vals[outputs_[k]];
}

std::vector<double> Program::run(std::span<const double> in) const {
  std::vector<double> out(outputs_.size());
  run(in, std::span<double>(out));
  return out;
}

}  // namespace tbg
