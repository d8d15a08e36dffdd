#pragma once

// Drift expressions: a small real-valued expression language in one
// variable `z`, with a recursive-descent parser, a pretty-printer, symbolic
// differentiation and a compiled (postfix) evaluator that can run over whole
// arrays of arguments at once.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fptd {

class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

private:
  std::size_t position_;
};

enum class Op {
  constant,
  variable,
  add,
  sub,
  mul,
  div,
  pow,
  neg,
  exp,
  log,
  sin,
  cos,
  sqrt
};

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
  Op op;
  double value = 0.0;  // constant
  int exponent = 0;    // pow
  NodePtr lhs;         // operand of unary ops and pow
  NodePtr rhs;
};

inline bool is_unary(Op op) {
  return op == Op::neg || op == Op::exp || op == Op::log || op == Op::sin ||
         op == Op::cos || op == Op::sqrt;
}

inline bool is_binary(Op op) {
  return op == Op::add || op == Op::sub || op == Op::mul || op == Op::div;
}

inline double ipow(double base, int n) {
  if (n < 0) return 1.0 / ipow(base, -n);
  double result = 1.0;
  while (n > 0) {
    if (n & 1) result *= base;
    base *= base;
    n >>= 1;
  }
  return result;
}

inline double apply_unary(Op op, double v) {
  switch (op) {
    case Op::neg: return -v;
    case Op::exp: return std::exp(v);
    case Op::log: return std::log(v);
    case Op::sin: return std::sin(v);
    case Op::cos: return std::cos(v);
    case Op::sqrt: return std::sqrt(v);
    default: return v;
  }
}

inline double apply_binary(Op op, double l, double r) {
  switch (op) {
    case Op::add: return l + r;
    case Op::sub: return l - r;
    case Op::mul: return l * r;
    case Op::div: return l / r;
    default: return l;
  }
}

// Constructors fold constants and drop neutral elements so derivative trees
// stay small. Nothing beyond that is simplified.
inline NodePtr make_constant(double v) {
  return std::make_shared<const Node>(Node{Op::constant, v, 0, nullptr, nullptr});
}

inline NodePtr make_variable() {
  return std::make_shared<const Node>(Node{Op::variable, 0.0, 0, nullptr, nullptr});
}

inline bool is_constant(const NodePtr& n, double v) {
  return n->op == Op::constant && n->value == v;
}

inline NodePtr make_unary(Op op, NodePtr arg) {
  if (arg->op == Op::constant) return make_constant(apply_unary(op, arg->value));
  if (op == Op::neg && arg->op == Op::neg) return arg->lhs;
  return std::make_shared<const Node>(Node{op, 0.0, 0, std::move(arg), nullptr});
}

inline NodePtr make_binary(Op op, NodePtr l, NodePtr r) {
  if (l->op == Op::constant && r->op == Op::constant)
    return make_constant(apply_binary(op, l->value, r->value));
  switch (op) {
    case Op::add:
      if (is_constant(l, 0.0)) return r;
      if (is_constant(r, 0.0)) return l;
      break;
    case Op::sub:
      if (is_constant(r, 0.0)) return l;
      if (is_constant(l, 0.0)) return make_unary(Op::neg, r);
      break;
    case Op::mul:
      if (is_constant(l, 0.0) || is_constant(r, 0.0)) return make_constant(0.0);
      if (is_constant(l, 1.0)) return r;
      if (is_constant(r, 1.0)) return l;
      break;
    case Op::div:
      if (is_constant(l, 0.0)) return make_constant(0.0);
      if (is_constant(r, 1.0)) return l;
      break;
    default:
      break;
  }
  return std::make_shared<const Node>(Node{op, 0.0, 0, std::move(l), std::move(r)});
}

inline NodePtr make_pow(NodePtr base, int n) {
  if (n == 0) return make_constant(1.0);
  if (n == 1) return base;
  if (base->op == Op::constant) return make_constant(ipow(base->value, n));
  return std::make_shared<const Node>(Node{Op::pow, 0.0, n, std::move(base), nullptr});
}

inline NodePtr derive(const NodePtr& e) {
  switch (e->op) {
    case Op::constant:
      return make_constant(0.0);
    case Op::variable:
      return make_constant(1.0);
    case Op::add:
    case Op::sub:
      return make_binary(e->op, derive(e->lhs), derive(e->rhs));
    case Op::mul:
      return make_binary(Op::add, make_binary(Op::mul, derive(e->lhs), e->rhs),
                         make_binary(Op::mul, e->lhs, derive(e->rhs)));
    case Op::div: {
      auto num = make_binary(Op::sub, make_binary(Op::mul, derive(e->lhs), e->rhs),
                             make_binary(Op::mul, e->lhs, derive(e->rhs)));
      return make_binary(Op::div, num, make_pow(e->rhs, 2));
    }
    case Op::pow: {
      auto outer = make_binary(Op::mul, make_constant(e->exponent),
                               make_pow(e->lhs, e->exponent - 1));
      return make_binary(Op::mul, outer, derive(e->lhs));
    }
    case Op::neg:
      return make_unary(Op::neg, derive(e->lhs));
    case Op::exp:
      return make_binary(Op::mul, e, derive(e->lhs));
    case Op::log:
      return make_binary(Op::div, derive(e->lhs), e->lhs);
    case Op::sin:
      return make_binary(Op::mul, make_unary(Op::cos, e->lhs), derive(e->lhs));
    case Op::cos:
      return make_unary(Op::neg,
                        make_binary(Op::mul, make_unary(Op::sin, e->lhs), derive(e->lhs)));
    case Op::sqrt:
      return make_binary(Op::div, derive(e->lhs),
                         make_binary(Op::mul, make_constant(2.0), e));
  }
  return make_constant(0.0);
}

inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline const char* function_name(Op op) {
  switch (op) {
    case Op::exp: return "exp";
    case Op::log: return "log";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::sqrt: return "sqrt";
    default: return "";
  }
}

inline void print(const NodePtr& e, std::string& out) {
  switch (e->op) {
    case Op::constant:
      if (e->value < 0 || std::signbit(e->value)) {
        out += "(-";
        out += format_double(-e->value);
        out += ')';
      } else {
        out += format_double(e->value);
      }
      return;
    case Op::variable:
      out += 'z';
      return;
    case Op::add:
    case Op::sub:
    case Op::mul:
    case Op::div: {
      static constexpr const char* symbols[] = {" + ", " - ", " * ", " / "};
      out += '(';
      print(e->lhs, out);
      out += symbols[static_cast<int>(e->op) - static_cast<int>(Op::add)];
      print(e->rhs, out);
      out += ')';
      return;
    }
    case Op::pow:
      out += '(';
      print(e->lhs, out);
      out += ")^";
      if (e->exponent < 0) out += '-';
      out += std::to_string(std::abs(e->exponent));
      return;
    case Op::neg:
      out += "(-";
      print(e->lhs, out);
      out += ')';
      return;
    default:
      out += function_name(e->op);
      out += '(';
      print(e->lhs, out);
      out += ')';
      return;
  }
}

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto result = expression();
    skip_space();
    if (pos_ != text_.size())
      throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return result;
  }

private:
  std::string_view text_;
  std::size_t pos_ = 0;

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
      ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  NodePtr expression() {
    auto lhs = term();
    for (;;) {
      if (accept('+'))
        lhs = make_binary(Op::add, lhs, term());
      else if (accept('-'))
        lhs = make_binary(Op::sub, lhs, term());
      else
        return lhs;
    }
  }

  NodePtr term() {
    auto lhs = unary();
    for (;;) {
      if (accept('*'))
        lhs = make_binary(Op::mul, lhs, unary());
      else if (accept('/'))
        lhs = make_binary(Op::div, lhs, unary());
      else
        return lhs;
    }
  }

  // Unary minus binds looser than '^': -z^2 == -(z^2).
  NodePtr unary() {
    if (accept('-')) return make_unary(Op::neg, unary());
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    auto base = primary();
    if (!accept('^')) return base;
    skip_space();
    const std::size_t at = pos_;
    bool negative = false;
    if (accept('-')) negative = true;
    skip_space();
    const std::size_t digits_at = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == digits_at || (pos_ < text_.size() && (text_[pos_] == '.' || text_[pos_] == 'e' ||
                                                       text_[pos_] == 'E')))
      throw ParseError("exponent must be an integer literal", at);
    int n = 0;
    auto res = std::from_chars(text_.data() + digits_at, text_.data() + pos_, n);
    if (res.ec != std::errc{} || n > 1024) throw ParseError("exponent out of range", at);
    if (peek('^')) throw ParseError("chained '^' is ambiguous; use parentheses", pos_);
    return make_pow(base, negative ? -n : n);
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      auto inner = expression();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  NodePtr number() {
    const std::size_t start = pos_;
    double v = 0.0;
    auto res = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), v);
    if (res.ec != std::errc{}) throw ParseError("malformed number", start);
    pos_ = static_cast<std::size_t>(res.ptr - text_.data());
    return make_constant(v);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "z") {
      if (peek('(')) throw ParseError("'z' is not a function", pos_);
      return make_variable();
    }
    Op op;
    if (name == "exp") op = Op::exp;
    else if (name == "log") op = Op::log;
    else if (name == "sin") op = Op::sin;
    else if (name == "cos") op = Op::cos;
    else if (name == "sqrt") op = Op::sqrt;
    else throw ParseError("unknown identifier '" + std::string(name) + "'", start);

    if (!accept('('))
      throw ParseError(std::string(name) + " expects one argument in parentheses", pos_);
    if (peek(')')) throw ParseError(std::string(name) + " expects 1 argument, got 0", pos_);
    auto arg = expression();
    if (peek(',')) throw ParseError(std::string(name) + " expects 1 argument, got more", pos_);
    if (!accept(')')) throw ParseError("expected ')'", pos_);
    return make_unary(op, arg);
  }
};

struct Instruction {
  Op op;
  double value;
  int exponent;
};

inline void compile(const NodePtr& e, std::vector<Instruction>& code, int& depth, int& max_depth) {
  if (e->lhs) compile(e->lhs, code, depth, max_depth);
  if (e->rhs) compile(e->rhs, code, depth, max_depth);
  if (e->op == Op::constant || e->op == Op::variable) {
    ++depth;
    if (depth > max_depth) max_depth = depth;
  } else if (is_binary(e->op)) {
    --depth;
  }
  code.push_back({e->op, e->value, e->exponent});
}

}  // namespace detail

/// Immutable expression in the single variable `z`.
///
/// Evaluation outside the mathematical domain of a sub-expression (log of a
/// negative number, division by zero) yields a non-finite value rather than
/// throwing; callers that need a finite result check for it.
class DriftExpr {
public:
  DriftExpr() : DriftExpr(detail::make_constant(0.0)) {}

  static DriftExpr parse(std::string_view text) { return DriftExpr(detail::Parser(text).parse()); }
  static DriftExpr constant(double v) { return DriftExpr(detail::make_constant(v)); }
  static DriftExpr variable() { return DriftExpr(detail::make_variable()); }

  DriftExpr derivative() const { return DriftExpr(detail::derive(root_)); }

  std::string to_string() const {
    std::string out;
    detail::print(root_, out);
    return out;
  }

  bool is_constant() const { return root_->op == Op::constant; }

  double operator()(double z) const {
    double stack[kInlineStack];
    if (max_depth_ > kInlineStack) {
      std::vector<double> heap(static_cast<std::size_t>(max_depth_));
      return run_scalar(z, heap.data());
    }
    return run_scalar(z, stack);
  }

  /// Evaluates at every point of `z` into `out` (same length).
  void evaluate(std::span<const double> z, std::span<double> out) const {
    constexpr std::size_t block = 256;
    thread_local std::vector<double> scratch;
    scratch.resize(block * static_cast<std::size_t>(max_depth_));
    for (std::size_t begin = 0; begin < z.size(); begin += block) {
      const std::size_t len = std::min(block, z.size() - begin);
      run_block(z.subspan(begin, len), out.subspan(begin, len), scratch.data(), block);
    }
  }

  friend DriftExpr operator+(const DriftExpr& l, const DriftExpr& r) {
    return DriftExpr(detail::make_binary(Op::add, l.root_, r.root_));
  }
  friend DriftExpr operator-(const DriftExpr& l, const DriftExpr& r) {
    return DriftExpr(detail::make_binary(Op::sub, l.root_, r.root_));
  }
  friend DriftExpr operator*(const DriftExpr& l, const DriftExpr& r) {
    return DriftExpr(detail::make_binary(Op::mul, l.root_, r.root_));
  }
  friend DriftExpr operator/(const DriftExpr& l, const DriftExpr& r) {
    return DriftExpr(detail::make_binary(Op::div, l.root_, r.root_));
  }
  DriftExpr pow(int n) const { return DriftExpr(detail::make_pow(root_, n)); }

private:
  static constexpr int kInlineStack = 64;

  explicit DriftExpr(detail::NodePtr root) : root_(std::move(root)) {
    int depth = 0;
    detail::compile(root_, code_, depth, max_depth_);
  }

  double run_scalar(double z, double* stack) const {
    int top = -1;
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::constant: stack[++top] = ins.value; break;
        case Op::variable: stack[++top] = z; break;
        case Op::pow: stack[top] = detail::ipow(stack[top], ins.exponent); break;
        case Op::add: --top; stack[top] += stack[top + 1]; break;
        case Op::sub: --top; stack[top] -= stack[top + 1]; break;
        case Op::mul: --top; stack[top] *= stack[top + 1]; break;
        case Op::div: --top; stack[top] /= stack[top + 1]; break;
        default: stack[top] = detail::apply_unary(ins.op, stack[top]); break;
      }
    }
    return stack[0];
  }

  // Stack of arrays: slot k occupies scratch[k*stride, k*stride+len).
  void run_block(std::span<const double> z, std::span<double> out, double* scratch,
                 std::size_t stride) const {
    const std::size_t n = z.size();
    int top = -1;
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::constant: {
          double* dst = scratch + (++top) * stride;
          for (std::size_t i = 0; i < n; ++i) dst[i] = ins.value;
          break;
        }
        case Op::variable: {
          double* dst = scratch + (++top) * stride;
          for (std::size_t i = 0; i < n; ++i) dst[i] = z[i];
          break;
        }
        case Op::pow: {
          double* a = scratch + top * stride;
          if (ins.exponent == 2) {
            for (std::size_t i = 0; i < n; ++i) a[i] *= a[i];
          } else {
            for (std::size_t i = 0; i < n; ++i) a[i] = detail::ipow(a[i], ins.exponent);
          }
          break;
        }
        case Op::add:
        case Op::sub:
        case Op::mul:
        case Op::div: {
          --top;
          double* a = scratch + top * stride;
          const double* b = a + stride;
          if (ins.op == Op::add)
            for (std::size_t i = 0; i < n; ++i) a[i] += b[i];
          else if (ins.op == Op::sub)
            for (std::size_t i = 0; i < n; ++i) a[i] -= b[i];
          else if (ins.op == Op::mul)
            for (std::size_t i = 0; i < n; ++i) a[i] *= b[i];
          else
            for (std::size_t i = 0; i < n; ++i) a[i] /= b[i];
          break;
        }
        case Op::neg: {
          double* a = scratch + top * stride;
          for (std::size_t i = 0; i < n; ++i) a[i] = -a[i];
          break;
        }
        default: {
          double* a = scratch + top * stride;
          for (std::size_t i = 0; i < n; ++i) a[i] = detail::apply_unary(ins.op, a[i]);
          break;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = scratch[i];
  }

  detail::NodePtr root_;
  std::vector<detail::Instruction> code_;
  int max_depth_ = 0;
};

inline DriftExpr parse_drift(std::string_view text) { return DriftExpr::parse(text); }
inline DriftExpr differentiate(const DriftExpr& e) { return e.derivative(); }

}  // namespace fptd
