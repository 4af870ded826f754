#include "nakano/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <utility>

#include "nakano/errors.hpp"

namespace nakano {

struct Expr::Node {
  Kind kind;
  double number = 0.0;
  std::string name;
  Function fn = Function::Exp;
  std::vector<Expr> children;
};

Expr Expr::number(double v) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Number;
  n->number = v;
  return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Variable;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::negate(Expr operand) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Negate;
  n->children.push_back(std::move(operand));
  return Expr(std::move(n));
}

Expr Expr::binary(Kind op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = op;
  n->children.push_back(std::move(lhs));
  n->children.push_back(std::move(rhs));
  return Expr(std::move(n));
}

Expr Expr::call(Function fn, std::vector<Expr> args) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Call;
  n->fn = fn;
  n->children = std::move(args);
  return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::number_value() const { return node_->number; }
const std::string& Expr::variable_name() const { return node_->name; }
Expr::Function Expr::function() const { return node_->fn; }
std::span<const Expr> Expr::children() const { return node_->children; }

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  const auto& x = *a.node_;
  const auto& y = *b.node_;
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case Expr::Kind::Number:
      return x.number == y.number;
    case Expr::Kind::Variable:
      return x.name == y.name;
    case Expr::Kind::Call:
      if (x.fn != y.fn) return false;
      break;
    default:
      break;
  }
  return x.children == y.children;
}

const char* function_name(Expr::Function fn) {
  switch (fn) {
    case Expr::Function::Exp: return "exp";
    case Expr::Function::Log: return "log";
    case Expr::Function::Sin: return "sin";
    case Expr::Function::Cos: return "cos";
    case Expr::Function::Sqrt: return "sqrt";
    case Expr::Function::Abs2: return "abs2";
  }
  return "?";
}

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* op_symbol(Expr::Kind k) {
  switch (k) {
    case Expr::Kind::Add: return " + ";
    case Expr::Kind::Sub: return " - ";
    case Expr::Kind::Mul: return " * ";
    case Expr::Kind::Div: return " / ";
    case Expr::Kind::Pow: return "^";
    default: return "?";
  }
}

void write(const Expr& e, std::string& out) {
  switch (e.kind()) {
    case Expr::Kind::Number:
      out += format_number(e.number_value());
      return;
    case Expr::Kind::Variable:
      out += e.variable_name();
      return;
    case Expr::Kind::Negate:
      out += "(-";
      write(e.children()[0], out);
      out += ')';
      return;
    case Expr::Kind::Call: {
      out += function_name(e.function());
      out += '(';
      bool first = true;
      for (const auto& c : e.children()) {
        if (!first) out += ", ";
        first = false;
        write(c, out);
      }
      out += ')';
      return;
    }
    default:
      out += '(';
      write(e.children()[0], out);
      out += op_symbol(e.kind());
      write(e.children()[1], out);
      out += ')';
  }
}

struct FunctionInfo {
  const char* name;
  Expr::Function fn;
  unsigned min_arity;
  unsigned max_arity;
};

constexpr FunctionInfo kFunctions[] = {
    {"exp", Expr::Function::Exp, 1, 1},   {"log", Expr::Function::Log, 1, 1},
    {"sin", Expr::Function::Sin, 1, 1},   {"cos", Expr::Function::Cos, 1, 1},
    {"sqrt", Expr::Function::Sqrt, 1, 1}, {"abs2", Expr::Function::Abs2, 1, 64},
};

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr parse_all() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("empty expression", pos_);
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return e;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) {
      if (pos_ >= text_.size()) throw ParseError(std::string("expected '") + c + "' but input ended", pos_);
      throw ParseError(std::string("expected '") + c + "'", pos_);
    }
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) {
        lhs = Expr::binary(Expr::Kind::Add, lhs, parse_product());
      } else if (accept('-')) {
        lhs = Expr::binary(Expr::Kind::Sub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expr::binary(Expr::Kind::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = Expr::binary(Expr::Kind::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  Expr parse_unary() {
    if (accept('-')) return Expr::negate(parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    if (accept('^')) return Expr::binary(Expr::Kind::Pow, base, parse_unary());
    return base;
  }

  Expr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of input", pos_);
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr inner = parse_sum();
      expect(')');
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_, ++n;
      return n;
    };
    std::size_t n = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) throw ParseError("malformed number", start);
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) throw ParseError("malformed exponent", start);
    }
    double v = 0.0;
    auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) throw ParseError("malformed number", start);
    return Expr::number(v);
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string name(text_.substr(start, pos_ - start));
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == '(') {
      const FunctionInfo* info = nullptr;
      for (const auto& f : kFunctions)
        if (name == f.name) info = &f;
      if (info == nullptr) throw ParseError("unknown function '" + name + "'", start);
      ++pos_;
      std::vector<Expr> args;
      args.push_back(parse_sum());
      while (accept(',')) args.push_back(parse_sum());
      expect(')');
      if (args.size() < info->min_arity || args.size() > info->max_arity)
        throw ParseError("wrong number of arguments to '" + name + "'", start);
      return Expr::call(info->fn, std::move(args));
    }
    return Expr::variable(std::move(name));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

void collect(const Expr& e, std::set<std::string>& out) {
  if (e.kind() == Expr::Kind::Variable) out.insert(e.variable_name());
  for (const auto& c : e.children()) collect(c, out);
}

bool is_integer(double p) { return std::floor(p) == p && std::abs(p) < 1e15; }

HyperDual apply_pow(const HyperDual& base, const HyperDual& exponent) {
  if (exponent.d1 == 0.0 && exponent.d2 == 0.0 && exponent.d12 == 0.0) {
    const double p = exponent.value;
    if (is_integer(p)) {
      if (base.value == 0.0 && p < 0.0)
        throw DomainError("power of zero with negative exponent");
      return pow(base, p);
    }
    if (base.value <= 0.0) throw DomainError("non-integer power of nonpositive value");
    return pow(base, p);
  }
  if (base.value <= 0.0) throw DomainError("variable exponent on nonpositive base");
  return exp(exponent * log(base));
}

HyperDual apply_call(Expr::Function fn, std::span<const HyperDual> args) {
  switch (fn) {
    case Expr::Function::Exp:
      return exp(args[0]);
    case Expr::Function::Log:
      if (!(args[0].value > 0.0)) throw DomainError("log of nonpositive value");
      return log(args[0]);
    case Expr::Function::Sin:
      return sin(args[0]);
    case Expr::Function::Cos:
      return cos(args[0]);
    case Expr::Function::Sqrt:
      if (!(args[0].value > 0.0)) throw DomainError("sqrt of nonpositive value");
      return sqrt(args[0]);
    case Expr::Function::Abs2: {
      HyperDual s;
      for (const auto& a : args) s += a * a;
      return s;
    }
  }
  return {};
}

}  // namespace

std::string Expr::to_string() const {
  std::string out;
  write(*this, out);
  return out;
}

Expr parse(std::string_view text) { return Parser(text).parse_all(); }

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  collect(e, out);
  return out;
}

Expr substitute(const Expr& e, std::string_view name, const Expr& replacement) {
  switch (e.kind()) {
    case Expr::Kind::Number:
      return e;
    case Expr::Kind::Variable:
      return e.variable_name() == name ? replacement : e;
    case Expr::Kind::Negate:
      return Expr::negate(substitute(e.children()[0], name, replacement));
    case Expr::Kind::Call: {
      std::vector<Expr> args;
      for (const auto& c : e.children()) args.push_back(substitute(c, name, replacement));
      return Expr::call(e.function(), std::move(args));
    }
    default:
      return Expr::binary(e.kind(), substitute(e.children()[0], name, replacement),
                          substitute(e.children()[1], name, replacement));
  }
}

Program::Program(const Expr& e, std::span<const std::string> slots) { emit(e, slots, 1); }

void Program::emit(const Expr& e, std::span<const std::string> slots, std::size_t depth) {
  max_depth_ = std::max(max_depth_, depth);
  const auto kids = e.children();
  for (std::size_t i = 0; i < kids.size(); ++i) emit(kids[i], slots, depth + i);
  Instr in{};
  switch (e.kind()) {
    case Expr::Kind::Number:
      in.op = Op::Const;
      in.literal = e.number_value();
      break;
    case Expr::Kind::Variable: {
      auto it = std::find(slots.begin(), slots.end(), e.variable_name());
      if (it == slots.end()) throw DomainError("unbound variable '" + e.variable_name() + "'");
      in.op = Op::Load;
      in.slot = static_cast<std::size_t>(it - slots.begin());
      break;
    }
    case Expr::Kind::Negate: in.op = Op::Neg; break;
    case Expr::Kind::Add: in.op = Op::Add; break;
    case Expr::Kind::Sub: in.op = Op::Sub; break;
    case Expr::Kind::Mul: in.op = Op::Mul; break;
    case Expr::Kind::Div: in.op = Op::Div; break;
    case Expr::Kind::Pow: in.op = Op::Pow; break;
    case Expr::Kind::Call:
      in.op = Op::Call;
      in.fn = e.function();
      in.arity = static_cast<unsigned>(kids.size());
      break;
  }
  code_.push_back(in);
}

HyperDual Program::run(std::span<const HyperDual> vars) const {
  constexpr std::size_t kInline = 32;
  HyperDual inline_stack[kInline];
  std::vector<HyperDual> heap;
  HyperDual* stack = inline_stack;
  if (max_depth_ > kInline) {
    heap.resize(max_depth_);
    stack = heap.data();
  }
  std::size_t top = 0;
  for (const auto& in : code_) {
    switch (in.op) {
      case Op::Const:
        stack[top++] = HyperDual(in.literal);
        break;
      case Op::Load:
        stack[top++] = vars[in.slot];
        break;
      case Op::Neg:
        stack[top - 1] = -stack[top - 1];
        break;
      case Op::Add:
        --top;
        stack[top - 1] += stack[top];
        break;
      case Op::Sub:
        --top;
        stack[top - 1] -= stack[top];
        break;
      case Op::Mul:
        --top;
        stack[top - 1] = stack[top - 1] * stack[top];
        break;
      case Op::Div:
        --top;
        if (stack[top].value == 0.0) throw DomainError("division by zero");
        stack[top - 1] = stack[top - 1] / stack[top];
        break;
      case Op::Pow:
        --top;
        stack[top - 1] = apply_pow(stack[top - 1], stack[top]);
        break;
      case Op::Call: {
        top -= in.arity;
        stack[top] = apply_call(in.fn, std::span<const HyperDual>(stack + top, in.arity));
        ++top;
        break;
      }
    }
  }
  return stack[0];
}

double Program::run_value(std::span<const double> vars) const {
  std::vector<HyperDual> hd(vars.begin(), vars.end());
  return run(hd).value;
}

bool Program::is_constant() const {
  return std::none_of(code_.begin(), code_.end(), [](const Instr& i) { return i.op == Op::Load; });
}

bool Program::reads(std::size_t slot) const {
  return std::any_of(code_.begin(), code_.end(),
                     [slot](const Instr& i) { return i.op == Op::Load && i.slot == slot; });
}

HyperDual eval_hyperdual(const Expr& e, const Env& env, const Env& dir1, const Env& dir2) {
  const auto names = free_variables(e);
  std::vector<std::string> slots(names.begin(), names.end());
  std::vector<HyperDual> vars;
  vars.reserve(slots.size());
  for (const auto& n : slots) {
    auto it = env.find(n);
    if (it == env.end()) throw DomainError("unbound variable '" + n + "'");
    auto seed = [&](const Env& d) {
      auto jt = d.find(n);
      return jt == d.end() ? 0.0 : jt->second;
    };
    vars.emplace_back(it->second, seed(dir1), seed(dir2), 0.0);
  }
  return Program(e, slots).run(vars);
}

double evaluate(const Expr& e, const Env& env) { return eval_hyperdual(e, env, {}, {}).value; }

}  // namespace nakano
