#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nakano/hyperdual.hpp"

namespace nakano {

/// Immutable scalar expression tree. Cheap to copy; subtrees are shared.
class Expr {
 public:
  enum class Kind { Number, Variable, Negate, Add, Sub, Mul, Div, Pow, Call };
  enum class Function { Exp, Log, Sin, Cos, Sqrt, Abs2 };

  static Expr number(double v);
  static Expr variable(std::string name);
  static Expr negate(Expr operand);
  static Expr binary(Kind op, Expr lhs, Expr rhs);
  static Expr call(Function fn, std::vector<Expr> args);

  Kind kind() const;
  double number_value() const;
  const std::string& variable_name() const;
  Function function() const;
  std::span<const Expr> children() const;

  /// Fully parenthesized text that parses back to an identical tree.
  std::string to_string() const;

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

const char* function_name(Expr::Function fn);

/// Parses the expression grammar. Precedence, high to low: `^` (right
/// associative), unary minus, `*` `/`, `+` `-`. Throws ParseError.
Expr parse(std::string_view text);

std::set<std::string> free_variables(const Expr& e);

/// Replaces every occurrence of the variable `name`.
Expr substitute(const Expr& e, std::string_view name, const Expr& replacement);

using Env = std::map<std::string, double, std::less<>>;

/// Value, derivatives along dir1 and dir2, and the mixed second derivative.
/// Variables missing from a direction map have zero seed. Throws DomainError.
HyperDual eval_hyperdual(const Expr& e, const Env& env, const Env& dir1, const Env& dir2);

double evaluate(const Expr& e, const Env& env);

/// An expression compiled to a postfix program with variables bound to slots.
/// Immutable and safe to run concurrently.
class Program {
 public:
  Program() = default;
  /// Throws DomainError if the expression references a name not in `slots`.
  Program(const Expr& e, std::span<const std::string> slots);

  HyperDual run(std::span<const HyperDual> vars) const;
  double run_value(std::span<const double> vars) const;

  /// True when the program reads no variables.
  bool is_constant() const;
  /// True when the program reads slot `i`.
  bool reads(std::size_t slot) const;

 private:
  enum class Op : unsigned char { Const, Load, Neg, Add, Sub, Mul, Div, Pow, Call };
  struct Instr {
    Op op;
    Expr::Function fn = Expr::Function::Exp;
    unsigned arity = 0;
    std::size_t slot = 0;
    double literal = 0.0;
  };
  void emit(const Expr& e, std::span<const std::string> slots, std::size_t depth);

  std::vector<Instr> code_;
  std::size_t max_depth_ = 0;
};

}  // namespace nakano
