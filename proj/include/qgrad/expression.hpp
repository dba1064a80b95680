#pragma once

// Tiny arithmetic language for coefficient fields.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'x' | 'y' | 'pi' | name '(' expr (',' expr)* ')' | '(' expr ')'
//
// Functions: exp log sin cos sqrt abs min max pos
//            ind(v, a, b)          1 if a <= v <= b else 0
//            box(x0, x1, y0, y1)   1 on the closed box, else 0
//            bump(t)               (1 - t^2)^2 for |t| < 1, else 0

#include "qgrad/common.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

namespace qgrad {

class Expression {
 public:
  Expression() = default;

  static Expression parse(const std::string& text) {
    Parser p{text, 0};
    Expression e;
    e.text_ = text;
    e.root_ = p.expr();
    p.skip();
    if (p.pos != text.size()) p.fail("unexpected trailing input");
    return e;
  }

  static Expression constant(double v) {
    Expression e;
    e.text_ = format_number(v);
    e.root_ = std::make_shared<Node>(Node{Op::Number, v, {}});
    return e;
  }

  double operator()(const Point& p) const { return root_ ? eval(*root_, p) : 0.0; }
  const std::string& text() const { return text_; }

 private:
  enum class Op { Number, VarX, VarY, Neg, Add, Sub, Mul, Div, Pow, Call };

  struct Node {
    Op op;
    double value = 0.0;
    std::vector<std::shared_ptr<Node>> args;
    std::string name;
  };
  using NodePtr = std::shared_ptr<Node>;

  static std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }

  struct Parser {
    const std::string& s;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& msg) const {
      throw ConfigError("expression '" + s + "': " + msg + " at column " + std::to_string(pos + 1));
    }
    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    NodePtr make(Op op, std::vector<NodePtr> args) { return std::make_shared<Node>(Node{op, 0.0, std::move(args), {}}); }

    NodePtr expr() {
      NodePtr lhs = term();
      for (;;) {
        if (accept('+'))
          lhs = make(Op::Add, {lhs, term()});
        else if (accept('-'))
          lhs = make(Op::Sub, {lhs, term()});
        else
          return lhs;
      }
    }
    NodePtr term() {
      NodePtr lhs = unary();
      for (;;) {
        if (accept('*'))
          lhs = make(Op::Mul, {lhs, unary()});
        else if (accept('/'))
          lhs = make(Op::Div, {lhs, unary()});
        else
          return lhs;
      }
    }
    NodePtr unary() {
      if (accept('-')) return make(Op::Neg, {unary()});
      if (accept('+')) return unary();
      return power();
    }
    NodePtr power() {
      NodePtr base = primary();
      if (accept('^')) return make(Op::Pow, {base, unary()});
      return base;
    }
    NodePtr primary() {
      skip();
      if (pos >= s.size()) fail("unexpected end of input");
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        NodePtr e = expr();
        if (!accept(')')) fail("expected ')'");
        return e;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s.substr(pos), &used);
        } catch (const std::exception&) {
          fail("bad number");
        }
        pos += used;
        return std::make_shared<Node>(Node{Op::Number, v, {}, {}});
      }
      if (std::isalpha(static_cast<unsigned char>(c))) {
        const std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
        const std::string name = s.substr(start, pos - start);
        if (name == "x") return make(Op::VarX, {});
        if (name == "y") return make(Op::VarY, {});
        if (name == "pi") return std::make_shared<Node>(Node{Op::Number, std::numbers::pi, {}, {}});
        if (!accept('(')) fail("unknown identifier '" + name + "'");
        std::vector<NodePtr> args{expr()};
        while (accept(',')) args.push_back(expr());
        if (!accept(')')) fail("expected ')' after arguments of " + name);
        check_arity(name, args.size());
        auto n = make(Op::Call, std::move(args));
        n->name = name;
        return n;
      }
      fail(std::string("unexpected character '") + c + "'");
    }
    void check_arity(const std::string& name, std::size_t n) const {
      static const std::vector<std::pair<std::string, std::size_t>> table = {
          {"exp", 1}, {"log", 1}, {"sin", 1}, {"cos", 1}, {"sqrt", 1}, {"abs", 1}, {"pos", 1},
          {"bump", 1}, {"min", 2}, {"max", 2}, {"ind", 3}, {"box", 4}};
      for (const auto& [fname, arity] : table) {
        if (fname == name) {
          if (arity != n) fail("function " + name + " expects " + std::to_string(arity) + " arguments");
          return;
        }
      }
      fail("unknown function '" + name + "'");
    }
  };

  static double eval(const Node& n, const Point& p) {
    switch (n.op) {
      case Op::Number:
        return n.value;
      case Op::VarX:
        return p.x;
      case Op::VarY:
        return p.y;
      case Op::Neg:
        return -eval(*n.args[0], p);
      case Op::Add:
        return eval(*n.args[0], p) + eval(*n.args[1], p);
      case Op::Sub:
        return eval(*n.args[0], p) - eval(*n.args[1], p);
      case Op::Mul:
        return eval(*n.args[0], p) * eval(*n.args[1], p);
      case Op::Div:
        return eval(*n.args[0], p) / eval(*n.args[1], p);
      case Op::Pow:
        return std::pow(eval(*n.args[0], p), eval(*n.args[1], p));
      case Op::Call:
        return call(n, p);
    }
    return 0.0;
  }

  static double call(const Node& n, const Point& p) {
    auto a = [&](std::size_t i) { return eval(*n.args[i], p); };
    const std::string& f = n.name;
    if (f == "exp") return std::exp(a(0));
    if (f == "log") return std::log(a(0));
    if (f == "sin") return std::sin(a(0));
    if (f == "cos") return std::cos(a(0));
    if (f == "sqrt") return std::sqrt(a(0));
    if (f == "abs") return std::abs(a(0));
    if (f == "pos") return positive_part(a(0));
    if (f == "min") return std::min(a(0), a(1));
    if (f == "max") return std::max(a(0), a(1));
    if (f == "bump") {
      const double t = a(0);
      return std::abs(t) < 1.0 ? (1.0 - t * t) * (1.0 - t * t) : 0.0;
    }
    if (f == "ind") {
      const double v = a(0);
      return (v >= a(1) && v <= a(2)) ? 1.0 : 0.0;
    }
    if (f == "box") return (p.x >= a(0) && p.x <= a(1) && p.y >= a(2) && p.y <= a(3)) ? 1.0 : 0.0;
    return 0.0;
  }

  std::string text_;
  NodePtr root_;
};

}  // namespace qgrad
