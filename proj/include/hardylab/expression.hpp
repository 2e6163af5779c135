#pragma once

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "hardylab/error.hpp"
#include "hardylab/geometry.hpp"

namespace hardylab {

/// Arithmetic field expression over the variables x, y, r.
///
///   expr    := sum [ ("<" | "<=" | ">" | ">=" | "==" | "!=") sum ]
///   sum     := product { ("+" | "-") product }
///   product := unary { ("*" | "/") unary }
///   unary   := ("-" | "+") unary | power
///   power   := atom [ "^" unary ]
///   atom    := number | name | name "(" expr { "," expr } ")" | "(" expr ")" | "|" expr "|"
///
/// Names are the variables x, y, r, the constants pi and e, and any
/// constant bound at parse time (p, N). Comparisons yield 1 or 0.
class Expression {
 public:
  Expression() = default;

  static Expression parse(const std::string& text, const std::map<std::string, double>& constants = {}) {
    Parser ps{text, constants, 0};
    Expression out;
    out.text_ = text;
    out.root_ = ps.comparison();
    ps.skip();
    if (ps.pos != text.size()) ps.fail("unexpected '" + std::string(1, text[ps.pos]) + "'");
    return out;
  }

  double operator()(double x, double y, double r) const {
    if (!root_) throw UsageError("expression: empty");
    return root_->eval(x, y, r);
  }

  /// Evaluates at a grid point. In radial geometries x is the radius.
  double at(const Geometry& geo, const Point& pt) const {
    if (geo.kind() == GeometryKind::radial) return (*this)(pt.x, 0.0, pt.x);
    if (geo.is_2d()) return (*this)(pt.x, pt.y, std::hypot(pt.x, pt.y));
    return (*this)(pt.x, 0.0, std::abs(pt.x));
  }

  const std::string& text() const { return text_; }

 private:
  struct Node {
    enum Kind { number, var_x, var_y, var_r, neg, add, sub, mul, div, pow, lt, le, gt, ge, eq, ne, call };
    Kind kind = number;
    double value = 0.0;
    std::string fn;
    std::vector<std::unique_ptr<Node>> args;

    double eval(double x, double y, double r) const {
      switch (kind) {
        case number: return value;
        case var_x: return x;
        case var_y: return y;
        case var_r: return r;
        case neg: return -args[0]->eval(x, y, r);
        default: break;
      }
      if (kind == call) return apply(x, y, r);
      const double a = args[0]->eval(x, y, r), b = args[1]->eval(x, y, r);
      switch (kind) {
        case add: return a + b;
        case sub: return a - b;
        case mul: return a * b;
        case div: return a / b;
        case pow: return std::pow(a, b);
        case lt: return a < b;
        case le: return a <= b;
        case gt: return a > b;
        case ge: return a >= b;
        case eq: return a == b;
        case ne: return a != b;
        default: return 0.0;
      }
    }

    double apply(double x, double y, double r) const {
      const double a = args[0]->eval(x, y, r);
      if (fn == "abs") return std::abs(a);
      if (fn == "sqrt") return std::sqrt(a);
      if (fn == "exp") return std::exp(a);
      if (fn == "log" || fn == "ln") return std::log(a);
      if (fn == "sin") return std::sin(a);
      if (fn == "cos") return std::cos(a);
      const double b = args[1]->eval(x, y, r);
      if (fn == "min") return std::min(a, b);
      if (fn == "max") return std::max(a, b);
      return std::pow(a, b);
    }
  };
  using NodePtr = std::unique_ptr<Node>;

  struct Parser {
    const std::string& s;
    const std::map<std::string, double>& constants;
    std::size_t pos;

    [[noreturn]] void fail(const std::string& what) const {
      throw ConfigError("expression '" + s + "': " + what + " at column " + std::to_string(pos + 1));
    }

    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool accept(const char* tok) {
      skip();
      const std::size_t n = std::char_traits<char>::length(tok);
      if (s.compare(pos, n, tok) != 0) return false;
      pos += n;
      return true;
    }

    void expect(const char* tok) {
      if (!accept(tok)) fail(std::string("expected '") + tok + "'");
    }

    static NodePtr leaf(Node::Kind k, double v = 0.0) {
      auto n = std::make_unique<Node>();
      n->kind = k;
      n->value = v;
      return n;
    }

    static NodePtr binary(Node::Kind k, NodePtr a, NodePtr b) {
      auto n = leaf(k);
      n->args.push_back(std::move(a));
      n->args.push_back(std::move(b));
      return n;
    }

    NodePtr comparison() {
      NodePtr lhs = sum();
      static const std::pair<const char*, Node::Kind> ops[] = {{"<=", Node::le}, {">=", Node::ge}, {"==", Node::eq},
                                                               {"!=", Node::ne}, {"<", Node::lt},  {">", Node::gt}};
      for (const auto& [tok, kind] : ops)
        if (accept(tok)) return binary(kind, std::move(lhs), sum());
      return lhs;
    }

    NodePtr sum() {
      NodePtr lhs = product();
      for (;;) {
        if (accept("+")) lhs = binary(Node::add, std::move(lhs), product());
        else if (accept("-")) lhs = binary(Node::sub, std::move(lhs), product());
        else return lhs;
      }
    }

    NodePtr product() {
      NodePtr lhs = unary();
      for (;;) {
        if (accept("*")) lhs = binary(Node::mul, std::move(lhs), unary());
        else if (accept("/")) lhs = binary(Node::div, std::move(lhs), unary());
        else return lhs;
      }
    }

    NodePtr unary() {
      if (accept("-")) {
        auto n = leaf(Node::neg);
        n->args.push_back(unary());
        return n;
      }
      if (accept("+")) return unary();
      NodePtr base = atom();
      if (accept("^")) return binary(Node::pow, std::move(base), unary());
      return base;
    }

    NodePtr atom() {
      skip();
      if (pos >= s.size()) fail("unexpected end of input");
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        NodePtr inner = comparison();
        expect(")");
        return inner;
      }
      if (c == '|') {
        ++pos;
        auto n = leaf(Node::call);
        n->fn = "abs";
        n->args.push_back(comparison());
        expect("|");
        return n;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return name();
      fail("unexpected '" + std::string(1, c) + "'");
    }

    NodePtr number() {
      const char* begin = s.c_str() + pos;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos += static_cast<std::size_t>(end - begin);
      return leaf(Node::number, v);
    }

    NodePtr name() {
      const std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      const std::string id = s.substr(start, pos - start);
      skip();
      if (pos < s.size() && s[pos] == '(') {
        ++pos;
        static const std::map<std::string, int> arity = {{"abs", 1}, {"sqrt", 1}, {"exp", 1}, {"log", 1},
                                                         {"ln", 1},  {"sin", 1},  {"cos", 1}, {"min", 2},
                                                         {"max", 2}, {"pow", 2}};
        const auto it = arity.find(id);
        if (it == arity.end()) fail("unknown function '" + id + "'");
        auto n = leaf(Node::call);
        n->fn = id;
        n->args.push_back(comparison());
        while (accept(",")) n->args.push_back(comparison());
        expect(")");
        if (static_cast<int>(n->args.size()) != it->second)
          fail(id + " takes " + std::to_string(it->second) + " argument(s)");
        return n;
      }
      if (id == "x") return leaf(Node::var_x);
      if (id == "y") return leaf(Node::var_y);
      if (id == "r") return leaf(Node::var_r);
      if (const auto it = constants.find(id); it != constants.end()) return leaf(Node::number, it->second);
      if (id == "pi") return leaf(Node::number, std::numbers::pi);
      if (id == "e") return leaf(Node::number, std::numbers::e);
      pos = start;
      fail("unknown name '" + id + "'");
    }
  };

  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace hardylab
