#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "fraclap/error.hpp"
#include "fraclap/grid.hpp"

namespace fraclap {

/// Compiled scalar expression in x1, x2, x3 (x is an alias of x1) and t.
///
///   expr  := cmp
///   cmp   := sum [('<' | '<=' | '>' | '>=' | '==' | '!=') sum]     (1 or 0)
///   sum   := prod (('+' | '-') prod)*
///   prod  := unary (('*' | '/') unary)*
///   unary := '-' unary | power
///   power := atom ['^' unary]
///   atom  := number | name | name '(' args ')' | '(' expr ')' | '|' expr '|'
///
/// `|x|` is the Euclidean norm of the point; any other `|e|` is abs(e).
/// Functions: tanh sqrt exp log sin cos abs max min chi (chi(e) = e > 0).
class Expression {
 public:
  using Fn = std::function<double(const double* x, double t)>;

  Expression() = default;
  explicit Expression(std::string source) : source_(std::move(source)) {
    Parser p{source_, 0};
    fn_ = p.parse_expr();
    p.skip();
    if (p.pos != source_.size()) p.error("unexpected trailing input");
  }

  const std::string& source() const { return source_; }
  bool empty() const { return !fn_; }

  double operator()(std::span<const double> x, double t = 0.0) const {
    double p[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < x.size() && i < 3; ++i) p[i] = x[i];
    return fn_(p, t);
  }

  PointRule rule() const {
    return [f = fn_](std::span<const double> x) {
      double p[3] = {0.0, 0.0, 0.0};
      for (std::size_t i = 0; i < x.size() && i < 3; ++i) p[i] = x[i];
      return f(p, 0.0);
    };
  }

 private:
  struct Parser {
    const std::string& s;
    std::size_t pos;

    [[noreturn]] void error(const std::string& what) const {
      fail(Errc::config, "expression '" + s + "' at " + std::to_string(pos) + ": " + what);
    }

    void skip() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }

    bool eat(const char* tok) {
      skip();
      const std::size_t n = std::char_traits<char>::length(tok);
      if (s.compare(pos, n, tok) == 0) {
        pos += n;
        return true;
      }
      return false;
    }

    Fn parse_expr() {
      Fn a = parse_sum();
      struct Cmp {
        const char* tok;
        int op;
      };
      // two-character tokens first
      for (Cmp c : {Cmp{"<=", 0}, Cmp{">=", 1}, Cmp{"==", 2}, Cmp{"!=", 3}, Cmp{"<", 4}, Cmp{">", 5}}) {
        if (eat(c.tok)) {
          Fn b = parse_sum();
          return [a, b, op = c.op](const double* x, double t) {
            const double u = a(x, t), v = b(x, t);
            bool r = false;
            switch (op) {
              case 0: r = u <= v; break;
              case 1: r = u >= v; break;
              case 2: r = u == v; break;
              case 3: r = u != v; break;
              case 4: r = u < v; break;
              default: r = u > v; break;
            }
            return r ? 1.0 : 0.0;
          };
        }
      }
      return a;
    }

    Fn parse_sum() {
      Fn a = parse_prod();
      for (;;) {
        if (eat("+")) {
          Fn b = parse_prod();
          a = [a, b](const double* x, double t) { return a(x, t) + b(x, t); };
        } else if (eat("-")) {
          Fn b = parse_prod();
          a = [a, b](const double* x, double t) { return a(x, t) - b(x, t); };
        } else {
          return a;
        }
      }
    }

    Fn parse_prod() {
      Fn a = parse_unary();
      for (;;) {
        if (eat("*")) {
          Fn b = parse_unary();
          a = [a, b](const double* x, double t) { return a(x, t) * b(x, t); };
        } else if (eat("/")) {
          Fn b = parse_unary();
          a = [a, b](const double* x, double t) { return a(x, t) / b(x, t); };
        } else {
          return a;
        }
      }
    }

    Fn parse_unary() {
      if (eat("-")) {
        Fn a = parse_unary();
        return [a](const double* x, double t) { return -a(x, t); };
      }
      if (eat("+")) return parse_unary();
      return parse_power();
    }

    Fn parse_power() {
      Fn a = parse_atom();
      if (eat("^")) {
        Fn b = parse_unary();
        return [a, b](const double* x, double t) { return std::pow(a(x, t), b(x, t)); };
      }
      return a;
    }

    std::string name() {
      skip();
      const std::size_t start = pos;
      while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
      return s.substr(start, pos - start);
    }

    Fn parse_atom() {
      skip();
      if (pos >= s.size()) error("unexpected end");
      const char c = s[pos];
      if (c == '(') {
        ++pos;
        Fn a = parse_expr();
        if (!eat(")")) error("expected ')'");
        return a;
      }
      if (c == '|') {
        ++pos;
        const std::size_t save = pos;
        if (name() == "x" && eat("|")) {
          return [](const double* x, double) { return std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]); };
        }
        pos = save;
        Fn a = parse_expr();
        if (!eat("|")) error("expected closing '|'");
        return [a](const double* x, double t) { return std::abs(a(x, t)); };
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s.substr(pos), &used);
        } catch (const std::exception&) {
          error("bad number");
        }
        pos += used;
        return [v](const double*, double) { return v; };
      }
      const std::string id = name();
      if (id.empty()) error(std::string("unexpected character '") + c + "'");
      if (id == "x" || id == "x1") return [](const double* x, double) { return x[0]; };
      if (id == "x2") return [](const double* x, double) { return x[1]; };
      if (id == "x3") return [](const double* x, double) { return x[2]; };
      if (id == "t") return [](const double*, double t) { return t; };
      if (id == "pi") return [](const double*, double) { return std::numbers::pi; };
      if (!eat("(")) error("unknown name '" + id + "'");
      std::vector<Fn> args{parse_expr()};
      while (eat(",")) args.push_back(parse_expr());
      if (!eat(")")) error("expected ')' after arguments of " + id);
      return call(id, std::move(args));
    }

    Fn call(const std::string& id, std::vector<Fn> args) {
      using Unary = double (*)(double);
      static const std::map<std::string, Unary> unary{
          {"tanh", [](double v) { return std::tanh(v); }}, {"sqrt", [](double v) { return std::sqrt(v); }},
          {"exp", [](double v) { return std::exp(v); }},   {"log", [](double v) { return std::log(v); }},
          {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
          {"abs", [](double v) { return std::abs(v); }},   {"chi", [](double v) { return v > 0.0 ? 1.0 : 0.0; }},
      };
      if (auto it = unary.find(id); it != unary.end()) {
        if (args.size() != 1) error(id + " takes one argument");
        return [f = it->second, a = args[0]](const double* x, double t) { return f(a(x, t)); };
      }
      if (id == "max" || id == "min") {
        if (args.size() < 2) error(id + " takes at least two arguments");
        const bool is_max = id == "max";
        return [args, is_max](const double* x, double t) {
          double v = args[0](x, t);
          for (std::size_t i = 1; i < args.size(); ++i) {
            const double w = args[i](x, t);
            v = is_max ? std::max(v, w) : std::min(v, w);
          }
          return v;
        };
      }
      error("unknown function '" + id + "'");
    }
  };

  std::string source_;
  Fn fn_;
};

/// Named order fields from the experiments, as expression strings.
inline const std::map<std::string, std::string>& order_presets() {
  static const std::map<std::string, std::string> presets{
      {"alpha1", "1 - 0.9*tanh(|x|)"},
      {"alpha2", "1 + 0.9*tanh(|x|)"},
      {"linear_quarter", "1 + |x|/4"},
      {"linear_half", "1 + |x|/2"},
      {"linear_tenth", "1 + |x|/10"},
      {"tanh_half", "1 - 0.5*tanh(|x|)"},
      {"piecewise_x1", "0.4*(x1 <= 0) + 1.2*(x1 > 0)"},
      {"box_1p6_2", "1.6*(max(|x1|, |x2|) <= 0.8) + 2*(max(|x1|, |x2|) > 0.8)"},
      {"g_0p8", "0.8 + 1.2*max(|x1|, |x2|)"},
      {"g_1p2", "1.2 + 0.8*max(|x1|, |x2|)"},
      {"g_1p6", "1.6 + 0.4*max(|x1|, |x2|)"},
      {"two", "2"},
      {"const_1p6", "1.6"},
      {"shifted_quarter", "1.5 + |x|/4"},
      {"bubbles_fast", "1.8 + |x|/8"},
      {"bubbles_slow", "1.5 - 0.2*tanh(|x|)"},
      {"bubbles_tilted", "0.2*tanh(10*(x1 - 0.5)) + 0.2*tanh(10*(x2 - 0.5)) + 1.5"},
      {"coexist_a", "1.5 + |x|/4"},
      {"coexist_b", "0.6 + |x|/2"},
      {"coexist_c", "0.3*tanh(10*x1) + 1.7"},
  };
  return presets;
}

/// A preset name or a literal expression. `alpha3` (0.4 on the open positive
/// orthant, 1.2 elsewhere) depends on the dimension.
inline Expression resolve_order(const std::string& spec, int dim = 1) {
  if (spec == "alpha3") {
    const char* lowest[] = {"x1", "min(x1, x2)", "min(x1, x2, x3)"};
    const std::string m = lowest[std::clamp(dim, 1, 3) - 1];
    return Expression("0.4*(" + m + " > 0) + 1.2*(" + m + " <= 0)");
  }
  const auto& p = order_presets();
  if (auto it = p.find(spec); it != p.end()) return Expression(it->second);
  return Expression(spec);
}

/// Order field from a preset name or expression; bounds come from sampling.
inline OrderField order_from_spec(const std::string& spec, int dim = 1) {
  return order_field(resolve_order(spec, dim).rule(), 0.0, 2.0);
}

struct InitialOptions {
  double kappa = 0.01;          // interface width for two_bubbles
  double bubble_radius = 0.07;  // radius of each bubble
};

/// Initial data presets: gaussian, two_bubbles, one, zero, cosine_bumps_3d,
/// or any expression in x1..x3.
inline PointRule initial_rule(const std::string& spec, InitialOptions opts = {}) {
  if (spec == "gaussian") {
    return [](std::span<const double> x) {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      return std::exp(-r2);
    };
  }
  if (spec == "one") return [](std::span<const double>) { return 1.0; };
  if (spec == "zero") return [](std::span<const double>) { return 0.0; };
  if (spec == "two_bubbles") {
    return [opts](std::span<const double> x) {
      if (x.size() < 2) fail(Errc::config, "two_bubbles needs a 2D grid");
      const double d1 = std::hypot(x[0] - 0.42, x[1] - 0.42) - opts.bubble_radius;
      const double d2 = std::hypot(x[0] - 0.58, x[1] - 0.58) - opts.bubble_radius;
      return 1.0 - std::tanh(d1 / (2.0 * opts.kappa)) - std::tanh(d2 / (2.0 * opts.kappa));
    };
  }
  if (spec == "cosine_bumps_3d") {
    return [](std::span<const double> x) {
      const double nu[3] = {3.0, 11.0, 2.0};
      double v = 1.0;
      for (std::size_t i = 0; i < x.size() && i < 3; ++i) {
        const double c = 1.0 + std::cos(2.0 * std::numbers::pi * nu[i] * x[i] - std::numbers::pi);
        v *= 0.25 * c * c;
      }
      return v;
    };
  }
  return Expression(spec).rule();
}

/// Mask presets: flower (r < 0.6 + 0.2 cos 5 theta), disk (|x| < 0.5), or an
/// expression whose positive values mark inside nodes.
inline PointPredicate mask_predicate(const std::string& spec) {
  if (spec == "flower") {
    return [](std::span<const double> x) {
      const double r = std::hypot(x[0], x.size() > 1 ? x[1] : 0.0);
      const double th = std::atan2(x.size() > 1 ? x[1] : 0.0, x[0]);
      return r < 0.6 + 0.2 * std::cos(5.0 * th);
    };
  }
  if (spec == "disk") {
    return [](std::span<const double> x) {
      double r2 = 0.0;
      for (double v : x) r2 += v * v;
      return r2 < 0.25;
    };
  }
  const Expression e(spec);
  return [e](std::span<const double> x) { return e(x) > 0.0; };
}

}  // namespace fraclap
