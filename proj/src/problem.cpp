#include "splap/problem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace splap {

ReactionSpec ReactionSpec::constant(double c) {
  ReactionSpec r;
  r.kind = Kind::constant;
  r.a = c;
  return r;
}

ReactionSpec ReactionSpec::power(double a, double q) {
  ReactionSpec r;
  r.kind = Kind::power;
  r.a = a;
  r.q = q;
  return r;
}

ReactionSpec ReactionSpec::saturating(double a) {
  ReactionSpec r;
  r.kind = Kind::saturating;
  r.a = a;
  return r;
}

ReactionSpec ReactionSpec::table(std::vector<double> t, std::vector<double> f) {
  if (t.size() != f.size() || t.empty()) throw InvalidArgument("reaction table needs matching knots");
  if (t.front() != 0.0) throw InvalidArgument("reaction table must start at t = 0");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw InvalidArgument("reaction table knots must increase");
  ReactionSpec r;
  r.kind = Kind::table;
  r.t = std::move(t);
  r.f = std::move(f);
  return r;
}

namespace {

std::vector<double> split_numbers(const std::string& s, char sep) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (item.empty()) continue;
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size() && item.find_first_not_of(" \t", used) != std::string::npos)
      throw InvalidArgument("bad number in reaction: " + item);
    out.push_back(v);
  }
  return out;
}

}  // namespace

ReactionSpec ReactionSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (kind == "none") return none();
    if (kind == "constant") {
      auto v = split_numbers(args, ',');
      if (v.size() != 1) throw InvalidArgument("constant reaction takes one value");
      return constant(v[0]);
    }
    if (kind == "power") {
      auto v = split_numbers(args, ',');
      if (v.size() != 2) throw InvalidArgument("power reaction takes a,q");
      return power(v[0], v[1]);
    }
    if (kind == "saturating") {
      auto v = split_numbers(args, ',');
      if (v.size() != 1) throw InvalidArgument("saturating reaction takes one value");
      return saturating(v[0]);
    }
    if (kind == "table") {
      std::vector<double> t, f;
      std::stringstream ss(args);
      std::string pair;
      while (std::getline(ss, pair, ';')) {
        auto v = split_numbers(pair, ',');
        if (v.size() != 2) throw InvalidArgument("table entries are t,f");
        t.push_back(v[0]);
        f.push_back(v[1]);
      }
      return table(std::move(t), std::move(f));
    }
  } catch (const std::invalid_argument& e) {
    throw InvalidArgument(std::string("reaction '") + text + "': " + e.what());
  }
  throw InvalidArgument("unknown reaction kind: " + kind);
}

std::string ReactionSpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  switch (kind) {
    case Kind::none: return "none";
    case Kind::constant: os << "constant:" << a; break;
    case Kind::power: os << "power:" << a << "," << q; break;
    case Kind::saturating: os << "saturating:" << a; break;
    case Kind::table:
      os << "table:";
      for (std::size_t i = 0; i < t.size(); ++i) os << (i ? ";" : "") << t[i] << "," << f[i];
      break;
  }
  return os.str();
}

double ReactionSpec::value(double u) const {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::constant: return a;
    case Kind::power: return a * std::pow(std::max(u, 0.0), q);
    case Kind::saturating: return a / (1.0 + std::max(u, 0.0));
    case Kind::table: {
      if (u <= 0.0) return f.front();
      if (u >= t.back()) return f.back();
      const auto it = std::upper_bound(t.begin(), t.end(), u);
      const std::size_t i = static_cast<std::size_t>(it - t.begin()) - 1;
      const double s = (u - t[i]) / (t[i + 1] - t[i]);
      return f[i] + s * (f[i + 1] - f[i]);
    }
  }
  return 0.0;
}

double ReactionSpec::primitive(double u) const {
  u = std::max(u, 0.0);
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::constant: return a * u;
    case Kind::power: return a * std::pow(u, q + 1.0) / (q + 1.0);
    case Kind::saturating: return a * std::log1p(u);
    case Kind::table: {
      double acc = 0.0;
      for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (u <= t[i]) return acc;
        const double hi = std::min(u, t[i + 1]);
        acc += 0.5 * (value(t[i]) + value(hi)) * (hi - t[i]);
      }
      if (u > t.back()) acc += f.back() * (u - t.back());
      return acc;
    }
  }
  return 0.0;
}

double ReactionSpec::lipschitz(double lo, double hi) const {
  lo = std::max(lo, 0.0);
  hi = std::max(hi, lo);
  switch (kind) {
    case Kind::none:
    case Kind::constant: return 0.0;
    case Kind::power: {
      if (q == 0.0) return 0.0;
      if (q < 1.0) {
        if (lo == 0.0) return std::numeric_limits<double>::infinity();
        return std::abs(a) * q * std::pow(lo, q - 1.0);
      }
      return std::abs(a) * q * std::pow(hi, q - 1.0);
    }
    case Kind::saturating: return std::abs(a) / ((1.0 + lo) * (1.0 + lo));
    case Kind::table: {
      double L = 0.0;
      for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (t[i + 1] < lo || t[i] > hi) continue;
        L = std::max(L, std::abs(f[i + 1] - f[i]) / (t[i + 1] - t[i]));
      }
      return L;
    }
  }
  return 0.0;
}

double ReactionSpec::lower_bound() const {
  switch (kind) {
    case Kind::none: return 0.0;
    case Kind::constant: return std::max(0.0, -a);
    case Kind::power:
      if (a >= 0.0) return 0.0;
      if (q > 0.0) return std::numeric_limits<double>::infinity();
      return -a;
    case Kind::saturating: return std::max(0.0, -a);
    case Kind::table: return std::max(0.0, -*std::min_element(f.begin(), f.end()));
  }
  return 0.0;
}

double ReactionSpec::alpha(double p) const {
  switch (kind) {
    case Kind::power:
      if (q < p - 1.0) return 0.0;
      if (q == p - 1.0) return a;
      return a > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    default: return 0.0;
  }
}

std::pair<double, double> ReactionSpec::growth_bound(double p) const {
  switch (kind) {
    case Kind::none: return {0.0, 0.0};
    case Kind::constant: return {0.0, std::max(0.0, a)};
    case Kind::saturating: return {0.0, std::max(0.0, a)};
    case Kind::table: return {0.0, std::max(0.0, *std::max_element(f.begin(), f.end()))};
    case Kind::power: {
      if (a <= 0.0) return {0.0, 0.0};
      if (q == 0.0) return {0.0, a};
      if (q >= p - 1.0) return {q == p - 1.0 ? a : std::numeric_limits<double>::infinity(), 0.0};
      // a t^q <= ell t^{p-1} + L with ell = a / 1000; L = max_t (a t^q - ell t^{p-1}).
      const double ell = 1e-3 * a;
      const double r = p - 1.0;
      const double tstar = std::pow(a * q / (ell * r), 1.0 / (r - q));
      return {ell, a * std::pow(tstar, q) - ell * std::pow(tstar, r)};
    }
  }
  return {0.0, 0.0};
}

bool ReactionSpec::ratio_nonincreasing(double p) const {
  switch (kind) {
    case Kind::none: return true;
    case Kind::constant: return a >= 0.0;
    case Kind::power: return a >= 0.0 ? q <= p - 1.0 : q >= p - 1.0;
    case Kind::saturating: return a >= 0.0;
    case Kind::table: {
      // f(t)/t^{p-1} on each segment and on the constant tail
      if (f.back() < 0.0) return false;
      const int sub = 64;
      double prev = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        for (int s = (i == 0 ? 1 : 0); s <= sub; ++s) {
          const double x = t[i] + (t[i + 1] - t[i]) * s / sub;
          const double r = value(x) / std::pow(x, p - 1.0);
          if (r > prev * (1.0 + 1e-12) + 1e-300) return false;
          prev = r;
        }
      }
      return true;
    }
  }
  return false;
}

GridFunction ReactionSpec::apply(const GridFunction& u) const {
  GridFunction out(u.grid_ptr(), 0.0, false);
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = value(u[k]);
  return out;
}

GridFunction ReactionSpec::apply_primitive(const GridFunction& u) const {
  GridFunction out(u.grid_ptr(), 0.0, false);
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = primitive(u[k]);
  return out;
}

void ProblemParams::validate() const {
  if (!(p > 1.0) || !std::isfinite(p)) throw InvalidArgument("p must exceed 1");
  if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidArgument("delta must be positive");
  if (reaction.kind == ReactionSpec::Kind::power && (reaction.q < 0.0 || reaction.q > p - 1.0))
    throw InvalidArgument("power reaction exponent must lie in [0, p-1]");
  if (!std::isfinite(reaction.lower_bound()))
    throw InvalidArgument("reaction must be bounded below on [0, inf)");
}

void ProblemParams::check_sublinear(double lambda1) const {
  if (!(reaction.alpha(p) < lambda1))
    throw InvalidArgument("reaction growth alpha_f must stay below the first eigenvalue");
}

}  // namespace splap
