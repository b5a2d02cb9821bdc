#pragma once

#include <Eigen/QR>

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "metarule/errors.hpp"
#include "metarule/random.hpp"
#include "metarule/types.hpp"

namespace metarule {

enum class BaseFunction : std::uint8_t {
  Sphere,
  Rastrigin,
  BentCigar,
  Schwefel,
  LunacekBiRastrigin,
  RosenbrockGriewank,
  SimpleComposition2,
  SimpleComposition3,
};

inline constexpr std::array<BaseFunction, 8> kAllBaseFunctions = {
    BaseFunction::Sphere,      BaseFunction::Rastrigin,          BaseFunction::BentCigar,
    BaseFunction::Schwefel,    BaseFunction::LunacekBiRastrigin, BaseFunction::RosenbrockGriewank,
    BaseFunction::SimpleComposition2, BaseFunction::SimpleComposition3};

constexpr std::string_view name_of(BaseFunction f) {
  switch (f) {
    case BaseFunction::Sphere: return "sphere";
    case BaseFunction::Rastrigin: return "rastrigin";
    case BaseFunction::BentCigar: return "bent_cigar";
    case BaseFunction::Schwefel: return "schwefel";
    case BaseFunction::LunacekBiRastrigin: return "lunacek_bi_rastrigin";
    case BaseFunction::RosenbrockGriewank: return "rosenbrock_griewank";
    case BaseFunction::SimpleComposition2: return "composition2";
    case BaseFunction::SimpleComposition3: return "composition3";
  }
  return "?";
}

inline std::optional<BaseFunction> base_from_name(std::string_view s) {
  for (BaseFunction f : kAllBaseFunctions) {
    if (name_of(f) == s) return f;
  }
  return std::nullopt;
}

namespace functions {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline double sphere(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

// Input scaled by 5.12/100 so the [-100, 100] box covers one Rastrigin period range.
inline double rastrigin(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) {
    const double z = 0.0512 * v;
    s += z * z - 10.0 * std::cos(kTwoPi * z) + 10.0;
  }
  return s;
}

inline double bent_cigar(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = x[0] * x[0];
  for (std::size_t i = 1; i < x.size(); ++i) s += 1e6 * x[i] * x[i];
  return s;
}

// Textbook form, minimum near 420.9687 in every coordinate.
inline double schwefel_standard(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * std::sin(std::sqrt(std::abs(v)));
  return 418.9829 * static_cast<double>(x.size()) - s;
}

// Competition-style modified Schwefel: input scaled by 10 and offset by the
// 420.9687 optimum, with a quadratic penalty outside [-500, 500].
inline double schwefel(std::span<const double> x) {
  const double d = static_cast<double>(x.size());
  double s = 0.0;
  for (double v : x) {
    const double z = 10.0 * v + 4.209687462275036e+002;
    if (z > 500.0) {
      const double m = 500.0 - std::fmod(z, 500.0);
      s += m * std::sin(std::sqrt(m)) - (z - 500.0) * (z - 500.0) / (10000.0 * d);
    } else if (z < -500.0) {
      const double m = std::fmod(std::abs(z), 500.0) - 500.0;
      s += m * std::sin(std::sqrt(std::abs(m))) - (z + 500.0) * (z + 500.0) / (10000.0 * d);
    } else {
      s += z * std::sin(std::sqrt(std::abs(z)));
    }
  }
  return 418.9828872724338 * d - s;
}

inline double lunacek_bi_rastrigin(std::span<const double> x) {
  const double d = static_cast<double>(x.size());
  constexpr double mu0 = 2.5;
  constexpr double depth = 1.0;
  const double s = 1.0 - 1.0 / (2.0 * std::sqrt(d + 20.0) - 8.2);
  const double mu1 = -std::sqrt((mu0 * mu0 - depth) / s);
  double sum0 = 0.0;
  double sum1 = 0.0;
  double cosines = 0.0;
  for (double v : x) {
    const double z = 2.0 * 0.1 * v;  // scaled by 10/100, doubled
    const double t = z + mu0;
    sum0 += (t - mu0) * (t - mu0);
    sum1 += (t - mu1) * (t - mu1);
    cosines += std::cos(kTwoPi * z);
  }
  return std::min(sum0, depth * d + s * sum1) + 10.0 * (d - cosines);
}

// Expanded Griewank-of-Rosenbrock over consecutive pairs, wrapping around.
inline double rosenbrock_griewank(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  auto z = [&](std::size_t i) { return 0.05 * x[i] + 1.0; };
  double f = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z(i);
    const double b = z((i + 1) % n);
    const double t1 = a * a - b;
    const double t2 = a - 1.0;
    const double r = 100.0 * t1 * t1 + t2 * t2;
    f += r * r / 4000.0 - std::cos(r) + 1.0;
  }
  return f;
}

// Fixed component offsets for the compositions, alternating sign patterns.
inline double composition_offset(int which, std::size_t i) {
  if (which == 1) return i % 2 == 0 ? 50.0 : -50.0;
  return i % 3 == 0 ? -50.0 : 30.0;
}

struct Component {
  double (*fn)(std::span<const double>);
  int offset;  // 0 = origin, otherwise composition_offset(offset, .)
  double sigma;
  double scale;
  double bias;
};

// Weighted mix of components, weights w_k ~ exp(-|x-o_k|^2 / (2 D sigma_k^2)) / |x-o_k|.
// At a component's own offset only that component contributes.
inline double composition(std::span<const double> x, std::span<const Component> comps) {
  const std::size_t d = x.size();
  std::vector<double> shifted(d);
  double total_w = 0.0;
  double total = 0.0;
  for (const Component& c : comps) {
    double dist2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      shifted[i] = x[i] - (c.offset == 0 ? 0.0 : composition_offset(c.offset, i));
      dist2 += shifted[i] * shifted[i];
    }
    const double value = c.scale * c.fn(shifted) + c.bias;
    if (dist2 == 0.0) return value;
    const double w = std::exp(-dist2 / (2.0 * static_cast<double>(d) * c.sigma * c.sigma)) / std::sqrt(dist2);
    total_w += w;
    total += w * value;
  }
  if (total_w == 0.0) {
    // every weight underflowed: fall back to an unweighted mean
    for (const Component& c : comps) {
      for (std::size_t i = 0; i < d; ++i) shifted[i] = x[i] - (c.offset == 0 ? 0.0 : composition_offset(c.offset, i));
      total += c.scale * c.fn(shifted) + c.bias;
    }
    return total / static_cast<double>(comps.size());
  }
  return total / total_w;
}

inline double composition2(std::span<const double> x) {
  static constexpr std::array<Component, 2> kComps = {{
      {&rastrigin, 0, 10.0, 1.0, 0.0},
      {&bent_cigar, 1, 20.0, 1e-6, 100.0},
  }};
  return composition(x, kComps);
}

inline double composition3(std::span<const double> x) {
  static constexpr std::array<Component, 3> kComps = {{
      {&rosenbrock_griewank, 0, 10.0, 1.0, 0.0},
      {&rastrigin, 1, 20.0, 10.0, 100.0},
      {&schwefel, 2, 30.0, 1.0, 200.0},
  }};
  return composition(x, kComps);
}

}  // namespace functions

// A base function of the suite together with its optimum. Every base has
// its optimizer at the origin.
class BaseHandle {
 public:
  explicit BaseHandle(BaseFunction id) : id_(id) {}

  BaseFunction id() const { return id_; }
  std::string_view name() const { return name_of(id_); }

  double operator()(std::span<const double> x) const {
    switch (id_) {
      case BaseFunction::Sphere: return functions::sphere(x);
      case BaseFunction::Rastrigin: return functions::rastrigin(x);
      case BaseFunction::BentCigar: return functions::bent_cigar(x);
      case BaseFunction::Schwefel: return functions::schwefel(x);
      case BaseFunction::LunacekBiRastrigin: return functions::lunacek_bi_rastrigin(x);
      case BaseFunction::RosenbrockGriewank: return functions::rosenbrock_griewank(x);
      case BaseFunction::SimpleComposition2: return functions::composition2(x);
      case BaseFunction::SimpleComposition3: return functions::composition3(x);
    }
    return 0.0;
  }

  double optimum(int dim) const {
    const std::vector<double> origin(static_cast<std::size_t>(dim), 0.0);
    return (*this)(origin);
  }

 private:
  BaseFunction id_;
};

inline BaseHandle make_base(BaseFunction id) { return BaseHandle(id); }

inline BaseHandle make_base(std::string_view name) {
  auto id = base_from_name(name);
  if (!id) throw ContractError("unknown base function '" + std::string(name) + "'");
  return BaseHandle(*id);
}

// Haar-distributed orthogonal matrix from the QR factorization of a Gaussian
// matrix, with column signs fixed by diag(R).
inline Eigen::MatrixXd random_rotation(int dim, Rng& rng) {
  if (dim < 1) throw ContractError("rotation dimension must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd g(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) g(r, c) = normal(rng);
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd& rm = qr.matrixQR();
  for (int c = 0; c < dim; ++c) {
    if (rm(c, c) < 0.0) q.col(c) *= -1.0;
  }
  return q;
}

// f(x) = base(M^T (x + z)), searched over the box [lower, upper]^D.
struct ProblemInstance {
  BaseFunction base = BaseFunction::Sphere;
  int dim = 0;
  Vector shift;
  Eigen::MatrixXd rotation;
  Bounds bounds;
  double y_opt = 0.0;
  std::uint64_t seed = 0;

  double operator()(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim) throw DimensionError("point dimension does not match the problem");
    Eigen::Map<const RowVector> row(x.data(), dim);
    const RowVector y = (row + shift.transpose()) * rotation;
    return BaseHandle(base)(std::span<const double>(y.data(), static_cast<std::size_t>(dim)));
  }

  double operator()(const RowVector& x) const { return (*this)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size()))); }

  Vector evaluate(const Matrix& xs) const {
    if (xs.cols() != dim) throw DimensionError("population dimension does not match the problem");
    Vector out(xs.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) {
      out[i] = (*this)(std::span<const double>(xs.row(i).data(), static_cast<std::size_t>(dim)));
    }
    return out;
  }

  // Location of the optimum in the search space.
  Vector optimum_position() const { return -shift; }
};

inline double evaluate_problem(const ProblemInstance& p, std::span<const double> x) { return p(x); }
inline Vector evaluate_problem(const ProblemInstance& p, const Matrix& xs) { return p.evaluate(xs); }

// Instance fully determined by (base, dim, seed): shift ~ U[-shift_range, shift_range]^D, random rotation.
inline ProblemInstance make_instance(BaseFunction base, int dim, std::uint64_t seed, Bounds bounds = {},
                                     double shift_range = 80.0, bool transform = true) {
  if (dim < 1) throw ContractError("dimension must be positive");
  ProblemInstance p;
  p.base = base;
  p.dim = dim;
  p.bounds = bounds;
  p.seed = seed;
  if (transform) {
    Rng rng = split_rng({seed, 0x5eedull});
    p.shift = Vector(dim);
    for (int i = 0; i < dim; ++i) p.shift[i] = uniform(rng, -shift_range, shift_range);
    p.rotation = random_rotation(dim, rng);
  } else {
    p.shift = Vector::Zero(dim);
    p.rotation = Eigen::MatrixXd::Identity(dim, dim);
  }
  p.y_opt = BaseHandle(base).optimum(dim);
  return p;
}

// One manifest line per instance: base, seed, dim.
struct ManifestEntry {
  BaseFunction base;
  std::uint64_t seed;
  int dim;
};

inline std::vector<ManifestEntry> generate_manifest(int count, int dim, std::uint64_t seed,
                                                    std::span<const BaseFunction> bases) {
  if (bases.empty()) throw ContractError("empty base function list");
  Rng rng = split_rng({seed, 0x5717e5ull});
  std::vector<ManifestEntry> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const BaseFunction b = bases[uniform_index(rng, bases.size())];
    out.push_back({b, rng(), dim});
  }
  return out;
}

inline void write_manifest(std::ostream& os, std::span<const ManifestEntry> entries) {
  os << "index,base,seed,dim\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    os << i << ',' << name_of(entries[i].base) << ',' << entries[i].seed << ',' << entries[i].dim << '\n';
  }
}

inline std::vector<ManifestEntry> read_manifest(std::istream& is) {
  std::vector<ManifestEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("index", 0) == 0) continue;
    std::stringstream ss(line);
    std::string idx, base, seed, dim;
    if (!std::getline(ss, idx, ',') || !std::getline(ss, base, ',') || !std::getline(ss, seed, ',') ||
        !std::getline(ss, dim)) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": expected index,base,seed,dim");
    }
    auto b = base_from_name(base);
    if (!b) throw ParseError("manifest line " + std::to_string(lineno) + ": unknown base '" + base + "'");
    try {
      out.push_back({*b, std::stoull(seed), std::stoi(dim)});
    } catch (const std::exception&) {
      throw ParseError("manifest line " + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

inline std::vector<ManifestEntry> read_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  return read_manifest(in);
}

inline std::vector<ProblemInstance> instantiate(std::span<const ManifestEntry> entries, Bounds bounds = {}) {
  std::vector<ProblemInstance> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(make_instance(e.base, e.dim, e.seed, bounds));
  return out;
}

}  // namespace metarule
