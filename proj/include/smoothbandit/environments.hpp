#pragma once

// Synthetic bandit instances: smooth parametric families, the hard-instance
// family used for lower bounds, the oracle, and assumption validators.

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smoothbandit/errors.hpp"
#include "smoothbandit/geometry.hpp"
#include "smoothbandit/localpoly.hpp"
#include "smoothbandit/random.hpp"

namespace smoothbandit {

// Two-arm convention: arm index 0 is "+1", arm index 1 is "-1".
inline constexpr std::size_t kArmPlus = 0;
inline constexpr std::size_t kArmMinus = 1;

inline int arm_sign(std::size_t arm) { return arm == kArmPlus ? +1 : -1; }

// Declared assumption parameters. NaN means "not declared".
struct InstanceMetadata {
  double beta = std::numeric_limits<double>::quiet_NaN();
  double L = std::numeric_limits<double>::quiet_NaN();
  double L1 = std::numeric_limits<double>::quiet_NaN();
  double alpha = std::numeric_limits<double>::quiet_NaN();
  double gamma = std::numeric_limits<double>::quiet_NaN();
  double c0 = std::numeric_limits<double>::quiet_NaN();
  double r0 = std::numeric_limits<double>::quiet_NaN();
  double mu_min = std::numeric_limits<double>::quiet_NaN();
  double mu_max = std::numeric_limits<double>::quiet_NaN();
  // True when the values are computed from the construction rather than stated
  // as part of the family's definition.
  bool derived = false;
};

// Value and first two derivatives of a mean-reward function at a point.
struct MeanJet {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

class Instance {
 public:
  virtual ~Instance() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::size_t arm_count() const = 0;
  virtual double mean(std::span<const double> x, std::size_t arm) const = 0;
  virtual void sample_context(Rng& rng, std::span<double> out) const = 0;

  // Empty predicate: the support is all of [0,1]^d.
  virtual SupportPredicate support() const { return {}; }

  bool in_support(std::span<const double> x) const {
    if (!in_unit_cube(x)) return false;
    const SupportPredicate s = support();
    return !s || s(x);
  }

  virtual bool has_derivatives() const { return false; }

  // Derivatives through second order; only defined when has_derivatives().
  virtual MeanJet jet(std::span<const double> /*x*/, std::size_t /*arm*/) const {
    throw UnsupportedError(name() + " does not expose analytic derivatives");
  }

  const InstanceMetadata& metadata() const { return meta_; }

  // Bernoulli(eta_a(x)).
  double sample_reward(std::span<const double> x, std::size_t arm, Rng& rng) const {
    return rng.bernoulli(mean(x, arm)) ? 1.0 : 0.0;
  }

 protected:
  InstanceMetadata meta_;
};

// Argmax of the means; ties go to the smallest arm index (which is +1 for two arms).
inline std::size_t oracle_arm(const Instance& inst, std::span<const double> x) {
  std::size_t best = 0;
  double best_mean = inst.mean(x, 0);
  for (std::size_t a = 1; a < inst.arm_count(); ++a) {
    const double m = inst.mean(x, a);
    if (m > best_mean) {
      best = a;
      best_mean = m;
    }
  }
  return best;
}

inline double cate(const Instance& inst, std::span<const double> x) {
  return inst.mean(x, kArmPlus) - inst.mean(x, kArmMinus);
}

// Certified bound L on the order-floor(beta) Taylor remainder from bounds on the
// operator norms of derivative tensors: sup_norm[j] bounds ||D^j eta||, j = 0..l+1.
inline double taylor_remainder_constant(double beta, std::span<const double> sup_norm) {
  const std::size_t l = holder_degree(beta);
  if (sup_norm.size() < l + 2) throw ContractError("need derivative bounds through order floor(beta)+1");
  const double s = beta - static_cast<double>(l);
  const double lfact = std::tgamma(static_cast<double>(l) + 1.0);
  if (s >= 1.0) return sup_norm[l + 1] / (lfact * static_cast<double>(l + 1));
  const double holder = std::pow(sup_norm[l + 1], s) * std::pow(2.0 * sup_norm[l], 1.0 - s);
  return holder / lfact;
}

// ---------------------------------------------------------------------------
// Parametric families

class ConstantMeansInstance final : public Instance {
 public:
  ConstantMeansInstance(std::size_t dim, std::vector<double> means) : dim_(dim), means_(std::move(means)) {
    if (dim == 0) throw ConstructionError("dimension must be positive");
    if (means_.size() < 2) throw ConstructionError("need at least two arms");
    for (double m : means_) {
      if (!(m >= 0.0 && m <= 1.0)) throw ConstructionError("arm means must lie in [0,1]");
    }
    meta_.beta = 2.0;
    meta_.L = 0.0;
    meta_.L1 = 0.0;
    meta_.mu_min = meta_.mu_max = 1.0;
    meta_.c0 = std::pow(2.0, -static_cast<double>(dim));
    meta_.r0 = 1.0;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < means_.size(); ++a) {
      for (std::size_t b = a + 1; b < means_.size(); ++b) {
        const double g = std::abs(means_[a] - means_[b]);
        if (g > 0.0) gap = std::min(gap, g);
      }
    }
    meta_.alpha = 1.0;
    meta_.gamma = std::isfinite(gap) ? 1.0 / gap : 1.0;
  }

  std::string name() const override { return "constant-means"; }
  std::size_t dim() const override { return dim_; }
  std::size_t arm_count() const override { return means_.size(); }
  double mean(std::span<const double>, std::size_t arm) const override { return means_.at(arm); }
  void sample_context(Rng& rng, std::span<double> out) const override {
    for (double& v : out) v = rng.uniform();
  }
  bool has_derivatives() const override { return true; }
  MeanJet jet(std::span<const double>, std::size_t arm) const override {
    return {means_.at(arm), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_)),
            Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_))};
  }

 private:
  std::size_t dim_;
  std::vector<double> means_;
};

// eta_{+1} = 1/2 + gap/2, eta_{-1} = 1/2 - gap/2.
inline std::unique_ptr<Instance> make_constant_gap(std::size_t dim, double gap) {
  if (!(std::abs(gap) <= 1.0)) throw ConstructionError("constant gap must lie in [-1,1]");
  return std::make_unique<ConstantMeansInstance>(dim, std::vector<double>{0.5 + gap / 2.0, 0.5 - gap / 2.0});
}

// Both arms share a context-dependent term: eta_{+/-1}(x) = 1/2 +/- s(x)/2 with
// s(x) = amplitude * shape(x), so tau(x) = s(x).
class SymmetricShapeInstance : public Instance {
 public:
  std::size_t dim() const override { return dim_; }
  std::size_t arm_count() const override { return 2; }
  double mean(std::span<const double> x, std::size_t arm) const override {
    const double s = shape(x);
    return arm == kArmPlus ? 0.5 + s / 2.0 : 0.5 - s / 2.0;
  }
  void sample_context(Rng& rng, std::span<double> out) const override {
    for (double& v : out) v = rng.uniform();
  }
  bool has_derivatives() const override { return true; }
  MeanJet jet(std::span<const double> x, std::size_t arm) const override {
    MeanJet j = shape_jet(x);
    const double sign = arm == kArmPlus ? 0.5 : -0.5;
    j.value = 0.5 + sign * j.value;
    j.gradient *= sign;
    j.hessian *= sign;
    return j;
  }

 protected:
  explicit SymmetricShapeInstance(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ConstructionError("dimension must be positive");
  }
  virtual double shape(std::span<const double> x) const = 0;
  virtual MeanJet shape_jet(std::span<const double> x) const = 0;

  std::size_t dim_;
};

// tau(x) = A sin(2 pi f x_1).
class SinusoidalInstance final : public SymmetricShapeInstance {
 public:
  SinusoidalInstance(std::size_t dim, double frequency, double amplitude, double beta = 2.0)
      : SymmetricShapeInstance(dim), freq_(frequency), amp_(amplitude) {
    if (!(amplitude > 0.0 && amplitude <= 1.0)) throw ConstructionError("sinusoidal amplitude must lie in (0,1]");
    if (!(frequency > 0.0)) throw ConstructionError("sinusoidal frequency must be positive");
    if (!(beta >= 1.0)) throw ConstructionError("declared smoothness must be at least 1");
    const double w = 2.0 * M_PI * freq_;
    std::vector<double> bounds;
    for (std::size_t j = 0; j <= holder_degree(beta) + 1; ++j) {
      bounds.push_back(j == 0 ? 1.0 : amp_ / 2.0 * std::pow(w, static_cast<double>(j)));
    }
    meta_.beta = beta;
    meta_.L = taylor_remainder_constant(beta, bounds);
    meta_.L1 = amp_ / 2.0 * w;
    meta_.alpha = 1.0;
    // P(|A sin(2 pi f U)| <= t) = (2/pi) asin(t/A) <= t/A for integer f.
    meta_.gamma = 1.0 / amp_;
    meta_.mu_min = meta_.mu_max = 1.0;
    meta_.c0 = std::pow(2.0, -static_cast<double>(dim));
    meta_.r0 = 1.0 / (2.0 * freq_);
  }

  std::string name() const override { return "sinusoidal"; }
  double frequency() const { return freq_; }
  double amplitude() const { return amp_; }

 protected:
  double shape(std::span<const double> x) const override { return amp_ * std::sin(2.0 * M_PI * freq_ * x[0]); }
  MeanJet shape_jet(std::span<const double> x) const override {
    const auto d = static_cast<Eigen::Index>(dim_);
    const double w = 2.0 * M_PI * freq_;
    MeanJet j{amp_ * std::sin(w * x[0]), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
    j.gradient[0] = amp_ * w * std::cos(w * x[0]);
    j.hessian(0, 0) = -amp_ * w * w * std::sin(w * x[0]);
    return j;
  }

 private:
  double freq_;
  double amp_;
};

// tau(x) = A (x_d - b(x_1)) with b(t) = 1/2 + (2t - 1)^degree / 4 for d >= 2,
// and tau(x) = A (x_1 - 1/2) for d = 1.
class PolynomialBoundaryInstance final : public SymmetricShapeInstance {
 public:
  PolynomialBoundaryInstance(std::size_t dim, unsigned degree, double amplitude = 1.0)
      : SymmetricShapeInstance(dim), degree_(degree), amp_(amplitude) {
    if (!(amplitude > 0.0 && amplitude <= 1.0)) throw ConstructionError("boundary amplitude must lie in (0,1]");
    if (degree == 0) throw ConstructionError("boundary degree must be at least 1");
    const double slope = dim == 1 ? 0.0 : static_cast<double>(degree) / 2.0;
    meta_.beta = static_cast<double>(dim == 1 ? 1 : degree) + 1.0;
    meta_.L = 0.0;
    meta_.L1 = amp_ / 2.0 * std::sqrt(1.0 + slope * slope);
    meta_.alpha = 1.0;
    meta_.mu_min = meta_.mu_max = 1.0;
  }

  std::string name() const override { return "polynomial-boundary"; }

 protected:
  double boundary(double t) const { return 0.5 + std::pow(2.0 * t - 1.0, static_cast<double>(degree_)) / 4.0; }

  double shape(std::span<const double> x) const override {
    if (dim_ == 1) return amp_ * (x[0] - 0.5);
    return amp_ * (x[dim_ - 1] - boundary(x[0]));
  }

  MeanJet shape_jet(std::span<const double> x) const override {
    const auto d = static_cast<Eigen::Index>(dim_);
    MeanJet j{shape(x), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
    if (dim_ == 1) {
      j.gradient[0] = amp_;
      return j;
    }
    const double k = static_cast<double>(degree_);
    const double z = 2.0 * x[0] - 1.0;
    j.gradient[d - 1] = amp_;
    j.gradient[0] = -amp_ * k * std::pow(z, k - 1.0) / 2.0;
    j.hessian(0, 0) = degree_ >= 2 ? -amp_ * k * (k - 1.0) * std::pow(z, k - 2.0) : 0.0;
    return j;
  }

 private:
  unsigned degree_;
  double amp_;
};

// eta_{+1}(x) = intercept + slope * x_1, eta_{-1} = 1/2.
class LinearInstance final : public Instance {
 public:
  LinearInstance(std::size_t dim, double intercept, double slope) : dim_(dim), intercept_(intercept), slope_(slope) {
    if (dim == 0) throw ConstructionError("dimension must be positive");
    const double lo = std::min(intercept, intercept + slope);
    const double hi = std::max(intercept, intercept + slope);
    if (!(lo >= 0.0 && hi <= 1.0)) throw ConstructionError("linear means must stay in [0,1]");
    meta_.beta = 2.0;
    meta_.L = 0.0;
    meta_.L1 = std::abs(slope);
    meta_.alpha = 1.0;
    meta_.mu_min = meta_.mu_max = 1.0;
  }

  std::string name() const override { return "linear"; }
  std::size_t dim() const override { return dim_; }
  std::size_t arm_count() const override { return 2; }
  double mean(std::span<const double> x, std::size_t arm) const override {
    return arm == kArmPlus ? intercept_ + slope_ * x[0] : 0.5;
  }
  void sample_context(Rng& rng, std::span<double> out) const override {
    for (double& v : out) v = rng.uniform();
  }
  bool has_derivatives() const override { return true; }
  MeanJet jet(std::span<const double> x, std::size_t arm) const override {
    const auto d = static_cast<Eigen::Index>(dim_);
    MeanJet j{mean(x, arm), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
    if (arm == kArmPlus) j.gradient[0] = slope_;
    return j;
  }

 private:
  std::size_t dim_;
  double intercept_;
  double slope_;
};

// ---------------------------------------------------------------------------
// Smooth bump used by the hard-instance family.

namespace detail {

// (1/2 - t)(t - 1/4); positive on (1/4, 1/2).
inline double bump_gap(double t) { return (0.5 - t) * (t - 0.25); }

// u_1(t) * e^{64}, shifted so the peak value exp(-64) does not underflow ratios.
inline double bump_kernel_scaled(double t) {
  if (!(t > 0.25 && t < 0.5)) return 0.0;
  return std::exp(64.0 - 1.0 / bump_gap(t));
}

inline double bump_integral(double a, double b) {
  using boost::math::quadrature::gauss_kronrod;
  if (!(b > a)) return 0.0;
  return gauss_kronrod<double, 61>::integrate(bump_kernel_scaled, a, b, 15, 1e-12);
}

inline double bump_normalizer() {
  static const double z = bump_integral(0.25, 0.5);
  return z;
}

}  // namespace detail

// u(t) = (int_{1/4}^{1/2} u_1)^{-1} int_t^inf u_1 with u_1(x) = exp(-1/((1/2-x)(x-1/4))).
inline double bump_u(double t) {
  if (!(t >= 0.0)) throw DomainError("bump_u is defined for t >= 0");
  if (t <= 0.25) return 1.0;
  if (t >= 0.5) return 0.0;
  const double z = detail::bump_normalizer();
  // Integrate the shorter side for accuracy.
  if (t <= 0.375) return 1.0 - detail::bump_integral(0.25, t) / z;
  return detail::bump_integral(t, 0.5) / z;
}

// Radial derivatives u', u'', u''' (zero outside (1/4, 1/2)).
inline std::array<double, 3> bump_u_derivatives(double t) {
  if (!(t > 0.25 && t < 0.5)) return {0.0, 0.0, 0.0};
  const double z = detail::bump_normalizer();
  const double g = detail::bump_gap(t);
  const double g1 = 0.75 - 2.0 * t;
  const double g2 = -2.0;
  const double k = detail::bump_kernel_scaled(t) / z;
  const double d1 = g1 / (g * g);                                                       // (log u_1)'
  const double d2 = g1 * g1 / (g * g * g * g) + g2 / (g * g) - 2.0 * g1 * g1 / (g * g * g);  // u_1''/u_1
  const double du1 = k * d1;
  const double du1_second = k * d2;
  return {-k, -du1, -du1_second};
}

// Operator-norm bounds on the derivative tensors of y -> u(||y||) up to order 3,
// taken as maxima over a uniform grid on (1/4, 1/2).
inline std::array<double, 4> bump_radial_norm_bounds(std::size_t grid = 10000) {
  std::array<double, 4> m{1.0, 0.0, 0.0, 0.0};
  for (std::size_t i = 1; i < grid; ++i) {
    const double r = 0.25 + 0.25 * static_cast<double>(i) / static_cast<double>(grid);
    const auto [u1, u2, u3] = bump_u_derivatives(r);
    m[1] = std::max(m[1], std::abs(u1));
    m[2] = std::max(m[2], std::max(std::abs(u2), std::abs(u1) / r));
    m[3] = std::max(m[3], std::abs(u3) + 3.0 * std::abs(u2) / r + 3.0 * std::abs(u1) / (r * r));
  }
  return m;
}

// Sum over |r| = l of 1/r! for multi-indices in d dimensions.
inline double multinomial_inverse_factorial_sum(std::size_t dim, std::size_t l) {
  const MultiIndexBasis basis = enumerate_basis(dim, l);
  double s = 0.0;
  for (const auto& r : basis.indices) {
    unsigned total = 0;
    double f = 1.0;
    for (unsigned v : r) {
      total += v;
      f *= std::tgamma(static_cast<double>(v) + 1.0);
    }
    if (total == l) s += 1.0 / f;
  }
  return s;
}

struct LowerBoundParams {
  double horizon = 1e6;
  double beta = 2.0;
  double alpha = 0.5;
  std::size_t dim = 2;
  double delta0 = 0.25;
  double L = 1.0;
  // <= 0 selects the certified default min(delta0, L / (2 C_beta S_u)).
  double c_phi = 0.0;
  // Empty means draw from `sigma_seed`.
  std::vector<int> sigma;
  std::uint64_t sigma_seed = 0;
};

class LowerBoundInstance final : public Instance {
 public:
  explicit LowerBoundInstance(const LowerBoundParams& p) : params_(p), dim_(p.dim) {
    const double d = static_cast<double>(p.dim);
    if (p.dim == 0) throw ConstructionError("dimension must be positive");
    if (!(p.beta >= 1.0)) throw ConstructionError("requires beta >= 1");
    if (!(p.alpha >= 0.0)) throw ConstructionError("requires alpha >= 0");
    if (!(p.alpha * p.beta <= d)) throw ConstructionError("requires alpha * beta <= d");
    if (!(p.delta0 > 0.0 && p.delta0 < 0.5)) throw ConstructionError("requires delta0 in (0, 1/2)");
    if (!(p.L > 0.0)) throw ConstructionError("requires L > 0");
    kappa2_ = 0.25 - p.delta0 * p.delta0;
    q_ = static_cast<std::size_t>(std::ceil(std::pow(p.horizon / (4.0 * M_E * kappa2_), 1.0 / (2.0 * p.beta + d))));
    const double qd = std::pow(static_cast<double>(q_), d);
    m_ = static_cast<std::size_t>(std::ceil(std::pow(static_cast<double>(q_), d - p.alpha * p.beta)));
    omega_ = 1.0 / qd;
    if (!(static_cast<double>(m_) <= qd)) throw ConstructionError("requires m <= q^d");
    if (!(omega_ <= 1.0 / static_cast<double>(m_))) throw ConstructionError("requires omega <= 1/m");
    if (!(p.horizon > 4.0 * kappa2_ * std::pow(static_cast<double>(q_), 2.0 * p.beta + d))) {
      throw ConstructionError("requires T > 4 kappa^2 q^(2 beta + d)");
    }
    if (!(qd < 1e8)) throw ConstructionError("q^d too large");

    const std::size_t l = holder_degree(p.beta);
    if (l > 2) throw ConstructionError("bump derivative bounds available only for floor(beta) <= 2");
    const auto norms = bump_radial_norm_bounds();
    const double s_u = [&] {
      const double s = p.beta - static_cast<double>(l);
      if (s >= 1.0) return norms[l + 1];
      return std::pow(norms[l + 1], s) * std::pow(2.0 * norms[l], 1.0 - s);
    }();
    c_beta_ = multinomial_inverse_factorial_sum(p.dim, l);
    c_phi_ = p.c_phi > 0.0 ? p.c_phi : std::min(p.delta0, p.L / (2.0 * c_beta_ * s_u));
    if (!(c_phi_ <= p.delta0)) throw ConstructionError("requires C_phi <= delta0");

    // Bump cubes spread evenly over the flat numbering of the 1/q grid.
    const auto total = static_cast<std::size_t>(qd);
    bump_of_cube_.assign(total, -1);
    for (std::size_t j = 0; j < m_; ++j) {
      const std::size_t flat = j * total / m_;
      bump_of_cube_[flat] = static_cast<std::ptrdiff_t>(j);
      centers_.push_back(q_center(flat));
      cube_flat_.push_back(flat);
    }
    if (!p.sigma.empty()) {
      if (p.sigma.size() != m_) throw ConstructionError("sign vector length must equal m = " + std::to_string(m_));
      for (int s : p.sigma) {
        if (s != 1 && s != -1) throw ConstructionError("sign vector entries must be +1 or -1");
      }
      sigma_ = p.sigma;
    } else {
      Rng rng(p.sigma_seed);
      for (std::size_t j = 0; j < m_; ++j) sigma_.push_back(rng.bernoulli(0.5) ? 1 : -1);
    }

    const double qb = std::pow(static_cast<double>(q_), -p.beta);
    meta_.beta = p.beta;
    meta_.L = p.L;
    meta_.L1 = c_phi_ * norms[1] * std::pow(static_cast<double>(q_), 1.0 - p.beta);
    meta_.alpha = p.alpha;
    meta_.gamma = 2.0 * std::pow(c_phi_, -p.alpha);
    meta_.mu_min = 1.0;
    meta_.mu_max = std::pow(4.0, d) / unit_ball_volume(p.dim);
    meta_.derived = true;
    amplitude_ = c_phi_ * qb;
  }

  std::string name() const override { return "lower-bound"; }
  std::size_t dim() const override { return dim_; }
  std::size_t arm_count() const override { return 2; }

  std::size_t q() const { return q_; }
  std::size_t m() const { return m_; }
  double omega() const { return omega_; }
  double kappa2() const { return kappa2_; }
  double c_phi() const { return c_phi_; }
  double c_beta() const { return c_beta_; }
  // C_phi q^{-beta}: |tau| on every bump ball.
  double bump_height() const { return amplitude_; }
  double ball_radius() const { return 1.0 / (4.0 * static_cast<double>(q_)); }
  const std::vector<int>& sigma() const { return sigma_; }
  const std::vector<Point>& bump_centers() const { return centers_; }
  const LowerBoundParams& params() const { return params_; }

  // Index of the bump cube containing x, or -1 (x is in X_0 or outside [0,1]^d).
  std::ptrdiff_t bump_index(std::span<const double> x) const {
    const std::size_t flat = q_flat(x);
    return flat == GridLattice::npos ? -1 : bump_of_cube_[flat];
  }

  // Index of the bump ball containing x, or -1.
  std::ptrdiff_t ball_index(std::span<const double> x) const {
    const std::ptrdiff_t j = bump_index(x);
    if (j < 0) return -1;
    return distance(x, centers_[static_cast<std::size_t>(j)]) <= ball_radius() ? j : -1;
  }

  double mean(std::span<const double> x, std::size_t arm) const override {
    if (arm == kArmMinus) return 0.5;
    const std::ptrdiff_t j = bump_index(x);
    if (j < 0) return 0.5;
    const auto ju = static_cast<std::size_t>(j);
    const double r = static_cast<double>(q_) * distance(x, centers_[ju]);
    return 0.5 + static_cast<double>(sigma_[ju]) * amplitude_ * bump_u(r);
  }

  void sample_context(Rng& rng, std::span<double> out) const override {
    const double u = rng.uniform();
    const double mass = static_cast<double>(m_) * omega_;
    if (u < mass) {
      const auto j = std::min(m_ - 1, static_cast<std::size_t>(u / omega_));
      sample_in_ball(rng, centers_[j], out);
      return;
    }
    // Uniform on X_0 by rejection against the bump cubes.
    do {
      for (double& v : out) v = rng.uniform();
    } while (bump_index(out) >= 0);
  }

  SupportPredicate support() const override {
    return [this](std::span<const double> x) {
      if (!in_unit_cube(x)) return false;
      const std::ptrdiff_t j = bump_index(x);
      return j < 0 || distance(x, centers_[static_cast<std::size_t>(j)]) <= ball_radius();
    };
  }

  bool has_derivatives() const override { return true; }

  MeanJet jet(std::span<const double> x, std::size_t arm) const override {
    const auto d = static_cast<Eigen::Index>(dim_);
    MeanJet out{mean(x, arm), Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
    if (arm == kArmMinus) return out;
    const std::ptrdiff_t j = bump_index(x);
    if (j < 0) return out;
    const auto ju = static_cast<std::size_t>(j);
    const double qd = static_cast<double>(q_);
    Eigen::VectorXd y(d);
    for (Eigen::Index i = 0; i < d; ++i) y[i] = qd * (x[static_cast<std::size_t>(i)] - centers_[ju][static_cast<std::size_t>(i)]);
    const double r = y.norm();
    const auto [u1, u2, u3] = bump_u_derivatives(r);
    (void)u3;
    if (u1 == 0.0 && u2 == 0.0) return out;
    const double scale = static_cast<double>(sigma_[ju]) * amplitude_;
    const Eigen::VectorXd yhat = y / r;
    // Chain rule through y = q (x - x_j).
    out.gradient = scale * qd * u1 * yhat;
    const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(d, d) - yhat * yhat.transpose();
    out.hessian = scale * qd * qd * (u2 * yhat * yhat.transpose() + (u1 / r) * proj);
    return out;
  }

 private:
  double q_coord(std::size_t j) const { return (2.0 * static_cast<double>(j) + 1.0) / (2.0 * static_cast<double>(q_)); }

  Point q_center(std::size_t flat) const {
    Point c(dim_);
    for (std::size_t i = dim_; i-- > 0;) {
      c[i] = q_coord(flat % q_);
      flat /= q_;
    }
    return c;
  }

  // Cube of the 1/q grid; boundary points go to the lower cube.
  std::size_t q_flat(std::span<const double> x) const {
    std::size_t flat = 0;
    const double qd = static_cast<double>(q_);
    for (std::size_t i = 0; i < dim_; ++i) {
      if (!(x[i] >= 0.0 && x[i] <= 1.0)) return GridLattice::npos;
      const double c = std::ceil(x[i] * qd) - 1.0;
      const auto j = static_cast<std::size_t>(std::clamp(c, 0.0, qd - 1.0));
      flat = flat * q_ + j;
    }
    return flat;
  }

  static double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }

  void sample_in_ball(Rng& rng, std::span<const double> c, std::span<double> out) const {
    const double rad = ball_radius();
    while (true) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double z = rng.uniform(-1.0, 1.0);
        out[i] = z;
        s += z * z;
      }
      if (s > 1.0) continue;
      for (std::size_t i = 0; i < dim_; ++i) out[i] = c[i] + rad * out[i];
      return;
    }
  }

  LowerBoundParams params_;
  std::size_t dim_;
  double kappa2_ = 0.0;
  std::size_t q_ = 1;
  std::size_t m_ = 1;
  double omega_ = 1.0;
  double c_phi_ = 0.0;
  double c_beta_ = 1.0;
  double amplitude_ = 0.0;
  std::vector<std::ptrdiff_t> bump_of_cube_;
  std::vector<std::size_t> cube_flat_;
  std::vector<Point> centers_;
  std::vector<int> sigma_;
};

inline std::unique_ptr<LowerBoundInstance> make_lower_bound_instance(const LowerBoundParams& p) {
  return std::make_unique<LowerBoundInstance>(p);
}

// ---------------------------------------------------------------------------
// Family factory.

struct FamilySpec {
  std::string family;
  std::size_t dim = 1;
  std::map<std::string, double> params;
  std::vector<double> means;  // constant-means only

  double get(const std::string& key, double fallback) const {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
  }
};

inline std::unique_ptr<Instance> make_smooth_instance(const FamilySpec& spec) {
  if (spec.family == "constant-gap") return make_constant_gap(spec.dim, spec.get("gap", 0.5));
  if (spec.family == "constant-means") return std::make_unique<ConstantMeansInstance>(spec.dim, spec.means);
  if (spec.family == "sinusoidal") {
    return std::make_unique<SinusoidalInstance>(spec.dim, spec.get("frequency", 1.0), spec.get("amplitude", 0.4),
                                                spec.get("beta", 2.0));
  }
  if (spec.family == "polynomial-boundary") {
    const double deg = spec.get("degree", 2.0);
    if (!(deg >= 1.0) || deg != std::floor(deg)) throw ConstructionError("degree must be a positive integer");
    return std::make_unique<PolynomialBoundaryInstance>(spec.dim, static_cast<unsigned>(deg),
                                                        spec.get("amplitude", 1.0));
  }
  if (spec.family == "linear") {
    return std::make_unique<LinearInstance>(spec.dim, spec.get("intercept", 0.5), spec.get("slope", 0.3));
  }
  throw ConstructionError("unknown instance family '" + spec.family + "'");
}

// ---------------------------------------------------------------------------
// Validators.

struct MarginRow {
  double t = 0.0;
  double estimate = 0.0;
  double half_width = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct MarginReport {
  std::vector<MarginRow> rows;
  std::size_t n_samples = 0;
  bool pass = true;
};

// Monte-Carlo check of P(0 < |tau(X)| <= t) <= gamma t^alpha with 99% normal intervals.
inline MarginReport verify_margin(const Instance& inst, double alpha, double gamma, std::span<const double> t_grid,
                                  std::size_t n_samples, Rng& rng) {
  if (n_samples < 10000) throw ParameterError("verify_margin needs at least 1e4 samples");
  for (double t : t_grid) {
    if (!(t > 0.0)) throw ParameterError("margin thresholds must be positive");
  }
  std::vector<double> abs_tau(n_samples);
  Point x(inst.dim());
  for (std::size_t i = 0; i < n_samples; ++i) {
    inst.sample_context(rng, x);
    abs_tau[i] = std::abs(cate(inst, x));
  }
  constexpr double z99 = 2.5758293035489004;
  MarginReport report;
  report.n_samples = n_samples;
  for (double t : t_grid) {
    std::size_t hits = 0;
    for (double a : abs_tau) hits += (a > 0.0 && a <= t) ? 1 : 0;
    MarginRow row;
    row.t = t;
    row.estimate = static_cast<double>(hits) / static_cast<double>(n_samples);
    row.half_width = z99 * std::sqrt(row.estimate * (1.0 - row.estimate) / static_cast<double>(n_samples));
    row.bound = gamma * std::pow(t, alpha);
    row.pass = row.estimate - row.half_width <= row.bound;
    report.pass = report.pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

struct HolderReport {
  std::size_t pairs = 0;
  double max_ratio = 0.0;  // max remainder / ||x' - x||^beta
  double max_remainder = 0.0;
  bool pass = true;
};

// Order-floor(beta) Taylor remainder of eta_arm between x and x'.
inline double taylor_remainder(const Instance& inst, std::size_t arm, std::span<const double> x,
                               std::span<const double> xp, std::size_t order) {
  if (order > 2) throw UnsupportedError("Taylor checks are implemented through second order");
  const MeanJet j = inst.jet(x, arm);
  const auto d = static_cast<Eigen::Index>(inst.dim());
  Eigen::VectorXd h(d);
  for (Eigen::Index i = 0; i < d; ++i) h[i] = xp[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)];
  double taylor = j.value;
  if (order >= 1) taylor += j.gradient.dot(h);
  if (order >= 2) taylor += 0.5 * h.dot(j.hessian * h);
  return std::abs(inst.mean(xp, arm) - taylor);
}

// Samples pairs (half independent draws, half local perturbations at log-uniform
// scales) and checks |eta(x') - Taylor(x'; x)| <= L ||x' - x||^beta for every arm.
inline HolderReport verify_holder(const Instance& inst, double beta, double L, std::size_t n_pairs, Rng& rng) {
  if (!inst.has_derivatives()) throw UnsupportedError(inst.name() + " does not expose analytic derivatives");
  const std::size_t order = holder_degree(beta);
  HolderReport report;
  const std::size_t d = inst.dim();
  Point x(d), xp(d), dir(d);
  for (std::size_t k = 0; k < n_pairs; ++k) {
    inst.sample_context(rng, x);
    if (k % 2 == 0) {
      inst.sample_context(rng, xp);
    } else {
      const double scale = std::pow(10.0, rng.uniform(-4.0, -0.3));
      double norm = 0.0;
      for (double& v : dir) {
        v = rng.normal();
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t i = 0; i < d; ++i) xp[i] = std::clamp(x[i] + scale * dir[i] / norm, 0.0, 1.0);
    }
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) dist += (xp[i] - x[i]) * (xp[i] - x[i]);
    dist = std::sqrt(dist);
    if (dist == 0.0) continue;
    ++report.pairs;
    for (std::size_t a = 0; a < inst.arm_count(); ++a) {
      const double rem = taylor_remainder(inst, a, x, xp, order);
      const double allowed = L * std::pow(dist, beta);
      report.max_remainder = std::max(report.max_remainder, rem);
      report.max_ratio = std::max(report.max_ratio, rem / std::pow(dist, beta));
      if (rem > allowed * (1.0 + 1e-9) + 1e-12) report.pass = false;
    }
  }
  return report;
}

struct DensityRow {
  std::string region;
  double expected = 0.0;
  double observed = 0.0;
  double standard_error = 0.0;
  bool pass = false;
};

struct DensityReport {
  std::vector<DensityRow> rows;
  std::size_t n_samples = 0;
  std::size_t outside_support = 0;
  bool pass = true;
};

// Sampler/density agreement. Every draw must satisfy the support predicate; for
// the hard-instance family each ball mass must match omega and X_0 must match
// 1 - m omega, both within 3 standard errors.
inline DensityReport verify_density(const Instance& inst, std::size_t n_samples, Rng& rng) {
  DensityReport report;
  report.n_samples = n_samples;
  const auto* lb = dynamic_cast<const LowerBoundInstance*>(&inst);
  std::vector<std::size_t> ball_counts(lb ? lb->m() : 0, 0);
  std::size_t x0 = 0;
  Point x(inst.dim());
  for (std::size_t i = 0; i < n_samples; ++i) {
    inst.sample_context(rng, x);
    if (!inst.in_support(x)) ++report.outside_support;
    if (lb) {
      const std::ptrdiff_t j = lb->ball_index(x);
      if (j >= 0) {
        ++ball_counts[static_cast<std::size_t>(j)];
      } else if (lb->bump_index(x) < 0) {
        ++x0;
      }
    }
  }
  report.pass = report.outside_support == 0;
  if (!lb) return report;
  const double n = static_cast<double>(n_samples);
  auto add = [&](std::string region, double expected, std::size_t count) {
    DensityRow row;
    row.region = std::move(region);
    row.expected = expected;
    row.observed = static_cast<double>(count) / n;
    row.standard_error = std::sqrt(expected * (1.0 - expected) / n);
    row.pass = std::abs(row.observed - expected) <= 3.0 * row.standard_error;
    report.pass = report.pass && row.pass;
    report.rows.push_back(std::move(row));
  };
  for (std::size_t j = 0; j < lb->m(); ++j) add("ball_" + std::to_string(j), lb->omega(), ball_counts[j]);
  add("X0", 1.0 - static_cast<double>(lb->m()) * lb->omega(), x0);
  return report;
}

// For the hard-instance family P(0 < |tau(X)| <= t) is the step m omega 1{t >= C_phi q^-beta}.
// Compares the Monte-Carlo estimate with that step at t = h/2 and t = 2h, within 3 SE.
inline MarginReport verify_margin_step(const LowerBoundInstance& inst, std::size_t n_samples, Rng& rng) {
  if (n_samples == 0) throw ParameterError("need at least one sample");
  const double h = inst.bump_height();
  const double mass = static_cast<double>(inst.m()) * inst.omega();
  const std::array<double, 2> ts{0.5 * h, 2.0 * h};
  std::array<std::size_t, 2> hits{0, 0};
  Point x(inst.dim());
  for (std::size_t i = 0; i < n_samples; ++i) {
    inst.sample_context(rng, x);
    const double a = std::abs(cate(inst, x));
    for (std::size_t k = 0; k < 2; ++k) hits[k] += (a > 0.0 && a <= ts[k]) ? 1 : 0;
  }
  MarginReport report;
  report.n_samples = n_samples;
  const double n = static_cast<double>(n_samples);
  for (std::size_t k = 0; k < 2; ++k) {
    MarginRow row;
    row.t = ts[k];
    row.bound = ts[k] >= h ? mass : 0.0;
    row.estimate = static_cast<double>(hits[k]) / n;
    row.half_width = 3.0 * std::sqrt(row.bound * (1.0 - row.bound) / n);
    row.pass = std::abs(row.estimate - row.bound) <= row.half_width;
    report.pass = report.pass && row.pass;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace smoothbandit
