#pragma once

// Local polynomial regression with an indicator (closed-ball) kernel.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "smoothbandit/errors.hpp"
#include "smoothbandit/geometry.hpp"

namespace smoothbandit {

// Largest integer strictly smaller than beta.
inline std::size_t holder_degree(double beta) {
  if (!(beta > 0.0)) throw ParameterError("smoothness must be positive");
  const double f = std::ceil(beta) - 1.0;
  return static_cast<std::size_t>(std::max(0.0, f));
}

struct MultiIndexBasis {
  std::size_t dim = 0;
  std::size_t degree = 0;
  std::vector<std::vector<unsigned>> indices;

  std::size_t size() const { return indices.size(); }
};

// Multi-indices with |r| <= degree, ordered by total degree and, within a
// degree, with larger leading exponents first: (0,0), (1,0), (0,1), (2,0), ...
inline MultiIndexBasis enumerate_basis(std::size_t dim, std::size_t degree) {
  if (dim == 0) throw ParameterError("basis dimension must be positive");
  MultiIndexBasis basis{dim, degree, {}};
  std::vector<unsigned> r(dim, 0);
  // Recursive fill of all compositions of `total` into `dim` parts.
  auto fill = [&](auto&& self, std::size_t axis, unsigned remaining) -> void {
    if (axis + 1 == dim) {
      r[axis] = remaining;
      basis.indices.push_back(r);
      return;
    }
    for (unsigned v = remaining + 1; v-- > 0;) {
      r[axis] = v;
      self(self, axis + 1, remaining - v);
    }
  };
  for (unsigned total = 0; total <= degree; ++total) fill(fill, 0, total);
  return basis;
}

// Context points with rewards, stored row-major.
class SampleSet {
 public:
  explicit SampleSet(std::size_t dim = 1) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return rewards_.size(); }
  bool empty() const { return rewards_.empty(); }

  void add(std::span<const double> x, double y) {
    if (x.size() != dim_) throw ContractError("sample point has wrong dimension");
    points_.insert(points_.end(), x.begin(), x.end());
    rewards_.push_back(y);
  }

  void clear() {
    points_.clear();
    rewards_.clear();
  }

  std::span<const double> point(std::size_t i) const { return {points_.data() + i * dim_, dim_}; }
  double reward(std::size_t i) const { return rewards_[i]; }

 private:
  std::size_t dim_;
  std::vector<double> points_;
  std::vector<double> rewards_;
};

// Samples ordered by first coordinate so ball queries only touch a slab.
class SlabIndex {
 public:
  explicit SlabIndex(const SampleSet& samples) : samples_(&samples), order_(samples.size()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return samples.point(a)[0] < samples.point(b)[0];
    });
    keys_.reserve(order_.size());
    for (std::size_t i : order_) keys_.push_back(samples.point(i)[0]);
  }

  const SampleSet& samples() const { return *samples_; }

  template <typename Visit>
  void for_each_candidate(std::span<const double> x, double h, Visit&& visit) const {
    auto first = std::lower_bound(keys_.begin(), keys_.end(), x[0] - h);
    auto last = std::upper_bound(first, keys_.end(), x[0] + h);
    for (auto it = first; it != last; ++it) {
      const std::size_t i = order_[static_cast<std::size_t>(it - keys_.begin())];
      visit(samples_->point(i), samples_->reward(i));
    }
  }

 private:
  const SampleSet* samples_;
  std::vector<std::size_t> order_;
  std::vector<double> keys_;
};

struct LocalPolyFit {
  Point query;
  double bandwidth = 0.0;
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd gram;
  double min_eigenvalue = 0.0;
  std::size_t n_in_ball = 0;
  bool degenerate = true;
};

inline double default_eig_tol(const MultiIndexBasis& basis) { return 1e-8 * static_cast<double>(basis.size()); }

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw ContractError("min_eigenvalue: matrix is not square");
  if (m.rows() == 0) throw ContractError("min_eigenvalue: empty matrix");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > 1e-10) throw ContractError("min_eigenvalue: matrix is not symmetric");
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

namespace detail {

// Scaled monomials ((u - x)/h)^r for every basis index; 0^0 = 1.
inline void monomials(std::span<const double> u, std::span<const double> x, double h, const MultiIndexBasis& basis,
                      std::vector<double>& scratch, Eigen::VectorXd& out) {
  const std::size_t d = basis.dim;
  const std::size_t top = 2 * basis.degree + 1;
  scratch.assign(d * top, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    const double z = (u[i] - x[i]) / h;
    for (std::size_t p = 1; p < top; ++p) scratch[i * top + p] = scratch[i * top + p - 1] * z;
  }
  for (std::size_t k = 0; k < basis.size(); ++k) {
    double v = 1.0;
    for (std::size_t i = 0; i < d; ++i) v *= scratch[i * top + basis.indices[k][i]];
    out[static_cast<Eigen::Index>(k)] = v;
  }
}

inline bool in_closed_ball(std::span<const double> u, std::span<const double> x, double h2) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (u[i] - x[i]) * (u[i] - x[i]);
  return s <= h2;
}

template <typename ForEachSample>
LocalPolyFit fit(std::span<const double> x, double h, const MultiIndexBasis& basis, double eig_tol,
                 ForEachSample&& for_each) {
  if (!(h > 0.0)) throw ParameterError("bandwidth must be positive");
  if (x.size() != basis.dim) throw ContractError("query point dimension does not match basis");
  const auto m = static_cast<Eigen::Index>(basis.size());
  LocalPolyFit out;
  out.query.assign(x.begin(), x.end());
  out.bandwidth = h;
  out.gram = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd psi(m);
  std::vector<double> scratch;
  const double h2 = h * h;
  for_each([&](std::span<const double> u, double y) {
    if (!in_closed_ball(u, x, h2)) return;
    monomials(u, x, h, basis, scratch, psi);
    out.gram.selfadjointView<Eigen::Lower>().rankUpdate(psi);
    rhs.noalias() += y * psi;
    ++out.n_in_ball;
  });
  out.gram = out.gram.selfadjointView<Eigen::Lower>();
  out.min_eigenvalue = min_eigenvalue(out.gram);
  out.degenerate = !(out.min_eigenvalue >= eig_tol);
  if (out.degenerate) {
    out.coefficients = Eigen::VectorXd::Zero(m);
  } else {
    out.coefficients = out.gram.ldlt().solve(rhs);
  }
  return out;
}

}  // namespace detail

// Gram matrix of scaled monomials over samples in the closed ball B(x, h).
inline Eigen::MatrixXd gram_matrix(std::span<const double> x, std::span<const Point> samples, double h,
                                   const MultiIndexBasis& basis) {
  if (!(h > 0.0)) throw ParameterError("bandwidth must be positive");
  const auto m = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd psi(m);
  std::vector<double> scratch;
  for (const Point& u : samples) {
    if (!detail::in_closed_ball(u, x, h * h)) continue;
    detail::monomials(u, x, h, basis, scratch, psi);
    a.noalias() += psi * psi.transpose();
  }
  return a;
}

// Returns the fitted value at x (the zero-index coefficient), or 0 when the
// Gram matrix fails the eigenvalue threshold.
inline std::pair<double, LocalPolyFit> local_poly_estimate(std::span<const double> x, const SampleSet& samples,
                                                           double h, const MultiIndexBasis& basis,
                                                           double eig_tol) {
  LocalPolyFit f = detail::fit(x, h, basis, eig_tol, [&](auto&& visit) {
    for (std::size_t i = 0; i < samples.size(); ++i) visit(samples.point(i), samples.reward(i));
  });
  const double value = f.degenerate ? 0.0 : f.coefficients[0];
  return {value, std::move(f)};
}

inline std::pair<double, LocalPolyFit> local_poly_estimate(std::span<const double> x, const SlabIndex& index,
                                                           double h, const MultiIndexBasis& basis,
                                                           double eig_tol) {
  LocalPolyFit f = detail::fit(x, h, basis, eig_tol, [&](auto&& visit) { index.for_each_candidate(x, h, visit); });
  const double value = f.degenerate ? 0.0 : f.coefficients[0];
  return {value, std::move(f)};
}

}  // namespace smoothbandit
