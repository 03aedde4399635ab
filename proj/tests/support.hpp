#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "lmmsdp/matrix.hpp"

namespace testing {

inline lmmsdp::SymMatrix random_sym(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  lmmsdp::SymMatrix s(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) s.set(i, j, g(rng));
  return s;
}

// B B^T + shift I with Gaussian B.
inline lmmsdp::SymMatrix random_pd(std::size_t n, std::mt19937_64& rng, double shift = 0.1) {
  std::normal_distribution<double> g;
  lmmsdp::Matrix b(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) b(i, j) = g(rng);
  lmmsdp::SymMatrix s(n, shift);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < n; ++k) v += b(i, k) * b(j, k);
      s.add(i, j, v);
    }
  return s;
}

inline Eigen::MatrixXd to_eigen(const lmmsdp::SymMatrix& s) {
  Eigen::MatrixXd m(s.dim(), s.dim());
  for (std::size_t i = 0; i < s.dim(); ++i)
    for (std::size_t j = 0; j < s.dim(); ++j) m(i, j) = s(i, j);
  return m;
}

inline Eigen::MatrixXd to_eigen(const lmmsdp::Matrix& s) {
  Eigen::MatrixXd m(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t j = 0; j < s.cols(); ++j) m(i, j) = s(i, j);
  return m;
}

// Eigenvalues from Eigen's self-adjoint solver, ascending.
inline std::vector<double> oracle_eigenvalues(const lmmsdp::SymMatrix& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(s));
  const auto& v = es.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

inline double oracle_min_eig(const lmmsdp::SymMatrix& s) { return oracle_eigenvalues(s).front(); }

inline double max_abs_diff(const lmmsdp::SymMatrix& a, const lmmsdp::SymMatrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

}  // namespace testing
