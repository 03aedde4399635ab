#pragma once

#include <random>

#include <Eigen/Dense>

#include "lmmsdp/cone_program.hpp"
#include "support.hpp"

namespace testing {

struct PlantedSdp {
  lmmsdp::ConeProgram program;
  double optimal_value = 0.0;
};

// Primal-dual feasible SDP built around a strictly complementary pair:
// X* = U diag(x, 0) U^T and Z* = U diag(0, z) U^T, b = A(X*),
// C = Z* + sum y*_k A_k, so X* and (y*, Z*) are optimal.
inline PlantedSdp planted_sdp(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> rank_dist(1, n);
  std::uniform_real_distribution<double> pos(0.5, 2.0);
  std::normal_distribution<double> g;
  const std::size_t r = rank_dist(rng);
  Eigen::MatrixXd raw(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) raw(i, j) = g(rng);
  const Eigen::MatrixXd u = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
  Eigen::VectorXd xd = Eigen::VectorXd::Zero(n), zd = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < n; ++i) (i < r ? xd : zd)(i) = pos(rng);
  const Eigen::MatrixXd xs = u * xd.asDiagonal() * u.transpose();
  const Eigen::MatrixXd zs = u * zd.asDiagonal() * u.transpose();

  auto to_sym = [n](const Eigen::MatrixXd& e) {
    lmmsdp::SymMatrix s(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) s.set(i, j, 0.5 * (e(i, j) + e(j, i)));
    return s;
  };

  PlantedSdp out;
  auto& p = out.program;
  p.blocks = {n};
  lmmsdp::SymMatrix c = to_sym(zs);
  const lmmsdp::SymMatrix x = to_sym(xs);
  for (std::size_t k = 0; k < m; ++k) {
    const auto a = random_sym(n, rng);
    const double y = g(rng);
    c.add_scaled(y, a);
    p.constraints.push_back({lmmsdp::BlockDiagMatrix({a}), lmmsdp::dot(a, x)});
  }
  out.optimal_value = lmmsdp::dot(c, x);
  p.c = lmmsdp::BlockDiagMatrix({c});
  return out;
}

}  // namespace testing
