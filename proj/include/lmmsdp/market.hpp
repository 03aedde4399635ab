#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lmmsdp/matrix.hpp"

namespace lmmsdp {

// Regular calendar T_i = i * period, i = 1..horizon.
struct Calendar {
  double period = 1.0;
  std::size_t horizon = 0;

  double date(std::size_t i) const noexcept { return period * static_cast<double>(i); }
  void validate() const;
};

// Discount factors B(0, T_i) on the calendar grid, i = 0..horizon+1. The
// extra point past the horizon is needed by the level of a swap ending at
// T_horizon.
class DiscountCurve {
 public:
  DiscountCurve() = default;
  // Throws InvalidInput unless values[0] == 1 and all values lie in (0, 1]
  // and are non-increasing.
  DiscountCurve(double period, std::vector<double> discounts);
  // Flat continuously compounded rate r: B(0, T) = exp(-r T).
  static DiscountCurve flat(double rate, double period, std::size_t horizon);
  // Log-linear interpolation of (tenor, discount) points onto the grid;
  // B(0, 0) = 1 is implied. Points must cover T_{horizon+1}.
  static DiscountCurve from_points(std::span<const std::pair<double, double>> points,
                                   double period, std::size_t horizon);

  double period() const noexcept { return period_; }
  std::size_t size() const noexcept { return b_.size(); }
  // Last index i for which B(0, T_i) is known.
  std::size_t last_index() const noexcept { return b_.empty() ? 0 : b_.size() - 1; }
  double discount(std::size_t i) const;
  // Simple forward over [T_i, T_{i+1}].
  double forward(std::size_t i) const;
  const std::vector<double>& discounts() const noexcept { return b_; }

 private:
  double period_ = 1.0;
  std::vector<double> b_;
};

// Option on the swap fixing at T_S with payments at T_{S+1}..T_{N+1}. A
// caplet is the one-period case S == N.
struct SwaptionQuote {
  std::size_t expiry = 0;  // S
  std::size_t end = 0;     // N
  std::optional<double> strike;  // ATM forward when absent
  double vol = 0.0;              // absolute Black vol, e.g. 0.124
  std::optional<double> bid;
  std::optional<double> ask;
  std::string label;

  bool is_caplet() const noexcept { return expiry == end; }
};

struct SwaptionInstrument {
  SwaptionQuote quote;
  std::vector<double> weights;  // hat weights over S..N, summing to 1
  double forward = 0.0;         // swap rate
  double strike = 0.0;
  double level = 0.0;
  double expiry_time = 0.0;     // T_S
  double target = 0.0;          // vol^2 T_S
  std::optional<double> target_bid;
  std::optional<double> target_ask;
};

double level(const DiscountCurve& curve, std::size_t s, std::size_t n);
std::vector<double> forward_weights(const DiscountCurve& curve, std::size_t s, std::size_t n);
double swap_rate(const DiscountCurve& curve, std::size_t s, std::size_t n);
std::vector<double> hat_weights(const DiscountCurve& curve, std::size_t s, std::size_t n);

double normal_cdf(double x);
double normal_pdf(double x);

// Black-76 on cumulative variance V: level * (F N(h) - K N(h - sqrt V)).
double black_price(double forward, double strike, double cumvar, double level);
// d price / d V.
double black_variance_vega(double forward, double strike, double cumvar, double level);
// Inverse of black_price in V (Brent root search).
double implied_cumvariance(double price, double forward, double strike, double level);

SwaptionInstrument make_instrument(const DiscountCurve& curve, const SwaptionQuote& q);

// Sum over j = 1..S of the period times hat(w) hat(w)^T placed at (j, j).
SymMatrix build_omega_stationary(const SwaptionInstrument& inst, std::size_t horizon,
                                 double period);
// Blocks X_1..X_M of dimensions M, M-1, .., 1; block i carries
// period * hat(w) hat(w)^T at position S - i (0-based) when i <= S.
BlockDiagMatrix build_omega_nonstationary(const SwaptionInstrument& inst, std::size_t horizon,
                                          double period);
std::vector<std::size_t> nonstationary_dims(std::size_t horizon);

}  // namespace lmmsdp
