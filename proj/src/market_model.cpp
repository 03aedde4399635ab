#include <algorithm>
#include <cmath>
#include <string>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_roots.h>

#include "lmmsdp/errors.hpp"
#include "lmmsdp/market.hpp"

namespace lmmsdp {

void Calendar::validate() const {
  if (!(period > 0.0) || !std::isfinite(period)) throw InvalidInput("calendar period must be positive");
  if (horizon == 0) throw InvalidInput("calendar horizon must be at least 1");
}

DiscountCurve::DiscountCurve(double period, std::vector<double> discounts)
    : period_(period), b_(std::move(discounts)) {
  if (!(period_ > 0.0)) throw InvalidInput("curve period must be positive");
  if (b_.size() < 2) throw InvalidInput("curve needs at least B(0,T_1)");
  if (b_[0] != 1.0) throw InvalidInput("curve must start at B(0,0) = 1");
  for (std::size_t i = 1; i < b_.size(); ++i) {
    if (!(b_[i] > 0.0 && b_[i] <= 1.0))
      throw InvalidInput("discount factor " + std::to_string(i) + " outside (0, 1]");
    if (b_[i] > b_[i - 1])
      throw InvalidInput("discount curve increases at index " + std::to_string(i));
  }
}

DiscountCurve DiscountCurve::flat(double rate, double period, std::size_t horizon) {
  std::vector<double> b(horizon + 2);
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::exp(-rate * period * static_cast<double>(i));
  return DiscountCurve(period, std::move(b));
}

DiscountCurve DiscountCurve::from_points(std::span<const std::pair<double, double>> points,
                                         double period, std::size_t horizon) {
  std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
  for (const auto& [t, d] : points) {
    if (!(t > 0.0) || !(d > 0.0)) throw InvalidInput("curve points need positive tenor and discount");
    pts.emplace_back(t, std::log(d));
  }
  std::sort(pts.begin(), pts.end());
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (pts[i].first == pts[i - 1].first) throw InvalidInput("duplicate curve tenor");
  const double last = period * static_cast<double>(horizon + 1);
  if (pts.back().first < last - 1e-9) throw InvalidInput("curve does not reach the end of the calendar");

  std::vector<double> b(horizon + 2);
  std::size_t seg = 1;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double t = period * static_cast<double>(i);
    while (seg + 1 < pts.size() && pts[seg].first < t) ++seg;
    const auto& [t0, l0] = pts[seg - 1];
    const auto& [t1, l1] = pts[seg];
    const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
    b[i] = std::exp(l0 + w * (l1 - l0));
  }
  b[0] = 1.0;
  return DiscountCurve(period, std::move(b));
}

double DiscountCurve::discount(std::size_t i) const {
  if (i >= b_.size()) throw InvalidInput("discount index " + std::to_string(i) + " beyond the curve");
  return b_[i];
}

double DiscountCurve::forward(std::size_t i) const {
  return (discount(i) / discount(i + 1) - 1.0) / period_;
}

namespace {

void check_range(const DiscountCurve& curve, std::size_t s, std::size_t n) {
  if (s < 1 || n < s || n + 1 > curve.last_index())
    throw InvalidInput("swap index range [" + std::to_string(s) + ", " + std::to_string(n) +
                       "] not covered by the curve");
}

}  // namespace

double level(const DiscountCurve& curve, std::size_t s, std::size_t n) {
  check_range(curve, s, n);
  double l = 0.0;
  for (std::size_t i = s; i <= n; ++i) l += curve.period() * curve.discount(i + 1);
  return l;
}

std::vector<double> forward_weights(const DiscountCurve& curve, std::size_t s, std::size_t n) {
  const double l = level(curve, s, n);
  std::vector<double> w;
  w.reserve(n - s + 1);
  for (std::size_t i = s; i <= n; ++i) w.push_back(curve.period() * curve.discount(i + 1) / l);
  return w;
}

double swap_rate(const DiscountCurve& curve, std::size_t s, std::size_t n) {
  const auto w = forward_weights(curve, s, n);
  double r = 0.0;
  for (std::size_t i = s; i <= n; ++i) r += w[i - s] * curve.forward(i);
  return r;
}

std::vector<double> hat_weights(const DiscountCurve& curve, std::size_t s, std::size_t n) {
  auto w = forward_weights(curve, s, n);
  double swap = 0.0;
  for (std::size_t i = s; i <= n; ++i) {
    const double k = curve.forward(i);
    if (!(k > 0.0)) throw InvalidInput("nonpositive forward at index " + std::to_string(i));
    w[i - s] *= k;
    swap += w[i - s];
  }
  for (double& v : w) v /= swap;
  return w;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) * (0.5 * M_2_SQRTPI * M_SQRT1_2); }

double black_price(double forward, double strike, double cumvar, double level) {
  if (!(forward > 0.0) || !(strike > 0.0) || !(level > 0.0))
    throw InvalidInput("black_price needs positive forward, strike and level");
  if (cumvar < 0.0 || std::isnan(cumvar)) throw InvalidInput("negative cumulative variance");
  if (cumvar == 0.0) return level * std::max(forward - strike, 0.0);
  if (std::isinf(cumvar)) return level * forward;
  const double sd = std::sqrt(cumvar);
  const double h = (std::log(forward / strike) + 0.5 * cumvar) / sd;
  return level * (forward * normal_cdf(h) - strike * normal_cdf(h - sd));
}

double black_variance_vega(double forward, double strike, double cumvar, double level) {
  if (!(cumvar > 0.0)) throw InvalidInput("vega needs positive cumulative variance");
  if (!(forward > 0.0) || !(strike > 0.0) || !(level > 0.0))
    throw InvalidInput("vega needs positive forward, strike and level");
  const double sd = std::sqrt(cumvar);
  const double h = (std::log(forward / strike) + 0.5 * cumvar) / sd;
  return level * forward * normal_pdf(h) / (2.0 * sd);
}

namespace {

struct PriceTarget {
  double price, forward, strike, level;
};

double price_gap(double v, void* p) {
  const auto* t = static_cast<const PriceTarget*>(p);
  return black_price(t->forward, t->strike, v, t->level) - t->price;
}

}  // namespace

double implied_cumvariance(double price, double forward, double strike, double level) {
  if (!(forward > 0.0) || !(strike > 0.0) || !(level > 0.0))
    throw InvalidInput("implied variance needs positive forward, strike and level");
  const double lo = level * std::max(forward - strike, 0.0);
  const double hi = level * forward;
  const double tol = 1e-12 * level * forward;
  if (!(price < hi)) throw InvalidInput("price at or above the upper arbitrage bound");
  if (price < lo - tol) throw InvalidInput("price below intrinsic value");
  if (price <= lo + tol * 1e-3) return 0.0;

  gsl_set_error_handler_off();
  PriceTarget target{price, forward, strike, level};
  double vhi = 1.0;
  while (price_gap(vhi, &target) < 0.0) {
    vhi *= 4.0;
    if (vhi > 1e6) throw InvalidInput("implied variance search diverged");
  }

  gsl_function f{&price_gap, &target};
  gsl_root_fsolver* s = gsl_root_fsolver_alloc(gsl_root_fsolver_brent);
  gsl_root_fsolver_set(s, &f, 0.0, vhi);
  double v = 0.5 * vhi;
  for (int it = 0; it < 400; ++it) {
    gsl_root_fsolver_iterate(s);
    v = gsl_root_fsolver_root(s);
    const double a = gsl_root_fsolver_x_lower(s);
    const double b = gsl_root_fsolver_x_upper(s);
    if (std::abs(price_gap(v, &target)) <= tol * 1e-3 || b - a <= 1e-15 * std::max(1.0, b)) break;
  }
  gsl_root_fsolver_free(s);
  return v;
}

SwaptionInstrument make_instrument(const DiscountCurve& curve, const SwaptionQuote& q) {
  if (!(q.vol > 0.0)) throw InvalidInput("quote vol must be positive");
  if (q.bid && q.ask && *q.bid > *q.ask) throw InvalidInput("bid above ask");
  SwaptionInstrument inst;
  inst.quote = q;
  inst.weights = hat_weights(curve, q.expiry, q.end);
  inst.level = level(curve, q.expiry, q.end);
  inst.forward = swap_rate(curve, q.expiry, q.end);
  inst.strike = q.strike.value_or(inst.forward);
  inst.expiry_time = curve.period() * static_cast<double>(q.expiry);
  inst.target = q.vol * q.vol * inst.expiry_time;
  if (q.bid) inst.target_bid = *q.bid * *q.bid * inst.expiry_time;
  if (q.ask) inst.target_ask = *q.ask * *q.ask * inst.expiry_time;
  return inst;
}

SymMatrix build_omega_stationary(const SwaptionInstrument& inst, std::size_t horizon,
                                 double period) {
  const std::size_t s = inst.quote.expiry;
  const std::size_t len = inst.weights.size();
  if (s < 1 || s + len - 1 > horizon)
    throw InvalidInput("instrument does not fit in a " + std::to_string(horizon) + "-dim variable");
  SymMatrix omega(horizon);
  const auto& w = inst.weights;
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t p = 0; p < len; ++p)
      for (std::size_t q = 0; q <= p; ++q) omega.add(j + p, j + q, period * w[p] * w[q]);
  return omega;
}

std::vector<std::size_t> nonstationary_dims(std::size_t horizon) {
  std::vector<std::size_t> d(horizon);
  for (std::size_t i = 0; i < horizon; ++i) d[i] = horizon - i;
  return d;
}

BlockDiagMatrix build_omega_nonstationary(const SwaptionInstrument& inst, std::size_t horizon,
                                          double period) {
  const std::size_t s = inst.quote.expiry;
  const std::size_t len = inst.weights.size();
  if (s < 1 || s + len - 1 > horizon)
    throw InvalidInput("instrument does not fit in a " + std::to_string(horizon) + "-dim variable");
  std::vector<SymMatrix> blocks;
  blocks.reserve(horizon);
  const auto& w = inst.weights;
  for (std::size_t i = 1; i <= horizon; ++i) {
    SymMatrix b(horizon - i + 1);
    if (i <= s) {
      const std::size_t off = s - i;
      for (std::size_t p = 0; p < len; ++p)
        for (std::size_t q = 0; q <= p; ++q) b.set(off + p, off + q, period * w[p] * w[q]);
    }
    blocks.push_back(std::move(b));
  }
  return BlockDiagMatrix(std::move(blocks));
}

}  // namespace lmmsdp
