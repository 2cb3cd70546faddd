#include "changeblind/correlation.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <numeric>

#include "changeblind/error.hpp"

namespace changeblind::stats {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw StructuralError(std::string(what) + ": inputs differ in length");
  }
  if (a.size() < 3) throw ValidationError(std::string(what) + ": needs at least 3 samples");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
      throw InputDomainError(std::string(what) + ": non-finite sample");
    }
  }
}

double two_sided_t(double t, double dof) {
  boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

}  // namespace

double plcc(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "plcc");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) throw UndefinedCorrelationError("correlation of a constant input");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double srocc(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "srocc");
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  return plcc(ra, rb);
}

double rmse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw StructuralError("rmse: inputs differ in length");
  if (a.empty()) throw ValidationError("rmse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s / static_cast<double>(a.size()));
}

double fisher_z_average(std::span<const double> rs) {
  if (rs.empty()) throw ValidationError("fisher_z_average: no correlations");
  if (rs.size() == 1) {
    if (!(std::abs(rs[0]) < 1.0)) throw InputDomainError("fisher_z_average: |r| must be < 1");
    return rs[0];
  }
  double z = 0.0;
  for (double r : rs) {
    if (!(std::abs(r) < 1.0)) throw InputDomainError("fisher_z_average: |r| must be < 1");
    z += std::atanh(r);
  }
  return std::tanh(z / static_cast<double>(rs.size()));
}

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) throw ValidationError("correlation p-value needs n >= 3");
  if (std::abs(r) >= 1.0) return 0.0;
  const double dof = static_cast<double>(n) - 2.0;
  const double t = r * std::sqrt(dof / (1.0 - r * r));
  return two_sided_t(t, dof);
}

WilliamsResult williams_test(double r_jk, double r_jh, double r_kh, std::size_t n) {
  if (n < 4) throw ValidationError("Williams' test needs n >= 4");
  const double nd = static_cast<double>(n);
  const double det = 1.0 - r_jk * r_jk - r_jh * r_jh - r_kh * r_kh + 2.0 * r_jk * r_jh * r_kh;
  const double rbar = 0.5 * (r_jk + r_jh);
  const double denom =
      2.0 * (nd - 1.0) / (nd - 3.0) * det + rbar * rbar * std::pow(1.0 - r_kh, 3.0);
  WilliamsResult out;
  out.dof = static_cast<int>(n) - 3;
  if (denom <= 0.0) {
    out.t = r_jk == r_jh ? 0.0 : std::copysign(INFINITY, r_jk - r_jh);
    out.p_value = r_jk == r_jh ? 1.0 : 0.0;
    return out;
  }
  out.t = (r_jk - r_jh) * std::sqrt((nd - 1.0) * (1.0 + r_kh)) / std::sqrt(denom);
  out.p_value = two_sided_t(out.t, nd - 3.0);
  return out;
}

}  // namespace changeblind::stats
