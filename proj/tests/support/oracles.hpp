#pragma once
// Brute-force reference implementations used to check the library. They are
// written from the model definitions directly and share no code with core/.
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "gdmstack/game.hpp"

namespace gdmstack::testing {

inline int enumerate_cap(const DeviceProfile& d, const MarketParams& m) {
  int cap = 0;
  while (cap < m.l_max && m.coeff_A * (cap + 1) + m.coeff_B <= d.capacity) ++cap;
  return cap;
}

inline double direct_device_utility(const DeviceProfile& d, int layers, double price,
                                    const MarketParams& m) {
  double residual = d.capacity - (m.coeff_A * layers + m.coeff_B);
  return price * layers + d.alpha * std::log1p(residual);
}

// Exhaustive search over every feasible layer count; ties keep the smaller.
inline int enumerate_best_response(const DeviceProfile& d, double price,
                                   const MarketParams& m) {
  int cap = enumerate_cap(d, m);
  int best = 0;
  double best_u = direct_device_utility(d, 0, price, m);
  for (int l = 1; l <= cap; ++l) {
    double u = direct_device_utility(d, l, price, m);
    if (u > best_u) {
      best_u = u;
      best = l;
    }
  }
  return best;
}

inline double direct_server_utility(const std::vector<DeviceProfile>& devices,
                                    double price, const MarketParams& m) {
  double paid = 0.0;
  double own = 0.0;
  for (const auto& d : devices) {
    int l = enumerate_best_response(d, price, m);
    paid += price * l;
    own += m.coeff_A * (m.l_max - l);
  }
  return m.revenue_F - paid - m.beta * own;
}

struct GridOptimum {
  double price = 0.0;
  double utility = -std::numeric_limits<double>::infinity();
};

// Uniform grid over [price_min, price_max] including both ends. Each
// device's satisfaction terms are tabulated once so a fine grid stays cheap.
inline GridOptimum grid_search(const std::vector<DeviceProfile>& devices,
                               const MarketParams& m, double step) {
  std::vector<std::vector<double>> satisfaction;
  for (const auto& d : devices) {
    std::vector<double> row;
    for (int l = 0; l <= enumerate_cap(d, m); ++l)
      row.push_back(direct_device_utility(d, l, 0.0, m));
    satisfaction.push_back(std::move(row));
  }
  GridOptimum best;
  auto count = static_cast<long>(std::floor((m.price_max - m.price_min) / step));
  for (long k = 0; k <= count + 1; ++k) {
    double p = k > count ? m.price_max : m.price_min + static_cast<double>(k) * step;
    double paid = 0.0;
    double own = 0.0;
    for (const auto& row : satisfaction) {
      int choice = 0;
      double best_u = row[0];
      for (int l = 1; l < static_cast<int>(row.size()); ++l) {
        double u = p * l + row[l];
        if (u > best_u) {
          best_u = u;
          choice = l;
        }
      }
      paid += p * choice;
      own += m.coeff_A * (m.l_max - choice);
    }
    double u = m.revenue_F - paid - m.beta * own;
    if (u > best.utility) best = {p, u};
  }
  return best;
}

}  // namespace gdmstack::testing
