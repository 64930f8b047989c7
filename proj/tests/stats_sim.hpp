#pragma once

// Reference computations and synthetic error tables for the statistics tests.

#include "wristloc/evaluation.hpp"
#include "wristloc/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace testing {

/// Two-sided exact p by enumerating every way to pick which n of the n + m
/// pooled ranks belong to `a`. U counts pairs directly.
struct BruteForceMwu {
  std::size_t n, m;
  std::vector<double> u_of_mask;  // U for every n-subset, in mask order

  BruteForceMwu(std::size_t n_, std::size_t m_) : n(n_), m(m_) {
    const std::uint32_t all = 1u << (n + m);
    for (std::uint32_t mask = 0; mask < all; ++mask) {
      if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
      u_of_mask.push_back(u_for(mask));
    }
  }

  // Rank k belongs to a when bit k is set; a beats every b of lower rank.
  double u_for(std::uint32_t mask) const {
    double u = 0;
    int b_below = 0;
    for (std::size_t k = 0; k < n + m; ++k) {
      if (mask >> k & 1u) {
        u += b_below;
      } else {
        ++b_below;
      }
    }
    return u;
  }

  double p(double u) const {
    double lo = 0, hi = 0;
    for (double v : u_of_mask) {
      lo += v <= u;
      hi += v >= u;
    }
    return std::min(1.0, 2.0 * std::min(lo, hi) / static_cast<double>(u_of_mask.size()));
  }
};

inline void set_property(wristloc::eval::ErrorRecord& r, std::size_t hypothesis, bool on) {
  switch (hypothesis) {
    case 0: r.tags.vertical = on; break;
    case 1: r.tags.unusual_design = on; break;
    case 2: r.tags.irregular = on; break;
    case 3: r.tags.wide = on; break;
    default: r.lighting_unusual = on; break;
  }
}

/// n_tagged records carrying `hypothesis` and n_untagged without it; the
/// other four properties are fair coin flips. Errors are continuous and
/// skewed; tagged errors get `shift_iqr` times the IQR of the unshifted errors
/// added. With hypothesis < 0 every property is a coin flip and nothing moves.
inline wristloc::eval::ErrorTable synthetic_table(std::uint64_t seed, int hypothesis, std::size_t n_tagged,
                                                  std::size_t n_untagged, double shift_iqr) {
  wristloc::Rng rng(seed);
  wristloc::eval::ErrorTable t;
  std::vector<double> base;
  for (std::size_t i = 0; i < n_tagged + n_untagged; ++i) {
    wristloc::eval::ErrorRecord r;
    r.frame_id = "f" + std::to_string(i);
    r.group = "g" + std::to_string(i % 40);
    for (std::size_t h = 0; h < 5; ++h) set_property(r, h, rng.below(2) == 1);
    if (hypothesis >= 0) set_property(r, static_cast<std::size_t>(hypothesis), i < n_tagged);
    const double e = 2.0 - 10.0 * std::log(1.0 - rng.uniform(0.0, 1.0));
    base.push_back(e);
    r.mae = e;
    t.records.push_back(r);
  }
  if (hypothesis >= 0 && shift_iqr != 0.0) {
    const double iqr = wristloc::eval::quantile(base, 0.75) - wristloc::eval::quantile(base, 0.25);
    for (std::size_t i = 0; i < n_tagged; ++i) t.records[i].mae += shift_iqr * iqr;
  }
  for (auto& r : t.records) {
    r.abs_err = wristloc::Vec3(r.mae, r.mae, r.mae);
    r.euclidean = r.mae * std::sqrt(3.0);
  }
  return t;
}

}  // namespace testing
