#pragma once

#include "swats/numkit.hpp"

#include <doctest.h>

namespace swats::testing {

inline ParamVector random_vector(RngStream& rng, Index n, double scale = 1.0) {
  ParamVector v(n);
  for (Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

inline ParamVector vec(std::initializer_list<double> values) {
  ParamVector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

/// Exact equality of every coordinate, NaN-free inputs assumed.
inline bool bit_equal(const ParamVector& a, const ParamVector& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

}  // namespace swats::testing
