#pragma once

#include <initializer_list>

#include "approxsense/error.hpp"
#include "approxsense/model.hpp"
#include "doctest.h"

namespace approxsense::test {

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Matrix rows(std::initializer_list<std::initializer_list<double>> r) {
  Matrix out(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double x : row) out(i, j++) = x;
    ++i;
  }
  return out;
}

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an approxsense::Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace approxsense::test
