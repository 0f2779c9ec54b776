#pragma once

#include <Eigen/Dense>

#include "pglab/errors.hpp"
#include "pglab/random.hpp"

namespace pglab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline bool all_finite(const Eigen::Ref<const Vector>& v) { return v.allFinite(); }

/// Inverse-CDF draw from a discrete distribution over 0..size-1.
///
/// The cumulative sums partition [0, 1) in index order, so exactly one index
/// matches a draw. If rounding leaves the total slightly below 1 and the draw
/// lands in the gap, the last index with positive mass is returned.
template <class Derived>
Index sample_index(const Eigen::DenseBase<Derived>& dist, RandomStream& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  Index last_positive = -1;
  for (Index j = 0; j < dist.size(); ++j) {
    if (dist[j] <= 0.0) continue;
    acc += dist[j];
    last_positive = j;
    if (u < acc) return j;
  }
  if (last_positive < 0) throw PreconditionError("sample_index: distribution has no positive mass");
  return last_positive;
}

}  // namespace pglab
