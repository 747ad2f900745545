#pragma once

#include <cstdint>
#include <vector>

#include "glclef/codeswitch.hpp"
#include "glclef/encoder.hpp"
#include "glclef/numcore.hpp"

namespace glclef {

struct Projection2D {
  Tensor coords;                   // [n x 2]
  double eigenvalues[2] = {0, 0};  // of the sample covariance, descending
  double total_variance = 0.0;     // trace of the covariance
  double explained = 0.0;          // (eigenvalues[0] + eigenvalues[1]) / total_variance
  std::size_t iterations = 0;
};

// Centers the rows of `points`, finds the two leading principal axes by power
// iteration with deflation (stopping once the Rayleigh quotient changes by
// less than tol) and projects onto them. Needs at least 3 rows.
Projection2D pca_2d(const Tensor& points, double tol = 1e-9, std::size_t max_iterations = 100000);

struct AlignmentStats {
  double positive_cosine = 0.0;  // mean cos(h_CLS(anchor), h_CLS(its positive))
  double random_cosine = 0.0;    // mean cos(h_CLS(anchor), h_CLS(another sentence's positive))
  double gap() const { return positive_cosine - random_cosine; }
};

// The "other" sentence for anchor i is drawn uniformly from j != i with a
// stream seeded by `seed`. Needs at least two pairs.
AlignmentStats alignment_stats(const Model& model, const std::vector<ExamplePair>& pairs, std::uint64_t seed);

double cosine(std::span<const double> a, std::span<const double> b);

}  // namespace glclef
