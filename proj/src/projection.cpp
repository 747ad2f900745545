#include "glclef/projection.hpp"

#include <cmath>
#include <stdexcept>

namespace glclef {

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> mat_vec(const Matrix& m, const std::vector<double>& v) {
  std::vector<double> out(v.size(), 0.0);
  for (std::size_t i = 0; i < m.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) out[i] += m[i][j] * v[j];
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

bool normalize(std::vector<double>& v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) return false;
  for (double& x : v) x /= n;
  return true;
}

// Leading eigenpair of a symmetric PSD matrix. The start vector is fixed so
// that results are deterministic.
std::pair<double, std::vector<double>> power_iteration(const Matrix& c, double tol, std::size_t max_iter,
                                                       std::size_t& iterations) {
  const std::size_t d = c.size();
  std::vector<double> v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i);
  normalize(v);
  double lambda = dot(v, mat_vec(c, v));
  for (std::size_t it = 0; it < max_iter; ++it) {
    ++iterations;
    std::vector<double> w = mat_vec(c, v);
    if (!normalize(w)) return {0.0, v};  // v lies in the null space
    const double next = dot(w, mat_vec(c, w));
    v = std::move(w);
    if (std::abs(next - lambda) <= tol * std::max(1.0, std::abs(next))) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return {lambda, v};
}

}  // namespace

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / (std::sqrt(aa) * std::sqrt(bb));
}

Projection2D pca_2d(const Tensor& points, double tol, std::size_t max_iterations) {
  const std::size_t n = points.rows(), d = points.cols();
  if (n < 3) throw std::invalid_argument("projection needs at least 3 sentences, got " + std::to_string(n));
  if (d == 0) throw std::invalid_argument("projection needs non-empty vectors");
  std::vector<double> mu(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mu[c] += points(r, c);
  for (double& m : mu) m /= static_cast<double>(n);

  Matrix cov(d, std::vector<double>(d, 0.0));
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = points(r, i) - mu[i];
      for (std::size_t j = 0; j < d; ++j) cov[i][j] += xi * (points(r, j) - mu[j]);
    }
  const double denom = static_cast<double>(n - 1);
  Projection2D out;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) cov[i][j] /= denom;
    out.total_variance += cov[i][i];
  }

  std::vector<double> axes[2];
  Matrix work = cov;
  for (int k = 0; k < 2; ++k) {
    auto [lambda, v] = power_iteration(work, tol, max_iterations, out.iterations);
    if (lambda < 0.0) lambda = 0.0;
    out.eigenvalues[k] = lambda;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) work[i][j] -= lambda * v[i] * v[j];
    // Sign convention: largest-magnitude component positive.
    std::size_t big = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(v[i]) > std::abs(v[big])) big = i;
    if (v[big] < 0.0)
      for (double& x : v) x = -x;
    axes[k] = std::move(v);
  }
  out.explained = out.total_variance > 0.0 ? (out.eigenvalues[0] + out.eigenvalues[1]) / out.total_variance : 0.0;

  out.coords = Tensor(n, 2);
  for (std::size_t r = 0; r < n; ++r)
    for (int k = 0; k < 2; ++k) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += (points(r, c) - mu[c]) * axes[k][c];
      out.coords(r, static_cast<std::size_t>(k)) = s;
    }
  return out;
}

AlignmentStats alignment_stats(const Model& model, const std::vector<ExamplePair>& pairs, std::uint64_t seed) {
  if (pairs.size() < 2) throw std::invalid_argument("alignment statistics need at least two pairs");
  std::vector<Tensor> anchors, positives;
  for (const auto& p : pairs) {
    anchors.push_back(sentence_vector(model, p.anchor));
    positives.push_back(sentence_vector(model, p.positive));
  }
  Rng rng(seed);
  AlignmentStats s;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::size_t j = rng.below(pairs.size() - 1);
    if (j >= i) ++j;
    s.positive_cosine += cosine(anchors[i].values(), positives[i].values());
    s.random_cosine += cosine(anchors[i].values(), positives[j].values());
  }
  s.positive_cosine /= static_cast<double>(pairs.size());
  s.random_cosine /= static_cast<double>(pairs.size());
  return s;
}

}  // namespace glclef
