#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lsnm/linalg.hpp"

namespace lsnm {

/// Open interval (lo, hi).
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return x > lo && x < hi; }
  double midpoint() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
};

/// Region adjacency W, degrees D and the proper-CAR precision Q(rho) = D - rho W + ridge I.
///
/// Immutable after construction. Degrees are recomputed from W. When a region
/// has no neighbours and no ridge is given, a ridge of 1e-8 * max(D) is added so
/// that Q stays positive definite; the admissible interval is then computed from
/// the ridged degrees.
class RegionGraph {
 public:
  static constexpr int max_regions = 512;

  explicit RegionGraph(Matrix adjacency, std::vector<std::string> labels = {},
                       std::optional<double> ridge = std::nullopt);

  int n_regions() const { return static_cast<int>(w_.rows()); }
  const Matrix& adjacency() const { return w_; }
  const Vector& degree() const { return d_; }
  double ridge() const { return ridge_; }
  const std::vector<std::string>& labels() const { return labels_; }

  int n_edges() const;
  bool is_connected() const;
  /// Index of a region label, or -1.
  int index_of(std::string_view label) const;

  /// (1/lambda_min, 1/lambda_max) of D^{-1/2} W D^{-1/2}, degrees taken after ridge.
  Interval admissible_interval() const;

  /// D - rho W + ridge I. Throws RhoOutOfRange outside the open admissible interval.
  Matrix precision(double rho) const;

  /// Cholesky factor of precision(rho); throws NotPositiveDefinite if it fails even with a ridge.
  Eigen::LLT<Matrix> factorize(double rho) const;

  /// The default ridge applied when one is needed: 1e-8 * max(D).
  double default_ridge() const;

 private:
  Matrix w_;
  Vector d_;
  double ridge_ = 0.0;
  std::vector<std::string> labels_;
  std::optional<Interval> interval_;
  bool isolated_ = false;
};

/// One draw from N(0, tau_u^2 Q(rho)^{-1}).
Vector sample_gmrf(const RegionGraph& graph, double rho, double tau_u, RandomStream& rng);

/// Draw given an existing factor of Q(rho).
Vector sample_gmrf(const Eigen::LLT<Matrix>& q_factor, double tau_u, RandomStream& rng);

/// Read an edge-list CSV (`region_a,region_b[,weight]`) and resolve names against `labels`.
RegionGraph load_edge_list(const std::string& path, const std::vector<std::string>& labels);

/// Write the upper triangle of W as an edge list.
void write_edge_list(const std::string& path, const RegionGraph& graph);

}  // namespace lsnm
