#include "lsnm/region_graph.hpp"

#include <algorithm>
#include <queue>

#include "lsnm/csv.hpp"

namespace lsnm {

RegionGraph::RegionGraph(Matrix adjacency, std::vector<std::string> labels, std::optional<double> ridge)
    : w_(std::move(adjacency)), labels_(std::move(labels)) {
  const Index r = w_.rows();
  if (r != w_.cols()) throw DimensionMismatch("adjacency must be square");
  if (r < 1) throw ConfigInvalid("region graph needs at least one region");
  if (r > max_regions)
    throw ConfigInvalid("region graph has " + std::to_string(r) + " regions; dense storage supports at most " +
                        std::to_string(max_regions));
  for (Index i = 0; i < r; ++i) {
    if (w_(i, i) != 0.0) throw ConfigInvalid("adjacency diagonal must be zero");
    for (Index j = 0; j < r; ++j) {
      if (!(w_(i, j) >= 0.0)) throw ConfigInvalid("adjacency weights must be nonnegative");
      if (w_(i, j) != w_(j, i)) throw ConfigInvalid("adjacency must be symmetric");
    }
  }
  if (labels_.empty()) {
    for (Index i = 0; i < r; ++i) labels_.push_back("R" + std::to_string(i + 1));
  } else if (static_cast<Index>(labels_.size()) != r) {
    throw DimensionMismatch("label count does not match adjacency size");
  }

  d_ = w_.rowwise().sum();
  isolated_ = (d_.array() <= 0.0).any();
  if (ridge) {
    if (*ridge < 0.0) throw ConfigInvalid("ridge must be nonnegative");
    ridge_ = *ridge;
  } else {
    ridge_ = isolated_ ? default_ridge() : 0.0;
  }

  if (isolated_ && ridge_ <= 0.0) return;  // admissible_interval() throws IsolatedRegion
  if (w_.isZero(0.0)) return;              // no edges: no interval either

  const Vector dr = d_.array() + ridge_;
  const Vector s = dr.array().rsqrt();
  const Matrix m = s.asDiagonal() * w_ * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  interval_ = Interval{1.0 / lmin, 1.0 / lmax};
}

double RegionGraph::default_ridge() const {
  const double dmax = d_.maxCoeff();
  return 1e-8 * (dmax > 0.0 ? dmax : 1.0);
}

int RegionGraph::n_edges() const {
  int count = 0;
  for (Index i = 0; i < w_.rows(); ++i)
    for (Index j = i + 1; j < w_.cols(); ++j)
      if (w_(i, j) > 0.0) ++count;
  return count;
}

bool RegionGraph::is_connected() const {
  const int r = n_regions();
  std::vector<bool> seen(r, false);
  std::queue<int> q;
  q.push(0);
  seen[0] = true;
  int visited = 1;
  while (!q.empty()) {
    const int a = q.front();
    q.pop();
    for (int b = 0; b < r; ++b) {
      if (w_(a, b) > 0.0 && !seen[b]) {
        seen[b] = true;
        ++visited;
        q.push(b);
      }
    }
  }
  return visited == r;
}

int RegionGraph::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

Interval RegionGraph::admissible_interval() const {
  if (isolated_ && ridge_ <= 0.0) throw IsolatedRegion("graph has a region with no neighbours and zero ridge");
  if (!interval_) throw ConfigInvalid("graph has no edges; the CAR dependence parameter is undefined");
  return *interval_;
}

Matrix RegionGraph::precision(double rho) const {
  const Interval iv = admissible_interval();
  if (!iv.contains(rho))
    throw RhoOutOfRange("rho = " + csv::format_double(rho) + " outside admissible interval (" +
                        csv::format_double(iv.lo) + ", " + csv::format_double(iv.hi) + ")");
  Matrix q = -rho * w_;
  q.diagonal() = d_.array() + ridge_;
  return q;
}

Eigen::LLT<Matrix> RegionGraph::factorize(double rho) const {
  Matrix q = precision(rho);
  Eigen::LLT<Matrix> llt(q);
  if (llt.info() == Eigen::Success) return llt;
  if (ridge_ == 0.0) {
    q.diagonal().array() += default_ridge();
    llt.compute(q);
    if (llt.info() == Eigen::Success) return llt;
  }
  throw NotPositiveDefinite("Q(rho) factorization failed at rho = " + csv::format_double(rho) +
                            "; the adjacency matrix is malformed");
}

Vector sample_gmrf(const Eigen::LLT<Matrix>& q_factor, double tau_u, RandomStream& rng) {
  if (!(tau_u > 0.0)) throw ConfigInvalid("tau_u must be strictly positive");
  const Vector z = rng.gaussian_vector(q_factor.rows());
  return tau_u * q_factor.matrixU().solve(z);
}

Vector sample_gmrf(const RegionGraph& graph, double rho, double tau_u, RandomStream& rng) {
  return sample_gmrf(graph.factorize(rho), tau_u, rng);
}

RegionGraph load_edge_list(const std::string& path, const std::vector<std::string>& labels) {
  const auto table = csv::read(path);
  const int ca = table.require("region_a", path);
  const int cb = table.require("region_b", path);
  const int cw = table.column("weight");
  const auto r = static_cast<Index>(labels.size());
  Matrix w = Matrix::Zero(r, r);
  auto resolve = [&](const std::string& name) {
    auto it = std::find(labels.begin(), labels.end(), name);
    if (it == labels.end()) throw SchemaError(path + ": region label '" + name + "' not present in the dataset");
    return static_cast<Index>(it - labels.begin());
  };
  for (const auto& row : table.rows) {
    const Index a = resolve(row[ca]);
    const Index b = resolve(row[cb]);
    if (a == b) throw SchemaError(path + ": self-loop on region '" + row[ca] + "'");
    double weight = 1.0;
    if (cw >= 0 && !row[cw].empty()) weight = csv::parse_double(row[cw], path);
    if (!(weight >= 0.0)) throw SchemaError(path + ": negative edge weight");
    if (w(a, b) != 0.0) throw SchemaError(path + ": duplicate edge " + row[ca] + "-" + row[cb]);
    w(a, b) = weight;
    w(b, a) = weight;
  }
  return RegionGraph(std::move(w), labels);
}

void write_edge_list(const std::string& path, const RegionGraph& graph) {
  csv::Writer out(path);
  out.row({"region_a", "region_b", "weight"});
  const auto& w = graph.adjacency();
  for (Index i = 0; i < w.rows(); ++i)
    for (Index j = i + 1; j < w.cols(); ++j)
      if (w(i, j) > 0.0) out.row({graph.labels()[i], graph.labels()[j], csv::format_double(w(i, j))});
}

}  // namespace lsnm
