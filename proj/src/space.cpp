#include "finelab/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <queue>
#include <sstream>

#include "finelab/error.hpp"
#include "finelab/rng.hpp"

namespace finelab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> dijkstra(const WeightedGraphSpace& s, NodeIndex src) {
  std::vector<double> d(s.size(), kInf);
  using Item = std::pair<double, NodeIndex>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  d[static_cast<std::size_t>(src)] = 0.0;
  pq.emplace(0.0, src);
  const auto edges = s.edges();
  while (!pq.empty()) {
    auto [du, u] = pq.top();
    pq.pop();
    if (du > d[static_cast<std::size_t>(u)]) continue;
    for (auto e : s.incident(u)) {
      const Edge& ed = edges[static_cast<std::size_t>(e)];
      const NodeIndex v = ed.a == u ? ed.b : ed.a;
      const double nd = du + ed.length;
      if (nd < d[static_cast<std::size_t>(v)]) {
        d[static_cast<std::size_t>(v)] = nd;
        pq.emplace(nd, v);
      }
    }
  }
  return d;
}

bool is_connected(std::size_t n, std::span<const std::int32_t> offsets, std::span<const std::int32_t> inc,
                  std::span<const Edge> edges) {
  if (n == 0) return false;
  std::vector<std::uint8_t> seen(n, 0);
  std::vector<NodeIndex> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const NodeIndex u = stack.back();
    stack.pop_back();
    for (auto k = offsets[static_cast<std::size_t>(u)]; k < offsets[static_cast<std::size_t>(u) + 1]; ++k) {
      const Edge& e = edges[static_cast<std::size_t>(inc[static_cast<std::size_t>(k)])];
      const NodeIndex v = e.a == u ? e.b : e.a;
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

/// Average of |x|^alpha over the box [lo, hi] by a 4-point-per-axis midpoint rule.
double box_density(std::span<const double> lo, std::span<const double> hi, double alpha) {
  if (alpha == 0.0) return 1.0;
  const int dim = static_cast<int>(lo.size());
  constexpr int kSub = 4;
  int total = 1;
  for (int k = 0; k < dim; ++k) total *= kSub;
  double sum = 0.0;
  std::vector<double> x(static_cast<std::size_t>(dim));
  for (int s = 0; s < total; ++s) {
    int rem = s;
    double r2 = 0.0;
    for (int k = 0; k < dim; ++k) {
      const int q = rem % kSub;
      rem /= kSub;
      const double t = (q + 0.5) / kSub;
      x[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)] +
                                       t * (hi[static_cast<std::size_t>(k)] - lo[static_cast<std::size_t>(k)]);
      r2 += x[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(k)];
    }
    sum += std::pow(std::sqrt(r2), alpha);
  }
  return sum / total;
}

SpacePtr build_tensor_grid(const std::vector<std::vector<double>>& coords, double alpha,
                           std::size_t max_nodes, SpaceMeta meta) {
  const int dim = static_cast<int>(coords.size());
  std::size_t n = 1;
  for (const auto& c : coords) {
    require(c.size() >= 2, ErrorCode::DegenerateExtent, "each axis needs at least two nodes");
    if (n > max_nodes / c.size()) {
      fail(ErrorCode::NodeBudgetExceeded, "grid exceeds the node cap of " + std::to_string(max_nodes));
    }
    n *= c.size();
  }
  require(n <= max_nodes, ErrorCode::NodeBudgetExceeded,
          "grid of " + std::to_string(n) + " nodes exceeds the node cap of " + std::to_string(max_nodes));

  // Dual cell bounds per axis.
  std::vector<std::vector<double>> cell_lo(static_cast<std::size_t>(dim));
  std::vector<std::vector<double>> cell_hi(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) {
    const auto& c = coords[static_cast<std::size_t>(k)];
    auto& lo = cell_lo[static_cast<std::size_t>(k)];
    auto& hi = cell_hi[static_cast<std::size_t>(k)];
    lo.resize(c.size());
    hi.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      lo[i] = i == 0 ? c[0] : 0.5 * (c[i - 1] + c[i]);
      hi[i] = i + 1 == c.size() ? c[i] : 0.5 * (c[i] + c[i + 1]);
    }
  }

  std::vector<std::size_t> stride(static_cast<std::size_t>(dim), 1);
  for (int k = 1; k < dim; ++k) {
    stride[static_cast<std::size_t>(k)] =
        stride[static_cast<std::size_t>(k - 1)] * coords[static_cast<std::size_t>(k - 1)].size();
  }

  std::vector<NodeId> ids(n);
  std::vector<double> mu(n);
  std::vector<double> density(n);
  std::vector<double> pos(n * static_cast<std::size_t>(dim));
  std::vector<std::size_t> multi(static_cast<std::size_t>(dim));
  std::vector<double> blo(static_cast<std::size_t>(dim));
  std::vector<double> bhi(static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rem = i;
    double vol = 1.0;
    for (int k = 0; k < dim; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      multi[uk] = rem % coords[uk].size();
      rem /= coords[uk].size();
      pos[i * static_cast<std::size_t>(dim) + uk] = coords[uk][multi[uk]];
      blo[uk] = cell_lo[uk][multi[uk]];
      bhi[uk] = cell_hi[uk][multi[uk]];
      vol *= bhi[uk] - blo[uk];
    }
    ids[i] = static_cast<NodeId>(i);
    density[i] = box_density(blo, bhi, alpha);
    mu[i] = density[i] * vol;
  }

  std::vector<Edge> edges;
  edges.reserve(n * static_cast<std::size_t>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t rem = i;
    for (int k = 0; k < dim; ++k) {
      multi[static_cast<std::size_t>(k)] = rem % coords[static_cast<std::size_t>(k)].size();
      rem /= coords[static_cast<std::size_t>(k)].size();
    }
    for (int k = 0; k < dim; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (multi[uk] + 1 >= coords[uk].size()) continue;
      const std::size_t j = i + stride[uk];
      const double len = coords[uk][multi[uk] + 1] - coords[uk][multi[uk]];
      double face = 1.0;
      for (int m = 0; m < dim; ++m) {
        if (m == k) continue;
        const auto um = static_cast<std::size_t>(m);
        face *= cell_hi[um][multi[um]] - cell_lo[um][multi[um]];
      }
      const double cond = len * face * 0.5 * (density[i] + density[j]);
      edges.push_back({static_cast<NodeIndex>(i), static_cast<NodeIndex>(j), len, cond});
    }
  }
  return std::make_shared<WeightedGraphSpace>(dim, std::move(ids), std::move(mu), std::move(pos),
                                              std::move(edges), std::move(meta));
}

std::vector<double> graded_axis(double lo, double hi, double center, double h_min, double h_max,
                                double growth) {
  auto side = [&](double length) {
    std::vector<double> offsets{0.0};
    double step = h_min;
    double at = 0.0;
    while (length - at > 1e-12 * length) {
      if (length - at < 1.5 * step) {
        offsets.push_back(length);
        break;
      }
      at += step;
      offsets.push_back(at);
      step = std::min(h_max, step * growth);
    }
    return offsets;
  };
  std::vector<double> coords;
  if (center > lo) {
    const auto left = side(center - lo);
    for (auto it = left.rbegin(); it != left.rend(); ++it) coords.push_back(center - *it);
    coords.back() = center;
    coords.front() = lo;
  } else {
    coords.push_back(center);
  }
  if (hi > center) {
    const auto right = side(hi - center);
    for (std::size_t i = 1; i < right.size(); ++i) coords.push_back(center + right[i]);
    coords.back() = hi;
  }
  return coords;
}

}  // namespace

// ---------------------------------------------------------------------------

WeightedGraphSpace::WeightedGraphSpace(int dim, std::vector<NodeId> ids, std::vector<double> mu,
                                       std::vector<double> positions, std::vector<Edge> edges,
                                       SpaceMeta meta)
    : dim_(dim),
      ids_(std::move(ids)),
      mu_(std::move(mu)),
      positions_(std::move(positions)),
      edges_(std::move(edges)),
      meta_(std::move(meta)) {
  const std::size_t n = mu_.size();
  require(n >= 1, ErrorCode::InvalidArgument, "space needs at least one node");
  require(ids_.size() == n, ErrorCode::InvalidArgument, "id and measure counts differ");
  require(dim_ >= 0, ErrorCode::InvalidArgument, "dimension must be nonnegative");
  require(positions_.empty() || (dim_ >= 1 && positions_.size() == n * static_cast<std::size_t>(dim_)),
          ErrorCode::InvalidArgument, "positions must be n x dim");
  require(meta_.poincare_dilation >= 1.0, ErrorCode::InvalidArgument, "poincare dilation must be >= 1");
  require(!meta_.spacing || *meta_.spacing > 0.0, ErrorCode::InvalidArgument, "spacing must be positive");
  index_.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(std::isfinite(mu_[i]) && mu_[i] > 0.0, ErrorCode::NonpositiveWeight,
            "node " + std::to_string(ids_[i]) + " has nonpositive measure");
    if (!index_.emplace(ids_[i], static_cast<NodeIndex>(i)).second) {
      fail(ErrorCode::InvalidArgument, "duplicate node id " + std::to_string(ids_[i]));
    }
  }
  std::vector<std::int32_t> degree(n, 0);
  for (const Edge& e : edges_) {
    require(e.a >= 0 && e.b >= 0 && static_cast<std::size_t>(e.a) < n && static_cast<std::size_t>(e.b) < n,
            ErrorCode::UnknownNode, "edge endpoint out of range");
    require(e.a != e.b, ErrorCode::InvalidArgument, "self-loop at node " + std::to_string(ids_[static_cast<std::size_t>(e.a)]));
    require(std::isfinite(e.length) && e.length > 0.0, ErrorCode::NonpositiveWeight, "edge length must be positive");
    require(std::isfinite(e.conductance) && e.conductance > 0.0, ErrorCode::NonpositiveWeight,
            "edge conductance must be positive");
    ++degree[static_cast<std::size_t>(e.a)];
    ++degree[static_cast<std::size_t>(e.b)];
  }
  incident_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) incident_offsets_[i + 1] = incident_offsets_[i] + degree[i];
  incident_edges_.resize(static_cast<std::size_t>(incident_offsets_[n]));
  std::vector<std::int32_t> fill(incident_offsets_.begin(), incident_offsets_.end() - 1);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    incident_edges_[static_cast<std::size_t>(fill[static_cast<std::size_t>(edges_[e].a)]++)] = static_cast<std::int32_t>(e);
    incident_edges_[static_cast<std::size_t>(fill[static_cast<std::size_t>(edges_[e].b)]++)] = static_cast<std::int32_t>(e);
  }
  require(is_connected(n, incident_offsets_, incident_edges_, edges_), ErrorCode::Disconnected,
          "graph is not connected");
}

std::span<const double> WeightedGraphSpace::position(NodeIndex i) const {
  require(has_positions(), ErrorCode::NoPositions, "space has no node positions");
  const auto d = static_cast<std::size_t>(dim_);
  return {positions_.data() + static_cast<std::size_t>(i) * d, d};
}

std::span<const std::int32_t> WeightedGraphSpace::incident(NodeIndex i) const {
  const auto lo = static_cast<std::size_t>(incident_offsets_[static_cast<std::size_t>(i)]);
  const auto hi = static_cast<std::size_t>(incident_offsets_[static_cast<std::size_t>(i) + 1]);
  return {incident_edges_.data() + lo, hi - lo};
}

NodeIndex WeightedGraphSpace::index_of(NodeId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) fail(ErrorCode::UnknownNode, "unknown node id " + std::to_string(id));
  return it->second;
}

double WeightedGraphSpace::total_measure() const {
  double s = 0.0;
  for (double m : mu_) s += m;
  return s;
}

double WeightedGraphSpace::edge_coefficient(std::size_t e, double p) const {
  const Edge& ed = edges_[e];
  return ed.conductance / std::pow(ed.length, p);
}

double WeightedGraphSpace::distance(NodeIndex i, NodeIndex j) const {
  if (has_positions()) {
    const auto a = position(i);
    const auto b = position(j);
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  }
  return (*distances_from(i))[static_cast<std::size_t>(j)];
}

std::shared_ptr<const std::vector<double>> WeightedGraphSpace::distances_from(NodeIndex center) const {
  {
    std::lock_guard lock(cache_mutex_);
    auto it = distance_cache_.find(center);
    if (it != distance_cache_.end()) return it->second;
  }
  std::shared_ptr<const std::vector<double>> d;
  if (has_positions()) {
    d = std::make_shared<const std::vector<double>>(distances_from_point(position(center)));
  } else {
    d = std::make_shared<const std::vector<double>>(dijkstra(*this, center));
  }
  std::lock_guard lock(cache_mutex_);
  return distance_cache_.emplace(center, d).first->second;
}

std::vector<double> WeightedGraphSpace::distances_from_point(std::span<const double> x) const {
  require(has_positions(), ErrorCode::NoPositions, "point distances need node positions");
  require(x.size() == static_cast<std::size_t>(dim_), ErrorCode::InvalidArgument, "point dimension mismatch");
  std::vector<double> d(size());
  const auto dd = static_cast<std::size_t>(dim_);
  for (std::size_t i = 0; i < size(); ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < dd; ++k) {
      const double t = positions_[i * dd + k] - x[k];
      s += t * t;
    }
    d[i] = std::sqrt(s);
  }
  return d;
}

NodeIndex WeightedGraphSpace::nearest_node(std::span<const double> x) const {
  const auto d = distances_from_point(x);
  return static_cast<NodeIndex>(std::min_element(d.begin(), d.end()) - d.begin());
}

double WeightedGraphSpace::diameter() const {
  if (has_positions()) {
    double s = 0.0;
    const auto dd = static_cast<std::size_t>(dim_);
    for (std::size_t k = 0; k < dd; ++k) {
      double lo = kInf;
      double hi = -kInf;
      for (std::size_t i = 0; i < size(); ++i) {
        lo = std::min(lo, positions_[i * dd + k]);
        hi = std::max(hi, positions_[i * dd + k]);
      }
      s += (hi - lo) * (hi - lo);
    }
    return std::sqrt(s);
  }
  const auto d0 = distances_from(0);
  const auto far = static_cast<NodeIndex>(std::max_element(d0->begin(), d0->end()) - d0->begin());
  const auto d1 = distances_from(far);
  return *std::max_element(d1->begin(), d1->end());
}

// ---------------------------------------------------------------------------

Region::Region(std::vector<NodeIndex> nodes) : nodes_(std::move(nodes)) {
  std::sort(nodes_.begin(), nodes_.end());
  nodes_.erase(std::unique(nodes_.begin(), nodes_.end()), nodes_.end());
}

Region Region::all(const WeightedGraphSpace& space) {
  std::vector<NodeIndex> v(space.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<NodeIndex>(i);
  return Region(std::move(v));
}

Region Region::from_mask(const std::vector<std::uint8_t>& mask) {
  std::vector<NodeIndex> v;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) v.push_back(static_cast<NodeIndex>(i));
  }
  Region r;
  r.nodes_ = std::move(v);
  return r;
}

bool Region::contains(NodeIndex i) const { return std::binary_search(nodes_.begin(), nodes_.end(), i); }

std::vector<std::uint8_t> Region::mask(std::size_t n) const {
  std::vector<std::uint8_t> m(n, 0);
  for (auto i : nodes_) m[static_cast<std::size_t>(i)] = 1;
  return m;
}

Region Region::unite(const Region& other) const {
  Region r;
  std::set_union(nodes_.begin(), nodes_.end(), other.nodes_.begin(), other.nodes_.end(),
                 std::back_inserter(r.nodes_));
  return r;
}

Region Region::intersect(const Region& other) const {
  Region r;
  std::set_intersection(nodes_.begin(), nodes_.end(), other.nodes_.begin(), other.nodes_.end(),
                        std::back_inserter(r.nodes_));
  return r;
}

Region Region::minus(const Region& other) const {
  Region r;
  std::set_difference(nodes_.begin(), nodes_.end(), other.nodes_.begin(), other.nodes_.end(),
                      std::back_inserter(r.nodes_));
  return r;
}

Region Region::complement(const WeightedGraphSpace& space) const { return all(space).minus(*this); }

bool Region::subset_of(const Region& other) const {
  return std::includes(other.nodes_.begin(), other.nodes_.end(), nodes_.begin(), nodes_.end());
}

double Region::measure(const WeightedGraphSpace& space) const {
  double s = 0.0;
  for (auto i : nodes_) s += space.mu(i);
  return s;
}

// ---------------------------------------------------------------------------

SpacePtr build_grid(const GridOptions& o) {
  require(o.dim >= 1 && o.dim <= 3, ErrorCode::InvalidArgument, "grid dimension must be 1, 2 or 3");
  require(o.lo.size() == static_cast<std::size_t>(o.dim) && o.hi.size() == o.lo.size(),
          ErrorCode::InvalidArgument, "extent must give one interval per axis");
  require(o.h > 0.0, ErrorCode::InvalidArgument, "spacing must be positive");
  require(o.weight_exponent > -o.dim, ErrorCode::InvalidArgument,
          "weight exponent must exceed -dim for local integrability");
  std::vector<std::vector<double>> coords;
  for (int k = 0; k < o.dim; ++k) {
    const double lo = o.lo[static_cast<std::size_t>(k)];
    const double hi = o.hi[static_cast<std::size_t>(k)];
    require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, ErrorCode::DegenerateExtent,
            "extent along axis " + std::to_string(k) + " is degenerate");
    const double cells = (hi - lo) / o.h;
    const double rounded = std::round(cells);
    require(rounded >= 1.0 && std::abs(cells - rounded) <= 1e-9 * std::max(1.0, cells),
            ErrorCode::InvalidArgument, "spacing does not divide the extent");
    if (rounded + 1.0 > static_cast<double>(o.max_nodes)) {
      fail(ErrorCode::NodeBudgetExceeded, "grid exceeds the node cap");
    }
    const auto m = static_cast<std::size_t>(rounded);
    std::vector<double> c(m + 1);
    for (std::size_t i = 0; i <= m; ++i) c[i] = lo + static_cast<double>(i) * o.h;
    c[m] = hi;
    coords.push_back(std::move(c));
  }
  SpaceMeta meta;
  meta.spacing = o.h;
  meta.weight_exponent = o.weight_exponent;
  meta.builder = "grid";
  meta.parameters = {{"dim", o.dim}, {"lo", o.lo}, {"hi", o.hi}, {"h", o.h}, {"weight_exponent", o.weight_exponent}};
  return build_tensor_grid(coords, o.weight_exponent, o.max_nodes, std::move(meta));
}

SpacePtr build_graded_grid(const GradedGridOptions& o) {
  require(o.dim >= 1 && o.dim <= 3, ErrorCode::InvalidArgument, "grid dimension must be 1, 2 or 3");
  require(o.lo.size() == static_cast<std::size_t>(o.dim) && o.hi.size() == o.lo.size() &&
              o.center.size() == o.lo.size(),
          ErrorCode::InvalidArgument, "extent and center must match the dimension");
  require(o.h_min > 0.0 && o.h_max >= o.h_min && o.growth >= 1.0, ErrorCode::InvalidArgument,
          "graded grid needs 0 < h_min <= h_max and growth >= 1");
  require(o.weight_exponent > -o.dim, ErrorCode::InvalidArgument,
          "weight exponent must exceed -dim for local integrability");
  std::vector<std::vector<double>> coords;
  for (int k = 0; k < o.dim; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    require(o.hi[uk] > o.lo[uk], ErrorCode::DegenerateExtent, "degenerate extent");
    require(o.center[uk] >= o.lo[uk] && o.center[uk] <= o.hi[uk], ErrorCode::InvalidArgument,
            "grading center must lie inside the extent");
    coords.push_back(graded_axis(o.lo[uk], o.hi[uk], o.center[uk], o.h_min, o.h_max, o.growth));
  }
  SpaceMeta meta;
  meta.spacing = o.h_max;
  meta.weight_exponent = o.weight_exponent;
  meta.builder = "graded_grid";
  meta.parameters = {{"dim", o.dim},     {"lo", o.lo},         {"hi", o.hi},
                     {"center", o.center}, {"h_min", o.h_min}, {"h_max", o.h_max},
                     {"growth", o.growth}, {"weight_exponent", o.weight_exponent}};
  return build_tensor_grid(coords, o.weight_exponent, o.max_nodes, std::move(meta));
}

SpacePtr build_cube_grid(int dim, double half_width, double h, double weight_exponent) {
  GridOptions o;
  o.dim = dim;
  o.lo.assign(static_cast<std::size_t>(dim), -half_width);
  o.hi.assign(static_cast<std::size_t>(dim), half_width);
  o.h = h;
  o.weight_exponent = weight_exponent;
  return build_grid(o);
}

double unit_sphere_area(int n) {
  require(n >= 1, ErrorCode::InvalidArgument, "sphere dimension must be >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

SpacePtr build_radial(const RadialOptions& o) {
  require(o.n >= 1, ErrorCode::InvalidArgument, "radial dimension must be >= 1");
  require(o.rmin >= 0.0, ErrorCode::InvalidArgument, "rmin must be nonnegative");
  require(o.rmax > o.rmin, ErrorCode::DegenerateExtent, "rmin must be below rmax");
  require(o.h > 0.0, ErrorCode::InvalidArgument, "spacing must be positive");
  const double expo = o.n - 1 + o.weight_exponent;
  require(expo > -1.0, ErrorCode::InvalidArgument, "weight exponent must exceed -n");
  const double cells = (o.rmax - o.rmin) / o.h;
  const auto m = static_cast<std::size_t>(std::llround(cells));
  require(m >= 1, ErrorCode::DegenerateExtent, "radial grid is empty");
  require(std::abs(cells - static_cast<double>(m)) <= 1e-9 * std::max(1.0, cells), ErrorCode::InvalidArgument,
          "spacing does not divide rmax - rmin");
  const double omega = unit_sphere_area(o.n);
  auto prim = [&](double r) { return std::pow(r, expo + 1.0) / (expo + 1.0); };
  std::vector<double> r(m + 1);
  for (std::size_t i = 0; i <= m; ++i) r[i] = o.rmin + static_cast<double>(i) * o.h;
  r[m] = o.rmax;
  std::vector<NodeId> ids(m + 1);
  std::vector<double> mu(m + 1);
  for (std::size_t i = 0; i <= m; ++i) {
    const double lo = i == 0 ? r[0] : 0.5 * (r[i - 1] + r[i]);
    const double hi = i == m ? r[m] : 0.5 * (r[i] + r[i + 1]);
    ids[i] = static_cast<NodeId>(i);
    mu[i] = omega * (prim(hi) - prim(lo));
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < m; ++i) {
    const double len = r[i + 1] - r[i];
    const double mid = 0.5 * (r[i] + r[i + 1]);
    edges.push_back({static_cast<NodeIndex>(i), static_cast<NodeIndex>(i + 1), len,
                     omega * std::pow(mid, expo) * len});
  }
  SpaceMeta meta;
  meta.spacing = o.h;
  meta.weight_exponent = o.weight_exponent;
  meta.builder = "radial";
  meta.parameters = {{"n", o.n}, {"rmin", o.rmin}, {"rmax", o.rmax}, {"h", o.h}, {"weight_exponent", o.weight_exponent}};
  return std::make_shared<WeightedGraphSpace>(1, std::move(ids), std::move(mu), std::move(r), std::move(edges),
                                              std::move(meta));
}

// ---------------------------------------------------------------------------

SpacePtr parse_space(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int dim = -1;
  std::vector<NodeId> ids;
  std::vector<double> mu;
  std::vector<double> pos;
  bool any_pos = false;
  bool any_without = false;
  struct RawEdge {
    NodeId a, b;
    double len, cond;
    int line;
  };
  std::vector<RawEdge> raw;
  auto perr = [&](const std::string& msg) {
    fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "space") {
      std::string kv;
      if (!(ls >> kv) || kv.rfind("dim=", 0) != 0) perr("expected 'space dim=<d>'");
      try {
        dim = std::stoi(kv.substr(4));
      } catch (const std::exception&) {
        perr("bad dimension");
      }
      if (dim < 0) perr("dimension must be nonnegative");
    } else if (tag == "n") {
      if (dim < 0) perr("node before header");
      NodeId id;
      double m;
      if (!(ls >> id >> m)) perr("expected 'n <id> <mu> [coords]'");
      std::vector<double> x;
      double v;
      while (ls >> v) x.push_back(v);
      if (!ls.eof()) perr("trailing garbage on node line");
      if (x.empty()) {
        any_without = true;
      } else {
        if (static_cast<int>(x.size()) != dim) perr("node has " + std::to_string(x.size()) + " coordinates, expected " + std::to_string(dim));
        any_pos = true;
        pos.insert(pos.end(), x.begin(), x.end());
      }
      if (!(m > 0.0) || !std::isfinite(m)) {
        fail(ErrorCode::NonpositiveWeight, "line " + std::to_string(line_no) + ": nonpositive node measure");
      }
      ids.push_back(id);
      mu.push_back(m);
    } else if (tag == "e") {
      RawEdge e{};
      if (!(ls >> e.a >> e.b >> e.len >> e.cond)) perr("expected 'e <a> <b> <length> <conductance>'");
      std::string extra;
      if (ls >> extra) perr("trailing garbage on edge line");
      if (!(e.len > 0.0) || !(e.cond > 0.0) || !std::isfinite(e.len) || !std::isfinite(e.cond)) {
        fail(ErrorCode::NonpositiveWeight, "line " + std::to_string(line_no) + ": nonpositive edge weight");
      }
      e.line = line_no;
      raw.push_back(e);
    } else {
      perr("unknown record '" + tag + "'");
    }
  }
  if (dim < 0) fail(ErrorCode::ParseError, "missing 'space dim=<d>' header");
  if (any_pos && any_without) fail(ErrorCode::ParseError, "either all nodes or none carry coordinates");
  std::unordered_map<NodeId, NodeIndex> index;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!index.emplace(ids[i], static_cast<NodeIndex>(i)).second) {
      fail(ErrorCode::ParseError, "duplicate node id " + std::to_string(ids[i]));
    }
  }
  std::vector<Edge> edges;
  for (const auto& e : raw) {
    auto ia = index.find(e.a);
    auto ib = index.find(e.b);
    if (ia == index.end() || ib == index.end()) {
      fail(ErrorCode::UnknownNode, "line " + std::to_string(e.line) + ": edge references unknown node " +
                                       std::to_string(ia == index.end() ? e.a : e.b));
    }
    edges.push_back({ia->second, ib->second, e.len, e.cond});
  }
  SpaceMeta meta;
  meta.builder = "file";
  return std::make_shared<WeightedGraphSpace>(dim, std::move(ids), std::move(mu),
                                              any_pos ? std::move(pos) : std::vector<double>{},
                                              std::move(edges), std::move(meta));
}

SpacePtr load_space(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  auto s = parse_space(ss.str());
  return s;
}

std::string format_space(const WeightedGraphSpace& s) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "space dim=" << s.dim() << "\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto ni = static_cast<NodeIndex>(i);
    out << "n " << s.id(ni) << ' ' << s.mu(ni);
    if (s.has_positions()) {
      for (double x : s.position(ni)) out << ' ' << x;
    }
    out << "\n";
  }
  for (const Edge& e : s.edges()) {
    out << "e " << s.id(e.a) << ' ' << s.id(e.b) << ' ' << e.length << ' ' << e.conductance << "\n";
  }
  return out.str();
}

void save_space(const WeightedGraphSpace& space, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << format_space(space);
}

// ---------------------------------------------------------------------------

Region metric_ball(const WeightedGraphSpace& space, NodeIndex center, double r, bool closed) {
  require(center >= 0 && static_cast<std::size_t>(center) < space.size(), ErrorCode::UnknownNode,
          "ball center out of range");
  require(r > 0.0, ErrorCode::InvalidArgument, "ball radius must be positive");
  const auto d = space.distances_from(center);
  std::vector<NodeIndex> v;
  for (std::size_t i = 0; i < d->size(); ++i) {
    if (closed ? (*d)[i] <= r : (*d)[i] < r) v.push_back(static_cast<NodeIndex>(i));
  }
  return Region(std::move(v));
}

Region metric_ball(const WeightedGraphSpace& space, const Ball& b) {
  return metric_ball(space, b.center, b.radius, b.closed);
}

Region point_ball(const WeightedGraphSpace& space, std::span<const double> center, double r, bool closed) {
  require(r > 0.0, ErrorCode::InvalidArgument, "ball radius must be positive");
  const auto d = space.distances_from_point(center);
  std::vector<NodeIndex> v;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (closed ? d[i] <= r : d[i] < r) v.push_back(static_cast<NodeIndex>(i));
  }
  return Region(std::move(v));
}

namespace {

std::vector<std::uint8_t> descriptor_mask(const WeightedGraphSpace& space, const AnalyticSet& set) {
  using Kind = AnalyticSet::Kind;
  const std::size_t n = space.size();
  const auto& node = set.node();
  switch (node.kind) {
    case Kind::Empty:
      return std::vector<std::uint8_t>(n, 0);
    case Kind::Singleton: {
      std::vector<std::uint8_t> m(n, 0);
      m[static_cast<std::size_t>(space.nearest_node(node.point))] = 1;
      return m;
    }
    case Kind::NodeList: {
      std::vector<std::uint8_t> m(n, 0);
      for (auto id : node.ids) m[static_cast<std::size_t>(space.index_of(id))] = 1;
      return m;
    }
    case Kind::Union:
    case Kind::Intersection:
    case Kind::Difference: {
      auto a = descriptor_mask(space, node.children[0]);
      const auto b = descriptor_mask(space, node.children[1]);
      for (std::size_t i = 0; i < n; ++i) {
        if (node.kind == Kind::Union) a[i] = a[i] | b[i];
        if (node.kind == Kind::Intersection) a[i] = a[i] & b[i];
        if (node.kind == Kind::Difference) a[i] = a[i] & static_cast<std::uint8_t>(!b[i]);
      }
      return a;
    }
    case Kind::Pullback: {
      // Singletons inside a pullback map to the image point; everything else
      // is evaluated pointwise through the transform.
      const auto& child = node.children[0];
      if (child.kind() == Kind::Singleton) {
        Point y(child.node().point.size());
        for (std::size_t k = 0; k < y.size(); ++k) y[k] = (child.node().point[k] - node.point[k]) / node.a;
        return descriptor_mask(space, AnalyticSet::singleton(y));
      }
      if (child.kind() == Kind::Union || child.kind() == Kind::Intersection ||
          child.kind() == Kind::Difference) {
        const auto& cn = child.node();
        const AnalyticSet l = cn.children[0].pullback(node.point, node.a);
        const AnalyticSet r = cn.children[1].pullback(node.point, node.a);
        const AnalyticSet rebuilt = child.kind() == Kind::Union          ? l.unite(r)
                                    : child.kind() == Kind::Intersection ? l.intersect(r)
                                                                         : l.minus(r);
        return descriptor_mask(space, rebuilt);
      }
      if (child.kind() == Kind::Pullback) {
        const auto& cn = child.node();
        // y -> o1 + s1 (o2 + s2 y) = (o1 + s1 o2) + s1 s2 y
        Point o(node.point.size());
        for (std::size_t k = 0; k < o.size(); ++k) o[k] = node.point[k] + node.a * cn.point[k];
        return descriptor_mask(space, cn.children[0].pullback(o, node.a * cn.a));
      }
      [[fallthrough]];
    }
    default: {
      std::vector<std::uint8_t> m(n, 0);
      for (std::size_t i = 0; i < n; ++i) m[i] = set.contains(space.position(static_cast<NodeIndex>(i))) ? 1 : 0;
      return m;
    }
  }
}

}  // namespace

Region region_from_descriptor(const WeightedGraphSpace& space, const AnalyticSet& descriptor) {
  if (!space.has_positions() && descriptor.kind() != AnalyticSet::Kind::Empty &&
      descriptor.kind() != AnalyticSet::Kind::NodeList) {
    fail(ErrorCode::NoPositions, "analytic descriptors need node positions");
  }
  Region r = Region::from_mask(descriptor_mask(space, descriptor));
  r.descriptor = descriptor;
  return r;
}

// ---------------------------------------------------------------------------

GeometryReport geometry_report(const WeightedGraphSpace& space, const GeometryOptions& opts) {
  require(opts.sample_count >= 1, ErrorCode::InvalidArgument, "sample_count must be >= 1");
  GeometryReport rep;
  rep.sample_count = opts.sample_count;
  Rng rng(opts.rng_seed);
  const std::size_t n = space.size();
  double typical = 0.0;
  if (space.meta().spacing) {
    typical = *space.meta().spacing;
  } else {
    std::vector<double> lens;
    for (const auto& e : space.edges()) lens.push_back(e.length);
    std::nth_element(lens.begin(), lens.begin() + static_cast<std::ptrdiff_t>(lens.size() / 2), lens.end());
    typical = lens.empty() ? 1.0 : lens[lens.size() / 2];
  }
  const double diam = space.diameter();
  double r_lo = opts.min_radius_cells * typical;
  const double r_hi = diam / 4.0;
  if (r_lo > r_hi) {
    rep.failures.push_back("space too small for the requested minimum radius; using diam/8");
    r_lo = diam / 8.0;
  }
  const double lambda = space.meta().poincare_dilation;
  const auto edges = space.edges();

  // Upper-gradient analog per node: largest incident difference quotient.
  auto node_gradient = [&](const std::vector<double>& f) {
    std::vector<double> g(n, 0.0);
    for (const auto& e : edges) {
      const double q = std::abs(f[static_cast<std::size_t>(e.a)] - f[static_cast<std::size_t>(e.b)]) / e.length;
      g[static_cast<std::size_t>(e.a)] = std::max(g[static_cast<std::size_t>(e.a)], q);
      g[static_cast<std::size_t>(e.b)] = std::max(g[static_cast<std::size_t>(e.b)], q);
    }
    return g;
  };

  for (int s = 0; s < opts.sample_count; ++s) {
    const auto c = static_cast<NodeIndex>(rng.below(n));
    const double r = r_lo * std::pow(r_hi / r_lo, rng.uniform());
    const auto dist = space.distances_from(c);
    double mb = 0.0;
    double m2b = 0.0;
    double mlb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((*dist)[i] < r) mb += space.mu(static_cast<NodeIndex>(i));
      if ((*dist)[i] < 2.0 * r) m2b += space.mu(static_cast<NodeIndex>(i));
      if ((*dist)[i] < lambda * r) mlb += space.mu(static_cast<NodeIndex>(i));
    }
    if (mb <= 0.0) {
      rep.failures.push_back("ball with zero measure");
      continue;
    }
    rep.doubling_constant_empirical = std::max(rep.doubling_constant_empirical, m2b / mb);

    std::vector<std::vector<double>> fields;
    if (space.has_positions()) {
      for (int k = 0; k < space.dim(); ++k) {
        std::vector<double> f(n);
        for (std::size_t i = 0; i < n; ++i) f[i] = space.position(static_cast<NodeIndex>(i))[static_cast<std::size_t>(k)];
        fields.push_back(std::move(f));
      }
    }
    fields.push_back(*dist);
    {
      std::vector<NodeIndex> inside;
      for (std::size_t i = 0; i < n; ++i) {
        if ((*dist)[i] < r) inside.push_back(static_cast<NodeIndex>(i));
      }
      const NodeIndex bc = inside[static_cast<std::size_t>(rng.below(inside.size()))];
      const double w = r * rng.uniform(0.25, 1.0);
      const auto db = space.distances_from(bc);
      std::vector<double> f(n);
      for (std::size_t i = 0; i < n; ++i) f[i] = std::exp(-((*db)[i] / w) * ((*db)[i] / w));
      fields.push_back(std::move(f));
    }
    for (const auto& f : fields) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if ((*dist)[i] < r) mean += space.mu(static_cast<NodeIndex>(i)) * f[i];
      }
      mean /= mb;
      double lhs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if ((*dist)[i] < r) lhs += space.mu(static_cast<NodeIndex>(i)) * std::abs(f[i] - mean);
      }
      lhs /= mb;
      const auto g = node_gradient(f);
      double gmax = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if ((*dist)[i] < lambda * r) gmax = std::max(gmax, g[i]);
      }
      double gp = 0.0;
      if (gmax > 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          if ((*dist)[i] < lambda * r) gp += space.mu(static_cast<NodeIndex>(i)) * std::pow(g[i] / gmax, opts.p);
        }
      }
      const double rhs = 2.0 * r * gmax * std::pow(gp / mlb, 1.0 / opts.p);
      const double ratio = lhs == 0.0 ? 0.0 : (rhs > 0.0 ? lhs / rhs : std::numeric_limits<double>::infinity());
      rep.poincare_constant_empirical = std::max(rep.poincare_constant_empirical, ratio);
    }
  }
  return rep;
}

}  // namespace finelab
