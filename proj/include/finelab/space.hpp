#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "finelab/analytic_set.hpp"

namespace finelab {

using NodeIndex = std::int32_t;

struct SpaceMeta {
  std::optional<double> spacing;       // grids only; the coarsest spacing for graded grids
  double weight_exponent = 0.0;        // density |x|^alpha
  double poincare_dilation = 1.0;      // lambda >= 1
  std::string builder;
  nlohmann::json parameters = nlohmann::json::object();
};

/// Undirected edge. The energy of a field u for exponent p is
/// sum_e conductance_e * (|u(a) - u(b)| / length_e)^p, so `conductance`
/// is the measure carried by the edge and the p-dependence lives in the
/// difference quotient.
struct Edge {
  NodeIndex a = 0;
  NodeIndex b = 0;
  double length = 0.0;
  double conductance = 0.0;
};

/// Finite metric measure space: a connected weighted graph whose nodes carry
/// measure, optionally embedded in R^dim. Immutable after construction;
/// distance queries are cached and safe to call concurrently.
class WeightedGraphSpace {
 public:
  WeightedGraphSpace(int dim, std::vector<NodeId> ids, std::vector<double> mu,
                     std::vector<double> positions, std::vector<Edge> edges, SpaceMeta meta);

  std::size_t size() const { return mu_.size(); }
  int dim() const { return dim_; }
  bool has_positions() const { return !positions_.empty(); }
  std::span<const double> position(NodeIndex i) const;
  double mu(NodeIndex i) const { return mu_[static_cast<std::size_t>(i)]; }
  std::span<const double> measures() const { return mu_; }
  std::span<const Edge> edges() const { return edges_; }
  /// Edge indices incident to node i.
  std::span<const std::int32_t> incident(NodeIndex i) const;
  NodeId id(NodeIndex i) const { return ids_[static_cast<std::size_t>(i)]; }
  std::span<const NodeId> ids() const { return ids_; }
  NodeIndex index_of(NodeId id) const;
  const SpaceMeta& meta() const { return meta_; }

  double total_measure() const;
  /// Edge coefficient conductance / length^p for exponent p.
  double edge_coefficient(std::size_t e, double p) const;
  /// Euclidean distance when embedded, shortest-path distance otherwise.
  double distance(NodeIndex i, NodeIndex j) const;
  /// Distances from `center` to every node; cached per center.
  std::shared_ptr<const std::vector<double>> distances_from(NodeIndex center) const;
  /// Distances from an arbitrary point (embedded spaces only).
  std::vector<double> distances_from_point(std::span<const double> x) const;
  NodeIndex nearest_node(std::span<const double> x) const;
  /// Exact for axis grids (bounding-box diagonal); a double-sweep estimate
  /// for abstract graphs.
  double diameter() const;

 private:
  int dim_;
  std::vector<NodeId> ids_;
  std::vector<double> mu_;
  std::vector<double> positions_;
  std::vector<Edge> edges_;
  std::vector<std::int32_t> incident_offsets_;
  std::vector<std::int32_t> incident_edges_;
  std::unordered_map<NodeId, NodeIndex> index_;
  SpaceMeta meta_;
  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<NodeIndex, std::shared_ptr<const std::vector<double>>> distance_cache_;
};

using SpacePtr = std::shared_ptr<const WeightedGraphSpace>;

struct Ball {
  NodeIndex center = 0;
  double radius = 0.0;
  bool closed = false;
};

/// Sorted set of node indices, optionally tagged with the descriptor it
/// was generated from.
class Region {
 public:
  Region() = default;
  explicit Region(std::vector<NodeIndex> nodes);

  static Region all(const WeightedGraphSpace& space);
  static Region from_mask(const std::vector<std::uint8_t>& mask);

  const std::vector<NodeIndex>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  bool contains(NodeIndex i) const;
  std::vector<std::uint8_t> mask(std::size_t n) const;

  Region unite(const Region& other) const;
  Region intersect(const Region& other) const;
  Region minus(const Region& other) const;
  Region complement(const WeightedGraphSpace& space) const;
  bool subset_of(const Region& other) const;

  /// Sum of node measures in ascending index order.
  double measure(const WeightedGraphSpace& space) const;

  std::optional<AnalyticSet> descriptor;

  friend bool operator==(const Region& a, const Region& b) { return a.nodes_ == b.nodes_; }

 private:
  std::vector<NodeIndex> nodes_;
};

struct GridOptions {
  int dim = 2;
  std::vector<double> lo;   // per-axis extent
  std::vector<double> hi;
  double h = 0.0;
  double weight_exponent = 0.0;
  std::size_t max_nodes = std::size_t{1} << 22;
};

/// Tensor grid whose spacing grows geometrically away from `center`, from
/// h_min up to h_max. Used where several scales around one point must be
/// resolved at once.
struct GradedGridOptions {
  int dim = 2;
  std::vector<double> lo;
  std::vector<double> hi;
  Point center;
  double h_min = 0.0;
  double h_max = 0.0;
  double growth = 1.2;
  double weight_exponent = 0.0;
  std::size_t max_nodes = std::size_t{1} << 22;
};

struct RadialOptions {
  int n = 2;          // ambient dimension of the radial reduction
  double rmin = 0.0;
  double rmax = 1.0;
  double h = 0.0;
  double weight_exponent = 0.0;
};

SpacePtr build_grid(const GridOptions& opts);
SpacePtr build_graded_grid(const GradedGridOptions& opts);
/// Convenience: the cube [-half_width, half_width]^dim with spacing h.
SpacePtr build_cube_grid(int dim, double half_width, double h, double weight_exponent = 0.0);
SpacePtr build_radial(const RadialOptions& opts);
/// Surface measure of the unit sphere S^{n-1}.
double unit_sphere_area(int n);

SpacePtr load_space(const std::filesystem::path& path);
SpacePtr parse_space(const std::string& text);
std::string format_space(const WeightedGraphSpace& space);
void save_space(const WeightedGraphSpace& space, const std::filesystem::path& path);

Region metric_ball(const WeightedGraphSpace& space, NodeIndex center, double r, bool closed = false);
Region metric_ball(const WeightedGraphSpace& space, const Ball& ball);
/// Ball about an arbitrary point of an embedded space.
Region point_ball(const WeightedGraphSpace& space, std::span<const double> center, double r,
                  bool closed = false);
Region region_from_descriptor(const WeightedGraphSpace& space, const AnalyticSet& descriptor);

struct GeometryReport {
  double doubling_constant_empirical = 0.0;
  double poincare_constant_empirical = 0.0;
  int sample_count = 0;
  std::vector<std::string> failures;
};

struct GeometryOptions {
  int sample_count = 64;
  std::uint64_t rng_seed = 1;
  double p = 2.0;
  /// Balls smaller than this many edge lengths are not sampled; lattice
  /// effects dominate below it.
  double min_radius_cells = 16.0;
};

GeometryReport geometry_report(const WeightedGraphSpace& space, const GeometryOptions& opts);

}  // namespace finelab
