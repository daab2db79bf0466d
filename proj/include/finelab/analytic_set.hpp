#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace finelab {

using Point = std::vector<double>;
using NodeId = std::int64_t;

/// Half-space constraint a . x <= b used by custom descriptors.
struct Inequality {
  Point normal;
  double bound = 0.0;
};

struct Disk {
  Point center;
  double radius = 0.0;
};

/// Continuum description of a set, evaluated pointwise on node positions.
///
/// Descriptors survive rescaling: pullback(origin, scale) yields the set
/// {y : origin + scale * y in E}, which is how per-scale quantities are
/// computed on a fixed unit grid. Singletons are not evaluated pointwise;
/// they map to the node nearest to the point. NodeList descriptors carry
/// explicit node ids and cannot be rescaled.
class AnalyticSet {
 public:
  enum class Kind {
    Empty,
    Singleton,
    Ball,
    Annulus,
    Sector,
    ExpCusp,
    Disks,
    Inequalities,
    NodeList,
    Union,
    Intersection,
    Difference,
    Pullback,
  };

  AnalyticSet();

  static AnalyticSet empty();
  static AnalyticSet singleton(Point p);
  /// Open ball |x - c| < r, or closed ball |x - c| <= r.
  static AnalyticSet ball(Point center, double radius, bool closed = false);
  /// r_in <= |x - c| < r_out.
  static AnalyticSet annulus(Point center, double r_in, double r_out);
  /// Planar wedge with the apex removed: 0 < |x - c| and polar angle
  /// (measured from `direction`) in [0, angle].
  static AnalyticSet sector(Point apex, double angle, double direction = 0.0);
  /// Planar cusp {0 < t < length, |s| <= exp(-1/t)} in coordinates t, s
  /// relative to the apex.
  static AnalyticSet exp_cusp(Point apex, double length = 1.0);
  /// Union of closed disks (balls in any dimension).
  static AnalyticSet disks(std::vector<Disk> disks);
  /// Disks centred at apex + base * q^-k * (cos a, sin a), k = 0..count-1, with
  /// radius base * q^-k * eta0^(2^k). The relative radii shrink doubly
  /// exponentially, so the chain is thin at the apex in the plane.
  static AnalyticSet thin_disk_chain(Point apex, double base, double q, int count, double eta0,
                                     double angle = 0.0);
  static AnalyticSet inequalities(std::vector<Inequality> rows);
  static AnalyticSet node_list(std::vector<NodeId> ids);

  AnalyticSet unite(const AnalyticSet& other) const;
  AnalyticSet intersect(const AnalyticSet& other) const;
  AnalyticSet minus(const AnalyticSet& other) const;
  AnalyticSet pullback(Point origin, double scale) const;

  Kind kind() const;
  bool is_empty_descriptor() const { return kind() == Kind::Empty; }
  bool dilatable() const;

  /// Pointwise membership. Singleton leaves never contain points here;
  /// region construction resolves them to nodes.
  bool contains(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static AnalyticSet from_json(const nlohmann::json& j);
  /// Accepts JSON text or the short form `name:key=value,...` (see README).
  static AnalyticSet parse(const std::string& text, int dim = 2);

  struct Node;
  const Node& node() const { return *node_; }

 private:
  explicit AnalyticSet(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct AnalyticSet::Node {
  Kind kind = Kind::Empty;
  Point point;
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  bool closed = false;
  std::vector<Disk> disks;
  std::vector<Inequality> rows;
  std::vector<NodeId> ids;
  std::vector<AnalyticSet> children;
};

}  // namespace finelab
