#include "finelab/analytic_set.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "finelab/error.hpp"

namespace finelab {

namespace {

using Node = AnalyticSet::Node;
using Kind = AnalyticSet::Kind;

double dist(std::span<const double> x, const Point& c) {
  require(x.size() == c.size(), ErrorCode::InvalidArgument, "descriptor dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
  return std::sqrt(s);
}

void check_planar(std::span<const double> x, const Point& c, const char* what) {
  require(x.size() == 2 && c.size() == 2, ErrorCode::InvalidArgument,
          std::string(what) + " descriptors are planar");
}

std::string_view kind_name(Kind k) {
  switch (k) {
    case Kind::Empty: return "empty";
    case Kind::Singleton: return "singleton";
    case Kind::Ball: return "ball";
    case Kind::Annulus: return "annulus";
    case Kind::Sector: return "sector";
    case Kind::ExpCusp: return "exp_cusp";
    case Kind::Disks: return "disks";
    case Kind::Inequalities: return "inequalities";
    case Kind::NodeList: return "node_list";
    case Kind::Union: return "union";
    case Kind::Intersection: return "intersection";
    case Kind::Difference: return "difference";
    case Kind::Pullback: return "pullback";
  }
  return "empty";
}

Kind kind_from_name(const std::string& s) {
  for (int k = 0; k <= static_cast<int>(Kind::Pullback); ++k) {
    if (kind_name(static_cast<Kind>(k)) == s) return static_cast<Kind>(k);
  }
  fail(ErrorCode::ParseError, "unknown descriptor kind '" + s + "'");
}

}  // namespace

AnalyticSet::AnalyticSet() : node_(std::make_shared<Node>()) {}

AnalyticSet AnalyticSet::empty() { return AnalyticSet(); }

AnalyticSet AnalyticSet::singleton(Point p) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Singleton;
  n->point = std::move(p);
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::ball(Point center, double radius, bool closed) {
  require(radius > 0.0, ErrorCode::InvalidArgument, "ball radius must be positive");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Ball;
  n->point = std::move(center);
  n->a = radius;
  n->closed = closed;
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::annulus(Point center, double r_in, double r_out) {
  require(r_in >= 0.0 && r_out > r_in, ErrorCode::InvalidArgument, "annulus needs 0 <= r_in < r_out");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Annulus;
  n->point = std::move(center);
  n->a = r_in;
  n->b = r_out;
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::sector(Point apex, double angle, double direction) {
  require(apex.size() == 2, ErrorCode::InvalidArgument, "sector apex must be planar");
  require(angle > 0.0 && angle < 2.0 * std::numbers::pi, ErrorCode::InvalidArgument,
          "sector angle must lie in (0, 2pi)");
  auto n = std::make_shared<Node>();
  n->kind = Kind::Sector;
  n->point = std::move(apex);
  n->a = angle;
  n->b = direction;
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::exp_cusp(Point apex, double length) {
  require(apex.size() == 2, ErrorCode::InvalidArgument, "cusp apex must be planar");
  require(length > 0.0, ErrorCode::InvalidArgument, "cusp length must be positive");
  auto n = std::make_shared<Node>();
  n->kind = Kind::ExpCusp;
  n->point = std::move(apex);
  n->a = length;
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::disks(std::vector<Disk> disks) {
  for (const auto& d : disks) {
    require(d.radius >= 0.0, ErrorCode::InvalidArgument, "disk radius must be nonnegative");
  }
  auto n = std::make_shared<Node>();
  n->kind = Kind::Disks;
  n->disks = std::move(disks);
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::thin_disk_chain(Point apex, double base, double q, int count, double eta0,
                                         double angle) {
  require(apex.size() == 2, ErrorCode::InvalidArgument, "disk chain apex must be planar");
  require(base > 0.0 && q > 1.0 && count >= 1 && eta0 > 0.0 && eta0 < 1.0,
          ErrorCode::InvalidArgument, "disk chain needs base > 0, q > 1, count >= 1, 0 < eta0 < 1");
  std::vector<Disk> out;
  for (int k = 0; k < count; ++k) {
    const double d = base * std::pow(q, -k);
    const double r = d * std::pow(eta0, std::pow(2.0, k));
    out.push_back({{apex[0] + d * std::cos(angle), apex[1] + d * std::sin(angle)}, r});
  }
  return disks(std::move(out));
}

AnalyticSet AnalyticSet::inequalities(std::vector<Inequality> rows) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Inequalities;
  n->rows = std::move(rows);
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::node_list(std::vector<NodeId> ids) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::NodeList;
  n->ids = std::move(ids);
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::unite(const AnalyticSet& other) const {
  if (is_empty_descriptor()) return other;
  if (other.is_empty_descriptor()) return *this;
  auto n = std::make_shared<Node>();
  n->kind = Kind::Union;
  n->children = {*this, other};
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::intersect(const AnalyticSet& other) const {
  if (is_empty_descriptor() || other.is_empty_descriptor()) return empty();
  auto n = std::make_shared<Node>();
  n->kind = Kind::Intersection;
  n->children = {*this, other};
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::minus(const AnalyticSet& other) const {
  if (is_empty_descriptor() || other.is_empty_descriptor()) return *this;
  auto n = std::make_shared<Node>();
  n->kind = Kind::Difference;
  n->children = {*this, other};
  return AnalyticSet(n);
}

AnalyticSet AnalyticSet::pullback(Point origin, double scale) const {
  require(scale > 0.0, ErrorCode::InvalidArgument, "pullback scale must be positive");
  if (!dilatable()) {
    fail(ErrorCode::DescriptorNotDilatable, "node-list descriptors cannot be rescaled");
  }
  if (is_empty_descriptor()) return *this;
  auto n = std::make_shared<Node>();
  n->kind = Kind::Pullback;
  n->point = std::move(origin);
  n->a = scale;
  n->children = {*this};
  return AnalyticSet(n);
}

AnalyticSet::Kind AnalyticSet::kind() const { return node_->kind; }

bool AnalyticSet::dilatable() const {
  if (node_->kind == Kind::NodeList) return false;
  for (const auto& c : node_->children) {
    if (!c.dilatable()) return false;
  }
  return true;
}

bool AnalyticSet::contains(std::span<const double> x) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Empty:
    case Kind::Singleton:
    case Kind::NodeList:
      return false;
    case Kind::Ball: {
      const double d = dist(x, n.point);
      return n.closed ? d <= n.a : d < n.a;
    }
    case Kind::Annulus: {
      const double d = dist(x, n.point);
      return d >= n.a && d < n.b;
    }
    case Kind::Sector: {
      check_planar(x, n.point, "sector");
      const double dx = x[0] - n.point[0];
      const double dy = x[1] - n.point[1];
      if (dx == 0.0 && dy == 0.0) return false;
      double phi = std::atan2(dy, dx) - n.b;
      const double two_pi = 2.0 * std::numbers::pi;
      phi = std::fmod(phi, two_pi);
      if (phi < 0.0) phi += two_pi;
      // Points on the far edge can wrap to ~2pi through rounding.
      if (phi > two_pi - 1e-14) phi = 0.0;
      return phi <= n.a + 1e-14;
    }
    case Kind::ExpCusp: {
      check_planar(x, n.point, "cusp");
      const double t = x[0] - n.point[0];
      const double s = x[1] - n.point[1];
      if (!(t > 0.0 && t < n.a)) return false;
      return std::abs(s) <= std::exp(-1.0 / t);
    }
    case Kind::Disks:
      for (const auto& d : n.disks) {
        if (dist(x, d.center) <= d.radius) return true;
      }
      return false;
    case Kind::Inequalities:
      for (const auto& row : n.rows) {
        require(row.normal.size() == x.size(), ErrorCode::InvalidArgument,
                "inequality dimension mismatch");
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += row.normal[i] * x[i];
        if (s > row.bound) return false;
      }
      return true;
    case Kind::Union:
      return n.children[0].contains(x) || n.children[1].contains(x);
    case Kind::Intersection:
      return n.children[0].contains(x) && n.children[1].contains(x);
    case Kind::Difference:
      return n.children[0].contains(x) && !n.children[1].contains(x);
    case Kind::Pullback: {
      require(x.size() == n.point.size(), ErrorCode::InvalidArgument, "pullback dimension mismatch");
      Point y(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = n.point[i] + n.a * x[i];
      return n.children[0].contains(y);
    }
  }
  return false;
}

nlohmann::json AnalyticSet::to_json() const {
  const Node& n = *node_;
  nlohmann::json j;
  j["kind"] = kind_name(n.kind);
  switch (n.kind) {
    case Kind::Empty:
      break;
    case Kind::Singleton:
      j["point"] = n.point;
      break;
    case Kind::Ball:
      j["center"] = n.point;
      j["radius"] = n.a;
      j["closed"] = n.closed;
      break;
    case Kind::Annulus:
      j["center"] = n.point;
      j["r_in"] = n.a;
      j["r_out"] = n.b;
      break;
    case Kind::Sector:
      j["apex"] = n.point;
      j["angle"] = n.a;
      j["direction"] = n.b;
      break;
    case Kind::ExpCusp:
      j["apex"] = n.point;
      j["length"] = n.a;
      break;
    case Kind::Disks: {
      auto arr = nlohmann::json::array();
      for (const auto& d : n.disks) arr.push_back({{"center", d.center}, {"radius", d.radius}});
      j["disks"] = arr;
      break;
    }
    case Kind::Inequalities: {
      auto arr = nlohmann::json::array();
      for (const auto& r : n.rows) arr.push_back({{"normal", r.normal}, {"bound", r.bound}});
      j["rows"] = arr;
      break;
    }
    case Kind::NodeList:
      j["ids"] = n.ids;
      break;
    case Kind::Union:
    case Kind::Intersection:
    case Kind::Difference:
      j["left"] = n.children[0].to_json();
      j["right"] = n.children[1].to_json();
      break;
    case Kind::Pullback:
      j["origin"] = n.point;
      j["scale"] = n.a;
      j["of"] = n.children[0].to_json();
      break;
  }
  return j;
}

AnalyticSet AnalyticSet::from_json(const nlohmann::json& j) {
  try {
    const Kind k = kind_from_name(j.at("kind").get<std::string>());
    switch (k) {
      case Kind::Empty:
        return empty();
      case Kind::Singleton:
        return singleton(j.at("point").get<Point>());
      case Kind::Ball:
        return ball(j.at("center").get<Point>(), j.at("radius").get<double>(),
                    j.value("closed", false));
      case Kind::Annulus:
        return annulus(j.at("center").get<Point>(), j.at("r_in").get<double>(),
                       j.at("r_out").get<double>());
      case Kind::Sector:
        return sector(j.value("apex", Point{0.0, 0.0}), j.at("angle").get<double>(),
                      j.value("direction", 0.0));
      case Kind::ExpCusp:
        return exp_cusp(j.value("apex", Point{0.0, 0.0}), j.value("length", 1.0));
      case Kind::Disks: {
        std::vector<Disk> ds;
        for (const auto& d : j.at("disks")) {
          ds.push_back({d.at("center").get<Point>(), d.at("radius").get<double>()});
        }
        return disks(std::move(ds));
      }
      case Kind::Inequalities: {
        std::vector<Inequality> rows;
        for (const auto& r : j.at("rows")) {
          rows.push_back({r.at("normal").get<Point>(), r.at("bound").get<double>()});
        }
        return inequalities(std::move(rows));
      }
      case Kind::NodeList:
        return node_list(j.at("ids").get<std::vector<NodeId>>());
      case Kind::Union:
        return from_json(j.at("left")).unite(from_json(j.at("right")));
      case Kind::Intersection:
        return from_json(j.at("left")).intersect(from_json(j.at("right")));
      case Kind::Difference:
        return from_json(j.at("left")).minus(from_json(j.at("right")));
      case Kind::Pullback:
        return from_json(j.at("of")).pullback(j.at("origin").get<Point>(), j.at("scale").get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ParseError, std::string("descriptor JSON: ") + e.what());
  }
  return empty();
}

AnalyticSet AnalyticSet::parse(const std::string& text, int dim) {
  std::size_t first = text.find_first_not_of(" \t\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::ParseError, std::string("descriptor JSON: ") + e.what());
    }
    return from_json(j);
  }
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  std::vector<std::pair<std::string, double>> kv;
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto eq = item.find('=');
      require(eq != std::string::npos, ErrorCode::ParseError, "descriptor option '" + item + "' lacks '='");
      try {
        kv.emplace_back(item.substr(0, eq), std::stod(item.substr(eq + 1)));
      } catch (const std::exception&) {
        fail(ErrorCode::ParseError, "descriptor option '" + item + "' is not numeric");
      }
    }
  }
  auto get = [&](const std::string& key, double fallback) {
    for (const auto& [k, v] : kv) {
      if (k == key) return v;
    }
    return fallback;
  };
  Point origin(static_cast<std::size_t>(std::max(dim, 1)), 0.0);
  if (dim >= 1) origin[0] = get("x", 0.0);
  if (dim >= 2) origin[1] = get("y", 0.0);
  if (dim >= 3) origin[2] = get("z", 0.0);
  if (name == "empty") return empty();
  if (name == "singleton") return singleton(origin);
  if (name == "ball") return ball(origin, get("r", 0.5), get("closed", 0.0) != 0.0);
  if (name == "annulus") return annulus(origin, get("rin", 0.25), get("rout", 0.5));
  if (name == "sector") return sector(origin, get("angle", std::numbers::pi / 6), get("direction", 0.0));
  if (name == "cusp" || name == "exp_cusp") return exp_cusp(origin, get("length", 1.0));
  if (name == "diskchain") {
    return thin_disk_chain(origin, get("base", 0.6), get("q", 2.0), static_cast<int>(get("count", 8)),
                           get("eta0", 0.2), get("angle", 0.3));
  }
  if (name == "disk") {
    Point c = origin;
    c[0] = get("cx", c[0]);
    if (c.size() > 1) c[1] = get("cy", c[1]);
    return disks({{c, get("r", 0.1)}});
  }
  fail(ErrorCode::ParseError, "unknown descriptor '" + name + "'");
}

}  // namespace finelab
