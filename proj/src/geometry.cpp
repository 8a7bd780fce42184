#include "topoforge/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "topoforge/error.hpp"

namespace topoforge {

namespace {

constexpr double pi = std::numbers::pi;

// Arc-length sampling of a smooth parametrized curve on [t0, t1].
template <class Curve>
std::vector<Point> sample_curve(const Curve& curve, double t0, double t1, double h, bool closed) {
  constexpr int table_size = 4096;
  std::vector<double> cumulative(table_size + 1, 0.0);
  Point prev = curve(t0);
  for (int i = 1; i <= table_size; ++i) {
    const Point p = curve(t0 + (t1 - t0) * i / table_size);
    cumulative[static_cast<std::size_t>(i)] = cumulative[static_cast<std::size_t>(i - 1)] + distance(prev, p);
    prev = p;
  }
  const double length = cumulative.back();
  int n = std::max(closed ? 8 : 1, static_cast<int>(std::ceil(length / h)));
  std::vector<Point> out;
  const int count = closed ? n : n + 1;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    if (!closed && k == n) {
      out.push_back(curve(t1));
      break;
    }
    const double s = length * k / n;
    const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), s);
    const auto j = std::max<std::ptrdiff_t>(1, it - cumulative.begin());
    const double c0 = cumulative[static_cast<std::size_t>(j - 1)];
    const double c1 = cumulative[static_cast<std::size_t>(j)];
    const double frac = c1 > c0 ? (s - c0) / (c1 - c0) : 0.0;
    const double t = t0 + (t1 - t0) * (static_cast<double>(j - 1) + frac) / table_size;
    out.push_back(k == 0 ? curve(t0) : curve(t));
  }
  return out;
}

double segment_distance(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

}  // namespace

const char* to_string(BoundaryMarker m) {
  switch (m) {
    case BoundaryMarker::dirichlet: return "dirichlet";
    case BoundaryMarker::neumann: return "neumann";
    case BoundaryMarker::natural: return "natural";
    case BoundaryMarker::outer_ball: return "outer_ball";
  }
  return "?";
}

InclusionShape InclusionShape::disk(Point center, double radius) {
  if (!(radius > 0)) throw std::invalid_argument("disk radius must be positive");
  InclusionShape s(Kind::disk, "disk", center, radius, radius);
  if (!s.contains(make_point(0, 0)) || norm(center) >= radius)
    throw std::invalid_argument("inclusion must contain the origin in its interior");
  return s;
}

InclusionShape InclusionShape::ellipse(Point center, double semi_x, double semi_y) {
  if (!(semi_x > 0 && semi_y > 0)) throw std::invalid_argument("ellipse semi-axes must be positive");
  InclusionShape s(Kind::ellipse, "ellipse", center, semi_x, semi_y);
  const double q = std::pow(center[0] / semi_x, 2) + std::pow(center[1] / semi_y, 2);
  if (q >= 1.0) throw std::invalid_argument("inclusion must contain the origin in its interior");
  return s;
}

InclusionShape InclusionShape::lshape() {
  const double a = std::sqrt(pi / 3.0);
  return InclusionShape(Kind::lshape, "lshape", make_point(a / 4, a / 4), a, a);
}

const std::vector<std::string>& InclusionShape::catalog_names() {
  static const std::vector<std::string> names{"disk", "shifted_disk", "ellipse", "shifted_ellipse", "lshape"};
  return names;
}

InclusionShape InclusionShape::named(const std::string& name, EllipseAxes axes) {
  const double f = axes == EllipseAxes::semi ? 1.0 : 0.5;
  auto with_id = [&](InclusionShape s, const std::string& id) {
    s.id_ = id;
    return s;
  };
  if (name == "disk" || name == "omega1") return with_id(disk({}, 1.0), "disk");
  if (name == "shifted_disk" || name == "omega2") return with_id(disk(make_point(0.5, 0.5), 1.0), "shifted_disk");
  if (name == "ellipse" || name == "omega3") return with_id(ellipse({}, 1.5 * f, 2.0 / 3.0 * f), "ellipse");
  if (name == "shifted_ellipse" || name == "omega4")
    return with_id(ellipse(make_point(0.5, 0.5), 1.5 * f, 2.0 / 3.0 * f), "shifted_ellipse");
  if (name == "lshape" || name == "omega5") return lshape();
  throw std::invalid_argument("unknown inclusion shape '" + name + "'");
}

bool InclusionShape::contains(Point p) const {
  const Point q = p - center_;
  switch (kind_) {
    case Kind::disk: return dot(q, q) < rx_ * rx_;
    case Kind::ellipse: return std::pow(q[0] / rx_, 2) + std::pow(q[1] / ry_, 2) < 1.0;
    case Kind::lshape:
      return std::abs(q[0]) < rx_ && std::abs(q[1]) < rx_ && !(q[0] >= 0 && q[1] >= 0);
  }
  return false;
}

double InclusionShape::area() const {
  switch (kind_) {
    case Kind::disk: return pi * rx_ * rx_;
    case Kind::ellipse: return pi * rx_ * ry_;
    case Kind::lshape: return 3.0 * rx_ * rx_;
  }
  return 0.0;
}

double InclusionShape::max_radius() const {
  switch (kind_) {
    case Kind::disk: return norm(center_) + rx_;
    case Kind::ellipse: {
      double r = 0.0;
      for (int i = 0; i < 20000; ++i) {
        const double t = 2 * pi * i / 20000;
        r = std::max(r, norm(center_ + make_point(rx_ * std::cos(t), ry_ * std::sin(t))));
      }
      return r * (1 + 1e-6);
    }
    case Kind::lshape: {
      double r = 0.0;
      for (const Point& c : lshape_corners()) r = std::max(r, norm(c));
      return r;
    }
  }
  return 0.0;
}

bool InclusionShape::doubly_symmetric() const {
  return kind_ != Kind::lshape && center_[0] == 0.0 && center_[1] == 0.0;
}

std::vector<Point> InclusionShape::lshape_corners() const {
  const double a = rx_;
  std::vector<Point> c{make_point(-a, -a), make_point(a, -a), make_point(a, 0), make_point(0, 0), make_point(0, a),
                       make_point(-a, a)};
  for (Point& p : c) p += center_;
  return c;
}

std::vector<Point> InclusionShape::boundary_loop(double h) const {
  if (kind_ == Kind::lshape) {
    const auto corners = lshape_corners();
    std::vector<Point> loop;
    for (std::size_t i = 0; i < corners.size(); ++i) {
      auto piece = sample_segment(corners[i], corners[(i + 1) % corners.size()], [h](Point) { return h; });
      loop.insert(loop.end(), piece.begin(), piece.end() - 1);
    }
    return loop;
  }
  const Point c = center_;
  const double rx = rx_, ry = ry_;
  return sample_curve([&](double t) { return c + make_point(rx * std::cos(t), ry * std::sin(t)); }, 0.0, 2 * pi, h,
                      true);
}

std::vector<Point> InclusionShape::upper_arc(double h) const {
  if (!doubly_symmetric()) throw std::logic_error("upper_arc needs a doubly symmetric shape");
  const double rx = rx_, ry = ry_;
  auto arc = sample_curve([&](double t) { return make_point(rx * std::cos(t), ry * std::sin(t)); }, 0.0, pi, h, false);
  arc.front() = make_point(rx, 0.0);
  arc.back() = make_point(-rx, 0.0);
  return arc;
}

InclusionShape InclusionShape::scaled(double factor) const {
  InclusionShape s = *this;
  s.center_ = factor * center_;
  s.rx_ *= factor;
  s.ry_ *= factor;
  return s;
}

std::string InclusionShape::description() const {
  std::ostringstream os;
  os.precision(17);
  os << id_ << ":" << static_cast<int>(kind_) << ":" << center_[0] << "," << center_[1] << ":" << rx_ << "," << ry_;
  return os.str();
}

DomainGeometry DomainGeometry::rectangle(Point lo, Point hi, const std::function<BoundaryMarker(Point)>& marker,
                                         const std::vector<Point>& breakpoints) {
  const std::vector<Point> corners{lo, make_point(hi[0], lo[1]), hi, make_point(lo[0], hi[1])};
  DomainGeometry g;
  for (int s = 0; s < 4; ++s) {
    const Point a = corners[static_cast<std::size_t>(s)];
    const Point b = corners[static_cast<std::size_t>((s + 1) % 4)];
    const double len = distance(a, b);
    std::vector<double> ts{0.0, 1.0};
    for (const Point& p : breakpoints) {
      if (segment_distance(p, a, b) > 1e-12 * len) continue;
      const double t = dot(p - a, b - a) / (len * len);
      if (t > 1e-12 && t < 1 - 1e-12) ts.push_back(t);
    }
    std::sort(ts.begin(), ts.end());
    for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
      const Point pa = a + ts[i] * (b - a);
      const Point pb = a + ts[i + 1] * (b - a);
      g.boundary.push_back({i == 0 ? a : pa, i + 2 == ts.size() ? b : pb, marker(0.5 * (pa + pb))});
    }
  }
  return g;
}

DomainGeometry DomainGeometry::disk(Circle c, BoundaryMarker marker) {
  DomainGeometry g;
  g.outer_circle = c;
  g.outer_circle_marker = marker;
  return g;
}

bool DomainGeometry::in_omega(Point p) const {
  return std::any_of(subdomains.begin(), subdomains.end(),
                     [&](const Circle& c) { return distance(p, c.center) < c.radius; });
}

bool DomainGeometry::contains(Point p) const {
  if (outer_circle) return distance(p, outer_circle->center) < outer_circle->radius;
  std::vector<Point> loop;
  for (const auto& piece : boundary) loop.push_back(piece.a);
  return point_in_polygon(p, loop);
}

double DomainGeometry::distance_to_boundary(Point p) const {
  if (outer_circle) return std::abs(outer_circle->radius - distance(p, outer_circle->center));
  double d = std::numeric_limits<double>::infinity();
  for (const auto& piece : boundary) d = std::min(d, segment_distance(p, piece.a, piece.b));
  return d;
}

double DomainGeometry::distance_to_omega(Point p) const {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& c : subdomains) d = std::min(d, std::abs(distance(p, c.center) - c.radius));
  return d;
}

double DomainGeometry::area() const {
  if (outer_circle) return pi * outer_circle->radius * outer_circle->radius;
  std::vector<Point> loop;
  for (const auto& piece : boundary) loop.push_back(piece.a);
  return polygon_area(loop);
}

void DomainGeometry::validate() const {
  if (!outer_circle) {
    if (boundary.size() < 3) throw MeshError("domain boundary needs at least three pieces");
    for (std::size_t i = 0; i < boundary.size(); ++i)
      if (distance(boundary[i].b, boundary[(i + 1) % boundary.size()].a) > 1e-12)
        throw MeshError("domain boundary pieces do not form a closed polygon");
  } else if (!(outer_circle->radius > 0)) {
    throw MeshError("domain disk radius must be positive");
  }
  if (!(area() > 0)) throw MeshError("domain has zero or negative area (boundary must be counter-clockwise)");
  for (std::size_t i = 0; i < subdomains.size(); ++i) {
    const Circle& c = subdomains[i];
    if (!(c.radius > 0)) throw MeshError("subdomain disk with zero radius");
    if (!contains(c.center) || distance_to_boundary(c.center) <= c.radius)
      throw MeshError("subdomain disk not strictly inside the domain");
    for (std::size_t j = 0; j < i; ++j)
      if (distance(c.center, subdomains[j].center) <= c.radius + subdomains[j].radius)
        throw MeshError("subdomain disks overlap or touch");
  }
}

std::string DomainGeometry::description() const {
  std::ostringstream os;
  os.precision(17);
  if (outer_circle)
    os << "circle " << outer_circle->center[0] << " " << outer_circle->center[1] << " " << outer_circle->radius << " "
       << to_string(outer_circle_marker) << ";";
  for (const auto& p : boundary)
    os << "piece " << p.a[0] << " " << p.a[1] << " " << p.b[0] << " " << p.b[1] << " " << to_string(p.marker) << ";";
  for (const auto& c : subdomains) os << "omega " << c.center[0] << " " << c.center[1] << " " << c.radius << ";";
  for (const auto& p : load_lines)
    os << "line " << p.a[0] << " " << p.a[1] << " " << p.b[0] << " " << p.b[1] << ";";
  return os.str();
}

std::vector<Point> sample_segment(Point a, Point b, const std::function<double(Point)>& h) {
  const double len = distance(a, b);
  std::vector<double> ts{0.0};
  double t = 0.0;
  while (t < 1.0) {
    const double step = 0.95 * h(a + t * (b - a)) / len;
    if (!(step > 0)) throw MeshError("non-positive mesh size while sampling a segment");
    t += step;
    ts.push_back(t);
  }
  const double scale = 1.0 / ts.back();
  std::vector<Point> out;
  out.reserve(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i == 0) out.push_back(a);
    else if (i + 1 == ts.size()) out.push_back(b);
    else out.push_back(a + (ts[i] * scale) * (b - a));
  }
  return out;
}

double polygon_area(const std::vector<Point>& loop) {
  double s = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const Point& p = loop[i];
    const Point& q = loop[(i + 1) % loop.size()];
    s += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * s;
}

bool point_in_polygon(Point p, const std::vector<Point>& loop) {
  bool inside = false;
  for (std::size_t i = 0, j = loop.size() - 1; i < loop.size(); j = i++) {
    const Point& a = loop[i];
    const Point& b = loop[j];
    if ((a[1] > p[1]) != (b[1] > p[1])) {
      const double x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
      if (p[0] < x) inside = !inside;
    }
  }
  return inside;
}

}  // namespace topoforge
