#include "topoforge/delaunay.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numbers>
#include <tuple>
#include <unordered_map>

#include "topoforge/error.hpp"

namespace topoforge {

namespace {

using Key = std::uint64_t;

Key edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<Key>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

long double orient(const Point& a, const Point& b, const Point& c) {
  const long double abx = static_cast<long double>(b[0]) - a[0];
  const long double aby = static_cast<long double>(b[1]) - a[1];
  const long double acx = static_cast<long double>(c[0]) - a[0];
  const long double acy = static_cast<long double>(c[1]) - a[1];
  return abx * acy - aby * acx;
}

// Positive when d lies inside the circumcircle of the counter-clockwise triangle abc.
long double incircle(const Point& a, const Point& b, const Point& c, const Point& d) {
  const long double adx = static_cast<long double>(a[0]) - d[0], ady = static_cast<long double>(a[1]) - d[1];
  const long double bdx = static_cast<long double>(b[0]) - d[0], bdy = static_cast<long double>(b[1]) - d[1];
  const long double cdx = static_cast<long double>(c[0]) - d[0], cdy = static_cast<long double>(c[1]) - d[1];
  const long double alift = adx * adx + ady * ady;
  const long double blift = bdx * bdx + bdy * bdy;
  const long double clift = cdx * cdx + cdy * cdy;
  return alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady);
}

Point circumcenter(const Point& a, const Point& b, const Point& c) {
  const double bx = b[0] - a[0], by = b[1] - a[1];
  const double cx = c[0] - a[0], cy = c[1] - a[1];
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return make_point(a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d);
}

class Mesher {
 public:
  Mesher(const PlanarGraph& graph, const RefinementOptions& options) : graph_(graph), options_(options) {}

  Triangulation run() {
    initialise();
    insert_input_points();
    recover_segments();
    remove_exterior();
    refine();
    return output();
  }

 private:
  struct Tri {
    std::array<int, 3> v{};
    std::array<int, 3> n{-1, -1, -1};
    bool alive = true;
  };
  struct Wall {
    int tag = 0;
    bool locked = false;
  };
  struct CavityEdge {
    int a, b, outside, owner;
  };
  struct Located {
    int tri = -1;
    bool crossed_wall = false;
    int wall_a = -1, wall_b = -1;
  };

  const PlanarGraph& graph_;
  const RefinementOptions& options_;
  std::vector<Point> pts_;
  std::vector<Tri> tris_;
  std::vector<int> free_;
  std::vector<int> vtri_;
  std::vector<unsigned> mark_;
  unsigned stamp_ = 0;
  std::unordered_map<Key, Wall> walls_;
  int input_count_ = 0;
  int hint_ = 0;
  double scale_ = 1.0;
  std::uint64_t walk_counter_ = 0;

  std::vector<int> cavity_;
  std::vector<CavityEdge> boundary_;

  bool is_wall(int a, int b) const { return walls_.count(edge_key(a, b)) != 0; }

  int new_tri(int a, int b, int c) {
    int t;
    if (!free_.empty()) {
      t = free_.back();
      free_.pop_back();
      tris_[static_cast<std::size_t>(t)] = Tri{};
    } else {
      t = static_cast<int>(tris_.size());
      tris_.emplace_back();
      mark_.push_back(0);
    }
    Tri& tr = tris_[static_cast<std::size_t>(t)];
    tr.v = {a, b, c};
    return t;
  }

  Tri& tri(int t) { return tris_[static_cast<std::size_t>(t)]; }
  const Point& pt(int v) const { return pts_[static_cast<std::size_t>(v)]; }

  void initialise() {
    input_count_ = static_cast<int>(graph_.points.size());
    if (input_count_ < 3) throw MeshError("planar graph needs at least three points");
    double xmin = std::numeric_limits<double>::infinity(), ymin = xmin, xmax = -xmin, ymax = -xmin;
    for (const Point& p : graph_.points) {
      if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw MeshError("non-finite input point");
      xmin = std::min(xmin, p[0]);
      xmax = std::max(xmax, p[0]);
      ymin = std::min(ymin, p[1]);
      ymax = std::max(ymax, p[1]);
    }
    scale_ = std::max(xmax - xmin, ymax - ymin);
    if (!(scale_ > 0)) throw MeshError("degenerate input: all points coincide");
    const double cx = 0.5 * (xmin + xmax), cy = 0.5 * (ymin + ymax);
    const double r = 20.0 * scale_;
    pts_ = graph_.points;
    pts_.push_back(make_point(cx - r * std::sqrt(3.0), cy - r));
    pts_.push_back(make_point(cx + r * std::sqrt(3.0), cy - r));
    pts_.push_back(make_point(cx, cy + 2 * r));
    vtri_.assign(pts_.size(), -1);
    const int t = new_tri(input_count_, input_count_ + 1, input_count_ + 2);
    for (int i = 0; i < 3; ++i) vtri_[static_cast<std::size_t>(input_count_ + i)] = t;
    hint_ = t;
  }

  int any_alive() const {
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (tris_[t].alive) return static_cast<int>(t);
    throw MeshError("triangulation became empty");
  }

  bool contains(int t, const Point& p) const {
    const Tri& tr = tris_[static_cast<std::size_t>(t)];
    for (int i = 0; i < 3; ++i)
      if (orient(pt(tr.v[(i + 1) % 3]), pt(tr.v[(i + 2) % 3]), p) < 0) return false;
    return true;
  }

  Located locate(const Point& p, int start, bool stop_at_walls) {
    int t = (start >= 0 && tris_[static_cast<std::size_t>(start)].alive) ? start : hint_;
    if (!tris_[static_cast<std::size_t>(t)].alive) t = any_alive();
    const std::size_t max_steps = 4 * tris_.size() + 100;
    for (std::size_t step = 0; step < max_steps; ++step) {
      const Tri& tr = tris_[static_cast<std::size_t>(t)];
      const int r = static_cast<int>(walk_counter_++ % 3);
      bool moved = false;
      for (int k = 0; k < 3; ++k) {
        const int i = (r + k) % 3;
        const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
        if (orient(pt(a), pt(b), p) < 0) {
          if (stop_at_walls && is_wall(a, b)) return {t, true, a, b};
          const int nb = tr.n[i];
          if (nb < 0) return {};
          t = nb;
          moved = true;
          break;
        }
      }
      if (!moved) return {t, false, -1, -1};
    }
    // Visibility walks can cycle on badly shaped meshes; fall back to a scan.
    for (std::size_t s = 0; s < tris_.size(); ++s)
      if (tris_[s].alive && contains(static_cast<int>(s), p)) return {static_cast<int>(s), false, -1, -1};
    return {};
  }

  bool in_cavity(int t) const { return mark_[static_cast<std::size_t>(t)] == stamp_; }
  void set_cavity(int t, bool on) { mark_[static_cast<std::size_t>(t)] = on ? stamp_ : 0; }

  void collect_boundary() {
    boundary_.clear();
    for (int c : cavity_) {
      const Tri& tr = tri(c);
      for (int i = 0; i < 3; ++i) {
        const int nb = tr.n[i];
        if (nb >= 0 && in_cavity(nb)) continue;
        boundary_.push_back({tr.v[(i + 1) % 3], tr.v[(i + 2) % 3], nb, c});
      }
    }
  }

  void reconnect(int t0) {
    // Keep only the part of the marked set reachable from t0.
    const unsigned old = stamp_;
    ++stamp_;
    std::vector<int> reach{t0};
    set_cavity(t0, true);
    for (std::size_t k = 0; k < reach.size(); ++k) {
      const Tri& tr = tri(reach[k]);
      for (int i = 0; i < 3; ++i) {
        const int nb = tr.n[i];
        if (nb >= 0 && mark_[static_cast<std::size_t>(nb)] == old) {
          set_cavity(nb, true);
          reach.push_back(nb);
        }
      }
    }
    for (int c : cavity_)
      if (mark_[static_cast<std::size_t>(c)] == old) mark_[static_cast<std::size_t>(c)] = 0;
    cavity_ = std::move(reach);
  }

  // Cavity of p around t0, never crossing walls other than `allowed`.
  bool build_cavity(const Point& p, int t0, Key allowed) {
    ++stamp_;
    cavity_.assign(1, t0);
    set_cavity(t0, true);
    for (std::size_t k = 0; k < cavity_.size(); ++k) {
      const Tri& tr = tri(cavity_[k]);
      for (int i = 0; i < 3; ++i) {
        const int nb = tr.n[i];
        if (nb < 0 || in_cavity(nb)) continue;
        const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
        const Key key = edge_key(a, b);
        if (key != allowed && walls_.count(key)) continue;
        const Tri& o = tri(nb);
        if (incircle(pt(o.v[0]), pt(o.v[1]), pt(o.v[2]), p) > 0) {
          set_cavity(nb, true);
          cavity_.push_back(nb);
        }
      }
    }
    for (int iter = 0; iter < 200; ++iter) {
      collect_boundary();
      bool changed = false;
      for (const CavityEdge& e : boundary_) {
        const Point& a = pt(e.a);
        const Point& b = pt(e.b);
        const double tol = 1e-13 * distance(a, b) * (distance(a, p) + distance(b, p));
        if (orient(a, b, p) > tol) continue;
        if (e.owner != t0) {
          set_cavity(e.owner, false);
        } else {
          const Key key = edge_key(e.a, e.b);
          if (e.outside < 0 || (key != allowed && walls_.count(key))) return false;
          set_cavity(e.outside, true);
          cavity_.push_back(e.outside);
        }
        changed = true;
        break;
      }
      if (!changed) {
        // Every vertex of the cavity must lie on its boundary.
        std::size_t vertex_count = 0;
        std::vector<int> verts;
        for (int c : cavity_)
          for (int v : tri(c).v) verts.push_back(v);
        std::sort(verts.begin(), verts.end());
        verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
        vertex_count = verts.size();
        if (vertex_count == boundary_.size()) return true;
        std::vector<int> on_boundary;
        for (const CavityEdge& e : boundary_) on_boundary.push_back(e.a);
        std::sort(on_boundary.begin(), on_boundary.end());
        int interior = -1;
        for (int v : verts)
          if (!std::binary_search(on_boundary.begin(), on_boundary.end(), v)) interior = v;
        if (interior < 0) return false;
        bool removed = false;
        for (int c : cavity_) {
          const auto& tv = tri(c).v;
          if (c != t0 && std::find(tv.begin(), tv.end(), interior) != tv.end()) {
            set_cavity(c, false);
            removed = true;
            break;
          }
        }
        if (!removed) return false;
      }
      std::vector<int> kept;
      for (int c : cavity_)
        if (in_cavity(c)) kept.push_back(c);
      cavity_ = std::move(kept);
      reconnect(t0);
    }
    return false;
  }

  // Replaces the current cavity by the fan around vertex v.
  void commit(int v) {
    const std::size_t nb = boundary_.size();
    std::vector<int> created(nb);
    for (std::size_t j = 0; j < nb; ++j) {
      const CavityEdge& e = boundary_[j];
      const int t = new_tri(e.a, e.b, v);
      created[j] = t;
      tri(t).n[2] = e.outside;
      if (e.outside >= 0) {
        Tri& o = tri(e.outside);
        for (int k = 0; k < 3; ++k)
          if (o.n[k] == e.owner) o.n[k] = t;
      }
    }
    // Link the fan: edge (b, v) of triangle j meets edge (v, b) of the triangle starting at b.
    std::unordered_map<int, int> starting_at;
    starting_at.reserve(nb * 2);
    for (std::size_t j = 0; j < nb; ++j) starting_at[boundary_[j].a] = created[j];
    std::unordered_map<int, int> ending_at;
    ending_at.reserve(nb * 2);
    for (std::size_t j = 0; j < nb; ++j) ending_at[boundary_[j].b] = created[j];
    for (std::size_t j = 0; j < nb; ++j) {
      Tri& t = tri(created[j]);
      t.n[0] = starting_at.at(boundary_[j].b);
      t.n[1] = ending_at.at(boundary_[j].a);
    }
    for (int c : cavity_) {
      tri(c).alive = false;
      set_cavity(c, false);
      free_.push_back(c);
    }
    for (std::size_t j = 0; j < nb; ++j) {
      vtri_[static_cast<std::size_t>(boundary_[j].a)] = created[j];
      vtri_[static_cast<std::size_t>(boundary_[j].b)] = created[j];
    }
    vtri_[static_cast<std::size_t>(v)] = created.front();
    hint_ = created.front();
    last_created_ = std::move(created);
  }

  std::vector<int> last_created_;

  enum class InsertStatus { inserted, duplicate, failed };

  InsertStatus insert_existing(int v, int start, Key allowed) {
    const Point& p = pt(v);
    const Located loc = locate(p, start, false);
    if (loc.tri < 0) return InsertStatus::failed;
    for (int w : tri(loc.tri).v)
      if (distance(pt(w), p) <= 1e-13 * scale_) return InsertStatus::duplicate;
    if (!build_cavity(p, loc.tri, allowed)) return InsertStatus::failed;
    commit(v);
    return InsertStatus::inserted;
  }

  int add_point(const Point& p) {
    pts_.push_back(p);
    vtri_.push_back(-1);
    if (pts_.size() > options_.max_vertices) throw MeshError("mesh refinement exceeded the vertex budget");
    return static_cast<int>(pts_.size()) - 1;
  }

  void drop_last_point() {
    pts_.pop_back();
    vtri_.pop_back();
  }

  void insert_input_points() {
    for (int v = 0; v < input_count_; ++v) {
      const InsertStatus s = insert_existing(v, hint_, 0);
      if (s == InsertStatus::duplicate) throw MeshError("duplicate input point");
      if (s == InsertStatus::failed) throw MeshError("failed to insert an input point");
    }
  }

  // Triangle containing edge (a, b) and the local index of the opposite vertex.
  std::pair<int, int> find_edge(int a, int b) const {
    const int start = vtri_[static_cast<std::size_t>(a)];
    if (start < 0) return {-1, -1};
    auto probe = [&](int t) -> int {
      const auto& v = tris_[static_cast<std::size_t>(t)].v;
      const bool has_a = v[0] == a || v[1] == a || v[2] == a;
      const bool has_b = v[0] == b || v[1] == b || v[2] == b;
      if (!has_a || !has_b) return -1;
      for (int i = 0; i < 3; ++i)
        if (v[i] != a && v[i] != b) return i;
      return -1;
    };
    for (int dir = 0; dir < 2; ++dir) {
      int t = start;
      for (std::size_t guard = 0; guard < 10000; ++guard) {
        const int i = probe(t);
        if (i >= 0) return {t, i};
        const auto& tr = tris_[static_cast<std::size_t>(t)];
        int ia = 0;
        while (tr.v[ia] != a) ++ia;
        const int next = dir == 0 ? tr.n[(ia + 2) % 3] : tr.n[(ia + 1) % 3];
        if (next < 0 || next == start) break;
        t = next;
      }
    }
    return {-1, -1};
  }

  void recover_segments() {
    std::deque<PlanarGraph::Segment> queue(graph_.segments.begin(), graph_.segments.end());
    for (const auto& s : graph_.segments)
      if (s.a < 0 || s.b < 0 || s.a >= input_count_ || s.b >= input_count_ || s.a == s.b)
        throw MeshError("segment references an invalid point");
    std::size_t guard = 0;
    while (!queue.empty()) {
      if (++guard > 10'000'000) throw MeshError("segment recovery does not terminate");
      const auto s = queue.front();
      queue.pop_front();
      if (find_edge(s.a, s.b).first >= 0) {
        walls_[edge_key(s.a, s.b)] = Wall{s.tag, s.locked};
        continue;
      }
      if (s.locked) throw MeshError("locked segment is not a Delaunay edge of its sample points");
      const Point m = 0.5 * (pt(s.a) + pt(s.b));
      const int v = add_point(m);
      const InsertStatus st = insert_existing(v, vtri_[static_cast<std::size_t>(s.a)], 0);
      if (st != InsertStatus::inserted) throw MeshError("segment recovery failed (collinear input vertex?)");
      queue.push_back({s.a, v, s.tag, false});
      queue.push_back({v, s.b, s.tag, false});
    }
  }

  void kill_region(std::vector<int> seeds) {
    std::vector<int> stack = std::move(seeds);
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      Tri& tr = tri(t);
      if (!tr.alive) continue;
      tr.alive = false;
      free_.push_back(t);
      for (int i = 0; i < 3; ++i) {
        const int nb = tr.n[i];
        if (nb < 0) continue;
        Tri& o = tri(nb);
        for (int k = 0; k < 3; ++k)
          if (o.n[k] == t) o.n[k] = -1;
        if (o.alive && !is_wall(tr.v[(i + 1) % 3], tr.v[(i + 2) % 3])) stack.push_back(nb);
      }
    }
  }

  void remove_exterior() {
    std::vector<int> seeds;
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!tris_[t].alive) continue;
      for (int v : tris_[t].v)
        if (v >= input_count_ && v < input_count_ + 3) seeds.push_back(static_cast<int>(t));
    }
    kill_region(seeds);
    for (const Point& h : graph_.holes) {
      const Located loc = locate(h, any_alive(), false);
      if (loc.tri >= 0) kill_region({loc.tri});
    }
    std::fill(vtri_.begin(), vtri_.end(), -1);
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (tris_[t].alive)
        for (int v : tris_[t].v) vtri_[static_cast<std::size_t>(v)] = static_cast<int>(t);
    hint_ = any_alive();
  }

  bool encroached(int a, int b) const {
    const auto [t, i] = find_edge(a, b);
    if (t < 0) return false;
    const Point& pa = pt(a);
    const Point& pb = pt(b);
    auto apex_encroaches = [&](int apex) {
      const Point& c = pt(apex);
      return dot(pa - c, pb - c) < -1e-12 * dot(pa - pb, pa - pb);
    };
    const Tri& tr = tris_[static_cast<std::size_t>(t)];
    if (apex_encroaches(tr.v[i])) return true;
    const int nb = tr.n[i];
    if (nb >= 0) {
      for (int w : tris_[static_cast<std::size_t>(nb)].v)
        if (w != a && w != b) return apex_encroaches(w);
    }
    return false;
  }

  std::deque<std::pair<int, int>> segment_queue_;
  struct QueuedTri {
    int t;
    std::array<int, 3> v;
  };
  std::deque<QueuedTri> tri_queue_;

  void queue_created() {
    for (int t : last_created_) {
      tri_queue_.push_back({t, tri(t).v});
      const auto& v = tri(t).v;
      if (is_wall(v[0], v[1])) segment_queue_.emplace_back(v[0], v[1]);
    }
  }

  bool split_segment(int a, int b) {
    const auto it = walls_.find(edge_key(a, b));
    if (it == walls_.end() || it->second.locked) return false;
    const Wall w = it->second;
    const Point m = 0.5 * (pt(a) + pt(b));
    const int v = add_point(m);
    const auto [t, i] = find_edge(a, b);
    const InsertStatus st = insert_existing(v, t, edge_key(a, b));
    if (st != InsertStatus::inserted) {
      drop_last_point();
      return false;
    }
    walls_.erase(edge_key(a, b));
    walls_[edge_key(a, v)] = w;
    walls_[edge_key(v, b)] = w;
    segment_queue_.emplace_back(a, v);
    segment_queue_.emplace_back(v, b);
    queue_created();
    return true;
  }

  void drain_segments() {
    while (!segment_queue_.empty()) {
      const auto [a, b] = segment_queue_.front();
      segment_queue_.pop_front();
      const auto it = walls_.find(edge_key(a, b));
      if (it == walls_.end() || it->second.locked) continue;
      if (distance(pt(a), pt(b)) < 1e-9 * scale_) continue;
      if (encroached(a, b)) split_segment(a, b);
    }
  }

  bool is_bad(const Tri& tr) const {
    const Point& a = pt(tr.v[0]);
    const Point& b = pt(tr.v[1]);
    const Point& c = pt(tr.v[2]);
    const double la = distance(b, c), lb = distance(c, a), lc = distance(a, b);
    const double lmin = std::min({la, lb, lc});
    const double lmax = std::max({la, lb, lc});
    if (lmin < 1e-9 * scale_) return false;
    const double area2 = std::abs(static_cast<double>(orient(a, b, c)));
    const double circumradius = la * lb * lc / (2.0 * area2);
    const double bound = 1.0 / (2.0 * std::sin(options_.min_angle_deg * std::numbers::pi / 180.0));
    if (circumradius / lmin > bound) return true;
    if (options_.size) {
      const Point centroid = (1.0 / 3.0) * (a + b + c);
      if (lmax > options_.size(centroid)) return true;
    }
    return false;
  }

  void refine() {
    for (const auto& [key, wall] : walls_)
      if (!wall.locked)
        segment_queue_.emplace_back(static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu));
    drain_segments();
    for (std::size_t t = 0; t < tris_.size(); ++t)
      if (tris_[t].alive) tri_queue_.push_back({static_cast<int>(t), tris_[t].v});
    while (!tri_queue_.empty()) {
      drain_segments();
      if (tri_queue_.empty()) break;
      const QueuedTri q = tri_queue_.front();
      tri_queue_.pop_front();
      const Tri& tr = tri(q.t);
      if (!tr.alive || tr.v != q.v || !is_bad(tr)) continue;
      const Point c = circumcenter(pt(tr.v[0]), pt(tr.v[1]), pt(tr.v[2]));
      if (!std::isfinite(c[0]) || !std::isfinite(c[1])) continue;
      const Located loc = locate(c, q.t, true);
      if (loc.crossed_wall) {
        if (split_segment(loc.wall_a, loc.wall_b)) tri_queue_.push_back(q);
        continue;
      }
      if (loc.tri < 0) continue;
      bool near_vertex = false;
      for (int w : tri(loc.tri).v)
        if (distance(pt(w), c) <= 1e-11 * scale_) near_vertex = true;
      if (near_vertex) continue;
      if (!build_cavity(c, loc.tri, 0)) continue;
      // Walls on the cavity boundary whose diametral circle holds c are split instead.
      std::vector<std::pair<int, int>> hit;
      bool locked_hit = false;
      for (const CavityEdge& e : boundary_) {
        const auto it = walls_.find(edge_key(e.a, e.b));
        if (it == walls_.end()) continue;
        if (dot(pt(e.a) - c, pt(e.b) - c) < 0) {
          if (it->second.locked) locked_hit = true;
          else hit.emplace_back(e.a, e.b);
        }
      }
      if (!hit.empty()) {
        // Clear cavity marks before other insertions reuse them.
        for (int t : cavity_) set_cavity(t, false);
        bool any = false;
        for (const auto& [a, b] : hit) any = split_segment(a, b) || any;
        if (any) tri_queue_.push_back(q);
        continue;
      }
      if (locked_hit) {
        for (int t : cavity_) set_cavity(t, false);
        continue;
      }
      const int v = add_point(c);
      commit(v);
      queue_created();
    }
  }

  Triangulation output() {
    Triangulation out;
    std::vector<int> index(pts_.size(), -1);
    std::vector<int> tri_index(tris_.size(), -1);
    std::vector<char> used(pts_.size(), 0);
    for (const Tri& tr : tris_)
      if (tr.alive)
        for (int v : tr.v) used[static_cast<std::size_t>(v)] = 1;
    for (int v = 0; v < input_count_; ++v)
      if (!used[static_cast<std::size_t>(v)]) throw MeshError("input point outside the meshed region");
    for (std::size_t v = 0; v < pts_.size(); ++v) {
      if (static_cast<int>(v) >= input_count_ && static_cast<int>(v) < input_count_ + 3) continue;
      if (!used[v]) continue;
      index[v] = static_cast<int>(out.vertices.size());
      out.vertices.push_back(pts_[v]);
    }
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!tris_[t].alive) continue;
      tri_index[t] = static_cast<int>(out.triangles.size());
      const auto& v = tris_[t].v;
      out.triangles.push_back({index[static_cast<std::size_t>(v[0])], index[static_cast<std::size_t>(v[1])],
                               index[static_cast<std::size_t>(v[2])]});
    }
    if (out.triangles.empty()) throw MeshError("no triangles left after removing the exterior");
    for (const auto& [key, wall] : walls_) {
      const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
      if (index[static_cast<std::size_t>(a)] < 0 || index[static_cast<std::size_t>(b)] < 0) continue;
      out.segments.push_back({index[static_cast<std::size_t>(a)], index[static_cast<std::size_t>(b)], wall.tag});
    }
    std::sort(out.segments.begin(), out.segments.end(),
              [](const auto& x, const auto& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
    out.component.assign(out.triangles.size(), -1);
    for (std::size_t t = 0; t < tris_.size(); ++t) {
      if (!tris_[t].alive || out.component[static_cast<std::size_t>(tri_index[t])] >= 0) continue;
      const int id = out.component_count++;
      std::vector<int> stack{static_cast<int>(t)};
      out.component[static_cast<std::size_t>(tri_index[t])] = id;
      while (!stack.empty()) {
        const int s = stack.back();
        stack.pop_back();
        const Tri& tr = tris_[static_cast<std::size_t>(s)];
        for (int i = 0; i < 3; ++i) {
          const int nb = tr.n[i];
          if (nb < 0 || !tris_[static_cast<std::size_t>(nb)].alive) continue;
          if (is_wall(tr.v[(i + 1) % 3], tr.v[(i + 2) % 3])) continue;
          int& c = out.component[static_cast<std::size_t>(tri_index[static_cast<std::size_t>(nb)])];
          if (c < 0) {
            c = id;
            stack.push_back(nb);
          }
        }
      }
    }
    return out;
  }
};

}  // namespace

Triangulation triangulate(const PlanarGraph& graph, const RefinementOptions& options) {
  Mesher mesher(graph, options);
  return mesher.run();
}

}  // namespace topoforge
