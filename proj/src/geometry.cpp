#include "qfup/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "qfup/errors.hpp"

namespace qfup {

Rect Rect::hull(const Rect& a, const Rect& b) {
  return {std::min(a.t_lo, b.t_lo), std::max(a.t_hi, b.t_hi),
          std::min(a.x_lo, b.x_lo), std::max(a.x_hi, b.x_hi)};
}

bool RegionSet::contains(Point p) const {
  for (const Rect& r : rects)
    if (r.contains(p)) return true;
  return false;
}

Rect RegionSet::bounding_box() const {
  if (rects.empty()) throw Error("bounding_box of empty region");
  Rect b = rects.front();
  for (const Rect& r : rects) b = Rect::hull(b, r);
  return b;
}

CausalRelation causal_relation(Point p, Point q) {
  const double dt = q.t - p.t;
  const double dx = q.x - p.x;
  if (std::fabs(dt) >= std::fabs(dx))
    return dt >= 0.0 ? CausalRelation::q_in_future_of_p
                     : CausalRelation::q_in_past_of_p;
  return CausalRelation::spacelike;
}

namespace {

// Extremes of |q.x - p.x| and q.t - p.t over a rectangle pair.
struct PairGaps {
  double min_abs_dx, max_abs_dx, min_dt, max_dt;
};

PairGaps gaps(const Rect& a, const Rect& b) {
  PairGaps g;
  g.max_abs_dx = std::max(b.x_hi - a.x_lo, a.x_hi - b.x_lo);
  g.min_abs_dx = std::max({0.0, b.x_lo - a.x_hi, a.x_lo - b.x_hi});
  g.min_dt = b.t_lo - a.t_hi;
  g.max_dt = b.t_hi - a.t_lo;
  return g;
}

}  // namespace

RegionRelation region_relation(const RegionSet& a, const RegionSet& b) {
  if (a.empty() || b.empty())
    throw Error("region_relation requires non-empty regions");
  bool all_spacelike = true, all_a_first = true, all_b_first = true;
  for (const Rect& ra : a.rects)
    for (const Rect& rb : b.rects) {
      const PairGaps g = gaps(ra, rb);
      // strict spacelike: min |dx| > max |dt| over the pair
      if (!(g.min_abs_dx > std::max(std::fabs(g.min_dt), std::fabs(g.max_dt))))
        all_spacelike = false;
      // every b point causally follows every a point: min dt >= max |dx|
      if (!(g.min_dt >= g.max_abs_dx)) all_a_first = false;
      if (!(-g.max_dt >= g.max_abs_dx)) all_b_first = false;
    }
  if (all_spacelike) return RegionRelation::strictly_spacelike;
  if (all_a_first) return RegionRelation::totally_timelike_a_before_b;
  if (all_b_first) return RegionRelation::totally_timelike_b_before_a;
  return RegionRelation::causally_connected;
}

RegionSet causal_shadow(const RegionSet& a, ConeDirection dir, const Rect& clip,
                        int slabs) {
  if (a.empty()) return {};
  if (!clip.valid()) throw Error("causal_shadow clip window is empty");
  if (slabs < 1) throw Error("causal_shadow needs at least one slab");
  RegionSet out;
  const double dt_slab = (clip.t_hi - clip.t_lo) / slabs;
  for (const Rect& r : a.rects) {
    for (int s = 0; s < slabs; ++s) {
      const double ta = clip.t_lo + s * dt_slab;
      const double tb = clip.t_lo + (s + 1) * dt_slab;
      // light-cone radius grows away from the source; take the slab edge
      // farthest from it so the slab rectangle over-covers
      double radius;
      if (dir == ConeDirection::future) {
        if (tb < r.t_lo) continue;  // slab entirely before the source
        radius = tb - r.t_lo;
      } else {
        if (ta > r.t_hi) continue;
        radius = r.t_hi - ta;
      }
      radius = std::max(radius, 0.0);
      Rect piece{std::max(ta, dir == ConeDirection::future ? r.t_lo : clip.t_lo),
                 std::min(tb, dir == ConeDirection::past ? r.t_hi : clip.t_hi),
                 std::max(r.x_lo - radius, clip.x_lo),
                 std::min(r.x_hi + radius, clip.x_hi)};
      if (piece.valid() && piece.t_lo <= piece.t_hi &&
          piece.x_lo <= piece.x_hi)
        out.rects.push_back(piece);
    }
  }
  return out;
}

namespace {

// Causal past of a rect is the intersection of three half-planes:
//   t <= t_hi,  x - t >= x_lo - t_hi,  x + t <= x_hi + t_hi.
// The future case mirrors in t. Convexity makes corner checks exact.
struct Wedge {
  double t_cap, lo, hi;  // p.x - p.t >= lo and p.x + p.t <= hi in past form
  bool future;

  bool contains(Point p) const {
    const double t = future ? -p.t : p.t;
    return t <= t_cap && (p.x - t) >= lo && (p.x + t) <= hi;
  }
};

Wedge wedge_of(const Rect& r, ConeDirection dir) {
  if (dir == ConeDirection::past)
    return {r.t_hi, r.x_lo - r.t_hi, r.x_hi + r.t_hi, false};
  // future cone of r = past cone of r mirrored: replace t by -t
  return {-r.t_lo, r.x_lo + r.t_lo, r.x_hi - r.t_lo, true};
}

bool wedge_covers_rect(const Wedge& w, const Rect& r) {
  const Point corners[4] = {{r.t_lo, r.x_lo}, {r.t_lo, r.x_hi},
                            {r.t_hi, r.x_lo}, {r.t_hi, r.x_hi}};
  for (const Point& c : corners)
    if (!w.contains(c)) return false;
  return true;
}

bool in_union(const std::vector<Wedge>& ws, Point p) {
  for (const Wedge& w : ws)
    if (w.contains(p)) return true;
  return false;
}

std::optional<Point> escape_rec(const Rect& r, const std::vector<Wedge>& ws,
                                double min_size) {
  for (const Wedge& w : ws)
    if (wedge_covers_rect(w, r)) return std::nullopt;
  const Point center{0.5 * (r.t_lo + r.t_hi), 0.5 * (r.x_lo + r.x_hi)};
  if (!in_union(ws, center)) return center;
  if (r.t_hi - r.t_lo < min_size && r.x_hi - r.x_lo < min_size) {
    // sliver jointly covered by several wedges, or an escape region thinner
    // than the resolution; probe the corners, then give up and call it covered
    const Point corners[4] = {{r.t_lo, r.x_lo}, {r.t_lo, r.x_hi},
                              {r.t_hi, r.x_lo}, {r.t_hi, r.x_hi}};
    for (const Point& c : corners)
      if (!in_union(ws, c)) return c;
    return std::nullopt;
  }
  const double tm = 0.5 * (r.t_lo + r.t_hi);
  const double xm = 0.5 * (r.x_lo + r.x_hi);
  const Rect quads[4] = {{r.t_lo, tm, r.x_lo, xm},
                         {r.t_lo, tm, xm, r.x_hi},
                         {tm, r.t_hi, r.x_lo, xm},
                         {tm, r.t_hi, xm, r.x_hi}};
  for (const Rect& q : quads)
    if (auto p = escape_rec(q, ws, min_size)) return p;
  return std::nullopt;
}

}  // namespace

std::optional<Point> shadow_escape_point(const Rect& probe,
                                         const RegionSet& sources,
                                         ConeDirection dir) {
  if (!probe.valid()) throw Error("shadow_escape_point probe is empty");
  std::vector<Wedge> ws;
  for (const Rect& r : sources.rects) ws.push_back(wedge_of(r, dir));
  if (ws.empty()) return Point{probe.t_lo, probe.x_lo};
  const double scale =
      std::max({1.0, std::fabs(probe.t_lo), std::fabs(probe.t_hi),
                std::fabs(probe.x_lo), std::fabs(probe.x_hi),
                probe.t_hi - probe.t_lo, probe.x_hi - probe.x_lo});
  return escape_rec(probe, ws, 1e-12 * scale);
}

}  // namespace qfup
