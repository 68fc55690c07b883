#pragma once

#include <optional>
#include <vector>

namespace qfup {

// Flat 1+1 spacetime with unit signal speed; first coordinate is time.
struct Point {
  double t = 0.0;
  double x = 0.0;
};

// Closed axis-aligned rectangle [t_lo, t_hi] x [x_lo, x_hi].
struct Rect {
  double t_lo = 0.0, t_hi = 0.0;
  double x_lo = 0.0, x_hi = 0.0;

  bool valid() const { return t_lo <= t_hi && x_lo <= x_hi; }
  bool contains(Point p) const {
    return p.t >= t_lo && p.t <= t_hi && p.x >= x_lo && p.x <= x_hi;
  }
  static Rect hull(const Rect& a, const Rect& b);
};

// Finite union of rectangles; empty vector means the empty region.
struct RegionSet {
  std::vector<Rect> rects;

  bool empty() const { return rects.empty(); }
  bool contains(Point p) const;
  Rect bounding_box() const;  // requires non-empty
};

enum class CausalRelation {
  q_in_future_of_p,  // |dt| >= |dx| and dt >= 0 (coincident points land here)
  q_in_past_of_p,    // |dt| >= |dx| and dt < 0
  spacelike,
};

// Cone boundary counts as causal; ties at dt == 0, |dx| == 0 (coincident
// points) count as future by convention.
CausalRelation causal_relation(Point p, Point q);

enum class RegionRelation {
  strictly_spacelike,            // every cross pair spacelike
  totally_timelike_a_before_b,   // every B point causally follows every A point
  totally_timelike_b_before_a,
  causally_connected,            // anything else
};

RegionRelation region_relation(const RegionSet& a, const RegionSet& b);

enum class ConeDirection { future, past };

// Conservative outer cover of the causal future/past of `a` clipped to
// `clip`, built from `slabs` uniform time slabs whose spatial extent is
// rounded outward; every point of the true shadow inside the clip window
// is covered, and refinement shrinks the overshoot.
RegionSet causal_shadow(const RegionSet& a, ConeDirection dir, const Rect& clip,
                        int slabs = 64);

// Exact test of `probe` against the union of causal pasts (or futures) of
// `sources`. Returns a point of `probe` strictly outside the union when one
// exists, nullopt when `probe` is covered. Coverage of a sub-square is
// certified only by containment in a single source wedge; candidate
// witnesses are verified pointwise, so a returned witness is never spurious.
// Sub-squares below 1e-12 of the probe scale whose corners and center all
// lie in the union are treated as covered.
std::optional<Point> shadow_escape_point(const Rect& probe,
                                         const RegionSet& sources,
                                         ConeDirection dir);

}  // namespace qfup
