#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "haven/rng.hpp"

namespace haven {

/// Absolute tolerance for geometric predicates, in meters.
inline constexpr double kGeomEps = 1e-9;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
    friend constexpr Vec2 operator*(double s, Vec2 v) { return {v.x * s, v.y * s}; }
    constexpr Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    constexpr Vec2& operator-=(Vec2 o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    constexpr Vec2& operator*=(double s) {
        x *= s;
        y *= s;
        return *this;
    }
    constexpr bool operator==(const Vec2&) const = default;

    [[nodiscard]] constexpr double dot(Vec2 o) const { return x * o.x + y * o.y; }
    [[nodiscard]] constexpr double cross(Vec2 o) const { return x * o.y - y * o.x; }
    [[nodiscard]] double norm() const { return std::hypot(x, y); }
    [[nodiscard]] constexpr double norm_sq() const { return x * x + y * y; }
    [[nodiscard]] Vec2 normalized(double eps = 1e-12) const {
        const double n = norm();
        return n <= eps ? Vec2{} : Vec2{x / n, y / n};
    }
    [[nodiscard]] bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

/// Positions share the vector type; `make_point` is the validating constructor.
using Point2 = Vec2;

[[nodiscard]] inline Point2 make_point(double x, double y) {
    if (!std::isfinite(x) || !std::isfinite(y)) {
        throw std::invalid_argument("point coordinates must be finite");
    }
    return {x, y};
}

[[nodiscard]] inline double distance(Point2 a, Point2 b) { return (a - b).norm(); }

[[nodiscard]] inline Vec2 unit_from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }

/// Wraps an angle into (-pi, pi].
[[nodiscard]] inline double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a + std::numbers::pi, two_pi);
    if (a <= 0.0) {
        a += two_pi;
    }
    return a - std::numbers::pi;
}

/// Distance from `p` to the closed segment [a, b], and the closest point.
struct SegmentProjection {
    Point2 point;
    double distance;
};

[[nodiscard]] inline SegmentProjection project_to_segment(Point2 p, Point2 a, Point2 b) {
    const Vec2 ab = b - a;
    const double len_sq = ab.norm_sq();
    double t = len_sq > 0.0 ? (p - a).dot(ab) / len_sq : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Point2 q = a + ab * t;
    return {q, distance(p, q)};
}

/// Convex polygon, counter-clockwise, with cached area centroid.
class Polygon {
public:
    Polygon() = default;

    /// Accepts either winding; stores counter-clockwise. Throws on fewer
    /// than three vertices, non-convexity, or zero area.
    explicit Polygon(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
        if (vertices_.size() < 3) {
            throw std::invalid_argument("polygon needs at least 3 vertices");
        }
        for (const auto& v : vertices_) {
            if (!v.finite()) {
                throw std::invalid_argument("polygon vertices must be finite");
            }
        }
        double twice_area = signed_twice_area(vertices_);
        if (twice_area < 0.0) {
            std::reverse(vertices_.begin(), vertices_.end());
            twice_area = -twice_area;
        }
        if (twice_area <= kGeomEps) {
            throw std::invalid_argument("polygon has zero area");
        }
        const std::size_t n = vertices_.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 e0 = vertices_[(i + 1) % n] - vertices_[i];
            const Vec2 e1 = vertices_[(i + 2) % n] - vertices_[(i + 1) % n];
            if (e0.cross(e1) < -kGeomEps) {
                throw std::invalid_argument("polygon is not convex");
            }
        }
        area_ = 0.5 * twice_area;
        centroid_ = area_centroid(vertices_, twice_area);
        edge_normals_.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 e = vertices_[(i + 1) % n] - vertices_[i];
            // Zero-length edges (duplicate vertices) get a zero normal and never reject.
            edge_normals_.push_back(Vec2{e.y, -e.x}.normalized());
        }
    }

    [[nodiscard]] const std::vector<Point2>& vertices() const { return vertices_; }
    [[nodiscard]] std::size_t size() const { return vertices_.size(); }
    [[nodiscard]] Point2 centroid() const { return centroid_; }
    [[nodiscard]] double area() const { return area_; }
    /// Outward unit normal of edge i (from vertex i to i+1).
    [[nodiscard]] Vec2 outward_normal(std::size_t i) const { return edge_normals_[i]; }

    /// Signed distance of `p` outside the supporting line of edge i.
    [[nodiscard]] double edge_offset(std::size_t i, Point2 p) const {
        return edge_normals_[i].dot(p - vertices_[i]);
    }

    bool operator==(const Polygon& o) const { return vertices_ == o.vertices_; }

private:
    static double signed_twice_area(const std::vector<Point2>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            s += v[i].cross(v[(i + 1) % v.size()]);
        }
        return s;
    }

    static Point2 area_centroid(const std::vector<Point2>& v, double twice_area) {
        double cx = 0.0;
        double cy = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const Point2 a = v[i];
            const Point2 b = v[(i + 1) % v.size()];
            const double w = a.cross(b);
            cx += (a.x + b.x) * w;
            cy += (a.y + b.y) * w;
        }
        return {cx / (3.0 * twice_area), cy / (3.0 * twice_area)};
    }

    std::vector<Point2> vertices_;
    std::vector<Vec2> edge_normals_;
    Point2 centroid_;
    double area_ = 0.0;
};

/// Sector field of view plus an omnidirectional reduced-range ring.
struct FovSector {
    Point2 apex;
    double heading = 0.0;
    double aperture = 0.0;
    double range = 0.0;
    double ring_range = 0.0;

    void validate() const {
        if (!(aperture > 0.0 && aperture <= 2.0 * std::numbers::pi + kGeomEps)) {
            throw std::invalid_argument("fov aperture must be in (0, 2pi]");
        }
        if (!(ring_range > 0.0 && ring_range <= range)) {
            throw std::invalid_argument("fov ring range must be in (0, range]");
        }
    }

    /// Sensing footprint only; occlusion is not considered.
    [[nodiscard]] bool covers(Point2 p) const {
        const Vec2 d = p - apex;
        const double dist = d.norm();
        if (dist <= ring_range) {
            return true;
        }
        if (dist > range) {
            return false;
        }
        return std::abs(wrap_angle(std::atan2(d.y, d.x) - heading)) <= 0.5 * aperture;
    }
};

/// Polygon whose vertices sit on the circle (center, radius) at the given
/// angles (radians, any order).
[[nodiscard]] inline Polygon convex_polygon_from_angles(Point2 center, double radius, std::vector<double> angles) {
    std::sort(angles.begin(), angles.end());
    std::vector<Point2> verts;
    verts.reserve(angles.size());
    for (double a : angles) {
        verts.push_back(center + unit_from_angle(a) * radius);
    }
    return Polygon(std::move(verts));
}

/// Random convex polygon with vertices on a circle at sorted uniform angles.
/// Near-degenerate draws (area below 10% of r^2) are resampled.
[[nodiscard]] inline Polygon random_convex_polygon(Point2 center, double radius, int n_vertices, Rng& rng) {
    if (n_vertices < 3) {
        throw std::invalid_argument("random_convex_polygon: n_vertices must be >= 3");
    }
    if (!(radius > 0.0)) {
        throw std::invalid_argument("random_convex_polygon: radius must be positive");
    }
    constexpr int kMaxAttempts = 1000;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        std::vector<double> angles(static_cast<std::size_t>(n_vertices));
        for (auto& a : angles) {
            a = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        std::sort(angles.begin(), angles.end());
        bool distinct = true;
        for (std::size_t i = 0; i + 1 < angles.size(); ++i) {
            distinct = distinct && angles[i + 1] - angles[i] > 1e-6;
        }
        if (!distinct) {
            continue;
        }
        std::vector<Point2> verts;
        for (double a : angles) {
            verts.push_back(center + unit_from_angle(a) * radius);
        }
        double twice_area = 0.0;
        for (std::size_t i = 0; i < verts.size(); ++i) {
            twice_area += verts[i].cross(verts[(i + 1) % verts.size()]);
        }
        if (0.5 * twice_area < 0.1 * radius * radius) {
            continue;
        }
        return Polygon(std::move(verts));
    }
    throw std::runtime_error("random_convex_polygon: could not draw a non-degenerate polygon");
}

/// Boundary counts as inside.
[[nodiscard]] inline bool point_in_polygon(Point2 p, const Polygon& poly) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (poly.edge_offset(i, p) > kGeomEps) {
            return false;
        }
    }
    return true;
}

[[nodiscard]] inline bool point_in_any(Point2 p, std::span<const Polygon> obstacles) {
    return std::any_of(obstacles.begin(), obstacles.end(), [&](const Polygon& o) { return point_in_polygon(p, o); });
}

/// Closest point on the polygon boundary and its distance.
[[nodiscard]] inline SegmentProjection closest_boundary_point(Point2 p, const Polygon& poly) {
    SegmentProjection best{poly.vertices().front(), std::numeric_limits<double>::infinity()};
    const auto& v = poly.vertices();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto proj = project_to_segment(p, v[i], v[(i + 1) % v.size()]);
        if (proj.distance < best.distance) {
            best = proj;
        }
    }
    return best;
}

/// 0 inside (boundary included); otherwise the Euclidean distance to the nearest edge.
[[nodiscard]] inline double distance_to_polygon(Point2 p, const Polygon& poly) {
    if (point_in_polygon(p, poly)) {
        return 0.0;
    }
    return closest_boundary_point(p, poly).distance;
}

/// Minimum clearance to any obstacle; +inf when the list is empty.
[[nodiscard]] inline double clearance(Point2 p, std::span<const Polygon> obstacles) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles) {
        best = std::min(best, distance_to_polygon(p, o));
        if (best == 0.0) {
            break;
        }
    }
    return best;
}

/// True iff the segment a->b enters the interior of `poly`. Grazing a
/// vertex or running along an edge does not count; a degenerate segment
/// is blocked iff the point lies inside (boundary included).
[[nodiscard]] inline bool segment_hits_polygon(Point2 a, Point2 b, const Polygon& poly) {
    const Vec2 d = b - a;
    if (d.norm_sq() <= kGeomEps * kGeomEps) {
        return point_in_polygon(a, poly);
    }
    double t_lo = 0.0;
    double t_hi = 1.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        // strictly inside the edge's half-plane: offset(a) + t * n.d < -eps
        const double offset = poly.edge_offset(i, a);
        const double rate = poly.outward_normal(i).dot(d);
        if (std::abs(rate) < 1e-15) {
            if (offset > -kGeomEps) {
                return false;
            }
            continue;
        }
        const double t = (-kGeomEps - offset) / rate;
        if (rate > 0.0) {
            t_hi = std::min(t_hi, t);
        } else {
            t_lo = std::max(t_lo, t);
        }
        if (t_lo >= t_hi) {
            return false;
        }
    }
    return (t_hi - t_lo) * std::sqrt(d.norm_sq()) > kGeomEps;
}

[[nodiscard]] inline bool segment_clear(Point2 a, Point2 b, std::span<const Polygon> obstacles) {
    return std::none_of(obstacles.begin(), obstacles.end(),
                        [&](const Polygon& o) { return segment_hits_polygon(a, b, o); });
}

/// In the sensing footprint and with an unobstructed line of sight from the apex.
[[nodiscard]] inline bool is_visible(Point2 target, const FovSector& sensor, std::span<const Polygon> obstacles) {
    return sensor.covers(target) && segment_clear(sensor.apex, target, obstacles);
}

/// Andrew's monotone chain. Returns counter-clockwise hull without collinear points.
[[nodiscard]] inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
    std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) {
        return pts;
    }
    std::vector<Point2> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && (hull[k - 1] - hull[k - 2]).cross(p - hull[k - 2]) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
        while (k >= lower && (hull[k - 1] - hull[k - 2]).cross(*it - hull[k - 2]) <= 0.0) {
            --k;
        }
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace haven
