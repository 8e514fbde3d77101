#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "haven/geometry.hpp"

using namespace haven;
using std::numbers::pi;

namespace {

// Winding number by summing signed angles; independent of the half-plane test.
bool winding_inside(Point2 p, const Polygon& poly) {
    const auto& v = poly.vertices();
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const Vec2 a = v[i] - p;
        const Vec2 b = v[(i + 1) % v.size()] - p;
        if (a.norm() < 1e-12 || b.norm() < 1e-12) {
            return true;
        }
        total += std::atan2(a.cross(b), a.dot(b));
    }
    return std::abs(total) > pi;
}

bool convex_by_triples(const Polygon& poly) {
    const auto& v = poly.vertices();
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t k = 0; k < n; ++k) {
                if (i < j && j < k && (v[j] - v[i]).cross(v[k] - v[i]) < -1e-9) {
                    return false;
                }
            }
        }
    }
    return true;
}

std::vector<Polygon> random_scene(Rng& rng, int n) {
    std::vector<Polygon> out;
    for (int i = 0; i < n; ++i) {
        const Point2 c{rng.uniform(1.0, 19.0), rng.uniform(1.0, 19.0)};
        out.push_back(random_convex_polygon(c, rng.uniform(0.5, 2.0), static_cast<int>(rng.uniform_int(3, 5)), rng));
    }
    return out;
}

// Length of segment a->b lying inside poly, from Liang-Barsky clipping (no epsilon).
double inside_length(Point2 a, Point2 b, const Polygon& poly) {
    const Vec2 d = b - a;
    double lo = 0.0, hi = 1.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const double off = poly.edge_offset(i, a);
        const double rate = poly.outward_normal(i).dot(d);
        if (std::abs(rate) < 1e-15) {
            if (off > 0.0) {
                return 0.0;
            }
            continue;
        }
        const double t = -off / rate;
        if (rate > 0.0) {
            hi = std::min(hi, t);
        } else {
            lo = std::max(lo, t);
        }
    }
    return hi > lo ? (hi - lo) * d.norm() : 0.0;
}

}  // namespace

TEST(Point2, RejectsNonFinite) {
    EXPECT_THROW((void)make_point(std::nan(""), 0.0), std::invalid_argument);
    EXPECT_THROW((void)make_point(0.0, INFINITY), std::invalid_argument);
    EXPECT_NO_THROW((void)make_point(1.0, 2.0));
}

TEST(WrapAngle, HalfOpenInterval) {
    EXPECT_DOUBLE_EQ(wrap_angle(pi), pi);
    EXPECT_DOUBLE_EQ(wrap_angle(-pi), pi);
    EXPECT_NEAR(wrap_angle(3.0 * pi / 2.0), -pi / 2.0, 1e-12);
    EXPECT_NEAR(wrap_angle(7.0 * pi), pi, 1e-9);
    for (double a = -20.0; a < 20.0; a += 0.37) {
        const double w = wrap_angle(a);
        EXPECT_GT(w, -pi);
        EXPECT_LE(w, pi);
        EXPECT_NEAR(std::remainder(w - a, 2.0 * pi), 0.0, 1e-9);
    }
}

TEST(Polygon, Invariants) {
    EXPECT_THROW(Polygon({{0, 0}, {1, 0}}), std::invalid_argument);
    EXPECT_THROW(Polygon({{0, 0}, {1, 0}, {2, 0}}), std::invalid_argument);
    EXPECT_THROW(Polygon({{0, 0}, {2, 0}, {1, 0.2}, {2, 2}, {0, 2}}), std::invalid_argument);
    // Clockwise input is stored counter-clockwise.
    Polygon cw({{0, 0}, {0, 1}, {1, 1}, {1, 0}});
    EXPECT_NEAR(cw.area(), 1.0, 1e-12);
    const auto& v = cw.vertices();
    EXPECT_GT((v[1] - v[0]).cross(v[2] - v[1]), 0.0);
    EXPECT_NEAR(cw.centroid().x, 0.5, 1e-9);
    EXPECT_NEAR(cw.centroid().y, 0.5, 1e-9);
}

TEST(Polygon, CentroidMatchesTriangleFan) {
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
        const Polygon p = random_convex_polygon({rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(0.5, 2.0),
                                                static_cast<int>(rng.uniform_int(3, 5)), rng);
        // Area-weighted mean of fan triangle centroids.
        const auto& v = p.vertices();
        double a_sum = 0.0, cx = 0.0, cy = 0.0;
        for (std::size_t k = 1; k + 1 < v.size(); ++k) {
            const double a = 0.5 * (v[k] - v[0]).cross(v[k + 1] - v[0]);
            a_sum += a;
            cx += a * (v[0].x + v[k].x + v[k + 1].x) / 3.0;
            cy += a * (v[0].y + v[k].y + v[k + 1].y) / 3.0;
        }
        EXPECT_NEAR(p.area(), a_sum, 1e-9);
        EXPECT_NEAR(p.centroid().x, cx / a_sum, 1e-9);
        EXPECT_NEAR(p.centroid().y, cy / a_sum, 1e-9);
    }
}

TEST(RandomConvexPolygon, ForcedAnglesGiveRotatedSquare) {
    const Polygon sq = convex_polygon_from_angles({0, 0}, 1.0, {0.0, pi / 2, pi, 3 * pi / 2});
    ASSERT_EQ(sq.size(), 4u);
    EXPECT_NEAR(sq.area(), 2.0, 1e-12);
    EXPECT_NEAR(sq.vertices()[0].x, 1.0, 1e-12);
    EXPECT_NEAR(sq.vertices()[1].y, 1.0, 1e-12);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(distance(sq.vertices()[i], sq.vertices()[(i + 1) % 4]), std::sqrt(2.0), 1e-12);
    }
}

TEST(RandomConvexPolygon, ThousandDrawsConvexOnCircle) {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const Point2 c{rng.uniform(-3, 3), rng.uniform(-3, 3)};
        const double r = rng.uniform(0.5, 2.0);
        const int n = static_cast<int>(rng.uniform_int(3, 5));
        const Polygon p = random_convex_polygon(c, r, n, rng);
        ASSERT_EQ(p.size(), static_cast<std::size_t>(n));
        EXPECT_TRUE(convex_by_triples(p));
        for (const auto& v : p.vertices()) {
            EXPECT_NEAR(distance(v, c), r, 1e-9);
        }
        EXPECT_GT(p.area(), 0.0);
    }
}

TEST(RandomConvexPolygon, RejectsBadArguments) {
    Rng rng(1);
    EXPECT_THROW((void)random_convex_polygon({0, 0}, 1.0, 2, rng), std::invalid_argument);
    EXPECT_THROW((void)random_convex_polygon({0, 0}, 0.0, 4, rng), std::invalid_argument);
}

TEST(PointInPolygon, CentroidAndFarPoint) {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        const double r = rng.uniform(0.5, 2.0);
        const Polygon p = random_convex_polygon({0, 0}, r, static_cast<int>(rng.uniform_int(3, 5)), rng);
        EXPECT_TRUE(point_in_polygon(p.centroid(), p));
        const double th = rng.uniform(0, 2 * pi);
        EXPECT_FALSE(point_in_polygon(p.centroid() + unit_from_angle(th) * (2.5 * r), p));
    }
}

TEST(PointInPolygon, BoundaryCountsAsInside) {
    const Polygon sq({{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}});
    EXPECT_TRUE(point_in_polygon({0.5, 0.0}, sq));
    EXPECT_TRUE(point_in_polygon({0.5, 0.5}, sq));
    EXPECT_FALSE(point_in_polygon({0.5 + 1e-6, 0.0}, sq));
}

TEST(PointInPolygon, WindingNumberOracleTenThousand) {
    Rng rng(2024);
    int disagreements = 0;
    for (int i = 0; i < 10000; ++i) {
        const Polygon p = random_convex_polygon({0, 0}, rng.uniform(0.5, 2.0), static_cast<int>(rng.uniform_int(3, 5)),
                                                rng);
        const Point2 q{rng.uniform(-2.5, 2.5), rng.uniform(-2.5, 2.5)};
        disagreements += point_in_polygon(q, p) != winding_inside(q, p) ? 1 : 0;
    }
    EXPECT_EQ(disagreements, 0);
}

TEST(SegmentClear, EmptyAndThroughCentroid) {
    EXPECT_TRUE(segment_clear({0, 0}, {5, 5}, {}));
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const std::vector<Polygon> obs{random_convex_polygon({0, 0}, 1.0, 4, rng)};
        const double th = rng.uniform(0, 2 * pi);
        const Point2 c = obs[0].centroid();
        EXPECT_FALSE(segment_clear(c - unit_from_angle(th) * 3.0, c + unit_from_angle(th) * 3.0, obs));
    }
}

TEST(SegmentClear, DegenerateSegment) {
    const std::vector<Polygon> obs{Polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}})};
    EXPECT_FALSE(segment_clear({0.5, 0.5}, {0.5, 0.5}, obs));
    EXPECT_TRUE(segment_clear({2, 2}, {2, 2}, obs));
}

TEST(SegmentClear, GrazingEdgeIsClear) {
    const std::vector<Polygon> obs{Polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}})};
    // Running along an edge or touching a corner does not cross the interior.
    EXPECT_TRUE(segment_clear({-1, 0}, {2, 0}, obs));
    EXPECT_TRUE(segment_clear({-1, 1}, {1, -1}, obs));
    EXPECT_TRUE(segment_clear({0, 2}, {2, 0}, obs));
}

TEST(SegmentClear, RayMarchOracle) {
    // Samples every 1e-3 m; a disagreement is only legitimate where the
    // segment's chord through an obstacle is shorter than the sample spacing.
    Rng rng(99);
    int checked = 0;
    int hard_disagreements = 0;
    int resolution_misses = 0;
    for (int scene = 0; scene < 1000; ++scene) {
        const auto obs = random_scene(rng, static_cast<int>(rng.uniform_int(1, 6)));
        const Point2 a{rng.uniform(0, 20), rng.uniform(0, 20)};
        const Point2 b{rng.uniform(0, 20), rng.uniform(0, 20)};
        const double len = distance(a, b);
        const int n = std::max(1, static_cast<int>(std::ceil(len / 1e-3)));
        bool oracle_blocked = false;
        for (int s = 1; s < n && !oracle_blocked; ++s) {
            const Point2 p = a + (b - a) * (static_cast<double>(s) / n);
            oracle_blocked = point_in_any(p, obs);
        }
        const bool clear = segment_clear(a, b, obs);
        ++checked;
        if (clear == !oracle_blocked) {
            continue;
        }
        double chord = 0.0;
        for (const auto& o : obs) {
            chord = std::max(chord, inside_length(a, b, o));
        }
        if (!clear && chord < 2e-3) {
            ++resolution_misses;
        } else {
            ++hard_disagreements;
        }
    }
    EXPECT_EQ(checked, 1000);
    EXPECT_EQ(hard_disagreements, 0);
    EXPECT_LE(resolution_misses, 5);
}

TEST(SegmentClear, SymmetricTenThousand) {
    Rng rng(17);
    const auto obs = random_scene(rng, 10);
    for (int i = 0; i < 10000; ++i) {
        const Point2 a{rng.uniform(0, 20), rng.uniform(0, 20)};
        const Point2 b{rng.uniform(0, 20), rng.uniform(0, 20)};
        ASSERT_EQ(segment_clear(a, b, obs), segment_clear(b, a, obs));
    }
}

TEST(SegmentClear, OracleTenThousandCoarse) {
    // Broader randomized agreement with a midpoint-refined oracle on short segments.
    Rng rng(4242);
    int hard = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto obs = random_scene(rng, 2);
        const Point2 a{rng.uniform(0, 20), rng.uniform(0, 20)};
        const Point2 b = a + unit_from_angle(rng.uniform(0, 2 * pi)) * rng.uniform(0.1, 3.0);
        const int n = static_cast<int>(std::ceil(distance(a, b) / 1e-3));
        bool blocked = false;
        for (int s = 1; s < n && !blocked; ++s) {
            blocked = point_in_any(a + (b - a) * (static_cast<double>(s) / n), obs);
        }
        if (segment_clear(a, b, obs) == blocked) {
            double chord = 0.0;
            for (const auto& o : obs) {
                chord = std::max(chord, inside_length(a, b, o));
            }
            hard += chord < 2e-3 ? 0 : 1;
        }
    }
    EXPECT_EQ(hard, 0);
}

TEST(IsVisible, Examples) {
    const FovSector s{{0, 0}, 0.0, pi / 2, 5.0, 1.0};
    EXPECT_TRUE(is_visible({0, 0}, s, {}));
    EXPECT_TRUE(is_visible({3, 0.5}, s, {}));
    EXPECT_FALSE(is_visible({-3, 0}, s, {}));
    EXPECT_TRUE(is_visible({-0.5, 0}, s, {}));
    EXPECT_FALSE(is_visible({6, 0}, s, {}));
    // Blocker straddling the line of sight.
    const std::vector<Polygon> wall{Polygon({{1.5, -0.5}, {2.0, -0.5}, {2.0, 0.5}, {1.5, 0.5}})};
    EXPECT_FALSE(segment_clear(s.apex, {3, 0}, wall));
    EXPECT_FALSE(is_visible({3, 0}, s, wall));
}

TEST(FovSector, Validation) {
    EXPECT_THROW((FovSector{{0, 0}, 0, 0.0, 5, 1}.validate()), std::invalid_argument);
    EXPECT_THROW((FovSector{{0, 0}, 0, 1.0, 5, 6}.validate()), std::invalid_argument);
    EXPECT_NO_THROW((FovSector{{0, 0}, 0, 2 * pi, 5, 5}.validate()));
}

TEST(IsVisible, AddingObstacleNeverRevealsTarget) {
    Rng rng(8);
    for (int i = 0; i < 2000; ++i) {
        auto obs = random_scene(rng, 3);
        const FovSector s{{rng.uniform(0, 20), rng.uniform(0, 20)}, rng.uniform(-pi, pi), rng.uniform(0.3, 2 * pi),
                          10.0, 2.0};
        const Point2 t{rng.uniform(0, 20), rng.uniform(0, 20)};
        const bool before = is_visible(t, s, obs);
        obs.push_back(random_convex_polygon({rng.uniform(0, 20), rng.uniform(0, 20)}, 1.0, 4, rng));
        if (!before) {
            EXPECT_FALSE(is_visible(t, s, obs));
        }
    }
}

TEST(DistanceToPolygon, Examples) {
    const Polygon sq({{-0.5, -0.5}, {0.5, -0.5}, {0.5, 0.5}, {-0.5, 0.5}});
    EXPECT_DOUBLE_EQ(distance_to_polygon({0.1, 0.2}, sq), 0.0);
    EXPECT_NEAR(distance_to_polygon({2, 0}, sq), 1.5, 1e-12);
    EXPECT_NEAR(distance_to_polygon({1.5, 1.5}, sq), std::sqrt(2.0), 1e-12);
}

TEST(DistanceToPolygon, BoundedByVertexDistance) {
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        const Polygon p = random_convex_polygon({0, 0}, rng.uniform(0.5, 2.0), 5, rng);
        const Point2 q{rng.uniform(-5, 5), rng.uniform(-5, 5)};
        const double d = distance_to_polygon(q, p);
        for (const auto& v : p.vertices()) {
            EXPECT_LE(d, distance(q, v) + 1e-12);
        }
        // Dense boundary sampling gives an upper bound within the sample pitch.
        double sampled = INFINITY;
        const auto& v = p.vertices();
        for (std::size_t k = 0; k < v.size(); ++k) {
            for (int s = 0; s <= 200; ++s) {
                sampled = std::min(sampled, distance(q, v[k] + (v[(k + 1) % v.size()] - v[k]) * (s / 200.0)));
            }
        }
        if (!point_in_polygon(q, p)) {
            EXPECT_LE(d, sampled + 1e-12);
            EXPECT_GE(d, sampled - 0.02);
        }
    }
}

TEST(ConvexHull, SquareWithInteriorPoints) {
    const auto h = convex_hull({{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}, {0.2, 0.7}, {0.5, 0}});
    EXPECT_EQ(h.size(), 4u);
    EXPECT_NEAR(Polygon(h).area(), 1.0, 1e-12);
}
