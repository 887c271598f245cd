#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "regen3d/dataset.hpp"
#include "regen3d/metrics.hpp"
#include "regen3d/render.hpp"

using namespace regen3d;

namespace {

// O(NM) oracle for both directions of the Chamfer / F-score pair
double chamfer_brute(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double sum_ab = 0, sum_ba = 0;
    for (const Vec3& p : a) {
        double best = 1e30;
        for (const Vec3& q : b) best = std::min(best, double(norm2(p - q)));
        sum_ab += std::sqrt(best);
    }
    for (const Vec3& q : b) {
        double best = 1e30;
        for (const Vec3& p : a) best = std::min(best, double(norm2(p - q)));
        sum_ba += std::sqrt(best);
    }
    return 0.5 * (sum_ab / double(a.size()) + sum_ba / double(b.size()));
}

double fscore_brute(const std::vector<Vec3>& a, const std::vector<Vec3>& b, double tau) {
    size_t ha = 0, hb = 0;
    for (const Vec3& p : a) {
        double best = 1e30;
        for (const Vec3& q : b) best = std::min(best, double(norm2(p - q)));
        ha += best <= tau * tau ? 1 : 0;
    }
    for (const Vec3& q : b) {
        double best = 1e30;
        for (const Vec3& p : a) best = std::min(best, double(norm2(p - q)));
        hb += best <= tau * tau ? 1 : 0;
    }
    const double precision = double(ha) / double(a.size());
    const double recall = double(hb) / double(b.size());
    if (precision + recall <= 0) return 0;
    return 2.0 * precision * recall / (precision + recall);
}

std::vector<Vec3> random_cloud(int n, Rng& rng) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
    return pts;
}

}  // namespace

TEST_CASE("chamfer: identity, two points, symmetry, brute-force equality") {
    Rng rng(3);
    const std::vector<Vec3> a = random_cloud(50, rng);
    CHECK(chamfer_distance(a, a) == doctest::Approx(0.0));
    CHECK(chamfer_distance({{0, 0, 0}}, {{1, 0, 0}}) == doctest::Approx(1.0));
    for (uint64_t trial = 0; trial < 30; ++trial) {
        Rng trng(100 + trial);
        const std::vector<Vec3> x = random_cloud(30 + int(trng.uniform_index(50)), trng);
        const std::vector<Vec3> y = random_cloud(30 + int(trng.uniform_index(50)), trng);
        const double fast = chamfer_distance(x, y);
        CHECK(std::fabs(fast - chamfer_brute(x, y)) < 1e-9);
        CHECK(std::fabs(fast - chamfer_distance(y, x)) < 1e-12);
        CHECK(fast >= 0.0);
    }
    CHECK_THROWS(chamfer_distance({}, a));
}

TEST_CASE("fscore: identity, separated, half-overlap formula, brute-force, monotone in tau") {
    Rng rng(7);
    const std::vector<Vec3> a = random_cloud(40, rng);
    CHECK(fscore(a, a, 0.01) == doctest::Approx(1.0));

    std::vector<Vec3> far;
    for (const Vec3& p : a) far.push_back(p + Vec3{10.f * 0.01f * 20, 0, 0});
    CHECK(fscore(a, far, 0.01) == doctest::Approx(0.0));

    // B subset of A, half of A coincident with B: P=0.5, R=1 -> F=2/3
    std::vector<Vec3> b_half;
    std::vector<Vec3> a_full;
    for (int i = 0; i < 20; ++i) {
        const Vec3 p{float(i), 0, 0};
        a_full.push_back(p);
        a_full.push_back(p + Vec3{0.5f, 0.2f, 0});  // farther than tau from B
        b_half.push_back(p);
    }
    CHECK(fscore(a_full, b_half, 0.01) == doctest::Approx(2.0 / 3.0));

    for (uint64_t trial = 0; trial < 20; ++trial) {
        Rng trng(500 + trial);
        const std::vector<Vec3> x = random_cloud(60, trng);
        const std::vector<Vec3> y = random_cloud(60, trng);
        CHECK(fscore(x, y, 0.3) == doctest::Approx(fscore_brute(x, y, 0.3)).epsilon(1e-12));
        // monotone in tau
        CHECK(fscore(x, y, 0.1) <= fscore(x, y, 0.2) + 1e-12);
        CHECK(fscore(x, y, 0.2) <= fscore(x, y, 0.4) + 1e-12);
    }
}

TEST_CASE("voxel_iou: identical, disjoint, concentric ratio, convergence") {
    ShapeSpec s1;
    s1.kind = ShapeSpec::Kind::Sphere;
    s1.a = 0.5f;
    CHECK(voxel_iou(occupancy_from_shape(s1), occupancy_from_shape(s1), 64) == doctest::Approx(1.0));

    ShapeSpec left = s1, right = s1;
    left.a = right.a = 0.4f;
    left.translation = {-0.5f, 0, 0};
    right.translation = {0.5f, 0, 0};
    CHECK(voxel_iou(occupancy_from_shape(left), occupancy_from_shape(right), 64) == doctest::Approx(0.0));

    // concentric spheres r=0.5 inside r=1.0: IoU = volume ratio = 0.125
    ShapeSpec outer;
    outer.kind = ShapeSpec::Kind::Sphere;
    outer.a = 1.0f;
    CHECK(voxel_iou(occupancy_from_shape(s1), occupancy_from_shape(outer), 128) ==
          doctest::Approx(0.125).epsilon(0.08));

    // convergence on a random composite
    const ShapeSpec shape = sample_primitive_shape(5);
    const ShapeSpec other = sample_primitive_shape(6);
    const double i64 = voxel_iou(occupancy_from_shape(shape), occupancy_from_shape(other), 64);
    const double i128 = voxel_iou(occupancy_from_shape(shape), occupancy_from_shape(other), 128);
    CHECK(std::fabs(i64 - i128) < 0.02);
}

TEST_CASE("normal_psnr: identical capped, uniform offset formula, absence") {
    ShapeSpec sphere;
    sphere.kind = ShapeSpec::Kind::Sphere;
    sphere.a = 0.6f;
    CameraSpec cam;
    cam.resolution = 64;
    const RenderResult r = render_ortho(sphere, cam);
    auto psnr_same = normal_psnr(r.normal_map, r.normal_map);
    REQUIRE(psnr_same.has_value());
    CHECK(*psnr_same == doctest::Approx(99.0));

    // uniform offset of 16/255 on a flat foreground: PSNR = 20 log10(255/16)
    Image flat(32, 32, 3);
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x)
            for (int c = 0; c < 3; ++c) flat.at(x, y, c) = 0.5f;
    Image shifted = flat;
    for (int y = 8; y < 24; ++y)
        for (int x = 8; x < 24; ++x)
            for (int c = 0; c < 3; ++c) shifted.at(x, y, c) = 0.5f + 16.0f / 255.0f;
    auto psnr_shift = normal_psnr(flat, shifted);
    REQUIRE(psnr_shift.has_value());
    CHECK(*psnr_shift == doctest::Approx(20.0 * std::log10(255.0 / 16.0)).epsilon(0.001));

    // no overlapping foreground -> absent
    Image empty(64, 64, 3);
    CHECK(!normal_psnr(r.normal_map, empty).has_value());

    // degraded render scores below identical
    const Image blurred = gaussian_blur(r.normal_map, 2.0f);
    auto psnr_blur = normal_psnr(r.normal_map, blurred);
    REQUIRE(psnr_blur.has_value());
    CHECK(*psnr_blur < *psnr_same);
    CHECK(*psnr_blur > 0.0);
}

TEST_CASE("metric report: aggregates are means, JSON shape") {
    MetricReport report;
    for (int i = 0; i < 3; ++i) {
        MetricSample s;
        s.id = "s" + std::to_string(i);
        s.cd = 0.1 * (i + 1);
        s.fscore = 0.2 * (i + 1);
        report.samples.push_back(s);
    }
    CHECK(*report.aggregate(&MetricSample::cd) == doctest::Approx(0.2));
    CHECK(*report.aggregate(&MetricSample::fscore) == doctest::Approx(0.4));
    CHECK(!report.aggregate(&MetricSample::psnr).has_value());
    const nlohmann::json j = report.to_json();
    CHECK(j["samples"].size() == 3);
    CHECK(j["aggregate"]["cd"].get<double>() == doctest::Approx(0.2));
    CHECK(j["config"]["tau"].get<double>() == doctest::Approx(0.01));
}
