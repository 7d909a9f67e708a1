#include "oracles.hpp"
#include "rti/error.hpp"
#include "rti/reconstruction.hpp"
#include "rti/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rti;
using doctest::Approx;

namespace {

MeasurementFrame frame_of(const LinkLayout& layout, std::vector<std::optional<double>> rssi, std::int64_t cycle = 0) {
    MeasurementFrame f;
    f.cycle = cycle;
    f.layout = layout;
    f.positions.assign(layout.nodes(), 1);
    f.rssi = std::move(rssi);
    return f;
}

/// Nodes on a ring so that link lengths vary.
std::vector<Point2D> ring(std::size_t n, double radius) {
    std::vector<Point2D> p;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n) + 0.3 * i * i;
        p.push_back({radius * std::cos(a) * (1.0 + 0.1 * i), radius * std::sin(a)});
    }
    return p;
}

BaselineTable synthetic_baseline(const LinkLayout& layout, const std::vector<double>& d, double eta,
                                 const std::vector<double>& intercepts, double noise, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, noise);
    BaselineTable b{layout, {}, {}};
    const std::size_t nc = layout.channels().size();
    for (std::size_t e = 0; e < layout.entries(); ++e) {
        const double v = intercepts[e % nc] - 10.0 * eta * std::log10(d[e / nc]) + (noise > 0 ? n(rng) : 0.0);
        b.mean.emplace_back(v);
        b.count.push_back(1);
    }
    return b;
}

} // namespace

TEST_CASE("train_baseline") {
    const LinkLayout layout({1, 2}, {11});
    SUBCASE("constant and averaged samples") {
        std::vector<MeasurementFrame> frames{frame_of(layout, {-60.0, -60.0}), frame_of(layout, {-62.0, -60.0})};
        const auto b = train_baseline(frames);
        CHECK(*b.mean[0] == -61.0);
        CHECK(*b.mean[1] == -60.0);
        CHECK(b.count[0] == 2);
    }
    SUBCASE("an entry with no samples is absent") {
        std::vector<MeasurementFrame> frames{frame_of(layout, {std::nullopt, -60.0}),
                                             frame_of(layout, {std::nullopt, -58.0})};
        const auto b = train_baseline(frames);
        CHECK_FALSE(b.mean[0].has_value());
        CHECK(b.present() == 1);
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(train_baseline(std::vector<MeasurementFrame>{}), InvalidArgument);
        auto moved = frame_of(layout, {-60.0, -60.0});
        moved.positions[0] = 2;
        std::vector<MeasurementFrame> frames{frame_of(layout, {-60.0, -60.0}), moved};
        CHECK_THROWS_AS(train_baseline(frames), InvalidArgument);
    }
}

TEST_CASE("fit_path_loss") {
    SUBCASE("two links, one channel: -23 dB per decade") {
        std::vector<PathLossSample> s{{1.0, 0, -40.0}, {10.0, 0, -63.0}};
        const auto fit = fit_path_loss(s, 1);
        CHECK(fit.eta == Approx(2.3).epsilon(1e-12));
        CHECK(fit.intercepts[0] == Approx(-40.0));
    }
    SUBCASE("noiseless recovery with per-channel intercepts") {
        const auto antennas = ring(9, 3.0);
        const LinkLayout layout({1, 2, 3, 4, 5, 6, 7, 8, 9}, {11, 16, 21, 26});
        const auto d = link_distances(layout, antennas);
        for (double eta : {1.8, 2.3, 3.0}) {
            const auto b = synthetic_baseline(layout, d, eta, {-35, -36.5, -37, -38.2}, 0.0, 1);
            const auto fit = fit_path_loss(b, d);
            CHECK(std::abs(fit.eta - eta) <= 1e-9);
            CHECK(fit.intercepts[3] == Approx(-38.2));
        }
    }
    SUBCASE("noisy recovery over 100 links, seed-averaged") {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> dist(0.5, 8.0);
        double total = 0.0;
        for (int seed = 0; seed < 20; ++seed) {
            std::vector<PathLossSample> s;
            std::normal_distribution<double> n(0.0, 2.0);
            for (int i = 0; i < 100; ++i) {
                const double d = dist(rng);
                s.push_back({d, 0, -40.0 - 23.0 * std::log10(d) + n(rng)});
            }
            total += std::abs(fit_path_loss(s, 1).eta - 2.3);
        }
        CHECK(total / 20 <= 0.2);
    }
    SUBCASE("singular fits") {
        std::vector<PathLossSample> same{{2.0, 0, -40.0}, {2.0, 0, -45.0}};
        CHECK_THROWS_AS(fit_path_loss(same, 1), SingularSystem);
        std::vector<PathLossSample> one_channel{{1.0, 0, -40.0}, {3.0, 0, -45.0}};
        CHECK_THROWS_AS(fit_path_loss(one_channel, 2), SingularSystem);
    }
}

TEST_CASE("fade_level") {
    const LinkLayout layout({1, 2}, {11});
    PathLossFit fit;
    fit.eta = 2.0;
    fit.intercepts = {-62.0}; // P(1 m) = -62
    BaselineTable b{layout, {-55.0, -70.0}, {1, 1}};
    const std::vector<double> d{1.0, 1.0};
    const auto f = fade_level(b, fit, d);
    CHECK(*f.level[0] == 7.0);
    CHECK(f.anti_fade(0));
    CHECK(*f.level[1] == -8.0);
    CHECK_FALSE(f.anti_fade(1));
    b.mean = {-62.0, std::nullopt};
    const auto g = fade_level(b, fit, d);
    CHECK(*g.level[0] == 0.0);
    CHECK(g.anti_fade(0));
    CHECK_FALSE(g.level[1].has_value());
}

TEST_CASE("property: fade level identity is bit-exact") {
    const auto antennas = ring(7, 2.5);
    const LinkLayout layout({1, 2, 3, 4, 5, 6, 7}, {11, 26});
    const auto d = link_distances(layout, antennas);
    const auto b = synthetic_baseline(layout, d, 2.1, {-40, -41}, 3.0, 8);
    const auto fit = fit_path_loss(b, d);
    const auto f = fade_level(b, fit, d);
    for (std::size_t e = 0; e < layout.entries(); ++e) {
        CHECK(*f.level[e] == *b.mean[e] - fit.predict(d[e / 2], e % 2));
    }
}

TEST_CASE("lambda_widths") {
    const LambdaConfig cfg;
    CHECK(lambda_widths(5.0, cfg).minus == 0.05);
    CHECK(lambda_widths(-10.0, cfg).minus == Approx(0.35));
    CHECK(lambda_widths(-1000.0, cfg).minus == 1.0);
    CHECK(lambda_widths(-1e-12, cfg).minus == Approx(lambda_widths(1e-12, cfg).minus));
    CHECK(lambda_widths(-1e-12, cfg).plus == Approx(lambda_widths(0.0, cfg).plus));
    CHECK_THROWS_AS(lambda_widths(0.0, LambdaConfig{0.0, 0.03, 1.0}), InvalidArgument);
    CHECK_THROWS_AS(lambda_widths(0.0, LambdaConfig{0.05, -1.0, 1.0}), InvalidArgument);
    // monotone non-increasing in F
    double prev = 1e9;
    for (double f = -50.0; f <= 10.0; f += 0.25) {
        const auto w = lambda_widths(f, cfg);
        CHECK(w.minus <= prev);
        CHECK(w.minus > 0.0);
        CHECK(w.plus > 0.0);
        prev = w.minus;
    }
}

TEST_CASE("rss_delta") {
    const LinkLayout layout({1, 2}, {11});
    const BaselineTable b{layout, {-60.0, -60.0}, {1, 1}};
    const auto d = rss_delta(frame_of(layout, {-60.0, std::nullopt}), b);
    CHECK(*d[0] == 0.0);
    CHECK_FALSE(d[1].has_value());
    CHECK(*rss_delta(frame_of(layout, {-65.0, -60.0}), b)[0] == -5.0);
    CHECK_THROWS_AS(rss_delta(frame_of(LinkLayout({1, 3}, {11}), {-60.0, -60.0}), b), InvalidArgument);
}

TEST_CASE("excess_probability") {
    const ProbabilityConfig cfg;
    CHECK(excess_probability(0.0, cfg).plus == 0.0);
    CHECK(excess_probability(0.0, cfg).minus == 0.0);
    CHECK(excess_probability(-(cfg.dead_band + cfg.saturation) / 2, cfg).minus == Approx(0.5));
    CHECK(excess_probability(-(cfg.dead_band + cfg.saturation) / 2, cfg).plus == 0.0);
    CHECK(excess_probability(-10.0, ProbabilityConfig{0.0, 10.0}).minus == 1.0);
    CHECK(excess_probability(25.0, cfg).plus == 1.0);
    CHECK(excess_probability(1.0, cfg).plus == 0.0); // inside the dead band
    CHECK_THROWS_AS(excess_probability(0.0, ProbabilityConfig{5.0, 5.0}), InvalidArgument);
    double prev = 0.0;
    for (double m = 0.0; m < 20.0; m += 0.1) {
        const auto up = excess_probability(m, cfg);
        const auto down = excess_probability(-m, cfg);
        CHECK(up.plus >= prev);
        CHECK(up.plus == down.minus);
        CHECK((up.plus == 0.0 || up.minus == 0.0));
        prev = up.plus;
    }
}

TEST_CASE("excess_probabilities stacks p+ and p- rows") {
    const LinkLayout layout({1, 2}, {11});
    FadeLevelTable fade{layout, {1.0, std::nullopt}};
    std::vector<std::optional<double>> delta{-5.5, 4.0};
    const auto y = excess_probabilities(delta, fade, ProbabilityConfig{});
    REQUIRE(y.size() == 4);
    CHECK(y(0) == 0.0);
    CHECK(y(1) == Approx(0.5));
    CHECK(y(2) == 0.0); // no fade level: no evidence
    CHECK(y(3) == 0.0);
}

TEST_CASE("weight matrix") {
    SUBCASE("single voxel at the link midpoint") {
        const VoxelGrid g({0.5, -0.5}, 1.0, 1, 1);
        const LinkLayout layout({1, 2}, {11});
        const std::vector<Point2D> ant{{0, 0}, {2, 0}};
        EllipseWidths w{layout, {WidthPair{0.2, 0.2}, WidthPair{0.2, 0.2}}};
        const Eigen::MatrixXd W = build_weight_matrix(ant, g, w);
        CHECK(W.rows() == 4);
        for (int r = 0; r < 4; ++r) {
            CHECK(W(r, 0) == Approx(1.0 / ellipse_area(2.0, 0.2)));
        }
    }
    SUBCASE("ellipse holding no voxel center gives a zero row") {
        const VoxelGrid g({0, 0}, 1.0, 4, 4); // centers at .5, 1.5, ...
        const LinkLayout layout({1, 2}, {11});
        const std::vector<Point2D> ant{{0, 0}, {4, 0}};
        EllipseWidths w{layout, {WidthPair{0.01, 0.01}, std::nullopt}};
        const Eigen::MatrixXd W = build_weight_matrix(ant, g, w);
        CHECK(W.norm() == 0.0);
    }
    SUBCASE("row sums match a brute-force containment scan") {
        const Scenario lab = lab_scenario(1);
        const VoxelGrid g = lab.grid();
        std::vector<Point2D> ant;
        std::vector<int> ids;
        for (const auto& n : lab.servo_nodes_at_default()) {
            ant.push_back(n.antenna());
            ids.push_back(n.id);
        }
        const LinkLayout layout(ids, {11, 26});
        EllipseWidths w{layout, {}};
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(0.05, 1.0);
        for (std::size_t e = 0; e < layout.entries(); ++e) {
            w.width.emplace_back(WidthPair{u(rng), u(rng)});
        }
        const Eigen::SparseMatrix<double> W = build_weight_matrix(ant, g, w);
        CHECK(W.rows() == static_cast<Eigen::Index>(2 * 14 * 13 * 2));
        CHECK(W.cols() == static_cast<Eigen::Index>(g.size()));
        const Eigen::VectorXd sums = W * Eigen::VectorXd::Ones(W.cols());
        for (std::size_t e = 0; e < layout.entries(); ++e) {
            const std::size_t l = e / 2;
            const Point2D tx = ant[layout.tx_of(l)];
            const Point2D rx = ant[layout.rx_of(l)];
            const double lambdas[2] = {w.width[e]->plus, w.width[e]->minus};
            for (int s = 0; s < 2; ++s) {
                std::size_t count = 0;
                for (const auto& c : g.centers()) {
                    count += oracle::inside(c, tx, rx, lambdas[s]) ? 1 : 0;
                }
                const double expected = static_cast<double>(count) / ellipse_area(distance(tx, rx), lambdas[s]);
                CHECK(sums(static_cast<Eigen::Index>(2 * e + s)) == Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("covariance matrix") {
    const RegularizationParams p{1.0, 0.5, 0.5};
    const VoxelGrid g({0, 0}, 0.5, 3, 2);
    const Eigen::MatrixXd C = covariance_matrix(g, p);
    for (Eigen::Index j = 0; j < C.rows(); ++j) {
        CHECK(C(j, j) == 0.5);
        for (Eigen::Index i = 0; i < C.cols(); ++i) {
            CHECK(C(i, j) == C(j, i));
        }
    }
    // neighbours one δ_c apart
    CHECK(C(0, 1) == Approx(0.5 * std::exp(-1.0)));
    CHECK(C.llt().info() == Eigen::Success);
    CHECK_THROWS_AS(covariance_matrix(g, RegularizationParams{1.0, 0.0, 0.5}), InvalidArgument);
}

TEST_CASE("build_projection") {
    SUBCASE("scalar closed form") {
        const double sx2 = 0.5;
        const double sn2 = 1.0;
        const Eigen::MatrixXd W = Eigen::MatrixXd::Ones(1, 1);
        const Eigen::MatrixXd C = Eigen::MatrixXd::Constant(1, 1, sx2);
        CHECK(build_projection(W, C, sn2)(0, 0) == Approx(1.0 / (1.0 + sn2 / sx2)));
    }
    SUBCASE("zero weights give a zero projection") {
        const VoxelGrid g({0, 0}, 0.5, 3, 3);
        const Eigen::MatrixXd C = covariance_matrix(g, {});
        const Eigen::MatrixXd W = Eigen::MatrixXd::Zero(4, 9);
        CHECK(build_projection(W, C, 1.0).norm() == 0.0);
    }
    SUBCASE("random 10x25 against the push-through solve") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        const VoxelGrid g({0, 0}, 0.4, 5, 5);
        const RegularizationParams params;
        const Eigen::MatrixXd C = covariance_matrix(g, params);
        Eigen::MatrixXd W(10, 25);
        for (Eigen::Index i = 0; i < W.size(); ++i) {
            W.data()[i] = u(rng) < 0.4 ? u(rng) : 0.0;
        }
        const Eigen::MatrixXd P = build_projection(W, C, params.sigma_n2);
        const Eigen::MatrixXd Q = oracle::projection_push_through(W, C, params.sigma_n2);
        Eigen::VectorXd y(10);
        for (Eigen::Index i = 0; i < 10; ++i) {
            y(i) = u(rng);
        }
        CHECK(((P * y) - (Q * y)).norm() / (Q * y).norm() <= 1e-9);
        // sparse and dense overloads agree
        const Eigen::SparseMatrix<double> Ws = W.sparseView();
        CHECK((build_projection(Ws, C, params.sigma_n2) - P).norm() <= 1e-12 * P.norm());
    }
    SUBCASE("singular covariance is reported") {
        Eigen::MatrixXd C = Eigen::MatrixXd::Ones(3, 3);
        const Eigen::MatrixXd W = Eigen::MatrixXd::Identity(2, 3);
        CHECK_THROWS_AS(build_projection(W, C, 1.0), SingularSystem);
    }
}

TEST_CASE("estimate_image") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::MatrixXd P(6, 4);
    for (Eigen::Index i = 0; i < P.size(); ++i) {
        P.data()[i] = u(rng);
    }
    CHECK(estimate_image(P, Eigen::VectorXd::Zero(4)).norm() == 0.0);
    CHECK((estimate_image(P, Eigen::VectorXd::Unit(4, 2)) - P.col(2)).norm() == 0.0);
    const Eigen::VectorXd a = Eigen::VectorXd::Random(4);
    const Eigen::VectorXd b = Eigen::VectorXd::Random(4);
    CHECK((estimate_image(P, a + b) - estimate_image(P, a) - estimate_image(P, b)).norm() <= 1e-12);
    CHECK_THROWS_AS(estimate_image(P, Eigen::VectorXd::Zero(5)), InvalidArgument);
}

TEST_CASE("localize") {
    const VoxelGrid g({0, 0}, 1.0, 3, 2);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(6);
    x(4) = 1.0;
    auto loc = localize(x, g);
    CHECK(loc.voxel == 4);
    CHECK(loc.position == g.center(4));
    CHECK_FALSE(loc.degenerate);
    CHECK(localize(3.5 * x, g).voxel == 4);
    CHECK(localize((x.array() - 2.0).matrix(), g).voxel == 4);
    x(1) = 1.0;
    loc = localize(x, g);
    CHECK(loc.voxel == 1);
    CHECK(loc.degenerate);
    loc = localize(Eigen::VectorXd::Constant(6, 0.3), g);
    CHECK(loc.voxel == 0);
    CHECK(loc.degenerate);
    CHECK_THROWS_AS(localize(Eigen::VectorXd(), g), InvalidArgument);
}

TEST_CASE("model shape") {
    const Scenario lab = lab_scenario(2);
    TdmaNetwork net(lab.servo_nodes_at_default(), lab.environment, lab.channels, 1);
    const auto training = net.run_cycles(5);
    std::vector<Point2D> ant;
    for (const auto& n : net.nodes()) {
        ant.push_back(n.antenna());
    }
    const RtiModel m = build_rti_model(training, ant, lab.grid(), lab.rti);
    CHECK(m.weights.rows() == static_cast<Eigen::Index>(2 * 14 * 13 * 4));
    CHECK(m.weights.cols() == static_cast<Eigen::Index>(24 * 36));
    CHECK(m.projection.rows() == m.weights.cols());
    CHECK(m.projection.cols() == m.weights.rows());
    // an empty-room frame has no evidence beyond the dead band for most entries
    CHECK(m.measurement_vector(training.front()).size() == m.weights.rows());
}

TEST_CASE("property: simulation closure in a dense line-of-sight scene") {
    // 16 nodes around a 4 m room: every voxel is crossed by several link lines,
    // so a single frame carries enough attenuated links to locate the person
    Environment env;
    env.room = {{0, 0}, {4, 4}};
    env.noise_sigma_db = 0.3;
    std::vector<NodeState> nodes;
    int id = 1;
    for (int k = 0; k < 4; ++k) {
        const double t = 0.3 + 3.4 * (k + 0.5) / 4;
        nodes.push_back({id++, {0.3, t}, 0.1, 1});
        nodes.push_back({id++, {3.7, t}, 0.1, 1});
        nodes.push_back({id++, {t, 0.3}, 0.1, 1});
        nodes.push_back({id++, {t, 3.7}, 0.1, 1});
    }
    const VoxelGrid g = VoxelGrid::covering(env.room, 0.25);
    int good = 0;
    int trials = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TdmaNetwork net(nodes, env, ChannelSet({11, 26}), seed);
        const auto training = net.run_cycles(10);
        std::vector<Point2D> ant;
        for (const auto& n : net.nodes()) {
            ant.push_back(n.antenna());
        }
        const RtiModel m = build_rti_model(training, ant, g, scenario_rti_defaults());
        std::mt19937_64 rng(seed + 50);
        std::uniform_int_distribution<std::size_t> ix(3, g.nx() - 4);
        std::uniform_int_distribution<std::size_t> iy(3, g.ny() - 4);
        for (int t = 0; t < 20; ++t) {
            PersonModel p;
            p.position = g.center(iy(rng) * g.nx() + ix(rng));
            good += distance(m.locate(net.run_cycle(p)).position, p.position) <= 2 * g.voxel_diagonal() ? 1 : 0;
            ++trials;
        }
    }
    CHECK(good >= 9 * trials / 10);
}
