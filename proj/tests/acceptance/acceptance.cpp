// Runs the eight acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria. Optional arguments select criteria by number.
#include "../oracles.hpp"
#include "rti/calibration.hpp"
#include "rti/error.hpp"
#include "rti/harness.hpp"
#include "rti/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#ifndef RTISIM_PATH
#error "RTISIM_PATH must point at the rtisim executable"
#endif

using namespace rti;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome multinomial() {
    const auto t0 = Clock::now();
    const std::vector<std::size_t> none;
    const auto r = multinomial_bias_test(none, 38, 8, 9, 1'000'000, 2024);
    const double t = seconds_since(t0);
    const double exact = oracle::multinomial_max_at_least(38, 8, 9);
    const bool pass = std::abs(r.probability - 0.869) <= 0.010 && t < 10.0;
    return {pass, fmt("P(max>=9 | 38 draws, 8 stops) = %.4f (exact %.5f), target 0.869 +/- 0.010, %.1f s",
                      r.probability, exact, t)};
}

Outcome solver_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> side(4, 20);
    std::uniform_int_distribution<Eigen::Index> rows_d(10, 200);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    const int instances = 50;
    for (int k = 0; k < instances; ++k) {
        const std::size_t nx = side(rng);
        const std::size_t ny = std::min<std::size_t>(side(rng), 400 / nx);
        const VoxelGrid g({0, 0}, 0.25, nx, ny);
        const Eigen::Index rows = rows_d(rng);
        const Eigen::Index cols = static_cast<Eigen::Index>(g.size());
        Eigen::MatrixXd W = Eigen::MatrixXd::Zero(rows, cols);
        for (Eigen::Index i = 0; i < W.size(); ++i) {
            if (u(rng) < 0.1) {
                W.data()[i] = u(rng);
            }
        }
        RegularizationParams p;
        p.sigma_n2 = 0.1 + 30.0 * u(rng);
        const Eigen::MatrixXd C = covariance_matrix(g, p);
        const Eigen::SparseMatrix<double> Ws = W.sparseView();
        const Eigen::MatrixXd P = build_projection(Ws, C, p.sigma_n2);
        const Eigen::MatrixXd Q = oracle::projection_push_through(W, C, p.sigma_n2);
        worst = std::max(worst, (P - Q).norm() / Q.norm());
    }
    const double t = seconds_since(t0);
    return {worst <= 1e-9 && t < 60.0,
            fmt("%d instances up to 200 x 400, worst relative residual %.2e (<= 1e-9), %.1f s", instances, worst, t)};
}

Outcome path_loss() {
    double worst_clean = 0.0;
    const std::vector<int> ids{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
    const LinkLayout layout(ids, {11, 16, 21, 26});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> coord(0.0, 8.0);
    std::vector<Point2D> ant;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ant.push_back({coord(rng), coord(rng)});
    }
    const auto d = link_distances(layout, ant);
    const std::vector<double> b0{-38.0, -38.7, -39.1, -40.2};
    for (double eta : {1.8, 2.3, 3.0}) {
        BaselineTable b{layout, {}, {}};
        for (std::size_t e = 0; e < layout.entries(); ++e) {
            b.mean.emplace_back(b0[e % 4] - 10.0 * eta * std::log10(d[e / 4]));
            b.count.push_back(1);
        }
        worst_clean = std::max(worst_clean, std::abs(fit_path_loss(b, d).eta - eta));
    }
    double noisy = 0.0;
    std::uniform_real_distribution<double> len(0.5, 9.0);
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 r(static_cast<std::uint64_t>(seed) + 1000);
        std::normal_distribution<double> noise(0.0, 2.0);
        std::vector<PathLossSample> s;
        for (int l = 0; l < 100; ++l) {
            const double dl = len(r);
            s.push_back({dl, 0, -40.0 - 23.0 * std::log10(dl) + noise(r)});
        }
        noisy += std::abs(fit_path_loss(s, 1).eta - 2.3);
    }
    noisy /= 20.0;
    return {worst_clean <= 1e-9 && noisy <= 0.2,
            fmt("noiseless worst |d eta| = %.1e (<= 1e-9); 2 dB noise, 100 links, mean |d eta| over 20 seeds = %.3f "
                "(<= 0.2)",
                worst_clean, noisy)};
}

Outcome calibration_monotonicity() {
    const auto t0 = Clock::now();
    int monotone = 0;
    int converged = 0;
    int restored = 0;
    std::size_t moves = 0;
    std::size_t max_iter = 0;
    const int runs = 20;
    for (int seed = 1; seed <= runs; ++seed) {
        const Scenario s = lab_scenario(static_cast<std::uint64_t>(seed));
        TdmaNetwork net(s.servo_nodes_at_default(), s.environment, s.channels, servo_stream_seed(s));
        const auto st = network_calibrate(net, s.calibration);
        bool up = true;
        for (std::size_t i = 1; i < st.history.size(); ++i) {
            up = up && st.history[i].mean_rss > st.history[i - 1].mean_rss;
        }
        monotone += up ? 1 : 0;
        converged += st.converged ? 1 : 0;
        moves += st.accepted_moves.size();
        max_iter = std::max(max_iter, st.iterations);
        // rejected sensors must be exactly where they were: replaying accepted moves
        // from all-ones reproduces every final stop and antenna coordinate
        std::map<int, int> replay;
        for (const auto& n : s.servo_nodes_at_default()) {
            replay[n.id] = 1;
        }
        bool ok = true;
        for (const auto& m : st.accepted_moves) {
            ok = ok && replay[m.node_id] == m.old_position;
            replay[m.node_id] = m.new_position;
        }
        for (const auto& n : net.nodes()) {
            ok = ok && replay[n.id] == n.position;
            const Point2D expected = antenna_position(n, replay[n.id]);
            ok = ok && n.antenna().x == expected.x && n.antenna().y == expected.y;
        }
        restored += ok ? 1 : 0;
    }
    const double t = seconds_since(t0);
    return {monotone == runs && converged == runs && restored == runs,
            fmt("%d scenes: strictly increasing %d, converged %d (max %zu sweeps), exact restore %d, %zu accepted "
                "moves, %.1f s",
                runs, monotone, converged, max_iter, restored, moves, t)};
}

Outcome headline() {
    const auto t0 = Clock::now();
    const int seeds = 20;
    double std_sum = 0.0;
    double rnd_sum = 0.0;
    double def_sum = 0.0;
    double cal_sum = 0.0;
    for (int seed = 1; seed <= seeds; ++seed) {
        const Scenario s = lab_scenario(static_cast<std::uint64_t>(seed));
        const auto reports = standard_reports(s, record_standard(s), s.standard_subsets);
        double m = 0.0;
        for (const auto& r : reports) {
            m += r.rmse;
        }
        std_sum += m / static_cast<double>(reports.size());
        rnd_sum += run_experiment(s, Variant::ServoRandom).rmse;
        def_sum += run_experiment(s, Variant::ServoDefault).rmse;
        cal_sum += run_experiment(s, Variant::ServoCalibrated).rmse;
    }
    const double n = seeds;
    const double stdm = std_sum / n;
    const double rnd = rnd_sum / n;
    const double def = def_sum / n;
    const double cal = cal_sum / n;
    const double gain = improvement(def, cal);
    const double gap = std::abs(rnd - stdm) / stdm;
    const double t = seconds_since(t0);
    return {cal <= def && gain >= 0.10 && gap <= 0.15 && t < 600.0,
            fmt("%d scenes, mean RMSE m: standard %.3f, random %.3f, default %.3f, calibrated %.3f; improvement "
                "%.1f%% (>= 10%%); |random-standard|/standard %.1f%% (<= 15%%); %.0f s",
                seeds, stdm, rnd, def, cal, 100 * gain, 100 * gap, t)};
}

Outcome fade_phenomenology() {
    ObstructionSignRates total;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = obstruction_sign_rates(lab_scenario(seed), 5);
        total.anti_total += r.anti_total;
        total.anti_negative += r.anti_negative;
        total.anti_positive += r.anti_positive;
        total.deep_total += r.deep_total;
        total.deep_negative += r.deep_negative;
        total.deep_positive += r.deep_positive;
    }
    const bool pass = total.anti_negative_rate() > total.deep_negative_rate() &&
                      total.deep_positive_rate() > total.anti_positive_rate();
    return {pass, fmt("on-line obstruction, 5 scenes: dr<0 anti %.3f vs deep %.3f; dr>0 deep %.3f vs anti %.3f "
                      "(%zu anti, %zu deep entries)",
                      total.anti_negative_rate(), total.deep_negative_rate(), total.deep_positive_rate(),
                      total.anti_positive_rate(), total.anti_total, total.deep_total)};
}

Outcome frame_count() {
    const Scenario s = lab_scenario(1);
    TdmaNetwork net(s.servo_nodes_at_default(), s.environment, s.channels, 1);
    const auto f = net.run_cycle();
    const auto present = std::count_if(f.rssi.begin(), f.rssi.end(), [](const auto& v) { return v.has_value(); });
    return {f.rssi.size() == 728 && present == 728 && f.layout.entries() == 728,
            fmt("14 nodes x 4 channels: %zu directed samples (728)", f.rssi.size())};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) {
            std::ifstream in(e.path(), std::ios::binary);
            std::ostringstream ss;
            ss << in.rdbuf();
            files[fs::relative(e.path(), dir).string()] = ss.str();
        }
    }
    return files;
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("rti_accept_" + std::to_string(std::random_device{}()));
    const std::string exe = RTISIM_PATH;
    const std::vector<std::string> commands{
        "--seed 3 --out {o}/sim simulate --variant servo-default",
        "--seed 3 --out {o}/train train --in {o}/sim",
        "--seed 3 --out {o}/loc localize --in {o}/sim --images",
        "--seed 3 --out {o}/net calibrate --mode network",
        "--seed 3 --out {o}/inc calibrate --mode incremental",
        "--seed 3 --out {o}/eval evaluate --variant servo-random --images",
        "--out {o}/an analyze-positions --samples 20000",
    };
    bool ran = true;
    for (const char* run : {"a", "b"}) {
        const fs::path o = root / run;
        fs::create_directories(o);
        for (auto cmd : commands) {
            for (std::size_t p; (p = cmd.find("{o}")) != std::string::npos;) {
                cmd.replace(p, 3, o.string());
            }
            const std::string line = "\"" + exe + "\" " + cmd + " > \"" + (o / "stdout.txt").string() + "\" 2>&1";
            ran = ran && std::system(line.c_str()) == 0;
        }
    }
    const auto a = snapshot(root / "a");
    const auto b = snapshot(root / "b");
    std::size_t csv = 0;
    for (const auto& [name, body] : a) {
        csv += fs::path(name).extension() == ".csv" ? 1 : 0;
    }
    const bool same = a == b;
    fs::remove_all(root);
    return {ran && same && csv > 0,
            fmt("7 CLI commands run twice: %zu files (%zu CSV), byte-identical: %s", a.size(), csv,
                same ? "yes" : "no")};
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        selected.insert(std::atoi(argv[i]));
    }
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 multinomial reproduction", multinomial},
        {"2 solver oracle", solver_oracle},
        {"3 path-loss recovery", path_loss},
        {"4 calibration monotonicity and termination", calibration_monotonicity},
        {"5 calibrated vs default, random vs standard", headline},
        {"6 fade-level phenomenology", fade_phenomenology},
        {"7 frame-count identity", frame_count},
        {"8 CLI determinism", determinism},
    };
    int failed = 0;
    int ran = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto& [name, run] = criteria[k];
        if (!selected.empty() && selected.count(static_cast<int>(k) + 1) == 0) {
            continue;
        }
        ++ran;
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (ran - failed) << "/" << ran << " criteria passed" << std::endl;
    return failed;
}
