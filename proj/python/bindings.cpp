#include "rti/calibration.hpp"
#include "rti/error.hpp"
#include "rti/harness.hpp"
#include "rti/io.hpp"
#include "rti/scenario.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>

namespace py = pybind11;
using namespace rti;

namespace {

using XY = std::pair<double, double>;

Point2D pt(const XY& p) { return {p.first, p.second}; }
XY xy(Point2D p) { return {p.x, p.y}; }

/// RSS entries as a float vector, NaN for a lost packet.
Eigen::VectorXd rssi_array(const MeasurementFrame& f) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(f.rssi.size()));
    for (std::size_t e = 0; e < f.rssi.size(); ++e) {
        v(static_cast<Eigen::Index>(e)) = f.rssi[e].value_or(std::numeric_limits<double>::quiet_NaN());
    }
    return v;
}

std::optional<PersonModel> person_at(const std::optional<XY>& where, const Scenario* s) {
    if (!where) {
        return std::nullopt;
    }
    PersonModel p = s != nullptr ? s->person : PersonModel{};
    p.position = pt(*where);
    return p;
}

py::dict report_dict(const ExperimentReport& r) {
    py::dict d;
    d["scenario"] = r.scenario;
    d["variant"] = std::string(to_string(r.variant));
    d["node_ids"] = r.node_ids;
    d["positions"] = r.positions;
    d["rmse"] = r.rmse;
    d["anti_fade_fraction"] = r.anti_fade_fraction;
    d["frames_hash"] = r.frames_hash;
    d["flagged"] = r.flagged;
    py::list points;
    for (const auto& p : r.points) {
        py::dict q;
        q["truth"] = xy(p.truth);
        q["estimate"] = xy(p.estimate);
        q["error"] = p.error;
        q["degenerate_frames"] = p.degenerate_frames;
        points.append(q);
    }
    d["points"] = points;
    if (r.calibration) {
        d["calibration_iterations"] = r.calibration->iterations;
        d["calibration_converged"] = r.calibration->converged;
    }
    py::list images;
    for (const auto& img : r.images) {
        images.append(py::make_tuple(img.point, img.cycle, img.values));
    }
    d["images"] = images;
    return d;
}

py::dict calibration_dict(const CalibrationState& s) {
    py::dict d;
    d["positions"] = s.positions;
    std::vector<double> history;
    for (const auto& h : s.history) {
        history.push_back(h.mean_rss);
    }
    d["history"] = history;
    std::vector<std::tuple<int, int, int>> moves;
    for (const auto& m : s.accepted_moves) {
        moves.emplace_back(m.node_id, m.old_position, m.new_position);
    }
    d["accepted_moves"] = moves;
    d["iterations"] = s.iterations;
    d["converged"] = s.converged;
    d["cycles"] = s.cycles;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Radio tomographic imaging with rotating sensors: simulation, calibration, reconstruction.";

    // translators registered later are tried first, so the base class goes first
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
    py::register_exception<SingularSystem>(m, "SingularSystem", PyExc_ArithmeticError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    // geometry
    m.def("ellipse_contains",
          [](XY v, XY tx, XY rx, double lambda) { return ellipse_contains(pt(v), LinkGeometry(pt(tx), pt(rx)), lambda); },
          py::arg("voxel"), py::arg("tx"), py::arg("rx"), py::arg("lam"));
    m.def("ellipse_area", &ellipse_area, py::arg("link_length"), py::arg("lam"));

    // reconstruction primitives
    m.def(
        "fit_path_loss",
        [](const std::vector<double>& distance, const std::vector<std::size_t>& channel_index,
           const std::vector<double>& rss, std::size_t channel_count) {
            if (distance.size() != channel_index.size() || distance.size() != rss.size()) {
                throw InvalidArgument("distance, channel_index and rss must have equal length");
            }
            std::vector<PathLossSample> s;
            for (std::size_t i = 0; i < distance.size(); ++i) {
                s.push_back({distance[i], channel_index[i], rss[i]});
            }
            const auto fit = fit_path_loss(s, channel_count);
            return py::make_tuple(fit.eta, fit.intercepts);
        },
        py::arg("distance"), py::arg("channel_index"), py::arg("rss"), py::arg("channel_count") = 1,
        "Least-squares eta and per-channel intercepts of P = b_c - 10 eta log10 d.");
    m.def(
        "lambda_widths",
        [](double fade, double min, double slope, double max) {
            const auto w = lambda_widths(fade, LambdaConfig{min, slope, max});
            return py::make_tuple(w.plus, w.minus);
        },
        py::arg("fade_level"), py::arg("min") = 0.05, py::arg("slope") = 0.03, py::arg("max") = 1.0);
    m.def(
        "excess_probability",
        [](double delta, double dead_band, double saturation) {
            const auto p = excess_probability(delta, ProbabilityConfig{dead_band, saturation});
            return py::make_tuple(p.plus, p.minus);
        },
        py::arg("delta"), py::arg("dead_band") = 1.0, py::arg("saturation") = 10.0);
    m.def(
        "covariance_matrix",
        [](XY origin, double voxel_size, std::size_t nx, std::size_t ny, double sigma_x2, double delta_c) {
            return covariance_matrix(VoxelGrid(pt(origin), voxel_size, nx, ny), RegularizationParams{1.0, sigma_x2, delta_c});
        },
        py::arg("origin"), py::arg("voxel_size"), py::arg("nx"), py::arg("ny"), py::arg("sigma_x2") = 0.5,
        py::arg("delta_c") = 0.5);
    m.def("build_projection",
          py::overload_cast<const Eigen::MatrixXd&, const Eigen::MatrixXd&, double>(&build_projection),
          py::arg("weights"), py::arg("covariance"), py::arg("sigma_n2"));
    m.def("multinomial_bias_test",
          [](std::size_t trials, std::size_t categories, std::size_t threshold, std::size_t samples,
             std::uint64_t seed) {
              const std::vector<std::size_t> none;
              return multinomial_bias_test(none, trials, categories, threshold, samples, seed).probability;
          },
          py::arg("trials") = 38, py::arg("categories") = 8, py::arg("threshold") = 9,
          py::arg("samples") = 1'000'000, py::arg("seed") = 1);

    // scenarios
    py::class_<Scenario>(m, "Scenario")
        .def_static("lab", &lab_scenario, py::arg("seed") = 1, "Built-in 6 m x 9 m, 14 servo-node scene.")
        .def_static("from_json", [](const std::string& text, std::optional<std::uint64_t> seed) {
            return scenario_from_json(text, seed);
        }, py::arg("text"), py::arg("seed") = std::nullopt)
        .def_static("load", [](const std::string& path, std::optional<std::uint64_t> seed) {
            return load_scenario(path, seed);
        }, py::arg("path"), py::arg("seed") = std::nullopt)
        .def("to_json", &scenario_to_json)
        .def_readwrite("name", &Scenario::name)
        .def_readwrite("seed", &Scenario::seed)
        .def_readwrite("dwell_cycles", &Scenario::dwell_cycles)
        .def_readwrite("training_cycles", &Scenario::training_cycles)
        .def_readwrite("standard_subsets", &Scenario::standard_subsets)
        .def_property("ground_truth",
                      [](const Scenario& s) {
                          std::vector<XY> v;
                          for (auto p : s.ground_truth) {
                              v.push_back(xy(p));
                          }
                          return v;
                      },
                      [](Scenario& s, const std::vector<XY>& v) {
                          s.ground_truth.clear();
                          for (const auto& p : v) {
                              s.ground_truth.push_back(pt(p));
                          }
                      })
        .def_property("channels", [](const Scenario& s) { return s.channels.channels(); },
                      [](Scenario& s, std::vector<int> c) { s.channels = ChannelSet(std::move(c)); })
        .def_property_readonly("node_ids", [](const Scenario& s) {
            std::vector<int> ids;
            for (const auto& site : s.servo_sites) {
                ids.push_back(site.id);
            }
            return ids;
        })
        .def_property_readonly("grid_shape", [](const Scenario& s) {
            const auto g = s.grid();
            return py::make_tuple(g.nx(), g.ny());
        })
        .def("validate", &Scenario::validate);

    // measurement
    py::class_<MeasurementFrame>(m, "Frame")
        .def_readonly("cycle", &MeasurementFrame::cycle)
        .def_readonly("positions", &MeasurementFrame::positions)
        .def_property_readonly("node_ids", [](const MeasurementFrame& f) { return f.layout.node_ids(); })
        .def_property_readonly("channels", [](const MeasurementFrame& f) { return f.layout.channels(); })
        .def_property_readonly("rssi", &rssi_array, "dBm per directed link x channel entry, NaN when lost.")
        .def("sample", &MeasurementFrame::sample, py::arg("tx_id"), py::arg("rx_id"), py::arg("channel"));

    py::class_<TdmaNetwork>(m, "Network")
        .def(py::init([](const Scenario& s, std::optional<std::vector<int>> positions, std::optional<std::uint64_t> seed) {
                 auto nodes = positions ? s.servo_nodes(*positions) : s.servo_nodes_at_default();
                 return TdmaNetwork(std::move(nodes), s.environment, s.channels, seed.value_or(servo_stream_seed(s)));
             }),
             py::arg("scenario"), py::arg("positions") = std::nullopt, py::arg("seed") = std::nullopt)
        .def("run_cycle",
             [](TdmaNetwork& n, std::optional<XY> person) { return n.run_cycle(person_at(person, nullptr)); },
             py::arg("person") = std::nullopt)
        .def("run_cycles",
             [](TdmaNetwork& n, std::size_t count, std::optional<XY> person) {
                 return n.run_cycles(count, person_at(person, nullptr));
             },
             py::arg("count"), py::arg("person") = std::nullopt)
        .def("rotate", &TdmaNetwork::rotate, py::arg("node_id"), py::arg("position"))
        .def_property_readonly("positions", &TdmaNetwork::positions)
        .def_property_readonly("cycles_elapsed", &TdmaNetwork::cycles_elapsed)
        .def_property_readonly("antennas", [](const TdmaNetwork& n) {
            std::vector<XY> v;
            for (const auto& node : n.nodes()) {
                v.push_back(xy(node.antenna()));
            }
            return v;
        })
        .def("calibrate",
             [](TdmaNetwork& n, std::optional<std::size_t> samples, std::optional<std::size_t> max_iterations) {
                 CalibrationConfig c;
                 if (samples) {
                     c.samples_per_evaluation = *samples;
                 }
                 if (max_iterations) {
                     c.max_iterations = *max_iterations;
                 }
                 return calibration_dict(network_calibrate(n, c));
             },
             py::arg("samples_per_evaluation") = std::nullopt, py::arg("max_iterations") = std::nullopt,
             "Network calibration in place; returns positions, mean-RSS history and accepted moves.");

    py::class_<RtiModel>(m, "Model")
        .def(py::init([](const Scenario& s, const std::vector<MeasurementFrame>& training,
                         const std::vector<XY>& antennas) {
                 std::vector<Point2D> a;
                 for (const auto& p : antennas) {
                     a.push_back(pt(p));
                 }
                 return build_rti_model(training, a, s.grid(), s.rti);
             }),
             py::arg("scenario"), py::arg("training"), py::arg("antennas"))
        .def_property_readonly("eta", [](const RtiModel& r) { return r.fit.eta; })
        .def_property_readonly("intercepts", [](const RtiModel& r) { return r.fit.intercepts; })
        .def_property_readonly("fade_levels", [](const RtiModel& r) {
            Eigen::VectorXd v(static_cast<Eigen::Index>(r.fade.level.size()));
            for (std::size_t e = 0; e < r.fade.level.size(); ++e) {
                v(static_cast<Eigen::Index>(e)) = r.fade.level[e].value_or(std::numeric_limits<double>::quiet_NaN());
            }
            return v;
        })
        .def_property_readonly("weights", [](const RtiModel& r) { return Eigen::MatrixXd(r.weights); })
        .def_readonly("projection", &RtiModel::projection)
        .def("to_json", &model_to_json)
        .def("measurement_vector", &RtiModel::measurement_vector)
        .def("image", [](const RtiModel& r, const MeasurementFrame& f) {
            Eigen::VectorXd v = r.image(f);
            // rows are y, columns x
            return Eigen::MatrixXd(Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
                v.data(), static_cast<Eigen::Index>(r.grid.ny()), static_cast<Eigen::Index>(r.grid.nx())));
        })
        .def("locate", [](const RtiModel& r, const MeasurementFrame& f) {
            const auto loc = r.locate(f);
            return py::make_tuple(xy(loc.position), loc.voxel, loc.degenerate);
        });

    // calibration and experiments
    m.def(
        "incremental_calibrate",
        [](const Scenario& s, const std::vector<XY>& spots, std::uint64_t seed) {
            std::vector<Point2D> p;
            for (const auto& v : spots) {
                p.push_back(pt(v));
            }
            const auto r = incremental_calibrate(p, s.environment, s.channels, s.calibration, seed, s.servo_radius);
            std::vector<XY> placements;
            for (auto q : r.placements) {
                placements.push_back(xy(q));
            }
            std::vector<int> selected;
            std::vector<std::vector<double>> rss;
            for (const auto& spot : r.spots) {
                selected.push_back(spot.selected);
                rss.emplace_back(spot.candidate_rss.begin(), spot.candidate_rss.end());
            }
            py::dict d;
            d["placements"] = placements;
            d["selected"] = selected;
            d["candidate_rss"] = rss;
            d["cycles"] = r.cycles;
            return d;
        },
        py::arg("scenario"), py::arg("spots"), py::arg("seed") = 1);
    m.def(
        "run_experiment",
        [](const Scenario& s, const std::string& variant, bool keep_images) {
            return report_dict(run_experiment(s, parse_variant(variant), EvaluationOptions{keep_images}));
        },
        py::arg("scenario"), py::arg("variant") = "servo-default", py::arg("keep_images") = false,
        "One test of a variant: standard | servo-random | servo-default | servo-calibrated.");
    m.def(
        "obstruction_sign_rates",
        [](const Scenario& s, std::size_t cycles) {
            const auto r = obstruction_sign_rates(s, cycles);
            py::dict d;
            d["anti_negative"] = r.anti_negative_rate();
            d["anti_positive"] = r.anti_positive_rate();
            d["deep_negative"] = r.deep_negative_rate();
            d["deep_positive"] = r.deep_positive_rate();
            d["anti_total"] = r.anti_total;
            d["deep_total"] = r.deep_total;
            return d;
        },
        py::arg("scenario"), py::arg("cycles_per_link") = 5);
    m.def("improvement", &improvement, py::arg("baseline_rmse"), py::arg("improved_rmse"));
}
