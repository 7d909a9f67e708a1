#include "rti/reconstruction.hpp"

#include "rti/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace rti {

std::size_t BaselineTable::present() const {
    return static_cast<std::size_t>(
        std::count_if(mean.begin(), mean.end(), [](const auto& m) { return m.has_value(); }));
}

BaselineTable train_baseline(std::span<const MeasurementFrame> frames) {
    if (frames.empty()) {
        throw InvalidArgument("baseline training needs at least one frame");
    }
    const auto& first = frames.front();
    std::vector<double> sum(first.layout.entries(), 0.0);
    std::vector<std::size_t> count(first.layout.entries(), 0);
    for (const auto& frame : frames) {
        if (!(frame.layout == first.layout)) {
            throw InvalidArgument("training frames disagree on the link layout");
        }
        if (frame.positions != first.positions) {
            throw InvalidArgument("training frames must be collected at fixed node positions");
        }
        for (std::size_t e = 0; e < frame.rssi.size(); ++e) {
            if (frame.rssi[e]) {
                sum[e] += *frame.rssi[e];
                ++count[e];
            }
        }
    }
    BaselineTable table{first.layout, {}, count};
    table.mean.reserve(sum.size());
    for (std::size_t e = 0; e < sum.size(); ++e) {
        if (count[e] > 0) {
            table.mean.emplace_back(sum[e] / static_cast<double>(count[e]));
        } else {
            table.mean.emplace_back(std::nullopt);
        }
    }
    return table;
}

std::vector<double> link_distances(const LinkLayout& layout, std::span<const Point2D> antennas) {
    if (antennas.size() != layout.nodes()) {
        throw InvalidArgument("antenna list does not match the link layout");
    }
    std::vector<double> d(layout.links());
    for (std::size_t l = 0; l < d.size(); ++l) {
        d[l] = link_distance(antennas[layout.tx_of(l)], antennas[layout.rx_of(l)]);
    }
    return d;
}

double PathLossFit::predict(double link_length, std::size_t channel_index) const {
    return intercepts.at(channel_index) - 10.0 * eta * std::log10(link_length);
}

PathLossFit fit_path_loss(std::span<const PathLossSample> samples, std::size_t channel_count) {
    if (channel_count == 0) {
        throw InvalidArgument("path-loss fit needs at least one channel");
    }
    std::vector<std::size_t> per_channel(channel_count, 0);
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& s : samples) {
        if (s.channel_index >= channel_count) {
            throw InvalidArgument("sample channel index out of range");
        }
        if (!(s.distance > 0.0)) {
            throw InvalidArgument("link distance must be positive");
        }
        ++per_channel[s.channel_index];
        lo = std::min(lo, s.distance);
        hi = std::max(hi, s.distance);
    }
    if (samples.empty() || !(hi > lo)) {
        throw SingularSystem("path-loss fit needs at least 2 distinct link distances");
    }
    for (std::size_t c = 0; c < channel_count; ++c) {
        if (per_channel[c] == 0) {
            throw SingularSystem("path-loss fit: channel index " + std::to_string(c) + " has no samples");
        }
    }

    // unknowns: [eta, intercept_0, ..., intercept_{C-1}]
    Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples.size()),
                                                   static_cast<Eigen::Index>(channel_count + 1));
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        design(row, 0) = -10.0 * std::log10(samples[i].distance);
        design(row, static_cast<Eigen::Index>(samples[i].channel_index + 1)) = 1.0;
        rhs(row) = samples[i].rss_dbm;
    }
    const Eigen::VectorXd theta = design.colPivHouseholderQr().solve(rhs);
    if (!theta.allFinite()) {
        throw SingularSystem("path-loss fit produced non-finite coefficients");
    }
    PathLossFit fit;
    fit.eta = theta(0);
    fit.intercepts.assign(theta.data() + 1, theta.data() + theta.size());
    return fit;
}

PathLossFit fit_path_loss(const BaselineTable& baseline, std::span<const double> distances) {
    const auto& layout = baseline.layout;
    if (distances.size() != layout.links()) {
        throw InvalidArgument("distance list does not match the link layout");
    }
    const std::size_t nc = layout.channels().size();
    std::vector<PathLossSample> samples;
    samples.reserve(baseline.mean.size());
    for (std::size_t e = 0; e < baseline.mean.size(); ++e) {
        if (baseline.mean[e]) {
            samples.push_back({distances[e / nc], e % nc, *baseline.mean[e]});
        }
    }
    PathLossFit fit = fit_path_loss(samples, nc);
    fit.residuals.reserve(baseline.mean.size());
    for (std::size_t e = 0; e < baseline.mean.size(); ++e) {
        if (baseline.mean[e]) {
            fit.residuals.emplace_back(*baseline.mean[e] - fit.predict(distances[e / nc], e % nc));
        } else {
            fit.residuals.emplace_back(std::nullopt);
        }
    }
    return fit;
}

std::optional<double> FadeLevelTable::mean() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& f : level) {
        if (f) {
            sum += *f;
            ++n;
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return sum / static_cast<double>(n);
}

FadeLevelTable fade_level(const BaselineTable& baseline, const PathLossFit& fit,
                          std::span<const double> distances) {
    const auto& layout = baseline.layout;
    if (distances.size() != layout.links()) {
        throw InvalidArgument("distance list does not match the link layout");
    }
    const std::size_t nc = layout.channels().size();
    FadeLevelTable table{layout, {}};
    table.level.reserve(baseline.mean.size());
    for (std::size_t e = 0; e < baseline.mean.size(); ++e) {
        if (baseline.mean[e]) {
            table.level.emplace_back(*baseline.mean[e] - fit.predict(distances[e / nc], e % nc));
        } else {
            table.level.emplace_back(std::nullopt);
        }
    }
    return table;
}

void LambdaConfig::validate() const {
    if (!(min > 0.0) || !(slope >= 0.0) || !(max >= min) || !std::isfinite(max)) {
        throw InvalidArgument("ellipse width config needs 0 < min <= max and slope >= 0");
    }
}

WidthPair lambda_widths(double fade_level, const LambdaConfig& config) {
    config.validate();
    const double depth = std::abs(std::min(fade_level, 0.0));
    const double w = std::min(config.max, config.min + config.slope * depth);
    return {w, w};
}

EllipseWidths lambda_widths(const FadeLevelTable& fade, const LambdaConfig& config) {
    config.validate();
    EllipseWidths out{fade.layout, {}};
    out.width.reserve(fade.level.size());
    for (const auto& f : fade.level) {
        if (f) {
            out.width.emplace_back(lambda_widths(*f, config));
        } else {
            out.width.emplace_back(std::nullopt);
        }
    }
    return out;
}

std::vector<std::optional<double>> rss_delta(const MeasurementFrame& frame,
                                             const BaselineTable& baseline) {
    if (!(frame.layout == baseline.layout)) {
        throw InvalidArgument("frame layout does not match the baseline");
    }
    std::vector<std::optional<double>> delta;
    delta.reserve(frame.rssi.size());
    for (std::size_t e = 0; e < frame.rssi.size(); ++e) {
        if (frame.rssi[e] && baseline.mean[e]) {
            delta.emplace_back(*frame.rssi[e] - *baseline.mean[e]);
        } else {
            delta.emplace_back(std::nullopt);
        }
    }
    return delta;
}

void ProbabilityConfig::validate() const {
    if (!(dead_band >= 0.0) || !(saturation > dead_band)) {
        throw InvalidArgument("probability config needs 0 <= dead_band < saturation");
    }
}

ExcessProbability excess_probability(double delta, const ProbabilityConfig& config) {
    config.validate();
    const auto ramp = [&](double magnitude) {
        return std::clamp((magnitude - config.dead_band) / (config.saturation - config.dead_band), 0.0, 1.0);
    };
    ExcessProbability p;
    if (delta > config.dead_band) {
        p.plus = ramp(delta);
    } else if (delta < -config.dead_band) {
        p.minus = ramp(-delta);
    }
    return p;
}

Eigen::VectorXd excess_probabilities(std::span<const std::optional<double>> delta,
                                     const FadeLevelTable& fade, const ProbabilityConfig& config) {
    config.validate();
    if (delta.size() != fade.level.size()) {
        throw InvalidArgument("delta table does not match the fade-level table");
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * delta.size()));
    for (std::size_t e = 0; e < delta.size(); ++e) {
        if (!delta[e] || !fade.level[e]) {
            continue;
        }
        const auto p = excess_probability(*delta[e], config);
        y(static_cast<Eigen::Index>(2 * e)) = p.plus;
        y(static_cast<Eigen::Index>(2 * e + 1)) = p.minus;
    }
    return y;
}

Eigen::SparseMatrix<double> build_weight_matrix(std::span<const Point2D> antennas,
                                                const VoxelGrid& grid, const EllipseWidths& widths) {
    const auto& layout = widths.layout;
    if (antennas.size() != layout.nodes()) {
        throw InvalidArgument("antenna list does not match the link layout");
    }
    if (widths.width.size() != layout.entries()) {
        throw InvalidArgument("ellipse widths do not cover every link-channel entry");
    }
    const std::size_t nc = layout.channels().size();
    const auto& centers = grid.centers();
    std::vector<Eigen::Triplet<double>> triplets;

    for (std::size_t e = 0; e < widths.width.size(); ++e) {
        if (!widths.width[e]) {
            continue;
        }
        const std::size_t l = e / nc;
        const LinkGeometry link(antennas[layout.tx_of(l)], antennas[layout.rx_of(l)]);
        const Point2D mid = 0.5 * (link.tx() + link.rx());
        const double lambdas[2] = {widths.width[e]->plus, widths.width[e]->minus};
        for (int sign = 0; sign < 2; ++sign) {
            const double lambda = lambdas[sign];
            const double weight = 1.0 / ellipse_area(link.length(), lambda);
            const double semi_major = (link.length() + lambda) / 2.0;
            const auto row = static_cast<int>(2 * e + static_cast<std::size_t>(sign));
            for (std::size_t j = 0; j < centers.size(); ++j) {
                if (std::abs(centers[j].x - mid.x) > semi_major || std::abs(centers[j].y - mid.y) > semi_major) {
                    continue;
                }
                if (ellipse_contains(centers[j], link, lambda)) {
                    triplets.emplace_back(row, static_cast<int>(j), weight);
                }
            }
        }
    }
    Eigen::SparseMatrix<double> w(static_cast<Eigen::Index>(2 * layout.entries()),
                                  static_cast<Eigen::Index>(grid.size()));
    w.setFromTriplets(triplets.begin(), triplets.end());
    return w;
}

void RegularizationParams::validate() const {
    if (!(sigma_n2 > 0.0) || !(sigma_x2 > 0.0) || !(delta_c > 0.0)) {
        throw InvalidArgument("regularization parameters must all be positive");
    }
}

Eigen::MatrixXd covariance_matrix(const VoxelGrid& grid, const RegularizationParams& params) {
    params.validate();
    const auto& c = grid.centers();
    const auto n = static_cast<Eigen::Index>(c.size());
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        cov(j, j) = params.sigma_x2;
        for (Eigen::Index i = j + 1; i < n; ++i) {
            const double v = params.sigma_x2 *
                             std::exp(-distance(c[static_cast<std::size_t>(j)], c[static_cast<std::size_t>(i)]) /
                                      params.delta_c);
            cov(j, i) = v;
            cov(i, j) = v;
        }
    }
    return cov;
}

namespace {

constexpr double kMinReciprocalCondition = 1e-15;

[[noreturn]] void throw_singular(const char* what, const Eigen::MatrixXd& m) {
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    std::ostringstream msg;
    msg << what << " is numerically singular (" << m.rows() << "x" << m.cols()
        << ", reciprocal condition estimate " << ldlt.rcond() << ")";
    throw SingularSystem(msg.str());
}

Eigen::MatrixXd solve_projection(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& weights_t,
                                 const Eigen::MatrixXd& covariance, double sigma_n2) {
    if (!(sigma_n2 > 0.0)) {
        throw InvalidArgument("regularization weight must be positive");
    }
    if (covariance.rows() != covariance.cols() || covariance.rows() != gram.rows()) {
        throw InvalidArgument("covariance size does not match the voxel count");
    }
    const Eigen::LLT<Eigen::MatrixXd> cov_llt(covariance);
    if (cov_llt.info() != Eigen::Success || cov_llt.rcond() < kMinReciprocalCondition) {
        throw_singular("prior covariance", covariance);
    }
    const auto n = covariance.rows();
    Eigen::MatrixXd system = cov_llt.solve(Eigen::MatrixXd::Identity(n, n));
    system *= sigma_n2;
    system += gram;
    const Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success || llt.rcond() < kMinReciprocalCondition) {
        throw_singular("regularized normal matrix", system);
    }
    return llt.solve(weights_t);
}

} // namespace

Eigen::MatrixXd build_projection(const Eigen::SparseMatrix<double>& weights,
                                 const Eigen::MatrixXd& covariance, double sigma_n2) {
    const Eigen::SparseMatrix<double> wt = weights.transpose();
    const Eigen::MatrixXd gram = Eigen::MatrixXd(wt * weights);
    return solve_projection(gram, Eigen::MatrixXd(wt), covariance, sigma_n2);
}

Eigen::MatrixXd build_projection(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& covariance,
                                 double sigma_n2) {
    return solve_projection(weights.transpose() * weights, weights.transpose(), covariance, sigma_n2);
}

Eigen::VectorXd estimate_image(const Eigen::MatrixXd& projection, const Eigen::VectorXd& y) {
    if (projection.cols() != y.size()) {
        throw InvalidArgument("measurement vector has " + std::to_string(y.size()) +
                              " rows, projection expects " + std::to_string(projection.cols()));
    }
    return projection * y;
}

Localization localize(const Eigen::VectorXd& image, const VoxelGrid& grid) {
    if (image.size() == 0) {
        throw InvalidArgument("cannot localize on an empty image");
    }
    if (static_cast<std::size_t>(image.size()) != grid.size()) {
        throw InvalidArgument("image size does not match the voxel grid");
    }
    Eigen::Index best = 0;
    std::size_t ties = 1;
    for (Eigen::Index j = 1; j < image.size(); ++j) {
        if (image(j) > image(best)) {
            best = j;
            ties = 1;
        } else if (image(j) == image(best)) {
            ++ties;
        }
    }
    const auto voxel = static_cast<std::size_t>(best);
    return {grid.center(voxel), voxel, ties > 1};
}

Eigen::VectorXd RtiModel::measurement_vector(const MeasurementFrame& frame) const {
    const auto delta = rss_delta(frame, baseline);
    return excess_probabilities(delta, fade, config.probability);
}

Eigen::VectorXd RtiModel::image(const MeasurementFrame& frame) const {
    return estimate_image(projection, measurement_vector(frame));
}

Localization RtiModel::locate(const MeasurementFrame& frame) const {
    return localize(image(frame), grid);
}

RtiModel build_rti_model(std::span<const MeasurementFrame> training, std::span<const Point2D> antennas,
                         const VoxelGrid& grid, const RtiConfig& config) {
    config.lambda.validate();
    config.probability.validate();
    config.regularization.validate();
    BaselineTable baseline = train_baseline(training);
    std::vector<double> distances = link_distances(baseline.layout, antennas);
    PathLossFit fit = fit_path_loss(baseline, distances);
    FadeLevelTable fade = fade_level(baseline, fit, distances);
    EllipseWidths widths = lambda_widths(fade, config.lambda);
    Eigen::SparseMatrix<double> weights = build_weight_matrix(antennas, grid, widths);
    Eigen::MatrixXd projection =
        build_projection(weights, covariance_matrix(grid, config.regularization), config.regularization.sigma_n2);
    LinkLayout layout = baseline.layout;
    return RtiModel{std::move(layout),
                    std::vector<Point2D>(antennas.begin(), antennas.end()),
                    grid,
                    std::move(baseline),
                    std::move(distances),
                    std::move(fit),
                    std::move(fade),
                    std::move(widths),
                    std::move(weights),
                    std::move(projection),
                    config};
}

} // namespace rti
