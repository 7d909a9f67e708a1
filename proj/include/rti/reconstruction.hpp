#pragma once

#include "rti/geometry.hpp"
#include "rti/tdma.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <optional>
#include <span>
#include <vector>

namespace rti {

/// Empty-room mean RSS r̄ per directed link × channel.
struct BaselineTable {
    LinkLayout layout;
    std::vector<std::optional<double>> mean; ///< nullopt when the entry had no samples
    std::vector<std::size_t> count;

    std::size_t present() const;
};

/// Per-entry arithmetic mean over the non-missing samples. All frames must share one
/// layout and one set of servo positions.
BaselineTable train_baseline(std::span<const MeasurementFrame> frames);

/// d_l for every link of `layout`, from antenna coordinates in layout node order.
std::vector<double> link_distances(const LinkLayout& layout, std::span<const Point2D> antennas);

/// Log-distance model P(d, c) = intercept_c − 10 η log10 d fitted by ordinary least squares.
struct PathLossFit {
    double eta = 0.0;
    std::vector<double> intercepts;               ///< per channel, layout order
    std::vector<std::optional<double>> residuals; ///< r̄ − P per entry

    double predict(double link_length, std::size_t channel_index) const;
};

struct PathLossSample {
    double distance = 0.0;
    std::size_t channel_index = 0;
    double rss_dbm = 0.0;
};

/// Throws SingularSystem when the samples span fewer than 2 distinct distances or a
/// channel has no sample.
PathLossFit fit_path_loss(std::span<const PathLossSample> samples, std::size_t channel_count);

/// Fit over every present baseline entry; `distances` holds d_l per link.
PathLossFit fit_path_loss(const BaselineTable& baseline, std::span<const double> distances);

/// F = r̄ − P(d, c). F >= 0 is anti-fade, F < 0 deep fade.
struct FadeLevelTable {
    LinkLayout layout;
    std::vector<std::optional<double>> level;

    bool anti_fade(std::size_t entry) const { return level[entry].value() >= 0.0; }
    std::optional<double> mean() const;
};

FadeLevelTable fade_level(const BaselineTable& baseline, const PathLossFit& fit,
                          std::span<const double> distances);

/// Piecewise-linear ellipse width map: λ_min for anti-fade, growing by `slope` m/dB of
/// fade depth, capped at λ_max.
struct LambdaConfig {
    double min = 0.05;
    double slope = 0.03;
    double max = 1.0;

    void validate() const;
};

struct WidthPair {
    double plus = 0.0;  ///< λ⁺, for an RSS increase
    double minus = 0.0; ///< λ⁻, for an RSS decrease
};

WidthPair lambda_widths(double fade_level, const LambdaConfig& config);

struct EllipseWidths {
    LinkLayout layout;
    std::vector<std::optional<WidthPair>> width;
};

EllipseWidths lambda_widths(const FadeLevelTable& fade, const LambdaConfig& config);

/// Δr = r − r̄ per entry; nullopt where the sample or the baseline is missing.
std::vector<std::optional<double>> rss_delta(const MeasurementFrame& frame,
                                             const BaselineTable& baseline);

/// Dead band τ, then linear growth reaching 1 at |Δr| = saturation.
struct ProbabilityConfig {
    double dead_band = 1.0;
    double saturation = 10.0;

    void validate() const;
};

struct ExcessProbability {
    double plus = 0.0;
    double minus = 0.0;
};

ExcessProbability excess_probability(double delta, const ProbabilityConfig& config);

/// Stacked measurement vector y: row 2e holds p⁺ of entry e, row 2e + 1 holds p⁻.
/// Missing deltas and entries without a fade level contribute zeros.
Eigen::VectorXd excess_probabilities(std::span<const std::optional<double>> delta,
                                     const FadeLevelTable& fade, const ProbabilityConfig& config);

/// Rows follow the y layout above; entry (row, j) = 1/A if voxel j lies inside the
/// row's ellipse. Rows of absent entries, or ellipses holding no voxel center, are zero.
Eigen::SparseMatrix<double> build_weight_matrix(std::span<const Point2D> antennas,
                                                const VoxelGrid& grid, const EllipseWidths& widths);

struct RegularizationParams {
    double sigma_n2 = 1.0;   ///< regularization weight σ_N²
    double sigma_x2 = 0.5;   ///< voxel variance σ_x²
    double delta_c = 0.5;    ///< correlation distance, meters

    void validate() const;
};

/// [C]_{j,i} = σ_x² exp(−d_{j,i} / δ_c).
Eigen::MatrixXd covariance_matrix(const VoxelGrid& grid, const RegularizationParams& params);

/// Π = (WᵀW + C⁻¹ σ_N²)⁻¹ Wᵀ, by Cholesky solves (no explicit inverse of the system).
/// Throws SingularSystem with a reciprocal condition estimate when a factorization fails.
Eigen::MatrixXd build_projection(const Eigen::SparseMatrix<double>& weights,
                                 const Eigen::MatrixXd& covariance, double sigma_n2);
Eigen::MatrixXd build_projection(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& covariance,
                                 double sigma_n2);

/// x̂ = Π y. Throws InvalidArgument on a dimension mismatch.
Eigen::VectorXd estimate_image(const Eigen::MatrixXd& projection, const Eigen::VectorXd& y);

struct Localization {
    Point2D position;
    std::size_t voxel = 0;
    bool degenerate = false; ///< the maximum is shared by more than one voxel
};

/// Center of the argmax voxel; ties go to the lowest voxel index.
Localization localize(const Eigen::VectorXd& image, const VoxelGrid& grid);

struct RtiConfig {
    double voxel_size = 0.25;
    RegularizationParams regularization;
    LambdaConfig lambda;
    ProbabilityConfig probability;
};

/// Everything derived from one training phase. Immutable once built.
struct RtiModel {
    LinkLayout layout;
    std::vector<Point2D> antennas;
    VoxelGrid grid;
    BaselineTable baseline;
    std::vector<double> distances;
    PathLossFit fit;
    FadeLevelTable fade;
    EllipseWidths widths;
    Eigen::SparseMatrix<double> weights;
    Eigen::MatrixXd projection;
    RtiConfig config;

    Eigen::VectorXd measurement_vector(const MeasurementFrame& frame) const;
    Eigen::VectorXd image(const MeasurementFrame& frame) const;
    Localization locate(const MeasurementFrame& frame) const;
};

/// Trains a model from empty-room frames. `antennas` are in layout node order.
RtiModel build_rti_model(std::span<const MeasurementFrame> training, std::span<const Point2D> antennas,
                         const VoxelGrid& grid, const RtiConfig& config);

} // namespace rti
