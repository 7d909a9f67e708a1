#include "rti/geometry.hpp"

#include "rti/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rti {

double distance(Point2D a, Point2D b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

double segment_distance(Point2D p, Point2D a, Point2D b) {
    const Point2D ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    if (len2 == 0.0) {
        return distance(p, a);
    }
    const Point2D ap = p - a;
    const double t = std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0);
    return distance(p, a + t * ab);
}

double link_distance(Point2D tx, Point2D rx) {
    if (tx == rx) {
        throw DegenerateLink("link endpoints coincide at (" + std::to_string(tx.x) + ", " +
                             std::to_string(tx.y) + ")");
    }
    return distance(tx, rx);
}

LinkGeometry::LinkGeometry(Point2D tx, Point2D rx)
    : tx_(tx), rx_(rx), length_(link_distance(tx, rx)) {}

VoxelGrid::VoxelGrid(Point2D origin, double voxel_size, std::size_t nx, std::size_t ny)
    : origin_(origin), size_(voxel_size), nx_(nx), ny_(ny) {
    if (!(voxel_size > 0.0) || !std::isfinite(voxel_size)) {
        throw InvalidArgument("voxel size must be positive");
    }
    if (nx == 0 || ny == 0) {
        throw InvalidArgument("voxel grid must have at least one voxel per axis");
    }
    centers_.reserve(nx * ny);
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            centers_.push_back({origin.x + (static_cast<double>(ix) + 0.5) * size_,
                                origin.y + (static_cast<double>(iy) + 0.5) * size_});
        }
    }
}

VoxelGrid VoxelGrid::covering(const Rect& area, double voxel_size) {
    if (!(voxel_size > 0.0)) {
        throw InvalidArgument("voxel size must be positive");
    }
    const auto count = [&](double extent) {
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(extent / voxel_size - 1e-9)));
    };
    return VoxelGrid(area.min, voxel_size, count(area.width()), count(area.height()));
}

double VoxelGrid::voxel_diagonal() const { return size_ * std::numbers::sqrt2; }

Point2D VoxelGrid::center(std::size_t index) const {
    if (index >= centers_.size()) {
        throw InvalidArgument("voxel index out of range");
    }
    return centers_[index];
}

std::size_t VoxelGrid::index_of(Point2D p) const {
    const double fx = std::floor((p.x - origin_.x) / size_);
    const double fy = std::floor((p.y - origin_.y) / size_);
    if (fx < 0 || fy < 0 || fx >= static_cast<double>(nx_) || fy >= static_cast<double>(ny_)) {
        throw InvalidArgument("point outside voxel grid");
    }
    return static_cast<std::size_t>(fy) * nx_ + static_cast<std::size_t>(fx);
}

bool ellipse_contains(Point2D voxel_center, const LinkGeometry& link, double lambda) {
    return distance(voxel_center, link.tx()) + distance(voxel_center, link.rx()) <
           link.length() + lambda;
}

double ellipse_area(double link_length, double lambda) {
    if (!(lambda > 0.0)) {
        throw InvalidArgument("ellipse width must be positive, got " + std::to_string(lambda));
    }
    const double semi_major = (link_length + lambda) / 2.0;
    // a^2 - (d/2)^2 rewritten to avoid cancellation for thin ellipses
    const double semi_minor = std::sqrt(lambda * (2.0 * link_length + lambda)) / 2.0;
    return std::numbers::pi * semi_major * semi_minor;
}

} // namespace rti
