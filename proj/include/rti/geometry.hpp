#pragma once

#include <cstddef>
#include <vector>

namespace rti {

struct Point2D {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2D&, const Point2D&) = default;
};

inline Point2D operator+(Point2D a, Point2D b) { return {a.x + b.x, a.y + b.y}; }
inline Point2D operator-(Point2D a, Point2D b) { return {a.x - b.x, a.y - b.y}; }
inline Point2D operator*(double s, Point2D p) { return {s * p.x, s * p.y}; }

/// Euclidean distance; zero allowed.
double distance(Point2D a, Point2D b);

/// Distance from p to the closed segment [a, b].
double segment_distance(Point2D p, Point2D a, Point2D b);

/// Link length d_l. Throws DegenerateLink when tx == rx.
double link_distance(Point2D tx, Point2D rx);

struct Rect {
    Point2D min;
    Point2D max;

    bool contains(Point2D p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y;
    }
    double width() const { return max.x - min.x; }
    double height() const { return max.y - min.y; }
    Point2D center() const { return {(min.x + max.x) / 2, (min.y + max.y) / 2}; }
};

class LinkGeometry {
public:
    LinkGeometry(Point2D tx, Point2D rx);

    Point2D tx() const { return tx_; }
    Point2D rx() const { return rx_; }
    double length() const { return length_; }

private:
    Point2D tx_;
    Point2D rx_;
    double length_;
};

/// Regular nx × ny grid of square voxels. Voxel j = iy * nx + ix.
class VoxelGrid {
public:
    VoxelGrid(Point2D origin, double voxel_size, std::size_t nx, std::size_t ny);

    /// Smallest grid with the given voxel size covering `area`.
    static VoxelGrid covering(const Rect& area, double voxel_size);

    Point2D origin() const { return origin_; }
    double voxel_size() const { return size_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    std::size_t size() const { return nx_ * ny_; }
    double voxel_diagonal() const;

    Point2D center(std::size_t index) const;
    const std::vector<Point2D>& centers() const { return centers_; }

    /// Index of the voxel containing p. Throws InvalidArgument outside the grid.
    std::size_t index_of(Point2D p) const;

private:
    Point2D origin_;
    double size_;
    std::size_t nx_;
    std::size_t ny_;
    std::vector<Point2D> centers_;
};

/// d(voxel, tx) + d(voxel, rx) < d_l + lambda. Strict: boundary voxels are outside.
bool ellipse_contains(Point2D voxel_center, const LinkGeometry& link, double lambda);

/// Area of the ellipse with foci tx/rx and focal-distance sum d_l + lambda.
/// Throws InvalidArgument for lambda <= 0.
double ellipse_area(double link_length, double lambda);

} // namespace rti
