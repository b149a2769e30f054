#ifndef HBR_RASTER_HPP
#define HBR_RASTER_HPP

#include <hbr/kinematics.hpp>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace hbr {

inline constexpr int kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;

/// 28x28 grayscale image, row-major, 0 = background, values in [0,1].
struct Image28 {
    std::array<double, kImagePixels> pixels{};

    double& at(int row, int col) { return pixels[static_cast<std::size_t>(row * kImageSide + col)]; }
    double at(int row, int col) const { return pixels[static_cast<std::size_t>(row * kImageSide + col)]; }
    std::size_t nonzero() const;
    bool operator==(const Image28&) const = default;
};

struct StrokeStyle {
    double width = 2.5; ///< stroke width in output pixels
};

struct RasterConfig {
    double fit_box = 20.0; ///< drawing extent is scaled to fit this many pixels
};

/// Pen-down segments drawn as anti-aliased strokes (intensity 1 - d/halfwidth),
/// the drawing fit isotropically into a 20x20 box and shifted so the
/// length-weighted centroid of its centerline sits at the image center. Segment (p[i-1], p[i]) is drawn
/// when p[i] is pen-down; a pen-down point without a drawn neighbor is a dot.
Image28 rasterize(const Trajectory& traj, const StrokeStyle& style, const RasterConfig& cfg = {});

/// Mean absolute per-pixel difference, in [0,1].
double image_diff(const Image28& a, const Image28& b);

/// Generic grayscale buffer used for composites.
struct GrayImage {
    int width = 0, height = 0;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w * h), 0.0) {}
    void blit(const Image28& img, int x0, int y0);
};

GrayImage to_gray(const Image28& img);

/// Binary PGM (P5, maxval 255); intensity v maps to round(255 v).
void write_pgm(std::ostream& os, const GrayImage& img);
void write_pgm(const std::string& path, const GrayImage& img);
GrayImage read_pgm(const std::string& path);

} // namespace hbr

#endif
