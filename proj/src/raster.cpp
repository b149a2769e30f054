#include <hbr/raster.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace hbr {

std::size_t Image28::nonzero() const
{
    return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](double v) { return v > 0.0; }));
}

namespace {
    struct Segment {
        Vec2 a, b;
    };

    double distance_to_segment(Vec2 p, const Segment& s)
    {
        const Vec2 ab = s.b - s.a;
        const double len2 = ab.x * ab.x + ab.y * ab.y;
        double t = 0.0;
        if (len2 > 0.0)
            t = std::clamp(((p.x - s.a.x) * ab.x + (p.y - s.a.y) * ab.y) / len2, 0.0, 1.0);
        const Vec2 c = s.a + ab * t;
        return (p - c).norm();
    }

    void draw_segment(Image28& img, const Segment& s, double half_width)
    {
        const int c0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.x, s.b.x) - half_width - 1.0)));
        const int c1 = std::min(kImageSide - 1, static_cast<int>(std::ceil(std::max(s.a.x, s.b.x) + half_width + 1.0)));
        const int r0 = std::max(0, static_cast<int>(std::floor(std::min(s.a.y, s.b.y) - half_width - 1.0)));
        const int r1 = std::min(kImageSide - 1, static_cast<int>(std::ceil(std::max(s.a.y, s.b.y) + half_width + 1.0)));
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double d = distance_to_segment({c + 0.5, r + 0.5}, s);
                const double v = std::clamp(1.0 - d / half_width, 0.0, 1.0);
                double& px = img.at(r, c);
                px = std::max(px, v);
            }
        }
    }
} // namespace

Image28 rasterize(const Trajectory& traj, const StrokeStyle& style, const RasterConfig& cfg)
{
    Image28 img;
    std::vector<Segment> segs;
    const auto& pts = traj.points;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!pts[i].pen_down)
            continue;
        const Vec2 from = i > 0 ? pts[i - 1].position : pts[i].position;
        segs.push_back({from, pts[i].position});
    }
    if (segs.empty())
        return img;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : segs) {
        for (const Vec2& p : {s.a, s.b}) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    }
    const double extent = std::max(xmax - xmin, ymax - ymin);
    const double half_width = std::max(style.width, 1e-6) / 2.0;
    const double center = kImageSide / 2.0;
    if (!(extent > 1e-12)) {
        draw_segment(img, {{center, center}, {center, center}}, half_width);
        return img;
    }

    // Length-weighted centroid of the drawn centerline.
    Vec2 com;
    double total = 0.0;
    for (const auto& s : segs) {
        const double len = (s.b - s.a).norm();
        com = com + (s.a + s.b) * (0.5 * len);
        total += len;
    }
    if (total > 0.0) {
        com = com * (1.0 / total);
    }
    else {
        com = {};
        for (const auto& s : segs)
            com = com + s.a;
        com = com * (1.0 / static_cast<double>(segs.size()));
    }

    // World -> pixel: isotropic fit-box scale, y axis pointing down.
    const double scale = cfg.fit_box / extent;
    auto to_px = [&](Vec2 p) { return Vec2{center + (p.x - com.x) * scale, center - (p.y - com.y) * scale}; };
    for (const auto& s : segs)
        draw_segment(img, {to_px(s.a), to_px(s.b)}, half_width);
    return img;
}

double image_diff(const Image28& a, const Image28& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < kImagePixels; ++i)
        s += std::abs(a.pixels[i] - b.pixels[i]);
    return s / static_cast<double>(kImagePixels);
}

// ---------------------------------------------------------------------------

void GrayImage::blit(const Image28& img, int x0, int y0)
{
    for (int r = 0; r < kImageSide; ++r)
        for (int c = 0; c < kImageSide; ++c) {
            const int x = x0 + c, y = y0 + r;
            if (x >= 0 && x < width && y >= 0 && y < height)
                pixels[static_cast<std::size_t>(y * width + x)] = img.at(r, c);
        }
}

GrayImage to_gray(const Image28& img)
{
    GrayImage g(kImageSide, kImageSide);
    g.blit(img, 0, 0);
    return g;
}

void write_pgm(std::ostream& os, const GrayImage& img)
{
    os << "P5\n" << img.width << ' ' << img.height << "\n255\n";
    for (double v : img.pixels) {
        const auto b = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        os.put(static_cast<char>(b));
    }
}

void write_pgm(const std::string& path, const GrayImage& img)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + path);
    write_pgm(os, img);
}

GrayImage read_pgm(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw std::runtime_error("cannot read " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    is >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error(path + ": not an 8-bit P5 image");
    is.get();
    GrayImage img(w, h);
    for (auto& v : img.pixels) {
        const int c = is.get();
        if (c == EOF)
            throw std::runtime_error(path + ": truncated");
        v = static_cast<unsigned char>(c) / 255.0;
    }
    return img;
}

} // namespace hbr
