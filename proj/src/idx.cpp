#include <hbr/idx.hpp>

#include <zlib.h>

#include <cstdio>
#include <memory>

namespace hbr {

namespace {
    std::uint32_t be32(const std::uint8_t* p)
    {
        return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16)
            | (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
    }

    std::string hex(std::uint32_t v)
    {
        char buf[16];
        std::snprintf(buf, sizeof buf, "0x%08x", v);
        return buf;
    }
} // namespace

IdxHeader parse_idx_header(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic)
{
    if (bytes.size() < 4)
        throw IdxError(IdxErrorKind::Truncated, "IDX: file shorter than the magic number");
    IdxHeader h;
    h.magic = be32(bytes.data());
    if (h.magic != expected_magic)
        throw IdxError(IdxErrorKind::MagicMismatch, "IDX: magic " + hex(h.magic) + ", expected " + hex(expected_magic));
    const std::size_t ndims = h.magic & 0xff;
    if (bytes.size() < 4 + 4 * ndims)
        throw IdxError(IdxErrorKind::Truncated, "IDX: header truncated");
    for (std::size_t i = 0; i < ndims; ++i)
        h.dims.push_back(be32(bytes.data() + 4 + 4 * i));
    return h;
}

std::vector<Image28> parse_idx_images(std::span<const std::uint8_t> bytes)
{
    const IdxHeader h = parse_idx_header(bytes, kIdxImagesMagic);
    if (h.dims[1] != kImageSide || h.dims[2] != kImageSide)
        throw IdxError(IdxErrorKind::DimensionMismatch,
            "IDX: images are " + std::to_string(h.dims[1]) + "x" + std::to_string(h.dims[2]) + ", expected 28x28");
    const std::size_t n = h.dims[0];
    const std::size_t need = 16 + n * kImagePixels;
    if (bytes.size() < need)
        throw IdxError(IdxErrorKind::Truncated, "IDX: header declares " + std::to_string(n) + " images but only "
                + std::to_string((bytes.size() - 16) / kImagePixels) + " are present");
    if (bytes.size() > need)
        throw IdxError(IdxErrorKind::DimensionMismatch, "IDX: trailing bytes after the declared images");
    std::vector<Image28> out(n);
    const std::uint8_t* p = bytes.data() + 16;
    for (auto& img : out)
        for (auto& v : img.pixels)
            v = *p++ / 255.0;
    return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes)
{
    const IdxHeader h = parse_idx_header(bytes, kIdxLabelsMagic);
    const std::size_t n = h.dims[0];
    if (bytes.size() < 8 + n)
        throw IdxError(IdxErrorKind::Truncated, "IDX: label file truncated");
    if (bytes.size() > 8 + n)
        throw IdxError(IdxErrorKind::DimensionMismatch, "IDX: trailing bytes after the declared labels");
    return {bytes.begin() + 8, bytes.end()};
}

std::vector<std::uint8_t> read_maybe_gzip(const std::string& path)
{
    std::unique_ptr<gzFile_s, int (*)(gzFile)> f(gzopen(path.c_str(), "rb"), gzclose);
    if (!f)
        throw IdxError(IdxErrorKind::Io, "cannot open " + path);
    std::vector<std::uint8_t> out;
    std::uint8_t buf[1 << 16];
    for (;;) {
        const int n = gzread(f.get(), buf, sizeof buf);
        if (n < 0)
            throw IdxError(IdxErrorKind::Truncated, path + ": corrupt compressed stream");
        if (n == 0)
            break;
        out.insert(out.end(), buf, buf + n);
    }
    return out;
}

Dataset load_idx(const std::string& images_path, const std::optional<std::string>& labels_path)
{
    Dataset ds;
    ds.images = parse_idx_images(read_maybe_gzip(images_path));
    if (ds.images.empty())
        throw IdxError(IdxErrorKind::DimensionMismatch, images_path + ": no images");
    if (labels_path) {
        ds.labels = parse_idx_labels(read_maybe_gzip(*labels_path));
        if (ds.labels.size() != ds.images.size())
            throw IdxError(IdxErrorKind::DimensionMismatch, "IDX: label count differs from image count");
    }
    return ds;
}

} // namespace hbr
