#include <doctest.h>

#include <hbr/idx.hpp>

#include <zlib.h>

#include <filesystem>
#include <fstream>

using namespace hbr;

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int s = 24; s >= 0; s -= 8)
        out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::vector<std::uint8_t> image_file(std::uint32_t n, std::uint32_t rows = 28, std::uint32_t cols = 28, std::uint32_t magic = kIdxImagesMagic)
{
    std::vector<std::uint8_t> b;
    put_be32(b, magic);
    put_be32(b, n);
    put_be32(b, rows);
    put_be32(b, cols);
    for (std::size_t i = 0; i < n * rows * cols; ++i)
        b.push_back(static_cast<std::uint8_t>(i % 256));
    return b;
}

std::vector<std::uint8_t> label_file(std::uint32_t n)
{
    std::vector<std::uint8_t> b;
    put_be32(b, kIdxLabelsMagic);
    put_be32(b, n);
    for (std::uint32_t i = 0; i < n; ++i)
        b.push_back(static_cast<std::uint8_t>(i % 10));
    return b;
}

IdxErrorKind kind_of(const auto& fn)
{
    try {
        fn();
    }
    catch (const IdxError& e) {
        return e.kind();
    }
    FAIL("no IdxError thrown");
    return IdxErrorKind::Io;
}

} // namespace

TEST_CASE("canonical MNIST headers")
{
    // Header of the 60000-image training file: magic, count, rows, cols.
    std::vector<std::uint8_t> train;
    put_be32(train, 0x00000803);
    put_be32(train, 60000);
    put_be32(train, 28);
    put_be32(train, 28);
    const IdxHeader h = parse_idx_header(train, kIdxImagesMagic);
    CHECK(h.magic == 2051);
    CHECK(h.dims == std::vector<std::uint32_t>{60000, 28, 28});

    std::vector<std::uint8_t> labels;
    put_be32(labels, 0x00000801);
    put_be32(labels, 60000);
    const IdxHeader l = parse_idx_header(labels, kIdxLabelsMagic);
    CHECK(l.magic == 2049);
    CHECK(l.dims == std::vector<std::uint32_t>{60000});
}

TEST_CASE("in-memory parsing")
{
    const auto imgs = parse_idx_images(image_file(3));
    REQUIRE(imgs.size() == 3);
    CHECK(imgs[0].pixels[0] == 0.0);
    CHECK(imgs[0].pixels[255] == 1.0);
    CHECK(imgs[1].pixels[0] == doctest::Approx((784 % 256) / 255.0));
    CHECK(parse_idx_labels(label_file(12))[11] == 1);

    CHECK(kind_of([] { parse_idx_images(image_file(2, 28, 28, 0)); }) == IdxErrorKind::MagicMismatch);
    CHECK(kind_of([] { parse_idx_images(label_file(2)); }) == IdxErrorKind::MagicMismatch);
    CHECK(kind_of([] { parse_idx_labels(image_file(1)); }) == IdxErrorKind::MagicMismatch);
    CHECK(kind_of([] { parse_idx_images(image_file(2, 32, 32)); }) == IdxErrorKind::DimensionMismatch);
    CHECK(kind_of([] { parse_idx_images(std::vector<std::uint8_t>{0, 0}); }) == IdxErrorKind::Truncated);
    CHECK(kind_of([] {
        auto b = image_file(2);
        b.resize(b.size() - 1);
        parse_idx_images(b);
    }) == IdxErrorKind::Truncated);
    CHECK(kind_of([] {
        auto b = image_file(2);
        b.resize(10);
        parse_idx_images(b);
    }) == IdxErrorKind::Truncated);
    CHECK(kind_of([] {
        auto b = image_file(2);
        b.push_back(0);
        parse_idx_images(b);
    }) == IdxErrorKind::DimensionMismatch);
    CHECK(kind_of([] {
        auto b = label_file(4);
        b.pop_back();
        parse_idx_labels(b);
    }) == IdxErrorKind::Truncated);
}

TEST_CASE("file loading")
{
    const auto dir = std::filesystem::temp_directory_path() / "hbr_test_idx";
    std::filesystem::create_directories(dir);
    const auto raw = image_file(5);
    {
        std::ofstream os(dir / "plain-idx3", std::ios::binary);
        os.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    }
    {
        gzFile gz = gzopen((dir / "packed-idx3.gz").c_str(), "wb");
        REQUIRE(gz);
        gzwrite(gz, raw.data(), static_cast<unsigned>(raw.size()));
        gzclose(gz);
        const auto lab = label_file(5);
        gz = gzopen((dir / "labels.gz").c_str(), "wb");
        gzwrite(gz, lab.data(), static_cast<unsigned>(lab.size()));
        gzclose(gz);
    }
    CHECK(read_maybe_gzip((dir / "plain-idx3").string()) == raw);
    CHECK(read_maybe_gzip((dir / "packed-idx3.gz").string()) == raw);
    const Dataset ds = load_idx((dir / "packed-idx3.gz").string(), (dir / "labels.gz").string());
    CHECK(ds.images.size() == 5);
    CHECK(ds.labels.size() == 5);
    CHECK(kind_of([&] { load_idx((dir / "missing").string()); }) == IdxErrorKind::Io);

    {
        const auto lab = label_file(4);
        std::ofstream os(dir / "labels4", std::ios::binary);
        os.write(reinterpret_cast<const char*>(lab.data()), static_cast<std::streamsize>(lab.size()));
    }
    CHECK(kind_of([&] { load_idx((dir / "plain-idx3").string(), (dir / "labels4").string()); }) == IdxErrorKind::DimensionMismatch);
    std::filesystem::remove_all(dir);
}

TEST_CASE("bundled digit subset")
{
    const Dataset ds = load_idx("data/mnist/mnist-10k-images-idx3-ubyte.gz", std::string("data/mnist/mnist-10k-labels-idx1-ubyte.gz"));
    REQUIRE(ds.images.size() == 10000);
    REQUIRE(ds.labels.size() == 10000);
    std::size_t counts[10] = {};
    for (auto l : ds.labels) {
        REQUIRE(l < 10);
        ++counts[l];
    }
    for (auto c : counts)
        CHECK(c > 500);
    double ink = 0.0;
    for (double v : ds.images[0].pixels) {
        CHECK((v >= 0.0 && v <= 1.0));
        ink += v;
    }
    CHECK(ink > 10.0);
}
