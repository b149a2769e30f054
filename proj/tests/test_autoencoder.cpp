#include <doctest.h>

#include <hbr/autoencoder.hpp>

#include <cmath>
#include <sstream>

using namespace hbr;

namespace {

AeArchitecture tiny()
{
    AeArchitecture a;
    a.maps = 2;
    a.fc_hidden = {8};
    return a;
}

std::vector<Image28> random_images(std::size_t n, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<Image28> out(n);
    for (auto& img : out)
        for (auto& v : img.pixels)
            v = rng.uniform() < 0.3 ? rng.uniform() : 0.0;
    return out;
}

std::vector<const Image28*> pointers(const std::vector<Image28>& imgs)
{
    std::vector<const Image28*> p;
    for (const auto& i : imgs)
        p.push_back(&i);
    return p;
}

// Biases start at zero, which parks many ReLU units exactly on the kink where
// the finite difference is one-sided. Small random biases move them off it.
void jitter_biases(ConvAutoencoder& net, std::uint64_t seed)
{
    Rng rng(seed);
    for (const auto& b : net.blocks())
        if (b.name.ends_with(".b"))
            for (std::size_t i = 0; i < b.size; ++i)
                net.params()[b.offset + i] = rng.uniform(-0.1, 0.1);
}

} // namespace

TEST_CASE("architecture shapes")
{
    const AeArchitecture a;
    const auto shapes = forward_shapes(a);
    CHECK(shapes.front().name == "input");
    CHECK(shapes.back().name == "output");
    CHECK(shapes.back().channels == 1);
    CHECK(shapes.back().height == 28);
    for (const auto& s : shapes)
        if (s.name == "latent")
            CHECK(s.channels == 2);
    for (const auto& s : shapes)
        if (s.name == "enc.pool2") {
            CHECK(s.channels == 8);
            CHECK(s.height == 7);
        }

    // Parameter count assembled layer by layer.
    const int m = 8;
    const std::size_t expected = (m * 81 + m) + (m * m * 9 + m) + (100 * 392 + 100) + (100 * 100 + 100) + (2 * 100 + 2)
        + (100 * 2 + 100) + (100 * 100 + 100) + (392 * 100 + 392) + (m * m * 9 + m) + (m * m * 81 + m) + (m * 9 + 1);
    const ConvAutoencoder net(a);
    CHECK(net.params().size() == expected);
    std::size_t sum = 0;
    for (const auto& b : net.blocks()) {
        CHECK(b.offset == sum);
        sum += b.size;
    }
    CHECK(sum == expected);
    CHECK(net.manifest().find("enc.conv1.w 8 1 9 9") != std::string::npos);

    AeArchitecture bad;
    bad.kernel_large = 4;
    CHECK_THROWS_AS(ConvAutoencoder{bad}, AeError);
    bad = {};
    bad.fc_hidden = {0};
    CHECK_THROWS_AS(ConvAutoencoder{bad}, AeError);
}

TEST_CASE("encode and decode ranges")
{
    ConvAutoencoder net;
    net.init(1);
    for (const auto& b : net.blocks())
        if (b.name.ends_with(".b"))
            for (std::size_t i = 0; i < b.size; ++i)
                CHECK(net.params()[b.offset + i] == 0.0);

    const auto imgs = random_images(1000, 2);
    for (const auto& img : imgs) {
        const auto z = net.encode(img);
        REQUIRE(z.size() == 2);
        for (double v : z)
            CHECK((v >= -1.0 && v <= 1.0));
    }
    const std::vector<double> corner{1.0, -1.0};
    const Image28 out = net.decode(corner);
    for (double v : out.pixels)
        CHECK((v > 0.0 && v < 1.0));
}

TEST_CASE("reconstruction error matches a direct mean squared error")
{
    ConvAutoencoder net(tiny());
    net.init(3);
    const auto imgs = random_images(20, 4);
    const auto errs = net.reconstruction_errors(imgs, 7);
    REQUIRE(errs.size() == imgs.size());
    double batch_mean = 0.0;
    for (std::size_t i = 0; i < imgs.size(); ++i) {
        const Image28 rec = net.decode(net.encode(imgs[i]));
        double mse = 0.0;
        for (std::size_t p = 0; p < kImagePixels; ++p)
            mse += (imgs[i].pixels[p] - rec.pixels[p]) * (imgs[i].pixels[p] - rec.pixels[p]);
        mse /= 784.0;
        CHECK(std::abs(net.reconstruction_error(imgs[i]) - mse) < 1e-12);
        CHECK(std::abs(errs[i] - mse) < 1e-12);
        batch_mean += mse / static_cast<double>(imgs.size());
    }
    const auto p = pointers(imgs);
    CHECK(std::abs(net.loss(p) - batch_mean) < 1e-12);
}

TEST_CASE("backpropagation agrees with central differences")
{
    ConvAutoencoder net(tiny());
    net.init(5);
    jitter_biases(net, 6);
    const auto imgs = random_images(3, 7);
    const auto p = pointers(imgs);
    Rng rng(8);
    const GradCheckResult r = grad_check(net, p, 1e-5, 600, rng);
    CHECK(r.checked == 600);
    INFO("worst index " << r.worst_index << " analytic " << r.worst_analytic << " numeric " << r.worst_numeric);
    CHECK(r.max_relative_error < 1e-4);
}

TEST_CASE("training")
{
    const auto data = random_images(40, 9);
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.curriculum_epoch = 2;
    cfg.batch_size = 16;
    cfg.rng_seed = 10;

    SUBCASE("a zero learning rate leaves the parameters unchanged")
    {
        ConvAutoencoder net(tiny());
        net.init(11);
        const auto before = net.params();
        TrainConfig still = cfg;
        still.learning_rate = 0.0;
        train(net, data, still);
        CHECK(net.params() == before);
    }
    SUBCASE("log rows, curriculum filter and determinism")
    {
        ConvAutoencoder a(tiny()), b(tiny());
        a.init(12);
        b.init(12);
        int seen = 0;
        const TrainResult ra = train(a, data, cfg, [&](const EpochLog&) { ++seen; });
        const TrainResult rb = train(b, data, cfg);
        CHECK(seen == 4);
        REQUIRE(ra.log.size() == 4);
        for (int e = 0; e < 4; ++e)
            CHECK(ra.log[static_cast<std::size_t>(e)].epoch == e + 1);
        REQUIRE(ra.curriculum.size() == 1);
        const CurriculumEvent& ev = ra.curriculum.front();
        CHECK(ev.size_before == 40);
        CHECK(ev.size_after < ev.size_before);
        CHECK(ev.size_after > 0);
        CHECK(ev.mean_after < ev.mean_before);
        CHECK(ra.log[2].dataset_size == ev.size_after);
        CHECK(ra.log[1].dataset_size == 40);
        CHECK(a.params() == b.params());
        CHECK(ra.log.back().mean_error == rb.log.back().mean_error);
    }
    SUBCASE("loss goes down on a fixed batch")
    {
        ConvAutoencoder net(tiny());
        net.init(13);
        const auto p = pointers(data);
        const double before = net.loss(p);
        TrainConfig longer = cfg;
        longer.epochs = 10;
        longer.curriculum_epoch = 0;
        longer.learning_rate = 3e-3;
        train(net, data, longer);
        CHECK(net.loss(p) < before);
    }
    SUBCASE("invalid settings")
    {
        ConvAutoencoder net(tiny());
        TrainConfig bad = cfg;
        bad.curriculum_epoch = 4;
        CHECK_THROWS_AS(train(net, data, bad), AeError);
        bad = cfg;
        bad.learning_rate = -1.0;
        CHECK_THROWS_AS(train(net, data, bad), AeError);
        CHECK_THROWS_AS(train(net, {}, cfg), AeError);
    }
}

TEST_CASE("checkpoints")
{
    ConvAutoencoder net(tiny());
    net.init(14);
    jitter_biases(net, 15);
    std::stringstream a, b;
    net.save(a);
    net.save(b);
    CHECK(a.str() == b.str());

    const ConvAutoencoder back = ConvAutoencoder::load(a);
    CHECK(back.arch() == net.arch());
    CHECK(back.params() == net.params());
    const auto img = random_images(1, 16).front();
    CHECK(back.encode(img) == net.encode(img));

    std::stringstream junk("definitely not a checkpoint");
    CHECK_THROWS_AS(ConvAutoencoder::load(junk), AeError);
    std::string cut = b.str();
    cut.resize(cut.size() / 2);
    std::stringstream truncated(cut);
    CHECK_THROWS_AS(ConvAutoencoder::load(truncated), AeError);
}
