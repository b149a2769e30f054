#include <hbr/autoencoder.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hbr {

namespace {
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Mat = Eigen::MatrixXd;
    using ConstRowMap = Eigen::Map<const RowMat>;
    using RowMap = Eigen::Map<RowMat>;
    using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
    using VecMap = Eigen::Map<Eigen::VectorXd>;

    // Activations of a batch are stored channel-major: row c holds channel c of
    // every sample, sample b occupying columns [b*h*w, (b+1)*h*w).

    // Grow-only buffer handing out matrix views. Column buffers reach ~100 MB
    // at batch 128; keeping them avoids remapping fresh pages on every batch.
    class Workspace {
    public:
        RowMap view(Eigen::Index rows, Eigen::Index cols)
        {
            const auto n = static_cast<std::size_t>(rows * cols);
            if (_buf.size() < n)
                _buf.resize(n);
            return RowMap(_buf.data(), rows, cols);
        }

    private:
        std::vector<double> _buf;
    };

    Workspace& workspace(int i)
    {
        thread_local Workspace ws[2];
        return ws[i];
    }

    RowMap im2col(const RowMat& x, int c, int h, int w, int k, int batch, Workspace& ws)
    {
        const int p = k / 2;
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
        RowMap cols = ws.view(static_cast<Eigen::Index>(c) * k * k, hw * batch);
        for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ky) * k + kx;
                    double* dst = cols.row(row).data();
                    const double* src = x.row(ci).data();
                    const int x_lo = std::max(0, p - kx), x_hi = std::min(w, w + p - kx);
                    for (int b = 0; b < batch; ++b) {
                        const Eigen::Index base = b * hw;
                        for (int y = 0; y < h; ++y) {
                            double* d = dst + base + static_cast<Eigen::Index>(y) * w;
                            const int sy = y + ky - p;
                            if (sy < 0 || sy >= h) {
                                std::fill(d, d + w, 0.0);
                                continue;
                            }
                            const double* s = src + base + static_cast<Eigen::Index>(sy) * w + (kx - p);
                            std::fill(d, d + x_lo, 0.0);
                            for (int xx = x_lo; xx < x_hi; ++xx)
                                d[xx] = s[xx];
                            std::fill(d + x_hi, d + w, 0.0);
                        }
                    }
                }
        return cols;
    }

    // Adjoint of im2col: accumulates columns back into an image tensor.
    void col2im(const RowMap& cols, int c, int h, int w, int k, int batch, RowMat& x)
    {
        const int p = k / 2;
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w;
        x.setZero(c, hw * batch);
        for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ky) * k + kx;
                    const double* src = cols.row(row).data();
                    double* dst = x.row(ci).data();
                    const int x_lo = std::max(0, p - kx), x_hi = std::min(w, w + p - kx);
                    for (int b = 0; b < batch; ++b) {
                        const Eigen::Index base = b * hw;
                        for (int y = 0; y < h; ++y) {
                            const int sy = y + ky - p;
                            if (sy < 0 || sy >= h)
                                continue;
                            const double* s = src + base + static_cast<Eigen::Index>(y) * w;
                            double* d = dst + base + static_cast<Eigen::Index>(sy) * w + (kx - p);
                            for (int xx = x_lo; xx < x_hi; ++xx)
                                d[xx] += s[xx];
                        }
                    }
                }
    }

    void maxpool(const RowMat& x, int h, int w, int batch, RowMat& y, std::vector<Eigen::Index>& arg)
    {
        const int oh = h / 2, ow = w / 2;
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w, ohw = static_cast<Eigen::Index>(oh) * ow;
        y.resize(x.rows(), ohw * batch);
        arg.resize(static_cast<std::size_t>(y.size()));
        for (Eigen::Index c = 0; c < x.rows(); ++c)
            for (int b = 0; b < batch; ++b)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        Eigen::Index best = b * hw + (2 * oy) * w + 2 * ox;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const Eigen::Index i = b * hw + (2 * oy + dy) * w + 2 * ox + dx;
                                if (x(c, i) > x(c, best))
                                    best = i;
                            }
                        const Eigen::Index o = b * ohw + oy * ow + ox;
                        y(c, o) = x(c, best);
                        arg[static_cast<std::size_t>(c * y.cols() + o)] = best;
                    }
    }

    void maxpool_back(const RowMat& dy, const std::vector<Eigen::Index>& arg, Eigen::Index in_cols, RowMat& dx)
    {
        dx.setZero(dy.rows(), in_cols);
        for (Eigen::Index c = 0; c < dy.rows(); ++c)
            for (Eigen::Index o = 0; o < dy.cols(); ++o)
                dx(c, arg[static_cast<std::size_t>(c * dy.cols() + o)]) += dy(c, o);
    }

    void upsample(const RowMat& x, int h, int w, int batch, RowMat& y)
    {
        const int oh = 2 * h, ow = 2 * w;
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w, ohw = static_cast<Eigen::Index>(oh) * ow;
        y.resize(x.rows(), ohw * batch);
        for (Eigen::Index c = 0; c < x.rows(); ++c)
            for (int b = 0; b < batch; ++b)
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox)
                        y(c, b * ohw + oy * ow + ox) = x(c, b * hw + (oy / 2) * w + ox / 2);
    }

    void upsample_back(const RowMat& dy, int h, int w, int batch, RowMat& dx)
    {
        const int ow = 2 * w;
        const Eigen::Index hw = static_cast<Eigen::Index>(h) * w, ohw = 4 * hw;
        dx.setZero(dy.rows(), hw * batch);
        for (Eigen::Index c = 0; c < dy.rows(); ++c)
            for (int b = 0; b < batch; ++b)
                for (int oy = 0; oy < 2 * h; ++oy)
                    for (int ox = 0; ox < ow; ++ox)
                        dx(c, b * hw + (oy / 2) * w + ox / 2) += dy(c, b * ohw + oy * ow + ox);
    }

    // (maps, 49*batch) <-> (maps*49, batch)
    Mat flatten(const RowMat& x, int spatial, int batch)
    {
        Mat f(x.rows() * spatial, batch);
        for (Eigen::Index c = 0; c < x.rows(); ++c)
            for (int b = 0; b < batch; ++b)
                for (int s = 0; s < spatial; ++s)
                    f(c * spatial + s, b) = x(c, static_cast<Eigen::Index>(b) * spatial + s);
        return f;
    }

    RowMat unflatten(const Mat& f, int channels, int spatial)
    {
        const auto batch = static_cast<int>(f.cols());
        RowMat x(channels, static_cast<Eigen::Index>(spatial) * batch);
        for (int c = 0; c < channels; ++c)
            for (int b = 0; b < batch; ++b)
                for (int s = 0; s < spatial; ++s)
                    x(c, static_cast<Eigen::Index>(b) * spatial + s) = f(static_cast<Eigen::Index>(c) * spatial + s, b);
        return x;
    }

    template <class M>
    void relu_inplace(M& m)
    {
        m = m.cwiseMax(0.0);
    }

    template <class M, class A>
    void relu_mask(M& grad, const A& act)
    {
        grad.array() = (act.array() > 0.0).select(grad.array(), 0.0);
    }

    void write_u32(std::ostream& os, std::uint32_t v)
    {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
            static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
        os.write(reinterpret_cast<const char*>(b), 4);
    }

    std::uint32_t read_u32(std::istream& is)
    {
        unsigned char b[4];
        if (!is.read(reinterpret_cast<char*>(b), 4))
            throw AeError("checkpoint truncated");
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8)
            | (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }

    constexpr char kMagic[8] = {'H', 'B', 'R', 'A', 'E', '0', '1', '\n'};
} // namespace

// ---------------------------------------------------------------------------

void TrainConfig::validate() const
{
    if (epochs < 1)
        throw AeError("epochs must be >= 1");
    if (batch_size < 1)
        throw AeError("batch size must be >= 1");
    if (curriculum_epoch < 0 || curriculum_epoch >= epochs)
        throw AeError("curriculum epoch must lie in [0, epochs)");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw AeError("learning rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(adam_eps > 0.0))
        throw AeError("invalid Adam constants");
}

ConvAutoencoder::ConvAutoencoder(AeArchitecture arch) : _arch(std::move(arch))
{
    const auto& a = _arch;
    if (a.maps < 1 || a.latent < 1 || a.kernel_large < 1 || a.kernel_small < 1 || a.kernel_large % 2 == 0
        || a.kernel_small % 2 == 0)
        throw AeError("invalid autoencoder architecture");
    for (int w : a.fc_hidden)
        if (w < 1)
            throw AeError("invalid hidden width");

    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<int> shape) {
        std::size_t n = 1;
        for (int d : shape)
            n *= static_cast<std::size_t>(d);
        _blocks.push_back({std::move(name), std::move(shape), offset, n});
        offset += n;
    };
    const int m = a.maps, kl = a.kernel_large, ks = a.kernel_small;
    add("enc.conv1.w", {m, 1, kl, kl});
    add("enc.conv1.b", {m});
    add("enc.conv2.w", {m, m, ks, ks});
    add("enc.conv2.b", {m});
    int in = a.bottleneck();
    std::vector<int> enc_widths = a.fc_hidden;
    enc_widths.push_back(a.latent);
    for (std::size_t i = 0; i < enc_widths.size(); ++i) {
        add("enc.fc" + std::to_string(i + 1) + ".w", {enc_widths[i], in});
        add("enc.fc" + std::to_string(i + 1) + ".b", {enc_widths[i]});
        in = enc_widths[i];
    }
    std::vector<int> dec_widths(a.fc_hidden.rbegin(), a.fc_hidden.rend());
    dec_widths.push_back(a.bottleneck());
    for (std::size_t i = 0; i < dec_widths.size(); ++i) {
        add("dec.fc" + std::to_string(i + 1) + ".w", {dec_widths[i], in});
        add("dec.fc" + std::to_string(i + 1) + ".b", {dec_widths[i]});
        in = dec_widths[i];
    }
    // Transposed convolutions store weights as (in, out, k, k).
    add("dec.deconv1.w", {m, m, ks, ks});
    add("dec.deconv1.b", {m});
    add("dec.deconv2.w", {m, m, kl, kl});
    add("dec.deconv2.b", {m});
    add("dec.out.w", {1, m, ks, ks});
    add("dec.out.b", {1});
    _params.assign(offset, 0.0);
}

const ParamBlock& ConvAutoencoder::block(const std::string& name) const
{
    for (const auto& b : _blocks)
        if (b.name == name)
            return b;
    throw AeError("no parameter block " + name);
}

void ConvAutoencoder::init(std::uint64_t seed)
{
    Rng rng(seed);
    for (const auto& b : _blocks) {
        double* p = _params.data() + b.offset;
        if (b.shape.size() == 1) {
            std::fill(p, p + b.size, 0.0);
            continue;
        }
        // Fan-in: inputs feeding one output unit.
        double fan_in = 1.0;
        if (b.name.rfind("dec.deconv", 0) == 0)
            fan_in = static_cast<double>(b.shape[0]) * b.shape[2] * b.shape[3];
        else
            for (std::size_t i = 1; i < b.shape.size(); ++i)
                fan_in *= b.shape[i];
        const double sd = std::sqrt(2.0 / fan_in);
        for (std::size_t i = 0; i < b.size; ++i)
            p[i] = sd * rng.normal();
    }
}

std::string ConvAutoencoder::manifest() const
{
    std::ostringstream os;
    for (const auto& b : _blocks) {
        os << b.name;
        for (int d : b.shape)
            os << ' ' << d;
        os << '\n';
    }
    return os.str();
}

std::vector<TensorShape> forward_shapes(const AeArchitecture& a)
{
    const int m = a.maps;
    std::vector<TensorShape> s{{"input", 1, 28, 28}, {"enc.conv1", m, 28, 28}, {"enc.pool1", m, 14, 14},
        {"enc.conv2", m, 14, 14}, {"enc.pool2", m, 7, 7}};
    for (std::size_t i = 0; i < a.fc_hidden.size(); ++i)
        s.push_back({"enc.fc" + std::to_string(i + 1), a.fc_hidden[i], 1, 1});
    s.push_back({"latent", a.latent, 1, 1});
    for (std::size_t i = 0; i < a.fc_hidden.size(); ++i)
        s.push_back({"dec.fc" + std::to_string(i + 1), a.fc_hidden[a.fc_hidden.size() - 1 - i], 1, 1});
    s.push_back({"dec.fc" + std::to_string(a.fc_hidden.size() + 1), a.bottleneck(), 1, 1});
    s.push_back({"dec.reshape", m, 7, 7});
    s.push_back({"dec.deconv1", m, 7, 7});
    s.push_back({"dec.up1", m, 14, 14});
    s.push_back({"dec.deconv2", m, 14, 14});
    s.push_back({"dec.up2", m, 28, 28});
    s.push_back({"output", 1, 28, 28});
    return s;
}

// ---------------------------------------------------------------------------

struct ConvAutoencoder::Forward {
    int batch = 0;
    RowMat x0, a1, p1, a2, p2;
    std::vector<Eigen::Index> arg1, arg2;
    std::vector<Mat> fc_in;  ///< input of each FC layer (encoder then decoder)
    std::vector<Mat> fc_out; ///< activated output of each FC layer
    RowMat r0, adc1, u1, adc2, u2, out;
    std::size_t latent_layer = 0; ///< index in fc_out of the latent code
};

void ConvAutoencoder::forward(std::span<const Image28* const> batch, Forward& f) const
{
    const auto& a = _arch;
    const int m = a.maps, kl = a.kernel_large, ks = a.kernel_small;
    const int bs = static_cast<int>(batch.size());
    f.batch = bs;
    auto W = [&](const std::string& name, int rows, int cols) {
        return ConstRowMap(_params.data() + block(name).offset, rows, cols);
    };
    auto B = [&](const std::string& name, int n) { return ConstVecMap(_params.data() + block(name).offset, n); };

    f.x0.resize(1, 784 * static_cast<Eigen::Index>(bs));
    for (int b = 0; b < bs; ++b)
        std::copy(batch[static_cast<std::size_t>(b)]->pixels.begin(), batch[static_cast<std::size_t>(b)]->pixels.end(),
            f.x0.data() + static_cast<std::ptrdiff_t>(b) * 784);

    Workspace& ws = workspace(0);
    f.a1.noalias() = W("enc.conv1.w", m, kl * kl) * im2col(f.x0, 1, 28, 28, kl, bs, ws);
    f.a1.colwise() += B("enc.conv1.b", m);
    relu_inplace(f.a1);
    maxpool(f.a1, 28, 28, bs, f.p1, f.arg1);

    f.a2.noalias() = W("enc.conv2.w", m, m * ks * ks) * im2col(f.p1, m, 14, 14, ks, bs, ws);
    f.a2.colwise() += B("enc.conv2.b", m);
    relu_inplace(f.a2);
    maxpool(f.a2, 14, 14, bs, f.p2, f.arg2);

    const std::size_t n_enc = a.fc_hidden.size() + 1;
    const std::size_t n_fc = 2 * n_enc;
    f.fc_in.assign(n_fc, Mat());
    f.fc_out.assign(n_fc, Mat());
    f.latent_layer = n_enc - 1;
    Mat h = flatten(f.p2, 49, bs);
    for (std::size_t i = 0; i < n_fc; ++i) {
        const bool enc = i < n_enc;
        const std::string name = (enc ? "enc.fc" + std::to_string(i + 1) : "dec.fc" + std::to_string(i - n_enc + 1));
        const ParamBlock& wb = block(name + ".w");
        const int rows = wb.shape[0], in = wb.shape[1];
        f.fc_in[i] = h;
        Mat z = W(name + ".w", rows, in) * h;
        z.colwise() += B(name + ".b", rows);
        if (i == f.latent_layer)
            z = z.array().tanh().matrix();
        else
            relu_inplace(z);
        f.fc_out[i] = z;
        h = std::move(z);
    }

    f.r0 = unflatten(h, m, 49);
    RowMap dc1 = ws.view(m * ks * ks, f.r0.cols());
    dc1.noalias() = W("dec.deconv1.w", m, m * ks * ks).transpose() * f.r0;
    col2im(dc1, m, 7, 7, ks, bs, f.adc1);
    f.adc1.colwise() += B("dec.deconv1.b", m);
    relu_inplace(f.adc1);
    upsample(f.adc1, 7, 7, bs, f.u1);

    RowMap dc2 = ws.view(m * kl * kl, f.u1.cols());
    dc2.noalias() = W("dec.deconv2.w", m, m * kl * kl).transpose() * f.u1;
    col2im(dc2, m, 14, 14, kl, bs, f.adc2);
    f.adc2.colwise() += B("dec.deconv2.b", m);
    relu_inplace(f.adc2);
    upsample(f.adc2, 14, 14, bs, f.u2);

    f.out.noalias() = W("dec.out.w", 1, m * ks * ks) * im2col(f.u2, m, 28, 28, ks, bs, ws);
    f.out.array() += _params[block("dec.out.b").offset];
    f.out = (1.0 / (1.0 + (-f.out.array()).exp())).matrix();
}

std::vector<std::int64_t> ConvAutoencoder::activation_pattern(std::span<const Image28* const> batch) const
{
    if (batch.empty())
        throw AeError("empty batch");
    Forward f;
    forward(batch, f);
    std::vector<std::int64_t> out(f.arg1.begin(), f.arg1.end());
    out.insert(out.end(), f.arg2.begin(), f.arg2.end());
    auto bits = [&](const auto& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i)
            out.push_back(m.data()[i] > 0.0);
    };
    bits(f.a1);
    bits(f.a2);
    for (std::size_t i = 0; i < f.fc_out.size(); ++i)
        if (i != f.latent_layer)
            bits(f.fc_out[i]);
    bits(f.adc1);
    bits(f.adc2);
    return out;
}

double ConvAutoencoder::loss(std::span<const Image28* const> batch, std::vector<double>* grad) const
{
    if (batch.empty())
        throw AeError("empty batch");
    Forward f;
    forward(batch, f);
    const int bs = f.batch;
    const double n = 784.0 * bs;
    const RowMat diff = f.out - f.x0;
    const double value = diff.squaredNorm() / n;
    if (!grad)
        return value;

    const auto& a = _arch;
    const int m = a.maps, kl = a.kernel_large, ks = a.kernel_small;
    grad->assign(_params.size(), 0.0);
    auto GW = [&](const std::string& name, int rows, int cols) {
        return RowMap(grad->data() + block(name).offset, rows, cols);
    };
    auto GB = [&](const std::string& name, int len) { return VecMap(grad->data() + block(name).offset, len); };
    auto W = [&](const std::string& name, int rows, int cols) {
        return ConstRowMap(_params.data() + block(name).offset, rows, cols);
    };

    Workspace& ws = workspace(0);
    Workspace& dws = workspace(1);
    // Output conv + sigmoid.
    RowMat dz = ((2.0 / n) * diff.array() * f.out.array() * (1.0 - f.out.array())).matrix();
    GW("dec.out.w", 1, m * ks * ks).noalias() = dz * im2col(f.u2, m, 28, 28, ks, bs, ws).transpose();
    (*grad)[block("dec.out.b").offset] = dz.sum();
    RowMap dcols = dws.view(m * ks * ks, dz.cols());
    dcols.noalias() = W("dec.out.w", 1, m * ks * ks).transpose() * dz;
    RowMat du2;
    col2im(dcols, m, 28, 28, ks, bs, du2);

    // Upsample 2, deconv 2.
    RowMat dz_dc2;
    upsample_back(du2, 14, 14, bs, dz_dc2);
    relu_mask(dz_dc2, f.adc2);
    GB("dec.deconv2.b", m) = dz_dc2.rowwise().sum();
    const RowMap g2 = im2col(dz_dc2, m, 14, 14, kl, bs, dws);
    GW("dec.deconv2.w", m, m * kl * kl).noalias() = f.u1 * g2.transpose();
    RowMat du1 = W("dec.deconv2.w", m, m * kl * kl) * g2;

    // Upsample 1, deconv 1.
    RowMat dz_dc1;
    upsample_back(du1, 7, 7, bs, dz_dc1);
    relu_mask(dz_dc1, f.adc1);
    GB("dec.deconv1.b", m) = dz_dc1.rowwise().sum();
    const RowMap g1 = im2col(dz_dc1, m, 7, 7, ks, bs, dws);
    GW("dec.deconv1.w", m, m * ks * ks).noalias() = f.r0 * g1.transpose();
    RowMat dr0 = W("dec.deconv1.w", m, m * ks * ks) * g1;

    // Fully connected stack, top down.
    Mat dh = flatten(dr0, 49, bs);
    const std::size_t n_enc = a.fc_hidden.size() + 1;
    for (std::size_t i = 2 * n_enc; i-- > 0;) {
        const bool enc = i < n_enc;
        const std::string name = (enc ? "enc.fc" + std::to_string(i + 1) : "dec.fc" + std::to_string(i - n_enc + 1));
        const ParamBlock& wb = block(name + ".w");
        const int rows = wb.shape[0], in = wb.shape[1];
        Mat dzf = dh;
        if (i == f.latent_layer)
            dzf = (dzf.array() * (1.0 - f.fc_out[i].array().square())).matrix();
        else
            relu_mask(dzf, f.fc_out[i]);
        GW(name + ".w", rows, in).noalias() = dzf * f.fc_in[i].transpose();
        GB(name + ".b", rows) = dzf.rowwise().sum();
        dh.noalias() = W(name + ".w", rows, in).transpose() * dzf;
    }

    // Pool 2, conv 2.
    RowMat dp2 = unflatten(dh, m, 49);
    RowMat dz2;
    maxpool_back(dp2, f.arg2, f.a2.cols(), dz2);
    relu_mask(dz2, f.a2);
    GB("enc.conv2.b", m) = dz2.rowwise().sum();
    GW("enc.conv2.w", m, m * ks * ks).noalias() = dz2 * im2col(f.p1, m, 14, 14, ks, bs, ws).transpose();
    RowMap dc2 = dws.view(m * ks * ks, dz2.cols());
    dc2.noalias() = W("enc.conv2.w", m, m * ks * ks).transpose() * dz2;
    RowMat dp1;
    col2im(dc2, m, 14, 14, ks, bs, dp1);

    // Pool 1, conv 1.
    RowMat dz1;
    maxpool_back(dp1, f.arg1, f.a1.cols(), dz1);
    relu_mask(dz1, f.a1);
    GB("enc.conv1.b", m) = dz1.rowwise().sum();
    GW("enc.conv1.w", m, kl * kl).noalias() = dz1 * im2col(f.x0, 1, 28, 28, kl, bs, ws).transpose();
    return value;
}

std::vector<double> ConvAutoencoder::encode(const Image28& img) const
{
    const Image28* p = &img;
    Forward f;
    forward(std::span<const Image28* const>(&p, 1), f);
    const Mat& z = f.fc_out[f.latent_layer];
    std::vector<double> out(z.data(), z.data() + z.size());
    for (double v : out)
        if (!std::isfinite(v))
            throw AeError("non-finite latent activation");
    return out;
}

Image28 ConvAutoencoder::decode(std::span<const double> latent) const
{
    const auto& a = _arch;
    if (static_cast<int>(latent.size()) != a.latent)
        throw AeError("latent dimension mismatch");
    const int m = a.maps, kl = a.kernel_large, ks = a.kernel_small;
    auto W = [&](const std::string& name, int rows, int cols) {
        return ConstRowMap(_params.data() + block(name).offset, rows, cols);
    };
    auto B = [&](const std::string& name, int n) { return ConstVecMap(_params.data() + block(name).offset, n); };

    Mat h = Eigen::Map<const Eigen::VectorXd>(latent.data(), a.latent);
    const std::size_t n_dec = a.fc_hidden.size() + 1;
    for (std::size_t i = 0; i < n_dec; ++i) {
        const std::string name = "dec.fc" + std::to_string(i + 1);
        const ParamBlock& wb = block(name + ".w");
        Mat z = W(name + ".w", wb.shape[0], wb.shape[1]) * h;
        z.colwise() += B(name + ".b", wb.shape[0]);
        relu_inplace(z);
        h = std::move(z);
    }
    Workspace ws;
    RowMat r0 = unflatten(h, m, 49), x, u;
    RowMap dc1 = ws.view(m * ks * ks, r0.cols());
    dc1.noalias() = W("dec.deconv1.w", m, m * ks * ks).transpose() * r0;
    col2im(dc1, m, 7, 7, ks, 1, x);
    x.colwise() += B("dec.deconv1.b", m);
    relu_inplace(x);
    upsample(x, 7, 7, 1, u);
    RowMap dc2 = ws.view(m * kl * kl, u.cols());
    dc2.noalias() = W("dec.deconv2.w", m, m * kl * kl).transpose() * u;
    col2im(dc2, m, 14, 14, kl, 1, x);
    x.colwise() += B("dec.deconv2.b", m);
    relu_inplace(x);
    upsample(x, 14, 14, 1, u);
    RowMat out = W("dec.out.w", 1, m * ks * ks) * im2col(u, m, 28, 28, ks, 1, ws);
    const double bias = _params[block("dec.out.b").offset];
    Image28 img;
    for (std::size_t i = 0; i < kImagePixels; ++i)
        img.pixels[i] = 1.0 / (1.0 + std::exp(-(out(0, static_cast<Eigen::Index>(i)) + bias)));
    return img;
}

double ConvAutoencoder::reconstruction_error(const Image28& img) const
{
    const Image28* p = &img;
    return loss(std::span<const Image28* const>(&p, 1));
}

std::vector<double> ConvAutoencoder::reconstruction_errors(std::span<const Image28> images, int chunk) const
{
    std::vector<double> errs;
    errs.reserve(images.size());
    const std::size_t step = static_cast<std::size_t>(std::max(1, chunk));
    std::vector<const Image28*> ptrs;
    for (std::size_t s = 0; s < images.size(); s += step) {
        const std::size_t e = std::min(images.size(), s + step);
        ptrs.clear();
        for (std::size_t i = s; i < e; ++i)
            ptrs.push_back(&images[i]);
        Forward f;
        forward(ptrs, f);
        for (std::size_t i = 0; i < ptrs.size(); ++i) {
            const auto off = static_cast<Eigen::Index>(i * kImagePixels);
            errs.push_back((f.out.middleCols(off, 784) - f.x0.middleCols(off, 784)).squaredNorm() / 784.0);
        }
    }
    return errs;
}

// ---------------------------------------------------------------------------

void ConvAutoencoder::save(std::ostream& os) const
{
    os.write(kMagic, sizeof kMagic);
    write_u32(os, static_cast<std::uint32_t>(_arch.maps));
    write_u32(os, static_cast<std::uint32_t>(_arch.kernel_large));
    write_u32(os, static_cast<std::uint32_t>(_arch.kernel_small));
    write_u32(os, static_cast<std::uint32_t>(_arch.latent));
    write_u32(os, static_cast<std::uint32_t>(_arch.fc_hidden.size()));
    for (int w : _arch.fc_hidden)
        write_u32(os, static_cast<std::uint32_t>(w));
    write_u32(os, static_cast<std::uint32_t>(_blocks.size()));
    for (const auto& b : _blocks) {
        write_u32(os, static_cast<std::uint32_t>(b.name.size()));
        os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
        write_u32(os, static_cast<std::uint32_t>(b.shape.size()));
        for (int d : b.shape)
            write_u32(os, static_cast<std::uint32_t>(d));
    }
    // Parameters as little-endian float64 in block order.
    for (double v : _params) {
        std::uint64_t u;
        std::memcpy(&u, &v, 8);
        for (int i = 0; i < 8; ++i)
            os.put(static_cast<char>((u >> (8 * i)) & 0xff));
    }
    if (!os)
        throw AeError("checkpoint write failed");
}

void ConvAutoencoder::save(const std::string& path) const
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw AeError("cannot write " + path);
    save(os);
}

ConvAutoencoder ConvAutoencoder::load(std::istream& is)
{
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
        throw AeError("not an autoencoder checkpoint");
    AeArchitecture a;
    a.maps = static_cast<int>(read_u32(is));
    a.kernel_large = static_cast<int>(read_u32(is));
    a.kernel_small = static_cast<int>(read_u32(is));
    a.latent = static_cast<int>(read_u32(is));
    const std::uint32_t nh = read_u32(is);
    if (nh > 64)
        throw AeError("checkpoint: implausible layer count");
    a.fc_hidden.assign(nh, 0);
    for (auto& w : a.fc_hidden)
        w = static_cast<int>(read_u32(is));
    ConvAutoencoder net(a);
    const std::uint32_t nb = read_u32(is);
    if (nb != net._blocks.size())
        throw AeError("checkpoint: block count mismatch");
    for (const auto& b : net._blocks) {
        const std::uint32_t len = read_u32(is);
        if (len > 256)
            throw AeError("checkpoint: bad block name");
        std::string name(len, '\0');
        if (!is.read(name.data(), len))
            throw AeError("checkpoint truncated");
        const std::uint32_t nd = read_u32(is);
        if (name != b.name || nd != b.shape.size())
            throw AeError("checkpoint: manifest mismatch at " + b.name);
        for (int d : b.shape)
            if (read_u32(is) != static_cast<std::uint32_t>(d))
                throw AeError("checkpoint: shape mismatch at " + b.name);
    }
    for (double& v : net._params) {
        unsigned char bytes[8];
        if (!is.read(reinterpret_cast<char*>(bytes), 8))
            throw AeError("checkpoint truncated");
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i)
            u |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        std::memcpy(&v, &u, 8);
    }
    return net;
}

ConvAutoencoder ConvAutoencoder::load(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw AeError("cannot read " + path);
    return load(is);
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const ConvAutoencoder& net, std::span<const Image28* const> batch, double h, std::size_t samples, Rng& rng)
{
    GradCheckResult res;
    std::vector<double> grad;
    net.loss(batch, &grad);
    const std::vector<std::int64_t> pattern = net.activation_pattern(batch);
    ConvAutoencoder probe = net;
    auto& p = probe.params();
    const std::size_t n = p.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t k = 0; k < n && res.checked < samples; ++k) {
        std::swap(idx[k], idx[k + rng.below(n - k)]);
        const std::size_t i = idx[k];
        const double saved = p[i];
        p[i] = saved + h;
        const double up = probe.loss(batch);
        const bool smooth_up = probe.activation_pattern(batch) == pattern;
        p[i] = saved - h;
        const double down = probe.loss(batch);
        const bool smooth_down = probe.activation_pattern(batch) == pattern;
        p[i] = saved;
        if (!smooth_up || !smooth_down) {
            ++res.skipped;
            continue;
        }
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grad[i];
        const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
        const double rel = std::abs(numeric - analytic) / scale;
        ++res.checked;
        if (rel > res.max_relative_error || res.checked == 1) {
            res.max_relative_error = rel;
            res.worst_index = i;
            res.worst_analytic = analytic;
            res.worst_numeric = numeric;
        }
    }
    return res;
}

TrainResult train(ConvAutoencoder& net, std::vector<Image28> data, const TrainConfig& cfg,
    const std::function<void(const EpochLog&)>& sink)
{
    cfg.validate();
    if (data.empty())
        throw AeError("empty training set");
    TrainResult result;
    Rng rng(cfg.rng_seed);
    auto& params = net.params();
    std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0), grad;
    std::vector<std::size_t> order;
    std::vector<const Image28*> batch;
    long long step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        order.resize(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);

        for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t e = std::min(order.size(), s + static_cast<std::size_t>(cfg.batch_size));
            batch.clear();
            for (std::size_t i = s; i < e; ++i)
                batch.push_back(&data[order[i]]);
            const double l = net.loss(batch, &grad);
            if (!std::isfinite(l))
                throw AeError("training diverged at epoch " + std::to_string(epoch) + ", step " + std::to_string(step)
                    + ": loss is not finite");
            ++step;
            const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < params.size(); ++i) {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
            }
        }

        const std::vector<double> errs = net.reconstruction_errors(data);
        const double mean = std::accumulate(errs.begin(), errs.end(), 0.0) / static_cast<double>(errs.size());
        if (!std::isfinite(mean))
            throw AeError("training diverged at epoch " + std::to_string(epoch) + ": mean error is not finite");
        EpochLog log{epoch, data.size(), mean};
        result.log.push_back(log);
        if (sink)
            sink(log);

        if (epoch == cfg.curriculum_epoch) {
            CurriculumEvent ev;
            ev.size_before = data.size();
            ev.mean_before = mean;
            std::vector<Image28> kept;
            double kept_sum = 0.0;
            for (std::size_t i = 0; i < data.size(); ++i)
                if (errs[i] < mean) {
                    kept.push_back(data[i]);
                    kept_sum += errs[i];
                }
            if (!kept.empty()) {
                ev.mean_after = kept_sum / static_cast<double>(kept.size());
                data = std::move(kept);
            }
            else {
                ev.mean_after = mean;
            }
            ev.size_after = data.size();
            result.curriculum.push_back(ev);
        }
    }
    return result;
}

} // namespace hbr
