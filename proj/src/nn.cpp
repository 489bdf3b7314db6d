#include "ddce/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ddce/dft.hpp"

namespace ddce::nn {

Matrix activate(const Matrix& z, Activation a) {
    switch (a) {
        case Activation::Linear: return z;
        case Activation::ReLU: return z.cwiseMax(0.0);
        case Activation::Sigmoid: return ((-z.array()).exp() + 1.0).inverse().matrix();
        case Activation::Tanh: return z.array().tanh().matrix();
    }
    return z;
}

Matrix activate_deriv(const Matrix&, const Matrix& a, Activation act) {
    switch (act) {
        case Activation::Linear: return Matrix::Ones(a.rows(), a.cols());
        case Activation::ReLU: return (a.array() > 0.0).cast<double>().matrix();
        case Activation::Sigmoid: return (a.array() * (1.0 - a.array())).matrix();
        case Activation::Tanh: return (1.0 - a.array().square()).matrix();
    }
    return Matrix::Ones(a.rows(), a.cols());
}

long total_size(const std::vector<TensorRef>& refs) {
    long n = 0;
    for (const auto& r : refs) n += r.size;
    return n;
}

namespace {

void he_uniform(double* data, long n, long fan_in, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> uni(-limit, limit);
    for (long i = 0; i < n; ++i) data[i] = uni(rng);
}

}  // namespace

// ---------------------------------------------------------------- dense

Dense::Dense(int in, int out, Activation a) : n_in(in), n_out(out), act(a) {
    w = Matrix::Zero(out, in);
    b = Vector::Zero(out);
    gw = Matrix::Zero(out, in);
    gb = Vector::Zero(out);
}

void Dense::init_he(std::mt19937_64& rng) { he_uniform(w.data(), w.size(), n_in, rng); }

void Dense::zero_grads() {
    gw.setZero();
    gb.setZero();
}

Matrix Dense::forward(const Matrix& x) const {
    if (x.rows() != n_in) throw ShapeError("dense input dimension mismatch");
    Matrix z = w * x;
    z.colwise() += b;
    return activate(z, act);
}

Matrix Dense::forward_train(const Matrix& x, Cache& c) const {
    if (x.rows() != n_in) throw ShapeError("dense input dimension mismatch");
    c.x = x;
    c.z = w * x;
    c.z.colwise() += b;
    c.a = activate(c.z, act);
    return c.a;
}

Matrix Dense::backward(const Matrix& da, const Cache& c) {
    const Matrix dz = da.cwiseProduct(activate_deriv(c.z, c.a, act));
    gw.noalias() += dz * c.x.transpose();
    gb += dz.rowwise().sum();
    return w.transpose() * dz;
}

FnnNet::FnnNet(const std::vector<int>& dims, std::uint64_t seed) : dims_(dims) {
    if (dims.size() < 2) throw ConfigError("FNN needs at least input and output dims");
    std::mt19937_64 rng(mix_seed(seed ^ 0xFEEDF00DULL));
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        const bool last = l + 2 == dims.size();
        layers.emplace_back(dims[l], dims[l + 1], last ? Activation::Linear : Activation::ReLU);
        layers.back().init_he(rng);
    }
    // closed-form parameter count must match what was allocated
    long expect = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        expect += static_cast<long>(dims[l]) * dims[l + 1] + dims[l + 1];
    if (expect != n_params()) throw ConfigError("FNN parameter count mismatch");
}

FnnNet FnnNet::identity(int dim) {
    FnnNet net;
    net.dims_ = {dim, dim};
    net.layers.emplace_back(dim, dim, Activation::Linear);
    net.layers[0].w = Matrix::Identity(dim, dim);
    return net;
}

Matrix FnnNet::forward(const Matrix& x) const {
    Matrix a = x;
    for (const auto& l : layers) a = l.forward(a);
    return a;
}

std::vector<TensorRef> FnnNet::param_refs() {
    std::vector<TensorRef> r;
    for (auto& l : layers) {
        r.push_back({l.w.data(), l.w.size()});
        r.push_back({l.b.data(), l.b.size()});
    }
    return r;
}

std::vector<TensorRef> FnnNet::grad_refs() {
    std::vector<TensorRef> r;
    for (auto& l : layers) {
        r.push_back({l.gw.data(), l.gw.size()});
        r.push_back({l.gb.data(), l.gb.size()});
    }
    return r;
}

void FnnNet::zero_grads() {
    for (auto& l : layers) l.zero_grads();
}

long FnnNet::n_params() const {
    long n = 0;
    for (const auto& l : layers) n += l.w.size() + l.b.size();
    return n;
}

// ---------------------------------------------------------------- LSTM

LstmCell::LstmCell(int k_in_, int n_hidden_, std::uint64_t seed) : k_in(k_in_), n_hidden(n_hidden_) {
    std::mt19937_64 rng(mix_seed(seed ^ 0x15731ULL));
    wx = Matrix::Zero(4 * n_hidden, k_in);
    wh = Matrix::Zero(4 * n_hidden, n_hidden);
    b = Vector::Zero(4 * n_hidden);
    he_uniform(wx.data(), wx.size(), k_in, rng);
    he_uniform(wh.data(), wh.size(), n_hidden, rng);
    // open the forget gate at init so early gradients flow through time
    b.segment(n_hidden, n_hidden).setConstant(1.0);
    gwx = Matrix::Zero(wx.rows(), wx.cols());
    gwh = Matrix::Zero(wh.rows(), wh.cols());
    gb = Vector::Zero(b.size());
}

void LstmCell::zero_grads() {
    gwx.setZero();
    gwh.setZero();
    gb.setZero();
}

void LstmCell::State::reset(int p, int batch) {
    h = Matrix::Zero(p, batch);
    c = Matrix::Zero(p, batch);
}

void LstmCell::step(const Matrix& x, State& s) const {
    const int p = n_hidden;
    Matrix g = wx * x + wh * s.h;
    g.colwise() += b;
    const Matrix gi = activate(g.topRows(p), gate_act);
    const Matrix gf = activate(g.middleRows(p, p), gate_act);
    const Matrix gg = activate(g.middleRows(2 * p, p), cand_act);
    const Matrix go = activate(g.bottomRows(p), gate_act);
    s.c = gf.cwiseProduct(s.c) + gi.cwiseProduct(gg);
    s.h = go.cwiseProduct(activate(s.c, cand_act));
}

void LstmCell::step_train(const Matrix& x, State& s, Cache& cache) const {
    const int p = n_hidden;
    cache.x = x;
    cache.h_prev = s.h;
    cache.c_prev = s.c;
    Matrix g = wx * x + wh * s.h;
    g.colwise() += b;
    cache.gi = activate(g.topRows(p), gate_act);
    cache.gf = activate(g.middleRows(p, p), gate_act);
    cache.gg = activate(g.middleRows(2 * p, p), cand_act);
    cache.go = activate(g.bottomRows(p), gate_act);
    cache.c = cache.gf.cwiseProduct(s.c) + cache.gi.cwiseProduct(cache.gg);
    cache.tc = activate(cache.c, cand_act);
    s.c = cache.c;
    s.h = cache.go.cwiseProduct(cache.tc);
}

Matrix LstmCell::backward_step(Matrix& dh, Matrix& dc, const Cache& cache) {
    const int p = n_hidden;
    const Matrix dgo = dh.cwiseProduct(cache.tc);
    Matrix dct = dc + dh.cwiseProduct(cache.go)
                          .cwiseProduct(activate_deriv(cache.c, cache.tc, cand_act));
    const Matrix dgf = dct.cwiseProduct(cache.c_prev);
    const Matrix dgi = dct.cwiseProduct(cache.gg);
    const Matrix dgg = dct.cwiseProduct(cache.gi);

    Matrix dg(4 * p, dh.cols());
    dg.topRows(p) = dgi.cwiseProduct(activate_deriv(dgi, cache.gi, gate_act));
    dg.middleRows(p, p) = dgf.cwiseProduct(activate_deriv(dgf, cache.gf, gate_act));
    dg.middleRows(2 * p, p) = dgg.cwiseProduct(activate_deriv(dgg, cache.gg, cand_act));
    dg.bottomRows(p) = dgo.cwiseProduct(activate_deriv(dgo, cache.go, gate_act));

    gwx.noalias() += dg * cache.x.transpose();
    gwh.noalias() += dg * cache.h_prev.transpose();
    gb += dg.rowwise().sum();

    dc = dct.cwiseProduct(cache.gf);
    dh = wh.transpose() * dg;
    return wx.transpose() * dg;
}

LstmNet::LstmNet(int k_in, int n_hidden, int n_out, std::uint64_t seed)
    : cell(k_in, n_hidden, seed), n_out_(n_out) {
    if (n_out > n_hidden) throw ConfigError("LSTM readout wider than the hidden state");
}

LstmNet LstmNet::identity(int k_in, int n_hidden, int n_out) {
    if (n_out > k_in || k_in > n_hidden)
        throw ConfigError("identity LSTM requires n_out <= k_in <= n_hidden");
    LstmNet net(k_in, n_hidden, n_out, 0);
    auto& c = net.cell;
    c.gate_act = Activation::Linear;
    c.cand_act = Activation::Linear;
    c.wx.setZero();
    c.wh.setZero();
    c.b.setZero();
    // candidate block passes the input straight through; input and output
    // gates pinned to 1, forget gate to 0
    for (int i = 0; i < k_in; ++i) c.wx(2 * n_hidden + i, i) = 1.0;
    c.b.head(n_hidden).setConstant(1.0);
    c.b.tail(n_hidden).setConstant(1.0);
    return net;
}

LstmCell::State LstmNet::make_state(int batch) const {
    LstmCell::State s;
    s.reset(cell.n_hidden, batch);
    return s;
}

Matrix LstmNet::step(const Matrix& x, LstmCell::State& s) const {
    cell.step(x, s);
    return s.h.topRows(n_out_);
}

std::vector<TensorRef> LstmNet::param_refs() {
    return {{cell.wx.data(), cell.wx.size()},
            {cell.wh.data(), cell.wh.size()},
            {cell.b.data(), cell.b.size()}};
}

std::vector<TensorRef> LstmNet::grad_refs() {
    return {{cell.gwx.data(), cell.gwx.size()},
            {cell.gwh.data(), cell.gwh.size()},
            {cell.gb.data(), cell.gb.size()}};
}

void LstmNet::zero_grads() { cell.zero_grads(); }

long LstmNet::n_params() const { return cell.wx.size() + cell.wh.size() + cell.b.size(); }

LstmFnnNet::LstmFnnNet(int k_in, int n_hidden, const std::vector<int>& head_dims,
                       std::uint64_t seed)
    : cell(k_in, n_hidden, seed) {
    std::vector<int> dims = {n_hidden};
    dims.insert(dims.end(), head_dims.begin(), head_dims.end());
    head = FnnNet(dims, mix_seed(seed + 1));
}

LstmFnnNet LstmFnnNet::identity(int k_in, int n_hidden, int n_out) {
    LstmFnnNet net;
    LstmNet inner = LstmNet::identity(k_in, n_hidden, n_out);
    net.cell = inner.cell;
    net.head.layers.emplace_back(n_hidden, n_out, Activation::Linear);
    net.head.layers[0].w.leftCols(n_out).setIdentity();
    return net;
}

LstmCell::State LstmFnnNet::make_state(int batch) const {
    LstmCell::State s;
    s.reset(cell.n_hidden, batch);
    return s;
}

Matrix LstmFnnNet::step(const Matrix& x, LstmCell::State& s) const {
    cell.step(x, s);
    return head.forward(s.h);
}

std::vector<TensorRef> LstmFnnNet::param_refs() {
    std::vector<TensorRef> r = {{cell.wx.data(), cell.wx.size()},
                                {cell.wh.data(), cell.wh.size()},
                                {cell.b.data(), cell.b.size()}};
    for (auto& t : head.param_refs()) r.push_back(t);
    return r;
}

std::vector<TensorRef> LstmFnnNet::grad_refs() {
    std::vector<TensorRef> r = {{cell.gwx.data(), cell.gwx.size()},
                                {cell.gwh.data(), cell.gwh.size()},
                                {cell.gb.data(), cell.gb.size()}};
    for (auto& t : head.grad_refs()) r.push_back(t);
    return r;
}

void LstmFnnNet::zero_grads() {
    cell.zero_grads();
    head.zero_grads();
}

long LstmFnnNet::n_params() const {
    return cell.wx.size() + cell.wh.size() + cell.b.size() + head.n_params();
}

// ---------------------------------------------------------------- conv

Conv2D::Conv2D(int kh_, int kw_, int cin, int cout, Activation a, bool bn, std::mt19937_64& rng)
    : kh(kh_), kw(kw_), c_in(cin), c_out(cout), act(a), has_bn(bn) {
    if (kh % 2 == 0 || kw % 2 == 0) throw ConfigError("conv kernels must be odd-sized");
    w = Matrix::Zero(cin * kh * kw, cout);
    b = Vector::Zero(cout);
    he_uniform(w.data(), w.size(), static_cast<long>(cin) * kh * kw, rng);
    gw = Matrix::Zero(w.rows(), w.cols());
    gb = Vector::Zero(cout);
    if (bn) {
        bn_gamma = Vector::Ones(cout);
        bn_beta = Vector::Zero(cout);
        bn_rmean = Vector::Zero(cout);
        bn_rvar = Vector::Ones(cout);
        bn_ggamma = Vector::Zero(cout);
        bn_gbeta = Vector::Zero(cout);
    }
}

void Conv2D::zero_grads() {
    gw.setZero();
    gb.setZero();
    if (has_bn) {
        bn_ggamma.setZero();
        bn_gbeta.setZero();
    }
}

void im2col(const Matrix& img, int h, int w, int kh, int kw, Matrix& out) {
    const int c = static_cast<int>(img.cols());
    const int ph = kh / 2, pw = kw / 2;
    out.resize(static_cast<long>(h) * w, static_cast<long>(c) * kh * kw);
    out.setZero();
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                const long col = static_cast<long>(ch) * kh * kw + i * kw + j;
                const int dr = i - ph, dc = j - pw;
                const int r0 = std::max(0, -dr), r1 = std::min(h, h - dr);
                const int c0 = std::max(0, -dc), c1 = std::min(w, w - dc);
                for (int cc = c0; cc < c1; ++cc)
                    out.col(col).segment(static_cast<long>(cc) * h + r0, r1 - r0) =
                        img.col(ch).segment(static_cast<long>(cc + dc) * h + r0 + dr, r1 - r0);
            }
}

void col2im(const Matrix& cols, int h, int w, int kh, int kw, Matrix& img) {
    const int c = static_cast<int>(cols.cols()) / (kh * kw);
    const int ph = kh / 2, pw = kw / 2;
    img = Matrix::Zero(static_cast<long>(h) * w, c);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < kh; ++i)
            for (int j = 0; j < kw; ++j) {
                const long col = static_cast<long>(ch) * kh * kw + i * kw + j;
                const int dr = i - ph, dc = j - pw;
                const int r0 = std::max(0, -dr), r1 = std::min(h, h - dr);
                const int c0 = std::max(0, -dc), c1 = std::min(w, w - dc);
                for (int cc = c0; cc < c1; ++cc)
                    img.col(ch).segment(static_cast<long>(cc + dc) * h + r0 + dr, r1 - r0) +=
                        cols.col(col).segment(static_cast<long>(cc) * h + r0, r1 - r0);
            }
}

CnnNet::CnnNet(const std::vector<LayerSpec>& specs, int in_channels, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed ^ 0xC0117ULL));
    int cin = in_channels;
    for (const auto& s : specs) {
        layers.emplace_back(s.kernel, s.kernel, cin, s.maps, s.act, s.batchnorm, rng);
        cin = s.maps;
    }
}

CnnNet CnnNet::srcnn(int f1, int f2, std::uint64_t seed) {
    return CnnNet({{9, f1, false, Activation::ReLU},
                   {1, f2, false, Activation::ReLU},
                   {5, 1, false, Activation::Linear}},
                  1, seed);
}

CnnNet CnnNet::dncnn(int depth, int maps, std::uint64_t seed) {
    std::vector<LayerSpec> specs;
    specs.push_back({3, maps, false, Activation::ReLU});
    for (int i = 0; i < depth - 2; ++i) specs.push_back({3, maps, true, Activation::ReLU});
    specs.push_back({3, 1, false, Activation::Linear});
    return CnnNet(specs, 1, seed);
}

CnnNet CnnNet::identity_srcnn(int f1, int f2) {
    CnnNet net = srcnn(f1, f2, 0);
    for (auto& l : net.layers) {
        l.act = Activation::Linear;
        l.w.setZero();
        l.b.setZero();
        // center tap routes channel 0 through
        l.w(0 * l.kh * l.kw + (l.kh / 2) * l.kw + l.kw / 2, 0) = 1.0;
    }
    return net;
}

CnnNet CnnNet::zero_like(const CnnNet& other) {
    CnnNet net = other;
    for (auto& l : net.layers) {
        l.w.setZero();
        l.b.setZero();
        if (l.has_bn) {
            l.bn_gamma.setOnes();
            l.bn_beta.setZero();
            l.bn_rmean.setZero();
            l.bn_rvar.setOnes();
        }
    }
    return net;
}

Matrix CnnNet::forward(const Matrix& img, int h, int w) const {
    if (img.rows() != static_cast<long>(h) * w) throw ShapeError("image pixel count mismatch");
    Matrix a = img, cols;
    for (const auto& l : layers) {
        if (a.cols() != l.c_in) throw ShapeError("conv input channel mismatch");
        im2col(a, h, w, l.kh, l.kw, cols);
        Matrix z = cols * l.w;
        z.rowwise() += l.b.transpose();
        if (l.has_bn) {
            for (int f = 0; f < l.c_out; ++f) {
                const double s = std::sqrt(l.bn_rvar(f) + l.bn_eps);
                z.col(f) = (z.col(f).array() - l.bn_rmean(f)) / s * l.bn_gamma(f) + l.bn_beta(f);
            }
        }
        a = activate(z, l.act);
    }
    return a;
}

double CnnNet::sample_backward(const Matrix& img, const Matrix& target, int h, int w,
                               double loss_scale) {
    return batch_backward_impl({&img}, {&target}, h, w, loss_scale);
}

double CnnNet::batch_backward(const std::vector<const Matrix*>& imgs,
                              const std::vector<const Matrix*>& targets, int h, int w) {
    const long elems = static_cast<long>(imgs.size()) * targets[0]->size();
    return batch_backward_impl(imgs, targets, h, w, 2.0 / static_cast<double>(elems));
}

double CnnNet::batch_backward_impl(const std::vector<const Matrix*>& imgs,
                                   const std::vector<const Matrix*>& targets, int h, int w,
                                   double loss_scale) {
    const int nb = static_cast<int>(imgs.size());
    const int nl = static_cast<int>(layers.size());
    const long px = static_cast<long>(h) * w;

    // forward, layer by layer across the batch so batchnorm sees batch stats
    std::vector<std::vector<Matrix>> acts(nl + 1, std::vector<Matrix>(nb));
    std::vector<std::vector<Matrix>> zs(nl, std::vector<Matrix>(nb));
    std::vector<Vector> mu(nl), sd(nl);
    Matrix cols;
    for (int s = 0; s < nb; ++s) acts[0][s] = *imgs[s];
    for (int l = 0; l < nl; ++l) {
        auto& lay = layers[l];
        for (int s = 0; s < nb; ++s) {
            im2col(acts[l][s], h, w, lay.kh, lay.kw, cols);
            zs[l][s].noalias() = cols * lay.w;
            zs[l][s].rowwise() += lay.b.transpose();
        }
        if (lay.has_bn) {
            mu[l] = Vector::Zero(lay.c_out);
            Vector var = Vector::Zero(lay.c_out);
            const double n = static_cast<double>(px * nb);
            for (int s = 0; s < nb; ++s) mu[l] += zs[l][s].colwise().sum().transpose();
            mu[l] /= n;
            for (int s = 0; s < nb; ++s)
                var += (zs[l][s].rowwise() - mu[l].transpose()).colwise().squaredNorm().transpose();
            var /= n;
            sd[l] = (var.array() + lay.bn_eps).sqrt();
            if (train_mode_) {
                lay.bn_rmean = lay.bn_momentum * lay.bn_rmean + (1.0 - lay.bn_momentum) * mu[l];
                lay.bn_rvar = lay.bn_momentum * lay.bn_rvar + (1.0 - lay.bn_momentum) * var;
            }
            for (int s = 0; s < nb; ++s) {
                Matrix y = zs[l][s];
                for (int f = 0; f < lay.c_out; ++f)
                    y.col(f) = (y.col(f).array() - mu[l](f)) / sd[l](f) * lay.bn_gamma(f) +
                               lay.bn_beta(f);
                acts[l + 1][s] = activate(y, lay.act);
            }
        } else {
            for (int s = 0; s < nb; ++s) acts[l + 1][s] = activate(zs[l][s], lay.act);
        }
    }

    // loss and output gradient
    double se = 0.0;
    std::vector<Matrix> da(nb);
    for (int s = 0; s < nb; ++s) {
        const Matrix diff = acts[nl][s] - *targets[s];
        se += diff.squaredNorm();
        da[s] = loss_scale * diff;
    }

    // backward
    for (int l = nl - 1; l >= 0; --l) {
        auto& lay = layers[l];
        std::vector<Matrix> dz(nb);
        if (lay.has_bn) {
            const double n = static_cast<double>(px * nb);
            Matrix sum_dy = Matrix::Zero(1, lay.c_out);
            Matrix sum_dyx = Matrix::Zero(1, lay.c_out);
            std::vector<Matrix> dy(nb), xhat(nb);
            for (int s = 0; s < nb; ++s) {
                xhat[s] = zs[l][s];
                for (int f = 0; f < lay.c_out; ++f)
                    xhat[s].col(f) = (xhat[s].col(f).array() - mu[l](f)) / sd[l](f);
                dy[s] = da[s].cwiseProduct(activate_deriv(zs[l][s], acts[l + 1][s], lay.act));
                sum_dy += dy[s].colwise().sum();
                sum_dyx += dy[s].cwiseProduct(xhat[s]).colwise().sum();
            }
            lay.bn_ggamma += sum_dyx.transpose();
            lay.bn_gbeta += sum_dy.transpose();
            for (int s = 0; s < nb; ++s) {
                dz[s].resize(px, lay.c_out);
                for (int f = 0; f < lay.c_out; ++f) {
                    const double g = lay.bn_gamma(f) / (n * sd[l](f));
                    dz[s].col(f) = g * (n * dy[s].col(f).array() - sum_dy(0, f) -
                                        xhat[s].col(f).array() * sum_dyx(0, f));
                }
            }
        } else {
            for (int s = 0; s < nb; ++s)
                dz[s] = da[s].cwiseProduct(activate_deriv(zs[l][s], acts[l + 1][s], lay.act));
        }
        for (int s = 0; s < nb; ++s) {
            im2col(acts[l][s], h, w, lay.kh, lay.kw, cols);
            lay.gw.noalias() += cols.transpose() * dz[s];
            lay.gb += dz[s].colwise().sum().transpose();
            if (l > 0) {
                const Matrix dcols = dz[s] * lay.w.transpose();
                col2im(dcols, h, w, lay.kh, lay.kw, da[s]);
            }
        }
    }
    return se;
}

std::vector<TensorRef> CnnNet::param_refs() {
    std::vector<TensorRef> r;
    for (auto& l : layers) {
        r.push_back({l.w.data(), l.w.size()});
        r.push_back({l.b.data(), l.b.size()});
        if (l.has_bn) {
            r.push_back({l.bn_gamma.data(), l.bn_gamma.size()});
            r.push_back({l.bn_beta.data(), l.bn_beta.size()});
        }
    }
    return r;
}

std::vector<TensorRef> CnnNet::grad_refs() {
    std::vector<TensorRef> r;
    for (auto& l : layers) {
        r.push_back({l.gw.data(), l.gw.size()});
        r.push_back({l.gb.data(), l.gb.size()});
        if (l.has_bn) {
            r.push_back({l.bn_ggamma.data(), l.bn_ggamma.size()});
            r.push_back({l.bn_gbeta.data(), l.bn_gbeta.size()});
        }
    }
    return r;
}

void CnnNet::zero_grads() {
    for (auto& l : layers) l.zero_grads();
}

long CnnNet::n_params() const {
    long n = 0;
    for (const auto& l : layers) {
        n += l.w.size() + l.b.size();
        if (l.has_bn) n += l.bn_gamma.size() + l.bn_beta.size();
    }
    return n;
}

// ---------------------------------------------------------------- ConvLSTM

ConvLstmCell::ConvLstmCell(int kh_, int kw_, int cin, int chidden, std::mt19937_64& rng)
    : kh(kh_), kw(kw_), c_in(cin), c_hidden(chidden) {
    wx = Matrix::Zero(cin * kh * kw, 4 * chidden);
    wh = Matrix::Zero(chidden * kh * kw, 4 * chidden);
    b = Vector::Zero(4 * chidden);
    he_uniform(wx.data(), wx.size(), static_cast<long>(cin) * kh * kw, rng);
    he_uniform(wh.data(), wh.size(), static_cast<long>(chidden) * kh * kw, rng);
    b.segment(chidden, chidden).setConstant(1.0);  // forget gate open at init
    gwx = Matrix::Zero(wx.rows(), wx.cols());
    gwh = Matrix::Zero(wh.rows(), wh.cols());
    gb = Vector::Zero(b.size());
}

void ConvLstmCell::zero_grads() {
    gwx.setZero();
    gwh.setZero();
    gb.setZero();
}

void ConvLstmCell::State::reset(int pixels, int f) {
    h = Matrix::Zero(pixels, f);
    c = Matrix::Zero(pixels, f);
}

void ConvLstmCell::step(const Matrix& x, int h, int w, State& s) const {
    const int f = c_hidden;
    Matrix xcols, hcols;
    im2col(x, h, w, kh, kw, xcols);
    im2col(s.h, h, w, kh, kw, hcols);
    Matrix g = xcols * wx + hcols * wh;
    g.rowwise() += b.transpose();
    const Matrix gi = activate(g.leftCols(f), gate_act);
    const Matrix gf = activate(g.middleCols(f, f), gate_act);
    const Matrix gg = activate(g.middleCols(2 * f, f), cand_act);
    const Matrix go = activate(g.rightCols(f), gate_act);
    s.c = gf.cwiseProduct(s.c) + gi.cwiseProduct(gg);
    s.h = go.cwiseProduct(activate(s.c, cand_act));
}

void ConvLstmCell::step_train(const Matrix& x, int h, int w, State& s, Cache& cache) const {
    const int f = c_hidden;
    im2col(x, h, w, kh, kw, cache.xcols);
    im2col(s.h, h, w, kh, kw, cache.hcols);
    cache.c_prev = s.c;
    Matrix g = cache.xcols * wx + cache.hcols * wh;
    g.rowwise() += b.transpose();
    cache.gi = activate(g.leftCols(f), gate_act);
    cache.gf = activate(g.middleCols(f, f), gate_act);
    cache.gg = activate(g.middleCols(2 * f, f), cand_act);
    cache.go = activate(g.rightCols(f), gate_act);
    cache.c = cache.gf.cwiseProduct(s.c) + cache.gi.cwiseProduct(cache.gg);
    cache.tc = activate(cache.c, cand_act);
    s.c = cache.c;
    s.h = cache.go.cwiseProduct(cache.tc);
}

Matrix ConvLstmCell::backward_step(Matrix& dh, Matrix& dc, const Cache& cache, int h, int w) {
    const int f = c_hidden;
    const Matrix dgo = dh.cwiseProduct(cache.tc);
    Matrix dct = dc + dh.cwiseProduct(cache.go)
                          .cwiseProduct(activate_deriv(cache.c, cache.tc, cand_act));
    const Matrix dgf = dct.cwiseProduct(cache.c_prev);
    const Matrix dgi = dct.cwiseProduct(cache.gg);
    const Matrix dgg = dct.cwiseProduct(cache.gi);

    Matrix dg(dh.rows(), 4 * f);
    dg.leftCols(f) = dgi.cwiseProduct(activate_deriv(dgi, cache.gi, gate_act));
    dg.middleCols(f, f) = dgf.cwiseProduct(activate_deriv(dgf, cache.gf, gate_act));
    dg.middleCols(2 * f, f) = dgg.cwiseProduct(activate_deriv(dgg, cache.gg, cand_act));
    dg.rightCols(f) = dgo.cwiseProduct(activate_deriv(dgo, cache.go, gate_act));

    gwx.noalias() += cache.xcols.transpose() * dg;
    gwh.noalias() += cache.hcols.transpose() * dg;
    gb += dg.colwise().sum().transpose();

    dc = dct.cwiseProduct(cache.gf);
    const Matrix dhcols = dg * wh.transpose();
    col2im(dhcols, h, w, kh, kw, dh);
    const Matrix dxcols = dg * wx.transpose();
    Matrix dx;
    col2im(dxcols, h, w, kh, kw, dx);
    return dx;
}

ConvLstmNet::ConvLstmNet(const std::vector<LayerSpec>& specs, int in_channels, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed ^ 0xC10C7ULL));
    int cin = in_channels;
    for (const auto& s : specs) {
        cells.emplace_back(s.kernel, 1, cin, s.maps, rng);
        cin = s.maps;
    }
}

ConvLstmNet ConvLstmNet::identity(const std::vector<LayerSpec>& specs) {
    ConvLstmNet net(specs, 1, 0);
    for (auto& c : net.cells) {
        c.gate_act = Activation::Linear;
        c.cand_act = Activation::Linear;
        c.wx.setZero();
        c.wh.setZero();
        c.b.setZero();
        const int f = c.c_hidden;
        // candidate center tap routes channel 0; input and output gates pinned to 1
        c.wx((c.kh / 2) * c.kw + c.kw / 2, 2 * f) = 1.0;
        c.b.head(f).setConstant(1.0);
        c.b.tail(f).setConstant(1.0);
    }
    return net;
}

std::vector<Matrix> ConvLstmNet::forward(const std::vector<Matrix>& xs, int h, int w) const {
    std::vector<Matrix> cur = xs;
    const long px = static_cast<long>(h) * w;
    for (const auto& cell : cells) {
        ConvLstmCell::State s;
        s.reset(px, cell.c_hidden);
        for (auto& x : cur) {
            cell.step(x, h, w, s);
            x = s.h;
        }
    }
    return cur;
}

std::vector<TensorRef> ConvLstmNet::param_refs() {
    std::vector<TensorRef> r;
    for (auto& c : cells) {
        r.push_back({c.wx.data(), c.wx.size()});
        r.push_back({c.wh.data(), c.wh.size()});
        r.push_back({c.b.data(), c.b.size()});
    }
    return r;
}

std::vector<TensorRef> ConvLstmNet::grad_refs() {
    std::vector<TensorRef> r;
    for (auto& c : cells) {
        r.push_back({c.gwx.data(), c.gwx.size()});
        r.push_back({c.gwh.data(), c.gwh.size()});
        r.push_back({c.gb.data(), c.gb.size()});
    }
    return r;
}

void ConvLstmNet::zero_grads() {
    for (auto& c : cells) c.zero_grads();
}

long ConvLstmNet::n_params() const {
    long n = 0;
    for (const auto& c : cells) n += c.wx.size() + c.wh.size() + c.b.size();
    return n;
}

// ---------------------------------------------------------------- training

Adam::Adam(long n, double lr, double beta1, double beta2, double eps)
    : m_(Vector::Zero(n)), v_(Vector::Zero(n)), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::step(const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(b1_, t_);
    const double bc2 = 1.0 - std::pow(b2_, t_);
    long off = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* p = params[i].data;
        const double* g = grads[i].data;
        for (long j = 0; j < params[i].size; ++j) {
            double& m = m_(off + j);
            double& v = v_(off + j);
            m = b1_ * m + (1.0 - b1_) * g[j];
            v = b2_ * v + (1.0 - b2_) * g[j] * g[j];
            p[j] -= lr_ * (m / bc1) / (std::sqrt(v / bc2) + eps_);
        }
        off += params[i].size;
    }
}

std::vector<double> train(TrainableModel& model, const TrainConfig& cfg) {
    const long n = model.n_samples();
    if (n == 0) throw ConfigError("training dataset is empty");
    Adam adam(total_size(model.param_refs()), cfg.learning_rate);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> history;
    history.reserve(cfg.epochs);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0x7A17ULL, epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double se = 0.0;
        long elems = 0;
        for (long start = 0; start < n; start += cfg.batch_size) {
            const long bs = std::min<long>(cfg.batch_size, n - start);
            std::vector<int> idx(order.begin() + start, order.begin() + start + bs);
            model.zero_grads();
            auto [bse, belems] = model.batch_backward(idx);
            se += bse;
            elems += belems;
            adam.step(model.param_refs(), model.grad_refs());
        }
        const double loss = se / static_cast<double>(elems);
        if (!std::isfinite(loss))
            throw TrainingDivergence(epoch, "non-finite loss at epoch " + std::to_string(epoch));
        history.push_back(loss);
    }
    return history;
}

DenseRegression::DenseRegression(FnnNet& net, Matrix inputs, Matrix targets)
    : net_(net), inputs_(std::move(inputs)), targets_(std::move(targets)) {
    if (inputs_.cols() != targets_.cols()) throw ShapeError("inputs/targets sample mismatch");
}

std::pair<double, long> DenseRegression::batch_backward(const std::vector<int>& idx) {
    const long bs = static_cast<long>(idx.size());
    Matrix x(inputs_.rows(), bs), t(targets_.rows(), bs);
    for (long j = 0; j < bs; ++j) {
        x.col(j) = inputs_.col(idx[j]);
        t.col(j) = targets_.col(idx[j]);
    }
    std::vector<Dense::Cache> caches(net_.layers.size());
    Matrix a = x;
    for (std::size_t l = 0; l < net_.layers.size(); ++l)
        a = net_.layers[l].forward_train(a, caches[l]);
    const Matrix diff = a - t;
    const double se = diff.squaredNorm();
    const long elems = diff.size();
    Matrix da = (2.0 / static_cast<double>(elems)) * diff;
    for (int l = static_cast<int>(net_.layers.size()) - 1; l >= 0; --l)
        da = net_.layers[l].backward(da, caches[l]);
    return {se, elems};
}

LstmSequenceRegression::LstmSequenceRegression(LstmNet& net, std::vector<Matrix> seq_inputs,
                                               std::vector<Matrix> seq_targets)
    : net_(net), seq_inputs_(std::move(seq_inputs)), seq_targets_(std::move(seq_targets)) {
    if (seq_inputs_.size() != seq_targets_.size()) throw ShapeError("sequence count mismatch");
}

std::pair<double, long> LstmSequenceRegression::batch_backward(const std::vector<int>& idx) {
    const long bs = static_cast<long>(idx.size());
    const int t_len = static_cast<int>(seq_inputs_[idx[0]].cols());
    const int k_in = net_.cell.k_in;
    const int p = net_.cell.n_hidden;
    const int n_out = net_.n_out();

    LstmCell::State s;
    s.reset(p, static_cast<int>(bs));
    std::vector<LstmCell::Cache> caches(t_len);
    Matrix x(k_in, bs);
    double se = 0.0;
    long elems = 0;
    std::vector<Matrix> douts(t_len);
    const double scale = 2.0 / (static_cast<double>(bs) * t_len * n_out);
    for (int t = 0; t < t_len; ++t) {
        for (long j = 0; j < bs; ++j) x.col(j) = seq_inputs_[idx[j]].col(t);
        net_.cell.step_train(x, s, caches[t]);
        Matrix diff(n_out, bs);
        for (long j = 0; j < bs; ++j)
            diff.col(j) = s.h.topRows(n_out).col(j) - seq_targets_[idx[j]].col(t);
        se += diff.squaredNorm();
        elems += diff.size();
        douts[t] = scale * diff;
    }

    Matrix dh = Matrix::Zero(p, bs), dc = Matrix::Zero(p, bs);
    for (int t = t_len - 1; t >= 0; --t) {
        dh.topRows(n_out) += douts[t];
        net_.cell.backward_step(dh, dc, caches[t]);
    }
    return {se, elems};
}

LstmFnnSequenceRegression::LstmFnnSequenceRegression(LstmFnnNet& net,
                                                     std::vector<Matrix> seq_inputs,
                                                     std::vector<Matrix> seq_targets)
    : net_(net), seq_inputs_(std::move(seq_inputs)), seq_targets_(std::move(seq_targets)) {
    if (seq_inputs_.size() != seq_targets_.size()) throw ShapeError("sequence count mismatch");
}

std::pair<double, long> LstmFnnSequenceRegression::batch_backward(const std::vector<int>& idx) {
    const long bs = static_cast<long>(idx.size());
    const int t_len = static_cast<int>(seq_inputs_[idx[0]].cols());
    const int k_in = net_.cell.k_in;
    const int p = net_.cell.n_hidden;
    const int n_out = net_.head.layers.back().n_out;

    LstmCell::State s;
    s.reset(p, static_cast<int>(bs));
    std::vector<LstmCell::Cache> caches(t_len);
    std::vector<std::vector<Dense::Cache>> head_caches(t_len);
    Matrix x(k_in, bs);
    double se = 0.0;
    long elems = 0;
    std::vector<Matrix> douts(t_len);
    const double scale = 2.0 / (static_cast<double>(bs) * t_len * n_out);
    for (int t = 0; t < t_len; ++t) {
        for (long j = 0; j < bs; ++j) x.col(j) = seq_inputs_[idx[j]].col(t);
        net_.cell.step_train(x, s, caches[t]);
        head_caches[t].resize(net_.head.layers.size());
        Matrix a = s.h;
        for (std::size_t l = 0; l < net_.head.layers.size(); ++l)
            a = net_.head.layers[l].forward_train(a, head_caches[t][l]);
        Matrix diff(n_out, bs);
        for (long j = 0; j < bs; ++j) diff.col(j) = a.col(j) - seq_targets_[idx[j]].col(t);
        se += diff.squaredNorm();
        elems += diff.size();
        douts[t] = scale * diff;
    }

    Matrix dh = Matrix::Zero(p, bs), dc = Matrix::Zero(p, bs);
    for (int t = t_len - 1; t >= 0; --t) {
        Matrix da = douts[t];
        for (int l = static_cast<int>(net_.head.layers.size()) - 1; l >= 0; --l)
            da = net_.head.layers[l].backward(da, head_caches[t][l]);
        dh += da;
        net_.cell.backward_step(dh, dc, caches[t]);
    }
    return {se, elems};
}

CnnRegression::CnnRegression(CnnNet& net, std::vector<Matrix> images, std::vector<Matrix> targets,
                             int h, int w)
    : net_(net), images_(std::move(images)), targets_(std::move(targets)), h_(h), w_(w) {
    if (images_.size() != targets_.size()) throw ShapeError("images/targets count mismatch");
    net_.set_train_mode(true);
}

std::pair<double, long> CnnRegression::batch_backward(const std::vector<int>& idx) {
    std::vector<const Matrix*> imgs, tgts;
    long elems = 0;
    for (int i : idx) {
        imgs.push_back(&images_[i]);
        tgts.push_back(&targets_[i]);
        elems += targets_[i].size();
    }
    const double se = net_.batch_backward(imgs, tgts, h_, w_);
    return {se, elems};
}

ConvLstmSequenceRegression::ConvLstmSequenceRegression(ConvLstmNet& net,
                                                       std::vector<std::vector<Matrix>> seqs,
                                                       std::vector<std::vector<Matrix>> targets,
                                                       int h, int w)
    : net_(net), seqs_(std::move(seqs)), targets_(std::move(targets)), h_(h), w_(w) {
    if (seqs_.size() != targets_.size()) throw ShapeError("sequence count mismatch");
}

std::pair<double, long> ConvLstmSequenceRegression::batch_backward(const std::vector<int>& idx) {
    const long px = static_cast<long>(h_) * w_;
    const int nl = static_cast<int>(net_.cells.size());
    double se = 0.0;
    long elems = 0;
    for (int sample : idx) {
        const auto& xs = seqs_[sample];
        const auto& ts = targets_[sample];
        const int t_len = static_cast<int>(xs.size());
        std::vector<std::vector<ConvLstmCell::Cache>> caches(
            nl, std::vector<ConvLstmCell::Cache>(t_len));
        std::vector<Matrix> cur(t_len);
        for (int t = 0; t < t_len; ++t) cur[t] = xs[t];
        for (int l = 0; l < nl; ++l) {
            ConvLstmCell::State s;
            s.reset(px, net_.cells[l].c_hidden);
            for (int t = 0; t < t_len; ++t) {
                net_.cells[l].step_train(cur[t], h_, w_, s, caches[l][t]);
                cur[t] = s.h;
            }
        }
        const double scale = 2.0 / (static_cast<double>(idx.size()) * t_len * ts[0].size());
        std::vector<Matrix> dout(t_len);
        for (int t = 0; t < t_len; ++t) {
            const Matrix diff = cur[t] - ts[t];
            se += diff.squaredNorm();
            elems += diff.size();
            dout[t] = scale * diff;
        }
        for (int l = nl - 1; l >= 0; --l) {
            Matrix dh = Matrix::Zero(px, net_.cells[l].c_hidden);
            Matrix dc = Matrix::Zero(px, net_.cells[l].c_hidden);
            std::vector<Matrix> dx(t_len);
            for (int t = t_len - 1; t >= 0; --t) {
                dh += dout[t];
                dx[t] = net_.cells[l].backward_step(dh, dc, caches[l][t], h_, w_);
            }
            dout = std::move(dx);
        }
    }
    return {se, elems};
}

// ---------------------------------------------------------------- checks & io

double gradient_check(const std::function<double()>& loss_backward,
                      const std::function<double()>& loss_only,
                      const std::vector<TensorRef>& params, const std::vector<TensorRef>& grads,
                      double step) {
    loss_backward();
    std::vector<std::vector<double>> analytic;
    for (const auto& g : grads) analytic.emplace_back(g.data, g.data + g.size);

    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        for (long j = 0; j < params[i].size; ++j) {
            double& p = params[i].data[j];
            const double saved = p;
            p = saved + step;
            const double lp = loss_only();
            p = saved - step;
            const double lm = loss_only();
            p = saved;
            const double fd = (lp - lm) / (2.0 * step);
            const double a = analytic[i][j];
            const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

void save_params(const std::string& path, const std::string& arch,
                 const std::vector<TensorRef>& params) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("DDCENET1", 8);
    const std::uint32_t alen = static_cast<std::uint32_t>(arch.size());
    f.write(reinterpret_cast<const char*>(&alen), 4);
    f.write(arch.data(), alen);
    const std::uint32_t nt = static_cast<std::uint32_t>(params.size());
    f.write(reinterpret_cast<const char*>(&nt), 4);
    for (const auto& t : params) {
        const std::uint64_t sz = static_cast<std::uint64_t>(t.size);
        f.write(reinterpret_cast<const char*>(&sz), 8);
        for (long j = 0; j < t.size; ++j) {
            const float v = static_cast<float>(t.data[j]);
            f.write(reinterpret_cast<const char*>(&v), 4);
        }
    }
    if (!f) throw IoError("write failed: " + path);
}

namespace {

std::string read_header(std::ifstream& f, const std::string& path) {
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "DDCENET1", 8) != 0) throw IoError("bad checkpoint: " + path);
    std::uint32_t alen = 0;
    f.read(reinterpret_cast<char*>(&alen), 4);
    std::string arch(alen, '\0');
    f.read(arch.data(), alen);
    return arch;
}

}  // namespace

std::string load_params(const std::string& path, const std::vector<TensorRef>& params) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    const std::string arch = read_header(f, path);
    std::uint32_t nt = 0;
    f.read(reinterpret_cast<char*>(&nt), 4);
    if (nt != params.size()) throw IoError("tensor count mismatch in " + path);
    for (const auto& t : params) {
        std::uint64_t sz = 0;
        f.read(reinterpret_cast<char*>(&sz), 8);
        if (sz != static_cast<std::uint64_t>(t.size))
            throw IoError("tensor size mismatch in " + path);
        for (long j = 0; j < t.size; ++j) {
            float v = 0;
            f.read(reinterpret_cast<char*>(&v), 4);
            t.data[j] = static_cast<double>(v);
        }
    }
    if (!f) throw IoError("truncated checkpoint: " + path);
    return arch;
}

std::string peek_arch(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    return read_header(f, path);
}

void save_loss_history(const std::string& path, const std::vector<double>& losses) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "epoch,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) f << i << "," << losses[i] << "\n";
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace ddce::nn
