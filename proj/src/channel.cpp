#include "ddce/channel.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "ddce/dft.hpp"
#include "ddce/errors.hpp"

namespace ddce::channel {
namespace {

constexpr double kPi = std::numbers::pi;

std::uint32_t model_id(const std::string& name) {
    if (name == "VTV-UC") return 1;
    if (name == "VTV-SDWW") return 2;
    return 0;
}

}  // namespace

ChannelModel ChannelModel::vtv_uc() {
    ChannelModel m;
    m.name = "VTV-UC";
    m.path_gains_db = {0, 0, -10, -10, -10, -17.8, -17.8, -17.8, -21.1, -21.1, -26.3, -26.3};
    m.path_delays_ns = {0, 1, 100, 101, 102, 200, 201, 202, 300, 301, 400, 401};
    m.doppler_hz = 250.0;
    m.velocity_kmph = 45.0;
    return m;
}

ChannelModel ChannelModel::vtv_sdww(double doppler_hz) {
    ChannelModel m;
    m.name = "VTV-SDWW";
    m.path_gains_db = {0, 0, -11.2, -11.2, -19, -21.9, -25.3, -25.3, -24.4, -28, -26.1, -26.1};
    m.path_delays_ns = {0, 1, 100, 101, 200, 300, 400, 401, 500, 600, 700, 701};
    m.doppler_hz = doppler_hz;
    m.velocity_kmph = doppler_hz == 500.0 ? 100.0 : 200.0;
    return m;
}

ChannelModel ChannelModel::by_name(const std::string& name, double doppler_hz) {
    if (name == "VTV-UC" || name == "vtv-uc") {
        auto m = vtv_uc();
        if (doppler_hz > 0) m.doppler_hz = doppler_hz;
        return m;
    }
    if (name == "VTV-SDWW" || name == "vtv-sdww") return vtv_sdww(doppler_hz > 0 ? doppler_hz : 500.0);
    throw ConfigError("unknown channel model: " + name);
}

ChannelModel::SampledTaps ChannelModel::sampled_taps(double sample_rate) const {
    std::map<int, double> acc;
    double total = 0.0;
    for (int l = 0; l < n_paths(); ++l) {
        const double p = std::pow(10.0, path_gains_db[l] / 10.0);
        const int d = static_cast<int>(std::lround(path_delays_ns[l] * 1e-9 * sample_rate));
        acc[d] += p;
        total += p;
    }
    SampledTaps t;
    for (auto& [d, p] : acc) {
        t.delays.push_back(d);
        t.powers.push_back(p / total);
    }
    return t;
}

ChannelRealization generate_channel(const ChannelModel& model, int n_samples,
                                    std::uint64_t seed, double sample_rate, int n_oscillators) {
    if (n_samples < 1) throw ShapeError("n_samples must be >= 1");
    if (model_id(model.name) == 0) throw ConfigError("unknown channel model: " + model.name);

    const auto taps = model.sampled_taps(sample_rate);
    const int nl = static_cast<int>(taps.delays.size());
    ChannelRealization ch;
    ch.taps.resize(nl, n_samples);
    ch.delays = taps.delays;
    ch.powers = taps.powers;
    ch.doppler_hz = model.doppler_hz;
    ch.sample_rate = sample_rate;
    ch.seed = seed;
    ch.model_name = model.name;

    // Clarke sum-of-sinusoids: per tap, n_oscillators plane waves with uniform
    // random arrival angles and phases. Each oscillator advances by a fixed
    // per-sample phasor rotation, so a whole trajectory costs one complex
    // multiply per oscillator per sample.
    const double amp_base = 1.0 / std::sqrt(static_cast<double>(n_oscillators));
    std::vector<cd> phasor(n_oscillators), rot(n_oscillators);
    for (int l = 0; l < nl; ++l) {
        std::mt19937_64 rng(derive_seed(seed, 0xC4A77EEULL, static_cast<std::uint64_t>(l)));
        std::uniform_real_distribution<double> uni(0.0, 2.0 * kPi);
        const double amp = std::sqrt(taps.powers[l]) * amp_base;
        for (int m = 0; m < n_oscillators; ++m) {
            const double theta = uni(rng);   // arrival angle
            const double phi = uni(rng);     // initial phase
            const double omega = 2.0 * kPi * model.doppler_hz * std::cos(theta) / sample_rate;
            phasor[m] = cd(std::cos(phi), std::sin(phi));
            rot[m] = cd(std::cos(omega), std::sin(omega));
        }
        for (int n = 0; n < n_samples; ++n) {
            cd s(0.0, 0.0);
            for (int m = 0; m < n_oscillators; ++m) {
                s += phasor[m];
                phasor[m] *= rot[m];
            }
            ch.taps(l, n) = amp * s;
        }
    }
    return ch;
}

phy::TimeSignal apply_channel(const phy::TimeSignal& sig, const ChannelRealization& ch) {
    const int n = static_cast<int>(sig.samples.size());
    if (ch.n_samples() < n) throw ShapeError("channel realization shorter than signal");
    phy::TimeSignal out;
    out.sample_rate = sig.sample_rate;
    out.samples.assign(n, cd(0.0, 0.0));
    for (int l = 0; l < ch.n_taps(); ++l) {
        const int d = ch.delays[l];
        for (int i = d; i < n; ++i) out.samples[i] += ch.taps(l, i) * sig.samples[i - d];
    }
    return out;
}

phy::TimeSignal add_awgn(const phy::TimeSignal& sig, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return sig;
    double power = 0.0;
    for (const cd& s : sig.samples) power += std::norm(s);
    power /= static_cast<double>(sig.samples.size());
    if (power <= 0.0) throw ShapeError("signal power must be positive");

    const double sigma2 = power / std::pow(10.0, snr_db / 10.0);
    const double s = std::sqrt(sigma2 / 2.0);
    std::mt19937_64 rng(derive_seed(seed, 0xA36A11ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    phy::TimeSignal out = sig;
    for (cd& x : out.samples) x += cd(s * gauss(rng), s * gauss(rng));
    return out;
}

TrueChannelGrid true_channel_grid(const ChannelRealization& ch, const phy::PhyConfig& cfg) {
    const int span = cfg.samples_per_symbol();
    const int k = cfg.k_total;
    TrueChannelGrid g;
    g.h.resize(cfg.k_on(), cfg.n_symbols);
    const auto& offs = cfg.active_offsets();

    for (int i = 0; i < cfg.n_symbols; ++i) {
        const int base = (cfg.n_preambles + i) * span + cfg.cp_len;
        if (base + k > ch.n_samples()) throw ShapeError("channel realization shorter than frame");
        // mean tap value over the useful part of the symbol, then DFT
        Eigen::VectorXcd hbar(ch.n_taps());
        for (int l = 0; l < ch.n_taps(); ++l)
            hbar(l) = ch.taps.row(l).segment(base, k).mean();
        for (int r = 0; r < cfg.k_on(); ++r) {
            const int bin = cfg.bin_of_offset(offs[r]);
            cd acc(0.0, 0.0);
            for (int l = 0; l < ch.n_taps(); ++l) {
                const double ph = -2.0 * kPi * ch.delays[l] * bin / static_cast<double>(k);
                acc += hbar(l) * cd(std::cos(ph), std::sin(ph));
            }
            g.h(r, i) = acc;
        }
    }
    return g;
}

namespace {

/// Per-symbol ICI transfer matrix T[k,q] (active rows only) such that
/// e_d = (T - diag(T)) x for one random symbol draw.
Eigen::MatrixXcd ici_matrix(const ChannelRealization& ch, const phy::PhyConfig& cfg, int sym) {
    const int k = cfg.k_total;
    const int base = (cfg.n_preambles + sym) * cfg.samples_per_symbol() + cfg.cp_len;
    const auto& offs = cfg.active_offsets();
    const int kon = cfg.k_on();

    // h_freq[q, n] for active q: DFT over taps at each sample of the symbol
    Eigen::MatrixXcd hf(kon, k);
    for (int c = 0; c < kon; ++c) {
        const int q = cfg.bin_of_offset(offs[c]);
        for (int n = 0; n < k; ++n) {
            cd acc(0.0, 0.0);
            for (int l = 0; l < ch.n_taps(); ++l) {
                const double ph = -2.0 * kPi * ch.delays[l] * q / static_cast<double>(k);
                acc += ch.taps(l, base + n) * cd(std::cos(ph), std::sin(ph));
            }
            hf(c, n) = acc;
        }
    }
    // T[k_row, q_col] = (1/K) sum_n hf[q, n] e^{-j 2 pi n (k - q) / K}
    Eigen::MatrixXcd t(kon, kon);
    for (int cq = 0; cq < kon; ++cq) {
        const int q = cfg.bin_of_offset(offs[cq]);
        Eigen::VectorXcd spec(k);
        for (int v = 0; v < k; ++v) {
            cd acc(0.0, 0.0);
            for (int n = 0; n < k; ++n) {
                const double ph = -2.0 * kPi * n * v / static_cast<double>(k);
                acc += hf(cq, n) * cd(std::cos(ph), std::sin(ph));
            }
            spec(v) = acc / static_cast<double>(k);
        }
        for (int ck = 0; ck < kon; ++ck) {
            const int kk = cfg.bin_of_offset(offs[ck]);
            t(ck, cq) = spec(((kk - q) % k + k) % k);
        }
    }
    return t;
}

std::vector<cd> random_unit_symbols(int n, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 3);
    const auto& pts = phy::constellation(phy::Modulation::QPSK);
    std::vector<cd> v(n);
    for (int i = 0; i < n; ++i) v[i] = pts[pick(rng)];
    return v;
}

}  // namespace

Eigen::VectorXd doppler_interference_variance(const ChannelRealization& ch,
                                              const phy::PhyConfig& cfg,
                                              int n_draws, std::uint64_t seed) {
    const int kon = cfg.k_on();
    Eigen::VectorXd var = Eigen::VectorXd::Zero(kon);
    std::mt19937_64 rng(derive_seed(seed, 0xD0991E4ULL));
    long count = 0;
    for (int sym = 0; sym < cfg.n_symbols; ++sym) {
        const Eigen::MatrixXcd t = ici_matrix(ch, cfg, sym);
        for (int d = 0; d < n_draws; ++d) {
            const auto x = random_unit_symbols(kon, rng);
            for (int k = 0; k < kon; ++k) {
                cd acc(0.0, 0.0);
                for (int q = 0; q < kon; ++q)
                    if (q != k) acc += t(k, q) * x[q];
                var(k) += std::norm(acc);
            }
            ++count;
        }
    }
    return var / static_cast<double>(count);
}

Eigen::MatrixXd doppler_interference_crosscorr(const ChannelModel& model,
                                               const phy::PhyConfig& cfg, int n_realizations,
                                               int n_draws, std::uint64_t seed) {
    const int kon = cfg.k_on();
    std::mt19937_64 rng(derive_seed(seed, 0xCC0881ULL));
    Eigen::MatrixXcd cross = Eigen::MatrixXcd::Zero(kon, kon);
    long count = 0;
    Eigen::VectorXcd e(kon);
    for (int r = 0; r < n_realizations; ++r) {
        const auto ch = generate_channel(model, cfg.frame_samples(),
                                         derive_seed(seed, 0xCC0882ULL, r), cfg.sample_rate);
        for (int sym = 0; sym < cfg.n_symbols; ++sym) {
            const Eigen::MatrixXcd t = ici_matrix(ch, cfg, sym);
            for (int d = 0; d < n_draws; ++d) {
                const auto x = random_unit_symbols(kon, rng);
                for (int k = 0; k < kon; ++k) {
                    cd acc(0.0, 0.0);
                    for (int q = 0; q < kon; ++q)
                        if (q != k) acc += t(k, q) * x[q];
                    e(k) = acc;
                }
                cross += e * e.adjoint();
                ++count;
            }
        }
    }
    cross /= static_cast<double>(count);
    const double mean_var = cross.diagonal().real().mean();
    return cross.cwiseAbs() / mean_var;
}

void write_trace(const std::string& path, const ChannelRealization& ch) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    const char magic[8] = {'D', 'D', 'C', 'E', 'C', 'H', '1', '\0'};
    f.write(magic, 8);
    const std::uint32_t l = static_cast<std::uint32_t>(ch.n_taps());
    const std::uint64_t n = static_cast<std::uint64_t>(ch.n_samples());
    const std::uint32_t mid = model_id(ch.model_name);
    f.write(reinterpret_cast<const char*>(&l), 4);
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(reinterpret_cast<const char*>(&ch.doppler_hz), 8);
    f.write(reinterpret_cast<const char*>(&mid), 4);
    for (std::uint32_t i = 0; i < l; ++i) {
        const std::int32_t d = ch.delays[i];
        f.write(reinterpret_cast<const char*>(&d), 4);
    }
    for (int r = 0; r < ch.n_taps(); ++r)
        for (int c = 0; c < ch.n_samples(); ++c) {
            const float re = static_cast<float>(ch.taps(r, c).real());
            const float im = static_cast<float>(ch.taps(r, c).imag());
            f.write(reinterpret_cast<const char*>(&re), 4);
            f.write(reinterpret_cast<const char*>(&im), 4);
        }
    if (!f) throw IoError("write failed: " + path);
}

ChannelRealization read_trace(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, "DDCECH1\0", 8) != 0) throw IoError("bad magic in " + path);
    std::uint32_t l = 0, mid = 0;
    std::uint64_t n = 0;
    double fd = 0.0;
    f.read(reinterpret_cast<char*>(&l), 4);
    f.read(reinterpret_cast<char*>(&n), 8);
    f.read(reinterpret_cast<char*>(&fd), 8);
    f.read(reinterpret_cast<char*>(&mid), 4);
    ChannelRealization ch;
    ch.doppler_hz = fd;
    ch.model_name = mid == 1 ? "VTV-UC" : mid == 2 ? "VTV-SDWW" : "unknown";
    ch.delays.resize(l);
    for (std::uint32_t i = 0; i < l; ++i) {
        std::int32_t d = 0;
        f.read(reinterpret_cast<char*>(&d), 4);
        ch.delays[i] = d;
    }
    ch.taps.resize(l, static_cast<int>(n));
    for (std::uint32_t r = 0; r < l; ++r)
        for (std::uint64_t c = 0; c < n; ++c) {
            float re = 0, im = 0;
            f.read(reinterpret_cast<char*>(&re), 4);
            f.read(reinterpret_cast<char*>(&im), 4);
            ch.taps(r, static_cast<int>(c)) = cd(re, im);
        }
    if (!f) throw IoError("truncated trace: " + path);
    return ch;
}

}  // namespace ddce::channel
