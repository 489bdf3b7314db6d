#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"

#include "ddce/channel.hpp"
#include "ddce/dft.hpp"
#include "ddce/errors.hpp"

using namespace ddce;
using channel::ChannelModel;
using phy::cd;

namespace {

/// Unit-power single-tap model for identity-channel tests.
ChannelModel one_tap(double doppler_hz) {
    ChannelModel m = ChannelModel::vtv_uc();
    m.path_gains_db = {0.0};
    m.path_delays_ns = {0.0};
    m.doppler_hz = doppler_hz;
    return m;
}

}  // namespace

TEST_SUITE("channel") {

TEST_CASE("zero doppler freezes every tap") {
    ChannelModel m = ChannelModel::vtv_uc();
    m.doppler_hz = 0.0;
    const auto ch = channel::generate_channel(m, 500, 42);
    for (int l = 0; l < ch.n_taps(); ++l)
        for (int n = 1; n < ch.n_samples(); ++n)
            CHECK(std::abs(ch.taps(l, n) - ch.taps(l, 0)) < 1e-12);
}

TEST_CASE("same seed reproduces the realization") {
    const auto a = channel::generate_channel(ChannelModel::vtv_uc(), 400, 7);
    const auto b = channel::generate_channel(ChannelModel::vtv_uc(), 400, 7);
    CHECK((a.taps - b.taps).cwiseAbs().maxCoeff() == 0.0);
    const auto c = channel::generate_channel(ChannelModel::vtv_uc(), 400, 8);
    CHECK((a.taps - c.taps).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("unknown model is rejected") {
    ChannelModel m = ChannelModel::vtv_uc();
    m.name = "bogus";
    CHECK_THROWS_AS(channel::generate_channel(m, 10, 1), ConfigError);
    CHECK_THROWS_AS(ChannelModel::by_name("bogus", 0.0), ConfigError);
}

TEST_CASE("sampled tap powers follow the measured profiles") {
    // VTV-UC merges to 5 sample-spaced taps at 10 MHz, VTV-SDWW to 8
    const auto uc = ChannelModel::vtv_uc().sampled_taps(10e6);
    CHECK(uc.delays == std::vector<int>{0, 1, 2, 3, 4});
    const auto sd = ChannelModel::vtv_sdww().sampled_taps(10e6);
    CHECK(sd.delays == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});

    auto lin = [](double db) { return std::pow(10.0, db / 10.0); };
    // expected merged linear powers from the Table IV dB profile
    const std::vector<std::vector<double>> uc_groups = {
        {0, 0}, {-10, -10, -10}, {-17.8, -17.8, -17.8}, {-21.1, -21.1}, {-26.3, -26.3}};
    double total = 0;
    std::vector<double> expect;
    for (const auto& g : uc_groups) {
        double s = 0;
        for (double db : g) s += lin(db);
        expect.push_back(s);
        total += s;
    }
    double sum = 0;
    for (std::size_t l = 0; l < uc.powers.size(); ++l) {
        CHECK(std::abs(uc.powers[l] - expect[l] / total) < 1e-12);
        sum += uc.powers[l];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("jakes autocorrelation tracks the bessel oracle") {
    // The statistics depend on fd*tau only, so the ensemble runs at a low
    // sample rate where one realization spans many Doppler periods.
    ChannelModel m = ChannelModel::vtv_uc();
    m.path_gains_db = {0.0};
    m.path_delays_ns = {0.0};
    const double fd = m.doppler_hz;
    const double fs = 100.0 * fd;  // fd*tau grid of 0.01
    const int n = 4000;            // 40 Doppler periods
    const int lags[] = {10, 50, 100, 150, 199};
    double corr_acc[5] = {0, 0, 0, 0, 0};
    double pow_acc = 0;
    const int reps = 100;
    for (int r = 0; r < reps; ++r) {
        const auto ch = channel::generate_channel(m, n, 1000 + r, fs);
        pow_acc += ch.taps.row(0).squaredNorm() / n;
        for (int j = 0; j < 5; ++j) {
            const int lag = lags[j];
            cd acc(0, 0);
            for (int t = 0; t + lag < n; ++t) acc += ch.taps(0, t) * std::conj(ch.taps(0, t + lag));
            corr_acc[j] += acc.real() / (n - lag);
        }
    }
    pow_acc /= reps;
    for (int j = 0; j < 5; ++j) {
        const double oracle = std::cyl_bessel_j(0.0, 2.0 * M_PI * fd * lags[j] / fs);
        CHECK(std::abs(corr_acc[j] / reps / pow_acc - oracle) < 0.05);
    }
}

TEST_CASE("taps are mutually uncorrelated") {
    // ensemble cross-correlation over independent realizations, one draw each
    ChannelModel m = ChannelModel::vtv_uc();
    const int reps = 2000;
    Eigen::MatrixXcd cross = Eigen::MatrixXcd::Zero(5, 5);
    for (int r = 0; r < reps; ++r) {
        const auto ch = channel::generate_channel(m, 1, 500 + r, 10e6);
        cross += ch.taps.col(0) * ch.taps.col(0).adjoint();
    }
    for (int a = 0; a < 5; ++a)
        for (int b = a + 1; b < 5; ++b)
            CHECK(std::abs(cross(a, b)) / std::sqrt(cross(a, a).real() * cross(b, b).real()) <
                  0.05);
}

TEST_CASE("per-tap mean is near zero") {
    // independent draws across realizations (WSS zero-mean contract)
    ChannelModel m = ChannelModel::vtv_sdww();
    const int reps = 400;
    Eigen::VectorXcd mean = Eigen::VectorXcd::Zero(8);
    for (int r = 0; r < reps; ++r) {
        const auto ch = channel::generate_channel(m, 1, 9000 + r, 10e6);
        mean += ch.taps.col(0);
    }
    mean /= static_cast<double>(reps);
    for (int l = 0; l < 8; ++l) {
        const double sigma = std::sqrt(ChannelModel::vtv_sdww().sampled_taps(10e6).powers[l]);
        CHECK(std::abs(mean(l)) < 3.0 * sigma / std::sqrt(static_cast<double>(reps)));
    }
}

TEST_CASE("static one-tap channel is the identity") {
    const auto cfg = phy::PhyConfig::ieee80211p(3);
    ChannelModel m = one_tap(0.0);
    auto ch = channel::generate_channel(m, cfg.frame_samples(), 3);
    const cd g0 = ch.taps(0, 0);
    phy::TimeSignal sig;
    sig.samples.resize(cfg.frame_samples());
    std::mt19937_64 rng(2);
    std::normal_distribution<double> gauss;
    for (auto& s : sig.samples) s = cd(gauss(rng), gauss(rng));
    const auto out = channel::apply_channel(sig, ch);
    for (std::size_t i = 0; i < sig.samples.size(); ++i)
        CHECK(std::abs(out.samples[i] - g0 * sig.samples[i]) < 1e-12);
}

TEST_CASE("impulse reproduces the tap vector") {
    ChannelModel m = ChannelModel::vtv_sdww();
    m.doppler_hz = 0.0;
    const auto ch = channel::generate_channel(m, 64, 21);
    phy::TimeSignal sig;
    sig.samples.assign(64, cd(0, 0));
    sig.samples[0] = cd(1, 0);
    const auto out = channel::apply_channel(sig, ch);
    for (int l = 0; l < ch.n_taps(); ++l)
        CHECK(std::abs(out.samples[ch.delays[l]] - ch.taps(l, ch.delays[l])) < 1e-12);
}

TEST_CASE("static multipath equals per-subcarrier multiplication after the dft") {
    const auto cfg = phy::PhyConfig::ieee80211p(4);
    ChannelModel m = ChannelModel::vtv_sdww();
    m.doppler_hz = 0.0;
    const auto ch = channel::generate_channel(m, cfg.frame_samples(), 31);

    std::mt19937_64 rng(13);
    std::vector<std::uint8_t> bits(cfg.n_data_sc * cfg.n_symbols * 2);
    for (auto& b : bits) b = rng() & 1;
    const auto grid = phy::assemble_frame(phy::modulate(bits, cfg.modulation), cfg);
    const auto rx =
        phy::ofdm_demodulate(channel::apply_channel(phy::ofdm_modulate(grid, cfg), ch), cfg);

    // oracle: H[k] = DFT of the zero-padded static taps
    Eigen::VectorXcd hk(cfg.k_total);
    for (int k = 0; k < cfg.k_total; ++k) {
        cd acc(0, 0);
        for (int l = 0; l < ch.n_taps(); ++l)
            acc += ch.taps(l, 0) * std::exp(cd(0, -2.0 * M_PI * ch.delays[l] * k / cfg.k_total));
        hk(k) = acc;
    }
    for (int i = 0; i < cfg.n_symbols; ++i)
        for (int off : cfg.active_offsets()) {
            const int k = cfg.bin_of_offset(off);
            CHECK(std::abs(rx.values(k, i) - hk(k) * grid.values(k, i)) < 1e-9);
        }
}

TEST_CASE("awgn honors the requested snr") {
    phy::TimeSignal sig;
    sig.samples.assign(1000000, cd(1.0, 0.0));  // unit power
    const auto noisy = channel::add_awgn(sig, 0.0, 77);
    double np = 0;
    for (std::size_t i = 0; i < sig.samples.size(); ++i) np += std::norm(noisy.samples[i] - sig.samples[i]);
    np /= sig.samples.size();
    CHECK(np == doctest::Approx(1.0).epsilon(0.02));

    const auto clean = channel::add_awgn(sig, std::numeric_limits<double>::infinity(), 77);
    for (std::size_t i = 0; i < 100; ++i) CHECK(clean.samples[i] == sig.samples[i]);

    const auto other = channel::add_awgn(sig, 0.0, 78);
    CHECK(std::abs(other.samples[0] - noisy.samples[0]) > 0.0);
}

TEST_CASE("true grid columns repeat when doppler is zero") {
    const auto cfg = phy::PhyConfig::ieee80211p(6);
    ChannelModel m = ChannelModel::vtv_uc();
    m.doppler_hz = 0.0;
    const auto ch = channel::generate_channel(m, cfg.frame_samples(), 4);
    const auto grid = channel::true_channel_grid(ch, cfg);
    for (int i = 1; i < cfg.n_symbols; ++i)
        CHECK((grid.h.col(i) - grid.h.col(0)).cwiseAbs().maxCoeff() < 1e-12);

    // static channel: column equals the tap dft at the active bins
    const auto& offs = cfg.active_offsets();
    for (int r = 0; r < cfg.k_on(); ++r) {
        const int k = cfg.bin_of_offset(offs[r]);
        cd acc(0, 0);
        for (int l = 0; l < ch.n_taps(); ++l)
            acc += ch.taps(l, 0) * std::exp(cd(0, -2.0 * M_PI * ch.delays[l] * k / cfg.k_total));
        CHECK(std::abs(grid.h(r, 0) - acc) < 1e-10);
    }
}

TEST_CASE("unit single tap gives the all-ones grid") {
    const auto cfg = phy::PhyConfig::ieee80211p(2);
    auto ch = channel::generate_channel(one_tap(0.0), cfg.frame_samples(), 6);
    ch.taps.setConstant(cd(1.0, 0.0));
    const auto grid = channel::true_channel_grid(ch, cfg);
    CHECK((grid.h.array() - cd(1.0, 0.0)).abs().maxCoeff() < 1e-12);
}

TEST_CASE("doppler interference vanishes without mobility and grows with it") {
    const auto cfg = phy::PhyConfig::ieee80211p(4);
    ChannelModel m = ChannelModel::vtv_sdww();
    m.doppler_hz = 0.0;
    const auto ch0 = channel::generate_channel(m, cfg.frame_samples(), 11);
    CHECK(channel::doppler_interference_variance(ch0, cfg, 10, 1).maxCoeff() < 1e-12);

    double prev = 0.0;
    for (double fd : {250.0, 500.0, 1000.0}) {
        double mean = 0.0;
        for (int rep = 0; rep < 4; ++rep) {
            ChannelModel mm = ChannelModel::vtv_sdww(fd);
            mm.doppler_hz = fd;
            const auto ch = channel::generate_channel(mm, cfg.frame_samples(), 100 + rep);
            mean += channel::doppler_interference_variance(ch, cfg, 25, rep).mean();
        }
        CHECK(mean > prev);
        prev = mean;
    }
}

TEST_CASE("doppler interference decorrelates with subcarrier separation") {
    // Exact ensemble oracle: C(k,k') = sum_{q not in {k,k'}} G[k-q, k'-q]
    // with G the 2D DFT of the Jakes correlation over one symbol window. The
    // Monte-Carlo estimate must reproduce it, including the fact that
    // neighboring subcarriers stay correlated (the Doppler spread is a small
    // fraction of a DFT bin) while separated ones decorrelate.
    const auto cfg = phy::PhyConfig::ieee80211p(4);
    const double fd = 1000.0, fs = cfg.sample_rate;
    const int k = cfg.k_total;
    Eigen::MatrixXcd r(k, k), f(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
            r(a, b) = std::cyl_bessel_j(0.0, 2.0 * M_PI * fd * std::abs(a - b) / fs);
            f(a, b) = std::exp(cd(0, -2.0 * M_PI * a * b / k));
        }
    const Eigen::MatrixXcd g = f * r * f.adjoint() / static_cast<double>(k * k);
    const auto& offs = cfg.active_offsets();
    const int kon = cfg.k_on();
    Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(kon, kon);
    for (int i = 0; i < kon; ++i)
        for (int j = 0; j < kon; ++j) {
            const int ka = cfg.bin_of_offset(offs[i]), kb = cfg.bin_of_offset(offs[j]);
            for (int qq = 0; qq < kon; ++qq) {
                const int q = cfg.bin_of_offset(offs[qq]);
                if (q == ka || q == kb) continue;
                c(i, j) += g(((ka - q) % k + k) % k, ((kb - q) % k + k) % k);
            }
        }
    const double var = c.diagonal().real().mean();
    const Eigen::MatrixXd exact = c.cwiseAbs() / var;

    const Eigen::MatrixXd mc =
        channel::doppler_interference_crosscorr(ChannelModel::vtv_sdww(fd), cfg, 60, 6, 19);
    double worst_adj_err = 0.0, worst_far = 0.0;
    for (int i = 0; i < kon; ++i)
        for (int j = 0; j < kon; ++j) {
            const int sep = std::abs(offs[i] - offs[j]);
            if (sep == 1) worst_adj_err = std::max(worst_adj_err, std::abs(mc(i, j) - exact(i, j)));
            if (sep >= 6 && i != j) worst_far = std::max(worst_far, mc(i, j));
        }
    CHECK(worst_adj_err < 0.15);  // Monte-Carlo agrees with the exact ensemble value
    CHECK(worst_far < 0.2);       // separated subcarriers decorrelate
}

TEST_CASE("trace files round-trip") {
    const auto ch = channel::generate_channel(ChannelModel::vtv_sdww(), 300, 23);
    const std::string path = "test_trace.bin";
    channel::write_trace(path, ch);
    const auto back = channel::read_trace(path);
    std::filesystem::remove(path);
    CHECK(back.n_taps() == ch.n_taps());
    CHECK(back.n_samples() == ch.n_samples());
    CHECK(back.doppler_hz == ch.doppler_hz);
    CHECK(back.delays == ch.delays);
    CHECK((back.taps.cast<std::complex<float>>() - ch.taps.cast<std::complex<float>>())
              .cwiseAbs()
              .maxCoeff() == 0.0f);
}

TEST_CASE("short realizations cannot carry a frame") {
    const auto ch = channel::generate_channel(ChannelModel::vtv_uc(), 10, 1);
    phy::TimeSignal sig;
    sig.samples.assign(11, cd(1, 0));
    CHECK_THROWS_AS(channel::apply_channel(sig, ch), ShapeError);
}

}  // TEST_SUITE
