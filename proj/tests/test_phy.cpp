#include <random>

#include "doctest.h"

#include "ddce/dft.hpp"
#include "ddce/errors.hpp"
#include "ddce/phy.hpp"

using namespace ddce;
using phy::cd;
using phy::Modulation;

namespace {

std::vector<std::uint8_t> word_bits(int w, int nbits) {
    std::vector<std::uint8_t> b(nbits);
    for (int i = 0; i < nbits; ++i) b[i] = (w >> (nbits - 1 - i)) & 1;
    return b;
}

}  // namespace

TEST_SUITE("phy") {

TEST_CASE("qpsk gray mapping starts at (1+j)/sqrt(2)") {
    const auto s = phy::modulate({0, 0}, Modulation::QPSK);
    CHECK(s[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(s[0].imag() == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("16qam has unit average energy") {
    double acc = 0;
    for (int w = 0; w < 16; ++w) acc += std::norm(phy::modulate(word_bits(w, 4), Modulation::QAM16)[0]);
    CHECK(acc / 16.0 == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("demap inverts modulate for every 16qam word") {
    for (int w = 0; w < 16; ++w) {
        const auto bits = word_bits(w, 4);
        const auto sym = phy::modulate(bits, Modulation::QAM16);
        const auto hat = phy::demap(sym, Modulation::QAM16);
        std::vector<std::uint8_t> back;
        phy::append_bits(hat[0], Modulation::QAM16, back);
        CHECK(back == bits);
    }
}

TEST_CASE("demap picks the nearest point") {
    const cd got = phy::demap_symbol(cd(0.9, 0.8), Modulation::QPSK);
    CHECK(got == phy::modulate({0, 0}, Modulation::QPSK)[0]);
    // a constellation point maps to itself
    for (const cd& p : phy::constellation(Modulation::QAM16))
        CHECK(phy::demap_symbol(p, Modulation::QAM16) == p);
}

TEST_CASE("demap matches brute-force nearest search on perturbed 16qam") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 0.2);
    const auto& pts = phy::constellation(Modulation::QAM16);
    for (int trial = 0; trial < 1000; ++trial) {
        const cd base = pts[rng() % 16];
        const cd noisy = base + cd(g(rng), g(rng));
        cd best = pts[0];
        double bd = 1e300;
        for (const cd& p : pts) {
            const double d = std::norm(noisy - p);
            if (d < bd) {
                bd = d;
                best = p;
            }
        }
        CHECK(phy::demap_symbol(noisy, Modulation::QAM16) == best);
    }
}

TEST_CASE("demap is idempotent") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        const cd x(g(rng), g(rng));
        const cd once = phy::demap_symbol(x, Modulation::QAM16);
        CHECK(phy::demap_symbol(once, Modulation::QAM16) == once);
    }
}

TEST_CASE("modulate rejects ragged bit counts") {
    CHECK_THROWS_AS(phy::modulate({1, 0, 1}, Modulation::QPSK), ShapeError);
}

TEST_CASE("all-zero grid modulates to an all-zero payload") {
    const auto cfg = phy::PhyConfig::ieee80211p(4);
    phy::FrameGrid g;
    g.values = Eigen::MatrixXcd::Zero(cfg.k_total, cfg.n_symbols);
    g.pilot_mask.setConstant(cfg.k_total, cfg.n_symbols, false);
    g.preamble = Eigen::VectorXcd::Zero(cfg.k_total);
    const auto sig = phy::ofdm_modulate(g, cfg);
    const int skip = cfg.n_preambles * cfg.samples_per_symbol();
    for (std::size_t n = skip; n < sig.samples.size(); ++n)
        CHECK(std::abs(sig.samples[n]) == 0.0);
}

TEST_CASE("single tone at bin zero gives a constant time symbol") {
    const auto cfg = phy::PhyConfig::ieee80211p(1);
    phy::FrameGrid g;
    g.values = Eigen::MatrixXcd::Zero(cfg.k_total, 1);
    g.values(0, 0) = std::sqrt(static_cast<double>(cfg.k_total));
    g.pilot_mask.setConstant(cfg.k_total, 1, false);
    g.preamble = Eigen::VectorXcd::Zero(cfg.k_total);
    const auto sig = phy::ofdm_modulate(g, cfg);
    const int base = cfg.n_preambles * cfg.samples_per_symbol() + cfg.cp_len;
    for (int n = 0; n < cfg.k_total; ++n) {
        CHECK(sig.samples[base + n].real() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::abs(sig.samples[base + n].imag()) < 1e-12);
    }
}

TEST_CASE("ofdm demodulate inverts modulate") {
    const auto cfg = phy::PhyConfig::ieee80211p(6);
    std::mt19937_64 rng(5);
    std::vector<std::uint8_t> bits(cfg.n_data_sc * cfg.n_symbols * 2);
    for (auto& b : bits) b = rng() & 1;
    const auto grid = phy::assemble_frame(phy::modulate(bits, cfg.modulation), cfg);
    const auto rx = phy::ofdm_demodulate(phy::ofdm_modulate(grid, cfg), cfg);
    CHECK((rx.values - grid.values).cwiseAbs().maxCoeff() < 1e-12);
    for (int p = 0; p < cfg.n_preambles; ++p)
        CHECK((rx.preamble_rx.col(p) - grid.preamble).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("truncated signal is rejected") {
    const auto cfg = phy::PhyConfig::ieee80211p(4);
    phy::TimeSignal sig;
    sig.samples.assign(cfg.frame_samples() - 1, cd(0, 0));
    CHECK_THROWS_AS(phy::ofdm_demodulate(sig, cfg), ShapeError);
}

TEST_CASE("unitary dft preserves noise power") {
    // pure AWGN in, per-subcarrier variance out, within 5% over 1e4 symbols
    const auto cfg = phy::PhyConfig::ieee80211p(100);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    double acc = 0;
    long count = 0;
    for (int rep = 0; rep < 100; ++rep) {
        phy::TimeSignal sig;
        sig.samples.resize(cfg.frame_samples());
        for (auto& s : sig.samples) s = cd(g(rng), g(rng));
        const auto grid = phy::ofdm_demodulate(sig, cfg);
        acc += grid.values.squaredNorm();
        count += grid.values.size();
    }
    CHECK(acc / count == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("parseval holds per symbol") {
    const auto cfg = phy::PhyConfig::ieee80211p(3);
    std::mt19937_64 rng(7);
    std::vector<std::uint8_t> bits(cfg.n_data_sc * cfg.n_symbols * 2);
    for (auto& b : bits) b = rng() & 1;
    const auto grid = phy::assemble_frame(phy::modulate(bits, cfg.modulation), cfg);
    const auto sig = phy::ofdm_modulate(grid, cfg);
    for (int i = 0; i < cfg.n_symbols; ++i) {
        const int base = (cfg.n_preambles + i) * cfg.samples_per_symbol() + cfg.cp_len;
        double tp = 0;
        for (int n = 0; n < cfg.k_total; ++n) tp += std::norm(sig.samples[base + n]);
        CHECK(tp == doctest::Approx(grid.values.col(i).squaredNorm()).epsilon(1e-10));
    }
}

TEST_CASE("frame assembly puts pilots exactly on the pilot set") {
    const auto cfg = phy::PhyConfig::ieee80211p(5);
    std::vector<std::uint8_t> bits(cfg.n_data_sc * cfg.n_symbols * 2, 1);
    const auto grid = phy::assemble_frame(phy::modulate(bits, cfg.modulation), cfg);
    const auto& offs = cfg.active_offsets();
    const std::vector<int> pilot_offsets = {-21, -7, 7, 21};
    for (int i = 0; i < cfg.n_symbols; ++i) {
        int pilots_seen = 0;
        for (int k = 0; k < cfg.k_total; ++k) {
            if (grid.pilot_mask(k, i)) {
                ++pilots_seen;
                CHECK(std::abs(grid.values(k, i)) == doctest::Approx(1.0));  // unit magnitude
                bool on_pilot_set = false;
                for (int off : pilot_offsets)
                    if (cfg.bin_of_offset(off) == k) on_pilot_set = true;
                CHECK(on_pilot_set);
            }
        }
        CHECK(pilots_seen == cfg.n_pilot_sc);
    }
    // data symbols keep unit average energy by construction
    double e = 0;
    for (int i = 0; i < cfg.n_symbols; ++i)
        for (int r : cfg.data_rows()) e += std::norm(grid.values(cfg.bin_of_offset(offs[r]), i));
    CHECK(e / (cfg.n_data_sc * cfg.n_symbols) == doctest::Approx(1.0).epsilon(1e-12));
}

}  // TEST_SUITE
