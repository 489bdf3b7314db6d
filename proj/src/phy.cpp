#include "ddce/phy.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ddce/dft.hpp"

namespace ddce::phy {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt10 = 0.31622776601683793320;

// Gray mapping tables. QPSK: bit 0 selects the real sign, bit 1 the
// imaginary sign, 0 -> +1. 16QAM: per axis, bit pair -> level with Gray
// coding 00:-3, 01:-1, 11:+1, 10:+3 (levels scaled by 1/sqrt(10)).
constexpr std::array<double, 2> kQpskLevel = {+1.0, -1.0};
constexpr std::array<double, 4> kQamLevel = {-3.0, -1.0, +1.0, +3.0};
constexpr std::array<int, 4> kQamGray = {0, 1, 3, 2};  // bit pair for level index

int qam_level_index(int b_hi, int b_lo) {
    const int pair = 2 * b_hi + b_lo;
    for (int i = 0; i < 4; ++i)
        if (kQamGray[i] == pair) return i;
    return 0;
}

struct ConstellationTable {
    std::vector<cd> points;                  // lexicographic order
    std::vector<std::uint8_t> bits;          // packed, log2(M) bits per point
};

ConstellationTable build_table(Modulation m) {
    ConstellationTable t;
    const int nbits = bits_per_symbol(m);
    const int n = 1 << nbits;
    std::vector<std::pair<cd, int>> pts(n);
    for (int w = 0; w < n; ++w) {
        cd p;
        if (m == Modulation::QPSK) {
            p = cd(kQpskLevel[(w >> 1) & 1], kQpskLevel[w & 1]) * kInvSqrt2;
        } else {
            const int re = qam_level_index((w >> 3) & 1, (w >> 2) & 1);
            const int im = qam_level_index((w >> 1) & 1, w & 1);
            p = cd(kQamLevel[re], kQamLevel[im]) * kInvSqrt10;
        }
        pts[w] = {p, w};
    }
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        if (a.first.real() != b.first.real()) return a.first.real() < b.first.real();
        return a.first.imag() < b.first.imag();
    });
    for (auto& [p, w] : pts) {
        t.points.push_back(p);
        t.bits.push_back(static_cast<std::uint8_t>(w));
    }
    return t;
}

const ConstellationTable& table(Modulation m) {
    static const ConstellationTable qpsk = build_table(Modulation::QPSK);
    static const ConstellationTable qam = build_table(Modulation::QAM16);
    return m == Modulation::QPSK ? qpsk : qam;
}

// Fixed 802.11p subcarrier layout shared by all configs.
const std::vector<int>& offsets_80211p() {
    static const std::vector<int> offs = [] {
        std::vector<int> v;
        for (int k = -26; k <= 26; ++k)
            if (k != 0) v.push_back(k);
        return v;
    }();
    return offs;
}

const std::vector<int>& pilot_rows_80211p() {
    static const std::vector<int> rows = [] {
        const std::vector<int> pilots = {-21, -7, 7, 21};
        std::vector<int> r;
        const auto& offs = offsets_80211p();
        for (int p : pilots)
            r.push_back(static_cast<int>(std::find(offs.begin(), offs.end(), p) - offs.begin()));
        return r;
    }();
    return rows;
}

const std::vector<int>& data_rows_80211p() {
    static const std::vector<int> rows = [] {
        std::vector<int> r;
        const auto& p = pilot_rows_80211p();
        for (int i = 0; i < 52; ++i)
            if (std::find(p.begin(), p.end(), i) == p.end()) r.push_back(i);
        return r;
    }();
    return rows;
}

}  // namespace

int bits_per_symbol(Modulation m) { return m == Modulation::QPSK ? 2 : 4; }

const std::vector<cd>& constellation(Modulation m) { return table(m).points; }

const std::vector<int>& PhyConfig::active_offsets() const { return offsets_80211p(); }

const std::vector<int>& PhyConfig::pilot_rows() const { return pilot_rows_80211p(); }

const std::vector<int>& PhyConfig::data_rows() const { return data_rows_80211p(); }

Eigen::VectorXcd PhyConfig::preamble_active() const {
    // 802.11 long-training sequence for offsets -26..-1, 1..26.
    static const std::array<int, 52> ltf = {
        1, 1, -1, -1, 1,  1, -1, 1, -1, 1, 1, 1, 1, 1, 1, -1, -1, 1, 1, -1, 1, -1, 1, 1, 1, 1,
        1, -1, -1, 1, 1, -1, 1, -1, 1, -1, -1, -1, -1, -1, 1, 1, -1, -1, 1, -1, 1, -1, 1, 1, 1, 1};
    Eigen::VectorXcd v(52);
    for (int i = 0; i < 52; ++i) v(i) = cd(ltf[i], 0.0);
    return v;
}

Eigen::VectorXcd PhyConfig::pilot_values() const {
    Eigen::VectorXcd v(4);
    v << cd(1, 0), cd(1, 0), cd(1, 0), cd(-1, 0);
    return v;
}

void PhyConfig::validate() const {
    if (k_on() > k_total) throw ConfigError("K_on exceeds K");
    if (k_total != 64) throw ConfigError("only the K=64 802.11p grid is supported");
    if (cp_len <= 0 || n_symbols < 1 || n_preambles < 1) throw ConfigError("invalid PhyConfig");
}

PhyConfig PhyConfig::ieee80211p(int n_symbols, Modulation m) {
    PhyConfig cfg;
    cfg.n_symbols = n_symbols;
    cfg.modulation = m;
    cfg.validate();
    return cfg;
}

std::vector<cd> modulate(const std::vector<std::uint8_t>& bits, Modulation m) {
    const int nb = bits_per_symbol(m);
    if (bits.size() % nb != 0) throw ShapeError("bit count not divisible by log2(order)");
    std::vector<cd> out(bits.size() / nb);
    for (std::size_t s = 0; s < out.size(); ++s) {
        int w = 0;
        for (int b = 0; b < nb; ++b) w = (w << 1) | (bits[s * nb + b] & 1);
        if (m == Modulation::QPSK) {
            out[s] = cd(kQpskLevel[(w >> 1) & 1], kQpskLevel[w & 1]) * kInvSqrt2;
        } else {
            const int re = qam_level_index((w >> 3) & 1, (w >> 2) & 1);
            const int im = qam_level_index((w >> 1) & 1, w & 1);
            out[s] = cd(kQamLevel[re], kQamLevel[im]) * kInvSqrt10;
        }
    }
    return out;
}

cd demap_symbol(const cd& s, Modulation m) {
    const auto& pts = table(m).points;
    double best = std::numeric_limits<double>::infinity();
    cd win = pts[0];
    for (const cd& p : pts) {
        const double d = std::norm(s - p);
        if (d < best) {
            best = d;
            win = p;
        }
    }
    return win;
}

std::vector<cd> demap(const std::vector<cd>& symbols, Modulation m) {
    std::vector<cd> out(symbols.size());
    for (std::size_t i = 0; i < symbols.size(); ++i) out[i] = demap_symbol(symbols[i], m);
    return out;
}

void append_bits(const cd& point, Modulation m, std::vector<std::uint8_t>& out) {
    const auto& t = table(m);
    const int nb = bits_per_symbol(m);
    // exact match is expected after demap
    for (std::size_t i = 0; i < t.points.size(); ++i) {
        if (t.points[i] == point) {
            for (int b = nb - 1; b >= 0; --b) out.push_back((t.bits[i] >> b) & 1);
            return;
        }
    }
    throw ShapeError("symbol is not a constellation point");
}

FrameGrid assemble_frame(const std::vector<cd>& data, const PhyConfig& cfg) {
    if (static_cast<int>(data.size()) != cfg.n_data_sc * cfg.n_symbols)
        throw ShapeError("data symbol count does not match K_d * I");
    FrameGrid g;
    g.values = Eigen::MatrixXcd::Zero(cfg.k_total, cfg.n_symbols);
    g.pilot_mask.setConstant(cfg.k_total, cfg.n_symbols, false);
    g.preamble = Eigen::VectorXcd::Zero(cfg.k_total);

    const auto& offs = cfg.active_offsets();
    const auto lam = cfg.preamble_active();
    for (int r = 0; r < cfg.k_on(); ++r) g.preamble(cfg.bin_of_offset(offs[r])) = lam(r);

    const auto& prow = cfg.pilot_rows();
    const auto& drow = cfg.data_rows();
    const auto pvals = cfg.pilot_values();
    std::size_t idx = 0;
    for (int i = 0; i < cfg.n_symbols; ++i) {
        for (std::size_t p = 0; p < prow.size(); ++p) {
            const int bin = cfg.bin_of_offset(offs[prow[p]]);
            g.values(bin, i) = pvals(p);
            g.pilot_mask(bin, i) = true;
        }
        for (int r : drow) g.values(cfg.bin_of_offset(offs[r]), i) = data[idx++];
    }
    return g;
}

FrameGrid assemble_wi_frame(const std::vector<cd>& data, const PhyConfig& cfg,
                            const std::vector<int>& pilot_symbol_positions,
                            const std::vector<int>& lp_rows) {
    for (std::size_t i = 1; i < pilot_symbol_positions.size(); ++i)
        if (pilot_symbol_positions[i] <= pilot_symbol_positions[i - 1])
            throw ConfigError("pilot symbol positions must be strictly increasing");
    for (int p : pilot_symbol_positions)
        if (p < 1 || p > cfg.n_symbols) throw ConfigError("pilot symbol position out of range");

    const int n_data_syms = cfg.n_symbols - static_cast<int>(pilot_symbol_positions.size());
    if (static_cast<int>(data.size()) != cfg.k_on() * n_data_syms)
        throw ShapeError("data symbol count does not match K_on * I_d");

    FrameGrid g;
    g.values = Eigen::MatrixXcd::Zero(cfg.k_total, cfg.n_symbols);
    g.pilot_mask.setConstant(cfg.k_total, cfg.n_symbols, false);
    g.preamble = Eigen::VectorXcd::Zero(cfg.k_total);

    const auto& offs = cfg.active_offsets();
    const auto lam = cfg.preamble_active();
    for (int r = 0; r < cfg.k_on(); ++r) g.preamble(cfg.bin_of_offset(offs[r])) = lam(r);

    std::size_t idx = 0;
    for (int i = 0; i < cfg.n_symbols; ++i) {
        const bool is_pilot_sym =
            std::find(pilot_symbol_positions.begin(), pilot_symbol_positions.end(), i + 1) !=
            pilot_symbol_positions.end();
        if (is_pilot_sym) {
            if (lp_rows.empty()) {
                for (int r = 0; r < cfg.k_on(); ++r) {
                    const int bin = cfg.bin_of_offset(offs[r]);
                    g.values(bin, i) = lam(r);
                    g.pilot_mask(bin, i) = true;
                }
            } else {
                for (int r : lp_rows) {
                    const int bin = cfg.bin_of_offset(offs[r]);
                    g.values(bin, i) = lam(r);
                    g.pilot_mask(bin, i) = true;
                }
            }
        } else {
            for (int r = 0; r < cfg.k_on(); ++r)
                g.values(cfg.bin_of_offset(offs[r]), i) = data[idx++];
        }
    }
    return g;
}

TimeSignal ofdm_modulate(const FrameGrid& grid, const PhyConfig& cfg) {
    if (grid.values.rows() != cfg.k_total || grid.values.cols() != cfg.n_symbols)
        throw ShapeError("grid dimensions do not match PhyConfig");
    const UnitaryDft dft(cfg.k_total);
    TimeSignal sig;
    sig.sample_rate = cfg.sample_rate;
    sig.samples.reserve(cfg.frame_samples());

    auto emit = [&](const Eigen::VectorXcd& bins) {
        const Eigen::VectorXcd t = dft.inverse(bins);
        for (int n = cfg.k_total - cfg.cp_len; n < cfg.k_total; ++n) sig.samples.push_back(t(n));
        for (int n = 0; n < cfg.k_total; ++n) sig.samples.push_back(t(n));
    };

    for (int p = 0; p < cfg.n_preambles; ++p) emit(grid.preamble);
    for (int i = 0; i < cfg.n_symbols; ++i) emit(grid.values.col(i));
    return sig;
}

FrameGrid ofdm_demodulate(const TimeSignal& sig, const PhyConfig& cfg) {
    if (static_cast<int>(sig.samples.size()) < cfg.frame_samples())
        throw ShapeError("time signal shorter than one frame");
    const UnitaryDft dft(cfg.k_total);
    FrameGrid g;
    g.values.resize(cfg.k_total, cfg.n_symbols);
    g.pilot_mask.setConstant(cfg.k_total, cfg.n_symbols, false);
    g.preamble = Eigen::VectorXcd::Zero(cfg.k_total);
    g.preamble_rx.resize(cfg.k_total, cfg.n_preambles);

    const auto& offs = cfg.active_offsets();
    const auto lam = cfg.preamble_active();
    for (int r = 0; r < cfg.k_on(); ++r) g.preamble(cfg.bin_of_offset(offs[r])) = lam(r);

    const int s = cfg.samples_per_symbol();
    Eigen::VectorXcd t(cfg.k_total);
    for (int sym = 0; sym < cfg.n_preambles + cfg.n_symbols; ++sym) {
        const int base = sym * s + cfg.cp_len;
        for (int n = 0; n < cfg.k_total; ++n) t(n) = sig.samples[base + n];
        if (sym < cfg.n_preambles)
            g.preamble_rx.col(sym) = dft.forward(t);
        else
            g.values.col(sym - cfg.n_preambles) = dft.forward(t);
    }
    return g;
}

}  // namespace ddce::phy
