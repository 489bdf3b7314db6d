#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "ddce/errors.hpp"

namespace ddce::phy {

using cd = std::complex<double>;

enum class Modulation { QPSK, QAM16 };

int bits_per_symbol(Modulation m);

/// Constellation points in lexicographic order (real, then imag); this is the
/// tie-break order for demapping. All constellations have unit average energy.
const std::vector<cd>& constellation(Modulation m);

/// IEEE 802.11p-style OFDM parameterization.
///
/// Subcarriers are addressed by signed offsets relative to DC. The 52 active
/// offsets are -26..-1 and 1..26 (DC unused); pilots sit at {-21,-7,7,21}.
struct PhyConfig {
    int k_total = 64;       ///< K, DFT size
    int n_pilot_sc = 4;     ///< K_p, pilot subcarriers per symbol
    int n_data_sc = 48;     ///< K_d, data subcarriers per symbol
    int cp_len = 16;        ///< cyclic prefix samples
    int n_symbols = 100;    ///< I, payload OFDM symbols per frame
    double sample_rate = 10e6;
    Modulation modulation = Modulation::QPSK;
    int n_preambles = 2;    ///< P, repetitions of the preamble symbol

    int k_on() const { return n_pilot_sc + n_data_sc; }
    int samples_per_symbol() const { return k_total + cp_len; }
    double symbol_duration() const { return samples_per_symbol() / sample_rate; }
    int frame_samples() const { return (n_preambles + n_symbols) * samples_per_symbol(); }

    /// Active subcarrier offsets in row order (-26..-1, 1..26).
    const std::vector<int>& active_offsets() const;
    /// Row indices (into the active ordering) of pilot / data subcarriers.
    const std::vector<int>& pilot_rows() const;
    const std::vector<int>& data_rows() const;
    int bin_of_offset(int off) const { return (off % k_total + k_total) % k_total; }

    /// Predefined preamble sequence on the active rows (802.11 long-training
    /// BPSK sequence).
    Eigen::VectorXcd preamble_active() const;
    /// Pilot values at the pilot rows, fixed over the frame ({1,1,1,-1} on
    /// offsets {-21,-7,7,21}).
    Eigen::VectorXcd pilot_values() const;

    void validate() const;

    static PhyConfig ieee80211p(int n_symbols = 100, Modulation m = Modulation::QPSK);
};

/// Frequency-domain frame: K x I complex grid plus pilot layout and the
/// predefined preamble sequence. For received frames, `preamble_rx` carries
/// the P demodulated preamble symbols.
struct FrameGrid {
    Eigen::MatrixXcd values;                    ///< K x I
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> pilot_mask;  ///< K x I
    Eigen::VectorXcd preamble;                  ///< K bins, the sequence Lambda
    Eigen::MatrixXcd preamble_rx;               ///< K x P, filled on demodulation
};

struct TimeSignal {
    std::vector<cd> samples;
    double sample_rate = 10e6;
};

/// Gray-map a bit vector onto constellation symbols.
std::vector<cd> modulate(const std::vector<std::uint8_t>& bits, Modulation m);

/// Nearest-constellation-point decision; ties break toward the
/// lexicographically smallest point (real part first, then imaginary).
std::vector<cd> demap(const std::vector<cd>& symbols, Modulation m);
cd demap_symbol(const cd& s, Modulation m);

/// Bits of an exact constellation point (inverse of the Gray mapping).
void append_bits(const cd& point, Modulation m, std::vector<std::uint8_t>& out);

/// Lay out data symbols and pilots on the grid. `data` must hold
/// K_d * I symbols; pilots go on the pilot rows of every symbol.
FrameGrid assemble_frame(const std::vector<cd>& data, const PhyConfig& cfg);

/// Frame with P full-pilot symbols (preamble sequence reused as the pilot
/// symbol) at `pilot_symbol_positions` (1-based); remaining symbols carry
/// data on all active subcarriers. With `lp_rows` nonempty, pilot symbols
/// carry pilots only on those rows (reduced-pilot scheme) and zeros elsewhere.
FrameGrid assemble_wi_frame(const std::vector<cd>& data, const PhyConfig& cfg,
                            const std::vector<int>& pilot_symbol_positions,
                            const std::vector<int>& lp_rows = {});

TimeSignal ofdm_modulate(const FrameGrid& grid, const PhyConfig& cfg);
FrameGrid ofdm_demodulate(const TimeSignal& sig, const PhyConfig& cfg);

}  // namespace ddce::phy
