#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ddce/phy.hpp"

namespace ddce::channel {

using cd = std::complex<double>;

/// Tapped-delay-line vehicular channel model (gains/delays per Table IV-style
/// measurement profiles) with a Jakes Doppler spectrum.
struct ChannelModel {
    std::string name;
    std::vector<double> path_gains_db;
    std::vector<double> path_delays_ns;
    double doppler_hz = 0.0;
    double velocity_kmph = 0.0;

    /// Nominal tap count of the profile (before sample-spacing).
    int n_paths() const { return static_cast<int>(path_gains_db.size()); }

    /// Sample-spaced taps: delays rounded to the nearest sample, coincident
    /// taps merged by adding their linear powers, total power normalized to 1.
    struct SampledTaps {
        std::vector<int> delays;    ///< in samples, strictly increasing
        std::vector<double> powers; ///< linear, sums to 1
        int span() const { return delays.empty() ? 0 : delays.back() + 1; }
    };
    SampledTaps sampled_taps(double sample_rate) const;

    static ChannelModel vtv_uc();
    static ChannelModel vtv_sdww(double doppler_hz = 500.0);
    static ChannelModel by_name(const std::string& name, double doppler_hz);
};

/// One realization of the LTV channel: per-sample complex trajectories of the
/// sample-spaced taps over a frame.
struct ChannelRealization {
    Eigen::MatrixXcd taps;        ///< L x N, tap l at sample n
    std::vector<int> delays;      ///< sample delay of each row
    std::vector<double> powers;   ///< configured linear power of each row
    double doppler_hz = 0.0;
    double sample_rate = 10e6;
    std::uint64_t seed = 0;
    std::string model_name;

    int n_taps() const { return static_cast<int>(taps.rows()); }
    int n_samples() const { return static_cast<int>(taps.cols()); }
};

/// Per-symbol averaged frequency response on the active subcarriers
/// (the estimation target and NMSE reference).
struct TrueChannelGrid {
    Eigen::MatrixXcd h;  ///< K_on x I
};

/// Sum-of-sinusoids Jakes synthesis, one independent process per tap.
/// Same (model, n_samples, seed) always yields the same realization.
ChannelRealization generate_channel(const ChannelModel& model, int n_samples,
                                    std::uint64_t seed, double sample_rate = 10e6,
                                    int n_oscillators = 64);

/// y[n] = sum_l h[l,n] x[n - delay_l], zero history before the signal start.
phy::TimeSignal apply_channel(const phy::TimeSignal& sig, const ChannelRealization& ch);

/// Complex AWGN with per-sample variance sigma^2 = mean|x|^2 / 10^(snr/10).
/// snr_db = +infinity leaves the signal unchanged.
phy::TimeSignal add_awgn(const phy::TimeSignal& sig, double snr_db, std::uint64_t seed);

/// Intra-symbol average response per payload symbol and active subcarrier.
TrueChannelGrid true_channel_grid(const ChannelRealization& ch, const phy::PhyConfig& cfg);

/// Empirical per-subcarrier Doppler-interference variance, estimated by
/// evaluating the ICI double sum against random unit-energy symbols.
Eigen::VectorXd doppler_interference_variance(const ChannelRealization& ch,
                                              const phy::PhyConfig& cfg,
                                              int n_draws = 100, std::uint64_t seed = 1);

/// Cross-subcarrier interference correlation magnitudes
/// |E[e_d[k] e_d*[k']]| normalized by the mean interference power, as a
/// K_on x K_on matrix. The expectation spans channel realizations, symbols,
/// and symbol draws. Note that the interference of nearby subcarriers stays
/// correlated at these parameters (the Doppler spread is far below one DFT
/// bin); the delta structure only emerges with separation.
Eigen::MatrixXd doppler_interference_crosscorr(const ChannelModel& model,
                                               const phy::PhyConfig& cfg,
                                               int n_realizations = 50, int n_draws = 20,
                                               std::uint64_t seed = 1);

/// Little-endian binary trace: header {magic "DDCECH1\0", u32 L, u64 N,
/// f64 doppler_hz, u32 model_id}, then row-major complex64 taps.
void write_trace(const std::string& path, const ChannelRealization& ch);
ChannelRealization read_trace(const std::string& path);

}  // namespace ddce::channel
