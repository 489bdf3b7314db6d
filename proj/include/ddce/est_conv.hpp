#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "ddce/channel.hpp"
#include "ddce/opcount.hpp"
#include "ddce/phy.hpp"

namespace ddce::est_conv {

using cd = std::complex<double>;
using phy::PhyConfig;

/// Received frame reduced to the active subcarriers.
struct RxFrame {
    Eigen::MatrixXcd y;          ///< K_on x I
    Eigen::MatrixXcd preambles;  ///< K_on x P
    const PhyConfig* cfg = nullptr;

    static RxFrame from_grid(const phy::FrameGrid& grid, const PhyConfig& cfg);
};

struct ChannelEstimate {
    Eigen::MatrixXcd h_hat;  ///< K_on x I
    std::string method;
    std::vector<int> rs_sizes;  ///< per-symbol reliable-set sizes (TRFI only)
};

/// h_LS[k] = (sum_u y_u[k]) / (P * Lambda[k]).
Eigen::VectorXcd ls_preamble(const Eigen::MatrixXcd& rx_preambles,
                             const Eigen::VectorXcd& preamble, OpCounter* counter = nullptr);

// ---- per-symbol steps (shared by the conventional loops and the DL pipelines)

/// Equalize by h_prev, demap (data rows; pilot rows use the known pilots),
/// then h[k] = y[k] / d[k].
Eigen::VectorXcd dpa_step(const Eigen::VectorXcd& y, const Eigen::VectorXcd& h_prev,
                          const PhyConfig& cfg, OpCounter* counter = nullptr);

struct StaParams {
    double alpha = 2.0;
    int beta = 2;
};

/// DPA update from h_prev, then frequency averaging (data rows, clamped
/// window, weight 1/(2*beta+1)) and time averaging against h_prev.
/// alpha == 1 and beta == 0 degenerate to dpa_step bit-exactly.
Eigen::VectorXcd sta_step(const Eigen::VectorXcd& y, const Eigen::VectorXcd& h_prev,
                          const StaParams& p, const PhyConfig& cfg, OpCounter* counter = nullptr);

/// TRFI step: DPA update from h_prev, dual equalization of the previous
/// symbol, reliable/unreliable split, cubic interpolation of the unreliable
/// subcarriers. Returns the estimate; rs_size receives |RS|.
Eigen::VectorXcd trfi_step(const Eigen::VectorXcd& y_prev, const Eigen::VectorXcd& y,
                           const Eigen::VectorXcd& h_prev, const PhyConfig& cfg,
                           int* rs_size = nullptr, OpCounter* counter = nullptr);

struct AddTtParams {
    double alpha = 0.5;  ///< direct weight in (1-alpha) h_prev + alpha h_FTT
    int beta = 2;
    int trunc_len = 12;  ///< taps kept by the time-domain truncation
};

Eigen::VectorXcd add_tt_step(const Eigen::VectorXcd& y, const Eigen::VectorXcd& h_prev,
                             const AddTtParams& p, const PhyConfig& cfg,
                             OpCounter* counter = nullptr);

// ---- whole-frame conventional estimators

ChannelEstimate dpa(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                    OpCounter* counter = nullptr);
ChannelEstimate sta(const RxFrame& rx, const Eigen::VectorXcd& h_init, const StaParams& p = {},
                    OpCounter* counter = nullptr);
ChannelEstimate trfi(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                     OpCounter* counter = nullptr);
ChannelEstimate add_tt(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                       const AddTtParams& p = {}, OpCounter* counter = nullptr);
/// DPA followed by exponential time averaging with weight 1/alpha
/// (the conventional pre-stage of the LSTM-DPA-TA pipeline).
ChannelEstimate dpa_ta(const RxFrame& rx, const Eigen::VectorXcd& h_init, double alpha = 2.0,
                       OpCounter* counter = nullptr);

/// (1 - 1/alpha) prev + (1/alpha) cur; alpha = 2 runs as (prev + cur)/2,
/// which is what the TA op-count assumes. alpha = 1 returns cur unchanged.
Eigen::VectorXcd ta_blend(const Eigen::VectorXcd& prev, const Eigen::VectorXcd& cur, double alpha,
                          OpCounter* counter = nullptr);

/// LS at the comb pilot positions of every symbol: K_p x I.
Eigen::MatrixXcd pilot_ls(const RxFrame& rx, OpCounter* counter = nullptr);

// ---- 2D RBF interpolation

/// Gaussian-kernel RBF interpolation of the K_p x I pilot LS grid onto the
/// full K_on x I grid. Grid coordinates are (active row index, symbol index).
/// The Gram system is solved once per (config, r0); an ill-conditioned system
/// is ridge-regularized with a warning.
class RbfInterpolator {
  public:
    RbfInterpolator(const PhyConfig& cfg, double r0 = 16.0);
    ChannelEstimate interpolate(const Eigen::MatrixXcd& pilot_ls_grid,
                                OpCounter* counter = nullptr) const;
    bool regularized() const { return regularized_; }
    double r0() const { return r0_; }

  private:
    const PhyConfig cfg_;
    double r0_;
    bool regularized_ = false;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
    Eigen::MatrixXd eval_;  ///< (K_on * I) x (K_p * I), vec index = i*K_on + r
};

ChannelEstimate rbf_interpolate(const Eigen::MatrixXcd& pilot_ls_grid, double r0,
                                const PhyConfig& cfg);

// ---- WI family

struct WiFrameConfig {
    enum class Scheme { FP_SLS, FP_ALS, LP };
    std::vector<int> pilot_symbol_positions;  ///< 1-based, strictly increasing
    Scheme scheme = Scheme::FP_ALS;
    int n_taps = 12;            ///< L: ALS/LP delay-subspace dimension
    std::vector<int> lp_rows;   ///< LP pilot rows (exactly n_taps of them)

    int n_pilot_symbols() const { return static_cast<int>(pilot_symbol_positions.size()); }
    int n_data_symbols(int n_symbols) const { return n_symbols - n_pilot_symbols(); }
    void validate(const PhyConfig& cfg) const;

    static std::vector<int> default_positions(int n_symbols, int p);
    static std::vector<int> default_lp_rows(int k_on, int n_taps);
    static WiFrameConfig standard(const PhyConfig& cfg, Scheme scheme, int p = 3);
};

/// Channel estimates at the P inserted pilot symbols (SLS division, ALS
/// delay-subspace projection, or LP reduced-pilot recovery): K_on x P.
Eigen::MatrixXcd wi_pilot_estimates(const Eigen::MatrixXcd& rx_pilot_symbols,
                                    const WiFrameConfig& wi, const PhyConfig& cfg,
                                    OpCounter* counter = nullptr);

/// Weighted interpolation across each sub-frame. `pilot_estimates` is
/// K_on x (P+1) with column 0 the frame-start LS estimate; `noise_powers`
/// holds the per-column estimate noise energies E_q. Output covers the full
/// K_on x I grid (pilot symbol columns carry their own estimates).
ChannelEstimate wi_interpolate(const Eigen::MatrixXcd& pilot_estimates, const WiFrameConfig& wi,
                               double doppler_hz, const Eigen::VectorXd& noise_powers,
                               const PhyConfig& cfg, OpCounter* counter = nullptr);

// ---- 2D LMMSE bound

/// Separable second-order statistics: power-delay-profile frequency
/// correlation times J0 Doppler time correlation.
struct ChannelStats {
    Eigen::MatrixXcd r_freq;  ///< K_on x K_on
    Eigen::MatrixXd r_time;   ///< I x I

    static ChannelStats from_model(const channel::ChannelModel& model, const PhyConfig& cfg);
};

/// LMMSE from observations at arbitrary grid coordinates:
/// H = R_dp (R_pp + sigma^2 I)^{-1} h_ls.
ChannelEstimate lmmse_2d(const std::vector<std::pair<int, int>>& obs_coords,
                         const Eigen::VectorXcd& obs_values, const ChannelStats& stats,
                         double noise_var, const PhyConfig& cfg);

/// Genie data-aided bound: observations on the full K_on x I grid, applied
/// through the separable eigendecomposition (exactly R (R + sigma^2 I)^{-1}).
class Lmmse2DFull {
  public:
    Lmmse2DFull(const ChannelStats& stats, double noise_var);
    Eigen::MatrixXcd apply(const Eigen::MatrixXcd& h_obs) const;

  private:
    Eigen::MatrixXcd u_freq_;
    Eigen::MatrixXd u_time_;
    Eigen::MatrixXd shrink_;  ///< per-mode gain lambda_f*lambda_t / (lambda_f*lambda_t + sigma^2)
};

/// Natural cubic spline through (x, y) evaluated at xq; queries outside the
/// hull clamp to the nearest knot value.
Eigen::VectorXd spline_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& xq);

}  // namespace ddce::est_conv
