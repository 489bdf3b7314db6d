#pragma once

#include "ddce/est_conv.hpp"
#include "ddce/nn.hpp"

namespace ddce::est_dl {

using est_conv::ChannelEstimate;
using est_conv::RxFrame;

// Complex grids enter the networks as stacked real/imag values: a K_on
// vector becomes a 2K_on real vector [Re; Im], a K_on x I grid becomes a
// 2K_on x I image. Stacking round-trips exactly.
Eigen::VectorXd stack_ri(const Eigen::VectorXcd& v);
Eigen::VectorXcd unstack_ri(const Eigen::VectorXd& v);
/// (2*K_on*I) x 1 single-channel image, pixel (r, i) at r + i*2K_on.
Eigen::MatrixXd grid_to_image(const Eigen::MatrixXcd& grid);
Eigen::MatrixXcd image_to_grid(const Eigen::MatrixXd& img, int k_on, int n_symbols);

enum class FnnKind { DPA, STA, TRFI };

/// FNN post-processing pipelines (DPA-FNN / STA-FNN / TRFI-FNN). The network
/// output feeds the next symbol's conventional recursion (closed loop);
/// `open_loop` keeps the conventional chain untouched and applies the net
/// per symbol, for ablation.
ChannelEstimate fnn_estimator(FnnKind kind, const RxFrame& rx, const Eigen::VectorXcd& h_init,
                              const nn::FnnNet& net, const est_conv::StaParams& sta_params = {},
                              bool open_loop = false);

/// Cascaded LSTM + FNN ahead of the DPA update. Per symbol the network sees
/// [previous estimate ; current pilot LS] (K_in = 2K_on + 2K_p).
ChannelEstimate lstm_fnn_dpa(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                             const nn::LstmFnnNet& net);

/// Single LSTM ahead of the DPA update, with exponential time averaging
/// (weight 1/alpha) as the noise suppressor.
ChannelEstimate lstm_dpa_ta(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                            const nn::LstmNet& net, double alpha = 2.0);

/// RBF-interpolated pilot grid -> SR-CNN -> DN-CNN residual subtraction.
ChannelEstimate channelnet(const RxFrame& rx, const est_conv::RbfInterpolator& rbf,
                           const nn::CnnNet& srcnn, const nn::CnnNet& dncnn);

/// ADD-TT grid -> SR-ConvLSTM over the symbol axis.
ChannelEstimate ts_channelnet(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                              const nn::ConvLstmNet& net,
                              const est_conv::AddTtParams& params = {});

/// WI interpolation -> optimized CNN. With `residual` the network output is
/// treated as a noise estimate and subtracted (DN-CNN); otherwise the output
/// is the estimate itself (SR-CNN).
ChannelEstimate wi_cnn(const RxFrame& rx, const est_conv::WiFrameConfig& wi, double doppler_hz,
                       double noise_var, const nn::CnnNet& net, bool residual);

/// Mobility-based CNN selection rule: DN-CNN above 250 Hz, SR-CNN otherwise.
bool wi_selects_dncnn(double doppler_hz);

/// Noise energies E_q for the WI weight system: column 0 is the frame-start
/// LS estimate, the rest the P pilot-symbol estimates.
Eigen::VectorXd wi_noise_powers(const est_conv::WiFrameConfig& wi, double noise_var,
                                const phy::PhyConfig& cfg);

/// Received pilot-symbol columns of a WI frame.
Eigen::MatrixXcd wi_rx_pilot_symbols(const RxFrame& rx, const est_conv::WiFrameConfig& wi);

// ---- training-pair extraction (teacher-forced on the conventional pre-stage)

struct SbsSequence {
    Eigen::MatrixXd inputs;   ///< K_in x I
    Eigen::MatrixXd targets;  ///< n_out x I
};

/// Per-symbol (conventional estimate, true channel) pairs for the FNN kinds.
SbsSequence fnn_training_pairs(FnnKind kind, const RxFrame& rx, const Eigen::VectorXcd& h_init,
                               const Eigen::MatrixXcd& h_true,
                               const est_conv::StaParams& sta_params = {});

/// Input sequence [conventional DPA estimate at t-1 ; pilot LS at t].
SbsSequence lstm_fnn_dpa_training_sequence(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                                           const Eigen::MatrixXcd& h_true);

/// Input sequence = conventional DPA-TA estimate at t-1.
SbsSequence lstm_dpa_ta_training_sequence(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                                          const Eigen::MatrixXcd& h_true, double alpha = 2.0);

// ---- checkpoint helpers (architecture string + float32 tensors)

void save_fnn(const std::string& path, nn::FnnNet& net);
void save_lstm(const std::string& path, nn::LstmNet& net);
void save_lstm_fnn(const std::string& path, nn::LstmFnnNet& net);
void save_cnn(const std::string& path, nn::CnnNet& net, const std::string& tag);
void save_convlstm(const std::string& path, nn::ConvLstmNet& net);

nn::FnnNet load_fnn(const std::string& path);
nn::LstmNet load_lstm(const std::string& path);
nn::LstmFnnNet load_lstm_fnn(const std::string& path);
nn::CnnNet load_cnn(const std::string& path);
nn::ConvLstmNet load_convlstm(const std::string& path);

// published architectures (Tables II-III)
nn::FnnNet make_dpa_fnn(std::uint64_t seed);                  // 104-40-20-40-104
nn::FnnNet make_sta_fnn(std::uint64_t seed);                  // 104-15-15-15-104
nn::LstmFnnNet make_lstm_fnn(std::uint64_t seed);             // K_in=112, P=128, head 40
nn::LstmNet make_lstm_dpa_ta(std::uint64_t seed);             // K_in=104, P=128, readout 104
nn::CnnNet make_channelnet_srcnn(std::uint64_t seed);         // (9,64;1,32;5,1)
nn::CnnNet make_channelnet_dncnn(std::uint64_t seed);         // 18 layers, 64 maps
nn::CnnNet make_optimized_srcnn(std::uint64_t seed);          // (9,32;1,16;5,1)
nn::CnnNet make_optimized_dncnn(std::uint64_t seed);          // 7 layers, 16 maps
nn::ConvLstmNet make_sr_convlstm(std::uint64_t seed);         // (9,64;1,32;5,1)

}  // namespace ddce::est_dl
