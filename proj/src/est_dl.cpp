#include "ddce/est_dl.hpp"

#include <cmath>

#include "ddce/errors.hpp"

namespace ddce::est_dl {

Eigen::VectorXd stack_ri(const Eigen::VectorXcd& v) {
    Eigen::VectorXd out(2 * v.size());
    out.head(v.size()) = v.real();
    out.tail(v.size()) = v.imag();
    return out;
}

Eigen::VectorXcd unstack_ri(const Eigen::VectorXd& v) {
    const long n = v.size() / 2;
    Eigen::VectorXcd out(n);
    out.real() = v.head(n);
    out.imag() = v.tail(n);
    return out;
}

Eigen::MatrixXd grid_to_image(const Eigen::MatrixXcd& grid) {
    const long kon = grid.rows(), ni = grid.cols();
    Eigen::MatrixXd img(2 * kon * ni, 1);
    for (long i = 0; i < ni; ++i) {
        img.col(0).segment(i * 2 * kon, kon) = grid.col(i).real();
        img.col(0).segment(i * 2 * kon + kon, kon) = grid.col(i).imag();
    }
    return img;
}

Eigen::MatrixXcd image_to_grid(const Eigen::MatrixXd& img, int k_on, int n_symbols) {
    if (img.rows() != 2L * k_on * n_symbols || img.cols() != 1)
        throw ShapeError("image dimensions do not match 2K_on x I x 1");
    Eigen::MatrixXcd grid(k_on, n_symbols);
    for (int i = 0; i < n_symbols; ++i) {
        grid.col(i).real() = img.col(0).segment(static_cast<long>(i) * 2 * k_on, k_on);
        grid.col(i).imag() = img.col(0).segment(static_cast<long>(i) * 2 * k_on + k_on, k_on);
    }
    return grid;
}

namespace {

Eigen::VectorXcd current_pilot_ls(const RxFrame& rx, int sym) {
    const auto& prow = rx.cfg->pilot_rows();
    const auto pv = rx.cfg->pilot_values();
    Eigen::VectorXcd out(prow.size());
    for (std::size_t p = 0; p < prow.size(); ++p) out(p) = rx.y(prow[p], sym) / pv(p).real();
    return out;
}

}  // namespace

ChannelEstimate fnn_estimator(FnnKind kind, const RxFrame& rx, const Eigen::VectorXcd& h_init,
                              const nn::FnnNet& net, const est_conv::StaParams& sta_params,
                              bool open_loop) {
    const auto& cfg = *rx.cfg;
    if (net.layers.front().n_in != 2 * cfg.k_on() || net.layers.back().n_out != 2 * cfg.k_on())
        throw ConfigError("FNN estimator expects a 2K_on -> 2K_on network");

    ChannelEstimate est;
    est.method = kind == FnnKind::DPA ? "DPA-FNN" : kind == FnnKind::STA ? "STA-FNN" : "TRFI-FNN";
    est.h_hat.resize(cfg.k_on(), cfg.n_symbols);

    Eigen::VectorXcd h_feed = h_init;  // feeds the conventional recursion
    Eigen::VectorXcd h_conv = h_init;  // open-loop conventional state
    for (int i = 0; i < cfg.n_symbols; ++i) {
        Eigen::VectorXcd& state = open_loop ? h_conv : h_feed;
        Eigen::VectorXcd pre;
        switch (kind) {
            case FnnKind::DPA: pre = est_conv::dpa_step(rx.y.col(i), state, cfg); break;
            case FnnKind::STA: pre = est_conv::sta_step(rx.y.col(i), state, sta_params, cfg); break;
            case FnnKind::TRFI: {
                const Eigen::VectorXcd y_prev =
                    i == 0 ? rx.preambles.col(rx.preambles.cols() - 1) : rx.y.col(i - 1);
                pre = est_conv::trfi_step(y_prev, rx.y.col(i), state, cfg);
                break;
            }
        }
        const Eigen::VectorXcd refined = unstack_ri(net.forward(stack_ri(pre)));
        if (open_loop)
            h_conv = pre;
        else
            h_feed = refined;
        est.h_hat.col(i) = refined;
    }
    return est;
}

ChannelEstimate lstm_fnn_dpa(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                             const nn::LstmFnnNet& net) {
    const auto& cfg = *rx.cfg;
    const int kon = cfg.k_on();
    const int k_in = 2 * kon + 2 * cfg.n_pilot_sc;
    if (net.cell.k_in != k_in)
        throw ConfigError("LSTM-FNN-DPA expects K_in = 2K_on + 2K_p = " + std::to_string(k_in));

    ChannelEstimate est;
    est.method = "LSTM-FNN-DPA";
    est.h_hat.resize(kon, cfg.n_symbols);
    auto state = net.make_state(1);
    Eigen::VectorXcd h_prev = h_init;
    Eigen::VectorXd x(k_in);
    for (int i = 0; i < cfg.n_symbols; ++i) {
        x.head(2 * kon) = stack_ri(h_prev);
        x.tail(2 * cfg.n_pilot_sc) = stack_ri(current_pilot_ls(rx, i));
        const Eigen::VectorXcd h_net = unstack_ri(net.step(x, state));
        h_prev = est_conv::dpa_step(rx.y.col(i), h_net, cfg);
        est.h_hat.col(i) = h_prev;
    }
    return est;
}

ChannelEstimate lstm_dpa_ta(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                            const nn::LstmNet& net, double alpha) {
    const auto& cfg = *rx.cfg;
    const int kon = cfg.k_on();
    if (alpha < 1.0) throw ConfigError("TA weighting requires alpha >= 1");
    if (net.k_in() != 2 * kon || net.n_out() != 2 * kon)
        throw ConfigError("LSTM-DPA-TA expects a 2K_on -> 2K_on readout");

    ChannelEstimate est;
    est.method = "LSTM-DPA-TA";
    est.h_hat.resize(kon, cfg.n_symbols);
    auto state = net.make_state(1);
    Eigen::VectorXcd h_ta = h_init;
    for (int i = 0; i < cfg.n_symbols; ++i) {
        const Eigen::VectorXcd h_net = unstack_ri(net.step(stack_ri(h_ta), state));
        const Eigen::VectorXcd h_dpa = est_conv::dpa_step(rx.y.col(i), h_net, cfg);
        h_ta = est_conv::ta_blend(h_ta, h_dpa, alpha);
        est.h_hat.col(i) = h_ta;
    }
    return est;
}

ChannelEstimate channelnet(const RxFrame& rx, const est_conv::RbfInterpolator& rbf,
                           const nn::CnnNet& srcnn, const nn::CnnNet& dncnn) {
    const auto& cfg = *rx.cfg;
    const ChannelEstimate coarse = rbf.interpolate(est_conv::pilot_ls(rx));
    const Eigen::MatrixXd img = grid_to_image(coarse.h_hat);
    const int h = 2 * cfg.k_on(), w = cfg.n_symbols;
    if (img.rows() != static_cast<long>(h) * w) throw ShapeError("ChannelNet image dims");
    const Eigen::MatrixXd sr = srcnn.forward(img, h, w);
    const Eigen::MatrixXd noise = dncnn.forward(sr, h, w);
    ChannelEstimate est;
    est.method = "ChannelNet";
    est.h_hat = image_to_grid(sr - noise, cfg.k_on(), w);
    return est;
}

ChannelEstimate ts_channelnet(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                              const nn::ConvLstmNet& net, const est_conv::AddTtParams& params) {
    const auto& cfg = *rx.cfg;
    const ChannelEstimate pre = est_conv::add_tt(rx, h_init, params);
    const int h = 2 * cfg.k_on();
    std::vector<Eigen::MatrixXd> xs(cfg.n_symbols);
    for (int i = 0; i < cfg.n_symbols; ++i) xs[i] = stack_ri(pre.h_hat.col(i));
    const std::vector<Eigen::MatrixXd> ys = net.forward(xs, h, 1);
    ChannelEstimate est;
    est.method = "TS-ChannelNet";
    est.h_hat.resize(cfg.k_on(), cfg.n_symbols);
    for (int i = 0; i < cfg.n_symbols; ++i) est.h_hat.col(i) = unstack_ri(ys[i].col(0));
    return est;
}

bool wi_selects_dncnn(double doppler_hz) { return doppler_hz > 250.0; }

Eigen::VectorXd wi_noise_powers(const est_conv::WiFrameConfig& wi, double noise_var,
                                const phy::PhyConfig& cfg) {
    Eigen::VectorXd e(wi.n_pilot_symbols() + 1);
    e(0) = noise_var / cfg.n_preambles;
    double per_symbol = noise_var;
    if (wi.scheme != est_conv::WiFrameConfig::Scheme::FP_SLS)
        per_symbol = noise_var * wi.n_taps / cfg.k_on();  // delay-subspace projection gain
    e.tail(wi.n_pilot_symbols()).setConstant(per_symbol);
    return e;
}

Eigen::MatrixXcd wi_rx_pilot_symbols(const RxFrame& rx, const est_conv::WiFrameConfig& wi) {
    Eigen::MatrixXcd out(rx.y.rows(), wi.n_pilot_symbols());
    for (int q = 0; q < wi.n_pilot_symbols(); ++q)
        out.col(q) = rx.y.col(wi.pilot_symbol_positions[q] - 1);
    return out;
}

ChannelEstimate wi_cnn(const RxFrame& rx, const est_conv::WiFrameConfig& wi, double doppler_hz,
                       double noise_var, const nn::CnnNet& net, bool residual) {
    const auto& cfg = *rx.cfg;
    wi.validate(cfg);
    const Eigen::VectorXcd h0 = est_conv::ls_preamble(rx.preambles, cfg.preamble_active());
    const Eigen::MatrixXcd pest =
        est_conv::wi_pilot_estimates(wi_rx_pilot_symbols(rx, wi), wi, cfg);
    Eigen::MatrixXcd cols(cfg.k_on(), wi.n_pilot_symbols() + 1);
    cols.col(0) = h0;
    cols.rightCols(wi.n_pilot_symbols()) = pest;
    const ChannelEstimate interp = est_conv::wi_interpolate(
        cols, wi, doppler_hz, wi_noise_powers(wi, noise_var, cfg), cfg);

    const int h = 2 * cfg.k_on(), w = cfg.n_symbols;
    const Eigen::MatrixXd img = grid_to_image(interp.h_hat);
    const Eigen::MatrixXd out = net.forward(img, h, w);
    ChannelEstimate est;
    est.method = residual ? "WI-DN-CNN" : "WI-SR-CNN";
    est.h_hat = image_to_grid(residual ? Eigen::MatrixXd(img - out) : out, cfg.k_on(), w);
    return est;
}

// ---- training-pair extraction

SbsSequence fnn_training_pairs(FnnKind kind, const RxFrame& rx, const Eigen::VectorXcd& h_init,
                               const Eigen::MatrixXcd& h_true,
                               const est_conv::StaParams& sta_params) {
    const auto& cfg = *rx.cfg;
    ChannelEstimate pre;
    switch (kind) {
        case FnnKind::DPA: pre = est_conv::dpa(rx, h_init); break;
        case FnnKind::STA: pre = est_conv::sta(rx, h_init, sta_params); break;
        case FnnKind::TRFI: pre = est_conv::trfi(rx, h_init); break;
    }
    SbsSequence seq;
    seq.inputs.resize(2 * cfg.k_on(), cfg.n_symbols);
    seq.targets.resize(2 * cfg.k_on(), cfg.n_symbols);
    for (int i = 0; i < cfg.n_symbols; ++i) {
        seq.inputs.col(i) = stack_ri(pre.h_hat.col(i));
        seq.targets.col(i) = stack_ri(h_true.col(i));
    }
    return seq;
}

SbsSequence lstm_fnn_dpa_training_sequence(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                                           const Eigen::MatrixXcd& h_true) {
    const auto& cfg = *rx.cfg;
    const ChannelEstimate pre = est_conv::dpa(rx, h_init);
    const int kon = cfg.k_on();
    SbsSequence seq;
    seq.inputs.resize(2 * kon + 2 * cfg.n_pilot_sc, cfg.n_symbols);
    seq.targets.resize(2 * kon, cfg.n_symbols);
    for (int i = 0; i < cfg.n_symbols; ++i) {
        const Eigen::VectorXcd prev = i == 0 ? h_init : Eigen::VectorXcd(pre.h_hat.col(i - 1));
        seq.inputs.col(i).head(2 * kon) = stack_ri(prev);
        seq.inputs.col(i).tail(2 * cfg.n_pilot_sc) = stack_ri(current_pilot_ls(rx, i));
        seq.targets.col(i) = stack_ri(h_true.col(i));
    }
    return seq;
}

SbsSequence lstm_dpa_ta_training_sequence(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                                          const Eigen::MatrixXcd& h_true, double alpha) {
    const auto& cfg = *rx.cfg;
    const ChannelEstimate pre = est_conv::dpa_ta(rx, h_init, alpha);
    SbsSequence seq;
    seq.inputs.resize(2 * cfg.k_on(), cfg.n_symbols);
    seq.targets.resize(2 * cfg.k_on(), cfg.n_symbols);
    for (int i = 0; i < cfg.n_symbols; ++i) {
        const Eigen::VectorXcd prev = i == 0 ? h_init : Eigen::VectorXcd(pre.h_hat.col(i - 1));
        seq.inputs.col(i) = stack_ri(prev);
        seq.targets.col(i) = stack_ri(h_true.col(i));
    }
    return seq;
}

// ---- checkpoint helpers

namespace {

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == ' ') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

void save_fnn(const std::string& path, nn::FnnNet& net) {
    std::string arch = "fnn";
    for (int d : net.dims()) arch += " " + std::to_string(d);
    nn::save_params(path, arch, net.param_refs());
}

void save_lstm(const std::string& path, nn::LstmNet& net) {
    const std::string arch = "lstm " + std::to_string(net.cell.k_in) + " " +
                             std::to_string(net.cell.n_hidden) + " " + std::to_string(net.n_out());
    nn::save_params(path, arch, net.param_refs());
}

void save_lstm_fnn(const std::string& path, nn::LstmFnnNet& net) {
    std::string arch = "lstm-fnn " + std::to_string(net.cell.k_in) + " " +
                       std::to_string(net.cell.n_hidden);
    for (std::size_t l = 0; l < net.head.layers.size(); ++l)
        arch += " " + std::to_string(net.head.layers[l].n_out);
    nn::save_params(path, arch, net.param_refs());
}

void save_cnn(const std::string& path, nn::CnnNet& net, const std::string& tag) {
    nn::save_params(path, "cnn " + tag, net.param_refs());
}

void save_convlstm(const std::string& path, nn::ConvLstmNet& net) {
    std::string arch = "convlstm";
    for (const auto& c : net.cells)
        arch += " " + std::to_string(c.kh) + "," + std::to_string(c.c_hidden);
    nn::save_params(path, arch, net.param_refs());
}

nn::FnnNet load_fnn(const std::string& path) {
    const auto tok = split_ws(nn::peek_arch(path));
    if (tok.empty() || tok[0] != "fnn") throw IoError("not an FNN checkpoint: " + path);
    std::vector<int> dims;
    for (std::size_t j = 1; j < tok.size(); ++j) dims.push_back(std::stoi(tok[j]));
    nn::FnnNet net(dims, 0);
    nn::load_params(path, net.param_refs());
    return net;
}

nn::LstmNet load_lstm(const std::string& path) {
    const auto tok = split_ws(nn::peek_arch(path));
    if (tok.size() != 4 || tok[0] != "lstm") throw IoError("not an LSTM checkpoint: " + path);
    nn::LstmNet net(std::stoi(tok[1]), std::stoi(tok[2]), std::stoi(tok[3]), 0);
    nn::load_params(path, net.param_refs());
    return net;
}

nn::LstmFnnNet load_lstm_fnn(const std::string& path) {
    const auto tok = split_ws(nn::peek_arch(path));
    if (tok.size() < 4 || tok[0] != "lstm-fnn")
        throw IoError("not an LSTM-FNN checkpoint: " + path);
    std::vector<int> head;
    for (std::size_t j = 3; j < tok.size(); ++j) head.push_back(std::stoi(tok[j]));
    nn::LstmFnnNet net(std::stoi(tok[1]), std::stoi(tok[2]), head, 0);
    nn::load_params(path, net.param_refs());
    return net;
}

nn::CnnNet load_cnn(const std::string& path) {
    const auto tok = split_ws(nn::peek_arch(path));
    if (tok.size() < 2 || tok[0] != "cnn") throw IoError("not a CNN checkpoint: " + path);
    nn::CnnNet net;
    if (tok[1] == "srcnn")
        net = nn::CnnNet::srcnn(std::stoi(tok[2]), std::stoi(tok[3]), 0);
    else if (tok[1] == "dncnn")
        net = nn::CnnNet::dncnn(std::stoi(tok[2]), std::stoi(tok[3]), 0);
    else
        throw IoError("unknown CNN tag in " + path);
    nn::load_params(path, net.param_refs());
    return net;
}

nn::ConvLstmNet load_convlstm(const std::string& path) {
    const auto tok = split_ws(nn::peek_arch(path));
    if (tok.size() < 2 || tok[0] != "convlstm")
        throw IoError("not a ConvLSTM checkpoint: " + path);
    std::vector<nn::ConvLstmNet::LayerSpec> specs;
    for (std::size_t j = 1; j < tok.size(); ++j) {
        const auto comma = tok[j].find(',');
        specs.push_back({std::stoi(tok[j].substr(0, comma)), std::stoi(tok[j].substr(comma + 1))});
    }
    nn::ConvLstmNet net(specs, 1, 0);
    nn::load_params(path, net.param_refs());
    return net;
}

// ---- published architectures

nn::FnnNet make_dpa_fnn(std::uint64_t seed) { return nn::FnnNet({104, 40, 20, 40, 104}, seed); }

nn::FnnNet make_sta_fnn(std::uint64_t seed) { return nn::FnnNet({104, 15, 15, 15, 104}, seed); }

nn::LstmFnnNet make_lstm_fnn(std::uint64_t seed) { return nn::LstmFnnNet(112, 128, {40, 104}, seed); }

nn::LstmNet make_lstm_dpa_ta(std::uint64_t seed) { return nn::LstmNet(104, 128, 104, seed); }

nn::CnnNet make_channelnet_srcnn(std::uint64_t seed) { return nn::CnnNet::srcnn(64, 32, seed); }

nn::CnnNet make_channelnet_dncnn(std::uint64_t seed) { return nn::CnnNet::dncnn(18, 64, seed); }

nn::CnnNet make_optimized_srcnn(std::uint64_t seed) { return nn::CnnNet::srcnn(32, 16, seed); }

nn::CnnNet make_optimized_dncnn(std::uint64_t seed) { return nn::CnnNet::dncnn(7, 16, seed); }

nn::ConvLstmNet make_sr_convlstm(std::uint64_t seed) {
    return nn::ConvLstmNet({{9, 64}, {1, 32}, {5, 1}}, 1, seed);
}

}  // namespace ddce::est_dl
