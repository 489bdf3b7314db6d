#include "ddce/complexity.hpp"

#include <random>

#include "ddce/dft.hpp"
#include "ddce/errors.hpp"
#include "ddce/est_conv.hpp"

namespace ddce::complexity {

void CostParams::validate() const {
    const std::pair<const char*, std::int64_t> fields[] = {
        {"k_on", k_on}, {"k_d", k_d},   {"k_p", k_p}, {"k_int", k_int},    {"k_in", k_in},
        {"l", l},       {"i", i},       {"i_d", i_d}, {"p", p},            {"p_hidden", p_hidden}};
    for (const auto& [name, v] : fields)
        if (v < 0) throw ConfigError(std::string("parameter ") + name + " must be >= 0");
}

namespace {

/// FNN block of Table VI: identical muldiv and addsub counts.
std::int64_t fnn_block(std::int64_t k_on, std::int64_t j2, std::int64_t j3, std::int64_t j4) {
    return 2 * k_on * j2 + j2 * j3 + j3 * j4 + 2 * k_on * j4;
}

}  // namespace

OpCount count_sbs(SbsEstimator est, const CostParams& q) {
    q.validate();
    const std::int64_t kon = q.k_on, kd = q.k_d, kint = q.k_int, kin = q.k_in, p = q.p_hidden;
    OpCount per_symbol;
    switch (est) {
        case SbsEstimator::LS:
            return {2 * kon, 2 * kon};  // once per frame, not per symbol
        case SbsEstimator::DPA:
            per_symbol = {18 * kon, 8 * kon};
            break;
        case SbsEstimator::STA:
            per_symbol = {22 * kon + 2 * kd, 10 * kon + 10 * kd};
            break;
        case SbsEstimator::TRFI:
            per_symbol = {34 * kon + 26 * kint, 14 * kon + 30 * kint};
            break;
        case SbsEstimator::DPA_FNN:
            per_symbol = {178 * kon + 1600, 168 * kon + 1600};
            break;
        case SbsEstimator::STA_FNN:
            per_symbol = {82 * kon + 2 * kd + 450, 70 * kon + 10 * kd + 450};
            break;
        case SbsEstimator::TRFI_FNN:
            per_symbol = {94 * kon + 26 * kint + 450, 74 * kon + 30 * kint + 450};
            break;
        case SbsEstimator::LSTM_FNN_DPA:
            per_symbol = {512 * kin + 98 * kd + 71040, 4 * kin + 88 * kd + 6776};
            break;
        case SbsEstimator::LSTM_DPA_TA:
            per_symbol = {4 * p * p + p * (8 * kon + 3) + 18 * kd + 2 * kon,
                          13 * p + 10 * kon + 8 * kd - 8};
            break;
    }
    return q.i * per_symbol;
}

OpCount count_fbf(FbfEstimator est, const CostParams& q) {
    q.validate();
    const std::int64_t kon = q.k_on, kd = q.k_d, kp = q.k_p, l = q.l, i = q.i, id = q.i_d,
                       p = q.p;
    // published per-pixel CNN coefficients (Table VII)
    const OpCount srcnn{7008 * kon * id, 1120 * kon * id};
    const OpCount dncnn{84096 * kon * id, 9856 * kon * id};
    const OpCount wi_term{4 * kon * id, 2 * kon * id};

    switch (est) {
        case FbfEstimator::CHANNELNET: {
            const OpCount interp{kp * kp * i * i * (4 + kd * i) + kp * i * (2 + 3 * kd * i),
                                 kp * i * (5 * kp * i + 5 * kd * i - 2)};
            return interp + OpCount{350144 * kon * i, 42432 * kon * i};
        }
        case FbfEstimator::TS_CHANNELNET: {
            const OpCount interp{24 * kon * i + 4 * l * kon * i, 18 * kon * i + 5 * kon * i * l};
            return interp + OpCount{226880 * kon * i, 81472 * kon * i};
        }
        case FbfEstimator::FP_SLS_SR_CNN:
        case FbfEstimator::FP_SLS_DN_CNN: {
            const OpCount interp = OpCount{2 * kon * p + 2 * kon, 2 * kon} + wi_term;
            return interp + (est == FbfEstimator::FP_SLS_SR_CNN ? srcnn : dncnn);
        }
        case FbfEstimator::FP_ALS_SR_CNN:
        case FbfEstimator::FP_ALS_DN_CNN: {
            const OpCount interp =
                OpCount{4 * kon * kon * p + 2 * kon * p + 2 * kon, 5 * kon * kon * p} + wi_term;
            return interp + (est == FbfEstimator::FP_ALS_SR_CNN ? srcnn : dncnn);
        }
        case FbfEstimator::LP_SR_CNN:
        case FbfEstimator::LP_DN_CNN: {
            const OpCount interp =
                OpCount{2 * l * p + 4 * kon * l * p + 2 * kon, 5 * kon * l * p} + wi_term;
            return interp + (est == FbfEstimator::LP_SR_CNN ? srcnn : dncnn);
        }
    }
    throw ConfigError("unknown FBF estimator");
}

namespace {

const std::map<std::string, SbsEstimator> kSbsNames = {
    {"ls", SbsEstimator::LS},
    {"dpa", SbsEstimator::DPA},
    {"sta", SbsEstimator::STA},
    {"trfi", SbsEstimator::TRFI},
    {"dpa-fnn", SbsEstimator::DPA_FNN},
    {"sta-fnn", SbsEstimator::STA_FNN},
    {"trfi-fnn", SbsEstimator::TRFI_FNN},
    {"lstm-fnn-dpa", SbsEstimator::LSTM_FNN_DPA},
    {"lstm-dpa-ta", SbsEstimator::LSTM_DPA_TA}};

const std::map<std::string, FbfEstimator> kFbfNames = {
    {"channelnet", FbfEstimator::CHANNELNET},
    {"ts-channelnet", FbfEstimator::TS_CHANNELNET},
    {"fp-sls-sr-cnn", FbfEstimator::FP_SLS_SR_CNN},
    {"fp-als-sr-cnn", FbfEstimator::FP_ALS_SR_CNN},
    {"lp-sr-cnn", FbfEstimator::LP_SR_CNN},
    {"fp-sls-dn-cnn", FbfEstimator::FP_SLS_DN_CNN},
    {"fp-als-dn-cnn", FbfEstimator::FP_ALS_DN_CNN},
    {"lp-dn-cnn", FbfEstimator::LP_DN_CNN}};

}  // namespace

OpCount count_by_name(const std::string& name, const CostParams& params) {
    if (auto it = kSbsNames.find(name); it != kSbsNames.end()) return count_sbs(it->second, params);
    if (auto it = kFbfNames.find(name); it != kFbfNames.end()) return count_fbf(it->second, params);
    std::string known;
    for (const auto& n : estimator_names()) known += n + " ";
    throw ConfigError("unknown estimator '" + name + "'; known: " + known);
}

std::vector<std::string> estimator_names() {
    std::vector<std::string> v;
    for (const auto& [n, _] : kSbsNames) v.push_back(n);
    for (const auto& [n, _] : kFbfNames) v.push_back(n);
    return v;
}

OpCount cnn_stage_count(const std::vector<ConvLayerDims>& layers, std::int64_t height,
                        std::int64_t width) {
    OpCount c;
    for (const auto& l : layers) {
        const std::int64_t px = height * width;
        c.muldiv += px * l.maps_in * l.maps_out * l.kernel * l.kernel;
        c.addsub += px * l.maps_in * l.maps_out;
    }
    return c;
}

// ---- analytic blocks

OpCount ls_block(std::int64_t k_on, std::int64_t n_preambles) {
    return {2 * k_on, 2 * (n_preambles - 1) * k_on};
}

OpCount dpa_symbol_block(std::int64_t k_on) { return {16 * k_on, 6 * k_on}; }

OpCount sta_freq_avg_block(std::int64_t k_d, std::int64_t beta) {
    return {2 * k_d, 2 * (2 * beta + 1) * k_d};
}

OpCount sta_time_avg_block(std::int64_t k_on) { return {4 * k_on, 2 * k_on}; }

OpCount ta_block(std::int64_t k_on) { return {2 * k_on, 2 * k_on}; }

OpCount trfi_equalize_block(std::int64_t k_on) { return {16 * k_on, 6 * k_on}; }

OpCount trfi_interp_block(std::int64_t k_int) { return {26 * k_int, 30 * k_int}; }

// ---- audit

AuditReport audit(const std::vector<StageCount>& instrumented,
                  const std::vector<StageCount>& analytic) {
    AuditReport rep;
    const std::size_t n = std::max(instrumented.size(), analytic.size());
    for (std::size_t j = 0; j < n; ++j) {
        AuditRow row;
        row.stage = j < instrumented.size() ? instrumented[j].stage
                                            : analytic[j].stage + " (missing)";
        row.instrumented = j < instrumented.size() ? instrumented[j].count : OpCount{};
        row.analytic = j < analytic.size() ? analytic[j].count : OpCount{};
        row.match = j < instrumented.size() && j < analytic.size() &&
                    instrumented[j].stage == analytic[j].stage &&
                    row.instrumented == row.analytic;
        if (!row.match && rep.ok) {
            rep.ok = false;
            rep.first_divergence = row.stage;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

AuditReport run_conventional_audit(const phy::PhyConfig& cfg, std::uint64_t seed) {
    const int kon = cfg.k_on();
    std::mt19937_64 rng(mix_seed(seed));
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto random_vec = [&](int n) {
        Eigen::VectorXcd v(n);
        for (int j = 0; j < n; ++j) v(j) = cd(gauss(rng) + 1.0, gauss(rng));
        return v;
    };

    est_conv::RxFrame rx;
    rx.cfg = &cfg;
    rx.y.resize(kon, cfg.n_symbols);
    for (int i = 0; i < cfg.n_symbols; ++i) rx.y.col(i) = random_vec(kon);
    rx.preambles.resize(kon, cfg.n_preambles);
    for (int u = 0; u < cfg.n_preambles; ++u) rx.preambles.col(u) = random_vec(kon);
    const Eigen::VectorXcd h_init = random_vec(kon);

    std::vector<StageCount> inst, ana;
    auto run = [&](const std::string& stage, const OpCount& expect, auto&& fn) {
        OpCounter c;
        fn(&c);
        inst.push_back({stage, c.total});
        ana.push_back({stage, expect});
    };

    run("ls_preamble", ls_block(kon, cfg.n_preambles), [&](OpCounter* c) {
        est_conv::ls_preamble(rx.preambles, cfg.preamble_active(), c);
    });
    run("dpa_symbol", dpa_symbol_block(kon), [&](OpCounter* c) {
        est_conv::dpa_step(rx.y.col(0), h_init, cfg, c);
    });
    const OpCount dpa_sym = dpa_symbol_block(kon);
    run("sta_freq_avg", sta_freq_avg_block(cfg.n_data_sc), [&](OpCounter* c) {
        // alpha = 1 disables time averaging; subtract the DPA share
        est_conv::sta_step(rx.y.col(0), h_init, {1.0, 2}, cfg, c);
        c->total += OpCount{-dpa_sym.muldiv, -dpa_sym.addsub};
    });
    run("sta_time_avg", sta_time_avg_block(kon), [&](OpCounter* c) {
        est_conv::sta_step(rx.y.col(0), h_init, {2.0, 0}, cfg, c);
        c->total += OpCount{-dpa_sym.muldiv, -dpa_sym.addsub};
    });
    run("ta", ta_block(kon), [&](OpCounter* c) {
        est_conv::RxFrame one;
        one.cfg = &cfg;
        one.y = rx.y.leftCols(1);
        one.preambles = rx.preambles;
        est_conv::dpa_ta(one, h_init, 2.0, c);
        c->total += OpCount{-dpa_sym.muldiv, -dpa_sym.addsub};
    });

    // whole-frame chains: one LS pass plus the per-symbol blocks
    run("dpa_frame", ls_block(kon, cfg.n_preambles) + cfg.n_symbols * dpa_sym,
        [&](OpCounter* c) {
            est_conv::ls_preamble(rx.preambles, cfg.preamble_active(), c);
            est_conv::dpa(rx, h_init, c);
        });
    {
        // TRFI: the interpolation share depends on the measured unreliable
        // counts, so the analytic side is assembled from the same run
        OpCounter c;
        est_conv::ls_preamble(rx.preambles, cfg.preamble_active(), &c);
        const auto est = est_conv::trfi(rx, h_init, &c);
        OpCount expect = ls_block(kon, cfg.n_preambles);
        for (int i = 0; i < cfg.n_symbols; ++i)
            expect += dpa_sym + trfi_equalize_block(kon) +
                      trfi_interp_block(kon - est.rs_sizes[i]);
        inst.push_back({"trfi_frame", c.total});
        ana.push_back({"trfi_frame", expect});
    }
    return audit(inst, ana);
}

// ---- figures

std::vector<FigureValue> sbs_figure() {
    return {{"lstm-fnn-dpa", {13308800, 1144800}, {0, 0}},
            {"lstm-dpa-ta", {12013600, 256000}, {0, 0}},
            {"dpa-fnn", {1085600, 1033600}, {0, 0}},
            {"trfi-fnn", {559800, 459800}, {0, 0}},
            {"sta-fnn", {481000, 457000}, {0, 0}}};
}

std::vector<FigureValue> fbf_figure() {
    return {{"channelnet", {2595149600, 231045600}, {0, 0}},
            {"ts-channelnet", {1180401600, 424060000}, {251200, 0}},
            {"fp-als-dn-cnn", {424235264, 49764312}, {2000, 0}},
            {"fp-als-sr-cnn", {35401392, 5699928}, {0, 0}}};
}

}  // namespace ddce::complexity
