#include "ddce/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "ddce/dft.hpp"
#include "ddce/errors.hpp"

#include "json.hpp"

namespace ddce::bench {
namespace {

using est_conv::ChannelEstimate;
using est_conv::RxFrame;

constexpr std::uint64_t kBitsStream = 0xB175ULL;
constexpr std::uint64_t kWiBitsStream = 0xB176ULL;
constexpr std::uint64_t kChanStream = 0xC4A7ULL;
constexpr std::uint64_t kNoiseStream = 0xA03EULL;
constexpr std::uint64_t kWiNoiseStream = 0xA03FULL;

std::vector<std::uint8_t> random_bits(long n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uint8_t> bits(n);
    std::uint64_t word = 0;
    int left = 0;
    for (long i = 0; i < n; ++i) {
        if (left == 0) {
            word = rng();
            left = 64;
        }
        bits[i] = word & 1;
        word >>= 1;
        --left;
    }
    return bits;
}

double param_or(const EstimatorSpec& spec, const std::string& key, double fallback) {
    auto it = spec.params.find(key);
    return it == spec.params.end() ? fallback : it->second;
}

/// Everything heavy that can be prepared once per scenario.
struct Context {
    const Scenario& sc;
    phy::PhyConfig cfg;
    bool needs_comb = false, needs_wi = false;
    std::optional<est_conv::RbfInterpolator> rbf;
    est_conv::ChannelStats stats;
    std::map<double, est_conv::Lmmse2DFull> lmmse_full;       // by snr
    std::map<double, Eigen::MatrixXd> doppler_var_cache;      // placeholder for symmetry
    double ici_var = 0.0;                                     // mean Doppler interference power

    struct Loaded {
        EstimatorSpec spec;
        std::optional<nn::FnnNet> fnn;
        std::optional<nn::LstmNet> lstm;
        std::optional<nn::LstmFnnNet> lstm_fnn;
        std::optional<nn::CnnNet> cnn_a, cnn_b;
        std::optional<nn::ConvLstmNet> convlstm;
        bool wi_frame = false;
        est_conv::WiFrameConfig wi;
    };
    std::vector<Loaded> loaded;

    explicit Context(const Scenario& scenario);
    double noise_var(double snr_db) const {
        return (static_cast<double>(cfg.k_on()) / cfg.k_total) / std::pow(10.0, snr_db / 10.0);
    }
};

est_conv::WiFrameConfig wi_for_name(const std::string& name, const Scenario& sc,
                                    const phy::PhyConfig& cfg) {
    est_conv::WiFrameConfig wi = sc.wi;
    if (name.find("fp-sls") != std::string::npos)
        wi.scheme = est_conv::WiFrameConfig::Scheme::FP_SLS;
    else if (name.find("fp-als") != std::string::npos)
        wi.scheme = est_conv::WiFrameConfig::Scheme::FP_ALS;
    else if (name.find("-lp") != std::string::npos || name.rfind("wi-lp", 0) == 0)
        wi.scheme = est_conv::WiFrameConfig::Scheme::LP;
    if (wi.scheme == est_conv::WiFrameConfig::Scheme::LP && wi.lp_rows.empty())
        wi.lp_rows = est_conv::WiFrameConfig::default_lp_rows(cfg.k_on(), wi.n_taps);
    wi.validate(cfg);
    return wi;
}

std::string require_file(const EstimatorSpec& spec, const std::string& role) {
    auto it = spec.files.find(role);
    if (it == spec.files.end())
        throw ConfigError("estimator '" + spec.name + "' needs a '" + role + "' model file");
    return it->second;
}

Context::Context(const Scenario& scenario) : sc(scenario), cfg(scenario.phy) {
    cfg.validate();
    stats = est_conv::ChannelStats::from_model(sc.model, cfg);

    bool needs_rbf = false, needs_lmmse = false, needs_ici = false;
    for (const auto& spec : sc.estimators) {
        Loaded l;
        l.spec = spec;
        const std::string& n = spec.name;
        try {
            if (n == "dpa-fnn" || n == "sta-fnn" || n == "trfi-fnn")
                l.fnn = est_dl::load_fnn(require_file(spec, "net"));
            else if (n == "lstm-dpa-ta")
                l.lstm = est_dl::load_lstm(require_file(spec, "net"));
            else if (n == "lstm-fnn-dpa")
                l.lstm_fnn = est_dl::load_lstm_fnn(require_file(spec, "net"));
            else if (n == "channelnet") {
                l.cnn_a = est_dl::load_cnn(require_file(spec, "srcnn"));
                l.cnn_b = est_dl::load_cnn(require_file(spec, "dncnn"));
            } else if (n == "ts-channelnet")
                l.convlstm = est_dl::load_convlstm(require_file(spec, "net"));
            else if (n.rfind("wi-", 0) == 0 && n.find("cnn") != std::string::npos)
                l.cnn_a = est_dl::load_cnn(require_file(spec, "net"));
        } catch (const IoError& e) {
            throw ConfigError("estimator '" + n + "': " + e.what());
        }

        if (n.rfind("wi-", 0) == 0) {
            l.wi_frame = true;
            l.wi = wi_for_name(n, sc, cfg);
            needs_wi = true;
        } else {
            needs_comb = true;
        }
        if (n == "rbf" || n == "channelnet") needs_rbf = true;
        if (n == "lmmse" || n == "lmmse-pilot") {
            needs_lmmse = true;
            needs_ici = true;
        }
        loaded.push_back(std::move(l));
    }

    if (needs_rbf) {
        double r0 = 16.0;
        for (const auto& spec : sc.estimators)
            if (spec.name == "rbf" || spec.name == "channelnet") r0 = param_or(spec, "r0", r0);
        rbf.emplace(cfg, r0);
    }
    if (needs_ici) {
        // mean Doppler interference power, measured once on a probe
        // realization, feeds the LMMSE noise model
        const auto probe = channel::generate_channel(sc.model, cfg.frame_samples(),
                                                     derive_seed(sc.seed, 0x1C1ULL), cfg.sample_rate);
        ici_var = channel::doppler_interference_variance(probe, cfg, 8,
                                                         derive_seed(sc.seed, 0x1C2ULL))
                      .mean();
    }
    if (needs_lmmse)
        for (double snr : sc.snr_grid_db)
            lmmse_full.emplace(snr, est_conv::Lmmse2DFull(stats, noise_var(snr) + ici_var));
}

/// One transmitted frame (bits, grid, time signal) per structure.
struct TxFrame {
    std::vector<std::uint8_t> bits;
    phy::FrameGrid grid;
    Eigen::MatrixXcd tx_on;  ///< K_on x I active-row symbols
    phy::TimeSignal sig;
};

TxFrame make_comb_tx(const phy::PhyConfig& cfg, std::uint64_t bits_seed) {
    TxFrame tx;
    const int nbits = cfg.n_data_sc * cfg.n_symbols * phy::bits_per_symbol(cfg.modulation);
    tx.bits = random_bits(nbits, bits_seed);
    tx.grid = phy::assemble_frame(phy::modulate(tx.bits, cfg.modulation), cfg);
    tx.sig = phy::ofdm_modulate(tx.grid, cfg);
    const auto& offs = cfg.active_offsets();
    tx.tx_on.resize(cfg.k_on(), cfg.n_symbols);
    for (int r = 0; r < cfg.k_on(); ++r)
        tx.tx_on.row(r) = tx.grid.values.row(cfg.bin_of_offset(offs[r]));
    return tx;
}

TxFrame make_wi_tx(const phy::PhyConfig& cfg, const est_conv::WiFrameConfig& wi,
                   std::uint64_t bits_seed) {
    TxFrame tx;
    const int n_data_syms = wi.n_data_symbols(cfg.n_symbols);
    const int nbits = cfg.k_on() * n_data_syms * phy::bits_per_symbol(cfg.modulation);
    tx.bits = random_bits(nbits, bits_seed);
    tx.grid = phy::assemble_wi_frame(phy::modulate(tx.bits, cfg.modulation), cfg,
                                     wi.pilot_symbol_positions, wi.lp_rows);
    tx.sig = phy::ofdm_modulate(tx.grid, cfg);
    const auto& offs = cfg.active_offsets();
    tx.tx_on.resize(cfg.k_on(), cfg.n_symbols);
    for (int r = 0; r < cfg.k_on(); ++r)
        tx.tx_on.row(r) = tx.grid.values.row(cfg.bin_of_offset(offs[r]));
    return tx;
}

ChannelEstimate run_estimator(const Context& ctx, const Context::Loaded& l, const RxFrame& rx,
                              const Eigen::MatrixXcd& tx_on, const Eigen::MatrixXcd& h_true,
                              double snr_db) {
    const auto& cfg = ctx.cfg;
    const std::string& n = l.spec.name;
    const Eigen::VectorXcd h_ls = est_conv::ls_preamble(rx.preambles, cfg.preamble_active());
    const double nv = ctx.noise_var(snr_db);

    if (n == "genie") return {h_true, "genie", {}};
    if (n == "ls") {
        ChannelEstimate est;
        est.method = "LS";
        est.h_hat = h_ls.replicate(1, cfg.n_symbols);
        return est;
    }
    if (n == "dpa") return est_conv::dpa(rx, h_ls);
    if (n == "sta")
        return est_conv::sta(rx, h_ls,
                             {param_or(l.spec, "alpha", 2.0),
                              static_cast<int>(param_or(l.spec, "beta", 2))});
    if (n == "trfi") return est_conv::trfi(rx, h_ls);
    if (n == "add-tt")
        return est_conv::add_tt(rx, h_ls,
                                {param_or(l.spec, "alpha", 0.5),
                                 static_cast<int>(param_or(l.spec, "beta", 2)),
                                 static_cast<int>(param_or(l.spec, "trunc_len", 12))});
    if (n == "dpa-ta") return est_conv::dpa_ta(rx, h_ls, param_or(l.spec, "alpha", 2.0));
    if (n == "rbf") return ctx.rbf->interpolate(est_conv::pilot_ls(rx));
    if (n == "lmmse") {
        // genie data-aided bound: observe every active cell through the
        // known transmitted symbols
        ChannelEstimate est;
        est.method = "2D-LMMSE";
        est.h_hat = ctx.lmmse_full.at(snr_db).apply(rx.y.cwiseQuotient(tx_on));
        return est;
    }
    if (n == "lmmse-pilot") {
        const auto& prow = cfg.pilot_rows();
        std::vector<std::pair<int, int>> coords;
        Eigen::VectorXcd vals(static_cast<long>(prow.size()) * cfg.n_symbols);
        const Eigen::MatrixXcd pls = est_conv::pilot_ls(rx);
        long j = 0;
        for (int i = 0; i < cfg.n_symbols; ++i)
            for (std::size_t p = 0; p < prow.size(); ++p) {
                coords.emplace_back(prow[p], i);
                vals(j++) = pls(p, i);
            }
        return est_conv::lmmse_2d(coords, vals, ctx.stats, ctx.noise_var(snr_db) + ctx.ici_var,
                                  cfg);
    }
    if (n == "dpa-fnn") return est_dl::fnn_estimator(est_dl::FnnKind::DPA, rx, h_ls, *l.fnn);
    if (n == "sta-fnn")
        return est_dl::fnn_estimator(est_dl::FnnKind::STA, rx, h_ls, *l.fnn,
                                     {param_or(l.spec, "alpha", 2.0),
                                      static_cast<int>(param_or(l.spec, "beta", 2))});
    if (n == "trfi-fnn") return est_dl::fnn_estimator(est_dl::FnnKind::TRFI, rx, h_ls, *l.fnn);
    if (n == "lstm-fnn-dpa") return est_dl::lstm_fnn_dpa(rx, h_ls, *l.lstm_fnn);
    if (n == "lstm-dpa-ta")
        return est_dl::lstm_dpa_ta(rx, h_ls, *l.lstm, param_or(l.spec, "alpha", 2.0));
    if (n == "channelnet") return est_dl::channelnet(rx, *ctx.rbf, *l.cnn_a, *l.cnn_b);
    if (n == "ts-channelnet")
        return est_dl::ts_channelnet(rx, h_ls, *l.convlstm,
                                     {param_or(l.spec, "alpha", 0.5),
                                      static_cast<int>(param_or(l.spec, "beta", 2)),
                                      static_cast<int>(param_or(l.spec, "trunc_len", 12))});
    if (n.rfind("wi-", 0) == 0) {
        const double fd = ctx.sc.model.doppler_hz;
        if (n.find("cnn") == std::string::npos) {
            // interpolation only
            const Eigen::VectorXcd h0 = h_ls;
            const Eigen::MatrixXcd pest =
                est_conv::wi_pilot_estimates(est_dl::wi_rx_pilot_symbols(rx, l.wi), l.wi, cfg);
            Eigen::MatrixXcd cols(cfg.k_on(), l.wi.n_pilot_symbols() + 1);
            cols.col(0) = h0;
            cols.rightCols(l.wi.n_pilot_symbols()) = pest;
            return est_conv::wi_interpolate(cols, l.wi, fd,
                                            est_dl::wi_noise_powers(l.wi, nv, cfg), cfg);
        }
        const bool residual = n.find("dn-cnn") != std::string::npos;
        return est_dl::wi_cnn(rx, l.wi, fd, nv, *l.cnn_a, residual);
    }
    throw ConfigError("unknown estimator '" + n + "'");
}

struct FrameMetrics {
    double nmse_num = 0.0, nmse_den = 0.0, nmse_ratio = 0.0;
    long bit_errors = 0, bits = 0;
};

void count_bit_errors(const phy::PhyConfig& cfg, const RxFrame& rx, const ChannelEstimate& est,
                      const TxFrame& tx, bool wi_frame, const est_conv::WiFrameConfig& wi,
                      FrameMetrics& m) {
    const auto mod = cfg.modulation;
    std::vector<std::uint8_t> decided;
    decided.reserve(tx.bits.size());
    if (!wi_frame) {
        for (int i = 0; i < cfg.n_symbols; ++i)
            for (int r : cfg.data_rows()) {
                const phy::cd eq = rx.y(r, i) / est.h_hat(r, i);
                phy::append_bits(phy::demap_symbol(eq, mod), mod, decided);
            }
    } else {
        for (int i = 0; i < cfg.n_symbols; ++i) {
            const bool pilot_sym = std::find(wi.pilot_symbol_positions.begin(),
                                             wi.pilot_symbol_positions.end(),
                                             i + 1) != wi.pilot_symbol_positions.end();
            if (pilot_sym) continue;
            for (int r = 0; r < cfg.k_on(); ++r) {
                const phy::cd eq = rx.y(r, i) / est.h_hat(r, i);
                phy::append_bits(phy::demap_symbol(eq, mod), mod, decided);
            }
        }
    }
    for (std::size_t b = 0; b < decided.size(); ++b)
        if (decided[b] != tx.bits[b]) ++m.bit_errors;
    m.bits += static_cast<long>(decided.size());
}

}  // namespace

Scenario::Scenario() { wi = est_conv::WiFrameConfig::standard(phy, est_conv::WiFrameConfig::Scheme::FP_ALS, 3); }

const MetricsCell& MetricsReport::at(const std::string& est, double snr) const {
    const int ei = estimator_index(est);
    for (std::size_t s = 0; s < snr_grid_db.size(); ++s)
        if (snr_grid_db[s] == snr) return cells[ei][s];
    throw ConfigError("snr not in report: " + std::to_string(snr));
}

int MetricsReport::estimator_index(const std::string& est) const {
    for (std::size_t e = 0; e < estimators.size(); ++e)
        if (estimators[e] == est) return static_cast<int>(e);
    throw ConfigError("estimator not in report: " + est);
}

MetricsReport run_montecarlo(const Scenario& scenario) {
    if (scenario.frames < 1) throw ConfigError("frames must be >= 1");
    if (scenario.estimators.empty()) throw ConfigError("estimator list is empty");
    Context ctx(scenario);
    const auto& cfg = ctx.cfg;
    const int n_est = static_cast<int>(scenario.estimators.size());
    const int n_snr = static_cast<int>(scenario.snr_grid_db.size());

    // cp must cover the configured delay spread (scenario assembly contract)
    const auto taps = scenario.model.sampled_taps(cfg.sample_rate);
    if (taps.span() > cfg.cp_len)
        throw ConfigError("cyclic prefix shorter than the channel delay spread");

    struct FrameResult {
        std::vector<FrameMetrics> cells;  // n_est * n_snr
    };
    std::vector<FrameResult> results(scenario.frames);

    // single-threaded matrix kernels inside the frame workers keep results
    // independent of the worker count
    const int saved_eigen_threads = Eigen::nbThreads();
    Eigen::setNbThreads(1);

    auto worker_body = [&](int frame) {
        FrameResult res;
        res.cells.assign(static_cast<std::size_t>(n_est) * n_snr, {});

        const auto chan = channel::generate_channel(
            scenario.model, cfg.frame_samples(), derive_seed(scenario.seed, kChanStream, frame),
            cfg.sample_rate);
        const Eigen::MatrixXcd h_true = channel::true_channel_grid(chan, cfg).h;

        std::optional<TxFrame> comb, wi_tx;
        std::optional<phy::TimeSignal> comb_faded, wi_faded;
        if (ctx.needs_comb) {
            comb = make_comb_tx(cfg, derive_seed(scenario.seed, kBitsStream, frame));
            comb_faded = channel::apply_channel(comb->sig, chan);
        }
        if (ctx.needs_wi) {
            wi_tx = make_wi_tx(cfg, scenario.wi, derive_seed(scenario.seed, kWiBitsStream, frame));
            wi_faded = channel::apply_channel(wi_tx->sig, chan);
        }

        for (int s = 0; s < n_snr; ++s) {
            const double snr = scenario.snr_grid_db[s];
            std::optional<RxFrame> rx_comb, rx_wi;
            if (comb_faded) {
                const auto noisy = channel::add_awgn(
                    *comb_faded, snr,
                    derive_seed(scenario.seed, kNoiseStream, frame * 1024ULL + s));
                rx_comb = RxFrame::from_grid(phy::ofdm_demodulate(noisy, cfg), cfg);
            }
            if (wi_faded) {
                const auto noisy = channel::add_awgn(
                    *wi_faded, snr,
                    derive_seed(scenario.seed, kWiNoiseStream, frame * 1024ULL + s));
                rx_wi = RxFrame::from_grid(phy::ofdm_demodulate(noisy, cfg), cfg);
            }
            for (int e = 0; e < n_est; ++e) {
                const auto& l = ctx.loaded[e];
                const RxFrame& rx = l.wi_frame ? *rx_wi : *rx_comb;
                const TxFrame& tx = l.wi_frame ? *wi_tx : *comb;
                const ChannelEstimate est =
                    run_estimator(ctx, l, rx, tx.tx_on, h_true, snr);
                FrameMetrics& m = res.cells[static_cast<std::size_t>(e) * n_snr + s];
                m.nmse_num = (est.h_hat - h_true).squaredNorm();
                m.nmse_den = h_true.squaredNorm();
                m.nmse_ratio = m.nmse_num / m.nmse_den;
                count_bit_errors(cfg, rx, est, tx, l.wi_frame, l.wi, m);
            }
        }
        results[frame] = std::move(res);
    };

    int workers = scenario.workers > 0
                      ? scenario.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, scenario.frames));
    if (workers == 1) {
        for (int f = 0; f < scenario.frames; ++f) worker_body(f);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int f = next.fetch_add(1); f < scenario.frames; f = next.fetch_add(1))
                    worker_body(f);
            });
        for (auto& t : pool) t.join();
    }
    Eigen::setNbThreads(saved_eigen_threads);

    // ordered reduction: frame order fixes the output bytes
    MetricsReport rep;
    rep.snr_grid_db = scenario.snr_grid_db;
    for (const auto& spec : scenario.estimators) rep.estimators.push_back(spec.name);
    rep.cells.assign(n_est, std::vector<MetricsCell>(n_snr));
    if (scenario.keep_per_frame_nmse)
        rep.per_frame_nmse.assign(n_est,
                                  std::vector<std::vector<double>>(n_snr));
    for (int e = 0; e < n_est; ++e)
        for (int s = 0; s < n_snr; ++s) {
            double num = 0, den = 0, errs = 0, bits = 0, sum_r = 0, sum_r2 = 0;
            for (int f = 0; f < scenario.frames; ++f) {
                const auto& m = results[f].cells[static_cast<std::size_t>(e) * n_snr + s];
                num += m.nmse_num;
                den += m.nmse_den;
                errs += static_cast<double>(m.bit_errors);
                bits += static_cast<double>(m.bits);
                sum_r += m.nmse_ratio;
                sum_r2 += m.nmse_ratio * m.nmse_ratio;
                if (scenario.keep_per_frame_nmse)
                    rep.per_frame_nmse[e][s].push_back(m.nmse_ratio);
            }
            MetricsCell& c = rep.cells[e][s];
            c.frames = scenario.frames;
            c.nmse = num / den;
            c.ber = errs / bits;
            const double nfr = static_cast<double>(scenario.frames);
            const double var_r = std::max(0.0, sum_r2 / nfr - (sum_r / nfr) * (sum_r / nfr));
            c.stderr_nmse = std::sqrt(var_r / nfr);
            c.stderr_ber = std::sqrt(std::max(0.0, c.ber * (1.0 - c.ber)) / bits);
        }
    return rep;
}

// ---- CSV

std::string report_csv(const MetricsReport& report) {
    std::ostringstream os;
    os << "estimator,snr_db,ber,nmse,stderr_ber,stderr_nmse,frames\n";
    char buf[256];
    for (std::size_t e = 0; e < report.estimators.size(); ++e)
        for (std::size_t s = 0; s < report.snr_grid_db.size(); ++s) {
            const auto& c = report.cells[e][s];
            std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%ld\n",
                          report.estimators[e].c_str(), report.snr_grid_db[s], c.ber, c.nmse,
                          c.stderr_ber, c.stderr_nmse, c.frames);
            os << buf;
        }
    return os.str();
}

void emit_csv(const MetricsReport& report, const std::string& path) {
    if (report.estimators.empty()) throw ConfigError("refusing to emit an empty report");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << report_csv(report);
    if (!f) throw IoError("write failed: " + path);
}

MetricsReport parse_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::string line;
    std::getline(f, line);  // header
    MetricsReport rep;
    std::map<std::string, int> est_idx;
    std::vector<double> snrs;
    struct Row {
        std::string est;
        double snr;
        MetricsCell cell;
    };
    std::vector<Row> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        Row r;
        std::string tok;
        std::getline(ss, r.est, ',');
        auto next = [&] {
            std::getline(ss, tok, ',');
            return std::stod(tok);
        };
        r.snr = next();
        r.cell.ber = next();
        r.cell.nmse = next();
        r.cell.stderr_ber = next();
        r.cell.stderr_nmse = next();
        r.cell.frames = static_cast<long>(next());
        rows.push_back(r);
        if (!est_idx.contains(r.est)) {
            est_idx[r.est] = static_cast<int>(rep.estimators.size());
            rep.estimators.push_back(r.est);
        }
        if (std::find(snrs.begin(), snrs.end(), r.snr) == snrs.end()) snrs.push_back(r.snr);
    }
    rep.snr_grid_db = snrs;
    rep.cells.assign(rep.estimators.size(), std::vector<MetricsCell>(snrs.size()));
    for (const auto& r : rows) {
        const int e = est_idx[r.est];
        const int s = static_cast<int>(std::find(snrs.begin(), snrs.end(), r.snr) - snrs.begin());
        rep.cells[e][s] = r.cell;
    }
    return rep;
}

// ---- SVG

namespace {

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                          "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78"};

}  // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series, bool log_y) {
    const double w = 860, h = 520, ml = 80, mr = 180, mt = 50, mb = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double y = s.y[i];
            if (log_y && y <= 0) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = log_y ? 1e-3 : 0;
        ymax = 1;
    }
    if (log_y) {
        ymin = std::pow(10.0, std::floor(std::log10(ymin)));
        ymax = std::pow(10.0, std::ceil(std::log10(ymax)));
        if (ymin == ymax) ymax = ymin * 10;
    } else if (ymin == ymax) {
        ymax = ymin + 1;
    }
    if (xmin == xmax) xmax = xmin + 1;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    auto py = [&](double y) {
        const double t = log_y ? (std::log10(y) - std::log10(ymin)) /
                                     (std::log10(ymax) - std::log10(ymin))
                               : (y - ymin) / (ymax - ymin);
        return h - mb - t * (h - mt - mb);
    };

    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 " << w << " " << h << "'>\n";
    f << "<rect width='100%' height='100%' fill='white'/>\n";
    f << "<text x='" << w / 2 << "' y='28' text-anchor='middle' font-size='18'>" << title
      << "</text>\n";
    f << "<text x='" << (ml + (w - mr)) / 2 << "' y='" << h - 16
      << "' text-anchor='middle' font-size='13'>" << x_label << "</text>\n";
    f << "<text x='20' y='" << h / 2 << "' text-anchor='middle' font-size='13' transform='rotate(-90 20 "
      << h / 2 << ")'>" << y_label << "</text>\n";
    // axes and grid
    if (log_y) {
        for (double d = std::log10(ymin); d <= std::log10(ymax) + 1e-9; d += 1.0) {
            const double y = py(std::pow(10.0, d));
            f << "<line x1='" << ml << "' y1='" << y << "' x2='" << w - mr << "' y2='" << y
              << "' stroke='#ddd'/>\n";
            f << "<text x='" << ml - 8 << "' y='" << y + 4
              << "' text-anchor='end' font-size='11'>1e" << static_cast<int>(d) << "</text>\n";
        }
    } else {
        for (int i = 0; i <= 5; ++i) {
            const double yv = ymin + (ymax - ymin) * i / 5.0;
            const double y = py(yv);
            f << "<line x1='" << ml << "' y1='" << y << "' x2='" << w - mr << "' y2='" << y
              << "' stroke='#ddd'/>\n";
            f << "<text x='" << ml - 8 << "' y='" << y + 4
              << "' text-anchor='end' font-size='11'>" << yv << "</text>\n";
        }
    }
    for (double xv = xmin; xv <= xmax + 1e-9; xv += (xmax - xmin) / 8.0) {
        f << "<text x='" << px(xv) << "' y='" << h - mb + 18
          << "' text-anchor='middle' font-size='11'>" << xv << "</text>\n";
    }
    f << "<rect x='" << ml << "' y='" << mt << "' width='" << w - ml - mr << "' height='"
      << h - mt - mb << "' fill='none' stroke='black'/>\n";

    int ci = 0;
    for (const auto& s : series) {
        const char* color = kPalette[ci % 12];
        f << "<polyline fill='none' stroke='" << color << "' stroke-width='1.8' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (log_y && s.y[i] <= 0) continue;
            f << px(s.x[i]) << "," << py(s.y[i]) << " ";
        }
        f << "'/>\n";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (log_y && s.y[i] <= 0) continue;
            f << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='2.5' fill='"
              << color << "'/>\n";
        }
        const double ly = mt + 18.0 * ci;
        f << "<line x1='" << w - mr + 10 << "' y1='" << ly << "' x2='" << w - mr + 34 << "' y2='"
          << ly << "' stroke='" << color << "' stroke-width='2'/>\n";
        f << "<text x='" << w - mr + 40 << "' y='" << ly + 4 << "' font-size='12'>" << s.label
          << "</text>\n";
        ++ci;
    }
    f << "</svg>\n";
    if (!f) throw IoError("write failed: " + path);
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& groups,
                     const std::vector<std::pair<std::string, std::vector<double>>>& bars) {
    const double w = 860, h = 520, ml = 90, mr = 30, mt = 60, mb = 90;
    double ymax = 0;
    for (const auto& [_, v] : bars)
        for (double x : v) ymax = std::max(ymax, x);
    const double lmax = std::ceil(std::log10(std::max(10.0, ymax)));
    auto py = [&](double y) {
        const double t = y <= 1 ? 0.0 : std::log10(y) / lmax;
        return h - mb - t * (h - mt - mb);
    };

    std::ofstream f(path);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='0 0 " << w << " " << h << "'>\n";
    f << "<rect width='100%' height='100%' fill='white'/>\n";
    f << "<text x='" << w / 2 << "' y='28' text-anchor='middle' font-size='18'>" << title
      << "</text>\n";
    for (double d = 0; d <= lmax; d += 1.0) {
        const double y = py(std::pow(10.0, d));
        f << "<line x1='" << ml << "' y1='" << y << "' x2='" << w - mr << "' y2='" << y
          << "' stroke='#ddd'/>\n";
        f << "<text x='" << ml - 8 << "' y='" << y + 4 << "' text-anchor='end' font-size='11'>1e"
          << static_cast<int>(d) << "</text>\n";
    }
    const double gw = (w - ml - mr) / groups.size();
    const double bw = gw / (bars.size() + 1);
    const char* colors[] = {"#d62728", "#1f77b4"};
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (std::size_t b = 0; b < bars.size(); ++b) {
            const double v = bars[b].second[g];
            const double x = ml + g * gw + (b + 0.5) * bw;
            f << "<rect x='" << x << "' y='" << py(v) << "' width='" << bw * 0.9 << "' height='"
              << (h - mb - py(v)) << "' fill='" << colors[b % 2] << "'/>\n";
            f << "<text x='" << x + bw * 0.45 << "' y='" << py(v) - 4
              << "' text-anchor='middle' font-size='9'>" << static_cast<long long>(v)
              << "</text>\n";
        }
        f << "<text x='" << ml + g * gw + gw / 2 << "' y='" << h - mb + 20
          << "' text-anchor='middle' font-size='11'>" << groups[g] << "</text>\n";
    }
    for (std::size_t b = 0; b < bars.size(); ++b) {
        const double ly = mt - 24 + 16.0 * b;
        f << "<rect x='" << w - mr - 220 << "' y='" << ly - 9 << "' width='12' height='12' fill='"
          << colors[b % 2] << "'/>\n";
        f << "<text x='" << w - mr - 202 << "' y='" << ly + 2 << "' font-size='12'>"
          << bars[b].first << "</text>\n";
    }
    f << "<rect x='" << ml << "' y='" << mt << "' width='" << w - ml - mr << "' height='"
      << h - mt - mb << "' fill='none' stroke='black'/>\n";
    f << "</svg>\n";
    if (!f) throw IoError("write failed: " + path);
}

void emit_svg(const MetricsReport& report, const std::string& ber_path,
              const std::string& nmse_path) {
    if (report.estimators.empty()) throw ConfigError("refusing to plot an empty report");
    std::vector<Series> ber, nmse;
    for (std::size_t e = 0; e < report.estimators.size(); ++e) {
        Series sb{report.estimators[e], report.snr_grid_db, {}};
        Series sn{report.estimators[e], report.snr_grid_db, {}};
        for (std::size_t s = 0; s < report.snr_grid_db.size(); ++s) {
            sb.y.push_back(report.cells[e][s].ber);
            sn.y.push_back(report.cells[e][s].nmse);
        }
        ber.push_back(std::move(sb));
        nmse.push_back(std::move(sn));
    }
    write_line_chart(ber_path, "BER vs SNR", "SNR [dB]", "BER", ber, true);
    write_line_chart(nmse_path, "NMSE vs SNR", "SNR [dB]", "NMSE", nmse, true);
}

// ---- datasets

void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write("DDCEDS1\0", 8);
    char pipeline[32] = {0}, model[16] = {0};
    std::strncpy(pipeline, ds.header.pipeline.c_str(), 31);
    std::strncpy(model, ds.header.model.c_str(), 15);
    f.write(pipeline, 32);
    f.write(model, 16);
    f.write(reinterpret_cast<const char*>(&ds.header.doppler_hz), 8);
    f.write(reinterpret_cast<const char*>(&ds.header.snr_db), 8);
    f.write(reinterpret_cast<const char*>(&ds.header.seed), 8);
    const std::uint64_t n = ds.inputs.size();
    f.write(reinterpret_cast<const char*>(&n), 8);
    const std::uint32_t dims[4] = {static_cast<std::uint32_t>(ds.inputs[0].rows()),
                                   static_cast<std::uint32_t>(ds.inputs[0].cols()),
                                   static_cast<std::uint32_t>(ds.targets[0].rows()),
                                   static_cast<std::uint32_t>(ds.targets[0].cols())};
    f.write(reinterpret_cast<const char*>(dims), 16);
    auto write_mat = [&](const Eigen::MatrixXd& m) {
        for (long j = 0; j < m.size(); ++j) {
            const float v = static_cast<float>(m.data()[j]);
            f.write(reinterpret_cast<const char*>(&v), 4);
        }
    };
    for (std::size_t r = 0; r < ds.inputs.size(); ++r) {
        write_mat(ds.inputs[r]);
        write_mat(ds.targets[r]);
    }
    if (!f) throw IoError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    char magic[8];
    f.read(magic, 8);
    if (std::memcmp(magic, "DDCEDS1\0", 8) != 0) throw IoError("bad dataset magic: " + path);
    char pipeline[32], model[16];
    f.read(pipeline, 32);
    f.read(model, 16);
    Dataset ds;
    ds.header.pipeline = pipeline;
    ds.header.model = model;
    f.read(reinterpret_cast<char*>(&ds.header.doppler_hz), 8);
    f.read(reinterpret_cast<char*>(&ds.header.snr_db), 8);
    f.read(reinterpret_cast<char*>(&ds.header.seed), 8);
    f.read(reinterpret_cast<char*>(&ds.header.n_records), 8);
    std::uint32_t dims[4];
    f.read(reinterpret_cast<char*>(dims), 16);
    ds.header.in_rows = dims[0];
    ds.header.in_cols = dims[1];
    ds.header.tgt_rows = dims[2];
    ds.header.tgt_cols = dims[3];
    auto read_mat = [&](std::uint32_t r, std::uint32_t c) {
        Eigen::MatrixXd m(r, c);
        for (long j = 0; j < m.size(); ++j) {
            float v = 0;
            f.read(reinterpret_cast<char*>(&v), 4);
            m.data()[j] = v;
        }
        return m;
    };
    for (std::uint64_t rec = 0; rec < ds.header.n_records; ++rec) {
        ds.inputs.push_back(read_mat(dims[0], dims[1]));
        ds.targets.push_back(read_mat(dims[2], dims[3]));
    }
    if (!f) throw IoError("truncated dataset: " + path);
    return ds;
}

double dataset_input_nmse(const Dataset& ds) {
    if (ds.header.in_rows != ds.header.tgt_rows || ds.header.in_cols != ds.header.tgt_cols)
        throw ShapeError("dataset input/target dims differ");
    double num = 0, den = 0;
    for (std::size_t r = 0; r < ds.inputs.size(); ++r) {
        num += (ds.inputs[r] - ds.targets[r]).squaredNorm();
        den += ds.targets[r].squaredNorm();
    }
    return num / den;
}

namespace {

/// Teacher-forced records for one frame of a given pipeline.
void frame_records(const Context& ctx, const std::string& pipeline, int frame,
                   std::uint64_t seed_base, double snr_db, Dataset& out) {
    const auto& cfg = ctx.cfg;
    const auto chan = channel::generate_channel(ctx.sc.model, cfg.frame_samples(),
                                                derive_seed(seed_base, kChanStream, frame),
                                                cfg.sample_rate);
    const Eigen::MatrixXcd h_true = channel::true_channel_grid(chan, cfg).h;
    const bool wi_pipe = pipeline.rfind("wi-", 0) == 0;

    TxFrame tx = wi_pipe ? make_wi_tx(cfg, ctx.sc.wi, derive_seed(seed_base, kWiBitsStream, frame))
                         : make_comb_tx(cfg, derive_seed(seed_base, kBitsStream, frame));
    const auto noisy = channel::add_awgn(channel::apply_channel(tx.sig, chan), snr_db,
                                         derive_seed(seed_base, kNoiseStream, frame));
    const RxFrame rx = RxFrame::from_grid(phy::ofdm_demodulate(noisy, cfg), cfg);
    const Eigen::VectorXcd h_ls = est_conv::ls_preamble(rx.preambles, cfg.preamble_active());

    auto push_symbol_pairs = [&](const est_dl::SbsSequence& seq) {
        for (int i = 0; i < seq.inputs.cols(); ++i) {
            out.inputs.push_back(seq.inputs.col(i));
            out.targets.push_back(seq.targets.col(i));
        }
    };
    auto push_sequence = [&](const est_dl::SbsSequence& seq) {
        out.inputs.push_back(seq.inputs);
        out.targets.push_back(seq.targets);
    };
    auto push_image_pair = [&](const Eigen::MatrixXcd& grid) {
        Eigen::MatrixXd in(2 * cfg.k_on(), cfg.n_symbols), tgt(2 * cfg.k_on(), cfg.n_symbols);
        for (int i = 0; i < cfg.n_symbols; ++i) {
            in.col(i) = est_dl::stack_ri(grid.col(i));
            tgt.col(i) = est_dl::stack_ri(h_true.col(i));
        }
        out.inputs.push_back(in);
        out.targets.push_back(tgt);
    };

    if (pipeline == "dpa-fnn")
        push_symbol_pairs(est_dl::fnn_training_pairs(est_dl::FnnKind::DPA, rx, h_ls, h_true));
    else if (pipeline == "sta-fnn")
        push_symbol_pairs(est_dl::fnn_training_pairs(est_dl::FnnKind::STA, rx, h_ls, h_true));
    else if (pipeline == "trfi-fnn")
        push_symbol_pairs(est_dl::fnn_training_pairs(est_dl::FnnKind::TRFI, rx, h_ls, h_true));
    else if (pipeline == "lstm-fnn-dpa")
        push_sequence(est_dl::lstm_fnn_dpa_training_sequence(rx, h_ls, h_true));
    else if (pipeline == "lstm-dpa-ta")
        push_sequence(est_dl::lstm_dpa_ta_training_sequence(rx, h_ls, h_true));
    else if (pipeline == "channelnet")
        push_image_pair(ctx.rbf->interpolate(est_conv::pilot_ls(rx)).h_hat);
    else if (pipeline == "ts-channelnet")
        push_image_pair(est_conv::add_tt(rx, h_ls).h_hat);
    else if (pipeline.rfind("wi-", 0) == 0) {
        const auto wi = wi_for_name(pipeline, ctx.sc, cfg);
        const Eigen::MatrixXcd pest =
            est_conv::wi_pilot_estimates(est_dl::wi_rx_pilot_symbols(rx, wi), wi, cfg);
        Eigen::MatrixXcd cols(cfg.k_on(), wi.n_pilot_symbols() + 1);
        cols.col(0) = h_ls;
        cols.rightCols(wi.n_pilot_symbols()) = pest;
        const auto interp = est_conv::wi_interpolate(
            cols, wi, ctx.sc.model.doppler_hz,
            est_dl::wi_noise_powers(wi, ctx.noise_var(snr_db), cfg), cfg);
        push_image_pair(interp.h_hat);
    } else {
        throw ConfigError("unknown pipeline '" + pipeline + "'");
    }
}

}  // namespace

std::pair<std::string, std::string> gen_dataset(const Scenario& scenario,
                                                const std::string& pipeline, long n_samples,
                                                double train_snr_db,
                                                const std::string& out_prefix) {
    if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
    Scenario probe = scenario;
    probe.estimators.clear();
    Context ctx(probe);
    if (pipeline == "channelnet" && !ctx.rbf) ctx.rbf.emplace(ctx.cfg, 16.0);

    auto build = [&](long n_records, std::uint64_t seed_base) {
        Dataset ds;
        ds.header.pipeline = pipeline;
        ds.header.model = scenario.model.name;
        ds.header.doppler_hz = scenario.model.doppler_hz;
        ds.header.snr_db = train_snr_db;
        ds.header.seed = seed_base;
        int frame = 0;
        while (static_cast<long>(ds.inputs.size()) < n_records) {
            frame_records(ctx, pipeline, frame, seed_base, train_snr_db, ds);
            ++frame;
        }
        ds.inputs.resize(n_records);
        ds.targets.resize(n_records);
        ds.header.n_records = n_records;
        ds.header.in_rows = static_cast<std::uint32_t>(ds.inputs[0].rows());
        ds.header.in_cols = static_cast<std::uint32_t>(ds.inputs[0].cols());
        ds.header.tgt_rows = static_cast<std::uint32_t>(ds.targets[0].rows());
        ds.header.tgt_cols = static_cast<std::uint32_t>(ds.targets[0].cols());
        return ds;
    };

    const long n_train = std::max<long>(1, std::lround(0.8 * n_samples));
    const long n_test = std::max<long>(1, n_samples - n_train);
    const Dataset train_ds = build(n_train, derive_seed(scenario.seed, 0x7121A11ULL));
    const Dataset test_ds = build(n_test, derive_seed(scenario.seed, 0x7E57ULL));
    const std::string train_path = out_prefix + "_train.bin";
    const std::string test_path = out_prefix + "_test.bin";
    write_dataset(train_path, train_ds);
    write_dataset(test_path, test_ds);
    return {train_path, test_path};
}

// ---- JSON config

Scenario scenario_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    try {
        Scenario sc;
        if (j.contains("phy")) {
            const auto& p = j["phy"];
            if (p.contains("n_symbols")) sc.phy.n_symbols = p["n_symbols"].get<int>();
            if (p.contains("modulation")) {
                const std::string m = p["modulation"].get<std::string>();
                if (m == "qpsk" || m == "QPSK")
                    sc.phy.modulation = phy::Modulation::QPSK;
                else if (m == "16qam" || m == "16QAM" || m == "qam16")
                    sc.phy.modulation = phy::Modulation::QAM16;
                else
                    throw ConfigError("unknown modulation: " + m);
            }
            if (p.contains("n_preambles")) sc.phy.n_preambles = p["n_preambles"].get<int>();
        }
        if (j.contains("channel")) {
            const auto& c = j["channel"];
            const std::string name = c.value("model", "vtv-sdww");
            sc.model = channel::ChannelModel::by_name(name, c.value("doppler_hz", 0.0));
        }
        if (j.contains("snr_grid_db")) sc.snr_grid_db = j["snr_grid_db"].get<std::vector<double>>();
        if (j.contains("frames")) sc.frames = j["frames"].get<int>();
        if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("workers")) sc.workers = j["workers"].get<int>();
        if (j.contains("wi")) {
            const auto& w = j["wi"];
            if (w.contains("pilot_positions"))
                sc.wi.pilot_symbol_positions = w["pilot_positions"].get<std::vector<int>>();
            else
                sc.wi.pilot_symbol_positions =
                    est_conv::WiFrameConfig::default_positions(sc.phy.n_symbols,
                                                               w.value("n_pilot_symbols", 3));
            const std::string scheme = w.value("scheme", "fp-als");
            if (scheme == "fp-sls")
                sc.wi.scheme = est_conv::WiFrameConfig::Scheme::FP_SLS;
            else if (scheme == "fp-als")
                sc.wi.scheme = est_conv::WiFrameConfig::Scheme::FP_ALS;
            else if (scheme == "lp")
                sc.wi.scheme = est_conv::WiFrameConfig::Scheme::LP;
            else
                throw ConfigError("unknown WI scheme: " + scheme);
            sc.wi.n_taps = w.value("n_taps", 12);
            if (sc.wi.scheme == est_conv::WiFrameConfig::Scheme::LP)
                sc.wi.lp_rows =
                    est_conv::WiFrameConfig::default_lp_rows(sc.phy.k_on(), sc.wi.n_taps);
        } else {
            sc.wi = est_conv::WiFrameConfig::standard(sc.phy,
                                                      est_conv::WiFrameConfig::Scheme::FP_ALS, 3);
        }
        if (j.contains("estimators")) {
            for (const auto& e : j["estimators"]) {
                EstimatorSpec spec;
                spec.name = e.at("name").get<std::string>();
                if (e.contains("files"))
                    for (const auto& [k, v] : e["files"].items())
                        spec.files[k] = v.get<std::string>();
                if (e.contains("params"))
                    for (const auto& [k, v] : e["params"].items())
                        spec.params[k] = v.get<double>();
                sc.estimators.push_back(std::move(spec));
            }
        }
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
}

// ---- training drivers

namespace {

std::vector<Eigen::MatrixXd> image_pixel_columns(const std::vector<Eigen::MatrixXd>& grids) {
    std::vector<Eigen::MatrixXd> out;
    out.reserve(grids.size());
    for (const auto& g : grids) {
        Eigen::MatrixXd img(g.size(), 1);
        std::memcpy(img.data(), g.data(), sizeof(double) * g.size());
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace

std::map<std::string, std::string> train_pipeline(const std::string& pipeline,
                                                  const std::string& dataset_path,
                                                  const nn::TrainConfig& cfg,
                                                  const std::string& out_prefix) {
    const Dataset ds = read_dataset(dataset_path);
    std::map<std::string, std::string> out;

    if (pipeline == "dpa-fnn" || pipeline == "sta-fnn" || pipeline == "trfi-fnn") {
        nn::FnnNet net = pipeline == "dpa-fnn" ? est_dl::make_dpa_fnn(cfg.seed)
                                               : est_dl::make_sta_fnn(cfg.seed);
        Eigen::MatrixXd x(ds.header.in_rows, ds.inputs.size());
        Eigen::MatrixXd y(ds.header.tgt_rows, ds.targets.size());
        for (std::size_t r = 0; r < ds.inputs.size(); ++r) {
            x.col(r) = ds.inputs[r].col(0);
            y.col(r) = ds.targets[r].col(0);
        }
        nn::DenseRegression model(net, std::move(x), std::move(y));
        const auto losses = nn::train(model, cfg);
        const std::string path = out_prefix + ".net";
        est_dl::save_fnn(path, net);
        nn::save_loss_history(out_prefix + "_loss.csv", losses);
        out["net"] = path;
    } else if (pipeline == "lstm-dpa-ta") {
        nn::LstmNet net = est_dl::make_lstm_dpa_ta(cfg.seed);
        nn::LstmSequenceRegression model(net, ds.inputs, ds.targets);
        const auto losses = nn::train(model, cfg);
        const std::string path = out_prefix + ".net";
        est_dl::save_lstm(path, net);
        nn::save_loss_history(out_prefix + "_loss.csv", losses);
        out["net"] = path;
    } else if (pipeline == "lstm-fnn-dpa") {
        nn::LstmFnnNet net = est_dl::make_lstm_fnn(cfg.seed);
        nn::LstmFnnSequenceRegression model(net, ds.inputs, ds.targets);
        const auto losses = nn::train(model, cfg);
        const std::string path = out_prefix + ".net";
        est_dl::save_lstm_fnn(path, net);
        nn::save_loss_history(out_prefix + "_loss.csv", losses);
        out["net"] = path;
    } else if (pipeline == "channelnet") {
        const int h = static_cast<int>(ds.header.in_rows);
        const int w = static_cast<int>(ds.header.in_cols);
        auto imgs = image_pixel_columns(ds.inputs);
        auto tgts = image_pixel_columns(ds.targets);
        nn::CnnNet srcnn = est_dl::make_channelnet_srcnn(cfg.seed);
        {
            nn::CnnRegression model(srcnn, imgs, tgts, h, w);
            const auto losses = nn::train(model, cfg);
            nn::save_loss_history(out_prefix + "_srcnn_loss.csv", losses);
        }
        srcnn.set_train_mode(false);
        // the denoiser learns the residual noise of the super-resolved image
        std::vector<Eigen::MatrixXd> sr_out, residual;
        for (std::size_t r = 0; r < imgs.size(); ++r) {
            sr_out.push_back(srcnn.forward(imgs[r], h, w));
            residual.push_back(sr_out.back() - tgts[r]);
        }
        nn::CnnNet dncnn = est_dl::make_channelnet_dncnn(cfg.seed + 1);
        {
            nn::TrainConfig dcfg = cfg;
            dcfg.batch_size = std::min(cfg.batch_size, 4);  // batch activations are large
            nn::CnnRegression model(dncnn, sr_out, residual, h, w);
            const auto losses = nn::train(model, dcfg);
            nn::save_loss_history(out_prefix + "_dncnn_loss.csv", losses);
        }
        dncnn.set_train_mode(false);
        const std::string sp = out_prefix + "_srcnn.net";
        const std::string dp = out_prefix + "_dncnn.net";
        est_dl::save_cnn(sp, srcnn, "srcnn 64 32");
        est_dl::save_cnn(dp, dncnn, "dncnn 18 64");
        out["srcnn"] = sp;
        out["dncnn"] = dp;
    } else if (pipeline == "ts-channelnet") {
        const int h = static_cast<int>(ds.header.in_rows);
        nn::ConvLstmNet net = est_dl::make_sr_convlstm(cfg.seed);
        std::vector<std::vector<Eigen::MatrixXd>> seqs, tgts;
        for (std::size_t r = 0; r < ds.inputs.size(); ++r) {
            std::vector<Eigen::MatrixXd> si, st;
            for (int i = 0; i < ds.inputs[r].cols(); ++i) {
                si.push_back(ds.inputs[r].col(i));
                st.push_back(ds.targets[r].col(i));
            }
            seqs.push_back(std::move(si));
            tgts.push_back(std::move(st));
        }
        nn::ConvLstmSequenceRegression model(net, std::move(seqs), std::move(tgts), h, 1);
        const auto losses = nn::train(model, cfg);
        const std::string path = out_prefix + ".net";
        est_dl::save_convlstm(path, net);
        nn::save_loss_history(out_prefix + "_loss.csv", losses);
        out["net"] = path;
    } else if (pipeline.rfind("wi-", 0) == 0) {
        const int h = static_cast<int>(ds.header.in_rows);
        const int w = static_cast<int>(ds.header.in_cols);
        auto imgs = image_pixel_columns(ds.inputs);
        auto tgts = image_pixel_columns(ds.targets);
        const bool dn = pipeline.find("dn-cnn") != std::string::npos;
        nn::CnnNet net = dn ? est_dl::make_optimized_dncnn(cfg.seed)
                            : est_dl::make_optimized_srcnn(cfg.seed);
        std::vector<Eigen::MatrixXd> targets2;
        if (dn)
            for (std::size_t r = 0; r < imgs.size(); ++r)
                targets2.push_back(imgs[r] - tgts[r]);  // residual noise target
        nn::CnnRegression model(net, imgs, dn ? targets2 : tgts, h, w);
        const auto losses = nn::train(model, cfg);
        net.set_train_mode(false);
        const std::string path = out_prefix + ".net";
        est_dl::save_cnn(path, net, dn ? "dncnn 7 16" : "srcnn 32 16");
        nn::save_loss_history(out_prefix + "_loss.csv", losses);
        out["net"] = path;
    } else {
        throw ConfigError("unknown pipeline '" + pipeline + "'");
    }
    return out;
}

}  // namespace ddce::bench
