#include "ddce/est_conv.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <memory>
#include <numbers>

#include "ddce/dft.hpp"
#include "ddce/errors.hpp"

namespace ddce::est_conv {
namespace {

constexpr double kPi = std::numbers::pi;

double bessel_j0(double x) { return std::cyl_bessel_j(0.0, std::abs(x)); }

void warn(const std::string& msg) { std::cerr << "[ddce] warning: " << msg << "\n"; }

}  // namespace

RxFrame RxFrame::from_grid(const phy::FrameGrid& grid, const PhyConfig& cfg) {
    RxFrame rx;
    rx.cfg = &cfg;
    const auto& offs = cfg.active_offsets();
    rx.y.resize(cfg.k_on(), cfg.n_symbols);
    rx.preambles.resize(cfg.k_on(), cfg.n_preambles);
    for (int r = 0; r < cfg.k_on(); ++r) {
        const int bin = cfg.bin_of_offset(offs[r]);
        for (int i = 0; i < cfg.n_symbols; ++i) rx.y(r, i) = grid.values(bin, i);
        for (int p = 0; p < cfg.n_preambles; ++p) rx.preambles(r, p) = grid.preamble_rx(bin, p);
    }
    return rx;
}

Eigen::VectorXcd ls_preamble(const Eigen::MatrixXcd& rx_preambles,
                             const Eigen::VectorXcd& preamble, OpCounter* counter) {
    const int kon = static_cast<int>(rx_preambles.rows());
    const int p = static_cast<int>(rx_preambles.cols());
    if (p < 1) throw ShapeError("need at least one preamble");
    if (preamble.size() != kon) throw ShapeError("preamble length mismatch");

    Eigen::VectorXcd h(kon);
    for (int k = 0; k < kon; ++k) {
        if (preamble(k) == cd(0.0, 0.0))
            throw DivideByZeroError("zero preamble entry at row " + std::to_string(k));
        cd acc = rx_preambles(k, 0);
        for (int u = 1; u < p; ++u) acc = counted::add(acc, rx_preambles(k, u), counter);
        // the preamble is BPSK, so P*Lambda[k] is real and the division
        // costs two real divisions per subcarrier
        if (preamble(k).imag() == 0.0) {
            h(k) = counted::rdiv(acc, p * preamble(k).real(), counter);
        } else {
            h(k) = counted::div(acc, cd(p, 0) * preamble(k), counter);
        }
    }
    return h;
}

Eigen::VectorXcd dpa_step(const Eigen::VectorXcd& y, const Eigen::VectorXcd& h_prev,
                          const PhyConfig& cfg, OpCounter* counter) {
    const int kon = cfg.k_on();
    Eigen::VectorXcd d(kon);
    for (int k = 0; k < kon; ++k) {
        const cd eq = counted::div(y(k), h_prev(k), counter);
        d(k) = phy::demap_symbol(eq, cfg.modulation);
    }
    // pilot subcarriers carry known symbols
    const auto pv = cfg.pilot_values();
    const auto& prow = cfg.pilot_rows();
    for (std::size_t p = 0; p < prow.size(); ++p) d(prow[p]) = pv(p);

    Eigen::VectorXcd h(kon);
    for (int k = 0; k < kon; ++k) h(k) = counted::div(y(k), d(k), counter);
    return h;
}

Eigen::VectorXcd sta_step(const Eigen::VectorXcd& y, const Eigen::VectorXcd& h_prev,
                          const StaParams& p, const PhyConfig& cfg, OpCounter* counter) {
    if (p.alpha < 1.0 || p.beta < 0) throw ConfigError("STA requires alpha >= 1, beta >= 0");
    Eigen::VectorXcd h_dpa = dpa_step(y, h_prev, cfg, counter);
    if (p.alpha == 1.0 && p.beta == 0) return h_dpa;  // degenerates to DPA

    const int kon = cfg.k_on();
    Eigen::VectorXcd h_fd = h_dpa;
    if (p.beta > 0) {
        const double w = 1.0 / (2.0 * p.beta + 1.0);
        for (int r : cfg.data_rows()) {
            cd acc(0.0, 0.0);
            for (int l = -p.beta; l <= p.beta; ++l) {
                const int rr = std::clamp(r + l, 0, kon - 1);
                acc = counted::add(acc, h_dpa(rr), counter);
            }
            h_fd(r) = counted::rscale(w, acc, counter);
        }
    }
    if (p.alpha == 1.0) return h_fd;

    Eigen::VectorXcd h(kon);
    const double c_prev = 1.0 - 1.0 / p.alpha;
    const double c_cur = 1.0 / p.alpha;
    for (int k = 0; k < kon; ++k)
        h(k) = counted::add(counted::rscale(c_prev, h_prev(k), counter),
                            counted::rscale(c_cur, h_fd(k), counter), counter);
    return h;
}

Eigen::VectorXcd trfi_step(const Eigen::VectorXcd& y_prev, const Eigen::VectorXcd& y,
                           const Eigen::VectorXcd& h_prev, const PhyConfig& cfg,
                           int* rs_size, OpCounter* counter) {
    const int kon = cfg.k_on();
    Eigen::VectorXcd h_dpa = dpa_step(y, h_prev, cfg, counter);

    std::vector<int> rs, urs;
    rs.reserve(kon);
    for (int k = 0; k < kon; ++k) {
        const cd d1 = phy::demap_symbol(counted::div(y_prev(k), h_dpa(k), counter), cfg.modulation);
        const cd d2 = phy::demap_symbol(counted::div(y_prev(k), h_prev(k), counter), cfg.modulation);
        if (d1 == d2)
            rs.push_back(k);
        else
            urs.push_back(k);
    }
    if (rs_size) *rs_size = static_cast<int>(rs.size());

    Eigen::VectorXcd h = h_dpa;
    if (urs.empty()) return h;
    if (rs.size() < 4) return h;  // too few knots for a cubic; keep DPA

    const auto& offs = cfg.active_offsets();
    Eigen::VectorXd xs(rs.size()), yr(rs.size()), yi(rs.size()), xq(urs.size());
    for (std::size_t j = 0; j < rs.size(); ++j) {
        xs(j) = offs[rs[j]];
        yr(j) = h_dpa(rs[j]).real();
        yi(j) = h_dpa(rs[j]).imag();
    }
    for (std::size_t j = 0; j < urs.size(); ++j) xq(j) = offs[urs[j]];
    const Eigen::VectorXd vr = spline_eval(xs, yr, xq);
    const Eigen::VectorXd vi = spline_eval(xs, yi, xq);
    for (std::size_t j = 0; j < urs.size(); ++j) h(urs[j]) = cd(vr(j), vi(j));

    // interpolation cost per unreliable subcarrier, per the published accounting
    if (counter) counter->block({26 * static_cast<std::int64_t>(urs.size()),
                                 30 * static_cast<std::int64_t>(urs.size())});
    return h;
}

Eigen::VectorXcd add_tt_step(const Eigen::VectorXcd& y, const Eigen::VectorXcd& h_prev,
                             const AddTtParams& p, const PhyConfig& cfg, OpCounter* counter) {
    if (p.trunc_len > cfg.k_total) throw ConfigError("truncation length exceeds K");
    const int kon = cfg.k_on();
    const int k = cfg.k_total;
    Eigen::VectorXcd h_dpa = dpa_step(y, h_prev, cfg, counter);

    // time-domain truncation through the full-K unitary DFT pair
    static thread_local std::unique_ptr<UnitaryDft> dft;
    if (!dft || dft->size() != k) dft = std::make_unique<UnitaryDft>(k);
    const auto& offs = cfg.active_offsets();
    Eigen::VectorXcd bins = Eigen::VectorXcd::Zero(k);
    for (int r = 0; r < kon; ++r) bins(cfg.bin_of_offset(offs[r])) = h_dpa(r);
    Eigen::VectorXcd t = dft->inverse(bins);
    t.tail(k - p.trunc_len).setZero();
    Eigen::VectorXcd bins_tt = dft->forward(t);
    Eigen::VectorXcd h_tt(kon);
    for (int r = 0; r < kon; ++r) h_tt(r) = bins_tt(cfg.bin_of_offset(offs[r]));
    if (counter)
        counter->block({4LL * p.trunc_len * kon, 5LL * p.trunc_len * kon - 2LL * kon});

    // frequency averaging over all active subcarriers
    Eigen::VectorXcd h_ftt = h_tt;
    if (p.beta > 0) {
        const double w = 1.0 / (2.0 * p.beta + 1.0);
        for (int r = 0; r < kon; ++r) {
            cd acc(0.0, 0.0);
            for (int l = -p.beta; l <= p.beta; ++l)
                acc = counted::add(acc, h_tt(std::clamp(r + l, 0, kon - 1)), counter);
            h_ftt(r) = counted::rscale(w, acc, counter);
        }
    }

    // direct-weight time averaging (alpha multiplies, unlike STA's 1/alpha)
    Eigen::VectorXcd h(kon);
    for (int r = 0; r < kon; ++r)
        h(r) = counted::add(counted::rscale(1.0 - p.alpha, h_prev(r), counter),
                            counted::rscale(p.alpha, h_ftt(r), counter), counter);
    return h;
}

namespace {

ChannelEstimate run_sbs(const RxFrame& rx, const Eigen::VectorXcd& h_init,
                        const std::string& name,
                        const std::function<Eigen::VectorXcd(int, const Eigen::VectorXcd&)>& step) {
    ChannelEstimate est;
    est.method = name;
    est.h_hat.resize(rx.y.rows(), rx.y.cols());
    Eigen::VectorXcd h = h_init;
    for (int i = 0; i < rx.y.cols(); ++i) {
        h = step(i, h);
        est.h_hat.col(i) = h;
    }
    return est;
}

}  // namespace

ChannelEstimate dpa(const RxFrame& rx, const Eigen::VectorXcd& h_init, OpCounter* counter) {
    return run_sbs(rx, h_init, "DPA", [&](int i, const Eigen::VectorXcd& h) {
        return dpa_step(rx.y.col(i), h, *rx.cfg, counter);
    });
}

ChannelEstimate sta(const RxFrame& rx, const Eigen::VectorXcd& h_init, const StaParams& p,
                    OpCounter* counter) {
    return run_sbs(rx, h_init, "STA", [&](int i, const Eigen::VectorXcd& h) {
        return sta_step(rx.y.col(i), h, p, *rx.cfg, counter);
    });
}

ChannelEstimate trfi(const RxFrame& rx, const Eigen::VectorXcd& h_init, OpCounter* counter) {
    ChannelEstimate est;
    est.method = "TRFI";
    est.h_hat.resize(rx.y.rows(), rx.y.cols());
    est.rs_sizes.resize(rx.y.cols());
    Eigen::VectorXcd h = h_init;
    for (int i = 0; i < rx.y.cols(); ++i) {
        // the previous received symbol; the last preamble serves for i = 0
        const Eigen::VectorXcd y_prev =
            i == 0 ? rx.preambles.col(rx.preambles.cols() - 1) : rx.y.col(i - 1);
        h = trfi_step(y_prev, rx.y.col(i), h, *rx.cfg, &est.rs_sizes[i], counter);
        est.h_hat.col(i) = h;
    }
    return est;
}

ChannelEstimate add_tt(const RxFrame& rx, const Eigen::VectorXcd& h_init, const AddTtParams& p,
                       OpCounter* counter) {
    return run_sbs(rx, h_init, "ADD-TT", [&](int i, const Eigen::VectorXcd& h) {
        return add_tt_step(rx.y.col(i), h, p, *rx.cfg, counter);
    });
}

Eigen::VectorXcd ta_blend(const Eigen::VectorXcd& prev, const Eigen::VectorXcd& cur, double alpha,
                          OpCounter* counter) {
    if (alpha < 1.0) throw ConfigError("TA weighting requires alpha >= 1");
    if (alpha == 1.0) return cur;
    Eigen::VectorXcd out(prev.size());
    if (alpha == 2.0) {
        for (int k = 0; k < prev.size(); ++k)
            out(k) = counted::rscale(0.5, counted::add(prev(k), cur(k), counter), counter);
    } else {
        for (int k = 0; k < prev.size(); ++k)
            out(k) = counted::add(counted::rscale(1.0 - 1.0 / alpha, prev(k), counter),
                                  counted::rscale(1.0 / alpha, cur(k), counter), counter);
    }
    return out;
}

ChannelEstimate dpa_ta(const RxFrame& rx, const Eigen::VectorXcd& h_init, double alpha,
                       OpCounter* counter) {
    ChannelEstimate est;
    est.method = "DPA-TA";
    est.h_hat.resize(rx.y.rows(), rx.y.cols());
    Eigen::VectorXcd h_ta = h_init;
    for (int i = 0; i < rx.y.cols(); ++i) {
        const Eigen::VectorXcd h_dpa = dpa_step(rx.y.col(i), h_ta, *rx.cfg, counter);
        h_ta = ta_blend(h_ta, h_dpa, alpha, counter);
        est.h_hat.col(i) = h_ta;
    }
    return est;
}

Eigen::MatrixXcd pilot_ls(const RxFrame& rx, OpCounter* counter) {
    const auto& prow = rx.cfg->pilot_rows();
    const auto pv = rx.cfg->pilot_values();
    Eigen::MatrixXcd out(prow.size(), rx.y.cols());
    for (int i = 0; i < rx.y.cols(); ++i)
        for (std::size_t p = 0; p < prow.size(); ++p)
            out(p, i) = counted::rdiv(rx.y(prow[p], i), pv(p).real(), counter);
    return out;
}

// ---- RBF

RbfInterpolator::RbfInterpolator(const PhyConfig& cfg, double r0) : cfg_(cfg), r0_(r0) {
    if (r0 <= 0.0) throw ConfigError("RBF scale r0 must be positive");
    const int kp = cfg.n_pilot_sc;
    const int kon = cfg.k_on();
    const int ni = cfg.n_symbols;
    const int np = kp * ni;
    const auto& prow = cfg.pilot_rows();

    // pilot coordinates, j = i*K_p + q
    std::vector<double> pk(np), pi(np);
    for (int i = 0; i < ni; ++i)
        for (int q = 0; q < kp; ++q) {
            pk[i * kp + q] = prow[q];
            pi[i * kp + q] = i + 1;
        }

    auto phi = [&](double dk, double di) {
        const double s = std::abs(dk) + std::abs(di);
        return std::exp(-s * s / r0_);
    };

    Eigen::MatrixXd a(np, np);
    for (int r = 0; r < np; ++r)
        for (int c = 0; c < np; ++c) a(r, c) = phi(pk[r] - pk[c], pi[r] - pi[c]);

    Eigen::FullPivLU<Eigen::MatrixXd> probe(a);
    probe.setThreshold(1e-10);
    if (probe.rank() < np) {
        regularized_ = true;
        warn("RBF Gram matrix ill-conditioned; applying ridge regularization");
        a.diagonal().array() += 1e-8;
    }
    lu_.compute(a);

    eval_.resize(kon * ni, np);
    for (int i = 0; i < ni; ++i)
        for (int r = 0; r < kon; ++r) {
            const int row = i * kon + r;
            for (int c = 0; c < np; ++c) eval_(row, c) = phi(r - pk[c], (i + 1) - pi[c]);
        }
}

ChannelEstimate RbfInterpolator::interpolate(const Eigen::MatrixXcd& pilot_ls_grid,
                                             OpCounter* counter) const {
    const int kp = cfg_.n_pilot_sc;
    const int ni = cfg_.n_symbols;
    if (pilot_ls_grid.rows() != kp || pilot_ls_grid.cols() != ni)
        throw ShapeError("pilot LS grid must be K_p x I");
    const int np = kp * ni;

    Eigen::VectorXd rhs_re(np), rhs_im(np);
    for (int i = 0; i < ni; ++i)
        for (int q = 0; q < kp; ++q) {
            rhs_re(i * kp + q) = pilot_ls_grid(q, i).real();
            rhs_im(i * kp + q) = pilot_ls_grid(q, i).imag();
        }
    const Eigen::VectorXd w_re = lu_.solve(rhs_re);
    const Eigen::VectorXd w_im = lu_.solve(rhs_im);
    const Eigen::VectorXd v_re = eval_ * w_re;
    const Eigen::VectorXd v_im = eval_ * w_im;

    ChannelEstimate est;
    est.method = "RBF";
    est.h_hat.resize(cfg_.k_on(), ni);
    for (int i = 0; i < ni; ++i)
        for (int r = 0; r < cfg_.k_on(); ++r)
            est.h_hat(r, i) = cd(v_re(i * cfg_.k_on() + r), v_im(i * cfg_.k_on() + r));

    if (counter) {
        // published accounting for the whole RBF stage (weights + evaluation)
        const std::int64_t kp2i2 = static_cast<std::int64_t>(kp) * kp * ni * ni;
        const std::int64_t kpi = static_cast<std::int64_t>(kp) * ni;
        const std::int64_t kd = cfg_.n_data_sc;
        counter->block({kp2i2 * (4 + kd * ni) + kpi * (2 + 3 * kd * ni),
                        kpi * (5 * kpi + 5 * kd * ni - 2)});
    }
    return est;
}

ChannelEstimate rbf_interpolate(const Eigen::MatrixXcd& pilot_ls_grid, double r0,
                                const PhyConfig& cfg) {
    return RbfInterpolator(cfg, r0).interpolate(pilot_ls_grid);
}

// ---- WI

void WiFrameConfig::validate(const PhyConfig& cfg) const {
    if (pilot_symbol_positions.empty()) throw ConfigError("WI needs at least one pilot symbol");
    for (std::size_t i = 0; i < pilot_symbol_positions.size(); ++i) {
        if (pilot_symbol_positions[i] < 1 || pilot_symbol_positions[i] > cfg.n_symbols)
            throw ConfigError("WI pilot symbol position out of range");
        if (i > 0 && pilot_symbol_positions[i] <= pilot_symbol_positions[i - 1])
            throw ConfigError("WI pilot symbol positions must be strictly increasing");
    }
    if (n_taps < 1 || n_taps > cfg.k_on()) throw ConfigError("WI n_taps out of range");
    if (scheme == Scheme::LP && static_cast<int>(lp_rows.size()) != n_taps)
        throw ConfigError("LP scheme requires exactly n_taps pilot rows");
}

std::vector<int> WiFrameConfig::default_positions(int n_symbols, int p) {
    // first, last, and evenly spread in between ({1, 51, 100} for I=100, P=3)
    std::vector<int> pos(p);
    for (int i = 0; i < p; ++i)
        pos[i] = 1 + static_cast<int>(std::lround(static_cast<double>(i) * (n_symbols - 1) / (p - 1)));
    return pos;
}

std::vector<int> WiFrameConfig::default_lp_rows(int k_on, int n_taps) {
    std::vector<int> rows(n_taps);
    for (int i = 0; i < n_taps; ++i)
        rows[i] = static_cast<int>(std::lround(static_cast<double>(i) * (k_on - 1) / (n_taps - 1)));
    return rows;
}

WiFrameConfig WiFrameConfig::standard(const PhyConfig& cfg, Scheme scheme, int p) {
    WiFrameConfig wi;
    wi.pilot_symbol_positions = default_positions(cfg.n_symbols, p);
    wi.scheme = scheme;
    if (scheme == Scheme::LP) wi.lp_rows = default_lp_rows(cfg.k_on(), wi.n_taps);
    wi.validate(cfg);
    return wi;
}

namespace {

/// K_on x L slice of the DFT matrix: rows = active bins, columns = taps.
Eigen::MatrixXcd dft_slice(const PhyConfig& cfg, const std::vector<int>& rows, int l) {
    Eigen::MatrixXcd f(rows.size(), l);
    const auto& offs = cfg.active_offsets();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const int bin = cfg.bin_of_offset(offs[rows[r]]);
        for (int c = 0; c < l; ++c) {
            const double ph = -2.0 * kPi * bin * c / static_cast<double>(cfg.k_total);
            f(r, c) = cd(std::cos(ph), std::sin(ph));
        }
    }
    return f;
}

std::vector<int> all_rows(int n) {
    std::vector<int> v(n);
    for (int i = 0; i < n; ++i) v[i] = i;
    return v;
}

}  // namespace

Eigen::MatrixXcd wi_pilot_estimates(const Eigen::MatrixXcd& rx_pilot_symbols,
                                    const WiFrameConfig& wi, const PhyConfig& cfg,
                                    OpCounter* counter) {
    const int kon = cfg.k_on();
    const int p = static_cast<int>(rx_pilot_symbols.cols());
    const Eigen::VectorXcd lam = cfg.preamble_active();
    Eigen::MatrixXcd est(kon, p);

    if (wi.scheme == WiFrameConfig::Scheme::LP) {
        const Eigen::MatrixXcd f_p = dft_slice(cfg, wi.lp_rows, wi.n_taps);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(f_p, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.rank() < wi.n_taps) throw ConfigError("rank-deficient truncated DFT in LP scheme");
        const Eigen::MatrixXcd f_on = dft_slice(cfg, all_rows(kon), wi.n_taps);
        for (int q = 0; q < p; ++q) {
            Eigen::VectorXcd y_lp(wi.n_taps);
            for (int j = 0; j < wi.n_taps; ++j) {
                const int r = wi.lp_rows[j];
                y_lp(j) = counted::rdiv(rx_pilot_symbols(r, q), lam(r).real(), counter);
            }
            est.col(q) = f_on * svd.solve(y_lp);
        }
        if (counter)
            counter->block({4LL * kon * wi.n_taps * p, 5LL * kon * wi.n_taps * p});
        return est;
    }

    // SLS division (the preamble sequence doubles as the pilot symbol)
    for (int q = 0; q < p; ++q)
        for (int r = 0; r < kon; ++r)
            est(r, q) = counted::rdiv(rx_pilot_symbols(r, q), lam(r).real(), counter);

    if (wi.scheme == WiFrameConfig::Scheme::FP_ALS) {
        const Eigen::MatrixXcd f_on = dft_slice(cfg, all_rows(kon), wi.n_taps);
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(f_on, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.rank() < wi.n_taps) throw ConfigError("rank-deficient truncated DFT in ALS scheme");
        for (int q = 0; q < p; ++q) est.col(q) = f_on * svd.solve(Eigen::VectorXcd(est.col(q)));
        if (counter) counter->block({4LL * kon * kon * p, 5LL * kon * kon * p});
    }
    return est;
}

ChannelEstimate wi_interpolate(const Eigen::MatrixXcd& pilot_estimates, const WiFrameConfig& wi,
                               double doppler_hz, const Eigen::VectorXd& noise_powers,
                               const PhyConfig& cfg, OpCounter* counter) {
    if (doppler_hz < 0) throw ConfigError("doppler_hz must be >= 0");
    const int p = wi.n_pilot_symbols();
    if (pilot_estimates.cols() != p + 1 || noise_powers.size() != p + 1)
        throw ShapeError("pilot_estimates must be K_on x (P+1) with matching noise powers");

    const int kon = cfg.k_on();
    const double ts = cfg.symbol_duration();
    ChannelEstimate est;
    est.method = "WI";
    est.h_hat.resize(kon, cfg.n_symbols);

    int prev_pos = 0;  // symbol position of the leading estimate (0 = frame start)
    for (int f = 1; f <= p; ++f) {
        const int cur_pos = wi.pilot_symbol_positions[f - 1];
        const int i_f = cur_pos - prev_pos - 1;  // data symbols inside the sub-frame
        const Eigen::VectorXcd lead = pilot_estimates.col(f - 1);
        const Eigen::VectorXcd trail = pilot_estimates.col(f);

        if (i_f > 0) {
            const double j_pp = bessel_j0(2.0 * kPi * doppler_hz * i_f * ts);
            Eigen::Matrix2d g;
            g << 1.0 + noise_powers(f - 1), j_pp, j_pp, 1.0 + noise_powers(f);
            if (std::abs(g.determinant()) < 1e-10) {
                warn("WI weight system singular; applying Tikhonov regularization");
                g.diagonal().array() += 1e-8;
            }
            const Eigen::Matrix2d ginv = g.inverse();
            for (int m = 1; m <= i_f; ++m) {
                Eigen::RowVector2d num;
                num << bessel_j0(2.0 * kPi * doppler_hz * (m - 1) * ts),
                    bessel_j0(2.0 * kPi * doppler_hz * (i_f + 1 - m) * ts);
                const Eigen::RowVector2d c = num * ginv;
                const int col = prev_pos + m - 1;  // 0-based symbol index
                for (int r = 0; r < kon; ++r)
                    est.h_hat(r, col) =
                        counted::add(counted::rscale(c(0), lead(r), counter),
                                     counted::rscale(c(1), trail(r), counter), counter);
            }
        }
        est.h_hat.col(cur_pos - 1) = trail;  // pilot symbol keeps its own estimate
        prev_pos = cur_pos;
    }
    // data symbols after the last pilot symbol (none with the default layout)
    for (int i = prev_pos; i < cfg.n_symbols; ++i) est.h_hat.col(i) = pilot_estimates.col(p);
    return est;
}

// ---- LMMSE

ChannelStats ChannelStats::from_model(const channel::ChannelModel& model, const PhyConfig& cfg) {
    const auto taps = model.sampled_taps(cfg.sample_rate);
    const auto& offs = cfg.active_offsets();
    const int kon = cfg.k_on();
    ChannelStats s;
    s.r_freq.resize(kon, kon);
    for (int a = 0; a < kon; ++a)
        for (int b = 0; b < kon; ++b) {
            cd acc(0.0, 0.0);
            for (std::size_t l = 0; l < taps.delays.size(); ++l) {
                const double ph = -2.0 * kPi * taps.delays[l] * (offs[a] - offs[b]) /
                                  static_cast<double>(cfg.k_total);
                acc += taps.powers[l] * cd(std::cos(ph), std::sin(ph));
            }
            s.r_freq(a, b) = acc;
        }
    s.r_time.resize(cfg.n_symbols, cfg.n_symbols);
    const double ts = cfg.symbol_duration();
    for (int a = 0; a < cfg.n_symbols; ++a)
        for (int b = 0; b < cfg.n_symbols; ++b)
            s.r_time(a, b) = bessel_j0(2.0 * kPi * model.doppler_hz * (a - b) * ts);
    return s;
}

ChannelEstimate lmmse_2d(const std::vector<std::pair<int, int>>& obs_coords,
                         const Eigen::VectorXcd& obs_values, const ChannelStats& stats,
                         double noise_var, const PhyConfig& cfg) {
    const int n = static_cast<int>(obs_coords.size());
    if (obs_values.size() != n) throw ShapeError("observation count mismatch");
    const int kon = cfg.k_on();
    const int ni = cfg.n_symbols;

    Eigen::MatrixXcd r_pp(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            r_pp(a, b) = stats.r_freq(obs_coords[a].first, obs_coords[b].first) *
                         stats.r_time(obs_coords[a].second, obs_coords[b].second);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(r_pp);
    if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, eig.eigenvalues().maxCoeff()))
        throw ConfigError("observation covariance is not PSD");

    Eigen::MatrixXcd a = r_pp;
    a.diagonal().array() += noise_var;
    Eigen::VectorXcd w;
    if (noise_var > 0) {
        w = a.ldlt().solve(obs_values);
    } else {
        w = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd>(a).solve(obs_values);
    }

    ChannelEstimate est;
    est.method = "2D-LMMSE";
    est.h_hat.resize(kon, ni);
    for (int i = 0; i < ni; ++i)
        for (int r = 0; r < kon; ++r) {
            cd acc(0.0, 0.0);
            for (int b = 0; b < n; ++b)
                acc += stats.r_freq(r, obs_coords[b].first) *
                       stats.r_time(i, obs_coords[b].second) * w(b);
            est.h_hat(r, i) = acc;
        }
    return est;
}

Lmmse2DFull::Lmmse2DFull(const ChannelStats& stats, double noise_var) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ef(stats.r_freq);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> et(stats.r_time);
    if (ef.eigenvalues().minCoeff() < -1e-8 || et.eigenvalues().minCoeff() < -1e-8)
        throw ConfigError("channel statistics are not PSD");
    u_freq_ = ef.eigenvectors();
    u_time_ = et.eigenvectors();
    const Eigen::VectorXd lf = ef.eigenvalues().cwiseMax(0.0);
    const Eigen::VectorXd lt = et.eigenvalues().cwiseMax(0.0);
    shrink_.resize(lf.size(), lt.size());
    for (int a = 0; a < lf.size(); ++a)
        for (int b = 0; b < lt.size(); ++b) {
            const double lam = lf(a) * lt(b);
            shrink_(a, b) = lam + noise_var > 0 ? lam / (lam + noise_var) : 0.0;
        }
}

Eigen::MatrixXcd Lmmse2DFull::apply(const Eigen::MatrixXcd& h_obs) const {
    if (h_obs.rows() != u_freq_.rows() || h_obs.cols() != u_time_.rows())
        throw ShapeError("observation grid dimensions mismatch");
    Eigen::MatrixXcd g = u_freq_.adjoint() * h_obs * u_time_;
    g.array() *= shrink_.array();
    return u_freq_ * g * u_time_.transpose();
}

// ---- spline

Eigen::VectorXd spline_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& xq) {
    const int n = static_cast<int>(x.size());
    if (n < 2 || y.size() != n) throw ShapeError("spline needs >= 2 knots");
    // natural cubic spline: tridiagonal solve for second derivatives
    Eigen::VectorXd h(n - 1);
    for (int i = 0; i < n - 1; ++i) {
        h(i) = x(i + 1) - x(i);
        if (h(i) <= 0) throw ShapeError("spline knots must be strictly increasing");
    }
    Eigen::VectorXd m = Eigen::VectorXd::Zero(n);
    if (n > 2) {
        Eigen::VectorXd diag(n - 2), rhs(n - 2), lower(n - 2), upper(n - 2);
        for (int i = 1; i < n - 1; ++i) {
            diag(i - 1) = 2.0 * (h(i - 1) + h(i));
            rhs(i - 1) = 6.0 * ((y(i + 1) - y(i)) / h(i) - (y(i) - y(i - 1)) / h(i - 1));
            lower(i - 1) = h(i - 1);
            upper(i - 1) = h(i);
        }
        // Thomas algorithm
        for (int i = 1; i < n - 2; ++i) {
            const double w = lower(i) / diag(i - 1);
            diag(i) -= w * upper(i - 1);
            rhs(i) -= w * rhs(i - 1);
        }
        Eigen::VectorXd sol(n - 2);
        sol(n - 3) = rhs(n - 3) / diag(n - 3);
        for (int i = n - 4; i >= 0; --i) sol(i) = (rhs(i) - upper(i) * sol(i + 1)) / diag(i);
        m.segment(1, n - 2) = sol;
    }

    Eigen::VectorXd out(xq.size());
    for (int j = 0; j < xq.size(); ++j) {
        double q = xq(j);
        if (q <= x(0)) {
            out(j) = y(0);  // nearest-knot extrapolation
            continue;
        }
        if (q >= x(n - 1)) {
            out(j) = y(n - 1);
            continue;
        }
        int i = static_cast<int>(std::upper_bound(x.data(), x.data() + n, q) - x.data()) - 1;
        i = std::clamp(i, 0, n - 2);
        const double a = (x(i + 1) - q) / h(i);
        const double b = (q - x(i)) / h(i);
        out(j) = a * y(i) + b * y(i + 1) +
                 ((a * a * a - a) * m(i) + (b * b * b - b) * m(i + 1)) * h(i) * h(i) / 6.0;
    }
    return out;
}

}  // namespace ddce::est_conv
