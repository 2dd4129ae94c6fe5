#include "neq/linear_eq.hpp"

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace neq {

namespace {

double tap_or_zero(const std::vector<double>& h, int i) {
    return (i >= 0 && i < static_cast<int>(h.size())) ? h[static_cast<std::size_t>(i)] : 0.0;
}

}  // namespace

int default_ffe_cursor(const Channel& ch, int n_taps) {
    return std::min(std::max(ch.pre_cursors + 2, 0), n_taps - 1);
}

FfeTaps design_mmse_ffe(const Channel& ch, const Modulation& mod, double sigma, int n_taps,
                        int cursor, DesignInfo* info) {
    if (n_taps < 1) throw std::invalid_argument("design_mmse_ffe: need at least one tap");
    if (cursor < 0 || cursor >= n_taps) throw std::invalid_argument("design_mmse_ffe: cursor out of range");
    if (sigma < 0.0) throw std::invalid_argument("design_mmse_ffe: negative sigma");
    ch.validate();

    const int len = ch.length();
    std::vector<double> autocorr(static_cast<std::size_t>(n_taps), 0.0);
    for (int m = 0; m < n_taps; ++m)
        for (int i = 0; i + m < len; ++i)
            autocorr[static_cast<std::size_t>(m)] += ch.taps[static_cast<std::size_t>(i)] *
                                                     ch.taps[static_cast<std::size_t>(i + m)];

    const double noise_ratio = sigma * sigma / mod.mean_level_power();
    Eigen::MatrixXd R(n_taps, n_taps);
    for (int k = 0; k < n_taps; ++k)
        for (int l = 0; l < n_taps; ++l)
            R(k, l) = autocorr[static_cast<std::size_t>(std::abs(k - l))] + (k == l ? noise_ratio : 0.0);

    Eigen::VectorXd p(n_taps);
    for (int k = 0; k < n_taps; ++k) p(k) = tap_or_zero(ch.taps, cursor - k);

    Eigen::VectorXd w = R.ldlt().solve(p);
    const double residual = (R * w - p).lpNorm<Eigen::Infinity>();
    bool fallback = false;
    if (!w.allFinite() || residual > 1e-9 * std::max(1.0, p.lpNorm<Eigen::Infinity>())) {
        w = R.colPivHouseholderQr().solve(p);
        fallback = true;
    }
    if (info) {
        info->ls_fallback = fallback;
        info->residual = residual;
    }

    FfeTaps out;
    out.cursor = cursor;
    out.taps.assign(w.data(), w.data() + n_taps);
    return out;
}

std::vector<double> ffe_apply(const FfeTaps& taps, const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    const int m = static_cast<int>(taps.taps.size());
    std::vector<double> y(x.size(), 0.0);
    for (int t = 0; t < n; ++t) {
        double acc = 0.0;
        for (int k = 0; k < m; ++k) {
            const int idx = t + taps.cursor - k;
            if (idx >= 0 && idx < n) acc += taps.taps[static_cast<std::size_t>(k)] * x[static_cast<std::size_t>(idx)];
        }
        y[static_cast<std::size_t>(t)] = acc;
    }
    return y;
}

SymbolStream dfe_run(const DfeConfig& cfg, const std::vector<double>& x, const Modulation& mod) {
    const std::vector<double> ffe_out = ffe_apply(cfg.ff, x);
    const int n_fb = static_cast<int>(cfg.fb.size());
    SymbolStream d;
    d.indices.resize(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        double stat = ffe_out[t];
        for (int k = 0; k < n_fb; ++k) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(t) - 1 - k;
            if (j >= 0) stat -= cfg.fb[static_cast<std::size_t>(k)] * mod.levels[d.indices[static_cast<std::size_t>(j)]];
        }
        d.indices[t] = static_cast<std::uint8_t>(slice_index(mod, stat));
    }
    return d;
}

DfeConfig design_ffe_dfe(const Channel& ch, const Modulation& mod, double sigma, int n_ff,
                         int n_fb, DesignInfo* info) {
    if (n_ff < 1) throw std::invalid_argument("design_ffe_dfe: need at least one forward tap");
    if (n_fb < 0) throw std::invalid_argument("design_ffe_dfe: negative feedback tap count");
    if (n_fb == 0) {
        DfeConfig cfg;
        cfg.ff = design_mmse_ffe(ch, mod, sigma, n_ff, default_ffe_cursor(ch, n_ff), info);
        return cfg;
    }
    ch.validate();
    const int cursor = default_ffe_cursor(ch, n_ff);
    const int len = ch.length();

    std::vector<double> autocorr(static_cast<std::size_t>(n_ff), 0.0);
    for (int m = 0; m < n_ff; ++m)
        for (int i = 0; i + m < len; ++i)
            autocorr[static_cast<std::size_t>(m)] += ch.taps[static_cast<std::size_t>(i)] *
                                                     ch.taps[static_cast<std::size_t>(i + m)];

    const double noise_ratio = sigma * sigma / mod.mean_level_power();
    Eigen::MatrixXd R(n_ff, n_ff);
    for (int k = 0; k < n_ff; ++k)
        for (int l = 0; l < n_ff; ++l)
            R(k, l) = autocorr[static_cast<std::size_t>(std::abs(k - l))] + (k == l ? noise_ratio : 0.0);

    // Post-cursor positions handled by feedback drop out of the quadratic cost.
    for (int j = 1; j <= n_fb; ++j) {
        Eigen::VectorXd hj(n_ff);
        for (int k = 0; k < n_ff; ++k) hj(k) = tap_or_zero(ch.taps, cursor + j - k);
        R -= hj * hj.transpose();
    }

    Eigen::VectorXd p(n_ff);
    for (int k = 0; k < n_ff; ++k) p(k) = tap_or_zero(ch.taps, cursor - k);

    Eigen::VectorXd w = R.ldlt().solve(p);
    const double residual = (R * w - p).lpNorm<Eigen::Infinity>();
    bool fallback = false;
    if (!w.allFinite() || residual > 1e-9 * std::max(1.0, p.lpNorm<Eigen::Infinity>())) {
        w = R.colPivHouseholderQr().solve(p);
        fallback = true;
    }
    if (info) {
        info->ls_fallback = fallback;
        info->residual = residual;
    }

    DfeConfig cfg;
    cfg.ff.cursor = cursor;
    cfg.ff.taps.assign(w.data(), w.data() + n_ff);
    const std::vector<double> pulse = equalized_pulse(cfg.ff, ch);
    cfg.fb.resize(static_cast<std::size_t>(n_fb), 0.0);
    for (int j = 1; j <= n_fb; ++j) {
        const int idx = cursor + j;
        if (idx < static_cast<int>(pulse.size())) cfg.fb[static_cast<std::size_t>(j - 1)] = pulse[static_cast<std::size_t>(idx)];
    }
    return cfg;
}

std::vector<double> equalized_pulse(const FfeTaps& taps, const Channel& ch) {
    const int nw = static_cast<int>(taps.taps.size());
    const int nh = ch.length();
    std::vector<double> q(static_cast<std::size_t>(nw + nh - 1), 0.0);
    for (int k = 0; k < nw; ++k)
        for (int i = 0; i < nh; ++i)
            q[static_cast<std::size_t>(k + i)] += taps.taps[static_cast<std::size_t>(k)] * ch.taps[static_cast<std::size_t>(i)];
    return q;
}

namespace {

void write_reals(std::ofstream& out, const std::vector<double>& vals) {
    char buf[40];
    for (double v : vals) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf << "\n";
    }
}

std::vector<std::string> significant_lines(std::ifstream& in) {
    std::vector<std::string> toks;
    std::string line;
    while (std::getline(in, line)) {
        std::string s = line.substr(0, line.find('#'));
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) continue;
        const auto e = s.find_last_not_of(" \t\r\n");
        toks.push_back(s.substr(b, e - b + 1));
    }
    return toks;
}

double to_real(const std::string& tok) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw std::invalid_argument("bad tap value: '" + tok + "'");
    return v;
}

int to_int(const std::string& tok) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw std::invalid_argument("bad integer: '" + tok + "'");
    return v;
}

}  // namespace

void save_ffe(const std::string& path, const FfeTaps& taps) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write tap file: " + path);
    out << taps.cursor << "\n";
    write_reals(out, taps.taps);
}

FfeTaps load_ffe(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tap file: " + path);
    const auto toks = significant_lines(in);
    if (toks.size() < 2) throw std::invalid_argument(path + ": truncated tap file");
    FfeTaps t;
    t.cursor = to_int(toks[0]);
    for (std::size_t i = 1; i < toks.size(); ++i) t.taps.push_back(to_real(toks[i]));
    if (t.cursor < 0 || t.cursor >= static_cast<int>(t.taps.size()))
        throw std::invalid_argument(path + ": cursor out of range");
    return t;
}

void save_dfe(const std::string& path, const DfeConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write tap file: " + path);
    out << cfg.ff.cursor << "\n" << cfg.fb.size() << "\n";
    write_reals(out, cfg.ff.taps);
    write_reals(out, cfg.fb);
}

DfeConfig load_dfe(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open tap file: " + path);
    const auto toks = significant_lines(in);
    if (toks.size() < 3) throw std::invalid_argument(path + ": truncated tap file");
    DfeConfig cfg;
    cfg.ff.cursor = to_int(toks[0]);
    const int n_fb = to_int(toks[1]);
    if (n_fb < 0 || toks.size() < 2 + static_cast<std::size_t>(n_fb) + 1)
        throw std::invalid_argument(path + ": inconsistent feedback count");
    const std::size_t n_ff = toks.size() - 2 - static_cast<std::size_t>(n_fb);
    for (std::size_t i = 0; i < n_ff; ++i) cfg.ff.taps.push_back(to_real(toks[2 + i]));
    for (std::size_t i = 0; i < static_cast<std::size_t>(n_fb); ++i)
        cfg.fb.push_back(to_real(toks[2 + n_ff + i]));
    if (cfg.ff.cursor < 0 || cfg.ff.cursor >= static_cast<int>(cfg.ff.taps.size()))
        throw std::invalid_argument(path + ": cursor out of range");
    return cfg;
}

}  // namespace neq
