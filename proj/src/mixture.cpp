#include "gcl/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gcl {

namespace {

constexpr double kShapeMin = 0.1;
constexpr double kShapeMax = 100.0;
constexpr double kVarFloor = 1e-6;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double clamp_unit(double v) {
    return std::min(1.0 - kSimClampEps, std::max(kSimClampEps, v));
}

double normal_log_pdf(double x, double mu, double sigma2) {
    const double d = x - mu;
    return -0.5 * (std::log(2.0 * M_PI * sigma2) + d * d / sigma2);
}

// Beta shapes from a mean/variance pair, clamped to the legal box.
std::pair<double, double> beta_moments(double mean, double var, bool* clamped) {
    if (var < kVarFloor) {
        var = kVarFloor;
        if (clamped) *clamped = true;
    }
    double a = mean * (mean * (1.0 - mean) / var - 1.0);
    double b = a * (1.0 - mean) / mean;
    auto box = [&](double v) {
        if (v < kShapeMin || v > kShapeMax || !std::isfinite(v)) {
            if (clamped) *clamped = true;
            return std::min(kShapeMax, std::max(kShapeMin, std::isfinite(v) ? v : kShapeMin));
        }
        return v;
    };
    return {box(a), box(b)};
}

struct SideMoments {
    double mean = 0.5;
    double var = 0.1;
    bool usable = false;
};

SideMoments side_moments(const double* begin, const double* end) {
    SideMoments m;
    const auto count = static_cast<std::size_t>(end - begin);
    if (count < 2) return m;
    double sum = 0.0;
    for (const double* p = begin; p != end; ++p) sum += *p;
    m.mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (const double* p = begin; p != end; ++p) sq += (*p - m.mean) * (*p - m.mean);
    m.var = sq / static_cast<double>(count);
    m.usable = true;
    return m;
}

}  // namespace

SimilaritySample normalize_minmax(const std::vector<double>& raw) {
    if (raw.size() < 2)
        throw std::invalid_argument("normalize_minmax: need at least 2 values");
    const auto [mn_it, mx_it] = std::minmax_element(raw.begin(), raw.end());
    const double mn = *mn_it, mx = *mx_it;
    if (!(mx > mn))
        throw std::invalid_argument("normalize_minmax: degenerate range (all values equal)");
    SimilaritySample s;
    s.norm_min = mn;
    s.norm_max = mx;
    s.values.reserve(raw.size());
    for (double v : raw) s.values.push_back(clamp_unit((v - mn) / (mx - mn)));
    return s;
}

SimilaritySample sample_from_unit_values(const std::vector<double>& raw01) {
    SimilaritySample s;
    s.norm_min = 0.0;
    s.norm_max = 1.0;
    s.values.reserve(raw01.size());
    for (double v : raw01) s.values.push_back(clamp_unit(v));
    return s;
}

double apply_minmax(double raw, double norm_min, double norm_max,
                    long* out_of_range_count) {
    const double t = (raw - norm_min) / (norm_max - norm_min);
    if ((t < 0.0 || t > 1.0) && out_of_range_count) ++(*out_of_range_count);
    return clamp_unit(t);
}

double beta_log_pdf(double s, double alpha, double beta) {
    if (!(s > 0.0 && s < 1.0))
        throw std::invalid_argument("beta_log_pdf: s must be in (0,1)");
    if (!(alpha > 0.0 && beta > 0.0))
        throw std::invalid_argument("beta_log_pdf: shape parameters must be positive");
    return std::lgamma(alpha + beta) - std::lgamma(alpha) - std::lgamma(beta) +
           (alpha - 1.0) * std::log(s) + (beta - 1.0) * std::log1p(-s);
}

double beta_pdf(double s, double alpha, double beta) {
    return std::exp(beta_log_pdf(s, alpha, beta));
}

double BmmParams::log_pdf(double s) const {
    double l0 = lambda[0] > 0.0 ? std::log(lambda[0]) + beta_log_pdf(s, alpha[0], beta[0]) : kNegInf;
    double l1 = lambda[1] > 0.0 ? std::log(lambda[1]) + beta_log_pdf(s, alpha[1], beta[1]) : kNegInf;
    const double m = std::max(l0, l1);
    if (m == kNegInf) return kNegInf;
    return m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
}

double GmmParams::log_pdf(double s) const {
    double l0 = lambda[0] > 0.0 ? std::log(lambda[0]) + normal_log_pdf(s, mu[0], sigma2[0]) : kNegInf;
    double l1 = lambda[1] > 0.0 ? std::log(lambda[1]) + normal_log_pdf(s, mu[1], sigma2[1]) : kNegInf;
    const double m = std::max(l0, l1);
    if (m == kNegInf) return kNegInf;
    return m + std::log(std::exp(l0 - m) + std::exp(l1 - m));
}

namespace {

// Shared EM skeleton for both mixture families. Model must expose
// log_component(c, s), update_from_moments(c, mean, var, &clamped) and copy.
template <typename Params, typename LogComp, typename Update>
void run_em(Params& params, const std::vector<double>& xs, int iters,
            const EmOptions& opt, LogComp log_component, Update update) {
    const auto m_count = xs.size();
    std::vector<double> resp0(m_count);
    double prev_ll = kNegInf;
    for (int it = 0; it < iters; ++it) {
        const Params snapshot = params;
        // E-step
        double resp_sum0 = 0.0, resp_sum1 = 0.0;
        for (std::size_t i = 0; i < m_count; ++i) {
            const double l0 = params.lambda[0] > 0.0
                                  ? std::log(params.lambda[0]) + log_component(params, 0, xs[i])
                                  : kNegInf;
            const double l1 = params.lambda[1] > 0.0
                                  ? std::log(params.lambda[1]) + log_component(params, 1, xs[i])
                                  : kNegInf;
            const double mx = std::max(l0, l1);
            const double e0 = std::exp(l0 - mx), e1 = std::exp(l1 - mx);
            resp0[i] = e0 / (e0 + e1);
            resp_sum0 += resp0[i];
            resp_sum1 += 1.0 - resp0[i];
        }
        bool clamped = false;
        // weighted moments + M-step per component
        for (int c = 0; c < 2; ++c) {
            const double denom = c == 0 ? resp_sum0 : resp_sum1;
            if (denom <= 1e-12 * static_cast<double>(m_count)) {
                clamped = true;  // all responsibilities vanished for c
                continue;        // keep previous component parameters
            }
            double sbar = 0.0;
            for (std::size_t i = 0; i < m_count; ++i)
                sbar += (c == 0 ? resp0[i] : 1.0 - resp0[i]) * xs[i];
            sbar /= denom;
            double v2 = 0.0;
            for (std::size_t i = 0; i < m_count; ++i) {
                const double d = xs[i] - sbar;
                v2 += (c == 0 ? resp0[i] : 1.0 - resp0[i]) * d * d;
            }
            v2 /= denom;
            update(params, c, sbar, v2, &clamped);
        }
        params.lambda[0] = resp_sum0 / static_cast<double>(m_count);
        params.lambda[1] = resp_sum1 / static_cast<double>(m_count);
        if (clamped) params.diag.degenerate = true;

        double ll = 0.0;
        for (double x : xs) ll += params.log_pdf(x);
        if (it > 0 && ll < prev_ll - 1e-9) {
            // moment-matching M-step is not guaranteed monotone; roll back
            params = snapshot;
            params.diag.degenerate = true;
            break;
        }
        params.loglik_trace.push_back(ll);
        if (it > 0 && ll - prev_ll < opt.min_improve) break;
        prev_ll = ll;
    }
}

template <typename Params>
void check_fit_inputs(const SimilaritySample& sample, double w_init, int iters) {
    if (sample.values.size() < 4)
        throw std::invalid_argument("em_fit: need at least 4 similarities (2 per component)");
    if (!(w_init > 0.0 && w_init < 1.0))
        throw std::invalid_argument("em_fit: w_init must be in (0,1)");
    if (iters < 1) throw std::invalid_argument("em_fit: iters must be >= 1");
}

}  // namespace

BmmParams em_fit_bmm(const SimilaritySample& sample, double w_init, int iters,
                     const EmOptions& opt) {
    check_fit_inputs<BmmParams>(sample, w_init, iters);
    BmmParams params;
    params.norm_min = sample.norm_min;
    params.norm_max = sample.norm_max;

    // init: split at the (1 - w_init) quantile; low side = candidate true
    // negatives, high side = candidate false negatives with weight w_init
    std::vector<double> sorted = sample.values;
    std::sort(sorted.begin(), sorted.end());
    const auto split = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(sorted.size() - 1),
                         std::floor((1.0 - w_init) * static_cast<double>(sorted.size()))));
    const SideMoments low = side_moments(sorted.data(), sorted.data() + split);
    const SideMoments high = side_moments(sorted.data() + split, sorted.data() + sorted.size());
    bool clamped = false;
    if (low.usable) {
        auto [a, b] = beta_moments(low.mean, low.var, &clamped);
        params.alpha[0] = a;
        params.beta[0] = b;
    } else {
        clamped = true;  // too few points below the quantile; keep uniform init
    }
    if (high.usable) {
        auto [a, b] = beta_moments(high.mean, high.var, &clamped);
        params.alpha[1] = a;
        params.beta[1] = b;
    } else {
        clamped = true;
    }
    params.lambda = {1.0 - w_init, w_init};
    params.diag.degenerate = clamped;

    run_em(
        params, sample.values, iters, opt,
        [](const BmmParams& p, int c, double x) { return beta_log_pdf(x, p.alpha[c], p.beta[c]); },
        [](BmmParams& p, int c, double mean, double var, bool* cl) {
            auto [a, b] = beta_moments(mean, var, cl);
            p.alpha[c] = a;
            p.beta[c] = b;
        });
    identify_true_component(params);
    return params;
}

GmmParams em_fit_gmm(const SimilaritySample& sample, double w_init, int iters,
                     const EmOptions& opt) {
    check_fit_inputs<GmmParams>(sample, w_init, iters);
    GmmParams params;
    params.norm_min = sample.norm_min;
    params.norm_max = sample.norm_max;

    std::vector<double> sorted = sample.values;
    std::sort(sorted.begin(), sorted.end());
    const auto split = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(sorted.size() - 1),
                         std::floor((1.0 - w_init) * static_cast<double>(sorted.size()))));
    const SideMoments low = side_moments(sorted.data(), sorted.data() + split);
    const SideMoments high = side_moments(sorted.data() + split, sorted.data() + sorted.size());
    bool clamped = false;
    if (low.usable) {
        params.mu[0] = low.mean;
        params.sigma2[0] = std::max(low.var, kVarFloor);
        if (low.var < kVarFloor) clamped = true;
    } else {
        clamped = true;
    }
    if (high.usable) {
        params.mu[1] = high.mean;
        params.sigma2[1] = std::max(high.var, kVarFloor);
        if (high.var < kVarFloor) clamped = true;
    } else {
        clamped = true;
    }
    params.lambda = {1.0 - w_init, w_init};
    params.diag.degenerate = clamped;

    run_em(
        params, sample.values, iters, opt,
        [](const GmmParams& p, int c, double x) { return normal_log_pdf(x, p.mu[c], p.sigma2[c]); },
        [](GmmParams& p, int c, double mean, double var, bool* cl) {
            if (var < kVarFloor) {
                var = kVarFloor;
                *cl = true;
            }
            p.mu[c] = mean;
            p.sigma2[c] = var;
        });
    identify_true_component(params);
    return params;
}

namespace {

template <typename Params>
void identify_impl(Params& params) {
    const double m0 = params.component_mean(0);
    const double m1 = params.component_mean(1);
    const int lambda_verdict = params.lambda[0] >= params.lambda[1] ? 0 : 1;
    int mean_verdict;
    if (std::abs(m0 - m1) <= 1e-6)
        mean_verdict = lambda_verdict;  // tie-break on the larger weight
    else
        mean_verdict = m0 < m1 ? 0 : 1;
    params.diag.mean_rule_verdict = mean_verdict;
    params.diag.lambda_rule_verdict = lambda_verdict;
    params.diag.rule_disagreement = mean_verdict != lambda_verdict;
    params.true_component = mean_verdict;
}

template <typename Params, typename LogComp>
double posterior_impl(const Params& params, double s, LogComp log_component) {
    const int t = params.true_component;
    const int f = 1 - t;
    const double lt = params.lambda[t] > 0.0
                          ? std::log(params.lambda[t]) + log_component(params, t, s)
                          : kNegInf;
    const double lf = params.lambda[f] > 0.0
                          ? std::log(params.lambda[f]) + log_component(params, f, s)
                          : kNegInf;
    if (lt == kNegInf && lf == kNegInf) return 0.5;
    const double m = std::max(lt, lf);
    const double et = std::exp(lt - m), ef = std::exp(lf - m);
    return et / (et + ef);
}

}  // namespace

void identify_true_component(BmmParams& params) { identify_impl(params); }
void identify_true_component(GmmParams& params) { identify_impl(params); }

double posterior_true(const BmmParams& params, double s) {
    return posterior_impl(params, s, [](const BmmParams& p, int c, double x) {
        return beta_log_pdf(x, p.alpha[c], p.beta[c]);
    });
}

double posterior_true(const GmmParams& params, double s) {
    return posterior_impl(params, s, [](const GmmParams& p, int c, double x) {
        return normal_log_pdf(x, p.mu[c], p.sigma2[c]);
    });
}

double posterior_true_raw(const BmmParams& params, double raw, long* out_of_range_count) {
    return posterior_true(params,
                          apply_minmax(raw, params.norm_min, params.norm_max, out_of_range_count));
}

}  // namespace gcl
