#include "intrafair/metrics.hpp"

#include "intrafair/errors.hpp"

#include <cmath>

namespace intrafair {

namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw PreconditionError(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                                std::to_string(b) + ")");
}

}  // namespace

std::string_view to_string(BiasMeasure m) noexcept { return m == BiasMeasure::spd ? "spd" : "eod"; }

BiasMeasure parse_bias_measure(std::string_view name) {
    if (name == "spd" || name == "SPD") return BiasMeasure::spd;
    if (name == "eod" || name == "EOD") return BiasMeasure::eod;
    throw ConfigError("unknown bias measure '" + std::string(name) + "' (expected spd or eod)");
}

double BiasSpec::bias(std::span<const int> yhat, std::span<const int> y, std::span<const int> a) const {
    return measure == BiasMeasure::spd ? spd(yhat, a) : eod(yhat, y, a);
}

double BiasSpec::proxy(std::span<const double> scores, std::span<const int> y, std::span<const int> a) const {
    return measure == BiasMeasure::spd ? proxy_spd(scores, a) : proxy_eod(scores, y, a);
}

bool BiasSpec::well_defined(std::span<const int> y, std::span<const int> a) const noexcept {
    const auto c = count_groups(y, a);
    if (measure == BiasMeasure::spd) return c.k > 0 && c.k < c.n;
    return c.r > 0 && c.r < c.m;
}

GroupCounts count_groups(std::span<const int> y, std::span<const int> a) {
    require_same_size(y.size(), a.size(), "count_groups");
    GroupCounts c;
    c.n = static_cast<long>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        c.k += a[i];
        c.m += y[i];
        c.r += a[i] * y[i];
    }
    return c;
}

BinaryVector hard_predictions(std::span<const double> scores, double threshold) {
    BinaryVector out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
    return out;
}

double spd(std::span<const int> yhat, std::span<const int> a) {
    require_same_size(yhat.size(), a.size(), "spd");
    long n0 = 0, n1 = 0, pos0 = 0, pos1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]) {
            ++n1;
            pos1 += yhat[i];
        } else {
            ++n0;
            pos0 += yhat[i];
        }
    }
    if (n0 == 0) throw DegenerateGroupError("spd: protected group a=0 is empty");
    if (n1 == 0) throw DegenerateGroupError("spd: protected group a=1 is empty");
    return static_cast<double>(pos0) / static_cast<double>(n0) - static_cast<double>(pos1) / static_cast<double>(n1);
}

double eod(std::span<const int> yhat, std::span<const int> y, std::span<const int> a) {
    require_same_size(yhat.size(), a.size(), "eod");
    require_same_size(y.size(), a.size(), "eod");
    long p0 = 0, p1 = 0, tp0 = 0, tp1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!y[i]) continue;
        if (a[i]) {
            ++p1;
            tp1 += yhat[i];
        } else {
            ++p0;
            tp0 += yhat[i];
        }
    }
    if (p0 == 0) throw DegenerateGroupError("eod: empty positive group (no y=1 rows with a=0)");
    if (p1 == 0) throw DegenerateGroupError("eod: empty positive group (no y=1 rows with a=1)");
    return static_cast<double>(tp0) / static_cast<double>(p0) - static_cast<double>(tp1) / static_cast<double>(p1);
}

double balanced_accuracy(std::span<const int> yhat, std::span<const int> y) {
    require_same_size(yhat.size(), y.size(), "balanced_accuracy");
    long pos = 0, neg = 0, tp = 0, tn = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i]) {
            ++pos;
            tp += yhat[i];
        } else {
            ++neg;
            tn += 1 - yhat[i];
        }
    }
    if (pos == 0 || neg == 0) throw DegenerateGroupError("balanced_accuracy: degenerate labels (single class)");
    return 0.5 * (static_cast<double>(tp) / static_cast<double>(pos) + static_cast<double>(tn) / static_cast<double>(neg));
}

double proxy_spd(std::span<const double> scores, std::span<const int> a) {
    require_same_size(scores.size(), a.size(), "proxy_spd");
    double s0 = 0.0, s1 = 0.0;
    long n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]) {
            s1 += scores[i];
            ++n1;
        } else {
            s0 += scores[i];
            ++n0;
        }
    }
    if (n0 == 0) throw DegenerateGroupError("proxy_spd: protected group a=0 is empty");
    if (n1 == 0) throw DegenerateGroupError("proxy_spd: protected group a=1 is empty");
    return s0 / static_cast<double>(n0) - s1 / static_cast<double>(n1);
}

double proxy_eod(std::span<const double> scores, std::span<const int> y, std::span<const int> a) {
    require_same_size(scores.size(), a.size(), "proxy_eod");
    require_same_size(y.size(), a.size(), "proxy_eod");
    double s0 = 0.0, s1 = 0.0;
    long n0 = 0, n1 = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!y[i]) continue;
        if (a[i]) {
            s1 += scores[i];
            ++n1;
        } else {
            s0 += scores[i];
            ++n0;
        }
    }
    if (n0 == 0 || n1 == 0) throw DegenerateGroupError("proxy_eod: empty positive group");
    return s0 / static_cast<double>(n0) - s1 / static_cast<double>(n1);
}

Vector proxy_weights(BiasMeasure measure, std::span<const int> y, std::span<const int> a) {
    require_same_size(y.size(), a.size(), "proxy_weights");
    const auto c = count_groups(y, a);
    const bool spd_measure = measure == BiasMeasure::spd;
    const long n1 = spd_measure ? c.k : c.r;
    const long n0 = spd_measure ? c.n - c.k : c.m - c.r;
    if (n0 == 0 || n1 == 0)
        throw DegenerateGroupError(spd_measure ? "proxy_spd: empty protected group" : "proxy_eod: empty positive group");
    Vector w(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool in_scope = spd_measure || y[i] == 1;
        double wi = 0.0;
        if (in_scope) wi = a[i] ? -1.0 / static_cast<double>(n1) : 1.0 / static_cast<double>(n0);
        w[static_cast<Eigen::Index>(i)] = wi;
    }
    return w;
}

double cov_hat(std::span<const int> a, std::span<const double> scores) {
    require_same_size(scores.size(), a.size(), "cov_hat");
    if (a.empty()) throw PreconditionError("cov_hat: empty input");
    const double n = static_cast<double>(a.size());
    double sum_fa = 0.0, sum_f = 0.0, k = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sum_fa += scores[i] * a[i];
        sum_f += scores[i];
        k += a[i];
    }
    return sum_fa / n - k / (n * n) * sum_f;
}

double cov_hat_conditional(std::span<const int> a, std::span<const double> scores, std::span<const int> y) {
    require_same_size(scores.size(), a.size(), "cov_hat_conditional");
    require_same_size(y.size(), a.size(), "cov_hat_conditional");
    double m = 0.0, r = 0.0, sum_fay = 0.0, sum_fy = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!y[i]) continue;
        m += 1.0;
        r += a[i];
        sum_fay += scores[i] * a[i];
        sum_fy += scores[i];
    }
    if (m == 0.0) throw DegenerateGroupError("cov_hat_conditional: no positive rows");
    return sum_fay / m - r / (m * m) * sum_fy;
}

LemmaReport verify_lemma1(std::span<const int> a, std::span<const double> scores) {
    const auto c = count_groups(a, a);
    if (c.k == 0 || c.k == c.n) throw DegenerateGroupError("verify_lemma1: both protected groups must be non-empty");
    const double n = static_cast<double>(c.n), k = static_cast<double>(c.k);
    LemmaReport rep;
    rep.factor = n * n / (k * (n - k));
    rep.lhs = -proxy_spd(scores, a) / rep.factor;
    rep.rhs = cov_hat(a, scores);
    rep.residual = std::abs(rep.lhs - rep.rhs);
    rep.pass = rep.residual <= kLemmaTolerance;
    return rep;
}

LemmaReport verify_lemma2(std::span<const int> a, std::span<const double> scores, std::span<const int> y) {
    const auto c = count_groups(y, a);
    if (c.r == 0 || c.r == c.m)
        throw DegenerateGroupError("verify_lemma2: positive rows must contain both protected groups");
    const double m = static_cast<double>(c.m), r = static_cast<double>(c.r);
    LemmaReport rep;
    rep.factor = m * m / (r * (m - r));
    rep.lhs = -proxy_eod(scores, y, a) / rep.factor;
    rep.rhs = cov_hat_conditional(a, scores, y);
    rep.residual = std::abs(rep.lhs - rep.rhs);
    rep.pass = rep.residual <= kLemmaTolerance;
    return rep;
}

}  // namespace intrafair
