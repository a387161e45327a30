#pragma once

#include "intrafair/types.hpp"

#include <span>
#include <string>
#include <string_view>

namespace intrafair {

enum class BiasMeasure { spd, eod };

std::string_view to_string(BiasMeasure m) noexcept;
BiasMeasure parse_bias_measure(std::string_view name);

/// Which parity measure is targeted; selects the hard metric and its
/// differentiable proxy together.
struct BiasSpec {
    BiasMeasure measure = BiasMeasure::spd;

    /// Hard bias of predictions: spd(yhat, a) or eod(yhat, y, a).
    double bias(std::span<const int> yhat, std::span<const int> y, std::span<const int> a) const;
    /// Differentiable proxy of raw scores.
    double proxy(std::span<const double> scores, std::span<const int> y, std::span<const int> a) const;
    /// True iff the groups required by the measure are all non-empty.
    bool well_defined(std::span<const int> y, std::span<const int> a) const noexcept;
};

struct GroupCounts {
    long n = 0;  // total
    long k = 0;  // sum a_i
    long m = 0;  // sum y_i
    long r = 0;  // sum a_i y_i
};

GroupCounts count_groups(std::span<const int> y, std::span<const int> a);

BinaryVector hard_predictions(std::span<const double> scores, double threshold);

inline std::span<const double> as_span(const Vector& v) noexcept {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

// Hard metrics. Empty groups raise DegenerateGroupError naming the group.
double spd(std::span<const int> yhat, std::span<const int> a);
double eod(std::span<const int> yhat, std::span<const int> y, std::span<const int> a);
double balanced_accuracy(std::span<const int> yhat, std::span<const int> y);

// Differentiable proxies: group-mean score differences (a=0 minus a=1).
double proxy_spd(std::span<const double> scores, std::span<const int> a);
double proxy_eod(std::span<const double> scores, std::span<const int> y, std::span<const int> a);

/// Per-sample coefficients w with proxy(scores) == sum_i w_i * scores_i.
/// Both proxies are linear in the scores, so w is also d proxy / d score_i.
Vector proxy_weights(BiasMeasure measure, std::span<const int> y, std::span<const int> a);

/// Empirical covariance (1/N) sum f_i a_i - (K/N^2) sum f_i.
double cov_hat(std::span<const int> a, std::span<const double> scores);
/// Conditional covariance given y=1: (1/M) sum f a y - (R/M^2) sum f y.
double cov_hat_conditional(std::span<const int> a, std::span<const double> scores, std::span<const int> y);

/// Result of checking that the negated proxy and the empirical covariance
/// differ only by a positive constant factor.
struct LemmaReport {
    double lhs = 0.0;       // -proxy scaled back onto the covariance
    double rhs = 0.0;       // covariance estimate
    double factor = 0.0;    // N^2/(K(N-K)) or M^2/(R(M-R))
    double residual = 0.0;  // |lhs - rhs|
    bool pass = false;
};

inline constexpr double kLemmaTolerance = 1e-10;

LemmaReport verify_lemma1(std::span<const int> a, std::span<const double> scores);
LemmaReport verify_lemma2(std::span<const int> a, std::span<const double> scores, std::span<const int> y);

}  // namespace intrafair
