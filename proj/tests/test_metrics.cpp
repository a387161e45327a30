#include "doctest.h"

#include "intrafair/errors.hpp"
#include "intrafair/metrics.hpp"

#include <random>

using namespace intrafair;

namespace {

// Counting oracles.
double rate(const std::vector<int>& yhat, const std::vector<int>& keep) {
    double hit = 0, n = 0;
    for (std::size_t i = 0; i < yhat.size(); ++i)
        if (keep[i]) {
            n += 1;
            hit += yhat[i];
        }
    return hit / n;
}

std::vector<int> where(const std::vector<int>& a, int v, const std::vector<int>* y = nullptr) {
    std::vector<int> m(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) m[i] = a[i] == v && (!y || (*y)[i] == 1);
    return m;
}

double two_pass_cov(const std::vector<double>& a, const std::vector<double>& s) {
    double ma = 0, ms = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        ms += s[i];
    }
    ma /= a.size();
    ms /= s.size();
    double c = 0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma) * (s[i] - ms);
    return c / a.size();
}

struct Instance {
    std::vector<int> y, a, yhat;
    std::vector<double> s;
};

Instance random_instance(std::mt19937_64& rng, int n) {
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Instance in;
    for (int i = 0; i < n; ++i) {
        in.y.push_back(coin(rng));
        in.a.push_back(coin(rng));
        in.yhat.push_back(coin(rng));
        in.s.push_back(u(rng));
    }
    // make every group non-empty
    in.a[0] = 0, in.y[0] = 1;
    in.a[1] = 1, in.y[1] = 1;
    in.y[2] = 0;
    return in;
}

}  // namespace

TEST_CASE("spd examples") {
    CHECK(spd(std::vector<int>{1, 0, 1, 0}, std::vector<int>{0, 0, 1, 1}) == 0.0);
    CHECK(spd(std::vector<int>{1, 1, 0, 0}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK_THROWS_WITH_AS(spd(std::vector<int>{1, 0}, std::vector<int>{1, 1}), doctest::Contains("a=0"),
                         DegenerateGroupError);
}

TEST_CASE("eod and balanced accuracy examples") {
    CHECK(eod(std::vector<int>{1, 1, 0, 0}, std::vector<int>{1, 1, 1, 1}, std::vector<int>{0, 1, 0, 1}) == 0.0);
    std::vector<int> y{1, 0, 1, 1, 0, 1}, a{0, 0, 1, 1, 1, 0};
    CHECK(eod(y, y, a) == 0.0);
    CHECK_THROWS_AS(eod(std::vector<int>{1, 0}, std::vector<int>{0, 0}, std::vector<int>{0, 1}),
                    DegenerateGroupError);
    CHECK(balanced_accuracy(y, y) == 1.0);
    std::vector<int> flipped;
    for (int v : y) flipped.push_back(1 - v);
    CHECK(balanced_accuracy(flipped, y) == 0.0);
    CHECK(balanced_accuracy(std::vector<int>(6, 1), y) == 0.5);
    CHECK_THROWS_AS(balanced_accuracy(std::vector<int>{1, 0}, std::vector<int>{1, 1}), DegenerateGroupError);
}

TEST_CASE("metrics equal counting oracles and flip sign with the attribute") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        Instance in = random_instance(rng, 200);
        const double want_spd = rate(in.yhat, where(in.a, 0)) - rate(in.yhat, where(in.a, 1));
        const double want_eod = rate(in.yhat, where(in.a, 0, &in.y)) - rate(in.yhat, where(in.a, 1, &in.y));
        CHECK(spd(in.yhat, in.a) == doctest::Approx(want_spd).epsilon(1e-15));
        CHECK(eod(in.yhat, in.y, in.a) == doctest::Approx(want_eod).epsilon(1e-15));
        std::vector<int> na;
        for (int v : in.a) na.push_back(1 - v);
        CHECK(spd(in.yhat, na) == doctest::Approx(-spd(in.yhat, in.a)));
        CHECK(eod(in.yhat, in.y, na) == doctest::Approx(-eod(in.yhat, in.y, in.a)));
        CHECK(proxy_spd(in.s, na) == doctest::Approx(-proxy_spd(in.s, in.a)));
        CHECK(proxy_eod(in.s, in.y, na) == doctest::Approx(-proxy_eod(in.s, in.y, in.a)));
        CHECK(std::abs(proxy_spd(in.s, in.a)) <= 1.0);
    }
}

TEST_CASE("proxy examples") {
    std::vector<int> a{0, 1, 0, 1, 1};
    CHECK(proxy_spd(std::vector<double>(5, 0.3), a) == doctest::Approx(0.0));
    CHECK(proxy_spd(std::vector<double>{0.8, 0.2}, std::vector<int>{0, 1}) == doctest::Approx(0.6));
    std::vector<int> hard{1, 0, 0, 1, 1};
    std::vector<double> hard_s(hard.begin(), hard.end());
    CHECK(proxy_spd(hard_s, a) == doctest::Approx(spd(hard, a)));
    std::vector<double> s{0.1, 0.5, 0.7, 0.2, 0.9};
    CHECK(proxy_eod(s, std::vector<int>(5, 1), a) == proxy_spd(s, a));
    CHECK(proxy_eod(std::vector<double>(5, 0.4), std::vector<int>{1, 1, 0, 1, 0}, a) == doctest::Approx(0.0));
    CHECK_THROWS_WITH_AS(proxy_eod(s, std::vector<int>(5, 0), a), doctest::Contains("empty positive group"),
                         DegenerateGroupError);
}

TEST_CASE("covariance estimates") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Instance in = random_instance(rng, 150);
        std::vector<double> ad(in.a.begin(), in.a.end());
        CHECK(cov_hat(in.a, in.s) == doctest::Approx(two_pass_cov(ad, in.s)).epsilon(1e-12));
        std::vector<double> fa, fs;
        for (std::size_t i = 0; i < in.y.size(); ++i)
            if (in.y[i]) {
                fa.push_back(in.a[i]);
                fs.push_back(in.s[i]);
            }
        CHECK(cov_hat_conditional(in.a, in.s, in.y) == doctest::Approx(two_pass_cov(fa, fs)).epsilon(1e-12));
        CHECK(cov_hat_conditional(in.a, in.s, std::vector<int>(150, 1)) == doctest::Approx(cov_hat(in.a, in.s)));
    }
    CHECK(cov_hat(std::vector<int>(4, 1), std::vector<double>{0.1, 0.4, 0.3, 0.9}) == doctest::Approx(0.0));
    CHECK(cov_hat(std::vector<int>{0, 1, 0, 1}, std::vector<double>(4, 0.7)) == doctest::Approx(0.0));
    CHECK_THROWS(cov_hat_conditional(std::vector<int>{0, 1}, std::vector<double>{0.1, 0.2}, std::vector<int>{0, 0}));
}

TEST_CASE("lemma checks") {
    std::mt19937_64 rng(11);
    Instance in = random_instance(rng, 300);
    auto r1 = verify_lemma1(in.a, in.s);
    auto r2 = verify_lemma2(in.a, in.s, in.y);
    CHECK(r1.pass);
    CHECK(r2.pass);
    CHECK(r1.residual <= kLemmaTolerance);
    auto c = verify_lemma1(in.a, std::vector<double>(300, 0.25));
    CHECK(c.pass);
    CHECK(c.lhs == doctest::Approx(0.0));
    CHECK(c.rhs == doctest::Approx(0.0));
    auto same = verify_lemma2(in.a, in.s, std::vector<int>(300, 1));
    CHECK(same.lhs == doctest::Approx(r1.lhs));
    CHECK_THROWS_AS(verify_lemma1(std::vector<int>(300, 0), in.s), DegenerateGroupError);
    std::vector<int> y_one_group(300, 0);
    for (int i = 0; i < 300; ++i) y_one_group[i] = in.a[i] == 1;
    CHECK_THROWS_AS(verify_lemma2(in.a, in.s, y_one_group), DegenerateGroupError);
}
