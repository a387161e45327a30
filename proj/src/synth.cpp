#include "intrafair/synth.hpp"

#include "intrafair/errors.hpp"
#include "intrafair/rng.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace intrafair {

void LohConfig::validate() const {
    if (n < 1) throw PreconditionError("gen_loh: n must be >= 1");
    if (!(alpha >= 0.0)) throw PreconditionError("gen_loh: alpha must be >= 0");
}

Dataset gen_loh(const LohConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    std::normal_distribution<double> normal;
    std::exponential_distribution<double> expo(1.0);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> category(0, 9);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    Eigen::Matrix4d block_corr = Eigen::Matrix4d::Constant(0.5);
    block_corr.diagonal().setOnes();
    const Eigen::Matrix4d block_chol = block_corr.llt().matrixL();
    const double rho23 = 0.5;

    const auto n = static_cast<Eigen::Index>(cfg.n);
    const Eigen::Index cat_width = cfg.one_hot_category ? 10 : 1;
    const Eigen::Index d = 9 + cat_width + (cfg.protected_as_feature ? 1 : 0);
    Dataset data;
    data.features.resize(n, d);
    data.labels.resize(cfg.n);
    data.protected_attr.resize(cfg.n);
    for (int j = 1; j <= 10; ++j) {
        if (j == 6 && cfg.one_hot_category) {
            for (int c = 0; c < 10; ++c) data.feature_names.push_back("x6=" + std::to_string(c));
        } else {
            data.feature_names.push_back("x" + std::to_string(j));
        }
    }
    if (cfg.protected_as_feature) data.feature_names.push_back("a");

    data.features.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double x1 = normal(rng);
        const double z2 = normal(rng), z3 = normal(rng);
        const double x2 = z2;
        const double x3 = rho23 * z2 + std::sqrt(1.0 - rho23 * rho23) * z3;
        const double x4 = expo(rng);
        const double x5 = coin(rng) ? 1.0 : 0.0;
        const int x6 = category(rng);
        Eigen::Vector4d z;
        for (int k = 0; k < 4; ++k) z[k] = normal(rng);
        const Eigen::Vector4d block = block_chol * z;
        const int a = coin(rng) ? 1 : 0;
        const double logit = 0.5 * (x1 + x2 - x5) + 2.0 * cfg.alpha * a * (x6 % 2 == 1 ? 1.0 : 0.0);
        const double p = 1.0 / (1.0 + std::exp(-logit));
        const int y = unif(rng) < p ? 1 : 0;

        auto row = data.features.row(i);
        row(0) = x1;
        row(1) = x2;
        row(2) = x3;
        row(3) = x4;
        row(4) = x5;
        if (cfg.one_hot_category) row(5 + x6) = 1.0;
        else row(5) = static_cast<double>(x6);
        for (int k = 0; k < 4; ++k) row(5 + cat_width + k) = block[k];
        if (cfg.protected_as_feature) row(d - 1) = a;
        data.labels[static_cast<std::size_t>(i)] = y;
        data.protected_attr[static_cast<std::size_t>(i)] = a;
    }
    return data;
}

// ---------------------------------------------------------------------------

namespace {

struct Gaussian2 {
    Eigen::Vector2d mean;
    Eigen::Matrix2d cov;
};

const Gaussian2& class_gaussian(int y) {
    static const Gaussian2 neg{Eigen::Vector2d(-2.0, -2.0), (Eigen::Matrix2d() << 10.0, 1.0, 1.0, 3.0).finished()};
    static const Gaussian2 pos{Eigen::Vector2d(2.0, 2.0), (Eigen::Matrix2d() << 5.0, 1.0, 1.0, 5.0).finished()};
    return y ? pos : neg;
}

double log_density(const Gaussian2& g, const Eigen::Vector2d& x) {
    const Eigen::Vector2d d = x - g.mean;
    return -0.5 * d.dot(g.cov.inverse() * d) - 0.5 * std::log(g.cov.determinant()) - std::log(2.0 * std::numbers::pi);
}

}  // namespace

void ZafarConfig::validate() const {
    if (n < 1) throw PreconditionError("gen_zafar: n must be >= 1");
    if (embed_hidden < 1 || embed_out < 1) throw PreconditionError("gen_zafar: embedding sizes must be >= 1");
    if (!std::isfinite(theta)) throw PreconditionError("gen_zafar: theta must be finite");
}

double zafar_protected_probability(const Eigen::Vector2d& rotated) {
    const double l1 = log_density(class_gaussian(1), rotated);
    const double l0 = log_density(class_gaussian(0), rotated);
    return 1.0 / (1.0 + std::exp(l0 - l1));
}

Dataset gen_zafar(const ZafarConfig& cfg) {
    cfg.validate();
    // Embedding g(x) = T2 relu(T1 relu(T0 x + b0) + b1) + b2 from its own stream.
    Rng embed_rng(stream_seed(cfg.seed, 1));
    std::normal_distribution<double> stdnormal;
    const auto draw = [&](Eigen::Index rows, Eigen::Index cols, double sd) {
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = sd * stdnormal(embed_rng);
        return m;
    };
    const int h = cfg.embed_hidden, p = cfg.embed_out;
    const double bias_sd = std::sqrt(0.1);
    const Matrix t0 = draw(h, 2, std::sqrt(1.0 / 2.0));
    const Vector b0 = draw(h, 1, bias_sd);
    const Matrix t1 = draw(h, h, std::sqrt(1.0 / h));
    const Vector b1 = draw(h, 1, bias_sd);
    const Matrix t2 = draw(p, h, std::sqrt(1.0 / h));
    const Vector b2 = draw(p, 1, bias_sd);

    const Eigen::Matrix2d chol0 = class_gaussian(0).cov.llt().matrixL();
    const Eigen::Matrix2d chol1 = class_gaussian(1).cov.llt().matrixL();
    // row-vector convention x' = x^T R(theta), i.e. a rotation by -theta
    Eigen::Matrix2d rot;
    rot << std::cos(cfg.theta), std::sin(cfg.theta), -std::sin(cfg.theta), std::cos(cfg.theta);

    Rng rng(stream_seed(cfg.seed, 0));
    std::normal_distribution<double> normal;
    std::bernoulli_distribution coin(0.5);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const auto n = static_cast<Eigen::Index>(cfg.n);
    Dataset data;
    data.features.resize(n, cfg.protected_as_feature ? p + 1 : p);
    data.labels.resize(cfg.n);
    data.protected_attr.resize(cfg.n);
    for (int j = 0; j < p; ++j) data.feature_names.push_back("g" + std::to_string(j));
    if (cfg.protected_as_feature) data.feature_names.push_back("a");

    for (Eigen::Index i = 0; i < n; ++i) {
        const int y = coin(rng) ? 1 : 0;
        const double z0 = normal(rng);
        const Eigen::Vector2d z(z0, normal(rng));
        const Eigen::Vector2d x = class_gaussian(y).mean + (y ? chol1 : chol0) * z;
        const double pa = zafar_protected_probability(rot * x);
        const int a = unif(rng) < pa ? 1 : 0;
        const Vector hidden0 = (t0 * x + b0).cwiseMax(0.0);
        const Vector hidden1 = (t1 * hidden0 + b1).cwiseMax(0.0);
        const Vector features = t2 * hidden1 + b2;
        data.features.row(i).head(p) = features.transpose();
        if (cfg.protected_as_feature) data.features(i, p) = a;
        data.labels[static_cast<std::size_t>(i)] = y;
        data.protected_attr[static_cast<std::size_t>(i)] = a;
    }
    return data;
}

}  // namespace intrafair
