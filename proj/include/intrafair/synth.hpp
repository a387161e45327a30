#pragma once

#include "intrafair/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>

namespace intrafair {

/// Logit model with a tunable label/attribute interaction:
///   logit = (x1 + x2 - x5)/2 + 2 * alpha * a * 1{x6 odd}
/// x1,x2,x3,x7..x10 ~ N(0,1) with corr(x2,x3) = 0.5 and pairwise 0.5 among
/// x7..x10; x4 ~ Exp(1); x5 ~ Bernoulli(1/2); x6 uniform on {0..9}, one-hot
/// by default;
/// a ~ Bernoulli(1/2).
struct LohConfig {
    std::size_t n = 10000;
    double alpha = 1.0;
    std::uint64_t seed = 0;
    bool protected_as_feature = true;  // append a as the last feature column
    bool one_hot_category = true;      // x6 as ten indicator columns, else its code

    void validate() const;
};

Dataset gen_loh(const LohConfig& cfg);

/// Rotated class-conditional Gaussians with a random two-hidden-layer ReLU
/// embedding. The attribute is drawn from the label posterior evaluated at the
/// rotated point x^T R(theta), while the features embed the unrotated point.
/// theta near pi/2 decorrelates label and attribute; smaller theta raises the
/// parity gap.
struct ZafarConfig {
    std::size_t n = 10000;
    double theta = 1.2;
    int embed_hidden = 16;
    int embed_out = 20;
    std::uint64_t seed = 0;
    bool protected_as_feature = false;

    void validate() const;
};

Dataset gen_zafar(const ZafarConfig& cfg);

/// p(x | y=1) / (p(x | y=1) + p(x | y=0)) for the two class-conditional
/// Gaussians; this is P(a=1) at a rotated point.
double zafar_protected_probability(const Eigen::Vector2d& rotated);

}  // namespace intrafair
