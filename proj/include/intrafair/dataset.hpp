#pragma once

#include "intrafair/types.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace intrafair {

/// Feature matrix (one row per sample) with binary labels and a binary
/// protected attribute.
struct Dataset {
    Matrix features;
    BinaryVector labels;
    BinaryVector protected_attr;
    std::vector<std::string> feature_names;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t num_features() const noexcept { return static_cast<std::size_t>(features.cols()); }
    bool empty() const noexcept { return labels.empty(); }

    /// Throws PreconditionError if row counts disagree, a binary column holds
    /// something other than 0/1, or a feature entry is non-finite.
    void validate() const;

    Dataset subset(std::span<const std::size_t> rows) const;
};

}  // namespace intrafair
