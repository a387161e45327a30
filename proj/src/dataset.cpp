#include "intrafair/dataset.hpp"

#include "intrafair/errors.hpp"

namespace intrafair {

void Dataset::validate() const {
    const auto n = labels.size();
    if (protected_attr.size() != n || static_cast<std::size_t>(features.rows()) != n)
        throw PreconditionError("dataset row counts disagree: features=" + std::to_string(features.rows()) +
                                " labels=" + std::to_string(n) +
                                " protected=" + std::to_string(protected_attr.size()));
    if (!feature_names.empty() && feature_names.size() != num_features())
        throw PreconditionError("feature_names size does not match feature columns");
    for (std::size_t i = 0; i < n; ++i) {
        if ((labels[i] != 0 && labels[i] != 1) || (protected_attr[i] != 0 && protected_attr[i] != 1))
            throw PreconditionError("labels and protected attribute must be 0/1 (row " + std::to_string(i) + ")");
    }
    if (!features.allFinite()) throw PreconditionError("dataset features contain non-finite values");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    out.protected_attr.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto r = rows[k];
        out.features.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(r));
        out.labels.push_back(labels[r]);
        out.protected_attr.push_back(protected_attr[r]);
    }
    out.feature_names = feature_names;
    return out;
}

}  // namespace intrafair
