#pragma once

#include "intrafair/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace intrafair {

struct CsvSchema {
    std::string label_column = "label";
    std::string positive_label = "1";
    std::string protected_column = "protected";
    std::string privileged_value = "1";
    std::vector<std::string> drop_columns;
    bool keep_protected_feature = false;  // otherwise the protected column is not a feature

    void validate() const;
};

/// Parses comma-separated text with a header row. Numeric columns pass
/// through; any other column is one-hot encoded with categories in
/// lexicographic order ("column=value"). label = 1 iff the cell equals
/// positive_label; protected = 1 iff it equals privileged_value.
Dataset parse_csv(std::istream& in, const CsvSchema& schema);
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);

/// Writes features, then "label" and "protected" columns, so the default
/// schema reads the file back.
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Splits one CSV record (quotes and escaped "" honoured). Exposed for tests.
std::vector<std::string> split_csv_record(const std::string& record);

struct SplitSpec {
    double train = 0.6;
    double valid = 0.2;
    double test = 0.2;
    std::uint64_t seed = 0;
    bool stratify_by_label = false;

    void validate() const;
};

struct DataSplit {
    Dataset train, valid, test;
    std::vector<std::size_t> train_rows, valid_rows, test_rows;
};

/// Partition sizes from ratios by largest-remainder rounding (ties go to the
/// earlier partition).
std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& ratios);

/// Seeded shuffle then partition; with stratification each label class is
/// shuffled and partitioned separately.
DataSplit split(const Dataset& data, const SplitSpec& spec);

/// Per-feature z-scoring with statistics from the training data. A
/// zero-variance column is only centred.
struct Standardizer {
    Vector mean;
    Vector sd;  // population standard deviation

    static Standardizer fit(const Dataset& train);
    void apply(Dataset& data) const;
};

}  // namespace intrafair
