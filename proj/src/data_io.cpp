#include "intrafair/data_io.hpp"

#include "intrafair/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace intrafair {

void CsvSchema::validate() const {
    if (label_column.empty() || protected_column.empty()) throw ConfigError("CSV schema needs label and protected columns");
    if (label_column == protected_column) throw ConfigError("label and protected columns must differ");
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

/// Reads one logical record (may span lines inside quotes). Returns false at EOF.
bool read_record(std::istream& in, std::string& record, long& line) {
    record.clear();
    std::string part;
    bool in_quotes = false;
    bool any = false;
    while (std::getline(in, part)) {
        ++line;
        any = true;
        if (!record.empty() || in_quotes) record += '\n';
        record += part;
        for (char c : part)
            if (c == '"') in_quotes = !in_quotes;
        if (!in_quotes) return true;
    }
    if (in_quotes) throw ParseError("unterminated quoted field", line);
    return any;
}

}  // namespace

std::vector<std::string> split_csv_record(const std::string& record) {
    std::vector<std::string> fields;
    std::string cur;
    bool in_quotes = false;
    for (std::size_t i = 0; i < record.size(); ++i) {
        const char c = record[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < record.size() && record[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(trim(cur));
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') fields.back().pop_back();
    return fields;
}

Dataset parse_csv(std::istream& in, const CsvSchema& schema) {
    schema.validate();
    std::string record;
    long line = 0;
    if (!read_record(in, record, line) || trim(record).empty()) throw ParseError("empty CSV file");
    if (record.size() >= 3 && record.compare(0, 3, "\xEF\xBB\xBF") == 0) record.erase(0, 3);
    const auto header = split_csv_record(record);

    const auto find_col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ParseError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t label_idx = find_col(schema.label_column);
    const std::size_t prot_idx = find_col(schema.protected_column);
    for (const auto& d : schema.drop_columns) (void)find_col(d);

    std::vector<std::vector<std::string>> rows;
    std::vector<long> row_lines;
    while (read_record(in, record, line)) {
        if (trim(record).empty()) continue;
        auto fields = split_csv_record(record);
        if (fields.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(fields.size()),
                             line);
        rows.push_back(std::move(fields));
        row_lines.push_back(line);
    }
    if (rows.empty()) throw ParseError("CSV file has a header but no data rows");

    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (c == label_idx) continue;
        if (c == prot_idx && !schema.keep_protected_feature) continue;
        if (std::find(schema.drop_columns.begin(), schema.drop_columns.end(), header[c]) != schema.drop_columns.end())
            continue;
        feature_cols.push_back(c);
    }

    // Column typing: numeric iff every cell parses as a finite number.
    struct ColumnPlan {
        std::size_t source;
        bool numeric;
        std::vector<std::string> categories;
    };
    std::vector<ColumnPlan> plans;
    std::size_t width = 0;
    for (auto c : feature_cols) {
        ColumnPlan plan{c, true, {}};
        double tmp;
        for (const auto& r : rows)
            if (!parse_double(r[c], tmp)) {
                plan.numeric = false;
                break;
            }
        if (!plan.numeric) {
            std::set<std::string> cats;
            for (const auto& r : rows) cats.insert(r[c]);
            plan.categories.assign(cats.begin(), cats.end());
        }
        width += plan.numeric ? 1 : plan.categories.size();
        plans.push_back(std::move(plan));
    }

    Dataset data;
    data.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (const auto& plan : plans) {
        if (plan.numeric) data.feature_names.push_back(header[plan.source]);
        else
            for (const auto& cat : plan.categories) data.feature_names.push_back(header[plan.source] + "=" + cat);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        Eigen::Index col = 0;
        for (const auto& plan : plans) {
            if (plan.numeric) {
                double v = 0.0;
                if (!parse_double(r[plan.source], v))
                    throw ParseError("cannot parse '" + r[plan.source] + "' as a number", row_lines[i]);
                data.features(static_cast<Eigen::Index>(i), col++) = v;
            } else {
                const auto it = std::lower_bound(plan.categories.begin(), plan.categories.end(), r[plan.source]);
                data.features(static_cast<Eigen::Index>(i), col + (it - plan.categories.begin())) = 1.0;
                col += static_cast<Eigen::Index>(plan.categories.size());
            }
        }
        data.labels.push_back(r[label_idx] == schema.positive_label ? 1 : 0);
        data.protected_attr.push_back(r[prot_idx] == schema.privileged_value ? 1 : 0);
    }
    return data;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open CSV file " + path.string());
    return parse_csv(in, schema);
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    data.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot write CSV file " + path.string());
    const auto quote = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) {
            if (c == '"') q += '"';
            q += c;
        }
        return q + "\"";
    };
    for (std::size_t j = 0; j < data.num_features(); ++j)
        out << quote(j < data.feature_names.size() ? data.feature_names[j] : "f" + std::to_string(j)) << ',';
    out << "label,protected\n";
    char buf[32];
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.features.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", data.features(static_cast<Eigen::Index>(i), j));
            out << buf << ',';
        }
        out << data.labels[i] << ',' << data.protected_attr[i] << '\n';
    }
}

// ---------------------------------------------------------------------------

void SplitSpec::validate() const {
    if (!(train > 0.0 && valid > 0.0 && test > 0.0)) throw ConfigError("split ratios must all be positive");
    if (std::abs(train + valid + test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
}

std::vector<std::size_t> largest_remainder(std::size_t n, const std::vector<double>& ratios) {
    std::vector<std::size_t> sizes(ratios.size());
    std::vector<double> frac(ratios.size());
    std::size_t used = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        // Guard against 0.6*10 = 5.999... style representation error.
        const double fl = std::floor(exact + 1e-9);
        sizes[i] = static_cast<std::size_t>(fl);
        frac[i] = std::max(0.0, exact - fl);
        used += sizes[i];
    }
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
    for (std::size_t k = 0; used < n; ++k, ++used) ++sizes[order[k % order.size()]];
    return sizes;
}

DataSplit split(const Dataset& data, const SplitSpec& spec) {
    spec.validate();
    if (data.size() < 3) throw PreconditionError("split needs at least 3 rows");
    Rng rng(spec.seed);
    const std::vector<double> ratios{spec.train, spec.valid, spec.test};

    DataSplit out;
    std::vector<std::size_t>* parts[3] = {&out.train_rows, &out.valid_rows, &out.test_rows};
    const auto partition = [&](std::vector<std::size_t> rows) {
        std::shuffle(rows.begin(), rows.end(), rng);
        const auto sizes = largest_remainder(rows.size(), ratios);
        std::size_t offset = 0;
        for (int p = 0; p < 3; ++p) {
            parts[p]->insert(parts[p]->end(), rows.begin() + static_cast<std::ptrdiff_t>(offset),
                             rows.begin() + static_cast<std::ptrdiff_t>(offset + sizes[static_cast<std::size_t>(p)]));
            offset += sizes[static_cast<std::size_t>(p)];
        }
    };
    if (spec.stratify_by_label) {
        std::vector<std::size_t> cls[2];
        for (std::size_t i = 0; i < data.size(); ++i) cls[data.labels[i] ? 1 : 0].push_back(i);
        for (const auto& c : cls)
            if (c.size() < 3) throw PreconditionError("stratified split needs at least 3 rows per label class");
        partition(cls[0]);
        partition(cls[1]);
    } else {
        std::vector<std::size_t> all(data.size());
        std::iota(all.begin(), all.end(), std::size_t{0});
        partition(std::move(all));
    }
    out.train = data.subset(out.train_rows);
    out.valid = data.subset(out.valid_rows);
    out.test = data.subset(out.test_rows);
    return out;
}

Standardizer Standardizer::fit(const Dataset& train) {
    if (train.empty()) throw PreconditionError("standardize: empty training data");
    Standardizer s;
    s.mean = train.features.colwise().mean().transpose();
    const Matrix centered = train.features.rowwise() - s.mean.transpose();
    s.sd = (centered.colwise().squaredNorm().transpose() / static_cast<double>(train.size())).cwiseSqrt();
    return s;
}

void Standardizer::apply(Dataset& data) const {
    if (data.features.cols() != mean.size()) throw PreconditionError("standardize: feature count mismatch");
    data.features.rowwise() -= mean.transpose();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
        if (sd[j] > 1e-12 * std::max(1.0, std::abs(mean[j]))) data.features.col(j) /= sd[j];
}

}  // namespace intrafair
