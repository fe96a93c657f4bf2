#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "likert/dataset.hpp"
#include "likert/embedding_io.hpp"
#include "likert/scale.hpp"
#include "likert/stats.hpp"

namespace likert {

// One annotation row: a single annotator's rating of one item.
struct AnnotationRecord {
    std::string item_id;
    std::string text;
    int rating = 0;
    std::string annotator_id;
};

enum class AnnotationFormat { Jsonl, Csv };

inline AnnotationFormat parse_annotation_format(const std::string& name) {
    if (name == "jsonl") return AnnotationFormat::Jsonl;
    if (name == "csv") return AnnotationFormat::Csv;
    throw std::invalid_argument("unknown annotation format: " + name);
}

struct LineError {
    std::size_t line = 0;  // 1-based
    std::string message;
};

struct ParseReport {
    std::vector<AnnotationRecord> records;
    std::vector<LineError> errors;
    std::size_t data_lines = 0;  // non-blank lines considered
};

struct IngestConfig {
    int k_levels = 5;
    int min_annotators = 1;
    bool merge_duplicate_texts = false;

    void validate() const {
        RatingScale{k_levels}.validate();
        if (min_annotators < 1) throw std::invalid_argument("IngestConfig: min_annotators must be at least 1");
    }
};

namespace detail {

// One CSV line; double quotes wrap fields, doubled quotes escape. Embedded
// newlines are not supported.
inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

inline bool parse_strict_int(const std::string& s, int& out) {
    if (s.empty()) return false;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    long long value = 0;
    for (; i < s.size(); ++i) {
        if (s[i] < '0' || s[i] > '9') return false;
        value = value * 10 + (s[i] - '0');
        if (value > 1000000) return false;
    }
    out = static_cast<int>(s[0] == '-' ? -value : value);
    return true;
}

inline void check_rating(int rating, const RatingScale& scale) {
    if (!scale.contains(rating)) {
        throw std::invalid_argument("rating out of scale: " + std::to_string(rating));
    }
}

inline AnnotationRecord record_from_json(const std::string& line, const RatingScale& scale) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
        throw std::invalid_argument("malformed JSON");
    }
    if (!obj.is_object()) throw std::invalid_argument("expected a JSON object");
    AnnotationRecord rec;
    if (obj.contains("item_id") && obj["item_id"].is_string()) {
        rec.item_id = obj["item_id"].get<std::string>();
    } else if (obj.contains("item_id") && obj["item_id"].is_number_integer()) {
        rec.item_id = std::to_string(obj["item_id"].get<long long>());
    }
    if (rec.item_id.empty()) throw std::invalid_argument("missing item_id");
    if (!obj.contains("rating") || !obj["rating"].is_number_integer()) {
        throw std::invalid_argument("unknown rating value");
    }
    rec.rating = obj["rating"].get<int>();
    check_rating(rec.rating, scale);
    if (obj.contains("annotator_id") && obj["annotator_id"].is_string()) {
        rec.annotator_id = obj["annotator_id"].get<std::string>();
    }
    if (obj.contains("text") && obj["text"].is_string()) {
        rec.text = obj["text"].get<std::string>();
    }
    return rec;
}

}  // namespace detail

// Parses an annotation file, collecting malformed lines instead of failing
// fast. Aborts when more than 1% of the data lines are malformed.
inline ParseReport parse_annotations(const std::string& path, AnnotationFormat format,
                                     const RatingScale& scale) {
    scale.validate();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open annotations file: " + path);

    ParseReport report;
    std::string line;
    std::size_t line_no = 0;

    std::vector<std::string> header;
    std::size_t col_item = 0, col_rating = 0, col_annotator = 0, col_text = 0;
    bool has_annotator = false, has_text = false;
    if (format == AnnotationFormat::Csv) {
        if (!std::getline(in, line)) throw std::runtime_error("csv file is empty: " + path);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        header = detail::split_csv_line(line);
        auto find_col = [&](const std::string& name, std::size_t& out) {
            auto it = std::find(header.begin(), header.end(), name);
            if (it == header.end()) return false;
            out = static_cast<std::size_t>(it - header.begin());
            return true;
        };
        if (!find_col("item_id", col_item) || !find_col("rating", col_rating)) {
            throw std::runtime_error("csv header must name item_id and rating columns: " + path);
        }
        has_annotator = find_col("annotator_id", col_annotator);
        has_text = find_col("text", col_text);
    }

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++report.data_lines;
        try {
            if (format == AnnotationFormat::Jsonl) {
                report.records.push_back(detail::record_from_json(line, scale));
            } else {
                const auto fields = detail::split_csv_line(line);
                if (fields.size() != header.size()) {
                    throw std::invalid_argument("wrong field count");
                }
                AnnotationRecord rec;
                rec.item_id = fields[col_item];
                if (rec.item_id.empty()) throw std::invalid_argument("missing item_id");
                if (!detail::parse_strict_int(fields[col_rating], rec.rating)) {
                    throw std::invalid_argument("unknown rating value: '" + fields[col_rating] + "'");
                }
                detail::check_rating(rec.rating, scale);
                if (has_annotator) rec.annotator_id = fields[col_annotator];
                if (has_text) rec.text = fields[col_text];
                report.records.push_back(std::move(rec));
            }
        } catch (const std::invalid_argument& e) {
            report.errors.push_back({line_no, e.what()});
        }
    }

    if (report.data_lines > 0 &&
        static_cast<double>(report.errors.size()) > 0.01 * static_cast<double>(report.data_lines)) {
        std::ostringstream msg;
        msg << "too many malformed lines in " << path << ": " << report.errors.size() << " of "
            << report.data_lines;
        for (std::size_t i = 0; i < report.errors.size() && i < 5; ++i) {
            msg << "\n  line " << report.errors[i].line << ": " << report.errors[i].message;
        }
        throw std::runtime_error(msg.str());
    }
    return report;
}

// Groups per-annotation records into items, optionally merging items whose
// text is byte-identical, then drops items with too few ratings. Merging
// happens before the threshold so merged duplicates can survive it.
inline std::vector<ItemAnnotations> group_and_filter(const std::vector<AnnotationRecord>& records,
                                                     const IngestConfig& cfg) {
    cfg.validate();
    const RatingScale scale{cfg.k_levels};

    struct Group {
        std::string id;
        std::string text;
        std::vector<int> ratings;
    };
    std::vector<Group> groups;
    std::unordered_map<std::string, std::size_t> by_id;
    for (const auto& rec : records) {
        detail::check_rating(rec.rating, scale);
        auto [it, inserted] = by_id.emplace(rec.item_id, groups.size());
        if (inserted) {
            groups.push_back({rec.item_id, rec.text, {}});
        }
        auto& group = groups[it->second];
        group.ratings.push_back(rec.rating);
        if (group.text.empty() && !rec.text.empty()) group.text = rec.text;
    }

    if (cfg.merge_duplicate_texts) {
        // Only items that actually carry text can be recognized as
        // duplicates; the merged item keeps the earliest id.
        std::unordered_map<std::string, std::size_t> by_text;
        std::vector<Group> merged;
        for (auto& group : groups) {
            if (group.text.empty()) {
                merged.push_back(std::move(group));
                continue;
            }
            auto [it, inserted] = by_text.emplace(group.text, merged.size());
            if (inserted) {
                merged.push_back(std::move(group));
            } else {
                auto& target = merged[it->second];
                target.ratings.insert(target.ratings.end(), group.ratings.begin(), group.ratings.end());
            }
        }
        groups = std::move(merged);
    }

    std::vector<ItemAnnotations> items;
    for (auto& group : groups) {
        if (group.ratings.size() < static_cast<std::size_t>(cfg.min_annotators)) continue;
        items.push_back(ItemAnnotations{std::move(group.id), std::move(group.ratings)});
    }
    return items;
}

struct Histogram {
    std::vector<double> edges;
    std::vector<std::size_t> counts;
    std::vector<double> density;  // count / (total * bin width)
};

namespace detail {

inline Histogram make_histogram(const std::vector<double>& values, double lo, double hi, int bins) {
    Histogram h;
    h.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) {
        h.edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    h.density.assign(static_cast<std::size_t>(bins), 0.0);
    for (double v : values) {
        int b = static_cast<int>(std::floor((v - lo) / (hi - lo) * bins));
        if (b < 0) b = 0;
        if (b >= bins) b = bins - 1;
        h.counts[static_cast<std::size_t>(b)] += 1;
    }
    if (!values.empty()) {
        const double width = (hi - lo) / static_cast<double>(bins);
        for (int b = 0; b < bins; ++b) {
            h.density[static_cast<std::size_t>(b)] =
                static_cast<double>(h.counts[static_cast<std::size_t>(b)]) /
                (static_cast<double>(values.size()) * width);
        }
    }
    return h;
}

}  // namespace detail

// Corpus-level statistics: normalized-density histograms of per-item mean
// and variance, and annotators-per-item counts. Items with one rating are
// excluded from the variance histogram (their variance is undefined).
struct CorpusSummary {
    std::size_t n_items = 0;
    std::size_t n_annotations = 0;
    double annotators_mean = 0.0;
    std::size_t annotators_min = 0;
    std::size_t annotators_max = 0;
    Histogram mean_hist;
    Histogram variance_hist;
    std::size_t variance_items = 0;  // items with at least 2 ratings
};

inline CorpusSummary summarize(const std::vector<ItemAnnotations>& items, const RatingScale& scale,
                               int bins = 20) {
    if (items.empty()) throw std::invalid_argument("summarize: no items");
    scale.validate();
    if (bins < 1) throw std::invalid_argument("summarize: bins must be at least 1");
    CorpusSummary s;
    s.n_items = items.size();
    s.annotators_min = items.front().ratings.size();
    std::vector<double> means;
    std::vector<double> variances;
    for (const auto& item : items) {
        item.validate(scale);
        const std::size_t n = item.ratings.size();
        s.n_annotations += n;
        s.annotators_min = std::min(s.annotators_min, n);
        s.annotators_max = std::max(s.annotators_max, n);
        means.push_back(rating_mean(item.ratings));
        if (n >= 2) variances.push_back(unbiased_variance(item.ratings));
    }
    s.annotators_mean = static_cast<double>(s.n_annotations) / static_cast<double>(s.n_items);
    s.variance_items = variances.size();
    s.mean_hist = detail::make_histogram(means, 0.0, static_cast<double>(scale.k - 1), bins);
    s.variance_hist = detail::make_histogram(variances, 0.0, max_unbiased_variance(scale), bins);
    return s;
}

inline std::string histogram_csv(const Histogram& h) {
    std::ostringstream out;
    out << "bin_lo,bin_hi,density\n";
    out.precision(17);
    for (std::size_t b = 0; b + 1 < h.edges.size(); ++b) {
        out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.density[b] << '\n';
    }
    return out.str();
}

// Joins filtered items with their feature vectors; every item must have an
// embedding row.
inline Dataset build_dataset(const std::vector<ItemAnnotations>& items, const EmbeddingStore& store,
                             const RatingScale& scale) {
    std::vector<std::string> missing;
    for (const auto& item : items) {
        if (!store.contains(item.id)) missing.push_back(item.id);
    }
    if (!missing.empty()) {
        std::ostringstream msg;
        msg << "missing embedding for " << missing.size() << " item(s):";
        for (std::size_t i = 0; i < missing.size() && i < 5; ++i) msg << " '" << missing[i] << "'";
        if (missing.size() > 5) msg << " ...";
        throw std::invalid_argument(msg.str());
    }
    Dataset ds;
    ds.scale = scale;
    ds.feature_dim = store.dim;
    ds.items.reserve(items.size());
    for (const auto& item : items) {
        ds.items.push_back(make_dataset_item(item, scale, store.at(item.id)));
    }
    ds.validate();
    return ds;
}

}  // namespace likert
