#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ants/scoring.hpp"

namespace ants {

/// Probability that a random ID score exceeds a random OOD score, ties counted 0.5.
/// Throws InputError when either side is empty.
double auroc(std::span<const double> id_scores, std::span<const double> ood_scores);

/// Fraction of OOD scores at or above the largest threshold that keeps at least 95% of ID
/// scores (no interpolation). Throws InputError when either side is empty.
double fpr95(std::span<const double> id_scores, std::span<const double> ood_scores);

/// The threshold fpr95 uses: the (floor(n / 20) + 1)-th smallest ID score.
double fpr95_threshold(std::span<const double> id_scores);

struct DatasetMetrics {
    double auroc = 0.0;
    double fpr95 = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;

    friend bool operator==(const DatasetMetrics&, const DatasetMetrics&) = default;
};

struct MetricReport {
    double auroc = 0.0;
    double fpr95 = 0.0;
    std::size_t n_id = 0;
    std::size_t n_ood = 0;
    /// One entry per named OOD dataset, each scored against all ID images.
    std::map<std::string, DatasetMetrics> per_dataset;

    friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// One ground-truth row. `dataset` is optional and only meaningful for OOD rows.
struct TruthRow {
    std::string image_id;
    Tag tag = Tag::ID;
    std::string dataset;

    friend bool operator==(const TruthRow&, const TruthRow&) = default;
};

/// Metrics over S_ada. Records and truth must cover the same ids (any order); otherwise
/// InputError lists the first 10 offenders. Needs at least one ID and one OOD row.
MetricReport evaluate(std::span<const ScoreRecord> records, std::span<const TruthRow> truth);

/// Metrics from the tags carried by the records themselves.
MetricReport evaluate(std::span<const ScoreRecord> records);

/// Ground truth implied by tagged records (dataset left empty).
std::vector<TruthRow> truth_from_records(std::span<const ScoreRecord> records);

/// Counts of `scores` in `bins` uniform bins on [0, 1]; the last bin is closed.
std::vector<std::size_t> histogram(std::span<const double> scores, std::size_t bins = 50);

nlohmann::json to_json(const MetricReport& report);
MetricReport metric_report_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Files
//
// records CSV: image_id,s_nl,s_ens,s_vsnl,s_ada,predicted_class,tag
//              scores in shortest round-trip form (at least as precise as 9 significant
//              digits, and exact), tag "ID", "OOD" or empty.
// truth CSV:   image_id,tag[,dataset]
// histogram:   bin_lo,bin_hi,count

void write_records_csv(const std::filesystem::path& file, std::span<const ScoreRecord> records);
std::vector<ScoreRecord> read_records_csv(const std::filesystem::path& file);

void write_truth_csv(const std::filesystem::path& file, std::span<const TruthRow> truth);
std::vector<TruthRow> read_truth_csv(const std::filesystem::path& file);

void write_histogram_csv(const std::filesystem::path& file, std::span<const double> scores,
                         std::size_t bins = 50);

struct ExportPaths {
    std::filesystem::path records;
    std::filesystem::path metrics;
    std::filesystem::path histogram;
};

/// Writes records.csv, histogram.csv and, when ground truth is available (explicit or via
/// record tags), metrics.json into `dir`. Empty records throw InputError before any file is
/// written. Returns the report when one was computed.
std::optional<MetricReport> export_results(std::span<const ScoreRecord> records,
                                           std::span<const TruthRow> truth,
                                           const std::filesystem::path& dir,
                                           ExportPaths* written = nullptr);

// Minimal RFC-4180 helpers shared by the CSV readers and writers.
namespace csv {

std::string quote(std::string_view field);
/// Parses a whole document into rows of fields. Throws FormatError on unterminated quotes.
std::vector<std::vector<std::string>> parse(std::string_view text);
/// Shortest decimal form that parses back to exactly `v`.
std::string format_score(double v);

} // namespace csv

} // namespace ants
