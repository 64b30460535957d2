#include "ants/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "ants/errors.hpp"

namespace ants {

namespace {

std::vector<double> sorted_checked(std::span<const double> v, const char* side) {
    if (v.empty()) {
        throw InputError(std::string("metrics need at least one ") + side + " score");
    }
    std::vector<double> out(v.begin(), v.end());
    for (double x : out) {
        if (std::isnan(x)) {
            throw InputError(std::string("NaN among ") + side + " scores");
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

double auroc(std::span<const double> id_scores, std::span<const double> ood_scores) {
    const auto id = sorted_checked(id_scores, "ID");
    const auto ood = sorted_checked(ood_scores, "OOD");
    // Twice the Mann-Whitney U statistic, kept integral.
    std::uint64_t twice_u = 0;
    for (double s : id) {
        const auto lo = std::lower_bound(ood.begin(), ood.end(), s);
        const auto hi = std::upper_bound(lo, ood.end(), s);
        twice_u += 2 * static_cast<std::uint64_t>(lo - ood.begin()) +
                   static_cast<std::uint64_t>(hi - lo);
    }
    return static_cast<double>(twice_u) /
           (2.0 * static_cast<double>(id.size()) * static_cast<double>(ood.size()));
}

double fpr95_threshold(std::span<const double> id_scores) {
    const auto id = sorted_checked(id_scores, "ID");
    return id[id.size() / 20];
}

double fpr95(std::span<const double> id_scores, std::span<const double> ood_scores) {
    const double gamma = fpr95_threshold(id_scores);
    const auto ood = sorted_checked(ood_scores, "OOD");
    const auto at_or_above = ood.end() - std::lower_bound(ood.begin(), ood.end(), gamma);
    return static_cast<double>(at_or_above) / static_cast<double>(ood.size());
}

namespace {

DatasetMetrics metrics_for(const std::vector<double>& id, const std::vector<double>& ood) {
    return {auroc(id, ood), fpr95(id, ood), id.size(), ood.size()};
}

MetricReport report_from(std::span<const ScoreRecord> records, std::span<const TruthRow> truth) {
    // truth is aligned with records here.
    std::vector<double> id;
    std::vector<double> ood;
    std::map<std::string, std::vector<double>> by_dataset;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (truth[i].tag == Tag::ID) {
            id.push_back(records[i].s_ada);
        } else {
            ood.push_back(records[i].s_ada);
            if (!truth[i].dataset.empty()) {
                by_dataset[truth[i].dataset].push_back(records[i].s_ada);
            }
        }
    }
    if (id.empty() || ood.empty()) {
        throw InputError("evaluation needs both ID and OOD rows (got " + std::to_string(id.size()) +
                         " ID, " + std::to_string(ood.size()) + " OOD)");
    }
    const auto all = metrics_for(id, ood);
    MetricReport r{all.auroc, all.fpr95, all.n_id, all.n_ood, {}};
    for (const auto& [name, scores] : by_dataset) {
        r.per_dataset[name] = metrics_for(id, scores);
    }
    return r;
}

} // namespace

MetricReport evaluate(std::span<const ScoreRecord> records, std::span<const TruthRow> truth) {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!index.emplace(truth[i].image_id, i).second) {
            throw InputError("ground truth lists '" + truth[i].image_id + "' twice");
        }
    }
    std::vector<std::string> offenders;
    std::vector<TruthRow> aligned;
    aligned.reserve(records.size());
    std::unordered_map<std::string, bool> seen;
    for (const auto& r : records) {
        const auto it = index.find(r.image_id);
        if (it == index.end() || !seen.emplace(r.image_id, true).second) {
            offenders.push_back(r.image_id);
            continue;
        }
        aligned.push_back(truth[it->second]);
    }
    for (const auto& t : truth) {
        if (!seen.contains(t.image_id)) {
            offenders.push_back(t.image_id);
        }
    }
    if (!offenders.empty()) {
        std::string msg = "records and ground truth disagree on " +
                          std::to_string(offenders.size()) + " id(s):";
        for (std::size_t i = 0; i < std::min<std::size_t>(10, offenders.size()); ++i) {
            msg += " " + offenders[i];
        }
        throw InputError(msg);
    }
    return report_from(records, aligned);
}

std::vector<TruthRow> truth_from_records(std::span<const ScoreRecord> records) {
    std::vector<TruthRow> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        if (!r.tag) {
            throw InputError("record '" + r.image_id + "' carries no ground-truth tag");
        }
        out.push_back({r.image_id, *r.tag, {}});
    }
    return out;
}

MetricReport evaluate(std::span<const ScoreRecord> records) {
    const auto truth = truth_from_records(records);
    return report_from(records, truth);
}

std::vector<std::size_t> histogram(std::span<const double> scores, std::size_t bins) {
    if (bins == 0) {
        throw InputError("histogram needs at least one bin");
    }
    std::vector<std::size_t> counts(bins, 0);
    for (double s : scores) {
        if (std::isnan(s)) {
            continue;
        }
        const double c = std::clamp(s, 0.0, 1.0);
        auto b = static_cast<std::size_t>(c * static_cast<double>(bins));
        ++counts[std::min(b, bins - 1)];
    }
    return counts;
}

nlohmann::json to_json(const MetricReport& report) {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [name, m] : report.per_dataset) {
        per[name] = {{"auroc", m.auroc}, {"fpr95", m.fpr95}, {"n_id", m.n_id}, {"n_ood", m.n_ood}};
    }
    return {{"auroc", report.auroc},
            {"fpr95", report.fpr95},
            {"n_id", report.n_id},
            {"n_ood", report.n_ood},
            {"per_dataset", per}};
}

MetricReport metric_report_from_json(const nlohmann::json& j) {
    try {
        MetricReport r;
        r.auroc = j.at("auroc").get<double>();
        r.fpr95 = j.at("fpr95").get<double>();
        r.n_id = j.at("n_id").get<std::size_t>();
        r.n_ood = j.at("n_ood").get<std::size_t>();
        if (j.contains("per_dataset")) {
            for (const auto& [name, m] : j.at("per_dataset").items()) {
                r.per_dataset[name] = {m.at("auroc").get<double>(), m.at("fpr95").get<double>(),
                                       m.at("n_id").get<std::size_t>(),
                                       m.at("n_ood").get<std::size_t>()};
            }
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("metric report: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV

namespace csv {

std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
                ++i;
            }
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) {
        throw FormatError("CSV: unterminated quoted field");
    }
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_score(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

} // namespace csv

namespace {

std::string read_text(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + file.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + file.string());
    }
    out << text;
    if (!out) {
        throw IoError("failed writing " + file.string());
    }
}

double parse_double(const std::string& s, const std::filesystem::path& file, std::size_t line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw FormatError(file.string() + ":" + std::to_string(line) + ": bad number '" + s + "'");
    }
}

std::vector<std::vector<std::string>> rows_with_header(const std::filesystem::path& file,
                                                        const std::vector<std::string>& header,
                                                        std::size_t optional_trailing = 0) {
    auto rows = csv::parse(read_text(file));
    if (rows.empty()) {
        throw FormatError(file.string() + ": missing header row");
    }
    const auto& h = rows.front();
    const bool ok = h.size() >= header.size() - optional_trailing && h.size() <= header.size() &&
                    std::equal(h.begin(), h.end(), header.begin());
    if (!ok) {
        throw FormatError(file.string() + ": unexpected header");
    }
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].size() != h.size()) {
            throw FormatError(file.string() + ":" + std::to_string(i + 1) + ": expected " +
                              std::to_string(h.size()) + " fields");
        }
    }
    return rows;
}

const std::vector<std::string> kRecordHeader = {"image_id", "s_nl", "s_ens", "s_vsnl",
                                                "s_ada", "predicted_class", "tag"};

} // namespace

void write_records_csv(const std::filesystem::path& file, std::span<const ScoreRecord> records) {
    std::string text = "image_id,s_nl,s_ens,s_vsnl,s_ada,predicted_class,tag\n";
    for (const auto& r : records) {
        text += csv::quote(r.image_id);
        for (double v : {r.s_nl, r.s_ens, r.s_vsnl, r.s_ada}) {
            text += ',' + csv::format_score(v);
        }
        text += ',' + std::to_string(r.predicted_class) + ',';
        if (r.tag) {
            text += to_string(*r.tag);
        }
        text += '\n';
    }
    write_text(file, text);
}

std::vector<ScoreRecord> read_records_csv(const std::filesystem::path& file) {
    const auto rows = rows_with_header(file, kRecordHeader);
    std::vector<ScoreRecord> out;
    out.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        ScoreRecord r;
        r.image_id = f[0];
        r.s_nl = parse_double(f[1], file, i + 1);
        r.s_ens = parse_double(f[2], file, i + 1);
        r.s_vsnl = parse_double(f[3], file, i + 1);
        r.s_ada = parse_double(f[4], file, i + 1);
        try {
            r.predicted_class = std::stoul(f[5]);
        } catch (const std::exception&) {
            throw FormatError(file.string() + ":" + std::to_string(i + 1) + ": bad class index");
        }
        if (!f[6].empty()) {
            r.tag = tag_from_string(f[6]);
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_truth_csv(const std::filesystem::path& file, std::span<const TruthRow> truth) {
    std::string text = "image_id,tag,dataset\n";
    for (const auto& t : truth) {
        text += csv::quote(t.image_id) + ',' + std::string(to_string(t.tag)) + ',' +
                csv::quote(t.dataset) + '\n';
    }
    write_text(file, text);
}

std::vector<TruthRow> read_truth_csv(const std::filesystem::path& file) {
    const auto rows = rows_with_header(file, {"image_id", "tag", "dataset"}, 1);
    std::vector<TruthRow> out;
    out.reserve(rows.size() - 1);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& f = rows[i];
        TruthRow t;
        t.image_id = f[0];
        try {
            t.tag = tag_from_string(f[1]);
        } catch (const Error&) {
            throw FormatError(file.string() + ":" + std::to_string(i + 1) + ": bad tag '" + f[1] +
                              "'");
        }
        if (f.size() > 2) {
            t.dataset = f[2];
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_histogram_csv(const std::filesystem::path& file, std::span<const double> scores,
                         std::size_t bins) {
    const auto counts = histogram(scores, bins);
    std::string text = "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < bins; ++b) {
        text += csv::format_score(static_cast<double>(b) / static_cast<double>(bins)) + ',' +
                csv::format_score(static_cast<double>(b + 1) / static_cast<double>(bins)) + ',' +
                std::to_string(counts[b]) + '\n';
    }
    write_text(file, text);
}

std::optional<MetricReport> export_results(std::span<const ScoreRecord> records,
                                           std::span<const TruthRow> truth,
                                           const std::filesystem::path& dir,
                                           ExportPaths* written) {
    if (records.empty()) {
        throw InputError("export_results: no records");
    }
    std::optional<MetricReport> report;
    if (!truth.empty()) {
        report = evaluate(records, truth);
    } else if (std::all_of(records.begin(), records.end(),
                           [](const ScoreRecord& r) { return r.tag.has_value(); })) {
        report = evaluate(records);
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
    ExportPaths paths{dir / "records.csv", dir / "metrics.json", dir / "histogram.csv"};
    write_records_csv(paths.records, records);
    std::vector<double> ada;
    ada.reserve(records.size());
    for (const auto& r : records) {
        ada.push_back(r.s_ada);
    }
    write_histogram_csv(paths.histogram, ada);
    if (report) {
        write_text(paths.metrics, to_json(*report).dump(2) + "\n");
    } else {
        paths.metrics.clear();
    }
    if (written) {
        *written = paths;
    }
    return report;
}

} // namespace ants
